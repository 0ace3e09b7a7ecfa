"""Indefinite-signature linear algebra on R^{q,n}.

R^{q,n} is R^n equipped with the symmetric bilinear form

    <u, v> = -u_1 v_1 - ... - u_q v_q + u_{q+1} v_{q+1} + ... + u_n v_n,

i.e. ``q`` timelike axes followed by ``n - q`` spacelike ones.  All functions
broadcast over leading axes, so a "vector" may be a whole grid of vectors with
the component axis last.

Residual magnitudes elsewhere in the package are always measured with the
auxiliary Euclidean norm: nonzero vectors can have vanishing indefinite norm,
so the indefinite norm would mask defects near the light cone.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

SPACELIKE = "spacelike"
TIMELIKE = "timelike"
NULL = "null"

#: Relative tolerance (against the Euclidean squared norm) below which a
#: squared norm counts as zero in causal classification.
TAU_NULL = 1e-12


class SignatureMismatchError(ValueError):
    """Two vectors from different ambient spaces were combined."""


@dataclass(frozen=True)
class Signature:
    """Ambient signature: ``q`` minus signs out of ``n`` total dimensions."""

    q: int
    n: int

    def __post_init__(self):
        if not (0 <= self.q <= self.n):
            raise ValueError(f"need 0 <= q <= n, got q={self.q}, n={self.n}")
        if self.n < 2:
            raise ValueError(f"ambient dimension must be >= 2, got n={self.n}")

    @cached_property
    def weights(self) -> np.ndarray:
        """Diagonal of the metric: q entries of -1 then n-q entries of +1."""
        w = np.ones(self.n)
        w[: self.q] = -1.0
        return w

    def inner(self, u, v) -> np.ndarray:
        """Indefinite inner product, contracting the last axis."""
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        if u.shape[-1] != self.n or v.shape[-1] != self.n:
            raise ValueError(
                f"component count {u.shape[-1]}/{v.shape[-1]} != ambient n={self.n}"
            )
        return np.einsum("...a,...a->...", u * self.weights, v)

    def sq_norm(self, v) -> np.ndarray:
        """<v, v>; may be negative or zero for q > 0."""
        return self.inner(v, v)

    def euclid_sq(self, v) -> np.ndarray:
        """Auxiliary Euclidean squared norm (all plus signs)."""
        v = np.asarray(v, dtype=float)
        return np.einsum("...a,...a->...", v, v)

    def split_pm(self, v):
        """Split v = v_minus + v_plus by timelike/spacelike axis support.

        v_minus keeps the first q components (zero elsewhere), v_plus the
        rest, so <v,v> = <v_minus,v_minus> + <v_plus,v_plus> exactly.
        """
        v = np.asarray(v, dtype=float)
        v_minus = np.zeros_like(v)
        v_plus = np.zeros_like(v)
        v_minus[..., : self.q] = v[..., : self.q]
        v_plus[..., self.q:] = v[..., self.q:]
        return v_minus, v_plus

    def causal_class(self, v, tau_null: float = TAU_NULL) -> str:
        """Classify a single vector as spacelike / timelike / null.

        The null band is ``tau_null`` relative to the Euclidean squared norm,
        so rescaling a vector never changes its class.
        """
        v = np.asarray(v, dtype=float)
        if v.ndim != 1:
            raise ValueError("causal_class expects a single vector")
        s = float(self.sq_norm(v))
        tol = tau_null * float(self.euclid_sq(v))
        if s > tol:
            return SPACELIKE
        if s < -tol:
            return TIMELIKE
        return NULL

    def random_isometry(self, rng) -> np.ndarray:
        """A linear map preserving the indefinite product: block-diagonal
        orthogonal factors on the timelike and spacelike axes."""
        blocks = []
        for size in (self.q, self.n - self.q):
            if size == 0:
                continue
            a = rng.standard_normal((size, size))
            qmat, r = np.linalg.qr(a)
            qmat = qmat * np.sign(np.diag(r))
            blocks.append(qmat)
        out = np.zeros((self.n, self.n))
        pos = 0
        for b in blocks:
            k = b.shape[0]
            out[pos: pos + k, pos: pos + k] = b
            pos += k
        return out


@dataclass(frozen=True)
class AmbientVec:
    """A vector together with its ambient signature."""

    components: np.ndarray
    signature: Signature

    def __post_init__(self):
        c = np.asarray(self.components, dtype=float)
        object.__setattr__(self, "components", c)
        if c.shape[-1] != self.signature.n:
            raise ValueError(
                f"{c.shape[-1]} components for ambient n={self.signature.n}"
            )


def _unwrap(u, v, signature):
    if isinstance(u, AmbientVec) and isinstance(v, AmbientVec):
        if u.signature != v.signature:
            raise SignatureMismatchError(
                f"signatures differ: {u.signature} vs {v.signature}"
            )
        return u.components, v.components, u.signature
    if signature is None:
        raise ValueError("need AmbientVec arguments or an explicit signature")
    u = u.components if isinstance(u, AmbientVec) else u
    v = v.components if isinstance(v, AmbientVec) else v
    return u, v, signature


def inner(u, v, signature: Signature | None = None):
    """Indefinite inner product of two vectors (AmbientVec or raw arrays)."""
    uc, vc, sig = _unwrap(u, v, signature)
    return sig.inner(uc, vc)


def mainly_positive_margin(signature: Signature, points, k_threshold: float) -> dict:
    """Light-cone angle report for a cloud of ambient points.

    Over the points with Euclidean squared norm >= ``k_threshold`` this
    reports sup of -|F_-|^2 / |F_+|^2 (the image is mainly positive iff that
    sup stays <= 1 - eps for some eps > 0) and the mirrored sup for the
    mainly negative test.  Entries whose denominator vanishes are flagged
    rather than silently dropped.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[None, :]
    if pts.size == 0:
        raise ValueError("empty point list")
    e2 = signature.euclid_sq(pts)
    sel = e2 >= k_threshold
    report = {
        "k_threshold": float(k_threshold),
        "count_total": int(pts.shape[0]),
        "count_filtered": int(np.count_nonzero(sel)),
        "inconclusive": False,
    }
    if not np.any(sel):
        report["inconclusive"] = True
        report.update(
            sup_ratio_pos=None, sup_ratio_neg=None,
            epsilon_pos=None, epsilon_neg=None,
            mainly_positive=None, mainly_negative=None,
            division_by_zero_pos=0, division_by_zero_neg=0,
        )
        return report

    vm, vp = signature.split_pm(pts[sel])
    neg2 = -signature.sq_norm(vm)  # = +|components|^2 on timelike axes
    pos2 = signature.sq_norm(vp)

    def _sup_ratio(num, den):
        bad = den <= 0.0
        good = ~bad
        sup = float(np.max(num[good] / den[good])) if np.any(good) else np.inf
        # a vanishing denominator with nonzero numerator is an infinite ratio
        if np.any(bad & (num > 0.0)):
            sup = np.inf
        return sup, int(np.count_nonzero(bad))

    sup_pos, dbz_pos = _sup_ratio(neg2, pos2)
    sup_neg, dbz_neg = _sup_ratio(pos2, neg2)
    report.update(
        sup_ratio_pos=sup_pos,
        sup_ratio_neg=sup_neg,
        epsilon_pos=1.0 - sup_pos,
        epsilon_neg=1.0 - sup_neg,
        mainly_positive=bool(sup_pos < 1.0),
        mainly_negative=bool(sup_neg < 1.0),
        division_by_zero_pos=dbz_pos,
        division_by_zero_neg=dbz_neg,
    )
    return report
