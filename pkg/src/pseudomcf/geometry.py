"""Per-node extrinsic geometry of an immersion F: M^m -> R^{q,n}.

Everything is stored grid-first: positions have shape ``grid + (n,)``, first
derivatives ``grid + (m, n)``, the metric ``grid + (m, m)`` and so on, with
tensor indices trailing and the ambient component axis last.  Tangent/normal
splitting uses the inverse induced metric, which stays correct for any
nondegenerate metric in indefinite ambient signature (Euclidean
orthogonalization would not be).

Second derivatives are finite differences of the cached first-derivative
fields with the same stencils, and higher covariant derivatives differentiate
the cached tensor fields again; each extra application can cost one order of
stencil accuracy, which the interior masks and reported convergence orders
account for.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ambient import Signature
from .mesh import ParamDomain, default_interior_width, diff, interior_mask

TAU_DET = 1e-10
TAU_H = 1e-8


class DegenerateMetricError(RuntimeError):
    pass


class NullMeanCurvatureError(RuntimeError):
    """|<H,H>| fell below tolerance somewhere; the principal normal is undefined."""


class NotNormalError(ValueError):
    """A field claimed to be normal-valued has a tangential component."""


def _det_sym(g: np.ndarray) -> np.ndarray:
    m = g.shape[-1]
    if m == 1:
        return g[..., 0, 0]
    if m == 2:
        return g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] * g[..., 1, 0]
    return np.linalg.det(g)


def _inv_sym(g: np.ndarray) -> np.ndarray:
    m = g.shape[-1]
    if m == 1:
        return 1.0 / g
    if m == 2:
        det = _det_sym(g)
        out = np.empty_like(g)
        out[..., 0, 0] = g[..., 1, 1]
        out[..., 1, 1] = g[..., 0, 0]
        out[..., 0, 1] = -g[..., 0, 1]
        out[..., 1, 0] = -g[..., 1, 0]
        return out / det[..., None, None]
    return np.linalg.inv(g)


@dataclass
class ImmersionSample:
    """Positions of an immersion on a parameter grid plus cached derivatives."""

    domain: ParamDomain
    signature: Signature
    positions: np.ndarray
    order: int = 4

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float)
        want = self.domain.shape + (self.signature.n,)
        if self.positions.shape != want:
            raise ValueError(f"positions shape {self.positions.shape} != {want}")
        self._d1 = None
        self._d2 = None

    @property
    def m(self) -> int:
        return self.domain.m

    def first_derivs(self) -> np.ndarray:
        if self._d1 is None:
            cols = [diff(self.domain, self.positions, i, self.order)
                    for i in range(self.m)]
            self._d1 = np.stack(cols, axis=-2)
        return self._d1

    def second_derivs(self) -> np.ndarray:
        if self._d2 is None:
            # build the upper triangle and mirror, so the symmetry of mixed
            # derivatives holds exactly (compositions along different axes
            # commute only up to rounding)
            d1 = self.first_derivs()
            m, n = self.m, self.signature.n
            d2 = np.empty(self.domain.shape + (m, m, n))
            for i in range(m):
                for j in range(i, m):
                    d2[..., i, j, :] = diff(self.domain, d1[..., i, :], j,
                                            self.order)
                    if j != i:
                        d2[..., j, i, :] = d2[..., i, j, :]
            self._d2 = d2
        return self._d2

    def with_positions(self, positions: np.ndarray) -> "ImmersionSample":
        return ImmersionSample(self.domain, self.signature, positions, self.order)

    def scaled(self, factor: float) -> "ImmersionSample":
        return self.with_positions(factor * self.positions)


def induced_metric(sample: ImmersionSample, tau_det: float = TAU_DET,
                   mask: np.ndarray | None = None) -> np.ndarray:
    """g_ij = <F_i, F_j>; raises on degeneracy at any checked node."""
    fi = sample.first_derivs()
    w = sample.signature.weights
    g = np.einsum("...ia,...ja->...ij", fi * w, fi)
    g = 0.5 * (g + np.swapaxes(g, -1, -2))
    det = _det_sym(g)
    scale = np.maximum(np.max(np.abs(g), axis=(-1, -2)) ** sample.m, 1e-300)
    bad = np.abs(det) < tau_det * scale
    if mask is not None:
        bad = bad & mask
    if np.any(bad):
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        raise DegenerateMetricError(f"induced metric degenerate at node {idx}")
    return g


def check_spacelike(g: np.ndarray, mask: np.ndarray | None = None) -> bool:
    """True iff g is positive definite (all leading principal minors > 0)."""
    m = g.shape[-1]
    ok = np.ones(g.shape[:-2], dtype=bool)
    for k in range(1, m + 1):
        ok &= _det_sym(np.ascontiguousarray(g[..., :k, :k])) > 0.0
    if mask is not None:
        ok = ok | ~mask
    return bool(np.all(ok))


def christoffel(sample: ImmersionSample, g: np.ndarray,
                g_inv: np.ndarray | None = None) -> np.ndarray:
    """Gamma^k_ij = 1/2 g^{kl} (d_i g_jl + d_j g_il - d_l g_ij)."""
    if g_inv is None:
        g_inv = _inv_sym(g)
    dg = np.stack([diff(sample.domain, g, i, sample.order)
                   for i in range(sample.m)], axis=-3)  # grid + (l, i, j): d_l g_ij
    sym = (np.einsum("...ijl->...lij", dg)
           + np.einsum("...jil->...lij", dg)
           - dg)
    return 0.5 * np.einsum("...kl,...lij->...kij", g_inv, sym)


def second_fundamental(sample: ImmersionSample, g: np.ndarray,
                       gamma: np.ndarray) -> np.ndarray:
    """A_ij = d_i d_j F - Gamma^k_ij F_k (normal-valued up to stencil error)."""
    fi = sample.first_derivs()
    fij = sample.second_derivs()
    return fij - np.einsum("...kij,...ka->...ija", gamma, fi)


def mean_curvature(A: np.ndarray, g_inv: np.ndarray) -> np.ndarray:
    """H = g^{ij} A_ij (the Laplacian of the position field)."""
    return np.einsum("...ij,...ija->...a", g_inv, A)


def theta_form(sample: ImmersionSample) -> np.ndarray:
    """theta_i = <F_i, F>, i.e. half the differential of <F, F>."""
    fi = sample.first_derivs()
    w = sample.signature.weights
    return np.einsum("...ia,...a->...i", fi * w, sample.positions)


def aux_tensors(A: np.ndarray, H: np.ndarray, g_inv: np.ndarray,
                signature: Signature):
    """P_ij = <H, A_ij>, Q_ij = <A^k_i, A_kj>, S_ijkl = <A_ij, A_kl>."""
    w = signature.weights
    P = np.einsum("...a,...ija->...ij", H * w, A)
    S = np.einsum("...ija,...kla->...ijkl", A * w, A)
    A_up = np.einsum("...ki,...ija->...kja", g_inv, A)  # A^k_j
    Q = np.einsum("...kia,...kja->...ij", A_up * w, A)
    P = 0.5 * (P + np.swapaxes(P, -1, -2))
    Q = 0.5 * (Q + np.swapaxes(Q, -1, -2))
    return P, Q, S


def principal_normal(H: np.ndarray, normH2: np.ndarray,
                     mask: np.ndarray | None = None, tau_h: float = TAU_H):
    """nu = H / sqrt(|<H,H>|) plus the reality sign sigma = sign <H,H>.

    For sigma = -1 the normalized field is imaginary; we keep the real vector
    and the sign, so <nu, nu> = sigma.
    """
    bad = np.abs(normH2) < tau_h
    if mask is not None:
        bad = bad & mask
    if np.any(bad):
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        raise NullMeanCurvatureError(
            f"|<H,H>| < {tau_h} at node {idx}; principal normal undefined"
        )
    sigma = np.sign(normH2)
    nu = H / np.sqrt(np.abs(normH2))[..., None]
    return nu, sigma


@dataclass
class Frame:
    """The per-node extrinsic package, bundled over the whole grid."""

    sample: ImmersionSample
    g: np.ndarray
    g_inv: np.ndarray
    gamma: np.ndarray
    A: np.ndarray
    H: np.ndarray
    normH2: np.ndarray
    theta: np.ndarray
    interior: np.ndarray
    spacelike: bool
    nu: np.ndarray | None = None
    sigma: np.ndarray | None = None
    _aux: tuple | None = field(default=None, repr=False)

    @property
    def domain(self) -> ParamDomain:
        return self.sample.domain

    @property
    def signature(self) -> Signature:
        return self.sample.signature

    @property
    def m(self) -> int:
        return self.sample.m

    @property
    def order(self) -> int:
        return self.sample.order

    @property
    def F(self) -> np.ndarray:
        return self.sample.positions

    @property
    def Fi(self) -> np.ndarray:
        return self.sample.first_derivs()

    def ip(self, u, v) -> np.ndarray:
        return np.einsum("...a,...a->...", u * self.signature.weights, v)

    def aux(self):
        if self._aux is None:
            self._aux = aux_tensors(self.A, self.H, self.g_inv, self.signature)
        return self._aux

    def diff(self, values: np.ndarray, axis: int) -> np.ndarray:
        return diff(self.domain, values, axis, self.order)

    def grad_scalar(self, f: np.ndarray) -> np.ndarray:
        """Lower-index gradient d_i f, shape grid + (m,)."""
        return np.stack([self.diff(f, i) for i in range(self.m)], axis=-1)

    def require_nu(self, tau_h: float = TAU_H):
        if self.nu is None:
            self.nu, self.sigma = principal_normal(
                self.H, self.normH2, mask=self.interior, tau_h=tau_h
            )
        return self.nu, self.sigma


def build_frame(sample: ImmersionSample, interior_width: int | None = None,
                tau_det: float = TAU_DET, tau_h: float = TAU_H,
                need_nu: bool = False) -> Frame:
    if interior_width is None:
        interior_width = default_interior_width(sample.order)
    mask = interior_mask(sample.domain, interior_width)
    g = induced_metric(sample, tau_det, mask=mask if mask.any() else None)
    g_inv = _inv_sym(g)
    gamma = christoffel(sample, g, g_inv)
    A = second_fundamental(sample, g, gamma)
    H = mean_curvature(A, g_inv)
    w = sample.signature.weights
    normH2 = np.einsum("...a,...a->...", H * w, H)
    frame = Frame(
        sample=sample, g=g, g_inv=g_inv, gamma=gamma, A=A, H=H,
        normH2=normH2, theta=theta_form(sample), interior=mask,
        spacelike=check_spacelike(g, mask=mask),
    )
    if need_nu:
        frame.require_nu(tau_h)
    return frame


def tangent_normal_project(v: np.ndarray, frame: Frame):
    """Split an ambient field into tangential and normal parts:
    v_top = g^{ij} <v, F_i> F_j, v_perp = v - v_top."""
    fi = frame.Fi
    w = frame.signature.weights
    inner_i = np.einsum("...a,...ia->...i", v * w, fi)
    coef = np.einsum("...ij,...j->...i", frame.g_inv, inner_i)
    v_top = np.einsum("...i,...ia->...a", coef, fi)
    return v_top, v - v_top


def project_normal(v: np.ndarray, frame: Frame) -> np.ndarray:
    return tangent_normal_project(v, frame)[1]


def _project_tensor_normal(T: np.ndarray, frame: Frame, n_lower: int) -> np.ndarray:
    """Normal-project the ambient slot of a tensor with n_lower M-indices."""
    exp = (slice(None),) * frame.m + (None,) * n_lower
    fi_b = frame.Fi[exp]
    ginv_b = frame.g_inv[exp]
    w = frame.signature.weights
    inner_i = np.einsum("...a,...ia->...i", T * w, fi_b)
    coef = np.einsum("...ij,...j->...i", ginv_b, inner_i)
    return T - np.einsum("...i,...ia->...a", coef, fi_b)


def tangential_sup(T: np.ndarray, frame: Frame, n_lower: int) -> float:
    """Euclidean sup of the tangential part over the interior mask."""
    top = T - _project_tensor_normal(T, frame, n_lower)
    mag = np.sqrt(np.einsum("...a,...a->...", top, top))
    for _ in range(n_lower):
        mag = mag.max(axis=-1)
    return float(np.max(mag[frame.interior]))


def _gamma_correction(T: np.ndarray, frame: Frame, slot_axis: int) -> np.ndarray:
    """Sum_p Gamma^p_{k i} T[.. p ..] for one lower slot, adding the new
    derivative index k right after the grid axes."""
    G = frame.m
    Tp = np.moveaxis(T, slot_axis, G)  # slot to the front of the index block
    rest = Tp.shape[G + 1:]
    Tp2 = Tp.reshape(Tp.shape[: G + 1] + (-1,))
    out = np.einsum("...pki,...pr->...kir", frame.gamma, Tp2)
    out = out.reshape(out.shape[: G + 2] + rest)
    # restore the corrected slot to its place (shifted by the new k axis)
    return np.moveaxis(out, G + 1, slot_axis + 1)


def covariant_derivative(T: np.ndarray, frame: Frame, n_lower: int) -> np.ndarray:
    """Full covariant derivative, new index leading the index block.

    ``T`` has shape grid + (m,)*n_lower + trailing component axes; trailing
    axes (ambient slot included) ride along with the flat ambient connection.
    """
    G = frame.m
    out = np.stack([frame.diff(T, k) for k in range(G)], axis=G)
    for a in range(n_lower):
        out = out - _gamma_correction(T, frame, G + a)
    return out


def normal_covariant_derivative(T: np.ndarray, frame: Frame, n_lower: int,
                                check_normal: bool = True,
                                tol: float = 1e-3) -> np.ndarray:
    """Normal-bundle covariant derivative of a normal-valued tensor.

    ``T`` has shape grid + (m,)*n_lower + (n,); the result gains a leading
    derivative index and its ambient slot is projected back to the normal
    space.  ``tol`` is the relative tangential-residual gate for the
    normality precondition.
    """
    if check_normal:
        sup = tangential_sup(T, frame, n_lower)
        scale = float(np.max(np.abs(T))) or 1.0
        if sup > tol * scale:
            raise NotNormalError(
                f"field is not normal-valued: tangential sup {sup:.3e} "
                f"exceeds {tol} relative"
            )
    return _project_tensor_normal(
        covariant_derivative(T, frame, n_lower), frame, n_lower + 1
    )


def riemann_and_ricci(frame: Frame):
    """Coordinate curvature from the Christoffel field.

    Convention: R(d_i, d_j) d_k = R^l_{kij} d_l, lowered to
    R_{lkij} = g_{ls} R^s_{kij}; Ricci R_ij = g^{kl} R_{kilj}.
    """
    m = frame.m
    gamma = frame.gamma
    dgamma = np.stack([frame.diff(gamma, i) for i in range(m)], axis=-4)
    # dgamma: grid + (i, l, j, k) meaning d_i Gamma^l_{jk}
    R_up = (np.einsum("...iljk->...lkij", dgamma)
            - np.einsum("...jlik->...lkij", dgamma)
            + np.einsum("...lip,...pjk->...lkij", gamma, gamma)
            - np.einsum("...ljp,...pik->...lkij", gamma, gamma))
    R = np.einsum("...ls,...skij->...lkij", frame.g, R_up)
    ricci = np.einsum("...kl,...kilj->...ij", frame.g_inv, R)
    return R, ricci


def rough_laplacian(f: np.ndarray, frame: Frame) -> np.ndarray:
    """g^{ij} (d_i d_j f - Gamma^k_ij d_k f) for a scalar grid field;
    trailing component axes (e.g. ambient vectors) are handled componentwise,
    which is the flat-connection rough Laplacian."""
    m = frame.m
    extra = f.ndim - frame.m
    df = np.stack([frame.diff(f, i) for i in range(m)], axis=-1)
    ddf = np.stack([frame.diff(df, j) for j in range(m)], axis=-1)
    # ddf[..., i, j] = d_j d_i f
    grid = frame.domain.shape
    gi = frame.g_inv.reshape(grid + (1,) * extra + (m, m))
    gam = frame.gamma.reshape(grid + (1,) * extra + (m, m, m))
    return (np.einsum("...ij,...ij->...", gi, ddf)
            - np.einsum("...ij,...kij,...k->...", gi, gam, df))
