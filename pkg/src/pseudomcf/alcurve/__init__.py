"""Self-shrinking plane curves of the curve shortening flow.

A closed plane curve shrinks homothetically iff its curvature equals minus
the normal component of the position, kappa = -<gamma, N> with N = rot90(T).
The circle (radius 1 about the origin) is the trivial solution; the
non-circular closed solutions oscillate between two curvature extremes.

Two equivalent integrators are provided and cross-checked:

* ``shoot``       -- extrinsic: gamma' = T, T' = kappa N with kappa read off
                     the position pointwise,
* ``intrinsic_*`` -- the second-order curvature ODE
                     kappa'' = kappa_s^2 / kappa + kappa - kappa^3,
                     obtained by differentiating kappa = -<gamma, N> twice
                     along arc length.

Both are fixed-step RK4.  The inner loops live in a compiled extension when
available (``_speedup``), with a bit-identical pure-Python fallback
(``_pyloop``) selected at import time.

The quantity kappa * exp(-|gamma|^2 / 2) is conserved along exact solutions
(differentiate and use kappa_s = kappa <gamma, T>), which the tests use as an
integrator-quality oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

try:  # pragma: no cover - exercised via BACKEND in tests
    from . import _speedup as _kernel

    BACKEND = "compiled"
except ImportError:  # pragma: no cover
    from . import _pyloop as _kernel

    BACKEND = "pure"

from . import _pyloop

TWO_PI = 2.0 * math.pi

#: kappa at or below this is treated as an inflection for the intrinsic ODE
KAPPA_MIN = 1e-12


class SingularCurvatureError(RuntimeError):
    """kappa reached zero; the intrinsic ODE is singular there."""


def available_backends() -> dict:
    """Name -> kernel module for every importable backend."""
    out = {"pure": _pyloop}
    if BACKEND == "compiled":
        out["compiled"] = _kernel
    return out


def extremum_start(kappa0: float):
    """Initial (gamma, T) placing the curve at a curvature extremum.

    At an extremum kappa_s = kappa <gamma, T> vanishes, so the position is
    radial there with |gamma| = kappa; this chart starts every shoot of the
    closed-curve search in the same phase.
    """
    return np.array([kappa0, 0.0]), np.array([0.0, 1.0])


def conserved_quantity(gamma, kappa):
    """kappa * exp(-|gamma|_E^2 / 2); constant along exact solutions."""
    gamma = np.asarray(gamma, dtype=float)
    r2 = np.einsum("...a,...a->...", gamma, gamma)
    return np.asarray(kappa) * np.exp(-0.5 * r2)


# ---------------------------------------------------------------------------
# low-level runs

def _run_shoot(gamma0, T0, ds, n_steps, kernel=None):
    kern = kernel if kernel is not None else _kernel
    out = np.empty((n_steps + 1, 6), dtype=float)
    kern.shoot_loop(float(gamma0[0]), float(gamma0[1]),
                    float(T0[0]), float(T0[1]), float(ds), int(n_steps), out)
    return out


def intrinsic_run(kappa0: float, kappa_s0: float, ds: float, n_steps: int,
                  kernel=None):
    """Arrays (kappa, kappa_s) along arc length; raises if kappa hits zero."""
    kern = kernel if kernel is not None else _kernel
    out = np.empty((n_steps + 1, 2), dtype=float)
    done = kern.intrinsic_loop(float(kappa0), float(kappa_s0), float(ds),
                               int(n_steps), KAPPA_MIN, out)
    if done < n_steps:
        raise SingularCurvatureError(
            f"kappa reached zero after {done} steps (s = {done * ds:.6g})"
        )
    return out[:, 0], out[:, 1]


def intrinsic_step(kappa: float, kappa_s: float, ds: float):
    """One RK4 step of the curvature ODE; returns the new (kappa, kappa_s)."""
    if kappa <= KAPPA_MIN:
        raise SingularCurvatureError("kappa must be positive")
    k, ks = intrinsic_run(kappa, kappa_s, ds, 1)
    return float(k[1]), float(ks[1])


def intrinsic_rhs(kappa: float, kappa_s: float) -> float:
    """kappa'' along arc length."""
    if abs(kappa) <= KAPPA_MIN:
        raise SingularCurvatureError("kappa must be nonzero")
    return kappa_s * kappa_s / kappa + kappa - kappa ** 3


# ---------------------------------------------------------------------------
# Hermite event refinement (order-matched to the RK4 samples)

def _hermite(y0, y1, d0, d1, h, x):
    t = x / h
    h00 = (1.0 + 2.0 * t) * (1.0 - t) ** 2
    h10 = t * (1.0 - t) ** 2
    h01 = t * t * (3.0 - 2.0 * t)
    h11 = t * t * (t - 1.0)
    return h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1


def _hermite_root(y0, y1, d0, d1, h):
    """Root in [0, h] of the cubic Hermite through (y0, d0), (y1, d1)."""
    if y0 == 0.0:
        return 0.0
    x = h * y0 / (y0 - y1)  # secant seed
    for _ in range(60):
        t = x / h
        val = _hermite(y0, y1, d0, d1, h, x)
        # derivative of the Hermite basis in x
        dh00 = 6.0 * t * (t - 1.0) / h
        dval = (dh00 * (y0 - y1)
                + (3.0 * t * t - 4.0 * t + 1.0) * d0
                + (3.0 * t * t - 2.0 * t) * d1)
        if dval == 0.0:
            break
        step = val / dval
        x -= step
        x = min(max(x, 0.0), h)
        if abs(step) < 1e-17 * h:
            break
    return x


@dataclass
class _State:
    """Interpolated curve state at an off-node arc length."""

    s: float
    gamma: np.ndarray
    tangent: np.ndarray
    kappa: float
    phi: float


def _interp_state(table, ds, i, x) -> _State:
    """Hermite interpolation between nodes i and i+1 at offset x in [0, ds]."""
    gx0, gy0, tx0, ty0, k0, p0 = table[i]
    gx1, gy1, tx1, ty1, k1, p1 = table[i + 1]
    # derivatives: gamma' = T, T' = kappa * rot90(T), phi' = kappa
    gx = _hermite(gx0, gx1, tx0, tx1, ds, x)
    gy = _hermite(gy0, gy1, ty0, ty1, ds, x)
    tx = _hermite(tx0, tx1, -k0 * ty0, -k1 * ty1, ds, x)
    ty = _hermite(ty0, ty1, k0 * tx0, k1 * tx1, ds, x)
    phi = _hermite(p0, p1, k0, k1, ds, x)
    norm = math.hypot(tx, ty)
    tangent = np.array([tx / norm, ty / norm])
    gamma = np.array([gx, gy])
    kappa = gx * tangent[1] - gy * tangent[0]
    return _State(i * ds + x, gamma, tangent, kappa, phi)


def _u_crossings(table, ds, count):
    """Arc lengths of the first ``count`` upward/downward zeros of
    u = <gamma, T> after s = 0 (u' = 1 - kappa^2), Hermite refined."""
    gx, gy, tx, ty = table[:, 0], table[:, 1], table[:, 2], table[:, 3]
    u = gx * tx + gy * ty
    du = 1.0 - table[:, 4] ** 2
    found = []
    for i in range(1, len(u) - 1):
        if u[i] == 0.0 or (u[i] * u[i + 1] < 0.0):
            x = _hermite_root(u[i], u[i + 1], du[i], du[i + 1], ds)
            found.append((i, x))
            if len(found) >= count:
                break
    return found


# ---------------------------------------------------------------------------
# public shoot + closure report

@dataclass
class ShootResult:
    s: np.ndarray
    gamma: np.ndarray
    tangent: np.ndarray
    kappa: np.ndarray
    phi: np.ndarray
    ds: float
    closure: dict = field(default_factory=dict)
    inflection: bool = False
    diverged: bool = False

    @property
    def conserved(self) -> np.ndarray:
        return conserved_quantity(self.gamma, self.kappa)


def shoot(gamma0, T0, ds: float = 1e-3, max_steps: int = 20000,
          divergence_radius: float = 100.0) -> ShootResult:
    """Integrate the extrinsic curve system and report closure metrics.

    Curvature is evaluated pointwise as -<gamma, N>, the tangent is
    renormalized every step.  The closure candidate is the refined arc
    length where the curve returns to its starting phase; dense
    (non-closing) trajectories simply report large gaps after ``max_steps``
    and are never looped forcibly.
    """
    gamma0 = np.asarray(gamma0, dtype=float)
    T0 = np.asarray(T0, dtype=float)
    T0 = T0 / math.hypot(*T0)
    table = _run_shoot(gamma0, T0, ds, max_steps)

    r2 = table[:, 0] ** 2 + table[:, 1] ** 2
    n_keep = len(table)
    diverged = bool(np.any(r2 > divergence_radius ** 2))
    if diverged:
        n_keep = int(np.argmax(r2 > divergence_radius ** 2)) + 1
        table = table[:n_keep]

    kappa = table[:, 4]
    inflection = bool(np.any(kappa <= 0.0) and np.any(kappa > 0.0))

    result = ShootResult(
        s=ds * np.arange(len(table)),
        gamma=table[:, 0:2].copy(),
        tangent=table[:, 2:4].copy(),
        kappa=kappa.copy(),
        phi=table[:, 5].copy(),
        ds=ds,
        inflection=inflection,
        diverged=diverged,
    )
    if not diverged:
        result.closure = _closure_report(table, ds)
    return result


def _closure_report(table, ds) -> dict:
    """Gaps at the refined return point (period structure or, for constant
    curvature, one full revolution of the position angle)."""
    kappa = table[:, 4]
    k0 = kappa[0]
    report = {"detected": False, "gap_position": math.inf,
              "gap_angle": math.inf, "tangent_winding": None,
              "curvature_periods": None, "s_close": None}

    if np.max(np.abs(kappa - k0)) <= 1e-9 * max(1.0, abs(k0)):
        # constant curvature: a circle of radius 1/kappa; one revolution of
        # the position angle is the period
        psi = np.unwrap(np.arctan2(table[:, 1], table[:, 0]))
        target = psi[0] + TWO_PI * np.sign(k0)
        f = psi - target
        hit = np.nonzero(f[:-1] * f[1:] <= 0.0)[0]
        hit = hit[hit > 0]
        if len(hit) == 0:
            return report
        i = int(hit[0])
        dpsi = kappa / np.maximum(table[:, 0] ** 2 + table[:, 1] ** 2, 1e-300)
        x = _hermite_root(f[i], f[i + 1], dpsi[i], dpsi[i + 1], ds)
        st = _interp_state(table, ds, i, x)
        periods = 1
    else:
        crossings = _u_crossings(table, ds, count=10 ** 9)
        if len(crossings) < 2:
            return report
        # even crossings complete curvature periods; take the last full one
        n_half = len(crossings) - (len(crossings) % 2 == 1)
        i, x = crossings[n_half - 1]
        st = _interp_state(table, ds, i, x)
        periods = n_half // 2

    gap_pos = float(np.hypot(*(st.gamma - table[0, 0:2])))
    dphi = st.phi - table[0, 5]
    winding = int(round(dphi / TWO_PI))
    gap_angle = float(abs(dphi - TWO_PI * winding))
    report.update(
        detected=True, gap_position=gap_pos, gap_angle=gap_angle,
        tangent_winding=winding, curvature_periods=periods,
        s_close=float(st.s),
    )
    return report


# ---------------------------------------------------------------------------
# curvature-period ratio and the closed-curve search

@dataclass
class PeriodInfo:
    kappa0: float
    s_period: float
    delta_phi: float

    @property
    def ratio(self) -> float:
        """Tangent turning per curvature oscillation, in full turns."""
        return self.delta_phi / TWO_PI


def curvature_period(kappa0: float, ds: float = 1e-3,
                     max_arc: float = 64.0) -> PeriodInfo:
    """One curvature-oscillation period of the shoot started at a curvature
    extremum, with the tangent turning accumulated over it."""
    if not 0.0 < kappa0 < 1.0:
        raise ValueError("kappa0 must lie in (0, 1)")
    gamma0, T0 = extremum_start(kappa0)
    chunk = int(8.0 / ds)
    total = int(max_arc / ds)
    steps = min(chunk, total)
    while True:
        table = _run_shoot(gamma0, T0, ds, steps)
        crossings = _u_crossings(table, ds, count=2)
        if len(crossings) >= 2:
            break
        if steps >= total:
            raise RuntimeError(
                f"no curvature period within arc length {max_arc}"
            )
        steps = min(2 * steps, total)
    i, x = crossings[1]
    st = _interp_state(table, ds, i, x)
    return PeriodInfo(kappa0=kappa0, s_period=st.s, delta_phi=st.phi - table[0, 5])


@dataclass
class ClosedCurve:
    kappa0: float
    winding: tuple[int, int]  # (tangent turns p, curvature periods q)
    s_total: float
    gap_position: float
    gap_angle: float
    ds: float
    s: np.ndarray
    gamma: np.ndarray
    tangent: np.ndarray
    kappa: np.ndarray
    phi: np.ndarray

    @property
    def is_circle(self) -> bool:
        return self.winding[1] == 1 and abs(self.kappa0 - 1.0) < 1e-12


@dataclass
class SearchReport:
    success: bool
    reason: str
    n_evals: int
    bracket: tuple[float, float]
    target: tuple[int, int]
    details: dict = field(default_factory=dict)
    curve: ClosedCurve | None = None


def _parse_target(target) -> tuple[int, int]:
    from fractions import Fraction

    if isinstance(target, str):
        frac = Fraction(target)
    elif isinstance(target, tuple):
        frac = Fraction(*target)
    else:
        frac = Fraction(target).limit_denominator(64)
    if not 0 < frac < 1:
        raise ValueError(f"winding ratio must be in (0, 1), got {frac}")
    return frac.numerator, frac.denominator


def _integrate_periods(kappa0: float, q: int, ds: float):
    """Shoot q curvature periods; returns (table, refined end state)."""
    per = curvature_period(kappa0, ds)
    n_steps = int((q * per.s_period) / ds) + int(2.0 / ds)
    gamma0, T0 = extremum_start(kappa0)
    table = _run_shoot(gamma0, T0, ds, n_steps)
    crossings = _u_crossings(table, ds, count=2 * q)
    if len(crossings) < 2 * q:
        raise RuntimeError("period structure lost during closure integration")
    i, x = crossings[2 * q - 1]
    return table, _interp_state(table, ds, i, x)


def _circle_result(ds: float) -> ClosedCurve:
    n = int(round(TWO_PI / ds))
    table = _run_shoot(*extremum_start(1.0), TWO_PI / n, n)
    return ClosedCurve(
        kappa0=1.0, winding=(1, 1), s_total=TWO_PI,
        gap_position=float(np.hypot(table[-1, 0] - table[0, 0],
                                    table[-1, 1] - table[0, 1])),
        gap_angle=float(abs(table[-1, 5] - TWO_PI)),
        ds=TWO_PI / n, s=(TWO_PI / n) * np.arange(n + 1),
        gamma=table[:, 0:2].copy(), tangent=table[:, 2:4].copy(),
        kappa=table[:, 4].copy(), phi=table[:, 5].copy(),
    )


def find_closed(bracket, target="2/3", tolerance: float = 1e-4,
                ds: float = 1e-3, max_iter: int = 200) -> SearchReport:
    """Search the starting curvature for a closed curve.

    The closure function is the tangent turning per curvature period minus
    the target ratio p/q; it is monotone on (0, 1), so a bracketed sign
    change pins the closed curve.  Returns a failure report (not an error)
    when the bracket shows no sign change or closure misses the tolerance.

    A bracket containing kappa0 = 1 short-circuits to the circle, the
    trivial closed solution.
    """
    lo, hi = float(bracket[0]), float(bracket[1])
    p, q = _parse_target(target)
    if lo <= 1.0 <= hi:
        return SearchReport(
            success=True, reason="bracket contains the circle", n_evals=0,
            bracket=(lo, hi), target=(p, q), curve=_circle_result(ds),
        )
    if not (0.0 < lo < hi < 1.0):
        raise ValueError(f"bracket must sit inside (0, 1), got ({lo}, {hi})")

    target_ratio = p / q
    evals = [0]

    def objective(k0: float) -> float:
        evals[0] += 1
        return curvature_period(k0, ds).ratio - target_ratio

    f_lo, f_hi = objective(lo), objective(hi)
    if f_lo * f_hi > 0.0:
        return SearchReport(
            success=False, reason="no sign change in closure function",
            n_evals=evals[0], bracket=(lo, hi), target=(p, q),
            details={"f_lo": f_lo, "f_hi": f_hi},
        )

    from scipy.optimize import brentq

    kappa0 = float(brentq(objective, lo, hi, xtol=1e-14, rtol=8.9e-16,
                          maxiter=max(4, max_iter - evals[0])))
    table, st = _integrate_periods(kappa0, q, ds)
    evals[0] += 1
    gap_pos = float(np.hypot(*(st.gamma - table[0, 0:2])))
    dphi = st.phi - table[0, 5]
    gap_ang = float(abs(dphi - TWO_PI * p))
    if max(gap_pos, gap_ang) > tolerance:
        return SearchReport(
            success=False, reason="closure gap above tolerance",
            n_evals=evals[0], bracket=(lo, hi), target=(p, q),
            details={"kappa0": kappa0, "gap_position": gap_pos,
                     "gap_angle": gap_ang},
        )
    n_keep = int(st.s / ds) + 2
    curve = ClosedCurve(
        kappa0=kappa0, winding=(p, q), s_total=float(st.s),
        gap_position=gap_pos, gap_angle=gap_ang, ds=ds,
        s=ds * np.arange(n_keep), gamma=table[:n_keep, 0:2].copy(),
        tangent=table[:n_keep, 2:4].copy(), kappa=table[:n_keep, 4].copy(),
        phi=table[:n_keep, 5].copy(),
    )
    return SearchReport(success=True, reason="closed", n_evals=evals[0],
                        bracket=(lo, hi), target=(p, q), curve=curve)


def resample_closed(curve: ClosedCurve, n_samples: int = 512,
                    ds_max: float = 2e-3):
    """Re-integrate a closed curve so that exactly ``n_samples`` uniform
    arc-length nodes cover one loop.

    The integration runs on a substep at most ``ds_max`` (keeping the node
    positions accurate to integrator rather than node spacing), recording
    every K-th state.  The seam mismatch equals the closure gap of the
    curve, far below the stencil error of downstream use.
    """
    node_ds = curve.s_total / n_samples
    K = max(1, math.ceil(node_ds / ds_max))
    ds = node_ds / K
    gamma0 = curve.gamma[0]
    T0 = curve.tangent[0]
    table = _run_shoot(gamma0, T0, ds, n_samples * K)
    rows = table[: n_samples * K: K]
    return (node_ds * np.arange(n_samples), rows[:, 0:2].copy(),
            rows[:, 4].copy())


def curve_csv(result, path) -> None:
    """Arc length, position, curvature and the conserved quantity per row."""
    s = result.s
    gamma = result.gamma
    kappa = result.kappa
    cq = conserved_quantity(gamma, kappa)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("s,gamma_x,gamma_y,kappa,conserved\n")
        for i in range(len(s)):
            fh.write(",".join(repr(float(v)) for v in
                              (s[i], gamma[i, 0], gamma[i, 1], kappa[i], cq[i]))
                     + "\n")
