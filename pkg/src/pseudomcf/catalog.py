"""Analytic charts for the geometries the classification singles out,
sampled onto structured grids.

Each entry builds an :class:`ImmersionSample` plus machine-readable metadata
(dimension, signature, level-set value k of <F,F>, expected <H,H>, expected
spectrum of P, homothety factor).  Hyperquadric members satisfy
H = -(m/k) F, so k > 0 members shrink and k < 0 members expand.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import alcurve
from .ambient import Signature
from .geometry import ImmersionSample, build_frame
from .identities import shrinker_residual
from .mesh import Axis, ParamDomain

#: a product core must certify as a self-shrinker below this
CORE_GATE = 1e-3


class CatalogError(ValueError):
    pass


def _refined(domain: ParamDomain, refine: int) -> ParamDomain:
    for _ in range(refine):
        domain = domain.refined()
    return domain


def sphere(m: int, signature: Signature | None = None, resolution: int | None = None,
           order: int = 4, refine: int = 0, polar_margin: float = 0.35) -> ImmersionSample:
    """Round sphere of radius sqrt(m) in the spacelike axes.

    m = 1 is the periodic circle chart; m = 2 a latitude/longitude patch
    whose polar margin keeps the chart nondegenerate (the interior mask
    excludes the seams).  On the sphere <F,F> = <H,H> = m and H = -F.
    """
    if m not in (1, 2):
        raise CatalogError("only m = 1 (circle) and m = 2 charts ship")
    if signature is None:
        signature = Signature(0, m + 1)
    if signature.n - signature.q < m + 1:
        raise CatalogError(
            f"need {m + 1} spacelike axes, signature has {signature.n - signature.q}"
        )
    q = signature.q
    r = math.sqrt(m)
    if m == 1:
        N = resolution or 256
        dom = _refined(ParamDomain((Axis(0.0, 2.0 * math.pi, N, True),)), refine)
        (th,) = dom.meshgrid()
        pos = np.zeros(dom.shape + (signature.n,))
        pos[..., q] = r * np.cos(th)
        pos[..., q + 1] = r * np.sin(th)
    else:
        N = resolution or 96
        dom = _refined(
            ParamDomain((Axis(polar_margin, math.pi - polar_margin, N, False),
                         Axis(0.0, 2.0 * math.pi, N, True))), refine)
        th, ph = dom.meshgrid()
        pos = np.zeros(dom.shape + (signature.n,))
        pos[..., q] = r * np.sin(th) * np.cos(ph)
        pos[..., q + 1] = r * np.sin(th) * np.sin(ph)
        pos[..., q + 2] = r * np.cos(th)
    return ImmersionSample(dom, signature, pos, order)


def clifford_torus(resolution: int = 64, order: int = 4, refine: int = 0) -> ImmersionSample:
    """(u, v) -> (cos u, sin u, cos v, sin v): <F,F> = 2, H = -F, fully periodic."""
    N = resolution
    dom = _refined(
        ParamDomain((Axis(0.0, 2.0 * math.pi, N, True),
                     Axis(0.0, 2.0 * math.pi, N, True))), refine)
    u, v = dom.meshgrid()
    pos = np.stack([np.cos(u), np.sin(u), np.cos(v), np.sin(v)], axis=-1)
    return ImmersionSample(dom, Signature(0, 4), pos, order)


def hyperbolic_expander(patch_radius: float = 1.2, resolution: int = 64,
                        order: int = 4, refine: int = 0,
                        rho_min: float = 0.4) -> ImmersionSample:
    """(rho, phi) -> (cosh rho, sinh rho cos phi, sinh rho sin phi) in R^{1,3}.

    <F,F> = -1 with a spacelike induced metric; H = 2F is timelike
    (<H,H> = -4), so the immersion expands (H = +2 F^perp) and certifies as
    a non-shrinker.
    """
    if patch_radius <= 0:
        raise CatalogError("patch radius must be positive")
    N = resolution
    dom = _refined(
        ParamDomain((Axis(rho_min, rho_min + patch_radius, N, False),
                     Axis(0.0, 2.0 * math.pi, N, True))), refine)
    rho, phi = dom.meshgrid()
    pos = np.stack([np.cosh(rho), np.sinh(rho) * np.cos(phi),
                    np.sinh(rho) * np.sin(phi)], axis=-1)
    return ImmersionSample(dom, Signature(1, 3), pos, order)


def affine_plane(signature: Signature | None = None, resolution: int = 33,
                 order: int = 4, refine: int = 0, half_length: float = 2.0,
                 offset: float = 0.0) -> ImmersionSample:
    """A spacelike affine 2-plane through offset * e_3; totally geodesic with
    H = 0, so every residual vanishes identically.

    The default resolution keeps the node spacing a power of two, making the
    node coordinates exactly representable: the stencils (exact on
    polynomials) then return exact zeros, not just rounding-level ones.
    """
    if signature is None:
        signature = Signature(0, 3)
    q = signature.q
    if signature.n - q < 3:
        raise CatalogError("need 3 spacelike axes for the plane chart")
    N = resolution
    dom = _refined(
        ParamDomain((Axis(-half_length, half_length, N, False),
                     Axis(-half_length, half_length, N, False))), refine)
    u, v = dom.meshgrid()
    pos = np.zeros(dom.shape + (signature.n,))
    pos[..., q] = u
    pos[..., q + 1] = v
    pos[..., q + 2] = offset
    return ImmersionSample(dom, signature, pos, order)


def cylinder_product(core: ImmersionSample, d: int, axes: list[int],
                     half_length: float = 2.0, resolution_flat: int = 33,
                     order: int | None = None, refine: int = 0,
                     gate: float = CORE_GATE) -> ImmersionSample:
    """Product of a certified shrinker core with d flat spacelike directions.

    The flat factor contributes nothing to H while F^perp loses the flat
    component, so the product inherits the core's shrinker residual and
    <H,H> = <F_core, F_core> = r.  Flat axes must be spacelike and unused by
    the core: a timelike factor would break the spacelike induced metric.
    """
    if d < 1:
        raise CatalogError("need at least one flat direction")
    if len(axes) != d:
        raise CatalogError(f"need {d} flat axes, got {len(axes)}")
    sig = core.signature
    if len(set(axes)) != d:
        raise CatalogError("flat axes collide")
    for a in axes:
        if not 0 <= a < sig.n:
            raise CatalogError(f"axis {a} outside ambient dimension {sig.n}")
        if a < sig.q:
            raise CatalogError(f"axis {a} is timelike; the flat factor must be "
                               "spacelike")
        if float(np.max(np.abs(core.positions[..., a]))) > 1e-12:
            raise CatalogError(f"axis {a} already used by the core")

    core_frame = build_frame(core)
    res = shrinker_residual(core_frame)
    if res.sup > gate:
        raise CatalogError(
            f"core shrinker residual {res.sup:.3e} exceeds gate {gate:.1e}"
        )

    flat_axis = Axis(-half_length, half_length, resolution_flat, False)
    dom = _refined(ParamDomain(core.domain.axes + (flat_axis,) * d), refine)
    grids = dom.meshgrid()
    core_m = core.domain.m
    # core positions resampled on the (possibly refined) core axes
    core_dom = ParamDomain(dom.axes[:core_m])
    core_resampled = core
    if core_dom.shape != core.domain.shape:
        raise CatalogError("refine the product via the refine argument of the "
                           "builder that constructed the core")
    pos = np.zeros(dom.shape + (sig.n,))
    expand = (...,) + (None,) * d + (slice(None),)
    pos += core.positions[expand]
    for a, grid_axis in zip(axes, grids[core_m:]):
        pos[..., a] = grid_axis
    return ImmersionSample(dom, sig, pos, order or core.order)


def al_cylinder(curve, d: int = 1, signature: Signature | None = None,
                n_samples: int = 512, half_length: float = 2.0,
                resolution_flat: int = 33, order: int = 4,
                refine: int = 0) -> ImmersionSample:
    """Product of a closed self-shrinking plane curve with d flat directions.

    ``curve`` is a :class:`pseudomcf.alcurve.ClosedCurve` or a successful
    :class:`pseudomcf.alcurve.SearchReport`; open curves are refused.  The
    curve is re-integrated onto a uniform arc-length grid, so the chart's
    first axis is periodic arc length.
    """
    if isinstance(curve, alcurve.SearchReport):
        if not curve.success or curve.curve is None:
            raise CatalogError(f"curve is not closed: {curve.reason}")
        curve = curve.curve
    if signature is None:
        signature = Signature(0, 2 + d)
    q = signature.q
    if signature.n - q < 2 + d:
        raise CatalogError(f"need {2 + d} spacelike axes")

    for _ in range(refine):
        n_samples *= 2
        resolution_flat = 2 * resolution_flat - 1
    s_nodes, gamma, _ = alcurve.resample_closed(curve, n_samples)

    axes = (Axis(0.0, curve.s_total, n_samples, True),) + \
        (Axis(-half_length, half_length, resolution_flat, False),) * d
    dom = ParamDomain(axes)
    grids = dom.meshgrid()
    pos = np.zeros(dom.shape + (signature.n,))
    expand = (slice(None),) + (None,) * d
    pos[..., q] = gamma[:, 0][expand]
    pos[..., q + 1] = gamma[:, 1][expand]
    for j in range(d):
        pos[..., q + 2 + j] = grids[1 + j]
    return ImmersionSample(dom, signature, pos, order)


@lru_cache(maxsize=4)
def _closed_curve(target: str, tolerance: float, ds: float):
    report = alcurve.find_closed((0.3, 0.9), target, tolerance=tolerance, ds=ds)
    if not report.success:
        raise CatalogError(f"closed-curve search failed: {report.reason}")
    return report.curve


# ---------------------------------------------------------------------------
# named registry

@dataclass(frozen=True)
class CatalogEntry:
    name: str
    meta: dict

    def build(self, resolution=None, order: int = 4, refine: int = 0) -> ImmersionSample:
        return _BUILDERS[self.name](resolution, order, refine)


def _build_circle(resolution, order, refine):
    return sphere(1, Signature(0, 2), resolution or 256, order, refine)


def _build_sphere_m2(resolution, order, refine):
    return sphere(2, None, resolution or 96, order, refine)


def _build_torus(resolution, order, refine):
    return clifford_torus(resolution or 64, order, refine)


def _build_hyperbolic(resolution, order, refine):
    return hyperbolic_expander(resolution=resolution or 64, order=order,
                               refine=refine)


def _build_cylinder(resolution, order, refine):
    core = sphere(1, Signature(0, 3), resolution or 256, order, refine)
    flat_n = 33
    for _ in range(refine):
        flat_n = 2 * flat_n - 1
    return cylinder_product(core, 1, [2], resolution_flat=flat_n, order=order)


def _build_al_cylinder(resolution, order, refine):
    curve = _closed_curve("2/3", 1e-6, 1e-3)
    return al_cylinder(curve, 1, n_samples=resolution or 512, order=order,
                       refine=refine)


def _build_affine_plane(resolution, order, refine):
    return affine_plane(resolution=resolution or 33, order=order, refine=refine)


_BUILDERS = {
    "circle": _build_circle,
    "sphere_m2": _build_sphere_m2,
    "clifford_torus": _build_torus,
    "hyperbolic_expander": _build_hyperbolic,
    "cylinder_s1xr": _build_cylinder,
    "al_cylinder": _build_al_cylinder,
    "affine_plane": _build_affine_plane,
}

CATALOG: tuple[CatalogEntry, ...] = (
    CatalogEntry("circle", {
        "name": "circle", "m": 1, "q": 0, "n": 2, "k": 1.0,
        "expected_normH2": 1.0, "expected_P_spectrum": [1.0],
        "shrinker": True, "homothety_factor": -1.0,
        "notes": "S^1(1); the m = 1 hyperquadric shrinker",
    }),
    CatalogEntry("sphere_m2", {
        "name": "sphere_m2", "m": 2, "q": 0, "n": 3, "k": 2.0,
        "expected_normH2": 2.0, "expected_P_spectrum": [1.0, 1.0],
        "shrinker": True, "homothety_factor": -1.0,
        "notes": "S^2(sqrt 2) on a polar-masked patch",
    }),
    CatalogEntry("clifford_torus", {
        "name": "clifford_torus", "m": 2, "q": 0, "n": 4, "k": 2.0,
        "expected_normH2": 2.0, "expected_P_spectrum": [1.0, 1.0],
        "shrinker": True, "homothety_factor": -1.0,
        "notes": "minimal torus inside the k = 2 hyperquadric",
    }),
    CatalogEntry("hyperbolic_expander", {
        "name": "hyperbolic_expander", "m": 2, "q": 1, "n": 3, "k": -1.0,
        "expected_normH2": -4.0, "expected_P_spectrum": [-2.0, -2.0],
        "shrinker": False, "homothety_factor": 2.0,
        "notes": "k < 0 hyperquadric: expands, timelike H, never a shrinker",
    }),
    CatalogEntry("cylinder_s1xr", {
        "name": "cylinder_s1xr", "m": 2, "q": 0, "n": 3, "k": None,
        "expected_normH2": 1.0, "expected_P_spectrum": [0.0, 1.0],
        "shrinker": True, "homothety_factor": -1.0,
        "notes": "S^1(1) x R; rank-1 projection spectrum",
    }),
    CatalogEntry("al_cylinder", {
        "name": "al_cylinder", "m": 2, "q": 0, "n": 3, "k": None,
        "expected_normH2": None, "expected_P_spectrum": None,
        "shrinker": True, "homothety_factor": -1.0,
        "notes": "closed self-shrinking curve x R; single nonzero P "
                 "eigenvalue aligned with grad|H|",
    }),
    CatalogEntry("affine_plane", {
        "name": "affine_plane", "m": 2, "q": 0, "n": 3, "k": None,
        "expected_normH2": 0.0, "expected_P_spectrum": [0.0, 0.0],
        "shrinker": False, "homothety_factor": None,
        "notes": "totally geodesic; every residual vanishes exactly",
    }),
)

_BY_NAME = {e.name: e for e in CATALOG}


def entry(name: str) -> CatalogEntry:
    try:
        return _BY_NAME[name]
    except KeyError:
        raise CatalogError(
            f"unknown case {name!r}; known: {', '.join(_BY_NAME)}"
        ) from None


def build(name: str, resolution=None, order: int = 4, refine: int = 0):
    e = entry(name)
    return e.build(resolution, order, refine), dict(e.meta)


def list_catalog() -> list[dict]:
    """Stable-ordered machine-readable metadata for every catalog member."""
    return [dict(e.meta) for e in CATALOG]
