"""Structured parameter grids and finite-difference derivative operators.

Grids are uniform per axis.  Periodic axes identify the interval endpoints,
so ``N`` samples cover [a, b) without a duplicated node; non-periodic axes
sample [a, b] inclusively.  Derivatives use central stencils of order 2 or 4
on periodic axes; on non-periodic axes the interior is central and the nodes
near the boundary fall back to one-sided/short-central order-2 stencils, so
sup-norm reporting is restricted to interior masks wide enough to exclude the
contaminated band.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np


class StencilError(ValueError):
    """Axis too short for the requested stencil."""


@dataclass(frozen=True)
class Axis:
    lo: float
    hi: float
    num: int
    periodic: bool = False

    def __post_init__(self):
        if self.num < 8:
            raise ValueError(f"need at least 8 samples per axis, got {self.num}")
        if not self.hi > self.lo:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    @property
    def spacing(self) -> float:
        span = self.hi - self.lo
        return span / self.num if self.periodic else span / (self.num - 1)

    def nodes(self) -> np.ndarray:
        if self.periodic:
            return self.lo + self.spacing * np.arange(self.num)
        return np.linspace(self.lo, self.hi, self.num)

    def refined(self) -> "Axis":
        # halves the spacing exactly for both kinds of axis
        num = 2 * self.num if self.periodic else 2 * self.num - 1
        return Axis(self.lo, self.hi, num, self.periodic)


@dataclass(frozen=True)
class ParamDomain:
    axes: tuple[Axis, ...]

    def __post_init__(self):
        object.__setattr__(self, "axes", tuple(self.axes))

    @property
    def m(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(ax.num for ax in self.axes)

    @property
    def spacings(self) -> tuple[float, ...]:
        return tuple(ax.spacing for ax in self.axes)

    def coords(self) -> list[np.ndarray]:
        return [ax.nodes() for ax in self.axes]

    def meshgrid(self) -> list[np.ndarray]:
        return list(np.meshgrid(*self.coords(), indexing="ij"))

    def refined(self) -> "ParamDomain":
        return ParamDomain(tuple(ax.refined() for ax in self.axes))


@dataclass
class GridField:
    """Component array over a grid; grid axes first, component axes trailing."""

    domain: ParamDomain
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape[: self.domain.m] != self.domain.shape:
            raise ValueError(
                f"array shape {self.values.shape} does not start with grid "
                f"shape {self.domain.shape}"
            )


def build_grid(domain: ParamDomain, chart, signature=None) -> GridField:
    """Sample an ambient chart on the grid nodes.

    ``chart`` receives the meshgrid coordinate arrays and returns either an
    array with a trailing component axis or a sequence of component arrays.
    """
    grids = domain.meshgrid()
    try:
        vals = chart(*grids)
    except Exception as exc:  # locate the failing node for the error message
        for idx in np.ndindex(*domain.shape):
            try:
                chart(*(g[idx] for g in grids))
            except Exception:
                coords = tuple(float(g[idx]) for g in grids)
                raise ValueError(f"chart evaluation failed at node {coords}") from exc
        raise
    if isinstance(vals, (tuple, list)):
        vals = np.stack([np.asarray(v, dtype=float) for v in vals], axis=-1)
    vals = np.asarray(vals, dtype=float)
    if vals.shape[: domain.m] != domain.shape:
        raise ValueError("chart output shape does not match the grid")
    if not np.all(np.isfinite(vals)):
        bad = np.argwhere(~np.isfinite(vals).reshape(domain.shape + (-1,)).all(axis=-1))
        idx = tuple(int(i) for i in bad[0])
        coords = tuple(float(g[idx]) for g in grids)
        raise ValueError(f"chart evaluation not finite at node {coords}")
    if signature is not None and vals.shape[-1] != signature.n:
        raise ValueError(
            f"chart produced {vals.shape[-1]} components for ambient n={signature.n}"
        )
    return GridField(domain, vals)


def _diff_first_axis(v: np.ndarray, h: float, order: int, periodic: bool) -> np.ndarray:
    # stencils combine node differences (not raw values), so constant fields
    # differentiate to exact zeros
    out = np.empty_like(v)
    if periodic:
        if order == 4:
            out[:] = (
                8.0 * (np.roll(v, -1, 0) - np.roll(v, 1, 0))
                - (np.roll(v, -2, 0) - np.roll(v, 2, 0))
            ) / (12.0 * h)
        else:
            out[:] = (np.roll(v, -1, 0) - np.roll(v, 1, 0)) / (2.0 * h)
        return out
    if order == 4:
        out[2:-2] = (8.0 * (v[3:-1] - v[1:-3]) - (v[4:] - v[:-4])) / (12.0 * h)
        out[1] = (v[2] - v[0]) / (2.0 * h)
        out[-2] = (v[-1] - v[-3]) / (2.0 * h)
    else:
        out[1:-1] = (v[2:] - v[:-2]) / (2.0 * h)
    out[0] = (4.0 * (v[1] - v[0]) - (v[2] - v[0])) / (2.0 * h)
    out[-1] = (4.0 * (v[-1] - v[-2]) - (v[-1] - v[-3])) / (2.0 * h)
    return out


def diff(domain: ParamDomain, values: np.ndarray, axis: int, order: int = 4) -> np.ndarray:
    """Partial derivative along one grid axis.

    Order-4 central on periodic axes; on non-periodic axes order-4 central in
    the interior with order-2 one-sided stencils at the two boundary bands.
    Exact on polynomials up to the stencil order (boundary rows: quadratics).
    """
    if order not in (2, 4):
        raise ValueError(f"stencil order must be 2 or 4, got {order}")
    if not 0 <= axis < domain.m:
        raise ValueError(f"axis {axis} out of range for m={domain.m}")
    ax = domain.axes[axis]
    if ax.num < order + 1:
        raise StencilError(f"axis {axis}: {ax.num} nodes < stencil needs {order + 1}")
    v = np.moveaxis(np.asarray(values, dtype=float), axis, 0)
    out = _diff_first_axis(v, ax.spacing, order, ax.periodic)
    return np.moveaxis(out, 0, axis)


def partial(f: GridField, axis: int, order: int = 4) -> GridField:
    return GridField(f.domain, diff(f.domain, f.values, axis, order))


def stencil_halfwidth(order: int) -> int:
    return order // 2


def default_interior_width(order: int) -> int:
    # wide enough that four chained derivative applications (e.g. the rough
    # Laplacian of a curvature scalar) never read the one-sided boundary band
    return 4 * stencil_halfwidth(order)


def interior_mask(domain: ParamDomain, width: int) -> np.ndarray:
    """True on nodes at least ``width`` nodes from every non-periodic boundary."""
    if width < 1:
        raise ValueError("width must be >= 1")
    mask = np.ones(domain.shape, dtype=bool)
    for axis, ax in enumerate(domain.axes):
        if ax.periodic:
            continue
        idx = np.arange(ax.num)
        keep = (idx >= width) & (idx < ax.num - width)
        shape = [1] * domain.m
        shape[axis] = ax.num
        mask &= keep.reshape(shape)
    if not mask.any():
        warnings.warn("interior mask is empty for the requested width", stacklevel=2)
    return mask


def grid_csv(field: GridField, path) -> None:
    """Dump a grid field: one row per node, parameters then components."""
    dom = field.domain
    grids = dom.meshgrid()
    flat_params = [g.reshape(-1) for g in grids]
    comps = field.values.reshape(np.prod(dom.shape, dtype=int), -1)
    header = [f"x{i}" for i in range(dom.m)] + [f"c{j}" for j in range(comps.shape[1])]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in range(comps.shape[0]):
            cells = [repr(float(p[row])) for p in flat_params]
            cells += [repr(float(c)) for c in comps[row]]
            fh.write(",".join(cells) + "\n")
