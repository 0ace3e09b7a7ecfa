import numpy as np
import pytest

from pseudomcf.ambient import Signature
from pseudomcf.mesh import (
    Axis,
    GridField,
    ParamDomain,
    StencilError,
    build_grid,
    diff,
    grid_csv,
    interior_mask,
    partial,
)

TWO_PI = 2.0 * np.pi


def circle_domain(n=64):
    return ParamDomain((Axis(0.0, TWO_PI, n, True),))


def test_build_grid_circle():
    dom = circle_domain(8)
    field = build_grid(dom, lambda th: (np.cos(th), np.sin(th)))
    assert field.values.shape == (8, 2)
    r = np.hypot(field.values[:, 0], field.values[:, 1])
    np.testing.assert_allclose(r, 1.0, atol=1e-15)
    # no duplicated endpoint sample
    assert not np.allclose(field.values[0], field.values[-1])


def test_build_grid_torus_norm():
    dom = ParamDomain((Axis(0, TWO_PI, 16, True), Axis(0, TWO_PI, 16, True)))
    f = build_grid(dom, lambda u, v: (np.cos(u), np.sin(u), np.cos(v), np.sin(v)),
                   Signature(0, 4))
    n2 = (f.values ** 2).sum(-1)
    assert f.values.shape == (16, 16, 4)
    np.testing.assert_allclose(n2, 2.0, atol=1e-14)


def test_build_grid_hyperbolic_norm():
    sig = Signature(1, 3)
    dom = ParamDomain((Axis(0.2, 1.5, 12, False), Axis(0, TWO_PI, 16, True)))
    f = build_grid(dom, lambda r, p: (np.cosh(r), np.sinh(r) * np.cos(p),
                                      np.sinh(r) * np.sin(p)), sig)
    np.testing.assert_allclose(sig.sq_norm(f.values), -1.0, atol=1e-13)


def test_build_grid_failure_names_node():
    dom = ParamDomain((Axis(-1.0, 1.0, 9, False),))

    def chart(x):
        return (np.sqrt(x), x)  # NaN for x < 0

    with pytest.raises(ValueError, match="not finite at node"):
        build_grid(dom, chart)


def test_diff_constant_is_zero():
    dom = circle_domain(32)
    vals = np.full(32, 3.7)
    assert np.all(diff(dom, vals, 0, 4) == 0.0)


def test_diff_periodic_order4_error_scaling():
    errs = []
    for n in (32, 64):
        dom = circle_domain(n)
        th = dom.coords()[0]
        d = diff(dom, np.sin(th), 0, 4)
        errs.append(np.abs(d - np.cos(th)).max())
    assert errs[0] / errs[1] >= 2 ** 4 * 0.8


def test_diff_order2_scaling():
    errs = []
    for n in (32, 64):
        dom = circle_domain(n)
        th = dom.coords()[0]
        d = diff(dom, np.sin(th), 0, 2)
        errs.append(np.abs(d - np.cos(th)).max())
    assert errs[0] / errs[1] >= 2 ** 2 * 0.8


def test_diff_linear_exact_including_boundary():
    dom = ParamDomain((Axis(-2.0, 2.0, 17, False),))
    x = dom.coords()[0]
    d = diff(dom, 3.0 * x + 1.0, 0, 4)
    np.testing.assert_array_equal(d, np.full(17, 3.0))


def test_diff_quadratic_exact_everywhere():
    dom = ParamDomain((Axis(-2.0, 2.0, 17, False),))
    x = dom.coords()[0]
    d = diff(dom, x ** 2, 0, 4)
    np.testing.assert_allclose(d, 2.0 * x, atol=1e-13)


def test_diff_quartic_exact_in_central_region():
    dom = ParamDomain((Axis(-2.0, 2.0, 17, False),))
    x = dom.coords()[0]
    d = diff(dom, x ** 4, 0, 4)
    np.testing.assert_allclose(d[2:-2], 4.0 * x[2:-2] ** 3, atol=1e-12)


def test_mixed_partials_commute():
    dom = ParamDomain((Axis(0, TWO_PI, 24, True), Axis(-1.0, 1.0, 21, False)))
    u, v = dom.meshgrid()
    f = np.sin(u) * np.exp(v)
    d01 = diff(dom, diff(dom, f, 0), 1)
    d10 = diff(dom, diff(dom, f, 1), 0)
    np.testing.assert_allclose(d01, d10, atol=1e-12)


def test_mixed_partials_commute_under_refinement():
    sups = []
    for n in (24, 48):
        dom = ParamDomain((Axis(0, TWO_PI, n, True), Axis(0, TWO_PI, n, True)))
        u, v = dom.meshgrid()
        f = np.sin(u) * np.cos(2.0 * v)
        d01 = diff(dom, diff(dom, f, 0), 1)
        exact = np.cos(u) * (-2.0 * np.sin(2.0 * v))
        sups.append(np.abs(d01 - exact).max())
    assert sups[0] / sups[1] >= 2 ** 4 * 0.8


def test_diff_validation():
    dom = circle_domain(16)
    with pytest.raises(ValueError):
        diff(dom, np.zeros(16), 1, 4)
    with pytest.raises(ValueError):
        diff(dom, np.zeros(16), 0, 3)


def test_axis_too_short():
    with pytest.raises(ValueError):
        Axis(0.0, 1.0, 4, False)


def test_partial_wraps_gridfield():
    dom = circle_domain(16)
    th = dom.coords()[0]
    out = partial(GridField(dom, np.sin(th)), 0, 4)
    assert isinstance(out, GridField)
    assert out.values.shape == (16,)


def test_interior_mask_periodic_all_true():
    dom = ParamDomain((Axis(0, TWO_PI, 16, True), Axis(0, TWO_PI, 16, True)))
    assert interior_mask(dom, 2).all()


def test_interior_mask_patch_count():
    dom = ParamDomain((Axis(0.0, 1.0, 16, False),))
    mask = interior_mask(dom, 2)
    assert mask.sum() == 12


def test_interior_mask_empty_warns():
    dom = ParamDomain((Axis(0.0, 1.0, 16, False),))
    with pytest.warns(UserWarning):
        mask = interior_mask(dom, 8)
    assert not mask.any()


def test_grid_field_shape_checked():
    dom = circle_domain(16)
    with pytest.raises(ValueError):
        GridField(dom, np.zeros((15, 2)))


def test_grid_csv(tmp_path):
    dom = circle_domain(8)
    f = build_grid(dom, lambda th: (np.cos(th), np.sin(th)))
    path = tmp_path / "grid.csv"
    grid_csv(f, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "x0,c0,c1"
    assert len(lines) == 9
    x0, c0, c1 = (float(t) for t in lines[1].split(","))
    assert (x0, c0, c1) == (0.0, 1.0, 0.0)


def test_refined_halves_spacing():
    per = Axis(0, TWO_PI, 16, True)
    pat = Axis(0.0, 1.0, 9, False)
    assert per.refined().spacing == pytest.approx(per.spacing / 2)
    assert pat.refined().spacing == pytest.approx(pat.spacing / 2)
