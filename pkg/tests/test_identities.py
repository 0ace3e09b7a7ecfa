import numpy as np
import pytest

from pseudomcf.ambient import Signature
from pseudomcf.catalog import clifford_torus, sphere
from pseudomcf.geometry import ImmersionSample, build_frame
from pseudomcf.identities import (
    HomothetyGateError,
    bounded_geometry_report,
    codazzi_residual,
    convergence_study,
    gauss_residual,
    homothety_fit,
    identity_suite,
    laplace_normF_residual,
    laplace_normH_residual,
    measured_orders,
    p_spectral_diagnostics,
    parallel_principal_normal_residual,
    ricci_normal_residual,
    shrinker_residual,
    simons_residual,
)
from pseudomcf.mesh import Axis, ParamDomain

TWO_PI = 2.0 * np.pi


def twisted_torus_sample(n=32, refine=0, eps=0.3):
    """Torus embedding in R^5 with a non-flat normal bundle."""
    dom = ParamDomain((Axis(0, TWO_PI, n, True), Axis(0, TWO_PI, n, True)))
    for _ in range(refine):
        dom = dom.refined()
    u, v = dom.meshgrid()
    pos = np.stack([np.cos(u), np.sin(u), np.cos(v), np.sin(v),
                    eps * np.sin(u + v)], axis=-1)
    return ImmersionSample(dom, Signature(0, 5), pos)


class TestExactZeroOnPlane:
    def test_every_residual_vanishes_exactly(self, frames):
        fr, _ = frames("affine_plane")
        assert gauss_residual(fr).sup == 0.0
        assert codazzi_residual(fr).sup == 0.0
        assert simons_residual(fr).sup == 0.0
        assert laplace_normF_residual(fr).sup == 0.0
        assert shrinker_residual(fr).sup == 0.0
        assert laplace_normH_residual(fr).sup == 0.0
        assert ricci_normal_residual(fr).sup == 0.0


class TestShrinkerResidual:
    def test_catalog_shrinkers_small(self, frames):
        for name in ("circle", "clifford_torus", "cylinder_s1xr"):
            fr, _ = frames(name)
            assert shrinker_residual(fr).sup < 1e-10, name
        fr, _ = frames("sphere_m2")
        assert shrinker_residual(fr).sup < 1e-6

    def test_hyperbolic_certifies_nonshrinker(self, frames):
        fr, _ = frames("hyperbolic_expander")
        rep = shrinker_residual(fr)
        # the defect is |H + F^perp| = |3F|, Euclidean size 3 |F|_E >= 3
        expect = 3.0 * np.sqrt((fr.F ** 2).sum(-1))
        dev = np.abs(rep.per_node - expect)
        assert dev[fr.interior].max() < 1e-5
        assert rep.per_node[fr.interior].min() >= 3.0 - 1e-3

    def test_isometry_invariance(self, frames):
        fr, meta = frames("hyperbolic_expander")
        rng = np.random.default_rng(42)
        iso = fr.signature.random_isometry(rng)
        moved = fr.sample.with_positions(fr.F @ iso.T)
        fr2 = build_frame(moved)
        r1 = shrinker_residual(fr)
        r2 = shrinker_residual(fr2)
        assert abs(r1.sup - r2.sup) < 1e-9 * max(1.0, r1.sup)

    def test_homothety_fit(self, frames):
        fr, _ = frames("hyperbolic_expander")
        lam, resid = homothety_fit(fr)
        assert lam == pytest.approx(2.0, abs=1e-6)
        assert resid < 1e-3


class TestGate:
    def test_hyperbolic_refused_as_shrinker(self, frames):
        fr, _ = frames("hyperbolic_expander")
        with pytest.raises(HomothetyGateError):
            laplace_normH_residual(fr, factor=-1.0)

    def test_hyperbolic_accepted_as_expander(self, frames):
        fr, _ = frames("hyperbolic_expander")
        rep = laplace_normH_residual(fr, factor=2.0)
        assert rep.sup < 1e-6  # identity exact on constant-norm members

    def test_suite_reports_skip(self, frames):
        fr, _ = frames("hyperbolic_expander")
        reps = {r.name: r for r in identity_suite(fr, laplace_normH_factor=-1.0)}
        assert reps["laplace_normH"].skipped


class TestLaplaceNormF:
    def test_hyperbolic_general_form_decays(self, frames):
        # Lap<F,F> = 2m + 2<H,F> holds for the expander even though the
        # shrinker-substituted right side 2m - 2<H,H> = 12 does not vanish
        fr, _ = frames("hyperbolic_expander")
        rep = laplace_normF_residual(fr)
        assert rep.sup < 1e-8
        assert rep.notes["shrinker_form_rhs_sup"] == pytest.approx(12.0, abs=1e-8)

    def test_plane_rhs_is_2m(self, frames):
        fr, _ = frames("affine_plane")
        rep = laplace_normF_residual(fr)
        assert rep.sup == 0.0
        assert rep.notes["shrinker_form_rhs_sup"] == pytest.approx(4.0)


class TestRicciNormal:
    def test_hypersurface_both_sides_vanish(self, frames):
        fr, _ = frames("sphere_m2")
        assert ricci_normal_residual(fr).sup < 1e-6

    def test_flat_normal_bundle_torus(self, frames):
        fr, _ = frames("clifford_torus")
        assert ricci_normal_residual(fr).sup < 1e-10

    def test_twisted_torus_residual_decays(self):
        sups = []
        for refine in (0, 1):
            fr = build_frame(twisted_torus_sample(24, refine))
            sups.append(ricci_normal_residual(fr).sup)
        assert sups[0] / sups[1] >= 2 ** 2


class TestSimons:
    def test_circle_closed_form_rounding(self, frames):
        # m = 1: curvature terms drop and the two sides cancel identically
        fr, _ = frames("circle")
        assert simons_residual(fr).sup < 1e-10

    def test_sphere_decays(self):
        sups = []
        for refine in (0, 1):
            fr = build_frame(sphere(2, resolution=32, refine=refine))
            sups.append(simons_residual(fr).sup)
        assert np.log2(sups[0] / sups[1]) >= 2.0


class TestParallelNu:
    def test_catalog_shrinkers(self, frames):
        for name, tol in (("sphere_m2", 1e-6), ("cylinder_s1xr", 1e-10)):
            fr, _ = frames(name)
            assert parallel_principal_normal_residual(fr).sup < tol, name

    def test_perturbed_cylinder_positive(self):
        dom = ParamDomain((Axis(0, TWO_PI, 64, True), Axis(-2, 2, 33, False)))
        th, z = dom.meshgrid()
        r = 1.0 + 0.05 * np.cos(2 * th) * np.exp(-z ** 2)
        pos = np.stack([r * np.cos(th), r * np.sin(th), z], axis=-1)
        fr = build_frame(ImmersionSample(dom, Signature(0, 3), pos))
        rep = parallel_principal_normal_residual(fr)
        assert rep.sup > 1e-3


class TestConvergence:
    def test_hyperbolic_orders(self):
        from pseudomcf import catalog

        def builder(level):
            s, _ = catalog.build("hyperbolic_expander", 24, refine=level)
            return build_frame(s)

        study = convergence_study(builder, levels=2, laplace_normH_factor=2.0)
        for name in ("gauss", "codazzi", "simons"):
            tab = study["orders"][name]
            assert tab["at_floor"] or min(tab["orders"]) >= 2.0, (name, tab)

    def test_measured_orders_floor(self):
        out = measured_orders([1e-12, 5e-12])
        assert out["at_floor"] and out["orders"] is None
        out = measured_orders([1e-2, 1e-3])
        assert not out["at_floor"]
        assert out["orders"][0] == pytest.approx(np.log2(10.0))


class TestPSpectral:
    def test_sphere_projection(self, frames):
        fr, _ = frames("sphere_m2")
        spec = p_spectral_diagnostics(fr)
        np.testing.assert_allclose(spec["eigenvalues_min"], [1.0, 1.0], atol=1e-6)
        np.testing.assert_allclose(spec["eigenvalues_max"], [1.0, 1.0], atol=1e-6)
        assert spec["projection_residual_sup"] < 1e-6
        assert spec["rank_min"] == spec["rank_max"] == 2

    def test_cylinder_rank_one_projection(self, frames):
        fr, _ = frames("cylinder_s1xr")
        spec = p_spectral_diagnostics(fr)
        np.testing.assert_allclose(spec["eigenvalues_min"], [0.0, 1.0], atol=1e-6)
        np.testing.assert_allclose(spec["eigenvalues_max"], [0.0, 1.0], atol=1e-6)
        assert spec["rank_min"] == spec["rank_max"] == 1

    def test_al_cylinder_alignment(self, frames):
        fr, _ = frames("al_cylinder")
        spec = p_spectral_diagnostics(fr)
        assert spec["rank_min"] == spec["rank_max"] == 1
        assert spec["alignment_min"] >= 1.0 - 1e-6
        assert spec["alignment_nodes"] > 0
        lem = spec["lemma_residuals"]
        assert lem is not None
        assert max(lem.values()) < 1e-8

    def test_gating_on_expander(self, frames):
        fr, _ = frames("hyperbolic_expander")
        spec = p_spectral_diagnostics(fr)
        assert spec["gated"] and spec["lemma_residuals"] is None
        # P = -2 g: both eigenvalues -2
        np.testing.assert_allclose(spec["eigenvalues_min"], [-2.0, -2.0], atol=1e-6)

    def test_reparametrization_invariant_spectrum(self):
        base = build_frame(clifford_torus(48))
        dom = base.domain
        u, v = dom.meshgrid()
        uu = u + 0.2 * np.sin(v)
        vv = v + 0.1 * np.cos(u)
        pos = np.stack([np.cos(uu), np.sin(uu), np.cos(vv), np.sin(vv)], axis=-1)
        warped = build_frame(ImmersionSample(dom, Signature(0, 4), pos))
        s1 = p_spectral_diagnostics(base)
        s2 = p_spectral_diagnostics(warped)
        np.testing.assert_allclose(s2["eigenvalues_min"],
                                   s1["eigenvalues_min"], atol=1e-4)
        np.testing.assert_allclose(s2["eigenvalues_max"],
                                   s1["eigenvalues_max"], atol=1e-4)

    def test_requires_spacelike(self):
        from tests.test_geometry import de_sitter_sample

        fr = build_frame(de_sitter_sample())
        with pytest.raises(ValueError):
            p_spectral_diagnostics(fr)


class TestBoundedGeometry:
    def test_sphere_constants(self, frames):
        fr, _ = frames("sphere_m2")
        rep = bounded_geometry_report(fr, K=1)
        # A = -g F / 2 on the radius-sqrt(2) sphere: |A|^2 = m |F|^2 / 4 = 1
        assert rep["derivative_bounds"][0]["c_k"] == pytest.approx(1.0, abs=1e-6)
        assert rep["derivative_bounds"][0]["d_k"] == 0.0
        assert rep["inv_H"]["defined"]
        assert rep["inv_H"]["sup"] == pytest.approx(1 / np.sqrt(2), abs=1e-9)
        assert rep["inverse_lipschitz"]["min_ratio"] > 0.1

    def test_plane_flags_inv_H(self, frames):
        fr, _ = frames("affine_plane")
        rep = bounded_geometry_report(fr, K=1)
        assert rep["derivative_bounds"][0]["c_k"] == 0.0
        assert rep["derivative_bounds"][0]["d_k"] == 0.0
        assert rep["inv_H"]["defined"] is False

    def test_hyperbolic_timelike_component(self, frames):
        fr, _ = frames("hyperbolic_expander")
        rep = bounded_geometry_report(fr, K=0)
        assert rep["derivative_bounds"][0]["d_k"] > 0.0

    def test_depth_limit(self, frames):
        fr, _ = frames("affine_plane")
        with pytest.raises(ValueError):
            bounded_geometry_report(fr, K=3)


def test_suite_names_stable(frames):
    fr, _ = frames("clifford_torus")
    names = [r.name for r in identity_suite(fr)]
    assert names == ["gauss", "codazzi", "ricci_normal", "simons",
                     "laplace_normF", "shrinker", "laplace_normH",
                     "parallel_nu"]
