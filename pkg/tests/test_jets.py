import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st

from conftest import ANALYTIC, FD, cached_entry, interior_points
from pmcverify.charts import Domain, SymbolicChart, TableChart, X, Y
from pmcverify.errors import ContractError, InputError
from pmcverify.jets import (
    JetScheme,
    build_frames,
    central_offsets,
    conformality_residual,
    detect_branch,
    eval_jet,
    fd_weights,
    frame_gram_residual,
    one_sided_offsets,
    tangent_to_quadric_residual,
)
from pmcverify.spaceform import SpaceForm

E4 = SpaceForm.euclidean(4)
JET_FIELDS = ("u", "ux", "uy", "uxx", "uxy", "uyy", "uxxx", "uxxy", "uxyy", "uyyy")


def r4_chart(a=0.6, b=0.8):
    return cached_entry("r4", {"a": a, "b": b}).chart


class TestStencils:
    def test_central_first_derivative_weights(self):
        w = fd_weights(central_offsets(1), 1)
        np.testing.assert_allclose(w, [1 / 12, -2 / 3, 0, 2 / 3, -1 / 12], atol=1e-15)

    @pytest.mark.parametrize("order", [1, 2, 3])
    def test_weights_exact_on_polynomials(self, order):
        for offs in (central_offsets(order), one_sided_offsets(order)):
            w = fd_weights(offs, order)
            o = np.array(offs, dtype=float)
            for p in range(order + 4):
                exact = math.factorial(p) if p == order else 0.0
                assert abs(w @ o**p - exact) < 1e-9 * max(1, np.abs(o).max() ** p)


class TestEvalJet:
    def test_r4_at_origin(self):
        a, b = 0.6, 0.8
        jet = eval_jet(r4_chart(a, b), 0.0, ANALYTIC)
        du_z = jet.du_z
        # u = (a z, b z^2) in real coordinates (a x, a y, b(x^2 - y^2), 2 b x y)
        np.testing.assert_allclose(du_z, [a / 2 - 0j, -1j * a / 2, 0, 0], atol=1e-15)
        np.testing.assert_allclose(jet.du_zbar, np.conj(du_z), atol=1e-15)
        # complex u_z = (a, 2 b z), u_zz = (0, 2 b); in real pairs: d_z(a z) = a = (a/2)(1, -i)... check C-valued form
        cz = jet.du_z[0] + 1j * jet.du_z[1]
        assert cz == pytest.approx(a)
        czz = jet.u_zz[2] + 1j * jet.u_zz[3]
        assert czz == pytest.approx(2 * b)

    def test_constant_chart(self):
        chart = SymbolicChart([sp.Integer(1), sp.Integer(2), sp.Integer(0)], Domain.disk())
        jet = eval_jet(chart, np.array([0.1 + 0.2j, -0.3j]), ANALYTIC)
        for f in JET_FIELDS[1:]:
            assert np.all(getattr(jet, f) == 0)

    def test_fd_matches_analytic_interior(self):
        z = interior_points(50, 0.9)
        chart = r4_chart()
        ja, jf = eval_jet(chart, z, ANALYTIC), eval_jet(chart, z, FD)
        for f in JET_FIELDS:
            assert np.max(np.abs(getattr(ja, f) - getattr(jf, f))) < 1e-9, f

    def test_fd_rim_uses_one_sided_stencils(self):
        t = np.linspace(0, 2 * np.pi, 33)
        z = np.exp(1j * t)
        chart = r4_chart()
        ja, jf = eval_jet(chart, z, ANALYTIC), eval_jet(chart, z, FD)
        for f, tol in (("ux", 1e-9), ("uxx", 1e-8), ("uxxx", 1e-6)):
            assert np.max(np.abs(getattr(ja, f) - getattr(jf, f))) < tol, f

    # r4 is quadratic, so its stencil error is pure roundoff and shows no rate
    @pytest.mark.parametrize("gid", ["r2m", "veronese", "cmc_cap"])
    def test_fd_fourth_order_convergence(self, gid):
        chart = cached_entry(gid).chart
        z = interior_points(20, 0.6, seed=3)
        ja = eval_jet(chart, z, ANALYTIC)
        errs = []
        for h in (4e-3, 2e-3):
            jf = eval_jet(chart, z, JetScheme("finite-difference", h))
            errs.append(max(np.max(np.abs(getattr(ja, f) - getattr(jf, f))) for f in ("ux", "uy", "uxx", "uyy")))
        assert errs[0] / errs[1] >= 12

    def test_outside_domain(self):
        with pytest.raises(InputError):
            eval_jet(r4_chart(), 1.5, ANALYTIC)

    def test_table_rejects_analytic(self):
        xs = np.linspace(0, 1, 9)
        vals = np.zeros((9, 9, 3))
        tab = TableChart(xs, xs, vals, Domain.rect(0, 1, 0, 1))
        with pytest.raises(ContractError):
            eval_jet(tab, 0.5 + 0.5j, ANALYTIC)
        with pytest.raises(InputError):
            eval_jet(tab, 0.51 + 0.5j, FD)

    def test_table_matches_symbolic(self):
        chart = r4_chart()
        xs = np.linspace(-0.4, 0.4, 41)
        xx, yy = np.meshgrid(xs, xs)
        tab = TableChart(xs, xs, chart.evaluate(xx, yy), Domain.rect(-0.4, 0.4, -0.4, 0.4))
        z = xx[20, 5:36:5] + 1j * yy[20, 5:36:5]
        jt, ja = eval_jet(tab, z, FD), eval_jet(chart, z, ANALYTIC)
        for f in ("ux", "uxx", "uxxx"):
            assert np.max(np.abs(getattr(jt, f) - getattr(ja, f))) < 1e-8, f

    def test_conjugation_symmetry(self):
        jet = eval_jet(cached_entry("veronese").chart, interior_points(10), ANALYTIC)
        np.testing.assert_allclose(jet.du_zbar, np.conj(jet.du_z), atol=0)
        np.testing.assert_allclose(jet.u_zbarzbar, np.conj(jet.u_zz), atol=0)


class TestConformality:
    def test_r4_conformal_factor(self):
        a, b = 0.6, 0.8
        z = interior_points(30)
        jet = eval_jet(r4_chart(a, b), z, ANALYTIC)
        defect, lam2 = conformality_residual(jet, E4)
        assert np.max(defect) < 1e-15
        np.testing.assert_allclose(lam2, a * a + 4 * b * b * np.abs(z) ** 2, rtol=1e-13)

    def test_stretched_chart_is_not_conformal(self):
        chart = SymbolicChart.from_real_components(["x", "2*y", "0", "0"], Domain.disk())
        defect, _ = conformality_residual(eval_jet(chart, 0.1, ANALYTIC), E4)
        assert defect == pytest.approx(0.75)

    def test_z_zbar_chart_is_conformal(self):
        # (z, zbar) as a map into C^2 = R^4 is an isometric embedding of the plane
        chart = SymbolicChart.from_complex_components(["z", "zbar"], Domain.disk())
        defect, lam2 = conformality_residual(eval_jet(chart, 0.3, ANALYTIC), E4)
        assert defect < 1e-15 and lam2 == pytest.approx(2.0)

    def test_veronese_interior_grid(self):
        e = cached_entry("veronese")
        xs = np.linspace(-0.95, 0.95, 20)
        z = (xs[None, :] + 1j * xs[:, None]).reshape(-1)
        z = z[np.abs(z) < 1]
        defect, lam2 = conformality_residual(eval_jet(e.chart, z, ANALYTIC), e.sf)
        assert np.max(defect) < 1e-10 and np.min(lam2) > 0


class TestFrames:
    def test_plane(self):
        chart = SymbolicChart.from_real_components(["x", "y", "0", "0"], Domain.disk())
        fr = build_frames(eval_jet(chart, 0.2 + 0.1j, ANALYTIC), E4)
        np.testing.assert_allclose(fr.e1, [1, 0, 0, 0])
        np.testing.assert_allclose(fr.e2, [0, 1, 0, 0])
        np.testing.assert_allclose(fr.normals, [[0, 0, 1, 0], [0, 0, 0, 1]])

    def test_r4_at_origin_tangent_span(self):
        fr = build_frames(eval_jet(r4_chart(), 0.0, ANALYTIC), E4)
        np.testing.assert_allclose(fr.e1, [1, 0, 0, 0], atol=1e-15)
        np.testing.assert_allclose(fr.e2, [0, 1, 0, 0], atol=1e-15)

    @pytest.mark.parametrize("gid", ["r4", "r2m", "veronese", "cmc_cap"])
    def test_gram_and_span(self, gid):
        e = cached_entry(gid)
        jet = eval_jet(e.chart, interior_points(200, 0.98, seed=7), ANALYTIC)
        fr = build_frames(jet, e.sf)
        assert np.max(frame_gram_residual(fr, e.sf)) < 1e-10
        assert np.max(tangent_to_quadric_residual(fr, e.sf)) < 1e-10
        # du_z lies in span(e1, e2): its normal components vanish
        proj = np.einsum("nad,nd->na", fr.normals, jet.du_z * e.sf.signature)
        assert np.max(np.abs(proj)) < 1e-10

    def test_orientation_convention(self):
        e = cached_entry("veronese")
        fr = build_frames(eval_jet(e.chart, interior_points(20), ANALYTIC), e.sf)
        B = np.concatenate([fr.point[:, None], fr.tangent, fr.normals], axis=1)
        assert np.all(np.linalg.det(B) > 0)

    def test_frames_on_hyperboloid(self):
        # totally geodesic H^2 inside H^3: u = (2x, 2y, 0, 1 + |z|^2) / (1 - |z|^2)
        r2 = X**2 + Y**2
        chart = SymbolicChart([2 * X / (1 - r2), 2 * Y / (1 - r2), sp.Integer(0), (1 + r2) / (1 - r2)], Domain.disk(0.9))
        sf = SpaceForm.hyperbolic(3)
        fr = build_frames(eval_jet(chart, interior_points(30, 0.85), ANALYTIC), sf)
        assert np.max(frame_gram_residual(fr, sf)) < 1e-10
        assert np.max(tangent_to_quadric_residual(fr, sf)) < 1e-10
        np.testing.assert_allclose(np.abs(fr.normals[:, 0, 2]), 1.0, atol=1e-12)


class TestBranch:
    def test_branch_at_origin(self):
        chart = SymbolicChart.from_complex_components(["z**2", "0"], Domain.disk())
        jet = eval_jet(chart, np.array([0.0, 0.5]), ANALYTIC)
        np.testing.assert_array_equal(detect_branch(jet), [True, False])
        fr = build_frames(jet, E4)
        assert fr.branch[0] and np.all(np.isnan(fr.e1[0])) and fr.gauge_id[0] == -1

    @given(st.floats(-0.95, 0.95), st.floats(-0.95, 0.95))
    def test_r4_never_branched(self, x, y):
        if x * x + y * y < 1:
            assert not detect_branch(eval_jet(r4_chart(), complex(x, y), ANALYTIC))

    def test_inclusive_threshold(self):
        chart = SymbolicChart.from_complex_components(["z/4", "0"], Domain.disk())
        jet = eval_jet(chart, 0.0, ANALYTIC)
        lam = math.sqrt(conformality_residual(jet, E4)[1])
        assert detect_branch(jet, tol_branch=lam)
        assert not detect_branch(jet, tol_branch=lam * (1 - 1e-12))
