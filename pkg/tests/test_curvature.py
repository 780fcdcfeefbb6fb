import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st

from conftest import ANALYTIC, FD, cached_entry, interior_points
from pmcverify.charts import Domain, SymbolicChart
from pmcverify.curvature import (
    MIXED_COEFFICIENT,
    codazzi_residual,
    complex_A,
    curvature_for_points,
    h_normality_residual,
    mixed_identity_residual,
    normal_connection,
    pmc_residual_from_jets,
    ricci_residual,
    rotate_normal_gauge,
    second_fundamental_form,
    trace_identity_residual,
    umbilicity_norm,
)
from pmcverify.errors import ContractError
from pmcverify.spaceform import SpaceForm

GALLERY_IDS = ["r4", "r2m", "veronese", "cmc_cap"]
E4 = SpaceForm.euclidean(4)


def packet_at(gid, z, params=None, scheme=ANALYTIC):
    e = cached_entry(gid, params)
    return (e,) + curvature_for_points(e.chart, z, e.sf, scheme)


class TestUmbilicity:
    def test_round_cap(self):
        _, _, _, pk = packet_at("cmc_cap", interior_points(40, 0.95))
        assert np.max(umbilicity_norm(pk)) < 1e-9

    def test_plane(self):
        chart = SymbolicChart.from_real_components(["x", "y", "0", "0"], Domain.disk())
        _, _, pk = curvature_for_points(chart, interior_points(10), E4)
        assert np.all(umbilicity_norm(pk) == 0)

    def test_r4_origin_value(self):
        a = b = 1 / math.sqrt(2)
        _, _, _, pk = packet_at("r4", np.array([0.0j]), {"a": a, "b": b})
        # u_xx = (0, 0, 2b, 0), u_xy = (0, 0, 0, 2b), |u_x| = a, so each shape
        # operator is trace free with entries +-k, k = 2b/a^2, and the norm is 2k
        k = 2 * b / a**2
        assert umbilicity_norm(pk)[0] == pytest.approx(2 * k, rel=1e-12)
        assert umbilicity_norm(pk)[0] > 0.1


class TestPointwiseIdentities:
    @pytest.mark.parametrize("gid", GALLERY_IDS)
    def test_mixed_identity(self, gid):
        e, jet, _, pk = packet_at(gid, interior_points(60, 0.97, seed=1))
        assert np.max(mixed_identity_residual(jet, pk, e.sf)) < 1e-8

    def test_mixed_identity_coefficient_value(self):
        # A(d_zbar, d_z) = lambda^2 H / 2 and |grad u|^2 = 2 lambda^2
        e, jet, fr, pk = packet_at("cmc_cap", interior_points(5))
        _, A_zbarz = complex_A(pk)
        np.testing.assert_allclose(A_zbarz, 0.5 * fr.lambda_sq[:, None] * pk.H, atol=1e-12)
        assert MIXED_COEFFICIENT == 0.25

    def test_eighth_coefficient_fails_off_minimal(self):
        e, jet, _, pk = packet_at("cmc_cap", interior_points(5))
        assert np.min(mixed_identity_residual(jet, pk, e.sf, coefficient=0.125)) > 1e-2

    @pytest.mark.parametrize("gid", GALLERY_IDS)
    def test_trace_and_normality(self, gid):
        e, _, fr, pk = packet_at(gid, interior_points(60, 0.97, seed=2))
        assert np.max(trace_identity_residual(pk, e.sf)) < 1e-10
        assert np.max(h_normality_residual(pk, fr, e.sf)) < 1e-10

    def test_cap_mean_curvature(self):
        e, _, _, pk = packet_at("cmc_cap", interior_points(30), {"r": 1.2, "tilt": 0.3})
        hn = np.linalg.norm(pk.H, axis=-1)
        np.testing.assert_allclose(hn, 1 / 1.2, rtol=1e-11)

    def test_veronese_minimal_in_sphere(self):
        e, _, _, pk = packet_at("veronese", interior_points(30))
        assert np.max(np.linalg.norm(pk.H, axis=-1)) < 1e-10

    def test_shape_ops_symmetric(self):
        _, _, _, pk = packet_at("r4", interior_points(20))
        np.testing.assert_allclose(pk.shape_ops, np.swapaxes(pk.shape_ops, -1, -2), atol=0)


class TestGaugeCovariance:
    @given(st.floats(-math.pi, math.pi))
    def test_constant_rotation(self, angle):
        e = cached_entry("r4")
        z = interior_points(15, seed=4)
        jet, fr, pk = curvature_for_points(e.chart, z, e.sf)
        fr2 = rotate_normal_gauge(fr, angle)
        pk2 = second_fundamental_form(jet, fr2, e.sf)
        c, s = math.cos(angle), math.sin(angle)
        R = np.array([[c, s], [-s, c]])
        np.testing.assert_allclose(pk2.shape_ops, np.einsum("ab,nbij->naij", R, pk.shape_ops), atol=1e-12)
        np.testing.assert_allclose(umbilicity_norm(pk2), umbilicity_norm(pk), atol=1e-12)
        np.testing.assert_allclose(ricci_residual(pk2), ricci_residual(pk), atol=1e-12)
        np.testing.assert_allclose(
            pmc_residual_from_jets(jet, fr2, pk2, e.sf), pmc_residual_from_jets(jet, fr, pk, e.sf), atol=1e-12
        )

    def test_rotation_needs_rank_two(self):
        e = cached_entry("veronese")
        _, fr, _ = curvature_for_points(e.chart, interior_points(3), e.sf)
        rotate_normal_gauge(fr, 0.1)  # rank 2 in S^4
        chart = SymbolicChart.from_real_components(["x", "y", "0"], Domain.disk())
        _, fr3, _ = curvature_for_points(chart, interior_points(3), SpaceForm.euclidean(3))
        with pytest.raises(ContractError):
            rotate_normal_gauge(fr3, 0.1)


class TestNormalBundle:
    def test_cap_flat_and_parallel(self):
        e = cached_entry("cmc_cap", {"r": 1.2, "tilt": 0.3})
        z = interior_points(40, 0.8)
        jet, fr, pk = curvature_for_points(e.chart, z, e.sf)
        assert np.max(np.abs(ricci_residual(pk))) < 1e-10
        assert np.max(pmc_residual_from_jets(jet, fr, pk, e.sf)) < 1e-10
        nc = normal_connection(e.chart, z, e.sf)
        ok = ~nc.excluded
        assert ok.sum() > 30
        assert np.max(nc.pmc_residual[ok]) < 1e-6
        assert np.max(np.abs(nc.curvature[ok])) < 1e-6

    @pytest.mark.parametrize("gid", ["r4", "veronese", "r2m"])
    def test_d_omega_matches_commutator(self, gid):
        e = cached_entry(gid)
        z = interior_points(40, 0.8, seed=5)
        _, _, pk = curvature_for_points(e.chart, z, e.sf)
        nc = normal_connection(e.chart, z, e.sf)
        ok = ~nc.excluded
        assert ok.sum() > 30
        assert np.max(np.abs(nc.curvature[ok] - ricci_residual(pk)[ok])) < 1e-5
        assert np.max(nc.antisymmetry_residual[ok]) < 1e-8

    def test_r4_normal_curvature_nonzero(self):
        _, _, _, pk = packet_at("r4", interior_points(10))
        assert np.min(np.abs(ricci_residual(pk)[:, 0, 1])) > 1e-3

    def test_pmc_two_ways_agree(self):
        e = cached_entry("r4")
        z = interior_points(30, 0.8, seed=6)
        jet, fr, pk = curvature_for_points(e.chart, z, e.sf)
        nc = normal_connection(e.chart, z, e.sf)
        ok = ~nc.excluded
        np.testing.assert_allclose(nc.pmc_residual[ok], pmc_residual_from_jets(jet, fr, pk, e.sf)[ok], atol=1e-6)

    def test_fd_normal_connection(self):
        e = cached_entry("r4")
        z = interior_points(30, 0.7, seed=8)
        _, _, pk = curvature_for_points(e.chart, z, e.sf)
        nc = normal_connection(e.chart, z, e.sf, FD, step=3 * FD.h)
        ok = ~nc.excluded
        assert ok.sum() > 20
        assert np.max(np.abs(nc.curvature[ok] - ricci_residual(pk)[ok])) < 1e-5

    def test_non_pmc_chart(self):
        # a graph with non-constant mean curvature
        chart = SymbolicChart.from_real_components(["x", "y", "x**3/3", "0"], Domain.disk(0.5))
        z = interior_points(10, 0.3)
        jet, fr, pk = curvature_for_points(chart, z, E4)
        assert np.min(pmc_residual_from_jets(jet, fr, pk, E4)) > 1e-2


class TestCodazzi:
    @pytest.mark.parametrize("gid", GALLERY_IDS)
    def test_gallery(self, gid):
        e = cached_entry(gid)
        res = codazzi_residual(e.chart, interior_points(30, 0.8, seed=9), e.sf, step=1e-3)
        assert np.nanmax(res) < 1e-6

    def test_fourth_order(self):
        e = cached_entry("veronese")
        z = interior_points(10, 0.6, seed=10)
        r1 = np.nanmax(codazzi_residual(e.chart, z, e.sf, step=1e-2))
        r2 = np.nanmax(codazzi_residual(e.chart, z, e.sf, step=5e-3))
        assert r1 / r2 >= 12

    def test_points_without_stencil_are_nan(self):
        e = cached_entry("r4")
        res = codazzi_residual(e.chart, np.array([0.0, 0.9999]), e.sf, step=1e-3)
        assert np.isfinite(res[0]) and np.isnan(res[1])
