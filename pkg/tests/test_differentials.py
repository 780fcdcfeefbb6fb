import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from conftest import ANALYTIC, FD, cached_entry, cached_grid, interior_points
from pmcverify.charts import Domain, SymbolicChart, TableChart
from pmcverify.curvature import curvature_for_points, pmc_residual_from_jets
from pmcverify.differentials import (
    DifferentialField,
    beta_reality,
    boundary_reality,
    cr_field,
    cr_residual,
    hprime,
    phi,
    quartic,
    reduced_normal,
)
from pmcverify.errors import ContractError, DegeneracyError, InsufficientDataError
from pmcverify.sampling import sample_grid
from pmcverify.spaceform import SpaceForm


def grid_field(xs, values, mask=None):
    values = np.asarray(values, dtype=complex)
    return DifferentialField(xs, xs, values, np.zeros(values.shape, bool) if mask is None else mask)


def square(n=41, half=0.5):
    xs = np.linspace(-half, half, n)
    return xs, xs[None, :] + 1j * xs[:, None]


def phi_fields(grid):
    pk, sf = grid.packet, grid.sf
    valid = grid.valid
    Hp = np.full_like(pk.H, np.nan)
    Hp[valid] = hprime(pk.H[valid], pk.normals[valid], sf=sf)
    fH = DifferentialField(grid.xs, grid.ys, np.where(valid, phi(pk, pk.H, sf), np.nan), ~valid)
    fHp = DifferentialField(grid.xs, grid.ys, np.where(valid, phi(pk, Hp, sf), np.nan), ~valid)
    return fH, fHp, Hp


class TestHprime:
    def test_gauge_aligned(self):
        normals = np.array([[0, 0, 1.0, 0], [0, 0, 0, 1.0]])
        H = 0.7 * normals[0]
        np.testing.assert_allclose(hprime(H, normals), 0.7 * normals[1])
        np.testing.assert_allclose(hprime(H, normals, orientation=-1), -0.7 * normals[1])

    def test_double_application(self):
        normals = np.array([[0, 0, 1.0, 0], [0, 0, 0, 1.0]])
        H = np.array([0, 0, 0.3, -0.4])
        np.testing.assert_allclose(hprime(hprime(H, normals), normals), -H)

    def test_on_cap(self):
        g = cached_grid("cmc_cap", {"r": 1.2, "tilt": 0.3})
        pk = g.packet
        v = g.valid
        Hp = hprime(pk.H[v], pk.normals[v])
        assert np.max(np.abs(np.sum(Hp * pk.H[v], -1))) < 1e-12
        assert np.max(np.abs(np.linalg.norm(Hp, axis=-1) - np.linalg.norm(pk.H[v], axis=-1))) < 1e-12

    def test_errors(self):
        normals = np.array([[0, 0, 1.0, 0], [0, 0, 0, 1.0]])
        with pytest.raises(DegeneracyError):
            hprime(np.zeros(4), normals)
        with pytest.raises(ContractError):
            hprime(np.zeros(4), normals[:1])
        with pytest.raises(ContractError):
            hprime(normals[0], normals, orientation=2)


class TestPhi:
    def test_umbilic_cap_phi_h_zero(self):
        e = cached_entry("cmc_cap")
        _, _, pk = curvature_for_points(e.chart, interior_points(30, 0.95), e.sf)
        assert np.max(np.abs(phi(pk, pk.H, e.sf))) < 1e-12

    def test_orthogonal_to_image(self):
        # a surface in R^3 x {0}: A takes values in the first three coordinates
        e = cached_entry("cmc_cap")
        _, _, pk = curvature_for_points(e.chart, interior_points(10), e.sf)
        xi = np.zeros(4)
        xi[3] = 1.0
        assert np.all(phi(pk, np.broadcast_to(xi, pk.H.shape), e.sf) == 0)

    @given(st.floats(-3, 3), st.floats(-3, 3))
    def test_linearity(self, a, b):
        g = cached_grid("r4", None, n=24)
        pk, v = g.packet, g.valid
        H = np.linalg.norm(pk.H, axis=-1)[..., None] * pk.normals[..., 0, :] + 0.2 * pk.normals[..., 1, :]
        Hp = hprime(H[v], pk.normals[v])
        lhs = phi(pk[v], a * H[v] + b * Hp, g.sf)
        rhs = a * phi(pk[v], H[v], g.sf) + b * phi(pk[v], Hp, g.sf)
        assert np.max(np.abs(lhs - rhs)) < 1e-14 * max(1, abs(a) + abs(b)) * 10

    def test_quartic_is_square(self):
        x = np.array([1 + 2j, -0.5j, 3.0])
        assert np.max(np.abs(quartic(x) - x * x)) <= 1e-14 * np.max(np.abs(x)) ** 2


class TestCR:
    def test_holomorphic_polynomial(self):
        xs, z = square(41)
        assert cr_residual(grid_field(xs, z**3 + 2 * z)) < 1e-12

    def test_zero_field(self):
        xs, z = square(21)
        assert cr_residual(grid_field(xs, np.zeros_like(z))) == 0

    def test_antiholomorphic(self):
        xs, z = square(21)
        assert cr_residual(grid_field(xs, np.conj(z))) == pytest.approx(1.0)

    def test_mask_propagates_to_stencil(self):
        xs, z = square(21)
        mask = np.zeros(z.shape, bool)
        mask[10, 10] = True
        cf = cr_field(grid_field(xs, z, mask))
        assert cf.mask[10, 8] and cf.mask[12, 10] and not cf.mask[10, 7]

    def test_insufficient_nodes(self):
        xs, z = square(7)
        with pytest.raises(InsufficientDataError):
            cr_residual(grid_field(xs, z))

    def test_cap_phi_pair(self):
        g = cached_grid("cmc_cap", {"r": 1.2, "tilt": 0.3}, n=48)
        fH, fHp, _ = phi_fields(g)
        assert cr_residual(fH) < 1e-6 and cr_residual(fHp) < 1e-6

    def test_cap_in_r3_phi_H(self):
        # cap chart padded to R^4; the unit normal inside R^3 x {0}
        g = cached_grid("cmc_cap", None, n=48)
        fH, _, _ = phi_fields(g)
        assert cr_residual(fH) < 1e-6

    def test_rotating_gauge_control(self):
        g = cached_grid("r4", None, n=48)
        pk, v = g.packet, g.valid
        t = g.z.real[..., None]
        xi = np.cos(t) * pk.normals[..., 0, :] + np.sin(t) * pk.normals[..., 1, :]
        f = DifferentialField(g.xs, g.ys, np.where(v, phi(pk, xi, g.sf), np.nan), ~v)
        assert cr_residual(f) > 1e-2

    def test_paired_with_pmc(self):
        # whenever the pmc residual is below tolerance, so is the CR residual
        tol = 1e-6
        for gid, params in (("cmc_cap", {"r": 1.2, "tilt": 0.3}), ("cmc_cap", {"r": 1.0})):
            g = cached_grid(gid, params, n=48)
            pmc = pmc_residual_from_jets(g.jets[g.valid], g.frames[g.valid], g.packet[g.valid], g.sf)
            assert np.max(pmc) <= tol
            fH, fHp, _ = phi_fields(g)
            assert cr_residual(fH) <= tol and cr_residual(fHp) <= tol


class TestLogCovariance:
    def test_z_squared_factor(self):
        rng = np.random.default_rng(1)
        z = np.sqrt(rng.uniform(0.4**2, 0.95**2, 40)) * np.exp(1j * rng.uniform(-3, 3, 40))
        r4 = cached_entry("r4")
        ann = SymbolicChart(r4.chart.components, Domain.annulus(0.3, 1.0), "r4-annulus")
        w_chart = ann.log_chart()
        w = np.log(np.abs(z)) + 1j * np.angle(z)
        _, fz, pz = curvature_for_points(ann, z, r4.sf)
        _, fw, pw = curvature_for_points(w_chart, w, r4.sf)
        xi = pz.normals[:, 0, :]
        lhs = phi(pw, xi, r4.sf)
        rhs = z**2 * phi(pz, xi, r4.sf)
        assert np.max(np.abs(lhs - rhs)) < 1e-10


def delaunay_table(H=0.5, r0=1.2, n=61, box=(1.2, 1.8, -0.3, 0.3)):
    """Delaunay surface of mean curvature H tabulated on a rectangle of the z-plane.

    The profile is integrated in the conformal coordinate s (so that
    (s, t) -> (r cos t, r sin t, h) is conformal) and mapped to z = e^(s + it).
    """

    def rhs(s, y):
        r, h, psi = y
        return [r * math.cos(psi), r * math.sin(psi), 2 * H * r - math.sin(psi)]

    sol = solve_ivp(rhs, (0.0, 0.7), [r0, 0.0, math.pi / 2], method="DOP853", rtol=1e-13, atol=1e-14,
                    dense_output=True)
    x0, x1, y0, y1 = box
    xs = np.linspace(x0, x1, n)
    ys = np.linspace(y0, y1, n)
    zz = xs[None, :] + 1j * ys[:, None]
    s = np.log(np.abs(zz))
    t = np.angle(zz)
    r, h, _ = sol.sol(s.reshape(-1))
    r, h = r.reshape(s.shape), h.reshape(s.shape)
    vals = np.stack([r * np.cos(t), r * np.sin(t), h], axis=-1)
    return TableChart(xs, ys, vals, Domain.rect(x0, x1, y0, y1), "delaunay")


@pytest.fixture(scope="module")
def delaunay_grid():
    return sample_grid(delaunay_table(), SpaceForm.euclidean(3), scheme=FD)


class TestDelaunay:
    def test_constant_mean_curvature(self, delaunay_grid):
        grid = delaunay_grid
        v = grid.valid
        hn = np.linalg.norm(grid.packet.H[v], axis=-1)
        assert np.max(np.abs(hn - 0.5)) < 1e-5

    def test_z4_quartic_constant(self, delaunay_grid):
        grid = delaunay_grid
        v = grid.valid
        n = reduced_normal(grid.packet.normals[v])
        q = grid.z[v] ** 4 * quartic(phi(grid.packet[v], n, grid.sf))
        assert np.max(np.abs(q - q.mean())) < 1e-4
        assert abs(q.mean()) > 1e-2  # unduloid, not a sphere
        assert np.max(np.abs(q.imag)) < 1e-4


class TestReducedNormal:
    def test_hypersurface(self):
        normals = np.array([[[0, 0, 1.0]]])
        np.testing.assert_array_equal(reduced_normal(normals), normals[:, 0])

    def test_rank_two(self):
        normals = np.array([[0, 0, 1.0, 0], [0, 0, 0, 1.0]])
        np.testing.assert_allclose(reduced_normal(normals, eta=normals[1]), [0, 0, -1.0, 0])
        with pytest.raises(ContractError):
            reduced_normal(normals)
        with pytest.raises(ContractError):
            reduced_normal(normals, eta=np.array([1.0, 0, 0, 0]))


class TestBoundaryReality:
    def test_real_values(self):
        t = np.linspace(0, 2 * np.pi, 64, endpoint=False)
        z = np.exp(1j * t)
        q, a = boundary_reality(z, 0.5 * z**-2, np.zeros_like(t))
        assert q < 1e-15 and a == 0

    def test_detects_imaginary(self):
        t = np.linspace(0, 2 * np.pi, 64, endpoint=False)
        z = np.exp(1j * t)
        q, _ = boundary_reality(z, np.ones_like(z), np.zeros_like(t))
        assert q == pytest.approx(1.0, abs=1e-2)


class TestBeta:
    def test_proportional(self):
        xs, z = square(21)
        rep = beta_reality(grid_field(xs, z), grid_field(xs, 2 * z))
        assert rep.defect < 1e-15 and rep.beta == pytest.approx(2.0) and rep.beta_std < 1e-14

    def test_imaginary_ratio(self):
        xs, z = square(21)
        rep = beta_reality(grid_field(xs, z), grid_field(xs, 1j * z))
        assert rep.defect == pytest.approx(1.0)

    def test_relative_division_tolerance(self):
        xs, z = square(21)
        rep = beta_reality(grid_field(xs, z), grid_field(xs, 2 * z))
        assert rep.tol_div == pytest.approx(1e-9 * np.max(np.abs(z)))
        assert rep.nodes_used == z.size - 1  # the node at z = 0

    def test_vanishing(self):
        xs, z = square(21)
        rep = beta_reality(grid_field(xs, 1e-14 * z), grid_field(xs, z), scale=1.0)
        assert rep.phi_h_vanishes
        assert rep.as_dict()["defect"] is None

    def test_cap_signal(self):
        g = cached_grid("cmc_cap", {"r": 1.2, "tilt": 0.3})
        fH, fHp, _ = phi_fields(g)
        scale = float(np.nanmax(g.packet.lambda_sq * np.sum(g.packet.H**2, -1)))
        assert beta_reality(fH, fHp, scale=scale).phi_h_vanishes

    def test_shape_mismatch(self):
        xs, z = square(21)
        xs2, z2 = square(11)
        with pytest.raises(ContractError):
            beta_reality(grid_field(xs, z), grid_field(xs2, z2))


class TestCsv:
    def test_round_trip(self, tmp_path):
        xs, z = square(7)
        v = np.exp(z) / 3
        mask = np.zeros(z.shape, bool)
        mask[0, 0] = True
        f = grid_field(xs, v, mask)
        p = tmp_path / "f.csv"
        f.to_csv(p)
        rows = p.read_text().splitlines()
        assert rows[0] == "re_z,im_z,re_phi,im_phi,mask"
        assert rows[1].endswith("nan,nan,1")
        parts = rows[2].split(",")
        assert complex(float(parts[2]), float(parts[3])) == v[0, 1]
