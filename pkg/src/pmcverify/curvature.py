"""Second fundamental form, mean curvature and the normal-bundle residual suite.

Coordinate conventions
----------------------
Coordinate components ``A_ab`` (``a, b`` in ``{x, y}``) are the normal parts
of the covariant second partials ``u_ab``.  Frame components use the coframe
of :class:`~pmcverify.jets.FrameData`, ``A(e_i, e_j) = C_ia C_jb A_ab``.
Shape operators are stored as matrices ``S[alpha][i, j] = <A(e_i, e_j), xi_alpha>``.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .charts import Chart
from .errors import ContractError, InputError
from .jets import FrameData, Jet3, JetScheme, build_frames, eval_jet
from .spaceform import SpaceForm, covariant_derivative

#: coefficient ``k`` in the mixed identity ``A(d_zbar, d_z) = k |grad u|^2 H``
MIXED_COEFFICIENT = 0.25
#: normal-frame inner products jumping by more than this flag a gauge discontinuity
GAUGE_JUMP = 0.5


def _pair(a, b, sf: SpaceForm):
    return np.sum(a * b * sf.signature, axis=-1)


def normal_projector_apply(v, normals, sf: SpaceForm):
    """Project ambient vectors ``v`` (shape S + (D,)) onto the span of ``normals``."""
    coef = np.einsum("...d,...ad,d->...a", v, normals, sf.signature)
    return np.einsum("...a,...ad->...d", coef, normals)


@dataclass
class CurvaturePacket:
    """Extrinsic curvature data along a batch of points.

    Attributes
    ----------
    A11, A12, A22 : ndarray, shape S + (D,)
        Frame components ``A(e_i, e_j)``.
    H : ndarray, shape S + (D,)
        Mean curvature vector ``(A11 + A22) / 2``.
    shape_ops : ndarray, shape S + (m, 2, 2)
    lambda_sq : ndarray, shape S
    Axx, Axy, Ayy : ndarray, shape S + (D,)
        Coordinate components.
    normals : ndarray, shape S + (m, D)
        Normal basis used for ``shape_ops``.
    branch : ndarray of bool
    """

    A11: np.ndarray
    A12: np.ndarray
    A22: np.ndarray
    H: np.ndarray
    shape_ops: np.ndarray
    lambda_sq: np.ndarray
    Axx: np.ndarray
    Axy: np.ndarray
    Ayy: np.ndarray
    normals: np.ndarray
    branch: np.ndarray

    def __getitem__(self, idx) -> "CurvaturePacket":
        return CurvaturePacket(**{f.name: getattr(self, f.name)[idx] for f in fields(self)})

    def h_coords(self, sf: SpaceForm):
        """Components ``<H, xi_alpha>``."""
        return np.einsum("...d,...ad,d->...a", self.H, self.normals, sf.signature)


def _shape_ops(A11, A12, A22, normals, sf):
    s11 = np.einsum("...d,...ad,d->...a", A11, normals, sf.signature)
    s12 = np.einsum("...d,...ad,d->...a", A12, normals, sf.signature)
    s22 = np.einsum("...d,...ad,d->...a", A22, normals, sf.signature)
    row0 = np.stack([s11, s12], axis=-1)
    row1 = np.stack([s12, s22], axis=-1)
    return np.stack([row0, row1], axis=-2)


def second_fundamental_form(jet: Jet3, frames: FrameData, sf: SpaceForm) -> CurvaturePacket:
    """Second fundamental form, mean curvature vector and shape operators."""
    x = jet.u
    coord = {}
    for name, (a, b) in (("xx", ("ux", "ux")), ("xy", ("ux", "uy")), ("yy", ("uy", "uy"))):
        Da, Db = getattr(jet, a), getattr(jet, b)
        flat = getattr(jet, "u" + name)
        # NaN rows (branch points) would trip the tangency check; mask them first
        ok = ~frames.branch
        cov = np.full_like(flat, np.nan)
        if np.any(ok):
            cov[ok] = covariant_derivative(x[ok], Da[ok], flat[ok], Db[ok], sf)
        coord[name] = normal_projector_apply(cov, frames.normals, sf)
    C = frames.coframe

    def frame_comp(i, j):
        out = 0.0
        for a, ka in enumerate("xy"):
            for b, kb in enumerate("xy"):
                key = "".join(sorted(ka + kb))
                out = out + (C[..., i, a] * C[..., j, b])[..., None] * coord[key]
        return out

    A11, A12, A22 = frame_comp(0, 0), frame_comp(0, 1), frame_comp(1, 1)
    H = 0.5 * (A11 + A22)
    return CurvaturePacket(
        A11=A11,
        A12=A12,
        A22=A22,
        H=H,
        shape_ops=_shape_ops(A11, A12, A22, frames.normals, sf),
        lambda_sq=frames.lambda_sq,
        Axx=coord["xx"],
        Axy=coord["xy"],
        Ayy=coord["yy"],
        normals=frames.normals,
        branch=frames.branch,
    )


def complex_A(packet: CurvaturePacket):
    """``A(d_z u, d_z u)`` and ``A(d_zbar u, d_z u)`` as complex ambient vectors."""
    A_zz = 0.25 * (packet.Axx - packet.Ayy - 2j * packet.Axy)
    A_zbarz = 0.25 * (packet.Axx + packet.Ayy)
    return A_zz, A_zbarz


def mixed_identity_residual(jet: Jet3, packet: CurvaturePacket, sf: SpaceForm, coefficient=MIXED_COEFFICIENT):
    """``|A(d_zbar, d_z) - coefficient |grad u|^2 H|`` pointwise.

    ``|grad u|^2 = |u_x|^2 + |u_y|^2 = 2 lambda^2``.  The mixed value equals
    ``lambda^2 H / 2``, so the identity holds with ``coefficient = 1/4``;
    other coefficients are accepted to test alternative normalisations.
    """
    _, A_zbarz = complex_A(packet)
    grad2 = _pair(jet.ux, jet.ux, sf) + _pair(jet.uy, jet.uy, sf)
    d = A_zbarz - coefficient * grad2[..., None] * packet.H
    return np.sqrt(np.abs(_pair(d, np.conj(d), sf)))


def umbilicity_norm(packet: CurvaturePacket):
    """Frobenius norm of the trace-free part of all shape operators."""
    S = packet.shape_ops
    h = 0.5 * (S[..., 0, 0] + S[..., 1, 1])
    tf = S - h[..., None, None] * np.eye(2)
    return np.sqrt(np.sum(tf**2, axis=(-3, -2, -1)))


def ricci_residual(packet: CurvaturePacket):
    """Matrix ``R[alpha, beta] = <[A_alpha, A_beta] e1, e2>`` over normal indices."""
    S = packet.shape_ops
    comm = np.einsum("...aij,...bjk->...abik", S, S) - np.einsum("...bij,...ajk->...abik", S, S)
    return comm[..., 1, 0]


def trace_identity_residual(packet: CurvaturePacket, sf: SpaceForm):
    S = packet.shape_ops
    tr = S[..., 0, 0] + S[..., 1, 1]
    return np.max(np.abs(tr - 2.0 * packet.h_coords(sf)), axis=-1) if S.shape[-3] else np.zeros(tr.shape[:-1])


def h_normality_residual(packet: CurvaturePacket, frames: FrameData, sf: SpaceForm):
    return np.maximum(np.abs(_pair(packet.H, frames.e1, sf)), np.abs(_pair(packet.H, frames.e2, sf)))


def _metric(jet: Jet3, sf: SpaceForm):
    g = np.stack(
        [
            np.stack([_pair(jet.ux, jet.ux, sf), _pair(jet.ux, jet.uy, sf)], -1),
            np.stack([_pair(jet.uy, jet.ux, sf), _pair(jet.uy, jet.uy, sf)], -1),
        ],
        -2,
    )
    return g


def christoffel(jet: Jet3, sf: SpaceForm):
    """``Gamma[d, a, b]`` of the induced metric in the chart coordinates."""
    g = _metric(jet, sf)
    ginv = np.linalg.inv(g)
    second = {(0, 0): jet.uxx, (0, 1): jet.uxy, (1, 0): jet.uxy, (1, 1): jet.uyy}
    first = (jet.ux, jet.uy)
    low = np.zeros(jet.shape + (2, 2, 2))
    for a in range(2):
        for b in range(2):
            for e in range(2):
                low[..., e, a, b] = _pair(second[(a, b)], first[e], sf)
    return np.einsum("...de,...eab->...dab", ginv, low)


# --------------------------------------------------------------------------
# Stencil-based quantities: evaluate the chart on a small offset patch around
# each requested point and differentiate the assembled fields.
# --------------------------------------------------------------------------

_W1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_OFFS = np.arange(-2, 3)


def _steps(chart: Chart, scheme: JetScheme, step):
    if step is None:
        if hasattr(chart, "hx"):
            return chart.hx, chart.hy
        return scheme.h, scheme.h
    if np.ndim(step) == 0:
        return float(step), float(step)
    return float(step[0]), float(step[1])


@dataclass
class _Patch:
    good: np.ndarray
    jets: Jet3
    frames: FrameData
    packet: CurvaturePacket
    ok: np.ndarray
    sx: float
    sy: float


def _patch(chart: Chart, z, sf: SpaceForm, scheme: JetScheme, step, tol_branch=1e-7) -> _Patch:
    """Frames and curvature on the 5 x 5 offset patch around each point of ``z``.

    Only points whose whole patch (and, for finite-difference jets, the jet
    stencils of every patch point) fits in the domain are evaluated; their
    indices into the flattened ``z`` are returned in ``good``.
    """
    z = np.asarray(z, dtype=complex).reshape(-1)
    sx, sy = _steps(chart, scheme, step)
    offs = _OFFS[None, :] * sx + 1j * _OFFS[:, None] * sy
    pts = z[:, None, None] + offs[None]
    inside = np.all(chart.domain.contains(pts, tol=0.0), axis=(1, 2))
    if scheme.mode == "finite-difference" and not hasattr(chart, "hx"):
        reach = 3 * scheme.step(3) * np.sqrt(2.0)
        inside &= np.all(chart.domain.edge_distance(pts) > reach, axis=(1, 2))
    good = np.nonzero(inside)[0]
    jets = eval_jet(chart, pts[good], scheme)
    frames = build_frames(jets, sf, tol_branch)
    packet = second_fundamental_form(jets, frames, sf)
    ok = ~np.any(frames.branch, axis=(1, 2))
    ok &= np.all(np.isfinite(jets.uxx), axis=(1, 2, 3))
    return _Patch(good, jets, frames, packet, ok, sx, sy)


def _scatter(n_total, good, values, fill=np.nan):
    out = np.full((n_total,) + values.shape[1:], fill, dtype=np.result_type(values, float))
    out[good] = values
    return out


def _d_axis(F, axis_x: bool, sx, sy, center=2):
    """Fourth-order derivative at the patch centre along x (axis 2) or y (axis 1)."""
    if axis_x:
        return np.einsum("k,nk...->n...", _W1, F[:, center, :]) / sx
    return np.einsum("k,nk...->n...", _W1, F[:, :, center]) / sy


@dataclass
class NormalConnectionSample:
    """Normal connection data at a batch of interior points.

    Attributes
    ----------
    omega : ndarray, shape (N, 2, m, m)
        ``omega[n, i, alpha, beta] = <nabla_{e_i} xi_alpha, xi_beta>``.
    pmc_residual : ndarray, shape (N,)
        ``max_i |(D_{e_i} H)^perp|`` with ``H`` differentiated as an ambient field.
    curvature : ndarray, shape (N, m, m)
        Normal curvature ``<R(e1, e2) xi_alpha, xi_beta>`` from ``d omega + omega ^ omega``.
    excluded : ndarray of bool, shape (N,)
        Points without a full stencil or with a gauge jump inside it.
    gauge_jump : ndarray of bool, shape (N,)
    """

    omega: np.ndarray
    pmc_residual: np.ndarray
    curvature: np.ndarray
    excluded: np.ndarray
    gauge_jump: np.ndarray

    @property
    def antisymmetry_residual(self):
        w = self.omega
        return np.max(np.abs(w + np.swapaxes(w, -1, -2)), axis=(-3, -2, -1))


def _omega_coord(xi, sx, sy, sf):
    """``omega(d_x)``, ``omega(d_y)`` at the centre row/column points of the patch.

    Returns arrays ``wx[n, k, a, b]`` at points ``(0, k)`` (varying y) and
    ``wy[n, k, a, b]`` at points ``(k, 0)`` (varying x), plus the centre values.
    """
    sig = sf.signature
    # d_x xi at points (row k, centre column) uses row k of the patch
    dx = np.einsum("j,nkjad->nkad", _W1, xi) / sx  # derivative along columns, per row k
    dy = np.einsum("k,nkjad->njad", _W1, xi) / sy  # derivative along rows, per column j
    wx = np.einsum("nkad,nkbd,d->nkab", dx, xi[:, :, 2], sig)
    wy = np.einsum("njad,njbd,d->njab", dy, xi[:, 2, :], sig)
    return wx, wy


def _local_gauge(normals, sf: SpaceForm):
    """Re-gauge patch normals to follow the centre frame as closely as possible.

    At every patch point the centre normals are expanded in the local normal
    basis and the coefficient matrix is replaced by its orthogonal polar
    factor.  The result spans the same normal space, equals the centre frame
    at the centre and varies only as fast as the normal space itself, which
    keeps finite differences of the frame accurate even where the
    Gram-Schmidt gauge rotates quickly.
    """
    xc = normals[:, 2, 2]
    M = np.einsum("nkjbd,nad,d->nkjab", normals, xc, sf.signature)
    fin = np.all(np.isfinite(M), axis=(-2, -1))
    M = np.where(fin[..., None, None], M, np.eye(M.shape[-1]))
    U, _, Vt = np.linalg.svd(M)
    Q = U @ Vt
    out = np.einsum("nkjab,nkjbd->nkjad", Q, normals)
    return np.where(fin[..., None, None], out, np.nan)


def normal_connection(
    chart: Chart,
    z,
    sf: SpaceForm,
    scheme: JetScheme = JetScheme(),
    step=None,
    tol_branch: float = 1e-7,
) -> NormalConnectionSample:
    """Normal connection forms, normal curvature and ``|nabla^perp H|`` at ``z``.

    The normal frame field is sampled on a ``5 x 5`` patch of spacing ``step``
    (default ``scheme.h``, or the table spacing for tabulated charts) and
    differentiated with fourth-order central differences.

    Parameters
    ----------
    chart : Chart
    z : array_like of complex
        Interior points; points whose patch leaves the domain are excluded.
    sf : SpaceForm
    scheme : JetScheme
    step : float or (float, float), optional
    """
    z = np.asarray(z, dtype=complex)
    shape = z.shape
    ntot = z.size
    P = _patch(chart, z, sf, scheme, step, tol_branch)
    m = P.frames.normals.shape[3]
    sig = sf.signature
    xi = _local_gauge(P.frames.normals, sf)  # (G, 5, 5, m, D)
    G = np.einsum("nkjad,nbd,d->nkjab", xi, xi[:, 2, 2], sig)
    if m:
        with np.errstate(invalid="ignore"):
            jump = np.any(np.abs(G - np.eye(m)) > GAUGE_JUMP, axis=(1, 2, 3, 4))
    else:
        jump = np.zeros(len(P.good), bool)
    jump &= P.ok

    wx, wy = _omega_coord(xi, P.sx, P.sy, sf)
    wx0, wy0 = wx[:, 2], wy[:, 2]
    # d_x omega(d_y) from omega(d_y) at (k, 0); d_y omega(d_x) from omega(d_x) at (0, k)
    dx_wy = np.einsum("k,nkab->nab", _W1, wy) / P.sx
    dy_wx = np.einsum("k,nkab->nab", _W1, wx) / P.sy
    R = dx_wy - dy_wx + np.einsum("nab,nbc->nac", wy0, wx0) - np.einsum("nab,nbc->nac", wx0, wy0)

    C = P.frames.coframe[:, 2, 2]
    detC = C[:, 0, 0] * C[:, 1, 1] - C[:, 0, 1] * C[:, 1, 0]
    curvature = detC[:, None, None] * R
    omega = np.einsum("nia,nabc->nibc", C, np.stack([wx0, wy0], axis=1))

    H = P.packet.H
    DH = np.stack([_d_axis(H, True, P.sx, P.sy), _d_axis(H, False, P.sx, P.sy)], axis=1)
    DHn = normal_projector_apply(DH, xi[:, 2, 2][:, None], sf)
    DHe = np.einsum("nia,nad->nid", C, DHn)
    pmc = np.max(np.sqrt(np.abs(np.einsum("nid,nid,d->ni", DHe, DHe, sig))), axis=1)

    valid = P.ok & ~jump
    excluded = np.ones(ntot, bool)
    excluded[P.good[valid]] = False
    gauge_jump = np.zeros(ntot, bool)
    gauge_jump[P.good[jump]] = True

    def fin(a):
        mask = valid.reshape((-1,) + (1,) * (a.ndim - 1))
        out = _scatter(ntot, P.good, np.where(mask, a, np.nan))
        return out.reshape(shape + a.shape[1:])

    return NormalConnectionSample(
        omega=fin(omega),
        pmc_residual=fin(pmc),
        curvature=fin(curvature),
        excluded=excluded.reshape(shape),
        gauge_jump=gauge_jump.reshape(shape),
    )


def pmc_residual_from_jets(jet: Jet3, frames: FrameData, packet: CurvaturePacket, sf: SpaceForm):
    """``max_i |(D_{e_i} H)^perp|`` by the chain rule on third-order jets.

    Uses ``(d_c A_ab)^perp = (u_abc)^perp - Gamma^d_ab A_dc`` and
    ``H = g^ab A_ab / 2``, so no numerical differentiation of assembled fields
    is needed.
    """
    xi = frames.normals
    third = {
        (0, 0, 0): jet.uxxx, (0, 0, 1): jet.uxxy, (0, 1, 1): jet.uxyy, (1, 1, 1): jet.uyyy,
    }

    def B(a, b, c):
        return normal_projector_apply(third[tuple(sorted((a, b, c)))], xi, sf)

    A = {(0, 0): packet.Axx, (0, 1): packet.Axy, (1, 0): packet.Axy, (1, 1): packet.Ayy}
    g = _metric(jet, sf)
    ginv = np.linalg.inv(g)
    Gam = christoffel(jet, sf)
    first = (jet.ux, jet.uy)
    second = {(0, 0): jet.uxx, (0, 1): jet.uxy, (1, 0): jet.uxy, (1, 1): jet.uyy}
    out = []
    for c in range(2):
        dg = np.zeros(jet.shape + (2, 2))
        for e in range(2):
            for f in range(2):
                dg[..., e, f] = _pair(second[(e, c)], first[f], sf) + _pair(first[e], second[(f, c)], sf)
        dginv = -np.einsum("...ae,...ef,...fb->...ab", ginv, dg, ginv)
        acc = 0.0
        for a in range(2):
            for b in range(2):
                dA = B(a, b, c) - sum(Gam[..., d, a, b][..., None] * A[(d, c)] for d in range(2))
                acc = acc + 0.5 * dginv[..., a, b][..., None] * A[(a, b)] + 0.5 * ginv[..., a, b][..., None] * dA
        out.append(acc)
    C = frames.coframe
    res = []
    for i in range(2):
        v = C[..., i, 0][..., None] * out[0] + C[..., i, 1][..., None] * out[1]
        res.append(np.sqrt(np.abs(_pair(v, v, sf))))
    return np.maximum(res[0], res[1])


def codazzi_residual(
    chart: Chart,
    z,
    sf: SpaceForm,
    scheme: JetScheme = JetScheme(),
    step=None,
    tol_branch: float = 1e-7,
):
    """Codazzi defect ``|(nabla_{e1} A)(e2, e_k) - (nabla_{e2} A)(e1, e_k)|``, max over ``k``.

    Coordinate components of ``A`` are sampled along the patch axes and
    differentiated numerically; Christoffel terms come from the centre jet.
    Points without a full stencil are returned as NaN.
    """
    z = np.asarray(z, dtype=complex)
    shape = z.shape
    P = _patch(chart, z, sf, scheme, step, tol_branch)
    pk = P.packet
    xi0 = P.frames.normals[:, 2, 2]
    A = {(0, 0): pk.Axx, (0, 1): pk.Axy, (1, 0): pk.Axy, (1, 1): pk.Ayy}
    Gam = christoffel(P.jets[:, 2, 2], sf)
    A0 = {k: v[:, 2, 2] for k, v in A.items()}
    T = {}
    for c in range(2):
        for a in range(2):
            for b in range(2):
                dA = normal_projector_apply(_d_axis(A[(a, b)], c == 0, P.sx, P.sy), xi0, sf)
                for d in range(2):
                    dA = dA - Gam[:, d, c, a][:, None] * A0[(d, b)] - Gam[:, d, c, b][:, None] * A0[(a, d)]
                T[(c, a, b)] = dA
    C = P.frames.coframe[:, 2, 2]

    def F(i, j, k):
        acc = 0.0
        for (c, a, b), v in T.items():
            acc = acc + (C[:, i, c] * C[:, j, a] * C[:, k, b])[:, None] * v
        return acc

    r1 = F(0, 1, 1) - F(1, 0, 1)
    r2 = F(1, 0, 0) - F(0, 1, 0)
    res = np.maximum(np.sqrt(np.abs(_pair(r1, r1, sf))), np.sqrt(np.abs(_pair(r2, r2, sf))))
    res = np.where(P.ok, res, np.nan)
    return _scatter(z.size, P.good, res).reshape(shape)


def rotate_normal_gauge(frames: FrameData, angle) -> FrameData:
    """Rotate a rank-2 normal frame by ``angle`` (a scalar or an array over the samples)."""
    if frames.normals.shape[-2] != 2:
        raise ContractError("gauge rotation is defined for rank-2 normal bundles")
    angle = np.asarray(angle, dtype=float)[..., None]
    c, s = np.cos(angle), np.sin(angle)
    x3, x4 = frames.normals[..., 0, :], frames.normals[..., 1, :]
    return frames.with_normals(np.stack([c * x3 + s * x4, -s * x3 + c * x4], axis=-2))


def curvature_for_points(chart: Chart, z, sf: SpaceForm, scheme: JetScheme = JetScheme(), tol_branch=1e-7):
    """Convenience: jets, frames and curvature packet at ``z``."""
    jet = eval_jet(chart, z, scheme)
    if jet.u.shape[-1] != sf.ambient_dim:
        raise InputError("chart and space form dimensions differ")
    frames = build_frames(jet, sf, tol_branch)
    return jet, frames, second_fundamental_form(jet, frames, sf)
