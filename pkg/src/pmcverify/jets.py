"""Third-order jets of charts, conformal data and adapted orthonormal frames.

All routines are batched: ``z`` may be a complex array of any shape and the
returned objects carry that shape as leading axes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from functools import lru_cache

import numpy as np
import sympy as sp

from .charts import MULTI_INDICES, Chart, SymbolicChart, TableChart
from .errors import ContractError, GeometryError, InputError
from .spaceform import SpaceForm, tangent_project

TOL_BRANCH = 1e-7
#: candidates whose residual after orthogonalisation falls below
#: ``GS_DROP_FACTOR / sqrt(D)`` are dropped.  Some candidate always keeps a
#: residual of at least ``1/sqrt(D)``, so the process completes, and normalised
#: candidates never have tiny norms (which would make the gauge vary quickly).
GS_DROP_FACTOR = 0.5

_NAMES = {
    (0, 0): "u",
    (1, 0): "ux",
    (0, 1): "uy",
    (2, 0): "uxx",
    (1, 1): "uxy",
    (0, 2): "uyy",
    (3, 0): "uxxx",
    (2, 1): "uxxy",
    (1, 2): "uxyy",
    (0, 3): "uyyy",
}


@lru_cache(maxsize=None)
def fd_weights(offsets: tuple, order: int) -> np.ndarray:
    """Exact finite-difference weights for ``d^order/dt^order`` at 0 on unit-spaced ``offsets``."""
    if order == 0:
        return np.array([1.0 if o == 0 else 0.0 for o in offsets])
    w = sp.finite_diff_weights(order, list(offsets), 0)[order][-1]
    return np.array([float(v) for v in w])


def central_offsets(order: int) -> tuple:
    if order == 0:
        return (0,)
    m = 3 if order == 3 else 2
    return tuple(range(-m, m + 1))


def one_sided_offsets(order: int) -> tuple:
    """``order + 4`` forward points, giving fourth-order accuracy."""
    if order == 0:
        return (0,)
    return tuple(range(order + 4))


@dataclass(frozen=True)
class JetScheme:
    """How chart derivatives are obtained.

    Parameters
    ----------
    mode : {"analytic", "finite-difference"}
    h : float
        Base step of the finite-difference stencils.
    step_scale : tuple of float
        Multipliers of ``h`` for first, second and third derivatives.  Higher
        derivatives use longer steps so rounding error (of size eps/h^k) stays
        well below the truncation error.
    """

    mode: str = "analytic"
    h: float = 1e-3
    step_scale: tuple = (1.0, 4.0, 10.0)

    def __post_init__(self):
        if self.mode not in ("analytic", "finite-difference"):
            raise InputError(f"unknown jet mode {self.mode!r}")
        if not self.h > 0:
            raise InputError("finite-difference step must be positive")
        if len(self.step_scale) != 3 or min(self.step_scale) <= 0:
            raise InputError("step_scale needs three positive entries")

    def step(self, order: int) -> float:
        return self.h * self.step_scale[order - 1]

    def describe(self) -> dict:
        return {"mode": self.mode, "h": self.h, "step_scale": list(self.step_scale)}


@dataclass
class Jet3:
    """Chart value and real partial derivatives through third order.

    Array fields have shape ``S + (D,)`` where ``S`` is the batch shape of
    ``z``.  Complex derivatives are exposed as properties.
    """

    z: np.ndarray
    u: np.ndarray
    ux: np.ndarray
    uy: np.ndarray
    uxx: np.ndarray
    uxy: np.ndarray
    uyy: np.ndarray
    uxxx: np.ndarray
    uxxy: np.ndarray
    uxyy: np.ndarray
    uyyy: np.ndarray

    @property
    def du_z(self):
        return 0.5 * (self.ux - 1j * self.uy)

    @property
    def du_zbar(self):
        return 0.5 * (self.ux + 1j * self.uy)

    @property
    def u_zz(self):
        return 0.25 * (self.uxx - self.uyy - 2j * self.uxy)

    @property
    def u_zzbar(self):
        return 0.25 * (self.uxx + self.uyy)

    @property
    def u_zbarzbar(self):
        return 0.25 * (self.uxx - self.uyy + 2j * self.uxy)

    @property
    def u_zzzbar(self):
        return 0.125 * (self.uxxx + self.uxyy - 1j * (self.uxxy + self.uyyy))

    @property
    def u_zzbarzbar(self):
        return 0.125 * (self.uxxx + self.uxyy + 1j * (self.uxxy + self.uyyy))

    def partial(self, i: int, j: int) -> np.ndarray:
        return getattr(self, _NAMES[(i, j)])

    def __getitem__(self, idx) -> "Jet3":
        return Jet3(**{f.name: getattr(self, f.name)[idx] for f in fields(self)})

    @property
    def shape(self):
        return np.shape(self.z)


def _jet_from_partials(z, parts: dict) -> Jet3:
    return Jet3(z=np.asarray(z, dtype=complex), **{_NAMES[mi]: parts[mi] for mi in MULTI_INDICES})


def _binomial_expand(alpha, beta, power):
    """Coefficients of ``(alpha d_a + beta d_b)^power`` as ``{p: coef}`` for ``d_a^p d_b^(power-p)``."""
    return {p: math.comb(power, p) * alpha**p * beta ** (power - p) for p in range(power + 1)}


def _rotate_partials(pab: dict, P: np.ndarray, order: int) -> dict:
    """Convert partials along stencil axes (a, b) into Cartesian partials.

    ``P`` has shape ``S + (2, 2)`` with ``d_x = P00 d_a + P01 d_b`` and
    ``d_y = P10 d_a + P11 d_b``.
    """
    out = {}
    for i in range(order, -1, -1):
        j = order - i
        cx = _binomial_expand(P[..., 0, 0], P[..., 0, 1], i)
        cy = _binomial_expand(P[..., 1, 0], P[..., 1, 1], j)
        acc = 0.0
        for p, a in cx.items():
            for q, b in cy.items():
                ka = p + q
                acc = acc + (a * b)[..., None] * pab[(ka, order - ka)]
        out[(i, j)] = acc
    return out


def _stencil_pairs(order: int, offset_fn):
    """Unique 2D offsets and per-multi-index weight vectors for one derivative order."""
    mis = [(i, order - i) for i in range(order, -1, -1)]
    pairs = {}
    weights = {}
    for i, j in mis:
        oa, ob = offset_fn(i), offset_fn(j)
        wa, wb = fd_weights(oa, i), fd_weights(ob, j)
        for a, wai in zip(oa, wa):
            for b, wbj in zip(ob, wb):
                if wai * wbj == 0:
                    continue
                k = pairs.setdefault((a, b), len(pairs))
                weights.setdefault((i, j), {})[k] = wai * wbj
    plist = np.array(list(pairs.keys()), dtype=float)
    W = {}
    for mi, d in weights.items():
        w = np.zeros(len(plist))
        for k, v in d.items():
            w[k] = v
        W[mi] = w
    return plist, W


def _fd_partials_symbolic(chart: Chart, z: np.ndarray, scheme: JetScheme) -> dict:
    """Finite-difference partials of an evaluable chart at arbitrary points."""
    dom = chart.domain
    parts = {(0, 0): chart.evaluate(z.real, z.imag)}
    for order in (1, 2, 3):
        s = scheme.step(order)
        cen_pairs, cen_W = _stencil_pairs(order, central_offsets)
        one_pairs, one_W = _stencil_pairs(order, one_sided_offsets)
        reach = s * np.max(np.abs(cen_pairs[:, 0] + 1j * cen_pairs[:, 1]))
        central = dom.edge_distance(z) > reach + 1e-14
        res = {mi: np.empty(z.shape + (chart.ambient_dim,)) for mi in cen_W}
        if np.any(central):
            zc = z[central]
            offs = s * (cen_pairs[:, 0] + 1j * cen_pairs[:, 1])
            pts = zc[:, None] + offs[None, :]
            vals = chart.evaluate(pts.real, pts.imag)
            for mi, w in cen_W.items():
                res[mi][central] = np.einsum("k,nkd->nd", w, vals) / s**order
        if np.any(~central):
            zo = z[~central]
            n_in = dom.inward_direction(zo, 2 * reach)
            d1 = n_in * np.exp(0.25j * np.pi)
            d2 = n_in * np.exp(-0.25j * np.pi)
            pts = zo[:, None] + s * (one_pairs[None, :, 0] * d1[:, None] + one_pairs[None, :, 1] * d2[:, None])
            if not np.all(dom.contains(pts, tol=1e-12)):
                raise InputError("finite-difference stencil leaves the chart domain; reduce h")
            vals = chart.evaluate(pts.real, pts.imag)
            pab = {
                mi: np.einsum("k,nkd->nd", w, vals) / s**order for mi, w in one_W.items()
            }
            Q = np.stack(
                [np.stack([d1.real, d1.imag], -1), np.stack([d2.real, d2.imag], -1)], axis=-2
            )
            P = np.linalg.inv(Q)
            rot = _rotate_partials(pab, P, order)
            for mi in rot:
                res[mi][~central] = rot[mi]
        parts.update(res)
    return parts


def _axis_operator(n: int, order: int, spacing: float) -> np.ndarray:
    """Dense ``n x n`` matrix applying a fourth-order derivative along one table axis."""
    M = np.zeros((n, n))
    if order == 0:
        return np.eye(n)
    cen = central_offsets(order)
    length = order + 4
    for i in range(n):
        if i + cen[0] >= 0 and i + cen[-1] < n:
            offs = cen
        else:
            start = min(max(i - length // 2, 0), n - length)
            offs = tuple(range(start - i, start - i + length))
        w = fd_weights(offs, order)
        for o, wk in zip(offs, w):
            M[i, i + o] += wk
    return M / spacing**order


def _table_partials(chart: TableChart) -> dict:
    cache = getattr(chart, "_jet_cache", None)
    if cache is not None:
        return cache
    vals = chart.values
    bad = np.any(~np.isfinite(vals), axis=-1)
    clean = np.where(bad[..., None], 0.0, vals)
    ny, nx = bad.shape
    out = {}
    for mi in MULTI_INDICES:
        i, j = mi
        Mx = _axis_operator(nx, i, chart.hx)
        My = _axis_operator(ny, j, chart.hy)
        d = np.einsum("ab,bcD->acD", My, np.einsum("cb,abD->acD", Mx, clean))
        reach = (np.abs(My) > 0).astype(float) @ bad.astype(float) @ (np.abs(Mx) > 0).T.astype(float)
        d[reach > 0] = np.nan
        out[mi] = d
    chart._jet_cache = out
    return out


def eval_jet(chart: Chart, z, scheme: JetScheme = JetScheme()) -> Jet3:
    """Evaluate the third-order jet of ``chart`` at parameter points ``z``.

    Parameters
    ----------
    chart : Chart
    z : complex or array_like of complex
    scheme : JetScheme
        ``analytic`` needs a chart with closed-form derivatives.  Tables are
        always differentiated on their own nodes.

    Raises
    ------
    InputError
        If a point lies outside the chart domain.
    ContractError
        If analytic derivatives are requested from a tabulated chart.
    """
    z = np.asarray(z, dtype=complex)
    if not np.all(chart.domain.contains(z)):
        raise InputError("jet requested outside the chart domain")
    if isinstance(chart, TableChart):
        if scheme.mode == "analytic":
            raise ContractError("tabulated charts have no closed-form derivatives")
        i, j = chart.node_index(z.real, z.imag)
        table = _table_partials(chart)
        return _jet_from_partials(z, {mi: table[mi][j, i] for mi in MULTI_INDICES})
    if scheme.mode == "analytic":
        if not isinstance(chart, SymbolicChart):
            raise ContractError("analytic jets need a chart with closed-form derivatives")
        return _jet_from_partials(z, chart.partials(z.real, z.imag))
    flat = z.reshape(-1)
    parts = _fd_partials_symbolic(chart, flat, scheme)
    parts = {mi: v.reshape(z.shape + (chart.ambient_dim,)) for mi, v in parts.items()}
    return _jet_from_partials(z, parts)


def _pair(a, b, sf: SpaceForm):
    return np.sum(a * b * sf.signature, axis=-1)


def conformality_residual(jet: Jet3, sf: SpaceForm):
    """Conformality defect ``|<u_z, u_z>|`` and conformal factor ``lambda^2 = 2<u_z, u_zbar>``."""
    uz = jet.du_z
    defect = np.abs(_pair(uz, uz, sf))
    lam2 = 2.0 * np.real(_pair(uz, jet.du_zbar, sf))
    return defect, lam2


def detect_branch(jet: Jet3, tol_branch: float = TOL_BRANCH, sf: SpaceForm | None = None):
    """True where ``lambda <= tol_branch`` (inclusive)."""
    if sf is None:
        lam2 = 0.5 * (np.sum(jet.ux * jet.ux, -1) + np.sum(jet.uy * jet.uy, -1))
    else:
        lam2 = conformality_residual(jet, sf)[1]
    return np.sqrt(np.maximum(lam2, 0.0)) <= tol_branch


@dataclass
class FrameData:
    """Adapted orthonormal frame along a batch of surface points.

    Attributes
    ----------
    point : ndarray, shape S + (D,)
    e1, e2 : ndarray, shape S + (D,)
        ``e1`` is ``u_x`` normalised; ``e2`` completes it by Gram-Schmidt on ``u_y``.
    normals : ndarray, shape S + (n - 2, D)
    lambda_sq : ndarray, shape S
    coframe : ndarray, shape S + (2, 2)
        ``e_i = sum_a coframe[i, a] u_a`` with ``u_0 = u_x`` and ``u_1 = u_y``.
    branch : ndarray of bool, shape S
        Points at which no frame exists; their entries are NaN.
    gauge_id : ndarray of int, shape S
        Bit mask of the ambient basis vectors accepted by Gram-Schmidt.  The
        normal gauge is smooth on each region of constant ``gauge_id``.
    """

    point: np.ndarray
    e1: np.ndarray
    e2: np.ndarray
    normals: np.ndarray
    lambda_sq: np.ndarray
    coframe: np.ndarray
    branch: np.ndarray
    gauge_id: np.ndarray

    def __getitem__(self, idx) -> "FrameData":
        return FrameData(**{f.name: getattr(self, f.name)[idx] for f in fields(self)})

    @property
    def tangent(self) -> np.ndarray:
        return np.stack([self.e1, self.e2], axis=-2)

    def with_normals(self, normals) -> "FrameData":
        return replace(self, normals=np.asarray(normals))

    @staticmethod
    def gauge_description() -> str:
        return (
            "e1 = u_x/|u_x|, e2 = Gram-Schmidt of u_y; normals = modified Gram-Schmidt "
            "of ambient basis vectors in coordinate order (tangent-projected to the model "
            f"quadric), candidates with residual < {GS_DROP_FACTOR:g}/sqrt(D) dropped; the last normal "
            "is flipped so that det(x, e1, e2, normals) > 0 (x omitted when c = 0)"
        )


def build_frames(jet: Jet3, sf: SpaceForm, tol_branch: float = TOL_BRANCH) -> FrameData:
    """Orthonormal tangent and normal frames at the points of ``jet``.

    Branch points (``lambda <= tol_branch``) are flagged in ``FrameData.branch``
    and carry NaN frames; callers skip them.
    """
    if jet.u.shape[-1] != sf.ambient_dim:
        raise InputError(f"chart has {jet.u.shape[-1]} components, space form expects {sf.ambient_dim}")
    shape = jet.shape
    D = sf.ambient_dim
    m = sf.codimension
    x = jet.u.reshape(-1, D)
    ux = jet.ux.reshape(-1, D)
    uy = jet.uy.reshape(-1, D)
    N = x.shape[0]
    _, lam2 = conformality_residual(jet, sf)
    lam2 = np.asarray(lam2).reshape(-1)
    n1 = np.sqrt(np.maximum(_pair(ux, ux, sf), 0.0))
    branch = np.sqrt(np.maximum(lam2, 0.0)) <= tol_branch
    branch |= ~np.isfinite(lam2) | (n1 <= tol_branch)
    safe = np.where(branch, 1.0, n1)
    e1 = ux / safe[:, None]
    t = _pair(uy, e1, sf)
    w = uy - t[:, None] * e1
    n2 = np.sqrt(np.maximum(_pair(w, w, sf), 0.0))
    branch |= n2 <= tol_branch
    n2 = np.where(branch, 1.0, n2)
    e2 = w / n2[:, None]
    coframe = np.zeros((N, 2, 2))
    coframe[:, 0, 0] = 1.0 / safe
    coframe[:, 1, 0] = -t / (safe * n2)
    coframe[:, 1, 1] = 1.0 / n2

    normals = np.zeros((N, m, D))
    count = np.zeros(N, dtype=int)
    gauge_id = np.zeros(N, dtype=np.int64)
    drop = GS_DROP_FACTOR / math.sqrt(D)
    for k in range(D):
        v = np.zeros((N, D))
        v[:, k] = 1.0
        if sf.curvature != 0:
            v = v - sf.curvature * _pair(v, x, sf)[:, None] * x
        for _ in range(2):
            for b in (e1, e2):
                v = v - _pair(v, b, sf)[:, None] * b
            for q in range(m):
                filled = (count > q)[:, None]
                v = v - np.where(filled, _pair(v, normals[:, q], sf)[:, None] * normals[:, q], 0.0)
        nv = np.sqrt(np.maximum(_pair(v, v, sf), 0.0))
        accept = (nv > drop) & (count < m)
        idx = np.nonzero(accept)[0]
        normals[idx, count[idx]] = v[idx] / nv[idx, None]
        count += accept
        gauge_id |= accept.astype(np.int64) << k
    if np.any((count < m) & ~branch):
        raise GeometryError("could not complete the normal frame")
    if m > 0:
        rows = [e1[:, None], e2[:, None], normals]
        if sf.curvature != 0:
            rows.insert(0, x[:, None] * math.sqrt(abs(sf.curvature)))
        det = np.linalg.det(np.concatenate(rows, axis=1))
        flip = det < 0
        normals[flip, -1] *= -1.0
    nanmask = branch[:, None]
    e1 = np.where(nanmask, np.nan, e1)
    e2 = np.where(nanmask, np.nan, e2)
    normals = np.where(nanmask[:, :, None], np.nan, normals)
    coframe = np.where(nanmask[:, :, None], np.nan, coframe)
    return FrameData(
        point=jet.u,
        e1=e1.reshape(shape + (D,)),
        e2=e2.reshape(shape + (D,)),
        normals=normals.reshape(shape + (m, D)),
        lambda_sq=lam2.reshape(shape),
        coframe=coframe.reshape(shape + (2, 2)),
        branch=branch.reshape(shape),
        gauge_id=np.where(branch, -1, gauge_id).reshape(shape),
    )


def frame_gram_residual(frames: FrameData, sf: SpaceForm):
    """Max deviation of the Gram matrix of ``(e1, e2, normals)`` from the identity."""
    B = np.concatenate([frames.tangent, frames.normals], axis=-2)
    G = np.einsum("...id,...jd,d->...ij", B, B, sf.signature)
    k = B.shape[-2]
    return np.max(np.abs(G - np.eye(k)), axis=(-2, -1))


def tangent_to_quadric_residual(frames: FrameData, sf: SpaceForm):
    if sf.curvature == 0:
        return np.zeros(frames.lambda_sq.shape)
    B = np.concatenate([frames.tangent, frames.normals], axis=-2)
    x = frames.point[..., None, :]
    return np.max(np.abs(np.sum(B * x * sf.signature, -1)), axis=-1)


__all__ = [
    "JetScheme",
    "Jet3",
    "FrameData",
    "eval_jet",
    "conformality_residual",
    "build_frames",
    "detect_branch",
    "frame_gram_residual",
    "fd_weights",
    "tangent_project",
]
