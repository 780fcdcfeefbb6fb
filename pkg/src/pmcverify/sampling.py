"""Batched evaluation of surface data on interior grids and boundary circles."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields

import numpy as np

from .charts import BoundaryComponent, Chart, TableChart
from .curvature import CurvaturePacket, second_fundamental_form
from .errors import InputError
from .jets import TOL_BRANCH, FrameData, Jet3, JetScheme, build_frames, eval_jet
from .spaceform import SpaceForm


def _evaluate(chart, z, sf, scheme, tol_branch):
    jet = eval_jet(chart, z, scheme)
    if jet.u.shape[-1] != sf.ambient_dim:
        raise InputError(f"chart has {jet.u.shape[-1]} components, space form expects {sf.ambient_dim}")
    frames = build_frames(jet, sf, tol_branch)
    return jet, frames, second_fundamental_form(jet, frames, sf)


def _concat(objs):
    cls = type(objs[0])
    return cls(**{f.name: np.concatenate([getattr(o, f.name) for o in objs], axis=0) for f in fields(cls)})


def evaluate_points(chart: Chart, z, sf: SpaceForm, scheme: JetScheme, tol_branch=TOL_BRANCH, jobs: int = 1):
    """Jets, frames and curvature at a 1-D array of points.

    With ``jobs > 1`` the points are split into contiguous chunks evaluated on
    a thread pool; results are reassembled in input order, so the output does
    not depend on ``jobs``.
    """
    z = np.asarray(z, dtype=complex).reshape(-1)
    if jobs <= 1 or z.size < 2 * jobs:
        return _evaluate(chart, z, sf, scheme, tol_branch)
    chunks = np.array_split(z, jobs)
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        parts = list(pool.map(lambda c: _evaluate(chart, c, sf, scheme, tol_branch), chunks))
    return tuple(_concat([p[i] for p in parts]) for i in range(3))


def _scatter_dc(obj, index, shape):
    cls = type(obj)
    out = {}
    for f in fields(cls):
        v = getattr(obj, f.name)
        full_shape = shape + v.shape[1:]
        if v.dtype == bool:
            arr = np.ones(full_shape, dtype=bool)
        elif np.issubdtype(v.dtype, np.integer):
            arr = np.full(full_shape, -1, dtype=v.dtype)
        else:
            arr = np.full(full_shape, np.nan, dtype=v.dtype)
        arr.reshape((-1,) + v.shape[1:])[index] = v
        out[f.name] = arr
    return cls(**out)


@dataclass
class SurfaceGrid:
    """Surface data on a uniform Cartesian grid over the chart domain.

    Arrays have leading shape ``(ny, nx)``; nodes outside the domain hold NaN.
    ``valid`` excludes nodes outside the domain, branch points and the
    exclusion disks around them, and the rim band of width ``rim``.
    """

    chart: Chart
    sf: SpaceForm
    scheme: JetScheme
    xs: np.ndarray
    ys: np.ndarray
    z: np.ndarray
    inside: np.ndarray
    valid: np.ndarray
    jets: Jet3
    frames: FrameData
    packet: CurvaturePacket
    branch_points: list = field(default_factory=list)
    exclusion_radius: float = 0.0

    @property
    def spacing(self):
        return float(self.xs[1] - self.xs[0]), float(self.ys[1] - self.ys[0])

    @property
    def excluded_fraction(self) -> float:
        n_in = int(self.inside.sum())
        return 0.0 if n_in == 0 else float(n_in - int(self.valid.sum())) / n_in

    def nodes(self):
        """Valid node coordinates as a 1-D complex array (row-major order)."""
        return self.z[self.valid]


def sample_grid(
    chart: Chart,
    sf: SpaceForm,
    n: int = 64,
    scheme: JetScheme = JetScheme(),
    tol_branch: float = TOL_BRANCH,
    rim: float = 0.0,
    branch_points=(),
    jobs: int = 1,
) -> SurfaceGrid:
    """Evaluate the chart on an ``n x n`` grid covering its domain.

    Tabulated charts are evaluated on their own nodes and ``n`` is ignored.
    Branch points are the nodes where ``lambda <= tol_branch`` plus any listed
    in ``branch_points``; a disk of radius ``max(10 h, 2 * spacing)`` around
    each is excluded.
    """
    if isinstance(chart, TableChart):
        xs, ys = chart.xs, chart.ys
    else:
        if n < 5:
            raise InputError("grid needs at least 5 nodes per axis")
        x0, x1, y0, y1 = chart.domain.bounding_box()
        xs = np.linspace(x0, x1, n)
        ys = np.linspace(y0, y1, n)
    xx, yy = np.meshgrid(xs, ys)
    z = xx + 1j * yy
    inside = chart.domain.contains(z, tol=1e-12)
    if isinstance(chart, TableChart):
        inside &= np.all(np.isfinite(chart.values), axis=-1)
    idx = np.nonzero(inside.reshape(-1))[0]
    jet, frames, packet = evaluate_points(chart, z.reshape(-1)[idx], sf, scheme, tol_branch, jobs)
    shape = z.shape
    jets = _scatter_dc(jet, idx, shape)
    frames_f = _scatter_dc(frames, idx, shape)
    packet_f = _scatter_dc(packet, idx, shape)
    bp = [complex(v) for v in branch_points] + [complex(v) for v in z[inside & frames_f.branch]]
    h = scheme.h if not isinstance(chart, TableChart) else max(chart.hx, chart.hy)
    spacing = max(float(xs[1] - xs[0]), float(ys[1] - ys[0]))
    radius = max(10 * h, 2 * spacing)
    valid = inside & ~frames_f.branch
    valid &= np.all(np.isfinite(jets.uxx), axis=-1)
    for b in bp:
        valid &= np.abs(z - b) > radius
    if rim > 0:
        valid &= chart.domain.edge_distance(z) > rim
    return SurfaceGrid(chart, sf, scheme, xs, ys, z, inside, valid, jets, frames_f, packet_f, bp, radius if bp else 0.0)


@dataclass
class BoundarySample:
    """Surface data along one boundary circle of the parameter domain."""

    component: BoundaryComponent
    t: np.ndarray
    z: np.ndarray
    outward: np.ndarray
    jets: Jet3
    frames: FrameData
    packet: CurvaturePacket


def sample_boundary(
    chart: Chart,
    sf: SpaceForm,
    m: int = 256,
    scheme: JetScheme = JetScheme(),
    tol_branch: float = TOL_BRANCH,
    jobs: int = 1,
) -> list:
    """``m`` equally spaced samples on every boundary circle of the domain."""
    if m < 16:
        raise InputError("boundary sampling needs at least 16 samples per component")
    out = []
    t = 2 * np.pi * np.arange(m) / m
    for comp in chart.domain.boundary_components():
        z = comp.points(t)
        jet, frames, packet = evaluate_points(chart, z, sf, scheme, tol_branch, jobs)
        out.append(BoundarySample(comp, t, z, comp.outward(t), jet, frames, packet))
    return out
