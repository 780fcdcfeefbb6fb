"""Free-boundary geometry: boundary frames, contact angles and their constancy.

Along a boundary circle of the parameter domain, ``tau`` is the unit tangent
of the boundary curve (domain on the left) and ``nu`` the outward unit
conormal.  At a point ``y`` of the supporting sphere with outward normal
``n`` the contact angle satisfies ``sin(theta) = <nu, n>`` and
``nu = cos(theta) mu + sin(theta) n`` with ``mu`` tangent to the sphere and
orthogonal to ``tau``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .charts import Chart
from .errors import ContractError, DegeneracyError, FreeBoundaryViolation, InconsistencyError, OrientationError
from .jets import TOL_BRANCH, FrameData, Jet3, JetScheme
from .sampling import BoundarySample, sample_boundary
from .spaceform import BOUNDARY_TOL, GeodesicBall, SpaceForm, ball_boundary_normal

TOL_ORTHO = 1e-8


def _pair(a, b, sf: SpaceForm):
    return np.sum(a * b * sf.signature, axis=-1)


def _unit(v, sf):
    n = np.sqrt(np.abs(_pair(v, v, sf)))
    return v / n[..., None]


def boundary_frames(jet: Jet3, frames: FrameData, outward, sf: SpaceForm):
    """Unit boundary tangent ``tau`` and outward conormal ``nu``.

    Parameters
    ----------
    jet : Jet3
    frames : FrameData
        Only used for its branch flags; branch samples return NaN.
    outward : complex or ndarray of complex
        Unit outward direction in the parameter plane at each sample.
    """
    outward = np.asarray(outward, dtype=complex)
    tdir = 1j * outward

    def du(v):
        return jet.ux * v.real[..., None] + jet.uy * v.imag[..., None]

    tau = _unit(du(tdir), sf)
    d = du(outward)
    nu = _unit(d - _pair(d, tau, sf)[..., None] * tau, sf)
    bad = np.asarray(frames.branch)[..., None]
    return np.where(bad, np.nan, tau), np.where(bad, np.nan, nu)


@dataclass
class ContactAngle:
    sin: np.ndarray
    cos: np.ndarray
    mu: np.ndarray
    orthogonal: np.ndarray
    n: np.ndarray

    @property
    def theta(self):
        return np.arctan2(self.sin, self.cos)


def contact_angle(
    nu,
    tau,
    y,
    ball: GeodesicBall,
    sf: SpaceForm,
    tol_ortho: float = TOL_ORTHO,
    tol_fb: float = BOUNDARY_TOL,
    tol_orient: float = 1e-12,
) -> ContactAngle:
    """Contact angle between the conormal ``nu`` and the sphere ``ball`` at ``y``.

    Raises
    ------
    FreeBoundaryViolation
        If ``tau`` is not tangent to the sphere.
    OrientationError
        If ``<nu, n> < 0`` (inward conormal or mis-oriented domain).
    """
    nu, tau, y = np.asarray(nu), np.asarray(tau), np.asarray(y)
    n = ball_boundary_normal(y, ball, sf, tol=tol_fb)
    tn = np.abs(_pair(tau, n, sf))
    if np.any(tn > tol_fb):
        raise FreeBoundaryViolation(f"boundary tangent leaves the sphere (|<tau,n>| = {np.nanmax(tn):.3e})")
    s_raw = _pair(nu, n, sf)
    if np.any(s_raw < -tol_orient):
        raise OrientationError(f"conormal points into the ball (<nu,n> = {np.nanmin(s_raw):.3e})")
    s = np.clip(s_raw, -1.0, 1.0)
    w = nu - s_raw[..., None] * n - _pair(nu, tau, sf)[..., None] * tau
    c = np.sqrt(np.abs(_pair(w, w, sf)))
    ortho = c <= tol_ortho
    safe = np.where(ortho, 1.0, c)
    mu = np.where(ortho[..., None], np.nan, w / safe[..., None])
    return ContactAngle(s, np.where(ortho, 0.0, c), mu, ortho, n)


def angle_constancy(thetas, min_samples: int = 16) -> list:
    """Max deviation from the median angle, separately for each boundary component."""
    out = []
    for th in thetas:
        th = np.asarray(th, dtype=float)
        th = th[np.isfinite(th)]
        if th.size < min_samples:
            raise ContractError(f"angle constancy needs >= {min_samples} samples per component, got {th.size}")
        out.append(float(np.max(np.abs(th - np.median(th)))))
    return out


def angle_conversion(sin_theta, n_dot_xi, slack: float = 1e-10):
    """Contact angle inside a hyperplane ``M`` from the ambient one.

    ``sin(theta_M) = sin(theta) / sqrt(1 - <n, xi>^2)`` where ``xi`` is the
    unit normal of ``M``.
    """
    s = np.asarray(sin_theta, dtype=float)
    d = np.asarray(n_dot_xi, dtype=float)
    if np.any(np.abs(d) >= 1):
        raise DegeneracyError("|<n, xi>| >= 1: the hyperplane is tangent to the sphere")
    out = s / np.sqrt(1.0 - d * d)
    if np.any(out > 1 + slack):
        raise InconsistencyError(f"converted sine {np.max(out):.12g} exceeds 1")
    out = np.minimum(out, 1.0)
    return out.item() if out.ndim == 0 else out


def free_boundary_residual(chart: Chart, ball: GeodesicBall, sf: SpaceForm, m: int = 256) -> float:
    """Max distance-to-sphere defect of the chart's boundary circles."""
    t = 2 * np.pi * np.arange(m) / m
    worst = 0.0
    for comp in chart.domain.boundary_components():
        z = comp.points(t)
        y = chart.evaluate(z.real, z.imag)
        worst = max(worst, float(np.max(ball.boundary_defect(y, sf))))
    return worst


def a_tau_nu(packet, frames: FrameData, tau, nu, normal, sf: SpaceForm):
    """``<A(tau, nu), normal>`` using frame components of ``A``."""
    ti = np.stack([_pair(tau, frames.e1, sf), _pair(tau, frames.e2, sf)], -1)
    ni = np.stack([_pair(nu, frames.e1, sf), _pair(nu, frames.e2, sf)], -1)
    A = (
        (ti[..., 0] * ni[..., 0])[..., None] * packet.A11
        + (ti[..., 0] * ni[..., 1] + ti[..., 1] * ni[..., 0])[..., None] * packet.A12
        + (ti[..., 1] * ni[..., 1])[..., None] * packet.A22
    )
    return _pair(A, normal, sf)


@dataclass
class ComponentAngles:
    name: str
    t: np.ndarray
    sin: np.ndarray
    cos: np.ndarray
    theta: np.ndarray
    orthogonal: np.ndarray
    decomposition_defect: np.ndarray
    definition_defect: np.ndarray
    excluded: np.ndarray

    @property
    def theta_mean(self) -> float:
        return float(np.nanmean(self.theta))


@dataclass
class ContactAngleReport:
    components: list
    theta_mean: float
    theta_max_dev: float
    free_boundary_max_dist: float
    degenerate_flags: list = field(default_factory=list)
    samples: list = field(default_factory=list)

    def per_component_dev(self) -> list:
        return angle_constancy([c.theta for c in self.components])

    def as_dict(self) -> dict:
        return {
            "theta_mean": self.theta_mean,
            "sin_theta_mean": float(np.sin(self.theta_mean)),
            "theta_max_dev": self.theta_max_dev,
            "free_boundary_max_dist": self.free_boundary_max_dist,
            "components": [
                {
                    "name": c.name,
                    "theta": c.theta_mean,
                    "sin_theta_min": float(np.nanmin(c.sin)),
                    "sin_theta_max": float(np.nanmax(c.sin)),
                    "orthogonal_samples": int(np.sum(c.orthogonal)),
                    "excluded_samples": int(np.sum(c.excluded)),
                }
                for c in self.components
            ],
            "degenerate_flags": list(self.degenerate_flags),
        }


def contact_angle_report(
    chart: Chart,
    sf: SpaceForm,
    ball: GeodesicBall,
    scheme: JetScheme = JetScheme(),
    m: int = 256,
    tol_branch: float = TOL_BRANCH,
    tol_ortho: float = TOL_ORTHO,
    boundary: list | None = None,
    jobs: int = 1,
) -> ContactAngleReport:
    """Sample every boundary circle and compute contact angles.

    ``boundary`` may pass precomputed :class:`~pmcverify.sampling.BoundarySample`
    objects to avoid re-evaluating the chart.
    """
    ball.validate(sf)
    samples = boundary if boundary is not None else sample_boundary(chart, sf, m, scheme, tol_branch, jobs)
    comps = []
    flags = []
    for bs in samples:
        ok = ~bs.frames.branch
        tau, nu = boundary_frames(bs.jets, bs.frames, bs.outward, sf)
        n_pts = bs.z.size
        sin = np.full(n_pts, np.nan)
        cos = np.full(n_pts, np.nan)
        orth = np.zeros(n_pts, bool)
        dec = np.full(n_pts, np.nan)
        deq = np.full(n_pts, np.nan)
        if np.any(ok):
            ca = contact_angle(nu[ok], tau[ok], bs.jets.u[ok], ball, sf, tol_ortho)
            sin[ok], cos[ok], orth[ok] = ca.sin, ca.cos, ca.orthogonal
            recon = ca.cos[:, None] * np.nan_to_num(ca.mu) + ca.sin[:, None] * ca.n
            dec[ok] = np.where(ca.orthogonal, np.nan, np.sqrt(np.abs(_pair(nu[ok] - recon, nu[ok] - recon, sf))))
            # squared form: sqrt(1 - sin^2) loses half the digits near theta = pi/2
            deq[ok] = np.abs(ca.cos**2 - (1 - ca.sin**2))
        excluded = ~ok
        if excluded.mean() > 0.01:
            flags.append(f"{bs.component.name}: excluded arc {100 * excluded.mean():.1f}% of boundary")
        if np.all(orth[ok]) and np.any(ok):
            flags.append(f"{bs.component.name}: orthogonal contact (maximiser not unique)")
        comps.append(
            ComponentAngles(bs.component.name, bs.t, sin, cos, np.arctan2(sin, cos), orth, dec, deq, excluded)
        )
    thetas = np.concatenate([c.theta for c in comps])
    devs = angle_constancy([c.theta for c in comps])
    return ContactAngleReport(
        components=comps,
        # the mean of angles at pi/2 can overshoot by an ulp
        theta_mean=float(np.clip(np.nanmean(thetas), 0.0, np.pi / 2)),
        theta_max_dev=float(max(devs)),
        free_boundary_max_dist=free_boundary_residual(chart, ball, sf, m),
        degenerate_flags=flags,
        samples=samples,
    )
