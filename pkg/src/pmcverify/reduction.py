"""Codimension-reduction certificates.

The workflow for a surface with parallel mean curvature in a 4-dimensional
space form is:

1. find a unit normal ``eta = a H/|H| + b H'/|H|`` with ``phi(eta) = 0``
   (:func:`find_parallel_umbilic_direction`);
2. check that the associated container vector (a centre ``p`` or a normal
   vector ``a`` of a hyperplane section) is constant and classify the
   container (:func:`container_constancy`);
3. separately, certify linear fullness or non-containment in spheres
   (:func:`linear_fullness`, :func:`sphere_noncontainment`).

For higher codimension :func:`gamma_strata` and :func:`w_span_rank` analyse the
map ``xi -> A_xi`` on normals orthogonal to ``H`` and the span of points,
tangents and distinguished normals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .curvature import CurvaturePacket
from .differentials import BetaReport, DifferentialField
from .errors import ContractError, InputError
from .spaceform import SpaceForm

CONSTANCY_TOL = 1e-6
HOROSPHERE_BAND = 1e-8
SV_REL_TOL = 1e-8


def _pair(a, b, sf: SpaceForm):
    return np.sum(a * b * sf.signature, axis=-1)


@dataclass
class UmbilicDirection:
    """Result of the search for a normal direction with vanishing differential.

    ``accepted`` is False when the reality test fails; the remaining numeric
    fields are then NaN and ``reason`` explains why.
    """

    accepted: bool
    a: float
    b: float
    lam: float
    residual: float
    lam_std: float
    eta: np.ndarray | None = None
    phi_h_vanishes: bool = False
    beta: float = float("nan")
    reason: str = ""

    def as_dict(self) -> dict:
        out = {
            "accepted": self.accepted,
            "eta_coeffs": [self.a, self.b],
            "fitted_lambda": self.lam,
            "umbilic_residual": self.residual,
            "lambda_std": self.lam_std,
            "phi_h_vanishes": self.phi_h_vanishes,
            "beta": self.beta,
            "reason": self.reason,
        }
        return {k: (None if isinstance(v, float) and not math.isfinite(v) else v) for k, v in out.items()}


def _shape_op_along(packet: CurvaturePacket, eta, sf: SpaceForm):
    coef = np.einsum("...d,...ad,d->...a", eta, packet.normals, sf.signature)
    return np.einsum("...a,...aij->...ij", coef, packet.shape_ops)


def find_parallel_umbilic_direction(
    phiH: DifferentialField,
    phiHp: DifferentialField,
    packet: CurvaturePacket,
    Hp,
    valid,
    sf: SpaceForm,
    beta_report: BetaReport,
    reality_tol: float = 1e-6,
) -> UmbilicDirection:
    """Unit normal ``eta`` in the plane of ``H, H'`` with ``phi(eta) = 0``.

    Parameters
    ----------
    phiH, phiHp : DifferentialField
        ``phi(H)`` and ``phi(H')`` on a grid.
    packet : CurvaturePacket
        Curvature on the same grid (leading shape ``(ny, nx)``).
    Hp : ndarray
        ``H'`` on the grid.
    valid : ndarray of bool
        Nodes to use.
    beta_report : BetaReport
        Output of :func:`~pmcverify.differentials.beta_reality` for the fields.
    """
    if packet.normals.shape[-2] != 2:
        raise ContractError("the H/H' reduction path needs a rank-2 normal bundle")
    H = packet.H
    Hn = np.sqrt(np.abs(_pair(H, H, sf)))
    valid = valid & np.isfinite(Hn) & (Hn > 0)
    if beta_report.phi_h_vanishes:
        a, b, beta = 1.0, 0.0, float("nan")
    else:
        if not beta_report.defect <= reality_tol:
            nan = float("nan")
            return UmbilicDirection(
                False, nan, nan, nan, nan, nan, reason=f"ratio not real (defect {beta_report.defect:.3e})"
            )
        m = valid & ~phiH.mask & ~phiHp.mask
        p, q = phiH.values[m], phiHp.values[m]
        beta = float(np.sum(np.real(q * np.conj(p))) / np.sum(np.abs(p) ** 2))
        alpha = math.atan(-beta)
        a, b = math.sin(alpha), math.cos(alpha)
    safe = np.where(valid, Hn, 1.0)[..., None]
    eta = a * H / safe + b * np.asarray(Hp) / safe
    S = _shape_op_along(packet, eta, sf)
    half_tr = 0.5 * (S[..., 0, 0] + S[..., 1, 1])
    lam_vals = half_tr[valid]
    lam = float(np.mean(lam_vals))
    resid = np.sqrt(np.sum((S - lam * np.eye(2)) ** 2, axis=(-2, -1)))[valid]
    eta = np.where(valid[..., None], eta, np.nan)
    return UmbilicDirection(
        True, a, b, lam, float(np.max(resid)), float(np.std(lam_vals)), eta, beta_report.phi_h_vanishes, beta
    )


@dataclass
class ContainerCertificate:
    kind: str
    vector: np.ndarray
    defect: float
    lam: float
    radius_defect: float = float("nan")
    section_defect: float = float("nan")
    curvature: float = float("nan")
    fitted_curvature: float = float("nan")
    notes: list = field(default_factory=list)

    def as_dict(self) -> dict:
        out = {
            "container_kind": self.kind,
            "container_vector": [float(v) for v in self.vector],
            "constancy_defect": self.defect,
            "fitted_lambda": self.lam,
            "radius_defect": self.radius_defect,
            "section_defect": self.section_defect,
            "container_curvature": self.curvature,
            "fitted_container_curvature": self.fitted_curvature,
            "notes": list(self.notes),
        }
        return {k: (None if isinstance(v, float) and not math.isfinite(v) else v) for k, v in out.items()}


def _rel_defect(vals, scale_floor=0.0):
    mean = np.mean(vals, axis=0)
    scale = max(float(np.linalg.norm(mean)), scale_floor)
    return mean, float(np.max(np.linalg.norm(vals - mean, axis=-1))) / scale


def container_constancy(
    x,
    eta,
    lam: float,
    sf: SpaceForm,
    tol: float = CONSTANCY_TOL,
    lam_zero: float = 1e-10,
    horosphere_band: float = HOROSPHERE_BAND,
) -> ContainerCertificate:
    """Constancy of the umbilic-container vector and classification of the container.

    Parameters
    ----------
    x, eta : ndarray, shape (N, D)
        Surface points and the unit normal field ``eta`` with ``A_eta = lam Id``.
    lam : float
    """
    x = np.asarray(x, dtype=float).reshape(-1, sf.ambient_dim)
    eta = np.asarray(eta, dtype=float).reshape(-1, sf.ambient_dim)
    keep = np.all(np.isfinite(x), -1) & np.all(np.isfinite(eta), -1)
    x, eta = x[keep], eta[keep]
    c = sf.curvature
    notes = []
    if c == 0:
        if abs(lam) <= lam_zero:
            v, defect = _rel_defect(eta)
            kind = "affine-hyperplane"
            cert = ContainerCertificate(kind, v, defect, lam, curvature=0.0, notes=notes)
        else:
            p = x + eta / lam
            v, defect = _rel_defect(p, scale_floor=1.0 / abs(lam))
            dist = np.linalg.norm(x - v, axis=-1)
            R = float(np.mean(dist))
            cert = ContainerCertificate(
                "round-sphere",
                v,
                defect,
                lam,
                radius_defect=float(np.max(np.abs(dist - 1.0 / abs(lam)))),
                curvature=c + lam * lam,
                fitted_curvature=1.0 / R**2,
                notes=notes,
            )
    else:
        a = eta + lam * x
        v, defect = _rel_defect(a)
        section = float(np.max(np.abs(_pair(x, v, sf) - lam / c)))
        k = math.sqrt(-c) if c < 0 else None
        fitted = float("nan")
        if c > 0:
            kind = "totally-geodesic" if abs(lam) <= lam_zero else "round-sphere"
            vv = float(_pair(v, v, sf))
            centre = (lam / c) * v / vv
            R = float(np.mean(np.linalg.norm(x - centre, axis=-1)))
            fitted = 1.0 / R**2
        else:
            al = abs(lam)
            if al <= lam_zero:
                kind = "totally-geodesic"
            elif abs(al - k) <= horosphere_band:
                kind = "horosphere"
                notes.append("|lambda| within the horosphere band around sqrt(-c); classification ambiguous")
            elif al < k:
                kind = "equidistant"
            else:
                kind = "geodesic-sphere"
        cert = ContainerCertificate(
            kind, v, defect, lam, section_defect=section, curvature=c + lam * lam, fitted_curvature=fitted, notes=notes
        )
    if not cert.defect <= tol:
        cert.notes.append(f"container vector not constant (defect {cert.defect:.3e} > {tol:g})")
        cert.kind = "none"
    return cert


def linear_fullness(points, center_mode: str = "affine", rel_tol: float = SV_REL_TOL):
    """Numerical rank of a point cloud.

    Returns
    -------
    rank : int
    sv_gap : float
        Smallest retained singular value over the largest.
    sv : ndarray
        All singular values.
    """
    P = np.asarray(points, dtype=float)
    P = P.reshape(-1, P.shape[-1])
    P = P[np.all(np.isfinite(P), axis=-1)]
    D = P.shape[1]
    if P.shape[0] < 4 * D:
        raise InputError(f"linear fullness needs at least {4 * D} samples, got {P.shape[0]}")
    if center_mode == "affine":
        P = P - P.mean(axis=0)
    elif center_mode != "linear":
        raise InputError("center_mode must be 'affine' or 'linear'")
    sv = np.linalg.svd(P, compute_uv=False)
    if sv[0] == 0:
        return 0, 0.0, sv
    keep = sv > rel_tol * sv[0]
    rank = int(keep.sum())
    return rank, float(sv[rank - 1] / sv[0]), sv


@dataclass
class SphereFit:
    residual: float
    center: np.ndarray
    radius: float
    degenerate: bool

    def as_dict(self) -> dict:
        return {
            "residual": self.residual,
            "center": [float(v) for v in self.center],
            "radius": self.radius,
            "degenerate": self.degenerate,
        }


def sphere_noncontainment(points, cond_tol: float = 1e-10) -> SphereFit:
    """Least-squares sphere through the points; a large residual excludes containment.

    The fit solves ``|x|^2 = 2 q.x + (R^2 - |q|^2)`` in the least-squares
    sense.  The residual is ``rms(|x - q|^2 - R^2) / mean |x - mean(x)|^2``.
    When the design matrix is rank deficient (points in a proper affine
    subspace) the minimum-norm solution is used and ``degenerate`` is set.
    """
    P = np.asarray(points, dtype=float)
    P = P.reshape(-1, P.shape[-1])
    P = P[np.all(np.isfinite(P), axis=-1)]
    if P.shape[0] < 20:
        raise InputError("sphere fit needs at least 20 samples")
    mu = P.mean(axis=0)
    Q = P - mu
    scale = float(np.sqrt(np.mean(np.sum(Q**2, -1))))
    Qs = Q / scale
    design = np.hstack([2 * Qs, np.ones((len(Qs), 1))])
    rhs = np.sum(Qs**2, axis=-1)
    sol, _, rank, sv = np.linalg.lstsq(design, rhs, rcond=cond_tol)
    degenerate = bool(rank < design.shape[1])
    q = sol[:-1]
    R2 = sol[-1] + q @ q
    resid = np.sum((Qs - q) ** 2, -1) - R2
    norm = float(np.mean(np.sum(Qs**2, -1)))
    return SphereFit(
        float(np.sqrt(np.mean(resid**2)) / norm),
        mu + scale * q,
        float(scale * math.sqrt(max(R2, 0.0))),
        degenerate,
    )


def flat_normal_certificate(ricci_sup: float, pmc_sup: float, h_min: float, h_zero: float = 1e-10) -> dict:
    """Suprema of the normal curvature and of ``|nabla^perp H|``, with the minimal flag."""
    return {"sup_Rperp": float(ricci_sup), "sup_pmc": float(pmc_sup), "minimal": bool(h_min <= h_zero)}


@dataclass
class GammaStrata:
    """Rank analysis of ``xi -> A_xi`` on normals orthogonal to ``H``.

    Attributes
    ----------
    m1 : ndarray of bool
        Nodes where the map is non-zero (a distinguished normal exists).
    sigma1, sigma2 : ndarray
        Leading singular values per node.
    xi4 : ndarray
        Distinguished unit normal (NaN off the ``m1`` stratum), signs
        propagated in row-major order.
    continuity_defect : float
        Max distance between ``xi4`` at horizontally or vertically adjacent
        ``m1`` nodes.
    """

    m1: np.ndarray
    sigma1: np.ndarray
    sigma2: np.ndarray
    xi4: np.ndarray
    continuity_defect: float
    fraction_m1: float

    @property
    def mixed(self) -> bool:
        return 0.0 < self.fraction_m1 < 1.0


def gamma_strata(packet: CurvaturePacket, valid, sf: SpaceForm, sv_tol: float = SV_REL_TOL) -> GammaStrata:
    """Per-node SVD of the trace-free shape-operator map on ``H^perp``.

    Expects grid-shaped arrays with leading shape ``(ny, nx)``.
    The threshold is ``sv_tol * max(1, |H|)``.
    """
    xi = packet.normals
    m = xi.shape[-2]
    shape = valid.shape
    H = packet.H
    hc = np.einsum("...d,...ad,d->...a", H, xi, sf.signature)
    hn = np.linalg.norm(hc, axis=-1)
    sigma1 = np.full(shape, np.nan)
    sigma2 = np.full(shape, np.nan)
    xi4 = np.full(shape + (sf.ambient_dim,), np.nan)
    m1 = np.zeros(shape, bool)
    if m < 2:
        raise ContractError("stratification needs a normal bundle of rank >= 2")
    cand = np.full(shape + (sf.ambient_dim,), np.nan)
    for j, i in np.argwhere(valid & (hn > 0)):
        h = hc[j, i] / hn[j, i]
        # orthonormal complement of h in R^m
        Qfull, _ = np.linalg.qr(np.column_stack([h, np.eye(m)]), mode="complete")
        comp = Qfull[:, 1:m]
        S = packet.shape_ops[j, i]
        cols = []
        for q in comp.T:
            Aq = np.tensordot(q, S, axes=1)
            cols.append([Aq[0, 0] * math.sqrt(2.0), Aq[0, 1] * math.sqrt(2.0)])
        G = np.array(cols).T  # 2 x (m-1)
        _, s, vt = np.linalg.svd(G)
        s = np.concatenate([s, np.zeros(2 - len(s))]) if len(s) < 2 else s
        sigma1[j, i], sigma2[j, i] = s[0], s[1]
        thr = sv_tol * max(1.0, float(hn[j, i]))
        if s[0] > thr:
            m1[j, i] = True
            cand[j, i] = (comp @ vt[0]) @ xi[j, i]
    # Sign convention: rows are processed in order.  Each row is anchored at
    # its first m1 node that has an m1 neighbour in the previous row (or, if
    # none, at its first m1 node, aligned with the last node assigned), and
    # signs are then propagated outwards from the anchor along the row.
    prev = None
    ny, nx = shape
    for j in range(ny):
        cols = np.nonzero(m1[j])[0]
        if cols.size == 0:
            continue
        anchor, ref = cols[0], prev
        if j > 0:
            for i in cols:
                below = [k for k in (i, i - 1, i + 1) if 0 <= k < nx and m1[j - 1, k]]
                if below:
                    anchor, ref = i, xi4[j - 1, below[0]]
                    break
        v = cand[j, anchor]
        if ref is not None and v @ ref < 0:
            v = -v
        xi4[j, anchor] = v
        for step in (1, -1):
            last = v
            i = anchor + step
            while 0 <= i < nx and m1[j, i]:
                w = cand[j, i]
                if w @ last < 0:
                    w = -w
                xi4[j, i] = last = w
                i += step
            # later m1 runs in the row (separated by gaps) align with the nearest assigned node
            while 0 <= i < nx:
                if m1[j, i] and np.isnan(xi4[j, i, 0]):
                    w = cand[j, i]
                    if w @ last < 0:
                        w = -w
                    xi4[j, i] = last = w
                i += step
        prev = xi4[j, cols[-1]]
    defect = 0.0
    for axis in (0, 1):
        a = xi4
        b = np.roll(xi4, -1, axis=axis)
        both = m1 & np.roll(m1, -1, axis=axis)
        if axis == 0:
            both[-1, :] = False
        else:
            both[:, -1] = False
        if np.any(both):
            defect = max(defect, float(np.max(np.linalg.norm(a[both] - b[both], axis=-1))))
    n_valid = int(np.sum(valid & (hn > 0)))
    frac = float(m1.sum()) / n_valid if n_valid else 0.0
    return GammaStrata(m1, sigma1, sigma2, xi4, defect, frac)


def w_span_rank(points, vectors, sf: SpaceForm, rel_tol: float = SV_REL_TOL, max_rows: int = 4000):
    """Rank of the span of surface points together with tangent/normal vectors.

    For ``c == 0`` rows are homogenised as ``(x, 1)`` for points and ``(v, 0)``
    for vectors, so an affine ``k``-plane containing everything gives rank
    ``k + 1``.  For ``c != 0`` the plain linear span is used.
    """
    P = np.asarray(points, dtype=float).reshape(-1, sf.ambient_dim)
    V = [np.asarray(v, dtype=float).reshape(-1, sf.ambient_dim) for v in vectors]
    if sf.curvature == 0:
        rows = [np.hstack([P, np.ones((len(P), 1))])] + [np.hstack([v, np.zeros((len(v), 1))]) for v in V]
    else:
        rows = [P] + V
    M = np.vstack(rows)
    M = M[np.all(np.isfinite(M), axis=-1)]
    if len(M) > max_rows:
        M = M[np.linspace(0, len(M) - 1, max_rows).astype(int)]
    sv = np.linalg.svd(M, compute_uv=False)
    rank = int(np.sum(sv > rel_tol * sv[0]))
    return rank, float(sv[rank - 1] / sv[0]), sv


@dataclass
class ReductionCertificate:
    """Everything the reduction stage reports for one run."""

    direction: UmbilicDirection
    container: ContainerCertificate | None
    fullness_rank: int
    sv_gap: float
    path: str
    beta: BetaReport | None = None
    notes: list = field(default_factory=list)

    @property
    def container_kind(self) -> str:
        return "none" if self.container is None else self.container.kind

    def as_dict(self) -> dict:
        out = {
            "path": self.path,
            "direction": self.direction.as_dict(),
            "container": None if self.container is None else self.container.as_dict(),
            "container_kind": self.container_kind,
            "fullness_rank": self.fullness_rank,
            "sv_gap": self.sv_gap,
            "notes": list(self.notes),
        }
        if self.beta is not None:
            out["beta"] = self.beta.as_dict()
        return out


def _direct_direction(packet: CurvaturePacket, eta, valid, sf: SpaceForm) -> UmbilicDirection:
    S = _shape_op_along(packet, eta, sf)
    half_tr = 0.5 * (S[..., 0, 0] + S[..., 1, 1])[valid]
    lam = float(np.mean(half_tr))
    resid = np.sqrt(np.sum((S - lam * np.eye(2)) ** 2, axis=(-2, -1)))[valid]
    eta = np.where(valid[..., None], eta, np.nan)
    return UmbilicDirection(True, 1.0, 0.0, lam, float(np.max(resid)), float(np.std(half_tr)), eta)


def certify_reduction(
    grid, constancy_tol: float = CONSTANCY_TOL, reality_tol: float = 1e-6, phi_zero: float = 1e-10
) -> ReductionCertificate:
    """Run the reduction pipeline on a :class:`~pmcverify.sampling.SurfaceGrid`.

    * rank-2 normal bundles use the ``H, H'`` search;
    * rank-1 normal bundles take ``eta = xi_1`` directly;
    * higher ranks take ``eta = H/|H|`` directly and let the umbilic residual
      decide.

    ``phi_zero`` is the relative level (against ``max lambda^2 |H|^2``) below
    which ``phi(H)`` counts as identically zero.
    """
    from .differentials import beta_reality, hprime, phi

    sf = grid.sf
    pk = grid.packet
    valid = grid.valid.copy()
    m = pk.normals.shape[-2]
    H = pk.H
    Hn = np.sqrt(np.abs(_pair(H, H, sf)))
    notes = []
    rank, gap, _ = linear_fullness(grid.jets.u[valid], "affine")
    beta = None
    minimal = bool(np.nanmax(Hn[valid]) <= 1e-10)
    if m == 1:
        xi1 = pk.normals[..., 0, :]
        sgn = np.sign(np.nanmean(_pair(H, xi1, sf)[valid]))
        direction = _direct_direction(pk, xi1 * (sgn if sgn != 0 else 1.0), valid, sf)
        path = "hypersurface"
    elif minimal:
        nan = float("nan")
        direction = UmbilicDirection(False, nan, nan, nan, nan, nan, reason="minimal surface: H vanishes")
        return ReductionCertificate(direction, None, rank, gap, "minimal", None, ["no H-direction available"])
    elif m == 2:
        valid &= Hn > 1e-10
        Hp = np.full_like(H, np.nan)
        Hp[valid] = hprime(H[valid], pk.normals[valid], sf=sf)
        mask = ~valid
        fH = DifferentialField(grid.xs, grid.ys, np.where(valid, phi(pk, H, sf), np.nan), mask, "phiH")
        fHp = DifferentialField(grid.xs, grid.ys, np.where(valid, phi(pk, Hp, sf), np.nan), mask, "phiHp")
        scale = float(np.max((pk.lambda_sq * Hn**2)[valid]))
        beta = beta_reality(fH, fHp, zero_tol=phi_zero, scale=scale)
        direction = find_parallel_umbilic_direction(fH, fHp, pk, Hp, valid, sf, beta, reality_tol)
        path = "H-Hprime"
    else:
        valid &= Hn > 1e-10
        safe = np.where(valid, Hn, 1.0)[..., None]
        direction = _direct_direction(pk, H / safe, valid, sf)
        path = "mean-curvature-direction"
    container = None
    if direction.accepted:
        container = container_constancy(grid.jets.u[valid], direction.eta[valid], direction.lam, sf, constancy_tol)
    else:
        notes.append(direction.reason)
    return ReductionCertificate(direction, container, rank, gap, path, beta, notes)
