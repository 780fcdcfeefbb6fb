"""Hopf-type quadratic and quartic differentials and their certificates.

For a normal section ``xi`` the coefficient ``phi(xi) = <A(u_z, u_z), xi>``
defines the quadratic differential ``phi(xi) dz^2``.  Holomorphicity is
certified by the sup of a fourth-order finite-difference ``d/dzbar`` over a
uniform grid; see :func:`cr_residual`.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .curvature import CurvaturePacket, complex_A
from .errors import ContractError, DegeneracyError, InsufficientDataError
from .spaceform import SpaceForm

_W1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0


def _pair(a, b, sf: SpaceForm):
    return np.sum(a * b * sf.signature, axis=-1)


@dataclass
class DifferentialField:
    """Complex coefficient of a differential sampled on a uniform grid.

    Attributes
    ----------
    xs, ys : ndarray
        Node coordinates; ``values[j, i]`` sits at ``xs[i] + 1j * ys[j]``.
    values : ndarray of complex, shape (len(ys), len(xs))
    mask : ndarray of bool
        True for excluded nodes (outside the domain, rim, branch disks).
    label : str
    """

    xs: np.ndarray
    ys: np.ndarray
    values: np.ndarray
    mask: np.ndarray
    label: str = "phi"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        self.mask = np.asarray(self.mask, dtype=bool) | ~np.isfinite(self.values)
        if self.values.shape != (len(self.ys), len(self.xs)) or self.mask.shape != self.values.shape:
            raise ContractError("field arrays must have shape (len(ys), len(xs))")

    @property
    def z(self):
        xx, yy = np.meshgrid(self.xs, self.ys)
        return xx + 1j * yy

    @property
    def spacing(self):
        return float(self.xs[1] - self.xs[0]), float(self.ys[1] - self.ys[0])

    def map(self, fn, label: str | None = None) -> "DifferentialField":
        return DifferentialField(self.xs, self.ys, fn(self.values), self.mask.copy(), label or self.label, dict(self.meta))

    def to_csv(self, path) -> None:
        """Write ``re(z), im(z), re(phi), im(phi), mask`` rows with 17 significant digits."""
        zz = self.z.reshape(-1)
        vv = self.values.reshape(-1)
        mm = self.mask.reshape(-1)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["re_z", "im_z", "re_phi", "im_phi", "mask"])
            for zi, vi, mi in zip(zz, vv, mm):
                re_v = "nan" if mi else f"{vi.real:.17g}"
                im_v = "nan" if mi else f"{vi.imag:.17g}"
                w.writerow([f"{zi.real:.17g}", f"{zi.imag:.17g}", re_v, im_v, int(mi)])


def hprime(H, normals, orientation: int = 1, tol: float = 1e-12, sf: SpaceForm | None = None):
    """Rotate ``H`` by a right angle inside a rank-2 normal plane.

    Parameters
    ----------
    H : ndarray, shape S + (D,)
    normals : ndarray, shape S + (2, D)
        Oriented orthonormal normal basis ``(xi_3, xi_4)``.
    orientation : {+1, -1}
    """
    normals = np.asarray(normals)
    if normals.shape[-2] != 2:
        raise ContractError("H' is defined for rank-2 normal bundles (surfaces in 4-dimensional space forms)")
    if orientation not in (1, -1):
        raise ContractError("orientation must be +1 or -1")
    sig = np.ones(normals.shape[-1]) if sf is None else sf.signature
    h = np.einsum("...d,...ad,d->...a", H, normals, sig)
    hn = np.sqrt(np.sum(h**2, axis=-1))
    if np.any(~(hn > tol) & np.isfinite(hn)):
        raise DegeneracyError("H vanishes; H' is undefined (use the minimal-surface path)")
    return orientation * (-h[..., 1:2] * normals[..., 0, :] + h[..., 0:1] * normals[..., 1, :])


def phi(packet: CurvaturePacket, xi, sf: SpaceForm):
    """``<A(u_z, u_z), xi>`` for normal vectors ``xi`` (shape S + (D,))."""
    A_zz, _ = complex_A(packet)
    return _pair(A_zz, xi, sf)


def cr_field(field_: DifferentialField, h=None) -> DifferentialField:
    """Pointwise ``|d phi / d zbar|`` via fourth-order central differences.

    Nodes whose stencil touches an excluded node are masked.
    """
    hx, hy = field_.spacing if h is None else (float(h), float(h))
    v = np.where(field_.mask, 0.0, field_.values)
    bad = field_.mask.astype(float)
    ny, nx = v.shape
    dx = np.zeros_like(v)
    dy = np.zeros_like(v)
    badx = np.ones(v.shape, bool)
    bady = np.ones(v.shape, bool)
    if nx >= 5 and ny >= 5:
        dx[:, 2:-2] = sum(w * v[:, 2 + k : nx - 2 + k] for w, k in zip(_W1, range(-2, 3))) / hx
        dy[2:-2, :] = sum(w * v[2 + k : ny - 2 + k, :] for w, k in zip(_W1, range(-2, 3))) / hy
        badx[:, 2:-2] = sum(bad[:, 2 + k : nx - 2 + k] for k in range(-2, 3)) > 0
        bady[2:-2, :] = sum(bad[2 + k : ny - 2 + k, :] for k in range(-2, 3)) > 0
    dzbar = 0.5 * (dx + 1j * dy)
    mask = badx | bady | field_.mask
    return DifferentialField(field_.xs, field_.ys, np.abs(dzbar), mask, f"cr({field_.label})")


def cr_residual(field_: DifferentialField, h=None, min_nodes: int = 25) -> float:
    """Sup of ``|d phi / d zbar|`` over nodes with a full unmasked stencil.

    For a holomorphic field the leading truncation terms of the two
    directional derivatives cancel, so the residual is of order ``h^6``.
    """
    cf = cr_field(field_, h)
    valid = ~cf.mask
    if valid.sum() < min_nodes:
        raise InsufficientDataError(f"only {int(valid.sum())} nodes with a full stencil (need {min_nodes})")
    return float(np.max(cf.values.real[valid]))


def quartic(phi_np):
    """Coefficient of the quartic differential, the square of ``phi(N_P)``."""
    return np.asarray(phi_np) ** 2


def reduced_normal(normals, eta=None, sf: SpaceForm | None = None):
    """Unit normal of the surface inside a 3-dimensional container.

    Parameters
    ----------
    normals : ndarray, shape S + (m, D)
    eta : ndarray, shape S + (D,), optional
        Unit normal of the container.  Omitted for surfaces of 3-dimensional
        space forms (``m == 1``), which are their own container.

    Returns
    -------
    ndarray, shape S + (D,)
    """
    normals = np.asarray(normals)
    m = normals.shape[-2]
    sig = np.ones(normals.shape[-1]) if sf is None else sf.signature
    if eta is None:
        if m != 1:
            raise ContractError("a container normal is required when the normal bundle has rank > 1")
        return normals[..., 0, :]
    if m != 2:
        raise ContractError("reduction to a 3-dimensional container needs a rank-2 normal bundle")
    h = np.einsum("...d,...ad,d->...a", eta, normals, sig)
    hn = np.sqrt(np.sum(h**2, axis=-1, keepdims=True))
    if np.any(~(hn > 1e-12) & np.isfinite(hn)):
        raise ContractError("container normal is not a normal direction of the surface")
    h = h / hn
    return -h[..., 1:2] * normals[..., 0, :] + h[..., 0:1] * normals[..., 1, :]


def boundary_reality(z, phi_np, a_tau_nu):
    """Boundary-reality defects of the quartic differential.

    Returns
    -------
    (float, float)
        ``max |Im(z^4 phi_np^2)|`` and ``max |A^P(tau, nu)|`` over the samples.
    """
    z = np.asarray(z)
    q = quartic(phi_np)
    return float(np.max(np.abs(np.imag(z**4 * q)))), float(np.max(np.abs(a_tau_nu)))


@dataclass
class BetaReport:
    """Reality and constancy of the ratio ``phi(H') / phi(H)``.

    ``phi_h_vanishes`` is set when ``phi(H)`` is numerically zero on the whole
    grid; the other fields are then NaN.
    """

    defect: float
    beta: float
    beta_std: float
    phi_h_vanishes: bool
    nodes_used: int
    tol_div: float

    def as_dict(self) -> dict:
        return {k: (None if isinstance(v, float) and not np.isfinite(v) else v) for k, v in self.__dict__.items()}


def beta_reality(
    phiH: DifferentialField,
    phiHp: DifferentialField,
    rel_div: float = 1e-9,
    zero_tol: float = 1e-10,
    scale: float = 1.0,
) -> BetaReport:
    """Reality defect ``sup |Im(phi(H') conj phi(H))| / |phi(H)|^2`` and spread of the ratio.

    Parameters
    ----------
    rel_div : float
        Nodes with ``|phi(H)| <= rel_div * max |phi(H)|`` are skipped.
    zero_tol : float
        ``phi(H)`` counts as identically zero when ``max |phi(H)| <= zero_tol * scale``.
    scale : float
        Natural size of ``phi(H)``, e.g. ``max lambda^2 |H|^2``.
    """
    if phiH.values.shape != phiHp.values.shape:
        raise ContractError("fields must share a grid")
    valid = ~(phiH.mask | phiHp.mask)
    a = phiH.values[valid]
    b = phiHp.values[valid]
    amax = float(np.max(np.abs(a))) if a.size else 0.0
    tol_div = rel_div * amax
    if amax <= zero_tol * scale:
        return BetaReport(float("nan"), float("nan"), float("nan"), True, 0, tol_div)
    use = np.abs(a) > tol_div
    a, b = a[use], b[use]
    defect = float(np.max(np.abs(np.imag(b * np.conj(a))) / np.abs(a) ** 2))
    ratio = np.real(b / a)
    std = float(np.std(ratio, ddof=1)) if ratio.size > 1 else 0.0
    return BetaReport(defect, float(np.mean(ratio)), std, False, int(use.sum()), tol_div)
