"""Linear models of the constant-curvature spaces and their ambient calculus.

A space form of curvature ``c`` and dimension ``n`` is realised as

* ``c == 0``: Euclidean space ``R^n`` itself;
* ``c > 0``: the round sphere ``<x, x> = 1/c`` in Euclidean ``R^(n+1)``;
* ``c < 0``: the upper sheet (last coordinate positive) of the hyperboloid
  ``<x, x> = 1/c`` in Minkowski space ``R^(n,1)``, whose single timelike
  coordinate is the last one.

Every function accepts batched input: vectors live on the last axis and all
leading axes broadcast.  The bilinear pairing is extended complex-bilinearly
(no conjugation) so that it applies unchanged to complexified tangent vectors
such as ``u_z``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, GeometryError, InputError

QUADRIC_TOL = 1e-10
BOUNDARY_TOL = 1e-8


@dataclass(frozen=True)
class SpaceForm:
    """Constant-curvature model space.

    Parameters
    ----------
    curvature : float
        Sectional curvature ``c``.
    intrinsic_dim : int
        Dimension ``n`` of the space form, at least 3.
    """

    curvature: float
    intrinsic_dim: int

    def __post_init__(self):
        if not isinstance(self.intrinsic_dim, (int, np.integer)) or self.intrinsic_dim < 3:
            raise InputError(f"intrinsic_dim must be an integer >= 3, got {self.intrinsic_dim!r}")
        if not math.isfinite(self.curvature):
            raise InputError("curvature must be finite")
        object.__setattr__(self, "curvature", float(self.curvature))
        object.__setattr__(self, "intrinsic_dim", int(self.intrinsic_dim))

    @classmethod
    def euclidean(cls, n: int) -> "SpaceForm":
        return cls(0.0, n)

    @classmethod
    def sphere(cls, n: int, c: float = 1.0) -> "SpaceForm":
        if c <= 0:
            raise InputError("sphere curvature must be positive")
        return cls(c, n)

    @classmethod
    def hyperbolic(cls, n: int, c: float = -1.0) -> "SpaceForm":
        if c >= 0:
            raise InputError("hyperbolic curvature must be negative")
        return cls(c, n)

    @property
    def kind(self) -> str:
        if self.curvature == 0:
            return "euclidean"
        return "spherical" if self.curvature > 0 else "hyperbolic"

    @property
    def ambient_dim(self) -> int:
        return self.intrinsic_dim if self.curvature == 0 else self.intrinsic_dim + 1

    @property
    def signature(self) -> np.ndarray:
        sig = np.ones(self.ambient_dim)
        if self.curvature < 0:
            sig[-1] = -1.0
        return sig

    @property
    def scale(self) -> float:
        """Radius ``1/sqrt|c|`` of the model quadric (1 in the flat case)."""
        return 1.0 if self.curvature == 0 else 1.0 / math.sqrt(abs(self.curvature))

    @property
    def codimension(self) -> int:
        """Rank of the normal bundle of a surface in this space form."""
        return self.intrinsic_dim - 2

    def base_point(self) -> np.ndarray:
        """A canonical point of the model: origin, north pole, or vertex."""
        x = np.zeros(self.ambient_dim)
        if self.curvature != 0:
            x[-1] = self.scale
        return x

    def describe(self) -> dict:
        return {
            "curvature": self.curvature,
            "intrinsic_dim": self.intrinsic_dim,
            "ambient_dim": self.ambient_dim,
            "signature": self.signature.tolist(),
            "scale": self.scale,
            "model": self.kind,
            "hyperboloid_sheet": "last coordinate positive" if self.curvature < 0 else None,
        }


def _check_dim(v, sf: SpaceForm, name: str) -> np.ndarray:
    v = np.asarray(v)
    if v.ndim == 0 or v.shape[-1] != sf.ambient_dim:
        raise InputError(
            f"{name} must have last axis of length {sf.ambient_dim}, got shape {v.shape}"
        )
    return v


def ambient_inner(x, y, sf: SpaceForm):
    """Ambient bilinear pairing ``sum_i sig_i x_i y_i`` over the last axis."""
    x = _check_dim(x, sf, "x")
    y = _check_dim(y, sf, "y")
    out = np.sum(x * y * sf.signature, axis=-1)
    return out.item() if np.ndim(out) == 0 else out


def ambient_norm(v, sf: SpaceForm):
    """Length of (possibly complex) spacelike vectors, ``sqrt|<v, conj v>|``."""
    v = _check_dim(v, sf, "v")
    out = np.sqrt(np.abs(np.sum(v * np.conj(v) * sf.signature, axis=-1).real))
    return out.item() if np.ndim(out) == 0 else out


def quadric_residual(x, sf: SpaceForm):
    """Distance ``|<x, x> - 1/c|`` of ``x`` from the model quadric."""
    if sf.curvature == 0:
        raise ContractError("flat space form has no model quadric")
    x = _check_dim(x, sf, "x")
    return np.abs(ambient_inner(x, x, sf) - 1.0 / sf.curvature)


def _require_on_quadric(x, sf: SpaceForm, tol: float):
    if sf.curvature == 0:
        return
    res = np.max(quadric_residual(x, sf))
    if not res < tol:
        raise ContractError(f"point is off the model quadric (residual {res:.3e} >= {tol:.1e})")


def tangent_project(x, v, sf: SpaceForm, tol: float = QUADRIC_TOL):
    """Orthogonal projection of ``v`` onto the tangent space at ``x``."""
    v = _check_dim(v, sf, "v")
    if sf.curvature == 0:
        return v
    x = _check_dim(x, sf, "x")
    _require_on_quadric(x, sf, tol)
    coef = sf.curvature * np.sum(v * x * sf.signature, axis=-1)
    return v - coef[..., None] * x


def covariant_derivative(x, X, Yfield_derivative, Y, sf: SpaceForm, tol: float = 1e-8):
    """Levi-Civita derivative of a tangent field on the model quadric.

    Parameters
    ----------
    x : array_like
        Base point on the model.
    X, Y : array_like
        Tangent vectors at ``x``: the direction and the value of the field.
    Yfield_derivative : array_like
        Flat ambient directional derivative ``D_X Y``.
    sf : SpaceForm

    Returns
    -------
    ndarray
        ``D_X Y + c <X, Y> x``, which is the tangential part of ``D_X Y``.
    """
    DY = _check_dim(Yfield_derivative, sf, "Yfield_derivative")
    if sf.curvature == 0:
        return DY
    x = _check_dim(x, sf, "x")
    X = _check_dim(X, sf, "X")
    Y = _check_dim(Y, sf, "Y")
    _require_on_quadric(x, sf, QUADRIC_TOL)
    scale = np.sqrt(np.abs(ambient_inner(x, x, sf)))
    for name, vec in (("X", X), ("Y", Y)):
        off = np.abs(np.sum(vec * x * sf.signature, axis=-1))
        ref = tol * (1.0 + np.linalg.norm(vec, axis=-1)) * scale
        if np.any(off > ref):
            raise ContractError(f"{name} is not tangent at x (|<{name},x>| = {np.max(off):.3e})")
    coef = sf.curvature * np.sum(X * Y * sf.signature, axis=-1)
    return DY + coef[..., None] * x


@dataclass(frozen=True)
class GeodesicBall:
    """Closed geodesic ball of a space form.

    Parameters
    ----------
    center : ndarray
        Centre point ``p`` (flat case) or the unit axis ``e`` of the ambient
        space with ``<e, e> = sign(c)``, so the centre is ``e / sqrt|c|``.
    radius_param : float
        Euclidean radius ``R`` for ``c == 0``; ``t0 = cos(sqrt(c) rho)`` for
        ``c > 0``; ``t0 = cosh(sqrt(-c) rho)`` for ``c < 0``.
    """

    center: np.ndarray
    radius_param: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        object.__setattr__(self, "radius_param", float(self.radius_param))

    @classmethod
    def from_radius(cls, sf: SpaceForm, center, rho: float) -> "GeodesicBall":
        """Ball of geodesic radius ``rho`` about ``center`` (point or axis)."""
        if rho <= 0:
            raise InputError("geodesic radius must be positive")
        k = math.sqrt(abs(sf.curvature))
        if sf.curvature == 0:
            return cls(center, rho)
        if sf.curvature > 0:
            return cls(center, math.cos(k * rho))
        return cls(center, math.cosh(k * rho))

    def validate(self, sf: SpaceForm, tol: float = 1e-12) -> "GeodesicBall":
        c = sf.curvature
        if self.center.shape != (sf.ambient_dim,):
            raise InputError(f"ball centre must have length {sf.ambient_dim}")
        if c == 0:
            if not self.radius_param > 0:
                raise InputError("Euclidean ball radius must be positive")
            return self
        ee = float(np.sum(self.center * self.center * sf.signature))
        if abs(ee - math.copysign(1.0, c)) > 1e-10:
            raise InputError(f"ball axis must satisfy <e,e> = {math.copysign(1, c):+.0f}, got {ee}")
        if c > 0 and not -1.0 < self.radius_param < 1.0:
            raise InputError("spherical cap height t0 must lie in (-1, 1)")
        if c < 0:
            if self.center[-1] <= 0:
                raise InputError("hyperbolic ball centre must lie on the upper sheet")
            if not self.radius_param > 1.0:
                raise InputError("hyperbolic ball needs cosh(k rho) > 1")
        return self

    def level(self, y, sf: SpaceForm):
        """Defining function whose value on the boundary sphere is ``radius_param``."""
        y = _check_dim(y, sf, "y")
        c = sf.curvature
        if c == 0:
            return np.linalg.norm(y - self.center, axis=-1)
        k = math.sqrt(abs(c))
        t = k * np.sum(y * self.center * sf.signature, axis=-1)
        return t if c > 0 else -t

    def inside(self, y, sf: SpaceForm, tol: float = 1e-12):
        lv = self.level(y, sf)
        if sf.curvature > 0:
            return lv >= self.radius_param - tol
        return lv <= self.radius_param + tol

    def boundary_defect(self, y, sf: SpaceForm):
        return np.abs(self.level(y, sf) - self.radius_param)


def ball_boundary_normal(y, ball: GeodesicBall, sf: SpaceForm, tol: float = BOUNDARY_TOL):
    """Outward unit normal of the boundary sphere of ``ball`` at ``y``."""
    y = _check_dim(y, sf, "y")
    ball.validate(sf)
    defect = np.max(ball.boundary_defect(y, sf))
    if not defect < tol:
        raise ContractError(f"point is not on the ball boundary (defect {defect:.3e})")
    if sf.curvature == 0:
        d = y - ball.center
        return d / np.linalg.norm(d, axis=-1, keepdims=True)
    q = ball.center * sf.scale
    w = tangent_project(y, -np.broadcast_to(q, y.shape), sf, tol=max(QUADRIC_TOL, tol))
    nrm2 = np.sum(w * w * sf.signature, axis=-1)
    if np.any(nrm2 <= 1e-24):
        raise GeometryError("boundary normal is undefined at the ball centre or antipode")
    return w / np.sqrt(nrm2)[..., None]
