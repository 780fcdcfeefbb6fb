"""Parameter domains and chart representations.

A chart is a map ``u(x, y)`` from a planar parameter domain into the ambient
coordinates of a space-form model.  Two concrete kinds exist:

``SymbolicChart``
    components are sympy expressions in the real coordinates ``x, y``; exact
    partial derivatives through third order are generated symbolically and
    compiled with :func:`sympy.lambdify`.
``TableChart``
    values sampled on a uniform Cartesian grid.  It can only be evaluated at
    its own nodes; there is no interpolation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
import sympy as sp

from .errors import InputError

X, Y = sp.symbols("x y", real=True)
Z = X + sp.I * Y
ZBAR = X - sp.I * Y

#: multi-indices (i, j) meaning d^i/dx^i d^j/dy^j, ordered by total degree
MULTI_INDICES = [(i, k - i) for k in range(4) for i in range(k, -1, -1)]


@dataclass(frozen=True)
class BoundaryComponent:
    """A boundary circle of a disk or annulus with its induced orientation.

    ``sign`` is +1 when the outward direction is radially outward (outer
    circle) and -1 for the inner circle of an annulus.
    """

    name: str
    radius: float
    sign: int

    def points(self, t):
        return self.radius * np.exp(1j * np.asarray(t, dtype=float))

    def outward(self, t):
        """Unit outward parameter direction (complex number) at angle ``t``."""
        return self.sign * np.exp(1j * np.asarray(t, dtype=float))

    def tangent(self, t):
        """Unit parameter tangent keeping the domain on the left."""
        return 1j * self.outward(t)


@dataclass(frozen=True)
class Domain:
    """A closed disk, annulus or axis-aligned rectangle in the parameter plane."""

    kind: str
    inner: float = 0.0
    outer: float = 1.0
    box: tuple = (0.0, 0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.kind == "disk":
            if not self.outer > 0:
                raise InputError("disk radius must be positive")
        elif self.kind == "annulus":
            if not 0 < self.inner < self.outer:
                raise InputError("annulus requires 0 < r < R")
        elif self.kind == "rect":
            x0, x1, y0, y1 = self.box
            if not (x0 < x1 and y0 < y1):
                raise InputError("rectangle must have positive extent")
        else:
            raise InputError(f"unknown domain kind {self.kind!r}")

    @classmethod
    def disk(cls, radius: float = 1.0) -> "Domain":
        return cls("disk", 0.0, float(radius))

    @classmethod
    def annulus(cls, r: float, R: float) -> "Domain":
        return cls("annulus", float(r), float(R))

    @classmethod
    def rect(cls, x0, x1, y0, y1) -> "Domain":
        return cls("rect", box=(float(x0), float(x1), float(y0), float(y1)))

    def bounding_box(self):
        if self.kind == "rect":
            return self.box
        R = self.outer
        return (-R, R, -R, R)

    def edge_distance(self, z):
        """Signed distance to the boundary; positive inside."""
        z = np.asarray(z, dtype=complex)
        if self.kind == "rect":
            x0, x1, y0, y1 = self.box
            return np.minimum.reduce([z.real - x0, x1 - z.real, z.imag - y0, y1 - z.imag])
        r = np.abs(z)
        d = self.outer - r
        if self.kind == "annulus":
            d = np.minimum(d, r - self.inner)
        return d

    def contains(self, z, tol: float = 1e-12):
        return self.edge_distance(z) >= -tol

    def inward_direction(self, z, reach: float):
        """Unit inward direction used to orient one-sided stencils near the edge.

        Near a rectangle corner the directions of all edges closer than
        ``reach`` are summed, giving the corner diagonal.
        """
        z = np.asarray(z, dtype=complex)
        if self.kind == "rect":
            x0, x1, y0, y1 = self.box
            d = np.zeros(z.shape, dtype=complex)
            d = d + np.where(z.real - x0 < reach, 1.0, 0.0)
            d = d - np.where(x1 - z.real < reach, 1.0, 0.0)
            d = d + np.where(z.imag - y0 < reach, 1j, 0.0)
            d = d - np.where(y1 - z.imag < reach, 1j, 0.0)
        else:
            r = np.abs(z)
            radial = np.where(r > 0, z / np.where(r > 0, r, 1.0), 1.0)
            d = -radial
            if self.kind == "annulus":
                d = np.where(r - self.inner < self.outer - r, radial, -radial)
        mag = np.abs(d)
        return np.where(mag > 0, d / np.where(mag > 0, mag, 1.0), 1.0)

    def boundary_components(self) -> list:
        if self.kind == "disk":
            return [BoundaryComponent("outer", self.outer, +1)]
        if self.kind == "annulus":
            return [
                BoundaryComponent("outer", self.outer, +1),
                BoundaryComponent("inner", self.inner, -1),
            ]
        raise InputError("rectangular domains have no circular boundary components")

    def describe(self) -> dict:
        if self.kind == "rect":
            return {"kind": "rect", "box": list(self.box)}
        return {"kind": self.kind, "inner": self.inner, "outer": self.outer}


class Chart:
    """Common interface of parametrized surfaces."""

    name: str
    domain: Domain
    ambient_dim: int
    analytic: bool = False

    def evaluate(self, x, y) -> np.ndarray:
        """Chart values with shape ``broadcast(x, y).shape + (ambient_dim,)``."""
        raise NotImplementedError

    def describe(self) -> dict:
        return {"name": self.name, "domain": self.domain.describe(), "ambient_dim": self.ambient_dim}


def _parse(expr, extra_locals=None):
    if isinstance(expr, sp.Basic):
        return expr
    if isinstance(expr, (int, float, complex)):
        return sp.sympify(expr)
    try:
        loc = {"x": X, "y": Y, "z": Z, "zbar": ZBAR, "I": sp.I, "i": sp.I, "pi": sp.pi}
        if extra_locals:
            loc.update(extra_locals)
        return sp.sympify(str(expr), locals=loc)
    except (sp.SympifyError, SyntaxError, TypeError) as exc:
        raise InputError(f"cannot parse chart component {expr!r}: {exc}") from exc


class SymbolicChart(Chart):
    """Chart given by closed-form sympy expressions in ``x`` and ``y``.

    Parameters
    ----------
    components : sequence of sympy expressions
        One real-valued expression per ambient coordinate.
    domain : Domain
    name : str, optional
    """

    analytic = True

    def __init__(self, components: Sequence, domain: Domain, name: str = "symbolic"):
        exprs = [sp.sympify(c) for c in components]
        if not exprs:
            raise InputError("chart needs at least one component")
        free = set().union(*(e.free_symbols for e in exprs))
        if not free <= {X, Y}:
            raise InputError(f"chart components may only depend on x and y, found {free - {X, Y}}")
        self.components = tuple(exprs)
        self.domain = domain
        self.name = name
        self.ambient_dim = len(exprs)
        self._check_real()

    @classmethod
    def from_real_components(cls, components, domain: Domain, name: str = "inline", strict=True):
        """Build from real-valued strings or expressions in ``x, y, z, zbar``."""
        exprs = []
        for c in components:
            e = sp.expand_complex(_parse(c))
            re, im = e.as_real_imag()
            if strict and not _numerically_zero(im):
                raise InputError(f"component {c!r} is not real-valued")
            exprs.append(re)
        return cls(exprs, domain, name)

    @classmethod
    def from_complex_components(cls, components, domain: Domain, name: str = "inline"):
        """Each complex component ``w(z, zbar)`` contributes ``(Re w, Im w)``."""
        exprs = []
        for c in components:
            e = sp.expand_complex(_parse(c))
            re, im = e.as_real_imag()
            exprs.extend([re, im])
        return cls(exprs, domain, name)

    def _check_real(self):
        for e in self.components:
            if e.has(sp.I) and not _numerically_zero(sp.im(e)):
                raise InputError("chart components must be real-valued")

    @cached_property
    def _compiled(self):
        funcs = {}
        for mi in MULTI_INDICES:
            i, j = mi
            exprs = [sp.diff(e, X, i, Y, j) if (i or j) else e for e in self.components]
            funcs[mi] = sp.lambdify((X, Y), exprs, modules="numpy", cse=True)
        return funcs

    def _call(self, mi, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        shape = np.broadcast(x, y).shape
        vals = self._compiled[mi](x, y)
        return np.stack([np.broadcast_to(np.asarray(v, dtype=float), shape) for v in vals], axis=-1)

    def evaluate(self, x, y):
        return self._call((0, 0), x, y)

    def partials(self, x, y) -> dict:
        """Exact partial derivatives ``{(i, j): d^i_x d^j_y u}`` through order 3."""
        return {mi: self._call(mi, x, y) for mi in MULTI_INDICES}

    def reparametrize(self, sx, sy, domain: Domain, name: str | None = None) -> "SymbolicChart":
        """Compose with a parameter map ``(x, y) -> (sx(x, y), sy(x, y))``."""
        sx, sy = _parse(sx), _parse(sy)
        comps = [e.subs({X: sx, Y: sy}, simultaneous=True) for e in self.components]
        return SymbolicChart(comps, domain, name or f"{self.name}-reparam")

    def log_chart(self, name: str | None = None) -> "SymbolicChart":
        """The same surface in the coordinate ``w = log z`` on a strip."""
        if self.domain.kind != "annulus":
            raise InputError("log coordinates are defined for annular domains")
        r, R = self.domain.inner, self.domain.outer
        dom = Domain.rect(math.log(r), math.log(R), -math.pi, math.pi)
        return self.reparametrize(sp.exp(X) * sp.cos(Y), sp.exp(X) * sp.sin(Y), dom, name or f"{self.name}-log")

    def describe(self) -> dict:
        d = super().describe()
        d["kind"] = "symbolic"
        d["components"] = [sp.sstr(e) for e in self.components]
        return d


def _numerically_zero(expr, samples: int = 7) -> bool:
    if expr == 0:
        return True
    rng = np.random.default_rng(0)
    f = sp.lambdify((X, Y), expr, modules="numpy")
    pts = rng.uniform(-0.7, 0.7, size=(samples, 2))
    vals = np.array([complex(f(px, py)) for px, py in pts])
    return bool(np.all(np.abs(vals) < 1e-12))


@dataclass
class TableChart(Chart):
    """Chart sampled on a uniform Cartesian grid of parameter nodes.

    Parameters
    ----------
    xs, ys : ndarray
        Uniformly spaced node coordinates along each axis.
    values : ndarray, shape (len(ys), len(xs), D)
        Ambient coordinates at the nodes; NaN marks unavailable nodes.
    domain : Domain
        Region of the parameter plane the table represents.
    """

    xs: np.ndarray
    ys: np.ndarray
    values: np.ndarray
    domain: Domain
    name: str = "table"
    node_tol: float = field(default=1e-9)

    analytic = False

    def __post_init__(self):
        self.xs = np.asarray(self.xs, dtype=float)
        self.ys = np.asarray(self.ys, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape[:2] != (self.ys.size, self.xs.size):
            raise InputError("table values must have shape (len(ys), len(xs), D)")
        for axis in (self.xs, self.ys):
            if axis.size < 7:
                raise InputError("table needs at least 7 nodes per axis")
            steps = np.diff(axis)
            if not np.allclose(steps, steps[0], rtol=1e-9, atol=0):
                raise InputError("table axes must be uniformly spaced")
        self.ambient_dim = self.values.shape[2]
        self.hx = float(self.xs[1] - self.xs[0])
        self.hy = float(self.ys[1] - self.ys[0])

    def node_index(self, x, y):
        """Integer node indices of the points, or InputError if off-grid."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        fi = (x - self.xs[0]) / self.hx
        fj = (y - self.ys[0]) / self.hy
        i = np.rint(fi).astype(int)
        j = np.rint(fj).astype(int)
        if (
            np.any(np.abs(fi - i) * self.hx > self.node_tol)
            or np.any(np.abs(fj - j) * self.hy > self.node_tol)
            or np.any((i < 0) | (i >= self.xs.size) | (j < 0) | (j >= self.ys.size))
        ):
            raise InputError("table charts can only be evaluated at their grid nodes")
        return i, j

    def evaluate(self, x, y):
        i, j = self.node_index(x, y)
        return self.values[j, i]

    def node_grid(self):
        xx, yy = np.meshgrid(self.xs, self.ys)
        return xx + 1j * yy

    def describe(self) -> dict:
        d = super().describe()
        d.update(kind="table", shape=list(self.values.shape[:2]), spacing=[self.hx, self.hy])
        return d
