"""Closed-form example surfaces with known contact angles and curvature data.

Every entry bundles an analytic chart, the space form it lives in, the
supporting geodesic ball and a table of expected quantities.  Each expected
value records the formula it comes from and a provenance tag:

``closed-form``
    a formula stated in the literature for this family;
``derived``
    computed here from the elementary geometry of the configuration;
``structural``
    forced by symmetry or by the construction itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import sympy as sp

from .charts import X, Y, Domain, SymbolicChart
from .errors import InputError
from .spaceform import GeodesicBall, SpaceForm


@dataclass(frozen=True)
class Expected:
    value: object
    formula: str
    provenance: str

    def __post_init__(self):
        if self.provenance not in ("closed-form", "derived", "structural"):
            raise InputError(f"unknown provenance tag {self.provenance!r}")
        if not self.formula:
            raise InputError("expected values need a formula string")

    def as_dict(self) -> dict:
        v = self.value
        if isinstance(v, (np.floating, np.integer)):
            v = v.item()
        return {"value": v, "formula": self.formula, "provenance": self.provenance}


@dataclass
class GalleryEntry:
    id: str
    params: dict
    chart: SymbolicChart
    sf: SpaceForm
    ball: GeodesicBall
    expected: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    #: extra geometric data of the construction (e.g. hyperplane normal)
    geometry: dict = field(default_factory=dict)

    def describe(self) -> dict:
        return {
            "id": self.id,
            "params": self.params,
            "space_form": self.sf.describe(),
            "ball": {"center": self.ball.center.tolist(), "radius_param": self.ball.radius_param},
            "expected": {k: v.as_dict() for k, v in sorted(self.expected.items())},
            "notes": list(self.notes),
        }


def _monomial_parts(k: int):
    re, im = sp.expand((X + sp.I * Y) ** k).as_real_imag()
    return re, im


def example_r2m(k: Sequence[int], c: Sequence[complex]) -> GalleryEntry:
    """Polynomial disk ``z -> (c_1 z^k_1, ..., c_m z^k_m)`` in ``C^m = R^(2m)``.

    Parameters
    ----------
    k : sequence of int
        Strictly increasing exponents with ``k[0] == 1``.
    c : sequence of complex
        Coefficients with ``sum |c_j|^2 == 1`` and ``c[0] != 0``.
    """
    k = [int(v) for v in k]
    c = [complex(v) for v in c]
    if len(k) != len(c) or not k:
        raise InputError("k and c must be non-empty and of equal length")
    if k[0] != 1 or any(b <= a for a, b in zip(k, k[1:])):
        raise InputError("exponents must satisfy 1 = k_1 < k_2 < ... < k_m")
    if c[0] == 0:
        raise InputError("c_1 must be non-zero")
    norm = sum(abs(v) ** 2 for v in c)
    if abs(norm - 1.0) > 1e-12:
        raise InputError(f"coefficients must satisfy sum |c_j|^2 = 1 (got {norm!r})")
    comps = []
    for kj, cj in zip(k, c):
        re, im = _monomial_parts(kj)
        p, q = sp.Float(cj.real, 17), sp.Float(cj.imag, 17)
        if cj.imag == 0:
            comps += [p * re, p * im]
        else:
            comps += [p * re - q * im, q * re + p * im]
    m = len(k)
    dim = 2 * m
    notes = []
    if dim < 3:
        comps.append(sp.Integer(0))
        dim = 3
        notes.append("single-component chart padded with a zero coordinate to live in R^3")
    chart = SymbolicChart(comps, Domain.disk(), name=f"r2m{tuple(k)}")
    sf = SpaceForm.euclidean(dim)
    ball = GeodesicBall(np.zeros(dim), 1.0)
    w = [abs(v) ** 2 for v in c]
    sin_t = sum(kj * wj for kj, wj in zip(k, w)) / math.sqrt(sum(kj**2 * wj for kj, wj in zip(k, w)))
    planar = m == 1 or all(wj == 0 for wj in w[1:])
    expected = {
        "sin_theta": Expected(sin_t, "Σk_j|c_j|²/√(Σk_j²|c_j|²)", "closed-form"),
        "H_norm": Expected(0.0, "0 (holomorphic, hence conformal harmonic)", "closed-form"),
        "orthogonal": Expected(abs(sin_t - 1.0) < 1e-15, "sin θ = 1 iff only c_1 ≠ 0", "structural"),
        "fullness_rank": Expected(
            2 if planar else min(dim, 2 * sum(1 for wj in w if wj > 0)),
            "affine rank 2 for a flat disk, otherwise 2·#{j : c_j ≠ 0}",
            "derived",
        ),
    }
    params = {"k": k, "c": [[v.real, v.imag] for v in c]}
    return GalleryEntry("r2m", params, chart, sf, ball, expected, notes)


def example_r4(a: float, b: float) -> GalleryEntry:
    """Minimal disk ``z -> (a z, b z^2)`` in ``R^4``, ``a > 0``, ``b >= 0``, ``a^2 + b^2 = 1``."""
    a, b = float(a), float(b)
    if not (a > 0 and b >= 0):
        raise InputError("r4 requires a > 0 and b >= 0")
    if abs(a * a + b * b - 1.0) > 1e-12:
        raise InputError("r4 requires a^2 + b^2 = 1")
    base = example_r2m([1, 2], [a, b])
    sin_t = (a * a + 2 * b * b) / math.sqrt(a * a + 4 * b * b)
    expected = dict(base.expected)
    expected["sin_theta"] = Expected(sin_t, "(a²+2b²)/√(a²+4b²)", "closed-form")
    expected["fullness_rank"] = Expected(4 if b > 0 else 2, "4 if b > 0 else 2", "closed-form")
    if b > 0:
        expected["sphere_fit_excluded"] = Expected(True, "no round sphere contains the image when b > 0", "closed-form")
    chart = base.chart
    chart.name = "r4"
    return GalleryEntry("r4", {"a": a, "b": b}, chart, base.sf, base.ball, expected, base.notes)


def _stereo_disk(scale: float):
    """Inverse stereographic disk ``|z| <= 1`` onto the polar cap ``phi <= phi0``.

    With ``w = scale * z`` the point has polar angle ``2 atan|w|`` from ``+e3``.
    """
    wx, wy = scale * X, scale * Y
    d = 1 + wx**2 + wy**2
    return 2 * wx / d, 2 * wy / d, (1 - wx**2 - wy**2) / d


def example_veronese(phi0: float) -> GalleryEntry:
    """Veronese minimal surface in ``S^4`` restricted to the polar cap ``phi <= phi0``."""
    phi0 = float(phi0)
    if not 0 < phi0 < math.pi / 2:
        raise InputError("veronese requires 0 < phi0 < pi/2")
    x1, x2, x3 = _stereo_disk(math.tan(phi0 / 2))
    s3 = sp.sqrt(3)
    comps = [
        s3 / 2 * (x1**2 - x2**2),
        s3 * x1 * x2,
        s3 * x1 * x3,
        s3 * x2 * x3,
        (3 * x3**2 - 1) / 2,
    ]
    chart = SymbolicChart([sp.simplify(e) for e in comps], Domain.disk(), name="veronese")
    sf = SpaceForm.sphere(4)
    t0 = 0.5 * (3 * math.cos(phi0) ** 2 - 1)
    axis = np.zeros(5)
    axis[4] = 1.0
    ball = GeodesicBall(axis, t0)
    cp = math.cos(phi0)
    expected = {
        "sin_theta": Expected(2 * cp / math.sqrt(1 + 3 * cp * cp), "2cosφ₀/√(1+3cos²φ₀)", "closed-form"),
        "t0": Expected(t0, "½(3cos²φ₀−1)", "closed-form"),
        "H_norm": Expected(0.0, "0 (minimal in S⁴)", "closed-form"),
        "fullness_rank": Expected(5, "5 (linearly full in R⁵)", "closed-form"),
        "conormal_speed": Expected(math.sqrt(3.0), "|u_φ| = √3", "closed-form"),
    }
    notes = ["the angle tends to pi/2 only as phi0 -> 0, where the image shrinks to a point"]
    return GalleryEntry("veronese", {"phi0": phi0}, chart, sf, ball, expected, notes)


def cap_configuration(r: float, tilt: float) -> dict:
    """Elementary data of the spherical cap used by :func:`example_cmc_cap`.

    The hyperplane ``M = {y_4 = sin(tilt)}`` cuts the unit sphere in a sphere
    ``C`` of radius ``R_C = cos(tilt)`` about ``o = sin(tilt) e_4``.  Inside
    ``M`` a sphere of radius ``r`` centred at distance ``s = sqrt(2) R_C`` from
    ``o`` along ``e_3`` meets ``C`` along a circle; the cap is the part of it
    inside ``C``.
    """
    d = math.sin(tilt)
    RC = math.cos(tilt)
    s = math.sqrt(2.0) * RC
    if not abs(s - RC) < r < s + RC:
        raise InputError(
            f"cap radius r={r} does not meet the unit sphere (need {s - RC:.6g} < r < {s + RC:.6g})"
        )
    cos_phi0 = (s * s + r * r - RC * RC) / (2 * s * r)
    phi0 = math.acos(cos_phi0)
    sin_theta_M = s * math.sin(phi0) / RC
    return {
        "offset": d,
        "R_C": RC,
        "s": s,
        "phi0": phi0,
        "sin_theta_M": sin_theta_M,
        "sin_theta": RC * sin_theta_M,
        "n_dot_xi": d,
    }


def example_cmc_cap(r: float, embed_dim: int = 4, tilt: float = 0.0) -> GalleryEntry:
    """Round spherical cap in an affine 3-plane of ``R^embed_dim`` with rim on the unit sphere.

    Parameters
    ----------
    r : float
        Radius of the cap's sphere.
    embed_dim : int
        Ambient dimension, at least 4.
    tilt : float
        Angle in ``[0, pi/4]``; the 3-plane is ``{y_4 = sin(tilt)}``.
    """
    r, tilt, embed_dim = float(r), float(tilt), int(embed_dim)
    if not r > 0:
        raise InputError("cap radius must be positive")
    if embed_dim < 4:
        raise InputError("cmc_cap needs embed_dim >= 4")
    if not 0.0 <= tilt <= math.pi / 4:
        raise InputError("tilt must lie in [0, pi/4]")
    cfg = cap_configuration(r, tilt)
    x1, x2, x3 = _stereo_disk(math.tan(cfg["phi0"] / 2))
    s = cfg["s"]
    comps = [r * x1, r * x2, s - r * x3, sp.Float(cfg["offset"], 17)]
    comps += [sp.Integer(0)] * (embed_dim - 4)
    chart = SymbolicChart([sp.simplify(e) if i < 3 else e for i, e in enumerate(comps)], Domain.disk(), name="cmc_cap")
    sf = SpaceForm.euclidean(embed_dim)
    ball = GeodesicBall(np.zeros(embed_dim), 1.0)
    center = np.zeros(embed_dim)
    center[2] = s
    center[3] = cfg["offset"]
    xi = np.zeros(embed_dim)
    xi[3] = 1.0
    expected = {
        "H_norm": Expected(1.0 / r, "1/r", "derived"),
        "lambda": Expected(1.0 / r, "1/r", "derived"),
        "sin_theta": Expected(cfg["sin_theta"], "s·sin φ₀ with s = √2·cos(tilt)", "derived"),
        "sin_theta_M": Expected(cfg["sin_theta_M"], "s·sin φ₀ / cos(tilt)", "derived"),
        "n_dot_xi": Expected(cfg["n_dot_xi"], "sin(tilt)", "derived"),
        "container_kind": Expected("round-sphere", "umbilic with H ≠ 0", "derived"),
        "container_center": Expected(center.tolist(), "o + s·e₃", "derived"),
        "umbilicity": Expected(0.0, "0 (round sphere)", "structural"),
        "phi_H_vanishes": Expected(True, "umbilic ⇒ φ(H) ≡ 0", "derived"),
        "pmc": Expected(0.0, "0 (CMC in an affine 3-plane)", "derived"),
        "fullness_rank": Expected(3, "contained in an affine 3-plane, not in a 2-plane", "derived"),
        "W_rank": Expected(4, "u + span{du, H} is an affine 3-plane, homogenised rank 4", "derived"),
    }
    params = {"r": r, "embed_dim": embed_dim, "tilt": tilt}
    geometry = dict(cfg, center=center, hyperplane_normal=xi)
    return GalleryEntry("cmc_cap", params, chart, sf, ball, expected, [], geometry)


def control_saddle_disk(eps: float = 0.5) -> GalleryEntry:
    """Non-conformal saddle-shaped disk in ``R^3`` whose rim lies on the unit sphere.

    ``v = (x, y, eps (x^2 - y^2)) / sqrt(1 + eps^2 (x^2 - y^2)^2)``.  Its
    contact angle varies along the rim and ``A(tau, nu)`` does not vanish, so
    it serves as a negative control for angle constancy and boundary reality.
    """
    eps = float(eps)
    q = eps * (X**2 - Y**2)
    den = sp.sqrt(1 + q**2)
    chart = SymbolicChart([X / den, Y / den, q / den], Domain.disk(), name="saddle")
    sf = SpaceForm.euclidean(3)
    ball = GeodesicBall(np.zeros(3), 1.0)
    expected = {"free_boundary": Expected(0.0, "|v| = 1 on |z| = 1", "structural")}
    return GalleryEntry("saddle", {"eps": eps}, chart, sf, ball, expected)


def tilted_flat_disk(offset: float = 0.3, dim: int = 3) -> GalleryEntry:
    """Flat disk cut from a plane at distance ``offset`` from the ball centre.

    Its contact angle is constant (``sin theta = sqrt(1 - offset^2)``) and its
    second fundamental form vanishes, whatever the tilt.
    """
    offset = float(offset)
    if not 0 <= offset < 1:
        raise InputError("offset must lie in [0, 1)")
    rho = math.sqrt(1 - offset * offset)
    comps = [rho * X, rho * Y, sp.Float(offset, 17)] + [sp.Integer(0)] * (dim - 3)
    chart = SymbolicChart(comps, Domain.disk(), name="tilted_flat_disk")
    sf = SpaceForm.euclidean(dim)
    ball = GeodesicBall(np.zeros(dim), 1.0)
    expected = {"sin_theta": Expected(rho, "√(1−offset²)", "derived")}
    return GalleryEntry("tilted_flat_disk", {"offset": offset}, chart, sf, ball, expected)


@dataclass(frozen=True)
class _Spec:
    build: Callable
    schema: dict
    formulas: dict
    defaults: dict


GALLERY = {
    "r4": _Spec(
        lambda p: example_r4(p["a"], p["b"]),
        {"a": "real > 0", "b": "real >= 0, a²+b² = 1"},
        {"sin_theta": ("(a²+2b²)/√(a²+4b²)", "closed-form"), "H_norm": ("0", "closed-form"),
         "fullness_rank": ("4 if b > 0 else 2", "closed-form")},
        {"a": 0.6, "b": 0.8},
    ),
    "r2m": _Spec(
        lambda p: example_r2m(p["k"], [complex(*v) if isinstance(v, (list, tuple)) else complex(v) for v in p["c"]]),
        {"k": "ascending integers with k_1 = 1", "c": "complex coefficients (real or [re, im]), Σ|c_j|² = 1"},
        {"sin_theta": ("Σk_j|c_j|²/√(Σk_j²|c_j|²)", "closed-form"), "H_norm": ("0", "closed-form")},
        {"k": [1, 2, 5], "c": [1 / math.sqrt(3)] * 3},
    ),
    "veronese": _Spec(
        lambda p: example_veronese(p["phi0"]),
        {"phi0": "real in (0, π/2)"},
        {"sin_theta": ("2cosφ₀/√(1+3cos²φ₀)", "closed-form"), "t0": ("½(3cos²φ₀−1)", "closed-form"),
         "fullness_rank": ("5", "closed-form")},
        {"phi0": math.pi / 3},
    ),
    "cmc_cap": _Spec(
        lambda p: example_cmc_cap(p["r"], p.get("embed_dim", 4), p.get("tilt", 0.0)),
        {"r": "real, rim must meet the unit sphere", "embed_dim": "integer >= 4", "tilt": "real in [0, π/4]"},
        {"H_norm": ("1/r", "derived"), "sin_theta": ("s·sin φ₀, s = √2·cos(tilt)", "derived"),
         "container_kind": ("round-sphere", "derived")},
        {"r": 1.0, "embed_dim": 4, "tilt": 0.0},
    ),
}

CONTROLS = {
    "saddle": _Spec(lambda p: control_saddle_disk(p.get("eps", 0.5)), {"eps": "real"}, {}, {"eps": 0.5}),
    "tilted_flat_disk": _Spec(
        lambda p: tilted_flat_disk(p.get("offset", 0.3)), {"offset": "real in [0, 1)"}, {}, {"offset": 0.3}
    ),
}


def build_entry(gid: str, params: dict | None = None) -> GalleryEntry:
    registry = {**GALLERY, **CONTROLS}
    if gid not in registry:
        raise InputError(f"unknown gallery id {gid!r}; known: {', '.join(sorted(registry))}")
    spec = registry[gid]
    merged = dict(spec.defaults)
    merged.update(params or {})
    try:
        return spec.build(merged)
    except KeyError as exc:
        raise InputError(f"missing gallery parameter {exc}") from exc


def list_gallery() -> str:
    """Human-readable listing of gallery ids, parameters and expected formulas."""
    lines = []
    for gid in sorted(GALLERY):
        spec = GALLERY[gid]
        lines.append(gid)
        for name in sorted(spec.schema):
            lines.append(f"  param {name}: {spec.schema[name]} (default {spec.defaults.get(name)!r})")
        for name in sorted(spec.formulas):
            formula, prov = spec.formulas[name]
            lines.append(f"  expect {name} = {formula} [{prov}]")
    lines.append("controls: " + ", ".join(sorted(CONTROLS)))
    return "\n".join(lines) + "\n"
