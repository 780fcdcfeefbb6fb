"""Run configuration: a TOML file parsed into a validated :class:`RunConfig`.

Example
-------
.. code-block:: toml

    checks = ["conformality", "contact-angle"]

    [chart]
    gallery = "r4"
    params = { a = 0.6, b = 0.8 }

    [grid]
    interior = 64
    boundary = 256

    [scheme]
    mode = "analytic"

An inline chart replaces ``gallery``/``params`` with ``components`` (real
expressions in ``x, y, z, zbar``) or ``complex_components`` plus a
``[chart.domain]`` table, and requires ``[space_form]`` and ``[ball]``.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10 only
    import tomli as tomllib

from .charts import Domain, SymbolicChart
from .errors import InputError
from .gallery import Expected, GalleryEntry, build_entry
from .jets import JetScheme
from .spaceform import GeodesicBall, SpaceForm

ALL_CHECKS = (
    "conformality",
    "curvature-identities",
    "pmc",
    "ricci",
    "codazzi",
    "phi-cr",
    "beta",
    "quartic-reality",
    "contact-angle",
    "conversion",
    "reduction",
    "fullness",
)

#: default tolerances, keyed by the name used in ``[tolerances]``
DEFAULT_TOLERANCES = {
    "conformality": 1e-10,
    "mixed_identity": 1e-8,
    "trace_identity": 1e-10,
    "pmc": 1e-6,
    "ricci": 1e-6,
    "ricci_consistency": 1e-5,
    "codazzi": 1e-6,
    "phi_cr": 1e-6,
    "beta_reality": 1e-6,
    "phi_zero_analytic": 1e-10,
    "phi_zero_fd": 1e-8,
    "quartic_reality": 1e-6,
    "a_tau_nu": 1e-6,
    "angle_constancy": 1e-9,
    "sin_theta_analytic": 1e-8,
    "sin_theta_fd": 1e-6,
    "free_boundary": 1e-10,
    "conversion": 1e-8,
    "umbilic": 1e-7,
    "lambda_std": 1e-7,
    "container_constancy": 1e-6,
    "radius_identity": 1e-8,
    "curvature_bookkeeping": 1e-8,
    "expected": 1e-7,
}

_TOP_KEYS = {"chart", "space_form", "ball", "grid", "scheme", "tolerances", "output", "checks", "branch_points"}
_TABLE_KEYS = {
    "chart": {"gallery", "params", "components", "complex_components", "domain", "name", "expected"},
    "domain": {"kind", "radius", "inner", "outer", "box"},
    "space_form": {"curvature", "dim"},
    "ball": {"center", "radius", "rho"},
    "grid": {"interior", "boundary"},
    "scheme": {"mode", "h", "step_scale"},
    "output": {"dir"},
}


@dataclass
class RunConfig:
    entry: GalleryEntry
    interior: int = 64
    boundary: int = 256
    scheme: JetScheme = field(default_factory=JetScheme)
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    out_dir: Path = Path("pmcverify-out")
    checks: tuple = ALL_CHECKS
    branch_points: tuple = ()
    echo: dict = field(default_factory=dict)

    def tol(self, name: str) -> float:
        return self.tolerances[name]


def _require_table(d, key, where):
    v = d.get(key, {})
    if not isinstance(v, dict):
        raise InputError(f"{where}.{key} must be a table")
    unknown = set(v) - _TABLE_KEYS.get(key, set(v))
    if unknown:
        raise InputError(f"unknown keys in [{key}]: {', '.join(sorted(unknown))}")
    return v


def _float(v, name):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise InputError(f"{name} must be a number")
    return float(v)


def _parse_domain(d: dict) -> Domain:
    kind = d.get("kind", "disk")
    if kind == "disk":
        return Domain.disk(_float(d.get("radius", 1.0), "domain.radius"))
    if kind == "annulus":
        return Domain.annulus(_float(d["inner"], "domain.inner"), _float(d["outer"], "domain.outer"))
    if kind == "rect":
        box = d.get("box")
        if not isinstance(box, list) or len(box) != 4:
            raise InputError("rect domain needs box = [x0, x1, y0, y1]")
        return Domain.rect(*[_float(v, "domain.box") for v in box])
    raise InputError(f"unknown domain kind {kind!r}")


def _parse_space_form(d: dict) -> SpaceForm:
    if "dim" not in d:
        raise InputError("space_form.dim (intrinsic dimension) is required")
    dim = d["dim"]
    if not isinstance(dim, int) or isinstance(dim, bool):
        raise InputError("space_form.dim must be an integer")
    return SpaceForm(_float(d.get("curvature", 0.0), "space_form.curvature"), dim)


def _parse_ball(d: dict, sf: SpaceForm) -> GeodesicBall:
    if "center" not in d:
        raise InputError("ball.center is required")
    center = np.array([_float(v, "ball.center") for v in d["center"]])
    if "rho" in d:
        ball = GeodesicBall.from_radius(sf, center, _float(d["rho"], "ball.rho"))
    else:
        ball = GeodesicBall(center, _float(d.get("radius", 1.0), "ball.radius"))
    return ball.validate(sf)


def _inline_entry(chart_d: dict, cfg: dict) -> GalleryEntry:
    domain = _parse_domain(_require_table(chart_d, "domain", "chart"))
    name = str(chart_d.get("name", "inline"))
    if "components" in chart_d:
        comps = chart_d["components"]
        if not isinstance(comps, list) or not all(isinstance(c, str) for c in comps):
            raise InputError("chart.components must be a list of strings")
        chart = SymbolicChart.from_real_components(comps, domain, name)
    elif "complex_components" in chart_d:
        chart = SymbolicChart.from_complex_components(chart_d["complex_components"], domain, name)
    else:
        raise InputError("inline chart needs components or complex_components")
    if "space_form" not in cfg or "ball" not in cfg:
        raise InputError("inline charts need [space_form] and [ball] tables")
    sf = _parse_space_form(_require_table(cfg, "space_form", "config"))
    if chart.ambient_dim != sf.ambient_dim:
        raise InputError(f"chart has {chart.ambient_dim} components, space form needs {sf.ambient_dim}")
    ball = _parse_ball(_require_table(cfg, "ball", "config"), sf)
    expected = {}
    for k, v in _require_table(chart_d, "expected", "chart").items():
        expected[k] = Expected(v, "user supplied", "structural")
    return GalleryEntry(name, {}, chart, sf, ball, expected)


def parse_config(data: dict, out_override=None, tol_scale: float = 1.0) -> RunConfig:
    """Validate a parsed TOML mapping.

    Raises
    ------
    InputError
        On any structural or range problem in the configuration.
    """
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise InputError(f"unknown config keys: {', '.join(sorted(unknown))}")
    chart_d = _require_table(data, "chart", "config")
    if "gallery" in chart_d:
        params = _require_table(chart_d, "params", "chart")
        entry = build_entry(str(chart_d["gallery"]), params)
        if "space_form" in data or "ball" in data:
            raise InputError("gallery charts fix their own space form and ball")
    else:
        entry = _inline_entry(chart_d, data)

    grid = _require_table(data, "grid", "config")
    interior = grid.get("interior", 64)
    boundary = grid.get("boundary", 256)
    if not isinstance(interior, int) or interior < 16:
        raise InputError("grid.interior must be an integer >= 16")
    if not isinstance(boundary, int) or boundary < 64:
        raise InputError("grid.boundary must be an integer >= 64")

    sch = _require_table(data, "scheme", "config")
    try:
        scheme = JetScheme(
            str(sch.get("mode", "analytic")),
            _float(sch.get("h", 1e-3), "scheme.h"),
            tuple(_float(v, "scheme.step_scale") for v in sch.get("step_scale", (1.0, 4.0, 10.0))),
        )
    except (TypeError, ValueError) as exc:
        raise InputError(f"bad scheme: {exc}") from exc

    if not (math.isfinite(tol_scale) and tol_scale > 0):
        raise InputError("--tol-scale must be a positive number")
    tols = {k: v * tol_scale for k, v in DEFAULT_TOLERANCES.items()}
    for k, v in _require_table(data, "tolerances", "config").items():
        if k not in DEFAULT_TOLERANCES:
            raise InputError(f"unknown tolerance {k!r}")
        tols[k] = _float(v, f"tolerances.{k}")

    checks = data.get("checks", list(ALL_CHECKS))
    if not isinstance(checks, list) or not all(isinstance(c, str) for c in checks):
        raise InputError("checks must be a list of strings")
    bad = [c for c in checks if c not in ALL_CHECKS]
    if bad:
        raise InputError(f"unknown checks: {', '.join(bad)}")
    # dependency order is fixed, whatever order the user wrote
    checks = tuple(c for c in ALL_CHECKS if c in checks)

    out = _require_table(data, "output", "config")
    out_dir = Path(out_override) if out_override is not None else Path(out.get("dir", "pmcverify-out"))

    bps = data.get("branch_points", [])
    try:
        branch_points = tuple(complex(float(p[0]), float(p[1])) for p in bps)
    except (TypeError, ValueError, IndexError) as exc:
        raise InputError("branch_points must be a list of [re, im] pairs") from exc

    return RunConfig(entry, interior, boundary, scheme, tols, out_dir, checks, branch_points, echo=data)


def load_config(path, out_override=None, tol_scale: float = 1.0) -> RunConfig:
    """Read and validate a TOML configuration file."""
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read config: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise InputError(f"config parse error: {exc}") from exc
    return parse_config(data, out_override, tol_scale)
