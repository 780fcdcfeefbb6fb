"""Execute a :class:`~pmcverify.config.RunConfig` and assemble the report.

Each check produces a :class:`CheckRecord` holding one or more criteria
``(name, residual, tolerance)``.  The record's headline residual and
tolerance are those of the criterion with the largest ``residual/tolerance``
ratio, so ``status == "pass"`` exactly when the headline residual is within
its tolerance and nothing was flagged.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from importlib import metadata
from pathlib import Path

import numpy as np

from . import reduction as red
from .boundary import a_tau_nu, angle_conversion, boundary_frames, contact_angle_report
from .config import RunConfig
from .curvature import (
    mixed_identity_residual,
    normal_connection,
    ricci_residual,
    trace_identity_residual,
    umbilicity_norm,
    codazzi_residual,
    h_normality_residual,
    pmc_residual_from_jets,
)
from .differentials import DifferentialField, boundary_reality, cr_field, hprime, phi, reduced_normal
from .errors import ContractError, GeometryError, InconsistencyError, InsufficientDataError
from .jets import FrameData, conformality_residual
from .sampling import sample_boundary, sample_grid

#: patch points used by the stencil-based checks are thinned to at most this many per axis
PATCH_POINTS_PER_AXIS = 16
H_ZERO = 1e-10


class Skip(Exception):
    """Raised inside a check to mark it as not applicable."""


@dataclass
class CheckRecord:
    name: str
    status: str = "pass"
    residual: float | None = None
    tolerance: float | None = None
    excluded_fraction: float = 0.0
    notes: list = field(default_factory=list)
    criteria: list = field(default_factory=list)
    details: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)

    def criterion(self, name: str, residual: float, tolerance: float) -> bool:
        residual = float(residual)
        ok = bool(residual <= tolerance)
        self.criteria.append({"name": name, "residual": residual, "tolerance": float(tolerance), "pass": ok})
        return ok

    def finalize(self) -> "CheckRecord":
        if self.status in ("skipped", "error"):
            return self
        if self.criteria:

            def ratio(c):
                r, t = c["residual"], c["tolerance"]
                if not math.isfinite(r):
                    return math.inf
                return r / t if t > 0 else (0.0 if r == 0 else math.inf)

            worst = max(self.criteria, key=ratio)
            self.residual, self.tolerance = worst["residual"], worst["tolerance"]
        fail = any(not c["pass"] for c in self.criteria)
        self.status = "fail" if fail else ("flagged" if self.flags else "pass")
        return self

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "status": self.status,
            "residual": self.residual,
            "tolerance": self.tolerance,
            "excluded_fraction": self.excluded_fraction,
            "notes": list(self.notes) + [f"flag: {f}" for f in self.flags],
            "criteria": self.criteria,
            "details": self.details,
        }


def _clean(obj):
    """JSON-ready copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, complex):
        return [_clean(obj.real), _clean(obj.imag)]
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def dump_report(report: dict) -> str:
    return json.dumps(_clean(report), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def report_body(text: str) -> str:
    """Report text with the timestamp field removed, for determinism comparisons."""
    data = json.loads(text)
    data.pop("timestamp", None)
    return json.dumps(data, sort_keys=True, indent=2, ensure_ascii=False)


def _pair(a, b, sf):
    return np.sum(a * b * sf.signature, axis=-1)


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:  # pragma: no cover - running from a source tree
        return "unknown"


class Runner:
    """Lazily computed stages shared by the checks of one run."""

    def __init__(self, cfg: RunConfig, jobs: int = 1):
        self.cfg = cfg
        self.entry = cfg.entry
        self.sf = cfg.entry.sf
        self.jobs = max(1, int(jobs))
        self.artifacts: list = []

    # -- stages ---------------------------------------------------------
    @cached_property
    def grid(self):
        return sample_grid(
            self.entry.chart,
            self.sf,
            self.cfg.interior,
            self.cfg.scheme,
            branch_points=self.cfg.branch_points,
            jobs=self.jobs,
        )

    @cached_property
    def boundary(self):
        return sample_boundary(self.entry.chart, self.sf, self.cfg.boundary, self.cfg.scheme, jobs=self.jobs)

    @property
    def codim(self) -> int:
        return self.sf.intrinsic_dim - 2

    @cached_property
    def h_norm(self):
        H = self.grid.packet.H
        return np.sqrt(np.abs(_pair(H, H, self.sf)))

    @property
    def minimal(self) -> bool:
        return bool(np.nanmax(self.h_norm[self.grid.valid]) <= H_ZERO)

    @cached_property
    def patch_z(self):
        g = self.grid
        ny, nx = g.valid.shape
        sj = max(1, ny // PATCH_POINTS_PER_AXIS)
        si = max(1, nx // PATCH_POINTS_PER_AXIS)
        sel = np.zeros_like(g.valid)
        sel[sj // 2 :: sj, si // 2 :: si] = True
        return g.z[sel & g.valid]

    @property
    def patch_step(self):
        return None if self.cfg.scheme.mode == "analytic" else 3 * self.cfg.scheme.h

    @cached_property
    def connection(self):
        return normal_connection(self.entry.chart, self.patch_z, self.sf, self.cfg.scheme, self.patch_step)

    @cached_property
    def differentials(self):
        """``phi(H)`` and ``phi(H')`` grid fields (rank-2 normal bundles with H != 0)."""
        g, pk, sf = self.grid, self.grid.packet, self.sf
        valid = g.valid & (self.h_norm > H_ZERO)
        Hp = np.full_like(pk.H, np.nan)
        Hp[valid] = hprime(pk.H[valid], pk.normals[valid], sf=sf)
        fH = DifferentialField(g.xs, g.ys, np.where(valid, phi(pk, pk.H, sf), np.nan), ~valid, "phiH")
        fHp = DifferentialField(g.xs, g.ys, np.where(valid, phi(pk, Hp, sf), np.nan), ~valid, "phiHp")
        return fH, fHp

    @cached_property
    def reduction(self):
        key = "phi_zero_analytic" if self.cfg.scheme.mode == "analytic" else "phi_zero_fd"
        return red.certify_reduction(
            self.grid, self.cfg.tol("container_constancy"), self.cfg.tol("beta_reality"), self.cfg.tol(key)
        )

    # -- output helpers ---------------------------------------------------
    def write_field(self, check: str, fld: DifferentialField):
        path = self.cfg.out_dir / f"{check}-{fld.label}.csv"
        fld.to_csv(path)
        self.artifacts.append(path.name)

    def write_rows(self, check: str, label: str, header, rows):
        path = self.cfg.out_dir / f"{check}-{label}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in rows:
                w.writerow([v if isinstance(v, (str, int)) else f"{v:.17g}" for v in row])
        self.artifacts.append(path.name)

    def _real_field(self, values, label):
        g = self.grid
        return DifferentialField(g.xs, g.ys, np.where(g.valid, values, np.nan), ~g.valid, label)

    def _expected(self, key):
        e = self.entry.expected.get(key)
        return None if e is None else e.value

    # -- checks -------------------------------------------------------------
    def check_conformality(self, rec: CheckRecord):
        g = self.grid
        defect, lam2 = conformality_residual(g.jets, self.sf)
        rec.criterion("interior", np.nanmax(np.where(g.valid, defect, np.nan)), self.cfg.tol("conformality"))
        worst_b = 0.0
        for bs in self.boundary:
            d, _ = conformality_residual(bs.jets, self.sf)
            worst_b = max(worst_b, float(np.nanmax(d)))
        rec.criterion("boundary", worst_b, self.cfg.tol("conformality"))
        rec.excluded_fraction = g.excluded_fraction
        rec.details["min_lambda_sq"] = float(np.nanmin(np.where(g.valid, lam2, np.nan)))
        self.write_field("conformality", self._real_field(defect, "defect"))

    def check_curvature_identities(self, rec: CheckRecord):
        g, sf, pk = self.grid, self.sf, self.grid.packet
        v = g.valid
        mix = mixed_identity_residual(g.jets, pk, sf)
        rec.criterion("mixed_identity", np.max(mix[v]), self.cfg.tol("mixed_identity"))
        rec.criterion("trace_identity", np.max(trace_identity_residual(pk, sf)[v]), self.cfg.tol("trace_identity"))
        rec.criterion("h_normality", np.max(h_normality_residual(pk, g.frames, sf)[v]), self.cfg.tol("trace_identity"))
        hn = self.h_norm[v]
        rec.details["H_norm_min"] = float(np.min(hn))
        rec.details["H_norm_max"] = float(np.max(hn))
        rec.details["umbilicity_sup"] = float(np.max(umbilicity_norm(pk)[v]))
        exp_h = self._expected("H_norm")
        if exp_h is not None:
            rec.criterion("H_norm_expected", np.max(np.abs(hn - exp_h)), self.cfg.tol("expected"))
        exp_u = self._expected("umbilicity")
        if exp_u is not None:
            rec.criterion("umbilicity_expected", rec.details["umbilicity_sup"], self.cfg.tol("expected"))
        rec.excluded_fraction = g.excluded_fraction
        self.write_field("curvature-identities", self._real_field(mix, "mixed"))

    def check_pmc(self, rec: CheckRecord):
        g = self.grid
        jet_res = pmc_residual_from_jets(g.jets, g.frames, g.packet, self.sf)
        rec.criterion("jets", np.max(jet_res[g.valid]), self.cfg.tol("pmc"))
        nc = self.connection
        ok = ~nc.excluded
        if ok.sum() == 0:
            raise InsufficientDataError("no patch points with a full stencil")
        rec.criterion("patch", np.max(nc.pmc_residual[ok]), self.cfg.tol("pmc"))
        rec.excluded_fraction = g.excluded_fraction
        rec.details["patch_points"] = int(ok.sum())
        self.write_field("pmc", self._real_field(jet_res, "residual"))

    def check_ricci(self, rec: CheckRecord):
        if self.codim < 2:
            raise Skip("normal bundle of rank 1 is flat")
        nc = self.connection
        ok = ~nc.excluded
        if ok.sum() == 0:
            raise InsufficientDataError("no patch points with a full stencil")
        _, _, pk = self._patch_packet()
        comm = ricci_residual(pk)
        consistency = np.max(np.abs(nc.curvature[ok] - comm[ok]))
        rec.criterion("d_omega_vs_commutator", consistency, self.cfg.tol("ricci_consistency"))
        rperp = float(np.max(np.abs(comm[ok])))
        rec.details["sup_Rperp"] = rperp
        rec.details["gauge_jumps"] = int(nc.gauge_jump.sum())
        rec.details["antisymmetry"] = float(np.nanmax(nc.antisymmetry_residual[ok]))
        if self.minimal:
            rec.notes.append("H vanishes: flatness of the normal bundle is not asserted")
        else:
            rec.criterion("flat_normal_bundle", rperp, self.cfg.tol("ricci"))
        rec.excluded_fraction = float(np.mean(nc.excluded))
        flat = red.flat_normal_certificate(
            rperp, float(np.max(nc.pmc_residual[ok])), float(np.nanmin(self.h_norm[self.grid.valid]))
        )
        rec.details["flat_normal_certificate"] = flat

    def _patch_packet(self):
        from .curvature import curvature_for_points

        return curvature_for_points(self.entry.chart, self.patch_z, self.sf, self.cfg.scheme)

    def check_codazzi(self, rec: CheckRecord):
        res = codazzi_residual(self.entry.chart, self.patch_z, self.sf, self.cfg.scheme, self.patch_step)
        ok = np.isfinite(res)
        if ok.sum() == 0:
            raise InsufficientDataError("no patch points with a full stencil")
        rec.criterion("codazzi", np.max(res[ok]), self.cfg.tol("codazzi"))
        rec.excluded_fraction = float(np.mean(~ok))

    def check_phi_cr(self, rec: CheckRecord):
        if self.minimal:
            raise Skip("H vanishes: phi(H) is not defined as a Hopf-type differential")
        g = self.grid
        if self.codim == 1:
            xi = g.packet.normals[..., 0, :]
            fields_ = [
                DifferentialField(g.xs, g.ys, np.where(g.valid, phi(g.packet, xi, self.sf), np.nan), ~g.valid, "phiXi")
            ]
        elif self.codim == 2:
            fields_ = list(self.differentials)
        else:
            raise Skip("phi(H, H') pair is defined for rank-2 normal bundles")
        for f in fields_:
            cf = cr_field(f)
            valid = ~cf.mask
            if valid.sum() < 25:
                raise InsufficientDataError(f"only {int(valid.sum())} nodes with a full stencil")
            rec.criterion(f.label, np.max(cf.values.real[valid]), self.cfg.tol("phi_cr"))
            rec.excluded_fraction = max(rec.excluded_fraction, float(np.mean(cf.mask)))
            self.write_field("phi-cr", f)
            self.write_field("phi-cr", cf.map(np.real, f"dzbar_{f.label}"))

    def check_beta(self, rec: CheckRecord):
        if self.codim != 2 or self.minimal:
            raise Skip("the ratio phi(H')/phi(H) needs a rank-2 normal bundle and H != 0")
        b = self.reduction.beta
        rec.details["beta"] = b.as_dict()
        # the orientation of the normal plane fixes the sign of H' and hence of beta
        rec.details["beta_by_orientation"] = {"+1": b.beta, "-1": -b.beta}
        if b.phi_h_vanishes:
            rec.notes.append("phi(H) vanishes identically")
            rec.criterion("reality_defect", 0.0, self.cfg.tol("beta_reality"))
        else:
            rec.criterion("reality_defect", b.defect, self.cfg.tol("beta_reality"))

    def _boundary_reduced_normal(self, bs):
        pk = bs.packet
        if self.codim == 1:
            return reduced_normal(pk.normals, sf=self.sf)
        if self.codim != 2 or self.minimal:
            raise Skip("boundary reality is checked for surfaces in 3-dimensional containers")
        cert = self.reduction
        if not cert.direction.accepted:
            raise ContractError(f"reduction unavailable: {cert.direction.reason}")
        H = pk.H
        hn = np.sqrt(np.abs(_pair(H, H, self.sf)))[..., None]
        Hp = hprime(H, pk.normals, sf=self.sf)
        eta = cert.direction.a * H / hn + cert.direction.b * Hp / hn
        return reduced_normal(pk.normals, eta, self.sf)

    def check_quartic_reality(self, rec: CheckRecord):
        worst_q = worst_a = 0.0
        rows = []
        for bs in self.boundary:
            ok = ~bs.frames.branch
            n_p = self._boundary_reduced_normal(bs)
            tau, nu = boundary_frames(bs.jets, bs.frames, bs.outward, self.sf)
            phinp = phi(bs.packet, n_p, self.sf)
            atn = a_tau_nu(bs.packet, bs.frames, tau, nu, n_p, self.sf)
            # z^4 Q with z normalised to the unit circle of this component
            zu = bs.z / bs.component.radius
            q, a = boundary_reality(zu[ok], phinp[ok], atn[ok])
            worst_q, worst_a = max(worst_q, q), max(worst_a, a)
            qz = zu**4 * phinp**2
            rows += [
                (bs.component.name, t, z.real, z.imag, v.real, v.imag, s)
                for t, z, v, s in zip(bs.t, bs.z, qz, atn)
            ]
        rec.criterion("im_z4_Q", worst_q, self.cfg.tol("quartic_reality"))
        rec.criterion("A_tau_nu", worst_a, self.cfg.tol("a_tau_nu"))
        self.write_rows(
            "quartic-reality", "boundary", ["component", "t", "re_z", "im_z", "re_z4Q", "im_z4Q", "A_tau_nu"], rows
        )

    @cached_property
    def angles(self):
        e = self.entry
        return contact_angle_report(
            e.chart, self.sf, e.ball, self.cfg.scheme, self.cfg.boundary, boundary=self.boundary, jobs=self.jobs
        )

    def check_contact_angle(self, rec: CheckRecord):
        rep = self.angles
        rec.criterion("angle_constancy", rep.theta_max_dev, self.cfg.tol("angle_constancy"))
        rec.criterion("free_boundary", rep.free_boundary_max_dist, self.cfg.tol("free_boundary"))
        exp = self._expected("sin_theta")
        sins = np.concatenate([c.sin for c in rep.components])
        if exp is not None:
            key = "sin_theta_analytic" if self.cfg.scheme.mode == "analytic" else "sin_theta_fd"
            rec.criterion("sin_theta_expected", np.nanmax(np.abs(sins - exp)), self.cfg.tol(key))
        d = rep.as_dict()
        for flag in d.pop("degenerate_flags"):
            if "orthogonal contact" in flag:
                rec.notes.append(flag)
            else:
                rec.flags.append(flag)
        rec.details.update(d)
        rec.excluded_fraction = float(np.mean(np.concatenate([c.excluded for c in rep.components])))
        rows = []
        for c in rep.components:
            rows += [(c.name, t, s, th) for t, s, th in zip(c.t, c.sin, c.theta)]
        self.write_rows("contact-angle", "boundary", ["component", "t", "sin_theta", "theta"], rows)

    def check_conversion(self, rec: CheckRecord):
        geo = self.entry.geometry
        if "hyperplane_normal" not in geo:
            raise Skip("no container hyperplane recorded for this chart")
        xi = np.asarray(geo["hyperplane_normal"], dtype=float)
        offset = float(geo.get("offset", 0.0))
        ball, sf = self.entry.ball, self.sf
        worst = worst_t = 0.0
        sins_m = []
        for comp, bs in zip(self.angles.components, self.boundary):
            ok = ~bs.frames.branch
            y = bs.jets.u[ok]
            tau, nu = boundary_frames(bs.jets, bs.frames, bs.outward, sf)
            # centre of the sphere cut out of the ball boundary by M = {<y, xi> = offset}
            o = ball.center + (offset - _pair(ball.center, xi, sf)) * xi
            n_m = (y - o) / np.linalg.norm(y - o, axis=-1, keepdims=True)
            direct = _pair(nu[ok], n_m, sf)
            n = (y - ball.center) / np.linalg.norm(y - ball.center, axis=-1, keepdims=True)
            converted = angle_conversion(comp.sin[ok], _pair(n, xi, sf))
            worst = max(worst, float(np.max(np.abs(direct - converted))))
            worst_t = max(worst_t, float(np.max(np.abs(_pair(nu[ok], xi, sf)))))
            sins_m.append(direct)
        rec.criterion("direct_vs_converted", worst, self.cfg.tol("conversion"))
        rec.criterion("conormal_in_M", worst_t, self.cfg.tol("conversion"))
        s_m = np.concatenate(sins_m)
        rec.details["sin_theta_M_mean"] = float(np.mean(s_m))
        exp = self._expected("sin_theta_M")
        if exp is not None:
            rec.criterion("sin_theta_M_expected", np.max(np.abs(s_m - exp)), self.cfg.tol("conversion"))

    def check_reduction(self, rec: CheckRecord):
        if self.minimal:
            raise Skip("H vanishes: the umbilic-direction search needs H != 0")
        cert = self.reduction
        rec.details.update(cert.as_dict())
        d = cert.direction
        tol = self.cfg.tol
        if not d.accepted:
            rec.notes.append(d.reason)
            rec.criterion("beta_reality", cert.beta.defect if cert.beta else math.inf, tol("beta_reality"))
            return
        rec.criterion("umbilic", d.residual, tol("umbilic"))
        rec.criterion("lambda_std", d.lam_std, tol("lambda_std"))
        c = cert.container
        rec.criterion("container_constancy", c.defect, tol("container_constancy"))
        if math.isfinite(c.radius_defect):
            rec.criterion("radius_identity", c.radius_defect, tol("radius_identity"))
        if math.isfinite(c.section_defect):
            rec.criterion("section_identity", c.section_defect, tol("radius_identity"))
        if math.isfinite(c.fitted_curvature):
            rec.criterion("curvature_bookkeeping", abs(c.curvature - c.fitted_curvature), tol("curvature_bookkeeping"))
        rec.notes.extend(c.notes)
        exp_l = self._expected("lambda")
        if exp_l is not None:
            rec.criterion("lambda_expected", abs(abs(d.lam) - exp_l), tol("expected"))
        exp_k = self._expected("container_kind")
        if exp_k is not None:
            rec.criterion("container_kind_expected", 0.0 if c.kind == exp_k else 1.0, 0.0)
        exp_c = self._expected("container_center")
        if exp_c is not None and c.kind == "round-sphere" and self.sf.curvature == 0:
            rec.criterion(
                "container_center_expected", float(np.max(np.abs(c.vector - np.asarray(exp_c)))), tol("expected")
            )
        if self.codim >= 2:
            st = red.gamma_strata(self.grid.packet, self.grid.valid & (self.h_norm > H_ZERO), self.sf)
            rec.details["strata"] = {
                "fraction_M1": st.fraction_m1,
                "sigma2_sup": float(np.nanmax(st.sigma2)) if np.any(np.isfinite(st.sigma2)) else 0.0,
                "xi4_continuity_defect": st.continuity_defect,
            }
            if st.mixed:
                rec.flags.append("mixed M0/M1 strata")
            g = self.grid
            v = g.valid & (self.h_norm > H_ZERO)
            vecs = [g.frames.e1[v], g.frames.e2[v], (g.packet.H / self.h_norm[..., None])[v]]
            if st.fraction_m1 > 0:
                vecs.append(st.xi4[v & st.m1])
            w_rank, w_gap, _ = red.w_span_rank(g.jets.u[v], vecs, self.sf)
            rec.details["W_rank"] = w_rank
            exp_w = self._expected("W_rank")
            if exp_w is not None:
                rec.criterion("W_rank_expected", abs(w_rank - exp_w), 0.0)

    def check_fullness(self, rec: CheckRecord):
        g = self.grid
        pts = g.jets.u[g.valid]
        rank, gap, sv = red.linear_fullness(pts, "affine")
        rec.details["affine_rank"] = rank
        rec.details["sv_gap"] = gap
        rec.details["linear_rank"] = red.linear_fullness(pts, "linear")[0]
        fit = red.sphere_noncontainment(pts)
        rec.details["sphere_fit"] = fit.as_dict()
        exp = self._expected("fullness_rank")
        if exp is not None:
            rec.criterion("rank_expected", abs(rank - exp), 0.0)
        else:
            rec.notes.append("no expected rank for this chart; rank reported only")
        rec.excluded_fraction = g.excluded_fraction

    # -- driver ---------------------------------------------------------------
    def run(self) -> tuple[dict, int]:
        cfg = self.cfg
        cfg.out_dir.mkdir(parents=True, exist_ok=True)
        records = []
        errored = False
        for name in cfg.checks:
            rec = CheckRecord(name)
            fn = getattr(self, "check_" + name.replace("-", "_"))
            try:
                fn(rec)
            except Skip as exc:
                rec.status = "skipped"
                rec.notes.append(str(exc))
            except (GeometryError, ContractError, InconsistencyError, InsufficientDataError) as exc:
                rec.status = "error"
                rec.notes.append(f"{type(exc).__name__}: {exc}")
                errored = True
            records.append(rec.finalize())
        active = [r for r in records if r.status != "skipped"]
        if errored:
            code = 3
        elif all(r.status == "pass" for r in active):
            code = 0
        else:
            code = 1
        report = {
            "checks": [r.as_dict() for r in records],
            "summary": {
                "exit_code": code,
                "passed": sum(r.status == "pass" for r in records),
                "failed": sum(r.status == "fail" for r in records),
                "flagged": sum(r.status == "flagged" for r in records),
                "skipped": sum(r.status == "skipped" for r in records),
                "errors": [r.name for r in records if r.status == "error"],
            },
            "chart": self.entry.describe(),
            "provenance": {
                "config": cfg.echo,
                "gauge": FrameData.gauge_description(),
                "scheme": cfg.scheme.describe(),
                "grid": {"interior": cfg.interior, "boundary": cfg.boundary},
                "tolerances": cfg.tolerances,
                "version": _version(),
            },
            "artifacts": sorted(self.artifacts),
        }
        if "grid" in self.__dict__ and self.grid.branch_points:
            g = self.grid
            report["provenance"]["branch_exclusion"] = {
                "points": [[p.real, p.imag] for p in g.branch_points],
                "radius": g.exclusion_radius,
                "excluded_fraction": g.excluded_fraction,
                "note": "frames are not extended across branch points; their neighbourhoods are excluded",
            }
        return report, code


def run(cfg: RunConfig, jobs: int = 1, timestamp: str | None = None) -> tuple[dict, int]:
    """Run all configured checks and write ``report.json`` plus CSV grids to ``cfg.out_dir``."""
    runner = Runner(cfg, jobs)
    report, code = runner.run()
    report["timestamp"] = timestamp
    Path(cfg.out_dir, "report.json").write_text(dump_report(report), encoding="utf-8")
    return report, code
