import json
import math
import subprocess
import sys
import textwrap

import pytest

from pmcverify.cli import main
from pmcverify.config import ALL_CHECKS, DEFAULT_TOLERANCES, load_config, parse_config
from pmcverify.errors import InputError
from pmcverify.runner import report_body

R4 = """
[chart]
gallery = "r4"
params = { a = 0.6, b = 0.8 }

[grid]
interior = 32
boundary = 128
"""

NONCONFORMAL = """
checks = ["conformality"]

[chart]
components = ["x", "2*y", "0", "0"]
[chart.domain]
kind = "disk"
radius = 1.0

[space_form]
curvature = 0.0
dim = 4

[ball]
center = [0.0, 0.0, 0.0, 0.0]
radius = 2.0

[grid]
interior = 16
boundary = 64
"""

OFF_SPHERE = """
checks = ["contact-angle"]

[chart]
components = ["1.01*x", "1.01*y", "0", "0"]
[chart.domain]
kind = "disk"

[space_form]
dim = 4

[ball]
center = [0.0, 0.0, 0.0, 0.0]
radius = 1.0

[grid]
interior = 16
boundary = 64
"""


def write(tmp_path, text, name="run.toml"):
    p = tmp_path / name
    p.write_text(textwrap.dedent(text))
    return p


def spawn(*args):
    return subprocess.run([sys.executable, "-m", "pmcverify", *map(str, args)], capture_output=True, text=True,
                          timeout=300)


class TestExitCodes:
    def test_r4_all_checks_pass(self, tmp_path):
        out = tmp_path / "out"
        proc = spawn("run", write(tmp_path, R4), "--out", out)
        assert proc.returncode == 0, proc.stdout + proc.stderr
        report = json.loads((out / "report.json").read_text())
        assert report["summary"]["exit_code"] == 0
        ca = next(c for c in report["checks"] if c["name"] == "contact-angle")
        assert ca["status"] == "pass"
        assert ca["details"]["sin_theta_mean"] == pytest.approx(1.64 / math.sqrt(2.92), abs=1e-9)
        for line in ALL_CHECKS:
            assert line in proc.stdout

    def test_veronese_contact_angle(self, tmp_path):
        cfg = write(tmp_path, """
            checks = ["contact-angle"]
            [chart]
            gallery = "veronese"
            params = { phi0 = 1.0471975511965976 }
        """)
        proc = spawn("run", cfg, "--out", tmp_path / "o")
        assert proc.returncode == 0, proc.stderr
        report = json.loads((tmp_path / "o" / "report.json").read_text())
        assert report["checks"][0]["details"]["sin_theta_mean"] == pytest.approx(0.755929, abs=5e-7)

    def test_nonconformal_fails(self, tmp_path):
        proc = spawn("run", write(tmp_path, NONCONFORMAL), "--out", tmp_path / "o")
        assert proc.returncode == 1
        assert "conformality" in proc.stdout and "fail" in proc.stdout

    def test_bad_config_exit_2(self, tmp_path):
        assert spawn("run", write(tmp_path, "[chart\n")).returncode == 2
        assert spawn("run", tmp_path / "missing.toml").returncode == 2
        proc = spawn("run", write(tmp_path, R4 + "\nbogus = 1\n", "b.toml"), "--out", tmp_path / "o")
        assert proc.returncode == 2 and "bogus" in proc.stderr

    def test_contract_error_exit_3(self, tmp_path):
        proc = spawn("run", write(tmp_path, OFF_SPHERE), "--out", tmp_path / "o")
        assert proc.returncode == 3
        report = json.loads((tmp_path / "o" / "report.json").read_text())
        assert report["checks"][0]["status"] == "error"

    def test_console_script(self, tmp_path):
        proc = subprocess.run(["pmcverify", "list-gallery"], capture_output=True, text=True)
        assert proc.returncode == 0 and "r4" in proc.stdout


class TestDeterminism:
    def test_byte_identical_bodies(self, tmp_path):
        cfg = write(tmp_path, R4)
        assert main(["run", str(cfg), "--out", str(tmp_path / "a")]) == 0
        assert main(["run", str(cfg), "--out", str(tmp_path / "b"), "--jobs", "3"]) == 0
        a = (tmp_path / "a" / "report.json").read_text()
        b = (tmp_path / "b" / "report.json").read_text()
        assert report_body(a) == report_body(b)
        for csv_a in sorted((tmp_path / "a").glob("*.csv")):
            assert csv_a.read_bytes() == (tmp_path / "b" / csv_a.name).read_bytes()

    def test_csv_format(self, tmp_path):
        assert main(["run", str(write(tmp_path, R4)), "--out", str(tmp_path / "a")]) == 0
        files = sorted((tmp_path / "a").glob("*.csv"))
        assert files
        header, first = files[0].read_text().splitlines()[:2]
        assert "," in header and not header[0].isdigit()


class TestListGallery:
    def test_contents(self, capsys):
        assert main(["list-gallery"]) == 0
        out = capsys.readouterr().out
        assert "r4" in out and "(a²+2b²)/√(a²+4b²)" in out
        assert "veronese" in out and "2cosφ₀/√(1+3cos²φ₀)" in out

    def test_stable_across_processes(self):
        assert spawn("list-gallery").stdout == spawn("list-gallery").stdout


class TestConfig:
    def base(self):
        return {"chart": {"gallery": "r4", "params": {"a": 0.6, "b": 0.8}}}

    def test_defaults(self):
        cfg = parse_config(self.base())
        assert cfg.interior == 64 and cfg.boundary == 256
        assert cfg.checks == ALL_CHECKS
        assert cfg.tolerances == DEFAULT_TOLERANCES

    def test_checks_reordered(self):
        d = self.base()
        d["checks"] = ["fullness", "conformality"]
        assert parse_config(d).checks == ("conformality", "fullness")

    def test_tol_scale_only_defaults(self):
        d = self.base()
        d["tolerances"] = {"pmc": 1e-3}
        cfg = parse_config(d, tol_scale=10)
        assert cfg.tol("pmc") == 1e-3
        assert cfg.tol("ricci") == pytest.approx(10 * DEFAULT_TOLERANCES["ricci"])

    @pytest.mark.parametrize(
        "patch",
        [
            {"grid": {"interior": 8}},
            {"grid": {"boundary": 32}},
            {"checks": ["nope"]},
            {"tolerances": {"nope": 1.0}},
            {"tolerances": {"pmc": "small"}},
            {"scheme": {"mode": "spectral"}},
            {"space_form": {"dim": 3}},
            {"branch_points": [[0.1]]},
        ],
    )
    def test_rejects(self, patch):
        d = self.base()
        d.update(patch)
        with pytest.raises(InputError):
            parse_config(d)

    def test_bad_tol_scale(self):
        with pytest.raises(InputError):
            parse_config(self.base(), tol_scale=0.0)

    def test_inline_needs_space_form(self):
        with pytest.raises(InputError):
            parse_config({"chart": {"components": ["x", "y", "0"]}})

    def test_inline_dimension_mismatch(self):
        d = {
            "chart": {"components": ["x", "y", "0"]},
            "space_form": {"dim": 3},
            "ball": {"center": [0, 0, 0, 0]},
        }
        with pytest.raises(InputError):
            parse_config(d)

    def test_load(self, tmp_path):
        cfg = load_config(write(tmp_path, NONCONFORMAL), out_override=tmp_path / "x")
        assert cfg.out_dir == tmp_path / "x"
        assert cfg.entry.sf.ambient_dim == 4

    def test_unknown_top_level_key(self):
        d = self.base()
        d["extra"] = 1
        with pytest.raises(InputError):
            parse_config(d)


def test_branch_exclusion_recorded(tmp_path):
    cfg = write(tmp_path, """
        checks = ["conformality"]
        [chart]
        complex_components = ["z**2/2", "z**3/3"]
        [chart.domain]
        kind = "disk"
        [space_form]
        dim = 4
        [ball]
        center = [0.0, 0.0, 0.0, 0.0]
        radius = 2.0
        [grid]
        interior = 33
    """)
    assert main(["run", str(cfg), "--out", str(tmp_path / "o")]) == 0
    report = json.loads((tmp_path / "o" / "report.json").read_text())
    assert report["provenance"]["branch_exclusion"]["points"] == [[0.0, 0.0]]


def test_beta_reported_for_both_orientations(tmp_path):
    cfg = write(tmp_path, """
        checks = ["beta"]
        [chart]
        gallery = "cmc_cap"
        params = { r = 1.2, tilt = 0.3 }
    """)
    assert main(["run", str(cfg), "--out", str(tmp_path / "o")]) == 0
    report = json.loads((tmp_path / "o" / "report.json").read_text())
    assert set(report["checks"][0]["details"]["beta_by_orientation"]) == {"+1", "-1"}
