import csv
import math
import subprocess
import sys

import numpy as np
import pytest

from gaussdyn import cli
from gaussdyn.config import from_mapping, parse_assignments, parse_text
from gaussdyn.errors import ConfigError
from gaussdyn.runner import events_path_for, fmt, scenario_mapping

REF = """\
# thermal-like bath, vacuum start
environment.kind = gibbs
environment.lambda = 0.2
environment.d_xx = 0.11
environment.d_xpy = 0.1
validation.complete_positivity = false
"""


def write(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


def read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


class TestConfigParsing:
    def test_comments_and_whitespace(self):
        assert parse_text("a.b = 1  # note\n\n  # only comment\nc=2") == {"a.b": "1", "c": "2"}

    def test_missing_equals(self):
        with pytest.raises(ConfigError, match="line 2"):
            parse_text("a = 1\nnonsense\n")

    def test_assignments(self):
        assert parse_assignments(["D=0.3", "time.t_max = 5"]) == {"D": "0.3", "time.t_max": "5"}
        with pytest.raises(ConfigError):
            parse_assignments(["D"])

    def test_reference_config(self):
        cfg = from_mapping(parse_text(REF))
        env = cfg.environment()
        assert cfg.mode == "single" and not cfg.has_time
        assert (env.d_pxpx, env.d_ypx, env.d_yy) == (0.11, 0.1, 0.11)
        assert cfg.initial_label == "vacuum"

    @pytest.mark.parametrize("extra, message", [
        ("environment.colour = red", "unknown config keys"),
        ("environment.d_pxpx = 0.2", "does not take"),
        ("environment.kind = weird", "environment.kind"),
        ("sweep.param = environment.d_pxpx\nsweep.lo=0\nsweep.hi=1\nsweep.n_points=3",
         "not sweepable"),
        ("sweep.param = time.t_max\nsweep.lo=0\nsweep.hi=1\nsweep.n_points=3", "not sweepable"),
        ("sweep.lo = 0", "without sweep.param"),
        ("sweep.param = environment.d_xpy\nsweep.lo=0\nsweep.hi=1\nsweep.n_points=-1",
         "non-negative"),
        ("sweep.param = environment.d_xpy\nsweep.lo=0\nsweep.hi=1\nsweep.n_points=3\n"
         "sweep.outputs = classification", "time.t_max"),
        ("sweep.param = environment.d_xpy\nsweep.lo=0\nsweep.hi=1\nsweep.n_points=3\n"
         "sweep.outputs = colour", "unknown sweep outputs"),
        ("initial.preset = squeezed", "initial.preset"),
        ("initial.preset = vacuum\ninitial.xx = 1", "not both"),
        ("time.t_max = -1", "positive"),
        ("oscillator.m = 0", "oscillator"),
        ("environment.d_xx = nan", "finite"),
        ("output.format = json", "csv"),
        ("validation.complete_positivity = maybe", "boolean"),
    ])
    def test_rejections(self, extra, message):
        mapping = parse_text(REF + extra + "\n")
        with pytest.raises(ConfigError, match=message):
            from_mapping(mapping)

    def test_missing_lambda(self):
        with pytest.raises(ConfigError, match="environment.lambda"):
            from_mapping({"environment.kind": "gibbs"})

    def test_custom_initial_entries(self):
        cfg = from_mapping(parse_text(REF + "initial.xx = 1\ninitial.pxpx = 0.5\n"
                                            "initial.yy = 1\ninitial.pypy = 0.5\n"))
        assert cfg.initial_label == "custom"
        np.testing.assert_array_equal(np.diag(cfg.initial.entries), [1, 0.5, 1, 0.5])

    def test_two_dimensional_sweep(self):
        cfg = from_mapping(parse_text(REF + "sweep.param = environment.d_xx\nsweep.lo = 0.1\n"
                                            "sweep.hi = 0.2\nsweep.n_points = 2\n"
                                            "sweep.param2 = environment.d_xpy\nsweep.lo2 = 0\n"
                                            "sweep.hi2 = 0.1\nsweep.n_points2 = 3\n"))
        assert cfg.mode == "sweep-2d"
        assert [a.param for a in cfg.sweep] == ["environment.d_xx", "environment.d_xpy"]


class TestFormatting:
    def test_twelve_significant_digits(self):
        assert fmt(1 / 3) == "0.333333333333"
        assert fmt(True) == "1" and fmt(False) == "0"
        assert fmt(math.nan) == "nan"

    def test_events_path(self, tmp_path):
        assert events_path_for(tmp_path / "fig2.csv").name == "fig2_events.csv"


class TestRunCommand:
    def test_reference_report(self, tmp_path, capsys):
        assert cli.main(["run", "--config", write(tmp_path, REF)]) == 0
        out = capsys.readouterr().out
        assert "E(inf) = 0.145790674405" in out
        assert "S(inf) = -0.0077762943787" in out
        assert "S(0) = 0 (separable)" in out

    def test_trace_csv(self, tmp_path, capsys):
        cfg = write(tmp_path, REF + "time.t_max = 10\ntime.n_samples = 11\n")
        out_csv = tmp_path / "trace.csv"
        assert cli.main(["run", "--config", cfg, "--out", str(out_csv)]) == 0
        rows = read_rows(out_csv)
        assert rows[0] == ["t", "S", "E", "nu_tilde_minus", "entangled"]
        assert len(rows) == 12
        assert "classification:" in capsys.readouterr().out

    def test_unphysical_initial_state(self, tmp_path, capsys):
        cfg = write(tmp_path, REF + "initial.preset = entangled\n")
        assert cli.main(["run", "--config", cfg]) == cli.EXIT_UNPHYSICAL
        assert "nu_-" in capsys.readouterr().err
        assert cli.main(["run", "--config", cfg, "--allow-unphysical"]) == cli.EXIT_OK

    def test_environment_violation(self, tmp_path, capsys):
        cfg = write(tmp_path, REF.replace("environment.lambda = 0.2", "environment.lambda = 0"))
        assert cli.main(["run", "--config", cfg]) == cli.EXIT_ENVIRONMENT
        assert "lambda" in capsys.readouterr().err

    def test_complete_positivity_default_rejects_reference(self, tmp_path, capsys):
        cfg = write(tmp_path, REF.replace("validation.complete_positivity = false\n", ""))
        assert cli.main(["run", "--config", cfg]) == cli.EXIT_ENVIRONMENT
        assert "complete_positivity" in capsys.readouterr().err

    def test_config_error(self, tmp_path, capsys):
        cfg = write(tmp_path, REF + "bogus = 1\n")
        assert cli.main(["run", "--config", cfg]) == cli.EXIT_CONFIG
        assert "bogus" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert cli.main(["run", "--config", str(tmp_path / "nope.cfg")]) == cli.EXIT_CONFIG

    def test_argparse_errors_use_config_code(self, capsys):
        with pytest.raises(SystemExit) as exc:
            cli.main(["scenario", "fig9", "--out", "x.csv"])
        assert exc.value.code == cli.EXIT_CONFIG

    def test_sweep_config_refused(self, tmp_path):
        cfg = write(tmp_path, REF + "sweep.param = environment.d_xpy\nsweep.lo = 0\n"
                                    "sweep.hi = 1\nsweep.n_points = 2\n")
        assert cli.main(["run", "--config", cfg]) == cli.EXIT_CONFIG


SWEEP = REF + """\
sweep.param = environment.d_xpy
sweep.lo = 0
sweep.hi = 1.2
sweep.n_points = 41
"""


class TestSweepCommand:
    def test_interval_sign_flips(self, tmp_path):
        out = tmp_path / "sweep.csv"
        assert cli.main(["sweep", "--config", write(tmp_path, SWEEP), "--out", str(out)]) == 0
        rows = read_rows(out)
        assert rows[0] == ["environment.d_xpy", "valid", "S_infinity", "E_infinity"]
        d = np.array([float(r[0]) for r in rows[1:]])
        e = np.array([float(r[3]) for r in rows[1:]])
        lo, hi = 0.050990, 1.070794
        positive = e > 0
        assert np.array_equal(positive, (d > lo) & (d < hi))
        # the flips straddle the endpoints within one grid cell
        flips = np.flatnonzero(positive[1:] != positive[:-1])
        assert len(flips) == 2
        assert d[flips[0]] < lo < d[flips[0] + 1]
        assert d[flips[1]] < hi < d[flips[1] + 1]

    def test_invalid_points_are_flagged_not_dropped(self, tmp_path):
        out = tmp_path / "sweep.csv"
        cli.main(["sweep", "--config", write(tmp_path, SWEEP), "--out", str(out)])
        rows = read_rows(out)[1:]
        assert len(rows) == 41
        for r in rows:
            # pairwise constraints: d_xx >= |d_xpy|
            assert r[1] == ("1" if float(r[0]) <= 0.11 else "0")

    def test_zero_points_gives_header_only(self, tmp_path):
        out = tmp_path / "empty.csv"
        cfg = write(tmp_path, SWEEP.replace("sweep.n_points = 41", "sweep.n_points = 0"))
        assert cli.main(["sweep", "--config", cfg, "--out", str(out)]) == 0
        assert out.read_bytes() == b"environment.d_xpy,valid,S_infinity,E_infinity\n"

    def test_jobs_do_not_change_bytes(self, tmp_path):
        text = SWEEP + ("time.t_max = 40\ntime.n_samples = 400\n"
                        "sweep.outputs = S_infinity,E_infinity,classification,crossings\n")
        cfg = write(tmp_path, text)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert cli.main(["sweep", "--config", cfg, "--jobs", "1", "--out", str(a)]) == 0
        assert cli.main(["sweep", "--config", cfg, "--jobs", "3", "--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()
        assert "classification" in a.read_text().splitlines()[0]

    def test_needs_sweep_block(self, tmp_path):
        assert cli.main(["sweep", "--config", write(tmp_path, REF), "--out", "x.csv"]) == 2

    def test_bad_jobs(self, tmp_path, monkeypatch):
        monkeypatch.setenv("GAUSSDYN_JOBS", "many")
        assert cli.main(["sweep", "--config", write(tmp_path, SWEEP), "--out",
                         str(tmp_path / "x.csv")]) == cli.EXIT_CONFIG
        monkeypatch.delenv("GAUSSDYN_JOBS")
        assert cli.main(["sweep", "--config", write(tmp_path, SWEEP), "--jobs", "0",
                         "--out", str(tmp_path / "x.csv")]) == cli.EXIT_CONFIG


class TestScenarios:
    def test_mapping_shorthand(self):
        m = scenario_mapping("fig2", {"D": "0.3", "d": "0.1"})
        assert m["environment.d_xx"] == m["environment.d_pxpx"] == "0.3"
        assert (m["sweep.lo"], m["sweep.hi"], m["sweep.n_points"]) == ("0.1", "0.1", "1")
        assert float(m["time.t_max"]) == pytest.approx(40.0)
        with pytest.raises(ConfigError):
            scenario_mapping("fig1", {"d": "0.1"})

    def test_fig2_zero_coupling_stays_separable(self, tmp_path):
        out = tmp_path / "fig2.csv"
        assert cli.main(["scenario", "fig2", "--set", "d=0", "--out", str(out)]) == 0
        rows = read_rows(out)
        assert rows[0] == ["t", "d", "S", "E", "nu_tilde_minus", "entangled"]
        assert len(rows) == 2001
        assert all(float(r[2]) > 0 and r[5] == "0" for r in rows[1:])
        events = read_rows(events_path_for(out))
        assert events[1][2] == "separable-throughout"

    def test_fig3_strong_coupling_entangled_throughout(self, tmp_path, capsys):
        out = tmp_path / "fig3.csv"
        assert cli.main(["scenario", "fig3", "--set", "d=-0.4", "--out", str(out)]) == 0
        events = read_rows(events_path_for(out))
        assert events[0][2] == "classification"
        assert events[1][2] == "entangled-throughout"
        assert "unphysical" in capsys.readouterr().err

    def test_fig2_full_family(self, tmp_path):
        out = tmp_path / "fig2.csv"
        assert cli.main(["scenario", "fig2", "--out", str(out), "--jobs", "2"]) == 0
        classes = {r[2] for r in read_rows(events_path_for(out))[1:]}
        assert {"separable-throughout", "temporary-generation", "generation"} <= classes

    def test_fig1_positive_inside_band(self, tmp_path):
        out = tmp_path / "fig1.csv"
        assert cli.main(["scenario", "fig1", "--out", str(out)]) == 0
        rows = read_rows(out)
        assert rows[0] == ["D", "d", "E_infinity", "S_infinity", "physical"]
        assert len(rows) == 1 + 51 * 61
        root = math.sqrt(0.04 + 1)
        for r in rows[1:]:
            big, d, e = float(r[0]), float(r[1]), float(r[2])
            assert r[4] == ("1" if big >= d else "0")
            lo, hi = root * (big / 0.2 - 0.5), root * (big / 0.2 + 0.5)
            if min(abs(d - lo), abs(d - hi)) < 1e-9:
                continue
            assert (e > 0) == (lo < d < hi)

    def test_invalid_override(self, tmp_path, capsys):
        code = cli.main(["scenario", "fig2", "--set", "D=0.1", "--out", str(tmp_path / "x.csv")])
        assert code == cli.EXIT_ENVIRONMENT
        assert "x_px" in capsys.readouterr().err

    def test_unknown_override_key(self, tmp_path):
        code = cli.main(["scenario", "fig2", "--set", "colour=red",
                         "--out", str(tmp_path / "x.csv")])
        assert code == cli.EXIT_CONFIG


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "gaussdyn.cli", "run", "--config",
                           write(tmp_path, REF)], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "E(inf)" in proc.stdout
