import json

import numpy as np
import pytest

from sadic import lab


def _rows(R, amp, omega=1.0):
    return [(omega, r, a, 0.0, a, 0.0) for r, a in zip(R, amp)]


@pytest.mark.parametrize("spec,expected", [
    ("0.5", [0.5]),
    ("1,2,3", [1, 2, 3]),
    ("0:1:0.25", [0, 0.25, 0.5, 0.75, 1]),
    ("log:1:100:3", [1, 10, 100]),
    ([2, 4], [2, 4]),
    (7, [7]),
])
def test_parse_grid(spec, expected):
    assert lab.parse_grid("omega_grid", spec) == pytest.approx(expected)


@pytest.mark.parametrize("bad", ["0.1:0", "a,b", "log:0:1:3", "1:2", "", "0:1:0"])
def test_parse_grid_errors_name_field(bad):
    with pytest.raises(lab.ConfigError, match="^R_grid:"):
        lab.parse_grid("R_grid", bad)


def test_malformed_grid_rejected_at_load():
    with pytest.raises(lab.ConfigError, match="omega_grid"):
        lab.ExperimentConfig.load("spectral", overrides={"omega_grid": "0.1:0"})


def test_seed_mandatory_for_stochastic_modes():
    with pytest.raises(lab.ConfigError, match="seed"):
        lab.ExperimentConfig.load("lyapunov", overrides={"seq": "iid:12,1|1,2"})
    with pytest.raises(lab.ConfigError, match="seed"):
        lab.ExperimentConfig.load("spectral", overrides={"roof": "random"})
    lab.ExperimentConfig.load("lyapunov", overrides={"seq": "iid:12,1|1,2", "seed": 3})


def test_toml_layering(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text('N = 50\nvarrho = 0.2\nseq = "fib"\n[veech]\nN = 70\nomega = 1.5\n')
    cfg = lab.ExperimentConfig.load("veech", str(p), {"omega": 0.9})
    assert (cfg.N, cfg.varrho, cfg.omega) == (70, 0.2, 0.9)
    cfg2 = lab.ExperimentConfig.load("cocycle", str(p))
    assert cfg2.N == 50
    p.write_text("bogus = 1\n")
    with pytest.raises(lab.ConfigError, match="unknown"):
        lab.ExperimentConfig.load("veech", str(p))


def test_digest_ignores_workers_and_out_dir():
    a = lab.ExperimentConfig.load("cocycle", overrides={"workers": 1, "out_dir": "x"})
    b = lab.ExperimentConfig.load("cocycle", overrides={"workers": 4, "out_dir": "y"})
    c = lab.ExperimentConfig.load("cocycle", overrides={"N": 3})
    assert a.digest() == b.digest() != c.digest()


def test_csv_carries_header_and_manifest_ref():
    text = lab.csv_text(("a", "b"), [(1, 0.1), (2, np.float64(1e-20))], "manifest.json")
    lines = text.splitlines()
    assert lines[0] == "a,b" and lines[1] == "1,0.1" and lines[2] == "2,1e-20"
    assert lines[-1].startswith("# manifest:")


def test_fit_exact_linear():
    R = np.geomspace(10, 1e4, 10)
    (h,) = lab.fit_holder(_rows(R, 3 * R))
    assert h.alpha == pytest.approx(1.0, abs=1e-12)
    assert h.gamma == pytest.approx(0.0, abs=1e-12)


def test_fit_exact_power():
    R = np.geomspace(10, 1e4, 10)
    (h,) = lab.fit_holder(_rows(R, R ** 0.8))
    assert h.alpha == pytest.approx(0.8, abs=1e-12)
    assert h.gamma == pytest.approx(0.4, abs=1e-12)
    assert h.residual_rms < 1e-12 and h.n_used == 5


def test_fit_noisy_power_law():
    # 20 dB per point: the noise amplitude is a tenth of the signal
    rng = np.random.default_rng(2024)
    R = np.geomspace(1e2, 1e6, 64)
    errs = []
    for trial in range(20):
        amp = R ** 0.7 * (1 + 0.1 * rng.standard_normal(R.size))
        (h,) = lab.fit_holder(_rows(R, amp))
        errs.append(abs(h.alpha - 0.7))
    assert max(errs) < 0.03


def test_fit_groups_by_omega_and_reads_csv(tmp_path):
    R = np.geomspace(10, 1e3, 6)
    rows = _rows(R, R ** 0.5, 2.0) + _rows(R, R, 1.0)
    p = tmp_path / "s.csv"
    p.write_text(lab.csv_text(lab.SPECTRAL_HEADER, rows, "m"))
    fits = lab.fit_holder(str(p))
    assert [f.omega for f in fits] == [1.0, 2.0]
    assert [round(f.alpha, 9) for f in fits] == [1.0, 0.5]


def test_fit_degenerate():
    with pytest.raises(lab.ConfigError, match="degenerate"):
        lab.fit_holder(_rows([10, 10, 20], [1, 2, 3]))


def _run(tmp_path, name, **kw):
    cfg = lab.ExperimentConfig.load(kw.pop("command"), overrides={"out_dir": str(tmp_path / name), **kw})
    man = lab.run_experiment(cfg)
    return man, tmp_path / name


SPEC_RUN = dict(command="spectral", omega_grid="0.7,1.3", R_grid="log:20:200:4", n_points=8, seed=1)


def test_spectral_schema_and_manifest(tmp_path):
    man, d = _run(tmp_path, "a", **SPEC_RUN)
    lines = (d / "spectral.csv").read_text().splitlines()
    assert lines[0] == "omega,R,re,im,abs,alpha_fit"
    assert len(lines) == 1 + 2 * 4 + 1
    m = json.loads((d / "manifest.json").read_text())
    assert m["status"] == {"spectral": "ok"} and m["config_hash"] == man.config_hash
    assert set(m["outputs"]) >= {"spectral.csv", "fit.csv"}


def test_identical_configs_give_identical_bytes(tmp_path):
    _, a = _run(tmp_path, "a", **SPEC_RUN)
    _, b = _run(tmp_path, "b", **SPEC_RUN, workers=2)
    for name in ("spectral.csv", "fit.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_svg_output(tmp_path):
    _, d = _run(tmp_path, "a", **SPEC_RUN, svg=True)
    svg = (d / "spectral.svg").read_text()
    assert svg.startswith("<svg") and svg.count("<polyline") == 2


def test_budget_exceeded_recorded(tmp_path):
    cfg = lab.ExperimentConfig.load("ek-count", overrides={"out_dir": str(tmp_path), "N": 20, "delta": 0.2,
                                                           "branch_budget": 50})
    from sadic import veech
    with pytest.raises(veech.BudgetExceeded):
        lab.run_experiment(cfg)
    m = json.loads((tmp_path / "manifest.json").read_text())
    assert m["status"]["ek-count"].startswith("budget-exceeded")


@pytest.mark.parametrize("command,extra,output", [
    ("rauzy-class", {"perm": "2,1"}, "rauzy_class.json"),
    ("cocycle", {"N": 20}, "cocycle.csv"),
    ("lyapunov", {"N": 200, "trials": 2}, "lyapunov.csv"),
    ("birkhoff", {"R": 50.0, "n_points": 4}, "birkhoff.csv"),
    ("veech", {"N": 40, "omega_grid": "0.8,1.2"}, "density.csv"),
    ("ek-count", {"N": 10}, "ek_count.json"),
])
def test_pipelines_write_outputs(tmp_path, command, extra, output):
    man, d = _run(tmp_path, "x", command=command, **extra)
    assert output in man.outputs and (d / output).exists()
