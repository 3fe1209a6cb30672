import json

import numpy as np
import pytest

from qsvt_refine.bench_cli import (
    CSV_COLUMNS,
    ConfigError,
    ExperimentConfig,
    gen_poisson,
    main,
    run_complexity,
)
from qsvt_refine.numerics import condition_number


def write_config(tmp_path, name="cfg.json", **overrides):
    cfg = {
        "experiment": "convergence",
        "n_qubits": 3,
        "kappa": [10.0],
        "eps_l": [1e-2, 1e-3],
        "eps_target": 1e-11,
        "backend": "spectral_oracle",
        "seeds": [0, 1],
        "out": str(tmp_path / "out.csv"),
        "readout": "exact",
    }
    cfg.update(overrides)
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path, cfg


def test_gen_poisson_smallest_case():
    a, h = gen_poisson(1)
    assert h == pytest.approx(1.0 / 3.0)
    np.testing.assert_allclose(a, [[18.0, -9.0], [-9.0, 18.0]])
    np.testing.assert_allclose(a, a.T)


def test_gen_poisson_condition_growth():
    k8 = condition_number(gen_poisson(3)[0])
    k16 = condition_number(gen_poisson(4)[0])
    assert k16 > k8 > 1.0


def test_convergence_run_and_csv_shape(tmp_path):
    path, cfg = write_config(tmp_path)
    assert main(["--config", str(path)]) == 0
    lines = (tmp_path / "out.csv").read_text().splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    # one row per recorded residual: iterations + 1 per run
    runs = {}
    for line in lines[1:]:
        fields = dict(zip(CSV_COLUMNS, line.split(",")))
        runs.setdefault(fields["run_id"], []).append(int(fields["iter"]))
        assert fields["converged"] == "True"
        assert int(fields["iter"]) <= int(fields["theorem_bound"])
    assert len(runs) == 4  # 2 eps_l x 2 seeds
    for iters in runs.values():
        assert iters == list(range(len(iters)))
    meta = json.loads((tmp_path / "out.csv.meta.json").read_text())
    assert meta["config"]["experiment"] == "convergence"
    assert "log-spaced" in meta["notes"]["matrix_ensemble"]


def test_determinism_byte_identical(tmp_path):
    path, cfg = write_config(tmp_path)
    assert main(["--config", str(path)]) == 0
    first = (tmp_path / "out.csv").read_bytes()
    assert main(["--config", str(path)]) == 0
    assert (tmp_path / "out.csv").read_bytes() == first


def test_missing_and_invalid_config(tmp_path):
    assert main(["--config", str(tmp_path / "nope.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["--config", str(bad)]) == 2
    path, _ = write_config(tmp_path, experiment="weird")
    assert main(["--config", str(path)]) == 2
    assert main([]) == 2


def test_flag_overrides(tmp_path):
    path, _ = write_config(tmp_path, seeds=[0, 1, 2])
    out = tmp_path / "other.csv"
    assert main(["--config", str(path), "--out", str(out), "--seeds", "5"]) == 0
    rows = out.read_text().splitlines()[1:]
    assert all(",5," in r for r in rows)


def test_large_kappa_defaults_and_rejection(tmp_path):
    path, _ = write_config(
        tmp_path, experiment="large_kappa", kappa=[100.0, 200.0], eps_l=None,
        eps_target=1e-8, seeds=[0],
    )
    assert main(["--config", str(path)]) == 0
    rows = (tmp_path / "out.csv").read_text().splitlines()[1:]
    eps_ls = {r.split(",")[4] for r in rows}
    assert eps_ls == {repr(0.4 / 100.0), repr(0.4 / 200.0)}

    path, _ = write_config(
        tmp_path, name="bad.json", experiment="large_kappa", kappa=[100.0],
        eps_l=[0.5], eps_target=1e-8,
    )
    assert main(["--config", str(path)]) == 2  # eps_l * kappa >= 1

    path, _ = write_config(
        tmp_path, name="qsvt.json", experiment="large_kappa", kappa=[100.0],
        eps_l=None, eps_target=1e-8, backend="qsvt_full", n_qubits=4,
    )
    assert main(["--config", str(path)]) == 2


def test_qsvt_backend_qubit_guard(tmp_path):
    with pytest.raises(ConfigError, match="guarded"):
        ExperimentConfig(experiment="convergence", backend="qsvt_full", n_qubits=7)


def test_complexity_rows_and_assertions(tmp_path):
    cfg = ExperimentConfig(
        experiment="complexity", n_qubits=2, kappa=[2.0], eps_l=[0.4],
        eps_target=1e-8, backend="spectral_oracle", seeds=[0],
        out=str(tmp_path / "c.csv"),
    )
    rows, failures = run_complexity(cfg)
    assert failures == []
    measured = [r for r in rows if r["backend"] == "spectral_oracle"]
    direct = [r for r in rows if r["backend"] == "direct"]
    assert len(measured) == len(direct) > 3
    # curves coincide at eps = eps_l
    top_m = [r for r in measured if r["eps_target"] == repr(0.4)][0]
    top_d = [r for r in direct if r["eps_target"] == repr(0.4)][0]
    assert top_m["be_calls_cum"] == top_d["be_calls_cum"]
    assert top_m["samples_cum"] == top_d["samples_cum"]


def test_poisson_experiment(tmp_path):
    path, _ = write_config(
        tmp_path, experiment="poisson", n_qubits=3, eps_l=[1e-3],
        eps_target=1e-10, kappa=None,
    )
    assert main(["--config", str(path)]) == 0
    rows = (tmp_path / "out.csv").read_text().splitlines()[1:]
    kappa = float(rows[0].split(",")[3])
    assert kappa == pytest.approx(condition_number(gen_poisson(3)[0]), rel=1e-6)
