"""Command-line experiment runner.

Four experiments, one row schema, deterministic output: convergence
sweeps on random matrices, the large-condition-number regime, the
cost-crossover comparison against a single high-precision solve, and
the 1-D Poisson system. Results go to CSV (fixed column order) with a
sidecar JSON recording the config and provenance notes; identical
configs produce byte-identical files.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .invpoly import enforce_qsvt_bounds, inverse_cheb_series, make_inverse_spec
from .numerics import condition_number, random_with_condition
from .refine import (
    DivergenceError,
    contraction_check,
    iterative_refine,
    noisy_oracle_backend,
    qsvt_backend,
    samples_for_accuracy,
    spectral_oracle_backend,
)

__all__ = [
    "ExperimentConfig",
    "ConfigError",
    "gen_poisson",
    "run_convergence",
    "run_large_kappa",
    "run_complexity",
    "run_poisson",
    "main",
    "cli",
]

CSV_COLUMNS = [
    "run_id", "experiment", "n", "kappa", "eps_l", "eps_target", "backend",
    "readout", "seed", "iter", "omega", "mu", "be_calls_cum", "samples_cum",
    "converged", "theorem_bound",
]

_EXPERIMENTS = ("convergence", "large_kappa", "complexity", "poisson")
_BACKENDS = ("spectral_oracle", "noisy_oracle", "qsvt_full")
_QSVT_MAX_QUBITS = 6


class ConfigError(ValueError):
    """Invalid experiment configuration (CLI exit code 2)."""


@dataclass
class ExperimentConfig:
    experiment: str
    n_qubits: int = 4
    kappa: list = None
    eps_l: Optional[list] = None
    eps_target: float = 1e-11
    backend: str = "spectral_oracle"
    seeds: list = None
    out: str = "results.csv"
    readout: str = "exact"

    def __post_init__(self):
        if self.experiment not in _EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if self.backend not in _BACKENDS:
            raise ConfigError(f"unknown backend {self.backend!r}")
        if self.readout not in ("exact", "shot"):
            raise ConfigError(f"unknown readout mode {self.readout!r}")
        if self.n_qubits < 1:
            raise ConfigError("n_qubits must be >= 1")
        if self.backend == "qsvt_full" and self.n_qubits > _QSVT_MAX_QUBITS:
            raise ConfigError(
                f"qsvt_full simulation is guarded at n_qubits <= {_QSVT_MAX_QUBITS}"
            )
        if self.kappa is None:
            self.kappa = {"large_kappa": [100.0, 200.0, 300.0]}.get(self.experiment, [10.0])
        self.kappa = [float(k) for k in self.kappa]
        if not self.kappa:
            raise ConfigError("kappa list must be nonempty")
        if self.eps_l is not None:
            self.eps_l = [float(e) for e in self.eps_l]
            if not self.eps_l:
                raise ConfigError("eps_l list must be nonempty when given")
        if self.seeds is None:
            self.seeds = [0]
        self.seeds = [int(s) for s in self.seeds]
        if not self.seeds:
            raise ConfigError("seeds list must be nonempty")
        if not self.eps_target > 0.0:
            raise ConfigError("eps_target must be positive")

    @classmethod
    def from_json_file(cls, path: str) -> "ExperimentConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc
        known = set(cls.__dataclass_fields__)
        bad = set(raw) - known
        if bad:
            raise ConfigError(f"unknown config keys: {sorted(bad)}")
        try:
            return cls(**raw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


def gen_poisson(n_qubits: int) -> tuple[np.ndarray, float]:
    """1-D Poisson finite-difference system: (1/h^2) tridiag(-1, 2, -1)
    with N = 2^n_qubits interior points and step h = 1/(N+1)."""
    if n_qubits < 1:
        raise ValueError("n_qubits must be >= 1")
    n = 2**n_qubits
    h = 1.0 / (n + 1)
    a = 2.0 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)
    return a / h**2, h


def _rhs_vector(n: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng([seed, 0xB])
    b = rng.standard_normal(n)
    return b / np.linalg.norm(b)


def _make_backend(cfg: ExperimentConfig, a, kappa: float, eps_l: float,
                  seed: int, series=None):
    shots = samples_for_accuracy(eps_l) if cfg.readout == "shot" else None
    if cfg.backend == "spectral_oracle":
        return spectral_oracle_backend(a, eps_l, kappa=kappa, seed=seed,
                                       shots=shots, series=series)
    if cfg.backend == "noisy_oracle":
        return noisy_oracle_backend(a, eps_l, kappa=kappa, seed=seed, shots=shots)
    return qsvt_backend(a, eps_l, kappa=kappa, seed=seed, shots=shots)


def _shared_series(kappa: float, eps_l: float):
    series = inverse_cheb_series(make_inverse_spec(kappa, eps_l / kappa))
    bounded, _ = enforce_qsvt_bounds(series)
    return bounded


def _trace_rows(cfg: ExperimentConfig, experiment: str, n: int, kappa: float,
                eps_l: float, seed: int, trace, backend) -> list[dict]:
    run_id = f"{experiment}-n{n}-k{kappa:g}-el{eps_l:g}-s{seed}"
    samples = samples_for_accuracy(eps_l)
    rows = []
    for i, omega in enumerate(trace.scaled_residuals):
        rows.append({
            "run_id": run_id,
            "experiment": experiment,
            "n": n,
            "kappa": repr(kappa),
            "eps_l": repr(eps_l),
            "eps_target": repr(cfg.eps_target),
            "backend": cfg.backend,
            "readout": cfg.readout,
            "seed": seed,
            "iter": i,
            "omega": repr(omega),
            "mu": repr(trace.mu_values[i]),
            "be_calls_cum": (i + 1) * backend.degree,
            "samples_cum": (i + 1) * samples,
            "converged": trace.converged,
            "theorem_bound": trace.theorem_bound,
        })
    return rows


def _run_refinement_sweep(cfg: ExperimentConfig, experiment: str,
                          matrix_for=None) -> tuple[list[dict], list[str]]:
    """Shared driver for convergence-style experiments. ``matrix_for``
    maps (kappa, seed) -> matrix; defaults to the seeded random
    generator with prescribed spectrum."""
    if matrix_for is None:
        def matrix_for(kappa, seed):
            return random_with_condition(2**cfg.n_qubits, kappa, seed)

    rows: list[dict] = []
    failures: list[str] = []
    for kappa in cfg.kappa:
        eps_l_list = cfg.eps_l if cfg.eps_l is not None else [0.4 / kappa]
        for eps_l in eps_l_list:
            if eps_l * kappa >= 1.0:
                raise ConfigError(
                    f"eps_l * kappa = {eps_l * kappa:g} >= 1 breaks the contraction "
                    "hypothesis; pick eps_l < 1/kappa"
                )
            series = (_shared_series(kappa, eps_l)
                      if cfg.backend == "spectral_oracle" else None)
            for seed in cfg.seeds:
                a = matrix_for(kappa, seed)
                b = _rhs_vector(a.shape[0], seed)
                backend = _make_backend(cfg, a, kappa, eps_l, seed, series=series)
                cap = max(trace_bound(cfg, eps_l, kappa), 10) + 10
                try:
                    _x, trace, _cost = iterative_refine(
                        a, b, backend, cfg.eps_target, max_iter=cap,
                    )
                except DivergenceError as exc:
                    trace = exc.trace
                    failures.append(f"divergence at kappa={kappa} eps_l={eps_l} seed={seed}")
                rows.extend(_trace_rows(cfg, experiment, a.shape[0], kappa,
                                        eps_l, seed, trace, backend))
                if trace.converged:
                    if trace.iterations > trace.theorem_bound:
                        failures.append(
                            f"iteration bound exceeded at kappa={kappa} "
                            f"eps_l={eps_l} seed={seed}: {trace.iterations} > "
                            f"{trace.theorem_bound}"
                        )
                    check = contraction_check(trace, kappa, eps_l)
                    if cfg.readout == "exact" and not check.passed:
                        failures.append(
                            f"contraction violated at kappa={kappa} eps_l={eps_l} "
                            f"seed={seed} (worst ratio {check.worst_ratio:.3f})"
                        )
                else:
                    failures.append(
                        f"no convergence at kappa={kappa} eps_l={eps_l} seed={seed}"
                    )
    return rows, failures


def trace_bound(cfg: ExperimentConfig, eps_l: float, kappa: float) -> int:
    rate = eps_l * kappa
    if not 0.0 < rate < 1.0:
        return 10
    return math.ceil(math.log(cfg.eps_target) / math.log(rate))


def run_convergence(cfg: ExperimentConfig) -> tuple[list[dict], list[str]]:
    """Residual-vs-iteration sweep on random matrices (typical setup:
    kappa = 10, eps = 1e-11, several eps_l)."""
    return _run_refinement_sweep(cfg, "convergence")


def run_large_kappa(cfg: ExperimentConfig) -> tuple[list[dict], list[str]]:
    """Same sweep at kappa in the hundreds; the circuit backend is out of
    its phase-finding range there, so only oracle backends are allowed."""
    if cfg.backend == "qsvt_full":
        raise ConfigError(
            "large_kappa requires the spectral_oracle or noisy_oracle backend "
            "(phase finding is capped at degree 500)"
        )
    return _run_refinement_sweep(cfg, "large_kappa")


def run_poisson(cfg: ExperimentConfig) -> tuple[list[dict], list[str]]:
    """Convergence experiment on the 1-D Poisson tridiagonal system."""
    a, _h = gen_poisson(cfg.n_qubits)
    kappa = condition_number(a)
    cfg_kappas = [kappa]
    cfg.kappa = cfg_kappas
    return _run_refinement_sweep(cfg, "poisson", matrix_for=lambda _k, _s: a)


def _complexity_eps_sweep(eps_l: float, eps_floor: float) -> list[float]:
    sweep = [eps_l]
    k = 1
    while 10.0**-k >= eps_floor:
        if 10.0**-k < eps_l:
            sweep.append(10.0**-k)
        k += 1
    return sweep


def run_complexity(cfg: ExperimentConfig) -> tuple[list[dict], list[str]]:
    """Cost crossover: measured refined-path totals against the
    closed-form direct QSVT cost, for a sweep of targets eps down to
    ``cfg.eps_target``. Both curves share the row schema; the direct
    rows carry backend="direct"."""
    kappa = cfg.kappa[0]
    eps_l = cfg.eps_l[0] if cfg.eps_l else 0.4 / kappa
    if eps_l * kappa >= 1.0:
        raise ConfigError("eps_l * kappa >= 1: refinement would not contract")
    rows: list[dict] = []
    failures: list[str] = []
    series = _shared_series(kappa, eps_l) if cfg.backend == "spectral_oracle" else None
    n = 2**cfg.n_qubits
    for seed in cfg.seeds:
        a = random_with_condition(n, kappa, seed)
        b = _rhs_vector(n, seed)
        backend = _make_backend(cfg, a, kappa, eps_l, seed, series=series)
        for eps in _complexity_eps_sweep(eps_l, cfg.eps_target):
            _x, trace, cost = iterative_refine(a, b, backend, eps, max_iter=400)
            direct = cost.comparison_direct
            run_id = f"complexity-n{n}-k{kappa:g}-el{eps_l:g}-s{seed}-e{eps:g}"
            common = {
                "run_id": run_id, "experiment": "complexity", "n": n,
                "kappa": repr(kappa), "eps_l": repr(eps_l), "eps_target": repr(eps),
                "readout": cfg.readout, "seed": seed,
                "converged": trace.converged, "theorem_bound": trace.theorem_bound,
            }
            rows.append({**common, "backend": cfg.backend,
                         "iter": cost.solves,
                         "omega": repr(trace.scaled_residuals[-1]),
                         "mu": repr(trace.mu_values[0]),
                         "be_calls_cum": cost.solves * cost.be_calls_per_solve,
                         "samples_cum": cost.solves * cost.samples_per_solve})
            rows.append({**common, "backend": "direct", "iter": 1,
                         "omega": repr(eps), "mu": repr(0.0),
                         "be_calls_cum": direct.be_calls_per_solve,
                         "samples_cum": direct.samples_per_solve})
            if not trace.converged:
                failures.append(f"no convergence at eps={eps} seed={seed}")
            if eps == eps_l and cost.total != direct.total:
                failures.append(
                    f"totals disagree at eps = eps_l: {cost.total} vs {direct.total}"
                )
            if eps <= 1e-3 and not cost.total < direct.total:
                failures.append(
                    f"refined total {cost.total} not below direct {direct.total} "
                    f"at eps={eps}"
                )
    return rows, failures


_RUNNERS = {
    "convergence": run_convergence,
    "large_kappa": run_large_kappa,
    "complexity": run_complexity,
    "poisson": run_poisson,
}


def _metadata(cfg: ExperimentConfig) -> dict:
    return {
        "config": asdict(cfg),
        "notes": {
            "matrix_ensemble": "prescribed log-spaced singular spectrum with "
                               "seeded random orthogonal factors (distribution "
                               "is this artifact's choice)",
            "eps_l_default": "0.4 / kappa when eps_l is omitted",
            "shot_readout": "Gaussian surrogate of norm 1/sqrt(shots); "
                            "physical sign recovery is not modeled",
            "polynomial_accuracy": "inner series built at eps' = eps_l / kappa",
        },
    }


def _write_outputs(cfg: ExperimentConfig, rows: list[dict]) -> None:
    sort_key = ("experiment", "kappa", "eps_l", "eps_target", "backend", "seed", "iter")
    rows = sorted(rows, key=lambda r: tuple(str(r[k]) for k in sort_key))
    out = Path(cfg.out)
    if out.parent and not out.parent.exists():
        out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)
    meta = out.with_suffix(out.suffix + ".meta.json")
    meta.write_text(json.dumps(_metadata(cfg), indent=2, sort_keys=True) + "\n")


def main(argv=None) -> int:
    """Parse flags, run the experiment, write CSV/JSON, print a summary.

    Exit codes: 0 success, 1 experiment assertion failure, 2 bad config.
    """
    parser = argparse.ArgumentParser(
        prog="qsvt-refine-bench",
        description="Benchmark runner for the mixed-precision QSVT solver.",
    )
    parser.add_argument("--experiment", choices=_EXPERIMENTS)
    parser.add_argument("--config", help="JSON config path")
    parser.add_argument("--out", help="CSV output path")
    parser.add_argument("--seeds", help="comma-separated seed list")
    parser.add_argument("--backend", choices=_BACKENDS)
    parser.add_argument("--readout", choices=("exact", "shot"))
    args = parser.parse_args(argv)

    try:
        if args.config:
            cfg = ExperimentConfig.from_json_file(args.config)
        elif args.experiment:
            cfg = ExperimentConfig(experiment=args.experiment)
        else:
            raise ConfigError("either --config or --experiment is required")
        for key in ("experiment", "out", "backend", "readout"):
            val = getattr(args, key)
            if val is not None:
                setattr(cfg, key, val)
        if args.seeds is not None:
            cfg.seeds = [int(s) for s in args.seeds.split(",") if s]
        cfg = ExperimentConfig(**asdict(cfg))  # re-validate after overrides
        runner = _RUNNERS[cfg.experiment]
        rows, failures = runner(cfg)
    except (ConfigError, ValueError) as exc:
        # validation errors raised while setting runs up (degree caps,
        # contraction hypothesis, malformed JSON) are config problems
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    _write_outputs(cfg, rows)
    runs = {r["run_id"] for r in rows}
    print(f"experiment : {cfg.experiment}")
    print(f"rows       : {len(rows)} across {len(runs)} runs -> {cfg.out}")
    if failures:
        print(f"FAILURES ({len(failures)}):")
        for msg in failures:
            print(f"  - {msg}")
        return 1
    print("all run-level assertions passed")
    return 0


def cli() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    cli()
