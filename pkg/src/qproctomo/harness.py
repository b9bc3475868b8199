"""Configuration-driven Monte Carlo experiment runner.

Configs are INI files (see ``configs/`` for the grammar by example):
sections name the channel, input ensemble, POM, prior, solver knobs,
strategy knobs, and output location.  ``run_experiment`` simulates every
(run, scheme) pair, writes a per-step trajectory CSV, a per-L summary CSV
with standard errors, a JSON manifest that pins every seed, and a sidecar
with the states picked by state-space searches.

Results are keyed by (scheme, run, L), so worker count and completion
order never change the output bytes.
"""

from __future__ import annotations

import configparser
import csv
import json
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .adaptive import (
    MplConfig,
    StrategyConfig,
    Trajectory,
    run_adaptive_fixed,
    run_hybrid,
    run_mpl_mlme,
    run_non_adaptive,
)
from .channels import ChoiOperator, channel_entropy, channel_from_spec
from .linalg import matrix_to_jsonable
from .mlme import MlmeConfig
from .seeding import child_seed
from .tomography import (
    InputEnsemble,
    Pom,
    product_sic_pom,
    qubit_tetrahedron,
    random_pom,
    sic_inputs,
    standard_product_inputs,
)

SCHEME_IDS = {"non_adaptive": 0, "adaptive_fixed": 1, "mpl": 2, "hybrid": 3}

TRAJECTORY_COLUMNS = [
    "scheme", "run", "L", "chosen_input_label",
    "trace_distance_to_true", "loglik_max", "delta",
]
SUMMARY_COLUMNS = [
    "scheme", "L", "mean_trace_distance", "stderr",
    "mean_loglik_max", "mean_delta", "n_runs",
]


class ConfigError(ValueError):
    """The experiment configuration is malformed or inconsistent."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully parsed experiment description."""

    name: str
    channel_spec: dict
    inputs_spec: dict | None
    pom_spec: dict
    prior_spec: dict | None
    n_copies: int | None
    n_runs: int
    schemes: tuple[str, ...]
    master_seed: int
    solver: MlmeConfig
    selection_solver: MlmeConfig | None
    mpl: MplConfig
    strategy: StrategyConfig
    first_input: str = "random"  # "random", "zero", or an integer index as text
    # averaging over per-run random orders makes the non-adaptive baseline
    # order-agnostic; "identity" pins the ensemble's own order instead
    non_adaptive_order: str = "random"
    record_loglik: bool = False
    delta_samples: int = 0
    workers: int = 1
    out_dir: str = "results"

    def __post_init__(self):
        if self.n_runs < 1:
            raise ConfigError("n_runs must be >= 1")
        for scheme in self.schemes:
            if scheme not in SCHEME_IDS:
                raise ConfigError(f"unknown scheme {scheme!r}")
        if not self.schemes:
            raise ConfigError("at least one scheme is required")


def _parse_value(raw: str):
    raw = raw.strip()
    if raw.lower() in ("true", "false"):
        return raw.lower() == "true"
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        pass
    return raw


def _section_dict(cp: configparser.ConfigParser, name: str) -> dict:
    if not cp.has_section(name):
        return {}
    return {k: _parse_value(v) for k, v in cp.items(name)}


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    """Parse an INI experiment file; ``overrides`` patch [experiment] keys."""
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    read = cp.read(path)
    if not read:
        raise ConfigError(f"config file {path} not found or unreadable")
    exp = _section_dict(cp, "experiment")
    exp.update(overrides or {})
    try:
        n_copies = exp.get("n_copies", 10000)
        if isinstance(n_copies, str) and n_copies.lower() in ("noiseless", "inf", "none"):
            n_copies = None
        schemes = tuple(
            s.strip() for s in str(exp.get("schemes", "non_adaptive")).split(",") if s.strip()
        )
        solver_kw = _section_dict(cp, "solver")
        if "lambda" in solver_kw:
            solver_kw["lam"] = solver_kw.pop("lambda")
        solver = MlmeConfig(**solver_kw)
        sel_kw = _section_dict(cp, "selection_solver")
        if "lambda" in sel_kw:
            sel_kw["lam"] = sel_kw.pop("lambda")
        selection = None
        if sel_kw:
            base = {k: v for k, v in asdict(solver).items()}
            base.update(sel_kw)
            selection = MlmeConfig(**base)
        strategy_kw = _section_dict(cp, "strategy")
        first_input = str(strategy_kw.pop("first_input", "random"))
        non_adaptive_order = str(strategy_kw.pop("non_adaptive_order", "random"))
        strategy = StrategyConfig(scheme=schemes[0], **strategy_kw)
        mpl = MplConfig(**_section_dict(cp, "mpl"))
        out = _section_dict(cp, "output")
        return ExperimentConfig(
            name=str(exp.get("name", Path(str(path)).stem)),
            channel_spec=_section_dict(cp, "channel"),
            inputs_spec=_section_dict(cp, "inputs") or None,
            pom_spec=_section_dict(cp, "pom"),
            prior_spec=_section_dict(cp, "prior") or None,
            n_copies=None if n_copies is None else int(n_copies),
            n_runs=int(exp.get("n_runs", 1)),
            schemes=schemes,
            master_seed=int(exp.get("master_seed", 0)),
            solver=solver,
            selection_solver=selection,
            mpl=mpl,
            strategy=strategy,
            first_input=first_input,
            non_adaptive_order=non_adaptive_order,
            record_loglik=bool(exp.get("record_loglik", False)),
            delta_samples=int(exp.get("delta_samples", 0)),
            workers=int(exp.get("workers", 1)),
            out_dir=str(out.get("dir", "results")),
        )
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"invalid experiment config: {exc}") from exc


def build_channel(spec: dict) -> ChoiOperator:
    kind = str(spec.get("kind", "")).lower()
    if not kind:
        raise ConfigError("channel section needs a 'kind'")
    try:
        if kind == "builtin":
            return channel_from_spec({"builtin": spec["name"], "dim": spec.get("dim", 2)})
        if kind == "imperfect_cnot":
            return channel_from_spec({"imperfect_cnot": spec["epsilon"]})
        if kind == "noisy_cnot":
            return channel_from_spec(
                {"noisy_cnot": spec["epsilon"], "n_noise": spec.get("n_noise", 15),
                 "seed": spec.get("seed", 0)}
            )
        if kind == "random":
            return channel_from_spec({"random": spec})
        if kind == "file":
            return channel_from_spec({"file": spec["path"]})
    except KeyError as exc:
        raise ConfigError(f"channel spec is missing {exc}") from exc
    raise ConfigError(f"unknown channel kind {kind!r}")


def build_inputs(spec: dict) -> InputEnsemble:
    kind = str(spec.get("kind", "")).lower()
    try:
        if kind == "standard_product":
            return standard_product_inputs(int(spec["n_qubits"]))
        if kind == "sic":
            return sic_inputs(int(spec["d"]), spec.get("fiducial"))
        if kind == "tetrahedron":
            return qubit_tetrahedron()[0]
    except KeyError as exc:
        raise ConfigError(f"inputs spec is missing {exc}") from exc
    raise ConfigError(f"unknown inputs kind {kind!r}")


def build_pom(spec: dict) -> Pom:
    kind = str(spec.get("kind", "")).lower()
    try:
        if kind == "product_sic":
            pom = product_sic_pom(int(spec["n_qubits"]))
        elif kind == "tetrahedron":
            pom = qubit_tetrahedron()[1]
        elif kind == "random":
            pom = random_pom(int(spec["d"]), int(spec["m"]), int(spec.get("seed", 0)))
        else:
            raise ConfigError(f"unknown pom kind {kind!r}")
    except KeyError as exc:
        raise ConfigError(f"pom spec is missing {exc}") from exc
    eff = spec.get("efficiency")
    if eff is not None and float(eff) != 1.0:
        pom = Pom(outcomes=pom.outcomes, efficiencies=np.full(len(pom), float(eff)))
    return pom


def _resolve_first_input(cfg: ExperimentConfig, ensemble: InputEnsemble | None, scheme: str):
    token = cfg.first_input.strip().lower()
    if token == "random":
        return None
    if token == "zero":
        if scheme in ("mpl",):
            d = build_channel(cfg.channel_spec).d_in
            state = np.zeros((d, d), dtype=complex)
            state[0, 0] = 1.0
            return state
        return 0  # by construction the first candidate is |0...0><0...0|
    try:
        return int(token)
    except ValueError as exc:
        raise ConfigError(f"bad first_input {cfg.first_input!r}") from exc


def run_single(cfg: ExperimentConfig, scheme: str, run_index: int) -> Trajectory:
    """One (scheme, run) simulation; deterministic in (config, master seed)."""
    channel = build_channel(cfg.channel_spec)
    pom = build_pom(cfg.pom_spec)
    ensemble = build_inputs(cfg.inputs_spec) if cfg.inputs_spec else None
    prior = build_channel(cfg.prior_spec) if cfg.prior_spec else None
    strategy = StrategyConfig(
        scheme=scheme,
        figure_of_merit=cfg.strategy.figure_of_merit,
        mpl_starts=cfg.strategy.mpl_starts,
        repetition_tol=cfg.strategy.repetition_tol,
        hybrid_switch=cfg.strategy.hybrid_switch,
        stop_threshold=cfg.strategy.stop_threshold,
        max_steps=cfg.strategy.max_steps,
    )
    seed = child_seed(cfg.master_seed, SCHEME_IDS[scheme], run_index)
    common = dict(record_loglik=cfg.record_loglik, delta_samples=cfg.delta_samples)
    if scheme == "non_adaptive":
        if ensemble is None:
            raise ConfigError("non_adaptive scheme needs an [inputs] section")
        if cfg.non_adaptive_order == "random":
            rng = np.random.default_rng(child_seed(seed, 4, 0))
            order = [int(i) for i in rng.permutation(len(ensemble))]
        elif cfg.non_adaptive_order == "identity":
            order = list(range(len(ensemble)))
        else:
            raise ConfigError(f"unknown non_adaptive_order {cfg.non_adaptive_order!r}")
        return run_non_adaptive(channel, ensemble, pom, cfg.n_copies, strategy,
                                cfg.solver, order=order, seed=seed, **common)
    if scheme == "adaptive_fixed":
        if ensemble is None or prior is None:
            raise ConfigError("adaptive_fixed needs [inputs] and [prior] sections")
        return run_adaptive_fixed(channel, ensemble, pom, cfg.n_copies, prior, strategy,
                                  cfg.solver, cfg.selection_solver, seed=seed,
                                  first_input=_resolve_first_input(cfg, ensemble, scheme),
                                  **common)
    if scheme == "mpl":
        if prior is None:
            raise ConfigError("mpl needs a [prior] section")
        return run_mpl_mlme(channel, pom, cfg.n_copies, prior, strategy,
                            cfg.solver, cfg.mpl, seed=seed,
                            first_input=_resolve_first_input(cfg, None, scheme), **common)
    if scheme == "hybrid":
        if ensemble is None or prior is None:
            raise ConfigError("hybrid needs [inputs] and [prior] sections")
        return run_hybrid(channel, ensemble, pom, cfg.n_copies, prior, strategy,
                          cfg.solver, cfg.mpl, cfg.selection_solver, seed=seed,
                          first_input=_resolve_first_input(cfg, ensemble, scheme), **common)
    raise ConfigError(f"unknown scheme {scheme!r}")


def _task(args):
    cfg_dict, scheme, run_index = args
    cfg = _config_from_dict(cfg_dict)
    traj = run_single(cfg, scheme, run_index)
    rows = [
        {
            "scheme": scheme,
            "run": run_index,
            "L": step.step,
            "chosen_input_label": step.input_label,
            "trace_distance_to_true": step.distance_to_true,
            "loglik_max": step.loglik_max,
            "delta": step.delta,
        }
        for step in traj.steps
    ]
    chosen = None
    if scheme in ("mpl", "hybrid"):
        chosen = [
            {"step": s.step, "label": s.input_label,
             "state": matrix_to_jsonable(traj.ensemble.states[s.input_index])}
            for s in traj.steps
        ]
    flags = {"stopped_early": traj.stopped_early, "stop_reason": traj.stop_reason}
    return scheme, run_index, rows, chosen, flags


def _config_to_dict(cfg: ExperimentConfig) -> dict:
    d = asdict(cfg)
    d["solver"] = asdict(cfg.solver)
    d["selection_solver"] = asdict(cfg.selection_solver) if cfg.selection_solver else None
    d["mpl"] = asdict(cfg.mpl)
    d["strategy"] = asdict(cfg.strategy)
    return d


def _config_from_dict(d: dict) -> ExperimentConfig:
    d = dict(d)
    d["solver"] = MlmeConfig(**d["solver"])
    d["selection_solver"] = MlmeConfig(**d["selection_solver"]) if d["selection_solver"] else None
    d["mpl"] = MplConfig(**d["mpl"])
    strat = dict(d["strategy"])
    d["strategy"] = StrategyConfig(**strat)
    d["schemes"] = tuple(d["schemes"])
    return ExperimentConfig(**d)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_trajectory_csv(path: Path, rows: list[dict]):
    rows = sorted(rows, key=lambda r: (r["scheme"], r["run"], r["L"]))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRAJECTORY_COLUMNS)
        for r in rows:
            writer.writerow([_fmt(r[c]) for c in TRAJECTORY_COLUMNS])


def summarize(rows: list[dict]) -> list[dict]:
    """Per-(scheme, L) means and standard errors of the mean."""
    groups: dict[tuple, list[dict]] = {}
    for r in rows:
        groups.setdefault((r["scheme"], r["L"]), []).append(r)
    out = []
    for (scheme, l_val), grp in sorted(groups.items()):
        dts = np.array([g["trace_distance_to_true"] for g in grp], dtype=float)
        lls = [g["loglik_max"] for g in grp if g["loglik_max"] is not None]
        dls = [g["delta"] for g in grp if g["delta"] is not None]
        n = len(dts)
        out.append(
            {
                "scheme": scheme,
                "L": l_val,
                "mean_trace_distance": float(dts.mean()),
                "stderr": float(dts.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0,
                "mean_loglik_max": float(np.mean(lls)) if lls else None,
                "mean_delta": float(np.mean(dls)) if dls else None,
                "n_runs": n,
            }
        )
    return out


def write_summary_csv(path: Path, rows: list[dict]):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_COLUMNS)
        for r in rows:
            writer.writerow([_fmt(r[c]) for c in SUMMARY_COLUMNS])


def run_experiment(cfg: ExperimentConfig, out_dir=None) -> dict:
    """Simulate all (run, scheme) pairs and write result files.

    Returns a dict with the paths written and the summary rows.
    """
    # fail fast on malformed specs before any simulation
    build_channel(cfg.channel_spec)
    build_pom(cfg.pom_spec)
    if cfg.inputs_spec:
        build_inputs(cfg.inputs_spec)
    if cfg.prior_spec:
        build_channel(cfg.prior_spec)
    out = Path(out_dir or cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tasks = [
        (_config_to_dict(cfg), scheme, run)
        for scheme in cfg.schemes
        for run in range(cfg.n_runs)
    ]
    results = []
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_task, tasks))
    else:
        results = [_task(t) for t in tasks]
    all_rows: list[dict] = []
    sidecar: dict = {}
    flags: dict = {}
    for scheme, run_index, rows, chosen, run_flags in results:
        all_rows.extend(rows)
        if chosen is not None:
            sidecar[f"{scheme}/run{run_index}"] = chosen
        if run_flags["stopped_early"]:
            flags[f"{scheme}/run{run_index}"] = run_flags["stop_reason"]
    traj_path = out / f"{cfg.name}_trajectory.csv"
    write_trajectory_csv(traj_path, all_rows)
    summary_rows = summarize(all_rows)
    summary_path = out / f"{cfg.name}_summary.csv"
    write_summary_csv(summary_path, summary_rows)
    manifest = {
        "config": _config_to_dict(cfg),
        "versions": {
            "qproctomo": __version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
        },
        "seed_derivation": "SeedSequence(master_seed, spawn_key=(scheme_id, run)); "
                           "per step: +(1, step) measurement, +(2, step) selection, "
                           "+(3, step) plateau sampling",
        "scheme_ids": SCHEME_IDS,
        "early_stops": flags,
    }
    manifest_path = out / f"{cfg.name}_manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    paths = {"trajectory": str(traj_path), "summary": str(summary_path),
             "manifest": str(manifest_path)}
    if sidecar:
        sidecar_path = out / f"{cfg.name}_chosen_states.json"
        sidecar_path.write_text(json.dumps(sidecar, indent=1, sort_keys=True))
        paths["chosen_states"] = str(sidecar_path)
    return {"paths": paths, "summary": summary_rows, "rows": all_rows}


def reexport(results_dir, out_dir=None) -> dict:
    """Rebuild the summary CSV from a stored trajectory CSV."""
    results_dir = Path(results_dir)
    candidates = sorted(results_dir.glob("*_trajectory.csv"))
    if not candidates:
        raise ConfigError(f"no *_trajectory.csv found under {results_dir}")
    out = Path(out_dir or results_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = {}
    for traj_path in candidates:
        rows = []
        with open(traj_path) as fh:
            for rec in csv.DictReader(fh):
                rows.append(
                    {
                        "scheme": rec["scheme"],
                        "run": int(rec["run"]),
                        "L": int(rec["L"]),
                        "chosen_input_label": rec["chosen_input_label"],
                        "trace_distance_to_true": float(rec["trace_distance_to_true"]),
                        "loglik_max": float(rec["loglik_max"]) if rec["loglik_max"] else None,
                        "delta": float(rec["delta"]) if rec["delta"] else None,
                    }
                )
        name = traj_path.name.replace("_trajectory.csv", "")
        summary_path = out / f"{name}_summary.csv"
        write_summary_csv(summary_path, summarize(rows))
        written[name] = str(summary_path)
    return written


def channel_report(cfg: ExperimentConfig) -> dict:
    """Spectrum/entropy/rank diagnostics for the configured channel."""
    channel = build_channel(cfg.channel_spec)
    vals = channel.eigenvalues()
    return {
        "d_in": channel.d_in,
        "d_out": channel.d_out,
        "trace": float(np.trace(channel.matrix).real),
        "rank": channel.rank(),
        "entropy": channel_entropy(channel),
        "top_eigenvalues": [float(v) for v in vals[:8]],
    }
