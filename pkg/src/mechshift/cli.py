"""Command-line entry point.

Four subcommands: ``simulate`` writes a synthetic multi-environment dataset
with its ground truth, ``discover`` scores a candidate class on data files
and writes the report and summary pattern, ``oracle`` sweeps one scenario
axis and writes population recall curves, and ``bounds`` prints the
recovery-probability bounds for given shift rates.

Runs are driven by a YAML config file; any key can be overridden on the
command line as ``--section.key=value`` (values parsed as YAML). Each run
writes into one output directory with fixed filenames plus a manifest
recording the resolved config, its hash, the seed, and package versions, so
a run can be reproduced bit for bit. Relative paths in configs are resolved
against the current working directory. Exit status is 0 only when the run
completed; config errors are reported before any output file is created.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import platform
import re
import sys
from dataclasses import dataclass, fields

import numpy as np
import scipy
import sklearn
import yaml

from .data import MultiEnvDataset
from .exceptions import ConfigError, MechshiftError, SkeletonMismatchError
from .graph import Cpdag, Dag, read_graph, write_graph
from .invariance import KernelConfig, make_invariance_test, oracle_invariance
from .io import load_multi_env, preprocess, save_multi_env
from .mec import DEFAULT_MEC_LIMIT, enumerate_extensions, enumerate_mec
from .metrics import evaluate
from .mss import (
    InterventionScenario,
    ScoreReport,
    empirical_mss,
    graph_recovery_bound,
    oracle_score_report,
    parent_recovery_bound,
    report_to_json,
    scenario_from_json,
    scenario_to_json,
)
from .pc import pooled_pc, pooled_pc_oracle
from .sim import SimConfig, sample_scenario, simulate
from .util import bootstrap_mean_ci, parallel_map

TEST_NAMES = ("oracle", "fisher_z", "linear", "kci", "regression_residual")


# -- config plumbing ---------------------------------------------------------

def load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = yaml.safe_load(fh)
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    except yaml.YAMLError as err:
        raise ConfigError(f"cannot parse config {path}: {err}") from err
    if doc is None:
        return {}
    if not isinstance(doc, dict):
        raise ConfigError(f"config {path}: top level must be a mapping")
    return doc


def parse_overrides(tokens: list[str]) -> list[tuple[str, object]]:
    """Turn ``--section.key=value`` (or ``--section.key value``) into pairs."""
    pairs = []
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if not tok.startswith("--") or "." not in tok:
            raise ConfigError(
                f"unrecognized argument {tok!r}; overrides look like --section.key=value"
            )
        body = tok[2:]
        if "=" in body:
            path, raw = body.split("=", 1)
            i += 1
        else:
            path = body
            if i + 1 >= len(tokens):
                raise ConfigError(f"override {tok!r} is missing a value")
            raw = tokens[i + 1]
            i += 2
        try:
            value = yaml.safe_load(raw)
        except yaml.YAMLError:
            value = raw
        pairs.append((path, value))
    return pairs


def apply_overrides(config: dict, pairs: list[tuple[str, object]]) -> dict:
    out = json.loads(json.dumps(config))
    for path, value in pairs:
        keys = path.split(".")
        node = out
        for key in keys[:-1]:
            child = node.setdefault(key, {})
            if not isinstance(child, dict):
                raise ConfigError(f"{path}: {key} is not a section")
            node = child
        node[keys[-1]] = value
    return out


def config_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _section(config: dict, name: str) -> dict:
    sec = config.get(name) or {}
    if not isinstance(sec, dict):
        raise ConfigError(f"{name}: must be a mapping")
    return dict(sec)


def _build(cls, section: dict, path: str):
    known = {f.name for f in fields(cls)}
    for key in section:
        if key not in known:
            raise ConfigError(f"{path}.{key}: unknown key")
    try:
        return cls(**section)
    except (TypeError, ValueError) as err:
        raise ConfigError(f"{path}: {err}") from err


def _versions() -> dict:
    try:
        from importlib.metadata import version

        own = version("mechshift")
    except Exception:
        own = "unknown"
    return {
        "python": platform.python_version(),
        "mechshift": own,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "sklearn": sklearn.__version__,
    }


def _write_json(path: str, doc: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_manifest(out_dir: str, command: str, config: dict, seed, extra: dict) -> None:
    doc = {
        "command": command,
        "config": config,
        "config_sha256": config_hash(config),
        "seed": seed,
        "versions": _versions(),
    }
    doc.update(extra)
    _write_json(os.path.join(out_dir, "manifest.json"), doc)


def _require_file(path, label: str) -> str:
    if not isinstance(path, str) or not path:
        raise ConfigError(f"{label}: a file path is required")
    if not os.path.isfile(path):
        raise ConfigError(f"{label}: no such file {path!r}")
    return path


def _resolve_out(args, config: dict) -> str:
    out = args.out or config.get("out")
    if not out or not isinstance(out, str):
        raise ConfigError("out: output directory required (config key or --out)")
    return out


# -- simulate ----------------------------------------------------------------

def cmd_simulate(config: dict, out_dir: str) -> int:
    sim_cfg = _build(SimConfig, _section(config, "sim"), "sim")
    scenario, _, dataset = simulate(sim_cfg)
    os.makedirs(out_dir, exist_ok=True)
    data_paths = save_multi_env(dataset, out_dir)
    write_graph(scenario.dag, os.path.join(out_dir, "truth_dag.json"))
    with open(os.path.join(out_dir, "scenario.json"), "w", encoding="utf-8") as fh:
        fh.write(scenario_to_json(scenario))
        fh.write("\n")
    _write_manifest(out_dir, "simulate", config, sim_cfg.seed, {
        "outputs": sorted(
            [os.path.basename(p) for p in data_paths]
            + ["truth_dag.json", "scenario.json"]
        ),
        "num_vars": sim_cfg.num_vars,
        "n_env": sim_cfg.n_env,
    })
    return 0


# -- discover ----------------------------------------------------------------

@dataclass
class DiscoverConfig:
    """Settings for an empirical discovery run."""

    data: object = None
    source: str = "truth"
    dag: str | None = None
    scenario: str | None = None
    cpdag: str | None = None
    test: str = "fisher_z"
    alpha: float | None = None
    mode: str = "hard"
    preprocess: str = "none"
    pc_test: str = "fisher_z"
    level: float = 0.05
    max_cond_size: int | None = None
    mec_limit: int = DEFAULT_MEC_LIMIT
    best_effort: bool = False
    kernel: dict | None = None
    regressor: str = "kernel_ridge"
    ridge: float = 1.0

    def __post_init__(self):
        if self.data is None:
            raise ConfigError("discover.data: required")
        if self.source not in ("truth", "pooled-pc", "cpdag"):
            raise ConfigError(f"discover.source: unknown source {self.source!r}")
        if self.test not in TEST_NAMES:
            raise ConfigError(f"discover.test: unknown test {self.test!r}")
        if self.alpha is not None and not 0.0 < self.alpha < 1.0:
            raise ConfigError("discover.alpha: must lie in (0, 1)")
        if self.mode not in ("hard", "soft"):
            raise ConfigError(f"discover.mode: unknown mode {self.mode!r}")
        if self.preprocess not in ("none", "log"):
            raise ConfigError(
                f"discover.preprocess: unknown transform {self.preprocess!r}"
            )
        if self.pc_test not in ("fisher_z", "kci"):
            raise ConfigError(f"discover.pc_test: unknown test {self.pc_test!r}")
        if not 0.0 < self.level < 1.0:
            raise ConfigError("discover.level: must lie in (0, 1)")
        if self.mec_limit < 1:
            raise ConfigError("discover.mec_limit: must be positive")
        if self.source == "truth" and self.dag is None and self.scenario is None:
            raise ConfigError(
                "discover.dag: truth source needs a dag or scenario file"
            )
        if self.source == "cpdag" and self.cpdag is None:
            raise ConfigError("discover.cpdag: cpdag source needs a pattern file")
        if self.test == "oracle" and self.scenario is None:
            raise ConfigError("discover.scenario: the oracle test needs the scenario")


_ENV_CSV = re.compile(r"^env_(\d+)\.csv$")


def _data_paths(data) -> list[str]:
    if isinstance(data, str) and os.path.isdir(data):
        found = []
        for name in os.listdir(data):
            m = _ENV_CSV.match(name)
            if m:
                found.append((int(m.group(1)), os.path.join(data, name)))
        if not found:
            raise ConfigError(f"discover.data: no env_<k>.csv files in {data!r}")
        return [p for _, p in sorted(found)]
    if isinstance(data, str):
        data = [data]
    if not isinstance(data, list) or not data:
        raise ConfigError("discover.data: expected a directory or a list of files")
    return [_require_file(p, "discover.data") for p in data]


def _load_truth(cfg: DiscoverConfig) -> tuple[Dag | None, InterventionScenario | None]:
    scenario = None
    if cfg.scenario is not None:
        with open(_require_file(cfg.scenario, "discover.scenario"), encoding="utf-8") as fh:
            scenario = scenario_from_json(fh.read())
    if cfg.dag is not None:
        g = read_graph(_require_file(cfg.dag, "discover.dag"))
        if not isinstance(g, Dag):
            raise ConfigError("discover.dag: file does not hold a directed graph")
        return g, scenario
    return (scenario.dag if scenario else None), scenario


def _candidates(
    cfg: DiscoverConfig,
    dataset: MultiEnvDataset,
    truth: Dag | None,
    kernel: KernelConfig | None,
) -> tuple[tuple[Dag, ...], Cpdag | None]:
    """Candidate DAGs plus the estimated pattern they came from, if any."""
    if cfg.source == "truth":
        return enumerate_mec(truth, limit=cfg.mec_limit).members, None
    if cfg.source == "cpdag":
        pattern = read_graph(_require_file(cfg.cpdag, "discover.cpdag"))
        if isinstance(pattern, Dag):
            return (pattern,), None
        return enumerate_extensions(pattern, limit=cfg.mec_limit), pattern
    pattern = pooled_pc(
        dataset,
        test_family=cfg.pc_test,
        level=cfg.level,
        max_cond_size=cfg.max_cond_size,
        kernel=kernel,
    )
    return enumerate_extensions(pattern, limit=cfg.mec_limit), pattern


def cmd_discover(config: dict, out_dir: str) -> int:
    cfg = _build(DiscoverConfig, _section(config, "discover"), "discover")
    kernel = (
        _build(KernelConfig, cfg.kernel, "discover.kernel")
        if cfg.kernel is not None
        else None
    )
    paths = _data_paths(cfg.data)
    dataset = preprocess(load_multi_env(paths), cfg.preprocess)
    truth, scenario = _load_truth(cfg)

    candidates, pattern = _candidates(cfg, dataset, truth, kernel)
    if cfg.test == "oracle":
        test_fn = oracle_invariance(scenario)
    elif cfg.test == "kci":
        test_fn = make_invariance_test("kci", kernel=kernel)
    elif cfg.test == "regression_residual":
        test_fn = make_invariance_test(
            "regression_residual", regressor=cfg.regressor, ridge=cfg.ridge
        )
    else:
        test_fn = make_invariance_test(cfg.test)

    report = empirical_mss(
        candidates,
        dataset,
        test_fn,
        alpha=cfg.alpha,
        mode=cfg.mode,
        best_effort=cfg.best_effort,
    )

    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8") as fh:
        fh.write(report_to_json(report))
        fh.write("\n")
    write_graph(report.summary, os.path.join(out_dir, "cpdag.json"))
    outputs = ["report.json", "cpdag.json"]
    if pattern is not None:
        write_graph(pattern, os.path.join(out_dir, "pattern.json"))
        outputs.append("pattern.json")
    if truth is not None:
        _write_metrics(os.path.join(out_dir, "metrics.csv"), report, truth)
        outputs.append("metrics.csv")
    argmin_dags = report.argmin_dags
    _write_manifest(out_dir, "discover", config, kernel.seed if kernel else 0, {
        "outputs": sorted(outputs),
        "n_candidates": len(candidates),
        "test": report.test,
        "mode": report.mode,
        "alpha": report.alpha,
        "argmin": list(report.argmin),
        "argmin_unique": len(report.argmin) == 1,
        "argmin_edges": [sorted(g.edges) for g in argmin_dags],
        "n_failures": len(report.failures),
    })
    return 0


def _write_metrics(path: str, report: ScoreReport, truth: Dag) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["skeleton_match", "precision", "recall", "f1",
             "n_directed", "n_correct", "n_skeleton"]
        )
        try:
            ev = evaluate(report.summary, truth)
        except SkeletonMismatchError:
            writer.writerow([0, "", "", "", "", "", ""])
            return
        writer.writerow(
            [1, repr(ev.precision), repr(ev.recall), repr(ev.f1),
             ev.n_directed, ev.n_correct, ev.n_skeleton]
        )


# -- oracle sweep ------------------------------------------------------------

SWEEP_AXES = ("n_env", "shift_fraction", "density", "num_vars")


@dataclass
class SweepConfig:
    """One-axis oracle sweep; the axis value replaces the base field per cell."""

    axis: str
    values: list
    repetitions: int = 50
    seed: int = 0
    num_vars: int = 6
    n_env: int = 5
    graph_model: str = "erdos_renyi"
    density: float = 0.3
    attachment: int = 1
    shift_fraction: float = 0.5
    semantics: str = "resample"
    redraw_limit: int = 100

    def __post_init__(self):
        if self.axis not in SWEEP_AXES:
            raise ConfigError(f"oracle.axis: unknown axis {self.axis!r}")
        if not isinstance(self.values, list) or not self.values:
            raise ConfigError("oracle.values: need a non-empty list")
        if self.repetitions < 1:
            raise ConfigError("oracle.repetitions: must be positive")
        if self.redraw_limit < 1:
            raise ConfigError("oracle.redraw_limit: must be positive")


def _sweep_sim_config(cfg: SweepConfig, value, seed: int) -> SimConfig:
    fields_ = {
        "num_vars": cfg.num_vars,
        "n_env": cfg.n_env,
        "graph_model": cfg.graph_model,
        "density": cfg.density,
        "attachment": cfg.attachment,
        "shift_fraction": cfg.shift_fraction,
        "semantics": cfg.semantics,
    }
    fields_[cfg.axis] = value
    try:
        return SimConfig(n_samples=2, seed=seed, **fields_)
    except ConfigError as err:
        raise ConfigError(f"oracle cell {cfg.axis}={value}: {err}") from err


def _sweep_rep(task) -> tuple[float, float]:
    """Recall of oracle scoring and oracle pooled search for one scenario."""
    cell_idx, rep, cfg_json, value = task
    cfg = SweepConfig(**json.loads(cfg_json))
    scenario = None
    for attempt in range(cfg.redraw_limit):
        seed = int(
            np.random.SeedSequence((cfg.seed, cell_idx, rep, attempt))
            .generate_state(1)[0]
        )
        sim_cfg = _sweep_sim_config(cfg, value, seed)
        candidate, _ = sample_scenario(sim_cfg)
        # Recall is undefined on an edgeless graph; redraw those.
        if candidate.dag.edges:
            scenario = candidate
            break
    if scenario is None:
        raise MechshiftError(
            f"no scenario with edges after {cfg.redraw_limit} draws "
            f"(cell {cfg.axis}={value}, repetition {rep})"
        )
    members = enumerate_mec(scenario.dag).members
    report = oracle_score_report(members, scenario)
    recall_mss = evaluate(report.summary, scenario.dag).recall
    recall_pc = evaluate(pooled_pc_oracle(scenario), scenario.dag).recall
    return recall_mss, recall_pc


def cmd_oracle(config: dict, out_dir: str) -> int:
    cfg = _build(SweepConfig, _section(config, "oracle"), "oracle")
    # Fail on an invalid cell before any work happens.
    for value in cfg.values:
        _sweep_sim_config(cfg, value, 0)
    cfg_json = json.dumps(
        {f.name: getattr(cfg, f.name) for f in fields(SweepConfig)}
    )
    tasks = [
        (cell_idx, rep, cfg_json, value)
        for cell_idx, value in enumerate(cfg.values)
        for rep in range(cfg.repetitions)
    ]
    results = parallel_map(_sweep_rep, tasks)

    rows = []
    for cell_idx, value in enumerate(cfg.values):
        cell = results[cell_idx * cfg.repetitions:(cell_idx + 1) * cfg.repetitions]
        for method_idx, method in enumerate(("mss_oracle", "pooled_pc_oracle")):
            samples = [r[method_idx] for r in cell]
            boot_seed = int(
                np.random.SeedSequence((cfg.seed, 7, cell_idx, method_idx))
                .generate_state(1)[0]
            )
            mean, lo, hi = bootstrap_mean_ci(samples, seed=boot_seed)
            rows.append([cfg.axis, value, method, repr(mean), repr(lo), repr(hi),
                         cfg.repetitions])

    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "curves.csv"), "w", encoding="utf-8",
              newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["axis", "value", "method", "mean_recall", "lo95", "hi95",
             "repetitions"]
        )
        writer.writerows(rows)
    _write_manifest(out_dir, "oracle", config, cfg.seed, {
        "outputs": ["curves.csv"],
        "axis": cfg.axis,
        "values": cfg.values,
        "repetitions": cfg.repetitions,
    })
    return 0


# -- bounds ------------------------------------------------------------------

def cmd_bounds(args) -> int:
    rho_lb = list(args.rho_lb)
    rho_ub = list(args.rho_ub)
    parent = parent_recovery_bound(args.n_env, max(rho_ub), rho_lb)
    graph = graph_recovery_bound(args.n_env, args.mec_size, rho_lb, rho_ub)
    print(f"parent_recovery_bound {parent!r}")
    print(f"graph_recovery_bound {graph!r}")
    return 0


# -- entry point -------------------------------------------------------------

def _add_config_command(sub, name: str, help_: str):
    p = sub.add_parser(name, help=help_)
    p.add_argument("--config", required=True, help="YAML config file")
    p.add_argument("--out", default=None, help="output directory")
    return p


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="mechshift",
        description="Multi-environment causal discovery by mechanism shift scoring.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    _add_config_command(sub, "simulate", "generate a synthetic dataset with ground truth")
    _add_config_command(sub, "discover", "score a candidate class on data files")
    _add_config_command(sub, "oracle", "population recall curves along one axis")
    pb = sub.add_parser("bounds", help="recovery-probability bounds")
    pb.add_argument("--n-env", type=int, required=True)
    pb.add_argument("--mec-size", type=int, required=True)
    pb.add_argument("--rho-lb", type=float, nargs="+", required=True)
    pb.add_argument("--rho-ub", type=float, nargs="+", required=True)

    args, extra = parser.parse_known_args(argv)
    try:
        if args.command == "bounds":
            if extra:
                raise ConfigError(f"unrecognized arguments: {' '.join(extra)}")
            return cmd_bounds(args)
        config = apply_overrides(load_config(args.config), parse_overrides(extra))
        out_dir = _resolve_out(args, config)
        if args.command == "simulate":
            return cmd_simulate(config, out_dir)
        if args.command == "discover":
            return cmd_discover(config, out_dir)
        return cmd_oracle(config, out_dir)
    except MechshiftError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
