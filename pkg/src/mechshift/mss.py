"""The mechanism shift score: count conditional-distribution changes a
candidate DAG implies across environment pairs.

For a candidate graph G and variables X_j, the hard score of G is the number
of (variable, environment-pair) cells whose conditional P(X_j | parents of j
in G) differs between the pair; the soft score replaces each indicator with
1 - p. Both decompose over variables, and the data-generating DAG minimizes
the population score, which is what makes the argmin set a structure
estimator. Scores of a set of candidates share test evaluations through a
cache keyed by (variable, parent set, environment pair), since equal
mechanisms are equal cells regardless of which DAG asked.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .data import MultiEnvDataset, as_dataset
from .exceptions import MechshiftError, ScoreTestError
from .graph import AugmentedDag, Cpdag, Dag, d_separated
from .invariance import InvarianceQuery, InvarianceTest
from .mec import cpdag_of

SOFT_TIE_TOLERANCE = 1e-12


def default_alpha(num_vars: int) -> float:
    """Per-test level with a Bonferroni-style correction over variables."""
    return 0.05 / num_vars


@dataclass(frozen=True)
class InterventionScenario:
    """Ground truth for simulations and oracles.

    ``targets[e]`` is the set of variables whose mechanism environment ``e``
    alters. Under ``resample`` semantics every environment redraws its
    targets independently, so a mechanism differs between two environments
    when either touched it; under ``toggle`` semantics each environment
    switches its targets to one shared alternative, so only the symmetric
    difference differs.
    """

    dag: Dag
    targets: tuple[frozenset[int], ...]
    semantics: str = "resample"

    def __post_init__(self):
        targets = tuple(frozenset(int(v) for v in t) for t in self.targets)
        if not targets:
            raise ValueError("scenario needs at least one environment")
        for e, t in enumerate(targets):
            for v in t:
                if not 0 <= v < self.dag.num_vars:
                    raise ValueError(f"target {v} of environment {e} out of range")
        if self.semantics not in ("resample", "toggle"):
            raise ValueError(f"unknown semantics {self.semantics!r}")
        object.__setattr__(self, "targets", targets)

    @property
    def n_env(self) -> int:
        return len(self.targets)


def pairwise_shift_set(scenario: InterventionScenario, e: int, f: int) -> frozenset[int]:
    """Variables whose mechanism differs between environments ``e < f``."""
    if not 0 <= e < f < scenario.n_env:
        raise ValueError(f"need 0 <= e < f < {scenario.n_env}, got ({e}, {f})")
    if scenario.semantics == "resample":
        return scenario.targets[e] | scenario.targets[f]
    return scenario.targets[e] ^ scenario.targets[f]


def scenario_to_json(scenario: InterventionScenario) -> str:
    from .graph import serialize_graph

    doc = {
        "dag": json.loads(serialize_graph(scenario.dag)),
        "targets": [sorted(t) for t in scenario.targets],
        "semantics": scenario.semantics,
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def scenario_from_json(text: str) -> InterventionScenario:
    from .graph import parse_graph

    try:
        doc = json.loads(text)
        dag = parse_graph(json.dumps(doc["dag"]))
        if not isinstance(dag, Dag):
            raise ValueError("scenario dag must be fully directed")
        targets = tuple(frozenset(t) for t in doc["targets"])
        return InterventionScenario(dag, targets, doc.get("semantics", "resample"))
    except (KeyError, TypeError, ValueError) as err:
        raise MechshiftError(f"bad scenario document: {err}") from err


class OracleScorer:
    """Population scores read off the scenario's augmented truths.

    A cell (j, parents, pair) changes exactly when X_j is d-connected to the
    environment indicator given the parents in the pair's augmented true DAG.
    Verdicts are cached by (pair shift set, variable, parent set), which is
    what makes exhaustive sweeps over many candidate DAGs cheap.
    """

    def __init__(self, scenario: InterventionScenario):
        self.scenario = scenario
        self._augmented: dict[frozenset[int], AugmentedDag] = {}
        self._verdicts: dict[tuple, bool] = {}

    def _augmented_for(self, shifted: frozenset[int]) -> AugmentedDag:
        aug = self._augmented.get(shifted)
        if aug is None:
            aug = AugmentedDag(self.scenario.dag, shifted)
            self._augmented[shifted] = aug
        return aug

    def cell_changes(self, j: int, parents: tuple[int, ...], e: int, f: int) -> bool:
        shifted = pairwise_shift_set(self.scenario, e, f)
        key = (shifted, j, parents)
        verdict = self._verdicts.get(key)
        if verdict is None:
            aug = self._augmented_for(shifted)
            verdict = not d_separated(aug, j, aug.env_index, parents)
            self._verdicts[key] = verdict
        return verdict

    def _check_candidate(self, g: Dag) -> None:
        if g.num_vars != self.scenario.dag.num_vars:
            raise ValueError(
                f"candidate has {g.num_vars} variables, scenario has "
                f"{self.scenario.dag.num_vars}"
            )

    def score_variable(self, g: Dag, j: int, n_env: int | None = None) -> int:
        self._check_candidate(g)
        k = self._env_count(n_env)
        parents = g.parents(j)
        return sum(
            self.cell_changes(j, parents, e, f)
            for e in range(k)
            for f in range(e + 1, k)
        )

    def score(self, g: Dag, n_env: int | None = None) -> int:
        return sum(
            self.score_variable(g, j, n_env) for j in range(g.num_vars)
        )

    def _env_count(self, n_env: int | None) -> int:
        if n_env is None:
            return self.scenario.n_env
        if not 1 <= n_env <= self.scenario.n_env:
            raise ValueError(f"n_env must be in 1..{self.scenario.n_env}")
        return n_env


def oracle_mss_j(g: Dag, scenario: InterventionScenario, j: int) -> int:
    """Population score of variable ``j`` under candidate ``g``."""
    return OracleScorer(scenario).score_variable(g, j)


def oracle_mss(g: Dag, scenario: InterventionScenario) -> int:
    """Population score of candidate ``g``: sum of the per-variable scores."""
    return OracleScorer(scenario).score(g)


# ---------------------------------------------------------------------------
# Reports


@dataclass(frozen=True)
class ScoreReport:
    """Scores of a candidate DAG set plus the argmin summary.

    ``hard_scores[i]`` counts rejected cells of ``dags[i]`` at level
    ``alpha``; ``soft_scores[i]`` sums 1 - p over the same cells. Entries are
    None for candidates excluded after test failures (best-effort runs).
    ``argmin`` holds indices into ``dags`` under the report's mode:
    integer-exact minima for hard, minima within a 1e-12 tolerance for soft.
    ``summary`` is the orientation consensus of the argmin members.
    """

    dags: tuple[Dag, ...]
    num_envs: int
    alpha: float
    mode: str
    test: str
    hard_scores: tuple
    soft_scores: tuple
    hard_by_variable: tuple
    soft_by_variable: tuple
    argmin: tuple[int, ...]
    summary: Cpdag
    cache_hits: int
    cache_misses: int
    failures: tuple = ()

    @property
    def argmin_dags(self) -> tuple[Dag, ...]:
        return tuple(self.dags[i] for i in self.argmin)


def _argmin_indices(scores: Sequence, mode: str) -> tuple[int, ...]:
    valid = [(i, s) for i, s in enumerate(scores) if s is not None]
    if not valid:
        raise MechshiftError("every candidate depends on a failed test")
    best = min(s for _, s in valid)
    if mode == "hard":
        return tuple(i for i, s in valid if s == best)
    return tuple(i for i, s in valid if s <= best + SOFT_TIE_TOLERANCE)


def _summary_of(dags: Sequence[Dag], argmin: Sequence[int]) -> Cpdag:
    return cpdag_of([dags[i] for i in argmin])


def empirical_mss(
    dags: Sequence[Dag],
    data: MultiEnvDataset | Iterable,
    test: InvarianceTest,
    alpha: float | None = None,
    mode: str = "hard",
    use_cache: bool = True,
    best_effort: bool = False,
) -> ScoreReport:
    """Score every candidate DAG against the dataset with one invariance test.

    ``alpha`` defaults to 0.05 / num_vars. ``mode`` selects which score
    drives the argmin set and summary; both scores are always reported. With
    ``use_cache`` each distinct (variable, parents, pair) cell is tested
    once; switching the cache off changes work done, never results, because
    tests are deterministic in their inputs. A failing test aborts with
    :class:`ScoreTestError` unless ``best_effort``, which records the failure
    and drops every candidate whose score depends on it.
    """
    dataset = as_dataset(data)
    dags = tuple(dags)
    if not dags:
        raise ValueError("need at least one candidate DAG")
    d = dataset.n_vars
    for g in dags:
        if g.num_vars != d:
            raise ValueError(
                f"candidate has {g.num_vars} variables, dataset has {d}"
            )
    if mode not in ("hard", "soft"):
        raise ValueError(f"unknown mode {mode!r}")
    if alpha is None:
        alpha = default_alpha(d)
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")

    envs = dataset.environments
    pairs = [
        (e, f) for e in range(len(envs)) for f in range(e + 1, len(envs))
    ]
    cache: dict[tuple, float] = {}
    failed: dict[tuple, str] = {}
    hits = misses = 0

    def cell_p(j: int, parents: tuple[int, ...], e: int, f: int):
        nonlocal hits, misses
        key = (j, parents, e, f)
        if use_cache and key in cache:
            hits += 1
            return cache[key]
        if use_cache and key in failed:
            hits += 1
            return None
        query = InvarianceQuery(j, parents, (e, f))
        try:
            result = test(envs[e], envs[f], query)
        except Exception as err:  # noqa: BLE001 - tagged and re-raised
            if not best_effort:
                raise ScoreTestError(key, err) from err
            misses += 1
            failed[key] = f"{type(err).__name__}: {err}"
            return None
        misses += 1
        if use_cache:
            cache[key] = result.p_value
        return result.p_value

    hard_scores, soft_scores = [], []
    hard_by_var, soft_by_var = [], []
    for g in dags:
        hard_g, soft_g = [], []
        broken = False
        for j in range(d):
            parents = g.parents(j)
            hard_j, soft_j = 0, 0.0
            for e, f in pairs:
                p = cell_p(j, parents, e, f)
                if p is None:
                    broken = True
                    continue
                hard_j += p < alpha
                soft_j += 1.0 - p
            hard_g.append(hard_j)
            soft_g.append(soft_j)
        if broken:
            hard_scores.append(None)
            soft_scores.append(None)
            hard_by_var.append(None)
            soft_by_var.append(None)
        else:
            hard_scores.append(int(sum(hard_g)))
            soft_scores.append(float(sum(soft_g)))
            hard_by_var.append(tuple(hard_g))
            soft_by_var.append(tuple(soft_g))

    scores = hard_scores if mode == "hard" else soft_scores
    argmin = _argmin_indices(scores, mode)
    return ScoreReport(
        dags=dags,
        num_envs=len(envs),
        alpha=float(alpha),
        mode=mode,
        test=getattr(test, "__name__", "custom"),
        hard_scores=tuple(hard_scores),
        soft_scores=tuple(soft_scores),
        hard_by_variable=tuple(hard_by_var),
        soft_by_variable=tuple(soft_by_var),
        argmin=argmin,
        summary=_summary_of(dags, argmin),
        cache_hits=hits,
        cache_misses=misses,
        failures=tuple(sorted((k, m) for k, m in failed.items())),
    )


def oracle_score_report(
    dags: Sequence[Dag],
    scenario: InterventionScenario,
    n_env: int | None = None,
    mode: str = "hard",
) -> ScoreReport:
    """Population-score analogue of :func:`empirical_mss`.

    Soft scores equal the hard counts (each changing cell contributes
    exactly one), so hard and soft argmin sets coincide here.
    """
    dags = tuple(dags)
    if not dags:
        raise ValueError("need at least one candidate DAG")
    if mode not in ("hard", "soft"):
        raise ValueError(f"unknown mode {mode!r}")
    scorer = OracleScorer(scenario)
    k = scorer._env_count(n_env)
    hard_by_var = tuple(
        tuple(scorer.score_variable(g, j, k) for j in range(g.num_vars))
        for g in dags
    )
    hard_scores = tuple(int(sum(row)) for row in hard_by_var)
    soft_by_var = tuple(tuple(float(v) for v in row) for row in hard_by_var)
    argmin = _argmin_indices(hard_scores, "hard")
    return ScoreReport(
        dags=dags,
        num_envs=k,
        alpha=0.0,
        mode=mode,
        test="oracle",
        hard_scores=hard_scores,
        soft_scores=tuple(float(s) for s in hard_scores),
        hard_by_variable=hard_by_var,
        soft_by_variable=soft_by_var,
        argmin=argmin,
        summary=_summary_of(dags, argmin),
        cache_hits=0,
        cache_misses=len(scorer._verdicts),
    )


# ---------------------------------------------------------------------------
# Report serialization


def report_to_json(report: ScoreReport) -> str:
    doc = {
        "num_vars": report.summary.num_vars,
        "num_envs": report.num_envs,
        "alpha": report.alpha,
        "mode": report.mode,
        "test": report.test,
        "dags": [
            {
                "edges": sorted([i, j] for i, j in g.edges),
                "hard_score": report.hard_scores[i],
                "soft_score": report.soft_scores[i],
                "hard_by_variable": _maybe_list(report.hard_by_variable[i]),
                "soft_by_variable": _maybe_list(report.soft_by_variable[i]),
                "argmin": i in report.argmin,
            }
            for i, g in enumerate(report.dags)
        ],
        "summary": {
            "directed": sorted([i, j] for i, j in report.summary.directed),
            "undirected": sorted([i, j] for i, j in report.summary.undirected),
        },
        "cache": {"hits": report.cache_hits, "misses": report.cache_misses},
        "failures": [
            {
                "variable": key[0],
                "parents": sorted(key[1]),
                "env_pair": [key[2], key[3]],
                "error": message,
            }
            for key, message in report.failures
        ],
    }
    if report.summary.names is not None:
        doc["names"] = list(report.summary.names)
    return json.dumps(doc, indent=2) + "\n"


def _maybe_list(row):
    return None if row is None else list(row)


def report_from_json(text: str) -> ScoreReport:
    doc = json.loads(text)
    names = doc.get("names")
    num_vars = doc["num_vars"]
    dags = tuple(
        Dag(num_vars, [tuple(e) for e in entry["edges"]], names)
        for entry in doc["dags"]
    )
    summary = Cpdag(
        num_vars,
        [tuple(e) for e in doc["summary"]["directed"]],
        [tuple(e) for e in doc["summary"]["undirected"]],
        names,
    )
    argmin = tuple(i for i, entry in enumerate(doc["dags"]) if entry["argmin"])
    hard = tuple(entry["hard_score"] for entry in doc["dags"])
    soft = tuple(entry["soft_score"] for entry in doc["dags"])
    hard_by = tuple(
        None if entry["hard_by_variable"] is None else tuple(entry["hard_by_variable"])
        for entry in doc["dags"]
    )
    soft_by = tuple(
        None if entry["soft_by_variable"] is None else tuple(entry["soft_by_variable"])
        for entry in doc["dags"]
    )
    failures = tuple(
        (
            (
                f["variable"],
                tuple(f["parents"]),
                f["env_pair"][0],
                f["env_pair"][1],
            ),
            f["error"],
        )
        for f in doc.get("failures", [])
    )
    return ScoreReport(
        dags=dags,
        num_envs=doc["num_envs"],
        alpha=doc["alpha"],
        mode=doc["mode"],
        test=doc["test"],
        hard_scores=hard,
        soft_scores=soft,
        hard_by_variable=hard_by,
        soft_by_variable=soft_by,
        argmin=argmin,
        summary=summary,
        cache_hits=doc["cache"]["hits"],
        cache_misses=doc["cache"]["misses"],
        failures=failures,
    )


# ---------------------------------------------------------------------------
# Identifiability bounds


def _min_rho(rho, what: str) -> float:
    arr = np.atleast_1d(np.asarray(rho, dtype=float))
    if arr.size == 0:
        raise ValueError(f"{what} must be nonempty")
    if ((arr < 0) | (arr > 1)).any():
        raise ValueError(f"{what} entries must lie in [0, 1]")
    return float(arr.min())


def parent_recovery_bound(n_env: int, rho_ub_j: float, rho_lb) -> float:
    """Lower bound on recovering one variable's parent set from the argmin.

    ``rho_ub_j`` bounds the target's own pairwise shift probability from
    above; ``rho_lb`` bounds every variable's from below (scalar or
    per-variable, the minimum is used). Increasing in ``n_env``, with
    disjoint environment pairs contributing independently, hence the floored
    halving.
    """
    if n_env < 2:
        raise ValueError("need at least two environments")
    if not 0 <= rho_ub_j <= 1:
        raise ValueError("rho_ub_j must lie in [0, 1]")
    rho_min = _min_rho(rho_lb, "rho_lb")
    miss = 1.0 - (1.0 - rho_ub_j) * rho_min
    return max(0.0, 1.0 - miss ** (n_env // 2))


def graph_recovery_bound(n_env: int, mec_size: int, rho_lb, rho_ub) -> float:
    """Lower bound on the argmin over an equivalence class being exactly
    the data-generating DAG, by a union bound over the other members."""
    if n_env < 2:
        raise ValueError("need at least two environments")
    if mec_size < 1:
        raise ValueError("mec_size must be positive")
    lb_min = _min_rho(rho_lb, "rho_lb")
    ub_min = _min_rho(rho_ub, "rho_ub")
    miss = 1.0 - (1.0 - ub_min) * lb_min
    return max(0.0, 1.0 - mec_size * miss ** (n_env // 2))


# ---------------------------------------------------------------------------
# Two-variable special case


def bivariate_identify(scenario: InterventionScenario) -> Dag | None:
    """Population-identify the direction between two variables.

    Returns the strictly lower-scoring orientation, or None when the two
    orientations tie (nothing shifted, or both mechanisms shifted).
    """
    if scenario.dag.num_vars != 2:
        raise ValueError("bivariate identification needs exactly two variables")
    forward = Dag(2, {(0, 1)}, scenario.dag.names)
    backward = Dag(2, {(1, 0)}, scenario.dag.names)
    scorer = OracleScorer(scenario)
    s_fwd, s_bwd = scorer.score(forward), scorer.score(backward)
    if s_fwd < s_bwd:
        return forward
    if s_bwd < s_fwd:
        return backward
    return None
