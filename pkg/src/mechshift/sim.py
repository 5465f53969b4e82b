"""Synthetic multi-environment data with known ground truth.

Each variable is an additive nonlinear function of its parents,

    X_j = sum_i b_ji * f_ji(X_i) + s_j * eps_j,

with coefficients b ~ U(0.5, 2.5), transforms f drawn uniformly from
{square, cube, tanh, sinc}, noise eps either standard normal or U(1, 3)
(equal probability), and baseline scale s = 1. An environment that shifts a
variable's mechanism redraws all of that row: coefficients, transforms,
noise family, and a scale s ~ U(1, 3). Unshifted rows are copied by value,
so mechanism equality across environments is literal equality.

Randomness: a master seed feeds one substream for structure (graph, targets,
mechanisms) and one per environment for data, so environments can be sampled
concurrently without changing results.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data import EnvSample, MultiEnvDataset, default_schema
from .exceptions import ConfigError, DegenerateDataError
from .graph import Dag
from .mss import InterventionScenario

TRANSFORMS = ("square", "cube", "tanh", "sinc")
NOISE_FAMILIES = ("gaussian", "uniform")


def _apply_transform(tag: str, x: np.ndarray) -> np.ndarray:
    if tag == "square":
        return x * x
    if tag == "cube":
        return x * x * x
    if tag == "tanh":
        return np.tanh(x)
    if tag == "sinc":
        # sin(x) / x with the removable singularity filled in.
        out = np.ones_like(x)
        nz = x != 0
        out[nz] = np.sin(x[nz]) / x[nz]
        return out
    raise ValueError(f"unknown transform {tag!r}")


@dataclass(frozen=True)
class Mechanism:
    """One variable's assignment in one environment."""

    coefficients: tuple[float, ...]
    transforms: tuple[str, ...]
    noise_scale: float
    noise_family: str

    def __post_init__(self):
        if len(self.coefficients) != len(self.transforms):
            raise ValueError("one transform per coefficient required")
        for tag in self.transforms:
            if tag not in TRANSFORMS:
                raise ValueError(f"unknown transform {tag!r}")
        if self.noise_scale <= 0:
            raise ValueError("noise scale must be positive")
        if self.noise_family not in NOISE_FAMILIES:
            raise ValueError(f"unknown noise family {self.noise_family!r}")


@dataclass(frozen=True)
class SimConfig:
    """Scenario-generation settings.

    Exactly one of ``shift_count``/``shift_fraction`` must be set; a fraction
    is rounded to a count. With ``require_sparse`` every environment must
    shift at least one but not all mechanisms.
    """

    num_vars: int
    n_env: int
    graph_model: str = "erdos_renyi"
    density: float = 0.3
    attachment: int = 1
    shift_count: int | None = None
    shift_fraction: float | None = None
    n_samples: int = 500
    seed: int = 0
    semantics: str = "resample"
    centered_uniform: bool = False
    require_sparse: bool = False
    retry_limit: int = 100

    def __post_init__(self):
        if self.num_vars < 1:
            raise ConfigError("sim.num_vars: must be positive")
        if self.n_env < 1:
            raise ConfigError("sim.n_env: must be positive")
        if self.graph_model not in ("erdos_renyi", "hub"):
            raise ConfigError(f"sim.graph_model: unknown model {self.graph_model!r}")
        if not 0.0 <= self.density <= 1.0:
            raise ConfigError("sim.density: must lie in [0, 1]")
        if self.graph_model == "hub" and not 1 <= self.attachment < max(self.num_vars, 2):
            raise ConfigError("sim.attachment: must lie in 1..num_vars-1")
        if (self.shift_count is None) == (self.shift_fraction is None):
            raise ConfigError(
                "sim.shift_count/sim.shift_fraction: exactly one must be set"
            )
        if self.shift_fraction is not None and not 0.0 <= self.shift_fraction <= 1.0:
            raise ConfigError("sim.shift_fraction: must lie in [0, 1]")
        count = self.resolved_shift_count()
        if not 0 <= count <= self.num_vars:
            raise ConfigError(
                f"sim.shift_count: {count} outside 0..{self.num_vars}"
            )
        if self.require_sparse and not 0 < count < self.num_vars:
            raise ConfigError(
                f"sim.shift_count: sparsity requires 0 < {count} < {self.num_vars}"
            )
        if self.n_samples < 2:
            raise ConfigError("sim.n_samples: need at least two samples")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            # None would draw fresh OS entropy, making the run unreproducible.
            raise ConfigError("sim.seed: must be an integer")
        if self.semantics not in ("resample", "toggle"):
            raise ConfigError(f"sim.semantics: unknown semantics {self.semantics!r}")
        if self.retry_limit < 1:
            raise ConfigError("sim.retry_limit: must be positive")

    def resolved_shift_count(self) -> int:
        if self.shift_count is not None:
            return self.shift_count
        return int(round(self.shift_fraction * self.num_vars))


def sample_er_dag(num_vars: int, density: float, rng: np.random.Generator) -> Dag:
    """Coin-flip each i < j edge at ``density``, then relabel uniformly."""
    if num_vars < 1:
        raise ValueError("num_vars must be positive")
    if not 0.0 <= density <= 1.0:
        raise ValueError("density must lie in [0, 1]")
    edges = []
    for i in range(num_vars):
        for j in range(i + 1, num_vars):
            if rng.random() < density:
                edges.append((i, j))
    perm = rng.permutation(num_vars)
    return Dag(num_vars, [(int(perm[i]), int(perm[j])) for i, j in edges])


def sample_hub_dag(num_vars: int, attachment: int, rng: np.random.Generator) -> Dag:
    """Preferential attachment; edges run from existing vertices into the new one.

    Each arriving vertex connects to ``attachment`` distinct existing
    vertices chosen proportionally to their current degree (uniformly while
    no edges exist). A uniform relabeling removes the arrival order.
    """
    if num_vars < 2:
        raise ValueError("hub model needs at least two vertices")
    if not 1 <= attachment < num_vars:
        raise ValueError("attachment must lie in 1..num_vars-1")
    degree = np.zeros(num_vars)
    edges = []
    for v in range(1, num_vars):
        m = min(attachment, v)
        candidates = np.arange(v)
        weights = degree[:v]
        chosen: list[int] = []
        for _ in range(m):
            avail = np.array([c for c in candidates if c not in chosen])
            w = weights[avail]
            if w.sum() <= 0:
                pick = int(rng.choice(avail))
            else:
                pick = int(rng.choice(avail, p=w / w.sum()))
            chosen.append(pick)
        for u in chosen:
            edges.append((u, v))
            degree[u] += 1
            degree[v] += 1
    perm = rng.permutation(num_vars)
    return Dag(num_vars, [(int(perm[i]), int(perm[j])) for i, j in edges])


def _draw_mechanism(
    n_parents: int, rng: np.random.Generator, baseline: bool
) -> Mechanism:
    coefficients = tuple(float(c) for c in rng.uniform(0.5, 2.5, size=n_parents))
    transforms = tuple(str(rng.choice(TRANSFORMS)) for _ in range(n_parents))
    family = str(rng.choice(NOISE_FAMILIES))
    scale = 1.0 if baseline else float(rng.uniform(1.0, 3.0))
    return Mechanism(coefficients, transforms, scale, family)


def sample_scenario(
    config: SimConfig, rng: np.random.Generator | None = None
) -> tuple[InterventionScenario, tuple[tuple[Mechanism, ...], ...]]:
    """Draw a graph, shift targets, and per-environment mechanisms.

    Returns the scenario plus one mechanism tuple per environment. Under
    ``resample`` semantics each environment redraws its targets
    independently; under ``toggle`` semantics a single alternative mechanism
    per variable is drawn once and switched in wherever targeted.
    """
    if rng is None:
        rng = np.random.default_rng(
            np.random.SeedSequence(config.seed).spawn(1 + config.n_env)[0]
        )
    d = config.num_vars
    if config.graph_model == "erdos_renyi":
        dag = sample_er_dag(d, config.density, rng)
    else:
        dag = sample_hub_dag(d, config.attachment, rng)
    count = config.resolved_shift_count()
    targets = tuple(
        frozenset(int(v) for v in rng.choice(d, size=count, replace=False))
        for _ in range(config.n_env)
    )
    scenario = InterventionScenario(dag, targets, config.semantics)

    baseline = tuple(
        _draw_mechanism(len(dag.parents(j)), rng, baseline=True) for j in range(d)
    )
    per_env = []
    if config.semantics == "toggle":
        alternative = tuple(
            _draw_mechanism(len(dag.parents(j)), rng, baseline=False)
            for j in range(d)
        )
        for e in range(config.n_env):
            per_env.append(tuple(
                alternative[j] if j in targets[e] else baseline[j]
                for j in range(d)
            ))
    else:
        for e in range(config.n_env):
            per_env.append(tuple(
                _draw_mechanism(len(dag.parents(j)), rng, baseline=False)
                if j in targets[e]
                else baseline[j]
                for j in range(d)
            ))
    return scenario, tuple(per_env)


def sample_data(
    dag: Dag,
    mechanisms: Sequence[Mechanism],
    n_samples: int,
    rng: np.random.Generator,
    centered_uniform: bool = False,
    retry_limit: int = 100,
) -> np.ndarray:
    """Ancestral sampling of ``n_samples`` rows; non-finite rows are redrawn.

    Deep cube chains can overflow float64. Offending rows are resampled up to
    ``retry_limit`` times before giving up with an error.
    """
    if len(mechanisms) != dag.num_vars:
        raise ValueError("one mechanism per variable required")
    for j in range(dag.num_vars):
        if len(mechanisms[j].coefficients) != len(dag.parents(j)):
            raise ValueError(f"mechanism of variable {j} does not match its parents")
    order = dag.topological_order()

    def draw(count: int) -> np.ndarray:
        out = np.empty((count, dag.num_vars))
        with np.errstate(over="ignore", invalid="ignore"):
            for j in order:
                mech = mechanisms[j]
                if mech.noise_family == "gaussian":
                    noise = rng.standard_normal(count)
                elif centered_uniform:
                    noise = rng.uniform(-1.0, 1.0, size=count)
                else:
                    noise = rng.uniform(1.0, 3.0, size=count)
                total = mech.noise_scale * noise
                for coef, tag, parent in zip(
                    mech.coefficients, mech.transforms, dag.parents(j)
                ):
                    total = total + coef * _apply_transform(tag, out[:, parent])
                out[:, j] = total
        return out

    values = draw(n_samples)
    for _ in range(retry_limit):
        bad = ~np.isfinite(values).all(axis=1)
        if not bad.any():
            return values
        values[bad] = draw(int(bad.sum()))
    raise DegenerateDataError(
        f"non-finite samples persisted through {retry_limit} redraws"
    )


def simulate(config: SimConfig) -> tuple[
    InterventionScenario, tuple[tuple[Mechanism, ...], ...], MultiEnvDataset
]:
    """Scenario plus data: the one-call entry point the CLI uses."""
    streams = np.random.SeedSequence(config.seed).spawn(1 + config.n_env)
    scenario, per_env = sample_scenario(config, np.random.default_rng(streams[0]))
    envs = []
    for e in range(config.n_env):
        values = sample_data(
            scenario.dag,
            per_env[e],
            config.n_samples,
            np.random.default_rng(streams[1 + e]),
            centered_uniform=config.centered_uniform,
            retry_limit=config.retry_limit,
        )
        envs.append(EnvSample(e, values))
    dataset = MultiEnvDataset(default_schema(config.num_vars), tuple(envs))
    return scenario, per_env, dataset
