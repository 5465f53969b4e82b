import numpy as np
import pytest
from scipy import stats

from mechshift import (
    ConfigError,
    Dag,
    DegenerateDataError,
    Mechanism,
    SimConfig,
    pairwise_shift_set,
    sample_er_dag,
    sample_hub_dag,
    sample_scenario,
    simulate,
)
from mechshift.sim import sample_data


def base_config(**overrides):
    fields = dict(
        num_vars=4, n_env=3, density=0.5, shift_count=1, n_samples=50, seed=0
    )
    fields.update(overrides)
    return SimConfig(**fields)


# -- graph samplers -----------------------------------------------------------

def test_er_density_extremes():
    rng = np.random.default_rng(0)
    assert sample_er_dag(5, 0.0, rng).edges == frozenset()
    assert len(sample_er_dag(5, 1.0, rng).edges) == 10


def test_er_mean_edge_count():
    rng = np.random.default_rng(1)
    counts = [len(sample_er_dag(6, 0.3, rng).edges) for _ in range(10_000)]
    assert np.mean(counts) == pytest.approx(4.5, abs=0.15)


def test_hub_two_vertices_single_edge():
    rng = np.random.default_rng(2)
    assert len(sample_hub_dag(2, 1, rng).edges) == 1


def test_hub_draws_are_valid_dags():
    # Dag construction raises on a cycle, so drawing is the whole check.
    rng = np.random.default_rng(3)
    for _ in range(10_000):
        sample_hub_dag(6, 1, rng)


def test_hub_degrees_heavier_tailed_than_er():
    # Same mean degree: hub with one attachment has d-1 edges, matched by
    # density 2/d. Preferential attachment should spread degrees wider.
    rng = np.random.default_rng(4)
    d = 8

    def degree_var(g):
        deg = np.zeros(d)
        for i, j in g.edges:
            deg[i] += 1
            deg[j] += 1
        return deg.var()

    hub = np.mean([degree_var(sample_hub_dag(d, 1, rng)) for _ in range(10_000)])
    er = np.mean([degree_var(sample_er_dag(d, 2.0 / d, rng)) for _ in range(10_000)])
    assert hub / er > 1.0


def test_sampler_input_validation():
    rng = np.random.default_rng(5)
    with pytest.raises(ValueError):
        sample_er_dag(3, 1.5, rng)
    with pytest.raises(ValueError):
        sample_hub_dag(1, 1, rng)
    with pytest.raises(ValueError):
        sample_hub_dag(4, 4, rng)


# -- scenarios ----------------------------------------------------------------

def test_config_validation():
    with pytest.raises(ConfigError):
        base_config(shift_count=None)  # neither count nor fraction
    with pytest.raises(ConfigError):
        base_config(shift_fraction=0.5)  # both
    with pytest.raises(ConfigError):
        base_config(graph_model="lattice")
    with pytest.raises(ConfigError):
        base_config(shift_count=9)
    with pytest.raises(ConfigError):
        base_config(semantics="replace")
    with pytest.raises(ConfigError):
        base_config(num_vars=2, shift_count=2, require_sparse=True)
    with pytest.raises(ConfigError):
        base_config(seed=None)  # empty YAML override; would draw OS entropy


def test_shift_fraction_resolves_to_count():
    cfg = base_config(num_vars=6, shift_count=None, shift_fraction=0.5)
    assert cfg.resolved_shift_count() == 3
    scenario, _ = sample_scenario(cfg)
    assert all(len(t) == 3 for t in scenario.targets)


def test_zero_shifts_leave_mechanisms_identical():
    cfg = base_config(shift_count=0)
    scenario, per_env = sample_scenario(cfg)
    assert all(t == frozenset() for t in scenario.targets)
    assert all(mechs == per_env[0] for mechs in per_env)


def test_shifted_mechanisms_differ_from_baseline():
    cfg = base_config(num_vars=3, n_env=2, shift_count=3, density=1.0)
    _, per_env = sample_scenario(cfg)
    for j in range(3):
        assert per_env[1][j] != per_env[0][j]


def test_toggle_reuses_one_alternative():
    cfg = base_config(num_vars=1, n_env=3, shift_count=1, density=0.0,
                      semantics="toggle")
    scenario, per_env = sample_scenario(cfg)
    # Every environment switched the same variable to the same alternative.
    assert per_env[0] == per_env[1] == per_env[2]
    assert pairwise_shift_set(scenario, 0, 1) == frozenset()


def test_scenario_reproducible():
    cfg = base_config(seed=77)
    first = sample_scenario(cfg)
    second = sample_scenario(cfg)
    assert first == second


# -- data ---------------------------------------------------------------------

def test_root_gaussian_columns_normal():
    mechs = [Mechanism((), (), 1.0, "gaussian") for _ in range(3)]
    values = sample_data(Dag(3, []), mechs, 5000, np.random.default_rng(6))
    for j in range(3):
        assert stats.kstest(values[:, j], "norm").pvalue > 0.01


def test_square_transform_nearly_noiseless():
    mechs = [
        Mechanism((), (), 1.0, "gaussian"),
        Mechanism((1.0,), ("square",), 1e-6, "gaussian"),
    ]
    values = sample_data(Dag(2, [(0, 1)]), mechs, 2000, np.random.default_rng(7))
    corr = np.corrcoef(values[:, 1], values[:, 0] ** 2)[0, 1]
    assert corr == pytest.approx(1.0, abs=1e-6)


def test_uniform_root_support():
    mechs = [Mechanism((), (), 2.0, "uniform")]
    values = sample_data(Dag(1, []), mechs, 4000, np.random.default_rng(8))
    assert values.min() >= 2.0
    assert values.max() <= 6.0


def test_centered_uniform_flag():
    mechs = [Mechanism((), (), 1.0, "uniform")]
    values = sample_data(
        Dag(1, []), mechs, 4000, np.random.default_rng(9), centered_uniform=True
    )
    assert -1.0 <= values.min() < 0.0 < values.max() <= 1.0


def test_sinc_fills_removable_singularity():
    from mechshift.sim import _apply_transform

    x = np.array([-np.pi, 0.0, np.pi / 2])
    out = _apply_transform("sinc", x)
    assert out[1] == 1.0
    assert out[0] == pytest.approx(0.0, abs=1e-12)
    assert out[2] == pytest.approx(2.0 / np.pi)


def test_overflowing_chain_raises_after_retries():
    # Strictly positive uniform roots through repeated cubes overflow every
    # row, so resampling cannot help.
    d = 8
    edges = [(j, j + 1) for j in range(d - 1)]
    mechs = [Mechanism((), (), 1.0, "uniform")]
    mechs += [Mechanism((2.5,), ("cube",), 1.0, "uniform") for _ in range(d - 1)]
    with pytest.raises(DegenerateDataError):
        sample_data(Dag(d, edges), mechs, 20, np.random.default_rng(10))


def test_mechanism_shape_checked():
    with pytest.raises(ValueError):
        sample_data(
            Dag(2, [(0, 1)]),
            [Mechanism((), (), 1.0, "gaussian")] * 2,
            10,
            np.random.default_rng(11),
        )


# -- end to end ---------------------------------------------------------------

def test_simulate_shapes_and_determinism():
    cfg = base_config(num_vars=5, n_env=4, n_samples=120, seed=21)
    scenario, per_env, dataset = simulate(cfg)
    assert scenario.n_env == 4
    assert len(per_env) == 4
    assert dataset.n_env == 4
    assert dataset.schema == ("x0", "x1", "x2", "x3", "x4")
    for env in dataset.environments:
        assert env.values.shape == (120, 5)
        assert np.isfinite(env.values).all()
    again = simulate(cfg)
    assert again[0] == scenario
    for a, b in zip(dataset.environments, again[2].environments):
        assert np.array_equal(a.values, b.values)


def test_environment_substreams():
    # Each environment draws from its own spawned substream, so any single
    # environment can be regenerated in isolation.
    cfg = base_config(n_env=3, seed=33)
    scenario, per_env, dataset = simulate(cfg)
    children = np.random.SeedSequence(cfg.seed).spawn(1 + cfg.n_env)
    for e in range(cfg.n_env):
        alone = sample_data(
            scenario.dag,
            per_env[e],
            cfg.n_samples,
            np.random.default_rng(children[1 + e]),
        )
        assert np.array_equal(dataset.env(e).values, alone)
