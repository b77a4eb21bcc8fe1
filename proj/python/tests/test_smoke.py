import math

import numpy as np
import pytest

import atpinn

TINY = [
    "network.hidden_layers=2",
    "network.width=6",
    "training.iterations=1",
    "training.samples=20*2",
    "training.epochs=3*2",
    "training.n_boundary=16",
    "attack.steps=2",
    "evaluation.grid_points=8",
]


def test_registry():
    assert set(atpinn.problem_names()) == {"poisson2d", "burgers", "multiscale", "allen_cahn"}
    names = atpinn.preset_names()
    assert len(names) == 20
    assert "poisson-at-pinn" in names
    assert "n_boundary = 200" in atpinn.preset_text("poisson-at-pinn")


def test_resolve_config_and_errors():
    text = atpinn.resolve_config("allen-cahn-at-pinn", ["attack.steps=3"])
    assert "steps = 3" in text
    assert "initial_time_max = 0.2" in text
    with pytest.raises(atpinn.ConfigError):
        atpinn.resolve_config("poisson-at-pinn", ["experiment.strategy=annealing"])
    with pytest.raises(atpinn.ConfigError):
        atpinn.resolve_config("no-such-preset")


def test_samplers():
    pts = atpinn.lhs(50, [-1.0, 0.0], [1.0, 2.0], 3)
    assert pts.shape == (50, 2)
    assert pts[:, 0].min() >= -1.0 and pts[:, 0].max() <= 1.0
    assert pts[:, 1].min() >= 0.0 and pts[:, 1].max() <= 2.0
    # One point per stratum in each dimension.
    assert sorted(np.floor((pts[:, 0] + 1.0) / 2.0 * 50).astype(int)) == list(range(50))
    assert np.array_equal(atpinn.uniform(10, [0.0], [1.0], 5), atpinn.uniform(10, [0.0], [1.0], 5))


def test_oracles():
    assert atpinn.burgers_reference(0.3, 0.0) == pytest.approx(-math.sin(math.pi * 0.3))
    assert abs(atpinn.burgers_reference(0.0, 0.5)) < 1e-12
    assert atpinn.relative_l2([0.0, 0.0], [3.0, 4.0]) == 1.0


def test_run_and_checkpoint(tmp_path):
    runs = atpinn.run("poisson-at-pinn", TINY, seed=2, out=str(tmp_path))
    assert len(runs) == 1
    metrics = runs[0]["metrics"]
    assert [r["k"] for r in metrics] == [0, 1]
    assert metrics[-1]["cumulative_samples"] == 40
    assert metrics[-1]["metric_kind"] == "relative_l2"
    assert (tmp_path / "seed_2" / "metrics.csv").exists()

    net = atpinn.load_checkpoint(str(tmp_path / "seed_2" / "checkpoint_1.txt"))
    assert net.layer_sizes == [2, 6, 6, 1]
    x = atpinn.lhs(16, [-1.0, -1.0], [1.0, 1.0], 0)
    u = net.forward(x)
    assert u.shape == (16,)
    assert np.all(np.isfinite(u))
    r = atpinn.residual("poisson2d", net, x)
    assert r.shape == (16,)

    again = atpinn.run("poisson-at-pinn", TINY, seed=2, out=str(tmp_path / "again"))
    assert again[0]["metrics"] == metrics


def test_numerical_failure(tmp_path):
    with pytest.raises(atpinn.NumericalError):
        atpinn.run("poisson-uniform", TINY + ["training.learning_rate=1e308"], seed=0, out=str(tmp_path))
