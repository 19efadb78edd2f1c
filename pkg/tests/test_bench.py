"""
Unit tests for convergence tables and experiment runs
"""
import pytest
import numpy as np
import pandas as pd
import sys
import os

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from src.bench import (
    POISSON_QUANTITIES, ConvergenceTable, apply_preset, build_problem, estimate_order, run,
    solve_once, train,
)
from src.config import ExperimentConfig
from src.db import RunDatabase
from src.errors import ConfigError, InvalidErrorValueError
from src.shallow_net import load_net


def test_estimate_order_second_order():
    assert estimate_order([4e-3, 1e-3], [0.1, 0.05]) == pytest.approx([2.0])
    orders = estimate_order([1.6e-2, 4e-3, 1e-3], [0.2, 0.1, 0.05])
    assert orders == pytest.approx([2.0, 2.0])


def test_estimate_order_equal_errors():
    assert estimate_order([1e-3, 1e-3], [0.1, 0.05]) == pytest.approx([0.0])


def test_estimate_order_rejects_bad_input():
    with pytest.raises(InvalidErrorValueError):
        estimate_order([1e-3, 0.0], [0.1, 0.05])
    with pytest.raises(InvalidErrorValueError):
        estimate_order([1e-3, np.nan], [0.1, 0.05])
    with pytest.raises(ValueError):
        estimate_order([1e-3, 1e-4], [0.1, 0.06])
    with pytest.raises(ValueError):
        estimate_order([1e-3], [0.1])


def sample_table():
    table = ConvergenceTable(POISSON_QUANTITIES)
    table.add_row(64, 1 / 32, {"u": 4e-4, "gradu": 8e-4}, None, 1.5, 0.25)
    table.add_row(128, 1 / 64, {"u": 1e-4, "gradu": 2e-4}, None, 1.5, 0.5)
    return table


def test_table_frame_columns():
    df = sample_table().to_frame(timings=False)
    assert list(df.columns) == [
        "n", "h", "err_u", "err_gradu", "order_u", "order_gradu", "train_loss", "converged",
    ]
    assert np.isnan(df["order_u"].iloc[0])
    assert df["order_u"].iloc[1] == pytest.approx(2.0)
    assert "train_seconds" in sample_table().to_frame(timings=True).columns


def test_table_csv_is_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    sample_table().to_csv(str(a))
    sample_table().to_csv(str(b))
    assert a.read_bytes() == b.read_bytes()
    assert "seconds" not in a.read_text().splitlines()[0]


def test_table_orders_with_zero_error():
    table = ConvergenceTable(("u",))
    table.add_row(16, 0.125, {"u": 1e-3}, None)
    table.add_row(32, 0.0625, {"u": 0.0}, None)
    assert np.isnan(table.orders("u")[0])


def test_apply_preset():
    config = apply_preset(ExperimentConfig(), "example3")
    assert config.width == 150
    assert config.n_samples == 300
    assert config.mode == "successive"
    assert config.sweep == [80, 160, 320, 640]

    config = apply_preset(ExperimentConfig(), "stokes")
    assert config.kind == "stokes"
    assert config.n_outputs == 3

    with pytest.raises(ConfigError):
        apply_preset(ExperimentConfig(), "example9")


def test_build_problem_from_block():
    config = ExperimentConfig(preset=None, problem={
        "geometry": "circle 0.5",
        "bounds": "-1 1",
        "u_minus": "x^2 + y^2",
        "u_plus": "0.25",
    })
    problem = build_problem(config)
    assert problem.dim == 2
    assert problem.exact is not None


def small_config(tmp_path, **overrides):
    config = apply_preset(ExperimentConfig(), "example1")
    config.width = 8
    config.n_samples = 30
    config.lm.max_epochs = 10
    config.sweep = [64, 128]
    config.out_dir = str(tmp_path / "out")
    config.db_path = None
    for key, value in overrides.items():
        setattr(config, key, value)
    return config


def test_run_writes_outputs(tmp_path):
    result = run(small_config(tmp_path))
    df = pd.read_csv(result.paths["table"])
    assert list(df["n"]) == [64, 128]
    assert np.all(df["err_u"] > 0)
    assert os.path.exists(result.paths["net"])
    assert os.path.exists(result.paths["history"])
    assert result.run_id is None


def test_run_is_reproducible(tmp_path):
    first = run(small_config(tmp_path / "a"))
    second = run(small_config(tmp_path / "b"))
    with open(first.paths["table"], "rb") as fa, open(second.paths["table"], "rb") as fb:
        assert fa.read() == fb.read()


def test_run_records_to_database(tmp_path):
    db_path = str(tmp_path / "runs.db")
    result = run(small_config(tmp_path, db_path=db_path))
    db = RunDatabase(db_path)
    runs = db.load_runs("poisson")
    assert list(runs["run_id"]) == [result.run_id]
    conv = db.load_convergence(result.run_id)
    assert len(conv) == 2 * len(POISSON_QUANTITIES)
    assert len(db.load_train_history(result.run_id)) == len(result.report.loss_history)


def test_successive_mode_labels_coarse_grid(tmp_path):
    config = small_config(tmp_path, mode="successive", sweep=[64, 128, 256])
    df = run(config).table.to_frame(timings=False)
    assert list(df["n"]) == [64, 128]


def test_train_then_solve_with_saved_net(tmp_path):
    config = small_config(tmp_path)
    net, _, paths = train(config)
    assert np.array_equal(load_net(paths["net"]).parameters(), net.parameters())

    config.dump_fields = True
    sol, errors = solve_once(config, 64, paths["net"])
    assert np.array_equal(sol.net.parameters(), net.parameters())
    assert errors["boundary"] <= 1e-12
    assert set(errors) == {"boundary", "u", "gradu"}
    assert os.path.exists(os.path.join(config.out_dir, "example1_n64.npz"))


def test_run_rejects_missing_exact_solution(tmp_path):
    config = small_config(tmp_path, preset="example3", name="example3")
    config.mode = "exact"
    with pytest.raises(ConfigError):
        run(config)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
