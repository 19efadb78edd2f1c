"""
Convergence studies: train once, sweep grids, tabulate max-norm errors and orders
"""
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple
import logging
import os
import time

import numpy as np
import pandas as pd

from .config import CSV_FLOAT_FORMAT, ExperimentConfig
from .db import RunDatabase
from .errors import ConfigError, InvalidErrorValueError
from .hybrid_solver import (
    HybridSolution,
    HybridSolver,
    boundary_error,
    error_report,
    save_fields,
    successive_error,
)
from .problems import PRESET_SETTINGS, PoissonInterfaceProblem, preset_problem, problem_from_config
from .shallow_net import ShallowNet, load_net, save_net
from .stokes import StokesSolver, manufactured_stokes_example, stokes_errors
from .training import TrainReport

logger = logging.getLogger(__name__)

POISSON_QUANTITIES = ("u", "gradu")
STOKES_QUANTITIES = ("u1", "u2", "p", "divu", "gradp")
TIMING_COLUMNS = ("train_seconds", "solve_seconds")


def estimate_order(errors: Sequence[float], hs: Sequence[float]) -> List[float]:
    """
    Observed convergence orders between successive refinements

    Args:
        errors: Max-norm errors, one per grid
        hs: Mesh sizes, each half the previous

    Returns:
        log2(errors[i] / errors[i+1]) for every adjacent pair
    """
    errors = np.asarray(errors, dtype=float)
    hs = np.asarray(hs, dtype=float)
    if errors.shape != hs.shape or errors.size < 2:
        raise ValueError("need matching error and mesh-size lists with at least two entries")
    if np.any(~np.isfinite(errors)) or np.any(errors <= 0):
        raise InvalidErrorValueError(f"errors must be positive and finite, got {errors.tolist()}")
    if not np.allclose(hs[:-1] / hs[1:], 2.0, rtol=1e-10):
        raise ValueError(f"mesh sizes must halve at every step, got {hs.tolist()}")
    return np.log2(errors[:-1] / errors[1:]).tolist()


@dataclass
class ConvergenceTable:
    """Rows of (n, h, errors, train loss, timings); orders are derived on demand"""

    quantities: Tuple[str, ...]
    rows: List[Dict] = field(default_factory=list)

    def add_row(self, n: int, h: float, errors: Dict[str, float], report: Optional[TrainReport],
                train_seconds: float = 0.0, solve_seconds: float = 0.0):
        row = {"n": int(n), "h": float(h)}
        for q in self.quantities:
            row[f"err_{q}"] = float(errors[q])
        row["train_loss"] = float(report.final_loss) if report else float("nan")
        row["converged"] = bool(report.converged) if report else False
        row["train_seconds"] = float(train_seconds)
        row["solve_seconds"] = float(solve_seconds)
        self.rows.append(row)

    def orders(self, quantity: str) -> List[float]:
        """Orders between adjacent rows; NaN where an error is not positive"""
        errs = [r[f"err_{quantity}"] for r in self.rows]
        hs = [r["h"] for r in self.rows]
        if len(errs) < 2:
            return []
        try:
            return estimate_order(errs, hs)
        except InvalidErrorValueError:
            logger.warning(f"zero or invalid error for '{quantity}', order left undefined")
            out = []
            for e0, e1 in zip(errs[:-1], errs[1:]):
                out.append(float(np.log2(e0 / e1)) if e0 > 0 and e1 > 0 else float("nan"))
            return out

    def to_frame(self, timings: bool = True) -> pd.DataFrame:
        """DataFrame with err_<q> and order_<q> columns (order empty on the first row)"""
        df = pd.DataFrame(self.rows)
        if df.empty:
            return df
        columns = ["n", "h"] + [f"err_{q}" for q in self.quantities]
        for q in self.quantities:
            df[f"order_{q}"] = [np.nan] + self.orders(q)
            columns.append(f"order_{q}")
        columns += ["train_loss", "converged"]
        if timings:
            columns += list(TIMING_COLUMNS)
        return df[columns]

    def to_csv(self, path: str, timings: bool = False):
        """Write the table; wall times only when asked so reruns are byte-identical"""
        self.to_frame(timings).to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT)


@dataclass
class RunResult:
    table: ConvergenceTable
    report: TrainReport
    paths: Dict[str, str]
    run_id: Optional[str] = None


def apply_preset(config: ExperimentConfig, preset: str) -> ExperimentConfig:
    """Copy a preset's network size, sweep and error mode onto the config"""
    if preset not in PRESET_SETTINGS:
        raise ConfigError(f"unknown preset '{preset}', expected one of {sorted(PRESET_SETTINGS)}")
    settings = PRESET_SETTINGS[preset]
    config.preset = preset
    config.name = preset
    config.kind = settings.kind
    config.width = settings.width
    config.n_samples = settings.n_samples
    config.n_outputs = settings.n_outputs
    config.sweep = list(settings.sweep)
    config.mode = settings.mode
    config.problem = {}
    return config


def build_problem(config: ExperimentConfig) -> PoissonInterfaceProblem:
    if config.preset:
        return preset_problem(config.preset)
    return problem_from_config(config.problem)


def _output_path(config: ExperimentConfig, suffix: str) -> str:
    os.makedirs(config.out_dir, exist_ok=True)
    return os.path.join(config.out_dir, f"{config.name}_{suffix}")


def _write_training(config: ExperimentConfig, net: ShallowNet, report: TrainReport) -> Dict[str, str]:
    paths = {
        "net": _output_path(config, "net.txt"),
        "history": _output_path(config, "train_history.csv"),
    }
    save_net(paths["net"], net)
    report.to_frame().to_csv(paths["history"], index=False, float_format=CSV_FLOAT_FORMAT)
    return paths


def _record(config: ExperimentConfig, table: ConvergenceTable, report: TrainReport) -> Optional[str]:
    if not config.db_path:
        return None
    db = RunDatabase(config.db_path)
    run_id = db.save_run(config.kind, config.to_dict())
    db.save_convergence(run_id, table.to_frame(timings=True), table.quantities)
    db.save_train_history(run_id, report.to_frame())
    return run_id


def poisson_solver(config: ExperimentConfig, net_path: Optional[str] = None) -> HybridSolver:
    """Solver for the configured problem, optionally seeded with a saved network"""
    solver = HybridSolver(build_problem(config), config.net_config(), config.lm_config())
    if net_path:
        solver.net = load_net(net_path)
    return solver


def train(config: ExperimentConfig) -> Tuple[ShallowNet, TrainReport, Dict[str, str]]:
    """Fit the jump network only and write the net file and loss history"""
    config.validate()
    if config.kind == "stokes":
        solver = StokesSolver(manufactured_stokes_example(), config.net_config(), config.lm_config())
    else:
        solver = poisson_solver(config)
    report = solver.train()
    return solver.net, report, _write_training(config, solver.net, report)


def solve_once(config: ExperimentConfig, n: int,
               net_path: Optional[str] = None) -> Tuple[HybridSolution, Dict[str, float]]:
    """
    One Poisson solve at resolution n

    Returns:
        (solution, errors) where errors holds u/gradu when an exact solution is known and
        always the boundary error
    """
    config.validate()
    solver = poisson_solver(config, net_path)
    sol = solver.solve_on(n, retrain=config.retrain)
    errors = {"boundary": boundary_error(sol, solver.problem)}
    if solver.problem.exact is not None:
        errors.update(error_report(sol, solver.problem))
    if config.dump_fields:
        save_fields(_output_path(config, f"n{n}.npz"), sol)
    return sol, errors


def run(config: ExperimentConfig) -> RunResult:
    """
    Poisson convergence study

    Trains once (or per grid with retrain), sweeps the grids in order and writes
    <name>_convergence.csv, <name>_net.txt and <name>_train_history.csv to out_dir.
    In successive mode each row compares grid n with grid 2n.
    """
    config.validate()
    if config.kind != "poisson":
        raise ConfigError(f"run() handles Poisson experiments, got kind '{config.kind}'")
    solver = poisson_solver(config)
    problem = solver.problem
    if config.mode == "exact" and problem.exact is None:
        raise ConfigError(f"'{config.name}' has no exact solution, use mode = successive")

    start = time.perf_counter()
    report = solver.train()
    train_seconds = time.perf_counter() - start
    paths = _write_training(config, solver.net, report)

    table = ConvergenceTable(POISSON_QUANTITIES)
    previous = None
    for n in config.sweep:
        start = time.perf_counter()
        sol = solver.solve_on(n, retrain=config.retrain)
        solve_seconds = time.perf_counter() - start
        if config.retrain:
            train_seconds = 0.0

        b_err = boundary_error(sol, problem)
        if b_err > 1e-12:
            logger.warning(f"boundary mismatch {b_err:.2e} at n={n}")
        if config.dump_fields:
            paths[f"fields_n{n}"] = _output_path(config, f"n{n}.npz")
            save_fields(paths[f"fields_n{n}"], sol)

        if config.mode == "exact":
            errors = error_report(sol, problem)
            table.add_row(n, sol.spec.h, errors, sol.report, train_seconds, solve_seconds)
            logger.info(f"n={n}: err_u={errors['u']:.3e} err_gradu={errors['gradu']:.3e}")
        elif previous is not None:
            errors = successive_error(previous, sol, problem.geometry)
            table.add_row(previous.spec.n, previous.spec.h, errors, previous.report,
                          train_seconds, solve_seconds)
            logger.info(f"n={previous.spec.n}->{n}: diff_u={errors['u']:.3e}")
        previous = sol

    paths["table"] = _output_path(config, "convergence.csv")
    table.to_csv(paths["table"], timings=config.timings)
    run_id = _record(config, table, report)
    return RunResult(table, report, paths, run_id)


def run_stokes(config: ExperimentConfig) -> RunResult:
    """Stokes convergence study on the manufactured example"""
    config.validate()
    if config.n_outputs != 3:
        raise ConfigError(f"the Stokes network needs 3 outputs, got {config.n_outputs}")
    problem = manufactured_stokes_example()
    solver = StokesSolver(problem, config.net_config(), config.lm_config())

    start = time.perf_counter()
    report = solver.train()
    train_seconds = time.perf_counter() - start
    paths = _write_training(config, solver.net, report)

    table = ConvergenceTable(STOKES_QUANTITIES)
    for n in config.sweep:
        start = time.perf_counter()
        sol = solver.solve_on(n, retrain=config.retrain)
        solve_seconds = time.perf_counter() - start
        errors = stokes_errors(sol, problem)
        table.add_row(n, sol.layout.h, errors, sol.report, train_seconds, solve_seconds)
        logger.info(f"n={n}: " + " ".join(f"{k}={v:.3e}" for k, v in errors.items()))
        if config.dump_fields:
            paths[f"fields_n{n}"] = _output_path(config, f"n{n}.npz")
            np.savez(paths[f"fields_n{n}"], p=sol.pressure.p.values, u1=sol.u1.values,
                     u2=sol.u2.values, div=sol.div.values)

    paths["table"] = _output_path(config, "convergence.csv")
    table.to_csv(paths["table"], timings=config.timings)
    run_id = _record(config, table, report)
    return RunResult(table, report, paths, run_id)
