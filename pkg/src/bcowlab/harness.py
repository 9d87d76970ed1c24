"""Experiment runner: enumerate cells, run them in parallel, merge in order, write CSV."""
from __future__ import annotations

import csv
import json
import logging
import math
import time
import traceback
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .autonomize import certified_reference, solve_time_dependent, td_complexity_report
from .bounds import (FAIL, bounds_report, params_for, verify_norm_bound,
                     verify_solution_error, verify_kappa_bound, c_of_a)
from .config import ExperimentConfig
from .linalg import matrix_from_dict, spectral_norm, vector_from_dict
from .registry import get_problem
from .system import (build_system, empirical_kappa, query_complexity_figure,
                     select_for_problem, solve_bcow, state_distance)
from .taylor import ODEProblem, exact_solution, iterate_oracle

TRAILER = ["pass_all", "error", "wall_s"]
# columns whose values vary between identical runs
VOLATILE = ("wall_s",)
log = logging.getLogger(__name__)

COLUMNS = {
    "solve": ["cell", "epsilon", "m", "k", "p", "h", "delta", "state_error", "success_probability",
              "g_measured", "oracle_deviation", "kappa_empirical", "leading_query_factor",
              "x0_re", "x0_im"],
    "verify-bounds": ["cell", "family", "N", "k", "m", "p", "C_A", "kappa_V", "norm_C", "bound_norm_C",
                      "kappa", "bound_kappa", "inv_norm", "bound_inv", "I1", "I1_bound", "I2",
                      "I2_bound", "power_max", "column_status", "solution_error_status"],
    "autonomize": ["cell", "problem", "Ns", "m", "k", "p", "err_final", "err_reference_budget", "Pr",
                   "C_A", "normA_m", "g", "x0_re", "x0_im"],
    "sweep": ["cell", "N", "k", "m", "p", "h", "delta", "state_error", "oracle_deviation",
              "generic_deviation", "norm_C", "bound_norm_C", "kappa", "bound_kappa"],
}


def header(mode: str) -> list[str]:
    return COLUMNS[mode] + TRAILER


@dataclass
class RunRecord:
    config: dict
    mode: str
    rows: list[dict] = field(default_factory=list)
    version: str = __version__

    @property
    def n_failed(self) -> int:
        return sum(1 for r in self.rows if r.get("pass_all") is False)

    @property
    def n_errors(self) -> int:
        return sum(1 for r in self.rows if r.get("error"))

    @property
    def exit_status(self) -> int:
        return 1 if self.n_failed else 0

    def summary(self) -> str:
        n = len(self.rows)
        return (f"{self.mode}: {n} cells, {n - self.n_failed} passed, {self.n_failed} failed "
                f"({self.n_errors} with errors)")


def cell_rng(seed: int | None, index: int) -> np.random.Generator:
    """Counter-based generator keyed by (seed, cell index)."""
    ss = np.random.SeedSequence([0 if seed is None else seed, index])
    return np.random.Generator(np.random.Philox(ss))


# -- per-mode cell runners -------------------------------------------------------------

def load_problem(path) -> ODEProblem:
    """JSON ``{"A": matrix, "b": vector, "x_in": vector, "T": real}`` in the matrix text format."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return ODEProblem(matrix_from_dict(data["A"]), vector_from_dict(data["b"]),
                      vector_from_dict(data["x_in"]), float(data["T"]))


def _solve_cell(cfg: ExperimentConfig, cell: dict, rng) -> dict:
    prob = load_problem(cfg.problem)
    if cfg.T is not None:
        prob = ODEProblem(prob.A, prob.b, prob.x_in, cfg.T)
    eps = float(cell.get("epsilon", cfg.epsilon))
    xT = exact_solution(prob, prob.T)
    # selection sees only the coarse estimate of ||x(T)||; the check below uses the exact one
    params = select_for_problem(prob, eps)
    system = build_system(prob, params)
    rep = solve_bcow(system, cfg.method, rtol=cfg.tol["residual_rtol"])
    chk = verify_solution_error(prob, params, cfg.method)
    kap = empirical_kappa(system)
    normA = spectral_norm(prob.A)
    nnz = int(max(1, np.count_nonzero(prob.A, axis=1).max()))
    q = query_complexity_figure(params, c_of_a(prob.A, prob.T, cfg.n_samples), nnz, prob.T,
                                normA, max(1.0, rep.g_measured), 1.0, eps)
    xhat = rep.x_final / np.linalg.norm(rep.x_final)
    ok = chk.status != FAIL and rep.oracle_deviation <= cfg.tol["oracle_tol"]
    return dict(epsilon=eps, m=params.m, k=params.k, p=params.p, h=params.h, delta=params.delta,
                state_error=state_distance(xT, rep.x_final), success_probability=rep.success_probability,
                g_measured=rep.g_measured, oracle_deviation=rep.oracle_deviation,
                kappa_empirical=kap, leading_query_factor=q.leading,
                x0=complex(xhat[0]), pass_all=ok)


def _family_problem(spec, rng, m: int):
    """Matrix from the family, scaled horizon T = m/||A|| so that ||A h|| = 1, fixed x_in and b."""
    A = spec.generate(rng)
    N = A.shape[0]
    nA = spectral_norm(A)
    T = m / nA if nA > 0 else float(m)
    x_in = 1.0 / np.arange(1, N + 1)
    b = 0.5 * (-1.0) ** np.arange(N)
    return ODEProblem(A, b, x_in / np.linalg.norm(x_in), T)


def _verify_cell(cfg: ExperimentConfig, cell: dict, rng) -> dict:
    fam_params = {k: v for k, v in cell.items() if k not in ("k", "m", "p")}
    spec = cfg.family_spec.with_params(**fam_params)
    m, k = int(cell["m"]), int(cell["k"])
    p = int(cell["p"]) if "p" in cell else None
    prob = _family_problem(spec, rng, m)
    params = params_for(prob, m, k, p)
    rep = bounds_report(prob, params, n_samples=cfg.n_samples)
    by = {c.name: c for c in rep.checks}
    return dict(family=spec.family, N=prob.N, k=k, m=m, p=params.p, C_A=rep.C_A, kappa_V=rep.kappa_V,
                norm_C=rep.norm_C, bound_norm_C=rep.bound_norm_C, kappa=rep.kappa_empirical,
                bound_kappa=rep.bound_kappa, inv_norm=rep.inv_norm_empirical,
                bound_inv=rep.bound_inv_norm, I1=rep.I1_norm, I1_bound=rep.I1_bound,
                I2=rep.I2_norm, I2_bound=rep.I2_bound, power_max=float(rep.power_norms.max()),
                column_status=by["inverse_columns"].status,
                solution_error_status=by["solution_error"].status,
                pass_all=rep.pass_all)


def _autonomize_cell(cfg: ExperimentConfig, cell: dict, rng) -> dict:
    prob = get_problem(cfg.problem, cfg.T)
    Ns = int(cell["Ns"])
    eps = float(cell.get("epsilon", cfg.epsilon))
    rep = solve_time_dependent(prob, eps, Ns, cfg.method)
    ref, budget = certified_reference(prob)
    cx = td_complexity_report(prob, Ns, rep.params)
    x0 = rep.x_final[0]
    return dict(problem=prob.registry_name, Ns=Ns, m=rep.params.m, k=rep.params.k, p=rep.params.p,
                err_final=float(np.linalg.norm(rep.x_final - ref)), err_reference_budget=budget,
                Pr=rep.success_probability, C_A=cx.C_A, normA_m=cx.normA_m, g=cx.g,
                x0=complex(x0), pass_all=rep.bcow.oracle_deviation <= cfg.tol["oracle_tol"])


def _sweep_cell(cfg: ExperimentConfig, cell: dict, rng) -> dict:
    N = int(cell.get("N", 4))
    m, k = int(cell.get("m", 2)), int(cell.get("k", 6))
    p = int(cell["p"]) if "p" in cell else None
    spec = cfg.family_spec
    if "N" in spec.params or spec.family in ("random_sparse", "random_diagonalizable"):
        spec = spec.with_params(N=N)
    A = spec.generate(rng)
    N = A.shape[0]
    nA = spectral_norm(A)
    T = m / nA if nA > 0 else float(m)
    x_in = rng.standard_normal(N) + 1j * rng.standard_normal(N)
    b = rng.standard_normal(N) + 1j * rng.standard_normal(N)
    prob = ODEProblem(A, b, x_in, T)
    params = params_for(prob, m, k, p)
    system = build_system(prob, params)
    rep = solve_bcow(system, "block_forward", rtol=cfg.tol["residual_rtol"])
    gen = solve_bcow(system, "generic", rtol=cfg.tol["residual_rtol"])
    ref = iterate_oracle(prob, params).final
    gdev = float(np.linalg.norm(rep.x_final - gen.x_final) / np.linalg.norm(ref))
    C_A = c_of_a(A, T, cfg.n_samples)
    cn = verify_norm_bound(system)
    ck, _ = verify_kappa_bound(system, C_A)
    se = verify_solution_error(prob, params)
    tol = cfg.tol["oracle_tol"]
    ok = (rep.oracle_deviation <= tol and gdev <= tol
          and not any(c.status == FAIL for c in (cn, ck, se)))
    xT = exact_solution(prob, T)
    return dict(N=N, k=k, m=m, p=params.p, h=params.h, delta=params.delta,
                state_error=state_distance(xT, rep.x_final), oracle_deviation=rep.oracle_deviation,
                generic_deviation=gdev, norm_C=spectral_norm(system.C), bound_norm_C=cn.bound,
                kappa=ck.measured, bound_kappa=ck.bound, pass_all=ok)


RUNNERS = {"solve": _solve_cell, "verify-bounds": _verify_cell,
           "autonomize": _autonomize_cell, "sweep": _sweep_cell}


def run_cell(cfg: ExperimentConfig, index: int, cell: dict) -> dict:
    t0 = time.perf_counter()
    try:
        row = RUNNERS[cfg.mode](cfg, cell, cell_rng(cfg.seed, index))
        row.setdefault("error", "")
    except Exception as exc:  # isolate: one bad cell must not sink the campaign
        last = traceback.extract_tb(exc.__traceback__)[-1]
        row = {**cell, "pass_all": False,
               "error": f"{type(exc).__name__}: {exc} [{Path(last.filename).name}:{last.lineno}]"}
    row["cell"] = index
    row["wall_s"] = time.perf_counter() - t0
    log.info("cell %d %s in %.2fs", index, "failed" if row["pass_all"] is False else "done", row["wall_s"])
    return row


def run(cfg: ExperimentConfig, out: str | Path | None = None) -> RunRecord:
    cells = cfg.cells()
    with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
        rows = list(pool.map(lambda ic: run_cell(cfg, *ic), enumerate(cells)))
    record = RunRecord(config=cfg.to_dict(), mode=cfg.mode, rows=rows)
    target = out if out is not None else cfg.out
    if target is not None:
        emit_csv(record, target)
    return record


# -- CSV -----------------------------------------------------------------------------------

def format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        return "%.12g" % v
    return str(v)


def emit_csv(record: RunRecord, path) -> None:
    cols = header(record.mode)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for row in record.rows:
            w.writerow([format_value(_split_complex(row, c)) for c in cols])


def _split_complex(row, col):
    # a complex field ``z`` fills the adjacent ``z_re`` / ``z_im`` columns
    if col in row:
        return row[col]
    for suffix, part in (("_re", "real"), ("_im", "imag")):
        base = col[: -len(suffix)]
        if col.endswith(suffix) and isinstance(row.get(base), (complex, np.complexfloating)):
            return getattr(row[base], part)
    return None


def read_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def stable_text(path) -> str:
    """CSV contents with the volatile timing column removed, for determinism checks."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        return ""
    keep = [i for i, c in enumerate(rows[0]) if c not in VOLATILE]
    return "\n".join(",".join(r[i] for i in keep) for r in rows)
