"""Experiment engine: scenario generation, design sweeps, verification.

A *bundle* is a directory holding one scenario: the effective config as
JSON, per-realization geometry metadata and truncated covariance factors
in the binary container format, and, once designs have run, per-epsilon
pilot files plus CSV run records and aggregates.

Reproducibility contract: every random draw comes from a counter-based
generator seeded by (master_seed, realization_index, stream_tag), so the
bundle contents are a pure function of the config, independent of worker
count and completion order.  Wall-clock timings are the one execution
artifact that cannot be deterministic; they go to a separate
``timing.csv`` sidecar that is excluded from the byte-reproducibility
guarantee.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field, replace
from multiprocessing import get_context
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .covariance import (
    UserCovariance,
    covariance_from_rays,
    make_uca,
    sample_user_geometry,
    truncate_covariance,
)
from .design import AlgorithmParams, design_pilots
from .estimation import (
    LmiProblem,
    build_stacked,
    error_covariance_full,
    max_error_eigenvalue,
    simulate_estimation,
)
from .identifiability import check_identifiability, necessary_length
from .matio import export_cmat_csv, read_cmat, write_cmat
from .sdp import SdpSolverError

__all__ = [
    "ScenarioConfig",
    "RunRecord",
    "child_rng",
    "generate_bundle",
    "load_config",
    "load_realization",
    "design_bundle",
    "sweep_bundle",
    "verify_bundle",
    "report_bundle",
    "eps_tag",
]

STREAM_GEOMETRY = 0
STREAM_EMPIRICAL = 1

_DEFAULT_EPS_GRID = tuple(float(x) for x in np.logspace(-5, -2, 13))


@dataclass(frozen=True)
class ScenarioConfig:
    """Scenario inputs; defaults mirror the benchmark setup.

    ``epsilon_grid`` must be strictly increasing.  ``master_seed`` and the
    realization index fully determine each realization's geometry.
    """

    num_antennas: int
    num_users: int
    array_diameter: float = 2.0
    carrier_freq: float = 1.8e9
    user_dist_min: float = 250.0
    user_dist_max: float = 750.0
    num_scatterers: int = 200
    scatter_radius: float = 50.0
    energy_threshold: float = 0.99
    noise_var: float = 1e-4
    master_seed: int = 0
    num_realizations: int = 200
    epsilon_grid: tuple = _DEFAULT_EPS_GRID
    algorithm: AlgorithmParams = field(default_factory=AlgorithmParams)

    def __post_init__(self):
        if self.num_antennas < 1 or self.num_users < 1:
            raise ValueError("num_antennas and num_users must be >= 1")
        if self.num_realizations < 1:
            raise ValueError("num_realizations must be >= 1")
        if min(self.array_diameter, self.carrier_freq, self.noise_var) <= 0:
            raise ValueError("array_diameter, carrier_freq, noise_var must be positive")
        grid = tuple(float(e) for e in self.epsilon_grid)
        if not grid:
            raise ValueError("epsilon_grid must not be empty")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("epsilon_grid must be strictly increasing")
        if any(e <= 0 for e in grid):
            raise ValueError("epsilon values must be positive")
        object.__setattr__(self, "epsilon_grid", grid)

    def to_json(self) -> str:
        payload = asdict(self)
        payload["epsilon_grid"] = list(self.epsilon_grid)
        return json.dumps({"format": "pilotseq-scenario-v1", **payload}, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ScenarioConfig":
        payload = json.loads(text)
        payload.pop("format", None)
        algo = payload.pop("algorithm", None)
        cfg = cls(**payload)
        if algo is not None:
            cfg = replace(cfg, algorithm=AlgorithmParams(**algo))
        return cfg


@dataclass(frozen=True)
class RunRecord:
    """One realization's design outcome at one error budget."""

    realization_index: int
    seed_word: int
    user_ranks: tuple
    total_rank: int
    epsilon: float
    pilot_length: int
    outer_iterations: int
    inner_iterations: int
    achieved_max_error: float
    pilot_energies: tuple
    converged: bool
    repair_admissions: int
    within_budget: bool
    status: str  # "ok" or "solver_failure: ..."
    wall_time: float

    CSV_FIELDS = (
        "realization_index,seed_word,user_ranks,total_rank,epsilon,pilot_length,"
        "outer_iterations,inner_iterations,achieved_max_error,pilot_energies,"
        "converged,repair_admissions,within_budget,status"
    )

    def csv_row(self) -> str:
        return ",".join(
            [
                str(self.realization_index),
                str(self.seed_word),
                ";".join(str(r) for r in self.user_ranks),
                str(self.total_rank),
                repr(self.epsilon),
                str(self.pilot_length),
                str(self.outer_iterations),
                str(self.inner_iterations),
                repr(self.achieved_max_error),
                ";".join(repr(e) for e in self.pilot_energies),
                str(int(self.converged)),
                str(self.repair_admissions),
                str(int(self.within_budget)),
                self.status.replace(",", ";"),
            ]
        )


def child_rng(master_seed: int, realization: int, stream: int) -> np.random.Generator:
    """Counter-based child generator for (seed, realization, stream)."""
    seq = np.random.SeedSequence(master_seed, spawn_key=(realization, stream))
    return np.random.Generator(np.random.Philox(seq))


def _seed_word(master_seed: int, realization: int) -> int:
    seq = np.random.SeedSequence(master_seed, spawn_key=(realization, STREAM_GEOMETRY))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def eps_tag(epsilon: float) -> str:
    return f"{epsilon:.6e}"


def _realization_dir(bundle: Path, index: int) -> Path:
    return bundle / "realizations" / f"r{index:04d}"


def _design_dir(bundle: Path, epsilon: float) -> Path:
    return bundle / "designs" / f"eps_{eps_tag(epsilon)}"


def generate_realization(config: ScenarioConfig, index: int):
    """Sample one realization's geometries and truncated covariances."""
    geom = make_uca(config.num_antennas, config.array_diameter, config.carrier_freq)
    rng = child_rng(config.master_seed, index, STREAM_GEOMETRY)
    users = []
    covs = []
    for _ in range(config.num_users):
        user = sample_user_geometry(
            rng,
            config.user_dist_min,
            config.user_dist_max,
            config.num_scatterers,
            config.scatter_radius,
        )
        users.append(user)
        covs.append(
            truncate_covariance(covariance_from_rays(geom, user), config.energy_threshold)
        )
    return users, covs


def generate_bundle(config: ScenarioConfig, out_dir, csv_export: bool = False) -> Path:
    """Write the scenario bundle: config echo, geometry, covariance factors."""
    bundle = Path(out_dir)
    bundle.mkdir(parents=True, exist_ok=True)
    (bundle / "scenario.json").write_text(config.to_json())
    for idx in range(config.num_realizations):
        users, covs = generate_realization(config, idx)
        rdir = _realization_dir(bundle, idx)
        rdir.mkdir(parents=True, exist_ok=True)
        meta = {
            "realization": idx,
            "seed_word": _seed_word(config.master_seed, idx),
            "users": [
                {
                    "rank": c.retained_rank,
                    "captured_energy": c.captured_energy_fraction,
                    "position": [float(v) for v in u.user_position],
                    "scatterers": np.asarray(u.scatterer_positions).tolist(),
                }
                for u, c in zip(users, covs)
            ],
        }
        (rdir / "meta.json").write_text(json.dumps(meta, indent=1))
        for k, cov in enumerate(covs):
            path = rdir / f"user{k:02d}_factor.cmat"
            write_cmat(path, cov.factor)
            if csv_export:
                export_cmat_csv(path)
    return bundle


def load_config(bundle) -> ScenarioConfig:
    return ScenarioConfig.from_json((Path(bundle) / "scenario.json").read_text())


def load_realization(bundle, index: int) -> list:
    """Rebuild the truncated user covariances of one stored realization."""
    rdir = _realization_dir(Path(bundle), index)
    meta = json.loads((rdir / "meta.json").read_text())
    covs = []
    for k, user_meta in enumerate(meta["users"]):
        factor = read_cmat(rdir / f"user{k:02d}_factor.cmat")
        eigenvalues = np.sum(np.abs(factor) ** 2, axis=0)
        covs.append(
            UserCovariance(
                full_covariance=factor @ factor.conj().T,
                factor=factor,
                eigenvalues=eigenvalues,
                retained_rank=factor.shape[1],
                captured_energy_fraction=float(user_meta["captured_energy"]),
            )
        )
    return covs


def _design_one(bundle: str, index: int, epsilon: float, unscaled: bool = False):
    """Worker: design one realization, returning (record, pilots)."""
    config = load_config(bundle)
    params = config.algorithm
    if unscaled and params.scale_rows:
        params = replace(params, scale_rows=False)
    covs = load_realization(bundle, index)
    stacked = build_stacked(covs)
    problem = LmiProblem(stacked, config.noise_var, epsilon)
    seed_word = _seed_word(config.master_seed, index)
    ranks = tuple(c.retained_rank for c in covs)
    t0 = time.perf_counter()
    try:
        result = design_pilots(problem, params)
    except SdpSolverError as exc:
        elapsed = time.perf_counter() - t0
        record = RunRecord(
            realization_index=index,
            seed_word=seed_word,
            user_ranks=ranks,
            total_rank=stacked.total_rank,
            epsilon=epsilon,
            pilot_length=-1,
            outer_iterations=0,
            inner_iterations=exc.iterations or 0,
            achieved_max_error=float("nan"),
            pilot_energies=(),
            converged=False,
            repair_admissions=0,
            within_budget=False,
            status=f"solver_failure: {exc}",
            wall_time=elapsed,
        )
        return record, None
    elapsed = time.perf_counter() - t0
    energies = tuple(float(v) for v in np.real(np.diag(result.gram_solution)))
    record = RunRecord(
        realization_index=index,
        seed_word=seed_word,
        user_ranks=ranks,
        total_rank=stacked.total_rank,
        epsilon=epsilon,
        pilot_length=result.pilot_length,
        outer_iterations=result.outer_iterations,
        inner_iterations=result.inner_iterations,
        achieved_max_error=result.achieved_max_error,
        pilot_energies=energies,
        converged=result.converged,
        repair_admissions=result.repair_admissions,
        within_budget=result.constraint_satisfied_post_threshold,
        status="ok",
        wall_time=elapsed,
    )
    return record, result.pilots


def _design_task(args):
    return _design_one(*args)


_worker_thread_limiter = None


def _limit_worker_blas_threads():
    """Pin each worker to single-threaded BLAS.

    The per-design matrices are small, so one BLAS thread per worker is
    fastest; without the pin, workers oversubscribe the machine and spend
    most of their time in spin-waits.
    """
    global _worker_thread_limiter
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        return
    _worker_thread_limiter = threadpool_limits(limits=1)


def _run_pool(tasks, threads: int):
    if threads <= 1 or len(tasks) <= 1:
        return [_design_task(t) for t in tasks]
    ctx = get_context("fork")
    with ctx.Pool(
        processes=min(threads, len(tasks)), initializer=_limit_worker_blas_threads
    ) as pool:
        return pool.map(_design_task, tasks, chunksize=1)


def design_bundle(
    bundle,
    epsilon: float,
    threads: int = 1,
    unscaled_pilots: bool = False,
    csv_export: bool = False,
) -> list:
    """Design all realizations of a bundle at one error budget.

    Writes per-realization pilot files plus ``runs.csv`` (deterministic)
    and ``timing.csv`` (wall times, excluded from reproducibility) in the
    per-epsilon design directory, and returns the run records sorted by
    realization index.
    """
    bundle = Path(bundle)
    config = load_config(bundle)
    ddir = _design_dir(bundle, epsilon)
    ddir.mkdir(parents=True, exist_ok=True)
    tasks = [
        (str(bundle), idx, epsilon, unscaled_pilots)
        for idx in range(config.num_realizations)
    ]
    results = _run_pool(tasks, threads)

    records = []
    for (record, pilots) in sorted(results, key=lambda pair: pair[0].realization_index):
        records.append(record)
        if pilots is not None:
            path = ddir / f"pilots_r{record.realization_index:04d}.cmat"
            write_cmat(path, pilots)
            if csv_export:
                export_cmat_csv(path)
    with open(ddir / "runs.csv", "w") as fh:
        fh.write(RunRecord.CSV_FIELDS + "\n")
        for record in records:
            fh.write(record.csv_row() + "\n")
    with open(ddir / "timing.csv", "w") as fh:
        fh.write("realization_index,wall_time_s\n")
        for record in records:
            fh.write(f"{record.realization_index},{record.wall_time:.6f}\n")
    return records


def sweep_bundle(bundle, epsilon_grid: Optional[Sequence[float]] = None, threads: int = 1) -> Path:
    """Run the design over an epsilon grid, reusing the stored realizations.

    Writes one aggregate row per epsilon to ``sweep.csv`` (mean/std use
    the population convention) and returns its path.
    """
    bundle = Path(bundle)
    config = load_config(bundle)
    grid = list(epsilon_grid) if epsilon_grid is not None else list(config.epsilon_grid)
    if not grid:
        raise ValueError("epsilon grid must not be empty")
    rows = []
    for epsilon in grid:
        records = design_bundle(bundle, epsilon, threads=threads)
        ok = [r for r in records if r.status == "ok"]
        lengths = np.array([r.pilot_length for r in ok], dtype=float)
        errors = np.array([r.achieved_max_error for r in ok], dtype=float)
        rows.append(
            (
                epsilon,
                float(lengths.mean()) if ok else float("nan"),
                float(lengths.std()) if ok else float("nan"),
                float(errors.mean()) if ok else float("nan"),
                len(ok),
                len(records) - len(ok),
            )
        )
    path = bundle / "sweep.csv"
    with open(path, "w") as fh:
        fh.write("epsilon,mean_L,std_L,mean_achieved_max_error,num_ok,num_failed\n")
        for row in rows:
            fh.write(
                f"{row[0]!r},{row[1]!r},{row[2]!r},{row[3]!r},{row[4]},{row[5]}\n"
            )
    return path


def verify_bundle(
    bundle,
    epsilon: float,
    empirical_trials: int = 0,
) -> list:
    """Re-check stored pilots against the analytic (and optional empirical) error.

    Per realization: recompute the largest error-covariance eigenvalue from
    the stored pilots, test noiseless identifiability, compare the pilot
    length against the necessary noiseless bound (a soft check, reported
    not enforced), and flag budget violations above epsilon * 1.05.
    Returns the verification rows; also writes ``verify.csv``.
    """
    bundle = Path(bundle)
    config = load_config(bundle)
    ddir = _design_dir(bundle, epsilon)
    rows = []
    for idx in range(config.num_realizations):
        pilot_path = ddir / f"pilots_r{idx:04d}.cmat"
        if not pilot_path.exists():
            raise FileNotFoundError(f"missing pilot file {pilot_path}")
        pilots = read_cmat(pilot_path)
        covs = load_realization(bundle, idx)
        stacked = build_stacked(covs)
        achieved = max_error_eigenvalue(pilots, stacked, config.noise_var)
        identifiable = check_identifiability(pilots, covs)
        bound = necessary_length(covs, config.num_antennas)
        min_retained = min(float(np.min(c.eigenvalues)) for c in covs)
        bound_applicable = achieved <= epsilon and epsilon < min_retained
        bound_ok = (not bound_applicable) or pilots.shape[0] >= bound
        flagged = achieved > epsilon * 1.05
        empirical = ""
        analytic_dim = ""
        if empirical_trials > 0:
            rng = child_rng(config.master_seed, idx, STREAM_EMPIRICAL)
            emp_cov = simulate_estimation(
                pilots, stacked, config.noise_var, rng, empirical_trials
            )
            empirical = repr(float(np.max(np.real(np.diag(emp_cov)))))
            full = error_covariance_full(pilots, stacked, config.noise_var)
            analytic_dim = repr(float(np.max(np.real(np.diag(full)))))
        rows.append(
            {
                "realization_index": idx,
                "epsilon": epsilon,
                "pilot_length": pilots.shape[0],
                "achieved_max_error": achieved,
                "within_budget": not flagged,
                "identifiable": identifiable,
                "necessary_bound": bound,
                "bound_ok": bound_ok,
                "empirical_max_dim_error": empirical,
                "analytic_max_dim_error": analytic_dim,
            }
        )
    path = ddir / "verify.csv"
    with open(path, "w") as fh:
        fh.write(
            "realization_index,epsilon,pilot_length,achieved_max_error,"
            "within_budget,identifiable,necessary_bound,bound_ok,"
            "empirical_max_dim_error,analytic_max_dim_error\n"
        )
        for row in rows:
            fh.write(
                f"{row['realization_index']},{row['epsilon']!r},{row['pilot_length']},"
                f"{row['achieved_max_error']!r},{int(row['within_budget'])},"
                f"{int(row['identifiable'])},{row['necessary_bound']},"
                f"{int(row['bound_ok'])},{row['empirical_max_dim_error']},"
                f"{row['analytic_max_dim_error']}\n"
            )
    return rows


def report_bundle(bundle, epsilon: float, bins: int = 20) -> dict:
    """Histogram the pilot lengths and achieved errors of one design run.

    Writes ``hist_pilot_length.csv`` and ``hist_achieved_error.csv`` in
    the design directory and returns summary statistics.
    """
    bundle = Path(bundle)
    ddir = _design_dir(bundle, epsilon)
    runs = (ddir / "runs.csv").read_text().strip().splitlines()[1:]
    lengths = []
    errors = []
    for line in runs:
        parts = line.split(",")
        if parts[13] != "ok":
            continue
        lengths.append(int(parts[5]))
        errors.append(float(parts[8]))
    if not lengths:
        raise ValueError("no successful runs to report")
    lengths_arr = np.array(lengths, dtype=float)
    errors_arr = np.array(errors, dtype=float)

    # integer-aligned bins for L, `bins` equal-width bins for the error
    lmax = int(lengths_arr.max())
    l_edges = np.arange(-0.5, lmax + 1.5)
    l_counts, _ = np.histogram(lengths_arr, bins=l_edges)
    e_counts, e_edges = np.histogram(errors_arr, bins=bins)
    with open(ddir / "hist_pilot_length.csv", "w") as fh:
        fh.write("bin_left,bin_right,count\n")
        for lo, hi, c in zip(l_edges[:-1], l_edges[1:], l_counts):
            fh.write(f"{lo!r},{hi!r},{c}\n")
    with open(ddir / "hist_achieved_error.csv", "w") as fh:
        fh.write("bin_left,bin_right,count\n")
        for lo, hi, c in zip(e_edges[:-1], e_edges[1:], e_counts):
            fh.write(f"{lo!r},{hi!r},{c}\n")
    return {
        "num_runs": len(lengths),
        "mean_L": float(lengths_arr.mean()),
        "std_L": float(lengths_arr.std()),
        "mean_achieved_max_error": float(errors_arr.mean()),
        "max_achieved_max_error": float(errors_arr.max()),
    }
