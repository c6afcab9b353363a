"""Config-driven scenario runner.

Reads one YAML document describing grid, packet, model, and task; executes
the task; writes machine-readable CSV plus a summary.json with audit
verdicts.  Data files are byte-stable across repeated runs: fixed 17
significant digit formatting and no timestamps (run metadata lives in
summary.json only).

Exit codes: 0 success, 2 configuration error, 3 audit failure, 4 resource
cap exceeded, 5 containment error, 6 I/O error.
"""
from __future__ import annotations

import argparse
import concurrent.futures
import difflib
import json
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np
import yaml

from . import __version__
from .arrival import (
    arrival_histogram,
    arrival_trace,
    gamma_sweep,
    path_integral_comparison,
)
from .dynamics import EvolutionMethod, crank_nicolson
from .errors import (
    ConfigurationError,
    ContainmentError,
    IntegratorFault,
    QarrivalError,
    ResourceCapError,
)
from .grid import Grid1D, ModelParams, PotentialProfile, gaussian_packet, make_grid, step_indicator
from .lindblad import default_method, solve_blocks, two_detector_survival_curve
from .povm import audit_povm, build_U, build_U_trotter, build_povm_pair

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_AUDIT = 3
EXIT_RESOURCE = 4
EXIT_CONTAINMENT = 5
EXIT_IO = 6

TASKS = ("trace", "histogram", "sweep", "povm_audit", "compare", "two_detector")

#: Audit tolerances applied to every run that emits probabilities.
COMPLETENESS_TOL = 1e-6
PROBABILITY_SLACK = 1e-8
EDGE_LEAK_TOL = 1e-6
HISTOGRAM_SUM_TOL = 1e-8
TWO_DETECTOR_TOL = 1e-8
POVM_EIG_FLOOR = -1e-8

_TOP_KEYS = {"task", "grid", "packet", "model", "method", "method_dt", "record_every",
             "windows", "gammas", "potential", "trotter_steps", "two_detector", "out"}
_GRID_KEYS = {"x_min", "x_max", "n"}
_PACKET_KEYS = {"x0", "p0", "sigma"}
_MODEL_KEYS = {"gamma", "tau", "dt", "hbar", "mass"}
_TWO_DET_KEYS = {"t_max", "samples"}


@dataclass
class ScenarioConfig:
    """Validated scenario description with defaults applied."""

    task: str
    grid: Grid1D
    packet: tuple[float, float, float]
    params: ModelParams
    method: EvolutionMethod | None
    record_every: int
    gammas: list[float] | None
    windows: list[float] | None
    potential_kind: str
    potential_values: np.ndarray | None
    trotter_steps: list[int]
    two_detector_t_max: float
    two_detector_samples: int
    out: str
    raw: dict = field(repr=False, default_factory=dict)

    def build_potential(self) -> PotentialProfile:
        if self.potential_kind == "step":
            return step_indicator(self.grid)
        values = np.asarray(self.potential_values)
        if values.shape != (self.grid.n,):
            raise ConfigurationError(
                f"potential profile has {values.shape[0]} values but the grid has n={self.grid.n}"
            )
        is_proj = bool(np.isrealobj(values) and np.all((values == 0) | (values == 1)))
        return PotentialProfile(self.grid, values, is_projector=is_proj)

    def build_packet(self):
        x0, p0, sigma = self.packet
        return gaussian_packet(self.grid, x0, p0, sigma, hbar=self.params.hbar)


def _reject_unknown(section: dict, allowed: set, where: str):
    unknown = [k for k in section if k not in allowed]
    if unknown:
        hints = []
        for key in unknown:
            match = difflib.get_close_matches(key, allowed, n=1)
            hints.append(f"{key!r}" + (f" (did you mean {match[0]!r}?)" if match else ""))
        raise ConfigurationError(f"unknown {where} key(s): " + ", ".join(hints))


def _require(section: dict, key: str, where: str):
    if key not in section:
        raise ConfigurationError(f"missing required {where} key {key!r}")
    return section[key]


def _load_profile_file(path: str) -> np.ndarray:
    data = np.loadtxt(path, delimiter=",", ndmin=2)
    if data.shape[1] == 1:
        return data[:, 0]
    if data.shape[1] == 2:
        return data[:, 0] + 1j * data[:, 1]
    raise ConfigurationError(
        f"potential file {path!r} must have one (real) or two (real, imag) columns"
    )


def parse_config(text: str) -> ScenarioConfig:
    """Parse and validate a YAML scenario document, applying defaults."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"config is not valid YAML: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigurationError("config must be a key/value mapping")
    _reject_unknown(doc, _TOP_KEYS, "top-level")

    grid_sec = _require(doc, "grid", "top-level")
    _reject_unknown(grid_sec, _GRID_KEYS, "grid")
    grid = make_grid(float(_require(grid_sec, "x_min", "grid")),
                     float(_require(grid_sec, "x_max", "grid")),
                     int(_require(grid_sec, "n", "grid")))

    packet_sec = _require(doc, "packet", "top-level")
    _reject_unknown(packet_sec, _PACKET_KEYS, "packet")
    packet = (float(_require(packet_sec, "x0", "packet")),
              float(_require(packet_sec, "p0", "packet")),
              float(_require(packet_sec, "sigma", "packet")))

    model_sec = _require(doc, "model", "top-level")
    _reject_unknown(model_sec, _MODEL_KEYS, "model")
    gammas = doc.get("gammas")
    if gammas is not None:
        gammas = [float(g) for g in gammas]
    gamma = model_sec.get("gamma")
    if isinstance(gamma, (list, tuple)):
        if gammas is not None:
            raise ConfigurationError("give either model.gamma as a list or a top-level "
                                     "gammas list, not both")
        gammas = [float(g) for g in gamma]
        gamma = gammas[0]
    if gamma is None:
        if not gammas:
            raise ConfigurationError("model.gamma (or a top-level gammas list) is required")
        gamma = gammas[0]
    params = ModelParams(
        gamma=float(gamma),
        tau=float(_require(model_sec, "tau", "model")),
        dt=float(_require(model_sec, "dt", "model")),
        mass=float(model_sec.get("mass", 1.0)),
        hbar=float(model_sec.get("hbar", 1.0)),
    )

    task = doc.get("task")
    if task is not None and task not in TASKS:
        raise ConfigurationError(f"unknown task {task!r}; choose one of {', '.join(TASKS)}")

    method = None
    if "method" in doc or "method_dt" in doc:
        tag = doc.get("method", "strang_split")
        method_dt = float(doc.get("method_dt", params.dt / 4))
        method = EvolutionMethod(tag, method_dt)

    record_every = int(doc.get("record_every", 10))
    if record_every < 1:
        raise ConfigurationError(f"record_every must be >= 1, got {record_every}")

    windows = doc.get("windows")
    if windows is not None:
        windows = [float(w) for w in windows]

    potential = doc.get("potential", "step")
    potential_values = None
    if isinstance(potential, str):
        if potential != "step":
            raise ConfigurationError(
                f"unknown potential {potential!r}; use 'step' or a mapping with 'file'"
            )
        potential_kind = "step"
    elif isinstance(potential, dict):
        _reject_unknown(potential, {"file"}, "potential")
        potential_kind = "file"
        potential_values = _load_profile_file(_require(potential, "file", "potential"))
    else:
        raise ConfigurationError("potential must be 'step' or a mapping with 'file'")

    trotter_steps = [int(k) for k in doc.get("trotter_steps", [8, 16, 32, 64])]
    if any(k < 1 for k in trotter_steps):
        raise ConfigurationError("trotter_steps entries must be >= 1")

    td = doc.get("two_detector", {})
    _reject_unknown(td, _TWO_DET_KEYS, "two_detector")
    t_max = float(td.get("t_max", 10.0))
    samples = int(td.get("samples", 101))
    if t_max <= 0 or samples < 2:
        raise ConfigurationError("two_detector needs t_max > 0 and samples >= 2")

    return ScenarioConfig(
        task=task, grid=grid, packet=packet, params=params, method=method,
        record_every=record_every, gammas=gammas, windows=windows,
        potential_kind=potential_kind, potential_values=potential_values,
        trotter_steps=trotter_steps, two_detector_t_max=t_max,
        two_detector_samples=samples, out=str(doc.get("out", ".")), raw=doc,
    )


# ---------------------------------------------------------------------------
# Output helpers


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def write_csv(path: str, header: list[str], rows: list[tuple]):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _probability_in_range(p: float) -> bool:
    return -PROBABILITY_SLACK <= p <= 1.0 + PROBABILITY_SLACK


class _AuditTrail:
    def __init__(self):
        self.checks: dict[str, dict] = {}

    def record(self, name: str, passed: bool, value: float, tolerance: float):
        self.checks[name] = {
            "passed": bool(passed),
            "value": float(value),
            "tolerance": float(tolerance),
        }

    def check_probabilities(self, name: str, values):
        # worst excursion outside [0, 1]; zero when all values are inside
        excursion = max((max(p - 1.0, -p, 0.0) for p in values), default=0.0)
        self.record(name, excursion <= PROBABILITY_SLACK, excursion, PROBABILITY_SLACK)

    @property
    def all_passed(self) -> bool:
        return all(c["passed"] for c in self.checks.values())


# ---------------------------------------------------------------------------
# Task runners: each returns (csv_name, header, rows, audits)


def _run_trace(cfg: ScenarioConfig, audits: _AuditTrail, threads: int):
    psi0 = cfg.build_packet()
    V = cfg.build_potential()
    records = arrival_trace(psi0, V, cfg.params, method=cfg.method,
                            record_every=cfg.record_every)
    rows = [(r.t, r.density, r.cumulative_p_d, r.p_nd_running, r.edge_leak)
            for r in records]
    last = records[-1]
    residual = abs(last.cumulative_p_d + last.p_nd_running - 1.0)
    audits.record("completeness", residual <= COMPLETENESS_TOL, residual, COMPLETENESS_TOL)
    leak = max(r.edge_leak for r in records)
    audits.record("edge_leak", leak <= EDGE_LEAK_TOL, leak, EDGE_LEAK_TOL)
    audits.check_probabilities("probability_range",
                               [r.cumulative_p_d for r in records]
                               + [r.p_nd_running for r in records])
    return "arrival_trace.csv", ["t", "density", "cumulative_p_d", "p_nd_running",
                                 "edge_leak"], rows


def _run_histogram(cfg: ScenarioConfig, audits: _AuditTrail, threads: int):
    if not cfg.windows:
        raise ConfigurationError("histogram task needs a 'windows' list of edges")
    psi0 = cfg.build_packet()
    V = cfg.build_potential()
    probs = arrival_histogram(psi0, V, cfg.params, cfg.windows, method=cfg.method)
    sol = solve_blocks(psi0, V, cfg.params, method=cfg.method, record_every=10 ** 9)
    covered = arrival_histogram(psi0, V, cfg.params, [0.0, cfg.params.tau],
                                method=cfg.method)[0]
    rows = [(a, b, p) for a, b, p in zip(cfg.windows[:-1], cfg.windows[1:], probs)]
    # partition consistency against one whole-interval window
    if abs(cfg.windows[0]) < 1e-12 and abs(cfg.windows[-1] - cfg.params.tau) < 1e-12:
        gap = abs(float(np.sum(probs)) - covered)
        audits.record("histogram_additivity", gap <= HISTOGRAM_SUM_TOL, gap,
                      HISTOGRAM_SUM_TOL)
    residual = abs(sol.p_d_final + sol.p_nd_final - 1.0)
    audits.record("completeness", residual <= COMPLETENESS_TOL, residual, COMPLETENESS_TOL)
    audits.check_probabilities("probability_range", list(probs))
    return "histogram.csv", ["window_start", "window_end", "probability"], rows


def _run_sweep(cfg: ScenarioConfig, audits: _AuditTrail, threads: int):
    if not cfg.gammas:
        raise ConfigurationError("sweep task needs a top-level 'gammas' list")
    psi0 = cfg.build_packet()
    V = cfg.build_potential()

    def one(gamma: float):
        return gamma_sweep(psi0, V, cfg.params, [gamma], method=cfg.method)[0]

    if threads > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, cfg.gammas))
    else:
        results = [one(g) for g in cfg.gammas]
    rows = [(r.gamma, r.p_d, r.p_nd, r.reflected_fraction, r.penetrated_undetected)
            for r in results]
    residual = max(abs(r.p_d + r.p_nd - 1.0) for r in results)
    audits.record("completeness", residual <= COMPLETENESS_TOL, residual, COMPLETENESS_TOL)
    audits.check_probabilities("probability_range",
                               [v for r in results for v in (r.p_d, r.p_nd)])
    return "sweep.csv", ["gamma", "p_d", "p_nd", "reflected_fraction",
                         "penetrated_undetected"], rows


def _run_compare(cfg: ScenarioConfig, audits: _AuditTrail, threads: int):
    if not cfg.gammas:
        raise ConfigurationError("compare task needs a top-level 'gammas' list")
    psi0 = cfg.build_packet()
    V = cfg.build_potential()
    results = path_integral_comparison(psi0, cfg.params.tau, cfg.params, cfg.gammas,
                                       V=V, method=cfg.method,
                                       nd_method=crank_nicolson(cfg.params.dt))
    rows = [(r.gamma, r.p_d, r.p_nd, r.p_restricted, r.p_crossing,
             r.interference_defect, r.propagator_distance) for r in results]
    residual = max(abs(r.p_d + r.p_nd - 1.0) for r in results)
    audits.record("completeness", residual <= COMPLETENESS_TOL, residual, COMPLETENESS_TOL)
    audits.check_probabilities("probability_range",
                               [v for r in results for v in (r.p_d, r.p_nd)])
    return "compare.csv", ["gamma", "p_d", "p_nd", "p_restricted", "p_crossing",
                           "interference_defect", "propagator_distance"], rows


def _run_povm_audit(cfg: ScenarioConfig, audits: _AuditTrail, threads: int):
    V = cfg.build_potential()
    method = cfg.method if cfg.method is not None else crank_nicolson(cfg.params.dt)
    pair = build_povm_pair(cfg.grid, V, cfg.params, method, route="via_integral")
    report = audit_povm(pair, eigen=True)
    u_exact = build_U(cfg.grid, V, cfg.params, method)
    rows = []
    for steps in cfg.trotter_steps:
        u_trot = build_U_trotter(cfg.grid, V, cfg.params, steps, method=method)
        err = float(np.linalg.norm(u_trot - u_exact, 2))
        rows.append((cfg.grid.n, cfg.params.gamma, cfg.params.tau,
                     report.min_eig_omega, report.min_eig_omega_bar,
                     report.completeness_residual, report.nonprojector_witness,
                     steps, err))
    audits.record("completeness", report.completeness_residual <= COMPLETENESS_TOL,
                  report.completeness_residual, COMPLETENESS_TOL)
    audits.record("positivity_omega", report.min_eig_omega >= POVM_EIG_FLOOR,
                  report.min_eig_omega, POVM_EIG_FLOOR)
    audits.record("positivity_omega_bar", report.min_eig_omega_bar >= POVM_EIG_FLOOR,
                  report.min_eig_omega_bar, POVM_EIG_FLOOR)
    return "povm_audit.csv", ["n", "gamma", "tau", "min_eig_omega", "min_eig_omega_bar",
                              "completeness_residual", "nonprojector_witness",
                              "trotter_steps", "trotter_error"], rows


def _run_two_detector(cfg: ScenarioConfig, audits: _AuditTrail, threads: int):
    times = np.linspace(0.0, cfg.two_detector_t_max, cfg.two_detector_samples)
    numeric, analytic = two_detector_survival_curve(cfg.params, times)
    rows = [(t, nu, an, abs(nu - an)) for t, nu, an in zip(times, numeric, analytic)]
    worst = float(np.max(np.abs(numeric - analytic)))
    audits.record("decay_law", worst <= TWO_DETECTOR_TOL, worst, TWO_DETECTOR_TOL)
    audits.check_probabilities("probability_range", list(numeric))
    return "two_detector.csv", ["t", "numeric_survival", "analytic_survival",
                                "abs_error"], rows


_RUNNERS = {
    "trace": _run_trace,
    "histogram": _run_histogram,
    "sweep": _run_sweep,
    "compare": _run_compare,
    "povm_audit": _run_povm_audit,
    "two_detector": _run_two_detector,
}


def run(config: ScenarioConfig, out_dir: str | None = None, threads: int = 1,
        quiet: bool = False) -> int:
    """Execute the configured task; write CSV and summary.json; return exit code."""
    if config.task is None:
        raise ConfigurationError("no task selected (config key 'task' or subcommand)")
    out = out_dir if out_dir is not None else config.out
    started = time.time()
    audits = _AuditTrail()
    try:
        os.makedirs(out, exist_ok=True)
        csv_name, header, rows = _RUNNERS[config.task](config, audits, threads)
        csv_path = os.path.join(out, csv_name)
        write_csv(csv_path, header, rows)
    except OSError as exc:
        print(f"error: I/O failure: {exc}", file=sys.stderr)
        return EXIT_IO

    summary = {
        "task": config.task,
        "version": __version__,
        "config": config.raw,
        "outputs": [csv_name],
        "wall_time_s": time.time() - started,
        "audits": audits.checks,
        "audits_passed": audits.all_passed,
    }
    try:
        with open(os.path.join(out, "summary.json"), "w", encoding="utf-8") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True, default=float)
            fh.write("\n")
    except OSError as exc:
        print(f"error: I/O failure: {exc}", file=sys.stderr)
        return EXIT_IO

    if not quiet:
        print(f"task {config.task}: wrote {csv_path}")
        for name, check in audits.checks.items():
            state = "pass" if check["passed"] else "FAIL"
            print(f"  audit {name}: {state} (value {check['value']:.3e}, "
                  f"tolerance {check['tolerance']:.0e})")
    if not audits.all_passed:
        if not quiet:
            print("one or more audits failed", file=sys.stderr)
        return EXIT_AUDIT
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qarrival",
        description="Arrival-time detection for 1D wave packets via an "
                    "irreversible absorbing detector.",
        epilog="exit codes: 0 success; 2 configuration error; 3 audit failure; "
               "4 resource cap exceeded; 5 containment error; 6 I/O error",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for task in TASKS:
        p = sub.add_parser(task, help=f"run the {task} task")
        p.add_argument("--config", required=True, help="YAML scenario file")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads for sweeps (default 1; "
                            "QARRIVAL_THREADS honored when absent)")
        p.add_argument("--seed", type=int, default=None,
                       help="reserved; all computations are deterministic")
        p.add_argument("--quiet", action="store_true", help="suppress the summary table")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    threads = args.threads
    if threads is None:
        threads = int(os.environ.get("QARRIVAL_THREADS", "1"))
    if threads < 1:
        print("error: thread count must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        config = parse_config(text)
        if config.task is not None and config.task != args.command:
            raise ConfigurationError(
                f"config task {config.task!r} does not match subcommand {args.command!r}"
            )
        config.task = args.command
        return run(config, out_dir=args.out, threads=threads, quiet=args.quiet)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ContainmentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONTAINMENT
    except ResourceCapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except IntegratorFault as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_AUDIT
    except QarrivalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
