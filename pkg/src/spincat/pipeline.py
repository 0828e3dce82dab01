"""Run orchestration and file serialization.

File conventions (all UTF-8, LF newlines, 17 significant digits so reruns
with the same master seed are byte-identical):

* trajectory time series — ``#``-prefixed header lines echoing the full
  config and seed, one CSV header row ``t,p_all_ground,q_expect,record,
  norm_drift``, then the samples;
* wavelet spectrum — same comment conventions, then the scale axis as the
  first row (corner cell empty) and one row per time sample with the time
  in the first column;
* manifest — JSON listing per-trajectory files, status, and failures;
* node report — JSON with detected node times and the analysis band.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np

from .config import SimConfig, config_from_dict
from .errors import ConfigError, FormatError, NumericalGuardError
from .hilbert import build_field_ops, build_spin_ops
from .model import build_hamiltonian
from .oracle import DensityMatrix, cross_representation_check, jc_analytic_pe, lindblad_evolve
from .qsd import TrajectoryEngine, TrajectoryResult
from .wavelet import band_power, cwt, detect_nodes

TIMESERIES_COLUMNS = ("t", "p_all_ground", "q_expect", "record", "norm_drift")


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


# ----------------------------------------------------------------------
# time-series files
# ----------------------------------------------------------------------

def write_timeseries(
    path, result: TrajectoryResult, config: SimConfig, label: str
) -> None:
    lines = [
        "# spincat trajectory time series",
        f"# run: {label}",
        f"# config: {json.dumps(config.to_dict())}",
        f"# seed: {config.seed}",
        ",".join(TIMESERIES_COLUMNS),
    ]
    cols = (
        result.times,
        result.p_all_ground,
        result.q_expect,
        result.record,
        result.norm_drift,
    )
    for row in zip(*cols):
        lines.append(",".join(_fmt(v) for v in row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_timeseries(path):
    """Parse a trajectory CSV; returns (columns dict, config echo or None).

    Malformed content raises FormatError carrying the byte offset of the
    offending line.
    """
    columns = None
    rows = []
    config_echo = None
    offset = 0
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.strip():
        raise FormatError(f"{path}: empty record file", byte_offset=0)
    for rawline in data.splitlines(keepends=True):
        line = rawline.decode("utf-8").rstrip("\n").rstrip("\r")
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("config:"):
                try:
                    config_echo = json.loads(body[len("config:"):])
                except json.JSONDecodeError:
                    raise FormatError(
                        f"{path}: unparsable config echo", byte_offset=offset
                    )
        elif line:
            if columns is None:
                columns = tuple(line.split(","))
                if columns != TIMESERIES_COLUMNS:
                    raise FormatError(
                        f"{path}: unexpected column header {line!r}",
                        byte_offset=offset,
                    )
            else:
                parts = line.split(",")
                if len(parts) != len(TIMESERIES_COLUMNS):
                    raise FormatError(
                        f"{path}: expected {len(TIMESERIES_COLUMNS)} fields, "
                        f"got {len(parts)}",
                        byte_offset=offset,
                    )
                try:
                    rows.append([float(p) for p in parts])
                except ValueError:
                    raise FormatError(
                        f"{path}: non-numeric field in {line!r}",
                        byte_offset=offset,
                    )
        offset += len(rawline)
    if columns is None or not rows:
        raise FormatError(f"{path}: no data rows", byte_offset=offset)
    arr = np.asarray(rows, dtype=float)
    return (
        {name: arr[:, i] for i, name in enumerate(TIMESERIES_COLUMNS)},
        config_echo,
    )


def write_spectrum(path, spectrum, config: SimConfig) -> None:
    lines = [
        "# spincat wavelet spectrum",
        f"# config: {json.dumps(config.to_dict())}",
        "# layout: first row = scale axis (sampling intervals); "
        "first column = time axis; body = normalized power",
        "," + ",".join(_fmt(a) for a in spectrum.scales),
    ]
    for j, t in enumerate(spectrum.times):
        lines.append(
            _fmt(t) + "," + ",".join(_fmt(v) for v in spectrum.power[:, j])
        )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


# ----------------------------------------------------------------------
# simulate
# ----------------------------------------------------------------------

@dataclass
class SimulateOutput:
    directory: str
    trajectory_files: list
    ensemble_file: Optional[str]
    manifest_file: str
    results: list
    failures: list = dc_field(default_factory=list)


def run_simulate(config: SimConfig) -> SimulateOutput:
    """Run the configured trajectory ensemble and write one file each.

    Individual trajectory aborts (numerical guards) are recorded in the
    manifest and do not stop the remaining trajectories.
    """
    os.makedirs(config.output_dir, exist_ok=True)
    engine = TrajectoryEngine(config)
    entries = []
    results = []
    files = []
    failures = []
    for k in range(config.n_trajectories):
        name = f"traj_{k:04d}.csv"
        path = os.path.join(config.output_dir, name)
        try:
            result = engine.run(k)
        except NumericalGuardError as exc:
            failures.append((k, str(exc)))
            entries.append(
                {"index": k, "file": None, "status": "aborted", "error": str(exc)}
            )
            continue
        write_timeseries(path, result, config, label=f"trajectory {k}")
        results.append(result)
        files.append(path)
        entries.append({"index": k, "file": name, "status": "ok", "error": None})

    ensemble_path = None
    if results:
        mean = TrajectoryResult(
            times=results[0].times,
            p_all_ground=np.mean([r.p_all_ground for r in results], axis=0),
            q_expect=np.mean([r.q_expect for r in results], axis=0),
            record=np.mean([r.record for r in results], axis=0),
            norm_drift=np.mean([r.norm_drift for r in results], axis=0),
            final_state=results[0].final_state,
        )
        ensemble_path = os.path.join(config.output_dir, "ensemble_mean.csv")
        write_timeseries(
            ensemble_path, mean, config, label=f"ensemble mean of {len(results)}"
        )

    manifest = {
        "config": config.to_dict(),
        "trajectories": entries,
        "ensemble_mean": "ensemble_mean.csv" if ensemble_path else None,
        "n_requested": config.n_trajectories,
        "n_completed": len(results),
        "n_failed": len(failures),
    }
    manifest_path = os.path.join(config.output_dir, "manifest.json")
    with open(manifest_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return SimulateOutput(
        directory=config.output_dir,
        trajectory_files=files,
        ensemble_file=ensemble_path,
        manifest_file=manifest_path,
        results=results,
        failures=failures,
    )


# ----------------------------------------------------------------------
# analyze
# ----------------------------------------------------------------------

@dataclass
class AnalyzeOutput:
    spectrum_file: str
    report_file: str
    node_times: np.ndarray
    scale_band: tuple
    band_power: np.ndarray
    times: np.ndarray


def run_analyze(
    record_file,
    config: Optional[SimConfig] = None,
    out_dir: Optional[str] = None,
) -> AnalyzeOutput:
    """Wavelet-analyze a record file and report low-frequency nodes.

    The analysis configuration is taken from the file's config echo unless
    an explicit config is supplied.
    """
    data, echo = read_timeseries(record_file)
    if config is None:
        if echo is None:
            raise ConfigError(
                f"{record_file} carries no config echo; pass a config file"
            )
        config = config_from_dict(echo)
    times = data["t"]
    if len(times) < 16:
        raise FormatError(f"{record_file}: record too short to analyze")
    dt_sample = float(times[1] - times[0])
    spectrum = cwt(data["record"], dt_sample, config.wavelet)
    band = config.low_frequency_band(dt_sample)
    bp = band_power(spectrum, band)
    nodes = detect_nodes(bp, times, config.node_threshold, config.node_separation())

    out_dir = out_dir or config.output_dir
    os.makedirs(out_dir, exist_ok=True)
    stem = os.path.splitext(os.path.basename(record_file))[0]
    spectrum_path = os.path.join(out_dir, f"{stem}_spectrum.csv")
    report_path = os.path.join(out_dir, f"{stem}_nodes.json")
    write_spectrum(spectrum_path, spectrum, config)
    report = {
        "record_file": os.path.basename(record_file),
        "scale_band": [band[0], band[1]],
        "node_threshold": config.node_threshold,
        "min_separation": config.node_separation(),
        "node_count": int(len(nodes)),
        "node_times": [float(t) for t in nodes],
        "band_power_max": float(bp.max()) if len(bp) else 0.0,
    }
    with open(report_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    return AnalyzeOutput(
        spectrum_file=spectrum_path,
        report_file=report_path,
        node_times=nodes,
        scale_band=band,
        band_power=bp,
        times=times,
    )


# ----------------------------------------------------------------------
# validate
# ----------------------------------------------------------------------

@dataclass
class CheckResult:
    name: str
    passed: bool
    measured: float
    allowed: float
    details: str


@dataclass
class ValidationReport:
    checks: list

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def render(self) -> str:
        lines = []
        for c in self.checks:
            status = "PASS" if c.passed else "FAIL"
            lines.append(
                f"[{status}] {c.name}: measured {c.measured:.3e} "
                f"(allowed {c.allowed:.3e}) -- {c.details}"
            )
        lines.append(
            "all checks passed" if self.passed else "CHECKS FAILED"
        )
        return "\n".join(lines)


def _resolved(base: dict, n_output_samples: int) -> SimConfig:
    """Resolve a config twice so output_stride lands near the target."""
    cfg = config_from_dict(base)
    d = cfg.to_dict()
    n_steps = max(1, int(math.floor(cfg.t_final / cfg.dt)))
    d["integration"]["output_stride"] = max(1, round(n_steps / n_output_samples))
    return config_from_dict(d)


def jc_check(
    nbar: float = 6.0,
    n_max: int = 36,
    seed: int = 7,
    tolerance: float = 1e-3,
    h_sign_error: bool = False,
) -> CheckResult:
    """Unmeasured single-qubit run against the closed-form revival series.

    ``h_sign_error`` is a test hook flipping the sign of the qubit energy
    term, which breaks the resonance the series assumes.
    """
    t_r = 2.0 * math.pi * math.sqrt(nbar)
    cfg = _resolved(
        {
            "model": {
                "n_qubits": 1,
                "alpha": math.sqrt(nbar),
                "z": 0.0,
                "initial_spin": "coherent",
            },
            "space": {"n_max": n_max},
            "integration": {"seed": seed, "t_final": t_r},
        },
        n_output_samples=2000,
    )
    engine = TrajectoryEngine(cfg)
    if h_sign_error:
        from scipy.linalg import expm

        jz = build_spin_ops(cfg.space_spec())[0]
        h_bad = engine.h.entries - 2.0 * cfg.omega * jz.entries
        engine._propagator = expm(-1j * cfg.dt * h_bad.toarray())
    result = engine.run(0)
    p_exc = 1.0 - result.p_all_ground
    reference = jc_analytic_pe(cfg.nbar, cfg.g, result.times)
    measured = float(np.abs(p_exc - reference).max())
    return CheckResult(
        name="single-qubit revival series",
        passed=measured < tolerance,
        measured=measured,
        allowed=tolerance,
        details=f"max |P_e - series| over [0, t_r], nbar={cfg.nbar:.3g}",
    )


def ensemble_mean_series(
    config: SimConfig, observables=("jz", "n")
) -> tuple[np.ndarray, dict, dict]:
    """Mean and standard error of observables over the configured ensemble.

    Returns (times, means, standard_errors) with one array per observable.
    """
    engine = TrajectoryEngine(config)
    runs = {name: [] for name in observables}
    times = None
    for k in range(config.n_trajectories):
        res = engine.run(k, extras=observables)
        times = res.times
        for name in observables:
            runs[name].append(res.extras[name])
    m = config.n_trajectories
    means = {}
    errors = {}
    for name in observables:
        stacked = np.asarray(runs[name])
        means[name] = stacked.mean(axis=0)
        errors[name] = stacked.std(axis=0, ddof=1) / math.sqrt(m)
    return times, means, errors


def master_equation_reference(config: SimConfig, observables=("jz", "n")):
    """Dense master-equation expectation series on the trajectory grid.

    The density matrix is propagated in the frame rotating at omega (the
    free term commutes with the coupling and leaves the dissipator and the
    compared observables invariant), which removes the fast carrier and
    lets the RK4 step be set by the coupling alone.
    """
    space = config.space_spec()
    h_full = build_hamiltonian(config.model_params(), space)
    number = build_field_ops(space)[2]
    jz_op = build_spin_ops(space)[0]
    h_rot = h_full.entries - config.omega * (number.entries + jz_op.entries)
    a_op = build_field_ops(space)[0]
    lind = (a_op.entries * math.sqrt(2.0 * config.gamma)).toarray()

    dt_sample = config.dt * config.output_stride
    h_dense = h_rot.toarray()
    scale = float(np.abs(h_dense).sum(axis=1).max()) + 2.0 * config.gamma * (
        space.n_max + 1
    )
    per_sample = max(1, int(math.ceil(dt_sample * scale / 0.08)))
    dt_oracle = dt_sample / per_sample

    rho0 = DensityMatrix.from_state(config.initial_state(space))
    times, rhos = lindblad_evolve(
        rho0, h_dense, lind, dt_oracle, config.t_final, per_sample
    )
    series = {}
    dense_ops = {"jz": jz_op.to_dense(), "n": number.to_dense()}
    for name in observables:
        op = dense_ops[name]
        series[name] = np.array(
            [float(np.trace(r.entries @ op).real) for r in rhos]
        )
    return times, series


def lindblad_ensemble_check(
    seed: int = 7,
    n_trajectories: int = 60,
    nbar: float = 4.0,
    n_max: int = 20,
    gamma: float = 5e-3,
    z_limit: float = 3.0,
) -> CheckResult:
    """Ensemble mean of the unraveling against the dense master equation."""
    n_qubits = 2
    t_r1 = 2.0 * math.pi * math.sqrt(nbar) / n_qubits
    cfg = _resolved(
        {
            "model": {"n_qubits": n_qubits, "alpha": math.sqrt(nbar), "z": 1.0},
            "space": {"n_max": n_max},
            "measurement": {"gamma": gamma},
            "integration": {
                "seed": seed,
                "t_final": t_r1,
                "n_trajectories": n_trajectories,
            },
        },
        n_output_samples=50,
    )
    times, means, errors = ensemble_mean_series(cfg)
    ref_times, refs = master_equation_reference(cfg)
    if len(ref_times) != len(times):
        raise RuntimeError("sample grids of unraveling and reference differ")
    worst = 0.0
    for name in ("jz", "n"):
        se = np.maximum(errors[name], 1e-12)
        z = np.abs(means[name] - refs[name]) / se
        worst = max(worst, float(z.max()))
    median_se = float(np.median(errors["jz"]))
    return CheckResult(
        name="ensemble mean vs master equation",
        passed=worst < z_limit,
        measured=worst,
        allowed=z_limit,
        details=(
            f"max |mean - reference|/SE over <Jz> and <n>, "
            f"M={n_trajectories}, median SE(<Jz>)={median_se:.3e}"
        ),
    )


def representation_check(seed: int = 7) -> CheckResult:
    """Full vs symmetric spin layout on a small unmeasured run."""
    nbar = 4.0
    t_r1 = math.pi * math.sqrt(nbar)
    cfg = _resolved(
        {
            "model": {"n_qubits": 2, "alpha": math.sqrt(nbar), "z": 1.0},
            "space": {"n_max": 14},
            "integration": {"seed": seed, "t_final": t_r1},
        },
        n_output_samples=50,
    )
    report = cross_representation_check(cfg)
    measured = max(report.max_dev_p_all_ground, report.max_dev_jz, report.max_dev_n)
    return CheckResult(
        name="full vs symmetric representation",
        passed=report.passed,
        measured=measured,
        allowed=report.tolerance,
        details="max deviation of p_all_ground, <Jz>, <a†a>",
    )


def run_validate(
    seed: int = 7,
    n_trajectories: int = 60,
    h_sign_error: bool = False,
) -> ValidationReport:
    """Run the three oracle suites with default-sized problems."""
    checks = [
        jc_check(seed=seed, h_sign_error=h_sign_error),
        lindblad_ensemble_check(seed=seed, n_trajectories=n_trajectories),
        representation_check(seed=seed),
    ]
    return ValidationReport(checks=checks)


# ----------------------------------------------------------------------
# timescales
# ----------------------------------------------------------------------

def run_timescales(config: SimConfig) -> str:
    """Human-readable table of characteristic times and derived defaults."""
    ts = config.time_scales()
    rows = [
        ("rabi time t_R", ts.rabi),
        ("collapse time t_c", ts.collapse),
        ("revival time t_r", ts.revival),
        ("first revival t_r1", ts.first_revival),
        ("default dt", config.dt),
        ("default t_final", config.t_final),
    ]
    width = max(len(r[0]) for r in rows)
    lines = [
        f"model: N={config.n_qubits}, nbar={config.nbar:.6g}, "
        f"g={config.g:.6g}, omega={config.omega:.6g}"
    ]
    for name, value in rows:
        lines.append(f"  {name.ljust(width)}  {value:.9g}")
    return "\n".join(lines)
