"""Seeded Monte-Carlo experiment drivers and their CSV emitters.

Every random draw derives from the root seed through a fixed split rule:
``default_rng((root_seed, stream, *indices))`` where the stream ids below keep
channel, symbol and noise draws independent. Trials are therefore reproducible
and order-independent, so worker pools of any size produce identical output.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .comms import CommFrame, gen_channel, gen_symbols, mui
from .config import ConfigError, ExperimentConfig
from .optimizer import matched_filter, model_outputs
from .radar import apply_filter_bank, estimate_targets, simulate_echo
from .schemes import JTMD, JTMMD, SolverDivergenceError, run_jtmd, run_jtmmd
from .signals import isrj_mask, lfm_waveform, lobe_metrics

STREAM_CHANNEL = 1
STREAM_SYMBOLS = 2
STREAM_ECHO_NOISE = 4
STREAM_SOLVER = 5

PD_EVENT = "weak target CFAR-detected at its detection angle within +-1 range cell"

_RUNNERS = {JTMD: run_jtmd, JTMMD: run_jtmmd}


def trial_seed(root_seed: int, snr_index: int, trial_index: int) -> tuple:
    """Echo-noise seed for one (snr, trial) pair; pairwise distinct by construction."""
    return (root_seed, STREAM_ECHO_NOISE, snr_index, trial_index)


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.12g}"
    return str(value)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_json(path, payload: dict):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def wilson_interval(successes: int, trials: int, z: float = 1.96):
    """Wilson 95% score interval for a binomial proportion."""
    if trials < 1:
        raise ValueError("need at least one trial")
    p = successes / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = z * np.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def design_frame(cfg: ExperimentConfig, trial: int | None = None) -> CommFrame:
    """Channel and symbols for the design; per-trial draws used by the MUI sweep."""
    channel_key = [cfg.root_seed, STREAM_CHANNEL] + ([] if trial is None else [trial])
    symbol_key = [cfg.root_seed, STREAM_SYMBOLS] + ([] if trial is None else [trial])
    return CommFrame(
        channel=gen_channel(cfg.scenario, tuple(channel_key)),
        symbols=gen_symbols(cfg.scenario.n_users, cfg.scenario.n_slots, tuple(symbol_key)),
        noise_power=cfg.scenario.comm_noise_power,
    )


def run_design(cfg: ExperimentConfig, scheme: str | None = None,
               frame: CommFrame | None = None):
    """Run the configured scheme once; returns (result, frame)."""
    scheme = scheme or cfg.scheme
    if frame is None:
        frame = design_frame(cfg)
    runner = _RUNNERS[scheme]
    result = runner(cfg.scenario, frame, cfg.jammer, cfg.design,
                    seed=(cfg.root_seed, STREAM_SOLVER))
    return result, frame


def lfm_baseline(scenario):
    """Un-optimized design: orthogonal chirp with its matched filter bank."""
    x = lfm_waveform(scenario.n_tx, scenario.n_slots)
    filters = np.stack([matched_filter(x, t) for t in scenario.detection_angles])
    return x, filters


def weak_target_index(scenario) -> int:
    return int(np.argmin(np.abs(scenario.target_amplitudes)))


def detection_angle_index(scenario, angle: float) -> int:
    match = np.flatnonzero(np.abs(scenario.detection_angles - angle) < 1e-9)
    if match.size == 0:
        raise ConfigError("target angle is not on the detection angle grid")
    return int(match[0])


def weak_target_hit(report, angle_index: int, cell: int, cell_tol: int = 1) -> bool:
    return any(
        d.angle_index == angle_index and abs(d.range_cell - cell) <= cell_tol
        for d in report.detections
    )


def echo_signal_power(cfg: ExperimentConfig, x) -> float:
    """Average per-entry power of the noise-free, jamming-free target echo."""
    quiet = replace(cfg.scenario, sense_noise_power=0.0)
    mask = isrj_mask(cfg.jammer, cfg.scenario.n_slots)
    frame = simulate_echo(quiet, x, mask, cfg.target_delays, seed=0, jammer_on=False)
    return float(np.sum(np.abs(frame.y_rx) ** 2) / frame.y_rx.size)


# ---------------------------------------------------------------------------
# Experiment drivers
# ---------------------------------------------------------------------------


@dataclass
class SweepResult:
    rows: list  # dicts with snr_db, pd, n_trials, wilson_lo, wilson_hi
    scheme: str
    root_seed: int
    config_hash: str
    pd_event: str = PD_EVENT


def run_pd_sweep(cfg: ExperimentConfig, scheme: str | None = None,
                 workers: int = 1) -> SweepResult:
    """Empirical detection probability of the weak target over the SNR grid.

    One design per sweep; each trial redraws the sensing noise only. The noise
    power at each grid point is set from the average target-echo power so that
    `snr_db` is the echo-to-noise power ratio.
    """
    scheme = scheme or cfg.scheme
    result, _ = run_design(cfg, scheme)
    x, filters = result.x, result.filters
    return _pd_sweep_with_design(cfg, x, filters, scheme, workers)


def _pd_sweep_with_design(cfg: ExperimentConfig, x, filters, label: str,
                          workers: int = 1) -> SweepResult:
    scenario = cfg.scenario
    weak = weak_target_index(scenario)
    weak_angle = detection_angle_index(scenario, scenario.target_angles[weak])
    weak_cell = cfg.target_delays[weak]
    mask = isrj_mask(cfg.jammer, scenario.n_slots)
    power = echo_signal_power(cfg, x)

    def one_trial(snr_index: int, trial: int) -> bool:
        snr = cfg.snr_grid_db[snr_index]
        noisy = replace(scenario, sense_noise_power=power * 10.0 ** (-snr / 10.0))
        frame = simulate_echo(
            noisy, x, mask, cfg.target_delays,
            seed=trial_seed(cfg.root_seed, snr_index, trial),
            jammer_on=cfg.jammer.enabled,
        )
        outputs = apply_filter_bank(frame, filters, scenario.detection_angles)
        report = estimate_targets(outputs, cfg.pfa, cfg.cfar_train, cfg.cfar_guard)
        return weak_target_hit(report, weak_angle, weak_cell)

    jobs = [(si, t) for si in range(len(cfg.snr_grid_db)) for t in range(cfg.n_trials)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(lambda job: one_trial(*job), jobs))
    else:
        outcomes = [one_trial(*job) for job in jobs]

    rows = []
    for si, snr in enumerate(cfg.snr_grid_db):
        hits = sum(
            outcomes[si * cfg.n_trials + t] for t in range(cfg.n_trials)
        )
        lo, hi = wilson_interval(hits, cfg.n_trials)
        rows.append({
            "snr_db": snr,
            "pd": hits / cfg.n_trials,
            "n_trials": cfg.n_trials,
            "wilson_lo": lo,
            "wilson_hi": hi,
        })
    return SweepResult(rows=rows, scheme=label, root_seed=cfg.root_seed,
                       config_hash=cfg.config_hash)


def run_mui_eval(cfg: ExperimentConfig, scheme: str | None = None):
    """Design once per channel draw; report interference in three normalizations.

    Returns (per-trial rows, summary rows, failed trial indices). Designs that
    diverge are excluded from the aggregates and reported by index.
    """
    scheme = scheme or cfg.scheme
    rows = []
    failed = []
    for trial in range(cfg.mui_trials):
        frame = design_frame(cfg, trial=trial)
        try:
            result, _ = run_design(cfg, scheme, frame=frame)
        except SolverDivergenceError:
            failed.append(trial)
            continue
        report = mui(frame.channel, result.x, frame.symbols)
        rows.append((trial, report.frobenius, report.frobenius_sq, report.per_symbol_avg))
    summary = []
    if rows:
        data = np.array([row[1:] for row in rows], dtype=float)
        summary.append(("median", *np.median(data, axis=0)))
        summary.append(("max", *np.max(data, axis=0)))
    return rows, summary, failed


def run_sidelobe_compare(cfg: ExperimentConfig):
    """Design both schemes on the same frame and compare lobe levels per angle.

    Rows are normalized to a common 0 dB mainlobe so peak-sidelobe columns are
    directly comparable; an un-optimized chirp row per angle gives the baseline.
    """
    frame = design_frame(cfg)
    mask = isrj_mask(cfg.jammer, cfg.scenario.n_slots)
    designs = [("lfm", *lfm_baseline(cfg.scenario))]
    for scheme in (JTMD, JTMMD):
        result, _ = run_design(cfg, scheme, frame=frame)
        designs.append((scheme, result.x, result.filters))

    rows = []
    matched_point = cfg.scenario.n_slots  # 1-based
    for label, x, filters in designs:
        model = model_outputs(x, filters, cfg.scenario, mask)
        for l in range(cfg.scenario.n_angles):
            metrics = lobe_metrics(model.z[l], matched_point)
            rows.append((label, l, 0.0, -metrics.ratio_db, metrics.ratio_db))
    return rows


# ---------------------------------------------------------------------------
# File emitters used by the CLI
# ---------------------------------------------------------------------------


def emit_pd_sweep(cfg: ExperimentConfig, out_dir: str, scheme: str | None = None,
                  workers: int = 1) -> SweepResult:
    sweep = run_pd_sweep(cfg, scheme, workers=workers)
    os.makedirs(out_dir, exist_ok=True)
    write_csv(
        os.path.join(out_dir, f"pd_sweep_{sweep.scheme}.csv"),
        ("snr_db", "pd", "n_trials", "wilson_lo", "wilson_hi"),
        [(r["snr_db"], r["pd"], r["n_trials"], r["wilson_lo"], r["wilson_hi"])
         for r in sweep.rows],
    )
    write_json(
        os.path.join(out_dir, f"pd_sweep_{sweep.scheme}_meta.json"),
        {
            "scheme": sweep.scheme,
            "root_seed": sweep.root_seed,
            "config_hash": sweep.config_hash,
            "pd_event": sweep.pd_event,
        },
    )
    return sweep


def emit_mui_eval(cfg: ExperimentConfig, out_dir: str, scheme: str | None = None):
    rows, summary, failed = run_mui_eval(cfg, scheme)
    os.makedirs(out_dir, exist_ok=True)
    write_csv(
        os.path.join(out_dir, "mui.csv"),
        ("trial", "frob", "frob_sq", "per_symbol"),
        rows,
    )
    write_csv(
        os.path.join(out_dir, "mui_summary.csv"),
        ("stat", "frob", "frob_sq", "per_symbol"),
        summary,
    )
    write_json(
        os.path.join(out_dir, "mui_meta.json"),
        {
            "scheme": scheme or cfg.scheme,
            "root_seed": cfg.root_seed,
            "config_hash": cfg.config_hash,
            "n_trials": cfg.mui_trials,
            "failed_trials": failed,
        },
    )
    return rows, summary, failed


def emit_sidelobe_compare(cfg: ExperimentConfig, out_dir: str):
    rows = run_sidelobe_compare(cfg)
    os.makedirs(out_dir, exist_ok=True)
    write_csv(
        os.path.join(out_dir, "sidelobes.csv"),
        ("scheme", "angle_index", "mainlobe_db", "psl_db", "ratio_db"),
        rows,
    )
    return rows


def emit_design(cfg: ExperimentConfig, out_dir: str, scheme: str | None = None):
    scheme = scheme or cfg.scheme
    result, _ = run_design(cfg, scheme)
    os.makedirs(out_dir, exist_ok=True)
    np.savez(
        os.path.join(out_dir, f"design_{scheme}.npz"),
        x=result.x,
        filters=result.filters,
    )
    write_csv(
        os.path.join(out_dir, f"trace_{scheme}.csv"),
        ("iter", "objective", "residual_mainlobe", "residual_jamming",
         "residual_sidelobe", "residual_filter"),
        result.trace_rows(),
    )
    write_json(
        os.path.join(out_dir, f"design_{scheme}.json"),
        {
            "scheme": scheme,
            "root_seed": cfg.root_seed,
            "config_hash": cfg.config_hash,
            "converged": result.converged,
            "iterations_run": result.iterations_run,
            "inner_warnings": result.inner_warnings,
            "final_residuals": result.final_residuals,
            "final_mui_frobenius": result.objective_trace[-1],
        },
    )
    return result


def emit_detection(cfg: ExperimentConfig, out_dir: str, x, filters,
                   scheme: str, snr_db: float | None = None):
    """Simulate one echo with the stored design and write the detection report."""
    scenario = cfg.scenario
    if snr_db is not None:
        power = echo_signal_power(cfg, x)
        scenario = replace(scenario, sense_noise_power=power * 10.0 ** (-snr_db / 10.0))
    mask = isrj_mask(cfg.jammer, scenario.n_slots)
    frame = simulate_echo(
        scenario, x, mask, cfg.target_delays,
        seed=trial_seed(cfg.root_seed, 0, 0), jammer_on=cfg.jammer.enabled,
    )
    outputs = apply_filter_bank(frame, filters, scenario.detection_angles)
    report = estimate_targets(outputs, cfg.pfa, cfg.cfar_train, cfg.cfar_guard)
    os.makedirs(out_dir, exist_ok=True)
    write_csv(
        os.path.join(out_dir, f"detection_{scheme}.csv"),
        ("angle_index", "range_cell", "magnitude_db", "threshold_db"),
        report.csv_rows(),
    )
    return report
