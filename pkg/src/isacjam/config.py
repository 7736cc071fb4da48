"""Experiment configuration: a single JSON file with scenario / jammer / design /
evaluation blocks. Every physical default lives here so each assumption is
visible and overridable."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .optimizer import DesignConfig, default_thresholds
from .signals import JammerProfile, Scenario


class ConfigError(ValueError):
    """A configuration file failed validation."""


_SCHEMES = ("jtmd", "jtmmd")


@dataclass
class ExperimentConfig:
    scenario: Scenario
    jammer: JammerProfile
    scheme: str
    design: DesignConfig
    target_delays: list
    snr_grid_db: list
    n_trials: int
    mui_trials: int
    pfa: float
    cfar_train: int
    cfar_guard: int
    root_seed: int
    output_dir: str
    normalized: dict  # fully resolved config, the hashing/printing source

    @property
    def config_hash(self) -> str:
        text = json.dumps(self.normalized, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def _require(block: dict, key: str, where: str):
    if key not in block:
        raise ConfigError(f"missing key '{key}' in the {where} block")
    return block[key]


def _get(block: dict, key: str, default):
    return block.get(key, default)


def load_config(path) -> ExperimentConfig:
    """Parse and validate a JSON experiment configuration file."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    return config_from_dict(raw)


def config_from_dict(raw: dict) -> ExperimentConfig:
    for block in ("scenario", "jammer", "design", "evaluation"):
        if block not in raw or not isinstance(raw[block], dict):
            raise ConfigError(f"missing configuration block '{block}'")
    sc = raw["scenario"]
    jm = raw["jammer"]
    ds = raw["design"]
    ev = raw["evaluation"]

    det_deg = np.asarray(_require(sc, "detection_angles_deg", "scenario"), dtype=float)
    tgt_deg = np.asarray(_require(sc, "target_angles_deg", "scenario"), dtype=float)
    amp_db = np.asarray(_require(sc, "target_amplitudes_db", "scenario"), dtype=float)
    if amp_db.shape != tgt_deg.shape:
        raise ConfigError("target_amplitudes_db must match target_angles_deg in length")
    amplitudes = 10.0 ** (amp_db / 20.0)
    jsr_db = float(_require(sc, "jammer_jsr_db", "scenario"))
    jammer_amp = 10.0 ** (jsr_db / 20.0) * float(np.max(amplitudes)) if amplitudes.size else 0.0

    try:
        scenario = Scenario(
            n_tx=int(_require(sc, "n_tx", "scenario")),
            n_rx=int(_require(sc, "n_rx", "scenario")),
            n_users=int(_require(sc, "n_users", "scenario")),
            n_slots=int(_require(sc, "n_slots", "scenario")),
            detection_angles=np.deg2rad(det_deg),
            target_angles=np.deg2rad(tgt_deg),
            target_amplitudes=amplitudes.astype(complex),
            jammer_angle=float(np.deg2rad(_require(sc, "jammer_angle_deg", "scenario"))),
            jammer_amplitude=complex(jammer_amp),
            comm_noise_power=float(_get(sc, "comm_noise_power", 0.01)),
            sense_noise_power=float(_get(sc, "sense_noise_power", 1e-3)),
        )
        jammer = JammerProfile(
            pulse_width=float(_require(jm, "pulse_width_us", "jammer")) * 1e-6,
            repetition_period=float(_require(jm, "repetition_period_us", "jammer")) * 1e-6,
            n_slices=int(_require(jm, "n_slices", "jammer")),
            sample_interval=float(_get(jm, "sample_interval_us", 0.1)) * 1e-6,
            enabled=bool(_get(jm, "enabled", True)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    delays = [int(v) for v in _get(sc, "target_range_cells", [0] * scenario.n_targets)]
    if len(delays) != scenario.n_targets:
        raise ConfigError("target_range_cells must match target_angles_deg in length")
    for d in delays:
        if not 0 <= d < scenario.n_slots:
            raise ConfigError("target_range_cells must lie in [0, n_slots)")

    scheme = str(_get(ds, "scheme", "jtmmd")).lower()
    if scheme not in _SCHEMES:
        raise ConfigError(f"design.scheme must be one of {_SCHEMES}")

    auto_floor, auto_jam, auto_side = default_thresholds(scenario)

    def threshold(key, auto):
        value = _get(ds, key, "auto")
        if isinstance(value, str):
            if value != "auto":
                raise ConfigError(f"design.{key} must be 'auto' or a number/list")
            return auto
        arr = np.atleast_1d(np.asarray(value, dtype=float))
        if arr.size == 1:
            arr = np.full(scenario.n_angles, float(arr[0]))
        if arr.size != scenario.n_angles:
            raise ConfigError(f"design.{key} needs one value per detection angle")
        return arr

    try:
        design = DesignConfig(
            mainlobe_floor=threshold("mainlobe_floor", auto_floor),
            jamming_cap=threshold("jamming_cap", auto_jam),
            sidelobe_cap=threshold("sidelobe_cap", auto_side),
            tx_power=float(_get(ds, "tx_power", 2.0)),
            penalty=float(_get(ds, "penalty", 1.0)),
            max_outer_iters=int(_get(ds, "max_outer_iters", 100)),
            outer_tol=float(_get(ds, "outer_tol", 1e-4)),
            inner_tol=float(_get(ds, "inner_tol", 1e-9)),
            inner_max_iters=int(_get(ds, "inner_max_iters", 600)),
            smoothing_eps=float(_get(ds, "smoothing_eps", 1e-8)),
            sidelobe_includes_jamming=bool(_get(ds, "sidelobe_includes_jamming", True)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    snr_grid = [float(v) for v in _require(ev, "snr_grid_db", "evaluation")]
    if not snr_grid:
        raise ConfigError("evaluation.snr_grid_db must be nonempty")
    if any(b <= a for a, b in zip(snr_grid, snr_grid[1:])):
        raise ConfigError("evaluation.snr_grid_db must be sorted strictly ascending")
    n_trials = int(_require(ev, "n_trials", "evaluation"))
    mui_trials = int(_get(ev, "mui_trials", 5))
    if n_trials < 1 or mui_trials < 1:
        raise ConfigError("trial counts must be >= 1")
    pfa = float(_get(ev, "pfa", 1e-3))
    if not 0.0 < pfa < 1.0:
        raise ConfigError("evaluation.pfa must lie in (0, 1)")
    cfar_train = int(_get(ev, "cfar_train", 16))
    cfar_guard = int(_get(ev, "cfar_guard", 2))
    if cfar_train < 1 or cfar_guard < 0:
        raise ConfigError("need cfar_train >= 1 and cfar_guard >= 0")
    if 2 * scenario.n_slots - 1 <= 2 * (cfar_train + cfar_guard):
        raise ConfigError("CFAR window does not fit the filter output length")
    root_seed = int(_get(ev, "root_seed", 0))
    if root_seed < 0:
        raise ConfigError("root_seed must be nonnegative")
    output_dir = str(_get(raw, "output_dir", "results"))

    normalized = {
        "scenario": {
            "n_tx": scenario.n_tx,
            "n_rx": scenario.n_rx,
            "n_users": scenario.n_users,
            "n_slots": scenario.n_slots,
            "detection_angles_deg": [float(v) for v in det_deg],
            "target_angles_deg": [float(v) for v in tgt_deg],
            "target_amplitudes_db": [float(v) for v in amp_db],
            "target_range_cells": delays,
            "jammer_angle_deg": float(_require(sc, "jammer_angle_deg", "scenario")),
            "jammer_jsr_db": jsr_db,
            "comm_noise_power": scenario.comm_noise_power,
            "sense_noise_power": scenario.sense_noise_power,
        },
        "jammer": {
            "pulse_width_us": jammer.pulse_width * 1e6,
            "repetition_period_us": jammer.repetition_period * 1e6,
            "n_slices": jammer.n_slices,
            "sample_interval_us": jammer.sample_interval * 1e6,
            "enabled": jammer.enabled,
        },
        "design": {
            "scheme": scheme,
            "mainlobe_floor": [float(v) for v in design.mainlobe_floor],
            "jamming_cap": [float(v) for v in design.jamming_cap],
            "sidelobe_cap": [float(v) for v in design.sidelobe_cap],
            "tx_power": design.tx_power,
            "penalty": design.penalty,
            "max_outer_iters": design.max_outer_iters,
            "outer_tol": design.outer_tol,
            "inner_tol": design.inner_tol,
            "inner_max_iters": design.inner_max_iters,
            "smoothing_eps": design.smoothing_eps,
            "sidelobe_includes_jamming": design.sidelobe_includes_jamming,
        },
        "evaluation": {
            "snr_grid_db": snr_grid,
            "n_trials": n_trials,
            "mui_trials": mui_trials,
            "pfa": pfa,
            "cfar_train": cfar_train,
            "cfar_guard": cfar_guard,
            "root_seed": root_seed,
        },
        "output_dir": output_dir,
    }
    return ExperimentConfig(
        scenario=scenario,
        jammer=jammer,
        scheme=scheme,
        design=design,
        target_delays=delays,
        snr_grid_db=snr_grid,
        n_trials=n_trials,
        mui_trials=mui_trials,
        pfa=pfa,
        cfar_train=cfar_train,
        cfar_guard=cfar_guard,
        root_seed=root_seed,
        output_dir=output_dir,
        normalized=normalized,
    )
