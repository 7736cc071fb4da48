"""Receive-side physics and detection: echo synthesis, combining, filtering,
cell-averaging CFAR, and target count/range/angle estimation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .signals import Scenario, pulse_compress, steering_vector


@dataclass
class EchoFrame:
    """One received sensing snapshot plus the ground truth that produced it."""

    y_rx: np.ndarray  # (n_rx, n_slots)
    true_targets: list  # dicts with angle, amplitude, delay (in slots)
    jammer_on: bool
    noise_power: float


@dataclass
class AngleDetection:
    angle_index: int
    range_cell: int  # delay in slots past the matched point
    magnitude_db: float
    threshold_db: float


@dataclass
class DetectionReport:
    magnitude: np.ndarray  # (L, 2P-1) filter output magnitudes
    threshold: np.ndarray  # (L, 2P-1) CFAR threshold traces (power domain)
    detected_cells: list  # per angle, raw detected output indices (0-based)
    detections: list = field(default_factory=list)  # merged AngleDetection peaks

    @property
    def n_targets_est(self) -> int:
        return len(self.detections)

    def csv_rows(self):
        return [
            (d.angle_index, d.range_cell, d.magnitude_db, d.threshold_db)
            for d in self.detections
        ]


def delay_waveform(x: np.ndarray, delay: int) -> np.ndarray:
    """Right-shift the slot axis by `delay`, zero-filling; no wraparound."""
    x = np.asarray(x)
    n_slots = x.shape[1]
    if not 0 <= delay < n_slots:
        raise ValueError("delay must lie in [0, n_slots)")
    if delay == 0:
        return x.copy()
    out = np.zeros_like(x)
    out[:, delay:] = x[:, : n_slots - delay]
    return out


def simulate_echo(scenario: Scenario, x: np.ndarray, mask: np.ndarray, delays,
                  seed, jammer_on: bool = True) -> EchoFrame:
    """Superpose per-target delayed echoes, the repeated jamming signal and noise.

    Each target contributes amplitude * a_rx(angle) a_tx(angle)^H applied to the
    waveform delayed by its round-trip slot count; the jammer repeats the masked
    waveform from its own angle without delay.
    """
    x = np.asarray(x, dtype=complex)
    mask = np.asarray(mask, dtype=complex)
    delays = list(delays)
    if len(delays) != scenario.n_targets:
        raise ValueError("need one delay per target")
    rng = np.random.default_rng(seed)
    y = np.zeros((scenario.n_rx, x.shape[1]), dtype=complex)
    truth = []
    for angle, amp, delay in zip(scenario.target_angles, scenario.target_amplitudes, delays):
        a_rx = steering_vector(scenario.n_rx, angle)
        a_tx = steering_vector(scenario.n_tx, angle)
        y += amp * np.outer(a_rx, np.conj(a_tx)) @ delay_waveform(x, int(delay))
        truth.append({"angle": float(angle), "amplitude": complex(amp), "delay": int(delay)})
    if jammer_on:
        a_rx = steering_vector(scenario.n_rx, scenario.jammer_angle)
        a_tx = steering_vector(scenario.n_tx, scenario.jammer_angle)
        y += scenario.jammer_amplitude * np.outer(a_rx, np.conj(a_tx)) @ (x * mask[None, :])
    if scenario.sense_noise_power > 0:
        noise = rng.standard_normal(y.shape) + 1j * rng.standard_normal(y.shape)
        y += noise * np.sqrt(scenario.sense_noise_power / 2.0)
    return EchoFrame(
        y_rx=y, true_targets=truth, jammer_on=jammer_on,
        noise_power=scenario.sense_noise_power,
    )


def combine(y_rx: np.ndarray, n_rx: int, theta: float) -> np.ndarray:
    """Beamform the array snapshot toward theta: a(n_rx, theta)^H Y."""
    y_rx = np.asarray(y_rx)
    if y_rx.shape[0] != n_rx:
        raise ValueError("snapshot row count does not match the array size")
    return np.conj(steering_vector(n_rx, theta)) @ y_rx


def apply_filter_bank(frame: EchoFrame, filters, detection_angles) -> np.ndarray:
    """Per-angle filter outputs, (L, 2P-1): combine toward each angle then compress."""
    filters = np.asarray(filters, dtype=complex)
    detection_angles = np.atleast_1d(detection_angles)
    if filters.shape[0] != detection_angles.size:
        raise ValueError("need one filter per detection angle")
    n_rx = frame.y_rx.shape[0]
    out = np.empty((filters.shape[0], 2 * filters.shape[1] - 1), dtype=complex)
    for l, theta in enumerate(detection_angles):
        out[l] = pulse_compress(filters[l], combine(frame.y_rx, n_rx, theta))
    return out


def cfar_detect(magnitude_sq: np.ndarray, pfa: float, n_train: int = 16,
                n_guard: int = 2):
    """Cell-averaging CFAR on square-law samples.

    The threshold at each cell is alpha * (mean of the n_train leading plus
    n_train trailing training cells, skipping n_guard guard cells per side)
    with alpha = N (pfa^(-1/N) - 1) for N available training cells, which makes
    the false-alarm rate exactly pfa for exponential noise. Edge cells fall
    back to the one-sided window that fits, with alpha recomputed for the
    reduced N. Returns (detected indices, threshold trace).
    """
    x = np.asarray(magnitude_sq, dtype=float)
    if x.ndim != 1:
        raise ValueError("expected a 1-D power trace")
    if not 0.0 < pfa < 1.0:
        raise ValueError("pfa must lie in (0, 1)")
    if n_train < 1 or n_guard < 0:
        raise ValueError("need n_train >= 1 and n_guard >= 0")
    n = x.size
    if n <= 2 * (n_train + n_guard):
        raise ValueError("input shorter than the CFAR window")

    csum = np.concatenate(([0.0], np.cumsum(x)))
    idx = np.arange(n)
    lead_lo = np.clip(idx - n_guard - n_train, 0, n)
    lead_hi = np.clip(idx - n_guard, 0, n)  # exclusive
    trail_lo = np.clip(idx + n_guard + 1, 0, n)
    trail_hi = np.clip(idx + n_guard + 1 + n_train, 0, n)  # exclusive
    counts = (lead_hi - lead_lo) + (trail_hi - trail_lo)
    sums = (csum[lead_hi] - csum[lead_lo]) + (csum[trail_hi] - csum[trail_lo])

    alpha = np.empty(n)
    for n_cells in np.unique(counts):
        alpha[counts == n_cells] = n_cells * (pfa ** (-1.0 / n_cells) - 1.0)
    threshold = alpha * sums / counts
    detected = np.flatnonzero(x > threshold)
    return detected, threshold


def _merge_adjacent(indices: np.ndarray, power: np.ndarray) -> list:
    """Collapse runs of detections that sit within one cell of each other."""
    peaks = []
    run = []
    for i in indices:
        if run and i - run[-1] > 1:
            peaks.append(max(run, key=lambda j: power[j]))
            run = []
        run.append(i)
    if run:
        peaks.append(max(run, key=lambda j: power[j]))
    return peaks


def estimate_targets(filter_outputs: np.ndarray, pfa: float, n_train: int = 16,
                     n_guard: int = 2) -> DetectionReport:
    """CFAR per angle on the filter outputs, mapping peaks to range cells.

    A peak at output index P + d (1-based) at angle l reports range cell d at
    that angle; adjacent detected cells merge into their local maximum. The
    estimated target count is the total number of merged peaks.
    """
    z = np.asarray(filter_outputs)
    matched = (z.shape[1] - 1) // 2  # 0-based
    power = np.abs(z) ** 2
    magnitude = np.abs(z)
    threshold = np.empty_like(power)
    detected_cells = []
    detections = []
    for l in range(z.shape[0]):
        detected, threshold[l] = cfar_detect(power[l], pfa, n_train, n_guard)
        detected_cells.append(detected)
        for peak in _merge_adjacent(detected, power[l]):
            detections.append(
                AngleDetection(
                    angle_index=l,
                    range_cell=int(peak - matched),
                    magnitude_db=float(10.0 * np.log10(max(power[l, peak], 1e-300))),
                    threshold_db=float(10.0 * np.log10(max(threshold[l, peak], 1e-300))),
                )
            )
    return DetectionReport(
        magnitude=magnitude, threshold=threshold,
        detected_cells=detected_cells, detections=detections,
    )
