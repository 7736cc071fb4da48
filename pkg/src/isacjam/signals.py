"""Complex baseband primitives shared by the design and simulation chain.

Conventions used throughout the package:

* the transmit waveform is an (n_tx, n_slots) complex array; the bundled chirp
  initializer has unit Frobenius norm,
* receive filters are length-P complex tap vectors; they are applied by
  correlating the taps against the combiner output (`pulse_compress`), so a
  filter equal to the conjugated signal puts its peak at the matched point,
* the matched point of a length 2P-1 filter output is entry P (1-based).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Scenario:
    """Geometry, amplitudes and noise levels of one ISAC deployment."""

    n_tx: int
    n_rx: int
    n_users: int
    n_slots: int
    detection_angles: np.ndarray  # radians, one per combiner
    target_angles: np.ndarray  # radians, one per target
    target_amplitudes: np.ndarray  # complex, one per target
    jammer_angle: float
    jammer_amplitude: complex
    comm_noise_power: float  # linear, per receive entry
    sense_noise_power: float  # linear, per receive entry

    def __post_init__(self):
        self.detection_angles = np.atleast_1d(np.asarray(self.detection_angles, dtype=float))
        self.target_angles = np.atleast_1d(np.asarray(self.target_angles, dtype=float))
        self.target_amplitudes = np.atleast_1d(np.asarray(self.target_amplitudes, dtype=complex))
        if min(self.n_tx, self.n_rx, self.n_users) < 1:
            raise ValueError("antenna and user counts must be >= 1")
        if self.n_slots < 2:
            raise ValueError("need at least two time slots")
        for name, angles in (("detection", self.detection_angles), ("target", self.target_angles)):
            if angles.size and (np.abs(angles) >= np.pi / 2).any():
                raise ValueError(f"{name} angles must lie in (-pi/2, pi/2)")
        if len(self.target_angles) != len(self.target_amplitudes):
            raise ValueError("target angle and amplitude lists must have matching lengths")
        if self.comm_noise_power < 0 or self.sense_noise_power < 0:
            raise ValueError("noise powers must be nonnegative")

    @property
    def n_angles(self) -> int:
        return len(self.detection_angles)

    @property
    def n_targets(self) -> int:
        return len(self.target_angles)


@dataclass
class JammerProfile:
    """Interrupted-sampling repeater timing on the waveform's slot grid.

    `sample_interval` is the slot spacing (the inverse of the configured signal
    bandwidth); pulse timings are snapped to whole slots.
    """

    pulse_width: float  # seconds the sampler is on per slice
    repetition_period: float  # seconds between slice starts
    n_slices: int
    sample_interval: float = 1e-7  # 10 MHz bandwidth default
    enabled: bool = True

    def __post_init__(self):
        if not 0 < self.pulse_width <= self.repetition_period:
            raise ValueError("need 0 < pulse_width <= repetition_period")
        if self.sample_interval <= 0:
            raise ValueError("sample_interval must be positive")
        if self.n_slices < 1:
            raise ValueError("n_slices must be >= 1")


def steering_vector(n: int, theta: float) -> np.ndarray:
    """Unit-norm response of an n-element half-wavelength ULA toward angle theta (rad)."""
    if n < 1:
        raise ValueError("antenna count must be >= 1")
    k = np.arange(n)
    return np.exp(1j * np.pi * k * np.sin(theta)) / np.sqrt(n)


def lfm_waveform(n_tx: int, n_slots: int) -> np.ndarray:
    """Orthogonal multi-antenna chirp with unit Frobenius norm.

    Entry (m, p) is exp(j*2*pi*m*p/P) * exp(j*pi*p^2/P) / sqrt(n_tx*P) with
    p = 0..P-1, so every column carries power 1/P and rows are mutually
    orthogonal whenever n_tx <= P.
    """
    if n_tx < 1 or n_slots < 1:
        raise ValueError("waveform dimensions must be >= 1")
    m = np.arange(n_tx)[:, None]
    p = np.arange(n_slots)[None, :]
    phase = 2.0 * np.pi * m * p / n_slots + np.pi * p.astype(float) ** 2 / n_slots
    return np.exp(1j * phase) / np.sqrt(n_tx * n_slots)


def isrj_mask(profile: JammerProfile, n_slots: int) -> np.ndarray:
    """0/1 sampling mask of the repeater over n_slots slots (complex dtype).

    Slot n is on iff its time n*dt falls inside one of the n_slices intervals
    [k*T_s, k*T_s + T_p). Timings are snapped to whole slots so the mask is
    insensitive to float rounding of the configured periods.
    """
    if n_slots < 1:
        raise ValueError("n_slots must be >= 1")
    if not profile.enabled:
        return np.zeros(n_slots, dtype=complex)
    n_on = round(profile.pulse_width / profile.sample_interval)
    n_period = round(profile.repetition_period / profile.sample_interval)
    if n_period < 1:
        raise ValueError("repetition period is below one sample interval")
    n = np.arange(n_slots)
    on = (n % n_period < n_on) & (n // n_period < profile.n_slices)
    return on.astype(complex)


def apply_isrj(x: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Repeated signal X * g: every column of x scaled by its mask entry."""
    x = np.asarray(x)
    mask = np.asarray(mask)
    if x.ndim != 2 or mask.ndim != 1 or x.shape[1] != mask.shape[0]:
        raise ValueError("mask length must equal the waveform slot count")
    return x * mask[None, :]


def convolve_full(v: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Full linear convolution; output length len(v)+len(y)-1."""
    v = np.asarray(v)
    y = np.asarray(y)
    if v.size == 0 or y.size == 0:
        raise ValueError("convolution inputs must be nonempty")
    return np.convolve(v, y)


def pulse_compress(taps: np.ndarray, samples: np.ndarray) -> np.ndarray:
    """Slide filter taps over a sample stream (full overlap range).

    Output entry n (0-based) is sum_j taps[j]*samples[j + n - (P-1)] with
    P = len(taps), i.e. the taps correlate against the stream without extra
    conjugation. A filter equal to conj(samples)/norm therefore peaks with
    value norm(samples) at entry P (1-based), the matched point.
    """
    taps = np.asarray(taps)
    return convolve_full(taps[::-1], samples)


@dataclass
class LobeMetrics:
    mainlobe_power: float
    peak_sidelobe_power: float
    ratio_db: float


def lobe_metrics(z: np.ndarray, matched_index: int) -> LobeMetrics:
    """Mainlobe power, peak sidelobe power and their ratio in dB.

    `matched_index` is 1-based (entry P for a length 2P-1 filter output).
    The ratio is +inf for an ideal point response, -inf for a dead mainlobe
    and nan when z is identically zero.
    """
    z = np.asarray(z)
    if z.size < 2:
        raise ValueError("need at least two entries")
    if not 1 <= matched_index <= z.size:
        raise ValueError("matched_index out of range")
    power = np.abs(z) ** 2
    main = float(power[matched_index - 1])
    psl = float(np.max(np.delete(power, matched_index - 1)))
    if main > 0 and psl > 0:
        ratio = 10.0 * np.log10(main / psl)
    elif main > 0:
        ratio = np.inf
    elif psl > 0:
        ratio = -np.inf
    else:
        ratio = np.nan
    return LobeMetrics(main, psl, float(ratio))
