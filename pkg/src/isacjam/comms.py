"""Communication side of the link: channel, symbols, interference metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .signals import Scenario

_QPSK = np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j]) / np.sqrt(2.0)


@dataclass
class CommFrame:
    """Channel and intended symbols held fixed over one design frame."""

    channel: np.ndarray  # (n_users, n_tx)
    symbols: np.ndarray  # (n_users, n_slots)
    noise_power: float

    def __post_init__(self):
        self.channel = np.asarray(self.channel, dtype=complex)
        self.symbols = np.asarray(self.symbols, dtype=complex)
        if self.channel.ndim != 2 or self.symbols.ndim != 2:
            raise ValueError("channel and symbols must be matrices")
        if self.channel.shape[0] != self.symbols.shape[0]:
            raise ValueError("channel and symbols disagree on the user count")
        if self.noise_power < 0:
            raise ValueError("noise power must be nonnegative")


def gen_channel(scenario: Scenario, seed) -> np.ndarray:
    """i.i.d. unit-variance Rayleigh flat-fading channel, (n_users, n_tx)."""
    rng = np.random.default_rng(seed)
    shape = (scenario.n_users, scenario.n_tx)
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def gen_symbols(n_users: int, n_slots: int, seed) -> np.ndarray:
    """Uniform QPSK symbol matrix (n_users, n_slots), unit power per symbol."""
    if n_users < 1 or n_slots < 1:
        raise ValueError("symbol matrix dimensions must be >= 1")
    rng = np.random.default_rng(seed)
    return _QPSK[rng.integers(0, 4, size=(n_users, n_slots))]


@dataclass
class MuiReport:
    frobenius: float
    frobenius_sq: float
    per_symbol_avg: float


def mui(channel: np.ndarray, x: np.ndarray, symbols: np.ndarray) -> MuiReport:
    """Multiuser interference H @ X - S in three normalizations."""
    channel = np.asarray(channel)
    x = np.asarray(x)
    symbols = np.asarray(symbols)
    if channel.shape[1] != x.shape[0] or (channel.shape[0], x.shape[1]) != symbols.shape:
        raise ValueError("inconsistent channel/waveform/symbol shapes")
    residual = channel @ x - symbols
    frob_sq = float(np.sum(np.abs(residual) ** 2))
    return MuiReport(
        frobenius=float(np.sqrt(frob_sq)),
        frobenius_sq=frob_sq,
        per_symbol_avg=frob_sq / symbols.size,
    )


def simulate_comm_rx(frame: CommFrame, x: np.ndarray, seed) -> np.ndarray:
    """Received user signal H @ X plus white complex Gaussian noise."""
    x = np.asarray(x)
    if frame.channel.shape[1] != x.shape[0]:
        raise ValueError("waveform antenna count does not match the channel")
    rng = np.random.default_rng(seed)
    shape = (frame.channel.shape[0], x.shape[1])
    noise = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * np.sqrt(
        frame.noise_power / 2.0
    )
    return frame.channel @ x + noise
