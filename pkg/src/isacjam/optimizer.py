"""Inner machinery of both ADMM design schemes.

Per outer iteration the schemes call, in order: the waveform subproblem
(accelerated projected gradient under per-slot power balls), one filter
subproblem per detection angle (a regularized least-squares solve), the
closed-form projections of the auxiliary variables, and the dual ascent step.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .comms import CommFrame
from .signals import Scenario, pulse_compress, steering_vector, lfm_waveform

# Branch tolerance of the closed-form projections. Outputs land within a few
# ulp of the constraint boundary, so re-projection must treat them as feasible
# for the projections to be exact no-ops on their own output.
_FEAS_RTOL = 1e-12


class DegenerateVectorError(ValueError):
    """A normalization was requested for an (effectively) zero vector."""


@dataclass
class DesignConfig:
    """Thresholds, power budget and solver knobs for one design run."""

    mainlobe_floor: np.ndarray  # linear power floor per detection angle
    jamming_cap: np.ndarray  # linear power cap on the repeated signal's matched point
    sidelobe_cap: np.ndarray  # linear power cap off the matched point
    tx_power: float  # per-slot transmit power budget
    penalty: float = 1.0  # ADMM penalty
    max_outer_iters: int = 100
    outer_tol: float = 1e-4  # early stop when all primal residuals fall below
    inner_tol: float = 1e-9  # relative objective tolerance of the waveform solver
    inner_max_iters: int = 600
    smoothing_eps: float = 1e-8  # per-entry scale of the smoothed Frobenius objective
    sidelobe_includes_jamming: bool = True

    def __post_init__(self):
        self.mainlobe_floor = np.atleast_1d(np.asarray(self.mainlobe_floor, dtype=float))
        self.jamming_cap = np.atleast_1d(np.asarray(self.jamming_cap, dtype=float))
        self.sidelobe_cap = np.atleast_1d(np.asarray(self.sidelobe_cap, dtype=float))
        if (
            (self.mainlobe_floor <= 0).any()
            or (self.jamming_cap <= 0).any()
            or (self.sidelobe_cap <= 0).any()
        ):
            raise ValueError("all thresholds must be positive")
        if (self.jamming_cap >= self.mainlobe_floor).any():
            raise ValueError("jamming cap must lie below the mainlobe floor")
        if self.tx_power <= 0:
            raise ValueError("tx_power must be positive")
        if self.penalty < 0:
            raise ValueError("penalty must be nonnegative")
        if self.inner_tol <= 0 or self.outer_tol <= 0 or self.smoothing_eps <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_outer_iters < 1 or self.inner_max_iters < 1:
            raise ValueError("iteration budgets must be >= 1")


def default_thresholds(scenario: Scenario) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-angle (floor, jamming cap, sidelobe cap) anchored to the chirp baseline.

    The floor is 80% of the matched-filter peak power the unit-energy chirp
    achieves at each detection angle; the caps sit 20 dB and 30 dB below it.
    """
    x0 = lfm_waveform(scenario.n_tx, scenario.n_slots)
    floor = np.empty(scenario.n_angles)
    for i, theta in enumerate(scenario.detection_angles):
        y = np.conj(steering_vector(scenario.n_tx, theta)) @ x0
        floor[i] = 0.8 * float(np.sum(np.abs(y) ** 2))
    return floor, 0.01 * floor, 0.001 * floor


@dataclass
class ModelOutputs:
    """Noise-free filter responses of the design model, one row per angle."""

    b: np.ndarray  # (L, 2P-1) target component
    d: np.ndarray  # (L, 2P-1) jamming component
    z: np.ndarray  # b + d

    @property
    def matched(self) -> int:
        """0-based index of the matched point."""
        return (self.b.shape[1] - 1) // 2


@dataclass
class AdmmState:
    """All primal, auxiliary and dual iterates of one solver run."""

    x: np.ndarray  # (n_tx, n_slots)
    filters: np.ndarray  # (L, P)
    aux_mainlobe: np.ndarray  # (L,)
    aux_jamming: np.ndarray  # (L,)
    aux_sidelobe: np.ndarray  # (L, 2P-1)
    aux_filter: np.ndarray  # (L, P) filter anchors (matched filters or sphere copies)
    dual_mainlobe: np.ndarray
    dual_jamming: np.ndarray
    dual_sidelobe: np.ndarray
    dual_filter: np.ndarray
    iteration: int = 0
    residual_history: list = field(default_factory=list)

    @classmethod
    def initial(cls, x: np.ndarray, filters: np.ndarray) -> "AdmmState":
        x = np.asarray(x, dtype=complex)
        filters = np.asarray(filters, dtype=complex)
        n_angles, n_taps = filters.shape
        out_len = 2 * n_taps - 1
        return cls(
            x=x,
            filters=filters,
            aux_mainlobe=np.zeros(n_angles, dtype=complex),
            aux_jamming=np.zeros(n_angles, dtype=complex),
            aux_sidelobe=np.zeros((n_angles, out_len), dtype=complex),
            aux_filter=np.zeros((n_angles, n_taps), dtype=complex),
            dual_mainlobe=np.zeros(n_angles, dtype=complex),
            dual_jamming=np.zeros(n_angles, dtype=complex),
            dual_sidelobe=np.zeros((n_angles, out_len), dtype=complex),
            dual_filter=np.zeros((n_angles, n_taps), dtype=complex),
        )


def detection_steering(scenario: Scenario) -> np.ndarray:
    """Stacked transmit steering vectors of the detection grid, (L, n_tx)."""
    return np.stack([steering_vector(scenario.n_tx, t) for t in scenario.detection_angles])


def combiner_outputs(x: np.ndarray, steering: np.ndarray, mask: np.ndarray):
    """Per-angle target and jamming combiner outputs, each (L, P)."""
    y_t = np.conj(steering) @ x
    return y_t, y_t * mask[None, :]


def model_outputs(x, filters, scenario: Scenario, mask) -> ModelOutputs:
    """Noise-free filter responses b, d and z = b + d at every detection angle."""
    x = np.asarray(x, dtype=complex)
    filters = np.asarray(filters, dtype=complex)
    mask = np.asarray(mask, dtype=complex)
    n_slots = x.shape[1]
    if mask.shape != (n_slots,):
        raise ValueError("mask length must equal the slot count")
    if filters.shape != (scenario.n_angles, n_slots):
        raise ValueError("expected one length-P filter per detection angle")
    if x.shape[0] != scenario.n_tx:
        raise ValueError("waveform antenna count does not match the scenario")
    y_t, y_j = combiner_outputs(x, detection_steering(scenario), mask)
    out_len = 2 * n_slots - 1
    b = np.empty((scenario.n_angles, out_len), dtype=complex)
    d = np.empty_like(b)
    for l in range(scenario.n_angles):
        b[l] = pulse_compress(filters[l], y_t[l])
        d[l] = pulse_compress(filters[l], y_j[l])
    return ModelOutputs(b=b, d=d, z=b + d)


def matched_filter(x: np.ndarray, theta: float) -> np.ndarray:
    """Unit-norm matched filter X^H a(theta) / ||X^H a(theta)||."""
    x = np.asarray(x)
    a = steering_vector(x.shape[0], theta)
    w = x.conj().T @ a
    n = float(np.linalg.norm(w))
    if n == 0.0:
        raise DegenerateVectorError("matched filter undefined: X^H a(theta) = 0")
    return w / n


# ---------------------------------------------------------------------------
# Closed-form projections of the auxiliary variables
# ---------------------------------------------------------------------------


def project_mainlobe_floor(u: complex, zeta: float) -> complex:
    """Closest point with power >= zeta; zero input resolves to sqrt(zeta)."""
    if zeta <= 0:
        raise ValueError("floor must be positive")
    u = complex(u)
    p = abs(u) ** 2
    if p >= zeta * (1.0 - _FEAS_RTOL):
        return u
    if p == 0.0:
        return complex(np.sqrt(zeta))
    return np.sqrt(zeta) * u / abs(u)


def project_modulus_cap(u: complex, cap: float) -> complex:
    """Closest point with power <= cap, phase preserved."""
    if cap < 0:
        raise ValueError("cap must be nonnegative")
    u = complex(u)
    p = abs(u) ** 2
    if p <= cap * (1.0 + _FEAS_RTOL):
        return u
    return np.sqrt(cap) * u / abs(u)


def project_sidelobe_caps(eta: np.ndarray, cap: float, matched_index: int) -> np.ndarray:
    """Clip every entry except the matched one to power cap (matched_index 1-based)."""
    eta = np.array(eta, dtype=complex)
    if not 1 <= matched_index <= eta.size:
        raise ValueError("matched_index out of range")
    if cap < 0:
        raise ValueError("cap must be nonnegative")
    mag2 = np.abs(eta) ** 2
    over = mag2 > cap * (1.0 + _FEAS_RTOL)
    over[matched_index - 1] = False
    if over.any():
        eta[over] *= np.sqrt(cap / mag2[over])
    return eta


def project_unit_sphere(u: np.ndarray) -> np.ndarray:
    """u / ||u||; rejects zero input so the caller can keep its previous iterate."""
    u = np.asarray(u, dtype=complex)
    n = float(np.linalg.norm(u))
    if n == 0.0:
        raise DegenerateVectorError("cannot normalize a zero vector")
    if abs(n - 1.0) <= _FEAS_RTOL:
        return u.copy()
    return u / n


# ---------------------------------------------------------------------------
# Per-angle filter subproblem
# ---------------------------------------------------------------------------


def filter_output_matrix(y: np.ndarray) -> np.ndarray:
    """Matrix C with C @ v == pulse_compress(v, y) for length-P taps v."""
    y = np.asarray(y, dtype=complex)
    n_taps = y.size
    rows = np.arange(2 * n_taps - 1)[:, None]
    cols = np.arange(n_taps)[None, :]
    idx = cols + rows - (n_taps - 1)
    valid = (idx >= 0) & (idx < n_taps)
    c = np.zeros((2 * n_taps - 1, n_taps), dtype=complex)
    c[valid] = y[idx[valid]]
    return c


def solve_v_subproblem(state: AdmmState, l: int, cfg: DesignConfig, y_t, y_j) -> np.ndarray:
    """Exact minimizer of the angle-l filter quadratic.

    Stacks the matched-point rows of the target and jamming responses, the full
    sidelobe response map, and the unit proximity term, then solves the
    (identity-regularized, hence nonsingular) normal equations.
    """
    rho = cfg.penalty
    if rho <= 0:
        raise ValueError("penalty must be positive for the filter update")
    y_t = np.asarray(y_t, dtype=complex)
    y_j = np.asarray(y_j, dtype=complex)
    n_taps = y_t.size
    tgt_main = state.aux_mainlobe[l] - state.dual_mainlobe[l] / rho
    tgt_jam = state.aux_jamming[l] - state.dual_jamming[l] / rho
    tgt_side = state.aux_sidelobe[l] - state.dual_sidelobe[l] / rho
    anchor = state.aux_filter[l] - state.dual_filter[l] / rho
    sig = y_t + y_j if cfg.sidelobe_includes_jamming else y_t
    c = filter_output_matrix(sig)
    gram = (
        c.conj().T @ c
        + np.outer(y_t.conj(), y_t)
        + np.outer(y_j.conj(), y_j)
        + np.eye(n_taps)
    )
    rhs = y_t.conj() * tgt_main + y_j.conj() * tgt_jam + c.conj().T @ tgt_side + anchor
    v = np.linalg.solve(gram, rhs)
    bound = 1e-10 * (1.0 + float(np.linalg.norm(rhs)))
    if np.linalg.norm(gram @ v - rhs) > bound:
        v = v + np.linalg.solve(gram, rhs - gram @ v)  # one refinement step
        if np.linalg.norm(gram @ v - rhs) > bound:
            raise ArithmeticError("filter normal equations solved to insufficient accuracy")
    return v


# ---------------------------------------------------------------------------
# Waveform subproblem
# ---------------------------------------------------------------------------


@dataclass
class InnerSolveInfo:
    converged: bool
    iterations: int
    objective: float


class _XSubproblem:
    """Objective and gradient of the waveform update at fixed filters.

    The objective is the smoothed interference norm sqrt(||HX - S||_F^2 + eps^2)
    plus the quadratic penalty groups for the matched-point, jamming-point and
    sidelobe consensus targets. Gradients follow the real-parameterization
    convention (df = Re<grad, dX> to first order).
    """

    def __init__(self, channel, symbols, steering, filters, mask, cfg: DesignConfig,
                 tgt_main, tgt_jam, tgt_side):
        self.channel = np.asarray(channel, dtype=complex)
        self.symbols = np.asarray(symbols, dtype=complex)
        self.steering = np.asarray(steering, dtype=complex)
        self.filters = np.asarray(filters, dtype=complex)
        mask = np.asarray(mask, dtype=complex)
        self.masked_filters = self.filters * mask[None, :]
        ones = np.ones_like(mask)
        self.side_factor = ones + mask if cfg.sidelobe_includes_jamming else ones
        self.rho = cfg.penalty
        self.eps = cfg.smoothing_eps * np.sqrt(self.symbols.size)
        self.tgt_main = np.asarray(tgt_main, dtype=complex)
        self.tgt_jam = np.asarray(tgt_jam, dtype=complex)
        self.tgt_side = np.asarray(tgt_side, dtype=complex)
        self.n_taps = self.filters.shape[1]

    def _penalty_terms(self, x, with_targets=True):
        """Yield per-angle residuals and the shared intermediates."""
        n_taps = self.n_taps
        for l in range(self.filters.shape[0]):
            y_t = np.conj(self.steering[l]) @ x
            r_main = self.filters[l] @ y_t
            r_jam = self.masked_filters[l] @ y_t
            r_side = pulse_compress(self.filters[l], self.side_factor * y_t)
            if with_targets:
                r_main = r_main - self.tgt_main[l]
                r_jam = r_jam - self.tgt_jam[l]
                r_side = r_side - self.tgt_side[l]
            yield l, r_main, r_jam, r_side

    def value(self, x) -> float:
        residual = self.channel @ x - self.symbols
        f = float(np.sqrt(np.sum(np.abs(residual) ** 2) + self.eps**2))
        if self.rho > 0:
            for _, r_main, r_jam, r_side in self._penalty_terms(x):
                f += 0.5 * self.rho * (
                    abs(r_main) ** 2 + abs(r_jam) ** 2 + float(np.sum(np.abs(r_side) ** 2))
                )
        return f

    def value_and_gradient(self, x):
        residual = self.channel @ x - self.symbols
        smooth = float(np.sqrt(np.sum(np.abs(residual) ** 2) + self.eps**2))
        f = smooth
        grad = (self.channel.conj().T @ residual) / smooth
        if self.rho > 0:
            n_taps = self.n_taps
            for l, r_main, r_jam, r_side in self._penalty_terms(x):
                f += 0.5 * self.rho * (
                    abs(r_main) ** 2 + abs(r_jam) ** 2 + float(np.sum(np.abs(r_side) ** 2))
                )
                back = np.convolve(np.conj(self.filters[l]), r_side)[n_taps - 1 : 2 * n_taps - 1]
                col = self.rho * (
                    r_main * np.conj(self.filters[l])
                    + r_jam * np.conj(self.masked_filters[l])
                    + self.side_factor * back
                )
                grad += np.outer(self.steering[l], col)
        return f, grad

    def quadratic_gradient(self, x):
        """Gradient of the penalty block with zero targets: a PSD linear map of x."""
        grad = np.zeros_like(np.asarray(x, dtype=complex))
        if self.rho == 0:
            return grad
        n_taps = self.n_taps
        for l, r_main, r_jam, r_side in self._penalty_terms(x, with_targets=False):
            back = np.convolve(np.conj(self.filters[l]), r_side)[n_taps - 1 : 2 * n_taps - 1]
            col = self.rho * (
                r_main * np.conj(self.filters[l])
                + r_jam * np.conj(self.masked_filters[l])
                + self.side_factor * back
            )
            grad += np.outer(self.steering[l], col)
        return grad


def _subproblem_targets(state: AdmmState, cfg: DesignConfig):
    rho = cfg.penalty
    if rho > 0:
        return (
            state.aux_mainlobe - state.dual_mainlobe / rho,
            state.aux_jamming - state.dual_jamming / rho,
            state.aux_sidelobe - state.dual_sidelobe / rho,
        )
    # zero penalty: the targets carry zero weight, so their value is irrelevant
    return (
        np.zeros_like(state.aux_mainlobe),
        np.zeros_like(state.aux_jamming),
        np.zeros_like(state.aux_sidelobe),
    )


def x_subproblem_objective(state: AdmmState, frame: CommFrame, cfg: DesignConfig,
                           scenario: Scenario, mask, x=None):
    """Objective value and gradient of the waveform subproblem at x (default state.x)."""
    tgt_main, tgt_jam, tgt_side = _subproblem_targets(state, cfg)
    prob = _XSubproblem(
        frame.channel, frame.symbols, detection_steering(scenario), state.filters,
        mask, cfg, tgt_main, tgt_jam, tgt_side,
    )
    return prob.value_and_gradient(state.x if x is None else np.asarray(x, dtype=complex))


def project_power_columns(x: np.ndarray, tx_power: float) -> np.ndarray:
    """Scale every column whose power exceeds tx_power back onto the ball."""
    x = np.asarray(x, dtype=complex)
    power = np.sum(np.abs(x) ** 2, axis=0)
    scale = np.ones_like(power)
    over = power > tx_power
    scale[over] = np.sqrt(tx_power / power[over])
    return x * scale[None, :]


def _power_iteration(prob: _XSubproblem, shape, rng, iters: int = 40) -> float:
    u = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    norm = np.linalg.norm(u)
    if norm == 0:
        return 0.0
    u /= norm
    lam = 0.0
    for _ in range(iters):
        w = prob.quadratic_gradient(u)
        norm = float(np.linalg.norm(w))
        if norm < 1e-300:
            return 0.0
        lam = norm
        u = w / norm
    return lam


def solve_x_subproblem(state: AdmmState, frame: CommFrame, cfg: DesignConfig,
                       scenario: Scenario, mask, rng=None):
    """Waveform update under per-slot power balls.

    Accelerated projected gradient with backtracking: the initial step comes
    from a power-iteration estimate of the quadratic block's operator norm plus
    the local curvature of the smoothed interference term; momentum restarts on
    objective increase. Returns the best feasible iterate and a solve summary
    (`converged=False` flags an exhausted iteration budget).
    """
    if rng is None:
        rng = np.random.default_rng(0)
    tgt_main, tgt_jam, tgt_side = _subproblem_targets(state, cfg)
    mask = np.asarray(mask, dtype=complex)
    prob = _XSubproblem(
        frame.channel, frame.symbols, detection_steering(scenario), state.filters,
        mask, cfg, tgt_main, tgt_jam, tgt_side,
    )
    x = project_power_columns(state.x, cfg.tx_power)
    f_x = prob.value(x)
    best_x, best_f = x, f_x

    lam_quad = _power_iteration(prob, x.shape, rng)
    lam_channel = float(np.linalg.norm(frame.channel, 2)) ** 2
    lam = max(lam_quad + lam_channel / f_x if f_x > 0 else lam_quad, 1e-12)
    lam_cap = lam * 2.0**60

    y = x
    t = 1.0
    stall = 0
    converged = False
    iterations = 0
    for iterations in range(1, cfg.inner_max_iters + 1):
        f_y, g_y = prob.value_and_gradient(y)
        while True:
            x_new = project_power_columns(y - g_y / lam, cfg.tx_power)
            step = x_new - y
            f_new = prob.value(x_new)
            bound = f_y + float(np.real(np.vdot(g_y, step))) + 0.5 * lam * float(
                np.sum(np.abs(step) ** 2)
            )
            if f_new <= bound + 1e-12 * (1.0 + abs(f_y)) or lam >= lam_cap:
                break
            lam *= 2.0

        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        if f_new > f_x:  # adaptive restart: drop the momentum that overshot
            y = x_new
            t_next = 1.0
        else:
            y = x_new + ((t - 1.0) / t_next) * (x_new - x)
        t = t_next

        prev_best = best_f
        if f_new < best_f:
            best_f, best_x = f_new, x_new
        x, f_x = x_new, f_new

        if prev_best - best_f <= cfg.inner_tol * (1.0 + abs(best_f)):
            stall += 1
            if stall >= 5:
                converged = True
                break
        else:
            stall = 0
        lam = max(lam * 0.9, 1e-12)  # re-probe longer steps once the region allows

    return best_x, InnerSolveInfo(converged=converged, iterations=iterations, objective=best_f)


def dual_update(state: AdmmState, model: ModelOutputs, cfg: DesignConfig) -> AdmmState:
    """Gradient-ascent step on all four dual groups (state is updated in place)."""
    rho = cfg.penalty
    p = model.matched
    sig = model.z if cfg.sidelobe_includes_jamming else model.b
    state.dual_mainlobe = state.dual_mainlobe + rho * (model.b[:, p] - state.aux_mainlobe)
    state.dual_jamming = state.dual_jamming + rho * (model.d[:, p] - state.aux_jamming)
    state.dual_sidelobe = state.dual_sidelobe + rho * (sig - state.aux_sidelobe)
    state.dual_filter = state.dual_filter + rho * (state.filters - state.aux_filter)
    return state
