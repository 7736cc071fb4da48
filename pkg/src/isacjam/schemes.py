"""Outer ADMM loops of the two joint design schemes.

`run_jtmd` ties every receive filter to the matched filter of the current
waveform through a consensus constraint; `run_jtmmd` instead pairs each filter
with a free unit-norm copy, which is what makes it a mismatched-filter design.
Both share the same waveform/filter/projection/dual sweep.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .comms import CommFrame, mui
from .optimizer import (
    AdmmState,
    DegenerateVectorError,
    DesignConfig,
    ModelOutputs,
    combiner_outputs,
    detection_steering,
    dual_update,
    matched_filter,
    model_outputs,
    project_mainlobe_floor,
    project_modulus_cap,
    project_sidelobe_caps,
    project_unit_sphere,
    solve_v_subproblem,
    solve_x_subproblem,
)
from .signals import JammerProfile, Scenario, isrj_mask, lfm_waveform

JTMD = "jtmd"
JTMMD = "jtmmd"

RESIDUAL_GROUPS = ("mainlobe", "jamming", "sidelobe", "filter")


class SolverDivergenceError(RuntimeError):
    """An iterate went non-finite; carries the iteration and residual history."""

    def __init__(self, message, iteration, residual_history):
        super().__init__(message)
        self.iteration = iteration
        self.residual_history = residual_history


@dataclass
class DesignResult:
    x: np.ndarray
    filters: np.ndarray
    scheme: str
    iterations_run: int
    final_residuals: dict
    objective_trace: list
    residual_trace: list  # one dict per iteration, keyed by RESIDUAL_GROUPS
    converged: bool
    inner_warnings: int = 0

    def trace_rows(self):
        """Diagnostic CSV rows: iter, objective, one residual column per group."""
        rows = []
        for i, res in enumerate(self.residual_trace):
            rows.append((i + 1, self.objective_trace[i + 1], *(res[g] for g in RESIDUAL_GROUPS)))
        return rows


def run_jtmd(scenario, frame, jammer, cfg, seed=0) -> DesignResult:
    """Joint waveform and matched-filter design."""
    return _run_admm(JTMD, scenario, frame, jammer, cfg, seed)


def run_jtmmd(scenario, frame, jammer, cfg, seed=0) -> DesignResult:
    """Joint waveform and mismatched-filter design (free unit-norm filters)."""
    return _run_admm(JTMMD, scenario, frame, jammer, cfg, seed)


def _residuals(state: AdmmState, model: ModelOutputs, cfg: DesignConfig) -> dict:
    p = model.matched
    sig = model.z if cfg.sidelobe_includes_jamming else model.b
    return {
        "mainlobe": float(np.max(np.abs(model.b[:, p] - state.aux_mainlobe))),
        "jamming": float(np.max(np.abs(model.d[:, p] - state.aux_jamming))),
        "sidelobe": float(np.max(np.abs(sig - state.aux_sidelobe))),
        "filter": float(np.max(np.abs(state.filters - state.aux_filter))),
    }


def _run_admm(scheme, scenario: Scenario, frame: CommFrame, jammer: JammerProfile,
              cfg: DesignConfig, seed) -> DesignResult:
    if cfg.penalty <= 0:
        raise ValueError("the ADMM penalty must be positive")
    if len(cfg.mainlobe_floor) != scenario.n_angles:
        raise ValueError("need one threshold set per detection angle")
    rng = np.random.default_rng(seed)
    mask = isrj_mask(jammer, scenario.n_slots)
    steering = detection_steering(scenario)
    matched_point = scenario.n_slots  # 1-based

    x = lfm_waveform(scenario.n_tx, scenario.n_slots)
    filters = np.stack(
        [matched_filter(x, theta) for theta in scenario.detection_angles]
    )
    state = AdmmState.initial(x, filters)
    # Anchor the filter consensus at the initial matched filters. For the
    # mismatched scheme a zero sphere copy would zero the first filter update
    # and decouple the waveform from that angle for good; the matched filters
    # are unit-norm, hence feasible sphere points.
    state.aux_filter = filters.copy()

    objective_trace = [mui(frame.channel, state.x, frame.symbols).frobenius]
    residual_trace = []
    inner_warnings = 0
    converged = False
    rho = cfg.penalty

    for iteration in range(1, cfg.max_outer_iters + 1):
        state.iteration = iteration
        state.x, info = solve_x_subproblem(state, frame, cfg, scenario, mask, rng=rng)
        inner_warnings += 0 if info.converged else 1

        if scheme == JTMD:
            state.aux_filter = np.stack(
                [matched_filter(state.x, theta) for theta in scenario.detection_angles]
            )

        y_t, y_j = combiner_outputs(state.x, steering, mask)
        for l in range(scenario.n_angles):
            state.filters[l] = solve_v_subproblem(state, l, cfg, y_t[l], y_j[l])

        model = model_outputs(state.x, state.filters, scenario, mask)
        sig = model.z if cfg.sidelobe_includes_jamming else model.b
        p = model.matched
        for l in range(scenario.n_angles):
            state.aux_mainlobe[l] = project_mainlobe_floor(
                model.b[l, p] + state.dual_mainlobe[l] / rho, cfg.mainlobe_floor[l]
            )
            state.aux_jamming[l] = project_modulus_cap(
                model.d[l, p] + state.dual_jamming[l] / rho, cfg.jamming_cap[l]
            )
            state.aux_sidelobe[l] = project_sidelobe_caps(
                sig[l] + state.dual_sidelobe[l] / rho, cfg.sidelobe_cap[l], matched_point
            )

        if scheme == JTMMD:
            for l in range(scenario.n_angles):
                try:
                    state.aux_filter[l] = project_unit_sphere(
                        state.filters[l] + state.dual_filter[l] / rho
                    )
                except DegenerateVectorError:
                    pass  # keep the previous sphere copy

        dual_update(state, model, cfg)

        if not (np.isfinite(state.x).all() and np.isfinite(state.filters).all()):
            raise SolverDivergenceError(
                f"{scheme} produced a non-finite iterate at iteration {iteration}",
                iteration,
                residual_trace,
            )

        residuals = _residuals(state, model, cfg)
        residual_trace.append(residuals)
        state.residual_history.append(max(residuals.values()))
        objective_trace.append(mui(frame.channel, state.x, frame.symbols).frobenius)

        if max(residuals.values()) < cfg.outer_tol:
            converged = True
            break

    return DesignResult(
        x=state.x,
        filters=state.filters,
        scheme=scheme,
        iterations_run=state.iteration,
        final_residuals=residual_trace[-1] if residual_trace else {},
        objective_trace=objective_trace,
        residual_trace=residual_trace,
        converged=converged,
        inner_warnings=inner_warnings,
    )


def lagrangian_value(state: AdmmState, frame: CommFrame, cfg: DesignConfig,
                     scenario: Scenario, mask) -> float:
    """Full augmented Lagrangian at the current state (all four penalty groups)."""
    rho = cfg.penalty
    model = model_outputs(state.x, state.filters, scenario, mask)
    sig = model.z if cfg.sidelobe_includes_jamming else model.b
    p = model.matched
    total = mui(frame.channel, state.x, frame.symbols).frobenius
    for l in range(scenario.n_angles):
        total += 0.5 * rho * abs(
            model.b[l, p] - state.aux_mainlobe[l] + state.dual_mainlobe[l] / rho
        ) ** 2
        total += 0.5 * rho * abs(
            model.d[l, p] - state.aux_jamming[l] + state.dual_jamming[l] / rho
        ) ** 2
        total += 0.5 * rho * float(
            np.sum(np.abs(sig[l] - state.aux_sidelobe[l] + state.dual_sidelobe[l] / rho) ** 2)
        )
        total += 0.5 * rho * float(
            np.sum(np.abs(state.filters[l] - state.aux_filter[l] + state.dual_filter[l] / rho) ** 2)
        )
    return float(total)


@dataclass
class ConstraintItem:
    group: str
    index: int
    value: float
    bound: float
    kind: str  # ">=", "<=" or "=="
    satisfied: bool


@dataclass
class ConstraintReport:
    items: list = field(default_factory=list)
    tolerance: float = 1e-3

    @property
    def all_satisfied(self) -> bool:
        return all(item.satisfied for item in self.items)

    def group(self, name):
        return [item for item in self.items if item.group == name]


def evaluate_constraints(result: DesignResult, cfg: DesignConfig, scenario: Scenario,
                         mask, tolerance: float = 1e-3) -> ConstraintReport:
    """Check every design constraint group at a relative tolerance."""
    model = model_outputs(result.x, result.filters, scenario, mask)
    p = model.matched
    report = ConstraintReport(tolerance=tolerance)

    def add(group, index, value, bound, kind):
        if kind == ">=":
            ok = value >= bound * (1.0 - tolerance)
        elif kind == "<=":
            ok = value <= bound * (1.0 + tolerance)
        else:
            ok = abs(value - bound) <= tolerance * max(abs(bound), 1.0)
        report.items.append(ConstraintItem(group, index, float(value), float(bound), kind, ok))

    for l in range(scenario.n_angles):
        add("target_mainlobe", l, abs(model.b[l, p]) ** 2, cfg.mainlobe_floor[l], ">=")
        add("jamming_mainlobe", l, abs(model.d[l, p]) ** 2, cfg.jamming_cap[l], "<=")
        side = np.abs(np.delete(model.z[l], p)) ** 2
        add("sidelobe", l, float(side.max()), cfg.sidelobe_cap[l], "<=")
        add("filter_norm", l, float(np.sum(np.abs(result.filters[l]) ** 2)), 1.0, "==")
    for slot in range(result.x.shape[1]):
        add("tx_power", slot, float(np.sum(np.abs(result.x[:, slot]) ** 2)), cfg.tx_power, "<=")
    return report
