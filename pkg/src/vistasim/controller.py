"""Threshold and learning-rate policies.

The adaptive controller keeps the equilibrium estimation error matched to
``c`` times a gradient-strength proxy: after each accepted round it picks the
smallest threshold whose curve MSE reaches the clamped target.  While the
threshold sits above the floor (adaptive regime) the learning rate is frozen;
once the floor is reached (saturated regime) every accepted round decays the
rate as b0/sqrt(tau+1), where tau counts accepted saturated rounds only.

Two proxy modes exist: ``ema-proxy`` feeds the squared norm of a
bias-corrected exponential moving average of accepted estimates, and
``oracle`` feeds the exact squared gradient norm supplied by the caller
(simulation-only, used to validate the convergence-rate analysis).

The constant baseline keeps a fixed threshold and decays its rate with the
plain accepted-round counter instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .equilibrium import EquilibriumCurve
from .errors import ConfigurationError, ContractViolation

Array = np.ndarray

MODE_EMA = "ema-proxy"
MODE_ORACLE = "oracle"
_MODES = (MODE_EMA, MODE_ORACLE)


@dataclass(frozen=True)
class VistaConfig:
    b0: float
    c: float
    beta: float
    curve: EquilibriumCurve
    eta0: float | None = None      # None -> midpoint of the curve's eta range
    mode: str = MODE_EMA

    def __post_init__(self):
        if not (self.b0 > 0):
            raise ConfigurationError("b0 must be > 0")
        if not (self.c > 0):
            raise ConfigurationError("c must be > 0")
        if not (0.0 <= self.beta < 1.0):
            raise ConfigurationError("beta must lie in [0, 1)")
        if self.mode not in _MODES:
            raise ConfigurationError(f"unknown controller mode '{self.mode}'")
        if self.eta0 is not None and not (
            self.curve.eta_min <= self.eta0 <= self.curve.eta_max
        ):
            raise ConfigurationError(
                f"eta0={self.eta0} outside [{self.curve.eta_min}, {self.curve.eta_max}]"
            )


@dataclass
class VistaState:
    w: Array                      # current iterate
    m: Array                      # EMA accumulator
    g_tilde: Array                # bias-corrected proxy
    u: int = 0                    # accepted rounds
    tau: int = 0                  # accepted saturated rounds
    eta: float = 0.0              # threshold for the upcoming round
    last_b: float = field(default=math.nan)


def init(config: VistaConfig, w_init: Array) -> VistaState:
    w = np.asarray(w_init, dtype=float).copy()
    eta0 = config.eta0
    if eta0 is None:
        eta0 = 0.5 * (config.curve.eta_min + config.curve.eta_max)
    return VistaState(w=w, m=np.zeros_like(w), g_tilde=np.zeros_like(w), eta=float(eta0))


def check_rate_condition(b0: float, c: float, smoothness: float) -> bool:
    """Initial-rate condition under which the ln(T)/sqrt(T) rate is proved."""
    return b0 <= 1.0 / (smoothness * (1.0 + c))


class VistaController:
    """Single-owner mutable controller; one instance per run."""

    def __init__(self, config: VistaConfig, w_init: Array):
        self.config = config
        self.state = init(config, w_init)

    @property
    def eta(self) -> float:
        return self.state.eta

    @property
    def w(self) -> Array:
        return self.state.w

    def current_learning_rate(self) -> float:
        return self.config.b0 / math.sqrt(self.state.tau + 1)

    def on_accepted(self, g_hat: Array, grad_norm_sq_oracle: float | None = None) -> bool:
        """Apply one accepted round; returns whether the round was saturated.

        The saturation test uses the threshold applied in this round, and the
        incremented counter only affects the learning rate from the next
        accepted round on.
        """
        cfg = self.config
        st = self.state
        if cfg.mode == MODE_ORACLE and grad_norm_sq_oracle is None:
            raise ContractViolation("oracle mode requires grad_norm_sq_oracle")
        b = self.current_learning_rate()
        st.w = st.w - b * g_hat
        st.u += 1
        st.m = cfg.beta * st.m + (1.0 - cfg.beta) * g_hat
        st.g_tilde = st.m / (1.0 - cfg.beta ** st.u)
        saturated = st.eta == cfg.curve.eta_min
        if saturated:
            st.tau += 1
        if cfg.mode == MODE_ORACLE:
            proxy = float(grad_norm_sq_oracle)
        else:
            proxy = float(np.dot(st.g_tilde, st.g_tilde))
        st.eta = cfg.curve.eta_for_target_mse(cfg.c * proxy)
        st.last_b = b
        return saturated

    def on_rejected(self) -> None:
        """Rejected rounds leave the iterate, counters, and threshold alone."""


class ConstantController:
    """Fixed-threshold baseline: B_t = b0/sqrt(u+1) over accepted rounds."""

    def __init__(self, eta_fixed: float, b0: float, curve: EquilibriumCurve,
                 w_init: Array):
        if not (curve.eta_min <= eta_fixed <= curve.eta_max):
            raise ConfigurationError(
                f"eta_fixed={eta_fixed} outside [{curve.eta_min}, {curve.eta_max}]"
            )
        if not (b0 > 0):
            raise ConfigurationError("b0 must be > 0")
        self.b0 = b0
        self.curve = curve
        self.state = VistaState(
            w=np.asarray(w_init, dtype=float).copy(),
            m=np.zeros(len(w_init)),
            g_tilde=np.zeros(len(w_init)),
            eta=float(eta_fixed),
        )

    @property
    def eta(self) -> float:
        return self.state.eta

    @property
    def w(self) -> Array:
        return self.state.w

    def current_learning_rate(self) -> float:
        return self.b0 / math.sqrt(self.state.u + 1)

    def on_accepted(self, g_hat: Array, grad_norm_sq_oracle: float | None = None) -> bool:
        st = self.state
        b = self.current_learning_rate()
        st.w = st.w - b * g_hat
        st.u += 1
        saturated = st.eta == self.curve.eta_min
        if saturated:
            st.tau += 1
        st.last_b = b
        return saturated

    def on_rejected(self) -> None:
        pass


def constant_policy(eta_fixed: float, b0: float, curve: EquilibriumCurve,
                    w_init: Array) -> ConstantController:
    return ConstantController(eta_fixed, b0, curve, w_init)
