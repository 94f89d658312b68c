"""Apply allocation paths to realised returns: wealth, reward and value series.

One-period wealth is ``L_t = pi_t*S_t + (M - pi_t)*r``, less
``(pi_t - pi_{t-1})*r_1`` when rebalancing is charged. The reward is
``W_{t-1} = L_{t-1} - L_t`` and the value function follows
``u_{t-1} = (L_{t-1} - L_t) + u_t`` from ``u_T = 0`` along the realised path,
so ``u_t = L_t - L_T``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LengthMismatch, TooShort
from .policy import COST_MODES, PolicyConfig, PolicyPath, backward_path


def wealth_path(policy: PolicyPath, terminal_returns, config: PolicyConfig | None = None, cost_mode: str | None = None) -> np.ndarray:
    """Per-period wealth over the last ``horizon`` realised returns.

    The first period pays no rebalancing cost (the allocation before the
    window is taken equal to the first one).
    """
    cfg = policy.config if config is None else config
    mode = policy.cost_mode if cost_mode is None else cost_mode
    values = getattr(terminal_returns, "values", terminal_returns)
    s = np.asarray(values, dtype=float)
    pis = np.asarray(policy.pis, dtype=float)
    if s.size < pis.size:
        raise LengthMismatch(f"{s.size} returns cannot cover a horizon of {pis.size}")
    s = s[s.size - pis.size :]
    wealth = pis * s + (cfg.wealth_scale - pis) * cfg.rate
    if mode == "with":
        prev = np.concatenate([pis[:1], pis[:-1]])
        wealth = wealth - (pis - prev) * cfg.txn_rate
    return wealth


def reward_path(wealth) -> np.ndarray:
    w = np.asarray(wealth, dtype=float)
    if w.size < 2:
        raise TooShort("a reward needs at least two wealth values")
    return w[:-1] - w[1:]


def value_path(wealth) -> np.ndarray:
    """Backward accumulation of rewards from a zero terminal value."""
    w = np.asarray(wealth, dtype=float)
    u = np.zeros_like(w)
    for t in range(w.size - 1, 0, -1):
        u[t - 1] = (w[t - 1] - w[t]) + u[t]
    return u


@dataclass(frozen=True, eq=False)
class BacktestResult:
    pis: np.ndarray
    wealth: np.ndarray
    reward: np.ndarray
    value: np.ndarray
    config: PolicyConfig
    cost_mode: str
    label: str

    def rows(self):
        for t in range(self.wealth.size):
            yield {
                "t": t,
                "pi": float(self.pis[t]),
                "wealth": float(self.wealth[t]),
                "reward": float(self.reward[t]) if t < self.reward.size else "",
                "value": float(self.value[t]),
                "scenario_label": self.label,
            }


def backtest(policy: PolicyPath, terminal_returns, label: str = "") -> BacktestResult:
    wealth = wealth_path(policy, terminal_returns)
    reward = reward_path(wealth) if wealth.size >= 2 else np.zeros(0)
    return BacktestResult(np.asarray(policy.pis, dtype=float), wealth, reward, value_path(wealth), policy.config, policy.cost_mode, label)


def scenario_label(family: str, config: PolicyConfig, cost_mode: str) -> str:
    return f"{family}_r{config.rate!r}_{'cost' if cost_mode == 'with' else 'nocost'}"


def run_scenarios(model, returns, configs, cost_modes=COST_MODES) -> list[BacktestResult]:
    """One backtest per (config, cost mode) pair, in that nesting order."""
    configs = list(configs)
    if not configs:
        raise ValueError("at least one configuration is required")
    results = []
    for cfg in configs:
        for mode in cost_modes:
            path = backward_path(model, cfg, mode)
            results.append(backtest(path, returns, scenario_label(model.family, cfg, mode)))
    return results
