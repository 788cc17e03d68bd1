"""Per-rule ARIX local models.

A rule's consequent is an autoregressive model with exogenous input and
an optional integrator: A(q^-1) (1 - q^-1)^d y = B(q^-1) u, with
A(q^-1) = 1 + a_1 q^-1 + ... + a_p q^-p (note the plus signs: the
recursion therefore subtracts the a_m terms -- many texts print the
opposite convention) and B(q^-1) = b_1 q^-1 + ... + b_q q^-q, so the
exogenous input enters with at least one step of delay.

The H-step forecast runs recursively in a sliding-window way: past
values come from observed history while they exist and from earlier
recursive outputs afterwards.  ``u_seq[j]`` holds u(k + j) for
j = 0..H-1; exogenous terms that would need inputs before the forecast
origin are treated as zero (only reachable when q > 1).
"""

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .exceptions import ConfigError, NonFiniteError, ShapeError


@dataclass
class ArixCoefficients:
    """AR polynomial a_1..a_p, exogenous polynomial b_1..b_q, integration order d."""

    a: np.ndarray
    b: np.ndarray
    d: int = 1

    def __post_init__(self):
        self.a = np.atleast_1d(np.asarray(self.a, dtype=np.float64))
        self.b = np.atleast_1d(np.asarray(self.b, dtype=np.float64)) if np.size(self.b) else np.zeros(0)
        if self.a.size < 1:
            raise ConfigError("ARIX needs AR order p >= 1")
        if self.d not in (0, 1):
            raise ConfigError(f"integration order d={self.d} unsupported (expected 0 or 1)")

    @property
    def p(self) -> int:
        return self.a.size

    @property
    def q(self) -> int:
        return self.b.size


def arix_forecast(history, u_seq, coeffs: ArixCoefficients, horizon: int) -> np.ndarray:
    """Recursive H-step forecast of one rule on plain arrays.

    history: at least the last p+d observed values of the target series
    (oldest first); u_seq: exogenous sequence with u_seq[j] = u(k+j).
    """
    history = np.asarray(history, dtype=np.float64)
    p, q, d = coeffs.p, coeffs.q, coeffs.d
    if history.size < p + d:
        raise ShapeError(f"arix_forecast: history of {history.size} values, need {p + d}")
    if q >= 1:
        u_seq = np.asarray(u_seq, dtype=np.float64)
        if u_seq.size < horizon:
            raise ShapeError(f"arix_forecast: u_seq of {u_seq.size} values, need {horizon}")
    hist = history[-(p + d):]
    if d == 1:
        vals = list(np.diff(hist))
        level = hist[-1]
    else:
        vals = list(hist)
        level = None
    preds = np.zeros(horizon)
    with np.errstate(over="ignore", invalid="ignore"):
        for j in range(1, horizon + 1):
            step = 0.0
            for m in range(1, p + 1):
                step -= coeffs.a[m - 1] * vals[-m]
            for n in range(1, q + 1):
                idx = j - n
                if idx >= 0:
                    step += coeffs.b[n - 1] * u_seq[idx]
            vals.append(step)
            if d == 1:
                level = level + step
                preds[j - 1] = level
            else:
                preds[j - 1] = step
    if not np.all(np.isfinite(preds)):
        raise NonFiniteError("arix_forecast: non-finite forecast (unstable polynomial)")
    return preds


def aggregate(psi, rule_forecasts) -> np.ndarray:
    """Membership-weighted blend of per-rule forecasts.

    psi: (C,) or (S, C); rule_forecasts: (C, H) or (S, C, H).
    """
    psi = np.asarray(psi, dtype=np.float64)
    rule_forecasts = np.asarray(rule_forecasts, dtype=np.float64)
    if psi.shape != rule_forecasts.shape[:-1]:
        raise ShapeError(
            f"aggregate: memberships {psi.shape} vs forecasts {rule_forecasts.shape}"
        )
    return np.sum(psi[..., None] * rule_forecasts, axis=-2)


# ---------------------------------------------------------------------------
# graph-side recursion (unrolled so gradients reach a, b, and u)


def _recurse(seed_vals, level0, a_wide, exog_term, horizon, d):
    vals = list(seed_vals)
    level = level0
    p = a_wide.data.shape[-1]
    preds = []
    for j in range(1, horizon + 1):
        window = ad.stack([vals[-m] for m in range(1, p + 1)], axis=-1)
        step = ad.neg(ad.tsum(ad.mul(window, a_wide), axis=-1))
        ex = exog_term(j)
        if ex is not None:
            step = ad.add(step, ex)
        vals.append(step)
        if d == 1:
            level = ad.add(level, step)
            preds.append(level)
        else:
            preds.append(step)
    return ad.stack(preds, axis=-1)


def _split_history(y_hist, p, d):
    y_hist = np.asarray(y_hist, dtype=np.float64)
    if y_hist.ndim != 2 or y_hist.shape[1] < p + d:
        raise ShapeError(f"arix recursion: history {y_hist.shape}, need width >= {p + d}")
    hist = y_hist[:, -(p + d):]
    if d == 1:
        return np.diff(hist, axis=1), hist[:, -1]
    return hist, None


def winner_forecast_graph(y_hist, u, a_sel, b_sel, d, horizon):
    """Per-sample forecast using each sample's selected rule.

    y_hist: (B, >=p+d) array; u: (B, H) tensor; a_sel: (B, p); b_sel: (B, q).
    Returns a (B, H) tensor.
    """
    p = a_sel.data.shape[-1]
    q = b_sel.data.shape[-1]
    seed_arr, last = _split_history(y_hist, p, d)
    seeds = [ad.Tensor(seed_arr[:, m].copy()) for m in range(p)]
    level0 = ad.Tensor(last) if d == 1 else None

    def exog(j):
        total = None
        for n in range(1, q + 1):
            idx = j - n
            if 0 <= idx < horizon:
                term = ad.mul(b_sel[:, n - 1], u[:, idx])
                total = term if total is None else ad.add(total, term)
        return total

    return _recurse(seeds, level0, a_sel, exog, horizon, d)


def all_rules_forecast_graph(y_hist, u, a, b, d, horizon):
    """Forecasts of every rule for every sample.

    y_hist: (B, >=p+d) array; u: (B, H) tensor; a: (C, p); b: (C, q).
    Returns a (B, C, H) tensor.
    """
    c, p = a.data.shape
    q = b.data.shape[-1]
    seed_arr, last = _split_history(y_hist, p, d)
    bsz = seed_arr.shape[0]
    seeds = [
        ad.Tensor(np.repeat(seed_arr[:, m : m + 1], c, axis=1)) for m in range(p)
    ]
    level0 = ad.Tensor(np.repeat(last[:, None], c, axis=1)) if d == 1 else None
    a_wide = ad.reshape(a, (1, c, p))

    def exog(j):
        total = None
        for n in range(1, q + 1):
            idx = j - n
            if 0 <= idx < horizon:
                term = ad.mul(ad.reshape(b[:, n - 1], (1, c)), ad.reshape(u[:, idx], (bsz, 1)))
                total = term if total is None else ad.add(total, term)
        return total

    return _recurse(seeds, level0, a_wide, exog, horizon, d)
