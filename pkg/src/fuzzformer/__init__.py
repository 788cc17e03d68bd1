"""Fuzzformer: interpretable multi-horizon time-series forecasting.

An LSTM + multi-head self-attention encoder condenses a multivariate
look-back window into two low-dimensional signals: a latent vector that
activates Gaussian-cluster fuzzy rules, and an exogenous sequence that
drives per-rule ARIX local models whose recursive forecasts are blended
by the rule memberships.
"""

__version__ = "0.1.0"
