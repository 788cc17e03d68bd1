"""The assembled forecaster: encoder, rule bank, and ARIX bank.

Training mode routes each sample through its single most activated rule
(winner-takes-all, non-differentiable selection) so every local model is
forced to fit its own region; evaluation mode blends all rule forecasts
with the membership weights.
"""

from dataclasses import dataclass

import numpy as np

from . import arix as arix_mod
from . import autodiff as ad
from . import fuzzy
from .config import RunConfig
from .encoder import Encoder, EncoderOutput
from .exceptions import NonFiniteError, ShapeError


@dataclass
class TrainingForward:
    winner_forecast: ad.Tensor      # (B, H)
    memberships: ad.Tensor          # (B, C)
    latent_diffs: ad.Tensor         # (B, C, D_Z)
    bhattacharyya_pairs: ad.Tensor  # (P,) unordered cluster pairs
    winners: np.ndarray             # (B,) selected rule per sample
    encoder_output: EncoderOutput


@dataclass
class EvaluationForward:
    aggregate_forecast: ad.Tensor  # (B, H)
    rule_forecasts: ad.Tensor      # (B, C, H)
    memberships: ad.Tensor         # (B, C)
    encoder_output: EncoderOutput


class FuzzformerModel:
    def __init__(self, config: RunConfig, rng: np.random.Generator):
        config.validate()
        self.config = config
        self.encoder = Encoder(
            d_x=config.channels,
            d_h=config.hidden_width,
            lstm_layers=config.lstm_layers,
            mha_layers=config.mha_layers,
            n_heads=config.attention_heads,
            d_z=config.latent_width,
            horizon=config.horizon,
            dropout_rate=config.dropout_rate,
            rng=rng,
            attention_residual=config.attention_residual,
        )
        c, dz = config.rules, config.latent_width
        # Clusters start as unit-ish spheres scattered in the tanh-bounded
        # latent box; a warm-up pass usually re-seeds the centers.
        scale = np.sqrt(0.5**2 - fuzzy.COV_EPS)
        self.centers = ad.parameter(rng.uniform(-0.5, 0.5, size=(c, dz)))
        self.factors = ad.parameter(np.tile(scale * np.eye(dz), (c, 1, 1)))
        # Zero ARIX coefficients start every rule at the random-walk
        # persistence forecast, a stable initial bias.
        self.arix_a = ad.parameter(np.zeros((c, config.ar_order)))
        self.arix_b = ad.parameter(np.zeros((c, max(config.exog_order, 0))))
        self._pair_m, self._pair_n = np.triu_indices(c, k=1)

    # ------------------------------------------------------------------
    def parameters(self):
        """Ordered (name, tensor) pairs; the order defines checkpoints."""
        named = [(f"encoder.{n}", t) for n, t in self.encoder.parameters()]
        named.append(("rules.centers", self.centers))
        named.append(("rules.factors", self.factors))
        named.append(("rules.arix_a", self.arix_a))
        named.append(("rules.arix_b", self.arix_b))
        return named

    def parameter_tensors(self):
        return [t for _, t in self.parameters()]

    def initialize_clusters(self, latents, rng) -> None:
        """Re-seed rule centers from warm-up latent vectors."""
        centers, factors = fuzzy.init_clusters(latents, self.config.rules, rng)
        self.centers.data[...] = centers
        self.factors.data[...] = factors

    def clusters(self):
        return fuzzy.clusters_from_params(self.centers.data, self.factors.data)

    # ------------------------------------------------------------------
    def _check_window(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 3:
            raise ShapeError(f"model input must be (batch, lookback, channels), got {x.shape}")
        if x.shape[1] != self.config.lookback:
            raise ShapeError(
                f"window length {x.shape[1]} != configured lookback {self.config.lookback}"
            )
        if x.shape[2] != self.config.channels:
            raise ShapeError(
                f"channel count {x.shape[2]} != configured channels {self.config.channels}"
            )
        return x

    def _check_history(self, y_history: np.ndarray) -> np.ndarray:
        need = self.config.ar_order + self.config.integration_order
        y_history = np.asarray(y_history, dtype=np.float64)
        if y_history.ndim != 2 or y_history.shape[1] < need:
            raise ShapeError(
                f"y_history {y_history.shape} too short for ARIX seeding (need {need})"
            )
        return y_history

    def encode(self, x, training=False, rng=None) -> EncoderOutput:
        return self.encoder(ad.astensor(self._check_window(x)), training=training, rng=rng)

    def fuzzy_head(self, z_latent):
        """Graph memberships of a latent batch against the rule bank."""
        cov = fuzzy.covariances_graph(self.factors)
        psi, d2, diffs = fuzzy.memberships_graph(z_latent, self.centers, cov)
        return cov, psi, d2, diffs

    def bhattacharyya_pairs(self, cov):
        if self._pair_m.size == 0:
            return ad.Tensor(np.zeros(0))
        return fuzzy.bhattacharyya_pairs_graph(self.centers, cov, self._pair_m, self._pair_n)

    # ------------------------------------------------------------------
    def training_forward(self, x, y_history, rng=None) -> TrainingForward:
        y_history = self._check_history(y_history)
        enc = self.encode(x, training=True, rng=rng)
        cov, psi, _d2, diffs = self.fuzzy_head(enc.z_latent)
        winners = np.argmax(psi.data, axis=1)
        a_sel = self.arix_a[winners]
        b_sel = self.arix_b[winners]
        forecast = arix_mod.winner_forecast_graph(
            y_history, enc.u_latent, a_sel, b_sel,
            self.config.integration_order, self.config.horizon,
        )
        return TrainingForward(
            winner_forecast=forecast,
            memberships=psi,
            latent_diffs=diffs,
            bhattacharyya_pairs=self.bhattacharyya_pairs(cov),
            winners=winners,
            encoder_output=enc,
        )

    def evaluation_forward(self, x, y_history) -> EvaluationForward:
        y_history = self._check_history(y_history)
        enc = self.encode(x, training=False)
        _cov, psi, _d2, _diffs = self.fuzzy_head(enc.z_latent)
        try:
            rule_preds = arix_mod.all_rules_forecast_graph(
                y_history, enc.u_latent, self.arix_a, self.arix_b,
                self.config.integration_order, self.config.horizon,
            )
        except NonFiniteError:
            raise self._locate_unstable_rule(y_history, enc.u_latent.data)
        b, c = psi.data.shape
        agg = ad.tsum(ad.mul(ad.reshape(psi, (b, c, 1)), rule_preds), axis=1)
        return EvaluationForward(
            aggregate_forecast=agg,
            rule_forecasts=rule_preds,
            memberships=psi,
            encoder_output=enc,
        )

    def _locate_unstable_rule(self, y_history, u) -> NonFiniteError:
        """Re-run rules one by one on plain arrays to name the offender."""
        cfg = self.config
        for i in range(cfg.rules):
            coeffs = arix_mod.ArixCoefficients(
                self.arix_a.data[i], self.arix_b.data[i], cfg.integration_order
            )
            for s in range(y_history.shape[0]):
                try:
                    arix_mod.arix_forecast(y_history[s], u[s], coeffs, cfg.horizon)
                except NonFiniteError:
                    return NonFiniteError(f"rule {i}: non-finite ARIX forecast (unstable polynomial)")
        return NonFiniteError("non-finite ARIX forecast")

    def predict(self, x, y_history) -> np.ndarray:
        """Aggregate forecasts as plain arrays (no graph kept)."""
        with ad.no_grad():
            return self.evaluation_forward(x, y_history).aggregate_forecast.data
