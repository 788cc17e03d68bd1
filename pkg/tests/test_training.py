"""Tests for the training loop, evaluation, forecast bundle, and report."""

import csv

import numpy as np
import pytest

from fuzzformer.baselines import rmse
from fuzzformer.checkpoint import load_checkpoint
from fuzzformer.config import RunConfig
from fuzzformer.data import make_synthetic, prepare_dataset
from fuzzformer.exceptions import ConfigError, DataError
from fuzzformer import training
from fuzzformer.training import (
    build_report,
    evaluate_split,
    forecast_bundle,
    load_window_csv,
    read_results,
    train,
    write_report,
)

TINY_TRAIN = dict(
    lookback=12,
    horizon=4,
    channels=3,
    lstm_layers=1,
    hidden_width=4,
    mha_layers=1,
    attention_heads=2,
    latent_width=2,
    rules=2,
    ar_order=2,
    integration_order=1,
    exog_order=1,
    dropout_rate=0.1,
    batch_size=16,
    epochs=2,
    seed=11,
    learning_rate=1e-3,
)


@pytest.fixture(scope="module")
def tiny_dataset():
    return prepare_dataset(make_synthetic(n_points=400, seed=3), lookback=12, horizon=4)


def quiet(*args, **kwargs):
    pass


class TestTrain:
    def test_artifacts_and_history(self, tiny_dataset, tmp_path):
        cfg = RunConfig(**TINY_TRAIN)
        result = train(cfg, tiny_dataset, tmp_path / "run", log=quiet)
        assert result.checkpoint_path.exists()
        assert (tmp_path / "run" / "config.json").exists()
        with open(tmp_path / "run" / "losses.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert [tuple(r.keys()) for r in rows][0] == training.LOSS_FIELDS
        assert len(rows) == cfg.epochs
        assert all(float(r["composite"]) >= 0 for r in rows)

    def test_zero_epochs_produces_valid_checkpoint(self, tiny_dataset, tmp_path):
        cfg = RunConfig(**{**TINY_TRAIN, "epochs": 0})
        result = train(cfg, tiny_dataset, tmp_path / "run0", log=quiet)
        model, scaler, meta = load_checkpoint(result.checkpoint_path)
        assert scaler is not None
        report = evaluate_split(model, tiny_dataset, "test")
        assert np.isfinite(report.rmse)

    def test_seeded_determinism_bit_identical_checkpoints(self, tiny_dataset, tmp_path):
        cfg = RunConfig(**TINY_TRAIN)
        r1 = train(cfg, tiny_dataset, tmp_path / "a", log=quiet)
        r2 = train(cfg, tiny_dataset, tmp_path / "b", log=quiet)
        assert r1.checkpoint_path.read_bytes() == r2.checkpoint_path.read_bytes()
        assert r1.best_valid_rmse == r2.best_valid_rmse

    def test_best_checkpoint_matches_recorded_validation_rmse(self, tiny_dataset, tmp_path):
        cfg = RunConfig(**{**TINY_TRAIN, "epochs": 3})
        result = train(cfg, tiny_dataset, tmp_path / "best", log=quiet)
        model, _, _ = load_checkpoint(result.checkpoint_path)
        again = evaluate_split(model, tiny_dataset, "valid")
        assert again.rmse == pytest.approx(result.best_valid_rmse, abs=1e-12)

    def test_dataset_mismatch_rejected(self, tiny_dataset, tmp_path):
        cfg = RunConfig(**{**TINY_TRAIN, "channels": 2})
        with pytest.raises(ConfigError, match="channels"):
            train(cfg, tiny_dataset, tmp_path / "bad", log=quiet)


class TestEvaluate:
    def test_rmse_matches_recomputation_from_forecasts(self, tiny_dataset, tmp_path):
        cfg = RunConfig(**TINY_TRAIN)
        result = train(cfg, tiny_dataset, tmp_path / "ev", log=quiet)
        model = result.model
        report = evaluate_split(model, tiny_dataset, "test")
        origins = tiny_dataset.origins_for("test")
        hist = cfg.ar_order + cfg.integration_order
        batch = tiny_dataset.batch(origins, history=hist)
        preds = model.predict(batch.x, batch.y_history)
        assert report.rmse == pytest.approx(rmse(preds, batch.y_target), abs=1e-12)
        assert report.per_step_rmse.shape == (cfg.horizon,)

    def test_evaluate_twice_identical(self, tiny_dataset, tmp_path):
        cfg = RunConfig(**{**TINY_TRAIN, "epochs": 1})
        result = train(cfg, tiny_dataset, tmp_path / "ev2", log=quiet)
        a = evaluate_split(result.model, tiny_dataset, "test")
        b = evaluate_split(result.model, tiny_dataset, "test")
        assert a.rmse == b.rmse
        np.testing.assert_array_equal(a.per_step_rmse, b.per_step_rmse)


class TestForecastBundle:
    def _window_csv(self, path, n=30):
        series = make_synthetic(n_points=n, seed=9)
        with open(path, "w", encoding="utf-8") as fh:
            names = ",".join(s.name for s in series)
            fh.write(f"date,{names}\n")
            for i in range(n):
                vals = ",".join(f"{s.values[i]:.8f}" for s in series)
                fh.write(f"{series[0].dates[i]},{vals}\n")
        return [s.name for s in series]

    def test_bundle_files_and_unit_partition(self, tmp_path):
        ds = prepare_dataset(make_synthetic(n_points=400, seed=3), lookback=12, horizon=4)
        cfg = RunConfig(**TINY_TRAIN)
        result = train(cfg, ds, tmp_path / "run", log=quiet)
        names = self._window_csv(tmp_path / "window.csv")
        dates, matrix = load_window_csv(tmp_path / "window.csv", names)
        paths = forecast_bundle(
            result.model, ds.scaler, names, dates, matrix, tmp_path / "bundle", log=quiet
        )
        for key in ("forecast", "rules", "clusters", "attention", "forecast_svg"):
            assert paths[key].exists()
        with open(paths["rules"]) as fh:
            rows = list(csv.DictReader(fh))
        by_rule = {}
        for r in rows:
            by_rule[int(r["rule"])] = float(r["membership"])
        assert sum(by_rule.values()) == pytest.approx(1.0, abs=1e-9)
        # aggregate forecast equals the membership blend of rule forecasts
        with open(paths["forecast"]) as fh:
            agg = [float(r["value_scaled"]) for r in csv.DictReader(fh)]
        blend = np.zeros(cfg.horizon)
        for r in rows:
            blend[int(r["step"]) - 1] += float(r["membership"]) * float(r["value_scaled"])
        np.testing.assert_allclose(agg, blend, atol=1e-8)

    def test_window_too_short(self, tmp_path):
        ds = prepare_dataset(make_synthetic(n_points=400, seed=3), lookback=12, horizon=4)
        cfg = RunConfig(**TINY_TRAIN)
        result = train(cfg, ds, tmp_path / "run", log=quiet)
        names = self._window_csv(tmp_path / "w.csv", n=6)
        dates, matrix = load_window_csv(tmp_path / "w.csv", names)
        with pytest.raises(DataError, match="rows"):
            forecast_bundle(result.model, ds.scaler, names, dates, matrix, tmp_path / "b")

    def test_window_csv_validates_channels(self, tmp_path):
        path = tmp_path / "w.csv"
        path.write_text("date,a\n2020-01-01,1.0\n")
        with pytest.raises(DataError, match="missing channels"):
            load_window_csv(path, ["a", "b"])


class TestReport:
    def test_single_method_single_setting(self):
        rows = [
            {"method": "persistence", "config": "", "setting": "60/30", "split": s, "rmse": "0.1"}
            for s in ("train", "valid", "test")
        ]
        text, header, table = build_report(rows)
        assert len(table) == 1 and len(table[0]) == 4
        assert "persistence" in text

    def test_grid_three_methods_three_settings(self):
        rows = []
        for m in ("a", "b", "c"):
            for setting in ("60/30", "150/30", "150/60"):
                for s in ("train", "valid", "test"):
                    rows.append(
                        {"method": m, "config": "", "setting": setting, "split": s, "rmse": "0.2"}
                    )
        _, header, table = build_report(rows)
        assert len(table) == 3
        assert len(header) == 1 + 9

    def test_missing_cell_rendered_as_dash(self):
        rows = [
            {"method": "a", "config": "", "setting": "60/30", "split": "train", "rmse": "0.5"}
        ]
        text, _, table = build_report(rows)
        assert "—" in text
        assert table[0][2] == "—"

    def test_bad_split_label_rejected(self):
        rows = [{"method": "a", "config": "", "setting": "s", "split": "nope", "rmse": "1"}]
        with pytest.raises(DataError, match="split"):
            build_report(rows)

    def test_write_and_read_round_trip(self, tmp_path):
        rows = [
            {"method": "a", "config": "p=2", "setting": "60/30", "split": "test", "rmse": "0.4"}
        ]
        training.append_results(tmp_path / "r.csv", rows)
        training.append_results(tmp_path / "r.csv", rows)
        back = read_results([tmp_path / "r.csv"])
        assert len(back) == 2
        text = write_report(back, tmp_path / "table.csv")
        assert "a (p=2)" in text
        assert (tmp_path / "table.csv").exists()
