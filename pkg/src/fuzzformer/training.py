"""Run orchestration: the training loop, evaluation, forecast export,
and the cross-method comparison report.

Training shuffles the train split each epoch, optimizes the four-term
composite with Adam, evaluates validation RMSE after every epoch in
aggregate-forecast mode, and keeps the best-validation parameter
snapshot.  All randomness flows from one seed through separate child
generators (init, cluster warm-up, dropout, shuffling), so identical
seed/config/data reproduce identical checkpoints bit for bit.
"""

import csv
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import autodiff as ad
from . import svgplot
from .autodiff import Adam
from .baselines import rmse
from .checkpoint import save_checkpoint
from .config import RunConfig
from .data import SPLIT_NAMES, WindowedDataset
from .exceptions import ConfigError, DataError, NumericError
from .fuzzy import bhattacharyya, clusters_from_params
from .losses import composite_loss
from .model import FuzzformerModel

RESULT_FIELDS = ("method", "config", "setting", "split", "rmse")
LOSS_FIELDS = ("epoch", "mse", "fcm", "overlap", "balance", "composite")


@dataclass
class MetricsReport:
    method: str
    split: str
    rmse: float
    per_step_rmse: np.ndarray
    n_samples: int
    wall_seconds: float


@dataclass
class TrainResult:
    checkpoint_path: Path
    best_epoch: int
    best_valid_rmse: float
    history: list
    wall_seconds: float
    model: FuzzformerModel


def check_dataset_compatibility(config: RunConfig, dataset: WindowedDataset) -> None:
    if dataset.matrix.shape[1] != config.channels:
        raise ConfigError(
            f"dataset has {dataset.matrix.shape[1]} channels, config expects {config.channels}"
        )
    if dataset.lookback != config.lookback or dataset.horizon != config.horizon:
        raise ConfigError(
            f"dataset windows are {dataset.lookback}/{dataset.horizon}, "
            f"config expects {config.lookback}/{config.horizon}"
        )


def warmup_latents(model: FuzzformerModel, dataset: WindowedDataset, rng, max_windows=256):
    """Latent vectors of a sample of training windows (for cluster seeding)."""
    origins = dataset.origins_for("train")
    if origins.size == 0:
        raise DataError("dataset has no training samples")
    if origins.size > max_windows:
        origins = np.sort(rng.choice(origins, size=max_windows, replace=False))
    batch = dataset.batch(origins, history=1)
    with ad.no_grad():
        return model.encode(batch.x).z_latent.data.copy()


def evaluate_split(model: FuzzformerModel, dataset, split, batch_size=256, method="fuzzformer"):
    """Aggregate-forecast RMSE (scaled units) over one split."""
    t0 = time.perf_counter()
    origins = dataset.origins_for(split)
    horizon = dataset.horizon
    if origins.size == 0:
        return MetricsReport(method, split, float("nan"), np.full(horizon, np.nan), 0, 0.0)
    hist = model.config.ar_order + model.config.integration_order
    preds = np.zeros((origins.size, horizon))
    targets = np.zeros((origins.size, horizon))
    for start in range(0, origins.size, batch_size):
        chunk = origins[start : start + batch_size]
        batch = dataset.batch(chunk, history=hist)
        preds[start : start + chunk.size] = model.predict(batch.x, batch.y_history)
        targets[start : start + chunk.size] = batch.y_target
    err = preds - targets
    return MetricsReport(
        method=method,
        split=split if isinstance(split, str) else SPLIT_NAMES[split],
        rmse=float(np.sqrt(np.mean(err**2))),
        per_step_rmse=np.sqrt(np.mean(err**2, axis=0)),
        n_samples=int(origins.size),
        wall_seconds=time.perf_counter() - t0,
    )


def train(config: RunConfig, dataset: WindowedDataset, out_dir, log=print) -> TrainResult:
    t_start = time.perf_counter()
    config.validate()
    check_dataset_compatibility(config, dataset)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    seeds = np.random.SeedSequence(config.seed).spawn(4)
    rng_init, rng_cluster, rng_dropout, rng_shuffle = (np.random.default_rng(s) for s in seeds)

    model = FuzzformerModel(config, rng_init)
    model.initialize_clusters(warmup_latents(model, dataset, rng_cluster), rng_cluster)
    weights = config.loss_weights()
    opt = Adam(model.parameter_tensors(), learning_rate=config.learning_rate)
    hist_len = config.ar_order + config.integration_order
    train_origins = dataset.origins_for("train")
    if train_origins.size == 0:
        raise DataError("dataset has no training samples")
    has_valid = dataset.origins_for("valid").size > 0

    def snapshot():
        return [t.data.copy() for t in model.parameter_tensors()]

    best_valid = evaluate_split(model, dataset, "valid").rmse if has_valid else float("inf")
    best_snap = snapshot()
    best_epoch = 0
    history = []
    for epoch in range(1, config.epochs + 1):
        order = rng_shuffle.permutation(train_origins)
        sums = dict.fromkeys(("mse", "fcm", "overlap", "balance", "composite"), 0.0)
        n_batches = 0
        for start in range(0, order.size, config.batch_size):
            chunk = order[start : start + config.batch_size]
            batch = dataset.batch(chunk, history=hist_len)
            try:
                total, parts = composite_loss(batch, model, weights, rng=rng_dropout)
                ad.backward(total)
            except NumericError as exc:
                raise NumericError(
                    f"epoch {epoch}, batch at sample {start}: {exc}"
                ) from exc
            opt.step()
            for key in sums:
                sums[key] += parts[key]
            n_batches += 1
        means = {key: value / n_batches for key, value in sums.items()}
        valid_rmse = evaluate_split(model, dataset, "valid").rmse if has_valid else float("nan")
        if has_valid and valid_rmse < best_valid:
            best_valid = valid_rmse
            best_snap = snapshot()
            best_epoch = epoch
        history.append({"epoch": epoch, **means, "valid_rmse": valid_rmse})
        log(
            f"epoch {epoch}/{config.epochs} composite={means['composite']:.5f} "
            f"mse={means['mse']:.5f} valid_rmse={valid_rmse:.5f}"
        )

    if not has_valid:
        best_snap = snapshot()
        best_epoch = config.epochs
        best_valid = float("nan")
    for tensor, arr in zip(model.parameter_tensors(), best_snap):
        tensor.data[...] = arr

    with open(out_dir / "losses.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=LOSS_FIELDS, extrasaction="ignore")
        writer.writeheader()
        for rec in history:
            writer.writerow({k: rec[k] for k in LOSS_FIELDS})
    with open(out_dir / "history.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=("epoch", "valid_rmse"))
        writer.writeheader()
        for rec in history:
            writer.writerow({"epoch": rec["epoch"], "valid_rmse": rec["valid_rmse"]})

    ckpt_path = out_dir / "checkpoint.bin"
    save_checkpoint(ckpt_path, model, scaler=dataset.scaler, channel_names=dataset.channel_names)
    config.write(out_dir / "config.json")
    return TrainResult(
        checkpoint_path=ckpt_path,
        best_epoch=best_epoch,
        best_valid_rmse=best_valid,
        history=history,
        wall_seconds=time.perf_counter() - t_start,
        model=model,
    )


# ---------------------------------------------------------------------------
# forecast bundle (interpretability export)


def load_window_csv(path, channel_names):
    """Multi-channel window CSV: header ``date,<name>,...``; any column
    order, but every configured channel must be present."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"window file not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if not header or header[0].lower() != "date":
            raise DataError(f"{path}: first column must be 'date'")
        missing = [name for name in channel_names if name not in header[1:]]
        if missing:
            raise DataError(f"{path}: missing channels {missing}")
        order = [header.index(name) for name in channel_names]
        dates, rows = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or not "".join(row).strip():
                continue
            try:
                rows.append([float(row[i]) for i in order])
            except (ValueError, IndexError) as exc:
                raise DataError(f"{path}:{lineno}: bad row ({exc})") from exc
            dates.append(row[0].strip())
    if not rows:
        raise DataError(f"{path}: no observations")
    return dates, np.asarray(rows, dtype=np.float64)


def forecast_bundle(model, scaler, channel_names, dates, matrix, out_dir, log=print):
    """Run one forecast and export the full interpretability bundle.

    Writes forecast.csv (original units via inverse scaling), the
    per-rule forecast/membership CSV, the cluster geometry CSV with the
    pairwise Bhattacharyya matrix, the attention-weight CSV, and SVG
    renderings.  Returns the paths.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg = model.config
    if matrix.shape[0] < cfg.lookback:
        raise DataError(
            f"window has {matrix.shape[0]} rows, model needs at least {cfg.lookback}"
        )
    window = matrix[-cfg.lookback :]
    scaled = scaler.transform(window)
    x = scaled[None, :, :]
    hist = cfg.ar_order + cfg.integration_order
    y_hist = scaled[None, -hist:, 0]
    with ad.no_grad():
        ev = model.evaluation_forward(x, y_hist)
    agg_scaled = ev.aggregate_forecast.data[0]
    agg = scaler.inverse(agg_scaled, channel=0)
    psi = ev.memberships.data[0]
    rules_scaled = ev.rule_forecasts.data[0]

    paths = {}
    paths["forecast"] = out_dir / "forecast.csv"
    with open(paths["forecast"], "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "value_scaled", "value"])
        for j in range(cfg.horizon):
            writer.writerow([j + 1, f"{agg_scaled[j]:.10g}", f"{agg[j]:.10g}"])

    paths["rules"] = out_dir / "rule_forecasts.csv"
    with open(paths["rules"], "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rule", "step", "value_scaled", "membership"])
        for i in range(cfg.rules):
            for j in range(cfg.horizon):
                writer.writerow([i, j + 1, f"{rules_scaled[i, j]:.10g}", f"{psi[i]:.10g}"])

    clusters = model.clusters()
    paths["clusters"] = out_dir / "clusters.csv"
    with open(paths["clusters"], "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        dz = cfg.latent_width
        head = (
            ["rule"]
            + [f"center_{k}" for k in range(dz)]
            + [f"cov_{r}{c}" for r in range(dz) for c in range(dz)]
            + [f"bhattacharyya_{i}" for i in range(cfg.rules)]
        )
        writer.writerow(head)
        for i, cl in enumerate(clusters):
            row = [i]
            row += [f"{v:.10g}" for v in cl.center]
            row += [f"{v:.10g}" for v in cl.covariance.reshape(-1)]
            row += [
                f"{(0.0 if i == j else bhattacharyya(cl, clusters[j])):.10g}"
                for j in range(cfg.rules)
            ]
            writer.writerow(row)

    paths["attention"] = out_dir / "attention_weights.csv"
    with open(paths["attention"], "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["layer", "head", "query_step", "key_step", "weight"])
        for layer_idx, layer in enumerate(ev.encoder_output.attention_weights):
            for head_idx, w in enumerate(layer):
                weights = w.data[0]
                for qi in range(weights.shape[0]):
                    for ki in range(weights.shape[1]):
                        writer.writerow([layer_idx, head_idx, qi, ki, f"{weights[qi, ki]:.10g}"])

    # SVG renderings: combined output, per-rule local forecasts, clusters
    steps_hist = np.arange(-cfg.lookback + 1, 1)
    steps_fut = np.arange(1, cfg.horizon + 1)
    paths["forecast_svg"] = out_dir / "forecast.svg"
    svgplot.line_plot(
        paths["forecast_svg"],
        [("history", steps_hist, window[:, 0]), ("forecast", steps_fut, agg)],
        title="Aggregated multi-horizon forecast",
    )
    paths["rules_svg"] = out_dir / "rule_forecasts.svg"
    top = np.argsort(psi)[::-1][: min(6, cfg.rules)]
    svgplot.line_plot(
        paths["rules_svg"],
        [(f"rule {i} (psi={psi[i]:.3f})", steps_fut, rules_scaled[i]) for i in top],
        title="Per-rule ARIX forecasts (scaled)",
    )
    paths["clusters_svg"] = out_dir / "clusters.svg"
    z = ev.encoder_output.z_latent.data
    centers = model.centers.data
    svgplot.scatter_plot(
        paths["clusters_svg"],
        [
            ("rule centers", centers[:, 0], centers[:, 1 % centers.shape[1]]),
            ("window latent", z[:, 0], z[:, 1 % z.shape[1]]),
        ],
        title="Antecedent clusters in the latent plane",
    )
    log(f"forecast bundle written to {out_dir}")
    return paths


# ---------------------------------------------------------------------------
# results accumulation and the comparison report


def append_results(path, rows) -> None:
    """Append rows to a results CSV, writing the header when new."""
    path = Path(path)
    exists = path.exists()
    with open(path, "a", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=RESULT_FIELDS)
        if not exists:
            writer.writeheader()
        for row in rows:
            writer.writerow({k: row[k] for k in RESULT_FIELDS})


def read_results(paths):
    rows = []
    for path in paths:
        path = Path(path)
        if not path.exists():
            raise DataError(f"results file not found: {path}")
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            missing = set(RESULT_FIELDS) - set(reader.fieldnames or ())
            if missing:
                raise DataError(f"{path}: results file missing columns {sorted(missing)}")
            rows.extend(reader)
    return rows


def build_report(rows):
    """Grid of methods x (setting, split) mirroring the comparison table.

    Returns (text, header list, table rows); absent cells show an em dash.
    """
    for row in rows:
        if row["split"] not in SPLIT_NAMES:
            raise DataError(f"unknown split label {row['split']!r} in results")
    methods = []
    settings = []
    cells = {}
    for row in rows:
        method = row["method"] if not row["config"] else f"{row['method']} ({row['config']})"
        if method not in methods:
            methods.append(method)
        if row["setting"] not in settings:
            settings.append(row["setting"])
        cells[(method, row["setting"], row["split"])] = row["rmse"]
    header = ["method"]
    for setting in settings:
        for split in SPLIT_NAMES:
            header.append(f"{setting} {split}")
    table = []
    for method in methods:
        line = [method]
        for setting in settings:
            for split in SPLIT_NAMES:
                value = cells.get((method, setting, split))
                if value is None:
                    line.append("—")
                else:
                    line.append(f"{float(value):.4f}")
        table.append(line)
    widths = [max(len(r[i]) for r in [header] + table) for i in range(len(header))]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths))]
    lines.append("  ".join("-" * w for w in widths))
    for line in table:
        lines.append("  ".join(v.ljust(w) for v, w in zip(line, widths)))
    return "\n".join(lines), header, table


def write_report(rows, out_path):
    text, header, table = build_report(rows)
    out_path = Path(out_path)
    with open(out_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(table)
    return text
