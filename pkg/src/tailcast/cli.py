"""Command-line pipeline: synth -> decompose -> diagnose -> fit -> forecast -> evaluate.

Configuration is layered: built-in defaults, then a flat `key = value`
config file, then CLI flags, then TAILCAST_* environment variables (the
strongest). Every run writes its artifacts plus a manifest (config, seed,
versions, artifact list) into the output directory; floats are formatted
to 9 significant digits so identical config+seed runs are byte-identical.

All randomness flows from the single config seed: each component draws
from seed + crc32(component name).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import zlib
from dataclasses import dataclass

import numpy as np

from . import __version__
from .baselines import (
    ArModel,
    AutoregressiveForecaster,
    OrnsteinUhlenbeckForecaster,
    OuParams,
    forecast_ar,
    forecast_ou,
)
from .diagnostics import acf, classify_dependence, compare_tails, dfa
from .errors import ConfigParseError, SubcommandError, TailcastError
from .evaluation import (
    ChannelSpec,
    blocked_splits,
    evaluate,
    generate_synthetic,
    windows_from_plan,
)
from .frame import TimeSeriesFrame
from .ingest import ImputationConfig, center, impute_knn, parse_csv, write_csv
from .neural import (
    HybridForecaster,
    WindowSpec,
    build_windows,
    forward,
    load_checkpoint,
    save_checkpoint,
)
from .seasonal import LoessConfig, SeasonalComponents, decompose, reseasonalize

FLOAT_FMT = ".9g"

# Default correntropy scale per forecast target.
DEFAULT_BETA = {"PM10": 4.10, "PM2.5": 4.10}


@dataclass
class RunConfig:
    """Flat run configuration; every field can come from file, flag or env."""

    window: int = 48
    horizon: int = 24
    batch: int = 64
    lr: float = 1e-4
    l2: float = 1e-4
    epochs: int = 500
    beta: float = 4.10
    seed: int = 0
    data: str = ""
    out: str = "run"
    channel: str = "PM10"
    model: str = "hybrid"
    models: str = "ou,ar"
    loss: str = "mccr"
    model_file: str = ""
    n_hours: int = 26280
    span: float = 0.15
    degree: int = 2
    iterations: int = 1
    max_lag: int = 200
    ratios: str = "0.67,0.20,0.13"
    n_folds: int = 1
    hidden: str = "64,64"
    t2v_k: int = 8
    patience: int = 20
    n_paths: int = 1000
    stride: int = 1
    max_gap: int = 72
    knn_k: int = 5
    deseasonalize: bool = True
    raw_scale: bool = False

    def ratio_tuple(self) -> tuple:
        return tuple(float(r) for r in self.ratios.split(","))

    def hidden_tuple(self) -> tuple:
        return tuple(int(w) for w in self.hidden.split(",") if w.strip())

    def model_list(self) -> list:
        return [m.strip() for m in self.models.split(",") if m.strip()]


def derive_seed(seed: int, component: str) -> int:
    """Documented seed-splitting rule: seed + crc32(component name)."""
    return (seed + zlib.crc32(component.encode("utf-8"))) % 2**32


def parse_config_file(path) -> dict:
    """Flat `key = value` lines; `#` starts a comment anywhere."""
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigParseError(f"{path}:{lineno}: expected key = value")
            key, _, value = line.partition("=")
            values[key.strip()] = value.strip()
    return values


def _coerce(field: dataclasses.Field, raw: str):
    if field.type in ("bool", bool):
        lowered = str(raw).strip().lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise ConfigParseError(f"{field.name}: {raw!r} is not a boolean")
    try:
        if field.type in ("int", int):
            return int(raw)
        if field.type in ("float", float):
            return float(raw)
    except ValueError as exc:
        raise ConfigParseError(f"{field.name}: {raw!r}: {exc}") from exc
    return str(raw)


def build_config(args: argparse.Namespace) -> RunConfig:
    """defaults < config file < CLI flags < TAILCAST_* environment."""
    cfg = RunConfig()
    fields = {f.name: f for f in dataclasses.fields(RunConfig)}
    if getattr(args, "config", None):
        for key, raw in parse_config_file(args.config).items():
            if key not in fields:
                raise ConfigParseError(f"unknown config key {key!r}")
            setattr(cfg, key, _coerce(fields[key], raw))
    for name in fields:
        value = getattr(args, name, None)
        if value is not None:
            setattr(cfg, name, value)
    for name, field in fields.items():
        env = os.environ.get(f"TAILCAST_{name.upper()}")
        if env is not None:
            setattr(cfg, name, _coerce(field, env))
    return cfg


# --- artifact helpers ---------------------------------------------------------

def _round_floats(obj):
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (float, np.floating)):
        return float(format(float(obj), FLOAT_FMT))
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, dict):
        return {k: _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _round_floats(obj.tolist())
    return obj


def write_json(payload: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(_round_floats(payload), fh, indent=1, sort_keys=True)
        fh.write("\n")


def write_table(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            cells = [format(v, FLOAT_FMT) if isinstance(v, float) else str(v)
                     for v in row]
            fh.write(",".join(cells) + "\n")


# --- subcommands ----------------------------------------------------------------

def cmd_synth(cfg: RunConfig, out: str) -> dict:
    """Default synthetic corpus: two persistent drivers and a seasonal
    heavy-tailed target channel coupled to them."""
    frame = generate_synthetic(
        {
            "d1": ChannelSpec(ar=(0.97,), noise="gaussian", noise_scale=0.35),
            "d2": ChannelSpec(ar=(0.97,), noise="gaussian", noise_scale=0.35),
            cfg.channel: ChannelSpec(
                level=40.0, yearly_amp=12.0, weekly_amp=4.0, daily_amp=6.0,
                ar=(0.8,), noise="lognormal-symmetric", noise_scale=0.8,
                lognormal_sigma=1.5, mix=(("d1", 2.5), ("d2", 1.2)),
            ),
        },
        n_hours=cfg.n_hours,
        seed=derive_seed(cfg.seed, "synth"),
    )
    path = os.path.join(out, "data.csv")
    write_csv(frame, path, FLOAT_FMT)
    return {"data": "data.csv"}


def _load_frame(cfg: RunConfig) -> TimeSeriesFrame:
    if not cfg.data:
        raise SubcommandError("--data is required (CSV path)")
    with open(cfg.data) as fh:
        header = fh.readline().strip().split(",")
    schema = [(name, "") for name in header[1:]]
    frame = parse_csv(cfg.data, schema, max_gap_hours=cfg.max_gap)
    if frame.has_missing():
        frame = impute_knn(frame, ImputationConfig(k=cfg.knn_k))
    return frame


def cmd_decompose(cfg: RunConfig, out: str) -> dict:
    frame = _load_frame(cfg)
    loess = LoessConfig(span=cfg.span, degree=cfg.degree, iterations=cfg.iterations)
    comp = decompose(frame.channels[cfg.channel], frame.timestamps, loess,
                     channel=cfg.channel)
    name = f"components_{cfg.channel}.json"
    write_json(comp.to_dict(), os.path.join(out, name))
    return {"components": name}


def cmd_diagnose(cfg: RunConfig, out: str) -> dict:
    frame = _load_frame(cfg)
    series = frame.channels[cfg.channel]
    artifacts = {}

    a = acf(series, cfg.max_lag)
    a.classification = classify_dependence(a)
    write_table(os.path.join(out, "acf.csv"), ["lag", "C", "band"],
                [(int(l), float(c), float(a.confidence_band))
                 for l, c in zip(a.lags, a.values)])
    artifacts["acf"] = "acf.csv"

    d = dfa(series)
    write_table(os.path.join(out, "dfa.csv"), ["s", "V"],
                [(int(s), float(v))
                 for s, v in zip(d.segment_sizes, d.fluctuations)])
    artifacts["dfa"] = "dfa.csv"

    write_json({"classification": a.classification, "acf": a.to_dict(),
                "dfa": d.to_dict()}, os.path.join(out, "dependence.json"))
    artifacts["dependence"] = "dependence.json"

    try:
        tails = compare_tails(series).to_dict()
    except TailcastError as exc:
        tails = {"error": type(exc).__name__, "message": str(exc)}
    write_json(tails, os.path.join(out, "tailfit.json"))
    artifacts["tailfit"] = "tailfit.json"
    return artifacts


def _prepare_pipeline(cfg: RunConfig, frame: TimeSeriesFrame):
    """Deseasonalize (optional), split, and center with train-only means."""
    plan = blocked_splits(len(frame), cfg.ratio_tuple(), cfg.n_folds,
                          min_block=cfg.window + cfg.horizon)
    components = {}
    residual = frame
    if cfg.deseasonalize:
        loess = LoessConfig(span=cfg.span, degree=cfg.degree,
                            iterations=cfg.iterations)
        adjusted = {}
        for name in frame.channel_names:
            comp = decompose(frame.channels[name], frame.timestamps, loess,
                             channel=name)
            components[name] = comp
            adjusted[name] = comp.residual
        residual = frame.with_channels(adjusted)
    train_idx = plan.indices("train")
    means = {n: float(residual.channels[n][train_idx].mean())
             for n in residual.channel_names}
    centered, _ = center(residual, means)
    return plan, components, means, centered


def _fit_model(cfg: RunConfig, name: str, centered, plan, seed: int):
    """Fit one forecaster on the train blocks.

    Lag-based estimators (OU, AR) use the largest contiguous train block
    so no artificial seam enters the autocorrelation structure; the hybrid
    trains on windows drawn from every train block.
    """
    names = centered.channel_names
    target_col = names.index(cfg.channel)
    M = centered.to_matrix()
    train_blocks = [b for b in plan.blocks if b.role == "train"]
    largest = max(train_blocks, key=len)
    y_train = M[largest.start:largest.stop, target_col]

    if name == "ou":
        model = OrnsteinUhlenbeckForecaster(max_lag=cfg.max_lag,
                                            n_paths=cfg.n_paths, seed=seed)
        return model.fit(y_train)
    if name == "ar":
        return AutoregressiveForecaster().fit(y_train)
    if name == "hybrid":
        # per-target default beta unless the config overrode it
        beta = cfg.beta
        if beta == RunConfig.beta:
            beta = DEFAULT_BETA.get(cfg.channel, beta)
        model = HybridForecaster(
            input_length=cfg.window, horizon=cfg.horizon,
            hidden=cfg.hidden_tuple(), t2v_k=cfg.t2v_k, loss=cfg.loss,
            beta=beta, lr=cfg.lr, l2=cfg.l2, batch_size=cfg.batch,
            epochs=cfg.epochs, patience=cfg.patience, target_col=target_col,
            seed=seed,
        )
        window_len = cfg.window + cfg.horizon
        spec = WindowSpec(cfg.window, cfg.horizon, M.shape[1], cfg.channel)
        train_starts = windows_from_plan(plan, window_len, "train")
        val_starts = windows_from_plan(plan, window_len, "validation")
        train_set = build_windows(M, target_col, cfg.window, cfg.horizon,
                                  starts=train_starts)
        val_set = (build_windows(M, target_col, cfg.window, cfg.horizon,
                                 starts=val_starts)
                   if val_starts.size else None)
        return model.fit_dataset(spec, train_set, val_set, tau_end=M.shape[0])
    raise SubcommandError(f"unknown model {name!r}")


def cmd_fit(cfg: RunConfig, out: str) -> dict:
    frame = _load_frame(cfg)
    plan, components, means, centered = _prepare_pipeline(cfg, frame)
    seed = derive_seed(cfg.seed, f"fit:{cfg.model}")
    model = _fit_model(cfg, cfg.model, centered, plan, seed)

    artifacts = {}
    write_json(plan.to_dict(), os.path.join(out, "plan.json"))
    artifacts["plan"] = "plan.json"
    write_json({n: c.to_dict() for n, c in components.items()},
               os.path.join(out, "components.json"))
    artifacts["components"] = "components.json"
    write_json(means, os.path.join(out, "means.json"))
    artifacts["means"] = "means.json"

    if cfg.model == "hybrid":
        save_checkpoint(model.model_, model._loss_spec(),
                        os.path.join(out, "model_hybrid.json"))
        artifacts["model"] = "model_hybrid.json"
        artifacts["model_params"] = "model_hybrid.bin"
        trace = model.result_
        rows = [(int(i), float(v)) for i, v in enumerate(trace.train_loss)]
        write_table(os.path.join(out, "loss_trace.csv"), ["epoch", "train_loss"], rows)
        artifacts["loss_trace"] = "loss_trace.csv"
        if trace.val_loss is not None:
            rows = [(int(i), float(v)) for i, v in enumerate(trace.val_loss)]
            write_table(os.path.join(out, "val_trace.csv"), ["epoch", "val_loss"], rows)
            artifacts["val_trace"] = "val_trace.csv"
    elif cfg.model == "ou":
        write_json({"kind": "ou", "channel": cfg.channel,
                    **model.params_.to_dict(),
                    "last_value": model.last_value_},
                   os.path.join(out, "model_ou.json"))
        artifacts["model"] = "model_ou.json"
    elif cfg.model == "ar":
        write_json({"kind": "ar", "channel": cfg.channel,
                    **model.model_.to_dict(),
                    "history": model.history_.tolist()},
                   os.path.join(out, "model_ar.json"))
        artifacts["model"] = "model_ar.json"
    return artifacts


def cmd_forecast(cfg: RunConfig, out: str) -> dict:
    if not cfg.model_file:
        raise SubcommandError("--model-file is required")
    frame = _load_frame(cfg)
    with open(cfg.model_file) as fh:
        manifest = json.load(fh)
    kind = manifest.get("kind", "hybrid")

    # apply the fit-time preprocessing (components + means) to every channel
    run_dir = os.path.dirname(cfg.model_file)
    components = _maybe_components_bundle(run_dir, cfg.channel)
    means = _maybe_json(os.path.join(run_dir, "means.json")) or {}
    adjusted = {}
    for name in frame.channel_names:
        values = frame.channels[name].astype(float)
        if name in components:
            values = values - components[name].seasonal_at(frame.timestamps)
        adjusted[name] = values - means.get(name, 0.0)
    residual = adjusted[cfg.channel]

    if kind == "ou":
        params = OuParams.from_dict(manifest)
        preds = forecast_ou(params, float(residual[-1]), cfg.horizon,
                            n_paths=cfg.n_paths,
                            seed=derive_seed(cfg.seed, "forecast:ou"))
    elif kind == "ar":
        preds = forecast_ar(ArModel.from_dict(manifest), residual, cfg.horizon)
    else:
        model, _ = load_checkpoint(cfg.model_file)
        M = np.column_stack([adjusted[n] for n in frame.channel_names])
        T = model.spec.input_length
        taus = np.arange(len(frame) - T, len(frame), dtype=float)
        preds = forward(model, M[-T:], taus)[: cfg.horizon]

    future_ts = frame.timestamps[-1] + (np.arange(1, len(preds) + 1)
                                        * np.timedelta64(3600, "s"))
    rows = []
    header = ["step", "timestamp", "residual_forecast"]
    raw = None
    if cfg.channel in components:
        raw = reseasonalize(components[cfg.channel],
                            preds + means.get(cfg.channel, 0.0), future_ts)
        header.append("forecast")
    for i in range(len(preds)):
        row = [int(i + 1), str(future_ts[i].astype("datetime64[s]")),
               float(preds[i])]
        if raw is not None:
            row.append(float(raw[i]))
        rows.append(row)
    write_table(os.path.join(out, "forecast.csv"), header, rows)
    return {"forecast": "forecast.csv"}


def _maybe_json(path):
    if os.path.exists(path):
        with open(path) as fh:
            return json.load(fh)
    return None


def _maybe_components_bundle(run_dir: str, channel: str) -> dict:
    bundle = _maybe_json(os.path.join(run_dir, "components.json"))
    if bundle:
        return {name: SeasonalComponents.from_dict(d) for name, d in bundle.items()}
    single = _maybe_json(os.path.join(run_dir, f"components_{channel}.json"))
    if single:
        return {channel: SeasonalComponents.from_dict(single)}
    return {}


def cmd_evaluate(cfg: RunConfig, out: str) -> dict:
    frame = _load_frame(cfg)
    plan, components, means, centered = _prepare_pipeline(cfg, frame)
    names = centered.channel_names
    target_col = names.index(cfg.channel)
    M = centered.to_matrix()

    models = {}
    for name in cfg.model_list():
        seed = derive_seed(cfg.seed, f"fit:{name}")
        models[name] = _fit_model(cfg, name, centered, plan, seed)

    invert = None
    if cfg.raw_scale:
        comp = components.get(cfg.channel)
        mean_shift = means.get(cfg.channel, 0.0)
        ts = frame.timestamps

        def invert(values, idx):
            restored = np.asarray(values) + mean_shift
            if comp is not None:
                restored = restored + comp.seasonal_at(ts[idx])
            return restored

    horizons = tuple(h for h in (3, 6, 12, 24) if h <= cfg.horizon)
    report = evaluate(models, M, target_col, plan, horizons=horizons,
                      stride=cfg.stride, invert=invert)
    report.write_csv(os.path.join(out, "metrics.csv"), FLOAT_FMT)
    write_json(report.to_dict(), os.path.join(out, "metrics.json"))
    write_json(plan.to_dict(), os.path.join(out, "plan.json"))
    return {"metrics_csv": "metrics.csv", "metrics_json": "metrics.json",
            "plan": "plan.json"}


COMMANDS = {
    "synth": cmd_synth,
    "decompose": cmd_decompose,
    "diagnose": cmd_diagnose,
    "fit": cmd_fit,
    "forecast": cmd_forecast,
    "evaluate": cmd_evaluate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tailcast",
        description="Heavy-tail-aware time-series forecasting pipeline",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="flat key=value config file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None, help="run directory")
        p.add_argument("--data", default=None, help="input CSV")
        p.add_argument("--channel", default=None)
        if name == "synth":
            p.add_argument("--n-hours", dest="n_hours", type=int, default=None)
        if name == "fit":
            p.add_argument("--model", default=None, choices=["ou", "ar", "hybrid"])
            p.add_argument("--loss", default=None, choices=["mse", "mccr"])
            p.add_argument("--beta", type=float, default=None)
            p.add_argument("--epochs", type=int, default=None)
            p.add_argument("--window", type=int, default=None)
            p.add_argument("--horizon", type=int, default=None)
            p.add_argument("--hidden", default=None)
        if name == "forecast":
            p.add_argument("--model-file", dest="model_file", default=None)
            p.add_argument("--horizon", type=int, default=None)
        if name == "evaluate":
            p.add_argument("--models", default=None)
            p.add_argument("--loss", default=None, choices=["mse", "mccr"])
            p.add_argument("--horizon", type=int, default=None)
            p.add_argument("--window", type=int, default=None)
            p.add_argument("--epochs", type=int, default=None)
            p.add_argument("--stride", type=int, default=None)
            p.add_argument("--raw-scale", dest="raw_scale", action="store_const",
                           const=True, default=None)
        if name in ("decompose", "diagnose", "fit", "evaluate"):
            p.add_argument("--span", type=float, default=None)
            p.add_argument("--max-lag", dest="max_lag", type=int, default=None)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = build_config(args)
        out = cfg.out
        os.makedirs(out, exist_ok=True)
        artifacts = COMMANDS[args.subcommand](cfg, out)
        # a run directory may accumulate several subcommands; the manifest
        # must reference every artifact ever written into it
        manifest_path = os.path.join(out, "manifest.json")
        previous = _maybe_json(manifest_path) or {}
        manifest = {
            "subcommands": previous.get("subcommands", []) + [args.subcommand],
            "seed": cfg.seed,
            "config": dataclasses.asdict(cfg),
            "versions": {
                "tailcast": __version__,
                "python": ".".join(map(str, sys.version_info[:3])),
                "numpy": np.__version__,
            },
            "artifacts": {**previous.get("artifacts", {}), **artifacts},
        }
        write_json(manifest, manifest_path)
        print(out)
        return 0
    except TailcastError as exc:
        payload = {"error": type(exc).__name__, "message": str(exc)}
        if not isinstance(exc, (ConfigParseError, SubcommandError)):
            payload = {"error": "SubcommandError",
                       "cause": type(exc).__name__, "message": str(exc)}
        json.dump(payload, sys.stderr)
        sys.stderr.write("\n")
        return 2
    except (ValueError, OSError) as exc:
        json.dump({"error": "SubcommandError", "cause": type(exc).__name__,
                   "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
