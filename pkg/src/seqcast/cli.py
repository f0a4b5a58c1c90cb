"""Command-line front door for ingestion, fitting, prediction and experiments.

Exit status: 0 success, 1 usage error, 2 data/model/config error. Results
go to files under the output directory (or stdout summaries); diagnostics
go to stderr. The output directory resolves from --out, then the config
file's [output] dir, then $SEQCAST_OUT, then ./seqcast-out. Option
precedence: command-line flags beat the config file, which beats the
built-in defaults (the module-level defaults of each subsystem).
"""

from __future__ import annotations

import argparse
import configparser
import os
import sys
from dataclasses import asdict
from pathlib import Path

from . import evaluation, fuzzy, lstm, markov, svgplot, trajectory
from .errors import ConfigError, SeqcastError

_PROG = "seqcast"
_DEFAULT_OUT = "seqcast-out"


def _defaults() -> dict[str, dict]:
    """Built-in option values, taken from each subsystem's own defaults."""
    ingest = trajectory.IngestConfig()
    train = lstm.TrainConfig()
    return {
        "ingest": {
            "delimiter": ingest.delimiter,
            "unit_scale": ingest.unit_scale,
            "max_gap_frames": ingest.max_gap_frames,
            "strict": ingest.strict,
            "header": "auto",
        },
        "markov": {
            "spacing": markov.DEFAULT_SPACING,
            "fallback": markov.Fallback.ZERO_ROW.value,
        },
        "fuzzy": {"sigma": 1.0, "quad_step": 0.01},
        "lstm": {k: v for k, v in asdict(train).items()},
        "experiment": {
            "rounds": 3,
            "horizon": 10,
            "methods": "nn,fc",
            "closed_loop_horizon": evaluation.DEFAULT_CLOSED_LOOP_HORIZON,
        },
        "output": {"dir": ""},
    }


def _load_config(path: str) -> dict[str, dict]:
    """Parse and validate an INI-style config file against the defaults."""
    defaults = _defaults()
    parser = configparser.ConfigParser()
    try:
        with open(path, "r", encoding="utf-8") as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    loaded: dict[str, dict] = {}
    for section in parser.sections():
        if section not in defaults:
            raise ConfigError(f"{path}: unknown section [{section}]")
        loaded[section] = {}
        for key, raw in parser.items(section):
            if key not in defaults[section]:
                raise ConfigError(f"{path}: unknown key {key!r} in [{section}]")
        # re-walk with the right converter per key
        for key, raw in parser.items(section):
            default = defaults[section][key]
            try:
                if isinstance(default, bool):
                    value = parser.getboolean(section, key)
                elif isinstance(default, int):
                    value = int(raw)
                elif isinstance(default, float):
                    value = float(raw)
                else:
                    value = raw
            except ValueError:
                raise ConfigError(
                    f"{path}: bad value {raw!r} for {section}.{key}"
                ) from None
            loaded[section][key] = value
    return loaded


class _Settings:
    """Defaults overlaid by the config file; flags are applied per lookup."""

    def __init__(self, config_path: str | None):
        self.values = _defaults()
        if config_path:
            for section, entries in _load_config(config_path).items():
                self.values[section].update(entries)

    def get(self, section: str, key: str, override=None):
        if override is not None:
            return override
        return self.values[section][key]


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); usage errors are 1
        raise _UsageError(message)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="INI config file (schema in README)")
    parser.add_argument("--out", help="output directory (default $SEQCAST_OUT or ./seqcast-out)")


def _add_ingest_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--data", required=True, help="input data file")
    parser.add_argument("--vehicle", type=int, help="vehicle id (default: most records)")
    parser.add_argument("--delimiter", help="field delimiter (default ,)")
    parser.add_argument("--unit-scale", type=float, help="multiplier to m/s (default 0.3048)")
    parser.add_argument("--max-gap", type=int, help="max frame gap within one trajectory")
    parser.add_argument(
        "--strict", action=argparse.BooleanOptionalAction, default=None,
        help="fail on malformed rows (--no-strict skips them)",
    )
    parser.add_argument("--header", choices=["auto", "yes", "no"], help="header row handling")


def _add_lstm_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--hidden-size", type=int)
    parser.add_argument("--learning-rate", type=float)
    parser.add_argument("--grad-clip", type=float)
    parser.add_argument("--seed", type=int)
    parser.add_argument(
        "--standardize", action=argparse.BooleanOptionalAction, default=None
    )


def build_parser() -> _Parser:
    parser = _Parser(prog=_PROG, description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="SUBCOMMAND")

    p = sub.add_parser("ingest", help="parse raw data and export velocity trajectories")
    _add_common(p)
    _add_ingest_flags(p)
    p.add_argument("--period", type=float, help="resample to this period (seconds)")

    p = sub.add_parser("fit-nn", help="fit the crisp transition model and export its counts")
    _add_common(p)
    _add_ingest_flags(p)
    p.add_argument("--spacing", type=float, help="state grid spacing (m/s)")
    p.add_argument("--fallback", choices=[f.value for f in markov.Fallback])

    p = sub.add_parser("fit-fc", help="fit the fuzzy transition model and export its counts")
    _add_common(p)
    _add_ingest_flags(p)
    p.add_argument("--sigma", type=float, help="membership width (m/s)")
    p.add_argument("--quad-step", type=float, help="moment integration step")

    p = sub.add_parser("train-lstm", help="train the network and save the model file")
    _add_common(p)
    _add_ingest_flags(p)
    _add_lstm_flags(p)

    p = sub.add_parser("predict", help="apply a saved model to a velocity series")
    _add_common(p)
    _add_ingest_flags(p)
    p.add_argument("--model", required=True, help="saved model file (any kind)")
    p.add_argument("--horizon", type=int, help="forecast this many steps past the series end")

    p = sub.add_parser("rounds", help="repeated predict-then-fit rounds on one trace")
    _add_common(p)
    _add_ingest_flags(p)
    p.add_argument("--method", choices=["nn", "fc"], default="nn")
    p.add_argument("--rounds", type=int)
    p.add_argument("--record-timing", action="store_true",
                   help="include wall-clock seconds in the report JSON")

    p = sub.add_parser("horizon", help="multi-step rounds study for the crisp model")
    _add_common(p)
    _add_ingest_flags(p)
    p.add_argument("--horizon", type=int)
    p.add_argument("--rounds", type=int)
    p.add_argument("--record-timing", action="store_true")

    p = sub.add_parser("compare", help="first-round comparison of nn/fc/lstm on one trace")
    _add_common(p)
    _add_ingest_flags(p)
    _add_lstm_flags(p)
    p.add_argument("--methods", help="comma-separated subset of nn,fc,lstm")
    p.add_argument("--spacing", type=float)
    p.add_argument("--fallback", choices=[f.value for f in markov.Fallback])
    p.add_argument("--sigma", type=float)
    p.add_argument("--quad-step", type=float)
    p.add_argument("--record-timing", action="store_true")

    p = sub.add_parser("sensitivity", help="train on each set, evaluate all on one trace")
    _add_common(p)
    p.add_argument("--train", action="append", required=True, metavar="FILE",
                   help="training data file (repeatable)")
    p.add_argument("--eval-data", required=True, help="evaluation data file")
    p.add_argument("--vehicle", type=int)
    p.add_argument("--delimiter")
    p.add_argument("--unit-scale", type=float)
    p.add_argument("--max-gap", type=int)
    p.add_argument("--strict", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--header", choices=["auto", "yes", "no"])
    _add_lstm_flags(p)
    p.add_argument("--closed-horizon", type=int, help="closed-loop span (default 40)")
    p.add_argument("--record-timing", action="store_true")

    p = sub.add_parser("plot", help="render named series as an SVG line chart")
    _add_common(p)
    p.add_argument("--series", action="append", required=True, metavar="NAME=FILE",
                   help="two-column CSV to plot (repeatable)")
    p.add_argument("--out-file", default="chart.svg", help="chart filename inside the output dir")
    p.add_argument("--x-label", default="t (s)")
    p.add_argument("--y-label", default="velocity (m/s)")

    return parser


def _resolve_outdir(args, settings: _Settings) -> Path:
    configured = settings.values["output"]["dir"]
    out = args.out or configured or os.environ.get("SEQCAST_OUT") or _DEFAULT_OUT
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _ingest_config(args, settings: _Settings) -> trajectory.IngestConfig:
    header = settings.get("ingest", "header", getattr(args, "header", None))
    has_header = None if header == "auto" else header == "yes"
    return trajectory.IngestConfig(
        unit_scale=settings.get("ingest", "unit_scale", getattr(args, "unit_scale", None)),
        max_gap_frames=settings.get("ingest", "max_gap_frames", getattr(args, "max_gap", None)),
        delimiter=settings.get("ingest", "delimiter", getattr(args, "delimiter", None)),
        strict=settings.get("ingest", "strict", getattr(args, "strict", None)),
        has_header=has_header,
    )


def _train_config(args, settings: _Settings) -> lstm.TrainConfig:
    g = lambda key, attr: settings.get("lstm", key, getattr(args, attr, None))
    return lstm.TrainConfig(
        epochs=g("epochs", "epochs"),
        hidden_size=g("hidden_size", "hidden_size"),
        learning_rate=g("learning_rate", "learning_rate"),
        grad_clip_norm=g("grad_clip_norm", "grad_clip"),
        adam_beta1=settings.values["lstm"]["adam_beta1"],
        adam_beta2=settings.values["lstm"]["adam_beta2"],
        adam_epsilon=settings.values["lstm"]["adam_epsilon"],
        seed=g("seed", "seed"),
        standardize=g("standardize", "standardize"),
    )


def _predictor_config(args, settings: _Settings) -> evaluation.PredictorConfig:
    return evaluation.PredictorConfig(
        grid_spacing=settings.get("markov", "spacing", getattr(args, "spacing", None)),
        nn_fallback=markov.Fallback(
            settings.get("markov", "fallback", getattr(args, "fallback", None))
        ),
        sigma=settings.get("fuzzy", "sigma", getattr(args, "sigma", None)),
        quad_step=settings.get("fuzzy", "quad_step", getattr(args, "quad_step", None)),
        train=_train_config(args, settings),
    )


def _load_all_trajectories(
    path: str, config: trajectory.IngestConfig, vehicle: int | None
) -> dict[int, list[trajectory.Trajectory]]:
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline().strip()
    if first == "t_seconds,velocity_mps":
        t = trajectory.read_trajectory_csv(path)
        return {t.vehicle_id: [t]}
    with open(path, "r", encoding="utf-8") as fh:
        records = trajectory.parse_records(fh.read(), config)
    ids = [vehicle] if vehicle is not None else trajectory.vehicle_ids(records)
    return {vid: trajectory.extract_trajectory(records, vid, config) for vid in ids}


def _load_trajectory(
    path: str, config: trajectory.IngestConfig, vehicle: int | None
) -> trajectory.Trajectory:
    """Load one velocity series: requested vehicle or the one with the most
    samples, and that vehicle's longest contiguous run."""
    by_vehicle = _load_all_trajectories(path, config, vehicle)
    if vehicle is None:
        vehicle = max(by_vehicle, key=lambda vid: sum(len(t) for t in by_vehicle[vid]))
    return max(by_vehicle[vehicle], key=len)


def _write(outdir: Path, name: str, text: str) -> Path:
    path = outdir / name
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path


def _write_report(report, args, outdir: Path) -> None:
    _write(outdir, "report.json", report.to_json(include_timing=args.record_timing))
    _write(outdir, "records.csv", report.records_csv())


def _cmd_ingest(args, settings: _Settings, outdir: Path) -> None:
    config = _ingest_config(args, settings)
    by_vehicle = _load_all_trajectories(args.data, config, args.vehicle)
    for vid, runs in by_vehicle.items():
        for k, run in enumerate(runs):
            if args.period is not None:
                run = trajectory.resample_uniform(run, args.period)
            name = f"trajectory_{vid}_{k}.csv"
            trajectory.write_trajectory_csv(run, outdir / name)
            print(f"vehicle {vid} run {k}: {len(run)} samples at {run.sample_period:g} s -> {name}")


def _cmd_fit_nn(args, settings: _Settings, outdir: Path) -> None:
    config = _predictor_config(args, settings)
    trace = _load_trajectory(args.data, _ingest_config(args, settings), args.vehicle)
    model = evaluation.nn_model_for(trace, config)
    markov.fit_transitions(model, trace)
    markov.write_transition_csv(model, outdir / "nn_transitions.csv")
    print(f"fitted {model.n_states} states, {int(model.counts.sum())} transitions "
          f"-> nn_transitions.csv")


def _cmd_fit_fc(args, settings: _Settings, outdir: Path) -> None:
    config = _predictor_config(args, settings)
    trace = _load_trajectory(args.data, _ingest_config(args, settings), args.vehicle)
    model = evaluation.fc_model_for(trace, config)
    fuzzy.fit_fuzzy_transitions(model, trace)
    fuzzy.write_fuzzy_csv(model, outdir / "fc_transitions.csv")
    print(f"fitted {model.partition.set_count} fuzzy sets, mass {model.counts.sum():.1f} "
          f"-> fc_transitions.csv")


def _cmd_train_lstm(args, settings: _Settings, outdir: Path) -> None:
    config = _train_config(args, settings)
    trace = _load_trajectory(args.data, _ingest_config(args, settings), args.vehicle)
    params, curve, standardization = lstm.train(trace, config)
    lstm.save_model(params, standardization, config, outdir / "lstm.model")
    lines = ["iteration,loss,rmse"]
    lines.extend(
        f"{i + 1},{loss:.12g},{score:.12g}"
        for i, (loss, score) in enumerate(zip(curve.loss, curve.rmse))
    )
    _write(outdir, "training_curve.csv", "\n".join(lines) + "\n")
    print(f"trained {config.epochs} epochs; final rmse {curve.rmse[-1]:.4f} m/s "
          f"-> lstm.model, training_curve.csv")


def _sniff_model_kind(path: str) -> str:
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline().strip()
    if first == lstm.MODEL_FORMAT_HEADER:
        return "lstm"
    if first.startswith("# x_"):
        return "nn"
    if first.startswith("# M="):
        return "fc"
    raise ConfigError(f"{path}: unrecognized model file")


def _cmd_predict(args, settings: _Settings, outdir: Path) -> None:
    trace = _load_trajectory(args.data, _ingest_config(args, settings), args.vehicle)
    kind = _sniff_model_kind(args.model)
    samples = trace.samples
    lines = ["origin,step,predicted,observed"]
    if args.horizon is None:
        if kind == "lstm":
            params, standardization, _ = lstm.load_model(args.model)
            predictions = lstm.predict_open_loop(params, standardization, trace)
        elif kind == "nn":
            model = markov.read_transition_csv(args.model)
            predictions = [markov.predict_expectation(model, y) for y in samples[:-1]]
        else:
            model = fuzzy.read_fuzzy_csv(args.model)
            predictions = [fuzzy.predict_fc(model, y, clamp=True) for y in samples[:-1]]
        lines.extend(
            f"{t},1,{p:.6f},{samples[t + 1]:.6f}" for t, p in enumerate(predictions)
        )
    else:
        origin = len(samples) - 1
        if kind == "lstm":
            params, standardization, _ = lstm.load_model(args.model)
            predictions = lstm.predict_closed_loop(params, standardization, trace, args.horizon)
        elif kind == "nn":
            model = markov.read_transition_csv(args.model)
            predictions = markov.predict_multistep(model, samples[-1], args.horizon)
        else:
            raise ConfigError("fuzzy models support one-step prediction only")
        lines.extend(
            f"{origin},{s + 1},{p:.6f}," for s, p in enumerate(predictions)
        )
    _write(outdir, "predictions.csv", "\n".join(lines) + "\n")
    print(f"{len(lines) - 1} predictions -> predictions.csv")


def _cmd_rounds(args, settings: _Settings, outdir: Path) -> None:
    config = _predictor_config(args, settings)
    rounds = settings.get("experiment", "rounds", args.rounds)
    trace = _load_trajectory(args.data, _ingest_config(args, settings), args.vehicle)
    model = (
        evaluation.nn_model_for(trace, config)
        if args.method == "nn"
        else evaluation.fc_model_for(trace, config)
    )
    report = evaluation.run_rounds(model, trace, rounds, config)
    _write_report(report, args, outdir)
    for r in report.methods[args.method].rounds:
        print(f"{r.label}: rmse {r.rmse:.4f} m/s")


def _cmd_horizon(args, settings: _Settings, outdir: Path) -> None:
    config = _predictor_config(args, settings)
    horizon = settings.get("experiment", "horizon", args.horizon)
    rounds = settings.get("experiment", "rounds", args.rounds)
    trace = _load_trajectory(args.data, _ingest_config(args, settings), args.vehicle)
    model = evaluation.nn_model_for(trace, config)
    report = evaluation.run_horizon(model, trace, horizon, rounds, config)
    _write_report(report, args, outdir)
    for r in report.methods["nn"].rounds:
        steps = " ".join(f"{v:.3f}" for v in r.per_step_rmse)
        print(f"{r.label}: aggregate rmse {r.rmse:.4f}; per-step {steps}")


def _cmd_compare(args, settings: _Settings, outdir: Path) -> None:
    config = _predictor_config(args, settings)
    methods = settings.get("experiment", "methods", args.methods)
    method_list = [m.strip() for m in methods.split(",") if m.strip()]
    trace = _load_trajectory(args.data, _ingest_config(args, settings), args.vehicle)
    report = evaluation.compare_methods(trace, method_list, config)
    _write_report(report, args, outdir)
    if "nn" in report.models:
        markov.write_transition_csv(report.models["nn"], outdir / "nn_transitions.csv")
    if "fc" in report.models:
        fuzzy.write_fuzzy_csv(report.models["fc"], outdir / "fc_transitions.csv")
    if "lstm" in report.models:
        params, standardization, train_config = report.models["lstm"]
        lstm.save_model(params, standardization, train_config, outdir / "lstm.model")
    for label, result in report.methods.items():
        print(f"{label}: round-1 rmse {result.rounds[0].rmse:.4f} m/s "
              f"({result.seconds:.3f} s)")


def _cmd_sensitivity(args, settings: _Settings, outdir: Path) -> None:
    ingest = _ingest_config(args, settings)
    config = _train_config(args, settings)
    horizon = settings.get("experiment", "closed_loop_horizon", args.closed_horizon)
    train_sets = [_load_trajectory(p, ingest, args.vehicle) for p in args.train]
    eval_trace = _load_trajectory(args.eval_data, ingest, args.vehicle)
    report = evaluation.lstm_data_sensitivity(train_sets, eval_trace, config, horizon)
    _write_report(report, args, outdir)
    for label, result in report.methods.items():
        opened, closed = result.rounds
        print(f"{label}: open-loop rmse {opened.rmse:.4f}, "
              f"closed-loop({horizon}) rmse {closed.rmse:.4f}")


def _read_xy_csv(path: str) -> list[tuple[float, float]]:
    points = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            cells = line.strip().split(",")
            if len(cells) < 2:
                continue
            try:
                points.append((float(cells[0]), float(cells[1])))
            except ValueError:
                continue  # header or blank line
    return points


def _cmd_plot(args, settings: _Settings, outdir: Path) -> None:
    series: dict[str, list[tuple[float, float]]] = {}
    for item in args.series:
        name, sep, path = item.partition("=")
        if not sep or not name or not path:
            raise _UsageError(f"--series expects NAME=FILE, got {item!r}")
        series[name] = _read_xy_csv(path)
    svgplot.plot_series(series, outdir / args.out_file,
                        x_label=args.x_label, y_label=args.y_label)
    print(f"wrote {args.out_file}")


_HANDLERS = {
    "ingest": _cmd_ingest,
    "fit-nn": _cmd_fit_nn,
    "fit-fc": _cmd_fit_fc,
    "train-lstm": _cmd_train_lstm,
    "predict": _cmd_predict,
    "rounds": _cmd_rounds,
    "horizon": _cmd_horizon,
    "compare": _cmd_compare,
    "sensitivity": _cmd_sensitivity,
    "plot": _cmd_plot,
}


def run_cli(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"{_PROG}: error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        settings = _Settings(getattr(args, "config", None))
        outdir = _resolve_outdir(args, settings)
        _HANDLERS[args.command](args, settings, outdir)
    except _UsageError as exc:
        print(f"{_PROG}: error: {exc}", file=sys.stderr)
        return 1
    except (SeqcastError, OSError) as exc:
        print(f"{_PROG}: error: {exc}", file=sys.stderr)
        return 2
    return 0


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
