"""Command-line entry point: simulate, gen-data, train, forecast, evaluate, gradcheck.

Exit codes: 0 success, 1 usage error, 2 data/validation error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import dataio, forecast, lstm, plotting, thermal
from .config import load_config
from .errors import ThermoForecastError

log = logging.getLogger("thermoforecast")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
MODES = {"closed": "closed_loop", "closed_loop": "closed_loop", "onestep": "one_step", "one_step": "one_step"}


class UsageError(Exception):
    pass


class NumericFailure(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _plot_dir(path):
    if path is None:
        return None
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


def cmd_simulate(args):
    cfg = load_config(args.config)
    sim = cfg.sim
    seed = cfg.io.seed if args.seed is None else args.seed
    dist = thermal.generate_disturbances(sim.disturbances, seed, sim.duration, sim.dt)
    trace = thermal.simulate(sim.model(), sim.relay(), dist, sim.dt)
    dataio.write_trace_csv(trace, args.out)
    t, avg = thermal.average_power(trace, sim.avg_window)
    load = dataio.TimeSeries(step=sim.avg_window, start=0.0, values=avg)
    if args.avg_out:
        dataio.write_series_csv(load, args.avg_out)
    settled = trace.times >= 12 * 3600
    report = {
        "samples": len(trace),
        "average_samples": len(load),
        "mean_power": float(np.mean(trace.heater_power)),
        "duty_cycle": float(np.mean(trace.relay_cmd)),
        "indoor_min": float(trace.indoor_temp[settled].min()) if settled.any() else None,
        "indoor_max": float(trace.indoor_temp[settled].max()) if settled.any() else None,
    }
    print(json.dumps(report, sort_keys=True))
    out = _plot_dir(args.plot_dir)
    if out is not None:
        hours = trace.times / 3600.0
        plotting.emit_plot_svg([(hours, trace.indoor_temp)], ["indoor temperature"],
                               out / "indoor_temp.svg", xlabel="time [h]", ylabel="°C")
        plotting.emit_plot_svg([(hours, trace.heater_power), (t / 3600.0, avg)],
                               ["switching", f"{sim.avg_window:g} s average"],
                               out / "heater_power.svg", xlabel="time [h]", ylabel="W")
        plotting.emit_plot_svg([(hours, trace.disturbances[:, k]) for k in range(3)],
                               ["t_ext [°C]", "q_other [W]", "solar [W]"],
                               out / "disturbances.svg", xlabel="time [h]")
        plotting.figure_trace(trace, out / "trace.png", window=sim.avg_window)
    return EXIT_OK


def cmd_gen_data(args):
    cfg = load_config(args.config)
    seed = cfg.io.seed if args.seed is None else args.seed
    series = dataio.synth_load_series(cfg.synth, seed, args.days)
    dataio.write_series_csv(series, args.out)
    out = _plot_dir(args.plot_dir)
    if out is not None:
        plotting.emit_plot_svg([(series.times / 3600.0, series.values)], ["load"],
                               out / "load.svg", xlabel="time [h]")
    print(json.dumps({"samples": len(series), "step": series.step}, sort_keys=True))
    return EXIT_OK


def cmd_train(args):
    cfg = load_config(args.config)
    series = dataio.read_series_csv(args.data)
    train_part, _ = dataio.split_by_duration(series, args.train_days * 86400.0)
    tcfg = cfg.training()
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.epochs is not None:
        overrides["epochs"] = args.epochs
    if args.hidden_size is not None:
        overrides["hidden_size"] = args.hidden_size
    tcfg = dataclasses.replace(tcfg, **overrides)

    def progress(epoch, loss):
        if epoch == 1 or epoch % 25 == 0 or epoch == tcfg.epochs:
            log.info("epoch %d/%d loss %.6g", epoch, tcfg.epochs, loss)

    try:
        net, history = forecast.fit(train_part.values, tcfg, callback=progress)
    except FloatingPointError as exc:
        raise NumericFailure(f"training on {args.data}: {exc}") from exc
    meta = {"train_count": len(train_part), "step": series.step, "start": series.start}
    lstm.save_network(net, args.model, tcfg, meta)
    if args.loss_out:
        dataio.write_table(args.loss_out, ("epoch", "loss"),
                           [range(1, len(history) + 1), history])
    out = _plot_dir(args.plot_dir)
    if out is not None:
        plotting.emit_plot_svg([np.log10(history)], ["log10 training MSE"], out / "loss.svg", xlabel="epoch")
        plotting.figure_loss(history, out / "loss.png")
    print(json.dumps({"epochs": len(history), "final_loss": history[-1],
                      "train_samples": len(train_part)}, sort_keys=True))
    return EXIT_OK


def cmd_forecast(args):
    net, _tcfg, meta = lstm.load_network(args.model)
    series = dataio.read_series_csv(args.data)
    if args.train_days is not None:
        train_count = series.samples_per(args.train_days * 86400.0)
    elif "train_count" in meta:
        train_count = int(meta["train_count"])
    else:
        raise UsageError("--train-days is required: the model does not record its training split")
    train_part, test_part = dataio.split_series(series, train_count, len(series) - train_count)
    mode = MODES[args.mode]
    obs = test_part.values
    if mode == "closed_loop":
        horizon = len(obs) if args.horizon is None else args.horizon
        preds = forecast.forecast_closed_loop(net, train_part.values, horizon)
    else:
        if args.horizon is not None:
            raise UsageError("--horizon applies to closed-loop mode only")
        preds = forecast.forecast_one_step(net, train_part.values, obs)
    if not np.all(np.isfinite(preds)):
        raise NumericFailure("forecast produced non-finite values")
    scored = min(len(preds), len(obs))
    result = forecast.ForecastResult.build(mode, series.step, preds[:scored], obs[:scored])
    times = test_part.start + np.arange(len(preds)) * series.step
    obs_col = [obs[k] if k < len(obs) else None for k in range(len(preds))]
    dataio.write_table(args.out, dataio.FORECAST_HEADER, [times, preds, obs_col])
    summary = result.summary()
    print(json.dumps(summary, sort_keys=True))
    if args.summary:
        Path(args.summary).write_text(json.dumps(summary, sort_keys=True) + "\n")
    out = _plot_dir(args.plot_dir)
    if out is not None:
        hours = times / 3600.0
        plotting.emit_plot_svg([(hours[:scored], obs[:scored]), (hours, preds)], ["observed", "forecast"],
                               out / f"forecast_{mode}.svg", xlabel="time [h]")
        plotting.figure_forecast(times, preds, np.array([np.nan if v is None else v for v in obs_col]),
                                 out / f"forecast_{mode}.png", title=f"{mode}, RMSE {result.rmse:.4g}")
    return EXIT_OK


def cmd_evaluate(args):
    preds = dataio.read_column(args.pred, ("prediction", "value"))
    obs = dataio.read_column(args.obs, ("observation", "value"))
    if len(preds) != len(obs):
        raise ThermoForecastError(
            f"length mismatch: {args.pred} has {len(preds)} predictions, {args.obs} has {len(obs)} observations"
        )
    if not (np.all(np.isfinite(preds)) and np.all(np.isfinite(obs))):
        raise ThermoForecastError(f"missing or non-finite values in {args.pred} or {args.obs}")
    print(json.dumps({"steps": len(preds), "rmse": forecast.rmse(preds, obs)}, sort_keys=True))
    return EXIT_OK


def cmd_gradcheck(args):
    errors = [lstm.gradient_check(args.seed + k, args.hidden_size, args.steps, args.eps)
              for k in range(args.trials)]
    worst = max(errors)
    ok = worst < args.tolerance
    print(json.dumps({"trials": args.trials, "max_relative_error": worst,
                      "tolerance": args.tolerance, "passed": ok}, sort_keys=True))
    if not ok:
        raise NumericFailure(f"gradient check failed: max relative error {worst:.3g} >= {args.tolerance:g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="thermoforecast", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("simulate", help="run the relay-controlled thermal simulation")
    s.add_argument("--config")
    s.add_argument("--out", required=True, help="trace CSV")
    s.add_argument("--avg-out", help="window-averaged heater power CSV (t,value)")
    s.add_argument("--seed", type=int)
    s.add_argument("--plot-dir")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("gen-data", help="synthetic hourly aggregate load series")
    s.add_argument("--days", type=int, default=365)
    s.add_argument("--seed", type=int)
    s.add_argument("--config")
    s.add_argument("--out", required=True)
    s.add_argument("--plot-dir")
    s.set_defaults(func=cmd_gen_data)

    s = sub.add_parser("train", help="train the LSTM on the leading days of a series")
    s.add_argument("--data", required=True)
    s.add_argument("--train-days", type=float, default=6.0)
    s.add_argument("--config")
    s.add_argument("--model", required=True, help="output model JSON")
    s.add_argument("--seed", type=int)
    s.add_argument("--epochs", type=int)
    s.add_argument("--hidden-size", type=int)
    s.add_argument("--loss-out", help="per-epoch loss CSV")
    s.add_argument("--plot-dir")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("forecast", help="forecast the held-out tail of a series")
    s.add_argument("--model", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--mode", choices=sorted(MODES), default="closed")
    s.add_argument("--train-days", type=float, help="defaults to the split recorded in the model")
    s.add_argument("--horizon", type=int)
    s.add_argument("--out", required=True)
    s.add_argument("--summary", help="also write the JSON summary here")
    s.add_argument("--plot-dir")
    s.set_defaults(func=cmd_forecast)

    s = sub.add_parser("evaluate", help="RMSE between a prediction and an observation CSV")
    s.add_argument("--pred", required=True)
    s.add_argument("--obs", required=True)
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("gradcheck", help="BPTT against central finite differences")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--trials", type=int, default=10)
    s.add_argument("--hidden-size", type=int, default=4)
    s.add_argument("--steps", type=int, default=20)
    s.add_argument("--eps", type=float, default=1e-5)
    s.add_argument("--tolerance", type=float, default=1e-4)
    s.set_defaults(func=cmd_gradcheck)
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_help())
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(message)s")
        return args.func(args)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    except NumericFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ThermoForecastError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


def main():
    sys.exit(run())
