"""
cli.py
------

The `twinchan` command.

    twinchan seq gen|report        code sequences and their merit
    twinchan scenario build|inspect|heatmap
    twinchan sound run|matrix      channel sounding over a scenario bundle
    twinchan sound analyze         channel estimate from a recorded .iq32 capture
    twinchan jam                   jamming demo, per-second SINR
    twinchan compare               twin-vs-real similarity
    twinchan reproduce <id>        validation experiments, PASS/FAIL table

Exit codes: 0 success, 1 internal error, 2 input or validation error (a
one-line JSON object on stderr describes it).
"""
import argparse
import csv
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from .analysis import DEFAULT_MAX_LAG, MetricSeries, compare_runs
from .bundle import load_scenario, save_scenario
from .clustering import CLUSTERERS
from .config import Settings, read_config_file, resolve_config
from .core import RadioParams
from .errors import ValidationError
from .experiments import REPRODUCERS, run_jam_demo, run_reproduce
from .main import configure_logging
from .manifest import utc_now, write_manifest
from .scenario import Node, ScenarioError, build_scenario, parse_ray_paths, pathloss_matrix, read_ray_paths
from .sequences import parse_code_spec, rank_sequences, write_chips_binary, write_chips_text
from .session import EmulationSession
from .iqfile import read_iq, write_iq
from .sounder import CORRELATION_MODES, SoundingConfig, analyze_capture, capture_link, sound_matrix

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_INVALID = 2


class _Context:
    """What every command handler gets: parsed args, resolved config, start time."""

    def __init__(self, args: argparse.Namespace, config: Dict[str, Any]):
        self.args = args
        self.config = config
        self.started = utc_now()
        self.seed = int(config["seed"])
        self.threads = int(config["threads"])

    def output(self, path) -> Path:
        path = Path(path)
        if not path.is_absolute():
            path = Path(self.config.get("output_dir", ".")) / path
        path.parent.mkdir(parents=True, exist_ok=True)
        return path

    def manifest(self, output, inputs: Sequence = (), outputs: Sequence = ()) -> None:
        write_manifest(output, self.args.command_line, self.config, self.seed, inputs, outputs, self.started)


def _emit(obj) -> None:
    print(json.dumps(obj, sort_keys=True, indent=2, default=_json_default))


def _json_default(value):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    return str(value)


def _finite_or_none(v: float):
    return float(v) if np.isfinite(v) else None


def _write_matrix_csv(path: Path, ids: List[int], matrix: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["tx"] + [str(i) for i in ids])
        for tx, row in zip(ids, matrix):
            writer.writerow([str(tx)] + [repr(float(v)) for v in row])


# ---------------------------------------------------------------- seq

def cmd_seq_gen(ctx: _Context) -> int:
    args = ctx.args
    seq = parse_code_spec(args.code)
    out = ctx.output(args.output)
    if args.format == "bin":
        write_chips_binary(seq, out)
    else:
        write_chips_text(seq, out)
    ctx.manifest(out)
    _emit({"name": seq.name, "family": seq.family, "length": len(seq), "output": str(out)})
    return EXIT_OK


def cmd_seq_report(ctx: _Context) -> int:
    args = ctx.args
    ranking = rank_sequences(parse_code_spec(spec) for spec in args.code)
    rows = [dict(r.to_dict(), spec=s.spec) for s, r in ranking]
    for row in rows:
        row["peak_to_sidelobe_db"] = _finite_or_none(row["peak_to_sidelobe_db"])
    if args.output:
        out = ctx.output(args.output)
        out.write_text(json.dumps(rows, sort_keys=True, indent=2) + "\n")
        ctx.manifest(out)
    _emit(rows)
    return EXIT_OK


# ---------------------------------------------------------------- scenario

def _read_nodes(path) -> Dict[str, Any]:
    data = json.loads(Path(path).read_text())
    if isinstance(data, list):
        data = {"nodes": data}
    if not isinstance(data, dict) or "nodes" not in data:
        raise ScenarioError(f"{path}: expected a list of nodes or an object with a 'nodes' list")
    return data


def cmd_scenario_build(ctx: _Context) -> int:
    args = ctx.args
    spec = _read_nodes(args.nodes)
    nodes = [Node.from_dict(n) for n in spec["nodes"]]
    radio = RadioParams.from_dict(spec.get("radio", {}))
    rawcirs = parse_ray_paths(read_ray_paths(args.paths))
    times = sorted({key[2] for key in rawcirs})
    ts = args.ts
    if ts is None:
        ts = float(np.median(np.diff(times))) if len(times) > 1 else args.update_interval
    scenario = build_scenario(
        nodes, radio, rawcirs, ts,
        update_interval=args.update_interval,
        name=args.name or Path(args.output).stem,
        clusterer=CLUSTERERS[args.clusterer](),
        threads=ctx.threads,
    )
    out = save_scenario(scenario, ctx.output(args.output))
    ctx.manifest(out, inputs=[args.paths, args.nodes])
    _emit({"output": str(out), "nodes": scenario.node_ids, "links": len(scenario.links),
           "n_frames": scenario.n_frames, "dropped_paths": scenario.metadata.get("dropped_paths", {})})
    return EXIT_OK


def cmd_scenario_inspect(ctx: _Context) -> int:
    scenario = load_scenario(ctx.args.bundle)
    links = {}
    for (tx, rx), timeline in scenario.links.items():
        first = timeline.frames[0]
        links[f"{tx}-{rx}"] = {
            "static": timeline.is_static,
            "frame0": [{"slot": int(s), "re": float(g.real), "im": float(g.imag)}
                       for s, g in zip(first.slots, first.gains)],
        }
    _emit({
        "name": scenario.name,
        "nodes": [n.to_dict() for n in scenario.nodes],
        "radio": scenario.radio.to_dict(),
        "n_frames": scenario.n_frames,
        "update_interval_s": scenario.update_interval,
        "sampling_interval_s": scenario.sampling_interval,
        "links": links,
    })
    return EXIT_OK


def cmd_scenario_heatmap(ctx: _Context) -> int:
    args = ctx.args
    scenario = load_scenario(args.bundle)
    ids, matrix = pathloss_matrix(scenario, args.frame)
    out = ctx.output(args.output or f"{Path(args.bundle).stem}_frame{args.frame}.csv")
    _write_matrix_csv(out, ids, matrix)
    outputs = [out]
    if args.plot:
        from .plots import plot_matrix, svg_path
        outputs.append(plot_matrix(ids, matrix, svg_path(out), title=f"{scenario.name} frame {args.frame}"))
    ctx.manifest(out, inputs=[args.bundle], outputs=outputs)
    _emit({"output": str(out), "node_ids": ids})
    return EXIT_OK


# ---------------------------------------------------------------- sound

def _sounding_config(args) -> SoundingConfig:
    return SoundingConfig(
        code=parse_code_spec(args.code),
        repetitions=args.repetitions,
        sample_rate=args.rate,
        chip_rate=args.chip_rate,
        capture_duration=args.duration,
        tx_gain_db=args.tx_gain,
        rx_gain_db=args.rx_gain,
        threshold_db=args.threshold,
        correlation_mode=args.mode,
        equalize_sidelobes=args.equalize,
        compensate_gains=args.compensate_gains,
    )


def _session(ctx: _Context, scenario) -> EmulationSession:
    return EmulationSession(scenario, sample_rate=ctx.args.rate, rng_seed=ctx.seed,
                            noise_enabled=not ctx.args.no_noise, threads=ctx.threads, loop=ctx.args.loop)


def cmd_sound_run(ctx: _Context) -> int:
    args = ctx.args
    scenario = load_scenario(args.scenario)
    config = _sounding_config(args)
    with _session(ctx, scenario) as session:
        capture = capture_link(session, args.tx, args.rx, config)
    saved = []
    if args.capture:
        saved.append(write_iq(capture, ctx.output(args.capture)))
    result = analyze_capture(capture, config, scenario.radio, args.tx, args.rx)

    out = ctx.output(args.output or f"sound_{args.tx}_{args.rx}.json")
    return _write_sounding(ctx, result, config, out, [args.scenario], saved)


def cmd_sound_analyze(ctx: _Context) -> int:
    args = ctx.args
    capture = read_iq(args.capture, sample_rate=args.rate)
    config = SoundingConfig(
        code=parse_code_spec(args.code),
        sample_rate=capture.sample_rate,
        chip_rate=args.chip_rate,
        capture_duration=max(len(capture), 1) / capture.sample_rate,
        threshold_db=args.threshold,
        correlation_mode=args.mode,
        equalize_sidelobes=args.equalize,
    )
    result = analyze_capture(capture, config, tx_id=args.tx, rx_id=args.rx)
    out = ctx.output(args.output or Path(args.capture).with_suffix(".json").name)
    return _write_sounding(ctx, result, config, out, [args.capture])


def _write_sounding(ctx: _Context, result, config: SoundingConfig, out: Path,
                    inputs: Sequence, extra: Sequence = ()) -> int:
    payload = dict(result.to_dict(), config=config.to_dict())
    out.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")
    trace = out.with_suffix(".cir.csv")
    mean = result.mean_cir()
    with open(trace, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["delay_s", "h_mag"])
        for i, v in enumerate(mean):
            writer.writerow([repr(i / config.sample_rate), repr(float(v))])
    outputs = [out, trace, *extra]
    if ctx.args.plot:
        from .plots import plot_cir, svg_path
        outputs.append(plot_cir(mean, config.sample_rate, svg_path(trace), title=f"link {result.tx} -> {result.rx}"))
    ctx.manifest(out, inputs=inputs, outputs=outputs)
    _emit(payload)
    return EXIT_OK


def cmd_sound_matrix(ctx: _Context) -> int:
    args = ctx.args
    scenario = load_scenario(args.scenario)
    config = _sounding_config(args)
    with _session(ctx, scenario) as session:
        matrix = sound_matrix(session, config, args.nodes)

    out = ctx.output(args.output or "loss_matrix.csv")
    _write_matrix_csv(out, matrix.node_ids, matrix.loss_db)
    summary = out.with_suffix(".json")
    off = matrix.off_diagonal()
    finite = off[np.isfinite(off)]
    payload = dict(matrix.to_dict(),
                   mean_loss_db=_finite_or_none(finite.mean()) if finite.size else None,
                   sd_loss_db=_finite_or_none(finite.std()) if finite.size else None)
    summary.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")
    outputs = [out, summary]
    if args.plot:
        from .plots import plot_matrix, svg_path
        outputs.append(plot_matrix(matrix.node_ids, matrix.loss_db, svg_path(out), title="measured path loss"))
    ctx.manifest(out, inputs=[args.scenario], outputs=outputs)
    _emit(payload)
    return EXIT_OK


# ---------------------------------------------------------------- jam / compare / reproduce

def cmd_jam(ctx: _Context) -> int:
    args = ctx.args
    series = run_jam_demo(
        kind=args.kind, mobility=args.mobility, on_s=args.on, off_s=args.off, total_s=args.total,
        seed=ctx.seed, sample_rate=args.rate, snapshot_s=args.snapshot,
        signal_power_db=args.power, jammer_power_db=args.jammer_power,
        bandwidth_hz=args.bandwidth, threads=ctx.threads,
    )
    out = series.to_csv(ctx.output(args.output or f"sinr_{args.kind}_{args.mobility}.csv"))
    outputs = [out]
    if args.plot:
        from .plots import plot_series, svg_path
        outputs.append(plot_series([series], svg_path(out), title=series.label, ylabel="SINR [dB]",
                                   shade=(args.on, args.off)))
    ctx.manifest(out, outputs=outputs)
    _emit({"output": str(out), "label": series.label, "sinr_db": series.values.tolist()})
    return EXIT_OK


def cmd_compare(ctx: _Context) -> int:
    args = ctx.args
    real = MetricSeries.from_csv(args.real)
    twin = MetricSeries.from_csv(args.twin)
    report = compare_runs(real, twin, args.max_lag)
    payload = report.to_dict()
    if args.output:
        out = ctx.output(args.output)
        out.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")
        ctx.manifest(out, inputs=[args.real, args.twin])
    _emit(payload)
    return EXIT_OK


def cmd_reproduce(ctx: _Context) -> int:
    args = ctx.args
    report = run_reproduce(args.experiment, seed=ctx.seed, threads=ctx.threads)
    print(report.table())
    if args.output:
        out = ctx.output(args.output)
        out.write_text(json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n")
        ctx.manifest(out)
    return EXIT_OK if report.passed else EXIT_INTERNAL


# ---------------------------------------------------------------- parser

def _add_sounding_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scenario", required=True, help="Scenario bundle (.twsc).")
    p.add_argument("--code", default="glfsr:8:0:1", help="Code spec, e.g. glfsr:8:0:1, gold:0x43:0x67:0, golay:a128, ls:256.")
    p.add_argument("--rate", type=float, default=50e6, help="Sample rate (S/s).")
    p.add_argument("--chip-rate", type=float, default=None, help="Chip rate (chips/s); default = sample rate.")
    p.add_argument("--duration", type=float, default=3.0, help="Capture duration (s).")
    p.add_argument("--repetitions", type=int, default=None, help="Code periods sent; default fills the capture.")
    p.add_argument("--tx-gain", type=float, default=0.0, help="Sounder tx gain (dB, 0-15).")
    p.add_argument("--rx-gain", type=float, default=0.0, help="Sounder rx gain (dB, 0-15).")
    p.add_argument("--threshold", type=float, default=12.0, help="Tap threshold above the noise median (dB).")
    p.add_argument("--mode", choices=CORRELATION_MODES, default="zero-pad", help="Correlation boundary handling.")
    p.add_argument("--equalize", action="store_true", help="Remove the m-sequence off-peak floor.")
    p.add_argument("--compensate-gains", action="store_true", help="Subtract tx/rx gains from path gains.")
    p.add_argument("--no-noise", action="store_true", help="Disable receiver noise.")
    p.add_argument("--loop", action="store_true", help="Wrap scenario frames when the capture outlasts them.")
    p.add_argument("-o", "--output", default=None, help="Output file.")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="twinchan", description="Wireless channel-emulator digital twin.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--seed", type=int, default=None, help="Root seed (env TWINCHAN_SEED, default 0).")
    parser.add_argument("--threads", type=int, default=None, help="Worker threads (env TWINCHAN_THREADS, default 1).")
    parser.add_argument("--config", default=None, help="JSON file with option defaults.")
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING, ERROR (env TWINCHAN_LOG_LEVEL).")
    parser.add_argument("--plot", action="store_true", help="Also write SVG plots next to CSV outputs.")
    sub = parser.add_subparsers(dest="command", required=True)

    seq = sub.add_parser("seq", help="Code sequences.").add_subparsers(dest="action", required=True)
    p = seq.add_parser("gen", help="Write a code sequence to a chip file.")
    p.add_argument("--code", required=True, help="Code spec.")
    p.add_argument("--format", choices=("text", "bin"), default="text", help="+1/-1 lines or int8 bytes.")
    p.add_argument("-o", "--output", required=True, help="Chip file.")
    p.set_defaults(handler=cmd_seq_gen)
    p = seq.add_parser("report", help="Rank codes by peak-to-sidelobe ratio.")
    p.add_argument("--code", action="append", required=True, help="Code spec; repeat to compare.")
    p.add_argument("-o", "--output", default=None, help="JSON report.")
    p.set_defaults(handler=cmd_seq_report)

    scen = sub.add_parser("scenario", help="Scenario bundles.").add_subparsers(dest="action", required=True)
    p = scen.add_parser("build", help="Compile ray paths into a bundle.")
    p.add_argument("--paths", required=True, help="Ray CSV: t_s,tx,rx,toa_s,gain_db,phase_rad.")
    p.add_argument("--nodes", required=True, help="Nodes JSON (list, or object with nodes and radio).")
    p.add_argument("--ts", type=float, default=None, help="Channel sampling interval (s); default from the rays.")
    p.add_argument("--update-interval", type=float, default=1e-3, help="Emulator frame period (s).")
    p.add_argument("--clusterer", choices=sorted(CLUSTERERS), default="kmeans", help="Tap clustering strategy.")
    p.add_argument("--name", default=None, help="Scenario name.")
    p.add_argument("-o", "--output", required=True, help="Bundle file (.twsc).")
    p.set_defaults(handler=cmd_scenario_build)
    p = scen.add_parser("inspect", help="Print a bundle summary.")
    p.add_argument("bundle")
    p.set_defaults(handler=cmd_scenario_inspect)
    p = scen.add_parser("heatmap", help="Path-loss matrix at one frame.")
    p.add_argument("bundle")
    p.add_argument("--frame", type=int, default=0)
    p.add_argument("-o", "--output", default=None, help="CSV matrix.")
    p.set_defaults(handler=cmd_scenario_heatmap)

    snd = sub.add_parser("sound", help="Channel sounding.").add_subparsers(dest="action", required=True)
    p = snd.add_parser("run", help="Sound one link.")
    _add_sounding_args(p)
    p.add_argument("--tx", type=int, required=True)
    p.add_argument("--rx", type=int, required=True)
    p.add_argument("--capture", default=None, help="Also save the received samples (.iq32 + sidecar).")
    p.set_defaults(handler=cmd_sound_run)
    p = snd.add_parser("analyze", help="Estimate the channel from a recorded capture.")
    p.add_argument("--capture", required=True, help="Sample file (.iq32); the sidecar gives the rate.")
    p.add_argument("--code", default="glfsr:8:0:1", help="Code spec the capture was sounded with.")
    p.add_argument("--rate", type=float, default=None, help="Sample rate (S/s) when the capture has no sidecar.")
    p.add_argument("--chip-rate", type=float, default=None, help="Chip rate (chips/s); default = sample rate.")
    p.add_argument("--threshold", type=float, default=12.0, help="Tap threshold above the noise median (dB).")
    p.add_argument("--mode", choices=CORRELATION_MODES, default="zero-pad", help="Correlation boundary handling.")
    p.add_argument("--equalize", action="store_true", help="Remove the m-sequence off-peak floor.")
    p.add_argument("--tx", type=int, default=0, help="Transmitter id for the report.")
    p.add_argument("--rx", type=int, default=0, help="Receiver id for the report.")
    p.add_argument("-o", "--output", default=None, help="Output file.")
    p.set_defaults(handler=cmd_sound_analyze)
    p = snd.add_parser("matrix", help="Sound every ordered pair.")
    _add_sounding_args(p)
    p.add_argument("--nodes", type=int, nargs="*", default=None, help="Subset of node ids.")
    p.set_defaults(handler=cmd_sound_matrix)

    p = sub.add_parser("jam", help="Jamming demo: per-second SINR.")
    p.add_argument("--kind", choices=("narrowband", "wideband"), default="wideband")
    p.add_argument("--mobility", choices=("static", "mobile"), default="static")
    p.add_argument("--on", type=float, default=20.0, help="Jammer start (s).")
    p.add_argument("--off", type=float, default=40.0, help="Jammer stop (s).")
    p.add_argument("--total", type=int, default=60, help="Run length (s).")
    p.add_argument("--rate", type=float, default=20e6, help="Sample rate (S/s).")
    p.add_argument("--snapshot", type=float, default=2e-3, help="Emulated time per second (s).")
    p.add_argument("--power", type=float, default=40.0, help="Wi-Fi transmit power (dB).")
    p.add_argument("--jammer-power", type=float, default=40.0, help="Jammer power (dB).")
    p.add_argument("--bandwidth", type=float, default=None, help="Jammer bandwidth (Hz); default per kind.")
    p.add_argument("-o", "--output", default=None, help="SINR CSV.")
    p.set_defaults(handler=cmd_jam)

    p = sub.add_parser("compare", help="Normalized cross-correlation similarity.")
    p.add_argument("--real", required=True, help="CSV t_s,value.")
    p.add_argument("--twin", required=True, help="CSV t_s,value.")
    p.add_argument("--max-lag", type=int, default=DEFAULT_MAX_LAG)
    p.add_argument("-o", "--output", default=None, help="JSON report.")
    p.set_defaults(handler=cmd_compare)

    p = sub.add_parser("reproduce", help="Run a validation experiment.")
    p.add_argument("experiment", choices=sorted(REPRODUCERS))
    p.add_argument("-o", "--output", default=None, help="JSON report.")
    p.set_defaults(handler=cmd_reproduce)
    return parser


def _all_parsers(parser: argparse.ArgumentParser) -> List[argparse.ArgumentParser]:
    found = [parser]
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            for child in action.choices.values():
                found.extend(_all_parsers(child))
    return found


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    """Parse twice: the --config file supplies defaults that explicit flags override."""
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", default=None)
    known, _ = pre.parse_known_args(argv)
    if known.config:
        values = read_config_file(known.config)
        for p in _all_parsers(parser):
            dests = {a.dest for a in p._actions}
            p.set_defaults(**{k.replace("-", "_"): v for k, v in values.items() if k.replace("-", "_") in dests})
    args = parser.parse_args(argv)
    args.command_line = " ".join(filter(None, [args.command, getattr(args, "action", None)]))
    return args


def _error(exc: BaseException) -> Dict[str, Any]:
    err = {"error": type(exc).__name__, "message": str(exc)}
    row = getattr(exc, "row", None)
    if row is not None:
        err["row"] = row
    return err


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = parse_args(argv)
    except (ValidationError, FileNotFoundError) as e:
        print(json.dumps(_error(e)), file=sys.stderr)
        return EXIT_INVALID
    except SystemExit as e:
        return int(e.code or 0)

    try:
        config = resolve_config(
            {"seed": args.seed, "threads": args.threads, "log_level": args.log_level},
            args.config,
        )
        configure_logging(config["log_level"])
        config.update({k: v for k, v in vars(args).items()
                       if k not in ("handler", "config") and k not in Settings._fields})
        return args.handler(_Context(args, config))
    except (ValidationError, FileNotFoundError) as e:
        logger.error("%s: %s", type(e).__name__, e)
        print(json.dumps(_error(e)), file=sys.stderr)
        return EXIT_INVALID
    except Exception as e:  # noqa: BLE001
        logger.exception("Internal error")
        print(json.dumps(_error(e)), file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
