"""Command-line front end: simulate, sweep, compare, gen."""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import sys
from dataclasses import fields

from .harness import SweepSpec, compare, run_point, run_sweep
from .metrics import RunReport, reports_to_csv
from .pipeline import POLICIES, SimConfig
from .trace import REFERENCE_TRACE, SyntheticSpec, TraceError, TraceSource, describe_trace, generate_synthetic, write_csv_trace

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_CONSERVATION = 0, 1, 2, 3

log = logging.getLogger("primeflow")

# option name -> (type, default); None defaults fall back to SimConfig / reference trace
_TUNABLES = {
    "memory_bytes": (int, SimConfig.memory_bytes),
    "d": (int, SimConfig.d),
    "seed": (int, SimConfig.seed),
    "tfr_bytes": (int, SimConfig.tfr_bytes),
    "buffer_capacity": (int, SimConfig.buffer_capacity),
    "aggre_slots": (int, SimConfig.aggre_slots),
    "bloom_bits": (int, SimConfig.bloom_bits),
    "bloom_hashes": (int, SimConfig.bloom_hashes),
    "policy": (str, SimConfig.policy),
    "trace": (str, None),
    "limit": (int, None),
    "on_disorder": (str, "reject"),
    "format": (str, "json"),
    "flows": (int, REFERENCE_TRACE.flow_count),
    "zipf": (float, REFERENCE_TRACE.zipf_exponent),
    "packets": (int, REFERENCE_TRACE.packet_count),
    "trace_seed": (int, REFERENCE_TRACE.seed),
    "locality": (float, REFERENCE_TRACE.locality),
    "start": (int, SweepSpec.start),
    "stop": (int, SweepSpec.stop),
    "step": (int, SweepSpec.step),
    "policies": (str, ",".join(POLICIES)),
    "jobs": (int, 1),
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _opt(p, name, help, **kw):
    p.add_argument("--" + name.replace("_", "-"), dest=name, default=None, help=help, **kw)


def _add_common(p, trace=True):
    _opt(p, "config", "key = value config file ([primeflow] section); CLI flags win")
    _opt(p, "memory_bytes", "fast-memory budget in bytes (decimal MB)", type=int)
    _opt(p, "d", "hash functions per packet in the d-way table", type=int)
    _opt(p, "seed", "master seed for every hash function", type=int)
    _opt(p, "tfr_bytes", "bytes per TFR when sizing the table", type=int)
    _opt(p, "buffer_capacity", "TFRs per export buffer batch", type=int)
    _opt(p, "aggre_slots", "slots in the DRAM aggregation table", type=int)
    _opt(p, "bloom_bits", "bloom filter size in bits", type=int)
    _opt(p, "bloom_hashes", "bloom filter hash count", type=int)
    _opt(p, "format", "output format", choices=("json", "csv"))
    _opt(p, "output", "write results here instead of stdout")
    p.add_argument("--no-timestamp", dest="no_timestamp", action="store_true",
                   help="leave the report ts field empty (for byte-identical reruns)")
    if trace:
        _opt(p, "trace", "CSV or pcap trace file; omit to use a synthetic trace")
        _opt(p, "limit", "replay at most this many packets", type=int)
        _opt(p, "on_disorder", "non-monotonic timestamps", choices=("reject", "clamp"))
        _add_synthetic(p)


def _add_synthetic(p):
    _opt(p, "flows", "synthetic: flow population", type=int)
    _opt(p, "zipf", "synthetic: Zipf exponent of flow popularity", type=float)
    _opt(p, "packets", "synthetic: packet count", type=int)
    _opt(p, "trace_seed", "synthetic: generator seed", type=int)
    _opt(p, "locality", "synthetic: per-flow time spread as a fraction of the trace (0 = i.i.d.)", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="primeflow", description="Two-tier per-flow measurement simulator")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("simulate", help="run one trace through the full pipeline")
    _add_common(p)
    _opt(p, "policy", "fast-memory policy", choices=POLICIES)

    p = sub.add_parser("compare", help="run both policies and report the difference")
    _add_common(p)

    p = sub.add_parser("sweep", help="memory sweep, one CSV row per point and policy")
    _add_common(p)
    _opt(p, "start", "first memory point in bytes", type=int)
    _opt(p, "stop", "last memory point in bytes (inclusive)", type=int)
    _opt(p, "step", "memory step in bytes", type=int)
    _opt(p, "policies", "comma-separated subset of " + ",".join(POLICIES))
    _opt(p, "jobs", "worker processes", type=int)

    p = sub.add_parser("gen", help="write a synthetic trace as canonical CSV")
    _opt(p, "config", "key = value config file ([primeflow] section)")
    _add_synthetic(p)
    _opt(p, "single_target", "report achieved single-packet fraction against this target", type=float)
    p.add_argument("out", help="output CSV path")
    return parser


def _resolve(args) -> dict:
    """Merge defaults < config file < explicit CLI flags."""
    values = {name: default for name, (_, default) in _TUNABLES.items()}
    if args.command == "sweep":
        values["format"] = "csv"
    if args.config:
        cp = configparser.ConfigParser()
        try:
            with open(args.config, encoding="utf-8") as fh:
                cp.read_file(fh)
        except OSError as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        except configparser.Error as exc:
            raise UsageError(f"bad config {args.config}: {exc}") from None
        section = cp["primeflow"] if cp.has_section("primeflow") else cp.defaults()
        for raw, text in section.items():
            name = raw.replace("-", "_")
            if name not in _TUNABLES:
                raise UsageError(f"unknown config key {raw!r}")
            typ = _TUNABLES[name][0]
            try:
                values[name] = typ(text)
            except ValueError:
                raise UsageError(f"config key {raw!r}: bad value {text!r}") from None
    for name in _TUNABLES:
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    return values


def _sim_config(v: dict) -> SimConfig:
    names = {f.name for f in fields(SimConfig)}
    return SimConfig(**{k: v[k] for k in names})


def _source(v: dict) -> TraceSource:
    if v["trace"]:
        return TraceSource.from_path(v["trace"], limit=v["limit"], on_disorder=v["on_disorder"])
    spec = SyntheticSpec(v["flows"], v["zipf"], v["packets"], v["trace_seed"], v["locality"])
    return TraceSource("synthetic", synthetic=spec, limit=v["limit"])


def _emit(args, text: str) -> None:
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
        sys.stdout.flush()


def _cmd_simulate(args, v) -> int:
    result = run_point(_source(v), _sim_config(v), timestamp=not args.no_timestamp)
    if v["format"] == "csv":
        _emit(args, reports_to_csv([result.report]))
    else:
        _emit(args, result.report.to_json() + "\n")
    if not result.conservation:
        log.error(result.conservation.describe())
        return EXIT_CONSERVATION
    return EXIT_OK


def _cmd_compare(args, v) -> int:
    cmp = compare(_source(v), _sim_config(v), timestamp=not args.no_timestamp)
    if v["format"] == "csv":
        _emit(args, reports_to_csv([cmp.prime.report, cmp.turboflow.report]))
        red = cmp.eviction_reduction
        print(f"eviction rate reduction: {red:.2%}" if red is not None else "eviction rate reduction: n/a",
              file=sys.stderr)
    else:
        doc = {
            "prime": cmp.prime.report.to_dict(),
            "turboflow": cmp.turboflow.report.to_dict(),
            "delta": cmp.summary(),
        }
        _emit(args, json.dumps(doc, indent=2) + "\n")
    ok = cmp.prime.conservation and cmp.turboflow.conservation
    return EXIT_OK if ok else EXIT_CONSERVATION


def _cmd_sweep(args, v) -> int:
    spec = SweepSpec(v["start"], v["stop"], v["step"], tuple(p.strip() for p in v["policies"].split(",") if p.strip()))
    out = open(args.output, "w", encoding="utf-8", newline="") if args.output else sys.stdout
    try:
        if v["format"] == "csv":
            out.write(",".join(RunReport.field_names()) + "\n")
            out.flush()
        for result in run_sweep(spec, _source(v), _sim_config(v), jobs=v["jobs"], timestamp=not args.no_timestamp):
            if v["format"] == "json":
                out.write(result.report.to_json() + "\n")
            else:
                out.write(reports_to_csv([result.report], header=False))
            out.flush()
            if not result.conservation:
                log.error("%s @ %d B: %s", result.report.policy, result.report.memory_bytes,
                          result.conservation.describe())
                return EXIT_CONSERVATION
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def _cmd_gen(args, v) -> int:
    spec = SyntheticSpec(v["flows"], v["zipf"], v["packets"], v["trace_seed"], v["locality"],
                         single_packet_fraction_target=args.single_target)
    trace = generate_synthetic(spec)
    write_csv_trace(args.out, trace)
    stats = describe_trace(trace)
    line = f"packets={stats.packets} distinct_flows={stats.distinct_flows} single_packet_fraction={stats.single_packet_fraction:.4f}"
    if args.single_target is not None:
        line += f" target={args.single_target:.4f}"
    print(line)
    return EXIT_OK


_COMMANDS = {"simulate": _cmd_simulate, "compare": _cmd_compare, "sweep": _cmd_sweep, "gen": _cmd_gen}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        v = _resolve(args)
        return _COMMANDS[args.command](args, v)
    except UsageError as exc:
        print(f"primeflow: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TraceError, OSError) as exc:
        print(f"primeflow: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"primeflow: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
