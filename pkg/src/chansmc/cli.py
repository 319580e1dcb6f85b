"""Command-line entry point: ``chansmc {validate,compile,trace,verify} MANIFEST``.

Exit codes: 0 success, 1 usage error or missing file, 2 invalid model or
properties, 3 model error during simulation, 4 sample budget exhausted.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from chansmc.channel_system import cs_step
from chansmc.errors import ArgumentError, ChansmcError
from chansmc.kernel import Rng, value_to_json
from chansmc.manifest import MissingFileError, build, diagnose, load_manifest
from chansmc.model_io import dump_model
from chansmc.program_graph import Terminal
from chansmc.scxml.trace import ScxmlTraceExporter, channel_record
from chansmc.smc import SmcConfig, estimate

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INVALID = 2
EXIT_RUNTIME = 3
EXIT_BUDGET = 4

log = logging.getLogger("chansmc")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _seed(args, manifest) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("SMC_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"SMC_SEED must be an integer, got {env!r}") from None
    return manifest.seed


def _load(args):
    try:
        return load_manifest(args.manifest)
    except MissingFileError:
        raise
    except ChansmcError as exc:
        raise UsageError(str(exc)) from None


# -- commands --------------------------------------------------------------------


def cmd_validate(args, out) -> int:
    manifest = _load(args)
    diags = diagnose(manifest)
    if args.json:
        out.write(_dumps({"ok": not diags, "diagnostics": diags}))
    elif not diags:
        out.write(f"{manifest.path}: ok\n")
    else:
        for d in diags:
            where = d["source"] or d["file"] or ""
            extra = f" [{d['element']}: {d['restriction']}]" if d["restriction"] else ""
            out.write(f"{where}: error: {d['message']}{extra}\n")
    if not diags:
        return EXIT_OK
    if any(d["kind"] == MissingFileError.__name__ for d in diags):
        return EXIT_USAGE
    return EXIT_INVALID


def _summary(cs) -> dict:
    return {
        "quantum": str(cs.quantum),
        "horizon": cs.horizon,
        "program_graphs": [
            {
                "name": pg.name,
                "locations": len(pg.locations),
                "transitions": len(pg.transitions),
                "variables": len(pg.variables),
                "clocks": len(pg.clocks),
            }
            for pg in cs.pgs
        ],
        "channels": [
            {"id": c.id, "capacity": c.capacity, "senders": sorted(c.senders), "receiver": c.receiver}
            for c in cs.channels
        ],
        "propositions": sorted(cs.propositions),
    }


def cmd_compile(args, out) -> int:
    loaded = build(_load(args), need_properties=False)
    if args.emit_model:
        dump_model(loaded.cs, args.emit_model)
    summary = _summary(loaded.cs)
    if args.json:
        out.write(_dumps(summary))
    else:
        for pg in summary["program_graphs"]:
            out.write(
                f"{pg['name']}: {pg['locations']} locations, {pg['transitions']} transitions, "
                f"{pg['variables']} variables, {pg['clocks']} clocks\n"
            )
        for c in summary["channels"]:
            out.write(f"channel {c['id']}: capacity {c['capacity']}, {','.join(c['senders']) or '-'} -> {c['receiver']}\n")
    return EXIT_OK


def _trace_lines(cs, seed, index, max_steps):
    """JSON records of execution ``index``; the same stream a trial with that index uses."""
    rng = Rng(seed).split(index)
    scxml = cs.metadata.get("frontend") == "scxml"
    exporter = ScxmlTraceExporter(cs.metadata) if scxml else None
    records = []
    s = cs.sample_initial_state(rng)
    now = 0
    end = {"end": "length-cap"}
    try:
        for _ in range(max_steps):
            r = cs_step(cs, s, now, rng)
            if isinstance(r, Terminal):
                end = {"end": r.reason}
                break
            s, event, now = r
            if exporter is not None:
                records.extend(exporter.feed(now, event))
            elif event is not None:
                records.append(channel_record(now, event))
    except ChansmcError as exc:
        end = {"error": str(exc)}
    if exporter is not None:
        records.extend(exporter.flush())
    end["t"] = value_to_json(now)
    records.append(end)
    return records, "error" in end


def cmd_trace(args, out) -> int:
    manifest = _load(args)
    if args.count < 0:
        raise UsageError("--count must be non-negative")
    loaded = build(manifest, need_properties=False)
    seed = _seed(args, manifest)
    outdir = Path(args.out)
    if args.count:
        outdir.mkdir(parents=True, exist_ok=True)
    failed = False
    for i in range(args.count):
        records, err = _trace_lines(loaded.cs, seed, i, args.max_steps)
        failed |= err
        path = outdir / f"trace_{i:04d}.jsonl"
        path.write_text("".join(json.dumps(r, sort_keys=True) + "\n" for r in records), encoding="utf-8")
        out.write(f"{path}\n")
    return EXIT_RUNTIME if failed else EXIT_OK


def _smc_config(args, manifest) -> SmcConfig:
    smc = manifest.smc

    def pick(flag, key, default):
        v = getattr(args, flag)
        return v if v is not None else smc.get(key, default)

    try:
        return SmcConfig(
            epsilon=pick("epsilon", "epsilon", "0.05"),
            delta=pick("delta", "delta", "0.05"),
            max_samples=pick("max_samples", "max_samples", 100_000),
            max_trace_length=pick("max_steps", "max_steps", 10_000),
            seed=_seed(args, manifest),
            workers=pick("workers", "workers", 1),
        )
    except ArgumentError as exc:
        raise UsageError(str(exc)) from None


def _table(report) -> str:
    lines = [
        f"seed {report.seed}, epsilon {report.epsilon}, delta {report.delta}, trials {report.trials}",
        f"{'property':<24} {'n':>8} {'k':>8} {'estimate':>9} {'unknown':>8}",
    ]
    for p in report.properties:
        est = "-" if p.estimate is None else f"{p.estimate:.4f}"
        lines.append(f"{p.name:<24} {p.n:>8} {p.k:>8} {est:>9} {p.inconclusive:>8}")
    if report.inconclusive_flagged:
        lines.append("warning: more than 20% of trials were inconclusive")
    if report.budget_exhausted:
        lines.append("warning: sample budget exhausted before the bound was met")
    return "\n".join(lines) + "\n"


def cmd_verify(args, out) -> int:
    manifest = _load(args)
    cfg = _smc_config(args, manifest)
    loaded = build(manifest)
    if args.emit_model:
        dump_model(loaded.cs, args.emit_model)
    try:
        report = estimate(loaded.cs, loaded.properties.properties, cfg)
    except ChansmcError as exc:
        log.error("simulation failed: %s", exc)
        return EXIT_RUNTIME
    body = _dumps(report.to_json(timing=args.timing))
    if args.output:
        Path(args.output).write_text(body, encoding="utf-8")
    out.write(body if args.json else _table(report))
    return EXIT_BUDGET if report.budget_exhausted else EXIT_OK


# -- entry point --------------------------------------------------------------------


def _positive(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be positive: {v}")
    return v


def make_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="chansmc", description="Statistical model checking of SCXML models.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    v = sub.add_parser("validate", help="check automata and properties")
    v.add_argument("manifest")
    v.add_argument("--json", action="store_true", help="machine-readable diagnostics")

    c = sub.add_parser("compile", help="compile and summarize the channel system")
    c.add_argument("manifest")
    c.add_argument("--json", action="store_true")
    c.add_argument("--emit-model", metavar="PATH", help="write the compiled model as JSON")

    t = sub.add_parser("trace", help="export simulated traces as JSON lines")
    t.add_argument("manifest")
    t.add_argument("--seed", type=int)
    t.add_argument("--count", type=int, default=1)
    t.add_argument("--out", default="traces", help="output directory")
    t.add_argument("--max-steps", type=_positive, default=10_000)

    r = sub.add_parser("verify", help="estimate property probabilities")
    r.add_argument("manifest")
    r.add_argument("--epsilon")
    r.add_argument("--delta")
    r.add_argument("--seed", type=int)
    r.add_argument("--workers", type=_positive)
    r.add_argument("--max-samples", type=_positive)
    r.add_argument("--max-steps", type=_positive)
    r.add_argument("--json", action="store_true")
    r.add_argument("--output", metavar="PATH", help="also write the JSON report here")
    r.add_argument("--emit-model", metavar="PATH")
    r.add_argument("--timing", action="store_true", help="include wall time in the JSON report")
    return p


_COMMANDS = {"validate": cmd_validate, "compile": cmd_compile, "trace": cmd_trace, "verify": cmd_verify}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    logging.basicConfig(level=logging.WARNING, format="chansmc: %(message)s")
    try:
        args = make_parser().parse_args(argv)
        return _COMMANDS[args.command](args, out)
    except UsageError as exc:
        log.error("usage: %s", exc)
        return EXIT_USAGE
    except MissingFileError as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    except ChansmcError as exc:
        log.error("%s", exc)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
