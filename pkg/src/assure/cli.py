"""``assure`` command line.

Exit status: 0 when the mission succeeds or the clock monitor completes,
2 when assurance fails (abort, alert, exhausted plan or a no-fly entry),
1 for bad configs and bad arguments.
"""
from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from pathlib import Path
from typing import Sequence

from . import clock, drone
from .config import ClockScenario, ConfigError, load
from .grid import write_pgm

log = logging.getLogger("assure")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_ASSURANCE = 2

_LEVELS = {"off": logging.CRITICAL + 1, "info": logging.INFO, "debug": logging.DEBUG}
_SIGNAL_TEXT = {"MoreData": "More Data"}
_COLUMNS = ("Time", "Resources", "Probability", "CV Agent", "Signal")


def _configure_logging() -> None:
    level = os.environ.get("ASSURE_LOG", "off").lower()
    logging.basicConfig(level=_LEVELS.get(level, _LEVELS["off"]), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    if level not in _LEVELS:
        log.warning("unknown ASSURE_LOG=%r, logging disabled", level)


def render_decision_table(trace) -> str:
    """Time | Resources | Probability | CV Agent | Signal, one row per check."""
    rows = trace.rows if isinstance(trace, drone.MissionTrace) else list(trace)
    if not rows:
        raise ValueError("cannot render an empty trace")
    body = []
    for r in rows:
        prob = "n/a" if math.isnan(r.probability) else f"{100.0 * r.probability:.1f}%"
        body.append((str(r.t), str(r.resources), prob, r.agent,
                     _SIGNAL_TEXT.get(r.signal, r.signal)))
    widths = [max(len(c), *(len(b[i]) for b in body)) for i, c in enumerate(_COLUMNS)]

    def line(cells):
        return " | ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()

    sep = "-+-".join("-" * w for w in widths)
    return "\n".join([line(_COLUMNS), sep, *(line(b) for b in body)]) + "\n"


def _drone_exit(trace: drone.MissionTrace) -> int:
    return EXIT_OK if trace.success else EXIT_ASSURANCE


def _write_heatmaps(out: Path, trace: drone.MissionTrace) -> int:
    n_files = 0
    for step in trace.steps:
        write_pgm(out / f"belief_t{step.t}.pgm", step.belief)
        n_files += 1
        for n, f in enumerate(step.forecast):
            write_pgm(out / f"forecast_t{step.t}_n{n}.pgm", f)
            n_files += 1
    return n_files


def run_drone(cfg: drone.WorldConfig, seed: int, out: Path, heatmaps: bool) -> int:
    trace = drone.run_mission(cfg, seed)
    (out / "trace.csv").write_text(trace.to_csv())
    summary = render_decision_table(trace) + (
        f"\noutcome: {trace.outcome}\nviolated: {str(trace.violated).lower()}\n"
        f"final_truth: {trace.final_truth[0]:.3f} {trace.final_truth[1]:.3f}\n"
    )
    (out / "summary.txt").write_text(summary)
    if heatmaps:
        log.info("wrote %d heat-maps", _write_heatmaps(out, trace))
    log.info("drone mission seed=%d outcome=%s violated=%s", seed, trace.outcome,
             trace.violated)
    return _drone_exit(trace)


def run_clock(cfg: ClockScenario, seed: int, out: Path) -> int:
    trace = clock.run_clock_monitor(
        cfg.params, cfg.spec, cfg.duration, cfg.window, seed, tick=cfg.tick,
        warmup_reads=cfg.warmup_reads, warmup_interval=cfg.warmup_interval,
    )
    (out / "trace.csv").write_text(trace.to_csv())
    reads = trace.reads()
    last = reads[-1] if reads else None
    lines = [f"outcome: {trace.outcome}", f"reads: {len(reads)}"]
    if last is not None and last.slope_est is not None:
        lines += [f"slope_est: {last.slope_est:.6f}", f"sigma2_est: {last.sigma2_est:.6g}"]
    (out / "summary.txt").write_text("\n".join(lines) + "\n")
    log.info("clock monitor seed=%d outcome=%s reads=%d", seed, trace.outcome, len(reads))
    return EXIT_OK if trace.outcome == "completed" else EXIT_ASSURANCE


def cmd_run(args) -> int:
    cfg = load(args.config)
    section = cfg.drone if args.scenario == "drone" else cfg.clock
    if section is None:
        raise ConfigError(f"field {args.scenario}: section missing from {args.config}")
    seed = args.seed if args.seed is not None else cfg.seed
    if seed is None:
        raise ConfigError("field seed: not in config and --seed not given")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.scenario == "drone":
        return run_drone(section, seed, out, args.heatmaps)
    return run_clock(section, seed, out)


def cmd_table(args) -> int:
    try:
        rows = drone.rows_from_csv(Path(args.trace).read_text())
        sys.stdout.write(render_decision_table(rows))
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"cannot render {args.trace}: {exc}") from None
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    # usage errors share the config-error status; 2 is reserved for assurance failures
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _seed(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="assure", description="Run assurance-monitor scenarios.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    r = sub.add_parser("run", help="run a scenario and write its traces")
    r.add_argument("--scenario", choices=("drone", "clock"), required=True)
    r.add_argument("--config", required=True, help="scenario JSON file")
    r.add_argument("--seed", type=_seed, help="defaults to the config's seed")
    r.add_argument("--out", required=True, help="output directory")
    r.add_argument("--heatmaps", action="store_true", help="write PGM heat-maps (drone)")
    r.set_defaults(func=cmd_run)
    t = sub.add_parser("table", help="print the decision table of a drone trace CSV")
    t.add_argument("--trace", required=True)
    t.set_defaults(func=cmd_table)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"assure: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
