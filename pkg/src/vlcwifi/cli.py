"""Command-line harness: run a sweep and write figure-ready CSV."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .engine import ScenarioError, run_scenario
from .experiments import EXPERIMENTS, ExperimentError, ExperimentSpec, crossover, emit_plotdata, parse_sweep, run_experiment
from .scenario import ScenarioConfig, ScenarioConfigError, build_flows, build_topology, load_scenario
from .topology import ALL_MODES, TopologyError


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:
        # one line, no usage dump
        self.exit(2, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="vlcwifi", description=__doc__)
    p.add_argument("--experiment", choices=EXPERIMENTS, help="sweep to run")
    p.add_argument("--modes", default=",".join(m.value for m in ALL_MODES),
                   help="comma-separated subset of wifi_only,hybrid,aggregated")
    p.add_argument("--sweep", help="start:stop:step (inclusive); defaults depend on the experiment")
    p.add_argument("--seeds", type=int, default=100, help="runs averaged per point (default 100)")
    p.add_argument("--config", type=Path, help="JSON scenario used as the base configuration")
    p.add_argument("--out", type=Path, default=Path("results"), help="output directory")
    p.add_argument("--workers", type=int, default=1, help="worker processes")
    p.add_argument("--scenario", type=Path, help="run one scenario file and write its result and trace")
    return p


def _run_single(path: Path, out: Path) -> str:
    cfg = load_scenario(path)
    result = run_scenario(build_topology(cfg), build_flows(cfg), cfg.seed)
    out.mkdir(parents=True, exist_ok=True)
    stem = path.stem
    (out / f"{stem}.result.json").write_text(result.to_json() + "\n")
    (out / f"{stem}.trace.txt").write_text(result.trace_text())
    lines = []
    for f in result.flows:
        value = f"{f.page_load_time_s:.3f} s" if f.kind == "page_load" and f.page_load_time_s is not None else f"{f.throughput_mbps:.2f} Mbps"
        lines.append(f"{f.name} [{f.mode}] {value}")
    return "\n".join(lines)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.scenario is not None:
            print(_run_single(args.scenario, args.out))
            return 0
        if args.experiment is None:
            raise ExperimentError("one of --experiment or --scenario is required")
        base = load_scenario(args.config) if args.config else ScenarioConfig()
        modes = tuple(m.strip() for m in args.modes.split(",") if m.strip())
        spec = ExperimentSpec(
            args.experiment,
            modes=modes,
            sweep=parse_sweep(args.sweep) if args.sweep else None,
            seeds=args.seeds,
            base=base,
            workers=args.workers,
        )
        table = run_experiment(spec)
        path = emit_plotdata(table, args.out / f"{spec.experiment}.csv")
        (args.out / f"{spec.experiment}_long.csv").write_text(table.to_long_csv())
        print(f"wrote {path}")
        if spec.experiment == "distance" and {"wifi_only", "hybrid"} <= set(spec.series()):
            x = crossover(table)
            print("crossover: none in range" if x is None else f"crossover: {x:.2f} m")
    except (ExperimentError, ScenarioConfigError, ScenarioError, TopologyError, OSError, ValueError) as exc:
        print(f"vlcwifi: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
