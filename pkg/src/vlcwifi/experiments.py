"""Parameter sweeps over scenarios, averaged over seeds, written as CSV."""

from __future__ import annotations

import csv
import io
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

from .channels import BlockingSchedule, vlc_throughput
from .engine import PageSpec, run_scenario
from .scenario import ScenarioConfig, build_flows, build_topology
from .topology import ALL_MODES, Mode

EXPERIMENTS = ("contenders", "load_time", "distance", "blocking", "vlc_curve")

# swept parameter column name and default sweep per experiment
PARAM_NAMES = {
    "contenders": "n",
    "load_time": "n",
    "distance": "distance_m",
    "blocking": "blocked_s_per_min",
    "vlc_curve": "distance_m",
}
DEFAULT_SWEEPS = {
    "contenders": (1, 6, 1),
    "load_time": (10, 10, 1),
    "distance": (2.0, 5.0, 0.1),
    "blocking": (0, 30, 5),
    "vlc_curve": (2.0, 5.0, 0.25),
}
# a minute-long flow sees every blocking phase exactly once
BLOCKING_DURATION_S = 60.0
# contenders keep downloading while the page loads
PAGE_BACKGROUND_S = 30.0


class ExperimentError(ValueError):
    pass


def parse_sweep(text: str) -> tuple[float, float, float]:
    parts = text.split(":")
    if len(parts) != 3:
        raise ExperimentError(f"sweep: expected start:stop:step, got {text!r}")
    try:
        start, stop, step = (float(p) for p in parts)
    except ValueError:
        raise ExperimentError(f"sweep: non-numeric value in {text!r}") from None
    return start, stop, step


def sweep_values(start: float, stop: float, step: float) -> list[float]:
    if step <= 0:
        raise ExperimentError("sweep: step must be positive")
    if stop < start:
        raise ExperimentError("sweep: stop is below start, the sweep is empty")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + i * step, 10) for i in range(count)]


@dataclass(frozen=True)
class ExperimentSpec:
    experiment: str
    modes: tuple[Mode, ...] = ALL_MODES
    sweep: tuple[float, float, float] | None = None
    seeds: int = 100
    base: ScenarioConfig = field(default_factory=ScenarioConfig)
    workers: int = 1

    def __post_init__(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ExperimentError(f"experiment: unknown {self.experiment!r}; choose from {', '.join(EXPERIMENTS)}")
        try:
            object.__setattr__(self, "modes", tuple(Mode(m) for m in self.modes))
        except ValueError as exc:
            raise ExperimentError(f"modes: {exc}") from None
        if not self.modes and self.experiment != "vlc_curve":
            raise ExperimentError("modes: at least one mode is required")
        if self.sweep is None:
            object.__setattr__(self, "sweep", DEFAULT_SWEEPS[self.experiment])
        self.points()
        if self.seeds < 1:
            raise ExperimentError("seeds: must be at least 1")
        if self.workers < 1:
            raise ExperimentError("workers: must be at least 1")
        if self.experiment in ("distance", "vlc_curve") and self.points()[0] < 0:
            raise ExperimentError("sweep: distances must be non-negative")
        if self.experiment in ("contenders", "load_time") and self.points()[0] < 1:
            raise ExperimentError("sweep: contender counts start at 1")
        if self.experiment == "blocking" and not (0 <= self.points()[0] and self.points()[-1] <= 60):
            raise ExperimentError("sweep: blocking lies in 0..60 s per minute")

    @property
    def param_name(self) -> str:
        return PARAM_NAMES[self.experiment]

    def points(self) -> list[float]:
        return sweep_values(*self.sweep)

    def series(self) -> tuple[str, ...]:
        if self.experiment == "vlc_curve":
            return ("vlc",)
        return tuple(m.value for m in self.modes)

    def scenario(self, mode: Mode, x: float, seed: int) -> ScenarioConfig:
        cfg = replace(self.base, mode=mode, seed=seed)
        if self.experiment == "contenders":
            cfg = replace(cfg, contenders=int(x))
        elif self.experiment == "load_time":
            cfg = replace(cfg, contenders=int(x), page=cfg.page or PageSpec(), duration_s=PAGE_BACKGROUND_S)
        elif self.experiment == "distance":
            cfg = replace(cfg, vlc=cfg.vlc.at(x))
        elif self.experiment == "blocking":
            cfg = replace(
                cfg,
                blocking=BlockingSchedule(x, cfg.blocking.pattern, cfg.blocking.offset_s, cfg.blocking.period_s),
                params=replace(cfg.params, randomize_block_offset=True),
                duration_s=BLOCKING_DURATION_S,
            )
        return cfg


def measure(cfg: ScenarioConfig, metric: str) -> float:
    """One run: the client flow's throughput (Mbps) or page-load time (s)."""
    result = run_scenario(build_topology(cfg), build_flows(cfg), cfg.seed)
    flow = result.flow("client")
    if metric == "load_time":
        return flow.page_load_time_s if flow.page_load_time_s is not None else math.nan
    return flow.throughput_mbps


def _job(args: tuple[ScenarioConfig, str]) -> float:
    return measure(*args)


@dataclass(frozen=True)
class Row:
    experiment: str
    series: str
    x: float
    mean: float
    std: float
    runs: int


@dataclass
class ResultTable:
    experiment: str
    param_name: str
    series: tuple[str, ...]
    rows: list[Row]

    def value(self, series: str, x: float) -> Row:
        for r in self.rows:
            if r.series == series and abs(r.x - x) < 1e-9:
                return r
        raise KeyError((series, x))

    def xs(self) -> list[float]:
        seen: list[float] = []
        for r in self.rows:
            if r.x not in seen:
                seen.append(r.x)
        return seen

    def means(self, series: str) -> list[float]:
        return [self.value(series, x).mean for x in self.xs()]

    def to_csv(self) -> str:
        """Wide layout: one row per sweep point, mean and std per series."""
        if not self.rows:
            raise ExperimentError("table is empty")
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        header = [self.param_name]
        for s in self.series:
            header += [f"{s}_mean", f"{s}_std"]
        w.writerow(header)
        for x in self.xs():
            line = [_fmt(x)]
            for s in self.series:
                r = self.value(s, x)
                line += [_fmt(r.mean), _fmt(r.std)]
            w.writerow(line)
        return buf.getvalue()

    def to_long_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        unit = "load_time_s" if self.experiment == "load_time" else "mbps"
        w.writerow(["scenario", "mode", self.param_name, f"mean_{unit}", f"std_{unit}", "runs"])
        for r in self.rows:
            w.writerow([f"{r.experiment}-{r.series}-{_fmt(r.x)}", r.series, _fmt(r.x), _fmt(r.mean), _fmt(r.std), r.runs])
        return buf.getvalue()

    def to_gnuplot(self) -> str:
        header = self.to_csv().splitlines()[0].split(",")
        lines = ["# " + " ".join(header)]
        for row in self.to_csv().splitlines()[1:]:
            lines.append(" ".join(row.split(",")))
        return "\n".join(lines) + "\n"


def _fmt(v: float) -> str:
    if math.isnan(v):
        return "nan"
    out = f"{v:.6f}".rstrip("0").rstrip(".")
    return "0" if out == "-0" else out


def run_experiment(spec: ExperimentSpec) -> ResultTable:
    xs = spec.points()
    rows: list[Row] = []
    if spec.experiment == "vlc_curve":
        for x in xs:
            rows.append(Row(spec.experiment, "vlc", x, vlc_throughput(spec.base.vlc.at(x)), 0.0, 1))
        return ResultTable(spec.experiment, spec.param_name, spec.series(), rows)

    seeds = [spec.base.seed + i for i in range(spec.seeds)]
    jobs = [(spec.scenario(m, x, s), spec.experiment) for x in xs for m in spec.modes for s in seeds]
    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            values = list(pool.map(_job, jobs, chunksize=max(1, len(jobs) // (4 * spec.workers))))
    else:
        values = [_job(j) for j in jobs]

    it = iter(values)
    for x in xs:
        for m in spec.modes:
            sample = [next(it) for _ in seeds]
            mean = statistics.fmean(sample)
            std = statistics.stdev(sample) if len(sample) > 1 else 0.0
            rows.append(Row(spec.experiment, m.value, x, mean, std, len(sample)))
    return ResultTable(spec.experiment, spec.param_name, spec.series(), rows)


def crossover(table: ResultTable, rising: str = "wifi_only", falling: str = "hybrid") -> float | None:
    """First sweep value where ``rising`` catches up with ``falling``, interpolated between points."""
    xs = table.xs()
    diffs = [table.value(rising, x).mean - table.value(falling, x).mean for x in xs]
    for i, d in enumerate(diffs):
        if d >= 0:
            if i == 0:
                return xs[0]
            x0, x1, d0 = xs[i - 1], xs[i], diffs[i - 1]
            return x0 + (x1 - x0) * (-d0) / (d - d0)
    return None


def emit_plotdata(table: ResultTable, out_path: str | Path) -> Path:
    """Write the wide CSV to ``out_path`` and a gnuplot column file beside it."""
    if not table.rows:
        raise ExperimentError("cannot write an empty table")
    out_path = Path(out_path)
    dat = out_path.with_suffix(".dat")
    for path, text in ((out_path, table.to_csv()), (dat, table.to_gnuplot())):
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text)
        except OSError as exc:
            raise OSError(exc.errno, f"cannot write {path}: {exc.strerror}") from exc
    return out_path
