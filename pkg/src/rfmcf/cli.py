"""Command line entry point: ``run``, ``verify`` and ``list``.

Scenario files are TOML with the tables ``[background]``, ``[immersion]``,
``[time]``, ``[stepper]``, ``[monitors]`` and ``[output]``::

    seed = 0
    frame = "ambient-mcf"            # or "static-weighted" (steady backgrounds)

    [background]
    name = "flat-static"
    params = { n = 2 }

    [immersion]
    kind = "closed-curve"
    shape = "circle"
    N = 64
    params = { radius = 1.0 }

    [time]
    t0 = 0.0
    t_end = 1.0
    output_interval = 0.01

    [stepper]                        # optional overrides of the flow stepper
    c_cfl = 0.4

    [monitors]
    include = ["all"]                # or a list of MonitorRow columns

    [output]
    dir = "out"                      # overridden by --out
"""
from __future__ import annotations

import os

_THREADS = os.environ.get("RFMCF_THREADS")
if _THREADS:
    # BLAS pools read these at import time, so set them before numpy loads
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, _THREADS)

import argparse
import csv
import dataclasses
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import numpy as np

from . import backgrounds as B
from . import flow as F
from . import hypersurface as S
from . import monitors as Mo
from . import verify as V
from .errors import ConfigError, RfmcfError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2

SHAPES = {
    "closed-curve": {"circle": "radius, center", "ellipse": "a, b, center",
                     "perturbed-circle": "radius, amplitude, mode, center",
                     "clustered-circle": "radius, strength", "table": "points"},
    "open-curve": {"grim-reaper": "x_max, offset", "line": "start, end"},
    "revolution-profile": {"sphere": "radius, z0", "perturbed-sphere": "radius, amplitude, z0",
                           "ellipsoid": "a, c, z0"},
}
MONITOR_COLUMNS = [c for c in Mo.MonitorRow.columns() if c != "t"]

# descriptive traceability for each monitor line of the summary
TRACE = {
    "area": "area of the evolving hypersurface in g(t)",
    "weighted_area": "weighted area, gradient-flow functional of the static frame",
    "huisken_q": "Huisken quantity, nonincreasing on shrinking soliton backgrounds",
    "soliton_dev_L2": "mean curvature soliton condition H + e0 f = 0",
    "harnack_min": "Harnack integrand, vanishes on mean curvature solitons",
    "res_dgdt": "induced metric evolution dg/dt = -2 Ric^T - 2 H A",
    "res_dAdt": "second fundamental form evolution",
    "res_dHdt": "mean curvature evolution",
    "res_simons": "Simons-type identity for Hess H",
    "res_area_identity": "area rate dA/dt = -integral (Ric^T trace + H^2)",
    "res_monotonicity": "weighted area / Huisken rate identity",
    "ext_bound_ok": "area-rate extinction inequality in 3D",
}

_TOP_KEYS = {"seed", "frame", "background", "immersion", "time", "stepper", "monitors", "output"}
_TABLE_KEYS = {
    "background": {"name", "params"},
    "immersion": {"kind", "shape", "N", "params", "orientation"},
    "time": {"t0", "t_end", "output_interval"},
    "monitors": {"include"},
    "output": {"dir"},
}


@dataclass
class ScenarioConfig:
    background: str
    background_params: dict
    kind: str
    shape: str
    N: int
    shape_params: dict
    t0: float
    t_end: float
    output_interval: Optional[float] = None
    orientation: int = 1
    frame: str = "ambient-mcf"
    stepper: dict = field(default_factory=dict)
    monitors: list = field(default_factory=lambda: list(MONITOR_COLUMNS))
    out_dir: Optional[str] = None
    seed: int = 0

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        for key in d:
            if key not in _TOP_KEYS:
                raise ConfigError(f"unknown key {key!r}")
        for table, keys in _TABLE_KEYS.items():
            sub = d.get(table, {})
            if not isinstance(sub, dict):
                raise ConfigError(f"{table!r} must be a table")
            for key in sub:
                if key not in keys:
                    raise ConfigError(f"unknown key '{table}.{key}'")

        def need(table, key, typ):
            try:
                val = d[table][key]
            except KeyError:
                raise ConfigError(f"missing key '{table}.{key}'") from None
            if typ is float and isinstance(val, int) and not isinstance(val, bool):
                val = float(val)
            if not isinstance(val, typ) or isinstance(val, bool):
                raise ConfigError(f"'{table}.{key}' must be {typ.__name__}")
            return val

        bg = d.get("background", {})
        name = need("background", "name", str)
        if name not in B.catalog_names():
            raise ConfigError(f"'background.name': unknown background {name!r}")
        imm = d.get("immersion", {})
        kind = need("immersion", "kind", str)
        if kind not in SHAPES:
            raise ConfigError(f"'immersion.kind': unknown kind {kind!r}")
        shape = need("immersion", "shape", str)
        if shape not in SHAPES[kind]:
            raise ConfigError(f"'immersion.shape': unknown {kind} shape {shape!r}")
        tm = d.get("time", {})
        interval = tm.get("output_interval")
        if interval is not None and (not isinstance(interval, (int, float)) or interval <= 0):
            raise ConfigError("'time.output_interval' must be a positive number")
        frame = d.get("frame", "ambient-mcf")
        if frame not in F.FRAMES:
            raise ConfigError(f"'frame': unknown frame {frame!r}; known: {', '.join(F.FRAMES)}")
        stepper = d.get("stepper", {})
        known = {f.name for f in dataclasses.fields(F.Stepper)}
        for key in stepper:
            if key not in known:
                raise ConfigError(f"unknown key 'stepper.{key}'")
        include = d.get("monitors", {}).get("include", ["all"])
        if not isinstance(include, list):
            raise ConfigError("'monitors.include' must be a list")
        if "all" in include:
            include = list(MONITOR_COLUMNS)
        for m in include:
            if m not in MONITOR_COLUMNS:
                raise ConfigError(f"'monitors.include': unknown monitor {m!r}")
        seed = d.get("seed", 0)
        if not isinstance(seed, int) or isinstance(seed, bool):
            raise ConfigError("'seed' must be an integer")
        t0, t_end = need("time", "t0", float), need("time", "t_end", float)
        if t_end <= t0:
            raise ConfigError("'time.t_end' must exceed 'time.t0'")
        return cls(name, dict(bg.get("params", {})), kind, shape, need("immersion", "N", int),
                   dict(imm.get("params", {})), t0, t_end,
                   None if interval is None else float(interval),
                   int(imm.get("orientation", 1)), frame, dict(stepper), include,
                   d.get("output", {}).get("dir"), seed)

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"invalid TOML in {path}: {exc}") from exc
        return cls.from_dict(data)

    def build(self) -> F.Scenario:
        """Instantiate background, immersion and stepper; config-level failures become ConfigError."""
        try:
            bg = B.get_background(self.background, **self.background_params)
        except RfmcfError as exc:
            raise ConfigError(f"'background.params': {exc}") from exc
        try:
            imm = S.build(self.kind, bg, self.shape, self.N, self.orientation,
                          **self.shape_params)
        except RfmcfError as exc:
            raise ConfigError(f"'immersion': {exc}") from exc
        lo, hi = bg.time_domain
        if not (lo < self.t0 < hi and lo < self.t_end <= hi):
            raise ConfigError(f"'time': window [{self.t0}, {self.t_end}] outside the "
                              f"background time domain ({lo}, {hi})")
        if self.frame == "static-weighted" and bg.soliton_class != "steady":
            raise ConfigError("'frame': the static weighted frame needs a steady background")
        if self.kind == "open-curve":
            raise ConfigError("'immersion.kind': flows need a closed immersion")
        try:
            stepper = F.Stepper(**self.stepper)
        except TypeError as exc:
            raise ConfigError(f"'stepper': {exc}") from exc
        return F.Scenario(imm, self.t0, self.t_end, self.frame, self.output_interval, stepper)


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    x = float(x)
    return "nan" if math.isnan(x) else repr(x)


def write_series(rows: list, path: Path, include: list) -> None:
    cols = Mo.MonitorRow.columns()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            vals = r.values()
            w.writerow([_fmt(v) if c == "t" or c in include else "nan"
                        for c, v in zip(cols, vals)])


def _extreme(rows, col):
    vals = [getattr(r, col) for r in rows]
    vals = [float(v) for v in vals if not (isinstance(v, float) and math.isnan(v))]
    return max(vals, key=abs) if vals else math.nan


def summary_text(cfg: ScenarioConfig, res: F.FlowResult, rows: list) -> str:
    lines = [f"background: {cfg.background} {cfg.background_params}",
             f"immersion: {cfg.kind} {cfg.shape} N={cfg.N} {cfg.shape_params}",
             f"frame: {cfg.frame}",
             f"window: [{cfg.t0!r}, {cfg.t_end!r}]",
             f"termination: {res.termination}" + (f" ({res.message})" if res.message else ""),
             f"final time: {res.t_final!r}",
             f"steps: {res.steps}",
             "extinction time: " + ("n/a" if res.extinction_time is None
                                    else repr(res.extinction_time)),
             "", "extremal residuals (max |.| over outputs):"]
    for col in MONITOR_COLUMNS:
        if col.startswith("res_") and col in cfg.monitors:
            v = _extreme(rows, col)
            lines.append(f"  {col}: " + ("n/a" if math.isnan(v) else f"{abs(v):.3e}"))
    lines += ["", "monotonicity verdicts:"]
    for col, label in (("weighted_area", "weighted area nonincreasing"),
                       ("huisken_q", "Huisken quantity nonincreasing")):
        vals = [getattr(r, col) for r in rows]
        if col not in cfg.monitors or len(vals) < 2 or any(math.isnan(v) for v in vals):
            lines.append(f"  {label}: n/a")
            continue
        slack = [1e-8 + 10 * (0.0 if math.isnan(r.res_monotonicity) else r.res_monotonicity)
                 for r in rows]
        worst = max(vals[i + 1] - vals[i] - slack[i + 1] for i in range(len(vals) - 1))
        lines.append(f"  {label}: {'yes' if worst <= 0 else 'NO'}"
                     f" (max increase beyond slack {worst:.3e})")
        if col == "huisken_q":
            lines.append(f"  Huisken quantity drift: {max(vals) - min(vals):.3e}")
    ext = [r.ext_bound_ok for r in rows]
    if "ext_bound_ok" in cfg.monitors:
        lines.append(f"  extinction inequality at every output: {'yes' if all(ext) else 'NO'}")
    lines += ["", "traceability:"]
    for col in MONITOR_COLUMNS:
        if col in cfg.monitors:
            lines.append(f"  {col}: {TRACE.get(col, Mo.COLUMN_DOCS[col])}")
    return "\n".join(lines) + "\n"


def run_scenario(config_path, out_dir=None) -> int:
    try:
        cfg = ScenarioConfig.load(config_path)
        scenario = cfg.build()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(out_dir or cfg.out_dir or "out")
    try:
        res = F.run(scenario)
        rows = Mo.series(res, with_harnack="harnack_min" in cfg.monitors)
    except (RfmcfError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical abort: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    out.mkdir(parents=True, exist_ok=True)
    write_series(rows, out / "series.csv", cfg.monitors)
    text = summary_text(cfg, res, rows)
    (out / "summary.txt").write_text(text)
    print(text, end="")
    if res.termination in ("blowup", "chart_exit"):
        return EXIT_NUMERICAL
    return EXIT_OK


def verify(suite: str) -> int:
    names = V.SUITES if suite == "all" else (suite,)
    threads = max(1, int(os.environ.get("RFMCF_THREADS", "1") or 1))
    if threads > 1 and len(names) > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(min(threads, len(names))) as pool:
            parts = list(pool.map(V.run_suites, [(n,) for n in names]))
        rows = [r for part in parts for r in part]
    else:
        rows = V.run_suites(names)
    print(V.format_table(rows))
    return EXIT_OK if all(r.passed for r in rows) else 1


def list_catalog() -> str:
    lines = ["backgrounds:"]
    for name in B.catalog_names():
        params = B.catalog_params(name)
        variants = []
        ns = params.get("n")
        for n in ns if ns else (None,):
            bg = B.get_background(name, n=n) if n else B.get_background(name)
            variants.append(bg)
        for bg in variants:
            lines.append(f"  {bg.describe()}")
        if params:
            lines.append(f"    params: " + ", ".join(
                f"{k}" + (f" in {v}" if v else "") for k, v in params.items()))
    lines.append("shapes:")
    for kind, shapes in SHAPES.items():
        for shape, p in shapes.items():
            lines.append(f"  {kind}/{shape}: {p}")
    lines.append("frames: " + ", ".join(F.FRAMES))
    lines.append("monitors:")
    for col in MONITOR_COLUMNS:
        lines.append(f"  {col}: {Mo.COLUMN_DOCS[col]}")
    return "\n".join(lines)


def _help_epilog() -> str:
    cols = "\n".join(f"  {c:<18} {Mo.COLUMN_DOCS[c]}" for c in Mo.MonitorRow.columns())
    return ("series.csv columns (in order; nan where a monitor does not apply):\n" + cols +
            "\n\nexit codes: 0 success, 1 config error or failed verification, "
            "2 numerical abort\nRFMCF_THREADS caps BLAS threads and parallel verify suites.")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rfmcf", description=__doc__.split("\n")[0],
                                epilog=_help_epilog(),
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a scenario file", epilog=_help_epilog(),
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    r.add_argument("--config", required=True, help="TOML scenario file")
    r.add_argument("--out", help="output directory (default: output.dir or ./out)")
    v = sub.add_parser("verify", help="run property suites at two resolutions")
    v.add_argument("--suite", default="all", choices=V.SUITES + ("all",))
    sub.add_parser("list", help="list backgrounds, shapes and monitors")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return run_scenario(args.config, args.out)
    if args.command == "verify":
        return verify(args.suite)
    print(list_catalog())
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
