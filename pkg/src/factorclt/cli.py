"""Command-line front end.

    factorclt dist-table     --config run.cfg --output-dir out/
    factorclt size-power     --set reps=500 --threads 4
    factorclt variance-check --set c_pi=0,2
    factorclt simulate       --rep 3
    factorclt two-step       --lambda 1.0

Config files are flat ``key = value`` lines; ``#`` starts a comment. Known
keys: n, t, c_pi, c_fv, reps, boot_reps, seed, levels, freeze_units. Grid
keys (c_pi, c_fv, levels) take comma-separated lists. ``--set`` overrides are
applied after the file.

Exit status: 0 on success, 1 on usage or configuration errors, 2 when a
run fails.
"""

import argparse
from dataclasses import dataclass, field
import json
import logging
import os
from pathlib import Path
import sys
import traceback

from . import experiments, report, twostep, _seeding
from .dgp import panel_to_csv, simulate_panel
from .errors import ArgumentError, ConfigError, FactorCLTError
from .experiments import DESK_DEFAULTS, FULL_SCALE, ExperimentConfig
from .stats import xi_sample

OUTPUT_DIR_ENV = "FACTORCLT_OUTPUT_DIR"
COMMANDS = ("simulate", "dist-table", "size-power", "variance-check", "two-step")

# command-specific defaults layered over the desk defaults
COMMAND_DEFAULTS = {
    "dist-table": {"c_fv": (0.0,)},
    "variance-check": {"c_fv": (0.0,)},
}

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


def _int(text):
    return int(text.strip())


def _float_list(text):
    items = [s.strip() for s in text.split(",")]
    if not items or any(s == "" for s in items):
        raise ValueError(f"expected a comma-separated list of numbers, got {text!r}")
    return tuple(float(s) for s in items)


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


PARSERS = {
    "n": _int,
    "t": _int,
    "c_pi": _float_list,
    "c_fv": _float_list,
    "reps": _int,
    "boot_reps": _int,
    "seed": _int,
    "levels": _float_list,
    "freeze_units": _bool,
}


def _parse_pairs(lines, source):
    """Yield (key, raw value, line label) from ``key = value`` lines."""
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value' in {source}", line=lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        yield key, value, lineno


def _parse_value(key, value, line):
    if key not in PARSERS:
        raise ConfigError(f"unknown key (known: {', '.join(PARSERS)})", key=key, line=line)
    try:
        return PARSERS[key](value)
    except ValueError as exc:
        raise ConfigError(f"cannot parse value {value!r}: {exc}", key=key, line=line) from None


def _check_scalars(values, lines):
    def fail(key, msg):
        raise ConfigError(msg, key=key, line=lines.get(key))

    if values["n"] < 1:
        fail("n", "must be >= 1")
    if values["t"] < 2:
        fail("t", "must be >= 2 (the quadratic statistic needs t < s)")
    if not 0 <= values["seed"] < 2**64:
        fail("seed", "must be a 64-bit unsigned integer")


def parse_config(path=None, overrides=(), defaults=None, text=None):
    """Build a validated :class:`ExperimentConfig`.

    Parameters
    ----------
    path : str or Path, optional
        Flat ``key = value`` file.
    overrides : iterable of str or dict
        ``key=value`` strings (or a mapping) applied after the file.
    defaults : dict, optional
        Values used for keys absent from both; layered over the desk defaults.
    text : str, optional
        Config content given directly instead of ``path``.

    Errors name the offending key and, for file entries, the line number.
    """
    values = dict(DESK_DEFAULTS)
    values.update(defaults or {})
    lines = {}
    if path is not None:
        text = Path(path).read_text()
    if text is not None:
        seen = set()
        for key, raw, lineno in _parse_pairs(text.splitlines(), path or "<text>"):
            if key in seen:
                raise ConfigError("duplicate key", key=key, line=lineno)
            seen.add(key)
            values[key] = _parse_value(key, raw, lineno)
            lines[key] = lineno
    if isinstance(overrides, dict):
        overrides = [f"{k}={v}" for k, v in overrides.items()]
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, raw = (s.strip() for s in item.split("=", 1))
        values[key] = _parse_value(key, raw, None)
        lines.pop(key, None)

    _check_scalars(values, lines)
    try:
        return ExperimentConfig.desk(**values)
    except ConfigError as exc:
        if exc.key is not None and exc.line is None and lines.get(exc.key) is not None:
            raise ConfigError(exc.message, key=exc.key, line=lines[exc.key]) from None
        raise
    except ArgumentError as exc:
        raise ConfigError(str(exc)) from None


@dataclass
class CliInvocation:
    command: str
    config_path: str = None
    overrides: list = field(default_factory=list)
    output_dir: str = "."
    threads: int = None
    full_scale: bool = False
    rep: int = 0
    true_lambda: float = 1.0


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(prog="factorclt", description="Monte Carlo studies of linear/quadratic "
                     "panel statistics with asymptotic and wild-bootstrap inference.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", dest="config_path", help="flat key = value config file")
        p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config key (repeatable)")
        p.add_argument("--output-dir", default=os.environ.get(OUTPUT_DIR_ENV, "."),
                       help=f"where files are written (default: ${OUTPUT_DIR_ENV} or .)")
        p.add_argument("--threads", type=_positive_int, default=None,
                       help="cap on worker threads (results do not depend on it)")
        p.add_argument("--full-scale", action="store_true",
                       help="N=T=500, B=600, R=10000 (distribution) / 2000 (rejection rates)")
        p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
        if name == "simulate":
            p.add_argument("--rep", type=int, default=0, help="replication index to dump")
        if name == "two-step":
            p.add_argument("--lambda", dest="true_lambda", type=float, default=1.0,
                           help="true risk premium of the demo panel")
    return parser


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _defaults_for(inv):
    d = dict(COMMAND_DEFAULTS.get(inv.command, {}))
    if inv.full_scale:
        d.update(FULL_SCALE)
        if inv.command in ("dist-table", "variance-check"):
            d["reps"] = 10_000
    return d


def _write(out_dir, name, text):
    path = out_dir / name
    path.write_text(text)
    return path


def _origin(exc):
    """Name of the innermost package module in the traceback (where the error arose)."""
    package_dir = Path(__file__).parent
    name = "cli"
    for frame in traceback.extract_tb(exc.__traceback__):
        path = Path(frame.filename)
        if path.parent == package_dir:
            name = path.stem
    return name


def dispatch(inv, stdout=None):
    """Run one invocation; returns the process exit status."""
    stdout = stdout or sys.stdout
    try:
        config = parse_config(inv.config_path, inv.overrides, defaults=_defaults_for(inv))
    except (ConfigError, OSError) as exc:
        print(f"factorclt {inv.command}: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out_dir = Path(inv.output_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"factorclt: cannot create output directory: {exc}", file=sys.stderr)
        return EXIT_USAGE

    try:
        text = _RUNNERS[inv.command](inv, config, out_dir)
    except FactorCLTError as exc:
        print(f"factorclt {inv.command}: {_origin(exc)}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (OSError, MemoryError) as exc:
        print(f"factorclt {inv.command}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(text, file=stdout)
    return EXIT_OK


def _run_simulate(inv, config, out_dir):
    cfg = config.cell_config(config.c_pi_grid[0], config.c_fv_grid[0])
    panel = simulate_panel(cfg, inv.rep, cell=experiments.cell_key(cfg.c_pi, cfg.c_fv))
    sample = xi_sample(panel)
    panel_to_csv(panel.e, out_dir / "panel_e.csv")
    panel_to_csv(panel.v[None, :], out_dir / "panel_v.csv")
    _write(out_dir, "xi.csv", report.xi_csv(sample))
    results = {"c_pi": cfg.c_pi, "c_fv": cfg.c_fv, "rep": inv.rep,
               "aggregate": list(sample.aggregate), "c_omega": panel.params.c_omega}
    _write(out_dir, "report.json", report.report_json("simulate", config, results))
    return (f"panel rep {inv.rep}: N={cfg.n_units} T={cfg.n_periods} c_pi={cfg.c_pi:g} "
            f"c_fv={cfg.c_fv:g}\nXi = ({sample.aggregate[0]:.6g}, {sample.aggregate[1]:.6g})")


def _run_dist(inv, config, out_dir):
    rows = experiments.run_distribution_study(config, threads=inv.threads)
    _write(out_dir, "table1.csv", report.table1_csv(rows))
    results = [{"c_pi": r.c_pi, "component": r.component, **vars(r.summary)} for r in rows]
    _write(out_dir, "report.json", report.report_json("dist-table", config, results))
    return report.render_table1(rows, config.base.n_units, config.base.n_periods)


def _run_size_power(inv, config, out_dir):
    table = experiments.run_size_power_study(config, threads=inv.threads)
    _write(out_dir, "table2.csv", report.table2_csv(table))
    results = [vars(r) for r in table.rows]
    _write(out_dir, "report.json", report.report_json("size-power", config, results))
    return report.render_table2(table)


def _run_variance(inv, config, out_dir):
    rows = experiments.variance_check(config, threads=inv.threads)
    _write(out_dir, "variance.csv", report.variance_csv(rows))
    results = [{**vars(r), "ratio_to_sigma_hat": r.ratio_to_sigma_hat} for r in rows]
    _write(out_dir, "report.json", report.report_json("variance-check", config, results))
    return report.render_variance(rows)


def _run_two_step(inv, config, out_dir):
    c_pi = config.c_pi_grid[0]
    panel = twostep.simulate_asset_panel(config.base.n_units, config.base.n_periods,
                                         inv.true_lambda, config.master_seed, inv.rep, c_pi=c_pi)
    intervals = {}
    for level in config.levels:
        rng = _seeding.substream(config.master_seed, _seeding.float_key(level), _seeding.BOOTSTRAP)
        for name, ci in twostep.wild_bootstrap_intervals(panel, config.n_boot, rng, level).items():
            intervals.setdefault(name, {"estimate": ci["estimate"], "intervals": []})
            intervals[name]["intervals"].append(
                {"level": level, "lower": ci["lower"], "upper": ci["upper"]})
    results = {"true_lambda": inv.true_lambda, "c_pi": c_pi, "estimators": intervals}
    text = report.report_json("two-step", config, results)
    _write(out_dir, "report.json", text)
    return json.dumps(report._clean(results), indent=2)


_RUNNERS = {
    "simulate": _run_simulate,
    "dist-table": _run_dist,
    "size-power": _run_size_power,
    "variance-check": _run_variance,
    "two-step": _run_two_step,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s: %(message)s", stream=sys.stderr)
    inv = CliInvocation(
        command=args.command,
        config_path=args.config_path,
        overrides=args.overrides,
        output_dir=args.output_dir,
        threads=args.threads,
        full_scale=args.full_scale,
        rep=getattr(args, "rep", 0),
        true_lambda=getattr(args, "true_lambda", 1.0),
    )
    return dispatch(inv)


if __name__ == "__main__":
    sys.exit(main())
