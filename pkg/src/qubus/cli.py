"""Batch driver: ``qubus gate|sweep|growth|mc``.

Settings come from an optional TOML file (flat keys) overridden by flags. All
constraints are checked before anything runs; violations are reported
together and exit with status 2. Numeric failures exit with status 1.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
from dataclasses import dataclass, field

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import gates, growth
from .core import GateConfig

EXIT_OK, EXIT_NUMERIC, EXIT_CONFIG = 0, 1, 2

GATE_COLUMNS = ["label", "empirical_freq", "analytic_prob", "mean_fidelity",
                "exact_misclassification"]
SWEEP_COLUMNS = ["alpha", "theta", "p_err_paper", "exact_misclassification", "fidelity_center"]
MC_COLUMNS = ["strategy", "L", "p", "t", "trials", "mean_ops", "ci95_ops", "mean_time",
              "ci95_time", "analytic_ops", "analytic_time"]
LABEL_ORDER = (gates.Label.GHZ, gates.Label.BELL, gates.Label.PRODUCT)


class ConfigError(ValueError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass
class RunConfig:
    command: str
    alpha: float = 100 * math.pi
    theta: float = 0.01
    gate_kind: str = "2q"
    trials: int = 0
    alphas: list = field(default_factory=lambda: [25 * math.pi, 50 * math.pi, 100 * math.pi, 200 * math.pi])
    thetas: list = field(default_factory=lambda: [0.0, 0.005, 0.01, 0.02])
    strategy: str = "SEQUENTIAL"
    p: float = 0.75
    t: float = 1.0
    L: list = field(default_factory=lambda: [100])
    L0: float = 2.0
    L_range: list = field(default_factory=lambda: [2, 1025])
    out: str | None = None
    seed: int = 0
    precision: int = 12
    workers: int = 1

    def validate(self):
        errs = []
        if self.precision < 1:
            errs.append(f"precision >= 1 (got {self.precision})")
        if self.workers < 1:
            errs.append(f"workers >= 1 (got {self.workers})")
        if self.command == "gate":
            if self.gate_kind not in gates.ROTATIONS:
                errs.append(f"gate_kind in {sorted(gates.ROTATIONS)} (got {self.gate_kind!r})")
            if self.trials < 0:
                errs.append(f"trials >= 0 (got {self.trials})")
            if not (math.isfinite(self.alpha) and self.alpha >= 0):
                errs.append(f"alpha >= 0 (got {self.alpha})")
            if not math.isfinite(self.theta):
                errs.append(f"theta finite (got {self.theta})")
        elif self.command == "sweep":
            if self.gate_kind not in gates.ROTATIONS:
                errs.append(f"gate_kind in {sorted(gates.ROTATIONS)} (got {self.gate_kind!r})")
            if not self.alphas or any(not a > 0 for a in self.alphas):
                errs.append(f"all alphas > 0 (got {self.alphas})")
            if not self.thetas or any(not 0 <= th <= math.pi for th in self.thetas):
                errs.append(f"all thetas in [0, pi] (got {self.thetas})")
        elif self.command == "growth":
            if not 0 < self.p <= 1:
                errs.append(f"0 < p <= 1 (got p={self.p})")
            if not self.t > 0:
                errs.append(f"t > 0 (got t={self.t})")
            if len(self.L_range) != 2 or not 2 <= self.L_range[0] <= self.L_range[1]:
                errs.append(f"L_range = [Lmin, Lmax] with 2 <= Lmin <= Lmax (got {self.L_range})")
        elif self.command == "mc":
            try:
                strat = growth.Strategy(self.strategy.upper())
            except ValueError:
                errs.append(f"strategy in {[s.value for s in growth.Strategy]} (got {self.strategy!r})")
            else:
                if strat is growth.Strategy.INITIAL:
                    errs.append("strategy INITIAL is an analytic-only strategy; use SEQUENTIAL or DIVIDE_CONQUER")
                else:
                    if self.trials < 1:
                        errs.append(f"trials >= 1 (got {self.trials})")
                    seen = set()
                    for L in self.L:
                        try:
                            growth.StrategyConfig(strat, self.p, L, self.t, None, max(self.trials, 1), self.seed)
                        except ValueError as exc:
                            if str(exc) not in seen:
                                seen.add(str(exc))
                                errs.append(str(exc))
        if errs:
            raise ConfigError(errs)


_KEYS = {"alpha": float, "theta": float, "gate_kind": str, "trials": int, "alphas": list,
         "thetas": list, "strategy": str, "p": float, "t": float, "L": list, "L0": float,
         "L_range": list, "out": str, "seed": int, "precision": int, "workers": int}


def _coerce(key, value):
    kind = _KEYS[key]
    if kind is list:
        values = value if isinstance(value, list) else [value]
        conv = int if key in ("L", "L_range") else float
        return [conv(v) for v in values]
    if kind is int and isinstance(value, float) and not value.is_integer():
        raise ValueError(f"{key} must be an integer")
    if kind is int and isinstance(value, str):
        return int(value, 0)
    return kind(value)


def load_config(command, path=None, overrides=None, env=None):
    """Merge defaults, env seed fallback, config file and flag overrides."""
    env = os.environ if env is None else env
    values, problems = {}, []
    if env.get("QUBUS_SEED"):
        values["seed"] = env["QUBUS_SEED"]
    if path is not None:
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except (OSError, tomllib.TOMLDecodeError) as exc:
            raise ConfigError([f"cannot read config {path}: {exc}"]) from exc
        for k, v in data.items():
            if k not in _KEYS:
                problems.append(f"unknown config key {k!r}")
            else:
                values[k] = v
    for k, v in (overrides or {}).items():
        if v is not None:
            values[k] = v
    cfg = RunConfig(command)
    for k, v in values.items():
        try:
            setattr(cfg, k, _coerce(k, v))
        except (TypeError, ValueError) as exc:
            problems.append(f"{k}: invalid value {v!r} ({exc})")
    if problems:
        raise ConfigError(problems)
    cfg.validate()
    return cfg


class _Writer:
    def __init__(self, columns, precision):
        self.buf = io.StringIO()
        self.w = csv.writer(self.buf, lineterminator="\r\n")
        self.precision = precision
        self.w.writerow(columns)

    def cell(self, v):
        if v is None:
            return ""
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, str):
            return v
        if isinstance(v, int) and not isinstance(v, bool):
            return str(v)
        v = float(v)
        if math.isnan(v):
            return "nan"
        return f"{v:.{self.precision}g}"

    def row(self, values):
        self.w.writerow([self.cell(v) for v in values])

    def text(self):
        return self.buf.getvalue()


def cmd_gate(cfg):
    gc = GateConfig(cfg.alpha, cfg.theta)
    spec = gates.gate_spectrum(gc, cfg.gate_kind)
    mis = gates.exact_misclassification(spec)
    analytic = spec.label_probs()
    freq, fid = {}, {}
    if cfg.trials > 0:
        stats = gates.run_gate_trials(gc, cfg.gate_kind, cfg.trials, cfg.seed, workers=cfg.workers)
        freq, fid = stats.label_frequencies(), stats.label_mean_fidelity()
    out = _Writer(GATE_COLUMNS, cfg.precision)
    for lab in LABEL_ORDER:
        if lab not in analytic:
            continue
        out.row([lab.value, freq.get(lab) if cfg.trials else None, analytic[lab],
                 fid.get(lab) if cfg.trials else None, mis])
    return out.text()


def cmd_sweep(cfg):
    out = _Writer(SWEEP_COLUMNS, cfg.precision)
    for alpha in cfg.alphas:
        for theta in cfg.thetas:
            gc = GateConfig(alpha, theta)
            spec = gates.gate_spectrum(gc, cfg.gate_kind)
            per_peak = gates.expected_conditional_fidelity(gc, cfg.gate_kind, per_peak=True)
            centre = per_peak[gates.center_peak_index(spec)]
            out.row([alpha, theta, gates.p_err(alpha, theta),
                     gates.exact_misclassification(spec), centre])
    return out.text()


def growth_columns(baselines=growth.BASELINES):
    return (["L", "N_seq", "N_dc", "N_initial", "T_seq", "T_dc", "T_initial"]
            + [b.name for b in baselines] + ["seq_lt_dc", "dc_lt_initial", "notes"])


def cmd_growth(cfg):
    lo, hi = cfg.L_range
    rows = growth.compare_strategies(cfg.p, cfg.t, range(lo, hi + 1), growth.BASELINES, cfg.L0)
    out = _Writer(growth_columns(), cfg.precision)
    for r in rows:
        seq_lt_dc = None if r.n_seq is None or r.n_dc is None else r.n_seq < r.n_dc
        dc_lt_init = None if r.n_dc is None or r.n_initial is None else r.n_dc < r.n_initial
        out.row([r.L, r.n_seq, r.n_dc, r.n_initial, r.t_seq, r.t_dc, r.t_initial,
                 *r.baselines.values(), seq_lt_dc, dc_lt_init, " | ".join(r.notes)])
    return out.text()


def cmd_mc(cfg):
    strat = growth.Strategy(cfg.strategy.upper())
    run = growth.mc_sequential if strat is growth.Strategy.SEQUENTIAL else growth.mc_divide_conquer
    out = _Writer(MC_COLUMNS, cfg.precision)
    for L in cfg.L:
        sc = growth.StrategyConfig(strat, cfg.p, L, cfg.t, None, cfg.trials, cfg.seed)
        rep = run(sc, workers=cfg.workers)
        out.row([strat.value, L, cfg.p, cfg.t, rep.trials, rep.mean_ops, rep.ci95_ops,
                 rep.mean_time, rep.ci95_time, rep.analytic_ops, rep.analytic_time])
    return out.text()


COMMANDS = {"gate": cmd_gate, "sweep": cmd_sweep, "growth": cmd_growth, "mc": cmd_mc}


def build_parser():
    ap = argparse.ArgumentParser(prog="qubus", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="TOML file with flat settings")
        sp.add_argument("--seed", type=lambda s: int(s, 0))
        sp.add_argument("--out", help="output CSV path (default stdout)")
        sp.add_argument("--trials", type=int)
        sp.add_argument("--alpha", type=float)
        sp.add_argument("--theta", type=float)
        sp.add_argument("--p", type=float)
        sp.add_argument("--L", type=int)
        sp.add_argument("--strategy")
        sp.add_argument("--gate-kind", dest="gate_kind", choices=sorted(gates.ROTATIONS))
        sp.add_argument("--t", type=float)
        sp.add_argument("--L0", type=float)
        sp.add_argument("--workers", type=int)
        sp.add_argument("--precision", type=int)
    return ap


def _overrides(args):
    o = {k: getattr(args, k) for k in ("seed", "out", "trials", "alpha", "theta", "p", "strategy",
                                         "gate_kind", "t", "L0", "workers", "precision")}
    if args.L is not None:
        o["L"] = [args.L]
        if args.command == "growth":
            o["L_range"] = [args.L, args.L]
    if args.command == "sweep":
        # single-value flags narrow the grid
        if args.alpha is not None:
            o["alphas"] = [args.alpha]
        if args.theta is not None:
            o["thetas"] = [args.theta]
    return o


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.command, args.config, _overrides(args))
    except ConfigError as exc:
        for msg in exc.problems:
            print(f"qubus: config error: {msg}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        text = COMMANDS[cfg.command](cfg)
    except ValueError as exc:
        print(f"qubus: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, FloatingPointError) as exc:
        print(f"qubus: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if cfg.out:
        with open(cfg.out, "w", newline="", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
