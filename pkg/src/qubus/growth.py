"""Operation counts and build times for growing linear cluster chains.

Three strategies, each for a heralded join that succeeds with probability p:

SEQUENTIAL
    Attach one qubit at a time to a single chain. Analytic cost
    ``(L-1)/(2p-1)`` operations and ``t(L-1)/p`` time.
DIVIDE_CONQUER
    Join equal-length chains pairwise each round, discarding both halves on
    failure. Cost ``((2/p)^k - 1)/(2-p)`` for ``L - 1 = 2^k``, time ``t(1+k)``
    with unlimited parallel joins.
INITIAL
    Grow minimal chains above the critical length and merge them into a main
    chain. Closed forms only; there is no event model behind them here.

The sequential time and operation formulas disagree with each other: the time
formula charges ``t/p`` per net qubit, the operation formula ``1/(2p-1)``
operations per net qubit at ``t`` each. Both are reported as given; the Monte
Carlo time is simply ``ops * t``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import _rng


class Strategy(str, enum.Enum):
    SEQUENTIAL = "SEQUENTIAL"
    DIVIDE_CONQUER = "DIVIDE_CONQUER"
    INITIAL = "INITIAL"


@dataclass(frozen=True)
class LiteratureBaseline:
    """Quoted linear scaling N[L] = slope * L + intercept; never computed here."""

    name: str
    slope: float
    intercept: float

    def ops(self, L):
        return self.slope * L + self.intercept


RUS_PF06 = LiteratureBaseline("RUS_Pf0.6", 185.0, -1115.0)
RUS_PF04 = LiteratureBaseline("RUS_Pf0.4", 16.6, -47.7)
TWO_QUBIT_DC = LiteratureBaseline("twoQubitDC", 12.0, -38.0)
THREE_QUBIT = LiteratureBaseline("threeQubit", 8.0, -44.0 / 3.0)
BASELINES = (RUS_PF06, RUS_PF04, TWO_QUBIT_DC, THREE_QUBIT)


def _check_p(p):
    if not 0 < p <= 1:
        raise ValueError(f"success probability must satisfy 0 < p <= 1, got {p}")


def critical_length(p):
    """Shortest chain length, 1 + 2(1-p)/p, from which joining grows on average."""
    _check_p(p)
    return 1.0 + 2.0 * (1.0 - p) / p


def dc_rounds(L):
    """k with L - 1 == 2**k."""
    L = int(L)
    if L < 2 or (L - 1) & (L - 2):
        raise ValueError(f"divide and conquer needs L - 1 to be a power of two, got L={L}")
    return (L - 1).bit_length() - 1


def dc_recurrence(k, p):
    """Expected joins E_k = (2 E_{k-1} + 1)/p with E_0 = 0."""
    e = 0.0
    for _ in range(k):
        e = (2.0 * e + 1.0) / p
    return e


def analytic_ops(strategy, p, L, L0=None):
    strategy = Strategy(strategy)
    _check_p(p)
    if L < 2:
        raise ValueError(f"chain length must satisfy L >= 2, got {L}")
    if strategy is Strategy.SEQUENTIAL:
        if not p > 0.5:
            raise ValueError(f"sequential adding needs p > 1/2, got p={p}")
        return (L - 1) / (2.0 * p - 1.0)
    if strategy is Strategy.DIVIDE_CONQUER:
        k = dc_rounds(L)
        return ((2.0 / p) ** k - 1.0) / (2.0 - p)
    r = 2.0 * (1.0 - p) / p
    if not 1.0 - r > 0:
        raise ValueError(f"initial scheme needs 1 - 2(1-p)/p > 0 (p > 2/3), got p={p}")
    return (2.0 / p) * (L - 1.0 - r) / (1.0 - r) - 1.0 / p


def analytic_time(strategy, p, t, L, L0=None):
    strategy = Strategy(strategy)
    _check_p(p)
    if L < 2:
        raise ValueError(f"chain length must satisfy L >= 2, got {L}")
    if strategy is Strategy.SEQUENTIAL:
        return t * (L - 1) / p
    if strategy is Strategy.DIVIDE_CONQUER:
        return t * (1.0 + dc_rounds(L))
    if L0 is None:
        raise ValueError("initial scheme needs a starting length L0")
    lc = critical_length(p)
    if not L0 > lc:
        raise ValueError(f"initial scheme needs L0 > L_c = {lc:.6g}, got L0={L0}")
    if not L > lc:
        raise ValueError(f"initial scheme needs L > L_c = {lc:.6g}, got L={L}")
    return (t / p) * (1.0 + math.log2((L - lc) / (L0 - lc)))


@dataclass(frozen=True)
class StrategyConfig:
    strategy: Strategy
    p: float
    L: int
    t: float = 1.0
    L0: float | None = None
    trials: int = 1
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        errors = self.violations()
        if errors:
            raise ValueError("; ".join(errors))

    def violations(self):
        errs = []
        if not 0 < self.p <= 1:
            errs.append(f"0 < p <= 1 (got p={self.p})")
        if not self.L >= 2:
            errs.append(f"L >= 2 (got L={self.L})")
        if not self.t > 0:
            errs.append(f"t > 0 (got t={self.t})")
        if not self.trials >= 1:
            errs.append(f"trials >= 1 (got {self.trials})")
        if self.strategy is Strategy.SEQUENTIAL and not self.p > 0.5:
            errs.append(f"p > 1/2 for SEQUENTIAL (got p={self.p})")
        if self.strategy is Strategy.DIVIDE_CONQUER and self.L >= 2 and (self.L - 1) & (self.L - 2):
            errs.append(f"L - 1 a power of two for DIVIDE_CONQUER (got L={self.L})")
        if self.strategy is Strategy.INITIAL and 0 < self.p <= 1:
            lc = critical_length(self.p)
            if self.L0 is None or not self.L0 > lc:
                errs.append(f"L0 > L_c = {lc:.6g} for INITIAL (got L0={self.L0})")
        return errs


@dataclass(frozen=True)
class CostReport:
    mean_ops: float
    mean_time: float
    ci95_ops: float
    ci95_time: float
    trials: int
    analytic_ops: float
    analytic_time: float

    @property
    def stderr_ops(self):
        return self.ci95_ops / 1.96


def _report(sums, trials, t, cfg):
    s1, s2 = sums
    mean = s1 / trials
    # unbiased variance from exact integer moments
    var = (s2 * trials - s1 * s1) / (trials * (trials - 1)) if trials > 1 else 0.0
    ci = 1.96 * math.sqrt(var / trials)
    return CostReport(mean, mean * t, ci, ci * t, trials,
                      analytic_ops(cfg.strategy, cfg.p, cfg.L, cfg.L0),
                      analytic_time(cfg.strategy, cfg.p, cfg.t, cfg.L, cfg.L0))


def _fold(parts):
    # exact integer sums, so the fold is order-independent too
    return sum(a for a, _ in parts), sum(b for _, b in parts)


def _moments(ops):
    """Exact (sum, sum of squares) as Python ints."""
    if ops.size and ops.max() > 3_000_000_000:
        return sum(int(v) for v in ops), sum(int(v) * int(v) for v in ops)
    return int(ops.sum()), int((ops * ops).sum())


def sequential_ops_samples(rng, count, p, L):
    """Operations until a chain started at length 1 reaches L, per trial."""
    length = np.ones(count, dtype=np.int64)
    ops = np.zeros(count, dtype=np.int64)
    active = length < L
    while active.any():
        idx = np.flatnonzero(active)
        ok = rng.random(idx.size) < p
        length[idx] = np.where(ok, length[idx] + 1, np.maximum(1, length[idx] - 1))
        ops[idx] += 1
        active[idx] = length[idx] < L
    return ops


def mc_sequential(cfg, workers=1):
    """Random-walk model: success grows the chain by one, failure loses an end qubit."""
    if cfg.strategy is not Strategy.SEQUENTIAL:
        raise ValueError("mc_sequential needs a SEQUENTIAL config")
    parts = _rng.map_blocks(
        lambda rng, n: _moments(sequential_ops_samples(rng, n, cfg.p, cfg.L)),
        cfg.trials, cfg.seed, "sequential", workers)
    return _report(_fold(parts), cfg.trials, cfg.t, cfg)


def dc_ops_samples(rng, count, p, k):
    """Total join attempts to build one level-k chain, per trial.

    Level j needs attempts until one join succeeds (geometric); every attempt
    consumes two fresh level-(j-1) chains. The failures among B independent
    geometric waits sum to a negative binomial, so whole levels are drawn at
    once.
    """
    if k == 0:
        return np.zeros(count, dtype=np.int64)
    attempts = rng.geometric(p, size=count).astype(np.int64)
    total = attempts.copy()
    for _ in range(k - 1):
        builds = 2 * attempts
        if p < 1:
            attempts = builds + rng.negative_binomial(builds, p)
        else:
            attempts = builds
        total += attempts
    return total


def mc_divide_conquer(cfg, workers=1):
    """Monte Carlo of the restart-on-failure pairwise joining process.

    Length-2 chains are free inputs. ``mean_time`` is ``mean_ops * t`` (serial
    execution); the parallel time ``t(1 + k)`` is ``analytic_time``.
    """
    if cfg.strategy is not Strategy.DIVIDE_CONQUER:
        raise ValueError("mc_divide_conquer needs a DIVIDE_CONQUER config")
    k = dc_rounds(cfg.L)
    parts = _rng.map_blocks(lambda rng, n: _moments(dc_ops_samples(rng, n, cfg.p, k)),
                            cfg.trials, cfg.seed, "divide-conquer", workers)
    return _report(_fold(parts), cfg.trials, cfg.t, cfg)


@dataclass(frozen=True)
class JoinEvents:
    """Growth events heralded by one join attempt."""

    p_one_bond: float
    p_two_bonds: float
    p_fail: float

    @property
    def p_success(self):
        return self.p_one_bond + self.p_two_bonds


def heralded_join_model(label_probs):
    """Map gate outcome probabilities {GHZ, BELL, PRODUCT} to join events.

    BELL joins with one new dangling bond, GHZ with two, PRODUCT fails.
    """
    probs = {str(getattr(k, "value", k)).upper(): float(v) for k, v in label_probs.items()}
    unknown = set(probs) - {"GHZ", "BELL", "PRODUCT"}
    if unknown:
        raise ValueError(f"unknown outcome labels {sorted(unknown)}")
    if any(v < 0 for v in probs.values()) or not math.isclose(sum(probs.values()), 1.0, abs_tol=1e-9):
        raise ValueError(f"outcome probabilities must be >= 0 and sum to 1, got {probs}")
    return JoinEvents(probs.get("BELL", 0.0), probs.get("GHZ", 0.0), probs.get("PRODUCT", 0.0))


@dataclass
class ComparisonRow:
    L: int
    n_seq: float | None
    n_dc: float | None
    n_initial: float | None
    t_seq: float | None
    t_dc: float | None
    t_initial: float | None
    baselines: dict
    notes: list


def _try(fn, notes, tag):
    try:
        return fn()
    except ValueError as exc:
        notes.append(f"{tag}: {exc}")
        return None


def compare_strategies(p, t, Ls, baselines=BASELINES, L0=2.0):
    """Analytic operation and time counts for every strategy at each L.

    Cells whose strategy constraints fail are ``None`` with a note.
    """
    rows = []
    for L in Ls:
        notes = []
        dc_ok = L >= 2 and not (L - 1) & (L - 2)
        row = ComparisonRow(
            L=int(L),
            n_seq=_try(lambda: analytic_ops(Strategy.SEQUENTIAL, p, L), notes, "N_seq"),
            n_dc=_try(lambda: analytic_ops(Strategy.DIVIDE_CONQUER, p, L), notes, "N_dc") if dc_ok else None,
            n_initial=_try(lambda: analytic_ops(Strategy.INITIAL, p, L, L0), notes, "N_initial"),
            t_seq=_try(lambda: analytic_time(Strategy.SEQUENTIAL, p, t, L), notes, "T_seq"),
            t_dc=_try(lambda: analytic_time(Strategy.DIVIDE_CONQUER, p, t, L), notes, "T_dc") if dc_ok else None,
            t_initial=_try(lambda: analytic_time(Strategy.INITIAL, p, t, L, L0), notes, "T_initial"),
            baselines={b.name: b.ops(L) for b in baselines},
            notes=notes,
        )
        if not dc_ok:
            notes.append("N_dc,T_dc: L - 1 not a power of two")
        rows.append(row)
    return rows
