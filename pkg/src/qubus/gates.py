"""Heralded 2- and 3-qubit entangling gates on a coherent bus.

Each gate rotates the bus by a qubit-dependent phase, measures the P
quadrature and bins the outcome between the midpoints of adjacent peak means.
The bin heralds which set of branches survived and hence the qubit state.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize
from scipy.special import erfc, ndtr

from . import _rng
from .core import (
    JointState,
    _conditioned,
    apply_conditional_rotation,
    condition_on_outcome,
    homodyne_pdf,
    sample_homodyne,
)

PHASE_MERGE_TOL = 1e-12
RANK_TOL = 1e-8
QUAD_WINDOW = 10.0

# multiples of theta applied to each qubit
ROTATIONS = {"2q": (1, 1), "3q": (1, 1, -2)}


class Label(str, enum.Enum):
    GHZ = "GHZ"
    BELL = "BELL"
    PRODUCT = "PRODUCT"


class QuadratureError(ArithmeticError):
    pass


@dataclass(frozen=True, eq=False)
class Peak:
    bus_phase: float
    mean: float
    prob: float
    qubit_state: np.ndarray
    label: Label


@dataclass(frozen=True, eq=False)
class PeakSpectrum:
    """Distinct bus end-points of ``state``, sorted by P-quadrature mean."""

    peaks: tuple
    state: JointState
    thresholds: np.ndarray = field(init=False)

    def __post_init__(self):
        means = np.array([p.mean for p in self.peaks])
        object.__setattr__(self, "thresholds", 0.5 * (means[1:] + means[:-1]))

    @property
    def means(self):
        return np.array([p.mean for p in self.peaks])

    @property
    def probs(self):
        return np.array([p.prob for p in self.peaks])

    def label_probs(self):
        out = {}
        for p in self.peaks:
            out[p.label] = out.get(p.label, 0.0) + p.prob
        return out

    def bin_edges(self, k):
        lo = self.thresholds[k - 1] if k > 0 else -math.inf
        hi = self.thresholds[k] if k < len(self.thresholds) else math.inf
        return lo, hi


@dataclass(frozen=True, eq=False)
class HeraldedOutcome:
    peak_index: int
    x: float
    projected_state: np.ndarray
    fidelity_to_target: float
    label: Label
    # per-qubit phase applied to |1> that maximizes the fidelity
    z_corrections: tuple = ()


def schmidt_ranks(psi, n):
    """Schmidt rank of each single-qubit cut."""
    t = np.asarray(psi).reshape((2,) * n)
    ranks = []
    for q in range(n):
        m = np.moveaxis(t, q, 0).reshape(2, -1)
        s = np.linalg.svd(m, compute_uv=False)
        ranks.append(int(np.sum(s > RANK_TOL * s[0])))
    return ranks


def entanglement_label(psi, n):
    """Classify a pure state of n <= 3 qubits as GHZ, BELL or PRODUCT.

    GHZ means entangled across every single-qubit cut of a 3-qubit register;
    BELL means exactly one entangled pair with any remaining qubit in a
    product with it.
    """
    if n > 3:
        raise ValueError(f"labels are defined for at most 3 qubits, got {n}")
    ranks = schmidt_ranks(psi, n)
    entangled = sum(r > 1 for r in ranks)
    if entangled == 0:
        return Label.PRODUCT
    if entangled == 2:
        return Label.BELL
    return Label.GHZ


def _phase_groups(state):
    order = np.argsort(state.phases, kind="stable")
    groups, start = [], 0
    for i in range(1, order.size + 1):
        if i == order.size or state.phases[order[i]] - state.phases[order[i - 1]] > PHASE_MERGE_TOL:
            groups.append(order[start:i])
            start = i
    return groups


def peak_spectrum(state, reference=None):
    """Group the branches of ``state`` by bus phase.

    With ``reference`` the peak set (and so the decision bins) comes from the
    reference branches, e.g. a gate acting on every basis state, while
    probabilities and qubit states come from ``state``. Peaks that ``state``
    never populates keep probability 0 and the reference's qubit state.
    """
    state.check_normalized()
    ref = state if reference is None else reference
    pos = {int(i): k for k, i in enumerate(state.indices)}
    claimed = 0
    peaks = []
    for g in _phase_groups(ref):
        phase = float(ref.phases[g[0]])
        mine = np.array([pos[int(i)] for i in ref.indices[g] if int(i) in pos], dtype=np.int64)
        if mine.size and np.max(np.abs(state.phases[mine] - phase)) > PHASE_MERGE_TOL:
            raise ValueError("state and reference disagree on bus phases")
        claimed += mine.size
        w = float(np.sum(np.abs(state.amps[mine]) ** 2))
        psi = np.zeros(state.dim, dtype=np.complex128)
        if w > 0:
            psi[state.indices[mine]] = state.amps[mine] / math.sqrt(w)
        else:
            ra = ref.amps[g]
            psi[ref.indices[g]] = ra / np.linalg.norm(ra)
        label = entanglement_label(psi, state.n) if state.n <= 3 else None
        peaks.append(Peak(phase, 2.0 * state.alpha * math.sin(phase), w, psi, label))
    if claimed != state.indices.size:
        raise ValueError("state has branches missing from the reference")
    peaks.sort(key=lambda p: (p.mean, p.bus_phase))
    return PeakSpectrum(tuple(peaks), state)


def decision_thresholds(spectrum):
    """Midpoints between adjacent peak means."""
    return [float(t) for t in spectrum.thresholds]


def bin_index(x, spectrum):
    # side="left": x exactly on a threshold goes to the lower-mean peak
    return np.searchsorted(spectrum.thresholds, x, side="left")


def _bit_rows(indices, n):
    return (np.asarray(indices)[:, None] >> (n - 1 - np.arange(n))) & 1


def _branch_target(state, target):
    """Target amplitudes on the state's branches: (branch positions, conj amps, bits)."""
    t = target[state.indices]
    supp = np.flatnonzero(np.abs(t) > 1e-14)
    return supp, np.conj(t[supp]), _bit_rows(state.indices[supp], state.n)


def _best_z_phases(c, bits):
    """Maximize |sum_k c_k exp(i phi . bits_k)| over per-qubit phases phi.

    ``c`` has shape (..., K). Returns (max |.|^2, phi) with phi shaped (..., n).
    """
    c = np.asarray(c)
    k, n = bits.shape
    phi = np.zeros(c.shape[:-1] + (n,))
    if k == 0:
        return np.zeros(c.shape[:-1]), phi
    if k == 1:
        return np.abs(c[..., 0]) ** 2, phi
    if k == 2:
        q = int(np.flatnonzero(bits[0] != bits[1])[0])
        d = np.angle(c[..., 0]) - np.angle(c[..., 1])
        # rotate the term whose qubit q is 1 onto the other
        phi[..., q] = np.where(bits[1, q] == 1, d, -d)
        return (np.abs(c[..., 0]) + np.abs(c[..., 1])) ** 2, phi
    flat_c = c.reshape(-1, k)
    f_out = np.empty(flat_c.shape[0])
    phi_out = np.empty((flat_c.shape[0], n))
    for r, row in enumerate(flat_c):
        def neg(p, row=row):
            return -abs(np.sum(row * np.exp(1j * (bits @ p)))) ** 2
        best = None
        for start in (np.zeros(n), -np.angle(row[0]) * np.ones(n) / n):
            res = optimize.minimize(neg, start, method="BFGS")
            if best is None or res.fun < best.fun:
                best = res
        f_out[r], phi_out[r] = -best.fun, best.x
    return f_out.reshape(c.shape[:-1]), phi_out.reshape(c.shape[:-1] + (n,))


def corrected_fidelity(psi, target, n):
    """Fidelity of ``psi`` to ``target`` after the best single-qubit Z rotations."""
    supp = np.flatnonzero(np.abs(target) > 1e-14)
    c = np.conj(target[supp]) * np.asarray(psi)[supp]
    bits = _bit_rows(supp, n)
    f, phi = _best_z_phases(c, bits)
    return float(min(1.0, f)), tuple(float(p) for p in phi)


def classify_outcome(x, spectrum):
    if not spectrum.peaks:
        raise ValueError("empty spectrum")
    k = int(bin_index(x, spectrum))
    peak = spectrum.peaks[k]
    psi, _ = condition_on_outcome(spectrum.state, x)
    f, phi = corrected_fidelity(psi, peak.qubit_state, spectrum.state.n)
    return HeraldedOutcome(k, float(x), psi, f, peak.label, phi)


def p_err(alpha, gap):
    """Overlap error 1/2 erfc(alpha sin(gap) / sqrt 2) between two bus states."""
    if not alpha >= 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    if not 0 <= gap <= math.pi:
        raise ValueError(f"gap must lie in [0, pi], got {gap}")
    return float(0.5 * erfc(alpha * math.sin(gap) / math.sqrt(2.0)))


def exact_misclassification(spectrum):
    """Probability that the outcome lands outside its own peak's bin."""
    total = 0.0
    for k, peak in enumerate(spectrum.peaks):
        lo, hi = spectrum.bin_edges(k)
        total += peak.prob * (ndtr(lo - peak.mean) + ndtr(peak.mean - hi))
    return float(total)


def _default_input(kind):
    n = len(ROTATIONS[kind])
    return np.full(1 << n, 2 ** (-n / 2), dtype=np.complex128)


def prepare(config, kind, psi=None):
    """Attach ``|alpha>`` to the qubits and apply the gate's conditional rotations."""
    if kind not in ROTATIONS:
        raise ValueError(f"unknown gate kind {kind!r}; expected one of {sorted(ROTATIONS)}")
    mults = ROTATIONS[kind]
    psi = _default_input(kind) if psi is None else np.asarray(psi, dtype=np.complex128)
    if psi.size != 1 << len(mults):
        raise ValueError(f"{kind} gate needs a {len(mults)}-qubit input state")
    state = JointState.from_qubits(psi, config.alpha)
    state.check_normalized()
    for q, m in enumerate(mults):
        state = apply_conditional_rotation(state, q, m * config.theta)
    return state


def gate_spectrum(config, kind, psi=None):
    """Spectrum of the gate output with bins fixed by the gate, not the input."""
    return peak_spectrum(prepare(config, kind, psi), reference=prepare(config, kind))


def _run(config, kind, psi, rng):
    spec = gate_spectrum(config, kind, psi)
    return classify_outcome(sample_homodyne(spec.state, rng), spec)


def run_parity_gate_2q(config, psi, rng):
    """One shot of the 2-qubit parity gate; R(theta sigma_z) on each qubit."""
    return _run(config, "2q", psi, rng)


def run_gate_3q(config, psi, rng):
    """One shot of the 3-qubit gate R(th sz1) R(th sz2) R(-2 th sz3)."""
    return _run(config, "3q", psi, rng)


@dataclass
class GateStats:
    """Aggregated outcome counts and fidelity sums over many shots."""

    spectrum: PeakSpectrum
    trials: int = 0
    peak_counts: np.ndarray = None
    fidelity_sums: np.ndarray = None

    def __post_init__(self):
        k = len(self.spectrum.peaks)
        if self.peak_counts is None:
            self.peak_counts = np.zeros(k, dtype=np.int64)
        if self.fidelity_sums is None:
            self.fidelity_sums = np.zeros(k)

    def label_frequencies(self):
        out = {}
        for p, c in zip(self.spectrum.peaks, self.peak_counts):
            out[p.label] = out.get(p.label, 0) + c
        return {lab: c / self.trials for lab, c in out.items()} if self.trials else {}

    def label_mean_fidelity(self):
        counts, sums = {}, {}
        for p, c, s in zip(self.spectrum.peaks, self.peak_counts, self.fidelity_sums):
            counts[p.label] = counts.get(p.label, 0) + c
            sums[p.label] = sums.get(p.label, 0.0) + s
        return {lab: sums[lab] / counts[lab] for lab in counts if counts[lab]}


def _shot_block(spec, rng, count):
    state = spec.state
    x = sample_homodyne(state, rng, size=count)
    k = bin_index(x, spec)
    amps, _ = _conditioned(state, x)
    fid = np.empty(count)
    for j, peak in enumerate(spec.peaks):
        rows = k == j
        if not rows.any():
            continue
        supp, tc, bits = _branch_target(state, peak.qubit_state)
        c = tc * amps[rows][:, supp]
        f, _ = _best_z_phases(c, bits)
        fid[rows] = np.minimum(f, 1.0)
    npk = len(spec.peaks)
    return (np.bincount(k, minlength=npk),
            np.bincount(k, weights=fid, minlength=npk))


def run_gate_trials(config, kind, trials, seed, psi=None, workers=1):
    """Vectorized Monte Carlo of ``trials`` gate shots with block-seeded streams."""
    if trials < 0:
        raise ValueError("trials must be >= 0")
    spec = gate_spectrum(config, kind, psi)
    stats = GateStats(spec, trials)
    parts = _rng.map_blocks(lambda rng, n: _shot_block(spec, rng, n),
                            trials, seed, f"gate-{kind}", workers)
    for counts, fsum in parts:
        stats.peak_counts += counts
        stats.fidelity_sums += fsum
    return stats


def _peak_integrals(spec, k):
    """(probability mass, fidelity-weighted mass) of bin k, by adaptive quadrature."""
    state = spec.state
    peak = spec.peaks[k]
    lo, hi = spec.bin_edges(k)
    means = spec.means
    lo = max(lo, means.min() - QUAD_WINDOW)
    hi = min(hi, means.max() + QUAD_WINDOW)
    if hi <= lo:
        return 0.0, 0.0
    supp, tc, bits = _branch_target(state, peak.qubit_state)

    def fid_density(x):
        amps, log_w = _conditioned(state, x)
        f, _ = _best_z_phases(tc * amps[supp], bits)
        return math.exp(log_w) * min(1.0, float(f))

    # break the interval at peak centres so quad sees each bump
    pts = sorted(m for m in means if lo < m < hi)
    mass = 0.0
    weighted = 0.0
    edges = [lo, *pts, hi]
    for a, b in zip(edges[:-1], edges[1:]):
        m, em = integrate.quad(lambda x: homodyne_pdf(state, x), a, b, epsabs=1e-13, epsrel=1e-12, limit=200)
        w, ew = integrate.quad(fid_density, a, b, epsabs=1e-13, epsrel=1e-12, limit=200)
        if em > 1e-9 or ew > 1e-9:
            raise QuadratureError(
                f"quadrature on [{a}, {b}] for peak {k} did not converge "
                f"(error estimates {em:.2e}, {ew:.2e})")
        mass += m
        weighted += w
    return mass, weighted


def expected_conditional_fidelity(config, gate, psi=None, per_peak=False):
    """Mean Z-corrected fidelity of the heralded state to its peak target, per label.

    With ``alpha sin(theta) == 0`` the bus carries no information, every bin
    but the outermost collapses, and the conditional state is the input; the
    result is then the input's fidelity to each peak target weighted by the
    peak probability.
    """
    spec = gate_spectrum(config, gate, psi)
    n = spec.state.n
    mass, weighted = [], []
    if config.separation == 0 or len(spec.peaks) == 1:
        psi_in = spec.state.qubit_vector()
        for p in spec.peaks:
            f, _ = corrected_fidelity(psi_in, p.qubit_state, n)
            mass.append(p.prob)
            weighted.append(p.prob * f)
    else:
        for k in range(len(spec.peaks)):
            m, w = _peak_integrals(spec, k)
            mass.append(m)
            weighted.append(w)
    if per_peak:
        return [w / m if m > 0 else math.nan for m, w in zip(mass, weighted)]
    tot_m, tot_w = {}, {}
    for p, m, w in zip(spec.peaks, mass, weighted):
        tot_m[p.label] = tot_m.get(p.label, 0.0) + m
        tot_w[p.label] = tot_w.get(p.label, 0.0) + w
    return {lab: tot_w[lab] / tot_m[lab] for lab in tot_m if tot_m[lab] > 0}


def center_peak_index(spectrum):
    """Index of the peak whose bus phase is zero (closest to zero)."""
    return int(np.argmin([abs(p.bus_phase) for p in spectrum.peaks]))
