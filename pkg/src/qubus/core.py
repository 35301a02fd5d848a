"""Joint state of matter qubits and a single coherent bus mode.

The dispersive qubit-bus coupling only rotates the bus phase conditioned on
each qubit's sigma_z value, so a state that starts as (qubit superposition) x
|alpha> stays a sum of computational-basis branches, each carrying its own
coherent bus amplitude ``alpha * exp(i * bus_phase)``. Nothing here needs a
Fock-space truncation.

Conventions
-----------
* Qubit 0 is the most significant bit of the basis index; bit value 0 is the
  sigma_z = +1 eigenstate.
* Quadratures are ``X(phi) = a^dag e^{i phi} + a e^{-i phi}`` (vacuum variance
  1). Only the P = X(pi/2) quadrature is measured. A coherent state ``beta``
  has P-mean ``2 Im(beta)``.
* ``<x|beta>`` on the P quadrature is ``<x_Q| beta e^{-i pi/2}>`` with the
  standard Q-quadrature wavefunction::

      <x_Q|b> = (2 pi)^{-1/4} exp(-(x - 2 Re b)^2 / 4 + i Im(b) x - i Re(b) Im(b))
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

MAX_QUBITS = 20
MAX_DENSE_QUBITS = 12
OVERLAP_RANGE = 50.0
PRUNE_TOL = 1e-15
NORM_TOL = 1e-12
DEGENERATE_WEIGHT = 1e-300

_LOG_NORM = -0.25 * math.log(2.0 * math.pi)


class DegenerateOutcomeError(ArithmeticError):
    """Homodyne outcome lies where the probability density vanishes."""


def theta_from_physics(chi, t_int):
    """Conditional rotation angle ``chi * t_int`` (rad/s times s)."""
    if not math.isfinite(chi):
        raise ValueError(f"chi must be finite, got {chi}")
    if not t_int >= 0:
        raise ValueError(f"interaction time must be >= 0, got {t_int}")
    return chi * t_int


def chi_from_coupling(g, delta):
    """Dispersive coupling ``g**2 / delta``."""
    if delta == 0:
        raise ValueError("detuning must be nonzero")
    return g * g / delta


@dataclass(frozen=True)
class PhysicalParams:
    g: float
    delta: float
    chi: float
    t_int: float

    @classmethod
    def from_coupling(cls, g, delta, t_int):
        return cls(g=g, delta=delta, chi=chi_from_coupling(g, delta), t_int=t_int)


@dataclass(frozen=True)
class GateConfig:
    """Bus amplitude and per-qubit rotation angle, optionally tied to physics."""

    alpha: float
    theta: float
    physics: PhysicalParams | None = None

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and self.alpha >= 0):
            raise ValueError(f"alpha must be finite and >= 0, got {self.alpha}")
        if not math.isfinite(self.theta):
            raise ValueError(f"theta must be finite, got {self.theta}")
        ph = self.physics
        if ph is not None:
            chi = chi_from_coupling(ph.g, ph.delta)
            if not math.isclose(ph.chi, chi, rel_tol=1e-12, abs_tol=0.0):
                raise ValueError(f"chi={ph.chi} inconsistent with g^2/delta={chi}")
            th = theta_from_physics(ph.chi, ph.t_int)
            if not math.isclose(self.theta, th, rel_tol=1e-12, abs_tol=1e-300):
                raise ValueError(f"theta={self.theta} inconsistent with chi*t={th}")

    @classmethod
    def from_physics(cls, alpha, g, delta, t_int):
        ph = PhysicalParams.from_coupling(g, delta, t_int)
        return cls(alpha=alpha, theta=theta_from_physics(ph.chi, ph.t_int), physics=ph)

    @property
    def separation(self):
        """alpha * |sin(theta)|; must be positive for peaks to be told apart."""
        return self.alpha * abs(math.sin(self.theta))


@dataclass(frozen=True)
class Branch:
    bits: str
    amp: complex
    bus_phase: float


def _bits(index, n):
    return format(index, f"0{n}b")


def _readonly(a):
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class JointState:
    """Immutable qubit-register-plus-bus state stored as pruned branch arrays.

    ``indices[k]`` is the basis index of branch k, ``amps[k]`` its amplitude and
    ``phases[k]`` the accumulated bus phase.
    """

    n: int
    alpha: float
    indices: np.ndarray
    amps: np.ndarray
    phases: np.ndarray
    _dim: int = field(init=False, repr=False)

    def __post_init__(self):
        if not 1 <= self.n <= MAX_QUBITS:
            raise ValueError(f"register size must be in [1, {MAX_QUBITS}], got {self.n}")
        if not (math.isfinite(self.alpha) and self.alpha >= 0):
            raise ValueError(f"alpha must be finite and >= 0, got {self.alpha}")
        idx = np.asarray(self.indices, dtype=np.int64)
        amps = np.asarray(self.amps, dtype=np.complex128)
        phases = np.asarray(self.phases, dtype=np.float64)
        if not idx.shape == amps.shape == phases.shape or idx.ndim != 1:
            raise ValueError("indices, amps and phases must be 1-D arrays of equal length")
        dim = 1 << self.n
        if idx.size and (idx.min() < 0 or idx.max() >= dim):
            raise ValueError("basis index out of range for register size")
        if np.unique(idx).size != idx.size:
            raise ValueError("duplicate basis states in branch list")
        if not (np.all(np.isfinite(amps.view(np.float64))) and np.all(np.isfinite(phases))):
            raise ValueError("non-finite amplitude or bus phase")
        keep = np.abs(amps) >= PRUNE_TOL
        object.__setattr__(self, "indices", _readonly(idx[keep].copy()))
        object.__setattr__(self, "amps", _readonly(amps[keep].copy()))
        object.__setattr__(self, "phases", _readonly(phases[keep].copy()))
        object.__setattr__(self, "_dim", dim)

    @classmethod
    def from_qubits(cls, psi, alpha, normalize=False):
        """Attach a bus ``|alpha>`` to a dense qubit state vector of length 2**n."""
        psi = np.asarray(psi, dtype=np.complex128).ravel()
        n = psi.size.bit_length() - 1
        if psi.size < 2 or 1 << n != psi.size:
            raise ValueError(f"state length {psi.size} is not a power of two >= 2")
        if normalize:
            psi = psi / np.linalg.norm(psi)
        idx = np.flatnonzero(np.abs(psi) >= PRUNE_TOL)
        return cls(n, float(alpha), idx, psi[idx], np.zeros(idx.size))

    @classmethod
    def plus(cls, n, alpha):
        """|+>^n with the bus in |alpha>."""
        dim = 1 << n
        return cls(n, float(alpha), np.arange(dim), np.full(dim, dim ** -0.5), np.zeros(dim))

    @classmethod
    def basis(cls, bits, alpha):
        return cls(len(bits), float(alpha), [int(bits, 2)], [1.0], [0.0])

    @property
    def dim(self):
        return self._dim

    @property
    def branches(self):
        return [Branch(_bits(int(i), self.n), complex(a), float(p))
                for i, a, p in zip(self.indices, self.amps, self.phases)]

    @property
    def norm_squared(self):
        return float(np.sum(np.abs(self.amps) ** 2))

    @property
    def bus_amplitudes(self):
        """Coherent amplitude of the bus in each branch."""
        return self.alpha * np.exp(1j * self.phases)

    @property
    def peak_means(self):
        """P-quadrature mean of each branch's bus state."""
        return 2.0 * self.alpha * np.sin(self.phases)

    def qubit_vector(self, amps=None):
        psi = np.zeros(self._dim, dtype=np.complex128)
        psi[self.indices] = self.amps if amps is None else amps
        return psi

    def bit(self, qubit):
        """Value of ``qubit`` in every branch (0/1 array)."""
        return (self.indices >> (self.n - 1 - qubit)) & 1

    def check_normalized(self):
        ns = self.norm_squared
        if abs(ns - 1.0) > NORM_TOL:
            raise ValueError(f"state is not normalized: sum |amp|^2 = {ns!r}")

    def with_phases(self, phases):
        return JointState(self.n, self.alpha, self.indices, self.amps, phases)


def apply_conditional_rotation(state, qubit, theta):
    """Apply R(theta sigma_z) for ``qubit``: bus phase +theta if bit is 0, -theta if 1."""
    if not (isinstance(qubit, (int, np.integer)) and 0 <= qubit < state.n):
        raise ValueError(f"qubit index {qubit} out of range for {state.n} qubits")
    sign = 1 - 2 * state.bit(int(qubit))
    return state.with_phases(state.phases + theta * sign)


def coherent_overlap(beta1, beta2):
    """<beta1|beta2> for coherent states."""
    if abs(beta1) > OVERLAP_RANGE or abs(beta2) > OVERLAP_RANGE:
        raise ValueError(f"coherent amplitudes must satisfy |beta| <= {OVERLAP_RANGE}")
    return complex(_overlap(np.complex128(beta1), np.complex128(beta2)))


def _overlap(b1, b2):
    # exp(-(|b1|^2+|b2|^2)/2 + conj(b1) b2) rewritten to avoid overflow at large |b|
    c = np.conj(b1) * b2
    return np.exp(-0.5 * np.abs(b1 - b2) ** 2 + 1j * c.imag)


def _log_quadrature_amplitude(x, beta):
    """Complex log of <x|beta> on the P quadrature; broadcasts over x and beta."""
    x = np.asarray(x, dtype=np.float64)
    beta = np.asarray(beta, dtype=np.complex128)
    re, im = beta.real, beta.imag
    return _LOG_NORM - 0.25 * (x - 2.0 * im) ** 2 + 1j * (re * im - re * x)


def quadrature_amplitude(x, beta):
    """P-quadrature wavefunction ``<x|beta>`` of coherent state ``beta``.

    ``|<x|beta>|^2`` is a unit-variance Gaussian with mean ``2 Im(beta)``.
    """
    out = np.exp(_log_quadrature_amplitude(x, beta))
    return complex(out) if out.ndim == 0 else out


def _gauss(x, mu):
    return np.exp(-0.5 * (x - mu) ** 2) / math.sqrt(2.0 * math.pi)


def homodyne_pdf(state, x):
    """Probability density of P-quadrature outcome ``x``; vectorized over ``x``."""
    state.check_normalized()
    x = np.asarray(x, dtype=np.float64)
    w = np.abs(state.amps) ** 2
    dens = _gauss(x[..., None], state.peak_means) @ w
    return float(dens) if dens.ndim == 0 else dens


def homodyne_cdf(state, x):
    from scipy.special import ndtr

    x = np.asarray(x, dtype=np.float64)
    out = ndtr(x[..., None] - state.peak_means) @ (np.abs(state.amps) ** 2)
    return float(out) if out.ndim == 0 else out


def sample_homodyne(state, rng, size=None):
    """Draw P-quadrature outcome(s): pick a branch by weight, then add unit Gaussian noise."""
    state.check_normalized()
    w = np.abs(state.amps) ** 2
    w = w / w.sum()
    means = state.peak_means
    k = rng.choice(w.size, size=size, p=w)
    return means[k] + rng.standard_normal(size)


def _conditioned(state, x):
    """Normalized conditional qubit amplitudes and log of the outcome density.

    Works in log space so the state stays accurate deep in the tails; ``x``
    may be an array, giving one row per outcome.
    """
    x = np.asarray(x, dtype=np.float64)
    logs = np.log(state.amps) + _log_quadrature_amplitude(x[..., None], state.bus_amplitudes)
    shift = logs.real.max(axis=-1, keepdims=True)
    a = np.exp(logs - shift)
    nrm = np.linalg.norm(a, axis=-1, keepdims=True)
    return a / nrm, 2.0 * (shift[..., 0] + np.log(nrm[..., 0]))


def condition_on_outcome(state, x):
    """Project the bus onto P-eigenstate ``x``.

    Returns ``(psi, weight)`` where ``psi`` is the dense normalized qubit state
    and ``weight`` equals ``homodyne_pdf(state, x)``.
    """
    state.check_normalized()
    amps, log_w = _conditioned(state, float(x))
    weight = math.exp(log_w)
    if not weight >= DEGENERATE_WEIGHT:
        raise DegenerateOutcomeError(
            f"outcome x={x} has density {weight:.3g} below {DEGENERATE_WEIGHT:g}")
    return state.qubit_vector(amps), weight


def reduced_density_matrix(state):
    """Qubit density matrix after tracing out the bus (dense, n <= 12)."""
    state.check_normalized()
    if state.n > MAX_DENSE_QUBITS:
        raise ValueError(f"dense density matrix limited to {MAX_DENSE_QUBITS} qubits")
    b = state.bus_amplitudes
    # tr(|b_s><b_s'|) = <b_s'|b_s>
    ov = _overlap(b[None, :], b[:, None])
    block = np.outer(state.amps, state.amps.conj()) * ov
    rho = np.zeros((state.dim, state.dim), dtype=np.complex128)
    rho[np.ix_(state.indices, state.indices)] = block
    return rho


def fidelity(psi, target):
    """|<target|psi>|^2 for normalized dense state vectors."""
    psi = np.asarray(psi, dtype=np.complex128).ravel()
    target = np.asarray(target, dtype=np.complex128).ravel()
    if psi.shape != target.shape:
        raise ValueError(f"dimension mismatch: {psi.size} vs {target.size}")
    return float(min(1.0, abs(np.vdot(target, psi)) ** 2))
