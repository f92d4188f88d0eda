"""Independent brute-force verification on explicit spin state vectors.

Builds the W state of N distinguishable spin-1/2 particles and evaluates
measurement probabilities by applying transverse-spin projectors directly to
the 2**N amplitude vector.  No integrals anywhere: this is the oracle the
quadrature formulas are checked against.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from math import comb, sqrt

import numpy as np

__all__ = [
    "SpinStateVector",
    "w_state",
    "oracle_sequence_probability",
    "oracle_all_probabilities",
    "oracle_marginal_probability",
]

_MAX_SPINS = 14
_IMAG_TOL = 1e-12


@dataclass(frozen=True)
class SpinStateVector:
    """Normalized state of ``n`` spins; amplitude index bit j set = spin j up."""

    amplitudes: np.ndarray
    n: int

    def __post_init__(self) -> None:
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (2 ** self.n,):
            raise ValueError(f"expected {2 ** self.n} amplitudes for {self.n} spins")
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"state norm^2 = {norm!r}, not 1")
        object.__setattr__(self, "amplitudes", amps)


def w_state(n_plus: int, n_minus: int) -> SpinStateVector:
    """W state: equal amplitudes on every arrangement of n_plus up spins.

    The amplitude is 1/sqrt(binom(n, n_plus)) on each basis state whose
    up-spin count is exactly ``n_plus``, zero elsewhere.
    """
    if n_plus < 0 or n_minus < 0:
        raise ValueError("particle numbers must be non-negative")
    n = n_plus + n_minus
    if n < 1:
        raise ValueError("need at least one spin")
    if n > _MAX_SPINS:
        raise ValueError(f"state vector limited to {_MAX_SPINS} spins, got {n}")
    amps = np.zeros(2 ** n, dtype=complex)
    amp = 1.0 / sqrt(comb(n, n_plus))
    for up_bits in combinations(range(n), n_plus):
        mask = 0
        for b in up_bits:
            mask |= 1 << b
        amps[mask] = amp
    return SpinStateVector(amps, n)


def _apply_projector(amps: np.ndarray, n: int, spin: int, phi: float, eta: int) -> np.ndarray:
    """Apply the transverse-spin projector (1 + eta*sigma_phi)/2 to one spin."""
    tensor = amps.reshape([2] * n)
    # axis for spin j counts from the end because bit 0 is the fastest index
    axis = n - 1 - spin
    moved = np.moveaxis(tensor, axis, -1)
    down, up = moved[..., 0], moved[..., 1]
    phase = np.exp(1j * phi)
    out = np.empty_like(moved)
    out[..., 1] = 0.5 * (up + eta * np.conj(phase) * down)
    out[..., 0] = 0.5 * (eta * phase * up + down)
    return np.moveaxis(out, -1, axis).reshape(-1)


def oracle_sequence_probability(state: SpinStateVector, angles, outcomes) -> float:
    """Probability of a full outcome sequence, one measurement per spin.

    Applies the commuting single-spin projectors in turn and takes the
    overlap with the original state; the imaginary part must vanish to
    round-off and is asserted before being dropped.
    """
    angles = [float(a) for a in angles]
    etas = [int(e) for e in outcomes]
    if len(angles) != state.n or len(etas) != state.n:
        raise ValueError("need exactly one angle and one outcome per spin")
    if any(e not in (-1, 1) for e in etas):
        raise ValueError("outcomes must be +-1")
    amps = state.amplitudes
    for spin, (phi, eta) in enumerate(zip(angles, etas)):
        amps = _apply_projector(amps, state.n, spin, phi, eta)
    overlap = complex(np.vdot(state.amplitudes, amps))
    if abs(overlap.imag) >= _IMAG_TOL:
        raise FloatingPointError(f"probability acquired imaginary part {overlap.imag}")
    return max(overlap.real, 0.0)


def oracle_all_probabilities(state: SpinStateVector, angles) -> np.ndarray:
    """All 2**n outcome probabilities at once.

    Each projector is rank one, so the joint distribution is the squared
    amplitude vector after rotating every spin into its measurement basis;
    n butterfly passes of O(2**n) work replace 2**n separate projector
    chains.  Index bit j set means spin j gave +1.
    """
    angles = [float(a) for a in angles]
    if len(angles) != state.n:
        raise ValueError("need exactly one angle per spin")
    tensor = state.amplitudes.reshape([2] * state.n).copy()
    inv_sqrt2 = 1.0 / sqrt(2.0)
    for spin, phi in enumerate(angles):
        axis = state.n - 1 - spin
        moved = np.moveaxis(tensor, axis, -1)
        down, up = moved[..., 0].copy(), moved[..., 1].copy()
        phase = np.exp(-1j * phi)
        # rows of the basis change: <e_eta| = (<up| + eta e^{-i phi} <down|)/sqrt2
        moved[..., 1] = (up + phase * down) * inv_sqrt2
        moved[..., 0] = (up - phase * down) * inv_sqrt2
        tensor = np.moveaxis(moved, -1, axis)
    probs = np.abs(tensor.reshape(-1)) ** 2
    return probs


def oracle_marginal_probability(state: SpinStateVector, angles, outcomes) -> float:
    """Probability of the first m < n outcomes, remaining spins unmeasured.

    Summing the full-sequence probability over all completions collapses,
    because the two projectors of an unmeasured spin add to the identity; so
    the marginal is the overlap after applying only the m performed
    projectors.  (The explicit completion sum is exercised in the tests.)
    """
    angles = [float(a) for a in angles]
    etas = [int(e) for e in outcomes]
    if len(angles) != len(etas):
        raise ValueError("angles and outcomes must pair up")
    if len(angles) >= state.n:
        raise ValueError("marginal requires m < n; use the full-sequence routine")
    if any(e not in (-1, 1) for e in etas):
        raise ValueError("outcomes must be +-1")
    amps = state.amplitudes
    for spin, (phi, eta) in enumerate(zip(angles, etas)):
        amps = _apply_projector(amps, state.n, spin, phi, eta)
    overlap = complex(np.vdot(state.amplitudes, amps))
    if abs(overlap.imag) >= _IMAG_TOL:
        raise FloatingPointError(f"probability acquired imaginary part {overlap.imag}")
    return max(overlap.real, 0.0)
