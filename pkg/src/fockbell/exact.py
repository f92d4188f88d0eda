"""Exact evaluation of measurement statistics for a double Fock state.

Every probability here is a trigonometric-polynomial integral over one or two
compact angle variables, so an equispaced periodic trapezoid rule integrates
it exactly (to round-off) once the node count exceeds the trig degree.  The
closed-form combinatoric routes (factorial sum, correction factor, Gaussian
approximation) are kept alongside the quadrature routes; the test suite holds
the two against each other.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from math import lgamma

import numpy as np

from .model import ExperimentConfig, OutcomeSequence

__all__ = [
    "QuadratureRule",
    "UnnormalizableConfigError",
    "normalization_cn",
    "sequence_probability",
    "all_sequence_probabilities",
    "correlation_e",
    "correlation_e_outcome_sum",
    "correlation_closed_form",
    "correlation_gaussian",
    "gaussian_product_correlation",
    "correction_factor_g",
    "classical_sequence_probability",
    "classical_all_probabilities",
    "classical_product_correlation",
]

# Memory ceiling for the vectorized outcome trees, in float64 elements.
_TREE_BUDGET = 2 * 10**7
_MAX_TREE_M = 20


class UnnormalizableConfigError(ValueError):
    """Raised when the configuration's normalization coefficient vanishes."""


@dataclass(frozen=True)
class QuadratureRule:
    """Equispaced periodic trapezoid rule on [-pi, pi).

    With ``node_count`` = K the rule integrates every trigonometric
    polynomial of degree < K exactly, under the d(angle)/2pi convention where
    the integral is just the node mean.
    """

    node_count: int

    def __post_init__(self) -> None:
        if self.node_count < 1:
            raise ValueError("need at least one node")

    @classmethod
    def for_particles(cls, n: int) -> "QuadratureRule":
        # Integrands below have trig degree <= 2n per variable; 2(n+2) leaves
        # round-off margin on top of exactness.
        return cls(2 * (n + 2))

    @property
    def nodes(self) -> np.ndarray:
        k = self.node_count
        return -np.pi + 2.0 * np.pi * np.arange(k) / k

    def integrate(self, values: np.ndarray, axis: int = -1) -> np.ndarray:
        """Mean over nodes, i.e. the integral with measure d(angle)/2pi."""
        return np.mean(values, axis=axis)


def normalization_cn(n_plus: int, n_minus: int) -> float:
    """Normalization coefficient of the outcome distribution.

    Equals the integral of cos((n_plus - n_minus)*L) * cos(L)**n over
    dL/2pi, which reduces to binom(n, n_plus) / 2**n; evaluated through
    log-gamma so that very large particle numbers stay finite.
    """
    if n_plus < 0 or n_minus < 0:
        raise ValueError("particle numbers must be non-negative")
    n = n_plus + n_minus
    if n == 0:
        return 1.0
    return math.exp(lgamma(n + 1) - lgamma(n_plus + 1) - lgamma(n_minus + 1) - n * math.log(2.0))


def _bracket_grid(config: ExperimentConfig):
    """Common (Lambda, lambda) grid pieces for the double-integral formulas."""
    rule = QuadratureRule.for_particles(config.n)
    nodes = rule.nodes
    cos_l = np.cos(nodes)[:, None]          # cos(Lambda), big-angle axis 0
    lam = nodes[None, :]                    # lambda, axis 1
    diff = config.n_plus - config.n_minus
    weight = np.cos(diff * nodes)[:, None] * cos_l ** (config.n - config.m)
    return cos_l, lam, weight


def sequence_probability(config: ExperimentConfig, outcomes: OutcomeSequence) -> float:
    """Probability of an ordered outcome sequence (any M <= N).

    Unperformed measurements are already summed out, so the result is the
    marginal over the first M measurements; the sum over all 2**M sequences
    is 1.  Tiny negative round-off is clamped to 0.
    """
    if len(outcomes) != config.m:
        raise ValueError("outcome sequence length must match the angle count")
    cn = normalization_cn(config.n_plus, config.n_minus)
    if cn <= 0.0:
        raise UnnormalizableConfigError("unnormalizable configuration")
    cos_l, lam, integrand = _bracket_grid(config)
    for eta, phi in zip(outcomes.etas, config.angles):
        integrand = integrand * (cos_l + eta * np.cos(lam - phi))
    value = float(integrand.mean()) / (2 ** config.m * cn)
    if value < -1e-12:
        raise FloatingPointError(f"probability fell to {value}, beyond round-off")
    return max(value, 0.0)


def all_sequence_probabilities(config: ExperimentConfig) -> np.ndarray:
    """Probabilities of all 2**M outcome sequences in one pass.

    Index ``i`` holds the sequence whose j-th outcome is +1 exactly when bit
    j of ``i`` is set.  The bracket products are built over a binary tree so
    each sequence costs O(1) grid multiplications; the grid is chunked to
    bound memory.
    """
    m = config.m
    if m > _MAX_TREE_M:
        raise ValueError(f"full outcome table limited to M <= {_MAX_TREE_M}, got {m}")
    cn = normalization_cn(config.n_plus, config.n_minus)
    if cn <= 0.0:
        raise UnnormalizableConfigError("unnormalizable configuration")
    cos_l, lam, weight = _bracket_grid(config)
    shape = (cos_l.shape[0], lam.shape[1])
    cells = shape[0] * shape[1]
    chunk = max(1, min(cells, _TREE_BUDGET // (2 ** m)))
    flat_weight = np.broadcast_to(weight, shape).ravel()
    flat_cos_l = np.broadcast_to(cos_l, shape).ravel()
    flat_lam = np.broadcast_to(lam, shape).ravel()
    out = np.zeros(2 ** m)
    for start in range(0, cells, chunk):
        sl = slice(start, start + chunk)
        tree = flat_weight[sl][None, :]
        for phi in config.angles:
            c = np.cos(flat_lam[sl] - phi)
            minus = tree * (flat_cos_l[sl] - c)
            plus = tree * (flat_cos_l[sl] + c)
            tree = np.concatenate([minus, plus], axis=0)
        out += tree.sum(axis=1)
    out /= cells * 2 ** m * cn
    np.clip(out, 0.0, None, out=out)
    return out


def correlation_e(config: ExperimentConfig) -> float:
    """Quantum average of the product of all M results, by direct quadrature."""
    cn = normalization_cn(config.n_plus, config.n_minus)
    if cn <= 0.0:
        raise UnnormalizableConfigError("unnormalizable configuration")
    cos_l, lam, integrand = _bracket_grid(config)
    for phi in config.angles:
        integrand = integrand * np.cos(lam - phi)
    return float(integrand.mean()) / cn


def correlation_e_outcome_sum(config: ExperimentConfig) -> float:
    """Same average as :func:`correlation_e` via the explicit outcome sum.

    Kept as a permanent second route; the two must agree to round-off.
    """
    probs = all_sequence_probabilities(config)
    idx = np.arange(probs.size, dtype=np.uint32)
    # parity of minus-outcomes = m - popcount(index)
    pop = np.zeros(probs.size, dtype=np.int64)
    x = idx.copy()
    while x.any():
        pop += x & 1
        x >>= 1
    signs = np.where((config.m - pop) % 2, -1.0, 1.0)
    return float(np.dot(signs, probs))


def correlation_closed_form(n: int, p: int, chi: float) -> float:
    """Two-angle product correlation E(chi) for equal populations, M = N.

    Alice measures ``p`` spins at one angle and Bob the remaining ``n - p``
    at another, ``chi`` apart.  Evaluated as the finite factorial sum in
    log-gamma space with compensated summation, so it stays accurate for
    particle numbers far beyond what quadrature enumeration reaches.
    """
    if n % 2:
        raise ValueError("closed form requires an even total particle number")
    if not 1 <= p <= n - 1:
        raise ValueError("need 1 <= p <= n-1")
    s, c = math.sin(chi), math.cos(chi)
    terms = []
    for k in range(p // 2 + 1):
        lg = (
            lgamma(n / 2 + 1) - lgamma(n + 1)
            + lgamma(p + 1) + lgamma(n - 2 * k + 1)
            - lgamma(k + 1) - lgamma(p - 2 * k + 1) - lgamma(n / 2 - k + 1)
        )
        terms.append(math.exp(lg) * s ** (2 * k) * c ** (p - 2 * k))
    return math.fsum(terms)


def correlation_gaussian(n: int, p: int, chi: float) -> float:
    """Gaussian approximation exp(-p(n-p)chi^2 / 2n) to the two-angle correlation."""
    if p < 1 or n - p < 1:
        raise ValueError("both parties need at least one measurement")
    return math.exp(-p * (n - p) * chi * chi / (2.0 * n))


def gaussian_product_correlation(pairs) -> float:
    """Gaussian-approximation product correlation for any angle multiset.

    ``pairs`` is an iterable of (angle, multiplicity); the result is
    exp(-(n/2) * weighted variance of the angles), which reduces to
    :func:`correlation_gaussian` for two angles and is invariant under a
    common rotation.
    """
    pairs = [(float(a), int(mult)) for a, mult in pairs]
    n = sum(mult for _, mult in pairs)
    if n <= 0 or any(mult < 1 for _, mult in pairs):
        raise ValueError("multiplicities must be positive")
    s1 = math.fsum(mult * a for a, mult in pairs)
    s2 = math.fsum(mult * a * a for a, mult in pairs)
    return math.exp(-0.5 * (s2 - s1 * s1 / n))


def correction_factor_g(m: int, n_plus: int, n_minus: int) -> float:
    """Attenuation of the full product correlation when only M < N spins are read.

    Zero for odd M, and zero whenever either population cannot supply M/2
    coherent pairs.  Equals 1 at M = N with equal populations.
    """
    if m < 0 or n_plus < 0 or n_minus < 0:
        raise ValueError("counts must be non-negative")
    n = n_plus + n_minus
    if m > n:
        raise ValueError("cannot measure more spins than particles")
    if m % 2:
        return 0.0
    h = m // 2
    if n_plus < h or n_minus < h:
        return 0.0
    return math.exp(
        lgamma(n - m + 1) + lgamma(m + 1) + lgamma(n_plus + 1) + lgamma(n_minus + 1)
        - lgamma(n_plus - h + 1) - lgamma(n_minus - h + 1) - 2 * lgamma(h + 1) - lgamma(n + 1)
    )


# ---------------------------------------------------------------------------
# Classical-phase (separable) law: the large-N limit where the phase acts as
# a pre-existing uniformly distributed variable and the per-spin factors are
# genuine probabilities.  Useful both as an approximation and as the
# local-realist reference model.
# ---------------------------------------------------------------------------

def _classical_rule(m: int) -> QuadratureRule:
    return QuadratureRule(2 * (m + 2))


def classical_sequence_probability(angles, etas) -> float:
    """Outcome probability under the classical-phase law.

    A single uniform phase integral over independent per-spin probabilities
    (1 + eta*cos(lambda - phi))/2; exact quadrature, no particle-number
    dependence.
    """
    angles = [float(a) for a in angles]
    etas = [int(e) for e in etas]
    if len(angles) != len(etas):
        raise ValueError("angles and outcomes must pair up")
    if any(e not in (-1, 1) for e in etas):
        raise ValueError("outcomes must be +-1")
    lam = _classical_rule(len(angles)).nodes
    integrand = np.ones_like(lam)
    for eta, phi in zip(etas, angles):
        integrand = integrand * (1.0 + eta * np.cos(lam - phi))
    return float(integrand.mean()) / 2 ** len(angles)


def classical_all_probabilities(angles) -> np.ndarray:
    """All 2**M outcome probabilities under the classical-phase law."""
    angles = [float(a) for a in angles]
    m = len(angles)
    if m > _MAX_TREE_M:
        raise ValueError(f"full outcome table limited to M <= {_MAX_TREE_M}, got {m}")
    lam = _classical_rule(m).nodes
    tree = np.ones((1, lam.size))
    for phi in angles:
        c = np.cos(lam - phi)
        tree = np.concatenate([tree * (1.0 - c), tree * (1.0 + c)], axis=0)
    return tree.mean(axis=1) / 2 ** m


def classical_product_correlation(angles) -> float:
    """Product-of-results average under the classical-phase law."""
    angles = [float(a) for a in angles]
    lam = _classical_rule(len(angles)).nodes
    integrand = np.ones_like(lam)
    for phi in angles:
        integrand = integrand * np.cos(lam - phi)
    return float(integrand.mean())
