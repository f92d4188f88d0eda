"""Expectation values of Bell functionals.

A functional assigns each party a value in [-1, +1] computed from its local
outcomes; the expectation weights those values with the exact outcome
distribution (or, on request, the classical-phase law or the Gaussian
approximation).  Three routes are kept and cross-checked in the tests:

* a pure-product fast path (one product-correlation integral),
* a grouped path exploiting permutation symmetry when every party measures
  at a single angle (cost polynomial in the counts),
* full enumeration over all 2**M outcome sequences.
"""
from __future__ import annotations

import math
from math import comb

import numpy as np

from . import exact
from .model import BellFunctionalSpec, ExperimentConfig, PartyFunctional

__all__ = ["expectation", "bell_value", "semi_mesoscopic_value", "EnumerationLimitError"]

DEFAULT_ENUMERATION_LIMIT = 24

# One BCHSH block: setting variants (x, y), (x', y), (x, y') minus (x', y').
_BLOCK_VARIANTS = ((0, 0), (1, 0), (0, 1), (1, 1))
_BLOCK_SIGNS = (1.0, 1.0, 1.0, -1.0)


class EnumerationLimitError(ValueError):
    """Outcome enumeration would be too large.

    Use the product fast path (all-product layouts never enumerate) or raise
    ``enumeration_limit`` explicitly.
    """


def _check_layout(config: ExperimentConfig, layout):
    """Validated layout with zero-count parties folded into a constant factor."""
    layout = [(int(c), f) for c, f in layout]
    if any(c < 0 for c, _ in layout):
        raise ValueError("party counts must be non-negative")
    if sum(c for c, _ in layout) != config.m:
        raise ValueError("party counts must add up to the measurement count")
    constant = 1.0
    kept = []
    for count, func in layout:
        if count == 0:
            constant *= func.value_given_plus_count(0, 0)
        else:
            kept.append((count, func))
    return kept, constant


def _party_slices(layout):
    out, off = [], 0
    for count, func in layout:
        out.append((off, count, func))
        off += count
    return out


def _functional_table(layout) -> np.ndarray:
    """Product of party values over all 2**M outcome indices (bit j = measurement j)."""
    total = np.ones(1)
    for count, func in layout:
        if count == 0:
            continue
        popcount = np.zeros(1, dtype=np.int64)
        for _ in range(count):
            popcount = np.concatenate([popcount, popcount + 1])
        vals = func.values_table(count)[popcount]
        # earlier parties occupy the low bits, so they vary fastest
        total = np.kron(vals, total)
    return total


def _grouped_angles(config: ExperimentConfig, layout):
    """Per-party single angles if every party measures along one direction."""
    angles = []
    for off, count, _ in _party_slices(layout):
        part = config.angles[off:off + count]
        if len(set(part)) != 1:
            return None
        angles.append(part[0])
    return angles


def _expectation_grouped(config: ExperimentConfig, layout, law: str) -> float:
    angles = _grouped_angles(config, layout)
    assert angles is not None
    if law == "exact":
        rule = exact.QuadratureRule.for_particles(config.n)
        nodes = rule.nodes
        cos_l = np.cos(nodes)[:, None]
        lam = nodes[None, :]
        diff = config.n_plus - config.n_minus
        weight = np.cos(diff * nodes)[:, None] * cos_l ** (config.n - config.m)
        prod = weight * np.ones_like(lam)
        denom = 2 ** config.m * exact.normalization_cn(config.n_plus, config.n_minus)
    else:
        lam = exact.QuadratureRule(2 * (config.m + 2)).nodes
        cos_l = np.ones_like(lam)
        prod = np.ones_like(lam)
        denom = 2 ** config.m
    for phi, (count, func) in zip(angles, layout):
        plus = cos_l + np.cos(lam - phi)
        minus = cos_l - np.cos(lam - phi)
        minus_powers = [np.ones_like(prod)]
        for _ in range(count):
            minus_powers.append(minus_powers[-1] * minus)
        acc = np.zeros_like(prod)
        plus_pow = np.ones_like(prod)
        fvals = func.values_table(count)
        for k in range(count + 1):
            acc += comb(count, k) * fvals[k] * plus_pow * minus_powers[count - k]
            if k < count:
                plus_pow = plus_pow * plus
        prod = prod * acc
    return float(prod.mean()) / denom


def expectation(config: ExperimentConfig, layout, *, law: str = "exact",
                enumeration_limit: int = DEFAULT_ENUMERATION_LIMIT) -> float:
    """Average of the product of party functional values.

    Parameters
    ----------
    config : ExperimentConfig
        Particle numbers and per-measurement angles.  Party measurements are
        the consecutive slices of ``config.angles`` in layout order.
    layout : sequence of (count, PartyFunctional)
        How many measurements each party makes and how it condenses them.
    law : {"exact", "classical"}
        Outcome distribution: the full quantum law or the classical-phase
        (separable) law.
    enumeration_limit : int
        Guard for the general enumeration path.

    The result always lies in [-1, 1] because every party value does.
    """
    if law not in ("exact", "classical"):
        raise ValueError(f"unknown probability law {law!r}")
    layout, constant = _check_layout(config, layout)
    if not layout:
        # all parties empty: the expectation is the constant times sum(P) = 1
        return constant

    if all(f.kind == "product" for _, f in layout):
        if law == "exact":
            return constant * exact.correlation_e(config)
        return constant * exact.classical_product_correlation(config.angles)

    if _grouped_angles(config, layout) is not None:
        return constant * _expectation_grouped(config, layout, law)

    if config.m > enumeration_limit:
        raise EnumerationLimitError(
            f"M={config.m} exceeds the enumeration limit {enumeration_limit}; use a "
            "product layout for the closed route or raise enumeration_limit"
        )
    if law == "exact":
        probs = exact.all_sequence_probabilities(config)
    else:
        probs = exact.classical_all_probabilities(config.angles)
    return constant * float(np.dot(_functional_table(layout), probs))


def _as_party_angles(value, count: int) -> list[float]:
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.size == 1:
        return [float(arr[0])] * count
    if arr.size != count:
        raise ValueError(f"setting needs 1 or {count} angles, got {arr.size}")
    return [float(v) for v in arr]


def _product_correlation_rows(n_plus: int, n_minus: int, rows: np.ndarray) -> np.ndarray:
    """Batched product correlations for full measurement sets (M = N)."""
    n = n_plus + n_minus
    if n_plus != n_minus:
        # the number-difference phase integrates to zero once every bracket
        # contributes a transverse term
        return np.zeros(rows.shape[0])
    nodes = exact.QuadratureRule.for_particles(n).nodes
    integ = np.cos(nodes[None, None, :] - rows[:, :, None]).prod(axis=1).mean(axis=1)
    return integ / exact.normalization_cn(n_plus, n_minus)


def _block_variant_rows(spec: BellFunctionalSpec, angles: np.ndarray):
    """Angle rows and signs for every cross term of the block-product forms."""
    counts = [c for c, _ in spec.party_layout]
    blocks = spec.block_count
    rows, signs = [[]], [1.0]
    for b in range(blocks):
        new_rows, new_signs = [], []
        cx, cy = counts[2 * b], counts[2 * b + 1]
        base = 4 * b
        for (vx, vy), s in zip(_BLOCK_VARIANTS, _BLOCK_SIGNS):
            ax = angles[base + 0 + vx]
            ay = angles[base + 2 + vy]
            for row, rs in zip(rows, signs):
                new_rows.append(row + [ax] * cx + [ay] * cy)
                new_signs.append(rs * s)
        rows, signs = new_rows, new_signs
    return np.asarray(rows), np.asarray(signs)


def bell_value(spec: BellFunctionalSpec, angles, n_plus: int, n_minus: int | None = None,
               *, law: str = "exact",
               enumeration_limit: int = DEFAULT_ENUMERATION_LIMIT) -> float:
    """Quantum average of the Bell quantity for a full angle assignment.

    Parameters
    ----------
    spec : BellFunctionalSpec
        Inequality form and party layout.
    angles : sequence
        Slot values.  For ``bchsh`` the four slots (a, a', b, b'), each a
        scalar or a per-measurement vector; for ``double_bchsh`` eight
        scalars (a, a', b, b', c, c', d, d'); for ``triple_bchsh`` twelve.
    n_plus, n_minus : int
        Populations; ``n_minus`` defaults to ``n_plus``.
    law : {"exact", "classical", "gaussian"}
        The Gaussian route is available for the product forms only.

    The BCHSH combination is T(a,b) + T(a',b) + T(a,b') - T(a',b'); the
    block-product forms multiply one such block per letter pair and scale by
    2**(1 - blocks), every cross term reducing to one product correlation
    over the concatenated angles.
    """
    if n_minus is None:
        n_minus = n_plus
    n = n_plus + n_minus

    if spec.form == "bchsh":
        if law == "gaussian" and any(f.kind != "product" for _, f in spec.party_layout):
            raise ValueError("gaussian law supports product functionals only")
        (ca, fa), (cb, fb) = spec.party_layout
        if len(angles) != 4:
            raise ValueError("bchsh takes 4 setting slots (a, a', b, b')")
        settings = [
            _as_party_angles(angles[0], ca), _as_party_angles(angles[1], ca),
            _as_party_angles(angles[2], cb), _as_party_angles(angles[3], cb),
        ]

        def term(xi: int, yi: int) -> float:
            row = settings[xi] + settings[2 + yi]
            if law == "gaussian":
                return exact.gaussian_product_correlation(
                    [(a, 1) for a in row])
            config = ExperimentConfig(n_plus, n_minus, tuple(row))
            return expectation(config, spec.party_layout, law=law,
                               enumeration_limit=enumeration_limit)

        return math.fsum(s * term(vx, vy)
                         for (vx, vy), s in zip(_BLOCK_VARIANTS, _BLOCK_SIGNS))

    # block-product forms: every letter is a product of results at one angle
    if len(angles) != 4 * spec.block_count:
        raise ValueError(f"{spec.form} takes {4 * spec.block_count} angle slots")
    if spec.m != n:
        raise ValueError(f"{spec.form} requires every particle measured (M = N = {n})")
    angles = np.asarray([float(a) for a in angles])
    rows, signs = _block_variant_rows(spec, angles)
    prefactor = 2.0 ** (1 - spec.block_count)
    if law == "exact":
        corr = _product_correlation_rows(n_plus, n_minus, rows)
    elif law == "gaussian":
        if n_plus != n_minus:
            raise ValueError("gaussian law assumes equal populations")
        counts = [c for c, _ in spec.party_layout]
        per_row_counts = []
        for b in range(spec.block_count):
            per_row_counts += [counts[2 * b], counts[2 * b + 1]]
        corr = np.empty(rows.shape[0])
        step = np.cumsum([0] + per_row_counts)
        for i, row in enumerate(rows):
            pairs = [(row[step[g]], per_row_counts[g]) for g in range(len(per_row_counts))]
            corr[i] = exact.gaussian_product_correlation(pairs)
    elif law == "classical":
        corr = np.array([exact.classical_product_correlation(row) for row in rows])
    else:
        raise ValueError(f"unknown probability law {law!r}")
    return prefactor * float(np.dot(signs, corr))


def semi_mesoscopic_value(n: int, angles, *, law: str = "exact") -> float:
    """BCHSH value with Alice binning n-1 outcomes and Bob keeping one product.

    Alice's count n-1 is odd, so the binned sign never ties and the zero
    policy is immaterial.  For n = 2 this degenerates to the plain two-spin
    BCHSH quantity.
    """
    if n < 2 or n % 2:
        raise ValueError("need an even particle number of at least 2")
    spec = BellFunctionalSpec.bchsh(
        n - 1, 1, alice_functional=PartyFunctional.binned_sign())
    return bell_value(spec, angles, n // 2, n // 2, law=law)
