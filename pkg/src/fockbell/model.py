"""Domain types shared by every other module.

All types are immutable value objects: they validate on construction and can
be shared freely between threads.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "normalize_angle",
    "ExperimentConfig",
    "OutcomeSequence",
    "PartySplit",
    "PartyFunctional",
    "BellFunctionalSpec",
    "FanAngles",
    "PhaseDistribution",
]

TWO_PI = 2.0 * math.pi

FUNCTIONAL_KINDS = ("product", "binned_sign", "pair_average")
ZERO_POLICIES = ("plus_one", "zero", "random")
BELL_FORMS = ("bchsh", "double_bchsh", "triple_bchsh")


def normalize_angle(phi: float) -> float:
    """Reduce an angle modulo 2*pi into the half-open interval [-pi, pi)."""
    phi = float(phi)
    if not math.isfinite(phi):
        raise ValueError(f"angle must be finite, got {phi!r}")
    out = math.remainder(phi, TWO_PI)
    # remainder() returns (-pi, pi] with ties to even; fold the +pi endpoint.
    if out >= math.pi:
        out -= TWO_PI
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    """Particle numbers and the ordered transverse measurement angles.

    ``n_plus`` spins point up and ``n_minus`` down along the quantization
    axis; each of the ``len(angles)`` measurements probes the transverse spin
    component along its own azimuthal angle (radians).  The number of
    measurements may not exceed the number of particles.
    """

    n_plus: int
    n_minus: int
    angles: tuple[float, ...]

    def __post_init__(self) -> None:
        if self.n_plus < 0 or self.n_minus < 0:
            raise ValueError("particle numbers must be non-negative")
        if int(self.n_plus) != self.n_plus or int(self.n_minus) != self.n_minus:
            raise ValueError("particle numbers must be integers")
        normalized = tuple(normalize_angle(a) for a in self.angles)
        if len(normalized) > self.n:
            raise ValueError(
                f"{len(normalized)} measurements exceed the {self.n} available particles"
            )
        object.__setattr__(self, "n_plus", int(self.n_plus))
        object.__setattr__(self, "n_minus", int(self.n_minus))
        object.__setattr__(self, "angles", normalized)

    @property
    def n(self) -> int:
        """Total particle number."""
        return self.n_plus + self.n_minus

    @property
    def m(self) -> int:
        """Number of measurements."""
        return len(self.angles)

    def with_angles(self, angles) -> "ExperimentConfig":
        return ExperimentConfig(self.n_plus, self.n_minus, tuple(angles))


@dataclass(frozen=True)
class OutcomeSequence:
    """Ordered measurement results, each exactly +1 or -1."""

    etas: tuple[int, ...]

    def __post_init__(self) -> None:
        cleaned = tuple(int(e) for e in self.etas)
        if any(e not in (-1, 1) for e in cleaned):
            raise ValueError("every outcome must be +1 or -1")
        object.__setattr__(self, "etas", cleaned)

    def __len__(self) -> int:
        return len(self.etas)

    def product(self) -> int:
        return -1 if sum(1 for e in self.etas if e < 0) % 2 else 1


@dataclass(frozen=True)
class PartySplit:
    """Number of measurements assigned to Alice; Bob takes the rest."""

    p: int

    def __post_init__(self) -> None:
        if self.p < 1:
            raise ValueError("Alice must make at least one measurement")

    def bob_count(self, n: int) -> int:
        if self.p > n - 1:
            raise ValueError(f"p={self.p} leaves no measurement for Bob out of {n}")
        return n - self.p


@dataclass(frozen=True)
class PartyFunctional:
    """Rule mapping one party's local outcomes to a value in [-1, +1].

    Kinds
    -----
    product
        Product of all outcomes, always +-1.
    binned_sign
        Sign of the summed outcomes (the binned macroscopic polarization).
        ``zero_policy`` resolves the tied case, which arises whenever the
        party makes an even number of measurements: ``plus_one`` maps it to
        +1, ``zero`` to 0, ``random`` to a fair coin flip (whose expectation
        is 0, so averaged quantities coincide with the ``zero`` policy).
    pair_average
        (eta1 + eta2)/2 for exactly two outcomes; takes values -1, 0, +1.

    All kinds are symmetric under permutation of the party's outcomes, so the
    value only depends on the number of +1 results.
    """

    kind: str
    zero_policy: str = "plus_one"

    def __post_init__(self) -> None:
        if self.kind not in FUNCTIONAL_KINDS:
            raise ValueError(f"unknown functional kind {self.kind!r}")
        if self.kind == "binned_sign" and self.zero_policy not in ZERO_POLICIES:
            raise ValueError(f"unknown zero policy {self.zero_policy!r}")

    @classmethod
    def product(cls) -> "PartyFunctional":
        return cls("product")

    @classmethod
    def binned_sign(cls, zero_policy: str = "plus_one") -> "PartyFunctional":
        return cls("binned_sign", zero_policy)

    @classmethod
    def pair_average(cls) -> "PartyFunctional":
        return cls("pair_average")

    def value_given_plus_count(self, k: int, count: int) -> float:
        """Expected functional value given ``k`` of ``count`` outcomes are +1.

        For the ``random`` zero policy this is the coin-flip expectation 0 at
        a tie; sampled (per-realization) values come from :meth:`evaluate`.
        """
        if not 0 <= k <= count:
            raise ValueError("plus count out of range")
        if self.kind == "product":
            return -1.0 if (count - k) % 2 else 1.0
        if self.kind == "pair_average":
            if count != 2:
                raise ValueError("pair_average requires exactly 2 outcomes")
            return float(k - 1)
        s = 2 * k - count
        if s != 0:
            return 1.0 if s > 0 else -1.0
        return {"plus_one": 1.0, "zero": 0.0, "random": 0.0}[self.zero_policy]

    def values_table(self, count: int) -> np.ndarray:
        """Values over k = 0..count, as used by the grouped evaluation paths."""
        return np.array(
            [self.value_given_plus_count(k, count) for k in range(count + 1)]
        )

    def evaluate(self, etas, rng: np.random.Generator | None = None) -> float:
        """Realized value on a concrete outcome tuple.

        A generator is required only for ``binned_sign`` with the ``random``
        policy, and only when the tie actually occurs.
        """
        etas = tuple(int(e) for e in etas)
        if any(e not in (-1, 1) for e in etas):
            raise ValueError("outcomes must be +-1")
        k = sum(1 for e in etas if e > 0)
        if self.kind == "binned_sign" and 2 * k == len(etas) and self.zero_policy == "random":
            if rng is None:
                raise ValueError("random zero policy needs a generator to resolve a tie")
            return 1.0 if rng.random() < 0.5 else -1.0
        return self.value_given_plus_count(k, len(etas))


@dataclass(frozen=True)
class BellFunctionalSpec:
    """An inequality form plus the per-party measurement layout.

    ``party_layout`` lists ``(measurement count, PartyFunctional)`` pairs:
    two parties for ``bchsh``, four letters (two blocks of two) for
    ``double_bchsh`` and six letters (three blocks) for ``triple_bchsh``.
    The product-of-blocks forms require product functionals, since each of
    their letters stands for a plain product of outcomes.
    """

    form: str
    party_layout: tuple[tuple[int, PartyFunctional], ...]

    def __post_init__(self) -> None:
        if self.form not in BELL_FORMS:
            raise ValueError(f"unknown Bell form {self.form!r}")
        layout = tuple((int(c), f) for c, f in self.party_layout)
        expected = {"bchsh": 2, "double_bchsh": 4, "triple_bchsh": 6}[self.form]
        if len(layout) != expected:
            raise ValueError(f"{self.form} takes {expected} parties, got {len(layout)}")
        if any(c < 1 for c, _ in layout):
            raise ValueError("every party must make at least one measurement")
        if self.form != "bchsh" and any(f.kind != "product" for _, f in layout):
            raise ValueError(f"{self.form} letters must carry product functionals")
        object.__setattr__(self, "party_layout", layout)

    @property
    def m(self) -> int:
        """Total measurements across one full setting choice."""
        return sum(c for c, _ in self.party_layout)

    @property
    def block_count(self) -> int:
        return {"bchsh": 1, "double_bchsh": 2, "triple_bchsh": 3}[self.form]

    @property
    def angle_slots(self) -> int:
        """Free angles: two settings per measurement for bchsh, two per letter otherwise."""
        if self.form == "bchsh":
            return 2 * self.m
        return 2 * len(self.party_layout)

    @classmethod
    def bchsh(cls, alice: int, bob: int,
              alice_functional: PartyFunctional | None = None,
              bob_functional: PartyFunctional | None = None) -> "BellFunctionalSpec":
        fa = alice_functional or PartyFunctional.product()
        fb = bob_functional or PartyFunctional.product()
        return cls("bchsh", ((alice, fa), (bob, fb)))

    @classmethod
    def double_bchsh(cls, counts) -> "BellFunctionalSpec":
        p = PartyFunctional.product()
        return cls("double_bchsh", tuple((c, p) for c in counts))

    @classmethod
    def triple_bchsh(cls, counts) -> "BellFunctionalSpec":
        p = PartyFunctional.product()
        return cls("triple_bchsh", tuple((c, p) for c in counts))


@dataclass(frozen=True)
class FanAngles:
    """Fan of four BCHSH settings with half-step ``chi``.

    The induced settings obey a - b = b - a' = b' - a = chi and
    b' - a' = 3*chi, with the gauge a = 0.
    """

    chi: float

    def bchsh_settings(self) -> tuple[float, float, float, float]:
        """Settings in slot order (a, a', b, b')."""
        chi = float(self.chi)
        return (0.0, -2.0 * chi, -chi, chi)


@dataclass
class PhaseDistribution:
    """Discretized phase density on a uniform angular grid over [-pi, pi).

    The grid is periodic and equispaced, so the trapezoid rule coincides with
    the mean value times 2*pi; the values must be non-negative and integrate
    to 1 within 1e-12.
    """

    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.grid.ndim != 1 or self.grid.shape != self.values.shape:
            raise ValueError("grid and values must be matching 1-d arrays")
        if np.any(self.values < 0.0):
            raise ValueError("phase density must be non-negative")
        integral = self.integral()
        if abs(integral - 1.0) > 1e-12:
            raise ValueError(f"density integrates to {integral!r}, not 1")

    @property
    def resolution(self) -> int:
        return self.grid.size

    def integral(self) -> float:
        return float(self.values.mean() * TWO_PI)

    @staticmethod
    def uniform_grid(resolution: int) -> np.ndarray:
        if resolution < 8:
            raise ValueError("grid too coarse")
        return -math.pi + TWO_PI * np.arange(resolution) / resolution
