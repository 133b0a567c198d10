"""Combinatorics behind the run-length bound.

This module provides:

* tetration and a two-form magnitude type (exact integer below a bit cap,
  otherwise a tower 2^(2^(...^top)));
* the configuration-class counting pair: the product upper bound
  |Q|·Π(|Σ|+1)^f(d) and the exact class count |Q|·Π Σ_{j≤f(d)} |Σ|^j;
* extraction of dense equal-value index pairs from a sequence in which a
  finite set is α-frequent;
* the documented run-length bound recurrence: starting from M₀ = 1, α₀ = 1,
  with K = 2^(|Σ|·|C|) and γᵢ the product bound over i channels bounded
  uniformly by Mᵢ,

      M_{i+1}    = ⌈(γᵢ + 1) · (4 + 8K) / αᵢ⌉
      1/α_{i+1}  = 8 · (γᵢ + 1) · K / αᵢ

  iterated |C| times; the bound is ⌈γ_{|C|} / α_{|C|}⌉.  Ceilings are applied
  wherever a division occurs, and all channels are processed at the uniform
  level bound Mᵢ, so the computed value dominates any channel order.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .model import Machine, normalize_empty_tests

#: Values whose bit length exceeds this cap are reported in tower form.
EXACT_BIT_CAP = 1 << 20


class FrequencyError(ValueError):
    """The given set is not α-frequent in the sequence."""


# -- magnitudes ----------------------------------------------------------------


@dataclass(frozen=True)
class BoundValue:
    """Either an exact non-negative integer or a tower 2^(2^(...^top)).

    ``height`` counts the 2s wrapped around ``top``; exact form is used only
    while the value fits in EXACT_BIT_CAP bits.
    """

    exact: int | None = None
    height: int | None = None
    top: int | None = None

    def __post_init__(self):
        if (self.exact is None) == (self.height is None):
            raise ValueError("BoundValue is either exact or a tower")
        if self.exact is not None:
            if self.exact < 0:
                raise ValueError("exact value must be non-negative")
            if self.exact.bit_length() > EXACT_BIT_CAP:
                raise ValueError("exact value exceeds the bit cap")
        else:
            if self.height < 1:
                raise ValueError("tower height must be at least 1")
            if self.top is None or self.top < 1:
                raise ValueError("tower top must be a positive integer")

    @classmethod
    def of(cls, value: int) -> "BoundValue":
        return cls(exact=value)

    @classmethod
    def tower(cls, height: int, top: int = 1) -> "BoundValue":
        return cls(height=height, top=top)

    @property
    def is_exact(self) -> bool:
        return self.exact is not None

    def _canonical(self) -> tuple[int, int]:
        """(height, top) normalized into the band 64 < top < 2^20.

        Within that band two canonical forms compare lexicographically:
        adding a level turns the top into at least 2^65, which exceeds any
        in-band top, so a greater height always dominates.  Peeling a level
        rounds the top up to its bit length, so tower comparisons are exact
        only up to that rounding.
        """
        if self.exact is not None:
            height, top = 0, self.exact
        else:
            height, top = self.height, self.top
        while top.bit_length() > 20:
            top = top.bit_length()
            height += 1
        while height > 0 and top <= 64:
            top = 2 ** top
            height -= 1
        return height, top

    def magnitude_key(self) -> tuple[int, int]:
        return self._canonical()

    def __le__(self, other: "BoundValue") -> bool:
        if self.exact is not None and other.exact is not None:
            return self.exact <= other.exact
        return self.magnitude_key() <= other.magnitude_key()

    def dominates(self, value: int) -> bool:
        """True when this bound is at least the given integer."""
        if self.exact is not None:
            return self.exact >= value
        return BoundValue.of(value).magnitude_key() <= self.magnitude_key()

    def to_json(self) -> dict:
        if self.exact is not None:
            return {"exact": str(self.exact)}
        return {"tower_height": self.height, "top": str(self.top)}

    def __str__(self) -> str:
        if self.exact is not None:
            return str(self.exact)
        return f"2^^{self.height}({self.top})"


#: JSON schema for the `bound` command payload.
BOUND_SCHEMA = {
    "type": "object",
    "oneOf": [
        {"required": ["exact"],
         "properties": {"exact": {"type": "string", "pattern": "^[0-9]+$"}},
         "additionalProperties": False},
        {"required": ["tower_height", "top"],
         "properties": {"tower_height": {"type": "integer", "minimum": 1},
                        "top": {"type": "string", "pattern": "^[0-9]+$"}},
         "additionalProperties": False},
    ],
}


def tetration(m: int) -> BoundValue:
    """2⇑m: a tower of m twos.  Exact while it fits, tower form beyond."""
    if m < 1:
        raise ValueError("tetration is defined for m >= 1")
    value = 1
    for level in range(m):
        if value > EXACT_BIT_CAP:
            # 2^value alone would burst the cap: report the full tower shape
            return BoundValue.tower(height=m, top=1)
        value = 2 ** value
    if value.bit_length() > EXACT_BIT_CAP:
        return BoundValue.tower(height=m, top=1)
    return BoundValue.of(value)


class _Mag:
    """Internal over-approximating magnitude arithmetic for the recurrence.

    A value is an int, or a pair (h, t) standing for 2^(2^(...^t)) with h
    twos, kept normalized with t ≤ EXACT_BIT_CAP.  All operations round up,
    which is fine: the recurrence only ever needs a dominating value.
    """

    __slots__ = ("h", "t")

    def __init__(self, h: int, t: int):
        while t.bit_length() > 20:  # keep tops small; bit_length rounds up a log2
            t = t.bit_length()
            h += 1
        self.h = h
        self.t = t

    @staticmethod
    def lift(value: "int | _Mag") -> "_Mag":
        if isinstance(value, _Mag):
            return value
        return _Mag(0, value)

    def __repr__(self):
        return f"_Mag(h={self.h}, t={self.t})"


def _is_int(value) -> bool:
    return isinstance(value, int)


def _mag_mul(a, b):
    """a·b, exact for ints below the cap, else a dominating tower."""
    if _is_int(a) and _is_int(b):
        product = a * b
        if product.bit_length() <= EXACT_BIT_CAP:
            return product
        a = _Mag.lift(a)
    a, b = _Mag.lift(a), _Mag.lift(b)
    if a.h == 0 and b.h == 0:
        return _Mag(0, a.t * b.t)
    if a.h < b.h or (a.h == b.h and a.t < b.t):
        a, b = b, a
    if a.h == 1 and b.h <= 1:
        # 2^x · 2^y = 2^(x+y); a height-0 b contributes at most 2^bit_length
        return _Mag(1, a.t + (b.t if b.h == 1 else b.t.bit_length()))
    # height ≥ 2 dominates: 2^^h(t) · anything ≤ 2^^h(t+1)
    return _Mag(a.h, a.t + 1)


def _mag_add(a, b):
    if _is_int(a) and _is_int(b):
        total = a + b
        if total.bit_length() <= EXACT_BIT_CAP:
            return total
    return _mag_mul(2, a if _mag_ge(a, b) else b)


def _mag_ge(a, b) -> bool:
    if _is_int(a) and _is_int(b):
        return a >= b
    a, b = _Mag.lift(a), _Mag.lift(b)
    return (a.h, a.t) >= (b.h, b.t)


def _mag_pow(base: int, exponent) -> "int | _Mag":
    """base^exponent, exact while small; exponent may itself be a magnitude."""
    if base < 2:
        return 1 if base == 1 else 0
    bits = (base - 1).bit_length()  # ceil(log2 base)
    if _is_int(exponent):
        if exponent * bits <= EXACT_BIT_CAP:
            return base ** exponent
        return _Mag(1, exponent * bits)
    scaled = _mag_mul(exponent, bits)
    scaled = _Mag.lift(scaled)
    return _Mag(scaled.h + 1, scaled.t)


def _mag_to_bound(value) -> BoundValue:
    if _is_int(value):
        return BoundValue.of(value)
    return BoundValue.tower(height=value.h, top=value.t)


# -- class counting -------------------------------------------------------------


@dataclass(frozen=True)
class BoundingFunction:
    """Per-channel word-length caps over a channel subset."""

    values: tuple[tuple[str, int], ...]

    def __post_init__(self):
        names = [name for name, _ in self.values]
        if len(names) != len(set(names)):
            raise ValueError("duplicate channel in bounding function")
        if any(cap < 0 for _, cap in self.values):
            raise ValueError("bounds must be non-negative")

    @classmethod
    def from_dict(cls, mapping: Mapping[str, int]) -> "BoundingFunction":
        return cls(tuple(sorted(mapping.items())))

    @property
    def domain(self) -> frozenset[str]:
        return frozenset(name for name, _ in self.values)

    def as_dict(self) -> dict[str, int]:
        return dict(self.values)


def gamma_bound(q_count: int, sigma_count: int, f: BoundingFunction) -> int:
    """Product upper bound on bounded configuration classes:
    |Q| · Π_{d} (|Σ|+1)^f(d)."""
    if q_count < 1 or sigma_count < 0:
        raise ValueError("need at least one state and a non-negative alphabet size")
    result = q_count
    for _, cap in f.values:
        result *= (sigma_count + 1) ** cap
    return result


def exact_class_count(q_count: int, sigma_count: int, f: BoundingFunction) -> int:
    """Exact number of classes: |Q| · Π_{d} Σ_{j=0..f(d)} |Σ|^j."""
    if q_count < 1 or sigma_count < 0:
        raise ValueError("need at least one state and a non-negative alphabet size")
    result = q_count
    for _, cap in f.values:
        result *= sum(sigma_count ** j for j in range(cap + 1))
    return result


# -- dense pair extraction -------------------------------------------------------


@dataclass(frozen=True)
class FrequentPairWitness:
    """Interleaved equal-value index pairs extracted from a sequence.

    Indices are 0-based.  With n the sequence length, s = |S| + 1 and α the
    frequency, the witness provides at least ⌈αn / 2s⌉ pairs, strictly
    interleaved, each with difference at most 2s/α and both members equal
    elements of S.
    """

    pairs: tuple[tuple[int, int], ...]
    length: int
    alpha: Fraction
    set_size: int

    @property
    def required_count(self) -> int:
        numerator = self.alpha * self.length
        return -((-numerator) // (2 * (self.set_size + 1)))  # ceil

    @property
    def max_difference(self) -> Fraction:
        return Fraction(2 * (self.set_size + 1)) / self.alpha


def extract_frequent_pairs(seq: Sequence, members: Iterable,
                           alpha: Fraction | float | int) -> FrequentPairWitness:
    """Extract dense equal-value pairs from a sequence where ``members`` is
    α-frequent.

    Walk the member positions left to right, collecting a block of distinct
    values; a repeat closes a candidate pair (first occurrence, repeat).
    Pairs within the difference cap 2(|S|+1)/α are kept and the block
    restarts after them; over-wide candidates are dropped, reseeding the
    block at their right end.  Disjoint over-wide candidates cannot number
    more than αn/2(|S|+1), which leaves enough kept pairs for the count
    guarantee; the result is verified before returning.
    """
    alpha = Fraction(alpha)
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    member_set = set(members)
    n = len(seq)
    positions = [i for i, value in enumerate(seq) if value in member_set]
    if len(positions) < alpha * n:
        raise FrequencyError(
            f"set is not {alpha}-frequent: {len(positions)} member positions "
            f"in a sequence of length {n}")

    set_size = len(member_set)
    cap = Fraction(2 * (set_size + 1)) / alpha

    pairs: list[tuple[int, int]] = []
    block: dict = {}
    for position in positions:
        value = seq[position]
        if value in block:
            first = block[value]
            if position - first <= cap:
                pairs.append((first, position))
                block = {}
            else:
                # too wide to keep: restart the block at this position
                block = {value: position}
        else:
            block[value] = position

    witness = FrequentPairWitness(tuple(pairs), n, alpha, set_size)
    validate_pair_witness(witness, seq, member_set)
    return witness


def validate_pair_witness(witness: FrequentPairWitness, seq: Sequence,
                          members: Iterable) -> None:
    """Check every witness invariant directly; raises ValueError on failure."""
    member_set = set(members)
    if len(witness.pairs) < witness.required_count:
        raise ValueError(
            f"witness has {len(witness.pairs)} pairs, "
            f"needs at least {witness.required_count}")
    previous_right = -1
    for left, right in witness.pairs:
        if not previous_right < left < right:
            raise ValueError("pairs must be strictly interleaved")
        if right - left > witness.max_difference:
            raise ValueError(f"pair ({left}, {right}) exceeds the difference cap")
        if seq[left] != seq[right] or seq[left] not in member_set:
            raise ValueError(f"pair ({left}, {right}) is not an equal member pair")
        previous_right = right


# -- the run-length bound recurrence ----------------------------------------------


def _uniform_gamma(q_count: int, sigma_count: int, subset_size: int, level):
    """γ over a subset of ``subset_size`` channels all bounded by ``level``."""
    exponent = _mag_mul(subset_size, level) if subset_size else 0
    return _mag_mul(q_count, _mag_pow(sigma_count + 1, exponent))


def run_length_bound(machine: Machine) -> BoundValue:
    """Upper bound on the length of any finite run of a terminating machine.

    Emptiness tests are rewritten away first (the recurrence's constants are
    stated for occurrence tests), so the state count is the rewritten one.
    The result is exact below the bit cap and a dominating tower beyond it.
    """
    normalized = normalize_empty_tests(machine)
    q_count = len(normalized.states)
    sigma_count = len(normalized.alphabet)
    channel_count = len(normalized.channels)

    big_k = _mag_pow(2, sigma_count * channel_count)
    level = 1          # M_0
    inv_alpha = 1      # 1/α_0, an integer throughout
    for i in range(channel_count):
        gamma = _uniform_gamma(q_count, sigma_count, i, level)
        gamma_plus = _mag_add(gamma, 1)
        level = _mag_mul(_mag_mul(gamma_plus, _mag_add(4, _mag_mul(8, big_k))),
                         inv_alpha)
        inv_alpha = _mag_mul(_mag_mul(8, gamma_plus), _mag_mul(big_k, inv_alpha))
    gamma = _uniform_gamma(q_count, sigma_count, channel_count, level)
    return _mag_to_bound(_mag_mul(gamma, inv_alpha))
