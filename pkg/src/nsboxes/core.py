"""Exact no-signaling boxes.

A box is a conditional probability table ``p(a, b | x, y)`` stored densely
and indexed lexicographically by ``(x, y, a, b)``.  All probabilities are
:class:`fractions.Fraction` values, so every identity checked by this
package is an exact rational identity.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterator, Sequence

Rational = Fraction

ZERO = Fraction(0)
ONE = Fraction(1)


class BoxError(ValueError):
    """Malformed box table."""


class SignalingError(ValueError):
    """Raised when an operation needs a no-signaling box and gets one that signals."""


class Party(enum.Enum):
    ALICE = "alice"
    BOB = "bob"

    @classmethod
    def coerce(cls, value: "Party | str") -> "Party":
        if isinstance(value, Party):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown party {value!r}") from None

    @property
    def other(self) -> "Party":
        return Party.BOB if self is Party.ALICE else Party.ALICE


def rat(num: int, den: int = 1) -> Fraction:
    """Exact rational ``num/den`` in lowest terms with the sign in the numerator."""
    if den == 0:
        raise ValueError("zero denominator")
    return Fraction(num, den)


@dataclass(frozen=True)
class DBoxSpec:
    d: int

    def __post_init__(self):
        if not isinstance(self.d, int) or self.d < 1:
            raise ValueError(f"d-box needs d >= 1, got {self.d!r}")


@dataclass(frozen=True)
class NsBox:
    """Two-party box ``p(a, b | x, y)`` over finite alphabets.

    ``table`` is the flat lexicographic ``(x, y, a, b)`` layout.  Entries are
    checked to be non-negative and every ``(x, y)`` block to sum to one;
    no-signaling is *not* enforced here (see :func:`check_no_signaling`).
    """

    alice_inputs: int
    bob_inputs: int
    alice_outputs: int
    bob_outputs: int
    table: tuple = field(repr=False)

    def __post_init__(self):
        sizes = (self.alice_inputs, self.bob_inputs, self.alice_outputs, self.bob_outputs)
        if any(not isinstance(s, int) or s < 1 for s in sizes):
            raise BoxError(f"alphabet sizes must be positive integers, got {sizes}")
        table = tuple(Fraction(v) for v in self.table)
        expected = self.alice_inputs * self.bob_inputs * self.alice_outputs * self.bob_outputs
        if len(table) != expected:
            raise BoxError(f"table has {len(table)} entries, expected {expected}")
        object.__setattr__(self, "table", table)
        for (x, y, a, b), v in zip(self.indices(), table):
            if v < 0:
                raise BoxError(f"negative entry p({a},{b}|{x},{y}) = {v}")
        for x, y in self.input_pairs():
            total = sum(self.block_values(x, y), ZERO)
            if total != 1:
                raise BoxError(f"block (x,y)=({x},{y}) sums to {total}, not 1")

    @classmethod
    def from_function(cls, alice_inputs: int, bob_inputs: int, alice_outputs: int,
                      bob_outputs: int, fn: Callable[[int, int, int, int], object]) -> "NsBox":
        """Build a box from ``fn(a, b, x, y)``."""
        table = [fn(a, b, x, y) for x, y, a, b in itertools.product(
            range(alice_inputs), range(bob_inputs), range(alice_outputs), range(bob_outputs))]
        return cls(alice_inputs, bob_inputs, alice_outputs, bob_outputs, tuple(table))

    @classmethod
    def from_entries(cls, alice_inputs: int, bob_inputs: int, alice_outputs: int,
                     bob_outputs: int, entries) -> "NsBox":
        """Build a box from a mapping ``(x, y, a, b) -> probability``; missing keys are zero."""
        entries = dict(entries)
        return cls.from_function(alice_inputs, bob_inputs, alice_outputs, bob_outputs,
                                 lambda a, b, x, y: entries.get((x, y, a, b), ZERO))

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return (self.alice_inputs, self.bob_inputs, self.alice_outputs, self.bob_outputs)

    def _offset(self, x: int, y: int, a: int, b: int) -> int:
        return ((x * self.bob_inputs + y) * self.alice_outputs + a) * self.bob_outputs + b

    def prob(self, a: int, b: int, x: int, y: int) -> Fraction:
        """``p(a, b | x, y)``."""
        if not (0 <= x < self.alice_inputs and 0 <= y < self.bob_inputs
                and 0 <= a < self.alice_outputs and 0 <= b < self.bob_outputs):
            raise IndexError(f"p({a},{b}|{x},{y}) out of range for box of shape {self.shape}")
        return self.table[self._offset(x, y, a, b)]

    def input_pairs(self) -> Iterator[tuple[int, int]]:
        return itertools.product(range(self.alice_inputs), range(self.bob_inputs))

    def indices(self) -> Iterator[tuple[int, int, int, int]]:
        return itertools.product(range(self.alice_inputs), range(self.bob_inputs),
                                 range(self.alice_outputs), range(self.bob_outputs))

    def block_values(self, x: int, y: int) -> tuple:
        start = self._offset(x, y, 0, 0)
        return self.table[start:start + self.alice_outputs * self.bob_outputs]

    def block(self, x: int, y: int) -> list[list[Fraction]]:
        """The ``(x, y)`` block as rows indexed by Alice's output."""
        flat = self.block_values(x, y)
        n = self.bob_outputs
        return [list(flat[i * n:(i + 1) * n]) for i in range(self.alice_outputs)]

    def nonzero(self) -> Iterator[tuple[tuple[int, int, int, int], Fraction]]:
        for idx, v in zip(self.indices(), self.table):
            if v:
                yield idx, v

    def swap_parties(self) -> "NsBox":
        return NsBox.from_function(self.bob_inputs, self.alice_inputs, self.bob_outputs,
                                   self.alice_outputs, lambda a, b, x, y: self.prob(b, a, y, x))


def make_d_box(d: "int | DBoxSpec") -> NsBox:
    """The extremal two-input box with ``p = 1/d`` iff ``(b - a) mod d == x*y``."""
    if isinstance(d, DBoxSpec):
        d = d.d
    d = DBoxSpec(d).d
    mass = Fraction(1, d)
    return NsBox.from_function(2, 2, d, d,
                               lambda a, b, x, y: mass if (b - a - x * y) % d == 0 else ZERO)


def is_d_box(box: NsBox) -> bool:
    return (box.alice_inputs == box.bob_inputs == 2
            and box.alice_outputs == box.bob_outputs
            and box == make_d_box(box.alice_outputs))


@dataclass(frozen=True)
class Violation:
    """One failed no-signaling equation.

    ``party`` is the party whose marginal moved; ``partner_inputs`` holds the
    two partner inputs that gave different sums for ``own_input``/``output``.
    """

    party: Party
    own_input: int
    output: int
    partner_inputs: tuple[int, int]
    sums: tuple[Fraction, Fraction]

    def __str__(self):
        who = "Bob" if self.party is Party.BOB else "Alice"
        other = "Alice" if self.party is Party.BOB else "Bob"
        own = "y" if self.party is Party.BOB else "x"
        out = "b" if self.party is Party.BOB else "a"
        i1, i2 = self.partner_inputs
        s1, s2 = self.sums
        return (f"{who}'s marginal p({out}={self.output}|{own}={self.own_input}) depends on "
                f"{other}'s input: {s1} at input {i1} vs {s2} at input {i2}")


@dataclass(frozen=True)
class NoSignalingReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok

    def by_party(self, party: "Party | str") -> tuple[Violation, ...]:
        party = Party.coerce(party)
        return tuple(v for v in self.violations if v.party is party)


def _marginal_sum(box: NsBox, party: Party, own_input: int, partner_input: int,
                  output: int) -> Fraction:
    if party is Party.ALICE:
        return sum((box.prob(output, b, own_input, partner_input)
                    for b in range(box.bob_outputs)), ZERO)
    return sum((box.prob(a, output, partner_input, own_input)
                for a in range(box.alice_outputs)), ZERO)


def check_no_signaling(box: NsBox) -> NoSignalingReport:
    """Report every violated marginal equation, comparing each partner input against input 0."""
    violations = []
    for party in (Party.BOB, Party.ALICE):
        if party is Party.ALICE:
            own_n, partner_n, out_n = box.alice_inputs, box.bob_inputs, box.alice_outputs
        else:
            own_n, partner_n, out_n = box.bob_inputs, box.alice_inputs, box.bob_outputs
        for own, out in itertools.product(range(own_n), range(out_n)):
            ref = _marginal_sum(box, party, own, 0, out)
            for other in range(1, partner_n):
                s = _marginal_sum(box, party, own, other, out)
                if s != ref:
                    violations.append(Violation(party, own, out, (0, other), (ref, s)))
    return NoSignalingReport(tuple(violations))


def is_no_signaling(box: NsBox) -> bool:
    return check_no_signaling(box).ok


def marginal(box: NsBox, party: "Party | str", own_input: int) -> tuple[Fraction, ...]:
    """Local output distribution of ``party`` for ``own_input``."""
    party = Party.coerce(party)
    own_n = box.alice_inputs if party is Party.ALICE else box.bob_inputs
    if not 0 <= own_input < own_n:
        raise IndexError(f"input {own_input} out of range for {party.value}")
    report = check_no_signaling(box)
    bad = [v for v in report.by_party(party) if v.own_input == own_input]
    if bad:
        raise SignalingError(str(bad[0]))
    out_n = box.alice_outputs if party is Party.ALICE else box.bob_outputs
    return tuple(_marginal_sum(box, party, own_input, 0, o) for o in range(out_n))


def conditional_on_partner(box: NsBox, party: "Party | str", own_input: int,
                           partner_input: int, partner_output: int) -> tuple[Fraction, ...]:
    """``p(own output | own input, partner input, partner output)``."""
    party = Party.coerce(party)
    if party is Party.ALICE:
        column = [box.prob(a, partner_output, own_input, partner_input)
                  for a in range(box.alice_outputs)]
    else:
        column = [box.prob(partner_output, b, partner_input, own_input)
                  for b in range(box.bob_outputs)]
    norm = sum(column, ZERO)
    if norm == 0:
        raise ValueError(f"partner outcome {partner_output} has zero probability "
                         f"at inputs ({own_input}, {partner_input})")
    return tuple(v / norm for v in column)


def relabel_outputs(box: NsBox, alice_map: Sequence[int], bob_map: Sequence[int],
                    alice_outputs: int | None = None, bob_outputs: int | None = None) -> NsBox:
    """Push the box forward through input-independent output maps (not necessarily bijective)."""
    na = alice_outputs if alice_outputs is not None else max(alice_map) + 1
    nb = bob_outputs if bob_outputs is not None else max(bob_map) + 1
    acc = {}
    for (x, y, a, b), v in box.nonzero():
        key = (x, y, alice_map[a], bob_map[b])
        acc[key] = acc.get(key, ZERO) + v
    return NsBox.from_entries(box.alice_inputs, box.bob_inputs, na, nb, acc)


def reduce_outputs(box: NsBox, modulus: int) -> NsBox:
    """Both parties replace their output by its residue mod ``modulus``."""
    if modulus < 1:
        raise ValueError("modulus must be positive")
    return relabel_outputs(box, [a % modulus for a in range(box.alice_outputs)],
                           [b % modulus for b in range(box.bob_outputs)], modulus, modulus)
