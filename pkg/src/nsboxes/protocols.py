"""Concrete wirings for box interconversion and the conversion planner.

Protocols 1-3 are the classic composition / reduction schemes; Protocol 4
and its variants are the crossed-order repeat-until-success rounds.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from . import analysis
from .core import ZERO, NsBox, is_d_box, make_d_box, reduce_outputs
from .wiring import (
    LookupMap,
    RoundTable,
    Wiring,
    effective_box,
    passthrough,
    round_table,
)


class ProtocolError(ValueError):
    pass


class CoincidenceError(ProtocolError):
    """Failure outcomes are not locally recognizable by both parties at once."""


def _require_d_box(box: NsBox, what: str) -> int:
    if not is_d_box(box):
        raise ProtocolError(f"{what} is not a d-box")
    return box.alice_outputs


# ---------------------------------------------------------------------------
# Protocols 1-3


def protocol1_wiring(b1: NsBox, b2: NsBox) -> Wiring:
    """Compose a d1-box and a d2-box into a (d1*d2)-box.

    Alice feeds ``x`` to box 2 only when box 1 returned ``d1 - 1``; Bob
    always feeds ``y``.  Outputs are ``o2 * d1 + o1``.
    """
    d1 = _require_d_box(b1, "first component")
    d2 = _require_d_box(b2, "second component")
    combine = lambda inp, o1, o2: o2 * d1 + o1  # noqa: E731
    return Wiring(
        boxes=(b1, b2),
        alice_order=(0, 1),
        bob_order=(0, 1),
        alice_input_maps=(
            passthrough(2),
            LookupMap.tabulate((0,), 2, (d1,), lambda x, a1: x if a1 == d1 - 1 else 0),
        ),
        bob_input_maps=(passthrough(2), passthrough(2)),
        alice_output_map=LookupMap.tabulate((0, 1), 2, (d1, d2), combine),
        bob_output_map=LookupMap.tabulate((0, 1), 2, (d1, d2), combine),
        external_input_sizes=(2, 2),
        final_output_sizes=(d1 * d2, d1 * d2),
    )


def protocol2_box(box: NsBox, d1: int) -> NsBox:
    """Reduce a (d1*d2)-box to a d1-box by taking both outputs mod ``d1``."""
    size = _require_d_box(box, "input box")
    if d1 < 1 or size % d1:
        raise ProtocolError(f"{d1} does not divide the box size {size}")
    return reduce_outputs(box, d1)


def protocol3_box(d1: int, n: int, d2: int):
    """Approximate a d2-box from ``n`` d1-boxes.

    Builds the ``d1**n``-box by repeated Protocol 1 and reduces both outputs
    mod ``d2``.  Returns ``(box, error)`` with the error measured as total
    variation distance from the exact d2-box.
    """
    if d1 < 1 or n < 1 or d2 < 1:
        raise ProtocolError("d1, n and d2 must be positive")
    if d2 > d1 ** n:
        raise ProtocolError(f"cannot reach a {d2}-box from {n} {d1}-boxes ({d2} > {d1}^{n})")
    unit = make_d_box(d1)
    box = unit
    for _ in range(n - 1):
        box = effective_box(protocol1_wiring(box, unit))
    reduced = reduce_outputs(box, d2)
    return reduced, analysis.total_variation(reduced, make_d_box(d2))


# ---------------------------------------------------------------------------
# crossed-order rounds


def _crossed_round(box: NsBox, alice_zero: Iterable[int], bob_zero: Iterable[int]) -> Wiring:
    """Two copies of ``box``; Alice queries box 0 first, Bob box 1 first.

    Each party feeds 0 into its second box when its first output lies in
    its zero set, and its external input otherwise.  Outputs stay raw.
    """
    d = _require_d_box(box, "component")
    alice_zero, bob_zero = frozenset(alice_zero), frozenset(bob_zero)
    return Wiring(
        boxes=(box, box),
        alice_order=(0, 1),
        bob_order=(1, 0),
        alice_input_maps=(
            passthrough(2),
            LookupMap.tabulate((0,), 2, (d,), lambda x, a1: 0 if a1 in alice_zero else x),
        ),
        bob_input_maps=(
            passthrough(2),
            LookupMap.tabulate((1,), 2, (d,), lambda y, b2: 0 if b2 in bob_zero else y),
        ),
        external_input_sizes=(2, 2),
        final_output_sizes=(d * d, d * d),
    )


def _check_round_size(d: int) -> None:
    if not isinstance(d, int) or d < 2:
        raise ProtocolError(f"crossed rounds need d >= 2, got {d!r}")


def protocol4_round_wiring(d: int, box: NsBox | None = None) -> Wiring:
    """One round of the crossed-order d -> d+1 conversion."""
    _check_round_size(d)
    return _crossed_round(box if box is not None else make_d_box(d), {0}, {0})


def variant_two_zero_wiring(d: int, box: NsBox | None = None, party: str = "bob") -> Wiring:
    """Like Protocol 4, but one party also feeds 0 after seeing 1; targets a (d*d - 2)-box.

    ``party`` picks who uses the two-case rule.  With ``"bob"`` the fixed
    points are (0,0) and (0,1); with ``"alice"`` they are (0,0) and (1,0).
    """
    _check_round_size(d)
    box = box if box is not None else make_d_box(d)
    if party == "bob":
        return _crossed_round(box, {0}, {0, 1})
    if party == "alice":
        return _crossed_round(box, {0, 1}, {0})
    raise ProtocolError(f"unknown party {party!r}")


def variant_threshold_wiring(d: int, s: int, box: NsBox | None = None) -> Wiring:
    """Both parties feed 0 when their first output is below ``s``; targets a (d+s)-box."""
    _check_round_size(d)
    if not 1 <= s < d:
        raise ProtocolError(f"threshold s must satisfy 1 <= s < d, got s={s}, d={d}")
    return _crossed_round(box if box is not None else make_d_box(d), range(s), range(s))


def protocol4_output_value(o1: int, o2: int, d: int | None = None) -> int:
    """``o1`` if ``o1 <= o2`` else ``o1 + 1``."""
    if o1 < 0 or o2 < 0 or (d is not None and (o1 >= d or o2 >= d)):
        raise ProtocolError(f"outputs ({o1}, {o2}) out of range")
    return o1 if o1 <= o2 else o1 + 1


def protocol4_labeling(d: int) -> dict[tuple[int, int], int]:
    return {(o1, o2): protocol4_output_value(o1, o2, d)
            for o1, o2 in itertools.product(range(d), repeat=2) if (o1, o2) != (0, 0)}


def expected_boxes_theorem1(d: int) -> Fraction:
    """Expected boxes consumed to obtain one (d+1)-box: two per round over ``1 - 1/d^2``."""
    _check_round_size(d)
    fail = Fraction(1, d * d)
    return 2 * (1 / (1 - fail))


# ---------------------------------------------------------------------------
# success conditioning


def _as_outcome_set(outcomes) -> frozenset:
    outcomes = tuple(outcomes)
    if outcomes and all(isinstance(o, int) for o in outcomes):
        return frozenset([outcomes])
    return frozenset(tuple(o) for o in outcomes)


def _compact_labels(tuples: Sequence[tuple], failures: frozenset) -> dict:
    return {t: i for i, t in enumerate(t for t in tuples if t not in failures)}


def condition_on_success(w: Wiring, failure_outputs, labeling=None, rt: RoundTable | None = None):
    """Discard the failure outcome, renormalize, and relabel surviving raw outputs.

    ``failure_outputs`` is ``(alice_failures, bob_failures)``; each side is a
    raw output tuple or a collection of them.  ``labeling`` is a pair of
    mappings from surviving raw tuples to final outputs; by default the
    surviving tuples are numbered in lexicographic order.

    Returns ``(box, success_probability)``.
    """
    alice_fail = _as_outcome_set(failure_outputs[0])
    bob_fail = _as_outcome_set(failure_outputs[1])
    if rt is None:
        rt = round_table(w)
    if labeling is None:
        labeling = (_compact_labels(rt.alice_tuples(), alice_fail),
                    _compact_labels(rt.bob_tuples(), bob_fail))
    alice_labels, bob_labels = labeling
    fail_mass = None
    acc = {}
    for (x, y), block in sorted(rt.blocks.items()):
        mass = ZERO
        for (a, b), p in block.items():
            fa, fb = a in alice_fail, b in bob_fail
            if fa != fb:
                raise CoincidenceError(
                    "protocol lacks communication-free halting: "
                    f"outputs {a} / {b} at inputs ({x}, {y}) have probability {p} "
                    f"but only one party sees a failure")
            if fa:
                mass += p
        if fail_mass is None:
            fail_mass = mass
        elif mass != fail_mass:
            raise ProtocolError(f"failure probability depends on the inputs: "
                                f"{fail_mass} vs {mass} at ({x}, {y})")
    if fail_mass == 1:
        raise ProtocolError("the round never succeeds")
    success = 1 - fail_mass
    for (x, y), block in rt.blocks.items():
        for (a, b), p in block.items():
            if a in alice_fail:
                continue
            key = (x, y, alice_labels[a], bob_labels[b])
            acc[key] = acc.get(key, ZERO) + p / success
    na = max(alice_labels.values()) + 1
    nb = max(bob_labels.values()) + 1
    nx, ny = w.external_input_sizes
    return NsBox.from_entries(nx, ny, na, nb, acc), success


@dataclass(frozen=True)
class RoundProtocol:
    """A crossed-order round together with its failure set and output labels."""

    name: str
    d: int
    wiring: Wiring
    failures: frozenset
    labels: Mapping[tuple[int, ...], int]
    target_size: int
    success_probability: Fraction

    @property
    def boxes_per_round(self) -> int:
        return len(self.wiring.boxes)

    def is_failure(self, outputs: Sequence[int]) -> bool:
        return tuple(outputs) in self.failures

    def label(self, outputs: Sequence[int]) -> int:
        return self.labels[tuple(outputs)]

    def conditioned(self):
        return condition_on_success(self.wiring, (self.failures, self.failures),
                                    (self.labels, self.labels))


def crossed_round_protocol(name: str, d: int, wiring: Wiring, labels=None) -> RoundProtocol:
    """Analyse a crossed round: fixed points of the x=y=1 permutation are failures.

    The remaining elements must form cycles of one common length ``L``; they
    are labeled by cycle traversal unless ``labels`` is given, and the round
    then simulates an ``L``-box.
    """
    rt = round_table(wiring, [(1, 1)])
    perm = analysis.extract_permutation(rt, 1, 1)
    failures = frozenset(analysis.fixed_points(perm))
    lengths = {n for n in analysis.cycle_structure(perm).lengths if n > 1}
    if len(lengths) != 1:
        raise ProtocolError(f"{name}: nontrivial cycle lengths {sorted(lengths)} are not uniform")
    target = lengths.pop()
    if labels is None:
        labels = analysis.cycle_labeling(perm)
    success = Fraction(perm.size - len(failures), perm.size)
    return RoundProtocol(name, d, wiring, failures, dict(labels), target, success)


def protocol4_round(d: int, box: NsBox | None = None) -> RoundProtocol:
    return crossed_round_protocol("p4", d, protocol4_round_wiring(d, box), protocol4_labeling(d))


def variant_two_zero_round(d: int, box: NsBox | None = None, party: str = "bob") -> RoundProtocol:
    return crossed_round_protocol("two-zero", d, variant_two_zero_wiring(d, box, party))


def variant_threshold_round(d: int, s: int, box: NsBox | None = None) -> RoundProtocol:
    return crossed_round_protocol("threshold", d, variant_threshold_wiring(d, s, box))


# ---------------------------------------------------------------------------
# conversion planning


PROTOCOL1 = "protocol1"
PROTOCOL2 = "protocol2"
PROTOCOL4 = "protocol4"
TWO_ZERO = "two-zero"
THRESHOLD = "threshold"


@dataclass(frozen=True)
class ConversionStep:
    """One link of a conversion chain, from ``d_in``-boxes to ``d_out``-boxes.

    ``param`` is the second factor for Protocol 1, the divisor kept by
    Protocol 2 and the threshold ``s`` for the threshold variant.
    """

    kind: str
    d_in: int
    param: int
    success_probability: Fraction
    boxes_per_round: int

    def __post_init__(self):
        if not 0 < self.success_probability <= 1:
            raise ProtocolError(f"success probability {self.success_probability} outside (0, 1]")
        if self.kind == PROTOCOL2 and self.d_in % self.param:
            raise ProtocolError(f"{self.param} does not divide {self.d_in}")

    @property
    def d_out(self) -> int:
        d = self.d_in
        if self.kind == PROTOCOL1:
            return d * self.param
        if self.kind == PROTOCOL2:
            return self.param
        if self.kind == PROTOCOL4:
            return d + 1
        if self.kind == TWO_ZERO:
            return d * d - 2
        if self.kind == THRESHOLD:
            return d + self.param
        raise ProtocolError(f"unknown step kind {self.kind!r}")

    @property
    def expected_cost(self) -> Fraction:
        """Expected input boxes consumed per output box."""
        return Fraction(self.boxes_per_round) / self.success_probability

    def describe(self) -> str:
        if self.kind == PROTOCOL1:
            return f"protocol1({self.d_in},{self.param}) -> {self.d_out}"
        if self.kind == PROTOCOL2:
            return f"protocol2({self.d_in} mod {self.param}) -> {self.d_out}"
        if self.kind == THRESHOLD:
            return f"threshold({self.d_in},s={self.param}) -> {self.d_out}"
        return f"{self.kind}({self.d_in}) -> {self.d_out}"


def protocol1_step(d: int) -> ConversionStep:
    return ConversionStep(PROTOCOL1, d, d, Fraction(1), 2)


def protocol2_step(d: int, d1: int) -> ConversionStep:
    return ConversionStep(PROTOCOL2, d, d1, Fraction(1), 1)


def protocol4_step(d: int) -> ConversionStep:
    return ConversionStep(PROTOCOL4, d, 1, Fraction(d * d - 1, d * d), 2)


def two_zero_step(d: int) -> ConversionStep:
    return ConversionStep(TWO_ZERO, d, 2, Fraction(d * d - 2, d * d), 2)


def threshold_step(d: int, s: int) -> ConversionStep:
    if s == 1:
        return protocol4_step(d)
    return ConversionStep(THRESHOLD, d, s, Fraction(d * d - s * s, d * d), 2)


@dataclass(frozen=True)
class ConversionPlan:
    source: int
    target: int
    steps: tuple[ConversionStep, ...]
    expected_consumption: Fraction

    def __post_init__(self):
        d = self.source
        for step in self.steps:
            if step.d_in != d:
                raise ProtocolError(f"step {step.describe()} does not start at {d}")
            d = step.d_out
        if d != self.target:
            raise ProtocolError(f"plan ends at {d}, not {self.target}")


def _moves(c: int, cap: int):
    out = [threshold_step(c, s) for s in range(1, c)]
    if c >= 3 and c * c - 2 <= cap:
        out.append(two_zero_step(c))
    if c * c <= cap:
        out.append(protocol1_step(c))
    return [m for m in out if m.d_out <= cap]


def plan_conversion(d: int, d_target: int) -> ConversionPlan:
    """Shortest error-free chain from d-boxes to a d_target-box.

    Climbs with Protocol 4, its variants and Protocol 1 until the size is a
    multiple of the target, then finishes with Protocol 2.  Among chains of
    equal length the one with the smallest expected consumption wins.
    """
    if d_target < 1:
        raise ProtocolError(f"target size must be >= 1, got {d_target}")
    if d < 2:
        raise ProtocolError(f"source size must be >= 2, got {d}")
    if d == d_target:
        return ConversionPlan(d, d_target, (), Fraction(1))
    # some multiple of the target always lies in [d, d + d_target)
    cap = max(d, d_target) + d_target
    best = {d: (0, Fraction(1), ())}
    frontier = deque([d])
    finals = []
    while frontier and not finals:
        layer = sorted(set(frontier))
        frontier.clear()
        for c in layer:
            n, cost, steps = best[c]
            if c % d_target == 0:
                finish = steps if c == d_target else steps + (protocol2_step(c, d_target),)
                finals.append((len(finish), cost, finish))
        if finals:
            break
        nxt = {}
        for c in layer:
            n, cost, steps = best[c]
            for m in _moves(c, cap):
                cand = (n + 1, cost * m.expected_cost, steps + (m,))
                if m.d_out in best:
                    continue
                if m.d_out not in nxt or cand[1] < nxt[m.d_out][1]:
                    nxt[m.d_out] = cand
        best.update(nxt)
        frontier.extend(nxt)
    length, cost, steps = min(finals, key=lambda f: (f[0], f[1]))
    return ConversionPlan(d, d_target, steps, plan_consumption(steps))


def plan_consumption(steps: Sequence[ConversionStep]) -> Fraction:
    total = Fraction(1)
    for step in steps:
        total *= step.expected_cost
    return total


def execute_plan(plan: ConversionPlan):
    """Run every step exactly, each on the box produced by the previous one.

    Returns ``(final_box, per_step_results)`` where each result is
    ``(step, box, success_probability)``.
    """
    box = make_d_box(plan.source)
    results = []
    for step in plan.steps:
        d = step.d_in
        if step.kind == PROTOCOL1:
            box, p = effective_box(protocol1_wiring(box, box)), Fraction(1)
        elif step.kind == PROTOCOL2:
            box, p = protocol2_box(box, step.param), Fraction(1)
        else:
            if step.kind == PROTOCOL4:
                proto = protocol4_round(d, box)
            elif step.kind == TWO_ZERO:
                proto = variant_two_zero_round(d, box)
            else:
                proto = variant_threshold_round(d, step.param, box)
            box, p = proto.conditioned()
        if p != step.success_probability:
            raise ProtocolError(f"step {step.describe()} succeeded with {p}, "
                                f"plan declared {step.success_probability}")
        results.append((step, box, p))
    return box, results
