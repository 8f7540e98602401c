"""Adaptive two-party wirings over a list of boxes.

Each party queries every component box exactly once, in its own causal
order.  The input fed to a box is read from a finite lookup table keyed by
the external input and the outputs of boxes that party has already queried.
Box outputs are always addressed by *box index*, not by stage, so a raw
output tuple ``(o_0, o_1, ...)`` has the same meaning for both parties even
when their orders differ.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

from .core import ZERO, NsBox, Party, check_no_signaling


class WiringError(ValueError):
    """A wiring failed structural validation."""

    def __init__(self, issues):
        self.issues = tuple(issues)
        super().__init__("; ".join(str(i) for i in self.issues))


@dataclass(frozen=True)
class LookupMap:
    """Deterministic map ``(external input, outputs of boxes in reads) -> value``.

    ``table`` keys are tuples ``(input, o_reads[0], o_reads[1], ...)``.
    """

    reads: tuple[int, ...]
    table: Mapping[tuple, int] = field(compare=False)

    def __post_init__(self):
        object.__setattr__(self, "reads", tuple(self.reads))
        object.__setattr__(self, "table", {tuple(k): int(v) for k, v in self.table.items()})

    def __eq__(self, other):
        if not isinstance(other, LookupMap):
            return NotImplemented
        return self.reads == other.reads and self.table == other.table

    def __hash__(self):
        return hash((self.reads, tuple(sorted(self.table.items()))))

    @classmethod
    def tabulate(cls, reads: Sequence[int], n_inputs: int, read_sizes: Sequence[int],
                 fn: Callable[..., int]) -> "LookupMap":
        """Tabulate ``fn(input, *read_outputs)`` over the full finite domain."""
        table = {}
        for key in itertools.product(range(n_inputs), *(range(n) for n in read_sizes)):
            table[key] = fn(*key)
        return cls(tuple(reads), table)

    def __call__(self, ext_input: int, outputs: Mapping[int, int] | Sequence[int]) -> int:
        key = (ext_input,) + tuple(outputs[i] for i in self.reads)
        return self.table[key]


def passthrough(n_inputs: int) -> LookupMap:
    """Stage map that forwards the external input unchanged."""
    return LookupMap((), {(x,): x for x in range(n_inputs)})


@dataclass(frozen=True)
class Wiring:
    """Two per-party adaptive programs over a shared tuple of boxes.

    ``alice_input_maps[k]`` feeds the box ``alice_order[k]``.  An output map
    of ``None`` means the raw output tuple (by box index) is reported as a
    mixed-radix integer with box 0 most significant.
    """

    boxes: tuple[NsBox, ...]
    alice_order: tuple[int, ...]
    bob_order: tuple[int, ...]
    alice_input_maps: tuple[LookupMap, ...]
    bob_input_maps: tuple[LookupMap, ...]
    alice_output_map: LookupMap | None = None
    bob_output_map: LookupMap | None = None
    external_input_sizes: tuple[int, int] = (2, 2)
    final_output_sizes: tuple[int, int] | None = None

    def __post_init__(self):
        for name in ("boxes", "alice_order", "bob_order", "alice_input_maps", "bob_input_maps",
                     "external_input_sizes"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if self.final_output_sizes is None:
            object.__setattr__(self, "final_output_sizes", self._default_output_sizes())
        else:
            object.__setattr__(self, "final_output_sizes", tuple(self.final_output_sizes))

    def _default_output_sizes(self):
        na = nb = 1
        for box in self.boxes:
            na *= box.alice_outputs
            nb *= box.bob_outputs
        if self.alice_output_map is not None and self.alice_output_map.table:
            na = max(self.alice_output_map.table.values()) + 1
        if self.bob_output_map is not None and self.bob_output_map.table:
            nb = max(self.bob_output_map.table.values()) + 1
        return (na, nb)

    def order(self, party: Party | str) -> tuple[int, ...]:
        return self.alice_order if Party.coerce(party) is Party.ALICE else self.bob_order

    def input_maps(self, party: Party | str) -> tuple[LookupMap, ...]:
        return self.alice_input_maps if Party.coerce(party) is Party.ALICE else self.bob_input_maps

    def output_map(self, party: Party | str) -> LookupMap | None:
        return self.alice_output_map if Party.coerce(party) is Party.ALICE else self.bob_output_map

    def output_sizes(self, party: Party | str) -> tuple[int, ...]:
        if Party.coerce(party) is Party.ALICE:
            return tuple(b.alice_outputs for b in self.boxes)
        return tuple(b.bob_outputs for b in self.boxes)

    def box_input_sizes(self, party: Party | str) -> tuple[int, ...]:
        if Party.coerce(party) is Party.ALICE:
            return tuple(b.alice_inputs for b in self.boxes)
        return tuple(b.bob_inputs for b in self.boxes)

    def ext_inputs(self, party: Party | str) -> int:
        return self.external_input_sizes[0 if Party.coerce(party) is Party.ALICE else 1]

    def box_inputs(self, party: Party | str, ext_input: int, outputs: Sequence[int]) -> list[int]:
        """Inputs this party feeds each box (by box index) given its full output tuple."""
        party = Party.coerce(party)
        inputs = [0] * len(self.boxes)
        for box_idx, imap in zip(self.order(party), self.input_maps(party)):
            inputs[box_idx] = imap(ext_input, outputs)
        return inputs

    def final_output(self, party: Party | str, ext_input: int, outputs: Sequence[int]) -> int:
        omap = self.output_map(party)
        if omap is None:
            return raw_index(outputs, self.output_sizes(party))
        return omap(ext_input, outputs)


def raw_index(outputs: Sequence[int], sizes: Sequence[int]) -> int:
    idx = 0
    for o, n in zip(outputs, sizes):
        idx = idx * n + o
    return idx


def raw_tuple(index: int, sizes: Sequence[int]) -> tuple[int, ...]:
    out = []
    for n in reversed(sizes):
        index, o = divmod(index, n)
        out.append(o)
    return tuple(reversed(out))


@dataclass(frozen=True)
class Issue:
    kind: str
    location: str
    detail: str

    def __str__(self):
        return f"{self.kind} at {self.location}: {self.detail}"


def _check_map(issues, loc, imap, n_ext, read_sizes, value_range, n_boxes, allowed_reads):
    if imap is None:
        return
    for r in imap.reads:
        if not 0 <= r < n_boxes:
            issues.append(Issue("unknown box", loc, f"reads box {r}"))
            return
        if allowed_reads is not None and r not in allowed_reads:
            issues.append(Issue("acausal read", loc,
                                f"reads box {r}, which is not queried earlier by this party"))
    if any(not 0 <= r < n_boxes for r in imap.reads):
        return
    domain = itertools.product(range(n_ext), *(range(read_sizes[r]) for r in imap.reads))
    missing = [k for k in domain if k not in imap.table]
    if missing:
        issues.append(Issue("partial map", loc, f"no value for key {missing[0]} "
                                                f"({len(missing)} keys missing)"))
    bad = sorted(k for k, v in imap.table.items() if not 0 <= v < value_range)
    if bad:
        issues.append(Issue("value out of range", loc,
                            f"key {bad[0]} maps to {imap.table[bad[0]]}, range is {value_range}"))


def validate(w: Wiring) -> list[Issue]:
    """Structural problems with ``w``; an empty list means the wiring is well formed."""
    issues: list[Issue] = []
    n = len(w.boxes)
    if n == 0:
        issues.append(Issue("empty wiring", "boxes", "no component boxes"))
        return issues
    for party in (Party.ALICE, Party.BOB):
        name = party.value
        order = w.order(party)
        if sorted(order) != list(range(n)):
            issues.append(Issue("not a permutation", f"{name} order",
                                f"{list(order)} is not a permutation of 0..{n - 1}"))
            continue
        maps = w.input_maps(party)
        if len(maps) != n:
            issues.append(Issue("wrong stage count", f"{name} input maps",
                                f"{len(maps)} maps for {n} stages"))
            continue
        out_sizes = w.output_sizes(party)
        in_sizes = w.box_input_sizes(party)
        for k, (box_idx, imap) in enumerate(zip(order, maps)):
            _check_map(issues, f"{name} stage {k} (box {box_idx})", imap, w.ext_inputs(party),
                       out_sizes, in_sizes[box_idx], n, set(order[:k]))
        omap = w.output_map(party)
        final_n = w.final_output_sizes[0 if party is Party.ALICE else 1]
        if omap is None:
            raw = 1
            for s in out_sizes:
                raw *= s
            if final_n != raw:
                issues.append(Issue("value out of range", f"{name} output map",
                                    f"raw outputs need alphabet {raw}, declared {final_n}"))
        else:
            _check_map(issues, f"{name} output map", omap, w.ext_inputs(party), out_sizes,
                       final_n, n, None)
    return issues


def require_valid(w: Wiring) -> None:
    issues = validate(w)
    if issues:
        raise WiringError(issues)


def _require_no_signaling(w: Wiring) -> None:
    for i, box in enumerate(w.boxes):
        report = check_no_signaling(box)
        if not report.ok:
            raise WiringError([Issue("signaling component", f"box {i}", str(report.violations[0]))])


@dataclass(frozen=True)
class RoundTable:
    """Exact joint distribution of every box output in one round, per external input pair.

    ``blocks[(x, y)]`` maps ``(a_tuple, b_tuple)`` to its probability; only
    nonzero entries are stored.
    """

    output_sizes: tuple[tuple[int, ...], tuple[int, ...]]
    blocks: Mapping[tuple[int, int], Mapping[tuple, Fraction]] = field(compare=True)

    def prob(self, x: int, y: int, a: Sequence[int], b: Sequence[int]) -> Fraction:
        return self.blocks[(x, y)].get((tuple(a), tuple(b)), ZERO)

    def block(self, x: int, y: int) -> Mapping[tuple, Fraction]:
        return self.blocks[(x, y)]

    def total(self, x: int, y: int) -> Fraction:
        return sum(self.blocks[(x, y)].values(), ZERO)

    def alice_tuples(self) -> list[tuple[int, ...]]:
        return list(itertools.product(*(range(n) for n in self.output_sizes[0])))

    def bob_tuples(self) -> list[tuple[int, ...]]:
        return list(itertools.product(*(range(n) for n in self.output_sizes[1])))


def _evaluate_block(w: Wiring, x: int, y: int) -> dict:
    a_sizes = w.output_sizes(Party.ALICE)
    b_sizes = w.output_sizes(Party.BOB)
    alice = [(a, w.box_inputs(Party.ALICE, x, a))
             for a in itertools.product(*(range(n) for n in a_sizes))]
    bob = [(b, w.box_inputs(Party.BOB, y, b))
           for b in itertools.product(*(range(n) for n in b_sizes))]
    block = {}
    for a, xs in alice:
        for b, ys in bob:
            p = Fraction(1)
            for box, ai, bi, xi, yi in zip(w.boxes, a, b, xs, ys):
                p *= box.prob(ai, bi, xi, yi)
                if not p:
                    break
            if p:
                block[(a, b)] = p
    return block


def evaluate_exact(w: Wiring, x: int, y: int) -> dict:
    """Nonzero joint probabilities of all box outputs for external inputs ``(x, y)``.

    Box inputs are derived from each output tuple through the input maps;
    each entry is the product of the component box probabilities.
    """
    require_valid(w)
    _require_no_signaling(w)
    if not (0 <= x < w.external_input_sizes[0] and 0 <= y < w.external_input_sizes[1]):
        raise IndexError(f"external inputs ({x}, {y}) out of range")
    return _evaluate_block(w, x, y)


def round_table(w: Wiring, inputs: Iterable[tuple[int, int]] | None = None) -> RoundTable:
    require_valid(w)
    _require_no_signaling(w)
    if inputs is None:
        inputs = itertools.product(range(w.external_input_sizes[0]),
                                   range(w.external_input_sizes[1]))
    blocks = {(x, y): _evaluate_block(w, x, y) for x, y in inputs}
    return RoundTable((w.output_sizes(Party.ALICE), w.output_sizes(Party.BOB)), blocks)


def effective_box(w: Wiring) -> NsBox:
    """The box the wiring simulates after applying both final output maps."""
    rt = round_table(w)
    na, nb = w.final_output_sizes
    acc = {}
    for (x, y), block in rt.blocks.items():
        for (a, b), p in block.items():
            key = (x, y, w.final_output(Party.ALICE, x, a), w.final_output(Party.BOB, y, b))
            acc[key] = acc.get(key, ZERO) + p
    return NsBox.from_entries(w.external_input_sizes[0], w.external_input_sizes[1], na, nb, acc)


def identity_wiring(box: NsBox) -> Wiring:
    """Single box, inputs and outputs passed straight through."""
    return Wiring(
        boxes=(box,),
        alice_order=(0,),
        bob_order=(0,),
        alice_input_maps=(passthrough(box.alice_inputs),),
        bob_input_maps=(passthrough(box.bob_inputs),),
        alice_output_map=LookupMap.tabulate((0,), box.alice_inputs, (box.alice_outputs,),
                                            lambda x, a: a),
        bob_output_map=LookupMap.tabulate((0,), box.bob_inputs, (box.bob_outputs,),
                                          lambda y, b: b),
        external_input_sizes=(box.alice_inputs, box.bob_inputs),
        final_output_sizes=(box.alice_outputs, box.bob_outputs),
    )
