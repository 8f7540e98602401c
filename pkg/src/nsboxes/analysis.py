"""Permutation structure of round tables and equivalence of boxes."""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .core import ZERO, NsBox, Party, check_no_signaling, marginal
from .wiring import RoundTable, raw_index, raw_tuple


class NotAPermutation(ValueError):
    pass


class SearchBudgetExceeded(RuntimeError):
    pass


DEFAULT_SEARCH_BUDGET = math.factorial(8)


@dataclass(frozen=True)
class OutputPermutation:
    """Bijection on raw output tuples, Alice's tuple -> Bob's tuple.

    Elements are indexed lexicographically by ``sizes`` (first box most
    significant), so for two boxes of size ``d`` the pair ``(o1, o2)`` is
    element ``o1 * d + o2``.
    """

    sizes: tuple[int, ...]
    mapping: tuple[int, ...]

    def __post_init__(self):
        n = len(self.mapping)
        if sorted(self.mapping) != list(range(n)):
            raise NotAPermutation("mapping is not a bijection")

    @property
    def size(self) -> int:
        return len(self.mapping)

    def element(self, index: int) -> tuple[int, ...]:
        return raw_tuple(index, self.sizes)

    def index(self, element: Sequence[int]) -> int:
        return raw_index(element, self.sizes)

    def __call__(self, element: Sequence[int]) -> tuple[int, ...]:
        return self.element(self.mapping[self.index(element)])

    def is_identity(self) -> bool:
        return all(i == j for i, j in enumerate(self.mapping))

    def arrows(self) -> list[tuple[tuple[int, ...], tuple[int, ...]]]:
        return [(self.element(i), self.element(j)) for i, j in enumerate(self.mapping)]


@dataclass(frozen=True)
class CycleStructure:
    lengths: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "lengths", tuple(sorted(self.lengths)))

    @property
    def total(self) -> int:
        return sum(self.lengths)

    def counts(self) -> dict[int, int]:
        return dict(sorted(Counter(self.lengths).items()))

    def __str__(self):
        return ", ".join(str(n) for n in self.lengths)


def extract_permutation(rt: RoundTable, x: int, y: int) -> OutputPermutation:
    """Read the ``(x, y)`` block of a round table as a scaled permutation matrix."""
    a_sizes, b_sizes = rt.output_sizes
    if a_sizes != b_sizes:
        raise NotAPermutation(f"output spaces differ: {a_sizes} vs {b_sizes}")
    n = math.prod(a_sizes)
    image = [None] * n
    hit = [None] * n
    value = None
    for (a, b), p in sorted(rt.block(x, y).items()):
        i, j = raw_index(a, a_sizes), raw_index(b, b_sizes)
        if image[i] is not None:
            raise NotAPermutation(f"row {a} has more than one nonzero entry")
        if hit[j] is not None:
            raise NotAPermutation(f"column {b} has more than one nonzero entry")
        if value is not None and p != value:
            raise NotAPermutation(f"entry at row {a}, column {b} is {p}, expected {value}")
        value = p
        image[i], hit[j] = j, i
    for i, j in enumerate(image):
        if j is None:
            raise NotAPermutation(f"row {raw_tuple(i, a_sizes)} is empty")
    return OutputPermutation(tuple(a_sizes), tuple(image))


def cycles(p: OutputPermutation) -> list[tuple[int, ...]]:
    """Orbits of ``p``, each starting at its smallest element, ordered by that element."""
    seen = set()
    out = []
    for start in range(p.size):
        if start in seen:
            continue
        orbit = []
        i = start
        while i not in seen:
            seen.add(i)
            orbit.append(i)
            i = p.mapping[i]
        out.append(tuple(orbit))
    return out


def cycle_structure(p: OutputPermutation) -> CycleStructure:
    return CycleStructure(tuple(len(c) for c in cycles(p)))


def fixed_points(p: OutputPermutation) -> list[tuple[int, ...]]:
    return [p.element(i) for i, j in enumerate(p.mapping) if i == j]


def cycle_labeling(p: OutputPermutation) -> dict[tuple[int, ...], int]:
    """Label the elements of every nontrivial cycle 0, 1, ... in orbit order.

    Each cycle starts from its lexicographically smallest element, so Bob's
    label is Alice's label plus one modulo the cycle length.  Fixed points
    get no label.
    """
    labels = {}
    for orbit in cycles(p):
        if len(orbit) == 1:
            continue
        for k, i in enumerate(orbit):
            labels[p.element(i)] = k
    return labels


# ---------------------------------------------------------------------------
# relabeling / equivalence search


class _Matcher:
    """Backtracking search for output bijections with forward checking.

    Finds ``sigma[ka(x)]`` and ``tau[kb(y)]`` with
    ``cand(a, b | x, y) == target(sigma(a), tau(b) | xs[x], ys[y])`` for all
    entries.  Slots are filled Alice-first in ascending order and values are
    tried ascending, so the first solution is the lexicographically smallest.
    """

    def __init__(self, cand: NsBox, target: NsBox, alice_key, bob_key, xs, ys):
        self.cand, self.target = cand, target
        self.na, self.nb = cand.alice_outputs, cand.bob_outputs
        self.ka = [alice_key(x) for x in range(cand.alice_inputs)]
        self.kb = [bob_key(y) for y in range(cand.bob_inputs)]
        self.xs, self.ys = xs, ys
        n_ka, n_kb = max(self.ka) + 1, max(self.kb) + 1
        self.pairs = {(k1, k2): [(x, y) for x in range(cand.alice_inputs) if self.ka[x] == k1
                                 for y in range(cand.bob_inputs) if self.kb[y] == k2]
                      for k1 in range(n_ka) for k2 in range(n_kb)}
        self.alice_slots = [(k, a) for k in range(n_ka) for a in range(self.na)]
        self.bob_slots = [(k, b) for k in range(n_kb) for b in range(self.nb)]
        self.sigma = [[None] * self.na for _ in range(n_ka)]
        self.tau = [[None] * self.nb for _ in range(n_kb)]

    def _ok(self, ka, a, v, kb, b, w) -> bool:
        for x, y in self.pairs[(ka, kb)]:
            if self.cand.prob(a, b, x, y) != self.target.prob(v, w, self.xs[x], self.ys[y]):
                return False
        return True

    def _alice_domain(self, k, a):
        used = set(self.sigma[k])
        return [v for v in range(self.na) if v not in used
                and all(self._ok(k, a, v, kb, b, w)
                        for kb, row in enumerate(self.tau)
                        for b, w in enumerate(row) if w is not None)]

    def _bob_domain(self, k, b):
        used = set(self.tau[k])
        return [w for w in range(self.nb) if w not in used
                and all(self._ok(ka, a, v, k, b, w)
                        for ka, row in enumerate(self.sigma)
                        for a, v in enumerate(row) if v is not None)]

    def _bob_alive(self) -> bool:
        return all(self._bob_domain(k, b) for k, b in self.bob_slots if self.tau[k][b] is None)

    def solve(self):
        return self._step(0)

    def _step(self, i):
        if i < len(self.alice_slots):
            k, a = self.alice_slots[i]
            for v in self._alice_domain(k, a):
                self.sigma[k][a] = v
                if self._bob_alive():
                    found = self._step(i + 1)
                    if found:
                        return found
                self.sigma[k][a] = None
            return None
        j = i - len(self.alice_slots)
        if j == len(self.bob_slots):
            return (tuple(tuple(r) for r in self.sigma), tuple(tuple(r) for r in self.tau))
        k, b = self.bob_slots[j]
        for w in self._bob_domain(k, b):
            self.tau[k][b] = w
            found = self._step(i + 1)
            if found:
                return found
            self.tau[k][b] = None
        return None


def _check_budget(n: int, budget: int) -> None:
    if math.factorial(n) > budget:
        raise SearchBudgetExceeded(
            f"relabeling search over {n} outputs exceeds the budget ({n}! > {budget})")


def derive_relabeling(candidate: NsBox, target: NsBox, budget: int = DEFAULT_SEARCH_BUDGET):
    """Input-independent output bijections ``(alice_map, bob_map)`` turning candidate into target.

    ``alice_map[a]`` is the target label of candidate output ``a``.  Returns
    ``None`` when no such pair exists.
    """
    if candidate.shape != target.shape:
        raise ValueError(f"alphabet mismatch: {candidate.shape} vs {target.shape}")
    _check_budget(max(candidate.alice_outputs, candidate.bob_outputs), budget)
    xs = list(range(candidate.alice_inputs))
    ys = list(range(candidate.bob_inputs))
    found = _Matcher(candidate, target, lambda x: 0, lambda y: 0, xs, ys).solve()
    if found is None:
        return None
    sigma, tau = found
    return sigma[0], tau[0]


@dataclass(frozen=True)
class BoxEquivalence:
    """Witness that ``source`` becomes ``target``.

    Applied in this order: delete the listed deterministic inputs of the
    source, optionally swap parties, then send input ``x`` to
    ``alice_input_perm[x]`` and output ``a`` (under input ``x``) to
    ``alice_output_maps[x][a]``; likewise for Bob.  Inputs deleted from the
    target are listed so the witness is invertible up to those deletions.
    """

    party_swap: bool
    alice_input_perm: tuple[int, ...]
    bob_input_perm: tuple[int, ...]
    alice_output_maps: tuple[tuple[int, ...], ...]
    bob_output_maps: tuple[tuple[int, ...], ...]
    source_deleted: tuple[tuple[int, ...], tuple[int, ...]] = ((), ())
    target_deleted: tuple[tuple[int, ...], tuple[int, ...]] = ((), ())


def _deterministic_inputs(box: NsBox, party: Party) -> list[int]:
    n = box.alice_inputs if party is Party.ALICE else box.bob_inputs
    return [i for i in range(n) if max(marginal(box, party, i)) == 1]


def _keep_inputs(box: NsBox, alice_keep, bob_keep) -> NsBox:
    return NsBox.from_function(len(alice_keep), len(bob_keep), box.alice_outputs,
                               box.bob_outputs,
                               lambda a, b, x, y: box.prob(a, b, alice_keep[x], bob_keep[y]))


def strip_deterministic_inputs(box: NsBox):
    """Delete inputs whose local output is deterministic.

    Returns ``(box, (alice_deleted, bob_deleted))``.  Signaling boxes have no
    well-defined local marginals and are returned unchanged; a party always
    keeps at least its lowest input.
    """
    if not check_no_signaling(box).ok:
        return box, ((), ())
    deleted = []
    keep = []
    for party, n in ((Party.ALICE, box.alice_inputs), (Party.BOB, box.bob_inputs)):
        det = _deterministic_inputs(box, party)
        kept = [i for i in range(n) if i not in det]
        if not kept:
            kept, det = [0], det[1:]
        deleted.append(tuple(det))
        keep.append(kept)
    if not deleted[0] and not deleted[1]:
        return box, ((), ())
    return _keep_inputs(box, keep[0], keep[1]), (deleted[0], deleted[1])


def apply_equivalence(box: NsBox, eq: BoxEquivalence) -> NsBox:
    """Image of a (source-normalized) box under the witness."""
    if eq.party_swap:
        box = box.swap_parties()
    acc = {}
    for (x, y, a, b), p in box.nonzero():
        key = (eq.alice_input_perm[x], eq.bob_input_perm[y],
               eq.alice_output_maps[x][a], eq.bob_output_maps[y][b])
        acc[key] = p
    return NsBox.from_entries(box.alice_inputs, box.bob_inputs, box.alice_outputs,
                              box.bob_outputs, acc)


def _inverse(perm: Sequence[int]) -> tuple[int, ...]:
    inv = [0] * len(perm)
    for i, j in enumerate(perm):
        inv[j] = i
    return tuple(inv)


def invert_equivalence(eq: BoxEquivalence) -> BoxEquivalence:
    ax, by = _inverse(eq.alice_input_perm), _inverse(eq.bob_input_perm)
    amaps = tuple(_inverse(eq.alice_output_maps[ax[x]]) for x in range(len(ax)))
    bmaps = tuple(_inverse(eq.bob_output_maps[by[y]]) for y in range(len(by)))
    if eq.party_swap:
        ax, by, amaps, bmaps = by, ax, bmaps, amaps
    return BoxEquivalence(eq.party_swap, ax, by, amaps, bmaps,
                          eq.target_deleted, eq.source_deleted)


def boxes_equivalent(a: NsBox, b: NsBox, budget: int = DEFAULT_SEARCH_BUDGET):
    """Search for a witness that ``a`` and ``b`` are the same box up to relabeling.

    The allowed moves are party swap, input permutations, per-input output
    bijections and deletion of deterministic inputs.  Returns a
    :class:`BoxEquivalence` or ``None``.
    """
    a_norm, a_del = strip_deterministic_inputs(a)
    b_norm, b_del = strip_deterministic_inputs(b)
    for swap in (False, True):
        cand = a_norm.swap_parties() if swap else a_norm
        if cand.shape != b_norm.shape:
            continue
        _check_budget(max(cand.alice_outputs, cand.bob_outputs), budget)
        for xs in itertools.permutations(range(cand.alice_inputs)):
            for ys in itertools.permutations(range(cand.bob_inputs)):
                found = _Matcher(cand, b_norm, lambda x: x, lambda y: y, xs, ys).solve()
                if found:
                    sigma, tau = found
                    return BoxEquivalence(swap, tuple(xs), tuple(ys), sigma, tau, a_del, b_del)
    return None


def total_variation(p: NsBox, q: NsBox) -> Fraction:
    """Worst-case (over input pairs) total variation distance between two boxes."""
    if p.shape != q.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {q.shape}")
    worst = ZERO
    for x, y in p.input_pairs():
        dist = sum((abs(u - v) for u, v in zip(p.block_values(x, y), q.block_values(x, y))),
                   ZERO) / 2
        worst = max(worst, dist)
    return worst


def game_win_probability(box: NsBox) -> Fraction:
    """Worst-case probability over ``(x, y)`` of ``(b - a) mod d == x*y``."""
    if not (box.alice_inputs == box.bob_inputs == 2 and box.alice_outputs == box.bob_outputs):
        raise ValueError(f"need a binary-input box with equal output alphabets, got {box.shape}")
    d = box.alice_outputs
    return min(sum((box.prob(a, b, x, y) for a in range(d) for b in range(d)
                    if (b - a - x * y) % d == 0), ZERO)
               for x, y in box.input_pairs())
