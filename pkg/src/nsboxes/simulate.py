"""Seeded Monte Carlo runs of wirings, sampled one box query at a time.

Randomness comes from numpy's PCG64 generator seeded through
``SeedSequence(seed, spawn_key=(stream, ...))``.  Trial ``t`` of a run
driven by ``RandomSource(seed, stream)`` uses the child stream
``(stream, t)``, so every trial is reproducible on its own and trials can
be split across workers without changing any draw.

Every draw is exact: a box's probabilities are scaled to integer weights
over a common denominator and an integer is drawn uniformly below the
total by rejection sampling on raw 64-bit words.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy import stats

from .core import NsBox, Party
from .protocols import CoincidenceError, RoundProtocol, protocol4_round
from .wiring import Wiring, effective_box, require_valid, _require_no_signaling

_WORD = 1 << 64


class ScheduleError(ValueError):
    pass


class TruncatedTrial(RuntimeError):
    """The repeat loop hit ``max_rounds``; ``record`` holds the rounds played."""

    def __init__(self, record: "TrialRecord"):
        self.record = record
        super().__init__(f"no success within {record.rounds} rounds")


class RandomSource:
    """Reproducible exact-integer random stream identified by ``(seed, stream)``."""

    def __init__(self, seed: int, stream: int | Sequence[int] = 0):
        if not 0 <= seed < _WORD:
            raise ValueError("seed must be a 64-bit unsigned integer")
        self.seed = seed
        self.key = (stream,) if isinstance(stream, int) else tuple(stream)
        self._bits = np.random.PCG64(np.random.SeedSequence(seed, spawn_key=self.key))
        self._buf: list[int] = []
        self._chunk = 64

    @property
    def stream(self) -> int:
        return self.key[0]

    def child(self, index: int) -> "RandomSource":
        return RandomSource(self.seed, self.key + (index,))

    def _word(self) -> int:
        if not self._buf:
            self._buf = self._bits.random_raw(self._chunk).tolist()
            self._buf.reverse()
            self._chunk = min(self._chunk * 2, 4096)
        return self._buf.pop()

    def below(self, n: int) -> int:
        """Uniform integer in ``[0, n)``."""
        if n < 1:
            raise ValueError("n must be positive")
        words = 1
        while (1 << (64 * words)) < n:
            words += 1
        span = 1 << (64 * words)
        limit = span - span % n
        while True:
            r = 0
            for _ in range(words):
                r = (r << 64) | self._word()
            if r < limit:
                return r % n

    def choose(self, weights: Sequence[int]) -> int:
        """Index drawn with probability proportional to the integer ``weights``."""
        r = self.below(sum(weights))
        for i, w in enumerate(weights):
            if r < w:
                return i
            r -= w
        raise AssertionError("unreachable")


class _BoxSampler:
    def __init__(self, box: NsBox):
        self.box = box
        self.scale = math.lcm(*(v.denominator for v in box.table))
        self._marg = {}
        self._cond = {}

    def weights(self, party: Party, own_input: int, partner=None) -> tuple[int, ...]:
        box, scale = self.box, self.scale
        if partner is None:
            key = (party, own_input)
            if key not in self._marg:
                if party is Party.ALICE:
                    w = [sum(box.prob(a, b, own_input, 0) for b in range(box.bob_outputs))
                         for a in range(box.alice_outputs)]
                else:
                    w = [sum(box.prob(a, b, 0, own_input) for a in range(box.alice_outputs))
                         for b in range(box.bob_outputs)]
                self._marg[key] = tuple(int(v * scale) for v in w)
            return self._marg[key]
        key = (party, own_input) + partner
        if key not in self._cond:
            p_in, p_out = partner
            if party is Party.ALICE:
                w = [box.prob(a, p_out, own_input, p_in) for a in range(box.alice_outputs)]
            else:
                w = [box.prob(p_out, b, p_in, own_input) for b in range(box.bob_outputs)]
            self._cond[key] = tuple(int(v * scale) for v in w)
        return self._cond[key]


@dataclass(frozen=True)
class Schedule:
    """Global interleaving of queries as ``(party, stage)`` entries."""

    entries: tuple[tuple[Party, int], ...]

    @classmethod
    def from_parties(cls, parties: Sequence[Party | str]) -> "Schedule":
        seen = {Party.ALICE: 0, Party.BOB: 0}
        out = []
        for p in parties:
            p = _party_letter(p)
            out.append((p, seen[p]))
            seen[p] += 1
        return cls(tuple(out))

    @classmethod
    def alternating(cls, n: int) -> "Schedule":
        return cls.from_parties([Party.ALICE, Party.BOB] * n)

    @classmethod
    def alice_first(cls, n: int) -> "Schedule":
        return cls.from_parties([Party.ALICE] * n + [Party.BOB] * n)

    @classmethod
    def bob_first(cls, n: int) -> "Schedule":
        return cls.from_parties([Party.BOB] * n + [Party.ALICE] * n)

    @classmethod
    def named(cls, name: str, n: int) -> "Schedule":
        makers = {"alt": cls.alternating, "alice-first": cls.alice_first,
                  "bob-first": cls.bob_first}
        if name not in makers:
            raise ScheduleError(f"unknown schedule {name!r}")
        return makers[name](n)

    def check(self, n: int) -> None:
        for party in (Party.ALICE, Party.BOB):
            stages = [s for p, s in self.entries if p is party]
            if stages != list(range(n)):
                raise ScheduleError(f"{party.value} queries stages {stages}, "
                                    f"expected 0..{n - 1} in order")


def _party_letter(p) -> Party:
    if isinstance(p, str) and p.upper() in ("A", "B"):
        return Party.ALICE if p.upper() == "A" else Party.BOB
    return Party.coerce(p)


_SAMPLERS: dict[int, _BoxSampler] = {}


def _sampler(box: NsBox) -> _BoxSampler:
    s = _SAMPLERS.get(id(box))
    if s is None or s.box is not box:
        if len(_SAMPLERS) > 256:
            _SAMPLERS.clear()
        s = _SAMPLERS[id(box)] = _BoxSampler(box)
    return s


def _play(w: Wiring, x: int, y: int, schedule: Schedule, rng: RandomSource):
    n = len(w.boxes)
    outputs = {Party.ALICE: [None] * n, Party.BOB: [None] * n}
    inputs = {Party.ALICE: [None] * n, Party.BOB: [None] * n}
    ext = {Party.ALICE: x, Party.BOB: y}
    for party, stage in schedule.entries:
        box_idx = w.order(party)[stage]
        if outputs[party][box_idx] is not None:
            raise AssertionError(f"box {box_idx} queried twice by {party.value}")
        inp = w.input_maps(party)[stage](ext[party], outputs[party])
        partner = party.other
        sampler = _sampler(w.boxes[box_idx])
        if outputs[partner][box_idx] is None:
            weights = sampler.weights(party, inp)
        else:
            weights = sampler.weights(party, inp,
                                      (inputs[partner][box_idx], outputs[partner][box_idx]))
        inputs[party][box_idx] = inp
        outputs[party][box_idx] = rng.choose(weights)
    return tuple(outputs[Party.ALICE]), tuple(outputs[Party.BOB])


def sample_round(w: Wiring, x: int, y: int, schedule: Schedule | None = None,
                 rng: RandomSource | None = None):
    """Play one round query by query; returns the raw output tuples ``(a, b)``.

    The first party to reach a box draws from its local marginal, the second
    from the conditional given the partner's input and output.
    """
    if rng is None:
        raise ValueError("an explicit RandomSource is required")
    require_valid(w)
    _require_no_signaling(w)
    schedule = schedule or Schedule.alternating(len(w.boxes))
    schedule.check(len(w.boxes))
    return _play(w, x, y, schedule, rng)


@dataclass(frozen=True)
class TrialRecord:
    rounds: int
    boxes_consumed: int
    outputs: tuple[int, int] | None
    raw_rounds: tuple = field(repr=False, default=())


def _repeat(protocol: RoundProtocol, x, y, rng, max_rounds, schedule):
    raw = []
    w = protocol.wiring
    for _ in range(max_rounds):
        a, b = _play(w, x, y, schedule, rng)
        raw.append((a, b))
        fa, fb = protocol.is_failure(a), protocol.is_failure(b)
        if fa != fb:
            raise CoincidenceError(f"local failure flags disagree: Alice {a} -> {fa}, "
                                   f"Bob {b} -> {fb}")
        if not fa:
            rounds = len(raw)
            return TrialRecord(rounds, rounds * protocol.boxes_per_round,
                               (protocol.label(a), protocol.label(b)), tuple(raw))
    rounds = len(raw)
    raise TruncatedTrial(TrialRecord(rounds, rounds * protocol.boxes_per_round, None, tuple(raw)))


def run_repeat_until_success(protocol: RoundProtocol, x: int, y: int, rng: RandomSource,
                             max_rounds: int = 10 ** 6, schedule: Schedule | None = None
                             ) -> TrialRecord:
    """Repeat rounds on fresh boxes until neither party sees a failure outcome.

    Each party decides failure from its own raw outputs; a round where the
    two decisions differ raises :class:`CoincidenceError`.
    """
    if max_rounds < 1:
        raise ValueError("max_rounds must be >= 1")
    schedule = schedule or Schedule.alternating(protocol.boxes_per_round)
    schedule.check(protocol.boxes_per_round)
    return _repeat(protocol, x, y, rng, max_rounds, schedule)


@dataclass(frozen=True)
class CoincidenceAudit:
    rounds: int
    failures: int
    disagreements: int

    @property
    def ok(self) -> bool:
        return self.disagreements == 0


def audit_failure_flags(protocol: RoundProtocol, rounds: int, rng: RandomSource,
                        schedule: Schedule | None = None) -> CoincidenceAudit:
    """Play independent rounds with uniform inputs and count flag disagreements.

    Unlike :func:`run_repeat_until_success` this never raises; it tallies
    every round where exactly one party sees a failure outcome.
    """
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    schedule = schedule or Schedule.alternating(protocol.boxes_per_round)
    schedule.check(protocol.boxes_per_round)
    w = protocol.wiring
    failures = disagreements = 0
    for t in range(rounds):
        r = rng.child(t)
        x, y = r.below(2), r.below(2)
        a, b = _play(w, x, y, schedule, r)
        fa, fb = protocol.is_failure(a), protocol.is_failure(b)
        failures += fa and fb
        disagreements += fa != fb
    return CoincidenceAudit(rounds, failures, disagreements)


@dataclass(frozen=True)
class ChiSquare:
    statistic: float
    dof: int
    p_value: float

    def passes(self, level: float = 0.999) -> bool:
        return self.statistic <= stats.chi2.ppf(level, self.dof)


def chi_square(counts: dict, exact: dict) -> ChiSquare:
    """Pearson statistic of ``counts`` against the exact probabilities ``exact``."""
    trials = sum(counts.values())
    support = {k: p for k, p in exact.items() if p}
    if any(k not in support for k, c in counts.items() if c):
        return ChiSquare(math.inf, max(len(support) - 1, 1), 0.0)
    stat = 0.0
    for k, p in support.items():
        e = trials * p
        stat += float((counts.get(k, 0) - e) ** 2 / e)
    dof = max(len(support) - 1, 1)
    return ChiSquare(stat, dof, float(stats.chi2.sf(stat, dof)))


@dataclass(frozen=True)
class Empirical:
    counts: dict
    exact: dict
    trials: int
    chi2: ChiSquare
    boxes_consumed: tuple[int, ...] = field(repr=False, default=())


def _exact_block(box: NsBox, x: int, y: int) -> dict:
    return {(a, b): box.prob(a, b, x, y)
            for a in range(box.alice_outputs) for b in range(box.bob_outputs)
            if box.prob(a, b, x, y)}


def empirical_distribution(target: Wiring | RoundProtocol, x: int, y: int, trials: int,
                           rng: RandomSource, schedule: Schedule | None = None) -> Empirical:
    """Sample final outputs ``trials`` times and compare them with the exact box.

    A :class:`RoundProtocol` is run to success each trial; a bare
    :class:`Wiring` is played once and passed through its output maps.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    counts: dict = {}
    consumed = []
    if isinstance(target, RoundProtocol):
        exact_box, _ = target.conditioned()
        schedule = schedule or Schedule.alternating(target.boxes_per_round)
        schedule.check(target.boxes_per_round)
        for t in range(trials):
            rec = _repeat(target, x, y, rng.child(t), 10 ** 6, schedule)
            counts[rec.outputs] = counts.get(rec.outputs, 0) + 1
            consumed.append(rec.boxes_consumed)
    else:
        w = target
        require_valid(w)
        _require_no_signaling(w)
        exact_box = effective_box(w)
        schedule = schedule or Schedule.alternating(len(w.boxes))
        schedule.check(len(w.boxes))
        for t in range(trials):
            a, b = _play(w, x, y, schedule, rng.child(t))
            key = (w.final_output(Party.ALICE, x, a), w.final_output(Party.BOB, y, b))
            counts[key] = counts.get(key, 0) + 1
            consumed.append(len(w.boxes))
    exact = _exact_block(exact_box, x, y)
    return Empirical(dict(sorted(counts.items())), exact, trials, chi_square(counts, exact),
                     tuple(consumed))


@dataclass(frozen=True)
class Estimate:
    mean: Fraction
    stderr: float
    trials: int

    def within(self, value, sigmas: float = 3.0) -> bool:
        return abs(float(self.mean - Fraction(value))) <= sigmas * self.stderr


def mean_and_stderr(values: Sequence[int]) -> Estimate:
    n = len(values)
    mean = Fraction(sum(values), n)
    if n < 2:
        return Estimate(mean, math.inf, n)
    total, squares = sum(values), sum(v * v for v in values)
    var = Fraction(n * squares - total * total, n * (n - 1))
    return Estimate(mean, math.sqrt(var / n), n)


def estimate_expected_boxes(d: int, trials: int, rng: RandomSource,
                            protocol: RoundProtocol | None = None,
                            schedule: Schedule | None = None) -> Estimate:
    """Mean boxes consumed per success with ``(x, y)`` drawn uniformly each trial."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    protocol = protocol or protocol4_round(d)
    schedule = schedule or Schedule.alternating(protocol.boxes_per_round)
    schedule.check(protocol.boxes_per_round)
    used = []
    for t in range(trials):
        r = rng.child(t)
        x, y = r.below(2), r.below(2)
        used.append(_repeat(protocol, x, y, r, 10 ** 6, schedule).boxes_consumed)
    return mean_and_stderr(used)
