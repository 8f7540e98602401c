"""Seeded generators for random no-signaling boxes and wirings, shared by tests."""

import itertools
import random
from fractions import Fraction

from nsboxes import LookupMap, NsBox, Wiring, make_d_box, relabel_outputs


def _weights(rng, k):
    raw = [rng.randint(1, 9) for _ in range(k)]
    total = sum(raw)
    return [Fraction(r, total) for r in raw]


def deterministic_local(na, nb, f, g, nx=2, ny=2):
    return NsBox.from_function(nx, ny, na, nb,
                               lambda a, b, x, y: Fraction(int(a == f[x] and b == g[y])))


def relabeled_d_box(rng, d):
    sigma = list(range(d))
    tau = list(range(d))
    rng.shuffle(sigma)
    rng.shuffle(tau)
    return relabel_outputs(make_d_box(d), sigma, tau)


def mixture(parts, weights):
    first = parts[0]
    return NsBox.from_function(
        first.alice_inputs, first.bob_inputs, first.alice_outputs, first.bob_outputs,
        lambda a, b, x, y: sum((w * p.prob(a, b, x, y) for p, w in zip(parts, weights)),
                               Fraction(0)))


def random_local(rng, na, nb, k=None):
    k = k or rng.randint(1, 3)
    parts = [deterministic_local(na, nb, [rng.randrange(na) for _ in range(2)],
                                 [rng.randrange(nb) for _ in range(2)]) for _ in range(k)]
    return mixture(parts, _weights(rng, k))


def random_ns_box(rng, max_outputs=3):
    """A d-box, a local box, or a mixture of the two, with shuffled labels."""
    kind = rng.choice(("dbox", "local", "mix"))
    if kind == "local":
        return random_local(rng, rng.randint(1, max_outputs), rng.randint(1, max_outputs))
    d = rng.randint(2, max_outputs)
    nl = relabeled_d_box(rng, d)
    if kind == "dbox":
        return nl
    return mixture([nl, random_local(rng, d, d)], _weights(rng, 2))


def _random_map(rng, reads, n_ext, read_sizes, value_range):
    table = {}
    for key in itertools.product(range(n_ext), *(range(n) for n in read_sizes)):
        table[key] = rng.randrange(value_range)
    return LookupMap(tuple(reads), table)


def random_wiring(rng, n_boxes=None, max_outputs=3, raw_outputs=True):
    """Random adaptive wiring of 2-3 random boxes; the two orders always differ."""
    n = n_boxes or rng.randint(2, 3)
    boxes = [random_ns_box(rng, max_outputs) for _ in range(n)]
    alice_order = list(range(n))
    rng.shuffle(alice_order)
    bob_order = list(alice_order)
    while bob_order == alice_order:
        rng.shuffle(bob_order)
    maps = {}
    for party, order in (("alice", alice_order), ("bob", bob_order)):
        stage_maps = []
        for k, box_idx in enumerate(order):
            earlier = order[:k]
            reads = sorted(rng.sample(earlier, rng.randint(0, len(earlier))))
            sizes = [boxes[r].alice_outputs if party == "alice" else boxes[r].bob_outputs
                     for r in reads]
            n_in = boxes[box_idx].alice_inputs if party == "alice" else boxes[box_idx].bob_inputs
            stage_maps.append(_random_map(rng, reads, 2, sizes, n_in))
        maps[party] = stage_maps
    out_maps = [None, None]
    final = None
    if not raw_outputs:
        final = (rng.randint(1, 4), rng.randint(1, 4))
        for i, attr in enumerate(("alice_outputs", "bob_outputs")):
            sizes = [getattr(b, attr) for b in boxes]
            out_maps[i] = _random_map(rng, list(range(n)), 2, sizes, final[i])
    return Wiring(
        boxes=tuple(boxes),
        alice_order=tuple(alice_order),
        bob_order=tuple(bob_order),
        alice_input_maps=tuple(maps["alice"]),
        bob_input_maps=tuple(maps["bob"]),
        alice_output_map=out_maps[0],
        bob_output_map=out_maps[1],
        final_output_sizes=final,
    )


def seeded(seed):
    return random.Random(seed)
