"""``nsboxes`` command line.

Exit codes are shared by every subcommand: 0 success, 1 verification
failure, 2 usage or parse error.  ``--machine`` switches to one
space-separated record per line with rationals printed as ``num/den``.
"""

from __future__ import annotations

import argparse
import sys
from fractions import Fraction
from pathlib import Path

from . import analysis, protocols, serdes, simulate
from .core import Party, check_no_signaling, make_d_box
from .wiring import round_table

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

PROTOCOLS = ("p1", "p4", "two-zero", "threshold")


class UsageError(Exception):
    pass


def _q(v: Fraction) -> str:
    return serdes.format_rational(Fraction(v))


def _tup(t, sep: str = "") -> str:
    if sep == "" and any(v >= 10 for v in t):
        sep = ","
    return sep.join(map(str, t))


def _build_wiring(args):
    d, s = args.d, args.s
    if d is None:
        raise UsageError("--d is required")
    try:
        if args.protocol == "p1":
            if d < 1:
                raise UsageError("--d must be >= 1")
            return protocols.protocol1_wiring(make_d_box(d), make_d_box(d))
        if args.protocol == "p4":
            return protocols.protocol4_round_wiring(d)
        if args.protocol == "two-zero":
            return protocols.variant_two_zero_wiring(d)
        if s is None:
            raise UsageError("threshold needs --s")
        return protocols.variant_threshold_wiring(d, s)
    except protocols.ProtocolError as exc:
        raise UsageError(str(exc)) from exc


def _build_round(args) -> protocols.RoundProtocol:
    _build_wiring(args)
    if args.protocol == "p4":
        return protocols.protocol4_round(args.d)
    if args.protocol == "two-zero":
        return protocols.variant_two_zero_round(args.d)
    return protocols.variant_threshold_round(args.d, args.s)


def _block_inputs(args):
    xs = [args.x] if args.x is not None else [0, 1]
    ys = [args.y] if args.y is not None else [0, 1]
    for v in xs + ys:
        if v not in (0, 1):
            raise UsageError("--x and --y must be 0 or 1")
    return xs, ys


# ---------------------------------------------------------------------------
# subcommands


def cmd_make_box(args, out) -> int:
    if args.d < 1:
        raise UsageError("--d must be >= 1")
    text = serdes.write_box(make_d_box(args.d))
    if args.out:
        Path(args.out).write_text(text)
        if args.machine:
            print(f"wrote {args.out} entries {len(text.splitlines()) - 2}", file=out)
        else:
            print(f"wrote {make_d_box(args.d).alice_outputs}-box to {args.out}", file=out)
    else:
        out.write(text)
    return EXIT_OK


def cmd_verify(args, out) -> int:
    try:
        box = serdes.read_box(args.box, strict=not args.lenient)
    except OSError as exc:
        print(f"error: cannot read {args.box}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except serdes.ParseError as exc:
        print(f"error: {args.box}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    report = check_no_signaling(box)
    families = [
        ("normalization", ()),
        ("alice-to-bob", report.by_party(Party.BOB)),
        ("bob-to-alice", report.by_party(Party.ALICE)),
    ]
    for name, bad in families:
        status = "fail" if bad else "pass"
        if args.machine:
            print(f"check {name} {status}", file=out)
            for v in bad:
                print(f"violation {v.party.value} input {v.own_input} output {v.output} "
                      f"partner {v.partner_inputs[0]} {_q(v.sums[0])} "
                      f"partner {v.partner_inputs[1]} {_q(v.sums[1])}", file=out)
        else:
            label = {"normalization": "normalization",
                     "alice-to-bob": "no-signaling Alice -> Bob",
                     "bob-to-alice": "no-signaling Bob -> Alice"}[name]
            print(f"{label}: {status.upper()}", file=out)
            for v in bad:
                print(f"  {v}", file=out)
    return EXIT_OK if report.ok else EXIT_FAIL


def cmd_round_table(args, out) -> int:
    w = _build_wiring(args)
    xs, ys = _block_inputs(args)
    rt = round_table(w, [(x, y) for x in xs for y in ys])
    a_tuples, b_tuples = rt.alice_tuples(), rt.bob_tuples()
    if args.machine:
        for x in xs:
            for y in ys:
                for (a, b), p in sorted(rt.block(x, y).items()):
                    print(f"entry {x} {y} {_tup(a, ',')} {_tup(b, ',')} {_q(p)}", file=out)
        return EXIT_OK
    cells = {}
    for x in xs:
        for y in ys:
            for a in a_tuples:
                for b in b_tuples:
                    p = rt.prob(x, y, a, b)
                    cells[(x, y, a, b)] = _q(p) if p else "0"
    width = max(max(len(c) for c in cells.values()), max(len(_tup(b)) for b in b_tuples))
    head_w = max(len(_tup(a)) for a in a_tuples)
    group_w = (width + 1) * len(b_tuples) - 1
    header = " | ".join(f"{'y=' + str(y):<{group_w}}" for y in ys)
    print((" " * (head_w + 6) + header).rstrip(), file=out)
    cols = " | ".join(" ".join(f"{_tup(b):>{width}}" for b in b_tuples) for _ in ys)
    print(" " * (head_w + 6) + cols, file=out)
    for x in xs:
        print(f"x={x}", file=out)
        for a in a_tuples:
            row = " | ".join(" ".join(f"{cells[(x, y, a, b)]:>{width}}" for b in b_tuples)
                             for y in ys)
            print(f"  {_tup(a):>{head_w}} -> {row}", file=out)
    return EXIT_OK


def cmd_cycles(args, out) -> int:
    w = _build_wiring(args)
    rt = round_table(w, [(1, 1)])
    try:
        perm = analysis.extract_permutation(rt, 1, 1)
    except analysis.NotAPermutation as exc:
        print(f"error: x=y=1 block is not a permutation: {exc}", file=sys.stderr)
        return EXIT_FAIL
    structure = analysis.cycle_structure(perm)
    orbits = analysis.cycles(perm)
    if args.machine:
        print("lengths: " + ",".join(map(str, structure.lengths)), file=out)
        for src, dst in perm.arrows():
            print(f"arrow {_tup(src, ',')} {_tup(dst, ',')}", file=out)
        return EXIT_OK
    print(f"cycle structure: {structure}", file=out)
    for orbit in sorted(orbits, key=lambda o: (len(o), o)):
        elems = [_tup(perm.element(i)) for i in orbit]
        chain = " -> ".join(elems + [elems[0]])
        print(f"  [{len(orbit)}] {chain}", file=out)
    return EXIT_OK


def cmd_convert(args, out) -> int:
    if args.source < 2:
        raise UsageError("--from must be >= 2")
    if args.to < 1:
        raise UsageError("--to must be >= 1")
    plan = protocols.plan_conversion(args.source, args.to)
    recomputed = protocols.plan_consumption(plan.steps)
    if args.machine:
        print(f"plan {plan.source} {plan.target} steps {len(plan.steps)}", file=out)
        for step in plan.steps:
            print(f"step {step.kind} {step.d_in} {step.d_out} success "
                  f"{_q(step.success_probability)} boxes {step.boxes_per_round} "
                  f"cost {_q(step.expected_cost)}", file=out)
        print(f"consumption {_q(plan.expected_consumption)}", file=out)
    else:
        print(f"plan {plan.source}-box -> {plan.target}-box, {len(plan.steps)} step(s)", file=out)
        if not plan.steps:
            print("  (empty plan: source already equals target)", file=out)
        for k, step in enumerate(plan.steps, 1):
            print(f"  {k}. {step.describe()}: success {_q(step.success_probability)}, "
                  f"{step.boxes_per_round} box(es)/round, expected cost {_q(step.expected_cost)}",
                  file=out)
        print(f"expected consumption: {_q(plan.expected_consumption)} source boxes", file=out)
    ok = recomputed == plan.expected_consumption
    if args.plan_only:
        return EXIT_OK if ok else EXIT_FAIL
    final, results = protocols.execute_plan(plan)
    ok = ok and final == make_d_box(plan.target)
    status = "PASS" if ok else "FAIL"
    if args.machine:
        print(f"verify {status.lower()}", file=out)
    else:
        for step, box, p in results:
            print(f"  built {step.describe()}: success {_q(p)}", file=out)
        print(f"final box equals the exact {plan.target}-box: {status}", file=out)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_sample(args, out) -> int:
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    xs, ys = _block_inputs(args)
    x = args.x if args.x is not None else 1
    y = args.y if args.y is not None else 1
    rng = simulate.RandomSource(args.seed)
    if args.protocol == "p1":
        target = _build_wiring(args)
        n_boxes = len(target.boxes)
        exact_boxes = Fraction(n_boxes)
    else:
        target = _build_round(args)
        n_boxes = target.boxes_per_round
        exact_boxes = Fraction(n_boxes) / target.success_probability
    try:
        schedule = simulate.Schedule.named(args.schedule, n_boxes)
    except simulate.ScheduleError as exc:
        raise UsageError(str(exc)) from exc
    emp = simulate.empirical_distribution(target, x, y, args.trials, rng, schedule)
    est = simulate.mean_and_stderr(emp.boxes_consumed)
    keys = sorted(set(emp.exact) | set(emp.counts))
    if args.machine:
        for a, b in keys:
            print(f"count {a} {b} {emp.counts.get((a, b), 0)} "
                  f"exact {_q(emp.exact.get((a, b), 0))}", file=out)
        print(f"chi2 {emp.chi2.statistic:.6f} dof {emp.chi2.dof} p {emp.chi2.p_value:.6f} "
              f"pass {'yes' if emp.chi2.passes() else 'no'}", file=out)
        print(f"boxes mean {float(est.mean):.6f} se {est.stderr:.6f} exact {_q(exact_boxes)}",
              file=out)
        return EXIT_OK
    print(f"{args.protocol} d={args.d} (x,y)=({x},{y}) trials={args.trials} seed={args.seed} "
          f"schedule={args.schedule}", file=out)
    print("  (a,b)   count    freq      exact", file=out)
    for a, b in keys:
        c = emp.counts.get((a, b), 0)
        p = emp.exact.get((a, b), 0)
        print(f"  ({a},{b})  {c:7d}  {c / args.trials:.5f}  {_q(p):>9}", file=out)
    print(f"chi-square {emp.chi2.statistic:.4f} on {emp.chi2.dof} dof, p={emp.chi2.p_value:.4f} "
          f"({'consistent' if emp.chi2.passes() else 'INCONSISTENT'} at 99.9%)", file=out)
    print(f"boxes consumed: {float(est.mean):.5f} +/- {est.stderr:.5f} "
          f"(exact {_q(exact_boxes)} = {float(exact_boxes):.5f})", file=out)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--machine", action="store_true",
                        help="one record per line, rationals as num/den")
    proto = argparse.ArgumentParser(add_help=False)
    proto.add_argument("--protocol", choices=PROTOCOLS, required=True)
    proto.add_argument("--d", type=int, required=True)
    proto.add_argument("--s", type=int)

    parser = argparse.ArgumentParser(prog="nsboxes",
                                     description="Exact no-signaling box interconversion.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("make-box", parents=[common], help="write the canonical d-box")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_make_box)

    p = sub.add_parser("verify", parents=[common], help="check a .nsbox file")
    p.add_argument("--box", required=True)
    p.add_argument("--lenient", action="store_true", help="accept non-canonical rationals")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("round-table", parents=[common, proto], help="print one round's table")
    p.add_argument("--x", type=int)
    p.add_argument("--y", type=int)
    p.set_defaults(func=cmd_round_table)

    p = sub.add_parser("cycles", parents=[common, proto], help="cycle structure at x=y=1")
    p.set_defaults(func=cmd_cycles)

    p = sub.add_parser("convert", parents=[common], help="plan and verify a conversion")
    p.add_argument("--from", dest="source", type=int, required=True)
    p.add_argument("--to", type=int, required=True)
    p.add_argument("--plan-only", action="store_true")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("sample", parents=[common, proto], help="Monte Carlo simulation")
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--schedule", default="alt", choices=("alt", "alice-first", "bob-first"))
    p.add_argument("--x", type=int)
    p.add_argument("--y", type=int)
    p.set_defaults(func=cmd_sample)
    return parser


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return args.func(args, out)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main_exit() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
