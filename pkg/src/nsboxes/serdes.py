"""Line-oriented text formats for boxes (``.nsbox``) and wirings (``.nswire``).

Box grammar::

    nsbox 1
    sizes <x-inputs> <y-inputs> <a-outputs> <b-outputs>
    p <x> <y> <a> <b> <num>/<den>      (one per nonzero entry, sorted)

Wiring grammar::

    nswire 1
    external <x-inputs> <y-inputs>
    final <alice-outputs> <bob-outputs>
    box <i> inline                     (followed by an nsbox document and "end")
    box <i> file <path>
    order alice|bob <box> <box> ...
    input alice|bob <stage> reads <box>... | -
    output alice|bob raw
    output alice|bob reads <box>... | -
    m <input> <read outputs>... <value>   (table rows of the preceding map)

Blank lines and ``#`` comments are ignored.
"""

from __future__ import annotations

import re
from fractions import Fraction
from pathlib import Path

from .core import NsBox, BoxError
from .wiring import LookupMap, Wiring, validate

BOX_VERSION = "1"
WIRING_VERSION = "1"

_RATIONAL = re.compile(r"^(\d+)/([1-9]\d*)$")


class ParseError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        self.message = message
        super().__init__(f"line {line}: {message}" if line is not None else message)


class UnknownVersion(ParseError):
    pass


class DuplicateEntry(ParseError):
    pass


class NotNormalized(ParseError):
    pass


class MalformedRational(ParseError):
    pass


class NotLowestTerms(MalformedRational):
    pass


class WiringParseError(ParseError):
    def __init__(self, message, line=None, issues=()):
        self.issues = tuple(issues)
        super().__init__(message, line)


def format_rational(v: Fraction) -> str:
    return f"{v.numerator}/{v.denominator}"


def parse_rational(token: str, line: int | None = None, strict: bool = True) -> Fraction:
    m = _RATIONAL.match(token)
    if not m:
        raise MalformedRational(f"malformed rational {token!r}", line)
    num, den = int(m.group(1)), int(m.group(2))
    value = Fraction(num, den)
    if strict and (value.numerator, value.denominator) != (num, den):
        raise NotLowestTerms(f"rational not in lowest terms: {token}", line)
    return value


def write_box(box: NsBox) -> str:
    lines = [f"nsbox {BOX_VERSION}", "sizes " + " ".join(map(str, box.shape))]
    for (x, y, a, b), p in box.nonzero():
        lines.append(f"p {x} {y} {a} {b} {format_rational(p)}")
    return "\n".join(lines) + "\n"


def _content_lines(text: str):
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield no, line.split()


def _ints(tokens, line, what):
    try:
        return [int(t) for t in tokens]
    except ValueError:
        raise ParseError(f"expected integers in {what}, got {' '.join(tokens)}", line) from None


def _parse_box_lines(lines, strict: bool, end_line: int | None = None) -> NsBox:
    lines = list(lines)
    if not lines:
        raise ParseError("empty box document", end_line)
    no, head = lines[0]
    if head[0] != "nsbox":
        raise ParseError(f"expected 'nsbox' header, got {head[0]!r}", no)
    if len(head) != 2 or head[1] != BOX_VERSION:
        raise UnknownVersion(f"unknown box format version {' '.join(head[1:])!r}", no)
    if len(lines) < 2 or lines[1][1][0] != "sizes":
        raise ParseError("missing 'sizes' line", lines[1][0] if len(lines) > 1 else end_line)
    no, sizes = lines[1]
    if len(sizes) != 5:
        raise ParseError("'sizes' needs four integers", no)
    shape = _ints(sizes[1:], no, "sizes")
    if any(s < 1 for s in shape):
        raise ParseError("alphabet sizes must be positive", no)
    entries = {}
    prev = None
    first_line = {}
    for no, tok in lines[2:]:
        if tok[0] != "p" or len(tok) != 6:
            raise ParseError(f"expected 'p x y a b num/den', got {' '.join(tok)!r}", no)
        key = tuple(_ints(tok[1:5], no, "entry"))
        if any(not 0 <= k < n for k, n in zip(key, shape)):
            raise ParseError(f"entry index {key} out of range for sizes {shape}", no)
        value = parse_rational(tok[5], no, strict)
        if key in entries:
            raise DuplicateEntry(f"duplicate entry for (x,y,a,b)={key}", no)
        if strict and prev is not None and key < prev:
            raise ParseError(f"entry {key} out of order", no)
        if value == 0:
            raise ParseError(f"explicit zero entry {key}", no)
        entries[key] = value
        first_line.setdefault(key[:2], no)
        prev = key
    nx, ny, na, nb = shape
    for x in range(nx):
        for y in range(ny):
            total = sum((v for k, v in entries.items() if k[:2] == (x, y)), Fraction(0))
            if total != 1:
                raise NotNormalized(f"block not normalized: (x,y)=({x},{y}) sums to {total}",
                                    first_line.get((x, y), lines[1][0]))
    try:
        return NsBox.from_entries(nx, ny, na, nb, entries)
    except BoxError as exc:
        raise ParseError(str(exc)) from exc


def parse_box(text: str, strict: bool = True) -> NsBox:
    """Parse an ``.nsbox`` document.  ``strict`` rejects non-canonical rationals and order."""
    return _parse_box_lines(_content_lines(text), strict)


def read_box(path, strict: bool = True) -> NsBox:
    return parse_box(Path(path).read_text(), strict)


# ---------------------------------------------------------------------------
# wirings


def _reads(reads) -> str:
    return " ".join(map(str, reads)) if reads else "-"


def _map_lines(header: str, lmap: LookupMap) -> list[str]:
    lines = [f"{header} reads {_reads(lmap.reads)}"]
    for key in sorted(lmap.table):
        lines.append("m " + " ".join(map(str, key)) + f" {lmap.table[key]}")
    return lines


def write_wiring(w: Wiring) -> str:
    lines = [f"nswire {WIRING_VERSION}",
             f"external {w.external_input_sizes[0]} {w.external_input_sizes[1]}",
             f"final {w.final_output_sizes[0]} {w.final_output_sizes[1]}"]
    for i, box in enumerate(w.boxes):
        lines.append(f"box {i} inline")
        lines.extend(write_box(box).splitlines())
        lines.append("end")
    for name in ("alice", "bob"):
        lines.append(f"order {name} " + " ".join(map(str, w.order(name))))
    for name in ("alice", "bob"):
        for k, imap in enumerate(w.input_maps(name)):
            lines.extend(_map_lines(f"input {name} {k}", imap))
    for name in ("alice", "bob"):
        omap = w.output_map(name)
        if omap is None:
            lines.append(f"output {name} raw")
        else:
            lines.extend(_map_lines(f"output {name}", omap))
    return "\n".join(lines) + "\n"


def parse_wiring(text: str, base_dir=None, strict: bool = True) -> Wiring:
    """Parse an ``.nswire`` document and validate the resulting wiring.

    ``box <i> file <path>`` references are resolved against ``base_dir``.
    """
    lines = list(_content_lines(text))
    if not lines:
        raise WiringParseError("empty wiring document")
    no, head = lines[0]
    if head[0] != "nswire":
        raise WiringParseError(f"expected 'nswire' header, got {head[0]!r}", no)
    if len(head) != 2 or head[1] != WIRING_VERSION:
        raise UnknownVersion(f"unknown wiring format version {' '.join(head[1:])!r}", no)
    external = final = None
    boxes: dict[int, NsBox] = {}
    orders: dict[str, list[int]] = {}
    maps: dict[tuple, tuple] = {}
    current = None
    map_line: dict[tuple, int] = {}
    i = 1
    while i < len(lines):
        no, tok = lines[i]
        kw = tok[0]
        if kw == "m":
            if current is None:
                raise WiringParseError("table row outside a map", no)
            vals = _ints(tok[1:], no, "map row")
            reads, table = maps[current]
            if len(vals) != len(reads) + 2:
                raise WiringParseError(f"map row needs {len(reads) + 2} values", no)
            key = tuple(vals[:-1])
            if key in table:
                raise DuplicateEntry(f"duplicate map row for key {key}", no)
            table[key] = vals[-1]
        else:
            current = None
            if kw == "external" and len(tok) == 3:
                external = tuple(_ints(tok[1:], no, "external"))
            elif kw == "final" and len(tok) == 3:
                final = tuple(_ints(tok[1:], no, "final"))
            elif kw == "box" and len(tok) >= 3:
                idx = _ints(tok[1:2], no, "box index")[0]
                if idx in boxes:
                    raise DuplicateEntry(f"box {idx} defined twice", no)
                if tok[2] == "inline":
                    j = i + 1
                    while j < len(lines) and lines[j][1] != ["end"]:
                        j += 1
                    if j == len(lines):
                        raise WiringParseError(f"box {idx}: missing 'end'", no)
                    boxes[idx] = _parse_box_lines(lines[i + 1:j], strict, no)
                    i = j
                elif tok[2] == "file" and len(tok) == 4:
                    path = Path(tok[3])
                    if base_dir is not None and not path.is_absolute():
                        path = Path(base_dir) / path
                    try:
                        boxes[idx] = read_box(path, strict)
                    except OSError as exc:
                        raise WiringParseError(f"box {idx}: cannot read {path}: {exc}",
                                               no) from exc
                else:
                    raise WiringParseError(f"bad box line {' '.join(tok)!r}", no)
            elif kw == "order" and len(tok) >= 2 and tok[1] in ("alice", "bob"):
                orders[tok[1]] = _ints(tok[2:], no, "order")
            elif kw in ("input", "output") and len(tok) >= 3 and tok[1] in ("alice", "bob"):
                if kw == "input":
                    stage = _ints(tok[2:3], no, "stage")[0]
                    key, rest = ("input", tok[1], stage), tok[3:]
                else:
                    key, rest = ("output", tok[1]), tok[2:]
                if key in maps:
                    raise DuplicateEntry(f"map {' '.join(map(str, key))} defined twice", no)
                if rest == ["raw"] and kw == "output":
                    maps[key] = None
                elif rest and rest[0] == "reads":
                    reads = () if rest[1:] == ["-"] else tuple(_ints(rest[1:], no, "reads"))
                    maps[key] = (reads, {})
                    map_line[key] = no
                    current = key
                else:
                    raise WiringParseError(f"bad map header {' '.join(tok)!r}", no)
            else:
                raise WiringParseError(f"unrecognized line {' '.join(tok)!r}", no)
        i += 1

    if external is None or final is None:
        raise WiringParseError("missing 'external' or 'final' line")
    n = len(boxes)
    if sorted(boxes) != list(range(n)):
        raise WiringParseError(f"box indices {sorted(boxes)} are not 0..{n - 1}")
    for name in ("alice", "bob"):
        if name not in orders:
            raise WiringParseError(f"missing order for {name}")

    def build(key):
        spec = maps.get(key)
        if spec is None:
            return None
        reads, table = spec
        return LookupMap(reads, table)

    input_maps = {}
    for name in ("alice", "bob"):
        stages = sorted(k[2] for k in maps if k[0] == "input" and k[1] == name)
        if stages != list(range(len(stages))):
            raise WiringParseError(f"{name} input stages {stages} are not consecutive from 0")
        input_maps[name] = tuple(build(("input", name, k)) for k in stages)
    for name in ("alice", "bob"):
        if ("output", name) not in maps:
            raise WiringParseError(f"missing output map for {name}")
    w = Wiring(
        boxes=tuple(boxes[i] for i in range(n)),
        alice_order=tuple(orders["alice"]),
        bob_order=tuple(orders["bob"]),
        alice_input_maps=input_maps["alice"],
        bob_input_maps=input_maps["bob"],
        alice_output_map=build(("output", "alice")),
        bob_output_map=build(("output", "bob")),
        external_input_sizes=external,
        final_output_sizes=final,
    )
    issues = validate(w)
    if issues:
        first = issues[0]
        line = _issue_line(first, map_line)
        raise WiringParseError("invalid wiring: " + "; ".join(map(str, issues)), line, issues)
    return w


def _issue_line(issue, map_line):
    m = re.match(r"(alice|bob) stage (\d+)", issue.location)
    if m:
        return map_line.get(("input", m.group(1), int(m.group(2))))
    m = re.match(r"(alice|bob) output map", issue.location)
    if m:
        return map_line.get(("output", m.group(1)))
    return None


def read_wiring(path, strict: bool = True) -> Wiring:
    path = Path(path)
    return parse_wiring(path.read_text(), base_dir=path.parent, strict=strict)
