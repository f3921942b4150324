"""Fact-file language: tokenizer, parser, renderer, KB assembly and overlays.

The syntax is a small, closed subset of Prolog facts::

    application(lightsApp, [mlOptimiser, lightsDriver]).
    node(edgenode, [ubuntu, python], 8, [gpu, lightshub, videocamera]).
    energyProfile(edgenode, step([(50, 0.08), (default, 0.1)])).
    biLink(privateCloud, edgenode, 5, 1000).   % both directions

Energy profiles are closed expression terms (``const``, ``linear``,
``loglinear``, ``step``, ``table``) rather than executable clauses.
"""
from __future__ import annotations

import bisect
import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence, Tuple, Union

from .model import (
    DEFAULT_EMISSIONS,
    Application,
    ConstProfile,
    Constants,
    Diagnostic,
    EnergyMix,
    EnergyProfile,
    Flow,
    GreenplaceError,
    KnowledgeBase,
    LinearProfile,
    Link,
    LogLinearProfile,
    Node,
    Service,
    SourcePos,
    StepProfile,
    TableProfile,
    errors_only,
    validate,
)

HEADS = (
    "application", "service", "s2s", "node", "cost", "totHW", "pue",
    "energyProfile", "energySourceMix", "link", "biLink", "emissions",
)
PROFILE_KINDS = ("const", "linear", "loglinear", "step", "table")
NODE_ATTRIBUTES = ("cost", "totHW", "pue", "energyProfile", "energySourceMix")
MAX_DEPTH = 32


class FactSyntaxError(GreenplaceError, SyntaxError):
    """Malformed fact text. Carries the position and the expected tokens."""

    def __init__(self, message: str, pos: SourcePos, expected: Iterable[str] = ()):
        SyntaxError.__init__(self, message, (pos.source, pos.line, pos.column, None))
        self.message = message
        self.pos = pos
        self.expected = frozenset(expected)

    def __str__(self) -> str:
        text = f"{self.pos}: {self.message}"
        if self.expected:
            text += " (expected " + " or ".join(sorted(self.expected)) + ")"
        return text


class DuplicateFactError(FactSyntaxError):
    pass


class KeyNotFound(GreenplaceError, KeyError):
    def __str__(self) -> str:
        return f"no {self.args[0]} fact with key {self.args[1]!r}"


class ValidationFailed(GreenplaceError):
    def __init__(self, diagnostics: Sequence[Diagnostic]):
        self.diagnostics = list(diagnostics)
        super().__init__("\n".join(str(d) for d in errors_only(self.diagnostics)))


# ------------------------------------------------------------------ terms


@dataclass(frozen=True)
class ListTerm:
    items: tuple


@dataclass(frozen=True)
class TupleTerm:
    items: tuple


@dataclass(frozen=True)
class Compound:
    name: str
    args: tuple


Term = Union[str, int, float, ListTerm, TupleTerm, Compound]


@dataclass(frozen=True)
class Fact:
    head: str
    args: tuple
    pos: Optional[SourcePos] = field(default=None, compare=False)

    def keys(self) -> Tuple[Tuple[str, object], ...]:
        """Uniqueness keys as ``(category, key)``; ``biLink`` yields two links."""
        a = self.args
        if self.head == "biLink":
            ks = [("link", (a[0], a[1])), ("link", (a[1], a[0]))]
            return tuple(dict.fromkeys(ks))
        if self.head in ("s2s", "link"):
            return ((self.head, (a[0], a[1])),)
        return ((self.head, a[0]),)


@dataclass(frozen=True)
class FactFile:
    facts: Tuple[Fact, ...] = ()

    def __iter__(self):
        return iter(self.facts)

    def __len__(self) -> int:
        return len(self.facts)

    @classmethod
    def concat(cls, files: Iterable["FactFile"]) -> "FactFile":
        facts = tuple(f for ff in files for f in ff.facts)
        _check_duplicates(facts)
        return cls(facts)


def _check_duplicates(facts: Iterable[Fact]) -> None:
    seen: dict = {}
    for fact in facts:
        for key in fact.keys():
            if key in seen:
                first = seen[key]
                raise DuplicateFactError(
                    f"duplicate {key[0]} fact for {_fmt_key(key[1])} (first declared at {first.pos})",
                    fact.pos or SourcePos(0, 0),
                )
            seen[key] = fact


def _fmt_key(key) -> str:
    return ", ".join(key) if isinstance(key, tuple) else str(key)


# -------------------------------------------------------------- tokenizer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n\f\v]+)
  | (?P<comment>%[^\n]*)
  | (?P<number>-?[0-9]+(?:\.[0-9]+)?(?:[eE][+-]?[0-9]+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>[()\[\],.])
    """,
    re.VERBOSE,
)

IDENT, NUMBER, EOF = "identifier", "number", "end of input"


class _Tokens:
    def __init__(self, text: str, source: str, line: int = 1, column: int = 1):
        self.text = text
        self.source = source
        self.line0 = line
        self.col0 = column
        self.line_starts = [0] + [m.end() for m in re.finditer("\n", text)]
        self.toks: list = []
        i, n = 0, len(text)
        while i < n:
            m = _TOKEN_RE.match(text, i)
            if m is None:
                raise FactSyntaxError(f"unexpected character {text[i]!r}", self.pos(i))
            kind = m.lastgroup
            if kind == "number":
                value = _number(m.group())
                if not math.isfinite(value):
                    raise FactSyntaxError("number out of range", self.pos(i))
                self.toks.append((NUMBER, value, i))
            elif kind == "ident":
                word = m.group()
                if not word[0].islower():
                    raise FactSyntaxError(
                        f"identifiers must start with a lowercase letter, got {word!r}", self.pos(i)
                    )
                self.toks.append((IDENT, word, i))
            elif kind == "punct":
                self.toks.append((m.group(), m.group(), i))
            i = m.end()
        self.toks.append((EOF, None, n))
        self.k = 0

    def pos(self, offset: int) -> SourcePos:
        row = bisect.bisect_right(self.line_starts, offset) - 1
        col = offset - self.line_starts[row] + 1
        if row == 0:
            col += self.col0 - 1
        return SourcePos(self.line0 + row, col, self.source)

    def peek(self, ahead: int = 0):
        return self.toks[min(self.k + ahead, len(self.toks) - 1)]

    def next(self):
        tok = self.toks[self.k]
        if tok[0] != EOF:
            self.k += 1
        return tok

    def expect(self, *kinds):
        tok = self.peek()
        if tok[0] not in kinds:
            self.fail(tok, kinds)
        return self.next()

    def fail(self, tok, expected):
        found = "end of input" if tok[0] == EOF else repr(str(tok[1]))
        raise FactSyntaxError(f"unexpected {found}", self.pos(tok[2]), [_show(e) for e in expected])


def _show(kind: str) -> str:
    return kind if kind in (IDENT, NUMBER, EOF) else repr(kind)


def _number(text: str):
    if re.fullmatch(r"-?[0-9]+", text):
        return int(text)
    return float(text)


# ----------------------------------------------------------------- parser

_ID = "identifier"
_NUM = "number"
_IDLIST = "list of identifiers"
_MIX = "list of (fraction, source)"
_PROFILE = "energy profile"

SCHEMA: Mapping[str, Tuple[str, ...]] = {
    "application": (_ID, _IDLIST),
    "service": (_ID, _IDLIST, _NUM, _IDLIST),
    "s2s": (_ID, _ID, _NUM, _NUM),
    "node": (_ID, _IDLIST, _NUM, _IDLIST),
    "cost": (_ID, _NUM),
    "totHW": (_ID, _NUM),
    "pue": (_ID, _NUM),
    "energyProfile": (_ID, _PROFILE),
    "energySourceMix": (_ID, _MIX),
    "link": (_ID, _ID, _NUM, _NUM),
    "biLink": (_ID, _ID, _NUM, _NUM),
    "emissions": (_ID, _NUM),
}


def _is_num(t) -> bool:
    return isinstance(t, (int, float)) and not isinstance(t, bool)


def _is_pair(t, first=_is_num, second=_is_num) -> bool:
    return isinstance(t, TupleTerm) and len(t.items) == 2 and first(t.items[0]) and second(t.items[1])


def _profile_ok(t) -> bool:
    if not isinstance(t, Compound):
        return False
    a = t.args
    if t.name == "const":
        return len(a) == 1 and _is_num(a[0])
    if t.name in ("linear", "loglinear"):
        return len(a) == 2 and all(_is_num(x) for x in a)
    if len(a) != 1 or not isinstance(a[0], ListTerm) or not a[0].items:
        return False
    items = a[0].items
    if t.name == "step":
        *steps, last = items
        return (all(_is_pair(s) for s in steps)
                and _is_pair(last, lambda x: x == "default"))
    return all(_is_pair(p) for p in items)


_CHECKS = {
    _ID: lambda t: isinstance(t, str),
    _NUM: _is_num,
    _IDLIST: lambda t: isinstance(t, ListTerm) and all(isinstance(x, str) for x in t.items),
    _MIX: lambda t: isinstance(t, ListTerm) and all(
        _is_pair(x, second=lambda s: isinstance(s, str)) for x in t.items),
    _PROFILE: _profile_ok,
}


class _Parser:
    def __init__(self, toks: _Tokens):
        self.t = toks

    def facts(self) -> list:
        out = []
        while self.t.peek()[0] != EOF:
            out.append(self.fact())
        return out

    def fact(self) -> Fact:
        tok = self.t.expect(IDENT)
        head, pos = tok[1], self.t.pos(tok[2])
        if head not in SCHEMA:
            raise FactSyntaxError(f"unknown fact head {head!r}", pos, [repr(h) for h in HEADS])
        self.t.expect("(")
        args = self.args(0, ")")
        self.t.expect(".")
        schema = SCHEMA[head]
        if len(args) != len(schema):
            raise FactSyntaxError(f"{head} takes {len(schema)} arguments, got {len(args)}", pos)
        for i, (arg, kind) in enumerate(zip(args, schema), 1):
            if not _CHECKS[kind](arg):
                raise FactSyntaxError(f"argument {i} of {head} must be a {kind}", pos)
        return Fact(head, tuple(args), pos)

    def args(self, depth: int, closer: str) -> list:
        items = [self.term(depth)]
        while self.t.peek()[0] == ",":
            self.t.next()
            items.append(self.term(depth))
        self.t.expect(",", closer)
        return items

    def term(self, depth: int):
        if depth > MAX_DEPTH:
            raise FactSyntaxError("terms nested too deeply", self.t.pos(self.t.peek()[2]))
        tok = self.t.peek()
        kind = tok[0]
        if kind == NUMBER:
            return self.t.next()[1]
        if kind == IDENT:
            self.t.next()
            if self.t.peek()[0] == "(":
                if tok[1] not in PROFILE_KINDS:
                    self.t.fail(self.t.peek(), (",", ")", "]"))
                self.t.next()
                args = self.args(depth + 1, ")")
                return Compound(tok[1], tuple(args))
            return tok[1]
        if kind == "[":
            self.t.next()
            if self.t.peek()[0] == "]":
                self.t.next()
                return ListTerm(())
            items = self.args(depth + 1, "]")
            return ListTerm(tuple(items))
        if kind == "(":
            self.t.next()
            items = self.args(depth + 1, ")")
            return TupleTerm(tuple(items))
        self.t.fail(tok, (IDENT, NUMBER, "[", "("))


def _decode(text) -> str:
    if isinstance(text, (bytes, bytearray)):
        try:
            return bytes(text).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FactSyntaxError("input is not valid UTF-8", SourcePos(1, exc.start + 1)) from None
    return text


def parse_facts(text: Union[str, bytes], source: str = "<string>") -> FactFile:
    """Parse fact text into a :class:`FactFile`.

    Raises :class:`FactSyntaxError` for malformed input and
    :class:`DuplicateFactError` when two facts share a key.
    """
    text = _decode(text)
    if "\x00" in text:
        # keep error positions meaningful for binary garbage
        raise FactSyntaxError("unexpected NUL byte", _Tokens("", source).pos(0))
    facts = _Parser(_Tokens(text, source)).facts()
    _check_duplicates(facts)
    return FactFile(tuple(facts))


def parse_file(path) -> FactFile:
    with open(path, "rb") as fh:
        data = fh.read()
    return parse_facts(data, source=str(path))


# --------------------------------------------------------------- renderer


def render_term(term) -> str:
    if isinstance(term, str):
        return term
    if isinstance(term, bool):
        raise TypeError("booleans are not terms")
    if isinstance(term, int):
        return str(term)
    if isinstance(term, float):
        return repr(term)
    if isinstance(term, ListTerm):
        return "[" + ", ".join(render_term(x) for x in term.items) + "]"
    if isinstance(term, TupleTerm):
        return "(" + ", ".join(render_term(x) for x in term.items) + ")"
    if isinstance(term, Compound):
        return f"{term.name}(" + ", ".join(render_term(x) for x in term.args) + ")"
    raise TypeError(f"not a term: {term!r}")


def render_fact(fact: Fact) -> str:
    return f"{fact.head}(" + ", ".join(render_term(a) for a in fact.args) + ")."


def render(facts: Iterable[Fact]) -> str:
    return "".join(render_fact(f) + "\n" for f in facts)


# ------------------------------------------------------------ KB assembly


def profile_from_term(term: Compound) -> EnergyProfile:
    a = term.args
    if term.name == "const":
        return ConstProfile(float(a[0]))
    if term.name == "linear":
        return LinearProfile(float(a[0]), float(a[1]))
    if term.name == "loglinear":
        return LogLinearProfile(float(a[0]), float(a[1]))
    items = [p.items for p in a[0].items]
    if term.name == "step":
        *steps, (_, default) = items
        return StepProfile(tuple((float(t), float(v)) for t, v in steps), float(default))
    if term.name == "table":
        return TableProfile(tuple((float(l), float(e)) for l, e in items))
    raise ValueError(f"unknown profile kind {term.name!r}")


def profile_to_term(profile: EnergyProfile) -> Compound:
    if isinstance(profile, ConstProfile):
        return Compound("const", (profile.value,))
    if isinstance(profile, LinearProfile):
        return Compound("linear", (profile.intercept, profile.slope))
    if isinstance(profile, LogLinearProfile):
        return Compound("loglinear", (profile.intercept, profile.slope))
    if isinstance(profile, StepProfile):
        steps = [TupleTerm((t, v)) for t, v in profile.steps]
        steps.append(TupleTerm(("default", profile.default)))
        return Compound("step", (ListTerm(tuple(steps)),))
    if isinstance(profile, TableProfile):
        return Compound("table", (ListTerm(tuple(TupleTerm(p) for p in profile.points)),))
    raise TypeError(f"unsupported profile {profile!r}")


def _loc(fact: Fact) -> str:
    return f"{fact.pos} {fact.head}({_fmt_key(fact.keys()[0][1])})"


def assemble(facts: Iterable[Fact], constants: Constants = Constants()) -> Tuple[KnowledgeBase, list]:
    """Group facts into a KnowledgeBase and return it with every diagnostic.

    Never raises on semantic problems; nodes missing a companion fact are
    left out of the knowledge base and reported as errors.
    """
    facts = list(facts)
    _check_duplicates(facts)
    diags: list = []
    by_head: dict = {h: [] for h in HEADS}
    for f in facts:
        by_head[f.head].append(f)

    apps = [Application(f.args[0], tuple(f.args[1].items), f.pos) for f in by_head["application"]]
    services = [
        Service(f.args[0], frozenset(f.args[1].items), f.args[2], frozenset(f.args[3].items), f.pos)
        for f in by_head["service"]
    ]
    flows = [Flow(*f.args, pos=f.pos) for f in by_head["s2s"]]
    links = [Link(*f.args, pos=f.pos) for f in by_head["link"]]
    for f in by_head["biLink"]:
        a, b, lat, bw = f.args
        links.append(Link(a, b, lat, bw, f.pos))
        links.append(Link(b, a, lat, bw, f.pos))

    attrs = {h: {f.args[0]: f for f in by_head[h]} for h in NODE_ATTRIBUTES}
    node_names = {f.args[0] for f in by_head["node"]}
    for head in NODE_ATTRIBUTES:
        for name, f in attrs[head].items():
            if name not in node_names:
                diags.append(Diagnostic("error", _loc(f), f"{head} declared for undeclared node {name!r}"))

    nodes = []
    for f in by_head["node"]:
        name, sw, free, iot = f.args
        missing = [h for h in NODE_ATTRIBUTES if name not in attrs[h]]
        if missing:
            for h in missing:
                diags.append(Diagnostic("error", _loc(f), f"missing {h} for node {name!r}"))
            continue
        mix = attrs["energySourceMix"][name].args[1]
        nodes.append(Node(
            name=name,
            software_caps=frozenset(sw.items),
            free_hw=free,
            iot_caps=frozenset(iot.items),
            unit_cost=attrs["cost"][name].args[1],
            tot_hw=attrs["totHW"][name].args[1],
            pue=attrs["pue"][name].args[1],
            profile=profile_from_term(attrs["energyProfile"][name].args[1]),
            mix=EnergyMix(tuple((p.items[0], p.items[1]) for p in mix.items)),
            pos=f.pos,
        ))

    emissions = dict(DEFAULT_EMISSIONS)
    for f in by_head["emissions"]:
        emissions[f.args[0]] = f.args[1]

    kb = KnowledgeBase(
        applications=tuple(sorted(apps, key=lambda a: a.name)),
        services=tuple(sorted(services, key=lambda s: s.name)),
        flows=tuple(sorted(flows, key=lambda x: x.key)),
        nodes=tuple(sorted(nodes, key=lambda n: n.name)),
        links=tuple(sorted(links, key=lambda l: l.key)),
        emissions=dict(sorted(emissions.items())),
        constants=constants,
    )
    return kb, sorted(diags + validate(kb))


def build_kb(facts: Iterable[Fact], constants_overrides: Optional[Mapping] = None,
             *, constants: Constants = Constants()) -> KnowledgeBase:
    """Assemble and validate; raise :class:`ValidationFailed` on any error."""
    if constants_overrides:
        constants = constants.replace(**constants_overrides)
    kb, diags = assemble(facts, constants)
    if errors_only(diags):
        raise ValidationFailed(diags)
    return kb


def kb_to_facts(kb: KnowledgeBase) -> Tuple[Fact, ...]:
    """Inverse of :func:`assemble`, in canonical order."""
    out = []
    for a in kb.applications:
        out.append(Fact("application", (a.name, ListTerm(a.services)), a.pos))
    for s in kb.services:
        out.append(Fact("service", (s.name, ListTerm(tuple(sorted(s.software_reqs))),
                                    s.hardware_reqs, ListTerm(tuple(sorted(s.iot_reqs)))), s.pos))
    for f in kb.flows:
        out.append(Fact("s2s", (f.source, f.target, f.max_latency, f.min_bandwidth), f.pos))
    for n in kb.nodes:
        out.append(Fact("node", (n.name, ListTerm(tuple(sorted(n.software_caps))),
                                 n.free_hw, ListTerm(tuple(sorted(n.iot_caps)))), n.pos))
        out.append(Fact("cost", (n.name, n.unit_cost), n.pos))
        out.append(Fact("totHW", (n.name, n.tot_hw), n.pos))
        out.append(Fact("pue", (n.name, n.pue), n.pos))
        out.append(Fact("energyProfile", (n.name, profile_to_term(n.profile)), n.pos))
        mix = ListTerm(tuple(TupleTerm((p, s)) for p, s in n.mix.shares))
        out.append(Fact("energySourceMix", (n.name, mix), n.pos))
    for l in kb.links:
        out.append(Fact("link", (l.source, l.target, l.latency, l.bandwidth), l.pos))
    for src, mu in kb.emissions.items():
        out.append(Fact("emissions", (src, mu)))
    return tuple(out)


# ---------------------------------------------------------------- overlays

ADD, REPLACE, REMOVE = "+", "!", "-"


@dataclass(frozen=True)
class Directive:
    op: str
    head: str
    key: object
    fact: Optional[Fact] = None


@dataclass(frozen=True)
class Overlay:
    directives: Tuple[Directive, ...] = ()


def _key_arity(head: str) -> int:
    return 2 if head in ("s2s", "link", "biLink") else 1


def parse_overlay(text: Union[str, bytes], source: str = "<overlay>") -> Overlay:
    """Parse an overlay: one directive per line, ``+`` add, ``!`` replace, ``-`` remove.

    ``+``/``!`` lines carry a full fact; ``-`` lines carry only the head and
    its key, e.g. ``- node(edgenode).`` or ``- link(a, b).``
    """
    text = _decode(text)
    directives = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        stripped = raw.lstrip()
        if not stripped or stripped.startswith("%"):
            continue
        col = len(raw) - len(stripped) + 1
        op, rest = stripped[0], stripped[1:]
        if op not in (ADD, REPLACE, REMOVE):
            raise FactSyntaxError(f"unexpected {op!r}", SourcePos(lineno, col, source),
                                  ["'+'", "'!'", "'-'"])
        toks = _Tokens(rest, source, lineno, col + 1)
        if op == REMOVE:
            head_tok = toks.expect(IDENT)
            head = head_tok[1]
            if head not in SCHEMA:
                raise FactSyntaxError(f"unknown fact head {head!r}", toks.pos(head_tok[2]),
                                      [repr(h) for h in HEADS])
            toks.expect("(")
            key = [toks.expect(IDENT)[1]]
            while toks.peek()[0] == ",":
                toks.next()
                key.append(toks.expect(IDENT)[1])
            toks.expect(")")
            toks.expect(".")
            toks.expect(EOF)
            if len(key) != _key_arity(head):
                raise FactSyntaxError(f"{head} is keyed by {_key_arity(head)} identifier(s)",
                                      toks.pos(head_tok[2]))
            directives.append(Directive(op, head, tuple(key) if len(key) == 2 else key[0]))
        else:
            parser = _Parser(toks)
            fact = parser.fact()
            toks.expect(EOF)
            directives.append(Directive(op, fact.head, fact.keys()[0][1], fact))
    return Overlay(tuple(directives))


def apply_overlay(kb: KnowledgeBase, overlay: Overlay) -> KnowledgeBase:
    """Return a new knowledge base with ``overlay`` applied in order.

    Removing a node also drops its cost/totHW/pue/profile/mix facts and every
    link touching it. The input ``kb`` is never modified.
    """
    if not overlay.directives:
        return kb
    facts = list(kb_to_facts(kb))

    def index():
        return {key: f for f in facts for key in f.keys()}

    for d in overlay.directives:
        present = index()
        if d.op == ADD:
            for key in d.fact.keys():
                if key in present:
                    raise DuplicateFactError(
                        f"cannot add {d.head} fact for {_fmt_key(key[1])}: already present",
                        d.fact.pos or SourcePos(0, 0))
            facts.append(d.fact)
            continue
        keys = (Fact(d.head, d.key if isinstance(d.key, tuple) else (d.key,)).keys()
                if d.op == REMOVE else d.fact.keys())
        for category, key in keys:
            if (category, key) not in present:
                raise KeyNotFound(category, key)
        doomed = {id(present[k]) for k in keys}
        if d.op == REMOVE and d.head == "node":
            doomed |= {id(f) for f in facts
                       if (f.head in NODE_ATTRIBUTES and f.args[0] == d.key)
                       or (f.head in ("link", "biLink") and d.key in f.args[:2])}
        # a biLink may be partially covered; keep the surviving direction
        survivors = []
        for f in facts:
            if id(f) not in doomed:
                survivors.append(f)
            elif f.head == "biLink":
                a, b, lat, bw = f.args
                for src, dst in ((a, b), (b, a)):
                    if ("link", (src, dst)) not in keys and not (
                            d.op == REMOVE and d.head == "node" and d.key in (src, dst)):
                        survivors.append(Fact("link", (src, dst, lat, bw), f.pos))
        facts = survivors
        if d.op == REPLACE:
            facts.append(d.fact)
    return build_kb(facts, constants=kb.constants)
