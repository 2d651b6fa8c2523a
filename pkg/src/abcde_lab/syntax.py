"""Abstract and concrete syntax of ABCdE process terms.

Terms are immutable and hashable; structural equality is state identity.
The concrete grammar is one statement per ';'::

    handshake a, c;  broadcast b;  signal s;
    P := (b!.0)^s | (s.0 + b?.0);
    Q := a.Q + 'c.0 \\ {c} [a -> c];

Precedence, tightest first: prefix, postfix (``\\{..}``, ``[..]``, ``^s``), ``|``, ``+``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping

# label kinds
IN = "in"        # handshake c
OUT = "out"      # co-name 'c
TAU = "tau"
SEND = "!"       # b!
RECV = "?"       # b?
DISC = ":"       # b:
READ = "read"    # signal read s
EMIT = "emit"    # signal emission 's

ACTION_KINDS = frozenset({IN, OUT, TAU, SEND, RECV, READ})
BROADCAST_KINDS = frozenset({SEND, RECV, DISC})
_COMPLEMENT = {IN: OUT, OUT: IN, READ: EMIT, EMIT: READ}


class SyntaxError_(Exception):
    """Base for errors raised on malformed input."""


class ParseError(SyntaxError_):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.line = line
        self.col = col
        where = f"{line}:{col}: " if line else ""
        super().__init__(f"{where}{message}")


class NoComplementError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class Label:
    kind: str
    name: str | None = None

    @property
    def is_action(self) -> bool:
        return self.kind in ACTION_KINDS

    @property
    def is_broadcast(self) -> bool:
        return self.kind in BROADCAST_KINDS

    @property
    def is_passive(self) -> bool:
        """Discards and emissions: the transitions that never change state."""
        return self.kind in (DISC, EMIT)

    def __str__(self) -> str:
        if self.kind == TAU:
            return "tau"
        if self.kind in (IN, READ):
            return self.name
        if self.kind in (OUT, EMIT):
            return "'" + self.name
        return self.name + self.kind

    def __repr__(self) -> str:
        return f"Label({self})"


TAU_LABEL = Label(TAU)


def handshake(c: str) -> Label:
    return Label(IN, c)


def co_handshake(c: str) -> Label:
    return Label(OUT, c)


def send(b: str) -> Label:
    return Label(SEND, b)


def recv(b: str) -> Label:
    return Label(RECV, b)


def discard(b: str) -> Label:
    return Label(DISC, b)


def read(s: str) -> Label:
    return Label(READ, s)


def emit(s: str) -> Label:
    return Label(EMIT, s)


def complement(label: Label) -> Label:
    try:
        return Label(_COMPLEMENT[label.kind], label.name)
    except KeyError:
        raise NoComplementError(f"{label} has no complement") from None


def has_complement(label: Label) -> bool:
    return label.kind in _COMPLEMENT


@dataclass(frozen=True, order=True)
class Relabelling:
    """A total renaming, identity outside ``pairs``.

    Name classes are disjoint so one map serves Ch, B and S; the parser
    rejects entries that cross classes.
    """

    pairs: tuple[tuple[str, str], ...] = ()

    @classmethod
    def of(cls, mapping: Mapping[str, str] | Iterable[tuple[str, str]]) -> Relabelling:
        items = mapping.items() if isinstance(mapping, Mapping) else mapping
        return cls(tuple(sorted((a, b) for a, b in items if a != b)))

    def __call__(self, name: str) -> str:
        for a, b in self.pairs:
            if a == name:
                return b
        return name

    def apply(self, label: Label) -> Label:
        if label.kind == TAU:
            return label
        return Label(label.kind, self(label.name))

    def __str__(self) -> str:
        return "[" + ", ".join(f"{a} -> {b}" for a, b in self.pairs) + "]"


IDENTITY = Relabelling()


def apply_relabelling(f: Relabelling, label: Label) -> Label:
    return f.apply(label)


# -- process terms ---------------------------------------------------------

class Term:
    """Hashable immutable tree node with a cached hash."""

    __slots__ = ()

    def _key(self) -> tuple:
        raise NotImplementedError

    def __eq__(self, other):
        if self is other:
            return True
        if type(self) is not type(other):
            return NotImplemented
        if hash(self) != hash(other):
            return False
        return self._key() == other._key()

    def __ne__(self, other):
        eq = self.__eq__(other)
        return eq if eq is NotImplemented else not eq

    def __hash__(self):
        try:
            return self.__dict__["_hash"]
        except KeyError:
            h = hash((type(self).__name__, self._key()))
            object.__setattr__(self, "_hash", h)
            return h


def _node(cls):
    cls = dataclass(frozen=True, eq=False, repr=False)(cls)
    names = tuple(f.name for f in cls.__dataclass_fields__.values())
    cls._key = lambda self: tuple(getattr(self, n) for n in names)
    cls.__repr__ = lambda self: f"{type(self).__name__}({self})"
    return cls


class Proc(Term):
    def __str__(self) -> str:
        return show(self)


@_node
class Nil(Proc):
    pass


@_node
class Prefix(Proc):
    action: Label
    body: Proc


@_node
class Choice(Proc):
    left: Proc
    right: Proc


@_node
class Par(Proc):
    left: Proc
    right: Proc


@_node
class Restrict(Proc):
    body: Proc
    names: frozenset


@_node
class Relabel(Proc):
    body: Proc
    f: Relabelling


@_node
class Agent(Proc):
    name: str


@_node
class Signalling(Proc):
    body: Proc
    signal: str


NIL = Nil()


@dataclass(frozen=True, eq=False)
class Declarations:
    handshakes: frozenset = frozenset()
    broadcasts: frozenset = frozenset()
    signals: frozenset = frozenset()
    agents: Mapping[str, Proc] = field(default_factory=dict)
    # per-declaration memo tables used by the semantic layers
    cache: dict = field(default_factory=dict, repr=False, compare=False)

    def kind_of(self, name: str) -> str | None:
        if name in self.handshakes:
            return "handshake"
        if name in self.broadcasts:
            return "broadcast"
        if name in self.signals:
            return "signal"
        return None

    def body(self, agent: str) -> Proc:
        try:
            return self.agents[agent]
        except KeyError:
            raise KeyError(f"undefined agent {agent}") from None

    @property
    def sorted_broadcasts(self) -> tuple[str, ...]:
        try:
            return self.cache["_sorted_b"]
        except KeyError:
            self.cache["_sorted_b"] = r = tuple(sorted(self.broadcasts))
            return r

    def labels(self) -> list[Label]:
        """The finite label universe over the declared names."""
        out = [TAU_LABEL]
        for c in sorted(self.handshakes):
            out += [handshake(c), co_handshake(c)]
        for b in sorted(self.broadcasts):
            out += [send(b), recv(b), discard(b)]
        for s in sorted(self.signals):
            out += [read(s), emit(s)]
        return out


@dataclass
class Document:
    decls: Declarations
    terms: dict[str, Proc]


# -- printer ---------------------------------------------------------------

# precedence levels: 0 sum, 1 par, 2 postfix, 3 prefix/atom
def show(p: Proc) -> str:
    return _show(p, 0)


def _paren(s: str, own: int, ctx: int) -> str:
    return f"({s})" if own < ctx else s


def _names(names: Iterable[str]) -> str:
    return ", ".join(sorted(names))


def _show(p: Proc, ctx: int) -> str:
    if isinstance(p, Nil):
        return "0"
    if isinstance(p, Agent):
        return p.name
    if isinstance(p, Prefix):
        return _paren(f"{p.action}.{_show(p.body, 3)}", 3, ctx)
    if isinstance(p, Choice):
        return _paren(f"{_show(p.left, 0)} + {_show(p.right, 1)}", 0, ctx)
    if isinstance(p, Par):
        return _paren(f"{_show(p.left, 1)} | {_show(p.right, 2)}", 1, ctx)
    if isinstance(p, Restrict):
        return _paren(f"{_show(p.body, 2)} \\ {{{_names(p.names)}}}", 2, ctx)
    if isinstance(p, Relabel):
        return _paren(f"{_show(p.body, 2)}{p.f}", 2, ctx)
    if isinstance(p, Signalling):
        return _paren(f"{_show(p.body, 2)}^{p.signal}", 2, ctx)
    raise TypeError(p)


def show_document(doc: Document) -> str:
    d = doc.decls
    lines = []
    for kw, names in (("handshake", d.handshakes), ("broadcast", d.broadcasts),
                      ("signal", d.signals)):
        if names:
            lines.append(f"{kw} {_names(names)};")
    for name, p in doc.terms.items():
        lines.append(f"{name} := {show(p)};")
    return "\n".join(lines) + "\n"


# -- lexer -----------------------------------------------------------------

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r\n]+|\#[^\n]*)
  | (?P<assign>:=)
  | (?P<arrow>->)
  | (?P<tau>tau\b)
  | (?P<kw>(?:handshake|broadcast|signal)\b)
  | (?P<ident>[A-Z][A-Za-z0-9_]*)
  | (?P<name>[a-z][A-Za-z0-9_]*)
  | (?P<zero>0)
  | (?P<sym>[.+|\\{}\[\],^()'!?;])
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(Token(kind if kind != "sym" else m.group(), m.group(),
                                line, pos - line_start + 1))
        for i, ch in enumerate(m.group()):
            if ch == "\n":
                line += 1
                line_start = pos + i + 1
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


# -- parser ----------------------------------------------------------------

class _Parser:
    def __init__(self, tokens: list[Token], decls: Declarations | None = None,
                 agent_names: Iterable[str] = ()):
        self.toks = tokens
        self.i = 0
        self.decls = decls
        self.agent_names = set(agent_names)

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def error(self, msg: str, tok: Token | None = None) -> ParseError:
        tok = tok or self.tok
        return ParseError(msg, tok.line, tok.col)

    def take(self, kind: str | None = None) -> Token:
        tok = self.tok
        if kind is not None and tok.kind != kind:
            found = tok.text or "end of input"
            raise self.error(f"expected {kind!r}, found {found!r}")
        self.i += 1
        return tok

    def at(self, *kinds: str) -> bool:
        return self.tok.kind in kinds

    # names are classified after all declarations are known
    def name_list(self) -> list[Token]:
        names = [self.take("name")]
        while self.at(",") or self.at("name"):
            if self.at(","):
                self.take(",")
            names.append(self.take("name"))
        return names

    def kind(self, tok: Token) -> str:
        k = self.decls.kind_of(tok.text)
        if k is None:
            raise self.error(f"unknown identifier {tok.text!r}", tok)
        return k

    def proc(self) -> Proc:
        p = self.par()
        while self.at("+"):
            self.take()
            p = Choice(p, self.par())
        return p

    def par(self) -> Proc:
        p = self.postfix()
        while self.at("|"):
            self.take()
            p = Par(p, self.postfix())
        return p

    def postfix(self) -> Proc:
        p = self.prefix()
        while True:
            if self.at("\\"):
                self.take()
                self.take("{")
                names = frozenset()
                if not self.at("}"):
                    toks = self.name_list()
                    for t in toks:
                        if self.kind(t) == "broadcast":
                            raise self.error(
                                f"restriction of broadcast name {t.text!r}", t)
                    names = frozenset(t.text for t in toks)
                self.take("}")
                p = Restrict(p, names)
            elif self.at("["):
                self.take()
                pairs = [] if self.at("]") else [self.rename()]
                while self.at(","):
                    self.take()
                    pairs.append(self.rename())
                self.take("]")
                p = Relabel(p, Relabelling.of(pairs))
            elif self.at("^"):
                self.take()
                t = self.take("name")
                if self.kind(t) != "signal":
                    raise self.error(f"{t.text!r} is not a signal", t)
                p = Signalling(p, t.text)
            else:
                return p

    def rename(self) -> tuple[str, str]:
        a = self.take("name")
        self.take("arrow")
        b = self.take("name")
        if self.kind(a) != self.kind(b):
            raise self.error(f"relabelling {a.text} -> {b.text} crosses name classes", a)
        return a.text, b.text

    def prefix(self) -> Proc:
        if self.at("tau", "name", "'"):
            action = self.action()
            self.take(".")
            return Prefix(action, self.prefix())
        return self.atom()

    def action(self) -> Label:
        if self.at("tau"):
            self.take()
            return TAU_LABEL
        if self.at("'"):
            self.take()
            t = self.take("name")
            k = self.kind(t)
            if k == "signal":
                raise self.error(f"signal emission '{t.text} cannot be a prefix", t)
            if k != "handshake":
                raise self.error(f"co-name of non-handshake {t.text!r}", t)
            return co_handshake(t.text)
        t = self.take("name")
        k = self.kind(t)
        if self.at("!", "?"):
            mark = self.take().kind
            if k != "broadcast":
                raise self.error(f"{t.text!r} is not a broadcast name", t)
            return send(t.text) if mark == "!" else recv(t.text)
        if k == "broadcast":
            raise self.error(f"broadcast {t.text!r} needs '!' or '?'", t)
        return handshake(t.text) if k == "handshake" else read(t.text)

    def atom(self) -> Proc:
        tok = self.tok
        if tok.kind == "zero":
            self.take()
            return NIL
        if tok.kind == "ident":
            self.take()
            if tok.text not in self.agent_names:
                raise self.error(f"unknown identifier {tok.text!r}", tok)
            return Agent(tok.text)
        if tok.kind == "(":
            self.take()
            p = self.proc()
            self.take(")")
            return p
        raise self.error(f"unexpected {tok.text or 'end of input'!r}")


def parse(text: str) -> Document:
    """Parse a document of declarations and agent definitions."""
    toks = tokenize(text)
    # pass 1: split into statements, collect declarations and agent names
    stmts: list[list[Token]] = [[]]
    for t in toks[:-1]:
        if t.kind == ";":
            stmts.append([])
        else:
            stmts[-1].append(t)
    stmts = [s for s in stmts if s]
    classes: dict[str, set[str]] = {"handshake": set(), "broadcast": set(), "signal": set()}
    seen: dict[str, str] = {}
    defs: list[list[Token]] = []
    agent_names: set[str] = set()
    for s in stmts:
        head = s[0]
        if head.kind == "kw":
            p = _Parser(s + [Token("eof", "", head.line, head.col)])
            p.take()
            for t in p.name_list():
                prev = seen.get(t.text)
                if prev is not None and prev != head.text:
                    raise ParseError(f"name {t.text!r} declared as both {prev} and {head.text}",
                                     t.line, t.col)
                seen[t.text] = head.text
                classes[head.text].add(t.text)
            p.take("eof")
        elif head.kind == "ident":
            if len(s) < 2 or s[1].kind != "assign":
                raise ParseError("expected ':=' after agent identifier", head.line, head.col)
            if head.text in agent_names:
                raise ParseError(f"duplicate definition of {head.text}", head.line, head.col)
            agent_names.add(head.text)
            defs.append(s)
        elif head.kind == "name":
            raise ParseError(f"agent identifier must start uppercase: {head.text!r}",
                             head.line, head.col)
        else:
            raise ParseError(f"unexpected {head.text!r}", head.line, head.col)
    agents: dict[str, Proc] = {}
    decls = Declarations(frozenset(classes["handshake"]), frozenset(classes["broadcast"]),
                         frozenset(classes["signal"]), agents)
    for s in defs:
        end = s[-1]
        p = _Parser(s + [Token("eof", "", end.line, end.col + len(end.text))], decls, agent_names)
        name = p.take("ident").text
        p.take("assign")
        agents[name] = p.proc()
        p.take("eof")
    return Document(decls, dict(agents))


def parse_term(text: str, decls: Declarations) -> Proc:
    """Parse a single process expression against existing declarations."""
    p = _Parser(tokenize(text), decls, decls.agents)
    proc = p.proc()
    p.take("eof")
    return proc


def parse_label(text: str, decls: Declarations) -> Label:
    text = text.strip()
    if text == "tau":
        return TAU_LABEL
    m = re.fullmatch(r"('?)([a-z][A-Za-z0-9_]*)([!?:]?)", text)
    if not m:
        raise ParseError(f"malformed label {text!r}")
    bar, name, mark = m.groups()
    k = decls.kind_of(name)
    if k is None:
        raise ParseError(f"unknown identifier {name!r}")
    if k == "broadcast":
        if bar or not mark:
            raise ParseError(f"malformed broadcast label {text!r}")
        return Label(mark, name)
    if mark:
        raise ParseError(f"{name!r} is not a broadcast name")
    if k == "handshake":
        return co_handshake(name) if bar else handshake(name)
    return emit(name) if bar else read(name)


# -- guardedness -----------------------------------------------------------

@dataclass(frozen=True)
class GuardViolation:
    agent: str
    occurrence: str
    path: tuple[str, ...]

    def __str__(self) -> str:
        where = "/".join(self.path) or "top"
        return f"{self.agent}: unguarded occurrence of {self.occurrence} at {where}"


def unguarded_agents(p: Proc, path: tuple[str, ...] = ()) -> Iterator[tuple[str, tuple[str, ...]]]:
    """Yield agent occurrences in ``p`` not underneath a prefix, with their paths."""
    if isinstance(p, Agent):
        yield p.name, path
    elif isinstance(p, (Choice, Par)):
        op = "+" if isinstance(p, Choice) else "|"
        yield from unguarded_agents(p.left, path + (op + "L",))
        yield from unguarded_agents(p.right, path + (op + "R",))
    elif isinstance(p, Restrict):
        yield from unguarded_agents(p.body, path + ("\\",))
    elif isinstance(p, Relabel):
        yield from unguarded_agents(p.body, path + ("[f]",))
    elif isinstance(p, Signalling):
        yield from unguarded_agents(p.body, path + ("^" + p.signal,))


def check_guarded(decls: Declarations) -> list[GuardViolation]:
    """Empty list iff every agent body is guarded."""
    return [GuardViolation(name, occ, path)
            for name in sorted(decls.agents)
            for occ, path in unguarded_agents(decls.agents[name])]


def subterms(p: Proc) -> Iterator[Proc]:
    yield p
    if isinstance(p, (Choice, Par)):
        yield from subterms(p.left)
        yield from subterms(p.right)
    elif isinstance(p, (Prefix, Restrict, Relabel, Signalling)):
        yield from subterms(p.body)
