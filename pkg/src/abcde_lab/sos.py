"""Derivations of the ABCdE transition rules, named as in the literature.

A derivation is identified by its name: ``<a->P>``, ``t+Q``, ``P+t``, ``t+u``,
``t|Q``, ``P|t``, ``t|u``, ``t\\{L}``, ``t[f]``, ``A:t``, ``b:0``, ``b:a.P``,
``P<^s`` and ``t^r``.  Source, target and label are computed from the name.
"""

from __future__ import annotations

from functools import cached_property

from .syntax import (
    DISC, EMIT, IN, OUT, READ, RECV, SEND, TAU, TAU_LABEL,
    Agent, Choice, Declarations, Label, Nil, Par, Prefix, Proc, Relabel,
    Relabelling, Restrict, Signalling, Term, _node, _paren, _show, complement,
    has_complement, show,
)


class UnguardedRecursionError(RuntimeError):
    pass


# broadcast combination table; (!, !) is undefined
BRO = {
    (SEND, RECV): SEND, (SEND, DISC): SEND,
    (RECV, SEND): SEND, (RECV, RECV): RECV, (RECV, DISC): RECV,
    (DISC, SEND): SEND, (DISC, RECV): RECV, (DISC, DISC): DISC,
}

# labels that Par-l / Par-r / Comm may carry (eta)
ETA_KINDS = frozenset({IN, OUT, TAU, READ, EMIT})


def sync_label(l1: Label, l2: Label) -> Label | None:
    """Label of ``t|u`` from the labels of its premises, or None if no rule applies."""
    if has_complement(l1) and l2 == complement(l1):
        return TAU_LABEL
    if l1.is_broadcast and l2.is_broadcast and l1.name == l2.name:
        k = BRO.get((l1.kind, l2.kind))
        if k is not None:
            return Label(k, l1.name)
    return None


class Derivation(Term):
    """Base for derivation names; ``source``, ``target`` and ``label`` are cached."""

    def __str__(self) -> str:
        return show_derivation(self)

    @cached_property
    def source(self) -> Proc:
        return self._source()

    @cached_property
    def target(self) -> Proc:
        return self._target()

    @cached_property
    def label(self) -> Label:
        return self._label()


@_node
class ActStep(Derivation):
    action: Label
    body: Proc

    def _source(self):
        return Prefix(self.action, self.body)

    def _target(self):
        return self.body

    def _label(self):
        return self.action


@_node
class SumL(Derivation):
    """``t+Q`` by Sum-l, or Sig-sum-l when ``t`` is an emission."""
    t: Derivation
    right: Proc

    def _source(self):
        return Choice(self.t.source, self.right)

    def _target(self):
        if self.t.label.kind == EMIT:
            return Choice(self.t.target, self.right)
        return self.t.target

    def _label(self):
        return self.t.label


@_node
class SumR(Derivation):
    left: Proc
    u: Derivation

    def _source(self):
        return Choice(self.left, self.u.source)

    def _target(self):
        if self.u.label.kind == EMIT:
            return Choice(self.left, self.u.target)
        return self.u.target

    def _label(self):
        return self.u.label


@_node
class SumBoth(Derivation):
    """``t+u`` by Dis-sum."""
    t: Derivation
    u: Derivation

    def _source(self):
        return Choice(self.t.source, self.u.source)

    def _target(self):
        return Choice(self.t.target, self.u.target)

    def _label(self):
        return self.t.label


@_node
class ParL(Derivation):
    t: Derivation
    right: Proc

    def _source(self):
        return Par(self.t.source, self.right)

    def _target(self):
        return Par(self.t.target, self.right)

    def _label(self):
        return self.t.label


@_node
class ParR(Derivation):
    left: Proc
    u: Derivation

    def _source(self):
        return Par(self.left, self.u.source)

    def _target(self):
        return Par(self.left, self.u.target)

    def _label(self):
        return self.u.label


@_node
class ParBoth(Derivation):
    """``t|u`` by Comm or Bro; premise order is significant."""
    t: Derivation
    u: Derivation

    def _source(self):
        return Par(self.t.source, self.u.source)

    def _target(self):
        return Par(self.t.target, self.u.target)

    def _label(self):
        lab = sync_label(self.t.label, self.u.label)
        if lab is None:
            raise ValueError(f"no synchronisation of {self.t.label} and {self.u.label}")
        return lab


@_node
class Res(Derivation):
    t: Derivation
    names: frozenset

    def _source(self):
        return Restrict(self.t.source, self.names)

    def _target(self):
        return Restrict(self.t.target, self.names)

    def _label(self):
        return self.t.label


@_node
class Rel(Derivation):
    t: Derivation
    f: Relabelling

    def _source(self):
        return Relabel(self.t.source, self.f)

    def _target(self):
        return Relabel(self.t.target, self.f)

    def _label(self):
        return self.f.apply(self.t.label)


@_node
class Rec(Derivation):
    """``A:t`` by Rec, Dis-rec or Sig-rec."""
    agent: str
    t: Derivation

    def _source(self):
        return Agent(self.agent)

    def _target(self):
        if self.t.label.is_passive:
            return Agent(self.agent)
        return self.t.target

    def _label(self):
        return self.t.label


@_node
class DisNil(Derivation):
    b: str

    def _source(self):
        return Nil()

    def _target(self):
        return Nil()

    def _label(self):
        return Label(DISC, self.b)


@_node
class DisAct(Derivation):
    b: str
    action: Label
    body: Proc

    def _source(self):
        return Prefix(self.action, self.body)

    def _target(self):
        return Prefix(self.action, self.body)

    def _label(self):
        return Label(DISC, self.b)


@_node
class SigEmit(Derivation):
    body: Proc
    signal: str

    def _source(self):
        return Signalling(self.body, self.signal)

    def _target(self):
        return Signalling(self.body, self.signal)

    def _label(self):
        return Label(EMIT, self.signal)


@_node
class SigCtx(Derivation):
    """``t^r`` by Act-sig, Dis-sig or Sig-sig."""
    t: Derivation
    signal: str

    def _source(self):
        return Signalling(self.t.source, self.signal)

    def _target(self):
        if self.t.label.is_action:
            return self.t.target
        return Signalling(self.t.target, self.signal)

    def _label(self):
        return self.t.label


def label(t: Derivation) -> Label:
    return t.label


def source(t: Derivation) -> Proc:
    return t.source


def target(t: Derivation) -> Proc:
    return t.target


# -- enumeration -----------------------------------------------------------

def enabled(p: Proc, decls: Declarations) -> tuple[Derivation, ...]:
    """All derivations with source ``p``, in deterministic left-to-right order."""
    memo = decls.cache.setdefault("enabled", {})
    try:
        return memo[p]
    except KeyError:
        pass
    active = decls.cache.setdefault("enabled_active", set())
    if p in active:
        raise UnguardedRecursionError(f"unguarded recursion through {show(p)}")
    active.add(p)
    try:
        result = tuple(dict.fromkeys(_enabled(p, decls)))
    finally:
        active.discard(p)
    memo[p] = result
    return result


def _enabled(p: Proc, decls: Declarations):
    bs = decls.sorted_broadcasts
    if isinstance(p, Nil):
        for b in bs:
            yield DisNil(b)
    elif isinstance(p, Prefix):
        yield ActStep(p.action, p.body)
        for b in bs:
            if p.action != Label(RECV, b):
                yield DisAct(b, p.action, p.body)
    elif isinstance(p, Choice):
        tl, tr = enabled(p.left, decls), enabled(p.right, decls)
        for t in tl:
            if t.label.kind != DISC:
                yield SumL(t, p.right)
        for u in tr:
            if u.label.kind != DISC:
                yield SumR(p.left, u)
        for t in tl:
            if t.label.kind == DISC:
                for u in tr:
                    if u.label == t.label:
                        yield SumBoth(t, u)
    elif isinstance(p, Par):
        tl, tr = enabled(p.left, decls), enabled(p.right, decls)
        for t in tl:
            if t.label.kind in ETA_KINDS:
                yield ParL(t, p.right)
        for u in tr:
            if u.label.kind in ETA_KINDS:
                yield ParR(p.left, u)
        for t in tl:
            for u in tr:
                if sync_label(t.label, u.label) is not None:
                    yield ParBoth(t, u)
    elif isinstance(p, Restrict):
        for t in enabled(p.body, decls):
            if not restricted(t.label, p.names):
                yield Res(t, p.names)
    elif isinstance(p, Relabel):
        for t in enabled(p.body, decls):
            yield Rel(t, p.f)
    elif isinstance(p, Agent):
        for t in enabled(decls.body(p.name), decls):
            yield Rec(p.name, t)
    elif isinstance(p, Signalling):
        yield SigEmit(p.body, p.signal)
        for t in enabled(p.body, decls):
            yield SigCtx(t, p.signal)
    else:
        raise TypeError(p)


def restricted(lab: Label, names: frozenset) -> bool:
    """True when ``lab`` lies in L or its complements."""
    return lab.kind in (IN, OUT, READ, EMIT) and lab.name in names


# -- validation ------------------------------------------------------------

def validate(t: Derivation, decls: Declarations) -> bool:
    """True iff ``t`` names a genuine derivation under ``decls``."""
    try:
        return _valid(t, decls)
    except (ValueError, KeyError, AttributeError):
        return False


def _valid_action(a: Label, decls: Declarations) -> bool:
    if not isinstance(a, Label) or not a.is_action:
        return False
    if a.kind == TAU:
        return True
    expected = {IN: "handshake", OUT: "handshake", SEND: "broadcast",
                RECV: "broadcast", READ: "signal"}[a.kind]
    return decls.kind_of(a.name) == expected


def _valid_proc(p: Proc, decls: Declarations) -> bool:
    return isinstance(p, Proc)


def _valid(t: Derivation, decls: Declarations) -> bool:
    if isinstance(t, ActStep):
        return _valid_action(t.action, decls) and _valid_proc(t.body, decls)
    if isinstance(t, DisNil):
        return t.b in decls.broadcasts
    if isinstance(t, DisAct):
        return (t.b in decls.broadcasts and _valid_action(t.action, decls)
                and t.action != Label(RECV, t.b))
    if isinstance(t, SigEmit):
        return t.signal in decls.signals and _valid_proc(t.body, decls)
    if isinstance(t, SumL):
        return _valid(t.t, decls) and t.t.label.kind != DISC
    if isinstance(t, SumR):
        return _valid(t.u, decls) and t.u.label.kind != DISC
    if isinstance(t, SumBoth):
        return (_valid(t.t, decls) and _valid(t.u, decls)
                and t.t.label.kind == DISC and t.t.label == t.u.label)
    if isinstance(t, ParL):
        return _valid(t.t, decls) and t.t.label.kind in ETA_KINDS
    if isinstance(t, ParR):
        return _valid(t.u, decls) and t.u.label.kind in ETA_KINDS
    if isinstance(t, ParBoth):
        return (_valid(t.t, decls) and _valid(t.u, decls)
                and sync_label(t.t.label, t.u.label) is not None)
    if isinstance(t, Res):
        ok_names = all(decls.kind_of(n) in ("handshake", "signal") for n in t.names)
        return ok_names and _valid(t.t, decls) and not restricted(t.t.label, t.names)
    if isinstance(t, Rel):
        for a, b in t.f.pairs:
            if decls.kind_of(a) is None or decls.kind_of(a) != decls.kind_of(b):
                return False
        return _valid(t.t, decls)
    if isinstance(t, Rec):
        return (t.agent in decls.agents and _valid(t.t, decls)
                and t.t.source == decls.agents[t.agent])
    if isinstance(t, SigCtx):
        return t.signal in decls.signals and _valid(t.t, decls)
    return False


def subderivations(t: Derivation) -> tuple[Derivation, ...]:
    if isinstance(t, (SumL, ParL, Res, Rel, Rec, SigCtx)):
        return (t.t,)
    if isinstance(t, (SumR, ParR)):
        return (t.u,)
    if isinstance(t, (SumBoth, ParBoth)):
        return (t.t, t.u)
    return ()


# -- printer ---------------------------------------------------------------

def show_derivation(t: Derivation) -> str:
    return _showd(t, 0)


def _showd(t: Derivation, ctx: int) -> str:
    if isinstance(t, ActStep):
        return f"<{t.action}->{_show(t.body, 0)}>"
    if isinstance(t, DisNil):
        return f"{t.b}:0"
    if isinstance(t, DisAct):
        return _paren(f"{t.b}:{t.action}.{_show(t.body, 3)}", 3, ctx)
    if isinstance(t, SigEmit):
        return _paren(f"{_show(t.body, 2)}<^{t.signal}", 2, ctx)
    if isinstance(t, SumL):
        return _paren(f"{_showd(t.t, 0)} + {_show(t.right, 1)}", 0, ctx)
    if isinstance(t, SumR):
        return _paren(f"{_show(t.left, 0)} + {_showd(t.u, 1)}", 0, ctx)
    if isinstance(t, SumBoth):
        return _paren(f"{_showd(t.t, 0)} + {_showd(t.u, 1)}", 0, ctx)
    if isinstance(t, ParL):
        return _paren(f"{_showd(t.t, 1)} | {_show(t.right, 2)}", 1, ctx)
    if isinstance(t, ParR):
        return _paren(f"{_show(t.left, 1)} | {_showd(t.u, 2)}", 1, ctx)
    if isinstance(t, ParBoth):
        return _paren(f"{_showd(t.t, 1)} | {_showd(t.u, 2)}", 1, ctx)
    if isinstance(t, Res):
        return _paren(f"{_showd(t.t, 2)} \\ {{{', '.join(sorted(t.names))}}}", 2, ctx)
    if isinstance(t, Rel):
        return _paren(f"{_showd(t.t, 2)}{t.f}", 2, ctx)
    if isinstance(t, SigCtx):
        return _paren(f"{_showd(t.t, 2)}^{t.signal}", 2, ctx)
    if isinstance(t, Rec):
        return _paren(f"{t.agent}:{_showd(t.t, 3)}", 3, ctx)
    raise TypeError(t)


def sort_key(t: Derivation) -> str:
    return show_derivation(t)
