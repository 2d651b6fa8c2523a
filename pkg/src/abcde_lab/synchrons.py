"""Synchron calculus: an independent characterisation of the successor relation.

A synchron is a path through the operator structure of a term (arguments
``+L +R |L |R \\L [f] A: ^r``) ending in a tip: an action prefix ``(a->P)``,
a discard ``(b:)`` or a signal emission ``(P<^s)``.  Transitions are sets of
synchrons, and concurrency, successors and target states can all be computed
on those sets without looking at the successor clauses in :mod:`ltss`.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Iterable

from .sos import (
    ActStep, Derivation, DisAct, DisNil, ParBoth, ParL, ParR, Rec, Rel, Res,
    SigCtx, SigEmit, SumBoth, SumL, SumR, enabled, restricted, sort_key,
    sync_label, validate,
)
from .syntax import (
    DISC, RECV, SEND, TAU_LABEL, Agent, Choice, Declarations, Label, Nil, Par,
    Prefix, Proc, Relabel, Relabelling, Restrict, Signalling, _names, discard,
    complement, emit, has_complement, show,
)


class AffectedSynchronError(ValueError):
    pass


class NoSuchTransition(ValueError):
    pass


# -- representation --------------------------------------------------------

PLUS_L, PLUS_R, PAR_L, PAR_R, RES, REL, REC, SIG = "+L", "+R", "|L", "|R", "\\", "[]", ":", "^"
DYNAMIC = frozenset({PLUS_L, PLUS_R, REC, SIG})


@dataclass(frozen=True, order=True)
class Arg:
    kind: str
    data: object = None

    def __str__(self):
        if self.kind == RES:
            return f"\\{{{_names(self.data)}}}"
        if self.kind == REL:
            return str(self.data)
        if self.kind == REC:
            return f"{self.data}:"
        if self.kind == SIG:
            return f"^{self.data}"
        return self.kind


A_PLUS_L, A_PLUS_R, A_PAR_L, A_PAR_R = Arg(PLUS_L), Arg(PLUS_R), Arg(PAR_L), Arg(PAR_R)


@dataclass(frozen=True)
class ActTip:
    action: Label
    body: Proc

    @property
    def label(self) -> Label:
        return self.action

    def __str__(self):
        return f"({self.action}->{show(self.body)})"


@dataclass(frozen=True)
class DisTip:
    b: str

    @property
    def label(self) -> Label:
        return discard(self.b)

    def __str__(self):
        return f"({self.b}:)"


@dataclass(frozen=True)
class SigTip:
    body: Proc
    signal: str

    @property
    def label(self) -> Label:
        return emit(self.signal)

    def __str__(self):
        return f"({show(self.body)}<^{self.signal})"


@dataclass(frozen=True, eq=False)
class Synchron:
    path: tuple[Arg, ...]
    tip: ActTip | DisTip | SigTip

    def __post_init__(self):
        object.__setattr__(self, "_hash", hash((self.path, self.tip)))

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        if not isinstance(other, Synchron):
            return NotImplemented
        return self._hash == other._hash and self.path == other.path and self.tip == other.tip

    def __str__(self):
        return "".join(map(str, self.path)) + str(self.tip)

    def under(self, arg: Arg) -> "Synchron":
        return Synchron((arg,) + self.path, self.tip)

    @property
    def active(self) -> bool:
        return isinstance(self.tip, ActTip)

    @property
    def necessary(self) -> bool:
        if isinstance(self.tip, DisTip):
            return False
        return not (isinstance(self.tip, ActTip) and self.tip.action.kind == RECV)

    @property
    def raw_label(self) -> Label:
        return self.tip.label

    @property
    def label(self) -> Label:
        """Label as observed at the root, i.e. after all relabellings on the path."""
        return self.label_below(-1)

    def label_below(self, k: int) -> Label:
        """Label as observed just below path position ``k``."""
        lab = self.tip.label
        for arg in reversed(self.path[k + 1:]):
            if arg.kind == REL:
                lab = arg.data.apply(lab)
        return lab


def show_synchrons(sigma: Iterable[Synchron]) -> str:
    return "{" + ", ".join(sorted(map(str, sigma))) + "}"


def _under(arg: Arg, sigma: Iterable[Synchron]) -> frozenset[Synchron]:
    return frozenset(s.under(arg) for s in sigma)


# -- synchrons of processes and transitions --------------------------------

def synchrons_of_process(p: Proc, decls: Declarations) -> frozenset[Synchron]:
    memo = decls.cache.setdefault("sync_p", {})
    try:
        return memo[p]
    except KeyError:
        pass
    res = memo[p] = _sp(p, decls)
    return res


def _sp(p: Proc, decls: Declarations) -> frozenset[Synchron]:
    if isinstance(p, Nil):
        return frozenset(Synchron((), DisTip(b)) for b in decls.broadcasts)
    if isinstance(p, Prefix):
        out = {Synchron((), ActTip(p.action, p.body))}
        out.update(Synchron((), DisTip(b)) for b in decls.broadcasts
                   if not (p.action.kind == RECV and p.action.name == b))
        return frozenset(out)
    if isinstance(p, Choice):
        return (_under(A_PLUS_L, synchrons_of_process(p.left, decls))
                | _under(A_PLUS_R, synchrons_of_process(p.right, decls)))
    if isinstance(p, Par):
        return (_under(A_PAR_L, synchrons_of_process(p.left, decls))
                | _under(A_PAR_R, synchrons_of_process(p.right, decls)))
    if isinstance(p, Restrict):
        return _under(Arg(RES, p.names), synchrons_of_process(p.body, decls))
    if isinstance(p, Relabel):
        return _under(Arg(REL, p.f), synchrons_of_process(p.body, decls))
    if isinstance(p, Agent):
        return _under(Arg(REC, p.name), synchrons_of_process(decls.body(p.name), decls))
    if isinstance(p, Signalling):
        return (frozenset([Synchron((), SigTip(p.body, p.signal))])
                | _under(Arg(SIG, p.signal), synchrons_of_process(p.body, decls)))
    raise TypeError(f"not a process: {p!r}")


_SYNC_T: dict[Derivation, frozenset[Synchron]] = {}


def synchrons_of_transition(t: Derivation) -> frozenset[Synchron]:
    try:
        return _SYNC_T[t]
    except KeyError:
        pass
    res = _SYNC_T[t] = _st(t)
    return res


def _st(t: Derivation) -> frozenset[Synchron]:
    if isinstance(t, ActStep):
        return frozenset([Synchron((), ActTip(t.action, t.body))])
    if isinstance(t, (DisNil, DisAct)):
        return frozenset([Synchron((), DisTip(t.b))])
    if isinstance(t, SigEmit):
        return frozenset([Synchron((), SigTip(t.body, t.signal))])
    if isinstance(t, SumL):
        return _under(A_PLUS_L, synchrons_of_transition(t.t))
    if isinstance(t, SumR):
        return _under(A_PLUS_R, synchrons_of_transition(t.u))
    if isinstance(t, SumBoth):
        return (_under(A_PLUS_L, synchrons_of_transition(t.t))
                | _under(A_PLUS_R, synchrons_of_transition(t.u)))
    if isinstance(t, ParL):
        return _under(A_PAR_L, synchrons_of_transition(t.t))
    if isinstance(t, ParR):
        return _under(A_PAR_R, synchrons_of_transition(t.u))
    if isinstance(t, ParBoth):
        return (_under(A_PAR_L, synchrons_of_transition(t.t))
                | _under(A_PAR_R, synchrons_of_transition(t.u)))
    if isinstance(t, Res):
        return _under(Arg(RES, t.names), synchrons_of_transition(t.t))
    if isinstance(t, Rel):
        return _under(Arg(REL, t.f), synchrons_of_transition(t.t))
    if isinstance(t, Rec):
        return _under(Arg(REC, t.agent), synchrons_of_transition(t.t))
    if isinstance(t, SigCtx):
        return _under(Arg(SIG, t.signal), synchrons_of_transition(t.t))
    raise TypeError(f"not a derivation: {t!r}")


def active(sigma: Iterable[Synchron]) -> frozenset[Synchron]:
    return frozenset(s for s in sigma if s.active)


def necessary(sigma: Iterable[Synchron]) -> frozenset[Synchron]:
    return frozenset(s for s in sigma if s.necessary)


# -- concurrency -----------------------------------------------------------

def _common_prefix(p: tuple[Arg, ...], q: tuple[Arg, ...]) -> int:
    n = 0
    for a, b in zip(p, q):
        if a != b:
            break
        n += 1
    return n


def sconc_d(s: Synchron, u: Synchron) -> bool:
    """The paths share a prefix and then fork at ``|L`` versus ``|R``."""
    k = _common_prefix(s.path, u.path)
    if k >= len(s.path) or k >= len(u.path):
        return False
    return {s.path[k].kind, u.path[k].kind} == {PAR_L, PAR_R}


def saconc_d(s: Synchron, u: Derivation) -> bool:
    return all(sconc_d(s, v) for v in active(synchrons_of_transition(u)))


def ssaconc(t: Derivation, u: Derivation) -> bool:
    if t.source != u.source:
        from .ltss import SourceMismatchError
        raise SourceMismatchError("transitions have different sources")
    return all(saconc_d(s, u) for s in necessary(synchrons_of_transition(t)))


# -- after and new ---------------------------------------------------------

def static_strip(path: Iterable[Arg]) -> tuple[Arg, ...]:
    return tuple(a for a in path if a.kind not in DYNAMIC)


def after_synchron(s: Synchron, u: Synchron) -> Synchron:
    if not sconc_d(s, u):
        raise AffectedSynchronError(f"{s} is not concurrent with {u}")
    k = _common_prefix(s.path, u.path)
    return Synchron(static_strip(s.path[:k]) + s.path[k:], s.tip)


def after(s: Synchron, w: Derivation) -> Synchron:
    if w.label.is_passive:
        return s
    act = sorted(active(synchrons_of_transition(w)), key=str)
    assert act, "an action transition has an active synchron"
    if not all(sconc_d(s, v) for v in act):
        raise AffectedSynchronError(f"{s} is affected by {sort_key(w)}")
    # closest: longest common prefix; ties go to the first in printed order
    best = max(act, key=lambda v: _common_prefix(s.path, v.path))
    return after_synchron(s, best)


def after_set(sigma: Iterable[Synchron], w: Derivation) -> frozenset[Synchron]:
    return frozenset(after(s, w) for s in sigma if saconc_d(s, w))


def new_synchrons(w: Derivation, decls: Declarations) -> frozenset[Synchron]:
    out = set()
    for v in active(synchrons_of_transition(w)):
        prefix = static_strip(v.path)
        for s in synchrons_of_process(v.tip.body, decls):
            out.add(Synchron(prefix + s.path, s.tip))
    return frozenset(out)


@dataclass
class TargetCheck:
    ok: bool
    disjoint: bool
    expected: frozenset
    computed: frozenset


def check_target_synchrons(w: Derivation, decls: Declarations) -> TargetCheck:
    """Compare the synchrons of the target with those computed from the source and ``w``."""
    inherited = after_set(synchrons_of_process(w.source, decls), w)
    fresh = new_synchrons(w, decls)
    disjoint = not (inherited & fresh)
    computed = inherited | fresh
    expected = synchrons_of_process(w.target, decls)
    return TargetCheck(disjoint and computed == expected, disjoint, expected, computed)


# -- P-completeness --------------------------------------------------------

def _is_bcast(lab: Label, b: str) -> bool:
    return lab.kind in (SEND, RECV, DISC) and lab.name == b


def _composite(sub: list[Synchron], k: int) -> Label | None:
    """Label of the transition formed by ``sub`` as seen just below position ``k``."""
    labs = [s.label_below(k) for s in sub]
    if len(labs) == 1:
        return labs[0]
    if len(labs) == 2 and labs[0].is_action and has_complement(labs[0]) \
            and labs[1] == complement(labs[0]):
        return TAU_LABEL
    return None  # broadcast sets are never restricted


def _respects_restrictions(sigma: frozenset[Synchron]) -> bool:
    # Each \L node seen by sigma must let the composite label pass.
    nodes = {}
    for s in sigma:
        for k, arg in enumerate(s.path):
            if arg.kind == RES:
                nodes.setdefault((s.path[:k + 1], k), []).append(s)
    for (prefix, k), sub in nodes.items():
        lab = _composite(sub, k)
        if lab is not None and restricted(lab, prefix[-1].data):
            return False
    return True


def p_complete(sigma: Iterable[Synchron], p: Proc, decls: Declarations) -> bool:
    sigma = frozenset(sigma)
    all_p = synchrons_of_process(p, decls)
    if not sigma or not sigma <= all_p:
        return False
    if not _respects_restrictions(sigma):
        return False
    labs = {s: s.label for s in sigma}
    if len(sigma) == 1:
        (s,) = sigma
        lab = labs[s]
        if not lab.is_broadcast:
            return True
    if len(sigma) == 2:
        s, u = sigma
        ls, lu = labs[s], labs[u]
        if ls.kind != "tau" and has_complement(ls) and lu == complement(ls) and sconc_d(s, u):
            return True
    return any(_case3(sigma, all_p, b, labs) for b in decls.broadcasts)


def _case3(sigma, all_p, b, labs) -> bool:
    if not all(_is_bcast(l, b) for l in labs.values()):
        return False
    if sum(1 for l in labs.values() if l.kind == SEND) > 1:
        return False
    for s, u in combinations(sigma, 2):
        if (labs[s].kind != DISC or labs[u].kind != DISC) and not sconc_d(s, u):
            return False
    acts = active(sigma)
    for s in all_p:
        lab = s.label
        if lab.kind == RECV and lab.name == b and s not in sigma:
            if all(sconc_d(s, v) for v in acts if v != s):
                return False
        if lab.kind == DISC and lab.name == b and s not in sigma:
            if all(sconc_d(s, v) for v in acts):
                return False
    return True


# -- retrieval -------------------------------------------------------------

def _split(sigma: frozenset[Synchron]) -> dict[Arg, frozenset[Synchron]]:
    parts: dict[Arg, set] = {}
    for s in sigma:
        if not s.path:
            raise NoSuchTransition("tip where an argument was expected")
        parts.setdefault(s.path[0], set()).add(Synchron(s.path[1:], s.tip))
    return {k: frozenset(v) for k, v in parts.items()}


def _retrieve(p: Proc, sigma: frozenset[Synchron], decls: Declarations) -> Derivation:
    if not sigma:
        raise NoSuchTransition("empty synchron set")
    if isinstance(p, (Nil, Prefix)) or (isinstance(p, Signalling) and any(not s.path for s in sigma)):
        if len(sigma) != 1:
            raise NoSuchTransition("several tips at one leaf")
        (s,) = sigma
        if s.path:
            raise NoSuchTransition(f"unexpected argument {s.path[0]}")
        tip = s.tip
        if isinstance(p, Nil) and isinstance(tip, DisTip):
            return DisNil(tip.b)
        if isinstance(p, Prefix) and isinstance(tip, ActTip) and tip == ActTip(p.action, p.body):
            return ActStep(p.action, p.body)
        if isinstance(p, Prefix) and isinstance(tip, DisTip):
            return DisAct(tip.b, p.action, p.body)
        if isinstance(p, Signalling) and tip == SigTip(p.body, p.signal):
            return SigEmit(p.body, p.signal)
        raise NoSuchTransition(f"tip {tip} does not match {show(p)}")
    parts = _split(sigma)
    if isinstance(p, (Choice, Par)):
        lk, rk = (A_PLUS_L, A_PLUS_R) if isinstance(p, Choice) else (A_PAR_L, A_PAR_R)
        if set(parts) - {lk, rk}:
            raise NoSuchTransition("argument does not match operator")
        l = _retrieve(p.left, parts[lk], decls) if lk in parts else None
        r = _retrieve(p.right, parts[rk], decls) if rk in parts else None
        if isinstance(p, Choice):
            if l is not None and r is not None:
                return SumBoth(l, r)
            return SumL(l, p.right) if l is not None else SumR(p.left, r)
        if l is not None and r is not None:
            return ParBoth(l, r)
        return ParL(l, p.right) if l is not None else ParR(p.left, r)
    if isinstance(p, Restrict):
        key, mk = Arg(RES, p.names), lambda t: Res(t, p.names)
        body = p.body
    elif isinstance(p, Relabel):
        key, mk = Arg(REL, p.f), lambda t: Rel(t, p.f)
        body = p.body
    elif isinstance(p, Agent):
        key, mk = Arg(REC, p.name), lambda t: Rec(p.name, t)
        body = decls.body(p.name)
    elif isinstance(p, Signalling):
        key, mk = Arg(SIG, p.signal), lambda t: SigCtx(t, p.signal)
        body = p.body
    else:
        raise TypeError(f"not a process: {p!r}")
    if set(parts) != {key}:
        raise NoSuchTransition("argument does not match operator")
    return mk(_retrieve(body, parts[key], decls))


def retrieve(p: Proc, sigma: Iterable[Synchron], decls: Declarations) -> Derivation:
    """The unique transition of ``p`` whose synchron set is ``sigma``."""
    t = _retrieve(p, frozenset(sigma), decls)
    if not validate(t, decls):
        raise NoSuchTransition(f"{sort_key(t)} is not a derivable transition")
    return t


# -- possible successors ---------------------------------------------------

def _labels_match(l1: Label, l2: Label) -> bool:
    if l1 == l2:
        return True
    return l1.name == l2.name and {l1.kind, l2.kind} == {RECV, DISC}


def ssleadsto(t: Derivation, w: Derivation, decls: Declarations) -> frozenset[Derivation]:
    """All possible successors of ``t`` after ``w``, by filtering ``enabled(target(w))``."""
    if not ssaconc(t, w):
        return frozenset()
    sync_t = synchrons_of_transition(t)
    carried = [after(s, w) for s in sync_t if saconc_d(s, w)]
    out = []
    for t2 in enabled(w.target, decls):
        if not _labels_match(t.label, t2.label):
            continue
        sync_t2 = synchrons_of_transition(t2)
        if all(s in sync_t2 for s in carried):
            out.append(t2)
    return frozenset(out)


def sleadsto(s: Synchron, s2: Synchron) -> bool:
    """``s2`` is ``s`` or ``s`` with the dynamic arguments above some ``|`` fork stripped."""
    if s == s2:
        return True
    if s.tip != s2.tip:
        return False
    for k, arg in enumerate(s.path):
        if arg.kind in (PAR_L, PAR_R):
            if static_strip(s.path[:k]) + s.path[k:] == s2.path:
                return True
    return False
