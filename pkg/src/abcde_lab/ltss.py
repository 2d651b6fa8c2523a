"""The successor relation on ABCdE derivations and explored transition graphs."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .sos import (
    ActStep, Derivation, DisAct, ParBoth, ParL, ParR, Rec, Rel, Res, SigCtx,
    SumBoth, SumL, SumR, enabled, restricted, sort_key, sync_label,
)
from .syntax import (
    DISC, EMIT, IN, OUT, READ, RECV, SEND, TAU, Declarations, Label, Proc, show,
)


class SourceMismatchError(ValueError):
    pass


class InvalidPathError(ValueError):
    pass


class LimitExceeded(RuntimeError):
    def __init__(self, visited: int, limit: int):
        self.visited = visited
        self.limit = limit
        super().__init__(f"state limit {limit} exceeded ({visited} states visited)")


def _recv_or_discard(t: Derivation, b: str) -> bool:
    return t.label.name == b and t.label.kind in (RECV, DISC)


def successors(t: Derivation, u: Derivation, decls: Declarations) -> frozenset[Derivation]:
    """The set ``{v | t ~>_u v}``."""
    if t.source != u.source:
        raise SourceMismatchError(f"{sort_key(t)} and {sort_key(u)} have different sources")
    return _succ(t, u, decls)


def _succ(chi: Derivation, zeta: Derivation, decls: Declarations) -> frozenset[Derivation]:
    memo = decls.cache.setdefault("succ", {})
    key = (chi, zeta)
    try:
        return memo[key]
    except KeyError:
        pass
    out: set[Derivation] = set()
    _clauses(chi, zeta, decls, out)
    res = memo[key] = frozenset(out)
    return res


def _clauses(chi, zeta, decls, out: set) -> None:
    zl = zeta.label
    # passive zeta changes nothing
    if zl.is_passive:
        out.add(chi)
    # receive/discard base cases
    if isinstance(zeta, ActStep):
        b = None
        if chi == zeta and zl.kind == RECV:
            b = zl.name
        elif isinstance(chi, DisAct) and chi.action == zeta.action and chi.body == zeta.body:
            b = chi.b
        if b is not None:
            out.update(v for v in enabled(zeta.target, decls) if _recv_or_discard(v, b))
        return
    if isinstance(zeta, SumL) and zl.kind != EMIT:
        v = zeta.t
        if isinstance(chi, (SumL, SumBoth)):
            out |= _succ(chi.t, v, decls)
        if isinstance(chi, SumR) and chi.u.label.kind == RECV:
            b = chi.u.label.name
            out.update(x for x in enabled(v.target, decls) if _recv_or_discard(x, b))
        return
    if isinstance(zeta, SumR) and zl.kind != EMIT:
        w = zeta.u
        if isinstance(chi, (SumR, SumBoth)):
            out |= _succ(chi.u, w, decls)
        if isinstance(chi, SumL) and chi.t.label.kind == RECV:
            b = chi.t.label.name
            out.update(x for x in enabled(w.target, decls) if _recv_or_discard(x, b))
        return
    if isinstance(zeta, ParR):
        w = zeta.u
        if isinstance(chi, ParL):
            out.add(ParL(chi.t, w.target))
        elif isinstance(chi, ParR):
            out.update(ParR(chi.left, u2) for u2 in _succ(chi.u, w, decls))
        elif isinstance(chi, ParBoth):
            _add_both(out, [chi.t], _succ(chi.u, w, decls))
        return
    if isinstance(zeta, ParL):
        v = zeta.t
        if isinstance(chi, ParR):
            out.add(ParR(v.target, chi.u))
        elif isinstance(chi, ParL):
            out.update(ParL(t2, chi.right) for t2 in _succ(chi.t, v, decls))
        elif isinstance(chi, ParBoth):
            _add_both(out, _succ(chi.t, v, decls), [chi.u])
        return
    if isinstance(zeta, ParBoth):
        v, w = zeta.t, zeta.u
        if isinstance(chi, ParL):
            out.update(ParL(t2, w.target) for t2 in _succ(chi.t, v, decls))
        elif isinstance(chi, ParR):
            out.update(ParR(v.target, u2) for u2 in _succ(chi.u, w, decls))
        elif isinstance(chi, ParBoth):
            _add_both(out, _succ(chi.t, v, decls), _succ(chi.u, w, decls))
        return
    if not zl.is_action:
        return
    if isinstance(zeta, Res) and isinstance(chi, Res):
        out.update(Res(t2, zeta.names) for t2 in _succ(chi.t, zeta.t, decls)
                   if not restricted(t2.label, zeta.names))
    elif isinstance(zeta, Rel) and isinstance(chi, Rel):
        out.update(Rel(t2, zeta.f) for t2 in _succ(chi.t, zeta.t, decls))
    elif isinstance(zeta, Rec) and isinstance(chi, Rec):
        out |= _succ(chi.t, zeta.t, decls)
    elif isinstance(zeta, SigCtx) and isinstance(chi, SigCtx):
        out |= _succ(chi.t, zeta.t, decls)


def _add_both(out: set, lefts: Iterable[Derivation], rights: Iterable[Derivation]) -> None:
    rights = list(rights)
    for t2 in lefts:
        for u2 in rights:
            if sync_label(t2.label, u2.label) is not None:
                out.add(ParBoth(t2, u2))


def aconc(t: Derivation, u: Derivation, decls: Declarations) -> bool:
    """``t`` is unaffected by ``u``."""
    return bool(successors(t, u, decls))


def conc(t: Derivation, u: Derivation, decls: Declarations) -> bool:
    return aconc(t, u, decls) and aconc(u, t, decls)


def check_path(start: Proc, ts: Sequence[Derivation]) -> None:
    state = start
    for i, u in enumerate(ts):
        if u.source != state:
            raise InvalidPathError(f"step {i}: {sort_key(u)} is not enabled in {show(state)}")
        state = u.target


def successors_along(t: Derivation, ts: Sequence[Derivation], decls: Declarations
                     ) -> frozenset[Derivation]:
    check_path(t.source, ts)
    current = frozenset([t])
    for u in ts:
        if not current:
            break
        nxt = set()
        for v in current:
            nxt |= _succ(v, u, decls)
        current = frozenset(nxt)
    return current


def paconc(t: Derivation, ts: Sequence[Derivation], decls: Declarations) -> bool:
    return bool(successors_along(t, ts, decls))


def tr_bullet(t: Derivation, decls: Declarations) -> bool:
    """True iff ``t`` is affected by its own occurrence."""
    return not _succ(t, t, decls)


# -- graphs ----------------------------------------------------------------

@dataclass
class LtssGraph:
    origin: Proc
    decls: Declarations
    states: list[Proc] = field(default_factory=list)
    index: dict[Proc, tuple[Derivation, ...]] = field(default_factory=dict)

    @property
    def transitions(self) -> list[Derivation]:
        return [t for p in self.states for t in self.index[p]]

    def state_id(self, p: Proc) -> int:
        try:
            return self._ids[p]
        except AttributeError:
            self._ids = {q: i for i, q in enumerate(self.states)}
            return self._ids[p]

    def enabled(self, p: Proc) -> tuple[Derivation, ...]:
        return self.index[p]

    def triples(self) -> list[tuple[Derivation, Derivation, Derivation]]:
        out = []
        for p in self.states:
            en = self.index[p]
            for t in en:
                for u in en:
                    for v in sorted(successors(t, u, self.decls), key=sort_key):
                        out.append((t, u, v))
        return out


def explore(p: Proc, decls: Declarations, state_limit: int = 10_000) -> LtssGraph:
    """Breadth-first closure of the states reachable from ``p``."""
    g = LtssGraph(p, decls)
    seen = {p}
    queue = deque([p])
    while queue:
        q = queue.popleft()
        g.states.append(q)
        en = enabled(q, decls)
        g.index[q] = en
        for t in en:
            r = t.target
            if r not in seen:
                if len(seen) >= state_limit:
                    raise LimitExceeded(len(seen) + 1, state_limit)
                seen.add(r)
                queue.append(r)
    return g


def dump_text(g: LtssGraph, with_triples: bool = True) -> str:
    lines = [f"origin {show(g.origin)}", f"states {len(g.states)}"]
    for i, p in enumerate(g.states):
        lines.append(f"state s{i} {show(p)}")
    lines.append(f"transitions {len(g.transitions)}")
    for p in g.states:
        for t in g.index[p]:
            lines.append(f"trans s{g.state_id(p)} --{t.label}--> s{g.state_id(t.target)} {t}")
    if with_triples:
        triples = g.triples()
        lines.append(f"successor-triples {len(triples)}")
        for t, u, v in triples:
            lines.append(f"succ {t} ~> [{u}] {v}")
    return "\n".join(lines) + "\n"


def _dot_escape(s: str) -> str:
    return s.replace("\\", "\\\\").replace('"', '\\"')


def dump_dot(g: LtssGraph) -> str:
    lines = ["digraph ltss {", "  rankdir=LR;", '  init [shape=point];']
    for i, p in enumerate(g.states):
        lines.append(f'  s{i} [label="{_dot_escape(show(p))}"];')
    lines.append("  init -> s0;")
    for p in g.states:
        for t in g.index[p]:
            lines.append(f'  s{g.state_id(p)} -> s{g.state_id(t.target)} '
                         f'[label="{_dot_escape(str(t.label))}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


# -- CCS-only reference ----------------------------------------------------
# Independent transcription of the CCS successor relation and its concurrency
# projection; only meaningful when no broadcast or signal names are declared.

def ccs_successors(t: Derivation, u: Derivation) -> frozenset[Derivation]:
    out = set()
    if isinstance(t, SumL) and isinstance(u, SumL):
        out |= ccs_successors(t.t, u.t)
    elif isinstance(t, SumR) and isinstance(u, SumR):
        out |= ccs_successors(t.u, u.u)
    elif isinstance(t, ParL) and isinstance(u, ParR):
        out.add(ParL(t.t, u.u.target))
    elif isinstance(t, ParR) and isinstance(u, ParL):
        out.add(ParR(u.t.target, t.u))
    elif isinstance(t, ParL) and isinstance(u, ParL):
        out |= {ParL(x, t.right) for x in ccs_successors(t.t, u.t)}
    elif isinstance(t, ParL) and isinstance(u, ParBoth):
        out |= {ParL(x, u.u.target) for x in ccs_successors(t.t, u.t)}
    elif isinstance(t, ParBoth) and isinstance(u, ParL):
        out |= {ParBoth(x, t.u) for x in ccs_successors(t.t, u.t)}
    elif isinstance(t, ParR) and isinstance(u, ParR):
        out |= {ParR(t.left, x) for x in ccs_successors(t.u, u.u)}
    elif isinstance(t, ParR) and isinstance(u, ParBoth):
        out |= {ParR(u.t.target, x) for x in ccs_successors(t.u, u.u)}
    elif isinstance(t, ParBoth) and isinstance(u, ParR):
        out |= {ParBoth(t.t, x) for x in ccs_successors(t.u, u.u)}
    elif isinstance(t, ParBoth) and isinstance(u, ParBoth):
        out |= {ParBoth(x, y) for x in ccs_successors(t.t, u.t)
                for y in ccs_successors(t.u, u.u)}
    elif isinstance(t, Res) and isinstance(u, Res):
        out |= {Res(x, t.names) for x in ccs_successors(t.t, u.t)}
    elif isinstance(t, Rel) and isinstance(u, Rel):
        out |= {Rel(x, t.f) for x in ccs_successors(t.t, u.t)}
    elif isinstance(t, Rec) and isinstance(u, Rec):
        out |= ccs_successors(t.t, u.t)
    return frozenset(out)


def ccs_conc(t: Derivation, u: Derivation) -> bool:
    """The CCS concurrency relation as the smallest relation closed under its rules."""
    if isinstance(t, SumL) and isinstance(u, SumL):
        return ccs_conc(t.t, u.t)
    if isinstance(t, SumR) and isinstance(u, SumR):
        return ccs_conc(t.u, u.u)
    if isinstance(t, ParL) and isinstance(u, ParR) or isinstance(t, ParR) and isinstance(u, ParL):
        return True
    if isinstance(t, ParL) and isinstance(u, (ParL, ParBoth)):
        return ccs_conc(t.t, u.t)
    if isinstance(t, ParBoth) and isinstance(u, ParL):
        return ccs_conc(t.t, u.t)
    if isinstance(t, ParR) and isinstance(u, (ParR, ParBoth)):
        return ccs_conc(t.u, u.u)
    if isinstance(t, ParBoth) and isinstance(u, ParR):
        return ccs_conc(t.u, u.u)
    if isinstance(t, ParBoth) and isinstance(u, ParBoth):
        return ccs_conc(t.t, u.t) and ccs_conc(t.u, u.u)
    if isinstance(t, Res) and isinstance(u, Res) or isinstance(t, Rel) and isinstance(u, Rel) \
            or isinstance(t, Rec) and isinstance(u, Rec):
        return ccs_conc(t.t, u.t)
    return False


# -- lassos ----------------------------------------------------------------

class InvalidLasso(ValueError):
    pass


@dataclass(frozen=True)
class Lasso:
    """The infinite path ``prefix`` followed by ``cycle`` repeated forever."""

    start: Proc
    prefix: tuple[Derivation, ...]
    cycle: tuple[Derivation, ...]

    def __post_init__(self):
        if not self.cycle:
            raise InvalidLasso("the cycle of a lasso must be nonempty")
        try:
            check_path(self.start, self.prefix + self.cycle)
        except InvalidPathError as e:
            raise InvalidLasso(str(e)) from None
        loop = self.cycle_start
        if self.cycle[-1].target != loop:
            raise InvalidLasso("the cycle does not return to its first state")

    @property
    def cycle_start(self) -> Proc:
        return self.prefix[-1].target if self.prefix else self.start

    def states(self) -> list[Proc]:
        """States at positions 0..len(prefix)+len(cycle)-1."""
        out = [self.start]
        for t in self.prefix + self.cycle[:-1]:
            out.append(t.target)
        return out

    def step(self, i: int) -> Derivation:
        n = len(self.prefix)
        return self.prefix[i] if i < n else self.cycle[(i - n) % len(self.cycle)]

    def labels(self) -> tuple[tuple[Label, ...], tuple[Label, ...]]:
        return tuple(t.label for t in self.prefix), tuple(t.label for t in self.cycle)

    def __str__(self):
        pre = ", ".join(map(str, self.prefix))
        cyc = ", ".join(map(str, self.cycle))
        return f"{show(self.start)} [{pre}] ([{cyc}])^omega"


def lasso_from_labels(g: LtssGraph, prefix: Sequence[str], cycle: Sequence[str]) -> Lasso:
    """Build a lasso from printed derivation names, resolved against ``g``."""
    state = g.origin
    steps = []
    for name in list(prefix) + list(cycle):
        if state not in g.index:
            raise InvalidLasso(f"state {show(state)} is outside the explored graph")
        match = [t for t in g.index[state] if str(t) == name.strip()]
        if not match:
            raise InvalidLasso(f"{name!r} is not enabled in {show(state)}")
        steps.append(match[0])
        state = match[0].target
    k = len(prefix)
    return Lasso(g.origin, tuple(steps[:k]), tuple(steps[k:]))
