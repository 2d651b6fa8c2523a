"""Strong bisimilarity and enabling preserving bisimilarity on explored graphs.

An ep-bisimulation is a set of triples ``(p, q, R)`` where ``R`` relates the
enabled transitions of ``p`` and ``q``.  ``check_ep_bisim`` computes the
largest one reachable from the root pair by pruning candidate relations
downwards until every remaining relation can match each of its pairs with a
remaining relation at the target states.
"""

from __future__ import annotations

from collections import defaultdict, deque
from dataclasses import dataclass, field
from itertools import product
from typing import Iterable, Iterator

from .ltss import Lasso, LtssGraph, _succ, successors
from .sos import Derivation, sort_key
from .syntax import Declarations, Proc, show


class ResourceExceeded(RuntimeError):
    pass


class NotABisimulation(ValueError):
    pass


class UncoveredState(ValueError):
    pass


@dataclass(frozen=True)
class Limits:
    max_enabled_per_label: int = 6
    max_relations_per_pair: int = 20_000


TransRel = frozenset  # of (Derivation, Derivation)


def _rel_key(r: Iterable[tuple[Derivation, Derivation]]) -> tuple:
    return tuple(sorted((sort_key(t), sort_key(u)) for t, u in r))


@dataclass(frozen=True)
class EpTriple:
    p: Proc
    q: Proc
    R: TransRel

    def key(self) -> tuple:
        return (show(self.p), show(self.q), _rel_key(self.R))

    def __str__(self):
        pairs = ", ".join(f"{t} ~ {u}" for t, u in _rel_key(self.R))
        return f"({show(self.p)}, {show(self.q)}, {{{pairs}}})"


@dataclass
class Witness:
    triples: frozenset
    left: Declarations
    right: Declarations

    def sorted(self) -> list[EpTriple]:
        return sorted(self.triples, key=EpTriple.key)

    def at(self, p: Proc, q: Proc | None = None) -> list[EpTriple]:
        return [x for x in self.sorted() if x.p == p and (q is None or x.q == q)]

    def __len__(self):
        return len(self.triples)

    def __eq__(self, other):
        return isinstance(other, Witness) and self.triples == other.triples


def dump_witness(w: Witness) -> str:
    lines = [f"witness {len(w)}"]
    for x in w.sorted():
        lines.append(f"triple {show(x.p)} || {show(x.q)}")
        for t, u in _rel_key(x.R):
            lines.append(f"  rel {t} ~ {u}")
    return "\n".join(lines) + "\n"


# -- strong bisimilarity ---------------------------------------------------

@dataclass
class StrongResult:
    equivalent: bool
    pair: tuple[Proc, Proc]
    blocks: int

    def __str__(self):
        verdict = "equivalent" if self.equivalent else "inequivalent"
        return f"{verdict} ({show(self.pair[0])}, {show(self.pair[1])})"


def check_strong_bisim(g1: LtssGraph, g2: LtssGraph) -> StrongResult:
    """Naive partition refinement over the disjoint union of both graphs."""
    nodes = [(0, p) for p in g1.states] + [(1, p) for p in g2.states]
    graphs = (g1, g2)
    block = {n: 0 for n in nodes}
    count = 1
    while True:
        sigs = {}
        for n in nodes:
            side, p = n
            sig = frozenset((t.label, block[(side, t.target)]) for t in graphs[side].enabled(p))
            sigs[n] = (block[n], sig)
        ids: dict = {}
        new = {n: ids.setdefault(sigs[n], len(ids)) for n in nodes}
        if len(ids) == count:
            break
        block, count = new, len(ids)
    root = ((0, g1.origin), (1, g2.origin))
    return StrongResult(block[root[0]] == block[root[1]], (g1.origin, g2.origin), count)


# -- ep-bisimilarity -------------------------------------------------------

@dataclass
class Pruning:
    p: Proc
    q: Proc
    R: TransRel
    pair: tuple[Derivation, Derivation] | None
    item: str

    def __str__(self):
        where = f"{show(self.p)} || {show(self.q)}"
        if self.pair is None:
            return f"prune {where}: item {self.item}"
        v, w = self.pair
        return f"prune {where} R={list(_rel_key(self.R))} at {v} ~ {w}: item {self.item}"


@dataclass
class EpResult:
    equivalent: bool
    witness: Witness | None = None
    trace: list[Pruning] = field(default_factory=list)
    pairs_explored: int = 0

    def __str__(self):
        return "equivalent" if self.equivalent else "inequivalent"


def _maximal_cliques(nodes: list, adj: dict) -> Iterator[frozenset]:
    """Bron-Kerbosch with pivoting, in a deterministic order."""
    def bk(r, p, x):
        if not p and not x:
            yield frozenset(r)
            return
        pivot = max(p | x, key=lambda n: len(adj[n] & p))
        for n in sorted(p - adj[pivot], key=nodes.index):
            yield from bk(r | {n}, p & adj[n], x & adj[n])
            p = p - {n}
            x = x | {n}
    yield from bk(set(), set(nodes), set())


class _Side:
    """Derivations of one graph numbered in display order, with successor sets as ids."""

    def __init__(self, g: LtssGraph):
        self.g = g
        ders = sorted({t for t in g.transitions}, key=sort_key)
        self.der = ders
        self.id = {t: i for i, t in enumerate(ders)}
        self.target = [t.target for t in ders]
        self.enabled = {p: tuple(self.id[t] for t in g.enabled(p)) for p in g.states}
        self.succ: dict[tuple[int, int], frozenset[int]] = {}

    def successors(self, t: int, v: int) -> frozenset[int]:
        key = (t, v)
        try:
            return self.succ[key]
        except KeyError:
            pass
        res = self.succ[key] = frozenset(
            self.id[x] for x in _succ(self.der[t], self.der[v], self.g.decls))
        return res


class _Rel:
    """A candidate relation on derivation ids with row and column indexes."""

    __slots__ = ("pairs", "rows", "cols", "_hash")

    def __init__(self, pairs: frozenset):
        self.pairs = pairs
        rows, cols = defaultdict(set), defaultdict(set)
        for t, u in pairs:
            rows[t].add(u)
            cols[u].add(t)
        self.rows, self.cols = rows, cols
        self._hash = hash(pairs)

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        return self.pairs == other.pairs

    def unmet(self, st: frozenset, su: frozenset) -> str | None:
        rows, cols = self.rows, self.cols
        for t2 in st:
            r = rows.get(t2)
            if not r or r.isdisjoint(su):
                return "2a"
        for u2 in su:
            c = cols.get(u2)
            if not c or c.isdisjoint(st):
                return "2b"
        return None


class _EpSolver:
    """Greatest fixed point over the maximal viable relations of each state pair.

    A total subrelation of a relation in an ep-bisimulation may be added to it
    without breaking items 2a/2b, and those items only get easier as ``R'``
    grows.  So the viable relations at a pair are exactly the total subsets
    of a few maximal ones.  A maximal relation that fails is replaced by the
    largest subrelations that could still pass.

    Internally derivations are small integers; see ``_Side``.
    """

    def __init__(self, g1: LtssGraph, g2: LtssGraph, limits: Limits, conc_filter: bool = True):
        self.g1, self.g2, self.limits = g1, g2, limits
        self.d1, self.d2 = g1.decls, g2.decls
        self.s1, self.s2 = _Side(g1), _Side(g2)
        self.conc_filter = conc_filter
        self.maximal: dict[tuple[Proc, Proc], list[_Rel]] = {}
        self.empty_reason: dict[tuple[Proc, Proc], str] = {}
        self.reqs: dict = {}

    def _compatible(self, x, y) -> bool:
        (t, u), (v, w) = x, y
        s1, s2 = self.s1, self.s2
        return (bool(s1.successors(t, v)) == bool(s2.successors(u, w))
                and bool(s1.successors(v, t)) == bool(s2.successors(w, u)))

    def _total(self, pairs, en1, en2) -> bool:
        return {t for t, _ in pairs} >= set(en1) and {u for _, u in pairs} >= set(en2)

    def initial(self, p: Proc, q: Proc) -> list[_Rel]:
        """Maximal relations satisfying item 1 (and the concurrency condition, if enabled)."""
        en1, en2 = self.s1.enabled[p], self.s2.enabled[q]
        by1, by2 = defaultdict(list), defaultdict(list)
        for t in en1:
            by1[self.s1.der[t].label].append(t)
        for u in en2:
            by2[self.s2.der[u].label].append(u)
        if set(by1) != set(by2):
            self.empty_reason[(p, q)] = "1"
            return []
        cap = self.limits.max_enabled_per_label
        for lab in by1:
            if len(by1[lab]) > cap or len(by2[lab]) > cap:
                raise ResourceExceeded(
                    f"{len(by1[lab])}x{len(by2[lab])} {lab}-transitions at "
                    f"{show(p)} || {show(q)} (cap {cap})")
        nodes = [(t, u) for lab in sorted(by1) for t in by1[lab] for u in by2[lab]]
        if not self.conc_filter:
            return [_Rel(frozenset(nodes))]
        nodes = [x for x in nodes if self._compatible(x, x)]
        adj = {x: {y for y in nodes if y != x and self._compatible(x, y)} for x in nodes}
        out = []
        for clique in _maximal_cliques(nodes, adj):
            if self._total(clique, en1, en2):
                out.append(_Rel(clique))
                if len(out) > self.limits.max_relations_per_pair:
                    raise ResourceExceeded(
                        f"more than {self.limits.max_relations_per_pair} relations "
                        f"at {show(p)} || {show(q)}")
        if not out:
            self.empty_reason[(p, q)] = "conc"
        return out

    def requirements(self, R: _Rel, v: int, w: int) -> list[tuple[frozenset, frozenset]]:
        key = (R, v, w)
        try:
            return self.reqs[key]
        except KeyError:
            pass
        s1, s2 = self.s1, self.s2
        res = self.reqs[key] = [(s1.successors(t, v), s2.successors(u, w))
                                for t, u in sorted(R.pairs)]
        return res

    def _target(self, vw) -> tuple[Proc, Proc]:
        return (self.s1.target[vw[0]], self.s2.target[vw[1]])

    def _discover(self, root) -> None:
        queue = deque([root])
        if root not in self.maximal:
            self.maximal[root] = self.initial(*root)
        while queue:
            pq = queue.popleft()
            for R in self.maximal[pq]:
                for vw in R.pairs:
                    nxt = self._target(vw)
                    if nxt not in self.maximal:
                        self.maximal[nxt] = self.initial(*nxt)
                        queue.append(nxt)

    def _failure(self, R: _Rel):
        """The first pair of ``R`` with no matching relation at its target, if any.

        Alongside it, for each maximal relation ``R2`` at the target, the set
        of pairs of ``R`` whose requirement ``R2`` does not meet.
        """
        pairs = sorted(R.pairs)
        for vw in pairs:
            reqs = self.requirements(R, *vw)
            items = set()
            blockers = []
            for R2 in self.maximal[self._target(vw)]:
                bad = {}
                for x, (st, su) in zip(pairs, reqs):
                    item = R2.unmet(st, su)
                    if item is not None:
                        bad[x] = item
                if not bad:
                    break
                items.update(bad.values())
                blockers.append(frozenset(bad))
            else:
                return vw, ("|".join(sorted(items)) if items else "2a|2b"), blockers
        return None

    def _refine(self, pq, R: _Rel, vw, blockers) -> list[_Rel]:
        # any viable subrelation of R drops vw or avoids one blocker set
        en1, en2 = self.s1.enabled[pq[0]], self.s2.enabled[pq[1]]
        others = [S.pairs for S in self.maximal[pq] if S != R]
        kids: list[frozenset] = []
        for child in [R.pairs - {vw}] + [R.pairs - b for b in blockers]:
            if not self._total(child, en1, en2):
                continue
            if any(child <= S for S in others + kids):
                continue
            kids = [k for k in kids if not k <= child]
            kids.append(child)
        return [S for S in self.maximal[pq] if S != R] + [_Rel(k) for k in kids]

    def _pairs_out(self, R: _Rel) -> frozenset:
        d1, d2 = self.s1.der, self.s2.der
        return frozenset((d1[t], d2[u]) for t, u in R.pairs)

    def _pair_out(self, vw):
        return None if vw is None else (self.s1.der[vw[0]], self.s2.der[vw[1]])

    def solve(self) -> EpResult:
        root = (self.g1.origin, self.g2.origin)
        self._discover(root)
        trace: list[Pruning] = []
        for pq, rs in self.maximal.items():
            if not rs:
                trace.append(Pruning(pq[0], pq[1], frozenset(), None, self.empty_reason[pq]))
        order = sorted(self.maximal, key=lambda x: (show(x[0]), show(x[1])))
        changed = True
        while changed:
            changed = False
            for pq in order:
                i = 0
                while i < len(self.maximal[pq]):
                    R = self.maximal[pq][i]
                    failure = self._failure(R)
                    if failure is None:
                        i += 1
                        continue
                    trace.append(Pruning(pq[0], pq[1], self._pairs_out(R),
                                         self._pair_out(failure[0]), failure[1]))
                    self.maximal[pq] = self._refine(pq, R, failure[0], failure[2])
                    if len(self.maximal[pq]) > self.limits.max_relations_per_pair:
                        raise ResourceExceeded(
                            f"more than {self.limits.max_relations_per_pair} relations "
                            f"at {show(pq[0])} || {show(pq[1])}")
                    changed = True
        pairs = len(self.maximal)
        if self.maximal[root]:
            w = Witness(frozenset(self._reachable(root)), self.d1, self.d2)
            return EpResult(True, w, [], pairs)
        return EpResult(False, None, _relevant(trace, root), pairs)

    def _reachable(self, root) -> list[EpTriple]:
        seen = {root}
        queue = deque([root])
        out = []
        while queue:
            pq = queue.popleft()
            for R in self.maximal[pq]:
                out.append(EpTriple(pq[0], pq[1], self._pairs_out(R)))
                for vw in sorted(R.pairs):
                    nxt = self._target(vw)
                    if nxt not in seen:
                        seen.add(nxt)
                        queue.append(nxt)
        return out

    @staticmethod
    def matches(reqs, R2: frozenset) -> str | None:
        """None if ``R2`` meets items 2a and 2b for ``reqs``, else the failing item.

        Works on derivation pairs; used by witness validation and path transfer.
        """
        for st, su in reqs:
            for t2 in st:
                if not any((t2, u2) in R2 for u2 in su):
                    return "2a"
            for u2 in su:
                if not any((t2, u2) in R2 for t2 in st):
                    return "2b"
        return None


def _pair_key(x) -> tuple[str, str]:
    return (sort_key(x[0]), sort_key(x[1]))


def _relevant(trace: list[Pruning], root) -> list[Pruning]:
    """Pruning records on the pairs that the root pair depends on, in order."""
    by_pair = defaultdict(list)
    for rec in trace:
        by_pair[(rec.p, rec.q)].append(rec)
    seen = {root}
    queue = deque([root])
    while queue:
        pq = queue.popleft()
        for rec in by_pair[pq]:
            if rec.pair is not None:
                nxt = (rec.pair[0].target, rec.pair[1].target)
                if nxt not in seen:
                    seen.add(nxt)
                    queue.append(nxt)
    return [rec for rec in trace if (rec.p, rec.q) in seen]


def check_ep_bisim(g1: LtssGraph, g2: LtssGraph, limits: Limits | None = None,
                   conc_filter: bool = True) -> EpResult:
    """Decide ep-bisimilarity of the two roots.

    With ``conc_filter`` candidate relations that relate an unaffected pair to
    an affected one are discarded up front.  No ep-bisimulation contains such
    a relation, so the verdict is unchanged; only the failure trace is shorter.

    The witness lists the maximal relations of the fixed point at each pair
    reachable from the roots; every total subrelation of those is also viable.
    """
    return _EpSolver(g1, g2, limits or Limits(), conc_filter).solve()


def dump_trace(trace: list[Pruning]) -> str:
    return "".join(f"{rec}\n" for rec in trace)


# -- witness algebra -------------------------------------------------------

@dataclass
class Violation:
    triple: EpTriple
    item: str
    detail: str

    def __str__(self):
        return f"item {self.item} at {self.triple}: {self.detail}"


def identity_witness(g: LtssGraph) -> Witness:
    triples = {EpTriple(p, p, frozenset((t, t) for t in g.enabled(p))) for p in g.states}
    return Witness(frozenset(triples), g.decls, g.decls)


def _enabled(decls: Declarations, p: Proc) -> tuple[Derivation, ...]:
    from .sos import enabled
    return enabled(p, decls)


def validate_witness(W: Witness) -> Violation | None:
    """The first violated condition, or None if ``W`` is an ep-bisimulation."""
    order = W.sorted()
    for x in order:
        en1, en2 = _enabled(W.left, x.p), _enabled(W.right, x.q)
        for t, u in sorted(x.R, key=lambda r: (sort_key(r[0]), sort_key(r[1]))):
            if t not in en1 or u not in en2:
                return Violation(x, "1", f"{t} ~ {u} is not a pair of enabled transitions")
        left = {t for t, _ in x.R}
        right = {u for _, u in x.R}
        for t in en1:
            if t not in left:
                return Violation(x, "1a", f"{t} is unmatched")
        for u in en2:
            if u not in right:
                return Violation(x, "1b", f"{u} is unmatched")
        for t, u in x.R:
            if t.label != u.label:
                return Violation(x, "1c", f"{t} ~ {u} have different labels")
    index = defaultdict(list)
    for x in order:
        index[(x.p, x.q)].append(x)
    for x in order:
        for v, w in sorted(x.R, key=lambda r: (sort_key(r[0]), sort_key(r[1]))):
            reqs = [(successors(t, v, W.left), successors(u, w, W.right)) for t, u in x.R]
            targets = index.get((v.target, w.target), [])
            items = set()
            for y in targets:
                bad = _EpSolver.matches(reqs, y.R)
                if bad is None:
                    break
                items.add(bad)
            else:
                item = "|".join(sorted(items)) if items else "2"
                return Violation(x, item, f"no matching triple after {v} ~ {w}")
    return None


def _require_valid(W: Witness) -> None:
    bad = validate_witness(W)
    if bad is not None:
        raise NotABisimulation(str(bad))


def invert_witness(W: Witness, check: bool = True) -> Witness:
    if check:
        _require_valid(W)
    triples = {EpTriple(x.q, x.p, frozenset((u, t) for t, u in x.R)) for x in W.triples}
    return Witness(frozenset(triples), W.right, W.left)


def compose_witness(W1: Witness, W2: Witness, check: bool = True) -> Witness:
    if check:
        _require_valid(W1)
        _require_valid(W2)
    by_p = defaultdict(list)
    for y in W2.triples:
        by_p[y.p].append(y)
    triples = set()
    for x in W1.triples:
        for y in by_p.get(x.q, ()):
            right = defaultdict(set)
            for u, v in y.R:
                right[u].add(v)
            R = frozenset((t, v) for t, u in x.R for v in right.get(u, ()))
            triples.add(EpTriple(x.p, y.q, R))
    return Witness(frozenset(triples), W1.left, W2.right)


def union_witness(W1: Witness, W2: Witness) -> Witness:
    return Witness(W1.triples | W2.triples, W1.left, W1.right)


def concurrency_violations(W: Witness) -> Iterator[tuple[EpTriple, tuple, tuple]]:
    """Pairs ``t R u, v R w`` in some triple where ``aconc(t,v)`` and ``aconc(u,w)`` differ."""
    memo1, memo2 = {}, {}

    def aconc(memo, decls, a, b):
        key = (a, b)
        if key not in memo:
            memo[key] = bool(successors(a, b, decls))
        return memo[key]

    for x in W.sorted():
        for (t, u), (v, w) in product(x.R, repeat=2):
            if aconc(memo1, W.left, t, v) != aconc(memo2, W.right, u, w):
                yield x, (t, u), (v, w)


# -- transferring paths ----------------------------------------------------

@dataclass
class Transfer:
    source: Lasso          # the input lasso, unrolled to align with ``target``
    target: Lasso
    relations: list[TransRel]   # R_i for positions 0..len(prefix)+len(cycle)

    def __str__(self):
        return f"{self.source}\n  ~ {self.target}"


def transfer_lasso(W: Witness, pi: Lasso, q0: Proc | None = None) -> Transfer:
    """Mirror ``pi`` through ``W``, choosing the first matching step and triple each time."""
    starts = W.at(pi.start, q0)
    if not starts:
        raise UncoveredState(f"no triple covers {show(pi.start)}")
    index = defaultdict(list)
    for x in W.sorted():
        index[(x.p, x.q)].append(x)
    cur = starts[0]
    n, k = len(pi.prefix), len(pi.cycle)
    steps1, steps2, rels = [], [], [cur.R]
    seen: dict = {}
    i = 0
    while True:
        if i >= n:
            key = ((i - n) % k, cur.q, cur.R)
            if key in seen:
                j = seen[key]
                break
            seen[key] = i
        u = pi.step(i)
        partners = sorted((b for a, b in cur.R if a == u), key=sort_key)
        if not partners:
            raise NotABisimulation(f"{u} is unmatched in {cur}")
        nxt = None
        for u2 in partners:
            reqs = [(successors(t, u, W.left), successors(t2, u2, W.right)) for t, t2 in cur.R]
            for y in index.get((u.target, u2.target), []):
                if _EpSolver.matches(reqs, y.R) is None:
                    nxt = y
                    break
            if nxt is not None:
                break
        if nxt is None:
            raise NotABisimulation(f"no triple continues {cur} after {u}")
        steps1.append(u)
        steps2.append(u2)
        rels.append(nxt.R)
        cur = nxt
        i += 1
    src = Lasso(pi.start, tuple(steps1[:j]), tuple(steps1[j:]))
    tgt = Lasso(starts[0].q, tuple(steps2[:j]), tuple(steps2[j:]))
    return Transfer(src, tgt, rels[:-1])


def check_path_bisim(W: Witness, tr: Transfer) -> str | None:
    """Check items 1-4 of path bisimilarity on one unrolling of ``tr``; None if all hold."""
    triples = set(W.triples)
    s_steps = tr.source.prefix + tr.source.cycle
    t_steps = tr.target.prefix + tr.target.cycle
    if [x.label for x in s_steps] != [x.label for x in t_steps]:
        return "labels differ"
    p, q = tr.source.start, tr.target.start
    for i, (u, u2) in enumerate(zip(s_steps, t_steps)):
        R, R2 = tr.relations[i], tr.relations[(i + 1) if i + 1 < len(tr.relations)
                                              else len(tr.source.prefix)]
        if EpTriple(p, q, R) not in triples:
            return f"item 1 at {i}"
        if (u, u2) not in R:
            return f"item 2 at {i}"
        reqs = [(successors(t, u, W.left), successors(t2, u2, W.right)) for t, t2 in R]
        bad = _EpSolver.matches(reqs, R2)
        if bad is not None:
            return f"item {'3' if bad == '2a' else '4'} at {i}"
        p, q = u.target, u2.target
    return None
