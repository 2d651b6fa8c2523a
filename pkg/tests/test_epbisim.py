"""Ep-bisimilarity: examples, a brute-force cross-check, witness algebra, mutations."""

import random
from itertools import chain, combinations

import pytest

from abcde_lab.corpus import CorpusConfig, Generator, corpus, random_lasso
from abcde_lab.epbisim import (
    EpTriple, Limits, NotABisimulation, ResourceExceeded, UncoveredState, Witness,
    check_ep_bisim, check_path_bisim, check_strong_bisim, compose_witness,
    concurrency_violations, dump_trace, dump_witness, identity_witness, invert_witness,
    transfer_lasso, union_witness, validate_witness,
)
from abcde_lab.ltss import LimitExceeded, Lasso, explore, successors
from abcde_lab.syntax import Agent, Choice, Par, Prefix, handshake, parse, parse_term


def graphs(d, a, b, limit=10_000):
    return explore(parse_term(a, d), d, limit), explore(parse_term(b, d), d, limit)


# -- brute force from the definition ------------------------------------------

def _subsets(pairs):
    return chain.from_iterable(combinations(pairs, k) for k in range(len(pairs) + 1))


def brute_force(g1, g2) -> bool:
    """Greatest ep-bisimulation over all item-1 triples, by naive elimination."""
    d1, d2 = g1.decls, g2.decls
    triples = set()
    for p in g1.states:
        for q in g2.states:
            en1, en2 = g1.enabled(p), g2.enabled(q)
            same = [(t, u) for t in en1 for u in en2 if t.label == u.label]
            for R in map(frozenset, _subsets(same)):
                if {t for t, _ in R} == set(en1) and {u for _, u in R} == set(en2):
                    triples.add((p, q, R))

    def ok_2(R, v, w, R2):
        for t, u in R:
            st, su = successors(t, v, d1), successors(u, w, d2)
            if any(not any((t2, u2) in R2 for u2 in su) for t2 in st):
                return False
            if any(not any((t2, u2) in R2 for t2 in st) for u2 in su):
                return False
        return True

    changed = True
    while changed:
        changed = False
        for x in sorted(triples, key=str):
            p, q, R = x
            for v, w in R:
                cands = [y for y in triples if y[0] == v.target and y[1] == w.target]
                if not any(ok_2(R, v, w, y[2]) for y in cands):
                    triples.discard(x)
                    changed = True
                    break
    return any(p == g1.origin and q == g2.origin for p, q, _ in triples)


def _tiny_pairs(n, seed):
    """Pairs of tiny graphs; half are law instances, half unrelated terms."""
    gen = Generator(seed, CorpusConfig(depth=3, agents=1))
    out = []
    while len(out) < n:
        decls = gen.decls()
        p, q = gen.term(decls, 2), gen.term(decls, 2)
        left, right = (Choice(p, q), Choice(q, p)) if len(out) % 2 else (p, q)
        if len(out) % 4 == 3:
            left, right = Par(p, q), Par(q, p)
        try:
            g1, g2 = explore(left, decls, 6), explore(right, decls, 6)
        except LimitExceeded:
            continue
        small = all(len(g.enabled(s)) <= 4 for g in (g1, g2) for s in g.states)
        if small:
            out.append((g1, g2))
    return out


def _expansion_pairs(n, seed):
    """``a.P | c.Q`` against its interleaving expansion: strongly bisimilar by construction."""
    d = parse("handshake a, c, d; A0 := a.A0;").decls
    gen = Generator(seed, CorpusConfig(agents=0, broadcasts=False, signals=False))
    out = []
    while len(out) < n:
        P, Q = gen.sequential(2, ["A0"], False), gen.sequential(2, ["A0"], False)
        left = Prefix(handshake("a"), P)
        right = Prefix(handshake("c"), Q)
        par = Par(left, right)
        expanded = Choice(Prefix(handshake("a"), Par(P, right)),
                          Prefix(handshake("c"), Par(left, Q)))
        try:
            g1, g2 = explore(par, d, 8), explore(expanded, d, 8)
        except LimitExceeded:
            continue
        if all(len(g.enabled(s)) <= 4 for g in (g1, g2) for s in g.states):
            out.append((g1, g2))
    return out


TINY = _tiny_pairs(60, seed=17) + _expansion_pairs(20, seed=3)


@pytest.mark.parametrize("k", range(len(TINY)))
def test_solver_agrees_with_brute_force(k):
    g1, g2 = TINY[k]
    res = check_ep_bisim(g1, g2)
    assert res.equivalent == brute_force(g1, g2)
    assert check_ep_bisim(g1, g2, conc_filter=False).equivalent == res.equivalent
    if res.equivalent:
        assert validate_witness(res.witness) is None


def test_brute_force_sample_covers_all_classes():
    kinds = {(check_ep_bisim(g1, g2).equivalent, check_strong_bisim(g1, g2).equivalent)
             for g1, g2 in TINY}
    assert kinds == {(True, True), (False, True), (False, False)}


# -- examples -----------------------------------------------------------------

def test_yloop_strong_but_not_ep(yloop):
    g1, g2 = explore(Agent("L"), yloop), explore(parse_term("Yl | x.0", yloop), yloop)
    assert check_strong_bisim(g1, g2).equivalent
    res = check_ep_bisim(g1, g2)
    assert not res.equivalent and res.witness is None
    assert res.trace and "L || Yl | x.0" in dump_trace(res.trace)
    assert not brute_force(g1, g2)


def test_yloop_trace_without_filter_names_item_2(yloop):
    g1, g2 = explore(Agent("L"), yloop), explore(parse_term("Yl | x.0", yloop), yloop)
    res = check_ep_bisim(g1, g2, conc_filter=False)
    assert any(rec.item.startswith("2") for rec in res.trace)


def test_strong_inequivalence():
    d = parse("handshake a;").decls
    assert not check_strong_bisim(*graphs(d, "a.0", "a.a.0")).equivalent


def test_reflexivity_and_identity_witness(yloop):
    g = explore(parse_term("Yl | x.0", yloop), yloop)
    res = check_ep_bisim(g, g)
    assert res.equivalent
    W = identity_witness(g)
    assert validate_witness(W) is None
    assert all(x.p == x.q for x in W.triples)


def test_sum_associativity():
    d = parse("handshake a, c, d;").decls
    g1, g2 = graphs(d, "(a.0 + c.0) + d.0", "a.0 + (c.0 + d.0)")
    res = check_ep_bisim(g1, g2)
    assert res.equivalent and validate_witness(res.witness) is None


def test_interleaving_is_not_parallel():
    d = parse("handshake a, c;").decls
    g1, g2 = graphs(d, "a.0 | c.0", "a.c.0 + c.a.0")
    assert check_strong_bisim(g1, g2).equivalent
    assert not check_ep_bisim(g1, g2).equivalent


def test_broadcast_commutativity(sigcast):
    d = sigcast.decls
    g1, g2 = graphs(d, "b?.0 | (b!.0 + s.0)", "(b!.0 + s.0) | b?.0")
    res = check_ep_bisim(g1, g2)
    assert res.equivalent
    assert next(concurrency_violations(res.witness), None) is None


def test_resource_cap():
    d = parse("handshake a;").decls
    g1, g2 = graphs(d, "a.0 + a.0 | a.0 + a.0", "a.0 | a.0 + a.0 + a.0")
    with pytest.raises(ResourceExceeded):
        check_ep_bisim(g1, g2, Limits(max_enabled_per_label=1))


# -- witness algebra ------------------------------------------------------------

def _law_witness():
    d = parse("handshake a, c; broadcast b;").decls
    g1, g2 = graphs(d, "a.(c.0 | b?.0) + b!.0", "b!.0 + a.(b?.0 | c.0)")
    res = check_ep_bisim(g1, g2)
    assert res.equivalent
    return res.witness, g1, g2


def test_invert_twice_is_identity():
    W, _, _ = _law_witness()
    inv = invert_witness(W)
    assert validate_witness(inv) is None
    assert invert_witness(inv) == W


def test_compose_with_identity():
    W, g1, g2 = _law_witness()
    assert compose_witness(W, identity_witness(g2)) == W
    assert compose_witness(identity_witness(g1), W) == W


def test_compose_chain_validates():
    d = parse("handshake a, c, d;").decls
    g1 = explore(parse_term("(a.0 + c.0) + d.0", d), d)
    g2 = explore(parse_term("a.0 + (c.0 + d.0)", d), d)
    g3 = explore(parse_term("a.0 + (d.0 + c.0)", d), d)
    W12 = check_ep_bisim(g1, g2).witness
    W23 = check_ep_bisim(g2, g3).witness
    W13 = compose_witness(W12, W23)
    assert validate_witness(W13) is None
    assert W13.at(g1.origin, g3.origin)


def test_union_validates():
    W, _, _ = _law_witness()
    inv = invert_witness(W)
    both = union_witness(compose_witness(W, inv), compose_witness(W, inv))
    assert validate_witness(both) is None


def test_invalid_input_rejected():
    W, _, _ = _law_witness()
    x = W.sorted()[0]
    broken = Witness(W.triples - {x} | {EpTriple(x.p, x.q, frozenset())}, W.left, W.right)
    with pytest.raises(NotABisimulation):
        invert_witness(broken)


def test_dump_witness_is_stable():
    W, _, _ = _law_witness()
    assert dump_witness(W) == dump_witness(Witness(frozenset(W.triples), W.left, W.right))
    assert dump_witness(W).startswith("witness ")


# -- mutations ----------------------------------------------------------------------

def _mutants(W):
    for x in W.sorted():
        left = {}
        for t, u in x.R:
            left.setdefault(t, []).append((t, u))
        for t, pairs in left.items():
            if len(pairs) == 1:
                R = x.R - {pairs[0]}
                yield Witness(W.triples - {x} | {EpTriple(x.p, x.q, R)}, W.left, W.right)


def test_deleting_a_pair_breaks_item_1():
    W, _, _ = _law_witness()
    mutants = list(_mutants(W))
    assert mutants
    for M in mutants:
        bad = validate_witness(M)
        assert bad is not None and bad.item in ("1a", "1b")


def test_mismatched_successor_relation_breaks_item_2a():
    d = parse("handshake x, y; Yl := y.Yl;").decls
    g = explore(parse_term("Yl | Yl | x.0", d), d)
    p0, = [s for s in g.states if s == g.origin]
    (p1,) = [s for s in g.states if s != p0]
    ident = {(t, t) for t in g.enabled(p0)}
    y1, y2 = [t for t in g.enabled(p1) if str(t.label) == "y"]
    swap = {(y1, y2), (y2, y1)}
    W = Witness(frozenset({EpTriple(p0, p0, frozenset(ident)), EpTriple(p1, p1, frozenset(swap))}),
                d, d)
    bad = validate_witness(W)
    assert bad is not None and bad.item == "2a" and bad.triple.p == p0
    assert validate_witness(Witness(frozenset({EpTriple(p1, p1, frozenset(swap))}), d, d)) is None


# -- lasso transfer ---------------------------------------------------------------

def test_identity_transfer(yloop):
    g = explore(parse_term("Yl | x.0", yloop), yloop)
    y = [t for t in g.enabled(g.origin) if str(t.label) == "y"]
    pi = Lasso(g.origin, (), tuple(y))
    tr = transfer_lasso(identity_witness(g), pi)
    assert tr.target == pi
    assert all(R == tr.relations[0] for R in tr.relations)
    assert check_path_bisim(identity_witness(g), tr) is None


def test_uncovered_start(yloop):
    g = explore(parse_term("Yl | x.0", yloop), yloop)
    W = identity_witness(g)
    y = [t for t in g.enabled(g.origin) if str(t.label) == "y"]
    W2 = Witness(frozenset(x for x in W.triples if x.p != g.origin), W.left, W.right)
    with pytest.raises(UncoveredState):
        transfer_lasso(W2, Lasso(g.origin, (), tuple(y)))


LAW_ITEMS = list(corpus(20, seed=31, config=CorpusConfig(depth=3, state_limit=25)))


@pytest.mark.parametrize("item", LAW_ITEMS, ids=str)
def test_commutativity_transfers_lassos(item):
    q = Generator(item.index, CorpusConfig(depth=2)).term(item.decls, 2)
    try:
        g1 = explore(Choice(item.term, q), item.decls, 60)
        g2 = explore(Choice(q, item.term), item.decls, 60)
        res = check_ep_bisim(g1, g2)
    except (LimitExceeded, ResourceExceeded):
        pytest.skip("over the caps")
    assert res.equivalent
    W = res.witness
    assert validate_witness(W) is None
    assert check_strong_bisim(g1, g2).equivalent
    walk = random_lasso(g1, random.Random(item.index))
    if walk is None:
        return
    pi = Lasso(g1.origin, tuple(walk[0]), tuple(walk[1]))
    tr = transfer_lasso(W, pi, g2.origin)
    assert check_path_bisim(W, tr) is None
    assert tr.source.labels() == tr.target.labels()
