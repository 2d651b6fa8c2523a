import random

import pytest

from abcde_lab.corpus import CorpusConfig, Generator, corpus, random_lasso
from abcde_lab.epbisim import (
    EpTriple, NotABisimulation, ResourceExceeded, Witness, check_ep_bisim, identity_witness,
    validate_witness,
)
from abcde_lab.justness import (
    Just, Unjust, check_b_just, check_b_just_finite, check_justness_preservation,
)
from abcde_lab.ltss import InvalidLasso, Lasso, LimitExceeded, explore
from abcde_lab.syntax import Agent, Choice, parse_label, parse_term


def loop(g, state, lab):
    (t,) = [t for t in g.enabled(state) if str(t.label) == lab]
    return t


@pytest.fixture
def right_lasso(yloop):
    g = explore(parse_term("Yl | x.0", yloop), yloop)
    return g, Lasso(g.origin, (), (loop(g, g.origin, "y"),))


def test_parallel_y_loop_is_unjust(yloop, right_lasso):
    _, pi = right_lasso
    v = check_b_just(pi, [], yloop)
    assert isinstance(v, Unjust)
    assert v.position == 0 and str(v.transition.label) == "x"
    assert [str(x) for x in v.variants] == ["Yl | <x->0>"]


def test_single_component_y_loop_is_just(yloop):
    g = explore(Agent("L"), yloop)
    pi = Lasso(g.origin, (), (loop(g, g.origin, "y"),))
    assert check_b_just(pi, [], yloop).just


def test_breakfast_jam_forever_is_just(breakfast):
    g = explore(Agent("A"), breakfast)
    pi = Lasso(g.origin, (), (loop(g, g.origin, "jam"),))
    assert check_b_just(pi, [], breakfast) == Just()


def test_blocking_x_makes_it_just(yloop, right_lasso):
    _, pi = right_lasso
    assert check_b_just(pi, [parse_label("x", yloop)], yloop).just


def test_prefix_then_cycle(yloop, right_lasso):
    g, _ = right_lasso
    x = loop(g, g.origin, "x")
    after = x.target
    pi = Lasso(g.origin, (x,), (loop(g, after, "y"),))
    assert check_b_just(pi, [], yloop).just


def test_finite_paths(yloop, right_lasso):
    g, _ = right_lasso
    y = loop(g, g.origin, "y")
    x = loop(g, g.origin, "x")
    assert not check_b_just_finite(g.origin, [y, y], [], yloop).just
    assert not check_b_just_finite(g.origin, [x], [], yloop).just  # y still enabled at the end
    with pytest.raises(InvalidLasso):
        check_b_just_finite(g.origin, [x, x], [], yloop)


def test_identity_preserves(yloop, right_lasso):
    g, pi = right_lasso
    res = check_justness_preservation(identity_witness(g), pi, [])
    assert res.ok and not res.left.just and not res.right.just
    assert res.transfer.target == pi


def test_emissions_and_receives_never_oblige(sigcast):
    d = sigcast.decls
    g = explore(parse_term("(b!.0)^s | (s.0 + b?.0)", d), d)
    emit = loop(g, g.origin, "'s")
    # the emission loop never affects the other steps, so they stay pending
    v = check_b_just(Lasso(g.origin, (), (emit,)), [], d)
    assert not v.just and str(v.transition.label) != "'s"


CASES = list(corpus(30, seed=41, config=CorpusConfig(depth=3, state_limit=30)))


@pytest.mark.parametrize("item", CASES, ids=str)
def test_commutativity_preserves_justness(item):
    d = item.decls
    q = Generator(item.index + 100, CorpusConfig(depth=2)).term(d, 2)
    try:
        g1 = explore(Choice(item.term, q), d, 60)
        g2 = explore(Choice(q, item.term), d, 60)
        res = check_ep_bisim(g1, g2)
    except (LimitExceeded, ResourceExceeded):
        pytest.skip("over the caps")
    rng = random.Random(item.index)
    walk = random_lasso(g1, rng)
    if walk is None:
        pytest.skip("no lasso from this root")
    pi = Lasso(g1.origin, tuple(walk[0]), tuple(walk[1]))
    labels = sorted({t.label for t in g1.transitions})
    for B in ([], [l for l in labels if rng.random() < 0.4]):
        out = check_justness_preservation(res.witness, pi, B, g2.origin)
        assert out.ok, str(out)


def test_corrupted_witness_is_refused(yloop):
    # a strong bisimulation dressed up as a witness: the validator refuses it,
    # and transfer cannot continue the lasso, so no false agreement is reported
    g1 = explore(Agent("L"), yloop)
    g2 = explore(parse_term("Yl | x.0", yloop), yloop)
    triples = set()
    for p, q in ((g1.origin, g2.origin), (Agent("L2"), parse_term("Yl | 0", yloop))):
        R = frozenset((t, u) for t in g1.enabled(p) for u in g2.enabled(q) if t.label == u.label)
        triples.add(EpTriple(p, q, R))
    W = Witness(frozenset(triples), yloop, yloop)
    assert validate_witness(W) is not None
    pi = Lasso(g1.origin, (), (loop(g1, g1.origin, "y"),))
    assert check_b_just(pi, [], yloop).just
    with pytest.raises(NotABisimulation):
        check_justness_preservation(W, pi, [], g2.origin)
