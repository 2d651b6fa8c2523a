import pytest
from hypothesis import strategies as st

from abcde_lab.corpus import BROADCAST, HANDSHAKES, SIGNAL
from abcde_lab.syntax import (
    NIL, TAU_LABEL, Agent, Choice, Declarations, Par, Prefix, Relabel, Relabelling, Restrict,
    Signalling, co_handshake, handshake, parse, read, recv, send,
)

YLOOP = "handshake x, y; L := y.L + x.L2; L2 := y.L2; Yl := y.Yl;"
BREAKFAST = "handshake jam, bacon; A := jam.A + bacon.A;"
SIGNAL_BROADCAST = "broadcast b; signal s; P := (b!.0)^s | (s.0 + b?.0);"

DECLS = Declarations(frozenset(HANDSHAKES), frozenset([BROADCAST]), frozenset([SIGNAL]),
                     {"A0": Prefix(handshake("a"), Agent("A0"))})

ACTIONS = ([handshake(c) for c in HANDSHAKES] + [co_handshake(c) for c in HANDSHAKES]
           + [TAU_LABEL, send(BROADCAST), recv(BROADCAST), read(SIGNAL)])

actions = st.sampled_from(ACTIONS)
relabellings = st.permutations(list(HANDSHAKES)).map(
    lambda perm: Relabelling.of(dict(zip(HANDSHAKES, perm))))
restrictions = st.sets(st.sampled_from(list(HANDSHAKES) + [SIGNAL]), min_size=1, max_size=2
                       ).map(frozenset)


def _extend(children):
    return st.one_of(
        st.builds(Prefix, actions, children),
        st.builds(Choice, children, children),
        st.builds(Par, children, children),
        st.builds(Restrict, children, restrictions),
        st.builds(Relabel, children, relabellings),
        st.builds(Signalling, children, st.just(SIGNAL)),
    )


# terms over DECLS; A0 is guarded so every term has a finite state space
terms = st.recursive(st.sampled_from([NIL, Agent("A0")]), _extend, max_leaves=6)


@pytest.fixture
def yloop():
    return parse(YLOOP).decls


@pytest.fixture
def breakfast():
    return parse(BREAKFAST).decls


@pytest.fixture
def sigcast():
    return parse(SIGNAL_BROADCAST)


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
