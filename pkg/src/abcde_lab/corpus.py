"""Seeded generator of random guarded ABCdE terms.

Agent bodies are sequential (prefix, choice, signalling and agent calls only)
so every generated term has a finite state space.  Parallel composition,
restriction and relabelling appear only outside recursion.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Iterator

from .ltss import LimitExceeded, LtssGraph, explore
from .syntax import (
    NIL, TAU_LABEL, Agent, Choice, Declarations, Par, Prefix, Proc, Relabel,
    Relabelling, Restrict, Signalling, co_handshake, handshake, read, recv,
    send, show,
)

HANDSHAKES = ("a", "c", "d")
BROADCAST = "b"
SIGNAL = "s"


@dataclass
class CorpusConfig:
    depth: int = 5
    agents: int = 2
    state_limit: int = 150
    broadcasts: bool = True
    signals: bool = True


@dataclass
class CorpusItem:
    index: int
    decls: Declarations
    term: Proc
    graph: LtssGraph = field(repr=False)

    def __str__(self):
        return f"#{self.index} {show(self.term)}"


class Generator:
    def __init__(self, seed: int, config: CorpusConfig | None = None):
        self.rng = random.Random(seed)
        self.cfg = config or CorpusConfig()

    def actions(self):
        acts = [handshake(c) for c in HANDSHAKES] + [co_handshake(c) for c in HANDSHAKES]
        acts.append(TAU_LABEL)
        if self.cfg.broadcasts:
            acts += [send(BROADCAST), recv(BROADCAST), recv(BROADCAST)]
        if self.cfg.signals:
            acts.append(read(SIGNAL))
        return acts

    def decls(self) -> Declarations:
        names = [f"A{i}" for i in range(self.rng.randint(0, self.cfg.agents))]
        proto = Declarations(frozenset(HANDSHAKES),
                             frozenset([BROADCAST]) if self.cfg.broadcasts else frozenset(),
                             frozenset([SIGNAL]) if self.cfg.signals else frozenset(), {})
        bodies = {n: self.sequential(3, names, guarded=True) for n in names}
        return Declarations(proto.handshakes, proto.broadcasts, proto.signals, bodies)

    def prefix(self, body: Proc) -> Proc:
        return Prefix(self.rng.choice(self.actions()), body)

    def sequential(self, depth: int, agents, guarded: bool) -> Proc:
        r = self.rng.random()
        if depth <= 0 or r < 0.15:
            if agents and not guarded and self.rng.random() < 0.6:
                return Agent(self.rng.choice(agents))
            return NIL
        if r < 0.6:
            return self.prefix(self.sequential(depth - 1, agents, False))
        if r < 0.88:
            return Choice(self.sequential(depth - 1, agents, guarded),
                          self.sequential(depth - 1, agents, guarded))
        if self.cfg.signals and r > 0.94:
            return Signalling(self.sequential(depth - 1, agents, guarded), SIGNAL)
        return self.prefix(self.sequential(depth - 1, agents, False))

    def relabelling(self) -> Relabelling:
        perm = list(HANDSHAKES)
        self.rng.shuffle(perm)
        return Relabelling.of(dict(zip(HANDSHAKES, perm)))

    def restriction(self) -> frozenset:
        pool = list(HANDSHAKES) + ([SIGNAL] if self.cfg.signals else [])
        k = self.rng.randint(1, 2)
        return frozenset(self.rng.sample(pool, k))

    def term(self, decls: Declarations, depth: int | None = None) -> Proc:
        depth = self.cfg.depth if depth is None else depth
        agents = sorted(decls.agents)
        return self._term(depth, agents)

    def _term(self, depth: int, agents) -> Proc:
        if depth <= 1:
            return self.sequential(1, agents, False)
        r = self.rng.random()
        if r < 0.30:
            return Par(self._term(depth - 1, agents), self._term(depth - 1, agents))
        if r < 0.55:
            return Choice(self._term(depth - 1, agents), self._term(depth - 1, agents))
        if r < 0.75:
            return self.prefix(self._term(depth - 1, agents))
        if r < 0.82:
            return Restrict(self._term(depth - 1, agents), self.restriction())
        if r < 0.88:
            return Relabel(self._term(depth - 1, agents), self.relabelling())
        if r < 0.94 and self.cfg.signals:
            return Signalling(self._term(depth - 1, agents), SIGNAL)
        return self.sequential(depth - 1, agents, False)


def corpus(n: int, seed: int, config: CorpusConfig | None = None) -> Iterator[CorpusItem]:
    """``n`` random terms whose state spaces fit in ``config.state_limit``."""
    gen = Generator(seed, config)
    made = 0
    while made < n:
        decls = gen.decls()
        p = gen.term(decls)
        try:
            g = explore(p, decls, gen.cfg.state_limit)
        except LimitExceeded:
            continue
        yield CorpusItem(made, decls, p, g)
        made += 1


def term_family(gen: Generator, decls: Declarations, k: int, depth: int,
                state_limit: int) -> list[Proc] | None:
    """``k`` terms over shared declarations, each within the state limit."""
    out = []
    for _ in range(k):
        p = gen.term(decls, depth)
        try:
            explore(p, decls, state_limit)
        except LimitExceeded:
            return None
        out.append(p)
    return out


def random_lasso(g: LtssGraph, rng: random.Random, max_prefix: int = 4, max_steps: int = 40):
    """A random walk from the root until a state repeats; returns (prefix, cycle) or None."""
    path = []
    seen = {g.origin: 0}
    state = g.origin
    for _ in range(max_steps):
        en = g.enabled(state)
        if not en:
            return None
        t = rng.choice(en)
        path.append(t)
        state = t.target
        if state in seen:
            i = seen[state]
            return path[:i], path[i:]
        if len(path) > max_prefix + 8:
            return None
        seen[state] = len(path)
    return None
