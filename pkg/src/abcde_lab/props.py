"""Property sweeps over generated corpora, shared by the CLI and the test-suite."""

from __future__ import annotations

import random
import time
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Iterable, Iterator

from .corpus import (
    HANDSHAKES, SIGNAL, CorpusConfig, CorpusItem, Generator, corpus, random_lasso,
)
from .epbisim import (
    Limits, ResourceExceeded, Witness, check_ep_bisim, check_path_bisim,
    check_strong_bisim, compose_witness, concurrency_violations, invert_witness,
    transfer_lasso, validate_witness,
)
from .justness import check_justness_preservation
from .ltss import LimitExceeded, Lasso, LtssGraph, explore, successors
from .sos import sort_key
from .synchrons import (
    check_target_synchrons, p_complete, show_synchrons, ssleadsto,
    synchrons_of_process, synchrons_of_transition,
)
from .syntax import (
    Choice, Declarations, Par, Prefix, Proc, Relabel, Restrict, Signalling, show,
)


@dataclass
class Check:
    name: str
    passed: int = 0
    failures: list[str] = field(default_factory=list)
    skipped: int = 0
    seconds: float = 0.0
    instances: int = 0      # fully decided families/bases, where that applies

    @property
    def ok(self) -> bool:
        return not self.failures

    def fail(self, msg: str) -> None:
        self.failures.append(msg)

    def summary(self, timing: bool = True) -> str:
        status = "PASS" if self.ok else "FAIL"
        extra = f", {self.skipped} skipped" if self.skipped else ""
        if self.instances:
            extra += f", {self.instances} complete instances"
        clock = f" ({self.seconds:.1f}s)" if timing else ""
        return f"{status} {self.name}: {self.passed} checked, {len(self.failures)} failed{extra}{clock}"


class _timed:
    def __init__(self, check: Check):
        self.check = check

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self.check

    def __exit__(self, *exc):
        self.check.seconds += time.perf_counter() - self.t0
        return False


# -- synchron oracle -------------------------------------------------------

def oracle_on_graph(item_name: str, g: LtssGraph, succ: Check, target: Check,
                    complete: Check | None, max_synchrons: int = 12) -> None:
    d = g.decls
    for p in g.states:
        en = g.enabled(p)
        with _timed(succ):
            for t in en:
                for u in en:
                    a, b = successors(t, u, d), ssleadsto(t, u, d)
                    if a == b:
                        succ.passed += 1
                    else:
                        succ.fail(f"{item_name}: {t} after {u}: "
                                  f"{sorted(map(sort_key, a))} vs {sorted(map(sort_key, b))}")
        with _timed(target):
            for w in en:
                if check_target_synchrons(w, d).ok:
                    target.passed += 1
                else:
                    target.fail(f"{item_name}: target synchrons of {w}")
        if complete is None:
            continue
        with _timed(complete):
            sp = sorted(synchrons_of_process(p, d), key=str)
            if len(sp) > max_synchrons:
                complete.skipped += 1
                continue
            real = {synchrons_of_transition(t) for t in en}
            for k in range(len(sp) + 1):
                for sigma in combinations(sp, k):
                    sigma = frozenset(sigma)
                    if p_complete(sigma, p, d) == (sigma in real):
                        complete.passed += 1
                    else:
                        complete.fail(f"{item_name}: {show(p)} {show_synchrons(sigma)}")


def oracle_sweep(items: Iterable[CorpusItem], with_complete: bool = True
                 ) -> tuple[Check, Check, Check]:
    succ = Check("successors = possible successors")
    target = Check("target synchrons")
    complete = Check("P-completeness")
    for item in items:
        oracle_on_graph(str(item), item.graph, succ, target, complete if with_complete else None)
    return succ, target, complete


# -- algebraic laws --------------------------------------------------------

@dataclass
class EpCase:
    name: str
    left: Proc
    right: Proc
    decls: Declarations
    g1: LtssGraph | None = None
    g2: LtssGraph | None = None
    witness: Witness | None = None


def _graphs(case: EpCase, state_limit: int) -> None:
    case.g1 = explore(case.left, case.decls, state_limit)
    case.g2 = explore(case.right, case.decls, state_limit)


LAWS: dict[str, Callable[[Proc, Proc, Proc], tuple[Proc, Proc]]] = {
    "sum-comm": lambda p, q, r: (Choice(p, q), Choice(q, p)),
    "sum-assoc": lambda p, q, r: (Choice(Choice(p, q), r), Choice(p, Choice(q, r))),
    "par-comm": lambda p, q, r: (Par(p, q), Par(q, p)),
    "par-assoc": lambda p, q, r: (Par(Par(p, q), r), Par(p, Par(q, r))),
}


@dataclass
class SweepConfig:
    seed: int = 11
    pairs: int = 50
    depth: int = 3
    state_limit: int = 60
    limits: Limits = field(default_factory=Limits)


def law_families(cfg: SweepConfig) -> Iterator[tuple[str, Declarations, Proc, Proc, Proc]]:
    """An endless stream of term families ``(P, Q, R)`` over shared declarations."""
    gen = Generator(cfg.seed, CorpusConfig(depth=cfg.depth, agents=1))
    k = 0
    while True:
        decls = gen.decls()
        fam = [gen.term(decls, cfg.depth) for _ in range(3)]
        yield f"family{k}", decls, *fam
        k += 1


def _ep(case: EpCase, cfg: SweepConfig, check: Check, equivalent_expected: bool = True) -> bool | None:
    """True/False for the verdict matching or not; None when a cap was hit."""
    try:
        _graphs(case, cfg.state_limit)
        res = check_ep_bisim(case.g1, case.g2, cfg.limits)
    except (ResourceExceeded, LimitExceeded):
        check.skipped += 1
        return None
    if res.equivalent == equivalent_expected:
        check.passed += 1
        case.witness = res.witness
        return True
    check.fail(f"{case.name}: {show(case.left)} vs {show(case.right)} -> {res}")
    return False


def law_sweep(cfg: SweepConfig, max_families: int | None = None) -> tuple[Check, list[EpCase]]:
    """Commutativity and associativity of + and | up to ep-bisimilarity.

    Families are drawn until ``cfg.pairs`` of them have all four laws decided
    within the caps, or ``max_families`` have been tried.
    """
    check = Check("commutativity/associativity")
    good: list[EpCase] = []
    max_families = 4 * cfg.pairs if max_families is None else max_families
    for tried, (name, decls, p, q, r) in enumerate(law_families(cfg)):
        if check.instances >= cfg.pairs or tried >= max_families:
            break
        outcomes = []
        for law, mk in LAWS.items():
            left, right = mk(p, q, r)
            case = EpCase(f"{name}/{law}", left, right, decls)
            with _timed(check):
                ok = _ep(case, cfg, check)
            outcomes.append(ok)
            if ok:
                good.append(case)
        if all(o is not None for o in outcomes):
            check.instances += 1
    return check, good


def contexts(rng: random.Random, gen: Generator, decls: Declarations
             ) -> list[tuple[str, Callable[[Proc], Proc]]]:
    alpha = rng.choice(gen.actions())
    other = gen.term(decls, 2)
    names = gen.restriction()
    f = gen.relabelling()
    return [
        ("prefix", lambda p: Prefix(alpha, p)),
        ("sum", lambda p: Choice(p, other)),
        ("par", lambda p: Par(p, other)),
        ("restrict", lambda p: Restrict(p, names)),
        ("relabel", lambda p: Relabel(p, f)),
        ("signal", lambda p: Signalling(p, SIGNAL)),
    ]


def congruence_sweep(cases: list[EpCase], cfg: SweepConfig, want: int | None = None
                     ) -> tuple[Check, list[EpCase]]:
    """Each one-level context preserves the equivalent verdict.

    Runs over base pairs until ``want`` of them have all six contexts decided.
    """
    check = Check("congruence")
    want = cfg.pairs if want is None else want
    rng = random.Random(cfg.seed + 1)
    gen = Generator(cfg.seed + 2, CorpusConfig(depth=2, agents=0))
    produced: list[EpCase] = []
    for base in cases:
        if check.instances >= want:
            break
        outcomes = []
        for cname, ctx in contexts(rng, gen, base.decls):
            case = EpCase(f"{base.name}/{cname}", ctx(base.left), ctx(base.right), base.decls)
            with _timed(check):
                ok = _ep(case, cfg, check)
            outcomes.append(ok)
            if ok:
                produced.append(case)
        if all(o is not None for o in outcomes):
            check.instances += 1
    return check, produced


ESCALATED = Limits(max_enabled_per_label=16, max_relations_per_pair=100_000)


def equivalence_laws(items: Iterable[CorpusItem], cases: list[EpCase], cfg: SweepConfig,
                     max_witnesses: int = 60, escalate: Limits | None = ESCALATED) -> Check:
    """Reflexivity on corpus terms; inversion and composition of produced witnesses.

    A term that hits the caps is retried once under ``escalate``.
    Witness algebra is exercised on the first ``max_witnesses`` cases only,
    since validating a composed witness is quadratic in its size.
    """
    check = Check("equivalence laws")
    with _timed(check):
        for item in items:
            res = None
            for limits in (cfg.limits, escalate):
                if limits is None:
                    break
                try:
                    res = check_ep_bisim(item.graph, item.graph, limits)
                    break
                except ResourceExceeded:
                    continue
            if res is None:
                check.skipped += 1
                continue
            if res.equivalent:
                check.passed += 1
            else:
                check.fail(f"{item}: not ep-bisimilar to itself")
        for case in cases[:max_witnesses]:
            W = case.witness
            inv = invert_witness(W, check=False)
            for name, cand in (("inverse", inv), ("compose", compose_witness(W, inv, check=False))):
                bad = validate_witness(cand)
                if bad is None:
                    check.passed += 1
                else:
                    check.fail(f"{case.name}: {name}: {bad}")
    return check


def respect_and_refinement(cases: list[EpCase]) -> tuple[Check, Check]:
    conc = Check("concurrency respect")
    refine = Check("refinement")
    for case in cases:
        with _timed(conc):
            viol = next(concurrency_violations(case.witness), None)
            if viol is None:
                conc.passed += 1
            else:
                conc.fail(f"{case.name}: {viol[0]}")
        with _timed(refine):
            if check_strong_bisim(case.g1, case.g2).equivalent:
                refine.passed += 1
            else:
                refine.fail(f"{case.name}: ep-equivalent but not strongly equivalent")
    return conc, refine


def justness_sweep(cases: list[EpCase], seed: int = 5, want: int = 25) -> Check:
    """Transfer random lassos through witnesses and compare justness verdicts."""
    check = Check("justness preservation")
    rng = random.Random(seed)
    for case in cases:
        if check.passed + len(check.failures) >= want:
            break
        with _timed(check):
            walk = random_lasso(case.g1, rng)
            if walk is None:
                check.skipped += 1
                continue
            pi = Lasso(case.g1.origin, tuple(walk[0]), tuple(walk[1]))
            labels = sorted({t.label for t in case.g1.transitions})
            blocking = [l for l in labels if rng.random() < 0.3]
            for B in ([], blocking):
                res = check_justness_preservation(case.witness, pi, B, case.g2.origin)
                bad = check_path_bisim(case.witness, res.transfer)
                if res.ok and bad is None:
                    check.passed += 1
                else:
                    check.fail(f"{case.name}: {res} {bad or ''}")
    return check
