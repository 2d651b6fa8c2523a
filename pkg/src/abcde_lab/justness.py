"""B-justness of lasso-shaped infinite paths and finite paths."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .epbisim import Transfer, Witness, transfer_lasso
from .ltss import InvalidLasso, Lasso, _succ, check_path, tr_bullet
from .sos import Derivation, enabled, sort_key
from .syntax import Declarations, Label, Proc, show


@dataclass
class Just:
    def __str__(self):
        return "just"

    @property
    def just(self) -> bool:
        return True


@dataclass
class Unjust:
    transition: Derivation
    position: int
    variants: frozenset

    @property
    def just(self) -> bool:
        return False

    def __str__(self):
        vs = ", ".join(sorted(map(str, self.variants)))
        return (f"unjust at position {self.position}: {self.transition} "
                f"(label {self.transition.label}) survives as {{{vs}}}")


Verdict = Just | Unjust


def _obligations(p: Proc, blocking: frozenset, decls: Declarations):
    for t in enabled(p, decls):
        if t.label not in blocking and tr_bullet(t, decls):
            yield t


def _step(vs: frozenset, u: Derivation, decls: Declarations) -> frozenset:
    out = set()
    for v in vs:
        out |= _succ(v, u, decls)
    return frozenset(out)


def check_b_just(pi: Lasso, blocking: Iterable[Label], decls: Declarations) -> Verdict:
    """Every non-blocking transition in Tr• enabled along ``pi`` is eventually affected.

    Suffixes starting in the prefix or in the first pass through the cycle
    cover all suffixes.  For each obligation the variant set is pushed along
    the path; once in the cycle a repeated (cycle position, variant set) pair
    means the variant set stays nonempty forever.
    """
    blocking = frozenset(blocking)
    n, k = len(pi.prefix), len(pi.cycle)
    for i, p in enumerate(pi.states()):
        for t in _obligations(p, blocking, decls):
            vs = frozenset([t])
            seen = set()
            j = i
            while vs:
                if j >= n:
                    key = ((j - n) % k, vs)
                    if key in seen:
                        return Unjust(t, i, vs)
                    seen.add(key)
                vs = _step(vs, pi.step(j), decls)
                j += 1
    return Just()


def check_b_just_finite(start: Proc, path: Sequence[Derivation], blocking: Iterable[Label],
                        decls: Declarations) -> Verdict:
    """Justness of a finite path: every obligation must be affected before the end."""
    try:
        check_path(start, path)
    except ValueError as e:
        raise InvalidLasso(str(e)) from None
    blocking = frozenset(blocking)
    states = [start] + [u.target for u in path]
    for i, p in enumerate(states):
        for t in _obligations(p, blocking, decls):
            vs = frozenset([t])
            for u in path[i:]:
                vs = _step(vs, u, decls)
                if not vs:
                    break
            if vs:
                return Unjust(t, i, vs)
    return Just()


@dataclass
class Preservation:
    ok: bool
    transfer: Transfer
    left: Verdict
    right: Verdict

    def __str__(self):
        head = "ok" if self.ok else "counterexample"
        return f"{head}: {self.left} / {self.right}"


def check_justness_preservation(W: Witness, pi: Lasso, blocking: Iterable[Label],
                                q0: Proc | None = None) -> Preservation:
    blocking = frozenset(blocking)
    tr = transfer_lasso(W, pi, q0)
    left = check_b_just(pi, blocking, W.left)
    right = check_b_just(tr.target, blocking, W.right)
    return Preservation(left.just == right.just, tr, left, right)
