"""Command-line front end: ``abcde-lab <command> ...``.

Exit codes: 0 success / equivalent / just, 1 negative verdict or failed
check, 2 resource cap hit, 64 usage error, 65 input does not parse or is
not well formed.

Limits come from built-in defaults, then ``ABCDE_LAB_LIMITS`` (for example
``state_limit=500,max_relations_per_pair=1000``), then command-line flags.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, fields
from typing import Sequence

from . import __version__
from .corpus import CorpusConfig, corpus
from .epbisim import (
    Limits, ResourceExceeded, check_ep_bisim, check_strong_bisim, dump_trace, dump_witness,
)
from .justness import check_b_just
from .ltss import (
    InvalidLasso, Lasso, LimitExceeded, LtssGraph, aconc, dump_dot, dump_text, explore, successors,
)
from .props import (
    Check, SweepConfig, congruence_sweep, equivalence_laws, justness_sweep, law_sweep,
    oracle_on_graph, oracle_sweep, respect_and_refinement,
)
from .sos import UnguardedRecursionError, enabled, sort_key
from .syntax import (
    Declarations, ParseError, Proc, SyntaxError_, check_guarded, parse, parse_label, parse_term,
    show,
)

EXIT_OK, EXIT_NEGATIVE, EXIT_RESOURCE, EXIT_USAGE, EXIT_PARSE = 0, 1, 2, 64, 65
ENV_LIMITS = "ABCDE_LAB_LIMITS"


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    state_limit: int = 10_000
    max_enabled_per_label: int = 6
    max_relations_per_pair: int = 20_000
    format: str = "text"
    seed: int = 7

    def __post_init__(self):
        for name in ("state_limit", "max_enabled_per_label", "max_relations_per_pair"):
            if getattr(self, name) <= 0:
                raise UsageError(f"{name} must be positive")
        if self.format not in ("text", "structured", "dot"):
            raise UsageError(f"unknown format {self.format!r}")

    @property
    def limits(self) -> Limits:
        return Limits(self.max_enabled_per_label, self.max_relations_per_pair)

    @classmethod
    def from_env(cls, value: str | None) -> dict:
        """Parse ``key=value,key=value`` overrides for the three counts."""
        if not value:
            return {}
        allowed = {"state_limit", "max_enabled_per_label", "max_relations_per_pair"}
        out = {}
        for part in value.split(","):
            key, sep, num = part.partition("=")
            key = key.strip()
            if not sep or key not in allowed:
                raise UsageError(f"{ENV_LIMITS}: cannot use {part!r}")
            try:
                out[key] = int(num)
            except ValueError:
                raise UsageError(f"{ENV_LIMITS}: {key} needs an integer") from None
        return out


def _config(args) -> RunConfig:
    kw = RunConfig.from_env(os.environ.get(ENV_LIMITS))
    for f in fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            kw[f.name] = v
    return RunConfig(**kw)


# -- output ----------------------------------------------------------------

class Out:
    """Collects lines; ``record`` prints ``key=value`` pairs in structured mode."""

    def __init__(self, fmt: str):
        self.fmt = fmt
        self.lines: list[str] = []

    def text(self, line: str = "") -> None:
        self.lines.append(line)

    def record(self, kind: str, **fields_) -> None:
        if self.fmt == "structured":
            body = " ".join(f"{k}={_quote(v)}" for k, v in sorted(fields_.items()))
            self.lines.append(f"{kind} {body}".rstrip())
        else:
            head = fields_.pop("value", None)
            body = ", ".join(f"{k} {v}" for k, v in fields_.items())
            line = kind if head is None else f"{kind}: {head}"
            self.lines.append(f"{line} ({body})" if body else line)

    def flush(self, stream=None) -> None:
        stream = stream or sys.stdout
        if self.lines:
            stream.write("\n".join(self.lines) + "\n")


def _quote(v) -> str:
    s = str(v)
    if s and all(c.isalnum() or c in "._-/" for c in s):
        return s
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


# -- helpers ---------------------------------------------------------------

def _load(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror}") from None
    return parse(text)


def _term(decls: Declarations, text: str) -> Proc:
    return parse_term(text, decls)


def _graph(decls: Declarations, p: Proc, cfg: RunConfig) -> LtssGraph:
    return explore(p, decls, cfg.state_limit)


def _resolve_steps(g: LtssGraph, state: Proc, names: Sequence[str]):
    """Resolve each step by derivation name, or by label when that is unambiguous."""
    steps = []
    for name in names:
        en = g.enabled(state)
        match = [t for t in en if str(t) == name.strip()]
        if not match:
            match = [t for t in en if str(t.label) == name.strip()]
            if len(match) > 1:
                opts = ", ".join(sorted(map(str, match)))
                raise UsageError(f"label {name!r} is ambiguous in {show(state)}: {opts}")
        if not match:
            raise UsageError(f"{name!r} is not enabled in {show(state)}")
        steps.append(match[0])
        state = match[0].target
    return steps, state


# -- commands --------------------------------------------------------------

def cmd_check(args, cfg: RunConfig, out: Out) -> int:
    doc = _load(args.file)
    d = doc.decls
    out.record("declarations", handshake=len(d.handshakes), broadcast=len(d.broadcasts),
               signal=len(d.signals), agents=len(d.agents))
    bad = check_guarded(d)
    for v in bad:
        out.record("unguarded", agent=v.agent, occurrence=v.occurrence,
                   path="/".join(v.path) or "top")
    out.record("guarded", value=str(not bad).lower())
    return EXIT_OK if not bad else EXIT_NEGATIVE


def cmd_lts(args, cfg: RunConfig, out: Out) -> int:
    doc = _load(args.file)
    g = _graph(doc.decls, _term(doc.decls, args.term), cfg)
    if args.dot or cfg.format == "dot":
        out.lines.append(dump_dot(g).rstrip("\n"))
    else:
        out.lines.append(dump_text(g, with_triples=not args.no_triples).rstrip("\n"))
    return EXIT_OK


def cmd_en(args, cfg: RunConfig, out: Out) -> int:
    doc = _load(args.file)
    p = _term(doc.decls, args.term)
    for t in sorted(enabled(p, doc.decls), key=sort_key):
        out.record("enabled", derivation=t, label=t.label, target=show(t.target))
    return EXIT_OK


def cmd_succ(args, cfg: RunConfig, out: Out) -> int:
    doc = _load(args.file)
    p = _term(doc.decls, args.term)
    en = sorted(enabled(p, doc.decls), key=sort_key)
    for t in en:
        for u in en:
            for v in sorted(successors(t, u, doc.decls), key=sort_key):
                out.record("succ", t=t, u=u, v=v)
    return EXIT_OK


def cmd_conc(args, cfg: RunConfig, out: Out) -> int:
    doc = _load(args.file)
    p = _term(doc.decls, args.term)
    en = sorted(enabled(p, doc.decls), key=sort_key)
    if cfg.format == "structured":
        for t in en:
            for u in en:
                out.record("conc", t=t, u=u, value=str(aconc(t, u, doc.decls)).lower())
        return EXIT_OK
    for i, t in enumerate(en):
        out.text(f"t{i} = {t}")
    if en:
        out.text(("    " + " ".join(f"t{j:<2}" for j in range(len(en)))).rstrip())
        for i, t in enumerate(en):
            row = " ".join(("x  " if aconc(t, u, doc.decls) else ".  ") for u in en)
            out.text(f"t{i:<2} {row}".rstrip())
        out.text("x at row t, column u: t has a successor after u")
    return EXIT_OK


def cmd_epbisim(args, cfg: RunConfig, out: Out) -> int:
    doc = _load(args.file)
    d = doc.decls
    g1 = _graph(d, _term(d, args.term1), cfg)
    g2 = _graph(d, _term(d, args.term2), cfg)
    res = check_ep_bisim(g1, g2, cfg.limits)
    out.record("verdict", value="equivalent" if res.equivalent else "inequivalent",
               pairs=res.pairs_explored)
    if res.equivalent and args.witness:
        out.lines.append(dump_witness(res.witness).rstrip("\n"))
    if not res.equivalent:
        out.lines.append(dump_trace(res.trace).rstrip("\n"))
    return EXIT_OK if res.equivalent else EXIT_NEGATIVE


def cmd_bisim(args, cfg: RunConfig, out: Out) -> int:
    doc = _load(args.file)
    d = doc.decls
    g1 = _graph(d, _term(d, args.term1), cfg)
    g2 = _graph(d, _term(d, args.term2), cfg)
    res = check_strong_bisim(g1, g2)
    out.record("verdict", value="equivalent" if res.equivalent else "inequivalent",
               blocks=res.blocks)
    return EXIT_OK if res.equivalent else EXIT_NEGATIVE


def cmd_just(args, cfg: RunConfig, out: Out) -> int:
    doc = _load(args.file)
    d = doc.decls
    p = _term(d, args.term)
    if not args.cycle:
        raise UsageError("--cycle needs at least one step")
    g = _graph(d, p, cfg)
    prefix, mid = _resolve_steps(g, p, args.prefix or [])
    cycle, end = _resolve_steps(g, mid, args.cycle)
    try:
        pi = Lasso(p, tuple(prefix), tuple(cycle))
    except InvalidLasso as e:
        raise UsageError(str(e)) from None
    blocking = [parse_label(b, d) for b in (args.blocking or [])]
    verdict = check_b_just(pi, blocking, d)
    if verdict.just:
        out.record("verdict", value="just")
    else:
        out.record("verdict", value="unjust", position=verdict.position,
                   transition=verdict.transition, label=verdict.transition.label)
        for v in sorted(verdict.variants, key=sort_key):
            out.record("variant", derivation=v)
    return EXIT_OK if verdict.just else EXIT_NEGATIVE


def _report(checks: list[Check], out: Out) -> int:
    for c in checks:
        if out.fmt != "structured":
            out.text(c.summary(timing=False))
            for f in c.failures[:20]:
                out.text(f"  {f}")
            continue
        out.record("check", name=c.name, status="pass" if c.ok else "fail",
                   checked=c.passed, failed=len(c.failures), skipped=c.skipped,
                   instances=c.instances)
        for f in c.failures[:20]:
            out.record("failure", check=c.name, detail=f)
    return EXIT_OK if all(c.ok for c in checks) else EXIT_NEGATIVE


def cmd_oracle(args, cfg: RunConfig, out: Out) -> int:
    if (args.file is None) == (args.corpus is None):
        raise UsageError("give either a FILE or --corpus N")
    if args.file is not None:
        doc = _load(args.file)
        d = doc.decls
        texts = args.terms or sorted(doc.terms)
        succ, target, complete = Check("successors = possible successors"), \
            Check("target synchrons"), Check("P-completeness")
        for text in texts:
            g = _graph(d, _term(d, text), cfg)
            oracle_on_graph(text, g, succ, target, complete)
        checks = [succ, target, complete]
    else:
        items = corpus(args.corpus, cfg.seed, CorpusConfig(state_limit=args.corpus_states))
        checks = list(oracle_sweep(items))
    return _report(checks, out)


def cmd_props(args, cfg: RunConfig, out: Out) -> int:
    sweep = SweepConfig(seed=cfg.seed, pairs=args.pairs, limits=cfg.limits)
    items = list(corpus(args.corpus, cfg.seed, CorpusConfig(state_limit=args.corpus_states)))
    checks = list(oracle_sweep(items))
    law, cases = law_sweep(sweep)
    cong, more = congruence_sweep(cases, sweep)
    produced = cases + more
    eq = equivalence_laws(items, produced, sweep)
    conc, refine = respect_and_refinement(produced)
    just = justness_sweep(produced, seed=cfg.seed)
    return _report(checks + [eq, law, cong, just, conc, refine], out)


# -- argument parsing ------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _positive(text: str) -> int:
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if n <= 0:
        raise argparse.ArgumentTypeError(f"must be positive: {n}")
    return n


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--format", choices=["text", "structured", "dot"], default=None)
    common.add_argument("--state-limit", dest="state_limit", type=_positive, default=None)
    common.add_argument("--max-enabled-per-label", type=_positive, default=None)
    common.add_argument("--max-relations-per-pair", type=_positive, default=None)
    common.add_argument("--seed", type=int, default=None)

    ap = _Parser(prog="abcde-lab", description="ABCdE semantics, justness and ep-bisimilarity")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, fn, help_):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.set_defaults(fn=fn)
        return p

    add("check", cmd_check, "parse a file and report guardedness").add_argument("file")

    p = add("lts", cmd_lts, "explore and dump the transition system of a term")
    p.add_argument("file")
    p.add_argument("term")
    p.add_argument("--limit", dest="state_limit", type=_positive, default=None)
    p.add_argument("--dot", action="store_true", help="dot digraph instead of text")
    p.add_argument("--json-like", dest="json_like", action="store_true",
                   help="line-oriented structured dump (the default text dump)")
    p.add_argument("--no-triples", action="store_true", help="omit successor triples")

    for name, fn, help_ in (("en", cmd_en, "list enabled derivations"),
                            ("succ", cmd_succ, "list successor triples at a state"),
                            ("conc", cmd_conc, "concurrency matrix over enabled derivations")):
        p = add(name, fn, help_)
        p.add_argument("file")
        p.add_argument("term")

    for name, fn, help_ in (("epbisim", cmd_epbisim, "decide ep-bisimilarity"),
                            ("bisim", cmd_bisim, "decide strong bisimilarity")):
        p = add(name, fn, help_)
        p.add_argument("file")
        p.add_argument("term1")
        p.add_argument("term2")
        if name == "epbisim":
            p.add_argument("--witness", action="store_true", help="print the witness")

    p = add("just", cmd_just, "B-justness of a lasso")
    p.add_argument("file")
    p.add_argument("term")
    p.add_argument("--prefix", nargs="*", default=[], metavar="STEP",
                   help="derivation names or unambiguous labels")
    p.add_argument("--cycle", nargs="+", required=True, metavar="STEP")
    p.add_argument("--blocking", nargs="*", default=[], metavar="LABEL")

    p = add("oracle", cmd_oracle, "compare successors with the synchron oracle")
    p.add_argument("file", nargs="?")
    p.add_argument("terms", nargs="*", help="terms to check (default: every agent)")
    p.add_argument("--corpus", type=_positive, default=None, metavar="N")
    p.add_argument("--corpus-states", type=_positive, default=150)

    p = add("props", cmd_props, "run every property suite on a generated corpus")
    p.add_argument("--corpus", type=_positive, default=200, metavar="N")
    p.add_argument("--corpus-states", type=_positive, default=150)
    p.add_argument("--pairs", type=_positive, default=50)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _config(args)
    except UsageError as e:
        print(f"abcde-lab: {e}", file=sys.stderr)
        return EXIT_USAGE
    out = Out(cfg.format)
    try:
        code = args.fn(args, cfg, out)
    except UsageError as e:
        print(f"abcde-lab: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, SyntaxError_, UnguardedRecursionError) as e:
        print(f"abcde-lab: {e}", file=sys.stderr)
        return EXIT_PARSE
    except (LimitExceeded, ResourceExceeded) as e:
        out.flush()
        print(f"abcde-lab: resource limit: {e}", file=sys.stderr)
        return EXIT_RESOURCE
    out.flush()
    return code


if __name__ == "__main__":
    sys.exit(main())
