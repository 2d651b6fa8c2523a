import pytest
from hypothesis import given, settings

from abcde_lab.syntax import (
    NIL, TAU_LABEL, Agent, Choice, NoComplementError, Par, ParseError, Prefix, Relabelling,
    Signalling, check_guarded, co_handshake, complement, discard, emit, handshake, parse,
    parse_label, parse_term, read, recv, send, show, show_document,
)

from conftest import ACTIONS, DECLS, terms


def test_single_prefix_definition():
    doc = parse("handshake a; P := a.0")
    assert doc.decls.handshakes == {"a"}
    assert doc.terms == {"P": Prefix(handshake("a"), NIL)}


def test_sigcast_process_shape(sigcast):
    expected = Par(Signalling(Prefix(send("b"), NIL), "s"),
                   Choice(Prefix(read("s"), NIL), Prefix(recv("b"), NIL)))
    assert sigcast.terms["P"] == expected


def test_unknown_agent_is_rejected():
    with pytest.raises(ParseError, match="unknown identifier"):
        parse("handshake a; P := a.Q")


def test_undeclared_name_is_rejected():
    with pytest.raises(ParseError, match="unknown identifier 'y'"):
        parse("handshake x; P := y.0")


@pytest.mark.parametrize("text", [
    "handshake a; P := a.",
    "handshake a; P := (a.0",
    "handshake a; broadcast a; P := 0",
    "handshake a; P := 0; P := 0",
    "broadcast b; P := b.0",
])
def test_malformed_documents(text):
    with pytest.raises(ParseError):
        parse(text)


def test_parse_error_position():
    with pytest.raises(ParseError) as info:
        parse("handshake a;\nP := a.0 +;")
    assert info.value.line == 2


def test_precedence():
    d = parse("handshake a, c;").decls
    p = parse_term("a.0 | c.0 + 'a.0", d)
    assert isinstance(p, Choice) and isinstance(p.left, Par)
    q = parse_term("a.0 | c.0 \\ {c}", d)
    assert isinstance(q, Par)


def test_comments_are_skipped():
    doc = parse("# header\nhandshake a; # trailing\nP := a.0;")
    assert "P" in doc.terms


@pytest.mark.parametrize("text,violations", [
    ("handshake a; A := a.A", 0),
    ("handshake a; A := A + a.0", 1),
    ("handshake a; broadcast b; A := b?.B; B := a.A", 0),
])
def test_guardedness(text, violations):
    bad = check_guarded(parse(text).decls)
    assert len(bad) == violations


def test_guard_violation_location():
    (v,) = check_guarded(parse("handshake a; A := A + a.0").decls)
    assert v.agent == "A" and v.path == ("+L",)


def test_complements():
    assert complement(handshake("a")) == co_handshake("a")
    assert complement(emit("s")) == read("s")
    with pytest.raises(NoComplementError):
        complement(TAU_LABEL)


def test_relabelling_examples():
    f = Relabelling.of({"a": "c"})
    assert f.apply(co_handshake("a")) == co_handshake("c")
    assert Relabelling.of({"b": "d"}).apply(discard("b")) == discard("d")
    assert f.apply(TAU_LABEL) == TAU_LABEL


@pytest.mark.parametrize("label", ACTIONS + [discard("b"), emit("s")], ids=str)
def test_label_print_parse(label):
    assert parse_label(str(label), DECLS) == label


@given(terms)
@settings(max_examples=200)
def test_print_parse_roundtrip(p):
    assert parse_term(show(p), DECLS) == p


@given(terms)
@settings(max_examples=50)
def test_document_roundtrip(p):
    doc = parse("handshake a, c, d; broadcast b; signal s; A0 := a.A0;")
    doc.terms["Q"] = p
    again = parse(show_document(doc))
    assert again.terms["Q"] == p


@pytest.mark.parametrize("label", [l for l in ACTIONS if l.kind in ("in", "out", "read")] + [emit("s")],
                         ids=str)
def test_complement_involution(label):
    assert complement(complement(label)) == label


@pytest.mark.parametrize("label", ACTIONS + [discard("b"), emit("s")], ids=str)
def test_identity_relabelling(label):
    assert Relabelling.of({}).apply(label) == label


def test_agent_names_must_be_uppercase():
    with pytest.raises(ParseError):
        parse("handshake a; p := a.0")


def test_agent_reference_resolves():
    doc = parse("handshake a; A := a.B; B := a.A;")
    assert doc.terms["A"] == Prefix(handshake("a"), Agent("B"))
