"""Model, .icm format, and emptiness-test rewrite."""
import pytest

from icm.model import (Label, LabelKind, Machine, MachineFormatError,
                       ModelError, Transition, empty_test, normalize_empty_tests,
                       occurrence_test, parse_machine, read, serialize_machine,
                       write)

from helpers import machine


def test_parse_minimal_document():
    m = parse_machine("machine m\nalphabet a\nchannels c\ninit q0\n")
    assert m.name == "m"
    assert m.states == frozenset({"q0"})
    assert m.transitions == ()


def test_parse_write_transition():
    m = parse_machine(
        "machine m\nalphabet a\nchannels c\ninit q0\ntrans q0 q1 write c a\n")
    assert m.transitions == (Transition("q0", write("c", "a"), "q1"),)
    assert m.states == frozenset({"q0", "q1"})


def test_parse_all_label_kinds():
    m = machine("""
        q0 q1 write c a
        q1 q2 read c a
        q2 q3 notin c b
        q3 q4 empty c
    """)
    kinds = [t.label.kind for t in m.transitions]
    assert kinds == [LabelKind.WRITE, LabelKind.READ,
                     LabelKind.OCCURRENCE_TEST, LabelKind.EMPTY_TEST]


def test_parse_undeclared_channel():
    with pytest.raises(MachineFormatError, match="undeclared channel 'd'"):
        parse_machine(
            "machine m\nalphabet a\nchannels c\ninit q0\ntrans q0 q1 write d a\n")


def test_parse_undeclared_letter():
    with pytest.raises(MachineFormatError, match="undeclared letter 'z'"):
        parse_machine(
            "machine m\nalphabet a\nchannels c\ninit q0\ntrans q0 q1 write c z\n")


def test_parse_reports_line_numbers():
    try:
        parse_machine("machine m\nalphabet a\nchannels c\ninit q0\nbogus x\n")
    except MachineFormatError as exc:
        assert exc.line == 5
    else:
        pytest.fail("expected a format error")


def test_parse_duplicate_header():
    with pytest.raises(MachineFormatError, match="duplicate machine header"):
        parse_machine("machine m\nmachine n\ninit q0\n")


def test_parse_missing_init():
    with pytest.raises(MachineFormatError, match="missing init"):
        parse_machine("machine m\nalphabet a\nchannels c\n")


def test_parse_comments_and_blank_lines():
    m = parse_machine(
        "# header\nmachine m  # trailing\n\nalphabet a\nchannels c\ninit q0\n")
    assert m.name == "m"


def test_parse_empty_test_takes_no_letter():
    with pytest.raises(MachineFormatError):
        parse_machine(
            "machine m\nalphabet a\nchannels c\ninit q0\ntrans q0 q1 empty c a\n")


def test_channel_less_machine_is_legal():
    m = parse_machine("machine m\nstates q0 q1\ninit q0\n")
    assert m.channels == frozenset()
    assert m.alphabet == frozenset()


def test_serialize_minimal():
    m = parse_machine("machine m\nalphabet a\nchannels c\ninit q0\n")
    text = serialize_machine(m)
    assert text.splitlines() == [
        "machine m", "alphabet a", "channels c", "states q0", "init q0"]


def test_serialize_one_of_each_kind():
    m = machine("""
        q0 q1 write c a
        q1 q2 read c a
        q2 q3 notin c b
        q3 q4 empty c
    """)
    lines = serialize_machine(m).splitlines()
    assert sum(1 for line in lines if line.startswith("trans ")) == 4


def test_round_trip_is_identity():
    samples = [
        machine(""),
        machine("q0 q1 write c a\nq1 q0 read c b"),
        machine("q0 q1 empty c", states="iso1 iso2"),
        parse_machine("machine m\nstates q0 q1\ninit q0\n"),
    ]
    for m in samples:
        assert parse_machine(serialize_machine(m)) == m


def test_duplicate_transitions_collapse():
    m = machine("q0 q1 write c a\nq0 q1 write c a")
    assert len(m.transitions) == 1


def test_configuration_validates():
    m = machine("q0 q1 write c a")
    with pytest.raises(ModelError):
        m.configuration("nope")
    with pytest.raises(ModelError):
        m.configuration("q0", {"d": "a"})
    with pytest.raises(ModelError):
        m.configuration("q0", {"c": "z"})
    conf = m.configuration("q0", {"c": "ab"})
    assert conf.word("c") == ("a", "b")


def test_initial_configuration_empty_channels():
    m = machine("q0 q1 write c a", channels="c d")
    conf = m.initial_configuration()
    assert conf.state == "q0"
    assert conf.word("c") == () and conf.word("d") == ()


# -- emptiness-test rewrite ----------------------------------------------------


def test_normalize_two_letter_chain():
    m = machine("q0 q1 empty c")
    n = normalize_empty_tests(m)
    assert not n.has_empty_tests()
    assert n.transitions == (
        Transition("q0", occurrence_test("c", "a"), "q0__empty_c_1"),
        Transition("q0__empty_c_1", occurrence_test("c", "b"), "q1"),
    )


def test_normalize_single_letter_no_fresh_state():
    m = machine("q0 q1 empty c", alphabet="a")
    n = normalize_empty_tests(m)
    assert n.transitions == (Transition("q0", occurrence_test("c", "a"), "q1"),)
    assert n.states == m.states


def test_normalize_without_empty_tests_is_identity():
    m = machine("q0 q1 write c a")
    assert normalize_empty_tests(m) is m


def test_normalize_is_idempotent():
    m = machine("q0 q1 empty c\nq1 q2 write c a")
    once = normalize_empty_tests(m)
    assert normalize_empty_tests(once) is once


def test_normalize_fresh_state_count():
    # one fresh state per emptiness test and letter beyond the first
    m = machine("q0 q1 empty c\nq1 q2 empty c", alphabet="a b c")
    n = normalize_empty_tests(m)
    assert len(n.states) == len(m.states) + 2 * 2
    preserved = [t for t in n.transitions if t.label.kind is not LabelKind.OCCURRENCE_TEST]
    assert preserved == [t for t in m.transitions
                         if t.label.kind is not LabelKind.EMPTY_TEST]


def test_normalize_letter_order_is_lexicographic():
    m = machine("q0 q1 empty c", alphabet="b c a")
    n = normalize_empty_tests(m)
    assert [t.label.letter for t in n.transitions] == ["a", "b", "c"]


def test_normalize_fresh_names_avoid_collisions():
    m = machine("q0 q1 empty c", states="q0__empty_c_1")
    n = normalize_empty_tests(m)
    fresh = n.states - m.states
    assert fresh == {"q0__empty_c_2"}


def test_normalize_empty_alphabet_rejected():
    m = Machine.make("m", "q0", alphabet=(), channels=("c",),
                     transitions=[Transition("q0", empty_test("c"), "q1")])
    with pytest.raises(ModelError):
        normalize_empty_tests(m)


def test_label_shapes():
    with pytest.raises(ModelError):
        Label(LabelKind.WRITE, "c")  # missing letter
    with pytest.raises(ModelError):
        Label(LabelKind.EMPTY_TEST, "c", "a")  # spurious letter
    assert str(read("c", "a")) == "c?a"
