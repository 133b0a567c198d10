"""Step enumeration, run legality, and simulation."""
import random

import pytest

from icm.model import LabelKind, outgoing_index
from icm.semantics import (DETERMINISTIC_FIRST, SEEDED_RANDOM, Mode, Run, Step,
                           StepVariant, enabled_steps, is_legal_run, run_trace,
                           simulate)

from helpers import machine, random_configuration, random_machine


def successors(m, conf, mode):
    return {(s.after.state, s.variant, s.after.contents)
            for s in enabled_steps(m, conf, mode)}


def test_write_appends_to_tail():
    m = machine("q0 q1 write c a")
    conf = m.configuration("q0", {"c": "b"})
    (step,) = enabled_steps(m, conf, Mode.ERROR_FREE)
    assert step.variant is StepVariant.WRITE
    assert step.after.word("c") == ("b", "a")


def test_read_dual_successors_in_lazy_mode():
    m = machine("q0 q1 read c a")
    conf = m.configuration("q0", {"c": "ab"})
    steps = enabled_steps(m, conf, Mode.LAZY)
    assert [s.variant for s in steps] == [StepVariant.CONSUME_READ,
                                          StepVariant.INSERTION_READ]
    consume, insert = steps
    assert consume.after.word("c") == ("b",)
    assert insert.after.word("c") == ("a", "b")


def test_read_mismatched_head_only_insertion():
    m = machine("q0 q1 read c a")
    conf = m.configuration("q0", {"c": "b"})
    steps = enabled_steps(m, conf, Mode.LAZY)
    assert [s.variant for s in steps] == [StepVariant.INSERTION_READ]
    assert enabled_steps(m, conf, Mode.ERROR_FREE) == []


def test_occurrence_test_blocked_by_occurrence():
    m = machine("q0 q1 notin c a")
    assert enabled_steps(m, m.configuration("q0", {"c": "a"}), Mode.LAZY) == []
    assert enabled_steps(m, m.configuration("q0", {"c": "ba"}), Mode.LAZY) == []
    steps = enabled_steps(m, m.configuration("q0", {"c": "b"}), Mode.LAZY)
    assert [s.variant for s in steps] == [StepVariant.OCCURRENCE_TEST]


def test_empty_test_requires_empty_word():
    m = machine("q0 q1 empty c")
    assert enabled_steps(m, m.configuration("q0", {"c": "a"}), Mode.LAZY) == []
    (step,) = enabled_steps(m, m.initial_configuration(), Mode.LAZY)
    assert step.variant is StepVariant.EMPTY_TEST
    assert step.after.contents == step.before.contents


def test_error_free_contained_in_lazy():
    rng = random.Random(7)
    for _ in range(200):
        m = random_machine(rng)
        conf = random_configuration(rng, m)
        free = enabled_steps(m, conf, Mode.ERROR_FREE)
        lazy = enabled_steps(m, conf, Mode.LAZY)
        assert set(free) <= set(lazy)


def test_enabled_steps_deterministic_and_bounded():
    rng = random.Random(11)
    for _ in range(200):
        m = random_machine(rng)
        conf = random_configuration(rng, m)
        first = enabled_steps(m, conf, Mode.LAZY)
        second = enabled_steps(m, conf, Mode.LAZY)
        assert first == second
        assert len(first) <= 2 * len(m.transitions)


def test_is_legal_run_empty():
    m = machine("q0 q1 write c a")
    assert is_legal_run(m, Run(m.initial_configuration(), (), Mode.LAZY))


def test_is_legal_run_rejects_insertion_in_error_free_mode():
    m = machine("q0 q1 read c a")
    conf = m.initial_configuration()
    (step,) = enabled_steps(m, conf, Mode.LAZY)
    assert step.variant is StepVariant.INSERTION_READ
    assert is_legal_run(m, Run(conf, (step,), Mode.LAZY))
    assert not is_legal_run(m, Run(conf, (step,), Mode.ERROR_FREE))


def test_is_legal_run_two_step_write_consume():
    m = machine("q0 q1 write c a\nq1 q2 read c a")
    conf = m.initial_configuration()
    (w,) = enabled_steps(m, conf, Mode.LAZY)
    consume = next(s for s in enabled_steps(m, w.after, Mode.LAZY)
                   if s.variant is StepVariant.CONSUME_READ)
    assert is_legal_run(m, Run(conf, (w, consume), Mode.LAZY))
    # breaking the chain is detected
    assert not is_legal_run(m, Run(conf, (consume,), Mode.LAZY))


def test_simulate_write_self_loop():
    m = machine("q0 q0 write c a")
    result = simulate(m, m.initial_configuration(), max_steps=3)
    assert not result.deadlocked
    assert len(result.run) == 3
    assert result.run.final.word("c") == ("a", "a", "a")


def test_simulate_insertion_then_deadlock():
    m = machine("q0 q1 read c a")
    result = simulate(m, m.initial_configuration(), max_steps=10)
    assert result.deadlocked
    assert [s.variant for s in result.run.steps] == [StepVariant.INSERTION_READ]


def test_simulate_deterministic_prefers_consume():
    m = machine("q0 q1 write c a\nq1 q0 read c a")
    result = simulate(m, m.initial_configuration(), max_steps=10)
    variants = {s.variant for s in result.run.steps}
    assert StepVariant.INSERTION_READ not in variants


def test_simulate_injection_forces_insertion():
    m = machine("q0 q1 write c a\nq1 q0 read c a")
    result = simulate(m, m.initial_configuration(), max_steps=4, injections={1, 3})
    assert [s.variant for s in result.run.steps] == [
        StepVariant.WRITE, StepVariant.INSERTION_READ,
        StepVariant.WRITE, StepVariant.INSERTION_READ]
    assert result.run.final.word("c") == ("a", "a")
    assert result.notes == ()


def test_simulate_injection_at_non_read_reported():
    m = machine("q0 q0 write c a")
    result = simulate(m, m.initial_configuration(), max_steps=2, injections={0})
    assert result.notes and "not a read" in result.notes[0]


def test_simulate_injection_validation():
    m = machine("q0 q0 write c a")
    with pytest.raises(ValueError):
        simulate(m, m.initial_configuration(), max_steps=2, injections={5})
    with pytest.raises(ValueError):
        simulate(m, m.initial_configuration(), max_steps=2, injections={0},
                 mode=Mode.ERROR_FREE)


def test_simulate_unreached_injection_noted():
    m = machine("q0 q1 read c a")
    result = simulate(m, m.initial_configuration(), max_steps=10, injections={7})
    assert result.deadlocked and any("never reached" in n for n in result.notes)


def test_simulate_seeded_random_reproducible():
    m = machine("q0 q0 write c a\nq0 q0 write c b\nq0 q1 read c a")
    one = simulate(m, m.initial_configuration(), policy=SEEDED_RANDOM,
                   max_steps=30, seed=42)
    two = simulate(m, m.initial_configuration(), policy=SEEDED_RANDOM,
                   max_steps=30, seed=42)
    assert one == two


def test_run_trace_shape():
    m = machine("q0 q1 write c a")
    result = simulate(m, m.initial_configuration(), max_steps=1)
    (entry,) = run_trace(result.run)
    assert entry["state"] == "q1"
    assert entry["label"]["kind"] == "write"
    assert entry["variant"] == "write"
    assert entry["contents_after"] == {"c": ["a"]}


def test_channel_delta_and_read_availability_random():
    rng = random.Random(23)
    checked = 0
    while checked < 2000:
        m = random_machine(rng)
        conf = random_configuration(rng, m)
        for _ in range(10):
            steps = enabled_steps(m, conf, Mode.LAZY)
            reads = {t for t in outgoing_index(m).get(conf.state, ())
                     if t.label.kind is LabelKind.READ}
            for t in reads:
                assert any(s.transition == t for s in steps), \
                    "a read transition must always be enabled in lazy mode"
            if not steps:
                break
            step = rng.choice(steps)
            for channel in m.channels:
                delta = len(step.after.word(channel)) - len(step.before.word(channel))
                assert abs(delta) <= 1
            conf = step.after
            checked += 1
