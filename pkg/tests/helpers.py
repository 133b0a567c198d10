"""Shared test utilities: machine builders, independent brute-force oracles,
and certificate soundness checks."""
from __future__ import annotations

import random

from icm.analysis import CycleCertificate, check_certificate, replay_boundaries, \
    replay_certificate
from icm.model import Machine, Transition, empty_test, equal_on, occurrence_test, \
    read, write
from icm.semantics import Mode, enabled_steps, is_legal_run


def machine(body: str = "", *, alphabet: str = "a b", channels: str = "c",
            name: str = "t", init: str = "q0", states: str = "") -> Machine:
    """Build a machine from transition lines like 'q0 q1 write c a'."""
    from icm.model import parse_machine
    lines = [f"machine {name}"]
    if alphabet:
        lines.append(f"alphabet {alphabet}")
    if channels:
        lines.append(f"channels {channels}")
    if states:
        lines.append(f"states {states}")
    lines.append(f"init {init}")
    for line in body.strip().splitlines():
        line = line.strip()
        if line:
            lines.append(f"trans {line}")
    return parse_machine("\n".join(lines) + "\n")


def exhaustive_longest_run(m: Machine, depth_cap: int) -> tuple[int, bool]:
    """Independent oracle: deepest lazy run length by plain exhaustive DFS.

    Returns (deepest, cut); cut means some run was still extendable at the
    cap, i.e. the tree was not exhausted.
    """
    deepest = 0
    cut = False
    stack = [(m.initial_configuration(), 0)]
    while stack:
        conf, depth = stack.pop()
        deepest = max(deepest, depth)
        if depth == depth_cap:
            if enabled_steps(m, conf, Mode.LAZY):
                cut = True
            continue
        for step in enabled_steps(m, conf, Mode.LAZY):
            stack.append((step.after, depth + 1))
    return deepest, cut


def assert_certificate_sound(m: Machine, cert: CycleCertificate,
                             times: int = 3) -> None:
    """A certificate must validate, replay into a legal run, and keep its
    copy boundaries equal on the witness channels."""
    assert check_certificate(m, cert), "certificate conditions do not hold"
    replayed = replay_certificate(m, cert, times)
    assert is_legal_run(m, replayed), "replayed run is not legal"
    boundaries = replay_boundaries(cert, replayed, times)
    assert len(boundaries) == times + 1
    for other in boundaries[1:]:
        assert equal_on(boundaries[0], other, cert.witness), \
            "replay boundary differs on a witness channel"


def curated_termination_suite():
    """Machines with hand-derived termination verdicts.

    Each entry is (name, machine, expected kind, expected longest run or
    None).  Expected values were derived by enumerating the lazy run tree by
    hand; the small terminating entries are re-checked against the
    brute-force enumerator in the tests, and every nonterminating verdict is
    certified by replaying its cycle certificate.
    """
    entries = []

    def add(name, m, kind, longest=None):
        entries.append((name, m, kind, longest))

    # The four canonical machines.
    # unconditioned write loop: pumpable with D = {} at once
    add("write-self-loop", machine("q0 q0 write c a"), "nonterminating")
    # lone read from empty: one insertion read, then deadlock
    add("single-read", machine("q0 q1 read c a"), "terminating", 1)
    # the written letter can never leave the channel, so the test stays blocked
    add("write-then-test", machine("q0 q1 write c a\nq1 q0 notin c a"),
        "terminating", 1)
    # error-free lap restores the empty channel: pumpable with D = {c}
    add("write-read-test-cycle",
        machine("q0 q1 write c a\nq1 q2 read c a\nq2 q0 notin c a"),
        "nonterminating")

    # Curated additions.
    # insertion reads keep every read loop alive forever
    add("read-self-loop", machine("q0 q0 read c a"), "nonterminating")
    add("read-two-cycle", machine("q0 q1 read c a\nq1 q0 read c b"),
        "nonterminating")
    # plain acyclic control: longest run = longest path
    add("write-chain", machine("q0 q1 write c a\nq1 q2 write c b"),
        "terminating", 2)
    add("diamond",
        machine("q0 q1 write c a\nq0 q2 write c b\nq1 q3 read c a\nq2 q3 read c b"),
        "terminating", 2)
    # the control cycle exists but is unreachable from init
    add("unreachable-cycle", machine("q0 q1 read c a\nq2 q2 write c a"),
        "terminating", 1)
    # emptiness test on a never-touched channel is an always-enabled loop
    add("empty-test-loop", machine("q0 q0 empty c"), "nonterminating")
    # after writing, the channel can never become empty again (no reads)
    add("write-then-empty-test", machine("q0 q1 write c a\nq1 q2 empty c"),
        "terminating", 1)
    # error-free lap write/consume/empty-test restores the configuration
    add("write-read-empty-cycle",
        machine("q0 q1 write c a\nq1 q2 read c a\nq2 q0 empty c"),
        "nonterminating")
    # tested letter is never written, so the test can never block
    add("test-other-letter", machine("q0 q1 write c a\nq1 q0 notin c b"),
        "nonterminating")
    # insertion reads feed an unbounded write loop across two channels
    add("channel-swap", machine("q0 q1 read c a\nq1 q0 write d a", channels="c d"),
        "nonterminating")
    # occurrence test on an empty channel is immediately enabled, once
    add("test-from-empty", machine("q0 q1 notin c a"), "terminating", 1)
    # head never matches the read letter and the test letter never leaves
    add("mismatched-read-then-test",
        machine("q0 q1 write c a\nq1 q2 read c b\nq2 q0 notin c a"),
        "terminating", 2)
    # write/consume lap with no tests: a control cycle is always pumpable
    add("write-consume-cycle", machine("q0 q1 write c a\nq1 q0 read c a"),
        "nonterminating")
    # a dead write next to a live insertion-read loop
    add("choice-dead-and-live", machine("q0 q1 write c a\nq0 q0 read c b"),
        "nonterminating")
    # two-channel error-free lap with occurrence tests on both channels
    add("two-channel-test-cycle",
        machine("q0 q1 write c a\n"
                "q1 q2 read c a\n"
                "q2 q3 notin c a\n"
                "q3 q4 write d b\n"
                "q4 q5 read d b\n"
                "q5 q0 notin d b", channels="c d"),
        "nonterminating")
    # net channel growth per lap does not matter without tests
    add("write-write-read-cycle",
        machine("q0 q1 write c a\nq1 q2 write c a\nq2 q0 read c a"),
        "nonterminating")
    # drift on the data channel, test on a letter nobody writes
    add("drift-with-foreign-test",
        machine("q0 q1 write c a\nq1 q2 read c a\nq2 q0 notin c b"),
        "nonterminating")
    # blocked both ways: the only loop needs the channel to lose its letter
    add("two-step-then-blocked",
        machine("q0 q1 write c a\nq1 q2 write d b\nq2 q0 empty c",
                channels="c d"),
        "terminating", 2)
    # normalization interplay: the first emptiness test passes (a two-test
    # chain over {a, b}), the write then blocks the second one for good
    add("empty-test-then-write",
        machine("q0 q1 empty c\nq1 q2 write c a\nq2 q0 empty c"),
        "terminating", 3)
    return entries


def random_testfree_machine(rng: random.Random, *, max_states: int = 6,
                            max_letters: int = 2, max_channels: int = 2,
                            max_transitions: int = 8) -> Machine:
    """Seeded random machine using only writes and reads."""
    n_states = rng.randint(1, max_states)
    states = [f"q{i}" for i in range(n_states)]
    letters = [chr(ord("a") + i) for i in range(rng.randint(1, max_letters))]
    channels = [f"c{i}" for i in range(rng.randint(1, max_channels))]
    transitions = []
    for _ in range(rng.randint(0, max_transitions)):
        src, dst = rng.choice(states), rng.choice(states)
        label_maker = rng.choice([write, read])
        transitions.append(
            Transition(src, label_maker(rng.choice(channels), rng.choice(letters)),
                       dst))
    return Machine.make("rand", "q0", alphabet=letters, channels=channels,
                        states=states, transitions=transitions)


def random_machine(rng: random.Random, *, max_states: int = 5,
                   max_letters: int = 2, max_channels: int = 2,
                   max_transitions: int = 8, with_tests: bool = True) -> Machine:
    """Seeded random machine over all label kinds."""
    n_states = rng.randint(1, max_states)
    states = [f"q{i}" for i in range(n_states)]
    letters = [chr(ord("a") + i) for i in range(rng.randint(1, max_letters))]
    channels = [f"c{i}" for i in range(rng.randint(1, max_channels))]
    transitions = []
    for _ in range(rng.randint(0, max_transitions)):
        src, dst = rng.choice(states), rng.choice(states)
        kind = rng.randint(0, 3 if with_tests else 1)
        channel = rng.choice(channels)
        if kind == 0:
            label = write(channel, rng.choice(letters))
        elif kind == 1:
            label = read(channel, rng.choice(letters))
        elif kind == 2:
            label = occurrence_test(channel, rng.choice(letters))
        else:
            label = empty_test(channel)
        transitions.append(Transition(src, label, dst))
    return Machine.make("rand", "q0", alphabet=letters, channels=channels,
                        states=states, transitions=transitions)


def random_configuration(rng: random.Random, m: Machine, max_len: int = 3):
    state = rng.choice(sorted(m.states))
    letters = sorted(m.alphabet)
    contents = {}
    for channel in m.channels:
        contents[channel] = [rng.choice(letters)
                             for _ in range(rng.randint(0, max_len))] \
            if letters else []
    return m.configuration(state, contents)
