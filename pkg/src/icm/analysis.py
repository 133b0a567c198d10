"""Termination analysis with replayable cycle certificates.

A cycle certificate witnesses non-termination: a segment run σ ⇒ σ′ whose
endpoints agree on the control state and on a channel subset D, such that
every occurrence test fired inside the segment is either on a channel in D
or on a (channel, letter) pair the segment never writes.  Such a segment can
be fired again and again: reads on channels outside D can always be taken as
insertion reads, and the two conditions keep every test enabled on each
subsequent copy.

The checker explores the lazy run tree by iterative deepening so the
shallowest certificate is found first and so that a certificate is detected
even when a sibling subtree is infinite.  Exhausting the whole tree proves
termination; exhausting the budget yields Unknown — certificate search is
sound but not known to be complete.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .model import (Configuration, LabelKind, Machine, equal_on,
                    normalize_empty_tests)
from .semantics import (Mode, Run, Step, StepVariant, enabled_steps,
                        is_legal_run)


class CertificateError(Exception):
    """Certificate runs are illegal, mis-chained, or otherwise malformed."""


@dataclass(frozen=True)
class Budget:
    """Search limits.  Defaults cover the curated suite in seconds."""

    max_depth: int = 10_000
    max_expansions: int = 1_000_000

    def __post_init__(self):
        if self.max_depth <= 0 or self.max_expansions <= 0:
            raise ValueError("budget limits must be positive")


@dataclass(frozen=True)
class CycleCertificate:
    """A pumpable cycle: prefix to σ, segment σ ⇒ σ′, witness channels D."""

    prefix: Run
    segment: Run
    witness: frozenset[str]


@dataclass(frozen=True)
class Verdict:
    kind: str  # "terminating" | "nonterminating" | "unknown"
    longest_run: int | None = None
    certificate: CycleCertificate | None = None
    exhausted_depth: int | None = None

    @classmethod
    def terminating(cls, longest_run: int) -> "Verdict":
        return cls("terminating", longest_run=longest_run)

    @classmethod
    def nonterminating(cls, certificate: CycleCertificate) -> "Verdict":
        return cls("nonterminating", certificate=certificate)

    @classmethod
    def unknown(cls, exhausted_depth: int) -> "Verdict":
        return cls("unknown", exhausted_depth=exhausted_depth)

    @property
    def is_definite(self) -> bool:
        return self.kind != "unknown"


def _segment_test_conditions(segment: Run, witness: Iterable[str]) -> bool:
    """The replay condition on tests occurring in the segment.

    An occurrence test a∉c inside the segment needs c ∈ D or no write c!a in
    the segment.  An emptiness test c=∅ is as strong as testing every letter
    at once, so outside D it needs the segment to write nothing at all to c.
    """
    witness = set(witness)
    writes = {(s.transition.label.channel, s.transition.label.letter)
              for s in segment.steps if s.transition.label.kind is LabelKind.WRITE}
    written_channels = {channel for channel, _ in writes}
    for step in segment.steps:
        label = step.transition.label
        if label.kind is LabelKind.OCCURRENCE_TEST:
            if label.channel not in witness and (label.channel, label.letter) in writes:
                return False
        elif label.kind is LabelKind.EMPTY_TEST:
            if label.channel not in witness and label.channel in written_channels:
                return False
    return True


def check_certificate(machine: Machine, cert: CycleCertificate) -> bool:
    """Validate a certificate against the machine.

    Raises CertificateError when the prefix/segment are not legal lazy runs
    that chain; returns False when the runs are fine but the endpoints do not
    agree on the witness channels or a segment test violates the replay
    condition.
    """
    if cert.prefix.mode is not Mode.LAZY or cert.segment.mode is not Mode.LAZY:
        raise CertificateError("certificate runs must use lazy mode")
    if len(cert.segment) < 1:
        raise CertificateError("segment must contain at least one step")
    if cert.segment.start != cert.prefix.final:
        raise CertificateError("segment does not start at the prefix's end")
    if not is_legal_run(machine, cert.prefix):
        raise CertificateError("prefix is not a legal lazy run")
    if not is_legal_run(machine, cert.segment):
        raise CertificateError("segment is not a legal lazy run")
    for channel in cert.witness:
        if channel not in machine.channels:
            raise CertificateError(f"witness channel {channel!r} not declared")

    if not equal_on(cert.segment.start, cert.segment.final, cert.witness):
        return False
    return _segment_test_conditions(cert.segment, cert.witness)


def replay_certificate(machine: Machine, cert: CycleCertificate,
                       times: int) -> Run:
    """Extend the prefix by ``times`` copies of the segment's label word.

    Replay strategy: on witness channels the original step variants are
    reused; on all other channels every read is taken as an insertion read.
    The resulting run is legal and its copy boundaries agree with the
    segment endpoints on the witness channels.
    """
    if times < 1:
        raise ValueError("times must be at least 1")
    if not check_certificate(machine, cert):
        raise CertificateError("certificate conditions do not hold")

    steps = list(cert.prefix.steps)
    conf = cert.prefix.final
    for _ in range(times):
        for original in cert.segment.steps:
            t = original.transition
            label = t.label
            if label.kind is LabelKind.WRITE:
                word = conf.word(label.channel)
                after = conf.replace(t.target, (label.channel, word + (label.letter,)))
                variant = StepVariant.WRITE
            elif label.kind is LabelKind.READ:
                insert = (label.channel not in cert.witness
                          or original.variant is StepVariant.INSERTION_READ)
                if insert:
                    after = conf.replace(t.target)
                    variant = StepVariant.INSERTION_READ
                else:
                    word = conf.word(label.channel)
                    if not word or word[0] != label.letter:
                        raise CertificateError(
                            f"replay desync: expected head {label.letter!r} "
                            f"on witness channel {label.channel!r}")
                    after = conf.replace(t.target, (label.channel, word[1:]))
                    variant = StepVariant.CONSUME_READ
            elif label.kind is LabelKind.EMPTY_TEST:
                if conf.word(label.channel):
                    raise CertificateError(
                        f"replay desync: channel {label.channel!r} not empty")
                after = conf.replace(t.target)
                variant = StepVariant.EMPTY_TEST
            else:
                if label.letter in conf.word(label.channel):
                    raise CertificateError(
                        f"replay desync: {label.letter!r} occurs in {label.channel!r}")
                after = conf.replace(t.target)
                variant = StepVariant.OCCURRENCE_TEST
            steps.append(Step(t, variant, conf, after))
            conf = after
    return Run(cert.prefix.start, tuple(steps), Mode.LAZY)


def replay_boundaries(cert: CycleCertificate, replayed: Run,
                      times: int) -> list[Configuration]:
    """Configurations at the prefix end and after each replayed copy."""
    offset = len(cert.prefix)
    period = len(cert.segment)
    configurations = replayed.configurations()
    return [configurations[offset + j * period] for j in range(times + 1)]


# -- iterative-deepening search ----------------------------------------------


class _BudgetExhausted(Exception):
    pass


def _occurrence_keys(machine: Machine) -> tuple[tuple[str, str], ...]:
    keys = []
    for t in machine.transitions:
        if t.label.kind is LabelKind.OCCURRENCE_TEST:
            key = (t.label.channel, t.label.letter)
            if key not in keys:
                keys.append(key)
    return tuple(keys)


class _Search:
    """One iterative-deepening exploration of the lazy run tree."""

    def __init__(self, machine: Machine, root: Configuration, budget: Budget):
        self.machine = machine
        self.root = root
        self.budget = budget
        self.expansions = 0
        self.occurrence_keys = _occurrence_keys(machine)
        self.channels = sorted(machine.channels)

    def _expand(self, conf: Configuration) -> list[Step]:
        if self.expansions >= self.budget.max_expansions:
            raise _BudgetExhausted
        self.expansions += 1
        return enabled_steps(self.machine, conf, Mode.LAZY)

    def run(self) -> Verdict:
        completed = 0
        try:
            for limit in range(1, self.budget.max_depth + 1):
                certificate, cutoff, deepest = self._iterate(limit)
                if certificate is not None:
                    return Verdict.nonterminating(certificate)
                if not cutoff:
                    return Verdict.terminating(deepest)
                completed = limit
        except _BudgetExhausted:
            return Verdict.unknown(completed)
        return Verdict.unknown(self.budget.max_depth)

    def _iterate(self, limit: int):
        """Depth-limited DFS.  New nodes appear only at depth == limit (the
        shallower tree prefix is identical across iterations), so the cycle
        check runs only on frontier nodes."""
        configs = [self.root]
        path_steps: list[Step] = []
        ancestors: dict[str, list[int]] = {self.root.state: [0]}
        label_positions: dict[tuple, list[int]] = {}
        cutoff = False
        deepest = 0

        root_children = self._expand(self.root)
        stack = [iter(root_children)]

        def push_bookkeeping(step: Step, index: int) -> None:
            label = step.transition.label
            if label.kind in (LabelKind.WRITE, LabelKind.OCCURRENCE_TEST):
                key = (label.kind, label.channel, label.letter)
                label_positions.setdefault(key, []).append(index)
            configs.append(step.after)
            ancestors.setdefault(step.after.state, []).append(index + 1)

        def pop_bookkeeping() -> None:
            step = path_steps.pop()
            label = step.transition.label
            if label.kind in (LabelKind.WRITE, LabelKind.OCCURRENCE_TEST):
                key = (label.kind, label.channel, label.letter)
                label_positions[key].pop()
            conf = configs.pop()
            ancestors[conf.state].pop()

        def occurs_since(key: tuple, start: int) -> bool:
            positions = label_positions.get(key)
            return bool(positions) and positions[-1] >= start

        def frontier_certificate() -> CycleCertificate | None:
            here = len(configs) - 1
            current = configs[here]
            for i in reversed(ancestors[current.state][:-1]):
                witness = frozenset(
                    c for c in self.channels
                    if configs[i].word(c) == current.word(c))
                ok = True
                for channel, letter in self.occurrence_keys:
                    if channel in witness:
                        continue
                    if (occurs_since((LabelKind.OCCURRENCE_TEST, channel, letter), i)
                            and occurs_since((LabelKind.WRITE, channel, letter), i)):
                        ok = False
                        break
                if ok:
                    prefix = Run(self.root, tuple(path_steps[:i]), Mode.LAZY)
                    segment = Run(configs[i], tuple(path_steps[i:]), Mode.LAZY)
                    return CycleCertificate(prefix, segment, witness)
            return None

        while stack:
            step = next(stack[-1], None)
            if step is None:
                stack.pop()
                if path_steps:
                    pop_bookkeeping()
                continue
            depth = len(path_steps) + 1
            deepest = max(deepest, depth)
            path_steps.append(step)
            push_bookkeeping(step, depth - 1)
            if depth == limit:
                certificate = frontier_certificate()
                if certificate is not None:
                    return certificate, cutoff, deepest
                if self._expand(step.after):
                    cutoff = True
                pop_bookkeeping()
            else:
                children = self._expand(step.after)
                if children:
                    stack.append(iter(children))
                else:
                    pop_bookkeeping()
        return None, cutoff, deepest


def check_termination(machine: Machine, budget: Budget = Budget()) -> Verdict:
    """Decide termination from the initial configuration (all channels ε).

    Emptiness tests are rewritten to occurrence-test chains first; a returned
    certificate therefore refers to ``normalize_empty_tests(machine)``.
    """
    normalized = normalize_empty_tests(machine)
    return _Search(normalized, normalized.initial_configuration(), budget).run()


def check_termination_from(machine: Machine, start: Configuration,
                           budget: Budget = Budget()) -> Verdict:
    """Same procedure as check_termination, rooted at an arbitrary start."""
    normalized = normalize_empty_tests(machine)
    if start.state not in normalized.states:
        raise ValueError(f"unknown start state {start.state!r}")
    root = normalized.configuration(start.state, dict(start.contents))
    return _Search(normalized, root, budget).run()


# -- exact oracle for test-free machines --------------------------------------


def testfree_termination_oracle(machine: Machine) -> Verdict:
    """Exact termination verdict for machines without tests.

    Without tests every transition is enabled at every visit in lazy mode
    (writes unconditionally, reads via insertion), so channels are irrelevant
    and the machine terminates iff no control cycle is reachable from init;
    otherwise the longest run equals the longest path in the reachable DAG.
    """
    if machine.has_tests():
        raise ValueError("oracle requires a machine without tests")

    succ: dict[str, list[Transition]] = {}
    for t in machine.transitions:
        succ.setdefault(t.source, []).append(t)

    # reachable subgraph
    reachable = {machine.init}
    frontier = [machine.init]
    while frontier:
        state = frontier.pop()
        for t in succ.get(state, ()):
            if t.target not in reachable:
                reachable.add(t.target)
                frontier.append(t.target)

    # cycle detection (iterative colouring) with a witness cycle
    WHITE, GREY, BLACK = 0, 1, 2
    colour = {state: WHITE for state in reachable}
    on_path: list[Transition] = []

    def find_cycle(start: str) -> list[Transition] | None:
        stack = [(start, iter(succ.get(start, ())))]
        colour[start] = GREY
        while stack:
            state, it = stack[-1]
            t = next(it, None)
            if t is None:
                colour[state] = BLACK
                stack.pop()
                if on_path:
                    on_path.pop()
                continue
            if colour[t.target] == GREY:
                on_path.append(t)
                cycle_start = t.target
                cycle = []
                for edge in reversed(on_path):
                    cycle.append(edge)
                    if edge.source == cycle_start:
                        break
                on_path.pop()
                return list(reversed(cycle))
            if colour[t.target] == WHITE:
                on_path.append(t)
                colour[t.target] = GREY
                stack.append((t.target, iter(succ.get(t.target, ()))))
        return None

    cycle = find_cycle(machine.init)
    if cycle is not None:
        return Verdict.nonterminating(_control_cycle_certificate(machine, cycle))

    # acyclic: longest path from init by DP over reverse-finish order
    order: list[str] = []
    seen: set[str] = set()
    stack = [(machine.init, iter(succ.get(machine.init, ())))]
    seen.add(machine.init)
    while stack:
        state, it = stack[-1]
        t = next(it, None)
        if t is None:
            order.append(state)
            stack.pop()
            continue
        if t.target not in seen:
            seen.add(t.target)
            stack.append((t.target, iter(succ.get(t.target, ()))))
    longest = {state: 0 for state in reachable}
    for state in order:  # reverse topological order
        for t in succ.get(state, ()):
            longest[state] = max(longest[state], 1 + longest[t.target])
    return Verdict.terminating(longest[machine.init])


def _apply_insertion_path(machine: Machine, start: Configuration,
                          transitions: Iterable[Transition]) -> list[Step]:
    """Apply test-free transitions, taking every read as an insertion read."""
    steps = []
    conf = start
    for t in transitions:
        label = t.label
        if label.kind is LabelKind.WRITE:
            word = conf.word(label.channel)
            after = conf.replace(t.target, (label.channel, word + (label.letter,)))
            steps.append(Step(t, StepVariant.WRITE, conf, after))
        elif label.kind is LabelKind.READ:
            after = conf.replace(t.target)
            steps.append(Step(t, StepVariant.INSERTION_READ, conf, after))
        else:
            raise ValueError("path must be test-free")
        conf = after
    return steps


def _control_cycle_certificate(machine: Machine,
                               cycle: list[Transition]) -> CycleCertificate:
    """Build a certificate from a reachable control cycle of a test-free
    machine.  Reads are taken as insertion reads, so the only content changes
    are writes; channels the cycle never writes have equal endpoints, and the
    test condition is vacuous."""
    entry = cycle[0].source
    # shortest control path init -> entry (BFS)
    succ: dict[str, list[Transition]] = {}
    for t in machine.transitions:
        succ.setdefault(t.source, []).append(t)
    parent: dict[str, tuple[str, Transition] | None] = {machine.init: None}
    queue = [machine.init]
    while queue and entry not in parent:
        state = queue.pop(0)
        for t in succ.get(state, ()):
            if t.target not in parent:
                parent[t.target] = (state, t)
                queue.append(t.target)
    path: list[Transition] = []
    state = entry
    while parent[state] is not None:
        prev, t = parent[state]
        path.append(t)
        state = prev
    path.reverse()

    start = machine.initial_configuration()
    prefix_steps = _apply_insertion_path(machine, start, path)
    prefix = Run(start, tuple(prefix_steps), Mode.LAZY)
    segment_steps = _apply_insertion_path(machine, prefix.final, cycle)
    segment = Run(prefix.final, tuple(segment_steps), Mode.LAZY)
    written = {t.label.channel for t in cycle if t.label.kind is LabelKind.WRITE}
    witness = frozenset(machine.channels - written)
    return CycleCertificate(prefix, segment, witness)


# -- bounded reachability ------------------------------------------------------


@dataclass(frozen=True)
class ReachabilityResult:
    found: bool
    run: Run | None
    explored_depth: int
    exhausted: bool


def bounded_reachability(machine: Machine, target: str,
                         budget: Budget = Budget()) -> ReachabilityResult:
    """Breadth-bounded lazy search for a control state; shortest witness.

    This is a semi-test: ``found`` is definite, and ``not found`` is definite
    only when ``exhausted`` reports that no unexplored configuration remains.
    """
    if target not in machine.states:
        raise ValueError(f"unknown target state {target!r}")
    start = machine.initial_configuration()
    if start.state == target:
        return ReachabilityResult(True, Run(start, (), Mode.LAZY), 0, False)

    parents: dict[Configuration, tuple[Configuration, Step] | None] = {start: None}
    frontier = [start]
    expansions = 0
    depth = 0

    def reconstruct(conf: Configuration) -> Run:
        steps = []
        while parents[conf] is not None:
            prev, step = parents[conf]
            steps.append(step)
            conf = prev
        steps.reverse()
        return Run(start, tuple(steps), Mode.LAZY)

    while frontier and depth < budget.max_depth:
        next_frontier: list[Configuration] = []
        for conf in frontier:
            if expansions >= budget.max_expansions:
                return ReachabilityResult(False, None, depth, False)
            expansions += 1
            for step in enabled_steps(machine, conf, Mode.LAZY):
                child = step.after
                if child in parents:
                    continue
                parents[child] = (conf, step)
                if child.state == target:
                    return ReachabilityResult(True, reconstruct(child), depth + 1, False)
                next_frontier.append(child)
        frontier = next_frontier
        depth += 1
    return ReachabilityResult(False, None, depth, exhausted=not frontier)


# -- witness serialization -----------------------------------------------------


def certificate_to_json(cert: CycleCertificate) -> dict:
    return {
        "start": cert.prefix.start.to_json(),
        "prefix": [step.to_json() for step in cert.prefix.steps],
        "segment": [step.to_json() for step in cert.segment.steps],
        "equal_channels": sorted(cert.witness),
    }


def verdict_to_json(verdict: Verdict) -> dict:
    data: dict = {"verdict": verdict.kind}
    if verdict.longest_run is not None:
        data["longest_run"] = verdict.longest_run
    if verdict.certificate is not None:
        data["certificate"] = certificate_to_json(verdict.certificate)
    if verdict.exhausted_depth is not None:
        data["exhausted_depth"] = verdict.exhausted_depth
    return data


_STEP_SCHEMA = {
    "type": "object",
    "required": ["from", "to", "label", "variant"],
    "properties": {
        "from": {"type": "string"},
        "to": {"type": "string"},
        "label": {"type": "object"},
        "variant": {"type": "string"},
    },
}

#: JSON schema for the `check` command payload.
WITNESS_SCHEMA = {
    "type": "object",
    "required": ["verdict"],
    "properties": {
        "verdict": {"enum": ["terminating", "nonterminating", "unknown"]},
        "longest_run": {"type": "integer", "minimum": 0},
        "exhausted_depth": {"type": "integer", "minimum": 0},
        "certificate": {
            "type": "object",
            "required": ["start", "prefix", "segment", "equal_channels"],
            "properties": {
                "start": {"type": "object"},
                "prefix": {"type": "array", "items": _STEP_SCHEMA},
                "segment": {"type": "array", "items": _STEP_SCHEMA},
                "equal_channels": {"type": "array", "items": {"type": "string"}},
            },
        },
    },
}
