"""Operational semantics: step enumeration, run validation, simulation.

Two modes are supported.  Error-free semantics enables a write always, a
read only when the channel head matches, and a test only when it holds.
Lazy semantics additionally lets every read fire with unchanged contents:
the read letter is inserted into the channel "just in time" and immediately
consumed, which is how spontaneous channel insertions are modelled.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from enum import Enum

from .model import (Configuration, LabelKind, Machine, Transition,
                    outgoing_index)


class Mode(str, Enum):
    ERROR_FREE = "error-free"
    LAZY = "lazy"


class StepVariant(str, Enum):
    WRITE = "write"
    CONSUME_READ = "consume-read"
    INSERTION_READ = "insertion-read"
    EMPTY_TEST = "empty-test"
    OCCURRENCE_TEST = "occurrence-test"


@dataclass(frozen=True)
class Step:
    """One applied transition: which rule variant fired and both endpoints."""

    transition: Transition
    variant: StepVariant
    before: Configuration
    after: Configuration

    def to_json(self) -> dict:
        return {"from": self.transition.source, "to": self.transition.target,
                "label": self.transition.label.to_json(),
                "variant": self.variant.value}


@dataclass(frozen=True)
class Run:
    """A chained sequence of steps from a start configuration."""

    start: Configuration
    steps: tuple[Step, ...]
    mode: Mode = Mode.LAZY

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def final(self) -> Configuration:
        return self.steps[-1].after if self.steps else self.start

    def configurations(self) -> list[Configuration]:
        return [self.start] + [step.after for step in self.steps]


def enabled_steps(machine: Machine, conf: Configuration,
                  mode: Mode = Mode.LAZY) -> list[Step]:
    """All steps enabled at a configuration, in deterministic order.

    Transitions are visited in declaration order; a read contributes its
    consuming variant (head matches) before its insertion variant (lazy mode
    only, always enabled).  An empty result means the configuration is
    deadlocked.
    """
    steps: list[Step] = []
    for t in outgoing_index(machine).get(conf.state, ()):
        label = t.label
        if label.kind is LabelKind.WRITE:
            word = conf.word(label.channel)
            after = conf.replace(t.target, (label.channel, word + (label.letter,)))
            steps.append(Step(t, StepVariant.WRITE, conf, after))
        elif label.kind is LabelKind.READ:
            word = conf.word(label.channel)
            if word and word[0] == label.letter:
                after = conf.replace(t.target, (label.channel, word[1:]))
                steps.append(Step(t, StepVariant.CONSUME_READ, conf, after))
            if mode is Mode.LAZY:
                steps.append(Step(t, StepVariant.INSERTION_READ, conf,
                                  conf.replace(t.target)))
        elif label.kind is LabelKind.EMPTY_TEST:
            if not conf.word(label.channel):
                steps.append(Step(t, StepVariant.EMPTY_TEST, conf,
                                  conf.replace(t.target)))
        else:  # occurrence test
            if label.letter not in conf.word(label.channel):
                steps.append(Step(t, StepVariant.OCCURRENCE_TEST, conf,
                                  conf.replace(t.target)))
    return steps


def is_legal_run(machine: Machine, run: Run) -> bool:
    """True iff every step is enabled under the run's mode and steps chain."""
    previous = run.start
    for step in run.steps:
        if step.before != previous:
            return False
        if step not in enabled_steps(machine, step.before, run.mode):
            return False
        previous = step.after
    return True


DETERMINISTIC_FIRST = "deterministic-first"
SEEDED_RANDOM = "seeded-random"


@dataclass(frozen=True)
class SimulationResult:
    run: Run
    deadlocked: bool
    notes: tuple[str, ...] = field(default=())

    @property
    def stopped(self) -> str:
        return "deadlock" if self.deadlocked else "max-steps"


def simulate(machine: Machine, start: Configuration, *,
             policy: str = DETERMINISTIC_FIRST, max_steps: int = 1000,
             injections: frozenset[int] | set[int] = frozenset(),
             mode: Mode = Mode.LAZY, seed: int | None = None) -> SimulationResult:
    """Drive a run from ``start``, optionally forcing insertion faults.

    ``deterministic-first`` picks the lowest-indexed enabled step (which
    prefers a consuming read over its insertion twin); ``seeded-random``
    picks uniformly using ``seed``.  At every step index in ``injections``
    whose chosen transition is a read, the insertion variant is forced; a
    non-read choice there is reported in the notes, not fatal.
    """
    if policy not in (DETERMINISTIC_FIRST, SEEDED_RANDOM):
        raise ValueError(f"unknown policy {policy!r}")
    if max_steps < 0:
        raise ValueError("max_steps must be non-negative")
    injections = frozenset(injections)
    for index in injections:
        if not (0 <= index < max_steps):
            raise ValueError(f"injection index {index} out of range "
                             f"(max_steps={max_steps})")
    if injections and mode is Mode.ERROR_FREE:
        raise ValueError("insertion faults require lazy mode")

    rng = random.Random(seed)
    notes: list[str] = []
    conf = start
    steps: list[Step] = []
    deadlocked = False
    for i in range(max_steps):
        enabled = enabled_steps(machine, conf, mode)
        if not enabled:
            deadlocked = True
            break
        step = enabled[0] if policy == DETERMINISTIC_FIRST else rng.choice(enabled)
        if i in injections:
            if step.transition.label.kind is LabelKind.READ:
                if step.variant is StepVariant.CONSUME_READ:
                    step = next(s for s in enabled
                                if s.transition == step.transition
                                and s.variant is StepVariant.INSERTION_READ)
            else:
                notes.append(f"injection at step {i} ignored: "
                             f"chosen transition {step.transition} is not a read")
        steps.append(step)
        conf = step.after

    unused = sorted(i for i in injections if i >= len(steps))
    if unused:
        notes.append(f"injections at steps {unused} never reached: "
                     f"run ended after {len(steps)} step(s)")
    return SimulationResult(Run(start, tuple(steps), mode), deadlocked, tuple(notes))


def run_trace(run: Run) -> list[dict]:
    """Trace entries for a run: state, label, variant, contents after."""
    trace = []
    for step in run.steps:
        trace.append({
            "state": step.after.state,
            "label": step.transition.label.to_json(),
            "variant": step.variant.value,
            "contents_after": {name: list(word) for name, word in step.after.contents},
        })
    return trace


#: JSON schema for the `simulate` command payload.
TRACE_SCHEMA = {
    "type": "object",
    "required": ["machine", "mode", "start", "steps", "stopped", "notes"],
    "properties": {
        "machine": {"type": "string"},
        "mode": {"enum": [m.value for m in Mode]},
        "start": {
            "type": "object",
            "required": ["state", "contents"],
            "properties": {
                "state": {"type": "string"},
                "contents": {
                    "type": "object",
                    "additionalProperties": {"type": "array", "items": {"type": "string"}},
                },
            },
        },
        "steps": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["state", "label", "variant", "contents_after"],
                "properties": {
                    "state": {"type": "string"},
                    "label": {
                        "type": "object",
                        "required": ["kind", "channel"],
                        "properties": {
                            "kind": {"enum": [k.value for k in LabelKind]},
                            "channel": {"type": "string"},
                            "letter": {"type": "string"},
                            "text": {"type": "string"},
                        },
                    },
                    "variant": {"enum": [v.value for v in StepVariant]},
                    "contents_after": {
                        "type": "object",
                        "additionalProperties": {"type": "array", "items": {"type": "string"}},
                    },
                },
            },
        },
        "stopped": {"enum": ["deadlock", "max-steps"]},
        "notes": {"type": "array", "items": {"type": "string"}},
    },
}
