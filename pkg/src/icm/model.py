"""Machines, configurations, and the ``.icm`` interchange format.

An insertion channel machine is a finite control automaton over a set of
fifo channels.  Transitions write a letter to a channel tail, read a letter
from a channel head, test a channel for emptiness, or test a channel for the
absence of a letter.  This module owns the static model: construction and
validation, the line-oriented ``.icm`` file format, and the rewrite that
replaces every emptiness test by a chain of occurrence tests (one per
alphabet letter).
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Iterable, Mapping, Sequence


class ModelError(Exception):
    """Invalid machine, configuration, or rewrite request."""


class MachineFormatError(ModelError):
    """Malformed ``.icm`` document."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        if line is not None and column is not None:
            message = f"line {line}, column {column}: {message}"
        elif line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


#: A channel word.  Letters are arbitrary tokens, so words are tuples of
#: letters rather than plain strings ("ab" as a word is ("a", "b")).
Word = tuple[str, ...]

EMPTY_WORD: Word = ()


def as_word(value: str | Iterable[str]) -> Word:
    """Coerce to a Word.  A plain string is split into single-char letters."""
    if isinstance(value, str):
        return tuple(value)
    return tuple(value)


def format_word(word: Word) -> str:
    if not word:
        return "ε"
    if all(len(letter) == 1 for letter in word):
        return "".join(word)
    return " ".join(word)


class LabelKind(str, Enum):
    WRITE = "write"
    READ = "read"
    EMPTY_TEST = "empty"
    OCCURRENCE_TEST = "notin"


@dataclass(frozen=True)
class Label:
    """A transition label: write/read a letter, or test a channel.

    Emptiness tests carry no letter; every other kind carries exactly one.
    """

    kind: LabelKind
    channel: str
    letter: str | None = None

    def __post_init__(self):
        if self.kind is LabelKind.EMPTY_TEST:
            if self.letter is not None:
                raise ModelError("emptiness test carries no letter")
        elif not self.letter:
            raise ModelError(f"{self.kind.value} label requires a letter")

    def __str__(self) -> str:
        if self.kind is LabelKind.WRITE:
            return f"{self.channel}!{self.letter}"
        if self.kind is LabelKind.READ:
            return f"{self.channel}?{self.letter}"
        if self.kind is LabelKind.EMPTY_TEST:
            return f"{self.channel}=∅"
        return f"{self.letter}∉{self.channel}"

    def to_json(self) -> dict:
        data = {"kind": self.kind.value, "channel": self.channel, "text": str(self)}
        if self.letter is not None:
            data["letter"] = self.letter
        return data


def write(channel: str, letter: str) -> Label:
    return Label(LabelKind.WRITE, channel, letter)


def read(channel: str, letter: str) -> Label:
    return Label(LabelKind.READ, channel, letter)


def empty_test(channel: str) -> Label:
    return Label(LabelKind.EMPTY_TEST, channel)


def occurrence_test(channel: str, letter: str) -> Label:
    return Label(LabelKind.OCCURRENCE_TEST, channel, letter)


@dataclass(frozen=True)
class Transition:
    source: str
    label: Label
    target: str

    def __str__(self) -> str:
        return f"{self.source} --{self.label}--> {self.target}"


def _check_identifier(token: str, what: str) -> None:
    if not token or any(ch.isspace() for ch in token) or "#" in token:
        raise ModelError(f"invalid {what} {token!r}: must be a non-empty token "
                         "without whitespace or '#'")


@dataclass(frozen=True)
class Machine:
    """An insertion channel machine (control states, channels, transitions)."""

    name: str
    states: frozenset[str]
    init: str
    alphabet: frozenset[str]
    channels: frozenset[str]
    transitions: tuple[Transition, ...]

    def __post_init__(self):
        for token, what in [(self.name, "machine name"), (self.init, "state")]:
            _check_identifier(token, what)
        for group, what in [(self.states, "state"), (self.alphabet, "letter"),
                            (self.channels, "channel")]:
            for token in group:
                _check_identifier(token, what)
        if self.init not in self.states:
            raise ModelError(f"initial state {self.init!r} not among states")
        for t in self.transitions:
            if t.source not in self.states or t.target not in self.states:
                raise ModelError(f"transition {t} uses an undeclared state")
            if t.label.channel not in self.channels:
                raise ModelError(f"undeclared channel {t.label.channel!r} in {t}")
            if t.label.letter is not None and t.label.letter not in self.alphabet:
                raise ModelError(f"undeclared letter {t.label.letter!r} in {t}")

    @classmethod
    def make(cls, name: str, init: str, *, alphabet: Iterable[str] = (),
             channels: Iterable[str] = (), states: Iterable[str] = (),
             transitions: Iterable[Transition] = ()) -> "Machine":
        """Build a machine, completing the state set from init and endpoints
        and dropping exact duplicate transitions (the relation is a set)."""
        trans: list[Transition] = []
        seen: set[Transition] = set()
        for t in transitions:
            if t not in seen:
                seen.add(t)
                trans.append(t)
        all_states = set(states) | {init}
        for t in trans:
            all_states.add(t.source)
            all_states.add(t.target)
        return cls(name=name, states=frozenset(all_states), init=init,
                   alphabet=frozenset(alphabet), channels=frozenset(channels),
                   transitions=tuple(trans))

    # -- configurations ----------------------------------------------------

    def configuration(self, state: str, contents: Mapping[str, str | Iterable[str]] | None = None,
                      ) -> "Configuration":
        """A configuration of this machine; missing channels default to ε."""
        if state not in self.states:
            raise ModelError(f"unknown state {state!r}")
        contents = contents or {}
        words: dict[str, Word] = {}
        for channel, value in contents.items():
            if channel not in self.channels:
                raise ModelError(f"unknown channel {channel!r}")
            word = as_word(value)
            for letter in word:
                if letter not in self.alphabet:
                    raise ModelError(f"unknown letter {letter!r} in contents of {channel!r}")
            words[channel] = word
        for channel in self.channels:
            words.setdefault(channel, EMPTY_WORD)
        return Configuration(state, tuple(sorted(words.items())))

    def initial_configuration(self) -> "Configuration":
        return self.configuration(self.init)

    def has_tests(self) -> bool:
        return any(t.label.kind in (LabelKind.EMPTY_TEST, LabelKind.OCCURRENCE_TEST)
                   for t in self.transitions)

    def has_empty_tests(self) -> bool:
        return any(t.label.kind is LabelKind.EMPTY_TEST for t in self.transitions)

    def size(self) -> int:
        """States plus transitions; the usual size measure for growth checks."""
        return len(self.states) + len(self.transitions)


@lru_cache(maxsize=256)
def outgoing_index(machine: Machine) -> dict[str, tuple[Transition, ...]]:
    """Transitions grouped by source state, in declaration order."""
    index: dict[str, list[Transition]] = {}
    for t in machine.transitions:
        index.setdefault(t.source, []).append(t)
    return {state: tuple(ts) for state, ts in index.items()}


@dataclass(frozen=True)
class Configuration:
    """A control state plus one finite word per channel.

    Contents are stored as a channel-sorted tuple so configurations are
    hashable and comparable.  Construct through Machine.configuration, which
    validates and fills in missing channels.
    """

    state: str
    contents: tuple[tuple[str, Word], ...]

    def word(self, channel: str) -> Word:
        for name, word in self.contents:
            if name == channel:
                return word
        raise ModelError(f"unknown channel {channel!r}")

    def as_dict(self) -> dict[str, Word]:
        return dict(self.contents)

    def replace(self, state: str | None = None,
                channel_word: tuple[str, Word] | None = None) -> "Configuration":
        new_state = self.state if state is None else state
        if channel_word is None:
            return Configuration(new_state, self.contents)
        channel, word = channel_word
        items = tuple((name, word if name == channel else old)
                      for name, old in self.contents)
        return Configuration(new_state, items)

    def to_json(self) -> dict:
        return {"state": self.state,
                "contents": {name: list(word) for name, word in self.contents}}

    def __str__(self) -> str:
        inner = ", ".join(f"{name}↦{format_word(word)}" for name, word in self.contents)
        return f"({self.state}; {inner})"


def equal_on(a: Configuration, b: Configuration, channels: Iterable[str]) -> bool:
    """Same control state and identical contents on the given channels."""
    return a.state == b.state and all(a.word(c) == b.word(c) for c in channels)


# -- .icm format ------------------------------------------------------------

_LABEL_KEYWORDS = {
    "write": (LabelKind.WRITE, True),
    "read": (LabelKind.READ, True),
    "notin": (LabelKind.OCCURRENCE_TEST, True),
    "empty": (LabelKind.EMPTY_TEST, False),
}


def parse_machine(text: str) -> Machine:
    """Parse an ``.icm`` document.

    Grammar (one statement per line, ``#`` starts a comment)::

        machine NAME
        alphabet a b ...        # optional, repeatable
        channels c d ...        # optional, repeatable
        states q0 q1 ...        # optional, repeatable
        init q0
        trans SRC DST write CH LETTER
        trans SRC DST read  CH LETTER
        trans SRC DST notin CH LETTER
        trans SRC DST empty CH
    """
    name: str | None = None
    init: str | None = None
    alphabet: list[str] = []
    channels: list[str] = []
    states: list[str] = []
    raw_transitions: list[tuple[Transition, int, int]] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        tokens = line.split()
        if not tokens:
            continue

        def col(token_index: int) -> int:
            # best-effort column of the offending token in the raw line
            pos = 0
            for tok in tokens[:token_index + 1]:
                pos = line.index(tok, pos)
            return pos + 1

        keyword, args = tokens[0], tokens[1:]
        if keyword == "machine":
            if name is not None:
                raise MachineFormatError("duplicate machine header", lineno, col(0))
            if len(args) != 1:
                raise MachineFormatError("expected: machine NAME", lineno, col(0))
            name = args[0]
        elif keyword == "alphabet":
            alphabet.extend(args)
        elif keyword == "channels":
            channels.extend(args)
        elif keyword == "states":
            states.extend(args)
        elif keyword == "init":
            if len(args) != 1:
                raise MachineFormatError("expected: init STATE", lineno, col(0))
            if init is not None:
                raise MachineFormatError("duplicate init line", lineno, col(0))
            init = args[0]
        elif keyword == "trans":
            if len(args) < 3:
                raise MachineFormatError(
                    "expected: trans SRC DST KIND CH [LETTER]", lineno, col(0))
            src, dst, kind_token = args[0], args[1], args[2]
            if kind_token not in _LABEL_KEYWORDS:
                raise MachineFormatError(
                    f"unknown transition kind {kind_token!r}", lineno, col(2))
            kind, needs_letter = _LABEL_KEYWORDS[kind_token]
            expected = 5 if needs_letter else 4
            if len(args) != expected:
                raise MachineFormatError(
                    f"{kind_token} transition takes {expected - 3} argument(s) "
                    "after the channel" if not needs_letter else
                    f"expected: trans SRC DST {kind_token} CH LETTER",
                    lineno, col(0))
            channel = args[3]
            letter = args[4] if needs_letter else None
            try:
                label = Label(kind, channel, letter)
            except ModelError as exc:
                raise MachineFormatError(str(exc), lineno, col(3)) from exc
            raw_transitions.append((Transition(src, label, dst), lineno, col(3)))
        else:
            raise MachineFormatError(f"unknown keyword {keyword!r}", lineno, col(0))

    if name is None:
        raise MachineFormatError("missing machine header")
    if init is None:
        raise MachineFormatError("missing init line")

    # Validate channel/letter references with line positions before handing
    # off to the (position-blind) Machine validator.
    channel_set, alphabet_set = set(channels), set(alphabet)
    for transition, lineno, column in raw_transitions:
        label = transition.label
        if label.channel not in channel_set:
            raise MachineFormatError(
                f"undeclared channel {label.channel!r}", lineno, column)
        if label.letter is not None and label.letter not in alphabet_set:
            raise MachineFormatError(
                f"undeclared letter {label.letter!r}", lineno, column)

    try:
        return Machine.make(name, init, alphabet=alphabet, channels=channels,
                            states=states,
                            transitions=[t for t, _, _ in raw_transitions])
    except ModelError as exc:
        raise MachineFormatError(str(exc)) from exc


_KIND_KEYWORDS = {kind: keyword for keyword, (kind, _) in _LABEL_KEYWORDS.items()}


def serialize_machine(machine: Machine) -> str:
    """Render a machine as an ``.icm`` document.

    Declared sets are emitted sorted and transitions in declaration order, so
    parse(serialize(m)) == m.
    """
    lines = [f"machine {machine.name}"]
    if machine.alphabet:
        lines.append("alphabet " + " ".join(sorted(machine.alphabet)))
    if machine.channels:
        lines.append("channels " + " ".join(sorted(machine.channels)))
    lines.append("states " + " ".join(sorted(machine.states)))
    lines.append(f"init {machine.init}")
    for t in machine.transitions:
        keyword = _KIND_KEYWORDS[t.label.kind]
        parts = ["trans", t.source, t.target, keyword, t.label.channel]
        if t.label.letter is not None:
            parts.append(t.label.letter)
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


def normalize_empty_tests(machine: Machine) -> Machine:
    """Replace each emptiness test by a chain of occurrence tests.

    A transition ``q --(c=∅)--> q'`` becomes ``q --(a₁∉c)--> f₁ --(a₂∉c)-->
    ... --(aₙ∉c)--> q'`` over the alphabet in lexicographic order, with |Σ|−1
    fresh intermediate states.  A channel is empty exactly when no letter
    occurs in it, and neither kind of test changes contents, so one pass is
    enough and the rewrite is idempotent.  Machines without emptiness tests
    are returned unchanged.
    """
    if not machine.has_empty_tests():
        return machine
    letters = sorted(machine.alphabet)
    if not letters:
        raise ModelError(
            "cannot rewrite an emptiness test over an empty alphabet: "
            "the replacement chain would need one occurrence test per letter")

    used_names = set(machine.states)
    counters: dict[tuple[str, str], int] = {}

    def fresh(source: str, channel: str) -> str:
        key = (source, channel)
        while True:
            counters[key] = counters.get(key, 0) + 1
            name = f"{source}__empty_{channel}_{counters[key]}"
            if name not in used_names:
                used_names.add(name)
                return name

    new_transitions: list[Transition] = []
    for t in machine.transitions:
        if t.label.kind is not LabelKind.EMPTY_TEST:
            new_transitions.append(t)
            continue
        channel = t.label.channel
        current = t.source
        for i, letter in enumerate(letters):
            last = i == len(letters) - 1
            nxt = t.target if last else fresh(t.source, channel)
            new_transitions.append(
                Transition(current, occurrence_test(channel, letter), nxt))
            current = nxt

    return Machine.make(machine.name, machine.init, alphabet=machine.alphabet,
                        channels=machine.channels, states=used_names,
                        transitions=new_transitions)
