"""Counter gadgets and the counter-program compiler.

A level-k gadget implements a counter bounded by 2⇑k (a tower of k twos)
with operations inc, dec, reset, and iszero.  Level 1 keeps its single bit
in the control state.  Level k ≥ 2 stores 2⇑(k−1) binary digits on a data
channel, least significant bit at the head, and uses the level-(k−1) counter
to count digits while streaming them to a scratch channel and back:

* inc flips leading digits while carrying (read x, write 1−x) until a 0 is
  consumed or the digit counter wraps, then streams the remainder unchanged;
* dec mirrors inc with the borrow stopping at a consumed 1;
* reset streams the digits out as 0s;
* iszero streams digits unchanged, recording in control whether a 1 was
  seen, and exits through the matching port.

After the outgoing stream each operation checks the source channel is empty,
streams the digits back while counting again, and checks the scratch channel
is empty.  The digit counter, not the channel, decides when to stop reading,
so a spontaneously inserted message leaves a letter behind and the next
emptiness test deadlocks the machine: a clean configuration (data channel at
exactly 2⇑(k−1) digits, scratch empty) is restored on every completed
operation or the machine halts.

Gadgets are built by inlining: each sub-counter operation call stamps a
fresh copy of the sub-operation body, and the level-1 counter is unrolled at
build time (its two values become duplicated control flow, which is the
product construction in another guise).  Pure control glue uses emptiness
tests on a dedicated pad channel that nothing ever writes or reads, so the
tests are always enabled; single-exit glue chains are contracted before the
machine is finalized.

A two-counter program is compiled against two disjoint gadget towers plus a
boot preamble that writes the clean all-zero channel contents, entering the
program at instruction 0.  Halt becomes a deadlock state.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

from .model import (Label, LabelKind, Machine, ModelError, Transition, Word,
                    empty_test, read, write)
from .semantics import (DETERMINISTIC_FIRST, Mode, SimulationResult,
                        StepVariant, simulate)

#: Channel used for control-glue emptiness tests; never written, never read.
PAD_CHANNEL = "z"

LETTERS = ("0", "1")

OPS = ("inc", "dec", "reset", "iszero")

LEVEL_GUARD = 4


class ProgramError(ModelError):
    """Invalid counter program."""


def tetration_int(m: int) -> int:
    """2⇑m as an exact integer; refuses heights whose value cannot be held."""
    if m < 1:
        raise ValueError("tetration is defined for m >= 1")
    if m > 5:
        raise ValueError(f"2⇑{m} does not fit in memory")
    value = 1
    for _ in range(m):
        value = 2 ** value
    return value


def _guard_level(level: int, allow_large: bool) -> None:
    if level < 1:
        raise ValueError("counter level must be at least 1")
    if level > LEVEL_GUARD and not allow_large:
        raise ValueError(
            f"level {level} exceeds the desk-scale guard ({LEVEL_GUARD}); "
            "pass allow_large=True to override")


# -- counter programs ----------------------------------------------------------


@dataclass(frozen=True)
class Inc:
    counter: str
    goto: int


@dataclass(frozen=True)
class Dec:
    counter: str
    goto: int


@dataclass(frozen=True)
class Reset:
    counter: str
    goto: int


@dataclass(frozen=True)
class IfZero:
    counter: str
    then_target: int
    else_target: int


@dataclass(frozen=True)
class Halt:
    pass


Instruction = Inc | Dec | Reset | IfZero | Halt

COUNTERS = ("u1", "u2")


@dataclass(frozen=True)
class CounterProgram:
    """A deterministic two-counter program; counters are 2⇑level-bounded."""

    name: str
    level: int
    instructions: tuple[Instruction, ...]

    def __post_init__(self):
        if self.level < 1:
            raise ProgramError("level must be at least 1")
        if not self.instructions:
            raise ProgramError("program needs at least one instruction")
        for index, instr in enumerate(self.instructions):
            if isinstance(instr, Halt):
                continue
            if instr.counter not in COUNTERS:
                raise ProgramError(
                    f"instruction {index}: unknown counter {instr.counter!r}")
            targets = ((instr.then_target, instr.else_target)
                       if isinstance(instr, IfZero) else (instr.goto,))
            for target in targets:
                if not 0 <= target < len(self.instructions):
                    raise ProgramError(
                        f"instruction {index}: branch target {target} out of range")


def parse_counter_program(text: str) -> CounterProgram:
    """Parse a ``.cm`` document::

        program NAME
        level K
        0: inc u1 goto 1
        1: ifzero u1 goto 2 else 0
        2: halt
    """
    name: str | None = None
    level: int | None = None
    entries: dict[int, Instruction] = {}

    for lineno, raw in enumerate(text.splitlines(), start=1):
        tokens = raw.split("#", 1)[0].split()
        if not tokens:
            continue

        def fail(message: str):
            raise ProgramError(f"line {lineno}: {message}")

        if tokens[0] == "program":
            if len(tokens) != 2:
                fail("expected: program NAME")
            if name is not None:
                fail("duplicate program header")
            name = tokens[1]
            continue
        if tokens[0] == "level":
            if len(tokens) != 2 or not tokens[1].isdigit():
                fail("expected: level K")
            if level is not None:
                fail("duplicate level line")
            level = int(tokens[1])
            continue
        if not tokens[0].endswith(":") or not tokens[0][:-1].isdigit():
            fail(f"expected an instruction index, got {tokens[0]!r}")
        index = int(tokens[0][:-1])
        if index in entries:
            fail(f"duplicate instruction index {index}")
        body = tokens[1:]
        if not body:
            fail("missing instruction")
        keyword = body[0]
        if keyword == "halt":
            if len(body) != 1:
                fail("halt takes no arguments")
            entries[index] = Halt()
        elif keyword in ("inc", "dec", "reset"):
            if len(body) != 4 or body[2] != "goto" or not body[3].isdigit():
                fail(f"expected: {keyword} COUNTER goto TARGET")
            cls = {"inc": Inc, "dec": Dec, "reset": Reset}[keyword]
            entries[index] = cls(body[1], int(body[3]))
        elif keyword == "ifzero":
            if (len(body) != 6 or body[2] != "goto" or body[4] != "else"
                    or not body[3].isdigit() or not body[5].isdigit()):
                fail("expected: ifzero COUNTER goto TARGET else TARGET")
            entries[index] = IfZero(body[1], int(body[3]), int(body[5]))
        else:
            fail(f"unknown instruction {keyword!r}")

    if name is None:
        raise ProgramError("missing program header")
    if level is None:
        raise ProgramError("missing level line")
    if sorted(entries) != list(range(len(entries))):
        raise ProgramError("instruction indices must be contiguous from 0")
    instructions = tuple(entries[i] for i in range(len(entries)))
    return CounterProgram(name, level, instructions)


def serialize_counter_program(program: CounterProgram) -> str:
    lines = [f"program {program.name}", f"level {program.level}"]
    for index, instr in enumerate(program.instructions):
        if isinstance(instr, Halt):
            lines.append(f"{index}: halt")
        elif isinstance(instr, IfZero):
            lines.append(f"{index}: ifzero {instr.counter} "
                         f"goto {instr.then_target} else {instr.else_target}")
        else:
            keyword = {Inc: "inc", Dec: "dec", Reset: "reset"}[type(instr)]
            lines.append(f"{index}: {keyword} {instr.counter} goto {instr.goto}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class InterpretResult:
    halted: bool
    steps: int
    counters: tuple[int, int]


def interpret_counter_program(program: CounterProgram,
                              max_steps: int = 1_000_000) -> InterpretResult:
    """Reference big-integer interpreter: inc/dec wrap modulo 2⇑level."""
    modulus = tetration_int(program.level)
    counters = {"u1": 0, "u2": 0}
    pc = 0
    steps = 0
    while steps < max_steps:
        instr = program.instructions[pc]
        if isinstance(instr, Halt):
            return InterpretResult(True, steps, (counters["u1"], counters["u2"]))
        if isinstance(instr, Inc):
            counters[instr.counter] = (counters[instr.counter] + 1) % modulus
            pc = instr.goto
        elif isinstance(instr, Dec):
            counters[instr.counter] = (counters[instr.counter] - 1) % modulus
            pc = instr.goto
        elif isinstance(instr, Reset):
            counters[instr.counter] = 0
            pc = instr.goto
        else:
            pc = (instr.then_target if counters[instr.counter] == 0
                  else instr.else_target)
        steps += 1
    return InterpretResult(False, steps, (counters["u1"], counters["u2"]))


# -- build-time control-flow graphs ---------------------------------------------


class _Graph:
    """Mutable CFG under construction; edge label None is control glue (ε)."""

    def __init__(self):
        self.counter = 0
        self.nodes: set[str] = set()
        self.edges: list[tuple[str, Label | None, str]] = []

    def fresh(self, tag: str) -> str:
        self.counter += 1
        name = f"{tag}.{self.counter}"
        self.nodes.add(name)
        return name

    def named(self, name: str) -> str:
        self.nodes.add(name)
        return name

    def instance_prefix(self, tag: str) -> str:
        self.counter += 1
        return f"{tag}.{self.counter}:"

    def edge(self, src: str, label: Label | None, dst: str) -> None:
        self.nodes.add(src)
        self.nodes.add(dst)
        self.edges.append((src, label, dst))

    def eps(self, src: str, dst: str) -> None:
        self.edge(src, None, dst)

    def step_from(self, src: str, label: Label) -> str:
        dst = self.fresh("s")
        self.edge(src, label, dst)
        return dst


def _contract_glue(nodes: set[str], edges: list, protect: set[str]):
    """Contract unprotected nodes whose only outgoing edge is a single ε.

    Deterministic single-ε nodes add steps without changing behaviour, so a
    chain a →ε b →ε c collapses onto its terminal.  ε-cycles are kept as a
    self-loop on one representative: they are genuine infinite loops.
    """
    out: dict[str, list] = {}
    for e in edges:
        out.setdefault(e[0], []).append(e)
    contractible = {
        s for s in nodes
        if s not in protect
        and len(out.get(s, ())) == 1
        and out[s][0][1] is None
        and out[s][0][2] != s
    }
    resolve: dict[str, str] = {}

    def find(start: str) -> str:
        chain: list[str] = []
        seen: set[str] = set()
        current = start
        while current in contractible and current not in resolve:
            if current in seen:
                break  # ε-cycle: current becomes its own representative
            seen.add(current)
            chain.append(current)
            current = out[current][0][2]
        target = resolve.get(current, current)
        for member in chain:
            resolve[member] = target
        # a cycle representative resolves to itself
        resolve.setdefault(current, target if current not in seen else current)
        return resolve.get(start, start)

    for node in list(nodes):
        find(node)
    for node in nodes:
        resolve.setdefault(node, node)

    new_nodes = {node for node in nodes if resolve[node] == node}
    new_edges = []
    for src, label, dst in edges:
        if resolve[src] != src:
            continue  # the node vanished; its single ε edge goes with it
        new_edges.append((src, label, resolve[dst]))
    return new_nodes, new_edges


def _finalize(g: _Graph, *, name: str, init: str, protect: Iterable[str],
              channels: Iterable[str]) -> Machine:
    protected = set(protect) | {init}
    nodes, edges = _contract_glue(set(g.nodes), g.edges, protected)
    transitions = []
    for src, label, dst in edges:
        if label is None:
            label = empty_test(PAD_CHANNEL)
        transitions.append(Transition(src, label, dst))
    return Machine.make(name, init, alphabet=LETTERS,
                        channels=tuple(channels) + (PAD_CHANNEL,),
                        states=nodes, transitions=transitions)


# -- gadget construction ---------------------------------------------------------


@dataclass(frozen=True)
class _Namer:
    """Channel naming for one counter tower."""

    prefix: str = ""

    def c(self, j: int) -> str:
        return f"{self.prefix}c{j}"

    def d(self, j: int) -> str:
        return f"{self.prefix}d{j}"

    def data_channels(self, level: int) -> tuple[str, ...]:
        names = []
        for j in range(1, level):
            names.append(self.c(j))
            names.append(self.d(j))
        return tuple(names)


@dataclass(frozen=True)
class _Pos:
    """A build position: control node plus the unrolled level-1 bit."""

    node: str
    bit: int


class _BitSub:
    """Level-1 sub-counter, tracked at build time (two values, no channels).

    reset/inc are pure bookkeeping and iszero is a build-time branch, so the
    two counter values surface as duplicated control flow in the caller.
    """

    static = True

    def reset(self, g: _Graph, pos: _Pos) -> _Pos:
        return _Pos(pos.node, 0)

    def inc(self, g: _Graph, pos: _Pos) -> _Pos:
        return _Pos(pos.node, 1 - pos.bit)

    def iszero(self, g: _Graph, pos: _Pos) -> list[tuple[bool, _Pos]]:
        return [(pos.bit == 0, pos)]


class _RuntimeSub:
    """Level-(k−1 ≥ 2) sub-counter: operations inline stamped body copies."""

    static = False

    def __init__(self, level: int, namer: _Namer):
        self.level = level
        self.namer = namer

    def _inline(self, g: _Graph, op: str, pos: _Pos) -> dict[str, str]:
        entry, exits = _stamp_op(g, self.level, op, self.namer)
        g.eps(pos.node, entry)
        return exits

    def reset(self, g: _Graph, pos: _Pos) -> _Pos:
        return _Pos(self._inline(g, "reset", pos)["done"], 0)

    def inc(self, g: _Graph, pos: _Pos) -> _Pos:
        return _Pos(self._inline(g, "inc", pos)["done"], 0)

    def iszero(self, g: _Graph, pos: _Pos) -> list[tuple[bool, _Pos]]:
        exits = self._inline(g, "iszero", pos)
        return [(True, _Pos(exits["zero"], 0)),
                (False, _Pos(exits["nonzero"], 0))]


def _transfer_loop(g: _Graph, sub, src: str, dst: str,
                   write_letter: Callable[[int, int], str],
                   update_tag: Callable[[int, int], int],
                   until_x: int | None,
                   on_exit: Callable[[_Pos, int], None]):
    """repeat: read src?x; write dst!write_letter(x, tag); sub.inc
    until sub.iszero (checked first) or x == until_x.

    Returns head_for(tag, bit): the loop header for a given control tag and
    level-1 bit, built on demand.  With a build-time sub-counter the loop
    unrolls (headers for successive bits), with a runtime sub-counter the
    not-zero branch loops back to the header.
    """
    heads: dict[tuple[int, int], str] = {}

    def head_for(tag: int, bit: int) -> str:
        key = (tag, bit)
        if key in heads:
            return heads[key]
        node = g.fresh("xfer")
        heads[key] = node
        for x in (0, 1):
            after_read = g.step_from(node, read(src, str(x)))
            new_tag = update_tag(x, tag)
            after_write = g.step_from(after_read, write(dst, write_letter(x, tag)))
            pos = sub.inc(g, _Pos(after_write, bit))
            for is_zero, branch in sub.iszero(g, pos):
                if is_zero or (until_x is not None and x == until_x):
                    on_exit(branch, new_tag)
                else:
                    g.eps(branch.node, head_for(new_tag, branch.bit))
        return node

    return head_for


def _while_loop(g: _Graph, sub, src: str, dst: str,
                write_letter: Callable[[int, int], str],
                update_tag: Callable[[int, int], int],
                on_exit: Callable[[_Pos, int], None]):
    """while not sub.iszero: read src?x; write dst!...; sub.inc"""
    heads: dict[tuple[int, int], str] = {}

    def head_for(tag: int, bit: int) -> str:
        key = (tag, bit)
        if key in heads:
            return heads[key]
        node = g.fresh("drain")
        heads[key] = node
        for is_zero, branch in sub.iszero(g, _Pos(node, bit)):
            if is_zero:
                on_exit(branch, tag)
                continue
            for x in (0, 1):
                after_read = g.step_from(branch.node, read(src, str(x)))
                new_tag = update_tag(x, tag)
                after_write = g.step_from(after_read,
                                          write(dst, write_letter(x, tag)))
                pos = sub.inc(g, _Pos(after_write, branch.bit))
                g.eps(pos.node, head_for(new_tag, pos.bit))
        return node

    return head_for


def _keep_tag(x: int, tag: int) -> int:
    return tag


def _build_op_body(g: _Graph, sub, op: str, data: str, scratch: str):
    """Emit one operation body; returns (entry node, exit nodes by outcome)."""
    entry = g.fresh(op)
    if op == "iszero":
        exits = {"zero": g.fresh("exit_zero"), "nonzero": g.fresh("exit_nonzero")}

        def final(tag: int) -> str:
            return exits["zero"] if tag == 0 else exits["nonzero"]
    else:
        exits = {"done": g.fresh("exit_done")}

        def final(tag: int) -> str:
            return exits["done"]

    # return stream: scratch back to data, counting to a wrap, then the
    # scratch channel must be empty
    scratch_checks: dict[int, str] = {}

    def to_exit(pos: _Pos, tag: int) -> None:
        if tag not in scratch_checks:
            node = g.fresh("check_scratch")
            after = g.step_from(node, empty_test(scratch))
            g.eps(after, final(tag))
            scratch_checks[tag] = node
        g.eps(pos.node, scratch_checks[tag])

    back = _transfer_loop(g, sub, scratch, data,
                          write_letter=lambda x, tag: str(x),
                          update_tag=_keep_tag, until_x=None, on_exit=to_exit)

    data_checks: dict[int, str] = {}

    def to_back(pos: _Pos, tag: int) -> None:
        if tag not in data_checks:
            node = g.fresh("check_data")
            after = g.step_from(node, empty_test(data))
            g.eps(after, back(tag, 0))
            data_checks[tag] = node
        g.eps(pos.node, data_checks[tag])

    if op in ("inc", "dec"):
        drain = _while_loop(g, sub, data, scratch,
                            write_letter=lambda x, tag: str(x),
                            update_tag=_keep_tag, on_exit=to_back)
        flip = _transfer_loop(g, sub, data, scratch,
                              write_letter=lambda x, tag: str(1 - x),
                              update_tag=_keep_tag,
                              until_x=0 if op == "inc" else 1,
                              on_exit=lambda pos, tag: g.eps(
                                  pos.node, drain(tag, pos.bit)))
        first = flip
    elif op == "reset":
        first = _transfer_loop(g, sub, data, scratch,
                               write_letter=lambda x, tag: "0",
                               update_tag=_keep_tag, until_x=None,
                               on_exit=to_back)
    else:  # iszero: stream unchanged, record any 1 in the control tag
        first = _transfer_loop(g, sub, data, scratch,
                               write_letter=lambda x, tag: str(x),
                               update_tag=lambda x, tag: tag | x,
                               until_x=None, on_exit=to_back)

    start = sub.reset(g, _Pos(entry, 0))
    g.eps(start.node, first(0, start.bit))
    return entry, exits


_TEMPLATES: dict[tuple[int, str, str], tuple] = {}


def _op_template(level: int, op: str, namer: _Namer):
    """Fully inlined body of one operation at a level; cached."""
    key = (level, op, namer.prefix)
    if key not in _TEMPLATES:
        g = _Graph()
        sub = _BitSub() if level == 2 else _RuntimeSub(level - 1, namer)
        entry, exits = _build_op_body(g, sub, op, namer.c(level - 1),
                                      namer.d(level - 1))
        _TEMPLATES[key] = (entry, exits, tuple(g.edges), frozenset(g.nodes))
    return _TEMPLATES[key]


def _stamp_op(g: _Graph, level: int, op: str, namer: _Namer):
    """Copy an operation template into ``g`` under a fresh name prefix."""
    entry, exits, edges, nodes = _op_template(level, op, namer)
    prefix = g.instance_prefix(f"{op}{level}")
    for node in nodes:
        g.named(prefix + node)
    for src, label, dst in edges:
        g.edge(prefix + src, label, prefix + dst)
    return prefix + entry, {tag: prefix + node for tag, node in exits.items()}


@dataclass(frozen=True)
class CleanShape:
    """Per-level channel-size expectations of a healthy tower: each data
    channel c_j holds exactly 2⇑j digits and each scratch channel d_j is
    empty."""

    level: int
    prefix: str = ""

    def expected_sizes(self) -> dict[str, int]:
        namer = _Namer(self.prefix)
        sizes: dict[str, int] = {}
        for j in range(1, self.level):
            sizes[namer.c(j)] = tetration_int(j)
            sizes[namer.d(j)] = 0
        return sizes

    def holds(self, contents: Mapping[str, Word]) -> bool:
        return all(len(contents.get(channel, ())) == size
                   for channel, size in self.expected_sizes().items())


def encode_counter(level: int, value: int, prefix: str = "") -> dict[str, str]:
    """Clean channel contents representing ``value``: binary digits of the
    value on the top data channel (LSB at the head), zeros below, scratch
    channels empty."""
    modulus = tetration_int(level)
    if not 0 <= value < modulus:
        raise ValueError(f"value {value} out of range for level {level}")
    if level == 1:
        return {}
    namer = _Namer(prefix)
    contents: dict[str, str] = {}
    for j in range(1, level - 1):
        contents[namer.c(j)] = "0" * tetration_int(j)
        contents[namer.d(j)] = ""
    digits = tetration_int(level - 1)
    contents[namer.c(level - 1)] = "".join(
        str((value >> i) & 1) for i in range(digits))
    contents[namer.d(level - 1)] = ""
    return contents


def decode_counter(level: int, contents: Mapping[str, Word], prefix: str = "") -> int:
    """Read the counter value back from channel contents."""
    if level == 1:
        raise ValueError("a level-1 counter lives in the control state")
    namer = _Namer(prefix)
    word = contents[namer.c(level - 1)]
    if len(word) != tetration_int(level - 1):
        raise ValueError(
            f"channel {namer.c(level - 1)} is not clean: {len(word)} digits")
    return sum((1 << i) for i, letter in enumerate(word) if letter == "1")


@dataclass(frozen=True)
class CounterGadget:
    """A counter at one tower level: machine fragment plus operation ports.

    For level 1 the fragment is just the two value states and operations are
    control maps; they are materialized on demand by ``op_script_machine``.
    """

    level: int
    prefix: str
    channels: tuple[str, ...]
    states: frozenset[str]
    transitions: tuple[Transition, ...]
    ports: tuple[tuple[str, tuple[tuple[str, str], ...]], ...]
    value_states: tuple[str, str] | None = None

    def port(self, op: str) -> dict[str, str]:
        for name, entries in self.ports:
            if name == op:
                return dict(entries)
        raise KeyError(op)

    def size(self) -> int:
        return len(self.states) + len(self.transitions)


def build_counter_gadget(level: int, prefix: str = "", *,
                         allow_large: bool = False) -> CounterGadget:
    """Build the gadget for one 2⇑level-bounded counter."""
    _guard_level(level, allow_large)
    if level == 1:
        states = (f"{prefix}v0", f"{prefix}v1")
        return CounterGadget(level=1, prefix=prefix, channels=(),
                             states=frozenset(states), transitions=(),
                             ports=(), value_states=states)

    namer = _Namer(prefix)
    g = _Graph()
    ports = []
    protect: set[str] = set()
    for op in OPS:
        entry, exits = _stamp_op(g, level, op, namer)
        ports.append((op, (("entry", entry),) + tuple(sorted(exits.items()))))
        protect.add(entry)
        protect.update(exits.values())

    nodes, edges = _contract_glue(set(g.nodes), g.edges, protect)
    transitions = tuple(
        Transition(src, empty_test(PAD_CHANNEL) if label is None else label, dst)
        for src, label, dst in edges)
    return CounterGadget(
        level=level, prefix=prefix,
        channels=namer.data_channels(level) + (PAD_CHANNEL,),
        states=frozenset(nodes), transitions=transitions,
        ports=tuple(ports))


# -- driving gadget operations ---------------------------------------------------


@dataclass(frozen=True)
class ScriptMachine:
    """A machine running a fixed operation sequence on one counter.

    ``entries`` maps the starting counter value's level-1 bit to the initial
    control state (levels ≥ 2 have a single entry; the value is read from
    the channels).  ``finals`` maps halt states to (outcome, value-bit or
    None).
    """

    machine: Machine
    level: int
    prefix: str
    entries: tuple[tuple[int, str], ...]
    finals: tuple[tuple[str, str, int | None], ...]

    def entry_for(self, value: int) -> str:
        bit = value if self.level == 1 else 0
        for key, state in self.entries:
            if key == bit:
                return state
        raise KeyError(bit)

    def final_outcome(self, state: str) -> tuple[str, int | None] | None:
        for name, outcome, bit in self.finals:
            if name == state:
                return outcome, bit
        return None


def op_script_machine(gadget: CounterGadget, ops: Sequence[str]) -> ScriptMachine:
    """A standalone machine running ``ops`` in order on the gadget's counter.

    Every operation but the last must be single-exit (inc/dec/reset); a final
    iszero keeps both ports as distinct halt states.
    """
    ops = tuple(ops)
    if not ops:
        raise ValueError("need at least one operation")
    for op in ops:
        if op not in OPS:
            raise ValueError(f"unknown operation {op!r}")
    if any(op == "iszero" for op in ops[:-1]):
        raise ValueError("iszero is only supported as the final operation")

    name = f"{gadget.prefix or 'u'}_level{gadget.level}_" + "_".join(ops)

    if gadget.level == 1:
        g = _Graph()
        entries = []
        finals = []
        for start_bit in (0, 1):
            bit = start_bit
            node = g.named(f"in{start_bit}")
            entries.append((start_bit, node))
            for op in ops[:-1]:
                bit = {"inc": 1 - bit, "dec": 1 - bit, "reset": 0}[op]
                nxt = g.fresh(f"b{bit}")
                g.eps(node, nxt)
                node = nxt
            last = ops[-1]
            if last == "iszero":
                outcome = "zero" if bit == 0 else "nonzero"
                final = g.named(f"{outcome}_v{bit}_from{start_bit}")
                g.eps(node, final)
                finals.append((final, outcome, bit))
            else:
                bit = {"inc": 1 - bit, "dec": 1 - bit, "reset": 0}[last]
                final = g.named(f"done_v{bit}_from{start_bit}")
                g.eps(node, final)
                finals.append((final, "done", bit))
        protect = {state for _, state in entries} | {state for state, _, _ in finals}
        machine = _finalize(g, name=name, init=entries[0][1], protect=protect,
                            channels=())
        return ScriptMachine(machine, 1, gadget.prefix, tuple(entries),
                             tuple(finals))

    namer = _Namer(gadget.prefix)
    g = _Graph()
    entry = g.named("begin")
    current = entry
    finals = []
    for op in ops[:-1]:
        op_entry, exits = _stamp_op(g, gadget.level, op, namer)
        g.eps(current, op_entry)
        current = exits["done"]
    op_entry, exits = _stamp_op(g, gadget.level, ops[-1], namer)
    g.eps(current, op_entry)
    for tag, state in sorted(exits.items()):
        final = g.named(f"end_{tag}")
        g.eps(state, final)
        finals.append((final, tag, None))
    protect = {entry} | {state for state, _, _ in finals}
    machine = _finalize(g, name=name, init=entry, protect=protect,
                        channels=namer.data_channels(gadget.level))
    return ScriptMachine(machine, gadget.level, gadget.prefix,
                         ((0, entry),), tuple(finals))


@dataclass(frozen=True)
class ScriptResult:
    outcome: str | None  # done/zero/nonzero, or None when the run got stuck
    value: int | None
    simulation: SimulationResult


def run_script(gadget: CounterGadget, ops: Sequence[str], start_value: int, *,
               mode: Mode = Mode.ERROR_FREE, max_steps: int = 500_000,
               injections: Iterable[int] = (),
               script: ScriptMachine | None = None) -> ScriptResult:
    """Run an operation sequence from a clean configuration encoding
    ``start_value`` and report the outcome port and final value."""
    sm = script or op_script_machine(gadget, ops)
    machine = sm.machine
    start = machine.configuration(
        sm.entry_for(start_value),
        encode_counter(gadget.level, start_value, gadget.prefix)
        if gadget.level > 1 else {})
    result = simulate(machine, start, policy=DETERMINISTIC_FIRST,
                      max_steps=max_steps, injections=set(injections), mode=mode)
    final = result.run.final
    outcome = sm.final_outcome(final.state)
    if outcome is None:
        return ScriptResult(None, None, result)
    tag, bit = outcome
    if gadget.level == 1:
        return ScriptResult(tag, bit, result)
    value = decode_counter(gadget.level, final.as_dict(), gadget.prefix)
    return ScriptResult(tag, value, result)


# -- compiling programs ----------------------------------------------------------


def compile_counter_program(program: CounterProgram, *,
                            allow_large: bool = False) -> Machine:
    """Compile a two-counter program into a channel machine with emptiness
    tests.  Both counters get disjoint gadget towers; a boot preamble writes
    the clean all-zero channel contents before instruction 0, and halt is a
    deadlock state."""
    _guard_level(program.level, allow_large)
    level = program.level
    namers = {"u1": _Namer("u1_"), "u2": _Namer("u2_")}
    g = _Graph()

    nodes: dict[tuple[int, tuple[int, ...]], str] = {}
    worklist: list[tuple[int, tuple[int, ...]]] = []

    def node_for(pc: int, ctx: tuple[int, ...]) -> str:
        key = (pc, ctx)
        if key not in nodes:
            suffix = "" if not ctx else f"@{ctx[0]}{ctx[1]}"
            nodes[key] = g.named(f"pc{pc}{suffix}")
            worklist.append(key)
        return nodes[key]

    start_ctx: tuple[int, ...] = (0, 0) if level == 1 else ()
    program_entry = node_for(0, start_ctx)

    while worklist:
        pc, ctx = worklist.pop()
        node = nodes[(pc, ctx)]
        instr = program.instructions[pc]
        if isinstance(instr, Halt):
            continue
        slot = COUNTERS.index(instr.counter)
        if level == 1:
            bit = ctx[slot]
            if isinstance(instr, IfZero):
                target = instr.then_target if bit == 0 else instr.else_target
                g.eps(node, node_for(target, ctx))
            else:
                new_bit = 0 if isinstance(instr, Reset) else 1 - bit
                new_ctx = tuple(new_bit if i == slot else b
                                for i, b in enumerate(ctx))
                g.eps(node, node_for(instr.goto, new_ctx))
        else:
            namer = namers[instr.counter]
            if isinstance(instr, IfZero):
                entry, exits = _stamp_op(g, level, "iszero", namer)
                g.eps(node, entry)
                g.eps(exits["zero"], node_for(instr.then_target, ctx))
                g.eps(exits["nonzero"], node_for(instr.else_target, ctx))
            else:
                op = {Inc: "inc", Dec: "dec", Reset: "reset"}[type(instr)]
                entry, exits = _stamp_op(g, level, op, namer)
                g.eps(node, entry)
                g.eps(exits["done"], node_for(instr.goto, ctx))

    channels: tuple[str, ...] = ()
    if level >= 2:
        init = g.named("boot")
        current = init
        for counter in COUNTERS:
            namer = namers[counter]
            for j in range(1, level):
                for _ in range(tetration_int(j)):
                    current = g.step_from(current, write(namer.c(j), "0"))
        g.eps(current, program_entry)
        channels = namers["u1"].data_channels(level) + \
            namers["u2"].data_channels(level)
    else:
        init = program_entry

    return _finalize(g, name=program.name, init=init, protect={init},
                     channels=channels)
