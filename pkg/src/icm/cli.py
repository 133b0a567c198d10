"""Command-line front end.

Exit codes: 0 for a definite verdict or plain success, 2 for an indefinite
outcome (unknown verdict, budget-limited search, interpreter cutoff), 1 for
usage or input errors.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .analysis import (Budget, bounded_reachability, check_termination,
                       check_termination_from, verdict_to_json)
from .bounds import run_length_bound
from .model import (Machine, ModelError, normalize_empty_tests, parse_machine,
                    serialize_machine)
from .semantics import (DETERMINISTIC_FIRST, SEEDED_RANDOM, Mode, run_trace,
                        simulate)
from .yardstick import (ProgramError, compile_counter_program,
                        interpret_counter_program, parse_counter_program)


def _load_machine(path: str) -> Machine:
    return parse_machine(Path(path).read_text(encoding="utf-8"))


def _parse_start(machine: Machine, spec: str):
    """Parse a start configuration 'state,chan=word,...'; words are
    single-character letters run together."""
    parts = [part.strip() for part in spec.split(",")]
    state = parts[0]
    contents: dict[str, str] = {}
    for part in parts[1:]:
        if not part:
            continue
        if "=" not in part:
            raise ModelError(f"bad channel assignment {part!r}; expected CH=WORD")
        channel, word = part.split("=", 1)
        contents[channel.strip()] = word.strip()
    return machine.configuration(state, contents)


def _emit(payload: dict, as_json: bool, human: str) -> None:
    if as_json:
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        print(human)


def _cmd_check(args) -> int:
    machine = _load_machine(args.file)
    budget = Budget(args.max_depth, args.max_expansions)
    if args.start:
        normalized = normalize_empty_tests(machine)
        start = _parse_start(normalized, args.start)
        verdict = check_termination_from(machine, start, budget)
    else:
        verdict = check_termination(machine, budget)
    payload = verdict_to_json(verdict)
    if verdict.kind == "terminating":
        human = f"terminating: longest run {verdict.longest_run}"
    elif verdict.kind == "nonterminating":
        cert = verdict.certificate
        human = (f"nonterminating: cycle of length {len(cert.segment)} after "
                 f"{len(cert.prefix)} step(s), equal channels "
                 f"{{{', '.join(sorted(cert.witness))}}}")
    else:
        human = f"unknown: explored every run up to depth {verdict.exhausted_depth}"
    _emit(payload, args.json, human)
    return 0 if verdict.is_definite else 2


def _cmd_simulate(args) -> int:
    machine = _load_machine(args.file)
    mode = Mode.ERROR_FREE if args.error_free else Mode.LAZY
    policy = SEEDED_RANDOM if args.seed is not None else DETERMINISTIC_FIRST
    injections = set()
    if args.inject:
        injections = {int(part) for part in args.inject.split(",") if part}
    result = simulate(machine, machine.initial_configuration(), policy=policy,
                      max_steps=args.steps, injections=injections, mode=mode,
                      seed=args.seed)
    payload = {
        "machine": machine.name,
        "mode": result.run.mode.value,
        "start": result.run.start.to_json(),
        "steps": run_trace(result.run),
        "stopped": result.stopped,
        "notes": list(result.notes),
    }
    human_lines = [f"{len(result.run)} step(s), stopped by {result.stopped}"]
    for entry in run_trace(result.run):
        contents = ", ".join(f"{name}={''.join(word) or 'ε'}"
                             for name, word in sorted(entry["contents_after"].items()))
        human_lines.append(
            f"  {entry['label']['text']:<12} [{entry['variant']}] -> "
            f"{entry['state']}  {contents}")
    human_lines.extend(f"note: {note}" for note in result.notes)
    _emit(payload, args.json, "\n".join(human_lines))
    return 0


def _cmd_reach(args) -> int:
    machine = _load_machine(args.file)
    budget = Budget(args.max_depth, args.max_expansions)
    result = bounded_reachability(machine, args.target, budget)
    payload = {"target": args.target, "found": result.found,
               "depth": result.explored_depth, "exhausted": result.exhausted}
    if result.found:
        payload["run"] = [step.to_json() for step in result.run.steps]
        human = f"reachable in {len(result.run)} step(s)"
    elif result.exhausted:
        human = f"unreachable (state space exhausted at depth {result.explored_depth})"
    else:
        human = f"not found within depth {result.explored_depth}"
    _emit(payload, args.json, human)
    if result.found or result.exhausted:
        return 0
    return 2


def _cmd_bound(args) -> int:
    machine = _load_machine(args.file)
    bound = run_length_bound(machine)
    _emit(bound.to_json(), args.json, f"run-length bound: {bound}")
    return 0


def _cmd_normalize(args) -> int:
    machine = _load_machine(args.file)
    text = serialize_machine(normalize_empty_tests(machine))
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_yardstick(args) -> int:
    program = parse_counter_program(Path(args.program).read_text(encoding="utf-8"))
    machine = compile_counter_program(program)
    text = serialize_machine(machine)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
        print(f"{machine.name}: {len(machine.states)} states, "
              f"{len(machine.transitions)} transitions -> {args.output}")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_counter_run(args) -> int:
    program = parse_counter_program(Path(args.program).read_text(encoding="utf-8"))
    result = interpret_counter_program(program, args.max_steps)
    payload = {"halted": result.halted, "steps": result.steps,
               "counters": list(result.counters)}
    if result.halted:
        human = (f"halted after {result.steps} step(s); "
                 f"u1={result.counters[0]} u2={result.counters[1]}")
    else:
        human = (f"still running after {result.steps} step(s); "
                 f"u1={result.counters[0]} u2={result.counters[1]}")
    _emit(payload, args.json, human)
    return 0 if result.halted else 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="icm", description="Insertion channel machine toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_budget(p):
        p.add_argument("--max-depth", type=int, default=Budget().max_depth)
        p.add_argument("--max-expansions", type=int, default=Budget().max_expansions)

    p = sub.add_parser("check", help="decide termination")
    p.add_argument("file")
    p.add_argument("--from", dest="start", metavar="'q,c=word,...'",
                   help="start configuration (default: init, empty channels)")
    add_budget(p)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_check)

    p = sub.add_parser("simulate", help="drive one run")
    p.add_argument("file")
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--seed", type=int, default=None,
                   help="use the seeded-random policy")
    p.add_argument("--inject", metavar="STEP,...",
                   help="force insertion reads at these step indices")
    p.add_argument("--error-free", action="store_true")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("reach", help="bounded search for a control state")
    p.add_argument("file")
    p.add_argument("--target", required=True)
    add_budget(p)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_reach)

    p = sub.add_parser("bound", help="evaluate the run-length bound")
    p.add_argument("file")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_bound)

    p = sub.add_parser("normalize", help="rewrite emptiness tests away")
    p.add_argument("file")
    p.add_argument("-o", "--output")
    p.set_defaults(func=_cmd_normalize)

    p = sub.add_parser("yardstick", help="compile a counter program")
    p.add_argument("--program", required=True)
    p.add_argument("-o", "--output")
    p.set_defaults(func=_cmd_yardstick)

    p = sub.add_parser("counter-run", help="interpret a counter program")
    p.add_argument("program")
    p.add_argument("--max-steps", type=int, default=1_000_000)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_counter_run)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: no such file: {exc.filename}", file=sys.stderr)
        return 1
    except (ModelError, ProgramError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
