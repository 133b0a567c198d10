"""Toolkit for insertion channel machines.

Machines read and write fifo channels whose contents can spontaneously gain
messages; the toolkit simulates them, decides termination with replayable
cycle certificates, evaluates worst-case run-length bounds, and compiles
bounded counter programs into channel machines as a benchmark family.
"""

from .model import (Configuration, Label, LabelKind, Machine,
                    MachineFormatError, ModelError, Transition, Word,
                    empty_test, occurrence_test, parse_machine, read,
                    serialize_machine, normalize_empty_tests, write)
from .semantics import (Mode, Run, SimulationResult, Step, StepVariant,
                        enabled_steps, is_legal_run, run_trace, simulate)
from .analysis import (Budget, CertificateError, CycleCertificate,
                       ReachabilityResult, Verdict, bounded_reachability,
                       check_certificate, check_termination,
                       check_termination_from, replay_certificate,
                       testfree_termination_oracle)
from .bounds import (BoundValue, BoundingFunction, FrequentPairWitness,
                     exact_class_count, extract_frequent_pairs, gamma_bound,
                     run_length_bound, tetration)
from .yardstick import (CounterGadget, CounterProgram, CleanShape,
                        build_counter_gadget, compile_counter_program,
                        interpret_counter_program, parse_counter_program,
                        serialize_counter_program)

__version__ = "0.1.0"
