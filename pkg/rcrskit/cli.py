"""
    Command line front end.

    rcrskit translate DIAGRAM        algebra dump per strategy
    rcrskit check DIAGRAM            normalization and compatibility verdict
    rcrskit refine ABSTRACT CONCRETE refinement verdict between two diagrams
    rcrskit simulate DIAGRAM         CSV simulation of the normal form

    Exit codes: 0 positive verdict, 2 input error, 3 negative verdict, 4 undecided,
    5 precondition violated during simulation, 6 diagram not deterministic.
"""

__author__ = "rcrskit developers"
__version__ = "0.1.0"
__license__ = "MIT"

import argparse
import logging
import os
import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import List, Optional, Sequence, TextIO

from rcrskit import analyzer, diagram, simulator, translator
from rcrskit.component import AtomicComponent, normalize
from rcrskit.errors import NotFunctional, RcrsError, TraceError
from rcrskit.rk_utils import setup_logging
from rcrskit.settings import DEFAULT_SAMPLES, AnalysisSettings, SimulationSettings
from rcrskit.symbolic import Sort

EXIT_OK = 0
EXIT_INPUT_ERROR = 2
EXIT_NEGATIVE = 3
EXIT_UNKNOWN = 4
EXIT_PRE_VIOLATED = 5
EXIT_NOT_FUNCTIONAL = 6

SEED_ENV = "RCRSKIT_SEED"
STRATEGIES = ("ic", "fp", "all")
FORMATS = ("text", "json")


@dataclass
class Config:
    strategy: str = "ic"
    flatten: bool = False
    sort: Optional[Sort] = None
    trace: Optional[Path] = None
    steps: Optional[int] = None
    dt: Optional[Fraction] = None
    seed: int = 0
    output_format: str = "text"
    out: Optional[Path] = None
    timing: bool = True
    samples: int = DEFAULT_SAMPLES

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"Unknown strategy {self.strategy!r}, use one of {STRATEGIES}")
        if self.output_format not in FORMATS:
            raise ValueError(f"Unknown format {self.output_format!r}, use one of {FORMATS}")
        if self.steps is not None and self.steps < 1:
            raise ValueError(f"--steps must be at least 1, got {self.steps}")
        return

    @property
    def strategies(self) -> List[translator.Strategy]:
        if self.strategy == "all":
            return [translator.Strategy.IC, translator.Strategy.FP]
        return [translator.Strategy(self.strategy)]

    @property
    def primary(self) -> translator.Strategy:
        return self.strategies[0]

    @property
    def analysis_settings(self) -> AnalysisSettings:
        return AnalysisSettings(samples=self.samples, seed=self.seed)

    @property
    def simulation_settings(self) -> SimulationSettings:
        return SimulationSettings(steps=self.steps)

    def get_config_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "flatten": self.flatten,
            "sort": str(self.sort.value) if self.sort else None,
            "trace": str(self.trace) if self.trace else None,
            "steps": self.steps,
            "dt": str(self.dt) if self.dt is not None else None,
            "seed": self.seed,
            "format": self.output_format,
            "out": str(self.out) if self.out else None,
            "timing": self.timing,
            "samples": self.samples,
        }


def resolve_seed(seed: Optional[int]) -> int:
    """--seed, then RCRSKIT_SEED, then 0."""
    if seed is not None:
        return seed
    value = os.environ.get(SEED_ENV)
    if value is None or not value.strip():
        return 0
    try:
        return int(value)
    except ValueError:
        raise ValueError(f"{SEED_ENV} must be an integer, got {value!r}") from None


def _load(path: str, config: Config) -> diagram.Diagram:
    return diagram.load(Path(path), config.sort or Sort.REAL, config.dt)


def _normal_form(
    model: diagram.Diagram, strategy: translator.Strategy, config: Config
) -> AtomicComponent:
    expression = translator.translate(model, strategy, config.flatten)
    name = f"{str(strategy).upper()}_Model"
    return normalize(expression, True, config.analysis_settings.atom_limit, name)


def _emit(text: str, config: Config, stream: Optional[TextIO]):
    if config.out is not None:
        config.out.write_text(text)
    else:
        (stream or sys.stdout).write(text)


def _report(verdicts: Sequence[analyzer.Verdict], config: Config) -> str:
    if not config.timing:
        for verdict in verdicts:
            verdict.stats["millis"] = 0
    return "".join(analyzer.report(verdict, config.output_format) for verdict in verdicts)


def combined_exit_code(verdicts: Sequence[analyzer.Verdict]) -> int:
    """A negative verdict dominates an undecided one, which dominates a positive one."""
    codes = [verdict.exit_code for verdict in verdicts]
    if EXIT_NEGATIVE in codes:
        return EXIT_NEGATIVE
    if EXIT_UNKNOWN in codes:
        return EXIT_UNKNOWN
    return EXIT_OK


# Commands


def cmd_translate(path: str, config: Config, stream: Optional[TextIO] = None) -> int:
    model = _load(path, config)
    dumps = []
    for strategy in config.strategies:
        expression = translator.translate(model, strategy, config.flatten)
        dumps.append(translator.dump(expression, strategy))
    _emit("\n".join(dumps), config, stream)
    return EXIT_OK


def cmd_check(path: str, config: Config, stream: Optional[TextIO] = None) -> int:
    model = _load(path, config)
    settings = config.analysis_settings
    blocks = diagram.count_blocks(model)
    expression = translator.translate(model, config.primary, config.flatten)
    verdicts = [analyzer.check_compatibility(expression, settings, blocks)]
    if config.strategy == "all":
        ic, fp = (_normal_form(model, strategy, config) for strategy in config.strategies)
        verdicts.append(analyzer.check_equivalence(ic, fp, settings))
    logging.info(f"Checked {path}: {', '.join(str(v.kind) for v in verdicts)}")
    _emit(_report(verdicts, config), config, stream)
    return combined_exit_code(verdicts)


def cmd_refine(
    abstract: str, concrete: str, config: Config, stream: Optional[TextIO] = None
) -> int:
    c_abs = _normal_form(_load(abstract, config), config.primary, config)
    c_conc = _normal_form(_load(concrete, config), config.primary, config)
    verdict = analyzer.check_refinement(c_abs, c_conc, config.analysis_settings)
    _emit(_report([verdict], config), config, stream)
    return verdict.exit_code


def cmd_simulate(
    path: str, config: Config, stream: Optional[TextIO] = None, err: Optional[TextIO] = None
) -> int:
    model = _load(path, config)
    component = _normal_form(model, config.primary, config)
    if config.trace is not None:
        trace = simulator.read_trace(config.trace)
    elif config.steps is not None:
        inputs = [port.name for port in component.inputs if not port.name.startswith("si_")]
        logging.info(f"No trace given, driving {', '.join(inputs) or 'nothing'} with zeros")
        trace = simulator.Trace.constant({name: 0.0 for name in inputs}, config.steps)
    else:
        raise TraceError("simulate needs --trace or --steps")
    result = simulator.simulate(
        component,
        trace,
        translator.initial_state(model),
        config.steps,
        config.simulation_settings,
    )
    target = config.out if config.out is not None else (stream or sys.stdout)
    err = err or sys.stderr
    simulator.write_result(component, result, trace, target)
    if not result.completed:
        err.write(f"{result.status}: {result.violation}\n")
        return EXIT_PRE_VIOLATED
    err.write(f"{result.status}: {result.steps} steps\n")
    return EXIT_OK


# Entry point


def _fraction(text: str) -> Fraction:
    try:
        value = Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from None
    if value <= 0:
        raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
    return value


def _sort(text: str) -> Sort:
    try:
        return Sort(text.capitalize())
    except ValueError:
        raise argparse.ArgumentTypeError(f"sort must be Real or Bool, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rcrskit",
        description="Translate, check and simulate block diagrams as refinement calculus "
        "of reactive systems components.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--strategy", choices=STRATEGIES, default="ic")
    common.add_argument("--flatten", action="store_true", help="inline every subsystem first")
    common.add_argument("--sort", type=_sort, help="sort of polymorphic blocks without one")
    common.add_argument("--seed", type=int, help=f"witness search seed, else ${SEED_ENV} or 0")
    common.add_argument("--samples", type=int, default=DEFAULT_SAMPLES)
    common.add_argument("--format", dest="output_format", choices=FORMATS, default="text")
    common.add_argument("--out", type=Path, help="write to this file instead of stdout")
    common.add_argument("--no-timing", dest="timing", action="store_false")
    common.add_argument("--log-level", default="WARNING")

    commands = parser.add_subparsers(dest="command", required=True)
    translate = commands.add_parser("translate", parents=[common], help="algebra dump")
    translate.add_argument("diagram")
    check = commands.add_parser("check", parents=[common], help="compatibility verdict")
    check.add_argument("diagram")
    refine = commands.add_parser("refine", parents=[common], help="refinement verdict")
    refine.add_argument("abstract")
    refine.add_argument("concrete")
    simulate = commands.add_parser("simulate", parents=[common], help="run the normal form")
    simulate.add_argument("diagram")
    simulate.add_argument("--trace", type=Path, help="CSV with one column per input")
    simulate.add_argument("--steps", type=int)
    simulate.add_argument("--dt", type=_fraction, help="step size of Integrators without a dt")
    return parser


def config_from_args(args: argparse.Namespace) -> Config:
    return Config(
        strategy=args.strategy,
        flatten=args.flatten,
        sort=args.sort,
        trace=getattr(args, "trace", None),
        steps=getattr(args, "steps", None),
        dt=getattr(args, "dt", None),
        seed=resolve_seed(args.seed),
        output_format=args.output_format,
        out=args.out,
        timing=args.timing,
        samples=args.samples,
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        setup_logging(args.log_level)
        config = config_from_args(args)
    except ValueError as error:
        sys.stderr.write(f"error: {error}\n")
        return EXIT_INPUT_ERROR
    logging.debug(f"Configuration {config.get_config_dict()}")
    try:
        if args.command == "translate":
            return cmd_translate(args.diagram, config)
        if args.command == "check":
            return cmd_check(args.diagram, config)
        if args.command == "refine":
            return cmd_refine(args.abstract, args.concrete, config)
        return cmd_simulate(args.diagram, config)
    except NotFunctional as error:
        sys.stderr.write(f"error: {error}\n")
        return EXIT_NOT_FUNCTIONAL
    except (RcrsError, OSError) as error:
        sys.stderr.write(f"error: {error}\n")
        return EXIT_INPUT_ERROR


def run():
    sys.exit(main())


if __name__ == "__main__":
    run()
