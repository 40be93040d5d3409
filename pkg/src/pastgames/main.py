"""Command-line entry point: ``python -m pastgames.main <command> ...``.

Certificates and reports are printed to stdout as JSON; logs go to stderr.
Exit codes: 0 success, 1 counterexample, 2 inconclusive, 3 input error,
4 internal failure.
"""
import argparse
import logging
import sys
from fractions import Fraction
from typing import Callable, List, NoReturn, Optional, Sequence

from pydantic import BaseModel, ValidationError

from pastgames.config import Settings, get_settings
from pastgames.errors import GameSpecError, InconclusiveError
from pastgames.model import RepresentedPosition, SegmentAnchor, TailClass, TailPattern, constant_anchors
from pastgames.schemas import GameDocument, WinLoseReport, dump_game, load_game

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_COUNTEREXAMPLE = 1
EXIT_INCONCLUSIVE = 2
EXIT_INPUT = 3
EXIT_INTERNAL = 4


def _emit(payload: BaseModel) -> None:
    print(payload.model_dump_json(indent=2, exclude_none=True))


def _tail_class(text: str) -> TailClass:
    if text.startswith("both"):
        _, _, label = text.partition(":")
        return TailClass.both(label)
    try:
        return TailClass.constant(int(text))
    except ValueError as exc:
        raise GameSpecError(f"tail class must be an action or 'both', got {text!r}", "--tail") from exc


def _window(text: str) -> tuple:
    if not text:
        return ()
    try:
        return tuple(int(part) for part in text.split(","))
    except ValueError as exc:
        raise GameSpecError(f"window must be comma-separated actions, got {text!r}", "--window") from exc


def _tail(args: argparse.Namespace) -> TailPattern:
    even = args.tail_even if args.tail_even is not None else args.tail
    odd = args.tail_odd if args.tail_odd is not None else args.tail
    return TailPattern(even=_tail_class(even), odd=_tail_class(odd))


def _position(args: argparse.Namespace) -> RepresentedPosition:
    try:
        return RepresentedPosition(stage=args.stage, tail=_tail(args), window=_window(args.window))
    except ValidationError as exc:
        raise GameSpecError(exc.errors()[0]["msg"], "--stage") from exc


def _winning_set(document: GameDocument):
    if document.payoff.kind != "winlose":
        raise GameSpecError("the game is not a win-lose game", "payoff")
    return document.payoff.winning_set  # type: ignore[union-attr]


def _require(document: GameDocument, field: str):
    value = getattr(document, field)
    if value is None:
        raise GameSpecError(f"the game file has no {field}", field)
    return value


def _anchors(document: GameDocument) -> List[SegmentAnchor]:
    return list(document.anchors) or constant_anchors(document.alphabet_size)


def cmd_solve_winlose(args: argparse.Namespace, settings: Settings) -> int:
    from pastgames.services.strategies import StrategyEngine
    from pastgames.services.winlose import WinLoseSolver

    document = load_game(args.game)
    spec = _winning_set(document)
    solver = WinLoseSolver(spec, document.alphabet_size, settings=settings)
    if args.rank2 or spec.kind == "gdelta":
        classification = None
        certificate = solver.synthesize_rank2()
    else:
        classification = solver.classify()
        certificate = solver.synthesize_open()
    engine = StrategyEngine(document.game(), settings=settings)
    verdict = engine.check_equilibrium(certificate.profile, certificate.run, args.depth)
    _emit(WinLoseReport(classification=classification, certificate=certificate, check=verdict))
    return EXIT_COUNTEREXAMPLE if verdict.kind == "counter_deviation" else EXIT_OK


def cmd_solve_discounted(args: argparse.Namespace, settings: Settings) -> int:
    from pastgames.services.discounted import DiscountedSolver

    document = load_game(args.game)
    try:
        epsilon = Fraction(args.epsilon)
    except (ValueError, ZeroDivisionError) as exc:
        raise GameSpecError(f"not a rational number: {args.epsilon!r}", "--epsilon") from exc
    certificate = DiscountedSolver(document.game(), settings=settings).synthesize(epsilon)
    _emit(certificate)
    if not certificate.meets_epsilon:
        logger.warning("guarantee %s exceeds epsilon %s", certificate.guarantee, epsilon)
        return EXIT_INCONCLUSIVE
    return EXIT_OK


def cmd_w_index(args: argparse.Namespace, settings: Settings) -> int:
    from pastgames.services.winlose import WinLoseSolver

    document = load_game(args.game)
    solver = WinLoseSolver(_winning_set(document), document.alphabet_size, settings=settings)
    position = _position(args)
    if args.rank2:
        print(solver.compute_w_rank2(position))
        return EXIT_OK
    value = solver.compute_w(position)
    _emit(value)
    return EXIT_INCONCLUSIVE if value.kind == "undetermined_below" else EXIT_OK


def cmd_segment_value(args: argparse.Namespace, settings: Settings) -> int:
    from pastgames.services.winlose import WinLoseSolver

    document = load_game(args.game)
    solver = WinLoseSolver(_winning_set(document), document.alphabet_size, settings=settings)
    _emit(solver.segment_value(SegmentAnchor(position=_position(args))))
    return EXIT_OK


def cmd_check_eq(args: argparse.Namespace, settings: Settings) -> int:
    from pastgames.services.strategies import StrategyEngine

    document = load_game(args.game)
    engine = StrategyEngine(document.game(), settings=settings)
    verdict = engine.check_equilibrium(_require(document, "profile"), _require(document, "run"), args.depth)
    _emit(verdict)
    return EXIT_COUNTEREXAMPLE if verdict.kind == "counter_deviation" else EXIT_OK


def cmd_check_strong(args: argparse.Namespace, settings: Settings) -> int:
    from pastgames.services.strategies import StrategyEngine

    document = load_game(args.game)
    engine = StrategyEngine(document.game(), settings=settings)
    verdict = engine.check_strong(_require(document, "profile"), args.depth, _anchors(document))
    _emit(verdict)
    return EXIT_COUNTEREXAMPLE if verdict.kind == "counter_example" else EXIT_OK


def cmd_runs(args: argparse.Namespace, settings: Settings) -> int:
    from pastgames.services.strategies import StrategyEngine

    document = load_game(args.game)
    engine = StrategyEngine(document.game(), settings=settings)
    report = engine.enumerate_consistent_runs(_require(document, "profile"), _anchors(document))
    _emit(report)
    return EXIT_OK if report.covers_given_anchors else EXIT_INCONCLUSIVE


def cmd_gallery(args: argparse.Namespace, settings: Settings) -> int:
    from pastgames.services.gallery import gallery_build, gallery_verify

    if not args.verify:
        print(dump_game(gallery_build(args.id)))
        return EXIT_OK
    report = gallery_verify(args.id, args.depth, settings=settings)
    _emit(report)
    return EXIT_OK if report.passed else EXIT_COUNTEREXAMPLE


def _add_position_args(parser: argparse.ArgumentParser, stage_default: Optional[int]) -> None:
    parser.add_argument("--stage", type=int, default=stage_default, required=stage_default is None)
    parser.add_argument("--window", default="", help="comma-separated actions before the stage")
    parser.add_argument("--tail", default="0", help="action (or 'both[:label]') in the infinite past")
    parser.add_argument("--tail-even", default=None, help="tail class at even stages")
    parser.add_argument("--tail-odd", default=None, help="tail class at odd stages")


class CliParser(argparse.ArgumentParser):
    """Reports usage errors with the input-error exit code."""

    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"error: {message}\n")


def build_parser(settings: Settings) -> argparse.ArgumentParser:
    parser = CliParser(prog="pastgames", description=settings.app_name)
    parser.add_argument("--log-level", default=None, help="overrides LOG_LEVEL")
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name: str, handler: Callable[[argparse.Namespace, Settings], int], help_text: str):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(handler=handler)
        return p

    p = command("solve-winlose", cmd_solve_winlose, "synthesize a win-lose equilibrium certificate")
    p.add_argument("game")
    p.add_argument("--rank2", action="store_true", help="use the chain construction")
    p.add_argument("--depth", type=int, default=None)

    p = command("solve-discounted", cmd_solve_discounted, "synthesize an epsilon-equilibrium certificate")
    p.add_argument("game")
    p.add_argument("--epsilon", required=True, help="rational, e.g. 1/8")

    p = command("w-index", cmd_w_index, "w index of a position")
    p.add_argument("game")
    p.add_argument("--rank2", action="store_true", help="level index for a chain of open sets")
    _add_position_args(p, None)

    p = command("segment-value", cmd_segment_value, "value of the game restricted to a segment")
    p.add_argument("game")
    _add_position_args(p, 0)

    for name, handler, help_text in (
        ("check-eq", cmd_check_eq, "check the file's profile and run for an equilibrium"),
        ("check-strong", cmd_check_strong, "search deviations against the file's profile"),
        ("runs", cmd_runs, "consistent runs of the file's profile over its anchors"),
    ):
        p = command(name, handler, help_text)
        p.add_argument("game")
        p.add_argument("--depth", type=int, default=None)

    p = command("gallery", cmd_gallery, "print or verify a gallery entry")
    p.add_argument("id")
    p.add_argument("--verify", action="store_true")
    p.add_argument("--depth", type=int, default=None)
    return parser


def _validation_location(exc: ValidationError) -> str:
    error = exc.errors()[0]
    location = ".".join(str(part) for part in error.get("loc", ()))
    return f"{location}: {error['msg']}" if location else error["msg"]


def cli_main(argv: Optional[Sequence[str]] = None) -> int:
    settings = get_settings()
    parser = build_parser(settings)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_INPUT
    logging.basicConfig(level=(args.log_level or settings.log_level).upper())
    try:
        code = args.handler(args, settings)
    except InconclusiveError as exc:
        logger.warning("inconclusive: %s", exc)
        print(f"inconclusive: {exc}", file=sys.stderr)
        return EXIT_INCONCLUSIVE
    except ValidationError as exc:
        print(f"error: {_validation_location(exc)}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception:  # pragma: no cover - unexpected runtime errors
        logger.exception("%s failed", args.command)
        return EXIT_INTERNAL
    return code


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
