"""Gallery of worked examples and counterexamples, each with a verifier.

Every entry builds a game document and checks its claims on finitely many
represented objects up to a depth. Claims that no equilibrium exists are
verified as depth-bounded statements and flagged ``expected_failure``.
"""
from __future__ import annotations

import logging
from fractions import Fraction
from itertools import product
from typing import Callable, Dict, Iterable, List, Literal, Optional

from pydantic import BaseModel, ConfigDict

from pastgames.config import Settings, get_settings
from pastgames.errors import (
    InconclusiveError,
    PreconditionError,
    TailNotMaterializableError,
    UndecidableTailError,
    UnknownGalleryEntryError,
)
from pastgames.model import (
    AlternatingTurn,
    FiniteMemoryTurn,
    RepresentedPosition,
    RepresentedRun,
    SegmentAnchor,
    TailClass,
    TailPattern,
    TailPredicateTurn,
    constant_anchors,
    constant_tails,
)
from pastgames.schemas import (
    BuiltinPayoff,
    ClaimResult,
    DiscountedPayoff,
    GameDocument,
    GameSpec,
    VerificationReport,
    WinLosePayoff,
)
from pastgames.services.discounted import DiscountedSolver, check_turn_continuity, evaluate_discounted
from pastgames.services.machines import (
    FiniteMemoryMachine,
    MachineEntry,
    PinningMachine,
    StrategyProfile,
    TailAwareMachine,
)
from pastgames.services.payoffs import LOSS, WIN, Payoff
from pastgames.services.strategies import DeviationSearch, StrategyEngine, iter_profiles
from pastgames.services.winlose import WinLoseSolver, winning_player_partial
from pastgames.services.winset import CylinderGenerator, OpenSet, player1_wins

logger = logging.getLogger(__name__)

HALF = Fraction(1, 2)
SINGLE_PLAYER = FiniteMemoryTurn.constant(1)


# Delta3 winning set


class MValue(BaseModel):
    """First own stage from which a player only used one action.

    ``at_most`` is a finite stage not above ``stage`` hidden in an abstract
    tail; ``unknown`` is either such a stage or plus infinity.
    """

    model_config = ConfigDict(frozen=True)

    kind: Literal["finite", "plus_inf", "minus_inf", "at_most", "unknown"]
    stage: Optional[int] = None

    def __str__(self) -> str:
        if self.kind in ("finite", "at_most", "unknown"):
            return f"{self.kind}({self.stage})"
        return self.kind


def _undecidable(x: MValue, y: MValue) -> UndecidableTailError:
    return UndecidableTailError(f"cannot compare {x} < {y} without the hidden tail")


def m_less(x: MValue, y: MValue) -> bool:
    if x.kind == "minus_inf":
        return y.kind != "minus_inf"
    if y.kind == "minus_inf" or x.kind == "plus_inf":
        return False
    if y.kind == "plus_inf":
        if x.kind == "unknown":
            raise _undecidable(x, y)
        return True
    if "unknown" in (x.kind, y.kind):
        raise _undecidable(x, y)
    if x.kind == "finite" and y.kind == "finite":
        return x.stage < y.stage  # type: ignore[operator]
    if x.kind == "finite":
        if x.stage >= y.stage:  # type: ignore[operator]
            return False
        raise _undecidable(x, y)
    if y.kind == "finite" and x.stage < y.stage:  # type: ignore[operator]
        return True
    raise _undecidable(x, y)


class Delta3Evaluator:
    """Winning set built from the stages at which each player settles on one action."""

    players = 2
    is_tail = False

    CASES = ("i", "ii", "iii", "iv")

    def m_value(self, run: RepresentedRun, player: int, action: int) -> MValue:
        last = 0 if player == 1 else -1
        ws = run.window_start
        k = last
        while k >= ws:
            if run.window[k - ws] != action:
                return MValue(kind="plus_inf") if k == last else MValue(kind="finite", stage=k + 2)
            k -= 2
        lowest = k + 2 if k + 2 <= last else None
        cls = run.tail.class_at(last)
        if cls.is_constant:
            if cls.action == action:
                return MValue(kind="minus_inf")
            return MValue(kind="plus_inf") if lowest is None else MValue(kind="finite", stage=lowest)
        if lowest is None:
            return MValue(kind="unknown", stage=last)
        return MValue(kind="at_most", stage=lowest)

    @staticmethod
    def finite_action(run: RepresentedRun, player: int) -> Optional[int]:
        cls = run.tail.class_at(0 if player == 1 else 1)
        return 1 - cls.action if cls.is_constant else None  # type: ignore[operator]

    def case_of(self, run: RepresentedRun) -> str:
        f1 = self.finite_action(run, 1) is not None
        f2 = self.finite_action(run, 2) is not None
        return {(True, True): "i", (False, False): "ii", (True, False): "iii", (False, True): "iv"}[(f1, f2)]

    def satisfied_cases(self, run: RepresentedRun) -> List[str]:
        """Cases whose conditions hold on ``run``; comparisons that cannot be decided count as unmet."""
        fa1, fa2 = self.finite_action(run, 1), self.finite_action(run, 2)
        checks = {
            "i": (fa1 is not None and fa2 is not None, lambda: (fa1, fa2)),
            "ii": (fa1 is None and fa2 is None, lambda: (1, 1)),
            "iii": (fa1 is not None and fa2 is None, lambda: (fa1, fa1)),
            "iv": (fa1 is None and fa2 is not None, lambda: (fa2, fa2)),
        }
        satisfied = []
        for case, (applies, actions) in checks.items():
            if not applies:
                continue
            a1, a2 = actions()
            try:
                if m_less(self.m_value(run, 1, a1), self.m_value(run, 2, a2)):
                    satisfied.append(case)
            except UndecidableTailError:
                continue
        return satisfied

    def contains(self, run: RepresentedRun) -> bool:
        fa1, fa2 = self.finite_action(run, 1), self.finite_action(run, 2)
        if fa1 is not None and fa2 is not None:
            a1, a2 = fa1, fa2
        elif fa1 is None and fa2 is None:
            a1 = a2 = 1
        elif fa1 is not None:
            a1 = a2 = fa1
        else:
            a1 = a2 = fa2  # type: ignore[assignment]
        return m_less(self.m_value(run, 1, a1), self.m_value(run, 2, a2))  # type: ignore[arg-type]

    def winner(self, run: RepresentedRun) -> int:
        return 1 if self.contains(run) else 2

    def payoff(self, run: RepresentedRun) -> Payoff:
        return WIN if self.contains(run) else LOSS


class NoEquilibriumEvaluator:
    """Discounted count of action 1, except that the all-ones run pays nothing."""

    players = 1
    is_tail = False

    def __init__(self, turn, delta: Fraction = HALF):
        self.turn = turn
        self.discounted = DiscountedPayoff(delta=delta, g=(((Fraction(0), Fraction(1)),),))

    def payoff(self, run: RepresentedRun) -> Payoff:
        if run.all_equal(1):
            return (Fraction(0),)
        return evaluate_discounted(run, self.discounted, self.turn, 1)


class LimsupFrequencyEvaluator:
    """Limsup frequency of action 1, with the frequency 1 paying nothing."""

    players = 1
    is_tail = True

    def frequency(self, run: RepresentedRun) -> Fraction:
        if not run.tail.is_constant:
            raise TailNotMaterializableError("the frequency of action 1 is only exact over Constant tails")
        return Fraction(run.tail.even.action + run.tail.odd.action, 2)  # type: ignore[operator]

    def payoff(self, run: RepresentedRun) -> Payoff:
        phi = self.frequency(run)
        return (phi if phi < 1 else Fraction(0),)


def builtin_evaluator(gallery_id: str, game: GameSpec):
    if gallery_id == "delta3-no-eq":
        return Delta3Evaluator()
    if gallery_id == "no-eq-discounted-like":
        return NoEquilibriumEvaluator(game.turn)
    if gallery_id == "eq-no-strong":
        return LimsupFrequencyEvaluator()
    raise UnknownGalleryEntryError(f"no builtin payoff named {gallery_id!r}")


# builders


def player2_plays_one() -> OpenSet:
    return OpenSet(generators=(CylinderGenerator(anchor="odd", pattern=(1,)),))


def settles_first_open_set() -> OpenSet:
    """Player 2 plays 0 at an odd stage and player 1 plays 1 at every even stage after it."""
    return OpenSet(generators=(CylinderGenerator(anchor="odd", pattern=(0,), repeat=(1, None)),))


def _zero_payoff() -> DiscountedPayoff:
    return DiscountedPayoff(delta=HALF, g=(((Fraction(0), Fraction(0)),),))


def _build_no_run() -> GameDocument:
    machine = TailAwareMachine(trigger=1, scope="any", on_trigger=0, otherwise=1)
    return GameDocument(
        name="no-run",
        players=1,
        turn=SINGLE_PLAYER,
        payoff=_zero_payoff(),
        profile=StrategyProfile(machines=(machine,)),
        anchors=tuple(constant_anchors(2)),
    )


def _build_two_runs() -> GameDocument:
    return GameDocument(
        name="two-runs",
        players=1,
        turn=SINGLE_PLAYER,
        payoff=_zero_payoff(),
        profile=StrategyProfile(machines=(FiniteMemoryMachine.repeat_previous(),)),
        anchors=tuple(constant_anchors(2)),
    )


def _build_no_eq() -> GameDocument:
    return GameDocument(
        name="no-eq-discounted-like",
        players=1,
        turn=SINGLE_PLAYER,
        payoff=BuiltinPayoff(gallery_id="no-eq-discounted-like"),
        profile=StrategyProfile(machines=(FiniteMemoryMachine.constant(1),)),
        run=RepresentedRun.constant(1),
    )


def _build_eq_no_strong() -> GameDocument:
    return GameDocument(
        name="eq-no-strong",
        players=1,
        turn=SINGLE_PLAYER,
        payoff=BuiltinPayoff(gallery_id="eq-no-strong"),
        profile=StrategyProfile(machines=(FiniteMemoryMachine.constant(0),)),
        run=RepresentedRun.constant(0),
    )


def _build_valueless() -> GameDocument:
    return GameDocument(
        name="valueless-zero-sum",
        players=2,
        payoff=WinLosePayoff(winning_set=player2_plays_one()),
        profile=StrategyProfile(machines=(FiniteMemoryMachine.constant(0), FiniteMemoryMachine.constant(0))),
        run=RepresentedRun.constant(0),
        anchors=tuple(constant_anchors(2)),
    )


def _build_delta3() -> GameDocument:
    return GameDocument(
        name="delta3-no-eq",
        players=2,
        turn=AlternatingTurn(),
        payoff=BuiltinPayoff(gallery_id="delta3-no-eq"),
    )


def _build_discontinuous() -> GameDocument:
    one, zero = Fraction(1), Fraction(0)
    return GameDocument(
        name="discontinuous-turn",
        players=2,
        turn=TailPredicateTurn(),
        payoff=DiscountedPayoff(
            delta=HALF,
            g=(((zero, one), (zero, one)), ((zero, zero), (one, zero))),
        ),
    )


def _build_nondetermined() -> GameDocument:
    return GameDocument(
        name="nondetermined-segment",
        players=2,
        payoff=WinLosePayoff(winning_set=settles_first_open_set()),
        anchors=(SegmentAnchor.of_tail(TailPattern.uniform(0)),),
    )


BUILDERS: Dict[str, Callable[[], GameDocument]] = {
    "no-run": _build_no_run,
    "two-runs": _build_two_runs,
    "no-eq-discounted-like": _build_no_eq,
    "eq-no-strong": _build_eq_no_strong,
    "valueless-zero-sum": _build_valueless,
    "delta3-no-eq": _build_delta3,
    "discontinuous-turn": _build_discontinuous,
    "nondetermined-segment": _build_nondetermined,
}


def gallery_ids() -> List[str]:
    return list(BUILDERS)


def gallery_build(gallery_id: str) -> GameDocument:
    try:
        builder = BUILDERS[gallery_id]
    except KeyError as exc:
        raise UnknownGalleryEntryError(f"unknown gallery entry {gallery_id!r}; known: {', '.join(BUILDERS)}") from exc
    return builder()


# verifiers


def _claim(name: str, ok: bool, expected_failure: bool = False, **witness) -> ClaimResult:
    return ClaimResult(
        claim=name,
        status="passed" if ok else "failed",
        expected_failure=expected_failure,
        witness=witness,
    )


def _runs_up_to(tails: Iterable[TailPattern], depth: int) -> List[RepresentedRun]:
    """Distinct runs over ``tails`` whose windows cover at most ``depth`` stages."""
    seen = set()
    runs = []
    for tail in tails:
        for length in range(1, depth + 1):
            for window in product((0, 1), repeat=length):
                run = RepresentedRun.build(tail, window).canonical()
                if run.key() not in seen:
                    seen.add(run.key())
                    runs.append(run)
    return runs


def _run_text(run: RepresentedRun) -> str:
    return f"{run.tail} {list(run.window)}"


def _memory_one_machines() -> List[FiniteMemoryMachine]:
    machines = [FiniteMemoryMachine.constant(0), FiniteMemoryMachine.constant(1)]
    for x, y in product((0, 1), repeat=2):
        machines.append(
            FiniteMemoryMachine(memory=1, table=(MachineEntry(window=(0,), action=x), MachineEntry(window=(1,), action=y)))
        )
    return machines


class GalleryVerifier:
    def __init__(self, settings: Optional[Settings] = None):
        self.settings = settings or get_settings()

    def verify(self, gallery_id: str, depth: Optional[int] = None) -> VerificationReport:
        document = gallery_build(gallery_id)
        depth = self.settings.check_depth if depth is None else depth
        method = getattr(self, "_verify_" + gallery_id.replace("-", "_"))
        claims = method(document, depth)
        report = VerificationReport(
            gallery_id=gallery_id, depth=depth, claims=claims, report_version=self.settings.report_version
        )
        for claim in claims:
            log = logger.info if claim.status == "passed" else logger.warning
            log("%s: %s %s", gallery_id, claim.claim, claim.status)
        return report

    def _engine(self, document: GameDocument) -> StrategyEngine:
        return StrategyEngine(document.game(), settings=self.settings)

    def _verify_no_run(self, document: GameDocument, depth: int) -> List[ClaimResult]:
        engine = self._engine(document)
        report = engine.enumerate_consistent_runs(document.profile, document.anchors)  # type: ignore[arg-type]
        verdict = engine.is_consistent(RepresentedRun.constant(1), document.profile, depth)  # type: ignore[arg-type]
        return [
            _claim(
                "no consistent run over the Constant anchors",
                report.kind == "empty" and report.covers_given_anchors,
                anchors=len(document.anchors),
            ),
            _claim(
                "the all-ones run is violated at stage 0",
                verdict.kind == "violation_at" and verdict.stage == 0,
                verdict=verdict.model_dump(mode="json", exclude_none=True),
            ),
        ]

    def _verify_two_runs(self, document: GameDocument, depth: int) -> List[ClaimResult]:
        engine = self._engine(document)
        report = engine.enumerate_consistent_runs(document.profile, document.anchors)  # type: ignore[arg-type]
        found = sorted(_run_text(r) for r in report.runs)
        expected = sorted(_run_text(RepresentedRun.constant(a)) for a in (0, 1))
        certified = all(
            engine.is_consistent(r, document.profile, depth).kind == "tail_certified"  # type: ignore[arg-type]
            for r in report.runs
        )
        return [
            _claim("exactly the all-zeros and all-ones runs are consistent", found == expected, runs=found),
            _claim("both runs are consistent over the whole past", certified),
        ]

    def _verify_no_eq_discounted_like(self, document: GameDocument, depth: int) -> List[ClaimResult]:
        engine = self._engine(document)
        verdict = engine.check_equilibrium(document.profile, document.run, depth)  # type: ignore[arg-type]
        search = DeviationSearch(engine, document.profile, 1)  # type: ignore[arg-type]
        survivors = []
        runs = _runs_up_to(constant_tails(2), depth)
        for run in runs:
            payoff = engine.ctx.payoff(run)[0]
            if not any(search.value(run.prefix(n)) > payoff for n in range(0, run.window_start - 3, -1)):
                survivors.append(_run_text(run))
        return [
            _claim(
                "playing 0 at stage 0 improves on the all-ones run",
                verdict.kind == "counter_deviation" and (verdict.stage, verdict.player, verdict.action) == (0, 1, 0),
                expected_failure=True,
                verdict=verdict.model_dump(mode="json", exclude_none=True),
            ),
            _claim(
                "every candidate run has a profitable finite deviation",
                not survivors,
                expected_failure=True,
                candidates=len(runs),
                survivors=survivors,
            ),
        ]

    def _verify_eq_no_strong(self, document: GameDocument, depth: int) -> List[ClaimResult]:
        engine = self._engine(document)
        machines = [
            FiniteMemoryMachine.constant(0),
            FiniteMemoryMachine.constant(1),
            PinningMachine(target=RepresentedRun.constant(0)),
            PinningMachine(target=RepresentedRun.build(TailPattern.uniform(1), (0,))),
        ]
        weak, strong = [], []
        for machine in machines:
            profile = StrategyProfile(machines=(machine,))
            (run,) = engine.enumerate_consistent_runs(profile).runs
            weak.append(engine.check_equilibrium(profile, run, depth).kind)
            strong.append(engine.check_strong(profile, depth).kind)
        return [
            _claim("every sampled profile is an equilibrium", all(k == "exact_verified" for k in weak), verdicts=weak),
            _claim(
                "no sampled profile is a strong equilibrium",
                all(k == "counter_example" for k in strong),
                expected_failure=True,
                verdicts=strong,
            ),
        ]

    def _verify_valueless_zero_sum(self, document: GameDocument, depth: int) -> List[ClaimResult]:
        engine = self._engine(document)
        solver = WinLoseSolver(document.payoff.winning_set, 2, settings=self.settings)  # type: ignore[union-attr]
        classification = solver.classify()
        certificate = solver.synthesize_open()
        s0 = document.profile
        s1 = StrategyProfile(machines=(FiniteMemoryMachine.constant(1), FiniteMemoryMachine.constant(1)))
        r0, r1 = RepresentedRun.constant(0), RepresentedRun.constant(1)
        eq0 = engine.check_equilibrium(s0, r0, depth)  # type: ignore[arg-type]
        eq1 = engine.check_equilibrium(s1, r1, depth)
        strong0 = engine.check_strong(s0, depth)  # type: ignore[arg-type]
        strong1 = engine.check_strong(s1, depth)
        strengthened = engine.check_strong(engine.strengthen(s1, r1), depth)
        low = solver.segment_value(SegmentAnchor.of_tail(TailPattern.uniform(0)))
        high = solver.segment_value(SegmentAnchor.of_tail(TailPattern.uniform(1)))
        return [
            _claim(
                "player 2 wins every auxiliary game",
                classification.kind == "part2" and certificate.winner == 2,
                classification=classification.kind,
            ),
            _claim(
                "(s0, r0) and (s1, r1) are equilibria",
                eq0.kind != "counter_deviation" and eq1.kind != "counter_deviation",
                verdicts=[eq0.kind, eq1.kind],
            ),
            _claim(
                "s0 is strong and s1 is not",
                strong0.kind == "verified" and strong1.kind == "counter_example",
                verdicts=[strong0.kind, strong1.kind],
            ),
            _claim("strengthening (s1, r1) gives a strong equilibrium", strengthened.kind == "verified"),
            _claim(
                "the two segments have different values, so the game has none",
                (low.value, high.value) == (0, 1),
                values=[low.value, high.value],
            ),
        ]

    def _verify_delta3_no_eq(self, document: GameDocument, depth: int) -> List[ClaimResult]:
        evaluator = Delta3Evaluator()
        memo: Dict[tuple, Optional[int]] = {}
        classes = [TailClass.constant(0), TailClass.constant(1), TailClass.both()]
        tails = [TailPattern.of(e, o) for e, o in product(classes, repeat=2)]
        confirmed, deferred, refuted = 0, 0, []
        constant_unconfirmed = []
        for run in _runs_up_to(tails, depth):
            winners = [
                winning_player_partial(run.prefix(n), evaluator.winner, 2, AlternatingTurn(), memo=memo)
                for n in range(0, -depth - 2, -1)
            ]
            decided = {w for w in winners if w is not None}
            if decided == {1, 2}:
                confirmed += 1
                continue
            if None in winners:
                deferred += 1
            else:
                refuted.append(_run_text(run))
            if run.tail.is_constant:
                constant_unconfirmed.append(_run_text(run))
        engine = self._engine(document)
        standing = []
        profiles = 0
        for profile in iter_profiles(_memory_one_machines(), 2):
            profiles += 1
            for run in engine.enumerate_consistent_runs(profile).runs:
                if engine.check_equilibrium(profile, run, depth).kind != "counter_deviation":
                    standing.append(_run_text(run))
        return [
            _claim(
                "both players own a winning position along every run",
                not refuted,
                confirmed=confirmed,
                deferred=deferred,
                refuted=refuted,
            ),
            _claim("every run with Constant tails is confirmed", not constant_unconfirmed, runs=constant_unconfirmed),
            _claim(
                "no candidate profile is an equilibrium",
                not standing,
                expected_failure=True,
                profiles=profiles,
                standing=standing,
            ),
        ]

    def _verify_discontinuous_turn(self, document: GameDocument, depth: int) -> List[ClaimResult]:
        game = document.game()
        continuity = check_turn_continuity(game.turn)
        try:
            DiscountedSolver(game, settings=self.settings).synthesize(Fraction(1, 8))
            refused = False
        except PreconditionError:
            refused = True
        engine = StrategyEngine(game, settings=self.settings)
        searches: Dict[int, DeviationSearch] = {}
        survivors = []
        runs = _runs_up_to(constant_tails(2), depth)
        for run in runs:
            stage0_mover = engine.ctx.active_player(run.prefix(0))
            second = run.action_at(0) if stage0_mover == 2 else 0
            profile = StrategyProfile(
                machines=(PinningMachine(target=run), FiniteMemoryMachine.constant(second))
            )
            search = searches.setdefault(second, DeviationSearch(engine, profile, 1))
            payoff = engine.ctx.payoff(run)
            gains = any(search.value(run.prefix(n)) > payoff[0] for n in range(0, run.window_start - 3, -1))
            if not gains and stage0_mover == 2:
                gains = DeviationSearch(engine, profile, 2).value(run.prefix(0)) > payoff[1]
            if not gains:
                survivors.append(_run_text(run))
        return [
            _claim(
                "the turn function is possibly discontinuous",
                continuity.kind == "possibly_discontinuous",
            ),
            _claim("epsilon-certificate synthesis refuses the game", refused),
            _claim(
                "every candidate run has a profitable deviation",
                not survivors,
                expected_failure=True,
                candidates=len(runs),
                survivors=survivors,
            ),
        ]

    def _verify_nondetermined_segment(self, document: GameDocument, depth: int) -> List[ClaimResult]:
        evaluator = Delta3Evaluator()
        open_set = document.payoff.winning_set  # type: ignore[union-attr]
        tail = TailPattern.uniform(0)
        mismatches = [
            _run_text(run)
            for run in _runs_up_to([tail], depth)
            if evaluator.contains(run) != player1_wins(run, open_set)
        ]
        solver = WinLoseSolver(open_set, 2, settings=self.settings)
        try:
            solver.segment_value(SegmentAnchor.of_tail(tail))
            determined = True
        except InconclusiveError:
            determined = False
        winners = {
            n % 2: solver.position_winner(RepresentedPosition.pure_tail(n, tail)) for n in (-depth - 1, -depth - 2)
        }
        return [
            _claim("the open set agrees with the Delta3 set on the segment", not mismatches, mismatches=mismatches),
            _claim(
                "the segment game is not determined",
                not determined and winners[0] != winners[1],
                winners={"even": winners[0], "odd": winners[1]},
            ),
        ]


def gallery_verify(gallery_id: str, depth: Optional[int] = None, settings: Optional[Settings] = None) -> VerificationReport:
    if gallery_id not in BUILDERS:
        raise UnknownGalleryEntryError(f"unknown gallery entry {gallery_id!r}")
    return GalleryVerifier(settings).verify(gallery_id, depth)
