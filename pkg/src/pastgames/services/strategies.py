"""Consistency calculus and equilibrium checkers for strategy profiles."""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from itertools import product
from math import lcm
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from pastgames.config import Settings
from pastgames.errors import (
    PreconditionError,
    TailNotMaterializableError,
    UnsupportedTailPatternError,
)
from pastgames.model import (
    RepresentedPosition,
    RepresentedRun,
    SegmentAnchor,
    TailPattern,
    constant_anchors,
    constant_tails,
    has_two_active_players,
)
from pastgames.schemas import (
    ConsistencyReport,
    ConsistencyVerdict,
    EquilibriumVerdict,
    GameSpec,
    StrongVerdict,
)
from pastgames.services.machines import (
    CompositeMachine,
    FiniteMemoryMachine,
    GameContext,
    MachineEntry,
    OverrideMachine,
    PinningMachine,
    StrategyMachine,
    StrategyProfile,
    TailAwareMachine,
)

logger = logging.getLogger(__name__)


class DeviationSearch:
    """Best payoff ``player`` can reach in a subgame while everybody else follows ``profile``."""

    def __init__(self, engine: "StrategyEngine", profile: StrategyProfile, player: int):
        self.engine = engine
        self.profile = profile
        self.player = player
        self._memo: Dict[tuple, Fraction] = {}

    def value(self, q: RepresentedPosition) -> Fraction:
        key = q.key()
        if key in self._memo:
            return self._memo[key]
        if q.is_run:
            result = self.engine.ctx.payoff(q)[self.player - 1]  # type: ignore[arg-type]
        elif self.engine.ctx.active_player(q) == self.player:
            result = max(self.value(q.advance(a)) for a in range(self.engine.alphabet_size))
        else:
            result = self.value(q.advance(self.engine.recommend(self.profile, q)))
        self._memo[key] = result
        return result

    def best_action(self, q: RepresentedPosition) -> int:
        values = [self.value(q.advance(a)) for a in range(self.engine.alphabet_size)]
        return values.index(max(values))


class StrategyEngine:
    def __init__(self, game: GameSpec, settings: Optional[Settings] = None, context: Optional[GameContext] = None):
        self.ctx = context or GameContext(game, settings)
        self.game = game
        self.settings = self.ctx.settings
        self.alphabet_size = game.alphabet_size

    def recommend(self, profile: StrategyProfile, p: RepresentedPosition) -> int:
        return profile.machine_for(self.ctx.active_player(p)).choose(p, self.ctx)

    def regime(self, profile: StrategyProfile, p: RepresentedPosition) -> Tuple[int, int]:
        """Stage below which choices at positions of ``p``'s tail repeat, and the period."""
        turn = self.game.turn
        lookback = max(profile.lookback(), turn.memory)
        stage = min(profile.horizon(self.ctx), turn.horizon, p.window_start) - lookback - 2
        return stage, lcm(profile.period(self.ctx), 2)

    def roll_forward(self, profile: StrategyProfile, p: RepresentedPosition) -> RepresentedRun:
        """Outcome of the subgame at ``p`` when every player follows ``profile``."""
        q = p
        while not q.is_run:
            q = q.advance(self.recommend(profile, q))
        return q.canonical()  # type: ignore[return-value]

    # consistency

    def is_consistent(
        self, run: RepresentedRun, profile: StrategyProfile, depth: Optional[int] = None
    ) -> ConsistencyVerdict:
        depth = self.settings.check_depth if depth is None else depth
        if run.tail.is_constant:
            stage, period = self.regime(profile, run)
            low = min(-depth, stage - period)
        else:
            low = max(-depth, run.window_start)
        for k in range(0, low - 1, -1):
            p = run.prefix(k)
            try:
                choice = self.recommend(profile, p)
            except TailNotMaterializableError:
                logger.warning("consistency undecidable at stage %s; checked %s stages", k, -k)
                return ConsistencyVerdict(kind="verified", depth=-k - 1)
            if choice != run.action_at(k):
                return ConsistencyVerdict(kind="violation_at", stage=k)
        if run.tail.is_constant:
            return ConsistencyVerdict(kind="tail_certified", depth=-low)
        return ConsistencyVerdict(kind="verified", depth=-low)

    def _deep_violators(self, profile: StrategyProfile, tail: TailPattern, high: int, period: int) -> Optional[List[int]]:
        """Players whose machine leaves ``tail`` at deep pure-tail positions; None when undecidable."""
        violators = set()
        abstract: Dict[Tuple[int, int], set] = {}
        for k in range(high - period + 1, high + 1):
            p = RepresentedPosition.pure_tail(k, tail)
            try:
                mover = self.ctx.active_player(p)
                choice = self.recommend(profile, p)
            except TailNotMaterializableError:
                return None
            cls = tail.class_at(k)
            if cls.is_constant:
                if choice != cls.action:
                    violators.add(mover)
            else:
                abstract.setdefault((k % 2, mover), set()).add(choice)
        for (_, mover), choices in abstract.items():
            if len(choices) == 1:
                violators.add(mover)
            elif mover not in violators:
                return None
        return sorted(violators)

    def consistent_run_in_segment(self, profile: StrategyProfile, anchor: SegmentAnchor) -> ConsistencyReport:
        tail = anchor.tail
        start = RepresentedPosition.pure_tail(0, tail)
        stage, period = self.regime(profile, start)
        violators = self._deep_violators(profile, tail, stage, period)
        if violators is None:
            return ConsistencyReport(kind="inconclusive", reason=f"machines are undecidable over tail {tail}")
        if violators:
            return ConsistencyReport(kind="not_permitted", player=violators[0])
        if not tail.is_constant:
            return ConsistencyReport(kind="inconclusive", reason=f"tail {tail} has no concrete run")
        run = self.roll_forward(profile, RepresentedPosition.pure_tail(stage, tail))
        return ConsistencyReport(kind="unique", runs=[run], exhaustive=True)

    def enumerate_consistent_runs(
        self, profile: StrategyProfile, anchors: Optional[Sequence[SegmentAnchor]] = None
    ) -> ConsistencyReport:
        anchors = list(anchors) if anchors is not None else constant_anchors(self.alphabet_size)
        runs: List[RepresentedRun] = []
        seen = []
        covered = True
        for anchor in anchors:
            if any(anchor.tail.compatible(t) for t in seen):
                continue
            seen.append(anchor.tail)
            report = self.consistent_run_in_segment(profile, anchor)
            if report.kind == "inconclusive":
                covered = False
            runs.extend(report.runs)
        kind = "multiple" if runs else "empty"
        return ConsistencyReport(kind=kind, runs=runs, exhaustive=False, covers_given_anchors=covered)

    # equilibria

    def _first_departure(self, search: DeviationSearch, run: RepresentedRun, n: int, gain: Fraction) -> EquilibriumVerdict:
        q: RepresentedPosition = run.prefix(n)
        while not q.is_run:
            on_path = run.action_at(q.stage)
            if self.ctx.active_player(q) == search.player:
                action = search.best_action(q)
                if action != on_path:
                    return EquilibriumVerdict(
                        kind="counter_deviation", stage=q.stage, player=search.player, action=action, gain=gain
                    )
            q = q.advance(on_path)
        raise AssertionError("a profitable subgame deviation leaves the run")  # pragma: no cover

    def check_equilibrium(
        self,
        profile: StrategyProfile,
        run: RepresentedRun,
        depth: Optional[int] = None,
        tolerance: Fraction = Fraction(0),
    ) -> EquilibriumVerdict:
        depth = self.settings.check_depth if depth is None else depth
        consistency = self.is_consistent(run, profile, depth)
        if consistency.kind == "violation_at":
            raise PreconditionError(f"run is not consistent with the profile at stage {consistency.stage}")
        if self.ctx.evaluator.is_tail and consistency.kind == "tail_certified":
            return EquilibriumVerdict(kind="exact_verified")
        payoff = self.ctx.payoff(run)
        searches = [DeviationSearch(self, profile, i) for i in range(1, self.game.players + 1)]
        for n in range(0, -depth - 1, -1):
            start = run.prefix(n)
            for search in searches:
                gain = search.value(start) - payoff[search.player - 1]
                if gain > tolerance:
                    verdict = self._first_departure(search, run, n, gain)
                    logger.info("player %s gains %s by deviating at stage %s", verdict.player, gain, verdict.stage)
                    return verdict
        if consistency.kind == "tail_certified" and self._certified(profile, run):
            return EquilibriumVerdict(kind="exact_verified")
        return EquilibriumVerdict(kind="verified", depth=depth)

    def _certified(self, profile: StrategyProfile, run: RepresentedRun) -> bool:
        if self.game.payoff.kind != "winlose":
            return False
        from pastgames.services.winlose import certifies_equilibrium

        return certifies_equilibrium(profile, run, self.ctx)

    # strong equilibria

    def deviation_family(self, profile: StrategyProfile, player: int, depth: int) -> List[StrategyMachine]:
        base = profile.machine_for(player)
        size = self.alphabet_size
        family: List[StrategyMachine] = [
            OverrideMachine(base=base, stage=k, action=a) for k in range(0, -depth - 1, -1) for a in range(size)
        ]
        for m in range(self.settings.deviation_memory + 1):
            windows = list(product(range(size), repeat=m))
            for actions in product(range(size), repeat=len(windows)):
                table = tuple(MachineEntry(window=w, action=a) for w, a in zip(windows, actions))
                family.append(FiniteMemoryMachine(memory=m, table=table))
        for trigger, scope, on, off in product(range(size), ("any", "own"), range(size), range(size)):
            if on != off:
                family.append(TailAwareMachine(trigger=trigger, scope=scope, on_trigger=on, otherwise=off))
        for tail in constant_tails(size):
            for length in range(1, self.settings.deviation_window + 1):
                for window in product(range(size), repeat=length):
                    target = RepresentedRun.build(tail, window).canonical()
                    if len(target.window) == length:
                        family.append(PinningMachine(target=target))
        return family

    def check_strong(
        self,
        profile: StrategyProfile,
        depth: Optional[int] = None,
        anchors: Optional[Sequence[SegmentAnchor]] = None,
    ) -> StrongVerdict:
        depth = self.settings.check_depth if depth is None else depth
        anchors = list(anchors) if anchors is not None else constant_anchors(self.alphabet_size)
        report = self.enumerate_consistent_runs(profile, anchors)
        if len(report.runs) != 1 or not report.covers_given_anchors:
            raise PreconditionError(f"profile has {len(report.runs)} consistent runs over the given anchors")
        run = report.runs[0]
        payoff = self.ctx.payoff(run)
        candidates = [
            (player, machine)
            for player in range(1, self.game.players + 1)
            for machine in self.deviation_family(profile, player, depth)
        ]

        def improvement(candidate) -> Optional[Tuple[RepresentedRun, Fraction]]:
            player, machine = candidate
            deviated = profile.replaced(player, machine)
            for other in self.enumerate_consistent_runs(deviated, anchors).runs:
                gain = self.ctx.payoff(other)[player - 1] - payoff[player - 1]
                if gain > 0:
                    return other, gain
            return None

        with ThreadPoolExecutor(max_workers=self.settings.workers) as pool:
            outcomes = list(pool.map(improvement, candidates))
        for (player, machine), outcome in zip(candidates, outcomes):
            if outcome is not None:
                other, gain = outcome
                logger.info("player %s profits %s with a %s deviation", player, gain, machine.kind)
                return StrongVerdict(
                    kind="counter_example",
                    depth=depth,
                    family_size=len(candidates),
                    player=player,
                    deviation=machine,
                    run=other,
                    gain=gain,
                )
        return StrongVerdict(kind="verified", depth=depth, family_size=len(candidates))

    def build_pinning_profile(self, run: RepresentedRun) -> StrategyProfile:
        if not run.tail.is_constant:
            raise UnsupportedTailPatternError("pinning needs a run with Constant tails")
        target = run.canonical()
        return StrategyProfile(machines=tuple(PinningMachine(target=target) for _ in range(self.game.players)))

    def strengthen(self, profile: StrategyProfile, run: RepresentedRun) -> StrategyProfile:
        """Profile whose only consistent run is ``run`` and that plays ``profile`` after a deviation from it."""
        if not has_two_active_players(self.game.turn, self.alphabet_size):
            raise PreconditionError("strengthening needs two players who move infinitely often along every run")
        if not run.tail.is_constant:
            raise UnsupportedTailPatternError("strengthening needs a run with Constant tails")
        verdict = self.check_equilibrium(profile, run)
        if verdict.kind == "counter_deviation":
            raise PreconditionError(
                f"(profile, run) is not an equilibrium: player {verdict.player} deviates at stage {verdict.stage}"
            )
        target = run.canonical()
        outside = TailAwareMachine(trigger=1, scope="own", on_trigger=0, otherwise=1)
        machines = tuple(
            CompositeMachine(target=target, after_deviation=machine, outside=outside) for machine in profile.machines
        )
        return StrategyProfile(machines=machines)


def iter_profiles(machines: Iterable[StrategyMachine], players: int) -> Iterable[StrategyProfile]:
    """Every profile whose machines are drawn from ``machines``."""
    pool = list(machines)
    for combo in product(pool, repeat=players):
        yield StrategyProfile(machines=tuple(combo))
