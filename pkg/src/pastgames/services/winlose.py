"""Two-player win-lose games: auxiliary games, the w index and equilibrium synthesis.

Every computation runs backward induction over the joint pattern-automaton
state. ``table(n)`` is the set of joint states from which player 1 wins when
stages ``n .. 0`` are still to be played. Below the last stage-specific
generator the tables only depend on the stage parity, so they become periodic;
the solver detects the cycle and answers questions about arbitrarily early
stages from it.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from functools import reduce
from itertools import product
from math import lcm
from threading import RLock
from typing import TYPE_CHECKING, Callable, Dict, FrozenSet, Iterable, List, Optional, Set, Tuple, Union

from pastgames.config import Settings, get_settings
from pastgames.errors import InconclusiveError, PreconditionError, UndecidableTailError
from pastgames.model import (
    AlternatingTurn,
    RepresentedPosition,
    RepresentedRun,
    SegmentAnchor,
    TailPattern,
    TurnFunction,
)
from pastgames.schemas import (
    AuxGameResult,
    AuxLimit,
    AuxMove,
    EquilibriumCertificate,
    OpenClassification,
    SegmentValue,
    WIndexValue,
)
from pastgames.services.machines import (
    AuxStrategyMachine,
    CompositeMachine,
    FiniteMemoryMachine,
    StrategyProfile,
    WinningResponseMachine,
)
from pastgames.services.winset import (
    EMPTY,
    GdeltaChain,
    OpenSet,
    State,
    WinningSetSpec,
    compile_automaton,
    levels_of,
    player1_wins,
)

if TYPE_CHECKING:
    from pastgames.services.machines import GameContext

logger = logging.getLogger(__name__)

JointState = Tuple[State, ...]
FIXED_ACTION = 0


class WinLoseSolver:
    """Backward-induction solver for the game whose winning set is ``spec``."""

    def __init__(self, spec: WinningSetSpec, alphabet_size: int = 2, settings: Optional[Settings] = None):
        self.spec = spec
        self.alphabet_size = alphabet_size
        self.settings = settings or get_settings()
        self.automata = [compile_automaton(level, alphabet_size) for level in levels_of(spec)]
        self.periodic_below = min(a.periodic_below for a in self.automata)
        self.repeat_period = reduce(lcm, (a.repeat_period for a in self.automata), 2)
        self.fresh: JointState = tuple(EMPTY for _ in self.automata)
        self._tables: Dict[int, FrozenSet[JointState]] = {}
        self._lowest = 1
        self._cycle: Optional[Tuple[int, int]] = None
        self._states: Optional[FrozenSet[JointState]] = None
        self._lock = RLock()
        self._prefix_solvers: Dict[int, "WinLoseSolver"] = {}

    def __repr__(self) -> str:
        return f"WinLoseSolver(levels={len(self.automata)}, owner={self.spec.owner})"

    # automaton plumbing

    def signature(self, stage: int):
        return tuple(a.signature(stage) for a in self.automata)

    def step(self, state: JointState, stage: int, action: int) -> JointState:
        return tuple(
            a.step(s, a.signature(stage), action) for a, s in zip(self.automata, state)
        )

    def accepts(self, state: JointState) -> bool:
        inside = all(a.accepts(s) for a, s in zip(self.automata, state))
        return inside if self.spec.owner == 1 else not inside

    def entry(self, p: RepresentedPosition, from_stage: Optional[int] = None) -> JointState:
        return tuple(a.entry_state(p, from_stage) for a in self.automata)

    def history_start(self, p: RepresentedPosition) -> int:
        return min(a.history_start(p) for a in self.automata)

    def states(self) -> FrozenSet[JointState]:
        """Joint states reachable from the fresh state under any stage signature."""
        if self._states is None:
            stages = range(self.periodic_below - 3, 1)
            seen = {self.fresh}
            frontier = [self.fresh]
            while frontier:
                nxt = []
                for state in frontier:
                    for stage, action in product(stages, range(self.alphabet_size)):
                        target = self.step(state, stage, action)
                        if target not in seen:
                            seen.add(target)
                            nxt.append(target)
                frontier = nxt
            self._states = frozenset(seen)
            logger.debug("%r has %d joint states", self, len(seen))
        return self._states

    def label(self, state: JointState) -> str:
        parts = []
        for items, matched in state:
            if matched:
                parts.append("matched")
            else:
                parts.append("{" + ",".join(f"{g}:{off}" for g, off in sorted(items)) + "}")
        return "|".join(parts)

    # backward induction

    def table(self, stage: int) -> FrozenSet[JointState]:
        if stage >= 1:
            return self._accepting()
        with self._lock:
            if stage in self._tables:
                return self._tables[stage]
            if self._cycle is not None and stage < self._lowest:
                return self._tables[self._folded(stage)]
            self._extend_to(stage)
            if stage in self._tables:
                return self._tables[stage]
            return self._tables[self._folded(stage)]

    def _accepting(self) -> FrozenSet[JointState]:
        if 1 not in self._tables:
            self._tables[1] = frozenset(s for s in self.states() if self.accepts(s))
        return self._tables[1]

    def _folded(self, stage: int) -> int:
        high, period = self._cycle  # type: ignore[misc]
        return high - ((high - stage) % period)

    def _extend_to(self, stage: int) -> None:
        states = self.states()
        seen: Dict[Tuple[int, FrozenSet[JointState]], int] = {}
        for t in range(self._lowest, 0):
            if t <= self.periodic_below - 2:
                seen.setdefault((t % 2, self._tables[t]), t)
        after = self.table(self._lowest)
        t = self._lowest - 1
        while t >= stage or self._cycle is None:
            if -t > self.settings.iteration_cap:
                raise InconclusiveError(f"no periodic regime within {self.settings.iteration_cap} stages", cutoff=t)
            player1 = t % 2 == 0
            current = frozenset(
                s
                for s in states
                if (any if player1 else all)(
                    self.step(s, t, a) in after for a in range(self.alphabet_size)
                )
            )
            self._tables[t] = current
            self._lowest = t
            if t <= self.periodic_below - 2:
                key = (t % 2, current)
                if key in seen:
                    high = seen[key]
                    self._cycle = (high, high - t)
                    logger.debug("tables repeat from stage %s with period %s", high, high - t)
                    return
                seen[key] = t
            after = current
            t -= 1

    def regime(self) -> Tuple[int, int]:
        """(stage, period): below ``stage``, answers at pure-tail positions repeat with ``period``."""
        high, period = self.tail_regime()
        return min(high, self.periodic_below) - 1, lcm(period, self.repeat_period)

    def tail_regime(self) -> Tuple[int, int]:
        if self._cycle is None:
            self.table(self.periodic_below - 2)
        with self._lock:
            while self._cycle is None:
                self._extend_to(self._lowest - 1)
        return self._cycle  # type: ignore[return-value]

    # winners

    def position_winner(self, p: RepresentedPosition) -> int:
        if p.is_run:
            return 1 if player1_wins(p, self.spec) else 2  # type: ignore[arg-type]
        return 1 if self.entry(p) in self.table(p.stage) else 2

    def winner(self, q: RepresentedPosition) -> int:
        return self.position_winner(q)

    def tail_winners(self, tail: TailPattern, below: int = 0) -> Set[int]:
        """Winners of the pure-tail positions at every stage ``<= below``."""
        high, period = self.regime()
        low = min(below, high) - period
        return {
            self.position_winner(RepresentedPosition.pure_tail(n, tail))
            for n in range(low, below + 1)
        }

    # auxiliary games

    def _require_open_for_player1(self) -> None:
        if self.spec.owner != 1:
            raise PreconditionError("auxiliary games are defined for player 1's open winning set")

    def aux_action(self, p: RepresentedPosition, start_stage: int) -> Optional[int]:
        """Lowest action keeping player 1 winning in the auxiliary game started at ``start_stage``."""
        state = self.entry(p, from_stage=start_stage)
        after = self.table(p.stage + 1)
        for action in range(self.alphabet_size):
            if self.step(state, p.stage, action) in after:
                return action
        return None

    def solve_aux_game(
        self,
        n: int,
        entry_position: Optional[RepresentedPosition] = None,
        entry_start: Optional[int] = None,
    ) -> AuxGameResult:
        self._require_open_for_player1()
        if entry_position is None:
            state = self.fresh
        else:
            if entry_position.stage != n:
                raise PreconditionError(f"entry position is at stage {entry_position.stage}, not {n}")
            state = self.entry(entry_position, from_stage=n if entry_start is None else entry_start)
        winner = 1 if state in self.table(n) else 2
        moves: List[AuxMove] = []
        frontier = {state}
        for t in range(n, 1):
            after = self.table(t + 1)
            mover = 1 if t % 2 == 0 else 2
            nxt = set()
            for s in sorted(frontier, key=self.label):
                successors = [self.step(s, t, a) for a in range(self.alphabet_size)]
                if mover == winner:
                    wins = [a for a, target in enumerate(successors) if (target in after) == (winner == 1)]
                    action = wins[0]
                    moves.append(AuxMove(stage=t, state=self.label(s), action=action))
                    nxt.add(successors[action])
                else:
                    nxt.update(successors)
            frontier = nxt
        return AuxGameResult(winner=winner, start_stage=n, entry_state=self.label(state), moves=moves)

    def aux_winner_limit(self) -> AuxLimit:
        self._require_open_for_player1()
        n = 0
        try:
            while True:
                if self.fresh in self.table(n):
                    logger.info("player 1 first wins the auxiliary game at stage %s", n)
                    return AuxLimit(kind="flip_at", stage=n)
                if self._cycle is not None and n < self._cycle[0] - self._cycle[1]:
                    return AuxLimit(kind="player2_forever")
                n -= 1
        except InconclusiveError as exc:
            logger.warning("auxiliary games undecided below stage %s", exc.cutoff)
            return AuxLimit(kind="player2_down_to", stage=exc.cutoff)

    def classify(self) -> OpenClassification:
        limit = self.aux_winner_limit()
        if limit.kind == "flip_at":
            return OpenClassification(kind="part1", stage=limit.stage)
        if limit.kind == "player2_forever":
            return OpenClassification(kind="part2")
        return OpenClassification(kind="inconclusive", stage=limit.stage)

    def compute_w(self, p: RepresentedPosition) -> WIndexValue:
        """Lowest stage ``k <= p.stage`` from which player 2 still wins the auxiliary game at ``p``."""
        self._require_open_for_player1()
        n = p.stage
        here = self.table(n)

        def player2_wins(k: int) -> bool:
            return self.entry(p, from_stage=k) not in here

        if not player2_wins(n):
            return WIndexValue(kind="none_winning_for_p2")
        floor = self.history_start(p)
        k = n
        while k > floor:
            if n - k >= self.settings.w_search_cap:
                logger.warning("w search stopped at stage %s", k)
                return WIndexValue(kind="undetermined_below", stage=k)
            if not player2_wins(k - 1):
                return WIndexValue.at(k)
            k -= 1
        return WIndexValue(kind="minus_infinity")

    # certificates

    def _roll(self, start: RepresentedPosition, choose: Callable[[RepresentedPosition], int]) -> RepresentedRun:
        p = start
        while not p.is_run:
            p = p.advance(choose(p))
        return p.canonical()  # type: ignore[return-value]

    def _preserving(self, p: RepresentedPosition, player: int, prefer: Optional[int] = None) -> Optional[int]:
        order = list(range(self.alphabet_size))
        if prefer is not None:
            order.remove(prefer)
            order.insert(0, prefer)
        for action in order:
            if self.winner(p.advance(action)) == player:
                return action
        return None

    def part1_certificate(self, flip: int) -> EquilibriumCertificate:
        tail = TailPattern.uniform(FIXED_ACTION)

        def choose(p: RepresentedPosition) -> int:
            if p.stage % 2 == 0:
                action = self.aux_action(p, flip)
                return FIXED_ACTION if action is None else action
            return FIXED_ACTION

        run = self._roll(RepresentedPosition.pure_tail(flip, tail), choose)
        profile = StrategyProfile(
            machines=(
                AuxStrategyMachine(objective=self.spec, start_stage=flip, fixed_action=FIXED_ACTION),
                FiniteMemoryMachine.constant(FIXED_ACTION),
            )
        )
        return EquilibriumCertificate(
            classification="part1",
            profile=profile,
            run=run,
            verified_depth=self.settings.check_depth,
            winner=1,
            report_version=self.settings.report_version,
        )

    def _candidate_tails(self) -> Iterable[TailPattern]:
        uniform = [TailPattern.uniform(a) for a in range(self.alphabet_size)]
        mixed = [
            TailPattern.of(e, o)
            for e, o in product(range(self.alphabet_size), repeat=2)
            if e != o
        ]
        return uniform + mixed

    def part2_certificate(self) -> EquilibriumCertificate:
        high, _ = self.regime()
        for tail in self._candidate_tails():
            if self.tail_winners(tail, below=high) != {2}:
                continue
            even, odd = tail.even.action, tail.odd.action

            def choose(p: RepresentedPosition) -> int:
                if p.stage % 2 == 0:
                    return even  # type: ignore[return-value]
                action = self._preserving(p, 2, prefer=odd)
                return odd if action is None else action  # type: ignore[return-value]

            run = self._roll(RepresentedPosition.pure_tail(high, tail), choose)
            responder = WinningResponseMachine(objective=self.spec, prefer_tail=True, fallback=odd)
            profile = StrategyProfile(
                machines=(
                    FiniteMemoryMachine.constant(even),
                    CompositeMachine(
                        target=run,
                        after_deviation=responder,
                        outside=FiniteMemoryMachine.constant(odd),
                    ),
                )
            )
            logger.info("player 2 keeps winning along the %s segment", tail)
            return EquilibriumCertificate(
                classification="part2",
                profile=profile,
                run=run,
                verified_depth=self.settings.check_depth,
                winner=2,
                report_version=self.settings.report_version,
            )
        raise InconclusiveError("no Constant tail keeps player 2 winning")

    def synthesize_open(self) -> EquilibriumCertificate:
        classification = self.classify()
        if classification.kind == "part1":
            return self.part1_certificate(classification.stage)  # type: ignore[arg-type]
        if classification.kind == "part2":
            return self.part2_certificate()
        raise InconclusiveError("classification is inconclusive", cutoff=classification.stage)

    # rank 2

    def prefix_solver(self, k: int) -> "WinLoseSolver":
        if not isinstance(self.spec, GdeltaChain):
            raise PreconditionError("prefix levels exist only for chains of open sets")
        with self._lock:
            solver = self._prefix_solvers.get(k)
            if solver is None:
                solver = self if k == self.spec.levels else WinLoseSolver(
                    self.spec.prefix(k), self.alphabet_size, settings=self.settings
                )
                self._prefix_solvers[k] = solver
        return solver

    def compute_w_rank2(self, p: RepresentedPosition) -> int:
        """Largest ``k`` such that ``p`` is winning for player 1 against ``O_1 & ... & O_k``; 0 if none."""
        chain = self._chain()
        if chain is not self.spec:
            return WinLoseSolver(chain, self.alphabet_size, self.settings).compute_w_rank2(p)
        for k in range(chain.levels, 0, -1):
            if self.prefix_solver(k).winner(p) == 1:
                return k
        return 0

    def _chain(self) -> GdeltaChain:
        if isinstance(self.spec, GdeltaChain):
            return self.spec
        return GdeltaChain(opens=(self.spec,), owner=self.spec.owner)

    def synthesize_rank2(self) -> EquilibriumCertificate:
        chain = self._chain()
        if chain is not self.spec:
            return WinLoseSolver(chain, self.alphabet_size, self.settings).synthesize_rank2()
        levels = range(1, chain.levels + 1)
        with ThreadPoolExecutor(max_workers=self.settings.workers) as pool:
            classes = list(pool.map(lambda k: self.prefix_solver(k).classify(), levels))
        for k, classification in zip(levels, classes):
            if classification.kind == "inconclusive":
                raise InconclusiveError(f"level {k} is inconclusive", cutoff=classification.stage)
            if classification.kind == "part2":
                certificate = self.prefix_solver(k).part2_certificate()
                return certificate.model_copy(update={"classification": "rank2-case1", "levels": k})
        return self._rank2_case2(classes[-1].stage)  # type: ignore[arg-type]

    def _rank2_case2(self, flip: int) -> EquilibriumCertificate:
        tail = TailPattern.uniform(FIXED_ACTION)

        def choose(p: RepresentedPosition) -> int:
            if p.stage % 2 == 0:
                action = self._preserving(p, 1)
                return FIXED_ACTION if action is None else action
            return FIXED_ACTION

        run = self._roll(RepresentedPosition.pure_tail(flip, tail), choose)
        responder = WinningResponseMachine(objective=self.spec, fallback=FIXED_ACTION)
        profile = StrategyProfile(
            machines=(
                CompositeMachine(
                    target=run,
                    after_deviation=responder,
                    outside=FiniteMemoryMachine.constant(FIXED_ACTION),
                ),
                FiniteMemoryMachine.constant(FIXED_ACTION),
            )
        )
        logger.info("every level is won by player 1 from stage %s", flip)
        return EquilibriumCertificate(
            classification="rank2-case2",
            profile=profile,
            run=run,
            verified_depth=self.settings.check_depth,
            winner=1,
            levels=self.spec.levels,  # type: ignore[union-attr]
            report_version=self.settings.report_version,
        )

    # segments

    def segment_value(self, anchor: SegmentAnchor) -> SegmentValue:
        high, _ = self.regime()
        winners = self.tail_winners(anchor.tail, below=min(high, anchor.position.stage))
        if len(winners) != 1:
            raise InconclusiveError(f"segment of tail {anchor.tail} is not determined: both players own positions")
        (winner,) = winners
        fallback = anchor.tail.even.action if anchor.tail.even.is_constant else FIXED_ACTION
        return SegmentValue(
            value=1 if winner == 1 else 0,
            winner=winner,
            strategy=WinningResponseMachine(objective=self.spec, prefer_tail=True, fallback=fallback),
            anchor=anchor,
        )

    def determined_segment(self, anchors: Iterable[SegmentAnchor]) -> SegmentValue:
        for anchor in anchors:
            try:
                return self.segment_value(anchor)
            except InconclusiveError:
                logger.debug("segment %s is not determined", anchor.tail)
        raise InconclusiveError("none of the given segments is determined")


def winning_player(
    p: RepresentedPosition,
    oracle: Callable[[RepresentedRun], int],
    alphabet_size: int = 2,
    turn: Optional[TurnFunction] = None,
) -> int:
    """Minimax over the finite subgame at ``p``; ``oracle`` names the winner of each run."""
    result = winning_player_partial(p, oracle, alphabet_size, turn, strict=True)
    return result  # type: ignore[return-value]


def winning_player_partial(
    p: RepresentedPosition,
    oracle: Callable[[RepresentedRun], int],
    alphabet_size: int = 2,
    turn: Optional[TurnFunction] = None,
    strict: bool = False,
    memo: Optional[Dict[tuple, Optional[int]]] = None,
) -> Optional[int]:
    """Like :func:`winning_player` but ``None`` when undecidable leaves decide the subgame."""
    turn = turn or AlternatingTurn()
    memo = {} if memo is None else memo

    def solve(q: RepresentedPosition) -> Optional[int]:
        key = q.key()
        if key in memo:
            return memo[key]
        if q.is_run:
            try:
                result: Optional[int] = oracle(q)  # type: ignore[arg-type]
            except UndecidableTailError:
                if strict:
                    raise
                result = None
        else:
            mover = turn.active_player(q)
            children = [solve(q.advance(a)) for a in range(alphabet_size)]
            if mover in children:
                result = mover
            elif None in children:
                result = None
            else:
                result = children[0]
        memo[key] = result
        return result

    return solve(p)


def _objective_matches(objective: Optional[WinningSetSpec], game_set: WinningSetSpec, winner: int) -> bool:
    if objective is None or objective == game_set:
        return True
    if winner != 2 or not isinstance(game_set, GdeltaChain):
        return False
    chains = [game_set.prefix(k) for k in range(1, game_set.levels + 1)]
    return objective in chains or (isinstance(objective, OpenSet) and objective == game_set.opens[0])


def certifies_equilibrium(profile: StrategyProfile, run: RepresentedRun, ctx: "GameContext") -> bool:
    """Whether the winner's machine provably keeps winning after any deviation in run's segment.

    Consistency of ``run`` with ``profile`` is checked by the caller.
    """
    game_set = ctx.winning_set()
    winner = 1 if player1_wins(run, game_set) else 2
    machine = profile.machine_for(winner)
    if isinstance(machine, CompositeMachine) and machine.target.same_sequence(run):
        machine = machine.after_deviation
    if isinstance(machine, AuxStrategyMachine):
        if winner != 1 or (machine.objective is not None and machine.objective != game_set):
            return False
        solver = ctx.solver(machine.objective)
        return solver.fresh in solver.table(machine.start_stage)
    if not isinstance(machine, WinningResponseMachine):
        return False
    if not _objective_matches(machine.objective, game_set, winner):
        return False
    solver = ctx.solver(machine.objective)
    canon = run.canonical()
    lowest = canon.window_start
    if solver.tail_winners(run.tail, below=lowest) != {winner}:
        if winner != 1:
            return False
        limit = solver.aux_winner_limit()
        if limit.kind != "flip_at":
            return False
        lowest = min(lowest, limit.stage)  # type: ignore[type-var]
    return all(solver.winner(canon.prefix(n)) == winner for n in range(lowest, 1))
