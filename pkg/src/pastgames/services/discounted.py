"""Reversed-time discounted payoffs and certified epsilon-equilibria.

The weight of stage ``n`` is ``(1 - delta) * delta ** -n``, so everything
before stage ``-K`` carries at most ``G_max * delta ** (K + 1)``. The solver
truncates there, solves the remaining finite game exactly and reports how much
a deviation in the truncated past could still be worth.
"""
from __future__ import annotations

import logging
from fractions import Fraction
from itertools import product
from typing import Dict, List, Optional, Set, Tuple

from pastgames.config import Settings, get_settings
from pastgames.errors import PreconditionError, TailNotMaterializableError
from pastgames.model import (
    Parity,
    RepresentedRun,
    TailPattern,
    TailPredicateTurn,
    TurnFunction,
    parity_of,
)
from pastgames.schemas import DiscountedPayoff, EpsilonCertificate, GameSpec, TurnContinuity
from pastgames.services.machines import StageEntry, StageTableMachine, StrategyProfile

logger = logging.getLogger(__name__)

Vector = Tuple[Fraction, ...]
Context = Tuple[int, ...]
FIXED_ACTION = 0


def evaluate_discounted(run: RepresentedRun, pay: DiscountedPayoff, turn: TurnFunction, players: int) -> Vector:
    """Exact payoff vector; the tails are summed in closed form per stage parity."""
    if not run.tail.is_constant:
        raise TailNotMaterializableError("discounted payoffs need Constant tails")
    delta = pay.delta
    low = min(run.window_start, turn.horizon) - turn.memory - 2
    full = run.materialized(low)
    totals = [Fraction(0)] * players
    for k in range(low, 1):
        mover = turn.active_player(full.prefix(k))
        action = full.action_at(k)
        weight = (1 - delta) * delta ** (-k)
        for i in range(players):
            totals[i] += weight * pay.reward(i + 1, mover, action)
    for k in (low - 1, low - 2):
        mover = turn.active_player(full.prefix(k))
        action = run.tail.action_at(k)
        weight = (1 - delta) * delta ** (-k) / (1 - delta**2)
        for i in range(players):
            totals[i] += weight * pay.reward(i + 1, mover, action)
    return tuple(totals)


def truncation_depth(pay: DiscountedPayoff, epsilon: Fraction) -> int:
    """Smallest K >= 0 with ``2 * G_max * delta ** (K + 1) <= epsilon``."""
    if epsilon <= 0:
        raise PreconditionError("epsilon must be positive")
    g_max = pay.g_max
    k = 0
    while 2 * g_max * pay.delta ** (k + 1) > epsilon:
        k += 1
    return k


def check_turn_continuity(turn: TurnFunction) -> TurnContinuity:
    if isinstance(turn, TailPredicateTurn):
        return TurnContinuity(kind="possibly_discontinuous")
    return TurnContinuity(kind="continuous", memory=turn.memory)


class DiscountedSolver:
    def __init__(self, game: GameSpec, settings: Optional[Settings] = None):
        if not isinstance(game.payoff, DiscountedPayoff):
            raise PreconditionError("the game's payoff is not discounted")
        self.game = game
        self.pay: DiscountedPayoff = game.payoff
        self.turn = game.turn
        self.settings = settings or get_settings()
        self.players = game.players
        self.alphabet_size = game.alphabet_size

    def evaluate(self, run: RepresentedRun) -> Vector:
        return evaluate_discounted(run, self.pay, self.turn, self.players)

    def _mover(self, context: Context, parity: Parity) -> int:
        return self.turn.player_for(context, parity)  # type: ignore[union-attr]

    def _shift(self, context: Context, action: int) -> Context:
        memory = self.turn.memory
        return (context + (action,))[-memory:] if memory else ()

    def backward_induction(self, depth: int) -> Tuple[Dict[Tuple[int, Context], int], Dict[Tuple[int, Context], Vector]]:
        """Subgame-perfect play of stages ``-depth .. 0`` for every entry context."""
        contexts = [tuple(c) for c in product(range(self.alphabet_size), repeat=self.turn.memory)]
        zero: Vector = tuple(Fraction(0) for _ in range(self.players))
        values: Dict[Tuple[int, Context], Vector] = {(1, c): zero for c in contexts}
        policy: Dict[Tuple[int, Context], int] = {}
        delta = self.pay.delta
        for k in range(0, -depth - 1, -1):
            weight = (1 - delta) * delta ** (-k)
            for context in contexts:
                mover = self._mover(context, parity_of(k))
                best: Optional[Tuple[int, Vector]] = None
                for action in range(self.alphabet_size):
                    later = values[(k + 1, self._shift(context, action))]
                    total = tuple(
                        later[i] + weight * self.pay.reward(i + 1, mover, action) for i in range(self.players)
                    )
                    if best is None or total[mover - 1] > best[1][mover - 1]:
                        best = (action, total)
                policy[(k, context)], values[(k, context)] = best  # type: ignore[misc]
        logger.debug("solved %s stages for %s entry contexts", depth + 1, len(contexts))
        return policy, values

    def _reachable_contexts(self, deviator: int) -> Set[Context]:
        """Contexts at stage ``-K`` parity that a lone deviator can steer a fixed-action past into."""
        start = ((FIXED_ACTION,) * self.turn.memory, "even")
        seen = {start}
        frontier = [start]
        while frontier:
            nxt = []
            for context, parity in frontier:
                mover = self._mover(context, parity)  # type: ignore[arg-type]
                actions = range(self.alphabet_size) if mover == deviator else (FIXED_ACTION,)
                following: Parity = "odd" if parity == "even" else "even"
                for action in actions:
                    state = (self._shift(context, action), following)
                    if state not in seen:
                        seen.add(state)
                        nxt.append(state)
            frontier = nxt
        return {context for context, parity in seen}

    def boundary_gain(self, depth: int, values: Dict[Tuple[int, Context], Vector]) -> Fraction:
        if self.turn.memory == 0:
            return Fraction(0)
        anchor = (FIXED_ACTION,) * self.turn.memory
        parity = parity_of(-depth)
        gain = Fraction(0)
        for player in range(1, self.players + 1):
            base = values[(-depth, anchor)][player - 1]
            for context in self._reachable_contexts(player):
                gain = max(gain, values[(-depth, context)][player - 1] - base)
        logger.debug("boundary contexts at %s stage %s worth %s", parity, -depth, gain)
        return gain

    def synthesize(self, epsilon: Fraction) -> EpsilonCertificate:
        if isinstance(self.turn, TailPredicateTurn):
            raise PreconditionError(
                "the turn function is not continuous: a player may want to deviate as early as possible "
                "and there is no optimal stage to do so"
            )
        epsilon = Fraction(epsilon)
        depth = truncation_depth(self.pay, epsilon)
        policy, values = self.backward_induction(depth)
        memory = self.turn.memory
        context: Context = (FIXED_ACTION,) * memory
        window: List[int] = []
        for k in range(-depth, 1):
            action = policy[(k, context)]
            window.append(action)
            context = self._shift(context, action)
        run = RepresentedRun.build(TailPattern.uniform(FIXED_ACTION), window).canonical()
        profile = self.stage_profile(depth, policy)
        tail_bound = 2 * self.pay.g_max * self.pay.delta ** (depth + 1)
        boundary = self.boundary_gain(depth, values)
        guarantee = tail_bound + boundary
        payoff = self.evaluate(run)
        logger.info("epsilon certificate: K=%s guarantee=%s payoff=%s", depth, guarantee, payoff)
        return EpsilonCertificate(
            epsilon=epsilon,
            truncation_depth=depth,
            memory=memory,
            profile=profile,
            run=run,
            payoff=payoff,
            tail_bound=tail_bound,
            boundary_gain=boundary,
            guarantee=guarantee,
            meets_epsilon=guarantee <= epsilon,
            report_version=self.settings.report_version,
        )

    def stage_profile(self, depth: int, policy: Dict[Tuple[int, Context], int]) -> StrategyProfile:
        machines = []
        for player in range(1, self.players + 1):
            entries = tuple(
                StageEntry(stage=k, window=context, action=action)
                for (k, context), action in sorted(policy.items(), key=lambda item: (item[0][0], item[0][1]))
                if self._mover(context, parity_of(k)) == player
            )
            machines.append(StageTableMachine(memory=self.turn.memory, entries=entries, default=FIXED_ACTION))
        return StrategyProfile(machines=tuple(machines))

    def max_single_deviation_gain(self, certificate: EpsilonCertificate) -> Fraction:
        """Largest gain from changing one action at a stage in ``-K .. 0`` and then following the profile."""
        from pastgames.services.strategies import StrategyEngine

        engine = StrategyEngine(self.game, settings=self.settings)
        run = certificate.run
        payoff = self.evaluate(run)
        best = Fraction(0)
        for k in range(-certificate.truncation_depth, 1):
            position = run.prefix(k)
            mover = self.turn.active_player(position)
            for action in range(self.alphabet_size):
                if action == run.action_at(k):
                    continue
                other = engine.roll_forward(certificate.profile, position.advance(action))
                best = max(best, self.evaluate(other)[mover - 1] - payoff[mover - 1])
        return best


