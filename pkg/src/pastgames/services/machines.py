"""Computable strategies and the context they are evaluated in.

Every machine is an immutable pydantic model with ``choose(p, ctx)``. Machines
also report a ``horizon``: below that stage their choice at a position of a
fixed Constant tail only depends on the stage parity, which is what lets the
strategy engine certify consistency over the whole infinite past.
"""
from __future__ import annotations

import logging
from functools import cached_property, lru_cache, reduce
from math import lcm
from threading import Lock
from typing import TYPE_CHECKING, Annotated, Dict, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field

from pastgames.config import Settings, get_settings
from pastgames.errors import GameSpecError, PreconditionError
from pastgames.model import (
    AlternatingTurn,
    Parity,
    RepresentedPosition,
    RepresentedRun,
    parity_of,
    same_segment,
)
from pastgames.services.winset import WinningSetSpec

if TYPE_CHECKING:
    from pastgames.schemas import GameSpec
    from pastgames.services.payoffs import PayoffEvaluator
    from pastgames.services.winlose import WinLoseSolver

logger = logging.getLogger(__name__)


class MachineEntry(BaseModel):
    model_config = ConfigDict(frozen=True)

    window: Tuple[int, ...] = ()
    parity: Optional[Parity] = None
    action: int = Field(..., ge=0)


class StageEntry(BaseModel):
    model_config = ConfigDict(frozen=True)

    stage: int = Field(..., le=0)
    window: Tuple[int, ...] = ()
    action: int = Field(..., ge=0)


@lru_cache(maxsize=None)
def _memory_lookup(table: Tuple[MachineEntry, ...]) -> Dict[Tuple[Tuple[int, ...], Optional[str]], int]:
    return {(e.window, e.parity): e.action for e in table}


@lru_cache(maxsize=None)
def _stage_lookup(entries: Tuple[StageEntry, ...]) -> Tuple[Dict[Tuple[int, Tuple[int, ...]], int], int]:
    table = {(e.stage, e.window): e.action for e in entries}
    return table, min((e.stage for e in entries), default=1)


class _Machine(BaseModel):
    model_config = ConfigDict(frozen=True)

    def choose(self, p: RepresentedPosition, ctx: "GameContext") -> int:  # pragma: no cover
        raise NotImplementedError

    def lookback(self) -> int:
        return 0

    def horizon(self, ctx: "GameContext") -> int:
        return 0

    def period(self, ctx: "GameContext") -> int:
        return 2


class FiniteMemoryMachine(_Machine):
    """Action read from the last ``memory`` actions (and optionally the stage parity)."""

    kind: Literal["finite_memory"] = "finite_memory"
    memory: int = Field(0, ge=0)
    table: Tuple[MachineEntry, ...] = ()
    default: Optional[int] = Field(None, ge=0)

    @classmethod
    def constant(cls, action: int) -> "FiniteMemoryMachine":
        return cls(memory=0, table=(), default=action)

    @classmethod
    def repeat_previous(cls, alphabet_size: int = 2) -> "FiniteMemoryMachine":
        return cls(
            memory=1,
            table=tuple(MachineEntry(window=(a,), action=a) for a in range(alphabet_size)),
        )

    def lookback(self) -> int:
        return self.memory

    def choose(self, p: RepresentedPosition, ctx: "GameContext") -> int:
        recent = p.last_actions(self.memory)
        lookup = _memory_lookup(self.table)
        for key in ((recent, parity_of(p.stage)), (recent, None)):
            if key in lookup:
                return lookup[key]
        if self.default is not None:
            return self.default
        raise GameSpecError(f"finite-memory machine has no entry for window {list(recent)}", "machine.table")


class StageTableMachine(_Machine):
    """Per-stage tables on the last ``memory`` actions; ``default`` outside the tabulated stages."""

    kind: Literal["stage_table"] = "stage_table"
    memory: int = Field(0, ge=0)
    entries: Tuple[StageEntry, ...] = ()
    default: int = Field(0, ge=0)

    @property
    def first_stage(self) -> int:
        return _stage_lookup(self.entries)[1]

    def lookback(self) -> int:
        return self.memory

    def horizon(self, ctx: "GameContext") -> int:
        return min(0, self.first_stage - 1)

    def choose(self, p: RepresentedPosition, ctx: "GameContext") -> int:
        if p.stage < self.first_stage:
            return self.default
        return _stage_lookup(self.entries)[0].get((p.stage, p.last_actions(self.memory)), self.default)


class TailAwareMachine(_Machine):
    """``on_trigger`` when every earlier action (of anyone, or of the owner) equals ``trigger``."""

    kind: Literal["tail_aware"] = "tail_aware"
    trigger: int = Field(1, ge=0)
    scope: Literal["any", "own"] = "any"
    on_trigger: int = Field(0, ge=0)
    otherwise: int = Field(1, ge=0)

    def choose(self, p: RepresentedPosition, ctx: "GameContext") -> int:
        if self.scope == "any":
            triggered = p.all_equal(self.trigger)
        else:
            triggered = ctx.played_only(p, self.trigger, ctx.active_player(p))
        return self.on_trigger if triggered else self.otherwise


def _follows(p: RepresentedPosition, target: RepresentedRun) -> bool:
    return p.same_sequence(target.prefix(p.stage))


class PinningMachine(_Machine):
    """Follows ``target``; anywhere else plays ``zero`` iff the owner only ever played ``one``."""

    kind: Literal["pinning"] = "pinning"
    target: RepresentedRun
    zero: int = Field(0, ge=0)
    one: int = Field(1, ge=0)

    def horizon(self, ctx: "GameContext") -> int:
        return min(0, self.target.window_start)

    def choose(self, p: RepresentedPosition, ctx: "GameContext") -> int:
        if _follows(p, self.target):
            return self.target.action_at(p.stage)
        return self.zero if ctx.played_only(p, self.one, ctx.active_player(p)) else self.one


class WinningResponseMachine(_Machine):
    """Lowest action that keeps the position winning for the mover in the game of ``objective``."""

    kind: Literal["winning_response"] = "winning_response"
    objective: Optional[WinningSetSpec] = None
    prefer_tail: bool = False
    fallback: int = Field(0, ge=0)

    def horizon(self, ctx: "GameContext") -> int:
        return ctx.solver(self.objective).regime()[0]

    def period(self, ctx: "GameContext") -> int:
        return ctx.solver(self.objective).regime()[1]

    def choose(self, p: RepresentedPosition, ctx: "GameContext") -> int:
        player = ctx.active_player(p)
        solver = ctx.solver(self.objective)
        order = list(range(ctx.game.alphabet_size))
        if self.prefer_tail:
            cls = p.tail.class_at(p.stage)
            if cls.is_constant:
                order.remove(cls.action)
                order.insert(0, cls.action)
        for action in order:
            if solver.winner(p.advance(action)) == player:
                return action
        return self.fallback


class AuxStrategyMachine(_Machine):
    """Player 1's winning play in the auxiliary game started at ``start_stage``."""

    kind: Literal["aux_strategy"] = "aux_strategy"
    objective: Optional[WinningSetSpec] = None
    start_stage: int = Field(0, le=0)
    fixed_action: int = Field(0, ge=0)

    def horizon(self, ctx: "GameContext") -> int:
        return self.start_stage - 1

    def choose(self, p: RepresentedPosition, ctx: "GameContext") -> int:
        if p.stage < self.start_stage:
            return self.fixed_action
        action = ctx.solver(self.objective).aux_action(p, self.start_stage)
        return self.fixed_action if action is None else action


class CompositeMachine(_Machine):
    """Follow ``target``; after a deviation inside its segment use ``after_deviation``."""

    kind: Literal["composite"] = "composite"
    target: RepresentedRun
    after_deviation: "StrategyMachine"
    outside: "StrategyMachine"

    def lookback(self) -> int:  # type: ignore[override]
        return max(self.after_deviation.lookback(), self.outside.lookback())

    def horizon(self, ctx: "GameContext") -> int:
        return min(
            0,
            self.target.window_start,
            self.after_deviation.horizon(ctx),
            self.outside.horizon(ctx),
        )

    def period(self, ctx: "GameContext") -> int:
        return lcm(self.after_deviation.period(ctx), self.outside.period(ctx))

    def choose(self, p: RepresentedPosition, ctx: "GameContext") -> int:
        if _follows(p, self.target):
            return self.target.action_at(p.stage)
        if same_segment(p, self.target):
            return self.after_deviation.choose(p, ctx)
        return self.outside.choose(p, ctx)


class OverrideMachine(_Machine):
    """``base`` everywhere except a fixed action at one stage."""

    kind: Literal["override"] = "override"
    base: "StrategyMachine"
    stage: int = Field(..., le=0)
    action: int = Field(..., ge=0)

    def lookback(self) -> int:  # type: ignore[override]
        return self.base.lookback()

    def horizon(self, ctx: "GameContext") -> int:
        return min(self.stage, self.base.horizon(ctx))

    def period(self, ctx: "GameContext") -> int:
        return self.base.period(ctx)

    def choose(self, p: RepresentedPosition, ctx: "GameContext") -> int:
        if p.stage == self.stage:
            return self.action
        return self.base.choose(p, ctx)


StrategyMachine = Annotated[
    Union[
        FiniteMemoryMachine,
        StageTableMachine,
        TailAwareMachine,
        PinningMachine,
        WinningResponseMachine,
        AuxStrategyMachine,
        CompositeMachine,
        OverrideMachine,
    ],
    Field(discriminator="kind"),
]

CompositeMachine.model_rebuild()
OverrideMachine.model_rebuild()


class StrategyProfile(BaseModel):
    """One machine per player; ``machines[i - 1]`` belongs to player ``i``."""

    model_config = ConfigDict(frozen=True)

    machines: Tuple[StrategyMachine, ...] = Field(..., min_length=1)

    @property
    def players(self) -> int:
        return len(self.machines)

    def machine_for(self, player: int):
        try:
            return self.machines[player - 1]
        except IndexError as exc:
            raise GameSpecError(f"profile has no machine for player {player}", "profile") from exc

    def replaced(self, player: int, machine) -> "StrategyProfile":
        machines = list(self.machines)
        machines[player - 1] = machine
        return StrategyProfile(machines=tuple(machines))

    def lookback(self) -> int:
        return max(m.lookback() for m in self.machines)

    def horizon(self, ctx: "GameContext") -> int:
        return min(m.horizon(ctx) for m in self.machines)

    def period(self, ctx: "GameContext") -> int:
        return reduce(lcm, (m.period(ctx) for m in self.machines), 2)


class GameContext:
    """A game together with lazily built evaluators and win-lose solvers."""

    def __init__(self, game: "GameSpec", settings: Optional[Settings] = None):
        self.game = game
        self.settings = settings or get_settings()
        self._solvers: Dict[object, "WinLoseSolver"] = {}
        self._lock = Lock()

    @cached_property
    def evaluator(self) -> "PayoffEvaluator":
        from pastgames.services.payoffs import evaluator_for

        return evaluator_for(self.game)

    def payoff(self, run: RepresentedRun):
        return self.evaluator.payoff(run)

    def winning_set(self) -> WinningSetSpec:
        winning_set = getattr(self.game.payoff, "winning_set", None)
        if winning_set is None:
            raise PreconditionError("the game's payoff is not given by a winning set")
        return winning_set

    def solver(self, objective: Optional[WinningSetSpec] = None) -> "WinLoseSolver":
        from pastgames.services.winlose import WinLoseSolver

        spec = objective if objective is not None else self.winning_set()
        with self._lock:
            solver = self._solvers.get(spec)
            if solver is None:
                solver = WinLoseSolver(spec, self.game.alphabet_size, settings=self.settings)
                self._solvers[spec] = solver
        return solver

    def active_player(self, p: RepresentedPosition) -> int:
        return self.game.turn.active_player(p)

    def turn_horizon(self) -> int:
        return self.game.turn.horizon

    def played_only(self, p: RepresentedPosition, action: int, player: int) -> bool:
        """Whether ``player`` chose ``action`` at every earlier stage where they were active."""
        turn = self.game.turn
        if isinstance(turn, AlternatingTurn):
            own = 0 if player == 1 else 1
            if player not in (1, 2):
                return True
            start = p.window_start
            for k in range(start, p.stage):
                if k % 2 == own and p.window[k - start] != action:
                    return False
            cls = p.tail.class_at(own)
            return cls.is_constant and cls.action == action
        memory = getattr(turn, "memory", 0)
        low = min(p.window_start, turn.horizon) - 2 * (memory + 1)
        full = p.materialized(low)
        for k in range(low, p.stage):
            if turn.active_player(full.prefix(k)) == player and full.window[k - low] != action:
                return False
        for k in (low - 2, low - 1):
            if turn.active_player(RepresentedPosition.pure_tail(k, p.tail)) == player and p.tail.action_at(k) != action:
                return False
        return True
