"""Finitary representation of positions, runs, segments and turn functions.

A position in stage ``n`` is an infinite sequence of actions indexed by the
stages before ``n``. It is stored as a :class:`TailPattern` that describes the
infinite past, plus a finite ``window`` holding the actions of the stages
``window_start .. n - 1``.
"""
from __future__ import annotations

import logging
from functools import lru_cache
from itertools import product
from typing import Annotated, ClassVar, Dict, FrozenSet, Iterable, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

from pastgames.errors import GameSpecError, StageOverflowError, TailNotMaterializableError

logger = logging.getLogger(__name__)

ActionId = int
Parity = Literal["even", "odd"]
PARITIES: Tuple[Parity, Parity] = ("even", "odd")


def parity_of(stage: int) -> Parity:
    return "even" if stage % 2 == 0 else "odd"


class TailClass(BaseModel):
    """Actions played at one parity of stages in the infinite past.

    ``constant`` means the same action at every stage of that parity;
    ``both`` stands for a fixed but unknown past in which both actions of a
    two-letter alphabet occur infinitely often. Two ``both`` classes denote the
    same past only when their labels are equal; the empty label is one shared
    anonymous past, so callers that need distinct abstract pasts label them.
    """

    model_config = ConfigDict(frozen=True)

    kind: Literal["constant", "both"] = "constant"
    action: Optional[int] = Field(None, ge=0)
    label: str = ""

    @model_validator(mode="after")
    def _check_variant(self) -> "TailClass":
        if self.kind == "constant" and self.action is None:
            raise ValueError("constant tail class needs an action")
        if self.kind == "both" and self.action is not None:
            raise ValueError("'both' tail class carries no action")
        return self

    @classmethod
    def constant(cls, action: int) -> "TailClass":
        return cls(kind="constant", action=action)

    @classmethod
    def both(cls, label: str = "") -> "TailClass":
        """``label`` names the abstract past; unlabeled classes all denote the same one."""
        return cls(kind="both", label=label)

    @property
    def is_constant(self) -> bool:
        return self.kind == "constant"

    def compatible(self, other: "TailClass") -> bool:
        if self.kind != other.kind:
            return False
        if self.is_constant:
            return self.action == other.action
        return self.label == other.label

    def __str__(self) -> str:
        return f"C{self.action}" if self.is_constant else f"B{self.label}"


class TailPattern(BaseModel):
    model_config = ConfigDict(frozen=True)

    even: TailClass
    odd: TailClass

    @classmethod
    def uniform(cls, action: int) -> "TailPattern":
        tail = TailClass.constant(action)
        return cls(even=tail, odd=tail)

    @classmethod
    def of(cls, even: Union[int, TailClass], odd: Union[int, TailClass]) -> "TailPattern":
        def _wrap(value: Union[int, TailClass]) -> TailClass:
            return value if isinstance(value, TailClass) else TailClass.constant(value)

        return cls(even=_wrap(even), odd=_wrap(odd))

    @property
    def is_constant(self) -> bool:
        return self.even.is_constant and self.odd.is_constant

    def class_at(self, stage: int) -> TailClass:
        return self.even if stage % 2 == 0 else self.odd

    def action_at(self, stage: int) -> int:
        cls = self.class_at(stage)
        if not cls.is_constant:
            raise TailNotMaterializableError(
                f"stage {stage} lies in a tail where both actions occur infinitely often"
            )
        return cls.action  # type: ignore[return-value]

    def compatible(self, other: "TailPattern") -> bool:
        return self.even.compatible(other.even) and self.odd.compatible(other.odd)

    def max_action(self) -> int:
        return max((c.action for c in (self.even, self.odd) if c.is_constant), default=0)

    def __str__(self) -> str:
        return f"{self.even}/{self.odd}"


class RepresentedPosition(BaseModel):
    """A position at ``stage``: tail for every stage below the window, then the window."""

    model_config = ConfigDict(frozen=True)

    MAX_STAGE: ClassVar[int] = 0

    stage: int
    tail: TailPattern
    window: Tuple[int, ...] = ()

    @model_validator(mode="after")
    def _check_stage(self) -> "RepresentedPosition":
        if self.stage > self.MAX_STAGE:
            raise ValueError(f"stage {self.stage} is after the last stage {self.MAX_STAGE}")
        if any(a < 0 for a in self.window):
            raise ValueError("actions are non-negative indices")
        return self

    @classmethod
    def _make(cls, stage: int, tail: TailPattern, window: Tuple[int, ...]):
        return cls.model_construct(stage=stage, tail=tail, window=window)

    @classmethod
    def pure_tail(cls, stage: int, tail: TailPattern) -> "RepresentedPosition":
        return RepresentedPosition._make(stage, tail, ())

    @property
    def window_start(self) -> int:
        return self.stage - len(self.window)

    @property
    def is_run(self) -> bool:
        return self.stage == 1

    def action_at(self, k: int) -> int:
        if k >= self.stage:
            raise StageOverflowError(f"stage {k} is not in the past of stage {self.stage}")
        start = self.window_start
        if k >= start:
            return self.window[k - start]
        return self.tail.action_at(k)

    def materialized(self, down_to: int):
        """Copy whose window reaches back to ``down_to`` (Constant tails only)."""
        start = self.window_start
        if down_to >= start:
            return self
        prefix = tuple(self.tail.action_at(k) for k in range(down_to, start))
        return type(self)._make(self.stage, self.tail, prefix + self.window)

    def last_actions(self, m: int) -> Tuple[int, ...]:
        if m <= 0:
            return ()
        return self.materialized(self.stage - m).window[-m:]

    def canonical(self):
        """Shortest window describing the same sequence."""
        keep = 1 if self.is_run else 0
        window = self.window
        start = self.window_start
        cut = 0
        while len(window) - cut > keep:
            cls = self.tail.class_at(start + cut)
            if not (cls.is_constant and cls.action == window[cut]):
                break
            cut += 1
        if cut == 0:
            return self
        return type(self)._make(self.stage, self.tail, window[cut:])

    def key(self) -> Tuple[int, TailPattern, Tuple[int, ...]]:
        canon = self.canonical()
        return (canon.stage, canon.tail, canon.window)

    def same_sequence(self, other: "RepresentedPosition") -> bool:
        return self.key() == other.key()

    def extend(self, action: int) -> "RepresentedPosition":
        return extend_position(self, action)

    def advance(self, action: int) -> "RepresentedPosition":
        """Append ``action``; returns a run once stage 0 has been played."""
        if self.stage == 0:
            return extend_to_run(self, action)
        return extend_position(self, action)

    def all_equal(self, action: int) -> bool:
        if any(a != action for a in self.window):
            return False
        return all(c.is_constant and c.action == action for c in (self.tail.even, self.tail.odd))

    def prefix(self, n: int) -> "RepresentedPosition":
        """The position reached at stage ``n`` along this one."""
        if n > self.stage:
            raise StageOverflowError(f"stage {n} lies after stage {self.stage}")
        cut = max(0, n - self.window_start)
        return RepresentedPosition._make(n, self.tail, self.window[:cut])

    def describe(self) -> str:
        return f"stage {self.stage} tail {self.tail} window {list(self.window)}"


class RepresentedRun(RepresentedPosition):
    """A complete run; the window always contains stage 0."""

    MAX_STAGE: ClassVar[int] = 1

    stage: int = 1

    @model_validator(mode="after")
    def _check_run(self) -> "RepresentedRun":
        if self.stage != 1:
            raise ValueError("a run is stored at stage 1")
        if not self.window:
            raise ValueError("a run's window includes stage 0")
        return self

    @classmethod
    def build(cls, tail: TailPattern, window: Iterable[int]) -> "RepresentedRun":
        return cls(stage=1, tail=tail, window=tuple(window))

    @classmethod
    def constant(cls, action: int) -> "RepresentedRun":
        return cls.build(TailPattern.uniform(action), (action,))

    def prefix(self, n: int) -> RepresentedPosition:
        """The position r_{<n} for a stage ``n <= 0``."""
        if n > 0:
            raise StageOverflowError(f"stage {n} is not a stage of the game")
        return super().prefix(n)

    def actions(self, low: int, high: int = 0) -> Tuple[int, ...]:
        return tuple(self.action_at(k) for k in range(low, high + 1))


class SegmentAnchor(BaseModel):
    """Names the segment of all runs that agree with ``position`` up to finitely many stages."""

    model_config = ConfigDict(frozen=True)

    position: RepresentedPosition

    @classmethod
    def of_tail(cls, tail: TailPattern) -> "SegmentAnchor":
        return cls(position=RepresentedPosition(stage=0, tail=tail))

    @property
    def tail(self) -> TailPattern:
        return self.position.tail


def constant_tails(alphabet_size: int) -> List[TailPattern]:
    return [TailPattern.of(e, o) for e, o in product(range(alphabet_size), repeat=2)]


def constant_anchors(alphabet_size: int) -> List[SegmentAnchor]:
    return [SegmentAnchor.of_tail(tail) for tail in constant_tails(alphabet_size)]


def extend_position(p: RepresentedPosition, action: int) -> RepresentedPosition:
    if p.stage >= 0:
        raise StageOverflowError(
            f"cannot extend a position at stage {p.stage}; stage 0 extensions are runs"
        )
    return RepresentedPosition._make(p.stage + 1, p.tail, p.window + (action,))


def extend_to_run(p: RepresentedPosition, action: int) -> RepresentedRun:
    if p.stage != 0:
        raise StageOverflowError(f"only a stage-0 position completes a run, got stage {p.stage}")
    return RepresentedRun._make(1, p.tail, p.window + (action,))


def same_segment(r1: RepresentedPosition, r2: RepresentedPosition) -> bool:
    return r1.tail.compatible(r2.tail)


class AlternatingTurn(BaseModel):
    """Player 1 moves at even stages, player 2 at odd stages."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["alternating"] = "alternating"

    @property
    def memory(self) -> int:
        return 0

    @property
    def horizon(self) -> int:
        return 0

    def player_for(self, recent: Tuple[int, ...], parity: Parity) -> int:
        return 1 if parity == "even" else 2

    def active_player(self, p: RepresentedPosition) -> int:
        return 1 if p.stage % 2 == 0 else 2

    def players(self) -> FrozenSet[int]:
        return frozenset({1, 2})


class TurnEntry(BaseModel):
    model_config = ConfigDict(frozen=True)

    window: Tuple[int, ...] = ()
    parity: Parity
    player: int = Field(..., ge=1)


@lru_cache(maxsize=None)
def _turn_lookup(table: Tuple[TurnEntry, ...]) -> Dict[Tuple[Tuple[int, ...], str], int]:
    return {(e.window, e.parity): e.player for e in table}


class FiniteMemoryTurn(BaseModel):
    """Active player read from the last ``memory`` actions and the stage parity."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["finite_memory"] = "finite_memory"
    memory: int = Field(0, ge=0)
    table: Tuple[TurnEntry, ...]

    @model_validator(mode="after")
    def _check_table(self) -> "FiniteMemoryTurn":
        seen = set()
        for entry in self.table:
            if len(entry.window) != self.memory:
                raise ValueError(f"turn entry window {list(entry.window)} has wrong length")
            key = (entry.window, entry.parity)
            if key in seen:
                raise ValueError(f"duplicate turn entry {key}")
            seen.add(key)
        return self

    @classmethod
    def constant(cls, player: int = 1) -> "FiniteMemoryTurn":
        return cls(table=tuple(TurnEntry(parity=parity, player=player) for parity in PARITIES))

    @property
    def _lookup(self) -> Dict[Tuple[Tuple[int, ...], str], int]:
        return _turn_lookup(self.table)

    @property
    def horizon(self) -> int:
        return 0

    def check_total(self, alphabet_size: int, players: int) -> None:
        for window in product(range(alphabet_size), repeat=self.memory):
            for parity in PARITIES:
                player = self._lookup.get((tuple(window), parity))
                if player is None:
                    raise GameSpecError(f"no entry for window {list(window)} at {parity} stages", "turn.table")
                if player > players:
                    raise GameSpecError(f"player {player} does not exist", "turn.table")

    def player_for(self, recent: Tuple[int, ...], parity: Parity) -> int:
        try:
            return self._lookup[(recent, parity)]
        except KeyError as exc:
            raise GameSpecError(f"no entry for window {list(recent)} at {parity} stages", "turn.table") from exc

    def active_player(self, p: RepresentedPosition) -> int:
        return self.player_for(p.last_actions(self.memory), parity_of(p.stage))

    def players(self) -> FrozenSet[int]:
        return frozenset(e.player for e in self.table)


class TailPredicateTurn(BaseModel):
    """Default player everywhere, except at ``trigger_stage`` after an all-``trigger_action`` past."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["tail_predicate"] = "tail_predicate"
    default_player: int = Field(1, ge=1)
    trigger_stage: int = Field(0, le=0)
    trigger_action: int = Field(1, ge=0)
    trigger_player: int = Field(2, ge=1)

    @property
    def memory(self) -> int:
        return 0

    @property
    def horizon(self) -> int:
        return self.trigger_stage

    def active_player(self, p: RepresentedPosition) -> int:
        if p.stage == self.trigger_stage and p.all_equal(self.trigger_action):
            return self.trigger_player
        return self.default_player

    def players(self) -> FrozenSet[int]:
        return frozenset({self.default_player, self.trigger_player})


TurnFunction = Annotated[
    Union[AlternatingTurn, FiniteMemoryTurn, TailPredicateTurn],
    Field(discriminator="kind"),
]


def active_player(p: RepresentedPosition, turn: TurnFunction) -> int:
    return turn.active_player(p)


def has_two_active_players(turn: TurnFunction, alphabet_size: int) -> bool:
    """Whether every run has at least two players who move infinitely often.

    For finite-memory turns the far past of a run cycles through (window,
    parity) states; the guarantee fails iff some player owns a cycle of that
    state graph on their own.
    """
    if isinstance(turn, AlternatingTurn):
        return True
    if isinstance(turn, TailPredicateTurn):
        return False
    m = turn.memory
    states = [(tuple(w), parity) for w in product(range(alphabet_size), repeat=m) for parity in PARITIES]
    for player in turn.players():
        owned = {s for s in states if turn.player_for(s[0], s[1]) == player}
        if _has_cycle(owned, alphabet_size, m):
            logger.debug("player %s can be the only mover along a periodic past", player)
            return False
    return True


def _has_cycle(nodes: set, alphabet_size: int, m: int) -> bool:
    def successors(state):
        window, parity = state
        nxt: Parity = "odd" if parity == "even" else "even"
        for a in range(alphabet_size):
            target = ((window + (a,))[-m:] if m else (), nxt)
            if target in nodes:
                yield target

    colour: Dict[tuple, int] = {}
    for root in nodes:
        if root in colour:
            continue
        stack = [(root, iter(list(successors(root))))]
        colour[root] = 1
        while stack:
            node, children = stack[-1]
            advanced = False
            for child in children:
                state = colour.get(child, 0)
                if state == 1:
                    return True
                if state == 0:
                    colour[child] = 1
                    stack.append((child, iter(list(successors(child)))))
                    advanced = True
                    break
            if not advanced:
                colour[node] = 2
                stack.pop()
    return False
