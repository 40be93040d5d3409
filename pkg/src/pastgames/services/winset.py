"""Open winning sets given by cylinder generators, and their pattern automaton."""
from __future__ import annotations

import logging
from functools import lru_cache, reduce
from math import lcm
from typing import Annotated, Dict, FrozenSet, Iterable, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

from pastgames.errors import UnsupportedTailPatternError
from pastgames.model import RepresentedPosition, RepresentedRun, TailClass

logger = logging.getLogger(__name__)

Symbol = Optional[int]


class StageAnchor(BaseModel):
    model_config = ConfigDict(frozen=True)

    stage: int = Field(..., le=0)


class AtMostAnchor(BaseModel):
    model_config = ConfigDict(frozen=True)

    at_most: int = Field(..., le=0)
    parity: Optional[Literal["even", "odd"]] = None


Anchor = Union[Literal["even", "odd", "all"], StageAnchor, AtMostAnchor]


class CylinderGenerator(BaseModel):
    """Runs whose actions from an admissible anchor stage ``k`` onward match ``pattern``.

    ``None`` in a pattern is a wildcard. When ``repeat`` is given it must keep
    matching periodically from the end of the pattern through stage 0.
    """

    model_config = ConfigDict(frozen=True)

    anchor: Anchor
    pattern: Tuple[Symbol, ...] = Field(..., min_length=1)
    repeat: Optional[Tuple[Symbol, ...]] = None

    @model_validator(mode="after")
    def _check_repeat(self) -> "CylinderGenerator":
        if self.repeat is not None and not self.repeat:
            raise ValueError("repeat block must be non-empty")
        return self

    @property
    def deep(self) -> bool:
        """Whether the generator has instances at arbitrarily early stages."""
        return not isinstance(self.anchor, StageAnchor)

    @property
    def bound(self) -> Optional[int]:
        if isinstance(self.anchor, StageAnchor):
            return self.anchor.stage
        if isinstance(self.anchor, AtMostAnchor):
            return self.anchor.at_most
        return None

    def admits(self, stage: int) -> bool:
        if stage + len(self.pattern) - 1 > 0:
            return False
        anchor = self.anchor
        if anchor == "all":
            return True
        if anchor == "even":
            return stage % 2 == 0
        if anchor == "odd":
            return stage % 2 == 1
        if isinstance(anchor, StageAnchor):
            return stage == anchor.stage
        if stage > anchor.at_most:
            return False
        if anchor.parity is None:
            return True
        return (stage % 2 == 0) == (anchor.parity == "even")

    def symbol_at(self, offset: int) -> Symbol:
        head = len(self.pattern)
        if offset < head:
            return self.pattern[offset]
        return self.repeat[(offset - head) % len(self.repeat)]  # type: ignore[index]

    def is_single_letter(self) -> bool:
        return len(self.pattern) == 1 and self.repeat is None

    def max_symbol(self) -> int:
        symbols = [s for s in self.pattern + (self.repeat or ()) if s is not None]
        return max(symbols, default=0)


class OpenSet(BaseModel):
    """A union of cylinder sets, the winning set of ``owner``."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["open"] = "open"
    generators: Tuple[CylinderGenerator, ...] = ()
    owner: int = Field(1, ge=1, le=2)


class GdeltaChain(BaseModel):
    """Intersection of finitely many open sets; level ``k`` means ``O_1 & ... & O_k``."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["gdelta"] = "gdelta"
    opens: Tuple[OpenSet, ...] = Field(..., min_length=1)
    owner: int = Field(1, ge=1, le=2)

    def prefix(self, k: int) -> "GdeltaChain":
        return GdeltaChain(opens=self.opens[:k], owner=self.owner)

    @property
    def levels(self) -> int:
        return len(self.opens)


WinningSetSpec = Annotated[Union[OpenSet, GdeltaChain], Field(discriminator="kind")]


def levels_of(spec: Union[OpenSet, GdeltaChain]) -> Tuple[OpenSet, ...]:
    if isinstance(spec, GdeltaChain):
        return spec.opens
    return (spec,)


def everything(alphabet_size: int = 2) -> OpenSet:
    """Open set containing every run."""
    return OpenSet(
        generators=tuple(CylinderGenerator(anchor="all", pattern=(a,)) for a in range(alphabet_size))
    )


Item = Tuple[int, int]
State = Tuple[FrozenSet[Item], bool]
EMPTY: State = (frozenset(), False)
MATCHED: State = (frozenset(), True)


class PatternAutomaton:
    """Deterministic automaton over (state, admissible generators, action).

    A state holds the generator instances still in progress as (generator,
    offset) items plus an absorbing matched flag. Instances in their repeat
    phase share an offset normalized modulo the repeat length.
    """

    def __init__(self, spec: OpenSet, alphabet_size: int) -> None:
        self.spec = spec
        self.generators = spec.generators
        self.alphabet_size = alphabet_size
        bounds = [g.bound for g in self.generators if g.bound is not None]
        fits = [1 - len(g.pattern) for g in self.generators]
        self.periodic_below = min([0] + bounds + fits)
        self.max_head = max((len(g.pattern) for g in self.generators), default=0)
        self.repeat_period = reduce(
            lcm, [len(g.repeat) for g in self.generators if g.repeat], 2
        )
        self._transitions: Dict[Tuple[State, FrozenSet[int]], Tuple[State, ...]] = {}

    def __repr__(self) -> str:
        return f"PatternAutomaton(generators={len(self.generators)}, alphabet={self.alphabet_size})"

    def signature(self, stage: int) -> FrozenSet[int]:
        if stage < self.periodic_below - 2:
            stage = self.periodic_below - 2 + ((stage - self.periodic_below) % 2)
        return frozenset(i for i, g in enumerate(self.generators) if g.admits(stage))

    def signatures(self) -> Tuple[FrozenSet[int], ...]:
        sigs = {self.signature(t) for t in range(self.periodic_below - 3, 1)}
        return tuple(sorted(sigs, key=sorted))

    def accepts(self, state: State) -> bool:
        items, matched = state
        if matched:
            return True
        return any(off >= len(self.generators[g].pattern) for g, off in items)

    def step(self, state: State, sig: FrozenSet[int], action: int) -> State:
        return self.transitions(state, sig)[action]

    def transitions(self, state: State, sig: FrozenSet[int]) -> Tuple[State, ...]:
        key = (state, sig)
        cached = self._transitions.get(key)
        if cached is None:
            cached = tuple(self._advance(state, sig, a) for a in range(self.alphabet_size))
            self._transitions[key] = cached
        return cached

    def _advance(self, state: State, sig: FrozenSet[int], action: int) -> State:
        items, matched = state
        if matched:
            return MATCHED
        pending = set(items) | {(g, 0) for g in sig}
        advanced = set()
        for g, off in pending:
            gen = self.generators[g]
            symbol = gen.symbol_at(off)
            if symbol is not None and symbol != action:
                continue
            off += 1
            head = len(gen.pattern)
            if off >= head:
                if gen.repeat is None:
                    return MATCHED
                off = head + (off - head) % len(gen.repeat)
            advanced.add((g, off))
        return (frozenset(advanced), False)

    def reachable(self) -> FrozenSet[State]:
        """All states reachable from the empty state, compiled breadth-first."""
        sigs = self.signatures()
        seen = {EMPTY}
        frontier = [EMPTY]
        while frontier:
            nxt = []
            for state in frontier:
                for sig in sigs:
                    for target in self.transitions(state, sig):
                        if target not in seen:
                            seen.add(target)
                            nxt.append(target)
            frontier = nxt
        return frozenset(seen)

    def feed(self, state: State, start: int, actions: Iterable[int]) -> State:
        stage = start
        for action in actions:
            state = self.step(state, self.signature(stage), action)
            stage += 1
        return state

    def history_start(self, p: RepresentedPosition) -> int:
        """A stage early enough that earlier instances add nothing new to the entry state."""
        return (
            min(p.window_start, self.periodic_below)
            - self.max_head
            - 2 * self.repeat_period
            - 2
        )

    def entry_state(self, p: RepresentedPosition, from_stage: Optional[int] = None) -> State:
        """State before stage ``p.stage``; instances anchored before ``from_stage`` are ignored."""
        start = self.history_start(p) if from_stage is None else from_stage
        if start >= p.stage:
            return EMPTY
        actions = p.materialized(start).window
        offset = len(actions) - (p.stage - start)
        return self.feed(EMPTY, start, actions[offset:])

    def run_accepts(self, run: RepresentedRun) -> bool:
        return self.accepts(self.entry_state(run))


@lru_cache(maxsize=256)
def compile_automaton(spec: OpenSet, alphabet_size: int) -> PatternAutomaton:
    automaton = PatternAutomaton(spec, alphabet_size)
    logger.debug("compiled %r with %d reachable states", automaton, len(automaton.reachable()))
    return automaton


def _alphabet_for(run: RepresentedPosition, spec: OpenSet) -> int:
    top = max([run.tail.max_action(), *run.window, *(g.max_symbol() for g in spec.generators)])
    return max(2, top + 1)


def naive_contains(run: RepresentedRun, spec: OpenSet) -> bool:
    """Membership by scanning every generator instance over a materialized window."""
    automaton = PatternAutomaton(spec, _alphabet_for(run, spec))
    low = automaton.history_start(run)
    full = run.materialized(low)
    for gen in spec.generators:
        for k in range(low, 1):
            if not gen.admits(k):
                continue
            offset = 0
            ok = True
            for stage in range(k, 1):
                if gen.repeat is None and offset >= len(gen.pattern):
                    break
                symbol = gen.symbol_at(offset)
                if symbol is not None and full.action_at(stage) != symbol:
                    ok = False
                    break
                offset += 1
            if ok:
                return True
    return False


def _open_contains(run: RepresentedRun, spec: OpenSet) -> bool:
    if not spec.generators:
        return False
    if run.tail.is_constant:
        return compile_automaton(spec, _alphabet_for(run, spec)).run_accepts(run)
    return _contains_over_mixed_tail(run, spec)


def _contains_over_mixed_tail(run: RepresentedRun, spec: OpenSet) -> bool:
    ws = run.window_start
    window_only = []
    for gen in spec.generators:
        if gen.deep:
            if not gen.is_single_letter():
                raise UnsupportedTailPatternError(
                    "multi-letter generators cannot be decided over a tail where both actions recur"
                )
            if _single_letter_in_tail(gen, run, ws):
                return True
        elif gen.bound < ws:
            if _stage_instance_matches(gen, run, ws):
                return True
            continue
        window_only.append(gen)
    if not window_only:
        return False
    automaton = PatternAutomaton(OpenSet(generators=tuple(window_only)), _alphabet_for(run, spec))
    return automaton.accepts(automaton.feed(EMPTY, ws, run.window))


def _single_letter_in_tail(gen: CylinderGenerator, run: RepresentedRun, ws: int) -> bool:
    letter = gen.pattern[0]
    for stage in (ws - 2, ws - 1):
        k = stage if gen.bound is None else min(stage, gen.bound - ((gen.bound - stage) % 2))
        if k >= ws or not gen.admits(k):
            continue
        cls: TailClass = run.tail.class_at(k)
        if letter is None or not cls.is_constant or cls.action == letter:
            return True
    return False


def _stage_instance_matches(gen: CylinderGenerator, run: RepresentedRun, ws: int) -> bool:
    k = gen.bound
    if not gen.admits(k):
        return False
    offset = 0
    for stage in range(k, 1):
        if gen.repeat is None and offset >= len(gen.pattern):
            break
        symbol = gen.symbol_at(offset)
        offset += 1
        if symbol is None:
            continue
        if stage < ws and not run.tail.class_at(stage).is_constant:
            raise UnsupportedTailPatternError(
                f"generator anchored at stage {k} reads stage {stage} inside an undetermined tail"
            )
        if run.action_at(stage) != symbol:
            return False
    return True


def run_in_winning_set(r: RepresentedRun, spec: Union[OpenSet, GdeltaChain]) -> bool:
    """Membership of ``r`` in the set itself, independent of which player owns it."""
    if isinstance(spec, GdeltaChain):
        return evaluate_gdelta(r, spec)
    return _open_contains(r, spec)


def evaluate_gdelta(r: RepresentedRun, chain: GdeltaChain) -> bool:
    return all(_open_contains(r, level) for level in chain.opens)


def player1_wins(r: RepresentedRun, spec: Union[OpenSet, GdeltaChain]) -> bool:
    inside = run_in_winning_set(r, spec)
    return inside if spec.owner == 1 else not inside
