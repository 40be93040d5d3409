from fractions import Fraction
from pathlib import Path
from typing import Annotated, Any, Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, PlainSerializer, PlainValidator, WithJsonSchema, model_validator

from pastgames.errors import GameSpecError
from pastgames.model import (
    AlternatingTurn,
    FiniteMemoryTurn,
    RepresentedRun,
    SegmentAnchor,
    TailPattern,
    TurnFunction,
)
from pastgames.services.machines import StrategyMachine, StrategyProfile
from pastgames.services.winset import WinningSetSpec


def _parse_rational(value: Any) -> Fraction:
    if isinstance(value, bool):
        raise ValueError("booleans are not rationals")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(str(value))
    try:
        return Fraction(value)
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"not a rational number: {value!r}") from exc


Rational = Annotated[
    Fraction,
    PlainValidator(_parse_rational),
    PlainSerializer(str, return_type=str),
    WithJsonSchema({"type": "string", "examples": ["1/2"]}),
]


class WinLosePayoff(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["winlose"] = "winlose"
    winning_set: WinningSetSpec = Field(..., description="Player 1's winning set (or player 2's, see owner)")


class DiscountedPayoff(BaseModel):
    """Reversed-time discounted payoff; ``g[i-1][j-1][a]`` is player i's reward when player j plays a."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["discounted"] = "discounted"
    delta: Rational = Field(..., description="Discount factor in (0, 1)")
    g: Tuple[Tuple[Tuple[Rational, ...], ...], ...] = Field(..., description="Stage reward table")

    @model_validator(mode="after")
    def _check_delta(self) -> "DiscountedPayoff":
        if not 0 < self.delta < 1:
            raise GameSpecError(f"discount factor {self.delta} is not in (0, 1)", "payoff.delta")
        return self

    @property
    def g_max(self) -> Fraction:
        return max((abs(v) for row in self.g for col in row for v in col), default=Fraction(0))

    def reward(self, recipient: int, mover: int, action: int) -> Fraction:
        return self.g[recipient - 1][mover - 1][action]


class BuiltinPayoff(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["builtin"] = "builtin"
    gallery_id: str = Field(..., description="Gallery entry whose evaluator defines the payoff")


PayoffSpec = Annotated[Union[WinLosePayoff, DiscountedPayoff, BuiltinPayoff], Field(discriminator="kind")]

_GALLERY_TURNS: Dict[str, Dict[str, Any]] = {
    "discontinuous-turn": {"kind": "tail_predicate"},
}


class GameSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    players: int = Field(..., ge=1, description="Number of players")
    alphabet_size: int = Field(2, ge=2, description="Number of actions")
    turn: TurnFunction = Field(default_factory=AlternatingTurn, description="Who moves where")
    payoff: PayoffSpec

    @model_validator(mode="before")
    @classmethod
    def _expand_shorthands(cls, data: Any) -> Any:
        if not isinstance(data, dict):
            return data
        data = dict(data)
        turn = data.get("turn")
        if turn == "alternating":
            data["turn"] = {"kind": "alternating"}
        elif turn == "single":
            data["turn"] = {"kind": "finite_memory", "table": [{"parity": p, "player": 1} for p in ("even", "odd")]}
        elif isinstance(turn, str) and turn.startswith("gallery:"):
            gallery_id = turn.split(":", 1)[1]
            if gallery_id not in _GALLERY_TURNS:
                raise GameSpecError(f"no gallery turn function named {gallery_id!r}", "turn")
            data["turn"] = _GALLERY_TURNS[gallery_id]
        payoff = data.get("payoff")
        if isinstance(payoff, str) and payoff.startswith("gallery:"):
            data["payoff"] = {"kind": "builtin", "gallery_id": payoff.split(":", 1)[1]}
        return data

    @model_validator(mode="after")
    def _check_dimensions(self) -> "GameSpec":
        if isinstance(self.turn, AlternatingTurn) and self.players != 2:
            raise GameSpecError("alternating turns need exactly two players", "turn")
        if isinstance(self.payoff, WinLosePayoff):
            if self.players != 2 or not isinstance(self.turn, AlternatingTurn):
                raise GameSpecError("win-lose games need two players who move alternately", "payoff")
        if isinstance(self.payoff, DiscountedPayoff):
            g = self.payoff.g
            if len(g) != self.players or any(len(row) != self.players for row in g):
                raise GameSpecError(f"g must be indexed by {self.players} x {self.players} players", "payoff.g")
            if any(len(col) != self.alphabet_size for row in g for col in row):
                raise GameSpecError(f"g must list {self.alphabet_size} actions per player pair", "payoff.g")
        if isinstance(self.turn, FiniteMemoryTurn):
            self.turn.check_total(self.alphabet_size, self.players)
        return self


def _check_tail(tail: TailPattern, game: GameSpec, where: str) -> None:
    for cls in (tail.even, tail.odd):
        if cls.is_constant and cls.action >= game.alphabet_size:
            raise GameSpecError(f"action {cls.action} is not in the alphabet", where)
        if not cls.is_constant and game.alphabet_size != 2:
            raise GameSpecError("'both' tails need a two-letter alphabet", where)


class GameDocument(GameSpec):
    """A game file: the game plus an optional profile, run and segment anchors."""

    name: Optional[str] = Field(None, description="Free-form label")
    profile: Optional[StrategyProfile] = Field(None, description="One strategy machine per player")
    run: Optional[RepresentedRun] = Field(None, description="Run to check against the profile")
    anchors: Tuple[SegmentAnchor, ...] = Field((), description="Segments searched by consistency checks")

    @model_validator(mode="after")
    def _check_document(self) -> "GameDocument":
        if self.profile is not None and self.profile.players != self.players:
            raise GameSpecError(f"profile has {self.profile.players} machines for {self.players} players", "profile")
        if self.run is not None:
            _check_tail(self.run.tail, self, "run.tail")
            if any(a >= self.alphabet_size for a in self.run.window):
                raise GameSpecError("run uses an action outside the alphabet", "run.window")
        for i, anchor in enumerate(self.anchors):
            _check_tail(anchor.tail, self, f"anchors[{i}]")
        return self

    def game(self) -> GameSpec:
        return GameSpec(players=self.players, alphabet_size=self.alphabet_size, turn=self.turn, payoff=self.payoff)


def parse_game(text: str) -> GameDocument:
    return GameDocument.model_validate_json(text)


def load_game(path: Union[str, Path]) -> GameDocument:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise GameSpecError(f"cannot read {path}: {exc.strerror}", str(path)) from exc
    return parse_game(text)


def dump_game(document: GameDocument) -> str:
    return document.model_dump_json(indent=2, exclude_none=True)


class AuxMove(BaseModel):
    stage: int = Field(..., description="Stage of the move")
    state: str = Field(..., description="Automaton state before the move")
    action: int = Field(..., description="Winner's action")


class AuxGameResult(BaseModel):
    winner: int = Field(..., description="Player who wins the auxiliary game")
    start_stage: int = Field(..., description="First stage of the auxiliary game")
    entry_state: str = Field(..., description="Automaton state the game starts from")
    moves: List[AuxMove] = Field(default_factory=list, description="Winner's move map over reachable states")


class AuxLimit(BaseModel):
    kind: Literal["flip_at", "player2_forever", "player2_down_to"]
    stage: Optional[int] = Field(None, description="Flip stage, or the cutoff for player2_down_to")


class WIndexValue(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["stage", "minus_infinity", "none_winning_for_p2", "undetermined_below"]
    stage: Optional[int] = None

    @classmethod
    def at(cls, stage: int) -> "WIndexValue":
        return cls(kind="stage", stage=stage)

    def order_key(self) -> Tuple[int, int]:
        """Total order -inf < Stage(k) < none-winning; undetermined values are not ordered."""
        if self.kind == "minus_infinity":
            return (0, 0)
        if self.kind == "stage":
            return (1, self.stage)  # type: ignore[return-value]
        if self.kind == "none_winning_for_p2":
            return (2, 0)
        raise ValueError("an undetermined w value has no position in the order")


class OpenClassification(BaseModel):
    kind: Literal["part1", "part2", "inconclusive"]
    stage: Optional[int] = Field(None, description="n* for part1, the cutoff for inconclusive")


class SegmentValue(BaseModel):
    value: int = Field(..., description="1 if player 1 wins the segment game, else 0")
    winner: int = Field(..., description="Player with a winning strategy in the segment")
    strategy: StrategyMachine = Field(..., description="Winning strategy for the winner")
    anchor: SegmentAnchor


class EquilibriumCertificate(BaseModel):
    mode: Literal["exact_winlose", "epsilon"] = "exact_winlose"
    classification: str = Field(..., description="Which construction produced the certificate")
    profile: StrategyProfile
    run: RepresentedRun
    verified_depth: int = Field(..., description="Depth the certificate was checked to")
    winner: Optional[int] = None
    payoff: Optional[Tuple[Rational, ...]] = None
    levels: Optional[int] = Field(None, description="Chain length for rank-2 certificates")
    report_version: str = "1"


class EpsilonCertificate(BaseModel):
    epsilon: Rational
    truncation_depth: int
    memory: int = Field(..., description="Length of the entry contexts solved at the window edge")
    profile: StrategyProfile
    run: RepresentedRun
    payoff: Tuple[Rational, ...]
    tail_bound: Rational = Field(..., description="2 * G_max * delta^(K+1)")
    boundary_gain: Rational = Field(..., description="Best gain from shifting the entry context")
    guarantee: Rational = Field(..., description="tail_bound + boundary_gain")
    meets_epsilon: bool
    scope: str = "unilateral deviations inside the run's segment"
    report_version: str = "1"


class TurnContinuity(BaseModel):
    kind: Literal["continuous", "possibly_discontinuous"]
    memory: Optional[int] = None


class ConsistencyVerdict(BaseModel):
    kind: Literal["verified", "violation_at", "tail_certified"]
    depth: Optional[int] = None
    stage: Optional[int] = None


class ConsistencyReport(BaseModel):
    kind: Literal["empty", "unique", "multiple", "not_permitted", "inconclusive"]
    runs: List[RepresentedRun] = Field(default_factory=list)
    player: Optional[int] = Field(None, description="First player who does not permit the segment")
    exhaustive: bool = False
    covers_given_anchors: bool = True
    reason: Optional[str] = None


class EquilibriumVerdict(BaseModel):
    kind: Literal["verified", "exact_verified", "counter_deviation"]
    depth: Optional[int] = None
    stage: Optional[int] = None
    player: Optional[int] = None
    action: Optional[int] = None
    gain: Optional[Rational] = None


class StrongVerdict(BaseModel):
    kind: Literal["verified", "counter_example"]
    depth: int
    family_size: int = Field(..., description="Number of deviation machines searched")
    player: Optional[int] = None
    deviation: Optional[StrategyMachine] = None
    run: Optional[RepresentedRun] = None
    gain: Optional[Rational] = None


class ClaimResult(BaseModel):
    claim: str
    status: Literal["passed", "failed"]
    expected_failure: bool = Field(False, description="The claim asserts that no equilibrium exists")
    witness: Dict[str, Any] = Field(default_factory=dict)


class VerificationReport(BaseModel):
    gallery_id: str
    depth: int
    claims: List[ClaimResult]
    report_version: str = "1"

    @property
    def passed(self) -> bool:
        return all(c.status == "passed" for c in self.claims)


class WinLoseReport(BaseModel):
    """Output of ``solve-winlose``: the certificate and the checker's verdict on it."""

    classification: Optional[OpenClassification] = None
    certificate: EquilibriumCertificate
    check: EquilibriumVerdict
