"""Payoff evaluators: one vector of exact rationals per represented run."""
from __future__ import annotations

import logging
from fractions import Fraction
from typing import TYPE_CHECKING, Protocol, Tuple

from pastgames.model import RepresentedRun, TurnFunction
from pastgames.services.winset import WinningSetSpec, player1_wins

if TYPE_CHECKING:
    from pastgames.schemas import DiscountedPayoff, GameSpec

logger = logging.getLogger(__name__)

Payoff = Tuple[Fraction, ...]

WIN: Payoff = (Fraction(1), Fraction(0))
LOSS: Payoff = (Fraction(0), Fraction(1))


class PayoffEvaluator(Protocol):
    players: int
    is_tail: bool

    def payoff(self, run: RepresentedRun) -> Payoff: ...


class WinLoseEvaluator:
    """Player 1 gets 1 on runs in the winning set, player 2 gets 1 otherwise."""

    players = 2
    is_tail = False

    def __init__(self, winning_set: WinningSetSpec):
        self.winning_set = winning_set

    def winner(self, run: RepresentedRun) -> int:
        return 1 if player1_wins(run, self.winning_set) else 2

    def payoff(self, run: RepresentedRun) -> Payoff:
        return WIN if self.winner(run) == 1 else LOSS


class DiscountedEvaluator:
    is_tail = False

    def __init__(self, payoff: "DiscountedPayoff", turn: TurnFunction, players: int):
        self.spec = payoff
        self.turn = turn
        self.players = players

    def payoff(self, run: RepresentedRun) -> Payoff:
        from pastgames.services.discounted import evaluate_discounted

        return evaluate_discounted(run, self.spec, self.turn, self.players)


def evaluator_for(game: "GameSpec") -> PayoffEvaluator:
    kind = game.payoff.kind
    if kind == "winlose":
        return WinLoseEvaluator(game.payoff.winning_set)
    if kind == "discounted":
        return DiscountedEvaluator(game.payoff, game.turn, game.players)
    from pastgames.services.gallery import builtin_evaluator

    logger.debug("using builtin evaluator %s", game.payoff.gallery_id)
    return builtin_evaluator(game.payoff.gallery_id, game)
