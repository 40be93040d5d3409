from fractions import Fraction

import pytest

from pastgames.errors import PreconditionError, TailNotMaterializableError
from pastgames.model import AlternatingTurn, FiniteMemoryTurn, RepresentedRun, TailClass, TailPattern, TailPredicateTurn, TurnEntry
from pastgames.schemas import DiscountedPayoff, GameSpec
from pastgames.services.discounted import (
    DiscountedSolver,
    check_turn_continuity,
    evaluate_discounted,
    truncation_depth,
)
from pastgames.services.strategies import StrategyEngine

HALF = Fraction(1, 2)


def _one_player(delta=HALF) -> GameSpec:
    return GameSpec(
        players=1,
        turn=FiniteMemoryTurn.constant(1),
        payoff=DiscountedPayoff(delta=delta, g=(((0, 1),),)),
    )


def _two_player(g, turn=None) -> GameSpec:
    return GameSpec(players=2, turn=turn or AlternatingTurn(), payoff=DiscountedPayoff(delta=HALF, g=g))


def test_truncation_depth():
    """Smallest K with 2 * G_max * delta^(K+1) <= epsilon."""
    pay = DiscountedPayoff(delta=HALF, g=(((0, 1),),))
    assert truncation_depth(pay, Fraction(1, 4)) == 2
    assert truncation_depth(pay, Fraction(1, 8)) == 3
    fast = DiscountedPayoff(delta=Fraction(1, 10), g=(((0, 1),),))
    assert truncation_depth(fast, Fraction(1, 4)) == 0


def test_truncation_depth_needs_positive_epsilon():
    """Epsilon has to be positive."""
    pay = DiscountedPayoff(delta=HALF, g=(((0, 1),),))
    with pytest.raises(PreconditionError):
        truncation_depth(pay, Fraction(0))


def test_delta_outside_unit_interval_is_rejected():
    """The discount factor lies strictly between 0 and 1."""
    with pytest.raises(ValueError):
        DiscountedPayoff(delta=1, g=(((0, 1),),))


def test_evaluate_constant_tail_with_window():
    """Ones in the past and 0 at stage 0 pay 1/2."""
    game = _one_player()
    run = RepresentedRun.build(TailPattern.uniform(1), (0,))
    assert evaluate_discounted(run, game.payoff, game.turn, 1) == (HALF,)
    assert evaluate_discounted(RepresentedRun.constant(1), game.payoff, game.turn, 1) == (Fraction(1),)
    assert evaluate_discounted(RepresentedRun.constant(0), game.payoff, game.turn, 1) == (Fraction(0),)


def test_evaluate_mixed_parity_tail():
    """Ones at odd stages only are worth 1/3 before stage -1."""
    game = _one_player()
    run = RepresentedRun.build(TailPattern.of(0, 1), (0,))
    # stages -1, -3, ... weigh 1/4, 1/16, ...
    assert evaluate_discounted(run, game.payoff, game.turn, 1) == (Fraction(1, 3),)


def test_evaluate_needs_constant_tails():
    """Abstract tails have no discounted value."""
    game = _one_player()
    run = RepresentedRun.build(TailPattern(even=TailClass.both(), odd=TailClass.constant(0)), (0,))
    with pytest.raises(TailNotMaterializableError):
        evaluate_discounted(run, game.payoff, game.turn, 1)


def test_one_player_certificate():
    """The player always plays 1; the window covers stages -3 .. 0."""
    certificate = DiscountedSolver(_one_player()).synthesize(Fraction(1, 8))
    assert certificate.truncation_depth == 3
    assert certificate.run.window == (1, 1, 1, 1)
    assert certificate.payoff == (Fraction(15, 16),)
    assert Fraction(1) - certificate.payoff[0] <= Fraction(1, 8)
    assert certificate.guarantee == Fraction(1, 8)
    assert certificate.boundary_gain == 0
    assert certificate.meets_epsilon


def test_one_player_certificate_has_no_single_deviation_gain():
    """Changing one action inside the window never pays."""
    solver = DiscountedSolver(_one_player())
    certificate = solver.synthesize(Fraction(1, 8))
    assert solver.max_single_deviation_gain(certificate) <= 0


def test_certificate_within_tolerance():
    """The deviation search finds nothing above epsilon."""
    game = _one_player()
    certificate = DiscountedSolver(game).synthesize(Fraction(1, 8))
    engine = StrategyEngine(game)
    verdict = engine.check_equilibrium(certificate.profile, certificate.run, depth=3, tolerance=certificate.epsilon)
    assert verdict.kind != "counter_deviation"


def test_two_player_certificate():
    """Both players play the action that pays themselves; alternating turns have no boundary gain."""
    g = (((0, 1), (1, 0)), ((1, 0), (0, 1)))
    solver = DiscountedSolver(_two_player(g))
    certificate = solver.synthesize(Fraction(1, 4))
    assert certificate.truncation_depth == 2
    assert certificate.boundary_gain == 0
    assert certificate.meets_epsilon
    assert solver.max_single_deviation_gain(certificate) <= 0


def test_memory_turn_reports_boundary_gain():
    """A memory-one turn function may make the entry context worth something."""
    turn = FiniteMemoryTurn(
        memory=1,
        table=(
            TurnEntry(window=(0,), parity="even", player=1),
            TurnEntry(window=(0,), parity="odd", player=2),
            TurnEntry(window=(1,), parity="even", player=2),
            TurnEntry(window=(1,), parity="odd", player=1),
        ),
    )
    g = (((0, 1), (0, 0)), ((0, 0), (0, 1)))
    certificate = DiscountedSolver(_two_player(g, turn)).synthesize(Fraction(1, 4))
    assert certificate.memory == 1
    assert certificate.boundary_gain >= 0
    assert certificate.guarantee == certificate.tail_bound + certificate.boundary_gain
    assert certificate.meets_epsilon == (certificate.guarantee <= Fraction(1, 4))


def test_backward_induction_breaks_ties_low():
    """Indifferent players choose the lowest action."""
    g = (((0, 0),),)
    game = GameSpec(players=1, turn=FiniteMemoryTurn.constant(1), payoff=DiscountedPayoff(delta=HALF, g=g))
    policy, values = DiscountedSolver(game).backward_induction(2)
    assert set(policy.values()) == {0}
    assert values[(-2, ())] == (Fraction(0),)


def test_turn_continuity():
    """Finite-memory turns are continuous, the tail-predicate turn is not."""
    assert check_turn_continuity(AlternatingTurn()).model_dump() == {"kind": "continuous", "memory": 0}
    assert check_turn_continuity(TailPredicateTurn()).kind == "possibly_discontinuous"


def test_tail_predicate_turn_is_refused():
    """Without continuity there is no stage at which deviating is optimal."""
    g = (((0, 1), (0, 1)), ((0, 0), (1, 0)))
    game = GameSpec(players=2, turn=TailPredicateTurn(), payoff=DiscountedPayoff(delta=HALF, g=g))
    with pytest.raises(PreconditionError):
        DiscountedSolver(game).synthesize(Fraction(1, 8))


def test_non_discounted_game_is_refused(valueless_set):
    """Only discounted payoffs have certificates."""
    from pastgames.schemas import WinLosePayoff

    with pytest.raises(PreconditionError):
        DiscountedSolver(GameSpec(players=2, payoff=WinLosePayoff(winning_set=valueless_set)))
