from fractions import Fraction
from itertools import product

import pytest

from pastgames.errors import UndecidableTailError, UnknownGalleryEntryError
from pastgames.model import RepresentedPosition, RepresentedRun, TailClass, TailPattern
from pastgames.schemas import dump_game, parse_game
from pastgames.services.gallery import (
    Delta3Evaluator,
    LimsupFrequencyEvaluator,
    MValue,
    gallery_build,
    gallery_ids,
    gallery_verify,
    m_less,
)
from pastgames.services.winlose import winning_player_partial
from pastgames.services.winset import run_in_winning_set

CLASSES = [TailClass.constant(0), TailClass.constant(1), TailClass.both()]
DEPTHS = {
    "no-run": 12,
    "two-runs": 10,
    "no-eq-discounted-like": 6,
    "eq-no-strong": 2,
    "valueless-zero-sum": 4,
    "delta3-no-eq": 4,
    "discontinuous-turn": 5,
    "nondetermined-segment": 8,
}


def _all_runs(max_length: int):
    for even, odd in product(CLASSES, repeat=2):
        tail = TailPattern(even=even, odd=odd)
        for length in range(1, max_length + 1):
            for window in product((0, 1), repeat=length):
                yield RepresentedRun.build(tail, window)


def _materialized_m(run: RepresentedRun, player: int, action: int) -> MValue:
    last = 0 if player == 1 else -1
    full = run.materialized(-24)
    k = last
    while k >= -24:
        if full.action_at(k) != action:
            return MValue(kind="plus_inf") if k == last else MValue(kind="finite", stage=k + 2)
        k -= 2
    return MValue(kind="minus_inf")


def test_gallery_ids_are_stable():
    """Every entry is listed in a fixed order."""
    assert gallery_ids() == list(DEPTHS)


def test_unknown_gallery_entry():
    """Unknown ids are rejected by both operations."""
    with pytest.raises(UnknownGalleryEntryError):
        gallery_build("no-such-entry")
    with pytest.raises(UnknownGalleryEntryError):
        gallery_verify("no-such-entry", 2)


def test_two_runs_builder():
    """The two-runs entry is a one-player repeat-previous machine."""
    document = gallery_build("two-runs")
    assert document.players == 1
    (machine,) = document.profile.machines
    assert machine.kind == "finite_memory"
    assert machine.memory == 1


def test_valueless_builder(all_zero_run, all_one_run):
    """Player 2 playing 1 at least once wins for player 1."""
    document = gallery_build("valueless-zero-sum")
    assert document.turn.kind == "alternating"
    spec = document.payoff.winning_set
    assert run_in_winning_set(all_one_run, spec)
    assert not run_in_winning_set(all_zero_run, spec)


def test_builders_round_trip():
    """Serialized gallery documents parse back to themselves."""
    for gallery_id in gallery_ids():
        document = gallery_build(gallery_id)
        assert parse_game(dump_game(document)) == document


@pytest.mark.parametrize("gallery_id", list(DEPTHS))
def test_gallery_claims_pass(gallery_id, settings):
    """Each entry's claims hold at a small depth."""
    report = gallery_verify(gallery_id, DEPTHS[gallery_id], settings=settings)
    assert report.gallery_id == gallery_id
    assert report.claims
    failed = [c.claim for c in report.claims if c.status != "passed"]
    assert not failed
    assert report.passed


def test_negative_claims_are_flagged(settings):
    """Claims that no equilibrium exists are marked as expected failures."""
    report = gallery_verify("no-eq-discounted-like", 4, settings=settings)
    assert all(c.expected_failure for c in report.claims)
    report = gallery_verify("two-runs", 4, settings=settings)
    assert not any(c.expected_failure for c in report.claims)


def test_gallery_verify_is_deterministic(settings):
    """Repeated verification produces identical reports."""
    first = gallery_verify("two-runs", 6, settings=settings).model_dump_json()
    second = gallery_verify("two-runs", 6, settings=settings).model_dump_json()
    assert first == second


def test_two_runs_witness(settings):
    """The verified runs are the constant ones."""
    report = gallery_verify("two-runs", 10, settings=settings)
    assert report.claims[0].witness["runs"] == ["C0/C0 [0]", "C1/C1 [1]"]


def test_delta3_cases_are_exclusive():
    """At most one of the four cases holds on any run."""
    evaluator = Delta3Evaluator()
    for run in _all_runs(10):
        assert len(evaluator.satisfied_cases(run)) <= 1


def test_delta3_m_values_match_materialized_runs():
    """Represented m values agree with a scan of the materialized run."""
    evaluator = Delta3Evaluator()
    constant = [TailPattern.of(e, o) for e, o in product((0, 1), repeat=2)]
    for tail in constant:
        for length in range(1, 11):
            for window in product((0, 1), repeat=length):
                run = RepresentedRun.build(tail, window)
                for player, action in product((1, 2), (0, 1)):
                    assert evaluator.m_value(run, player, action) == _materialized_m(run, player, action)


def test_delta3_both_players_win_somewhere():
    """Along the all-ones run each player owns a winning position."""
    evaluator = Delta3Evaluator()
    run = RepresentedRun.constant(1)
    winners = {winning_player_partial(run.prefix(n), evaluator.winner) for n in range(0, -6, -1)}
    assert winners == {1, 2}


def test_m_less_ordering():
    """Comparisons of m values, including undecidable ones."""
    finite = MValue(kind="finite", stage=-4)
    assert m_less(MValue(kind="minus_inf"), finite)
    assert m_less(finite, MValue(kind="plus_inf"))
    assert not m_less(MValue(kind="plus_inf"), finite)
    assert m_less(MValue(kind="at_most", stage=-6), finite)
    with pytest.raises(UndecidableTailError):
        m_less(MValue(kind="unknown", stage=0), MValue(kind="plus_inf"))


def test_limsup_frequency_payoff(zeros, ones):
    """Frequency 1/2 pays 1/2; frequency 1 pays nothing."""
    evaluator = LimsupFrequencyEvaluator()
    assert evaluator.payoff(RepresentedRun.build(TailPattern.of(0, 1), (0,))) == (Fraction(1, 2),)
    assert evaluator.payoff(RepresentedRun.build(ones, (0,))) == (Fraction(0),)
    assert evaluator.payoff(RepresentedRun.build(zeros, (1, 1, 1))) == (Fraction(0),)


def test_discontinuous_turn_moves_player_two(ones):
    """Player 2 moves at stage 0 after the all-ones past."""
    document = gallery_build("discontinuous-turn")
    assert document.turn.active_player(RepresentedPosition(stage=0, tail=ones)) == 2
