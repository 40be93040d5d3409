from fractions import Fraction

import pytest

from pastgames.errors import PreconditionError, UnsupportedTailPatternError
from pastgames.model import RepresentedPosition, RepresentedRun, SegmentAnchor, TailClass, TailPattern
from pastgames.services.gallery import gallery_build
from pastgames.services.machines import (
    FiniteMemoryMachine,
    PinningMachine,
    StrategyProfile,
    TailAwareMachine,
)
from pastgames.services.strategies import StrategyEngine
from pastgames.services.winlose import WinLoseSolver


@pytest.fixture
def two_runs(settings):
    document = gallery_build("two-runs")
    return StrategyEngine(document.game(), settings=settings), document.profile


@pytest.fixture
def no_run(settings):
    document = gallery_build("no-run")
    return StrategyEngine(document.game(), settings=settings), document.profile


@pytest.fixture
def valueless(settings):
    document = gallery_build("valueless-zero-sum")
    return StrategyEngine(document.game(), settings=settings), document


def _constant_profile(action: int, players: int = 2) -> StrategyProfile:
    return StrategyProfile(machines=tuple(FiniteMemoryMachine.constant(action) for _ in range(players)))


def test_no_run_machine_violates_all_ones(no_run, all_one_run):
    """After an all-ones past the machine plays 0 at stage 0."""
    engine, profile = no_run
    verdict = engine.is_consistent(all_one_run, profile, 12)
    assert verdict.kind == "violation_at"
    assert verdict.stage == 0


def test_no_run_machine_violates_single_zero(no_run, ones):
    """A lone 0 at stage -3 is preceded by a stage where the machine wanted 0."""
    engine, profile = no_run
    run = RepresentedRun.build(ones, (0, 1, 1, 1))
    verdict = engine.is_consistent(run, profile, 12)
    assert verdict.kind == "violation_at"
    assert verdict.stage < -3


def test_repeat_previous_certifies_all_zeros(two_runs, all_zero_run):
    """The all-zeros run follows the repeat-previous machine over the whole past."""
    engine, profile = two_runs
    assert engine.is_consistent(all_zero_run, profile).kind == "tail_certified"


def test_segment_runs(two_runs, no_run, zeros, ones):
    """Unique run per permitted segment, none for a violated one."""
    engine, profile = two_runs
    report = engine.consistent_run_in_segment(profile, SegmentAnchor.of_tail(zeros))
    assert report.kind == "unique"
    assert report.exhaustive
    assert report.runs[0].same_sequence(RepresentedRun.constant(0))
    windowed = SegmentAnchor(position=RepresentedPosition(stage=-1, tail=zeros, window=(1,)))
    assert engine.consistent_run_in_segment(profile, windowed).runs[0].same_sequence(RepresentedRun.constant(0))
    mixed = engine.consistent_run_in_segment(profile, SegmentAnchor.of_tail(TailPattern.of(0, 1)))
    assert mixed.kind == "not_permitted"
    engine, profile = no_run
    assert engine.consistent_run_in_segment(profile, SegmentAnchor.of_tail(ones)).kind == "not_permitted"


def test_roll_forward_continues_the_anchor_window(two_runs, zeros):
    """The subgame outcome after a 1 keeps repeating the 1."""
    engine, profile = two_runs
    run = engine.roll_forward(profile, RepresentedPosition(stage=-1, tail=zeros, window=(1,)))
    assert run.actions(-2, 0) == (1, 1, 1)


def test_enumerate_consistent_runs(two_runs, no_run, zeros):
    """The repeat-previous machine has the constant runs; the no-run machine none."""
    engine, profile = two_runs
    report = engine.enumerate_consistent_runs(profile)
    assert report.kind == "multiple"
    assert not report.exhaustive
    assert report.covers_given_anchors
    assert sorted(r.window for r in report.runs) == [(0,), (1,)]
    only_zero = engine.enumerate_consistent_runs(profile, [SegmentAnchor.of_tail(zeros)])
    assert [r.window for r in only_zero.runs] == [(0,)]
    engine, profile = no_run
    assert engine.enumerate_consistent_runs(profile).kind == "empty"


def test_abstract_tail_is_inconclusive(two_runs):
    """A machine that copies an abstract tail cannot be decided."""
    engine, profile = two_runs
    tail = TailPattern(even=TailClass.both(), odd=TailClass.both())
    report = engine.enumerate_consistent_runs(profile, [SegmentAnchor.of_tail(tail)])
    assert not report.covers_given_anchors


def test_check_equilibrium_valueless(valueless, all_zero_run, all_one_run):
    """Both constant profiles of the valueless game are equilibria."""
    engine, document = valueless
    verdict = engine.check_equilibrium(document.profile, all_zero_run)
    assert (verdict.kind, verdict.depth) == ("verified", 6)
    assert engine.check_equilibrium(_constant_profile(1), all_one_run).kind != "counter_deviation"


def test_solver_certificate_is_exact(valueless, valueless_set, settings):
    """A winning-response certificate is verified over the whole past."""
    engine, _ = valueless
    certificate = WinLoseSolver(valueless_set, settings=settings).synthesize_open()
    assert engine.check_equilibrium(certificate.profile, certificate.run).kind == "exact_verified"


def test_check_equilibrium_requires_consistency(valueless, all_one_run):
    """A run the profile does not play is rejected."""
    engine, document = valueless
    with pytest.raises(PreconditionError):
        engine.check_equilibrium(document.profile, all_one_run)


def test_no_eq_deviation_at_stage_zero(settings):
    """Playing 0 at stage 0 beats the all-ones run."""
    document = gallery_build("no-eq-discounted-like")
    engine = StrategyEngine(document.game(), settings=settings)
    verdict = engine.check_equilibrium(document.profile, document.run)
    assert (verdict.kind, verdict.stage, verdict.player, verdict.action) == ("counter_deviation", 0, 1, 0)
    assert verdict.gain == Fraction(1, 2)


def test_tail_payoff_is_exact(settings):
    """Any consistent run is an equilibrium of a tail payoff."""
    document = gallery_build("eq-no-strong")
    engine = StrategyEngine(document.game(), settings=settings)
    assert engine.check_equilibrium(document.profile, document.run).kind == "exact_verified"


def test_check_strong_valueless(valueless, settings):
    """s0 is strong, s1 is not."""
    engine, document = valueless
    assert engine.check_strong(document.profile, 4).kind == "verified"
    verdict = engine.check_strong(_constant_profile(1), 4)
    assert verdict.kind == "counter_example"
    assert verdict.player == 2
    assert verdict.gain == 1


def test_check_strong_needs_unique_run(two_runs):
    """A profile with two consistent runs has no strong-equilibrium check."""
    engine, profile = two_runs
    with pytest.raises(PreconditionError):
        engine.check_strong(profile, 2)


def test_check_strong_on_tail_payoff(settings):
    """A pinning deviation to a higher-frequency run beats the constant profile."""
    document = gallery_build("eq-no-strong")
    engine = StrategyEngine(document.game(), settings=settings)
    verdict = engine.check_strong(document.profile, 2)
    assert verdict.kind == "counter_example"
    assert verdict.gain > 0


def test_deviation_family_is_deterministic(valueless):
    """The family is rebuilt identically and contains each machine kind."""
    engine, document = valueless
    first = engine.deviation_family(document.profile, 1, 2)
    second = engine.deviation_family(document.profile, 1, 2)
    assert first == second
    assert {m.kind for m in first} == {"override", "finite_memory", "tail_aware", "pinning"}


def test_pinning_profile_has_unique_run(valueless, ones):
    """Pinning makes the target the only consistent run."""
    engine, _ = valueless
    target = RepresentedRun.build(ones, (0, 1))
    profile = engine.build_pinning_profile(target)
    report = engine.enumerate_consistent_runs(profile)
    assert len(report.runs) == 1
    assert report.runs[0].same_sequence(target)


def test_pinning_needs_constant_tails(valueless):
    """Pinning reads concrete tail actions."""
    engine, _ = valueless
    tail = TailPattern(even=TailClass.both(), odd=TailClass.constant(0))
    with pytest.raises(UnsupportedTailPatternError):
        engine.build_pinning_profile(RepresentedRun.build(tail, (0,)))


def test_strengthen_valueless(valueless, all_one_run, settings):
    """Strengthening (s1, r1) leaves one consistent run and a strong equilibrium."""
    engine, _ = valueless
    strong = engine.strengthen(_constant_profile(1), all_one_run)
    report = engine.enumerate_consistent_runs(strong)
    assert len(report.runs) == 1
    assert report.runs[0].same_sequence(all_one_run)
    assert engine.check_strong(strong, 4).kind == "verified"


def test_strengthen_solver_certificate(valueless_set, settings):
    """The synthesized certificate strengthens to a strong equilibrium."""
    document = gallery_build("valueless-zero-sum")
    engine = StrategyEngine(document.game(), settings=settings)
    certificate = WinLoseSolver(valueless_set, settings=settings).synthesize_open()
    strong = engine.strengthen(certificate.profile, certificate.run)
    report = engine.consistent_run_in_segment(strong, SegmentAnchor.of_tail(certificate.run.tail))
    assert report.kind == "unique"
    others = [TailPattern.of(1, 1), TailPattern.of(0, 1), TailPattern.of(1, 0)]
    for tail in others:
        assert engine.consistent_run_in_segment(strong, SegmentAnchor.of_tail(tail)).kind == "not_permitted"
    assert engine.check_strong(strong, 4).kind == "verified"


def test_strengthen_needs_two_movers(settings, all_zero_run):
    """A single player cannot be pinned by the others."""
    document = gallery_build("two-runs")
    engine = StrategyEngine(document.game(), settings=settings)
    with pytest.raises(PreconditionError):
        engine.strengthen(document.profile, all_zero_run)


def test_tail_aware_machine_scope(valueless, ones):
    """``own`` only looks at the mover's own past."""
    engine, _ = valueless
    machine = TailAwareMachine(trigger=1, scope="own", on_trigger=0, otherwise=1)
    p = RepresentedPosition(stage=0, tail=ones, window=(0,))
    assert machine.choose(p, engine.ctx) == 0
    q = RepresentedPosition(stage=0, tail=ones, window=(0, 1))
    assert machine.choose(q, engine.ctx) == 1
    assert PinningMachine(target=RepresentedRun.constant(1)).choose(p, engine.ctx) == 0
