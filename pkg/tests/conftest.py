"""Pytest configuration and fixtures."""
import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from pastgames.config import Settings  # noqa: E402
from pastgames.model import RepresentedRun, TailPattern  # noqa: E402
from pastgames.services.gallery import player2_plays_one  # noqa: E402
from pastgames.services.winset import CylinderGenerator, OpenSet, StageAnchor  # noqa: E402

GAMES = ROOT / "games"


@pytest.fixture
def settings() -> Settings:
    return Settings(check_depth=6, iteration_cap=128, w_search_cap=64, workers=2)


@pytest.fixture
def games_dir() -> Path:
    return GAMES


@pytest.fixture
def illustration_set() -> OpenSet:
    """Runs in which action 0 is played at stage -2 or at stage -1."""
    return OpenSet(
        generators=(
            CylinderGenerator(anchor=StageAnchor(stage=-2), pattern=(0,)),
            CylinderGenerator(anchor=StageAnchor(stage=-1), pattern=(0,)),
        )
    )


@pytest.fixture
def valueless_set() -> OpenSet:
    return player2_plays_one()


@pytest.fixture
def zeros() -> TailPattern:
    return TailPattern.uniform(0)


@pytest.fixture
def ones() -> TailPattern:
    return TailPattern.uniform(1)


@pytest.fixture
def all_zero_run() -> RepresentedRun:
    return RepresentedRun.constant(0)


@pytest.fixture
def all_one_run() -> RepresentedRun:
    return RepresentedRun.constant(1)
