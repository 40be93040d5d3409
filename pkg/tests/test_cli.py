import json

import pytest

from pastgames.main import EXIT_COUNTEREXAMPLE, EXIT_INCONCLUSIVE, EXIT_INPUT, EXIT_OK, cli_main


def _run(capsys, *argv):
    code = cli_main([str(a) for a in argv])
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_solve_winlose_valueless(capsys, games_dir):
    """The valueless game gets a checked player-2 certificate."""
    code, out, _ = _run(capsys, "solve-winlose", games_dir / "valueless.game")
    assert code == EXIT_OK
    report = json.loads(out)
    assert report["classification"]["kind"] == "part2"
    assert report["certificate"]["winner"] == 2
    assert report["check"]["kind"] == "exact_verified"


def test_solve_winlose_rank2(capsys, games_dir):
    """The chain construction on a single open set."""
    code, out, _ = _run(capsys, "solve-winlose", games_dir / "illustration.game", "--rank2", "--depth", "4")
    assert code == EXIT_OK
    assert json.loads(out)["certificate"]["classification"] == "rank2-case2"


def test_solve_discounted_one_player(capsys, games_dir):
    """Epsilon 1/8 truncates at stage -3 and pays 15/16."""
    code, out, _ = _run(capsys, "solve-discounted", games_dir / "oneplayer.game", "--epsilon", "1/8")
    assert code == EXIT_OK
    certificate = json.loads(out)
    assert certificate["truncation_depth"] == 3
    assert certificate["payoff"] == ["15/16"]
    assert certificate["meets_epsilon"] is True


def test_solve_discounted_two_players(capsys, games_dir):
    """Two alternating players get a certificate as well."""
    code, out, _ = _run(capsys, "solve-discounted", games_dir / "alternating-discounted.game", "--epsilon", "1/4")
    assert code == EXIT_OK
    assert json.loads(out)["boundary_gain"] == "0"


def test_w_index(capsys, games_dir):
    """A 0 at stage -2 puts the w index at stage -1."""
    code, out, _ = _run(
        capsys, "w-index", games_dir / "illustration.game", "--stage", "-1", "--window", "0", "--tail", "1"
    )
    assert code == EXIT_OK
    assert json.loads(out) == {"kind": "stage", "stage": -1}


def test_w_index_rank2(capsys, games_dir):
    """The chain level index is printed as a number."""
    code, out, _ = _run(
        capsys, "w-index", games_dir / "illustration.game", "--rank2", "--stage", "-1", "--window", "0", "--tail", "1"
    )
    assert code == EXIT_OK
    assert out.strip() == "1"


def test_segment_values(capsys, games_dir):
    """Segments of the valueless game are worth 0 and 1."""
    _, zero, _ = _run(capsys, "segment-value", games_dir / "valueless.game", "--tail", "0")
    _, one, _ = _run(capsys, "segment-value", games_dir / "valueless.game", "--tail", "1")
    assert json.loads(zero)["value"] == 0
    assert json.loads(one)["value"] == 1


def test_segment_value_inconclusive(capsys, tmp_path):
    """A non-determined segment exits with the inconclusive code."""
    _, out, _ = _run(capsys, "gallery", "nondetermined-segment")
    path = tmp_path / "nondetermined.game"
    path.write_text(out, encoding="utf-8")
    code, _, err = _run(capsys, "segment-value", path, "--tail", "0")
    assert code == EXIT_INCONCLUSIVE
    assert "not determined" in err


def test_check_eq_and_strong(capsys, games_dir):
    """The file's profile and run form a strong equilibrium."""
    code, out, _ = _run(capsys, "check-eq", games_dir / "valueless.game", "--depth", "4")
    assert code == EXIT_OK
    assert json.loads(out)["kind"] == "verified"
    code, out, _ = _run(capsys, "check-strong", games_dir / "valueless.game", "--depth", "2")
    assert code == EXIT_OK
    assert json.loads(out)["kind"] == "verified"


def test_runs(capsys, games_dir):
    """The repeat-previous machine has two consistent runs."""
    code, out, _ = _run(capsys, "runs", games_dir / "tworuns.game")
    assert code == EXIT_OK
    report = json.loads(out)
    assert report["kind"] == "multiple"
    assert len(report["runs"]) == 2


def test_gallery_verify(capsys):
    """Verifying a gallery entry exits 0 when every claim holds."""
    code, out, _ = _run(capsys, "gallery", "two-runs", "--verify", "--depth", "10")
    assert code == EXIT_OK
    assert json.loads(out)["gallery_id"] == "two-runs"


def test_gallery_print(capsys):
    """Without --verify the entry's game document is printed."""
    code, out, _ = _run(capsys, "gallery", "valueless-zero-sum")
    assert code == EXIT_OK
    assert json.loads(out)["turn"]["kind"] == "alternating"


def test_counter_deviation_exit_code(capsys, tmp_path):
    """A refuted equilibrium exits with the counterexample code."""
    _, out, _ = _run(capsys, "gallery", "no-eq-discounted-like")
    path = tmp_path / "noeq.game"
    path.write_text(out, encoding="utf-8")
    code, out, _ = _run(capsys, "check-eq", path, "--depth", "3")
    assert code == EXIT_COUNTEREXAMPLE
    assert json.loads(out)["kind"] == "counter_deviation"


@pytest.mark.parametrize(
    "argv",
    [
        ("solve-winlose", "missing.game"),
        ("gallery", "no-such-entry"),
        ("w-index", "GAMES/oneplayer.game", "--stage", "0"),
        ("solve-discounted", "GAMES/oneplayer.game", "--epsilon", "zero"),
        ("solve-discounted", "GAMES/oneplayer.game", "--epsilon", "0"),
        ("segment-value", "GAMES/valueless.game", "--tail", "x"),
        ("check-eq", "GAMES/oneplayer.game"),
    ],
)
def test_input_errors(capsys, games_dir, argv):
    """Bad input exits with the input-error code and a message."""
    argv = [str(games_dir) + a[5:] if a.startswith("GAMES") else a for a in argv]
    code, _, err = _run(capsys, *argv)
    assert code == EXIT_INPUT
    assert "error:" in err


def test_malformed_game_reports_location(capsys, tmp_path):
    """Validation errors name the offending field."""
    path = tmp_path / "bad.game"
    path.write_text(
        json.dumps(
            {
                "players": 2,
                "payoff": {"kind": "winlose", "winning_set": {"kind": "open", "generators": [{"anchor": "odd", "pattern": []}]}},
            }
        ),
        encoding="utf-8",
    )
    code, _, err = _run(capsys, "solve-winlose", path)
    assert code == EXIT_INPUT
    assert "pattern" in err


@pytest.mark.parametrize(
    "argv",
    [
        ("solve-discounted", "GAMES/oneplayer.game"),
        ("check-eq", "GAMES/valueless.game", "--depth", "abc"),
        ("w-index", "GAMES/illustration.game", "--stage", "minus-one"),
        ("w-index", "GAMES/illustration.game"),
        ("no-such-command",),
        (),
    ],
)
def test_usage_errors(capsys, games_dir, argv):
    """Argument parsing failures exit with the input-error code, not the inconclusive one."""
    argv = [str(games_dir) + a[5:] if a.startswith("GAMES") else a for a in argv]
    code, _, err = _run(capsys, *argv)
    assert code == EXIT_INPUT
    assert "error:" in err


def test_help_exits_cleanly(capsys):
    """--help prints usage and succeeds."""
    code, out, _ = _run(capsys, "--help")
    assert code == EXIT_OK
    assert "usage:" in out
