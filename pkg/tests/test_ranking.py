import numpy as np
import pytest

from trajdiff.errors import (
    EmptyComparisons,
    NoWinsForAnyMethod,
    UnknownMethodName,
)
from trajdiff.ranking import (
    PI_FLOOR,
    BtResult,
    PreferenceMatrix,
    bt_fit,
    bt_scores,
    build_matrix,
    read_judgments,
)


def test_build_matrix_counts():
    m = build_matrix([("a", "b"), ("a", "b"), ("b", "a"), ("a", "c")])
    assert m.methods == ("a", "b", "c")
    assert m.wins[0, 1] == 2
    assert m.wins[1, 0] == 1
    assert m.wins[0, 2] == 1
    assert m.total_comparisons() == 4


def test_build_matrix_explicit_methods():
    m = build_matrix([("x", "y")], methods=["y", "x", "z"])
    assert m.methods == ("y", "x", "z")
    assert m.wins[1, 0] == 1
    with pytest.raises(UnknownMethodName):
        build_matrix([("x", "q")], methods=["x", "y"])


def test_build_matrix_rejects_self_comparison():
    with pytest.raises(ValueError):
        build_matrix([("a", "a")])


def test_build_matrix_empty():
    with pytest.raises(EmptyComparisons):
        build_matrix([])


def test_preference_matrix_validation():
    with pytest.raises(ValueError):
        PreferenceMatrix(("a", "b"), np.zeros((3, 3), dtype=int))
    with pytest.raises(ValueError):
        PreferenceMatrix(("a", "b"), np.array([[0, -1], [0, 0]]))
    with pytest.raises(ValueError):
        PreferenceMatrix(("a", "b"), np.array([[1, 0], [0, 0]]))
    with pytest.raises(ValueError):
        PreferenceMatrix(("a", "a"), np.zeros((2, 2), dtype=int))


def test_bt_fit_three_to_one():
    # 3:1 head-to-head has the closed form pi_a / pi_b = 3, and with the
    # total-preserving MM start pi_a + pi_b = 2: scores 0.6 and 1/3
    m = build_matrix([("a", "b")] * 3 + [("b", "a")])
    result = bt_fit(m)
    assert result.converged
    scores = bt_scores(result)
    assert scores["a"] == pytest.approx(0.6, abs=1e-6)
    assert scores["b"] == pytest.approx(1.0 / 3.0, abs=1e-6)
    assert result.pi[0] / result.pi[1] == pytest.approx(3.0, abs=1e-6)


def test_bt_fit_balanced_pair():
    m = build_matrix([("a", "b"), ("b", "a")])
    result = bt_fit(m)
    assert result.pi[0] == pytest.approx(result.pi[1], abs=1e-8)
    assert bt_scores(result)["a"] == pytest.approx(0.5, abs=1e-6)


def test_bt_fit_zero_win_method_floored():
    m = build_matrix([("a", "b")] * 5)
    result = bt_fit(m)
    assert result.pi[1] == PI_FLOOR
    assert bt_scores(result)["b"] == pytest.approx(PI_FLOOR, rel=1e-6)


def test_bt_fit_rejects_empty_and_no_wins():
    with pytest.raises(EmptyComparisons):
        bt_fit(PreferenceMatrix(("a", "b"), np.zeros((2, 2), dtype=int)))


def test_bt_fit_recovers_ordering():
    # methods with known strengths; sampled judgments should recover the order
    rng = np.random.default_rng(0)
    strengths = {"s1": 4.0, "s2": 2.0, "s3": 1.0, "s4": 0.5}
    names = list(strengths)
    judgments = []
    for _ in range(800):
        i, j = rng.choice(4, size=2, replace=False)
        a, b = names[i], names[j]
        p = strengths[a] / (strengths[a] + strengths[b])
        if rng.uniform() < p:
            judgments.append((a, b))
        else:
            judgments.append((b, a))
    result = bt_fit(build_matrix(judgments, methods=names))
    assert result.converged
    order = np.argsort(-result.pi)
    assert [names[i] for i in order] == names


def test_bt_fit_ratio_matches_win_odds():
    # pairwise-only design: the MLE strength ratio equals the win odds
    rng = np.random.default_rng(1)
    for wins_a in (2, 5, 9):
        judgments = [("a", "b")] * wins_a + [("b", "a")] * 3
        result = bt_fit(build_matrix(judgments))
        assert result.pi[0] / result.pi[1] == pytest.approx(wins_a / 3.0, rel=1e-5)


def test_bt_fit_transitive_chain():
    # a beats b, b beats c: fitted strengths must be strictly decreasing
    judgments = [("a", "b")] * 4 + [("b", "a")] + [("b", "c")] * 4 + [("c", "b")]
    result = bt_fit(build_matrix(judgments, methods=["a", "b", "c"]))
    assert result.pi[0] > result.pi[1] > result.pi[2]


def test_read_judgments(tmp_path):
    path = tmp_path / "j.csv"
    path.write_text("winner,loser\nours,base\nbase,ours\n\nours,base\n")
    assert read_judgments(path) == [("ours", "base"), ("base", "ours"), ("ours", "base")]


def test_read_judgments_headerless(tmp_path):
    path = tmp_path / "j.csv"
    path.write_text("ours,base\nbase,ours\n")
    assert read_judgments(path) == [("ours", "base"), ("base", "ours")]


def test_read_judgments_bad_row(tmp_path):
    path = tmp_path / "j.csv"
    path.write_text("ours,base,extra\n")
    with pytest.raises(ValueError):
        read_judgments(path)
