"""Transducer data model, path semantics, text I/O, and normalization."""

import math

import numpy as np
import pytest

from sampled_mbr import (
    Edge,
    Path,
    Wfst,
    CyclicFstError,
    DegenerateLatticeError,
    FstParseError,
    InvalidFstError,
    InvalidPathError,
    PathOverflowError,
    count_paths,
    empty_wfst,
    enumerate_paths,
    format_fst_text,
    is_acyclic,
    make_path,
    parse_fst_text,
    path_distribution,
    path_input_labels,
    path_log_weight,
    path_output_labels,
    topological_order,
)
from sampled_mbr.fst import format_symbol_table, parse_symbol_table

from helpers import random_acyclic_wfst, two_path_fixture


# ---------------------------------------------------------------------------
# Construction invariants
# ---------------------------------------------------------------------------


def test_constructor_rejects_bad_references():
    with pytest.raises(InvalidFstError):
        Wfst(2, [Edge(0, 5, 1, 1, 0.0)], final=1)
    with pytest.raises(InvalidFstError):
        Wfst(2, [Edge(0, 1, -1, 1, 0.0)], final=1)
    with pytest.raises(InvalidFstError):
        Wfst(2, [Edge(0, 1, 1, 1, float("nan"))], final=1)
    with pytest.raises(InvalidFstError):
        Wfst(2, [Edge(0, 1, 1, 1, float("inf"))], final=1)
    with pytest.raises(InvalidFstError):
        Wfst(2, [], final=7)


def test_constructor_rejects_edges_leaving_final():
    with pytest.raises(InvalidFstError):
        Wfst(2, [Edge(1, 0, 1, 1, 0.0)], final=1)


def test_minus_inf_weight_is_legal():
    fst = Wfst(2, [Edge(0, 1, 1, 1, float("-inf"))], final=1)
    assert fst.edges[0].log_weight == float("-inf")


def test_out_edges_follow_edge_id_order():
    fst = Wfst(
        3,
        [Edge(0, 1, 1, 1, 0.0), Edge(0, 2, 2, 2, 0.0), Edge(1, 2, 3, 3, 0.0)],
        final=2,
    )
    assert fst.out_edge_ids(0) == (0, 1)
    assert fst.out_edge_ids(1) == (2,)
    assert fst.out_edge_ids(2) == ()


# ---------------------------------------------------------------------------
# Text format
# ---------------------------------------------------------------------------


def test_parse_single_edge():
    fst = parse_fst_text("0 1 1 1 0.0\n1")
    assert fst.num_states == 2
    assert fst.num_edges == 1
    assert fst.edges[0].log_weight == 0.0
    assert fst.final == 1


def test_parse_two_parallel_edges_linear_weights():
    fst = parse_fst_text("0 1 1 2 -0.693147\n0 1 2 3 -1.203973\n1")
    assert math.isclose(math.exp(fst.edges[0].log_weight), 0.5, abs_tol=1e-6)
    assert math.isclose(math.exp(fst.edges[1].log_weight), 0.3, abs_tol=1e-6)


def test_parse_rejects_multiple_finals():
    with pytest.raises(FstParseError):
        parse_fst_text("0 1 1 1 0.0\n0 2 1 1 0.0\n1\n2")


def test_parse_rejects_missing_final():
    with pytest.raises(FstParseError):
        parse_fst_text("0 1 1 1 0.0\n")


def test_parse_rejects_malformed_lines():
    with pytest.raises(FstParseError) as err:
        parse_fst_text("0 1 1 1\n1")
    assert "line 1" in str(err.value)
    with pytest.raises(FstParseError):
        parse_fst_text("0 x 1 1 0.0\n1")
    with pytest.raises(FstParseError):
        parse_fst_text("0 -2 1 1 0.0\n1")
    with pytest.raises(FstParseError):
        parse_fst_text("0 1 1 1 nan\n1")
    with pytest.raises(FstParseError):
        parse_fst_text("0 1 1 1 inf\n1")


def test_parse_rejects_edge_leaving_final():
    with pytest.raises(FstParseError):
        parse_fst_text("0 1 1 1 0.0\n1 0 1 1 0.0\n1")


def test_parse_accepts_minus_inf_and_blank_lines():
    fst = parse_fst_text("\n0 1 1 1 -inf\n\n1\n")
    assert fst.edges[0].log_weight == float("-inf")


def test_round_trip_bit_equality():
    rng = np.random.default_rng(101)
    for _ in range(20):
        fst = random_acyclic_wfst(rng, max_states=12)
        again = parse_fst_text(format_fst_text(fst))
        assert again == fst
        assert parse_fst_text(format_fst_text(again)) == again


def test_symbol_table_round_trip():
    table = {"yes": 1, "no": 2, "maybe": 30}
    assert parse_symbol_table(format_symbol_table(table)) == table
    with pytest.raises(FstParseError):
        parse_symbol_table("yes 1\nyes 2\n")
    with pytest.raises(FstParseError):
        parse_symbol_table("yes one\n")


# ---------------------------------------------------------------------------
# Path semantics
# ---------------------------------------------------------------------------


def test_path_log_weight_single_edge():
    fst = parse_fst_text("0 1 1 1 0.0\n1")
    assert path_log_weight(fst, make_path(fst, [0])) == 0.0


def test_path_log_weight_chained_product():
    fst = Wfst(
        3,
        [Edge(0, 1, 1, 1, math.log(2)), Edge(1, 2, 1, 1, math.log(3))],
        final=2,
    )
    path = make_path(fst, [0, 1])
    assert math.isclose(path.log_weight, math.log(6), rel_tol=1e-12)
    assert path.log_weight == math.log(2) + math.log(3)


def test_empty_path_weight_when_initial_is_final():
    fst = Wfst(1, [], final=0)
    assert path_log_weight(fst, Path((), 0.0)) == 0.0


def test_empty_path_rejected_otherwise():
    fst = parse_fst_text("0 1 1 1 0.0\n1")
    with pytest.raises(InvalidPathError):
        path_log_weight(fst, Path((), 0.0))


def test_non_incident_path_rejected():
    fst = Wfst(
        3,
        [Edge(0, 1, 1, 1, 0.0), Edge(0, 2, 1, 1, 0.0)],
        final=2,
    )
    with pytest.raises(InvalidPathError):
        make_path(fst, [0, 1])
    with pytest.raises(InvalidPathError):
        make_path(fst, [0])  # ends at 1, not final
    with pytest.raises(InvalidPathError):
        make_path(fst, [5])


def test_output_projection_drops_epsilon():
    fst = Wfst(
        4,
        [
            Edge(0, 1, 1, 5, 0.0),
            Edge(1, 2, 1, 0, 0.0),
            Edge(2, 3, 1, 7, 0.0),
        ],
        final=3,
    )
    path = make_path(fst, [0, 1, 2])
    assert path_output_labels(fst, path) == (5, 7)
    assert path_input_labels(fst, path) == (1, 1, 1)


def test_output_projection_all_epsilon_and_duplicates():
    fst = Wfst(
        3,
        [Edge(0, 1, 1, 0, 0.0), Edge(1, 2, 1, 0, 0.0)],
        final=2,
    )
    assert path_output_labels(fst, make_path(fst, [0, 1])) == ()
    dup = Wfst(
        3,
        [Edge(0, 1, 1, 3, 0.0), Edge(1, 2, 1, 3, 0.0)],
        final=2,
    )
    assert path_output_labels(dup, make_path(dup, [0, 1])) == (3, 3)


# ---------------------------------------------------------------------------
# Enumeration
# ---------------------------------------------------------------------------


def test_enumerate_linear_chain():
    fst = Wfst(
        3,
        [Edge(0, 1, 1, 1, 0.0), Edge(1, 2, 2, 2, 0.0)],
        final=2,
    )
    paths = enumerate_paths(fst, 10)
    assert len(paths) == 1
    assert paths[0].edges == (0, 1)


def test_enumerate_two_by_two_grid():
    fst = Wfst(
        3,
        [
            Edge(0, 1, 1, 1, 0.0),
            Edge(0, 1, 2, 2, 0.0),
            Edge(1, 2, 1, 1, 0.0),
            Edge(1, 2, 2, 2, 0.0),
        ],
        final=2,
    )
    paths = enumerate_paths(fst, 10)
    assert [p.edges for p in paths] == [(0, 2), (0, 3), (1, 2), (1, 3)]


def test_enumerate_overflow_on_diamond():
    fst = Wfst(
        4,
        [
            Edge(0, 1, 1, 1, 0.0),
            Edge(0, 2, 1, 1, 0.0),
            Edge(1, 3, 1, 1, 0.0),
            Edge(2, 3, 1, 1, 0.0),
        ],
        final=3,
    )
    with pytest.raises(PathOverflowError):
        enumerate_paths(fst, 1)
    assert len(enumerate_paths(fst, 2)) == 2


def test_enumerate_rejects_cycles():
    fst = Wfst(
        2,
        [Edge(0, 0, 1, 1, 0.0), Edge(0, 1, 1, 1, 0.0)],
        final=1,
    )
    with pytest.raises(CyclicFstError):
        enumerate_paths(fst, 10)
    assert not is_acyclic(fst)
    with pytest.raises(CyclicFstError):
        topological_order(fst)


def test_enumeration_matches_brute_force_recount():
    rng = np.random.default_rng(77)
    for _ in range(30):
        fst = random_acyclic_wfst(rng, max_states=8)
        if fst.num_edges > 12:
            continue
        paths = enumerate_paths(fst, 100_000)
        assert len(paths) == _dfs_count(fst, fst.initial)
        assert count_paths(fst) == len(paths)
        # every enumerated path is valid and weights are exact edge sums
        for p in paths:
            assert path_log_weight(fst, p) == p.log_weight


def _dfs_count(fst, state):
    if state == fst.final:
        return 1
    return sum(_dfs_count(fst, fst.edges[k].dst) for k in fst.out_edge_ids(state))


# ---------------------------------------------------------------------------
# Normalized distributions
# ---------------------------------------------------------------------------


def test_distribution_single_path():
    fst = parse_fst_text("0 1 1 9 -0.5\n1")
    assert path_distribution(fst) == {(9,): 1.0}


def test_distribution_two_parallel_edges():
    dist = path_distribution(two_path_fixture())
    assert math.isclose(dist[(1,)], 0.4, abs_tol=1e-12)
    assert math.isclose(dist[(2,)], 0.6, abs_tol=1e-12)


def test_distribution_merges_equal_word_sequences():
    fst = Wfst(
        2,
        [
            Edge(0, 1, 1, 4, 0.0),
            Edge(0, 1, 2, 4, 0.0),
            Edge(0, 1, 3, 8, math.log(2)),
        ],
        final=1,
    )
    dist = path_distribution(fst)
    assert math.isclose(dist[(4,)], 0.5, abs_tol=1e-12)
    assert math.isclose(dist[(8,)], 0.5, abs_tol=1e-12)


def test_distribution_sums_to_one_on_random_fsts():
    rng = np.random.default_rng(5)
    for _ in range(25):
        fst = random_acyclic_wfst(rng, max_states=10)
        try:
            dist = path_distribution(fst, max_paths=100_000)
        except DegenerateLatticeError:
            continue
        total = sum(dist.values())
        assert abs(total - 1.0) <= 1e-12
        assert all(p >= 0 for p in dist.values())


def test_distribution_degenerate_when_all_weights_zero():
    fst = Wfst(2, [Edge(0, 1, 1, 1, float("-inf"))], final=1)
    with pytest.raises(DegenerateLatticeError):
        path_distribution(fst)
    with pytest.raises(DegenerateLatticeError):
        path_distribution(empty_wfst())


def test_empty_wfst_shape():
    fst = empty_wfst()
    assert fst.num_states == 2
    assert fst.num_edges == 0
    assert count_paths(fst) == 0
