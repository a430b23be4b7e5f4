import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import seeds, symmetric_dists
from oracles import AWGN_097865_I, BSC_011_A, random_symmetric_rows
from polarlr.channel_model import (
    ChannelError,
    ConsistencyError,
    DegenerateOutputError,
    DomainError,
    LRDistribution,
    StandingAssumptionError,
    SymmetryError,
    TransitionMatrix,
    allclose,
    build_channel,
    canonicalize,
    from_transition_matrix,
    make_awgn_quantized,
    make_bec,
    make_bsc,
    parse_channel_spec,
    standing_assumption_ok,
)
from polarlr.metrics import prob_partition, q_param, sym_capacity


def atoms(d):
    return [(float(a.lr), float(a.mass)) for a in d.atoms]


def symmetry_gap(d):
    """max |m(1/l) - l m(l)| over stored pairs."""
    lookup = dict(zip(d.lr.tolist(), d.mass.tolist()))
    worst = 0.0
    for l, m in lookup.items():
        if 0 < l < 1:
            worst = max(worst, abs(lookup.get(1 / l, 0.0) - l * m))
    return worst


class TestBuilders:
    def test_bsc_trivial_ends(self):
        assert atoms(make_bsc(0.0)) == [(0.0, 1.0)]
        assert atoms(make_bsc(0.5)) == [(1.0, 1.0)]

    def test_bsc_closed_form(self):
        d = make_bsc(0.11)
        assert len(d) == 2
        np.testing.assert_allclose(d.lr, [BSC_011_A, 1 / BSC_011_A], rtol=1e-14)
        np.testing.assert_allclose(d.mass, [0.89, 0.11], atol=1e-15)

    @pytest.mark.parametrize("p", [-0.1, 0.7, 1.0, float("nan")])
    def test_bsc_domain(self, p):
        with pytest.raises(DomainError):
            make_bsc(p)

    def test_bec(self):
        assert atoms(make_bec(0.0)) == [(0.0, 1.0)]
        assert atoms(make_bec(1.0)) == [(1.0, 1.0)]
        assert atoms(make_bec(0.5)) == [(0.0, 0.5), (1.0, 0.5)]
        with pytest.raises(DomainError):
            make_bec(1.5)

    def test_awgn_capacity_against_quadrature(self):
        d = make_awgn_quantized(0.97865, 64)
        assert len(d) <= 2 * 64 + 1
        assert abs(sym_capacity(d) - AWGN_097865_I) < 0.01
        assert symmetry_gap(d) < 1e-12

    def test_awgn_limits(self):
        assert q_param(make_awgn_quantized(50.0, 16)) < 0.05
        assert q_param(make_awgn_quantized(0.05, 16)) > 1 - 1e-12

    @given(st.floats(0.0, 0.5), st.floats(0.0, 1.0))
    def test_builders_keep_invariants(self, p, eps):
        for d in (make_bsc(p), make_bec(eps)):
            assert abs(d.mass.sum() - 1) < 1e-12
            assert symmetry_gap(d) < 1e-12
            assert standing_assumption_ok(d)
            assert np.all(np.diff(d.lr) > 0)


class TestTransitionMatrix:
    def test_bsc_rows(self):
        d = from_transition_matrix(TransitionMatrix([(0.89, 0.11), (0.11, 0.89)]))
        assert allclose(d, make_bsc(0.11), atol=1e-15)

    def test_erasure_like_rows_merge(self):
        d = from_transition_matrix(TransitionMatrix([(0.5, 0), (0, 0.5), (0.25, 0.25), (0.25, 0.25)]))
        assert atoms(d) == atoms(make_bec(0.5))

    def test_single_useless_output(self):
        # both columns sum to one: a valid channel with a single output
        assert atoms(from_transition_matrix(TransitionMatrix([(1.0, 1.0)]))) == [(1.0, 1.0)]

    def test_unnormalized(self):
        with pytest.raises(ConsistencyError):
            from_transition_matrix(TransitionMatrix([(1.0, 1.0), (1.0, 1.0)]))

    def test_degenerate_row(self):
        with pytest.raises(DegenerateOutputError):
            from_transition_matrix(TransitionMatrix([(0.5, 0.5), (0.0, 0.0), (0.5, 0.5)]))

    def test_asymmetric_names_rows(self):
        with pytest.raises(SymmetryError, match="rows"):
            from_transition_matrix(TransitionMatrix([(0.9, 0.2), (0.1, 0.8)]))

    @given(symmetric_dists())
    def test_round_trip(self, d):
        back = from_transition_matrix(d.matrix())
        assert allclose(back, d, atol=1e-12)

    @given(seeds)
    def test_matrix_groups_by_lr(self, seed):
        rows = random_symmetric_rows(np.random.default_rng(seed))
        d = from_transition_matrix(TransitionMatrix(rows))
        w0, w1 = rows[:, 0], rows[:, 1]
        live = w0 > 0
        # mass at each LR value is the W(.|0) mass of the outputs having it
        for lr, m in zip(d.lr, d.mass):
            sel = live & np.isclose(w1 / np.where(live, w0, 1), lr, rtol=1e-9, atol=1e-300)
            assert abs(w0[sel].sum() - m) < 1e-12


class TestCanonicalize:
    def test_duplicates_merge(self):
        assert atoms(canonicalize([(1, 0.5), (1, 0.5)])) == [(1.0, 1.0)]

    def test_canonical_input_unchanged(self):
        d = canonicalize([(0.5, 2 / 3), (2.0, 1 / 3)])
        np.testing.assert_allclose(d.mass, [2 / 3, 1 / 3], rtol=1e-15)

    def test_repair_projects_onto_relation(self):
        d = canonicalize([(0.5, 0.7), (2.0, 0.3)])
        m = dict(zip(d.lr.tolist(), d.mass.tolist()))
        assert abs(m[2.0] - 0.5 * m[0.5]) < 1e-15
        assert abs(sum(m.values()) - 1) < 1e-15

    def test_total_mass_checked(self):
        with pytest.raises(ConsistencyError):
            canonicalize([(0.5, 0.5), (2.0, 0.2)])

    def test_dust_pruned_and_redistributed(self):
        d = canonicalize([(0.0, 1 - 1e-17), (0.3, 1e-17)])
        assert atoms(d) == [(0.0, 1.0)]

    @given(symmetric_dists())
    def test_idempotent_exactly(self, d):
        again = canonicalize(d)
        assert np.array_equal(again.lr, d.lr) and np.array_equal(again.mass, d.mass)

    @given(symmetric_dists(), seeds)
    def test_order_independent(self, d, seed):
        perm = np.random.default_rng(seed).permutation(len(d))
        shuffled = canonicalize(list(zip(d.lr[perm], d.mass[perm])))
        assert np.array_equal(shuffled.lr, d.lr) and np.array_equal(shuffled.mass, d.mass)

    def test_immutable(self):
        d = make_bsc(0.2)
        with pytest.raises(ValueError):
            d.mass[0] = 0.5


class TestChannelSpec:
    def test_inline_and_dict(self):
        a = build_channel('{"type": "bsc", "p": 0.11}')
        b = build_channel({"type": "bsc", "p": 0.11})
        assert atoms(a) == atoms(b)

    def test_file(self, tmp_path):
        f = tmp_path / "ch.json"
        f.write_text(json.dumps({"type": "awgn", "sigma": 1.0, "levels": 8}))
        assert len(build_channel(str(f))) <= 17

    def test_positional_json_error(self):
        with pytest.raises(ChannelError, match="line 1 column"):
            parse_channel_spec('{"type": "bsc", "p": }')

    @pytest.mark.parametrize("spec", ['{"p": 0.1}', '{"type": "qsc"}', '{"type": "awgn", "sigma": 1}'])
    def test_bad_specs(self, spec):
        with pytest.raises(ChannelError):
            build_channel(spec)

    def test_custom_and_lr(self):
        c = build_channel({"type": "custom", "rows": [[0.5, 0], [0, 0.5], [0.5, 0.5]]})
        assert atoms(c) == atoms(make_bec(0.5))
        lr = build_channel({"type": "lr", "atoms": [[0.25, 0.8], [4.0, 0.2]]})
        assert allclose(lr, make_bsc(0.2), atol=1e-15)

    def test_lr_spec_rejects_real_asymmetry(self):
        with pytest.raises(SymmetryError):
            build_channel({"type": "lr", "atoms": [[0.5, 0.7], [2.0, 0.3]]})

    def test_relabelled_outputs_still_satisfy_assumption(self):
        # symmetry alone forces P[L > 1] <= P[L < 1]; swapping output labels changes nothing
        d = build_channel({"type": "custom", "rows": [[0.1, 0.9], [0.9, 0.1]]})
        assert allclose(d, make_bsc(0.1), atol=1e-15)

    def test_typed_lr_pair_snaps(self):
        d = build_channel({"type": "lr", "atoms": [[0.1235955, 0.89], [8.0909091, 0.11]]})
        assert len(d) == 2 and abs(d.lr[0] * d.lr[1] - 1) < 1e-15


def test_standing_assumption_guard():
    from polarlr.channel_model import require_standing_assumption

    skewed = LRDistribution([0.5, 2.0], [0.3, 0.7], symmetric=False)
    assert not standing_assumption_ok(skewed)
    with pytest.raises(StandingAssumptionError):
        require_standing_assumption(skewed)


@given(seeds)
def test_near_symmetric_matrix_accepted(seed):
    rows = random_symmetric_rows(np.random.default_rng(seed))
    noisy = rows * (1 + 1e-9 * np.random.default_rng(seed + 1).standard_normal(rows.shape))
    noisy /= noisy.sum(axis=0)
    d = from_transition_matrix(TransitionMatrix(noisy))
    assert allclose(d, from_transition_matrix(TransitionMatrix(rows)), atol=1e-7, rtol=1e-6)


def test_partition_of_builders():
    part = prob_partition(make_bec(0.5))
    assert tuple(part) == (0.5, 0.5, 0.0, 0.25, 0.75)
    assert isinstance(make_bsc(0.3), LRDistribution)
