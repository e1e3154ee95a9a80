import math

import numpy as np
import pytest

from rankloss.smooth_rank import QueryContext, hard_rank_neg, sigmoid, smooth_rank


def make_ctx(pos, neg, query_index=0):
    pos_sims = tuple((10 + i, s) for i, s in enumerate(pos))
    neg_sims = tuple((100 + i, s) for i, s in enumerate(neg))
    return QueryContext(query_index=query_index, pos_sims=pos_sims, neg_sims=neg_sims)


class TestSigmoid:
    def test_zero_is_half(self):
        for tau in (0.01, 0.05, 1.0):
            value, _ = sigmoid(0.0, tau)
            assert value == 0.5

    def test_saturation(self):
        value, _ = sigmoid(0.05, 1e-4)  # x/tau = 500
        assert abs(value - 1.0) < 1e-12

    def test_derivative_at_zero(self):
        _, deriv = sigmoid(0.0, 0.01)
        assert deriv == pytest.approx(25.0)

    def test_no_overflow_at_extremes(self):
        for x in (-100.0, 100.0):
            value, deriv = sigmoid(x, 0.01)  # |x/tau| = 1e4
            assert math.isfinite(value) and math.isfinite(deriv)

    def test_rejects_nonpositive_tau(self):
        with pytest.raises(ValueError):
            sigmoid(0.0, 0.0)
        with pytest.raises(ValueError):
            sigmoid(0.0, -1.0)


class TestHardRank:
    def test_below_counts_zero(self):
        assert hard_rank_neg(make_ctx([], [0.6]), target_sim=0.8) == 0

    def test_above_counts_one(self):
        assert hard_rank_neg(make_ctx([], [0.6]), target_sim=0.4) == 1

    def test_tie_does_not_count(self):
        assert hard_rank_neg(make_ctx([], [0.5]), target_sim=0.5) == 0


class TestSmoothRank:
    def test_empty_set(self):
        r = smooth_rank(make_ctx([0.5], []), 10, 0.5, "negatives", 0.01)
        assert r.value == 0.0
        assert r.d_value_d_sim == {}

    def test_saturated_matches_hard(self):
        r = smooth_rank(make_ctx([], [0.6]), 10, 0.4, "negatives", 1e-4)
        assert abs(r.value - 1.0) < 1e-6

    def test_tie_gives_half(self):
        # hard indicator counts a tie as 0; the relaxation yields 0.5
        r = smooth_rank(make_ctx([], [0.5]), 10, 0.5, "negatives", 0.01)
        assert r.value == pytest.approx(0.5)

    def test_value_strictly_inside_bounds(self, rng):
        for _ in range(20):
            neg = rng.uniform(-1, 1, size=6).tolist()
            target = float(rng.uniform(-1, 1))
            r = smooth_rank(make_ctx([target], neg), 10, target, "negatives", 0.05)
            assert 0.0 < r.value < len(neg)

    def test_positives_exclude_target(self):
        ctx = make_ctx([0.9, 0.3], [])
        r = smooth_rank(ctx, 10, 0.9, "positives", 1e-4)
        assert abs(r.value - 0.0) < 1e-6  # only 0.3 remains, and it's below

    def test_rejects_bad_over(self):
        with pytest.raises(ValueError):
            smooth_rank(make_ctx([0.5], []), 10, 0.5, "both", 0.01)

    def test_partials_match_finite_differences(self, rng):
        tau, h = 0.05, 1e-6
        pos = rng.uniform(-1, 1, size=5)
        neg = rng.uniform(-1, 1, size=7)
        target = float(pos[0])
        ctx = make_ctx(pos.tolist(), neg.tolist())
        r = smooth_rank(ctx, 10, target, "negatives", tau)

        def value_at(shift_idx, delta):
            shifted_neg = [
                s + (delta if 100 + i == shift_idx else 0.0) for i, s in enumerate(neg)
            ]
            t = target + (delta if shift_idx == 10 else 0.0)
            return smooth_rank(make_ctx(pos.tolist(), shifted_neg), 10, t, "negatives", tau).value

        # saturated sigmoids make some partials exponentially small; those
        # are below what float64 differencing of an O(1) sum can resolve,
        # so the denominator floor compares them absolutely instead
        for idx, partial in r.d_value_d_sim.items():
            numeric = (value_at(idx, h) - value_at(idx, -h)) / (2 * h)
            assert abs(partial - numeric) / max(abs(partial), abs(numeric), 1e-3) < 1e-6

    def test_sum_rule(self, rng):
        for _ in range(10):
            neg = rng.uniform(-1, 1, size=8).tolist()
            target = float(rng.uniform(-1, 1))
            r = smooth_rank(make_ctx([target], neg), 10, target, "negatives", 0.05)
            others = sum(v for k, v in r.d_value_d_sim.items() if k != 10)
            assert abs(r.d_value_d_sim[10] + others) < 1e-12

    def test_convergence_to_hard_rank(self, rng):
        # with min gap g, the relaxation error is bounded by |set| * G(-g; tau)
        for _ in range(10):
            vals = np.sort(rng.uniform(-1, 1, size=7))
            if np.min(np.diff(vals)) < 1e-3:
                continue
            g = float(np.min(np.diff(vals)))
            target = float(vals[3])
            neg = np.delete(vals, 3).tolist()
            tau = g / 20
            ctx = make_ctx([target], neg)
            smooth = smooth_rank(ctx, 10, target, "negatives", tau).value
            hard = hard_rank_neg(ctx, target)
            bound, _ = sigmoid(-g, tau)
            assert abs(smooth - hard) <= len(neg) * bound
            assert abs(smooth - hard) < 0.01 * len(neg)

    def test_monotonicity(self):
        neg = [0.1, 0.4, 0.7]
        target = 0.5
        base = smooth_rank(make_ctx([target], neg), 10, target, "negatives", 0.05).value
        bumped = smooth_rank(make_ctx([target], [0.2, 0.4, 0.7]), 10, target, "negatives", 0.05).value
        assert bumped >= base
        higher_target = smooth_rank(make_ctx([0.6], neg), 10, 0.6, "negatives", 0.05).value
        assert higher_target <= base

    def test_query_never_in_candidate_sets(self):
        with pytest.raises(ValueError):
            QueryContext(query_index=5, pos_sims=((5, 0.5),), neg_sims=())
