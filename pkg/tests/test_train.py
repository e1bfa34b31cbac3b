"""Training loss, lambda gradients, and the descent loop."""

import numpy as np
import pytest

from marginrank import (
    Item,
    MarginWeightModel,
    QuerySession,
    RerankConfig,
    TrainingDiverged,
    adjust_scores,
    fit,
    kendall_kernel,
    kendall_tau,
    lambda_gradients,
    loss_gradient,
    margin_gains,
    margin_rank_loss,
    ndcg_swap_cost,
    total_loss,
    write_trace_csv,
)
from marginrank.parallel import map_ordered
from marginrank.train import rank_loss_score_gradient

from conftest import make_corpus, make_session


def flat_price_session(margin_percents, utilities, feature_dim=2):
    """Session with identical prices so dollar margins track margin percent."""
    items = tuple(
        Item(
            item_id=f"i{j}",
            features=np.zeros(feature_dim),
            label=2 if j == 0 else 0,
            price=100.0,
            cost=100.0 * (1.0 - mp),
            base_utility=float(u),
        )
        for j, (mp, u) in enumerate(zip(margin_percents, utilities))
    )
    return QuerySession(query_id="q0", items=items, feature_dim=feature_dim)


def gapped_scores(rng, n, gap=0.02):
    u = np.cumsum(rng.uniform(gap, 1.0, size=n))
    rng.shuffle(u)
    return u


def params_of(model):
    return np.concatenate([model.weights, [model.bias]])


def model_from(params, link):
    return MarginWeightModel(params[:-1], float(params[-1]), link)


class TestMarginRankLoss:
    def test_two_item_hand_computation(self):
        # Margins 40 vs 10 dollars bin to gains (3, 0); the high-margin item
        # sits second under u' = (0, 1), so the single ordered pair costs
        # log(1 + e^theta) * (1 - 1/log2(3)).
        s = flat_price_session([0.4, 0.1], [0.0, 1.0])
        u_prime = s.base_utilities
        theta = 1.3
        expected = np.logaddexp(0.0, theta) * (1.0 - 1.0 / np.log2(3.0))
        assert margin_rank_loss(s, u_prime, theta) == pytest.approx(expected, rel=1e-12)

    def test_equal_margins_give_zero_loss(self, rng):
        s = flat_price_session([0.3] * 5, rng.normal(size=5))
        assert margin_rank_loss(s, rng.normal(size=5), 1.0) == 0.0

    def test_matches_swap_cost_oracle(self, rng):
        for _ in range(20):
            s = make_session(rng)
            u_prime = gapped_scores(rng, len(s.items))
            theta = float(rng.uniform(0.5, 3.0))
            margins = s.margins
            gains = margin_gains(margins)
            expected = 0.0
            for i in range(len(margins)):
                for j in range(len(margins)):
                    if margins[i] > margins[j]:
                        core = np.logaddexp(0.0, -theta * (u_prime[i] - u_prime[j]))
                        expected += core * ndcg_swap_cost(i, j, u_prime, gains)
            got = margin_rank_loss(s, u_prime, theta)
            assert got == pytest.approx(expected, rel=1e-10)

    def test_well_ordered_list_costs_less(self, rng):
        s = make_session(rng, n=8)
        by_margin = np.argsort(-s.margins)
        aligned = np.empty(8)
        aligned[by_margin] = np.arange(8, 0, -1, dtype=float)
        reversed_ = -aligned
        assert margin_rank_loss(s, aligned, 1.0) < margin_rank_loss(s, reversed_, 1.0)


class TestLambdaGradients:
    def test_zero_outside_ordered_margin_pairs(self, rng):
        s = make_session(rng, n=7)
        lam = lambda_gradients(s, gapped_scores(rng, 7), 1.0)
        margins = s.margins
        gains = margin_gains(margins)
        for i in range(7):
            for j in range(7):
                if not margins[i] > margins[j]:
                    assert lam[i, j] == 0.0
                elif gains[i] != gains[j]:
                    assert lam[i, j] < 0.0
                else:
                    # Same quartile bin: swapping is free, so no pull.
                    assert lam[i, j] == 0.0

    def test_tied_scores_halve_the_slope(self, rng):
        # At u'_i == u'_j the logistic slope is exactly -theta/2 before the
        # swap-cost weighting.
        s = make_session(rng, n=5)
        theta = 2.0
        u_prime = np.zeros(5)
        lam = lambda_gradients(s, u_prime, theta)
        gains = margin_gains(s.margins)
        for i in range(5):
            for j in range(5):
                if s.margins[i] > s.margins[j]:
                    expected = -theta / 2.0 * ndcg_swap_cost(i, j, u_prime, gains)
                    assert lam[i, j] == pytest.approx(expected, rel=1e-12)

    def test_well_separated_pairs_fade(self):
        s = flat_price_session([0.4, 0.1], [0.0, 0.0])
        near = lambda_gradients(s, np.array([0.0, 0.1]), 1.0)[0, 1]
        far = lambda_gradients(s, np.array([0.0, -8.0]), 1.0)[0, 1]
        assert abs(far) < abs(near) * 1e-2


class TestScoreGradient:
    def test_matches_finite_differences(self, rng):
        h = 1e-6
        for _ in range(15):
            s = make_session(rng)
            n = len(s.items)
            u_prime = gapped_scores(rng, n)
            theta = float(rng.uniform(0.5, 3.0))
            grad = rank_loss_score_gradient(s, u_prime, theta)
            for k in range(n):
                plus = u_prime.copy()
                plus[k] += h
                minus = u_prime.copy()
                minus[k] -= h
                fd = (
                    margin_rank_loss(s, plus, theta) - margin_rank_loss(s, minus, theta)
                ) / (2.0 * h)
                assert grad[k] == pytest.approx(fd, rel=1e-5, abs=1e-9)

    def test_gradient_sums_to_zero(self, rng):
        # The loss depends only on score differences, so a common shift is
        # invisible and the gradient entries cancel.
        s = make_session(rng, n=9)
        grad = rank_loss_score_gradient(s, gapped_scores(rng, 9), 1.5)
        assert np.sum(grad) == pytest.approx(0.0, abs=1e-12)


class TestTotalLoss:
    def test_gamma_zero_disables_regularizer(self, rng):
        s = make_session(rng)
        model = MarginWeightModel(rng.normal(size=4) * 0.3, 0.1)
        breakdown = total_loss(s, model, RerankConfig(gamma=0.0))
        assert breakdown.regularizer == 0.0
        assert breakdown.total == breakdown.rank_loss

    def test_regularizer_is_scaled_kernel_distance(self, rng):
        s = make_session(rng)
        model = MarginWeightModel(rng.normal(size=4) * 0.3, 0.1)
        config = RerankConfig(gamma=3.0, theta_kendall=2.0)
        u_prime = adjust_scores(s, model, config.alpha)
        sim = kendall_kernel(s.base_utilities, u_prime, 2.0)
        breakdown = total_loss(s, model, config)
        assert breakdown.regularizer == pytest.approx(3.0 * (1.0 - sim), rel=1e-12)
        assert breakdown.total == pytest.approx(
            breakdown.rank_loss + breakdown.regularizer
        )


class TestLossGradient:
    def well_separated(self, rng, model, config, feature_dim):
        for _ in range(50):
            s = make_session(rng, feature_dim=feature_dim)
            u = adjust_scores(s, model, config.alpha)
            diff = np.abs(u[:, None] - u[None, :])
            np.fill_diagonal(diff, np.inf)
            if diff.min() > 1e-3:
                return s
        raise AssertionError("no well-separated session drawn")

    def numeric_gradient(self, s, model, config, h=1e-6):
        base = params_of(model)
        grad = np.zeros_like(base)
        for k in range(len(base)):
            plus = base.copy()
            plus[k] += h
            minus = base.copy()
            minus[k] -= h
            f_plus = total_loss(s, model_from(plus, model.link), config).total
            f_minus = total_loss(s, model_from(minus, model.link), config).total
            grad[k] = (f_plus - f_minus) / (2.0 * h)
        return grad

    @pytest.mark.parametrize("gamma", [0.0, 2.5])
    @pytest.mark.parametrize("link", ["softplus", "identity"])
    def test_matches_finite_differences(self, rng, gamma, link):
        config = RerankConfig(
            alpha=0.2, gamma=gamma, theta_rank=1.0, theta_kendall=2.0, link=link
        )
        for _ in range(8):
            d = int(rng.integers(2, 5))
            model = MarginWeightModel(rng.normal(size=d + 1) * 0.3, 0.1, link)
            s = self.well_separated(rng, model, config, d)
            analytic = loss_gradient(s, model, config)
            numeric = self.numeric_gradient(s, model, config)
            scale = max(np.abs(numeric).max(), 1e-8)
            assert np.abs(analytic - numeric).max() / scale < 1e-5

    def test_gradient_length_covers_weights_and_bias(self, rng):
        s = make_session(rng, feature_dim=3)
        model = MarginWeightModel.zeros(3)
        grad = loss_gradient(s, model, RerankConfig())
        assert grad.shape == (5,)  # 3 features + margin slot + bias


class TestFit:
    def test_trace_covers_every_epoch(self, rng):
        corpus = make_corpus(rng, 3)
        _, trace = fit(corpus, RerankConfig(epochs=7, learning_rate=0.01))
        assert len(trace) == 7
        for arr in (trace.rank_loss, trace.regularizer, trace.total, trace.mean_tau):
            assert len(arr) == 7
            assert np.all(np.isfinite(arr))

    def test_first_row_is_the_untrained_model(self, rng):
        # Row e records the state entering epoch e, so row 0 must match a
        # direct evaluation of the zero-initialized model.
        corpus = make_corpus(rng, 4)
        config = RerankConfig(gamma=1.5, epochs=3, learning_rate=0.05)
        _, trace = fit(corpus, config)
        zero = MarginWeightModel.zeros(3, config.link)
        breakdowns = [total_loss(s, zero, config) for s in corpus]
        taus = [
            kendall_tau(s.base_utilities, adjust_scores(s, zero, config.alpha))
            for s in corpus
        ]
        assert trace.rank_loss[0] == pytest.approx(
            np.mean([b.rank_loss for b in breakdowns]), rel=1e-12
        )
        assert trace.regularizer[0] == pytest.approx(
            np.mean([b.regularizer for b in breakdowns]), rel=1e-12
        )
        assert trace.mean_tau[0] == pytest.approx(np.mean(taus), rel=1e-12)

    def test_single_step_applies_mean_gradient(self, rng):
        corpus = make_corpus(rng, 3)
        config = RerankConfig(gamma=0.7, epochs=1, learning_rate=0.2)
        model, _ = fit(corpus, config)
        zero = MarginWeightModel.zeros(3, config.link)
        grad = np.zeros(5)
        for s in corpus:
            grad += loss_gradient(s, zero, config)
        step = (config.learning_rate / len(corpus)) * grad
        np.testing.assert_allclose(model.weights, -step[:-1], rtol=1e-12, atol=0.0)
        assert model.bias == pytest.approx(-step[-1], rel=1e-12)

    def test_loss_decreases_on_small_corpus(self, rng):
        corpus = make_corpus(rng, 5)
        config = RerankConfig(gamma=0.5, epochs=60, learning_rate=0.05)
        _, trace = fit(corpus, config)
        assert trace.total[-1] < trace.total[0]

    def test_threads_do_not_change_the_result(self, rng):
        corpus = make_corpus(rng, 6)
        config = RerankConfig(gamma=1.0, epochs=12, learning_rate=0.05)
        model_1, trace_1 = fit(corpus, config, threads=1)
        model_3, trace_3 = fit(corpus, config, threads=3)
        np.testing.assert_array_equal(model_1.weights, model_3.weights)
        assert model_1.bias == model_3.bias
        np.testing.assert_array_equal(trace_1.total, trace_3.total)

    def test_divergence_raises_with_partial_trace(self, rng):
        corpus = make_corpus(rng, 3)
        config = RerankConfig(
            gamma=1e300, epochs=6, learning_rate=1e308, link="identity"
        )
        with pytest.raises(TrainingDiverged, match="not finite") as excinfo:
            fit(corpus, config)
        err = excinfo.value
        assert err.epoch >= 1
        assert len(err.trace) == err.epoch
        assert np.all(np.isfinite(err.trace.total))

    def test_rejects_empty_input(self):
        with pytest.raises(ValueError, match="at least one"):
            fit([], RerankConfig())

    def test_rejects_mixed_feature_dims(self, rng):
        bad = [make_session(rng, feature_dim=3), make_session(rng, feature_dim=4)]
        with pytest.raises(ValueError, match="feature_dim"):
            fit(bad, RerankConfig(epochs=1))


class TestTraceCsv:
    def test_header_and_row_count(self, rng, tmp_path):
        corpus = make_corpus(rng, 2)
        _, trace = fit(corpus, RerankConfig(epochs=4, learning_rate=0.01))
        path = tmp_path / "trace.csv"
        write_trace_csv(trace, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "epoch,rank_loss,regularizer,total,mean_tau"
        assert len(lines) == 5
        first = lines[1].split(",")
        assert first[0] == "0"
        assert float(first[3]) == pytest.approx(trace.total[0], rel=1e-8)


class TestMapOrdered:
    def test_preserves_order(self):
        assert map_ordered(lambda x: x * x, [3, 1, 2], threads=4) == [9, 1, 4]

    def test_single_thread_path(self):
        assert map_ordered(str, [1, 2], threads=1) == ["1", "2"]

    def test_rejects_nonpositive_threads(self):
        with pytest.raises(ValueError, match="threads"):
            map_ordered(str, [1], threads=0)
