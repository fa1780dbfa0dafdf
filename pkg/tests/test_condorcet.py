import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from scipy.stats import binom

from aggregatio import condorcet as cj
from aggregatio.binomial import (
    InvalidBracket,
    bernoulli_kl,
    binomial_tail_bracket,
    log_lower_tail,
    lower_tail,
    upper_tail,
)
from aggregatio.oracles import (
    enumerate_cjt,
    enumerate_pivotal,
    mixing_sigma_by_bisection,
    motivated_pivot_comparison,
    smallest_mixing_n,
)

ASYM = cj.JuryParams(0.8, 0.6, 0.0, 2)


@st.composite
def jury_params(draw, n_max=12):
    qb = draw(st.floats(0.51, 0.95))
    qa = draw(st.floats(qb, 0.95))
    w = draw(st.floats(0.0, 0.99))
    n = draw(st.integers(1, n_max))
    return cj.JuryParams(qa, qb, w, n)


class TestParams:
    @pytest.mark.parametrize("qa, qb", [(0.6, 0.7), (0.5, 0.5), (1.0, 0.6), (0.7, 0.4)])
    def test_invalid_accuracies(self, qa, qb):
        with pytest.raises(cj.CondorcetError):
            cj.JuryParams(qa, qb)

    def test_with_copies(self):
        assert ASYM.with_(n=7) == cj.JuryParams(0.8, 0.6, 0.0, 7)


class TestPsiAndThreshold:
    def test_psi_values(self):
        assert cj.psi(ASYM) == pytest.approx(0.5, abs=1e-15)
        assert cj.psi(ASYM.with_(w=0.5)) == pytest.approx(0.2, abs=1e-15)
        assert cj.psi(ASYM.with_(w=1.0)) == 0.0

    def test_n_star_values(self):
        assert cj.n_star(ASYM) == 2
        assert cj.n_star(ASYM.with_(w=0.5)) == 4
        assert cj.n_star(cj.JuryParams(0.7, 0.7, 0.3)) == math.inf
        assert cj.n_star(ASYM.with_(w=1.0)) == math.inf

    @settings(max_examples=80, deadline=None)
    @given(jury_params())
    def test_n_star_matches_scan(self, params):
        n_star = cj.n_star(params)
        # the scan stops at 10_000; near-symmetric juries mix only far beyond it
        assume(n_star == math.inf or n_star <= 10_000)
        assert n_star == smallest_mixing_n(params)

    def test_response_thresholds(self):
        lo, hi = cj.response_thresholds(ASYM)
        assert (lo, hi) == (pytest.approx(0.5), pytest.approx(3.0))
        lo, hi = cj.response_thresholds(cj.JuryParams(0.7, 0.7))
        assert (lo, hi) == (pytest.approx(3 / 7), pytest.approx(7 / 3))
        with pytest.raises(cj.DegenerateThreshold):
            cj.response_thresholds(ASYM.with_(w=1.0))

    @settings(max_examples=60, deadline=None)
    @given(jury_params())
    def test_thresholds_straddle_one(self, params):
        if params.w < 1.0:
            lo, hi = cj.response_thresholds(params)
            assert lo < 1.0 < hi


class TestEquilibrium:
    def test_sincere_when_symmetric(self):
        assert cj.equilibrium(cj.JuryParams(0.7, 0.7, 0.2, 5)) == cj.SINCERE

    def test_mixing_example(self):
        eq = cj.equilibrium(ASYM)
        assert eq.sigma_b == 1.0
        assert eq.sigma_a == pytest.approx(0.98159, abs=2e-5)
        assert eq.sigma_a == pytest.approx(mixing_sigma_by_bisection(ASYM), abs=1e-9)

    def test_full_motivation_is_sincere(self):
        for n in (1, 5, 50):
            assert cj.equilibrium(ASYM.with_(w=1.0, n=n)) == cj.SINCERE

    @settings(max_examples=80, deadline=None)
    @given(jury_params())
    def test_mixing_indifference(self, params):
        eq = cj.equilibrium(params)
        if eq.sigma_a < 1.0:
            ratio = cj.pivotal_probs(params, eq).ratio
            assert abs(ratio - cj.psi(params)) <= 1e-9
            assert cj.best_response(params, eq, "a") is cj.Response.INDIFFERENT
            assert cj.best_response(params, eq, "b") is cj.Response.VOTE_B

    def test_sigma_monotone_in_w(self):
        ws = np.round(np.arange(0, 1.0, 0.1), 10)
        sig = [cj.equilibrium(ASYM.with_(w=w, n=12)).sigma_a for w in ws]
        assert all(b >= a for a, b in zip(sig, sig[1:]))


class TestPivotal:
    def test_n1_sincere(self):
        pp = cj.pivotal_probs(ASYM.with_(n=1), cj.SINCERE)
        assert pp.phi_a == pytest.approx(0.32)
        assert pp.phi_b == pytest.approx(0.48)

    def test_symmetric_collapse(self):
        p, n = 0.7, 6
        pp = cj.pivotal_probs(cj.JuryParams(p, p, 0.0, n), cj.SINCERE)
        expected = math.comb(2 * n, n) * (p * (1 - p)) ** n
        assert pp.phi_a == pytest.approx(expected, rel=1e-13)
        assert pp.phi_b == pytest.approx(expected, rel=1e-13)

    @settings(max_examples=40, deadline=None)
    @given(jury_params(n_max=6))
    def test_matches_enumeration(self, params):
        eq = cj.equilibrium(params)
        pp = cj.pivotal_probs(params, eq)
        np.testing.assert_allclose((pp.phi_a, pp.phi_b), enumerate_pivotal(params, eq), atol=1e-13)


class TestBestResponse:
    def test_sincere_below_threshold_follows_signal(self):
        params = ASYM.with_(n=1)
        assert cj.best_response(params, cj.SINCERE, "a") is cj.Response.VOTE_A
        assert cj.best_response(params, cj.SINCERE, "b") is cj.Response.VOTE_B
        ua, ub = motivated_pivot_comparison(params, cj.SINCERE, "a")
        assert ua > ub

    def test_bad_signal(self):
        with pytest.raises(cj.CondorcetError):
            cj.best_response(ASYM, cj.SINCERE, "c")


class TestWelfare:
    def test_small_jury(self):
        assert cj.welfare_exact(cj.JuryParams(0.6, 0.6, 0.4, 1), "A") == pytest.approx(0.648, abs=1e-15)

    def test_single_voter(self):
        params = ASYM.with_(n=0)
        assert cj.welfare_exact(params, "A") == pytest.approx(0.8)

    def test_effective_vote_prob(self):
        assert cj.effective_vote_prob(ASYM, cj.SINCERE, "A") == 0.8
        assert cj.effective_vote_prob(ASYM, cj.JuryStrategy(0.0, 0.0), "A") == pytest.approx(0.2)
        assert cj.limit_effective_vote_prob(ASYM, "A") == pytest.approx(2 / 3)

    def test_limit_matches_large_n(self):
        params = ASYM.with_(n=5000)
        s = cj.effective_vote_prob(params, cj.equilibrium(params), "A")
        assert s == pytest.approx(cj.limit_effective_vote_prob(params, "A"), abs=1e-3)

    @pytest.mark.parametrize("n", [1, 2, 4, 6])
    @pytest.mark.parametrize("w", [0.0, 0.5, 0.9])
    def test_matches_enumeration(self, n, w):
        params = cj.JuryParams(0.8, 0.6, w, n)
        eq = cj.equilibrium(params)
        for state in "AB":
            assert cj.welfare_exact(params, state) == pytest.approx(enumerate_cjt(params, eq, state), abs=1e-12)

    def test_failure_complements(self):
        for state in "AB":
            total = cj.welfare_exact(ASYM, state) + cj.failure_prob(ASYM, state)
            assert total == pytest.approx(1.0, abs=1e-15)

    def test_rate_failure_override(self):
        diag = cj.rate_diagnostic_cjt(ASYM, "A", [10, 20], failure=lambda params, state: 0.0)
        assert diag.values == [0.0, 0.0]
        assert diag.spread() == math.inf

    def test_rate_base_independent_of_w(self):
        assert cj.rate_base(ASYM, "A") == pytest.approx(cj.rate_base(ASYM.with_(w=0.7), "A"), abs=1e-12)


class TestBinomial:
    def test_tails_match_scipy(self):
        for n, p, k in [(10, 0.3, 4), (401, 0.6, 200), (2000, 0.55, 1000)]:
            assert lower_tail(n, p, k) == pytest.approx(binom.cdf(k, n, p), rel=1e-12)
            assert upper_tail(n, p, k) == pytest.approx(binom.sf(k, n, p), rel=1e-12)

    def test_kl_half_identity(self):
        for p in np.linspace(0.05, 0.95, 19):
            assert math.exp(-bernoulli_kl(0.5, p)) == pytest.approx(math.sqrt(4 * p * (1 - p)), rel=1e-13)

    def test_invalid(self):
        with pytest.raises(InvalidBracket):
            binomial_tail_bracket(10, 0.4, 0.5)
        with pytest.raises(InvalidBracket):
            binomial_tail_bracket(10, 0.4, 0.05)

    @settings(max_examples=200, deadline=None)
    @given(st.integers(2, 2000), st.floats(0.05, 0.95), st.floats(0.0, 1.0))
    def test_bracket_contains_tail(self, n, p, u):
        alpha = 1.0 / n + u * (p - 1.0 / n)
        if alpha >= p or math.floor(alpha * n + 1e-9) < 1:
            return
        br = binomial_tail_bracket(n, p, alpha)
        exact = log_lower_tail(n, p, math.floor(alpha * n + 1e-9))
        assert br.log_lower <= exact + 1e-12
        assert exact <= br.log_upper + 1e-12

    def test_width_ratio_converges(self):
        ratios = []
        for n in (1000, 4000, 16000):
            br = binomial_tail_bracket(n, 0.7, 0.5)
            ratios.append(math.exp(br.log_lower - br.log_upper))
        assert ratios[0] < ratios[1] < ratios[2] < 1.0
