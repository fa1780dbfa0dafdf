import numpy as np
import pytest

from aggregatio import condorcet as cj
from aggregatio import oracles
from aggregatio import social_learning as sl
from aggregatio.verification import CHECKS, run_battery


class TestEnumerationCaps:
    def test_cjt_cap(self):
        with pytest.raises(oracles.TooLarge):
            oracles.enumerate_cjt(cj.JuryParams(0.7, 0.6, 0.0, 11), cj.SINCERE, "A")

    def test_slm_cap(self):
        with pytest.raises(oracles.TooLarge):
            oracles.enumerate_slm(0.7, 0.0, 21)


class TestCjtEnumeration:
    def test_hand_sum(self):
        assert oracles.enumerate_cjt(cj.JuryParams(0.6, 0.6, 0.0, 1), cj.SINCERE, "A") == pytest.approx(0.648)

    def test_everyone_votes_a(self):
        params = cj.JuryParams(0.8, 0.6, 0.0, 3)
        assert oracles.enumerate_cjt(params, cj.JuryStrategy(1.0, 0.0), "A") == pytest.approx(1.0)

    def test_equilibrium_agreement(self):
        params = cj.JuryParams(0.8, 0.6, 0.0, 2)
        eq = cj.equilibrium(params)
        assert oracles.enumerate_cjt(params, eq, "A") == pytest.approx(cj.welfare_exact(params, "A"), abs=1e-12)


class TestSlmEnumeration:
    def test_values(self):
        assert oracles.enumerate_slm(0.75, 0.0, 4).welfare == pytest.approx(0.796875, abs=1e-15)
        e = oracles.enumerate_slm(0.75, 0.0, 2)
        assert (e.cascade_up, e.cascade_down) == (pytest.approx(0.5625), pytest.approx(0.0625))

    def test_linear_solve(self):
        up, t = oracles.absorption_linear_solve(0.75, 2)
        assert (up, t) == (pytest.approx(0.9, abs=1e-12), pytest.approx(3.2, abs=1e-12))
        assert oracles.absorption_linear_solve(0.75, 3)[0] > up


class TestMonteCarlo:
    def test_seed_determinism(self):
        a = oracles.mc_slm(0.7, 0.0, 30, 5000, seed=3, shards=3)
        b = oracles.mc_slm(0.7, 0.0, 30, 5000, seed=3, shards=3)
        assert a == b

    def test_thread_independence(self):
        a = oracles.mc_slm(0.7, 0.1, 30, 6000, seed=9, shards=4, threads=1)
        b = oracles.mc_slm(0.7, 0.1, 30, 6000, seed=9, shards=4, threads=4)
        assert a == b

    def test_seed_changes_estimate(self):
        a = oracles.mc_slm(0.7, 0.0, 30, 2000, seed=1)
        b = oracles.mc_slm(0.7, 0.0, 30, 2000, seed=2)
        assert a.mean != b.mean

    def test_shard_sizes(self):
        assert oracles.shard_sizes(10, 3) == [4, 3, 3]
        assert sum(oracles.shard_sizes(100_001, 7)) == 100_001

    def test_cjt_within_se(self):
        params = cj.JuryParams(0.8, 0.6, 0.3, 4)
        eq = cj.equilibrium(params)
        for state in "AB":
            est = oracles.mc_cjt(params, eq, state, 40_000, seed=17, shards=2)
            assert est.within(cj.welfare_exact(params, state))

    def test_thread_env(self, monkeypatch):
        monkeypatch.setenv("AGGREGATIO_THREADS", "3")
        assert oracles.thread_count() == 3
        monkeypatch.setenv("AGGREGATIO_THREADS", "0")
        with pytest.raises(ValueError):
            oracles.thread_count()

    def test_validation(self):
        with pytest.raises(ValueError):
            oracles.mc_slm(0.7, 0.0, 10, 0, seed=1)
        with pytest.raises(ValueError):
            oracles.mc_slm(0.7, 0.0, 10, 10, seed=-1)


class TestStoppingOracle:
    def test_geometric(self):
        pmf = oracles.stopping_pmf_by_enumeration(0.75, 2, 10)
        np.testing.assert_allclose([pmf[2 * m] for m in range(1, 6)],
                                   [0.625 * 0.375 ** (m - 1) for m in range(1, 6)], atol=1e-15)

    def test_odd_threshold_hits_odd_times(self):
        pmf = oracles.stopping_pmf_by_enumeration(0.7, 3, 12)
        assert all(pmf[n] == 0.0 for n in pmf if n % 2 == 0)
        assert dict(sl.stopping_time_pmf(0.7, 3, 3))[3] == pytest.approx(pmf[3], abs=1e-15)


class TestBattery:
    def test_quick_battery_passes(self):
        results = run_battery(full=False)
        assert len(results) == len(CHECKS)
        failed = [r for r in results if not r.passed]
        assert not failed, failed
        assert sum(r.seconds for r in results) < 60

    def test_crashing_check_is_reported(self, monkeypatch):
        import aggregatio.verification as v

        def boom(full):
            raise RuntimeError("kaput")

        monkeypatch.setattr(v, "CHECKS", [("boom", boom)])
        (res,) = v.run_battery()
        assert not res.passed and "kaput" in res.detail
