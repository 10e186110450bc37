import numpy as np
import pytest

from helpers import finite_difference_check, tiny_mdp
from slicejam import attacks as A
from slicejam.netmodel import dbm_to_mw

TTI_S = 142.9e-6


def report(busy, legit=None):
    busy = np.asarray(busy, dtype=bool)
    return A.SensingReport(np.zeros((busy.size, 135)), np.repeat(busy[:, None], 15, axis=1), busy, -72.45)


def obs(busy, legit=None, t=0):
    busy = np.asarray(busy, dtype=bool)
    legit = np.where(busy, 10.0, 0.0) if legit is None else np.asarray(legit, float)
    return A.JammerObservation(t, report(busy), legit)


def ctx(budget=1e9, **kw):
    return A.JammerContext(e_theta=-72.45, energy_budget=budget, **kw)


class TestCjaPower:
    def test_examples(self):
        assert A.cja_power([1, 1], 4) == pytest.approx(1.0)
        assert A.cja_power([0, 0, 0], 3) == 0.0
        assert A.cja_power([3, 4], 2) == pytest.approx(24.5)

    def test_zero_rbs(self):
        with pytest.raises(ValueError):
            A.cja_power([1.0], 0)


class TestThresholds:
    @pytest.mark.parametrize("b,expected", [(1, -75.0), (10, -65.0), (20, -61.99)])
    def test_t_max(self, b, expected):
        assert A.t_max(b) == pytest.approx(expected, abs=5e-3)

    def test_t_max_domain(self):
        with pytest.raises(ValueError):
            A.t_max(0)

    def test_detection_threshold(self):
        assert A.detection_threshold(-75, -52) == -65
        assert A.detection_threshold(-75, -70) == -70
        assert A.detection_threshold(-75, -65) == -65


class TestSenseSlot:
    def test_all_below(self):
        assert A.sense_slot(np.full(9, -90.0), -70) == "idle"

    def test_exactly_four_below(self):
        assert A.sense_slot([-90] * 4 + [-50] * 5, -70) == "idle"

    def test_three_below(self):
        assert A.sense_slot([-90] * 3 + [-50] * 6, -70) == "busy"

    def test_short_trace(self):
        with pytest.raises(ValueError):
            A.sense_slot(np.full(5, -90.0), -70)


class TestSensing:
    def test_slot_count(self):
        assert A.slots_per_tti(142.9) == 15
        rep = A.sense_tti(np.zeros(13), -72.45, np.random.default_rng(0), noise_mw=1e-11)
        assert rep.n_slots == 15 and rep.slot_busy.shape == (13, 15)

    def test_vacant_rbs_idle(self):
        rng = np.random.default_rng(1)
        noise = float(dbm_to_mw(-174 + 5 + 10 * np.log10(0.18e6)))
        for _ in range(200):
            rep = A.sense_tti(np.zeros(13), -72.45, rng, noise_mw=noise)
            assert not rep.busy.any()

    def test_state_bits(self):
        c = ctx()
        rep = A.sense_tti(np.zeros(13), -72.45, np.random.default_rng(0), noise_mw=1e-12)
        assert np.all(A.drlja_state(rep, c)[:13] == 0)
        rx = np.zeros(13)
        rx[4] = float(dbm_to_mw(-40.0))
        rep = A.sense_tti(rx, -72.45, np.random.default_rng(0), noise_mw=1e-12)
        st = A.drlja_state(rep, c)
        assert st[4] == 1 and st[:4].sum() + st[5:13].sum() == 0
        assert st[-1] == pytest.approx(1.0)


class TestDrljaReward:
    def test_best(self):
        assert A.drlja_reward(0.0, 0.0) == 0.0

    def test_monotone(self):
        assert A.drlja_reward(2.0, 0.5) < A.drlja_reward(1.0, 0.5)

    def test_value(self):
        assert A.drlja_reward(2.0, 1.0, 0.5, 0.5) == pytest.approx(-1.5)

    def test_negative_energy(self):
        with pytest.raises(ValueError):
            A.drlja_reward(1.0, -1.0)


class TestPolicyValue:
    def test_absorbing(self):
        P = np.ones((1, 1, 1))
        assert A.policy_value(P, np.ones((1, 1)), [0], 0.9)[0, 0] == pytest.approx(10.0)

    def test_gamma_zero(self):
        P, R = tiny_mdp(0)
        assert np.allclose(A.policy_value(P, R, np.zeros(4, int), 0.0), R)

    def test_gamma_one(self):
        P, R = tiny_mdp(0)
        with pytest.raises(ValueError):
            A.policy_value(P, R, np.zeros(4, int), 1.0)

    def test_monte_carlo(self):
        P, R = tiny_mdp(7)
        rng = np.random.default_rng(7)
        pi = rng.dirichlet(np.ones(3), size=4)
        gamma = 0.9
        q = A.policy_value(P, R, pi, gamma)
        n = 1_000_000
        s0 = rng.integers(4, size=n)
        a0 = rng.integers(3, size=n)
        s, a = s0.copy(), a0.copy()
        ret = np.zeros(n)
        disc = 1.0
        cP = P.cumsum(axis=2)
        cpi = pi.cumsum(axis=1)
        for _ in range(160):
            ret += disc * R[s, a]
            disc *= gamma
            s = np.minimum((rng.random(n)[:, None] > cP[s, a]).sum(axis=1), 3)
            a = np.minimum((rng.random(n)[:, None] > cpi[s]).sum(axis=1), 2)
        est = np.zeros((4, 3))
        np.add.at(est, (s0, a0), ret)
        est /= np.bincount(s0 * 3 + a0, minlength=12).reshape(4, 3)
        assert np.max(np.abs(est - q) / q) < 0.01


class TestLedger:
    def test_conservation_over_run(self):
        c = ctx(budget=50.0)
        j = A.ConstantJammer(c, 13, TTI_S, np.random.default_rng(0), sense_ttis=2)
        busy = np.zeros(13, bool)
        busy[2:6] = True
        total = 0
        for t in range(2000):
            act = j.act(obs(busy, t=t))
            total += act.energy_nj
            assert c.budget_nj == c.spent_nj + c.remaining_nj
            assert c.remaining_nj >= 0
        assert c.spent_nj == total
        assert c.remaining_nj < jam_cost(j)

    def test_zero_budget(self):
        c = ctx(budget=0.0)
        j = A.DRLJammer(c, 13, TTI_S, np.random.default_rng(0), epsilon=1.0)
        for t in range(50):
            assert not j.act(obs(np.ones(13), t=t)).jammed.any()
            j.feedback(A.JammerOutcome(np.ones(13, bool), np.ones(13), np.ones(13)))

    def test_debit_guard(self):
        c = ctx(budget=1.0)
        with pytest.raises(ValueError):
            c.debit(c.remaining_nj + 1)

    def test_exact_energy(self):
        assert A.jam_energy_nj([100.0], 1, TTI_S) == round(100.0 * TTI_S * 1e6)


def jam_cost(j):
    return A.jam_energy_nj(np.where(j.window, j.power, 0.0), 1, TTI_S)


class TestConstantJammer:
    def make(self, **kw):
        return A.ConstantJammer(ctx(), 13, TTI_S, np.random.default_rng(0), sense_ttis=5, **kw)

    def test_constant_power(self):
        j = self.make()
        busy = np.zeros(13, bool)
        busy[5:8] = True
        acts = [j.act(obs(busy, t=t)) for t in range(40)]
        live = np.array([a.powers_mw for a in acts[5:]])
        assert np.all(live == live[0])
        assert live[0].sum() > 0

    def test_window_covers_busy_rbs(self):
        j = self.make()
        busy = np.zeros(13, bool)
        busy[8:11] = True
        for t in range(5):
            j.act(obs(busy, t=t))
        assert j.locked and np.all(j.window[8:11])

    def test_power_capped(self):
        j = self.make()
        for t in range(5):
            j.act(obs(np.ones(13), legit=np.full(13, 1e6), t=t))
        assert j.power == pytest.approx(j.p_max)


class TestRandomJammer:
    def test_subset_size_uniform(self):
        j = A.RandomJammer(ctx(), 13, TTI_S, np.random.default_rng(3), sense_ttis=1)
        j.act(obs(np.ones(13)))
        sizes = np.array([j.target_rbs().sum() for _ in range(100_000)])
        freq = np.bincount(sizes, minlength=14) / sizes.size
        assert np.all(np.abs(freq - 1 / 14) < 0.01)

    def test_same_seed(self):
        def run():
            j = A.RandomJammer(ctx(), 13, TTI_S, np.random.default_rng(5), sense_ttis=1)
            return [tuple(j.act(obs(np.ones(13), t=t)).jammed) for t in range(100)]
        assert run() == run()

    def test_window_scope(self):
        j = A.RandomJammer(ctx(), 13, TTI_S, np.random.default_rng(3), sense_ttis=1, scope="window")
        busy = np.zeros(13, bool)
        busy[0:4] = True
        j.act(obs(busy))
        for _ in range(200):
            assert not (j.target_rbs() & ~j.window).any()

    def test_bad_scope(self):
        with pytest.raises(ValueError):
            A.RandomJammer(ctx(), 13, TTI_S, np.random.default_rng(0), scope="cell")


class TestDrlJammer:
    def test_never_jams_idle_estimates(self):
        j = A.DRLJammer(ctx(), 13, TTI_S, np.random.default_rng(0), epsilon=1.0)
        rng = np.random.default_rng(1)
        for t in range(300):
            busy = rng.random(13) < 0.4
            act = j.act(obs(busy, t=t))
            assert not (act.jammed & ~busy).any()
            j.feedback(A.JammerOutcome(busy, np.where(busy, 10.0, 0), np.where(busy & ~act.jammed, 10.0, 0.01)))

    def test_learns_static_victim(self):
        c = ctx(omega1=0.8, omega2=0.2)
        j = A.DRLJammer(c, 13, TTI_S, np.random.default_rng(2))
        alloc = np.zeros(13, bool)
        alloc[3:7] = True
        before = np.where(alloc, 10.0, 0.0)
        for t in range(1500):
            act = j.act(obs(alloc, t=t))
            after = np.where(act.jammed, 0.01, before)
            j.feedback(A.JammerOutcome(alloc, before, after))
        j.epsilon = 0.0
        act = j.act(obs(alloc, t=1500))
        assert np.array_equal(act.jammed, alloc)

    def test_action_count(self):
        j = A.DRLJammer(ctx(), 13, TTI_S, np.random.default_rng(0))
        assert j.n_actions == 13
        assert not j.plan(np.ones(13, bool), 0).any()


class TestFnnJammer:
    def test_not_ready(self):
        j = A.FNNJammer(ctx(), 13, TTI_S, np.random.default_rng(0))
        assert A.fnn_jammer_step(j, [np.zeros(13)] * 9) is None
        assert not j.act(obs(np.ones(13))).jammed.any()

    def test_learns_fixed_rb(self):
        j = A.FNNJammer(ctx(), 13, TTI_S, np.random.default_rng(0))
        busy = np.zeros(13, bool)
        busy[3] = True
        for t in range(300):
            j.act(obs(busy, t=t))
        p = j.net.forward(np.concatenate(j.hist))[0]
        assert p[3] > 0.9
        assert A.fnn_jammer_step(j, list(j.hist)) == 3

    def test_architecture(self):
        j = A.FNNJammer(ctx(), 13, TTI_S, np.random.default_rng(0))
        assert j.net.sizes == [130, 50, 50, 13]
        w = np.concatenate([v.ravel() for v in j.net.params.values()])
        assert w.min() >= -1.0 and w.max() <= 1.0

    def test_gradient(self):
        rng = np.random.default_rng(4)
        j = A.FNNJammer(ctx(), 13, TTI_S, rng)
        x = rng.random(130)
        t = np.eye(13)[5]
        _, g = j.net.loss_and_grad(x, t)
        assert finite_difference_check(j.net.params, lambda: j.net.loss(x, t), g, rng) < 1e-4


def test_make_jammer_rejects_unknown():
    with pytest.raises(ValueError):
        A.make_jammer("DRLJA", ctx(), 13, TTI_S, np.random.default_rng(0))
