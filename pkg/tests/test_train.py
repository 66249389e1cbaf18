import numpy as np
import pytest

from invariant_pde.grid import Field, GridSpec, Trajectory, square_grid, trajectory_from_arrays
from invariant_pde.rollout import RolloutConfig
from invariant_pde.symnet import Atom, CandidateTerm, NetConfig, init_params, zero_params
from invariant_pde.train import (
    AdamState,
    DiscoveredPDE,
    TrainConfig,
    Window,
    extract_pde,
    flatten_params,
    grad_loss,
    loss,
    optimizer_step,
    readout_mask,
    sample_windows,
    train_model,
    unflatten_params,
    _loss_and_grad_vec,
    _pipeline_loss,
)


def random_trajectory(spec, n_comp, n_snap, seed=0, dt=0.01, scale=0.5):
    rng = np.random.default_rng(seed)
    snaps = tuple(
        Field(spec, tuple(scale * rng.standard_normal(spec.shape) for _ in range(n_comp)))
        for _ in range(n_snap)
    )
    return Trajectory(spec=spec, dt=dt, snapshots=snaps)


class TestLoss:
    def setup_method(self):
        self.spec = GridSpec(8, 8, 0.5, 0.5)
        self.cfg = NetConfig(kind="baseline", n=1, k=1, ndim=2, max_deriv=2)
        self.nets = [zero_params(self.cfg)]

    def test_identical_trajectories_zero(self):
        t = random_trajectory(self.spec, 1, 3)
        assert loss(t, t, self.nets, self.cfg, l1_weight=0.0) == 0.0

    def test_unit_offset_gives_one(self):
        t = random_trajectory(self.spec, 1, 3)
        shifted = trajectory_from_arrays(
            self.spec, t.dt, [t.component_stack(0) + 1.0]
        )
        assert loss(shifted, t, self.nets, self.cfg, l1_weight=0.0) == pytest.approx(1.0)

    def test_l1_arithmetic(self):
        # single-point analogue: mse 4 plus 0.1 * |3|
        p = zero_params(self.cfg)
        p.out_w = np.zeros(self.cfg.readout_width)
        p.out_w[0] = 3.0
        base = random_trajectory(self.spec, 1, 1)
        off = trajectory_from_arrays(self.spec, base.dt, [base.component_stack(0) + 2.0])
        val = loss(off, base, [p], self.cfg, l1_weight=0.1)
        assert val == pytest.approx(4.0 + 0.3)

    def test_shape_mismatch_rejected(self):
        a = random_trajectory(self.spec, 1, 3)
        b = random_trajectory(self.spec, 1, 4)
        with pytest.raises(ValueError):
            loss(a, b, self.nets, self.cfg, 0.0)


class TestGradLoss:
    def _windows(self, cfg, scheme, seed=0):
        spec = GridSpec(8, 8, 0.5, 0.6)
        traj = random_trajectory(spec, cfg.n, 6, seed=seed)
        rng = np.random.default_rng(seed)
        return spec, traj, sample_windows([traj], 3, scheme, 2, rng)

    @pytest.mark.parametrize("kind,scheme", [
        ("baseline", "first"),
        ("galileo", "first"),
        ("lorentz", "second"),
        ("galileo", "second"),
    ])
    def test_matches_finite_differences(self, kind, scheme):
        cfg = NetConfig(kind=kind, n=1, k=2, ndim=2, max_deriv=3)
        spec, traj, wins = self._windows(cfg, scheme, seed=3)
        rng = np.random.default_rng(17)
        nets = [init_params(cfg, rng)]
        vec = flatten_params(nets, cfg)
        rcfg = RolloutConfig(dt=traj.dt, n_blocks=3, scheme=scheme)
        total, mse, l1v, grad = _loss_and_grad_vec(vec, wins, cfg, rcfg, 1e-4, 1)
        h = 1e-6
        floor = 1e-8 * (1.0 + abs(total))
        for i in range(0, vec.size, 7):  # sampled entries keep the test quick
            vp = vec.copy(); vp[i] += h
            vm = vec.copy(); vm[i] -= h
            lp, _, _ = _pipeline_loss(unflatten_params(vp, cfg, 1), wins, cfg, rcfg, 1e-4)
            lm, _, _ = _pipeline_loss(unflatten_params(vm, cfg, 1), wins, cfg, rcfg, 1e-4)
            fd = (lp - lm) / (2 * h)
            assert abs(grad[i] - fd) <= 1e-4 * max(abs(grad[i]), abs(fd)) + floor

    def test_zero_params_zero_data_zero_gradient(self):
        cfg = NetConfig(kind="galileo", n=1, k=1, ndim=2, max_deriv=2)
        spec = GridSpec(8, 8, 0.5, 0.5)
        zeros = np.zeros((5,) + spec.shape)
        traj = trajectory_from_arrays(spec, 0.01, [zeros])
        wins = sample_windows([traj], 2, "first", 2, np.random.default_rng(0))
        nets = [zero_params(cfg)]
        total, grads = grad_loss(nets, wins, cfg, RolloutConfig(dt=0.01, n_blocks=2), 0.0)
        assert total == 0.0
        flat = flatten_params(grads, cfg)
        assert np.all(flat == 0.0)

    def test_l1_subgradient_sign(self):
        cfg = NetConfig(kind="baseline", n=1, k=1, ndim=2, max_deriv=2)
        spec = GridSpec(8, 8, 0.5, 0.5)
        zeros = np.zeros((4,) + spec.shape)
        traj = trajectory_from_arrays(spec, 0.01, [zeros])
        wins = sample_windows([traj], 2, "first", 1, np.random.default_rng(0))
        p = zero_params(cfg)
        p.out_w = np.zeros(cfg.readout_width)
        p.out_w[0] = 0.5  # positive readout weight; zero data keeps mse grad 0
        total, grads = grad_loss([p], wins, cfg, RolloutConfig(dt=0.01, n_blocks=2), 0.25)
        assert grads[0].out_w[0] == pytest.approx(0.25)

    def test_grad_shape_matches_params(self):
        cfg = NetConfig(kind="galileo", n=2, k=2, ndim=2, max_deriv=3)
        spec, traj, wins = self._windows(cfg, "first", seed=5)
        rng = np.random.default_rng(2)
        from dataclasses import replace
        nets = [init_params(replace(cfg, equation_index=c), rng) for c in range(2)]
        total, grads = grad_loss(nets, wins, cfg, RolloutConfig(dt=traj.dt, n_blocks=2), 1e-5)
        assert len(grads) == 2
        assert grads[0].out_w.shape == (cfg.readout_width,)
        assert grads[0].eta_w.shape == (len(cfg.layout.eta),)


class TestOptimizer:
    def test_zero_gradient_keeps_params(self):
        vec = np.array([1.0, -2.0, 3.0])
        state = AdamState.zeros(3)
        out, state = optimizer_step(vec, np.zeros(3), state, 0.1)
        assert np.array_equal(out, vec)

    def test_first_step_magnitude(self):
        vec = np.zeros(4)
        g = np.array([0.5, -3.0, 1e-3, 2.0])
        out, _ = optimizer_step(vec, g, AdamState.zeros(4), learning_rate=0.01)
        # bias-corrected first step is lr * sign(g) up to epsilon
        assert np.allclose(out, -0.01 * np.sign(g), atol=1e-5)

    def test_second_identical_step_not_larger(self):
        vec = np.zeros(2)
        g = np.array([1.0, -0.2])
        v1, st = optimizer_step(vec, g, AdamState.zeros(2), 0.05)
        v2, _ = optimizer_step(v1, g, st, 0.05)
        assert np.all(np.abs(v2 - v1) <= np.abs(v1 - vec) + 1e-12)

    def test_deterministic(self):
        g = np.array([0.3, 0.7])
        a1, s1 = optimizer_step(np.zeros(2), g, AdamState.zeros(2), 0.01)
        a2, s2 = optimizer_step(np.zeros(2), g, AdamState.zeros(2), 0.01)
        assert np.array_equal(a1, a2) and s1.t == s2.t


class TestTrainModel:
    def test_epoch_precondition(self):
        with pytest.raises(ValueError):
            TrainConfig(epochs=0)

    def test_determinism_bitwise(self):
        spec = GridSpec(8, 8, 0.5, 0.5)
        traj = random_trajectory(spec, 1, 8, seed=1, scale=0.1)
        cfg = NetConfig(kind="baseline", n=1, k=1, ndim=2, max_deriv=2)
        tc = TrainConfig(epochs=20, learning_rate=1e-3, l1_weight=1e-5, n_blocks=2,
                         batch_size=2, seed=9)
        r1 = train_model(cfg, tc, traj, scheme="first")
        r2 = train_model(cfg, tc, traj, scheme="first")
        assert r1.history == r2.history
        assert np.array_equal(flatten_params(r1.nets, cfg), flatten_params(r2.nets, cfg))

    def test_loss_trend_downward(self):
        spec = GridSpec(8, 8, 0.5, 0.5)
        # data from a pure decay u_{t+1} = 0.99 u_t is learnable as a linear term
        rng = np.random.default_rng(3)
        base = 0.5 * rng.standard_normal(spec.shape)
        stack = np.stack([base * 0.99**k for k in range(10)])
        traj = trajectory_from_arrays(spec, 0.01, [stack])
        cfg = NetConfig(kind="baseline", n=1, k=1, ndim=2, max_deriv=2)
        tc = TrainConfig(epochs=120, learning_rate=5e-3, l1_weight=0.0, n_blocks=2,
                         batch_size=4, seed=0)
        res = train_model(cfg, tc, traj, scheme="first")
        losses = [h[1] for h in res.history]
        tail = np.median(losses[-12:])
        head = np.median(losses[:12])
        assert tail < head

    def test_data_window_precondition(self):
        spec = GridSpec(8, 8, 0.5, 0.5)
        traj = random_trajectory(spec, 1, 3, seed=1)
        cfg = NetConfig(kind="baseline", n=1, k=1, ndim=2, max_deriv=2)
        tc = TrainConfig(epochs=5, n_blocks=4, batch_size=1)
        with pytest.raises(ValueError):
            train_model(cfg, tc, traj, scheme="first")

    def test_hard_threshold_freezes_readout(self):
        spec = GridSpec(8, 8, 0.5, 0.5)
        traj = random_trajectory(spec, 1, 8, seed=2, scale=0.05)
        cfg = NetConfig(kind="baseline", n=1, k=1, ndim=2, max_deriv=2)
        tc = TrainConfig(epochs=30, learning_rate=1e-4, l1_weight=0.0, n_blocks=2,
                         batch_size=2, seed=4, hard_threshold=1e6, threshold_epoch=10)
        res = train_model(cfg, tc, traj, scheme="first")
        # absurd threshold zeroes every readout weight at epoch 10 and they stay zero
        vec = flatten_params(res.nets, cfg)
        mask = readout_mask(cfg, 1)
        assert np.all(vec[mask] == 0.0)

    def test_heat_coefficient_recovery(self):
        # single-term diffusion: the recovered u_xx coefficient lands within
        # ten percent of the generating value
        from invariant_pde.solvers import BurgersSpec, solve_burgers2d

        g = square_grid(16)
        x, _ = g.coords()
        ic = Field(g, (0.8 * np.sin(x), np.zeros(g.shape)))
        spec = BurgersSpec(nu=0.05, grid=g, t_end=1.0, solver_dt=0.005, save_every=10)
        traj = solve_burgers2d(spec, ic, advect=False)
        traj1 = trajectory_from_arrays(g, traj.dt, [traj.component_stack(0)])
        cfg = NetConfig(kind="galileo", n=1, k=1, ndim=2, max_deriv=3)
        tc = TrainConfig(epochs=1200, learning_rate=1e-2, l1_weight=1e-6, n_blocks=4,
                         batch_size=8, seed=1)
        res = train_model(cfg, tc, traj1, scheme="first")
        pde = extract_pde(res.nets, cfg, 1e-6)
        target = CandidateTerm((Atom("deriv", 0, dx=2, dy=0),))
        got = pde.terms[0].get(target, 0.0)
        assert abs(got - 0.05) <= 0.1 * 0.05


class TestExtractPde:
    def test_threshold_counting(self):
        pde = DiscoveredPDE(
            terms=({CandidateTerm((Atom("deriv", 0, 2, 0),)): 0.5,
                    CandidateTerm((Atom("deriv", 0, 1, 0),)): 1e-7},),
            report_threshold=1e-6,
        )
        assert pde.remaining_count == 1

    def test_zero_network_empty(self):
        cfg = NetConfig(kind="baseline", n=1, k=1, ndim=2, max_deriv=2)
        pde = extract_pde([zero_params(cfg)], cfg, 1e-6)
        assert pde.remaining_count == 0

    def test_json_dict_structure(self):
        cfg = NetConfig(kind="lorentz", n=1, k=1, ndim=1)
        p = zero_params(cfg)
        p.out_w = np.array([0.5, 0.0, 0.0, 10.0, 0.0])
        pde = extract_pde([p], cfg, 1e-6)
        doc = pde.to_json_dict()
        assert doc["components"]["u"] == {"sin(u)": 10.0, "u_xx": 0.5}
        assert doc["remaining_count"] == 2
