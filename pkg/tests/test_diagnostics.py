import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from jcnl import diagnostics as dg
from jcnl.experiment import preset_config
from jcnl.model import generate_synthetic, scenario_from_truth
from jcnl.network import Network, NetworkState
from jcnl.operators import Directions, Multipliers, NodeLocalVector
from jcnl.oracle import build_dense_network, project_XY_dense

from helpers import random_scenario, random_state


def _net(seed, **kw):
    rng = np.random.default_rng(seed)
    scn = random_scenario(rng, **kw)
    return rng, scn, Network.from_scenario(scn)


class TestRMSE:
    def test_hand_value(self):
        truth = np.zeros((3, 2))
        est = np.array([[0.3, 0.4], [0.0, 0.0], [9.0, 9.0]])
        assert math.isclose(dg.rmse_sensor(est, truth, [2]), math.sqrt(0.25 / 2))

    def test_exact_and_permutation(self, rng):
        truth = rng.random((5, 2))
        est = truth + rng.normal(size=(5, 2)) * 0.1
        assert dg.rmse_sensor(truth, truth, [0]) == 0
        perm = [0, 3, 1, 4, 2]
        assert math.isclose(dg.rmse_sensor(est, truth, [0]), dg.rmse_sensor(est[perm], truth[perm], [0]))

    def test_errors(self):
        with pytest.raises(dg.NoGroundTruth):
            dg.rmse_sensor(np.zeros((2, 2)), None, [0])
        with pytest.raises(dg.AllAnchors):
            dg.rmse_sensor(np.zeros((2, 2)), np.zeros((2, 2)), [0, 1])
        with pytest.raises(dg.NoGroundTruth):
            dg.rmse_target(np.zeros((2, 2)), None)

    def test_target_two_nodes(self):
        # squared errors 1 and 4 averaged over both nodes
        y = np.array([[1.0, 0.0], [0.0, 2.0]])
        assert math.isclose(dg.rmse_target(y, [0.0, 0.0]), math.sqrt(2.5))
        assert dg.rmse_target(y[::-1], [0, 0]) == dg.rmse_target(y, [0, 0])
        assert dg.rmse_target(np.ones((3, 2)), [1, 1]) == 0


class TestResidualMetrics:
    def test_zero_state(self):
        _, _, net = _net(0)
        zero = NetworkState(
            NodeLocalVector.zeros(net.layout, 2), Directions.zeros(net.layout, 2), Multipliers.zeros(net.layout, 2)
        )
        assert dg.stationarity_S(net, zero) == 0
        assert dg.potential(net, zero, zero, 0.3, 0.3, 10, 10) == 0
        assert dg.kkt_residuals(net, zero, zero, 0.3, 0.3) == (0.0, 0.0, 0.0)

    def test_w_gap(self):
        _, _, net = _net(1)
        a = Directions.zeros(net.layout, 2)
        b = a.copy()
        b.v[0] = [0.3, -0.4]
        assert dg.update_gap_W(a, a) == 0
        assert math.isclose(dg.update_gap_W(a, b), 0.25)
        assert dg.update_gap_W(b, a) == dg.update_gap_W(a, b)

    def test_consensus_state_feasible(self, rng):
        _, scn, net = _net(2)
        z = dg.consensus_vector(net, rng.random((scn.num_nodes, 2)), rng.random(2))
        assert dg.feasibility_P(z) == 0
        assert dg.consensus_gap(net, z) == 0

    def test_dense_match(self):
        rng, scn, net = _net(3, num_nodes=4, num_anchors=2, sigma=0.05)
        state, prev = random_state(rng, net), random_state(rng, net)
        M = build_dense_network(scn.graph, 2, 0.7, net.d_half, net.ranges)
        z, w, lam = state.z.flat(), state.w.flat(), state.lam.flat()
        grad = M.H.T @ (M.H @ z - M.D @ w) + M.A.T @ lam
        assert math.isclose(dg.stationarity_S(net, state), grad @ grad, rel_tol=1e-12)
        az = M.A @ z
        assert math.isclose(dg.feasibility_P(state.z), az @ az, rel_tol=1e-12)
        proj = project_XY_dense(z - grad, scn.anchor_positions, scn.graph, 2)
        dw = w - prev.w.flat()
        G_ref = (z - proj) @ (z - proj) + az @ az + dw @ dw
        assert abs(dg.optimality_gap_G(net, state, prev.w) - G_ref) <= 1e-10 * max(1, G_ref)
        c, rho, k1, k2 = 0.7, 2.0, 30.0, 40.0
        dz = z - prev.z.flat()
        azp = M.A @ prev.z.flat()
        hz = M.H @ z
        lag = 0.5 * hz @ hz - (M.D @ w) @ hz + lam @ az + 0.5 * c * az @ az
        pot_ref = lag + 0.5 * c * (k1 * az @ az + k2 * azp @ azp + rho / (2 * c) * dw @ dw + (k1 + k2) * dz @ M.cBtB @ dz / c)
        assert math.isclose(dg.potential(net, state, prev, c, rho, k1, k2), pot_ref, rel_tol=1e-10)

    def test_gap_dominates_feasibility(self):
        rng, _, net = _net(4)
        state, prev = random_state(rng, net), random_state(rng, net)
        assert dg.optimality_gap_G(net, state, prev.w) >= dg.feasibility_P(state.z)

    def test_gap_vanishes_at_exact_optimum(self):
        _, scn, net = _net(5, num_nodes=6, num_anchors=2)
        z = dg.consensus_vector(net, scn.true_positions, scn.true_target)
        w = dg.optimal_directions(net, scn.true_positions, scn.true_target)
        state = NetworkState(z, w, Multipliers.zeros(net.layout, 2))
        assert dg.optimality_gap_G(net, state, w) <= 1e-10

    def test_kkt_relations(self):
        rng, _, net = _net(6)
        state, prev = random_state(rng, net), random_state(rng, net)
        eta1, eta2, feas = dg.kkt_residuals(net, state, prev, 0.4, 1.7)
        assert math.isclose(eta2, 1.7 * math.sqrt(dg.update_gap_W(state.w, prev.w)))
        assert eta1 >= 0 and feas >= 0
        assert dg.kkt_residuals(net, state, state, 0.4, 1.7) == (0.0, 0.0, pytest.approx(feas))

    def test_potential_rejects_infeasible_w(self):
        rng, _, net = _net(7)
        state = random_state(rng, net, feasible_w=False)
        state.w.v[0] = [3.0, 0.0]
        with pytest.raises(dg.InfeasibleW):
            dg.potential(net, state, state, 1, 1, 1, 1)


class TestThresholds:
    def _graph(self):
        # star with a four-neighbor hub
        scn = scenario_from_truth(np.random.default_rng(0).random((5, 2)), np.zeros(2), [0], [(0, k) for k in range(1, 5)])
        return scn

    def test_kappa1_example(self):
        scn = self._graph()
        rep = dg.parameter_thresholds(scn.graph, scn, 2, 0.11)
        assert rep.N_max == 4
        assert math.isclose(rep.kappa1_min, 6 * 10 * (1 + 1 / 0.11))
        assert round(rep.kappa1_min, 2) == 605.45

    def test_large_c_limit(self):
        scn = self._graph()
        rep = dg.parameter_thresholds(scn.graph, scn, 2, 1e9)
        assert math.isclose(rep.kappa1_min, 6 * 10, rel_tol=1e-8)

    def test_supplied_kappas_drive_dependents(self):
        scn = self._graph()
        base = dg.parameter_thresholds(scn.graph, scn, 2, 0.5)
        bigger = dg.parameter_thresholds(scn.graph, scn, 2, 0.5, kappa1=2 * base.kappa1_min)
        assert math.isclose(bigger.kappa2_min, 2 * base.kappa2_min)
        assert math.isclose(base.rho_min, 4 * scn.d_max**2 * (base.kappa1_min + base.kappa2_min))
        assert bigger.satisfied == {"kappa1": True}

    def test_experiment_parameters_outside_sufficient_region(self):
        scn = generate_synthetic(preset_config("synthetic-100", seed=0))
        rep = dg.parameter_thresholds(scn.graph, scn, 2, 0.11, rho=0.11)
        assert rep.satisfied["rho"] is False
        assert rep.rho_min > 1e3

    def test_rejects_nonpositive_c(self):
        scn = self._graph()
        with pytest.raises(ValueError):
            dg.parameter_thresholds(scn.graph, scn, 2, 0.0)


class TestObjective:
    def test_truth_is_zero_and_hand_value(self):
        scn = scenario_from_truth(np.array([[0.0, 0.0], [3.0, 4.0]]), np.zeros(2), [0], [(0, 1)])
        assert dg.original_objective(scn.true_positions, scn.true_target, scn) == 0
        # edge (4 - 5)^2 plus half of the second node's range miss (4 - 5)^2
        assert math.isclose(dg.original_objective([[0, 0], [0, 4]], [0, 0], scn), 1.5)

    @given(st.integers(0, 2**31 - 1))
    def test_equivalence_with_split_form(self, seed):
        rng, scn, net = _net(seed, sigma=0.1)
        x, y = rng.normal(size=(scn.num_nodes, 2)), rng.normal(size=2)
        z = dg.consensus_vector(net, x, y)
        w = dg.optimal_directions(net, x, y)
        const = 0.5 * ((net.d_half**2).sum() + (net.ranges**2).sum())
        lhs = dg.original_objective(x, y, scn)
        rhs = dg.smooth_value(net, z, w) + const
        assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))
        # any other feasible direction does no better
        other = random_state(rng, net).w
        assert dg.smooth_value(net, z, other) >= dg.smooth_value(net, z, w) - 1e-12

    @given(st.integers(0, 2**31 - 1))
    def test_gradients_match_finite_differences(self, seed):
        from jcnl.oracle import finite_diff_grad

        rng, scn, net = _net(seed, num_nodes=4, sigma=0.05)
        state = random_state(rng, net)
        z, w = state.z, state.w
        f_z = lambda flat: dg.smooth_value(net, NodeLocalVector.from_flat(flat, net.layout, 2), w)
        num = finite_diff_grad(f_z, z.flat())
        ana = dg.grad_z(net, z, w).flat()
        assert np.abs(num - ana).max() <= 1e-6 * max(1.0, np.abs(ana).max())
        f_v = lambda v: dg.smooth_value(net, z, Directions(v, w.u, net.layout))
        f_u = lambda u: dg.smooth_value(net, z, Directions(w.v, u, net.layout))
        gw = dg.grad_w(net, z)
        assert np.abs(finite_diff_grad(f_v, w.v) - gw.v).max() <= 1e-6 * max(1.0, np.abs(gw.v).max())
        assert np.abs(finite_diff_grad(f_u, w.u) - gw.u).max() <= 1e-6 * max(1.0, np.abs(gw.u).max())
