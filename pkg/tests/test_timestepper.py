import numpy as np
import pytest
import scipy.sparse as sp

from phsg import timestepper
from phsg.models import parametrize
from phsg.pce_basis import ChaosBasis, QuadratureRule, tensor_gauss_rule
from phsg.ph_core import LTISystem, hamiltonian, to_lti
from phsg.sg_assembly import assemble_sg, io_restrict, lift_input
from phsg.timestepper import (
    NodeIVPError,
    StepSizeError,
    chirp,
    hamiltonian_trace,
    passivity_margin,
    sampled_expected_hamiltonian,
    sg_output_statistics,
    simulate,
)

OSC = LTISystem(None, [[0.0, 1.0], [-1.0, 0.0]], np.zeros((2, 1)), np.eye(2))


def oscillator_error(res, T):
    return np.max(np.abs(res.x[-1] - [np.cos(T), -np.sin(T)]))


def fixed_step_errors(T=10.0, steps=(20, 40, 80, 160)):
    # huge tolerances accept every step, so the step size stays at T / N
    errs = []
    for N in steps:
        h = T / N
        res = simulate(OSC, x0=[1.0, 0.0], t_span=(0, T), rtol=1e6, atol=1e6, first_step=h, max_step=h)
        assert res.stats["n_steps"] == N and res.stats["n_rejected"] == 0
        errs.append(oscillator_error(res, T))
    return np.array(steps), np.array(errs)


class TestChirp:
    def test_values(self):
        assert chirp(0.0) == 0.0
        assert chirp(np.sqrt(np.pi / 2)) == pytest.approx(1.0, rel=1e-15)
        assert abs(chirp(np.sqrt(np.pi))) < 1e-15


class TestSimulate:
    def test_exponential(self):
        res = simulate(LTISystem(None, [[-1.0]], [[0.0]], [[1.0]]), x0=[1.0])
        assert res.t[0] == 0.0 and res.x[0, 0] == 1.0
        assert res.x[-1, 0] == pytest.approx(np.exp(-1.0), rel=1e-7)
        assert np.all(np.diff(res.t) > 0)

    def test_mass_scaling(self):
        a = simulate(LTISystem(None, [[-1.0]], [[0.0]], [[1.0]]), x0=[1.0], t_eval=np.linspace(0, 1, 11))
        b = simulate(LTISystem(2 * np.eye(1), [[-2.0]], [[0.0]], [[1.0]]), x0=[1.0], t_eval=np.linspace(0, 1, 11))
        np.testing.assert_allclose(a.x, b.x, rtol=1e-14)

    def test_fixed_step_order(self):
        steps, errs = fixed_step_errors()
        slope = -np.polyfit(np.log(steps), np.log(errs), 1)[0]
        assert slope >= 4.0

    def test_adaptive_tolerance_proportionality(self):
        errs = []
        for tol in (1e-6, 1e-8, 1e-10):
            errs.append(oscillator_error(simulate(OSC, x0=[1, 0], t_span=(0, 10), rtol=tol, atol=tol), 10))
        assert errs[0] > errs[1] > errs[2]
        assert errs[2] < 1e-8

    def test_dense_output(self):
        t = np.linspace(0, 10, 101)
        res = simulate(OSC, x0=[1.0, 0.0], t_span=(0, 10), t_eval=t, rtol=1e-10, atol=1e-12)
        np.testing.assert_array_equal(res.t, t)
        np.testing.assert_allclose(res.x[:, 0], np.cos(t), atol=1e-8)
        np.testing.assert_allclose(res.y, res.x, atol=0)

    @pytest.mark.parametrize("dense_limit", [2000, 1])
    def test_mass_matrix_invariance(self, dense_limit, monkeypatch, rng):
        monkeypatch.setattr(timestepper, "DENSE_LIMIT", dense_limit)
        n = 5
        G = rng.standard_normal((n, n))
        E = G @ G.T + n * np.eye(n)
        K = rng.standard_normal((n, n))
        A = -np.eye(n) + (K - K.T)
        B = rng.standard_normal((n, 1))
        C = rng.standard_normal((1, n))
        t = np.linspace(0, 5, 51)
        desc = LTISystem(sp.csr_matrix(E), sp.csr_matrix(A), B, C)
        std = LTISystem(None, np.linalg.solve(E, A), np.linalg.solve(E, B), C)
        a = simulate(desc, chirp, t_span=(0, 5), t_eval=t)
        b = simulate(std, chirp, t_span=(0, 5), t_eval=t)
        scale = np.max(np.abs(b.x))
        assert np.max(np.abs(a.x - b.x)) <= 1e-6 * scale

    def test_zero_solution(self):
        res = simulate(to_lti(parametrize("motor", 1).mean_system()), t_span=(0, 2))
        assert np.max(np.abs(res.x)) == 0.0

    def test_step_observer(self):
        res = simulate(OSC, x0=[1, 0], t_span=(0, 1), t_eval=[0.5, 1.0], step_observer=lambda t, x: x[0])
        assert res.step_t.size == res.stats["n_steps"] + 1
        np.testing.assert_allclose(res.step_values[:, 0], np.cos(res.step_t), atol=1e-8)

    def test_stats(self):
        st = simulate(OSC, x0=[1, 0], t_span=(0, 1)).stats
        assert set(st) == {"n_steps", "n_rejected", "n_rhs", "h_min", "h_max"}
        assert 0 < st["h_min"] <= st["h_max"]

    def test_step_underflow(self):
        sys = LTISystem(None, [[-1.0]], [[1.0]], [[1.0]])
        with pytest.raises(StepSizeError) as info:
            simulate(sys, lambda t: np.nan if t > 0.5 else 0.0, t_span=(0, 1))
        assert 0.4 < info.value.t <= 0.5

    @pytest.mark.parametrize("kwargs", [
        {"rtol": 0.0}, {"atol": -1.0}, {"t_span": (1.0, 0.0)}, {"x0": [1.0, 2.0, 3.0]},
        {"t_eval": [0.5, 0.2]}, {"t_eval": [0.0, 2.0]},
    ])
    def test_invalid_arguments(self, kwargs):
        with pytest.raises(ValueError):
            simulate(OSC, **kwargs)

    def test_wrong_input_width(self):
        with pytest.raises(ValueError):
            simulate(OSC, lambda t: [1.0, 2.0])

    def test_requires_lti(self):
        with pytest.raises(TypeError):
            simulate(np.eye(2))


def motor_sg(degree=1, variation=1):
    psys = parametrize("motor", variation).image_transform()
    return psys, assemble_sg(psys, ChaosBasis(5, degree))


class TestStatistics:
    def test_deterministic_std_zero(self):
        # degree-0 part only: all higher modes of a deterministic SG solution stay zero
        base = to_lti(parametrize("motor", 1).mean_system())
        s = 3
        A = sp.kron(sp.identity(s), base.A)
        big = LTISystem(None, A, np.kron(np.eye(s), base.B)[:, :1], np.kron(np.eye(s), base.C))
        res = simulate(big, chirp, t_span=(0, 2))
        mean, std = sg_output_statistics(res, s)
        assert np.all(std == 0.0)
        assert np.max(np.abs(mean)) > 0

    def test_single_mode(self):
        Y = np.zeros((1, 3))
        Y[0, 1] = -2.5
        mean, std = sg_output_statistics(Y, 3)
        assert mean[0, 0] == 0.0 and std[0, 0] == 2.5

    def test_dimension(self):
        with pytest.raises(ValueError):
            sg_output_statistics(np.zeros((1, 5)), 3)


class TestHamiltonianTrace:
    def test_zero(self):
        _, sg = motor_sg()
        res = simulate(sg.to_lti(), t_span=(0, 0.1))
        assert np.all(hamiltonian_trace(res, sg) == 0.0)

    def test_free_decay(self, rng):
        _, sg = motor_sg()
        res = simulate(sg.to_lti(), x0=rng.standard_normal(sg.dim), t_span=(0, 0.5))
        H = hamiltonian_trace(res, sg)
        assert np.all(np.diff(H) <= 1e-10 * H[0])

    def test_passivity_chirp(self):
        _, sg = motor_sg()
        lti = io_restrict(sg, "SIMO")
        u = lift_input(chirp, 1)
        t = np.linspace(0, 5, 2001)
        res = simulate(lti, chirp, t_span=(0, 5), t_eval=t,
                       step_observer=lambda tk, x: [0.5 * x @ (sg.E @ x), x @ lti.C[0] * chirp(tk)])
        H, supply = res.step_values[:, 0], res.step_values[:, 1]
        assert passivity_margin(res.step_t, H, supply) <= 1e-6 * np.max(H)
        assert u(1.0)[0] == chirp(1.0)


class TestExpectedHamiltonian:
    def test_single_node_at_mean(self):
        psys = parametrize("motor", 1)
        rule = QuadratureRule(psys.box, psys.box.center[None, :], np.array([1.0]), None, 1)
        t = np.linspace(0, 1, 21)
        res = simulate(to_lti(psys.mean_system()), chirp, t_span=(0, 1), t_eval=t)
        ref = hamiltonian(psys.mean_system(), res.x)
        np.testing.assert_allclose(sampled_expected_hamiltonian(psys, rule, chirp, t), ref, rtol=1e-12)

    def test_batched_matches_separate(self):
        psys = parametrize("motor", 10)
        box = psys.box
        rule = tensor_gauss_rule(box, 2)
        t = np.linspace(0, 2, 41)
        a = sampled_expected_hamiltonian(psys, rule, chirp, t)
        b = sampled_expected_hamiltonian(psys, rule, chirp, t, batched=False)
        np.testing.assert_allclose(a, b, rtol=1e-5, atol=1e-8 * np.max(b))

    def test_node_failure(self):
        psys = parametrize("motor", 1)
        rule = tensor_gauss_rule(psys.box, 1)
        with pytest.raises(NodeIVPError) as info:
            sampled_expected_hamiltonian(psys, rule, lambda t: np.nan if t > 0.5 else 0.0, np.linspace(0, 1, 5))
        assert info.value.node == 0
