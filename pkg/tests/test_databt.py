"""Data-driven quantities from samples and the real-arithmetic reduction."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sodbt.databt import (
    F1,
    F2,
    build_bc,
    build_mdk_closed_form,
    build_real_bc,
    build_real_quantities,
    databt_reduce,
    relation_operands,
    relation_residual,
    real_block_residual,
    to_real,
)
from sodbt.evaluation import hinf_error_grid
from sodbt.gramians import bt_reduce, lyapunov_velocity_gramians, quad_gramian_factors
from sodbt.model import eval_transfer, eval_transfer_batch, resolvent_columns, resolvent_rows, synth_msd_chain
from sodbt.quadrature import P_SIDE, Q_SIDE, QuadratureRule, offset_rule_pair
from sodbt.sampling import FrequencySampleSet, sample_model

from conftest import random_system, scalar_system, system_from_dict


def brute_force(sys, samples, X):
    """phi_k rho_j zeta_j C G(i w_k) X G(i z_j) B, entry by entry."""
    z, rho = samples.p_rule.nodes, samples.p_rule.full_weights
    w, phi = samples.q_rule.nodes, samples.q_rule.full_weights
    right = resolvent_columns(sys, 1j * z) * (rho * z)
    left = resolvent_rows(sys, 1j * w) * phi[:, None]
    return left @ X @ right


def scalar_samples(w=2.0, z=0.5):
    p = QuadratureRule(P_SIDE, [z], [1.0])
    q = QuadratureRule(Q_SIDE, [w], [1.0])
    return sample_model(scalar_system(), p, q)


def max_rel(a, b):
    return np.abs(a - b).max() / np.abs(b).max()


class TestScalar:
    def test_b_real_sample(self):
        Bt, _ = build_bc(scalar_samples())
        np.testing.assert_allclose(Bt[:, 0], [-1 / 3, -1 / 3], atol=1e-16)

    def test_c_entry(self):
        _, Ct = build_bc(scalar_samples())
        assert Ct[0, 0] == pytest.approx(2 / 3, abs=1e-15)

    def test_closed_form_entries(self):
        q = build_mdk_closed_form(scalar_samples())
        assert q.Kt[0, 0] == pytest.approx(-2 / 9, abs=1e-15)
        assert q.Mt[0, 0] == pytest.approx(-2 / 9, abs=1e-15)

    def test_undamped_d_zero(self):
        q = build_mdk_closed_form(scalar_samples())
        assert not np.any(q.Dt)

    def test_real_b_block(self):
        BtR, _ = build_real_bc(scalar_samples())
        np.testing.assert_allclose(BtR[:, 0], [-np.sqrt(2) / 3, 0.0], atol=1e-16)


class TestClosedForm:
    def test_against_high_precision(self, frozen):
        case = frozen["loewner_n4"]
        s = system_from_dict(case["system"])
        p, q = offset_rule_pair(*case["band"], case["nu"])
        lq = build_mdk_closed_form(sample_model(s, p, q))
        for name, got in (("M", lq.Mt), ("D", lq.Dt), ("K", lq.Kt)):
            ref = np.array(case["entries"][name])
            ref = ref[..., 0] + 1j * ref[..., 1]
            assert max_rel(got, ref) <= 1e-12, name

    def test_n8_brute_force(self):
        s = random_system(8, n=8)
        p, q = offset_rule_pair(1e-2, 1e3, 12)
        samples = sample_model(s, p, q)
        lq = build_mdk_closed_form(samples)
        for X, got in ((s.M, lq.Mt), (s.D, lq.Dt), (s.K, lq.Kt)):
            assert max_rel(got, brute_force(s, samples, X)) <= 1e-10

    def test_b_c_reevaluation(self):
        s = random_system(9, n=8)
        p, q = offset_rule_pair(1e-2, 1e3, 6)
        Bt, Ct = build_bc(sample_model(s, p, q))
        h_q = np.array([eval_transfer(s, 1j * w) for w in q.nodes])
        h_p = np.array([eval_transfer(s, 1j * z) for z in p.nodes])
        np.testing.assert_allclose(Bt[:, 0], q.full_weights * h_q, rtol=1e-13)
        np.testing.assert_allclose(Ct[0], p.full_weights * p.nodes * h_p, rtol=1e-13)

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 10_000))
    def test_d_linearity(self, seed):
        s = random_system(seed, nmax=8)
        p, q = offset_rule_pair(1e-2, 1e3, 8)
        lq = build_mdk_closed_form(sample_model(s, p, q))
        expect = s.alpha * lq.Mt + s.beta * lq.Kt
        assert np.abs(lq.Dt - expect).max() <= 1e-13 * np.abs(expect).max()
        rq = to_real(lq)
        expect = s.alpha * rq.MtR + s.beta * rq.KtR
        assert np.abs(rq.DtR - expect).max() <= 1e-13 * np.abs(expect).max()


class TestLinearRelations:
    @pytest.mark.parametrize("seed", range(6))
    def test_exact_samples(self, seed):
        s = random_system(100 + seed)
        p, q = offset_rule_pair(1e-2, 1e3, 10)
        res1, res2 = relation_residual(build_mdk_closed_form(sample_model(s, p, q)))
        assert res1 <= 1e-10 and res2 <= 1e-10

    def test_perturbation_detected(self):
        s = random_system(3, n=6)
        p, q = offset_rule_pair(1e-2, 1e3, 10)
        lq = build_mdk_closed_form(sample_model(s, p, q))
        Kt = lq.Kt.copy()
        Kt[3, 4] += 1e-3
        lq.Kt = Kt
        assert min(relation_residual(lq)) >= 1e-4

    def test_zero_input(self):
        s = random_system(3, n=4)
        z = type(s)(s.M, s.D, s.K, np.zeros((4, 1)), s.C, damping=s.damping)
        p, q = offset_rule_pair(1e-2, 1e3, 5)
        lq = build_mdk_closed_form(sample_model(z, p, q))
        assert not np.any(lq.Mt) and not np.any(lq.Kt) and not np.any(lq.Bt)
        assert relation_residual(lq) == (0.0, 0.0)

    def test_operand_diagonals_imaginary(self):
        p, q = offset_rule_pair(1e-2, 1e3, 5)
        ops = relation_operands(sample_model(random_system(1), p, q))
        assert not np.any(ops.lam_p.real) and not np.any(ops.lam_q.real)


class TestReal:
    def setup_method(self):
        self.sys = random_system(21, n=8)
        p, q = offset_rule_pair(1e-2, 1e4, 16)
        self.samples = sample_model(self.sys, p, q)
        self.lq = build_mdk_closed_form(self.samples)
        self.rq = build_real_quantities(self.samples)

    def test_transform_constants_unitary(self):
        for F in (F1, F2):
            np.testing.assert_allclose(F @ F.conj().T, np.eye(2), atol=1e-15)

    def test_dense_transform_oracle(self):
        nq, np_ = self.samples.q_rule.nu, self.samples.p_rule.nu
        left = np.kron(np.eye(nq), F2)
        right = np.kron(np.eye(np_), F1.conj().T)
        for cplx, real in ((self.lq.Mt, self.rq.MtR), (self.lq.Dt, self.rq.DtR), (self.lq.Kt, self.rq.KtR)):
            t = left @ cplx @ right
            assert np.abs(t.imag).max() <= 1e-12 * np.abs(t).max()
            assert max_rel(t.real, real) <= 1e-10
        tb = left @ self.lq.Bt
        tc = self.lq.Ct @ right
        assert np.abs(tb.imag).max() <= 1e-12 * np.abs(tb).max()
        assert max_rel(tb.real, self.rq.BtR) <= 1e-10
        assert max_rel(tc.real, self.rq.CtR) <= 1e-10

    def test_reference_transform_agrees(self):
        ref = to_real(self.lq)
        assert ref.imag_residue <= 1e-12
        assert max_rel(ref.MtR, self.rq.MtR) <= 1e-12
        assert max_rel(ref.KtR, self.rq.KtR) <= 1e-12

    def test_singular_values_preserved(self):
        a = np.linalg.svd(self.lq.Mt, compute_uv=False)
        b = np.linalg.svd(self.rq.MtR, compute_uv=False)
        np.testing.assert_allclose(b, a, rtol=0, atol=1e-12 * a[0])

    def test_real_block_equations(self):
        r1, r2 = real_block_residual(self.samples, self.rq)
        assert r1 <= 1e-10 and r2 <= 1e-10

    def test_equals_realified_intrusive_product(self):
        f = quad_gramian_factors(self.sys, self.samples.p_rule, self.samples.q_rule)
        from sodbt.gramians import realify_factors
        g = realify_factors(f)
        assert max_rel(g.L.T @ self.sys.M @ g.U, self.rq.MtR) <= 1e-12


class TestReduce:
    def test_matches_quadrature_bt(self):
        """Data-BT from samples equals intrusive BT run on the same quadrature factors."""
        s = synth_msd_chain(12, stiffnesses=100.0, alpha=0.05, beta=0.05, input_node=6, jitter=0.2, seed=2)
        p, q = offset_rule_pair(1e-2, 1e4, 60)
        d = databt_reduce(sample_model(s, p, q), 6)
        b = bt_reduce(s, quad_gramian_factors(s, p, q), 6)
        np.testing.assert_allclose(d.singular_values[:10], b.singular_values[:10], rtol=1e-8)
        f = 1j * np.geomspace(1e-2, 1e4, 200)
        hd, hb = eval_transfer_batch(d, f), eval_transfer_batch(b, f)
        assert np.abs(hd - hb).max() <= 1e-8 * np.abs(hb).max()

    def test_structure(self):
        s = random_system(5, n=10)
        p, q = offset_rule_pair(1e-2, 1e4, 40)
        red = databt_reduce(sample_model(s, p, q), 5)
        np.testing.assert_array_equal(red.system.M, np.eye(5))
        Kr, Dr = red.system.K, red.system.D
        assert np.linalg.norm(Dr - (s.alpha * np.eye(5) + s.beta * Kr)) <= 1e-10 * np.linalg.norm(Dr)
        assert red.method == "Data-BT-SOPD" and red.info["nu_p"] == 40

    def test_denser_data_approaches_bt(self):
        s = synth_msd_chain(8, alpha=0.05, beta=0.05, input_node=4, jitter=0.2, seed=1)
        bt = hinf_error_grid(s, bt_reduce(s, lyapunov_velocity_gramians(s), 4), count=600).hinf_rel
        errs = []
        for nu in (25, 250):
            p, q = offset_rule_pair(1e-2, 1e4, nu)
            red = databt_reduce(sample_model(s, p, q), 4)
            assert red.r == 4 and not np.iscomplexobj(red.system.K)
            errs.append(hinf_error_grid(s, red, count=600).hinf_rel)
        assert errs[0] < 0.5  # visibly tracks the response
        assert errs[1] <= 1.2 * bt  # and approaches intrusive BT with denser data
        assert errs[1] < errs[0]

    def test_single_mode(self):
        s = scalar_system(m=1.0, d=0.3, k=2.0)
        s = type(s)(s.M, s.D, s.K, s.B, s.C, damping=(0.1, 0.1))
        p, q = offset_rule_pair(1e-2, 1e4, 64)
        red = databt_reduce(sample_model(s, p, q), 1)
        f = 1j * np.geomspace(1e-2, 1e4, 300)
        h, hr = eval_transfer_batch(s, f), eval_transfer_batch(red, f)
        assert np.max(np.abs(h - hr) / np.abs(h)) <= 1e-6

    def test_numpy_backend_same_model(self):
        s = random_system(5, n=6)
        p, q = offset_rule_pair(1e-2, 1e4, 20)
        samples = sample_model(s, p, q)
        a = databt_reduce(samples, 3, backend="numpy")
        b = databt_reduce(samples, 3)
        f = 1j * np.geomspace(1e-2, 1e4, 50)
        ha, hb = eval_transfer_batch(a, f), eval_transfer_batch(b, f)
        assert np.abs(ha - hb).max() <= 1e-10 * np.abs(hb).max()
