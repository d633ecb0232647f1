"""Second-order system container, transfer evaluation and model files."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sodbt.errors import DimensionMismatch, IndexOutOfRange, InvariantViolation, NegativeCoefficient, ParseError, SingularPencil
from sodbt.model import (
    SecondOrderSystem,
    benchmark_chain,
    build_proportional,
    chain_stiffness,
    eval_transfer,
    eval_transfer_batch,
    first_order_poles,
    format_model,
    is_stable,
    load_model,
    load_model_with_provenance,
    parse_model,
    save_model,
    synth_msd_chain,
    to_first_order,
)

from conftest import random_system, scalar_system, system_from_dict


class TestContainer:
    def test_singular_mass_rejected(self):
        with pytest.raises(InvariantViolation):
            SecondOrderSystem(np.zeros((1, 1)), np.zeros((1, 1)), np.eye(1), np.ones((1, 1)), np.ones((1, 1)))

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatch):
            SecondOrderSystem(np.eye(2), np.zeros((2, 2)), np.eye(3), np.ones((2, 1)), np.ones((1, 2)))

    def test_damping_invariant_enforced(self):
        with pytest.raises(InvariantViolation):
            SecondOrderSystem(np.eye(2), np.eye(2), np.eye(2), np.ones((2, 1)), np.ones((1, 2)), damping=(0.5, 0.1))

    def test_arrays_are_read_only(self):
        s = scalar_system()
        with pytest.raises(ValueError):
            s.K[0, 0] = 3.0

    def test_vector_inputs_reshaped(self):
        s = SecondOrderSystem(np.eye(2), np.zeros((2, 2)), np.eye(2), np.array([1.0, 0.0]), np.array([0.0, 1.0]))
        assert s.B.shape == (2, 1) and s.C.shape == (1, 2)


class TestTransfer:
    def test_scalar_static_gain(self):
        assert eval_transfer(scalar_system(), 0) == pytest.approx(1.0, abs=1e-15)

    def test_scalar_at_2i(self):
        assert eval_transfer(scalar_system(), 2j) == pytest.approx(-1 / 3, abs=1e-15)

    def test_n8_against_high_precision(self, frozen):
        case = frozen["transfer_n8"]
        s = system_from_dict(case["system"])
        h = eval_transfer(s, complex(*case["s"]))
        ref = complex(*case["H"])
        assert abs(h - ref) <= 1e-12 * abs(ref)

    def test_n8_against_dense_solve(self):
        s = random_system(3, n=8)
        x = np.linalg.solve(-1.69 * s.M + 1.3j * s.D + s.K, s.B[:, 0])
        assert eval_transfer(s, 1.3j) == pytest.approx(complex(s.C[0] @ x), rel=1e-12)

    def test_batch_scalar(self):
        vals = eval_transfer_batch(scalar_system(), [0, 2j, -2j])
        np.testing.assert_allclose(vals, [1, -1 / 3, -1 / 3], atol=1e-15)

    def test_batch_empty(self):
        assert eval_transfer_batch(scalar_system(), []).size == 0

    def test_batch_matches_singles(self):
        s = random_system(5, n=8)
        rng = np.random.default_rng(0)
        nodes = 1j * rng.uniform(0.01, 10, 16)
        batch = eval_transfer_batch(s, nodes)
        singles = [eval_transfer(s, z) for z in nodes]
        np.testing.assert_allclose(batch, singles, rtol=1e-14)

    def test_pole_raises_singular_pencil(self):
        with pytest.raises(SingularPencil):
            eval_transfer(scalar_system(), 1j)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000), st.floats(1e-2, 1e3))
    def test_conjugate_symmetry(self, seed, w):
        s = random_system(seed, nmax=6)
        a, b = eval_transfer(s, 1j * w), eval_transfer(s, -1j * w)
        assert abs(a - np.conj(b)) <= 1e-13 * abs(a)


class TestFirstOrder:
    def test_scalar_layout(self):
        fo = to_first_order(scalar_system(d=0.2))
        np.testing.assert_array_equal(fo.E, np.eye(2))
        np.testing.assert_array_equal(fo.A, [[0, 1], [-1, -0.2]])
        np.testing.assert_array_equal(fo.Bf, [[0], [1]])
        np.testing.assert_array_equal(fo.Cf, [[1, 0]])

    def test_n8_equivalence_at_07i(self):
        s = random_system(8, n=8)
        assert to_first_order(s).transfer(0.7j) == pytest.approx(eval_transfer(s, 0.7j), rel=1e-12)

    def test_zero_input(self):
        s = scalar_system(b=0.0, d=0.3)
        assert to_first_order(s).transfer(0.9j) == 0
        assert eval_transfer(s, 0.9j) == 0

    def test_realization_equivalence_random_nodes(self):
        s = random_system(12, n=10)
        fo = to_first_order(s)
        for w in np.random.default_rng(1).uniform(0.01, 20, 20):
            h = eval_transfer(s, 1j * w)
            assert abs(h - fo.transfer(1j * w)) <= 1e-10 * (1 + abs(h))


class TestConstructors:
    def test_build_proportional_diag(self):
        s = build_proportional(np.eye(2), np.diag([1.0, 4.0]), np.ones((2, 1)), np.ones((1, 2)), 0.05, 0.05)
        np.testing.assert_allclose(s.D, np.diag([0.1, 0.25]), atol=1e-16)

    def test_build_proportional_undamped(self):
        s = build_proportional(np.eye(2), np.diag([1.0, 4.0]), np.ones((2, 1)), np.ones((1, 2)), 0.0, 0.0)
        assert not s.D.any()

    def test_negative_coefficient(self):
        with pytest.raises(NegativeCoefficient):
            build_proportional(np.eye(2), np.eye(2), np.ones((2, 1)), np.ones((1, 2)), -0.1, 0.0)

    def test_example_one_coefficients(self):
        s = synth_msd_chain(8, alpha=0.05, beta=0.05)
        assert (s.alpha, s.beta) == (0.05, 0.05)
        np.testing.assert_allclose(s.D, 0.05 * s.M + 0.05 * s.K, atol=1e-15)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000))
    def test_proportional_closure(self, seed):
        s = random_system(seed)
        assert np.linalg.norm(s.D - (s.alpha * s.M + s.beta * s.K)) <= 1e-12 * (np.linalg.norm(s.D) + 1)

    def test_single_mass(self):
        s = synth_msd_chain(1)
        assert s.M.tolist() == [[1.0]] and s.K.tolist() == [[1.0]] and s.D.tolist() == [[0.0]]

    def test_three_mass_chain(self):
        np.testing.assert_array_equal(synth_msd_chain(3).K, [[2, -1, 0], [-1, 2, -1], [0, -1, 2]])

    def test_chain_stiffness_graded(self):
        np.testing.assert_array_equal(chain_stiffness([1.0, 2.0, 3.0]), [[3, -2], [-2, 5]])

    def test_node_out_of_range(self):
        with pytest.raises(IndexOutOfRange):
            synth_msd_chain(4, input_node=4)

    def test_chain50_stable_dense_eigs(self):
        s = synth_msd_chain(50, alpha=0.05, beta=0.05)
        fo = to_first_order(s)
        ev = np.linalg.eigvals(np.linalg.solve(fo.E, fo.A))
        assert ev.real.max() < 0
        assert is_stable(s)

    def test_benchmark_chain_stable(self):
        assert first_order_poles(benchmark_chain()).real.max() < 0

    def test_undamped_not_stable(self):
        assert not is_stable(synth_msd_chain(3))

    def test_jitter_is_seeded(self):
        a = synth_msd_chain(6, jitter=0.3, seed=4)
        b = synth_msd_chain(6, jitter=0.3, seed=4)
        assert a == b
        assert not synth_msd_chain(6, jitter=0.3, seed=5) == a


class TestModelFile:
    def test_round_trip(self, tmp_path):
        s = synth_msd_chain(3, alpha=0.05, beta=0.05)
        save_model(s, tmp_path / "m.som")
        assert load_model(tmp_path / "m.som") == s

    def test_round_trip_jittered_exact(self, tmp_path):
        s = synth_msd_chain(7, alpha=0.01, beta=0.02, jitter=0.3, seed=9)
        save_model(s, tmp_path / "m.som")
        t = load_model(tmp_path / "m.som")
        for k in "MDKBC":
            np.testing.assert_array_equal(getattr(s, k), getattr(t, k))

    def test_undamped_header(self):
        s = SecondOrderSystem(np.eye(1), np.ones((1, 1)), np.eye(1), np.ones((1, 1)), np.ones((1, 1)))
        text = format_model(s)
        assert text.startswith("so-model v1 n=1 alpha=none beta=none")
        assert parse_model(text)[0].damping is None

    def test_malformed_dimension(self):
        with pytest.raises(ParseError):
            parse_model("so-model v1 n=two alpha=0 beta=0\n")

    def test_bad_magic(self):
        with pytest.raises(ParseError):
            parse_model("so-samples v1 n=1 alpha=0 beta=0\n")

    def test_damping_mismatch(self):
        text = format_model(synth_msd_chain(2, alpha=0.1, beta=0.1)).replace("alpha=0.10000000000000001", "alpha=0.5")
        with pytest.raises(InvariantViolation):
            parse_model(text)

    def test_block_shape(self):
        text = format_model(synth_msd_chain(2)).replace("B:\n1\n0\n", "B:\n1\n")
        with pytest.raises(DimensionMismatch):
            parse_model(text)

    def test_provenance_comment(self, tmp_path):
        s = synth_msd_chain(2, alpha=0.1, beta=0.1)
        (tmp_path / "m.som").write_text(format_model(s, "method=test r=2"))
        _, prov = load_model_with_provenance(tmp_path / "m.som")
        assert prov == {"method": "test", "r": "2"}

    def test_unstable_load_warns(self, tmp_path):
        save_model(synth_msd_chain(2), tmp_path / "u.som")
        with pytest.warns(RuntimeWarning):
            load_model(tmp_path / "u.som")
