import numpy as np
import pytest

from dmresponse.linalg import (
    inverse_sqrt_factor,
    sym_eigendecompose,
    symmetrize,
    trace_product,
)
from dmresponse.models import gapped_random_hamiltonian
from dmresponse.oracles import finite_difference_response, projector_derivative_exact
from dmresponse.response import (
    ResponsePair,
    dm_perturbation_forward,
    linear_response_value,
    observable_position_derivative,
    orthogonal_hamiltonian_derivative,
    susceptibility_backward,
    susceptibility_forward,
    z_position_derivative,
)

from conftest import (
    chain_observable_value,
    projector_builder,
    random_symmetric,
    three_atom_chain,
    three_atom_chain_tau,
)


class TestDmPerturbationForward:
    def test_commuting_perturbation_gives_zero(self):
        h0 = np.diag([0.0, 2.0])
        h1 = np.diag([0.3, 0.7])
        _, d1, _ = dm_perturbation_forward(h0, h1, 1)
        np.testing.assert_allclose(d1, np.zeros((2, 2)), atol=1e-12)

    def test_2x2_worked_case(self):
        h0 = np.diag([0.0, 2.0])
        h1 = np.array([[0.0, 1.0], [1.0, 0.0]])
        _, d1, _ = dm_perturbation_forward(h0, h1, 1)
        np.testing.assert_allclose(d1, np.array([[0.0, -0.5], [-0.5, 0.0]]), atol=1e-10)

    def test_matches_finite_difference(self, rng):
        n, n_occ = 40, 20
        h0 = gapped_random_hamiltonian(n, 0.8, n_occ, seed=21)
        h1 = random_symmetric(rng, n)
        _, d1, _ = dm_perturbation_forward(h0, h1, n_occ)
        fd = finite_difference_response(projector_builder(n_occ), h0, h1, h=1e-5)
        assert np.linalg.norm(d1 - fd) <= 1e-5

    def test_linearity_in_direction(self, rng):
        n, n_occ = 20, 10
        h0 = gapped_random_hamiltonian(n, 1.0, n_occ, seed=22)
        u = random_symmetric(rng, n)
        v = random_symmetric(rng, n)
        _, du, tr = dm_perturbation_forward(h0, u, n_occ)
        _, dv, _ = dm_perturbation_forward(h0, v, n_occ, trace=tr)
        _, dw, _ = dm_perturbation_forward(h0, 2.0 * u - 3.0 * v, n_occ, trace=tr)
        combo = 2.0 * du - 3.0 * dv
        assert np.linalg.norm(dw - combo) <= 1e-10 * max(1.0, np.linalg.norm(dw))

    def test_replay_uses_recorded_branches(self):
        n, n_occ = 24, 12
        h0 = gapped_random_hamiltonian(n, 0.9, n_occ, seed=23)
        d_ref, tr = __import__("dmresponse.sp2", fromlist=["sp2_ground_state"]).sp2_ground_state(
            h0, n_occ
        )
        d0, _, tr2 = dm_perturbation_forward(h0, np.eye(n), n_occ, trace=tr)
        assert tr2.sigmas == tr.sigmas
        assert np.array_equal(d0, d_ref)


class TestSusceptibilityForward:
    def test_commuting_observable_gives_zero(self):
        h0 = gapped_random_hamiltonian(12, 1.0, 6, seed=31)
        _, chi, _ = susceptibility_forward(h0, np.eye(12), 6)
        assert np.linalg.norm(chi) <= 1e-9 * 12
        # any polynomial of h0 commutes with it, so its susceptibility vanishes
        _, chi_p, _ = susceptibility_forward(h0, symmetrize(h0 @ h0 - 0.5 * h0), 6)
        assert np.linalg.norm(chi_p) <= 1e-8

    def test_2x2_worked_case(self):
        h0 = np.diag([0.0, 2.0])
        a = np.array([[0.0, 1.0], [1.0, 0.0]])
        _, chi, _ = susceptibility_forward(h0, a, 1)
        np.testing.assert_allclose(chi, np.array([[0.0, -0.5], [-0.5, 0.0]]), atol=1e-10)

    def test_duality_against_direct_route(self, rng):
        n, n_occ = 30, 15
        h0 = gapped_random_hamiltonian(n, 0.7, n_occ, seed=32)
        a = random_symmetric(rng, n)
        _, chi, tr = susceptibility_forward(h0, a, n_occ)
        for _ in range(5):
            h1 = random_symmetric(rng, n)
            _, d1, _ = dm_perturbation_forward(h0, h1, n_occ, trace=tr)
            direct = trace_product(a, d1)
            dual = trace_product(chi, h1)
            assert abs(direct - dual) <= 1e-10 * max(abs(direct), 1e-12)


class TestSusceptibilityBackward:
    def test_identity_observable_gives_zero(self):
        h0 = gapped_random_hamiltonian(14, 1.0, 7, seed=41)
        _, chi, _ = susceptibility_backward(h0, np.eye(14), 7)
        assert np.linalg.norm(chi) <= 1e-9 * 14

    def test_2x2_worked_case(self):
        h0 = np.diag([0.0, 2.0])
        a = np.array([[0.0, 1.0], [1.0, 0.0]])
        _, chi, _ = susceptibility_backward(h0, a, 1)
        np.testing.assert_allclose(chi, np.array([[0.0, -0.5], [-0.5, 0.0]]), atol=1e-10)

    def test_agrees_with_forward(self, rng):
        n, n_occ = 30, 14
        h0 = gapped_random_hamiltonian(n, 0.8, n_occ, seed=42)
        a = random_symmetric(rng, n)
        _, chi_f, _ = susceptibility_forward(h0, a, n_occ)
        _, chi_b, _ = susceptibility_backward(h0, a, n_occ)
        assert np.linalg.norm(chi_f - chi_b) <= 1e-9 * max(1.0, np.linalg.norm(chi_f))


class TestLinearResponseValue:
    def test_zero_observable(self, rng):
        n = 8
        h0 = gapped_random_hamiltonian(n, 1.0, 4, seed=51)
        h1 = random_symmetric(rng, n)
        d0, d1, _ = dm_perturbation_forward(h0, h1, 4)
        a0, a1_direct, a1_dual = linear_response_value(
            np.zeros((n, n)), h1, ResponsePair(d0=d0, d1=d1)
        )
        assert a0 == 0.0 and a1_direct == 0.0 and a1_dual is None

    def test_zero_perturbation(self, rng):
        n = 8
        h0 = gapped_random_hamiltonian(n, 1.0, 4, seed=52)
        a = random_symmetric(rng, n)
        d0, chi, _ = susceptibility_forward(h0, a, 4)
        _, a1_direct, a1_dual = linear_response_value(
            a, np.zeros((n, n)), ResponsePair(d0=d0, chi=chi)
        )
        assert a1_direct is None and a1_dual == 0.0

    def test_2x2_both_routes(self):
        h0 = np.diag([0.0, 2.0])
        w = np.array([[0.0, 1.0], [1.0, 0.0]])
        d0, d1, tr = dm_perturbation_forward(h0, w, 1)
        _, chi, _ = susceptibility_forward(h0, w, 1, trace=tr)
        a0, a1_direct, a1_dual = linear_response_value(w, w, ResponsePair(d0=d0, d1=d1, chi=chi))
        assert abs(a1_direct + 1.0) <= 1e-10
        assert abs(a1_dual + 1.0) <= 1e-10
        assert abs(a0) <= 1e-10

    def test_requires_some_first_order_object(self):
        with pytest.raises(ValueError, match="neither"):
            linear_response_value(np.eye(2), np.eye(2), ResponsePair(d0=np.eye(2)))


class TestZPositionDerivative:
    def test_zero_motion(self):
        z = np.eye(3)
        out = z_position_derivative(np.eye(3), np.zeros((3, 3)), z)
        np.testing.assert_allclose(out, np.zeros((3, 3)), atol=0)

    def test_identity_overlap(self, rng):
        t = random_symmetric(rng, 5)
        out = z_position_derivative(np.eye(5), t, np.eye(5))
        np.testing.assert_allclose(out, -0.5 * t, atol=1e-14)

    def test_near_identity_overlap_matches_loewdin_fd(self, rng):
        # The closed form is gauge-exact only as S -> I; for the symmetric
        # factor it acquires a commutator-sized discrepancy, so the overlap
        # is kept close to the identity and the tolerance loose.
        n = 10
        eps = 1e-5
        e = random_symmetric(rng, n)
        s = np.eye(n) + eps * e
        s_tau = random_symmetric(rng, n)
        z = inverse_sqrt_factor(s)
        out = z_position_derivative(np.linalg.inv(s), s_tau, z)
        h = 1e-6
        fd = (inverse_sqrt_factor(s + h * s_tau) - inverse_sqrt_factor(s - h * s_tau)) / (2 * h)
        assert np.max(np.abs(out - fd)) <= 1e-4


class TestOrthogonalHamiltonianDerivative:
    def test_identity_frame(self, rng):
        h = random_symmetric(rng, 6)
        h_tau = random_symmetric(rng, 6)
        out = orthogonal_hamiltonian_derivative(h, h_tau, np.eye(6), np.zeros((6, 6)))
        np.testing.assert_allclose(out, h_tau, atol=1e-14)

    def test_pure_frame_motion(self, rng):
        h = random_symmetric(rng, 6)
        t = random_symmetric(rng, 6)
        out = orthogonal_hamiltonian_derivative(h, np.zeros((6, 6)), np.eye(6), -0.5 * t)
        np.testing.assert_allclose(out, -0.5 * (t @ h + h @ t), atol=1e-13)

    def test_matches_finite_difference_chain(self, rng):
        n = 8
        h0 = random_symmetric(rng, n)
        h_tau = random_symmetric(rng, n)
        z0 = np.eye(n) + 0.05 * random_symmetric(rng, n)
        z_tau = rng.standard_normal((n, n)) * 0.3
        out = orthogonal_hamiltonian_derivative(h0, h_tau, z0, z_tau)
        h = 1e-6
        def transformed(t):
            z = z0 + t * z_tau
            return z.T @ (h0 + t * h_tau) @ z
        fd = (transformed(h) - transformed(-h)) / (2 * h)
        assert np.max(np.abs(out - fd)) <= 1e-4


class TestObservablePositionDerivative:
    def test_orthonormal_limit(self, rng):
        n = 5
        a = random_symmetric(rng, n)
        d = random_symmetric(rng, n)
        cross = 0.123
        out = observable_position_derivative(
            a, np.zeros((n, n)), d, np.eye(n), np.zeros((n, n)), cross_term=cross
        )
        assert np.isclose(out, cross)

    def test_all_derivatives_zero(self, rng):
        n = 4
        a = random_symmetric(rng, n)
        d = random_symmetric(rng, n)
        out = observable_position_derivative(
            a, np.zeros((n, n)), d, np.eye(n), np.zeros((n, n)), cross_term=0.0
        )
        assert out == 0.0

    def test_rejects_ambiguous_cross_term(self, rng):
        n = 3
        a = random_symmetric(rng, n)
        with pytest.raises(ValueError):
            observable_position_derivative(
                a, a, a, np.eye(n), a, cross_term=1.0, chi_perp=a, h_tau_perp=a
            )
        with pytest.raises(ValueError, match="supply either"):
            observable_position_derivative(a, a, a, np.eye(n), a)

    @pytest.mark.parametrize("k", [0, 1, 2])
    def test_matches_end_to_end_finite_difference(self, k):
        r0 = np.array([0.0, 1.1, 2.3])
        n_occ = 1
        s, h0, a = three_atom_chain(r0)
        s_tau, h_tau, a_tau = three_atom_chain_tau(r0, k)

        # analytic model derivatives cross-checked against the model itself
        hh = 1e-6
        for mat, tau in ((0, s_tau), (1, h_tau), (2, a_tau)):
            fd = (
                np.array(three_atom_chain(r0 + hh * np.eye(3)[k])[mat])
                - np.array(three_atom_chain(r0 - hh * np.eye(3)[k])[mat])
            ) / (2 * hh)
            assert np.max(np.abs(fd - tau)) < 1e-8

        z = inverse_sqrt_factor(s)
        s_inv = np.linalg.inv(s)
        h_perp = z.T @ h0 @ z
        a_perp = z.T @ a @ z
        d_perp = projector_builder(n_occ)(h_perp)
        d = z @ d_perp @ z.T

        _, chi_perp, _ = susceptibility_forward(symmetrize(h_perp), symmetrize(a_perp), n_occ)
        z_tau = z_position_derivative(s_inv, s_tau, z)
        h_tau_perp = orthogonal_hamiltonian_derivative(h0, h_tau, z, z_tau)
        total = observable_position_derivative(
            a, a_tau, d, s_inv, s_tau, chi_perp=chi_perp, h_tau_perp=h_tau_perp
        )

        h = 1e-5
        ek = np.eye(3)[k]
        fd_total = (
            chain_observable_value(r0 + h * ek, n_occ) - chain_observable_value(r0 - h * ek, n_occ)
        ) / (2 * h)
        assert abs(total - fd_total) <= 1e-6


def test_exact_projector_derivative_cross_checks(rng):
    n, n_occ = 40, 20
    h0 = gapped_random_hamiltonian(n, 0.9, n_occ, seed=61)
    direction = random_symmetric(rng, n)
    eig = sym_eigendecompose(h0)
    mu = 0.5 * (eig.values[n_occ - 1] + eig.values[n_occ])
    exact = projector_derivative_exact(eig, direction, mu)
    _, d1, _ = dm_perturbation_forward(h0, direction, n_occ)
    fd = finite_difference_response(projector_builder(n_occ), h0, direction, h=1e-5)
    assert np.linalg.norm(exact - fd) <= 1e-6
    assert np.linalg.norm(d1 - exact) <= 1e-7
