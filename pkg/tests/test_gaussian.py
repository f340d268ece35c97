import numpy as np
import numpy.testing as npt
import pytest

from uotcone.cone import ConeProblem, ConeState, integrate_cone, scaled_base
from uotcone.errors import MassError, SingularSystemError, SpdError, SymmetryError
from uotcone.gaussian import (AffineGaussian, GaussianCotangentState,
                              base_metric_eval, connect_affine, geodesic_rhs,
                              group_metric_eval, hamiltonian, integrate_geodesic,
                              legendre_momentum, lyapunov_solve, mccann_geodesic,
                              shoot_bvp, spd_base, submersion_consistency,
                              symmetrize)
from uotcone.trace import mass_acceleration, mass_quadratic_fit, \
    relative_energy_drift


def random_spd(rng, n, lam_min=0.5, lam_max=2.0):
    Q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    lam = rng.uniform(lam_min, lam_max, size=n)
    return symmetrize(Q @ np.diag(lam) @ Q.T)


def random_sym(rng, n, scale=1.0):
    M = rng.normal(scale=scale, size=(n, n))
    return symmetrize(M)


def polar_mass_curve(m0, m1, gap, t):
    """Exact mass along the conical geodesic when the base motion covers a
    flat-coordinate gap: straight chord in the plane with radius 2 sqrt(m)
    and angle gap/2."""
    t = np.asarray(t, dtype=float)
    phi = 0.5 * gap
    return (1.0 - t) ** 2 * m0 + t**2 * m1 \
        + 2.0 * t * (1.0 - t) * np.sqrt(m0 * m1) * np.cos(phi)


def polar_scalar_covariance_curve(sigma0, sigma1, m0, m1, t):
    """Exact n=1 covariance path: angle of the chord in the flat plane,
    unfolded back through u = sqrt(V) = 2 * angle offset."""
    t = np.asarray(t, dtype=float)
    u0, u1 = np.sqrt(sigma0), np.sqrt(sigma1)
    phi = 0.5 * (u1 - u0)
    x = (1.0 - t) * 2.0 * np.sqrt(m0) + t * 2.0 * np.sqrt(m1) * np.cos(phi)
    y = t * 2.0 * np.sqrt(m1) * np.sin(phi)
    return (u0 + 2.0 * np.arctan2(y, x)) ** 2


# -- lyapunov_solve -----------------------------------------------------------

def test_lyapunov_identity_case():
    S = lyapunov_solve(np.eye(2), np.diag([2.0, 4.0]))
    npt.assert_allclose(S, np.diag([1.0, 2.0]), atol=1e-14)


def test_lyapunov_diagonal_example():
    V = np.diag([1.0, 3.0])
    X = np.array([[2.0, 4.0], [4.0, 12.0]])
    S = lyapunov_solve(V, X)
    npt.assert_allclose(S, [[1.0, 1.0], [1.0, 2.0]], atol=1e-14)
    npt.assert_allclose(S @ V + V @ S, X, atol=1e-13)


def test_lyapunov_scalar():
    npt.assert_allclose(lyapunov_solve(np.array([[2.0]]), np.array([[8.0]])),
                        [[2.0]], atol=1e-14)


def test_lyapunov_residual_random():
    rng = np.random.default_rng(7)
    for _ in range(25):
        n = rng.integers(1, 9)
        V = random_spd(rng, n)
        X = random_sym(rng, n)
        S = lyapunov_solve(V, X)
        res = np.linalg.norm(S @ V + V @ S - X)
        assert res <= 1e-12 * max(np.linalg.norm(X), 1e-30)


def test_lyapunov_rejects_bad_inputs():
    with pytest.raises(SpdError):
        lyapunov_solve(np.diag([1.0, -1.0]), np.eye(2))
    with pytest.raises(SymmetryError):
        lyapunov_solve(np.eye(2), np.array([[0.0, 1.0], [0.0, 0.0]]))


# -- metric evaluations -------------------------------------------------------

def test_group_metric_zero_vector():
    assert group_metric_eval(np.eye(2), 1.5, np.zeros((2, 2)), 0.0, np.eye(2)) == 0.0


def test_group_metric_scalar_examples():
    one = np.array([[1.0]])
    assert group_metric_eval(one, 1.0, np.array([[2.0]]), 0.0, one) == pytest.approx(4.0)
    assert group_metric_eval(one, 4.0, np.array([[0.0]]), 2.0, one) == pytest.approx(1.0)


def test_group_metric_rejects_singular_A():
    with pytest.raises(SingularSystemError):
        group_metric_eval(np.zeros((2, 2)), 1.0, np.eye(2), 0.0, np.eye(2))
    with pytest.raises(MassError):
        group_metric_eval(np.eye(2), -1.0, np.eye(2), 0.0, np.eye(2))


def test_base_metric_examples():
    one = np.array([[1.0]])
    assert base_metric_eval(one, 1.0, np.zeros((1, 1)), 0.0) == 0.0
    assert base_metric_eval(one, 1.0, np.array([[2.0]]), 0.0) == pytest.approx(1.0)
    assert base_metric_eval(one, 2.0, np.zeros((1, 1)), 3.0) == pytest.approx(18.0)


def test_legendre_momentum_examples():
    one = np.array([[1.0]])
    npt.assert_allclose(legendre_momentum(one, 2.0, np.zeros((1, 1))), 0.0)
    npt.assert_allclose(legendre_momentum(one, 2.0, np.array([[2.0]])), [[1.0]])
    npt.assert_allclose(legendre_momentum(np.eye(2), 2.0, 2.0 * np.eye(2)),
                        np.eye(2), atol=1e-14)


# -- hamiltonian and canonical flow -------------------------------------------

def scalar_state(V=1.0, m=1.0, P=1.0, xi=0.0):
    return GaussianCotangentState(V=np.array([[V]]), m=m, P=np.array([[P]]), xi=xi)


def test_hamiltonian_examples():
    assert hamiltonian(scalar_state(P=0.0, xi=0.0)) == 0.0
    assert hamiltonian(scalar_state()) == pytest.approx(2.0)
    assert hamiltonian(scalar_state(P=0.0, m=3.0, xi=2.0)) == pytest.approx(6.0)


def test_hamiltonian_is_half_metric_of_reconstructed_velocity():
    rng = np.random.default_rng(3)
    for _ in range(10):
        n = rng.integers(1, 5)
        V = random_spd(rng, n)
        P = random_sym(rng, n)
        m = rng.uniform(0.5, 2.0)
        xi = rng.uniform(-1.0, 1.0)
        state = GaussianCotangentState(V=V, m=m, P=P, xi=xi)
        X = (2.0 / m) * (P @ V + V @ P)
        assert hamiltonian(state) == pytest.approx(
            0.5 * base_metric_eval(V, m, X, xi), rel=1e-12)


def test_hamiltonian_lower_bound_and_equality():
    rng = np.random.default_rng(4)
    for _ in range(50):
        n = rng.integers(1, 5)
        state = GaussianCotangentState(V=random_spd(rng, n),
                                       m=rng.uniform(0.2, 3.0),
                                       P=random_sym(rng, n),
                                       xi=rng.uniform(-2.0, 2.0))
        assert hamiltonian(state) >= 0.5 * state.m * state.xi**2
    zero_p = GaussianCotangentState(V=random_spd(rng, 3), m=1.3,
                                    P=np.zeros((3, 3)), xi=0.7)
    assert hamiltonian(zero_p) == 0.5 * 1.3 * 0.7**2


def test_geodesic_rhs_trivial_and_radial():
    dV, dm, dP, dxi = geodesic_rhs(scalar_state(P=0.0, xi=0.0))
    npt.assert_allclose(dV, 0.0)
    assert dm == 0.0 and dxi == 0.0
    dV, dm, dP, dxi = geodesic_rhs(scalar_state(P=0.0, xi=2.0))
    assert dm == pytest.approx(2.0)
    assert dxi == pytest.approx(-2.0)
    npt.assert_allclose(dV, 0.0)
    npt.assert_allclose(dP, 0.0)


def test_geodesic_rhs_scalar_example():
    state = scalar_state()  # V=1, m=1, P=1, xi=0
    dV, dm, dP, dxi = geodesic_rhs(state)
    assert dV[0, 0] == pytest.approx(4.0)
    assert dm == 0.0
    assert dP[0, 0] == pytest.approx(-2.0)
    assert dxi == pytest.approx(2.0)
    # mddot = dxi*m + xi*dm must equal H
    assert dxi * state.m + state.xi * dm == pytest.approx(hamiltonian(state))


def test_geodesic_rhs_is_canonical_flow_of_hamiltonian():
    rng = np.random.default_rng(11)
    eps = 1e-6
    for _ in range(5):
        n = rng.integers(1, 5)
        V = random_spd(rng, n)
        P = random_sym(rng, n, scale=0.5)
        m = rng.uniform(0.5, 2.0)
        xi = rng.uniform(-1.0, 1.0)
        state = GaussianCotangentState(V=V, m=m, P=P, xi=xi)
        dV, dm, dP, dxi = geodesic_rhs(state)

        Z = random_sym(rng, n)
        hp = hamiltonian(GaussianCotangentState(V=V, m=m, P=P + eps * Z, xi=xi))
        hm = hamiltonian(GaussianCotangentState(V=V, m=m, P=P - eps * Z, xi=xi))
        assert (hp - hm) / (2 * eps) == pytest.approx(np.sum(dV * Z), abs=1e-6)

        W = random_sym(rng, n)
        hp = hamiltonian(GaussianCotangentState(V=V + eps * W, m=m, P=P, xi=xi))
        hm = hamiltonian(GaussianCotangentState(V=V - eps * W, m=m, P=P, xi=xi))
        assert (hp - hm) / (2 * eps) == pytest.approx(-np.sum(dP * W), abs=1e-6)

        hp = hamiltonian(GaussianCotangentState(V=V, m=m + eps, P=P, xi=xi))
        hm = hamiltonian(GaussianCotangentState(V=V, m=m - eps, P=P, xi=xi))
        assert (hp - hm) / (2 * eps) == pytest.approx(-dxi, abs=1e-6)

        hp = hamiltonian(GaussianCotangentState(V=V, m=m, P=P, xi=xi + eps))
        hm = hamiltonian(GaussianCotangentState(V=V, m=m, P=P, xi=xi - eps))
        assert (hp - hm) / (2 * eps) == pytest.approx(dm, abs=1e-6)


# -- integration --------------------------------------------------------------

def test_integrate_zero_momentum_constant():
    trace = integrate_geodesic(scalar_state(P=0.0, xi=0.0), dt=1e-2, steps=50)
    npt.assert_allclose(trace.column("m"), 1.0)
    npt.assert_allclose(trace.column("V_0_0"), 1.0)


def test_integrate_radial_closed_form():
    # P = 0, xi0 = 2, m0 = 1: m(t) = (1+t)^2, xi(t) = 2/(1+t)
    trace = integrate_geodesic(scalar_state(P=0.0, xi=2.0), dt=1e-3, steps=1000)
    t = trace.t
    assert abs(trace.column("m")[-1] - 4.0) <= 1e-8
    npt.assert_allclose(trace.column("m"), (1.0 + t) ** 2, atol=1e-8)
    npt.assert_allclose(trace.column("xi"), 2.0 / (1.0 + t), atol=1e-8)


def test_integrate_conserves_hamiltonian_random():
    rng = np.random.default_rng(5)
    for _ in range(4):
        n = rng.integers(1, 5)
        state = GaussianCotangentState(V=random_spd(rng, n),
                                       m=rng.uniform(0.5, 2.0),
                                       P=random_sym(rng, n, scale=0.3),
                                       xi=rng.uniform(-0.8, 0.8))
        trace = integrate_geodesic(state, dt=1e-3, steps=1000)
        assert relative_energy_drift(trace) <= 1e-8


def test_mass_is_quadratic_with_leading_coefficient_H_over_2():
    rng = np.random.default_rng(6)
    state = GaussianCotangentState(V=random_spd(rng, 3), m=1.2,
                                   P=random_sym(rng, 3, scale=0.3), xi=0.4)
    trace = integrate_geodesic(state, dt=1e-3, steps=1000)
    fit = mass_quadratic_fit(trace)
    H0 = trace.column("H")[0]
    assert abs(fit["leading"] - 0.5 * H0) <= 1e-8
    assert fit["rms_residual"] <= 1e-8
    acc = mass_acceleration(trace)
    assert np.max(np.abs(acc - H0)) <= 1e-6


# -- mccann -------------------------------------------------------------------

def test_mccann_equal_endpoints_constant():
    rng = np.random.default_rng(8)
    V = random_spd(rng, 3)
    for t in np.linspace(0.0, 1.0, 5):
        npt.assert_allclose(mccann_geodesic(V, V, t), V, atol=1e-13)


def test_mccann_scalar_midpoint():
    U = np.array([[1.0]])
    V = np.array([[4.0]])
    # T = 1/2, W(t) = 4 (1 - t/2)^2
    assert mccann_geodesic(U, V, 0.5)[0, 0] == pytest.approx(2.25)
    for t in np.linspace(0.0, 1.0, 7):
        assert mccann_geodesic(U, V, t)[0, 0] == pytest.approx(4.0 * (1 - t / 2) ** 2)


def test_mccann_endpoints_random():
    rng = np.random.default_rng(9)
    for _ in range(10):
        n = rng.integers(1, 5)
        U = random_spd(rng, n)
        V = random_spd(rng, n)
        npt.assert_allclose(mccann_geodesic(U, V, 0.0), V, atol=1e-12)
        assert np.linalg.norm(mccann_geodesic(U, V, 1.0) - U) <= 1e-12


def test_mccann_time_reversal():
    rng = np.random.default_rng(10)
    for _ in range(5):
        n = rng.integers(1, 5)
        U = random_spd(rng, n)
        V = random_spd(rng, n)
        for t in (0.25, 0.5, 0.75):
            assert np.linalg.norm(mccann_geodesic(V, U, 1.0 - t)
                                  - mccann_geodesic(U, V, t)) <= 1e-12


def test_mccann_stays_spd():
    rng = np.random.default_rng(12)
    U = random_spd(rng, 4)
    V = random_spd(rng, 4)
    for t in np.linspace(0.0, 1.0, 9):
        lam = np.linalg.eigvalsh(mccann_geodesic(U, V, t))
        assert lam[0] > 0.0


# -- shooting -----------------------------------------------------------------

def test_shoot_equal_endpoints_trivial():
    rng = np.random.default_rng(13)
    V = random_spd(rng, 2)
    P0, xi0 = shoot_bvp(V, 1.5, V, 1.5, tol=1e-8)
    npt.assert_allclose(P0, 0.0, atol=1e-8)
    assert abs(xi0) <= 1e-8


def test_shoot_pure_scaling_case():
    one = np.array([[1.0]])
    P0, xi0 = shoot_bvp(one, 1.0, one, 4.0, tol=1e-10)
    assert abs(xi0 - 2.0) <= 1e-8
    assert abs(P0[0, 0]) <= 1e-8


def test_shoot_scalar_closed_form_oracle():
    # equal masses, covariance 1 -> 4: the (sqrt(V), m) pair moves on a flat
    # plane; compare the integrated path against the exact chord
    one = np.array([[1.0]])
    four = np.array([[4.0]])
    P0, xi0 = shoot_bvp(one, 1.0, four, 1.0, tol=1e-10)
    state = GaussianCotangentState(V=one, m=1.0, P=P0, xi=xi0)
    trace = integrate_geodesic(state, dt=1e-3, steps=1000)
    t = trace.t
    m_exact = polar_mass_curve(1.0, 1.0, np.sqrt(4.0) - np.sqrt(1.0), t)
    V_exact = polar_scalar_covariance_curve(1.0, 4.0, 1.0, 1.0, t)
    assert np.max(np.abs(trace.column("m") - m_exact)) <= 1e-6
    assert np.max(np.abs(trace.column("V_0_0") - V_exact)) <= 1e-6
    # strict interior mass dip below both endpoints
    assert np.min(trace.column("m")) < 1.0
    assert np.min(trace.column("m")) == pytest.approx(0.5 + 0.5 * np.cos(0.5), abs=1e-5)


def test_shoot_random_n2_endpoints():
    rng = np.random.default_rng(14)
    for _ in range(3):
        S0 = random_spd(rng, 2)
        S1 = random_spd(rng, 2)
        m0 = rng.uniform(0.5, 2.0)
        m1 = rng.uniform(0.5, 2.0)
        P0, xi0 = shoot_bvp(S0, m0, S1, m1, tol=1e-8)
        trace = integrate_geodesic(
            GaussianCotangentState(V=S0, m=m0, P=P0, xi=xi0), dt=1e-3, steps=1000)
        V1 = trace.data[-1, 4:8].reshape(2, 2)
        err = np.linalg.norm(V1 - S1) + abs(trace.column("m")[-1] - m1)
        assert err <= 1e-6


def test_shoot_equal_mass_dip():
    rng = np.random.default_rng(15)
    S0 = random_spd(rng, 2)
    S1 = random_spd(rng, 2)
    P0, xi0 = shoot_bvp(S0, 1.0, S1, 1.0, tol=1e-8)
    trace = integrate_geodesic(
        GaussianCotangentState(V=S0, m=1.0, P=P0, xi=xi0), dt=1e-3, steps=1000)
    assert np.min(trace.column("m")) < 1.0


def test_covariance_path_lies_on_mccann_curve():
    # projection property: with matched arc length the covariance component
    # of the conical geodesic reproduces the balanced interpolation curve
    one = np.array([[1.0]])
    four = np.array([[4.0]])
    P0, xi0 = shoot_bvp(one, 1.0, four, 1.0, tol=1e-10)
    trace = integrate_geodesic(
        GaussianCotangentState(V=one, m=1.0, P=P0, xi=xi0), dt=1e-3, steps=1000)
    V = trace.column("V_0_0")
    # arc length in the balanced metric: |d sqrt(V)| for scalars
    s = np.abs(np.sqrt(V) - 1.0) / abs(np.sqrt(V[-1]) - 1.0)
    expected = np.array([mccann_geodesic(four, one, si)[0, 0] for si in s])
    assert np.max(np.abs(V - expected)) <= 1e-5


# -- cone over the SPD base ---------------------------------------------------

def test_gaussian_flow_matches_cone_over_spd_base():
    # the (V, m) flow is the cone over Sym_+ with base metric scaled by 1/4
    # and radial coordinate alpha = 2 sqrt(m)
    rng = np.random.default_rng(16)
    n = 2
    V0 = random_spd(rng, n)
    P0 = random_sym(rng, n, scale=0.2)
    m0, xi0 = 1.3, 0.3
    state = GaussianCotangentState(V=V0, m=m0, P=P0, xi=xi0)
    trace = integrate_geodesic(state, dt=1e-3, steps=500)

    X0 = (2.0 / m0) * (P0 @ V0 + V0 @ P0)
    alpha0 = 2.0 * np.sqrt(m0)
    alphadot0 = xi0 * np.sqrt(m0)  # d(2 sqrt m)/dt = mdot/sqrt(m) ... /1
    cone_state = ConeState(q=V0.ravel(), q_dot=X0.ravel(),
                           alpha=alpha0, alpha_dot=alphadot0)
    base = scaled_base(spd_base(n), 0.25)
    cone_trace = integrate_cone(cone_state, ConeProblem(p=1.0, dt=1e-3, steps=500), base)

    m_cone = cone_trace.column("alpha") ** 2 / 4.0
    npt.assert_allclose(trace.column("m"), m_cone, atol=1e-8)
    V_cone = cone_trace.block("q")[:, : n * n]
    V_ham = trace.block("V_")
    assert np.max(np.abs(V_cone - V_ham)) <= 1e-7


# -- affine extension ---------------------------------------------------------

def test_affine_equal_endpoints_constant():
    g = AffineGaussian(Sigma=np.eye(2), mean=np.zeros(2), m=1.0)
    conn = connect_affine(g, g, tol=1e-8, dt=1e-2)
    for t in (0.0, 0.4, 1.0):
        out = conn.at(t)
        npt.assert_allclose(out.Sigma, np.eye(2), atol=1e-8)
        npt.assert_allclose(out.mean, 0.0, atol=1e-12)
        assert out.m == pytest.approx(1.0, abs=1e-8)


def test_affine_mean_shift_mass_dip():
    # equal covariances and masses, means 0 and e1: the mean motion carries
    # kinetic energy, so the mass follows the flat-plane chord with angular
    # gap |b1 - b0| / 2 while the covariance stays put
    g0 = AffineGaussian(Sigma=np.eye(2), mean=np.zeros(2), m=1.0)
    g1 = AffineGaussian(Sigma=np.eye(2), mean=np.array([1.0, 0.0]), m=1.0)
    conn = connect_affine(g0, g1, tol=1e-10, dt=1e-3)
    ts = np.linspace(0.0, 1.0, 11)
    m_exact = polar_mass_curve(1.0, 1.0, 1.0, ts)
    for t, me in zip(ts, m_exact):
        out = conn.at(t)
        npt.assert_allclose(out.mean, t * np.array([1.0, 0.0]), atol=1e-12)
        npt.assert_allclose(out.Sigma, np.eye(2), atol=1e-6)
        assert out.m == pytest.approx(me, abs=1e-6)


def test_affine_mean_midpoint():
    g0 = AffineGaussian(Sigma=np.eye(2), mean=np.array([0.2, -0.4]), m=1.0)
    g1 = AffineGaussian(Sigma=2.0 * np.eye(2), mean=np.array([1.0, 0.6]), m=2.0)
    conn = connect_affine(g0, g1, tol=1e-8, dt=2e-3)
    mid = conn.at(0.5)
    npt.assert_allclose(mid.mean, 0.5 * (g0.mean + g1.mean), atol=1e-12)


# -- submersion consistency ---------------------------------------------------

def test_submersion_zero_vector():
    g, b = submersion_consistency(np.eye(2), 1.0, np.zeros((2, 2)), 0.0, np.eye(2))
    assert g == 0.0 and b == 0.0


def test_submersion_scalar_example():
    one = np.array([[1.0]])
    for m in (1.0, 2.5):
        g, b = submersion_consistency(one, m, one, 0.0, one)
        assert g == pytest.approx(m)
        assert b == pytest.approx(m)


def test_submersion_agreement_random():
    rng = np.random.default_rng(17)
    for _ in range(20):
        n = rng.integers(1, 5)
        A = rng.normal(size=(n, n)) + 2.0 * np.eye(n)
        Sigma = random_spd(rng, n)
        S = random_sym(rng, n)
        m = rng.uniform(0.3, 2.0)
        xi = rng.uniform(-1.0, 1.0)
        g, b = submersion_consistency(A, m, S, xi, Sigma)
        assert abs(g - b) <= 1e-10 * max(1.0, abs(g))


def test_vertical_perturbations_increase_group_value_only():
    rng = np.random.default_rng(18)
    n = 3
    A = rng.normal(size=(n, n)) + 2.0 * np.eye(n)
    Sigma = random_spd(rng, n)
    S = random_sym(rng, n)
    m, xi = 1.2, 0.5
    Vbase = 0.5 * ((A @ Sigma @ A.T) + (A @ Sigma @ A.T).T)
    group_value, base_value = submersion_consistency(A, m, S, xi, Sigma)
    for _ in range(5):
        Omega = rng.normal(size=(n, n))
        Omega = Omega - Omega.T  # antisymmetric
        Z = Omega @ np.linalg.inv(Vbase)  # Z Vbase is antisymmetric -> vertical
        lifted = (S + Z) @ A
        perturbed = group_metric_eval(A, m, lifted, xi * m, Sigma)
        # the projection is unchanged by the vertical part
        X = (S + Z) @ Vbase + Vbase @ (S + Z).T
        npt.assert_allclose(X, S @ Vbase + Vbase @ S, atol=1e-10)
        assert perturbed > group_value + 1e-10


def test_affine_geodesic_wrapper_matches_connection():
    from uotcone.gaussian import affine_geodesic
    g0 = AffineGaussian(Sigma=np.eye(2), mean=np.zeros(2), m=1.0)
    g1 = AffineGaussian(Sigma=np.eye(2), mean=np.array([0.5, 0.0]), m=1.0)
    conn = connect_affine(g0, g1, tol=1e-8, dt=2e-3)
    direct = affine_geodesic(g0, g1, 0.5, tol=1e-8, dt=2e-3)
    expected = conn.at(0.5)
    npt.assert_allclose(direct.Sigma, expected.Sigma, atol=1e-10)
    npt.assert_allclose(direct.mean, expected.mean, atol=1e-14)
    assert direct.m == pytest.approx(expected.m, abs=1e-10)
