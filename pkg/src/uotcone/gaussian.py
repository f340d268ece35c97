"""Finite-dimensional conical model on Gaussian densities.

Points are (covariance, total mass) pairs on Sym_+(n) x R_+.  Velocities of
the covariance are encoded through the continuous Lyapunov equation
X = SV + VS, the momentum dual to Xdot is P = m S / 2, and the Hamiltonian

    H = (2/m) tr(V P^2) + m xi^2 / 2

is the Legendre transform of the kinetic energy m (tr(V S S) + xi^2) / 2.
Along the canonical flow the total mass satisfies d^2 m / dt^2 = H exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cone import BaseManifold
from .errors import (MassError, NonFiniteError, ShootingError, SingularSystemError,
                     SpdError, SymmetryError)
from .trace import GeodesicTrace

_SYM_TOL = 1e-12


def symmetrize(M):
    return 0.5 * (M + M.T)


def require_symmetric(M, what="matrix", tol=_SYM_TOL):
    """Validate symmetry up to tol (relative to the matrix scale), return the
    symmetrized copy."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise SymmetryError(f"{what} must be square", shape=list(M.shape))
    scale = max(1.0, float(np.max(np.abs(M))) if M.size else 1.0)
    if float(np.max(np.abs(M - M.T))) > tol * scale:
        raise SymmetryError(f"{what} is not symmetric",
                            asymmetry=float(np.max(np.abs(M - M.T))))
    return symmetrize(M)


def require_spd(M, what="matrix"):
    """Validate symmetric positive-definiteness (by Cholesky), return the
    symmetrized copy."""
    M = require_symmetric(M, what)
    try:
        np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        raise SpdError(f"{what} is not positive definite") from None
    return M


def _spd_eigh(M, what="matrix"):
    M = require_symmetric(M, what)
    lam, Q = np.linalg.eigh(M)
    if lam[0] <= 0.0:
        raise SpdError(f"{what} is not positive definite", min_eigenvalue=float(lam[0]))
    return lam, Q


def spd_power(M, exponent, what="matrix"):
    """M^exponent through the symmetric eigendecomposition."""
    lam, Q = _spd_eigh(M, what)
    return symmetrize((Q * lam**exponent) @ Q.T)


def lyapunov_solve(V, X):
    """Solve X = SV + VS for symmetric S, with V SPD.

    Uses the eigendecomposition V = Q diag(lam) Q^T; in the eigenbasis the
    solution is elementwise X~_ij / (lam_i + lam_j).
    """
    lam, Q = _spd_eigh(V, "V")
    X = require_symmetric(X, "X")
    Xt = Q.T @ X @ Q
    St = Xt / (lam[:, None] + lam[None, :])
    return symmetrize(Q @ St @ Q.T)


def group_metric_eval(A, m, Adot, mdot, Sigma):
    """Squared length of (Adot, mdot) at (A, m) for the mass-weighted metric.

    The Gaussian integral of |Adot x|^2 against the reference density with
    covariance Sigma evaluates in closed form to tr(Sigma Adot^T Adot), so the
    value is m tr(Sigma Adot^T Adot) + mdot^2 / m.
    """
    if m <= 0.0:
        raise MassError("mass must be positive", m=float(m))
    A = np.asarray(A, dtype=float)
    sign, _ = np.linalg.slogdet(A)
    if sign == 0.0:
        raise SingularSystemError("A must be invertible")
    Sigma = require_spd(Sigma, "Sigma")
    Adot = np.asarray(Adot, dtype=float)
    return float(m * np.trace(Sigma @ (Adot.T @ Adot)) + mdot**2 / m)


def base_metric_eval(V, m, X, xi):
    """Squared length of (X, xi m) at (V, m): m (tr(V S S) + xi^2), X = SV + VS."""
    if m <= 0.0:
        raise MassError("mass must be positive", m=float(m))
    S = lyapunov_solve(V, X)
    return float(m * (np.sum((V @ S) * S) + xi**2))


def legendre_momentum(V, m, X):
    """Momentum dual to the covariance velocity X: P = m S / 2."""
    if m <= 0.0:
        raise MassError("mass must be positive", m=float(m))
    return 0.5 * m * lyapunov_solve(V, X)


@dataclass(frozen=True)
class GaussianCotangentState:
    V: np.ndarray
    m: float
    P: np.ndarray
    xi: float

    @property
    def n(self):
        return self.V.shape[0]

    def validate(self):
        V = require_spd(self.V, "V")
        P = require_symmetric(self.P, "P")
        if self.m <= 0.0:
            raise MassError("mass must be positive", m=float(self.m))
        if not np.isfinite(self.m) or not np.isfinite(self.xi):
            raise NonFiniteError("non-finite scalar state")
        return GaussianCotangentState(V=V, m=float(self.m), P=P, xi=float(self.xi))


def hamiltonian(state):
    """H = (2/m) tr(V P^2) + m xi^2 / 2; equals half the metric energy of the
    velocity reconstructed from P."""
    if state.m <= 0.0:
        raise MassError("mass must be positive", m=float(state.m))
    kinetic = np.sum((state.V @ state.P) * state.P)
    return float(2.0 * kinetic / state.m + 0.5 * state.m * state.xi**2)


def _pack_state(state):
    n = state.n
    y = np.empty(2 * n * n + 2)
    y[:n * n] = state.V.ravel()
    y[n * n:2 * n * n] = state.P.ravel()
    y[-2] = state.m
    y[-1] = state.xi
    return y


def _unpack_state(y, n):
    nn = n * n
    return GaussianCotangentState(
        V=y[:nn].reshape(n, n).copy(),
        m=float(y[-2]),
        P=y[nn:2 * nn].reshape(n, n).copy(),
        xi=float(y[-1]),
    )


def _gauss_rhs(y, n):
    nn = n * n
    V = y[:nn].reshape(n, n)
    P = y[nn:2 * nn].reshape(n, n)
    m = y[-2]
    xi = y[-1]
    PV = P @ V
    P2 = P @ P
    out = np.empty_like(y)
    out[:nn] = ((2.0 / m) * (PV + PV.T)).ravel()
    out[nn:2 * nn] = ((-2.0 / m) * P2).ravel()
    out[-2] = xi * m
    out[-1] = (2.0 / m**2) * np.sum(V * P2) - 0.5 * xi * xi
    return out


def geodesic_rhs(state):
    """Canonical equations of the Hamiltonian: returns (dV, dm, dP, dxi).

    dV = (2/m)(PV + VP), dm = xi m, dP = -(2/m) P^2,
    dxi = (2/m^2) tr(V P^2) - xi^2 / 2.
    """
    state = state.validate()
    dy = _gauss_rhs(_pack_state(state), state.n)
    n = state.n
    nn = n * n
    return (symmetrize(dy[:nn].reshape(n, n)), float(dy[-2]),
            symmetrize(dy[nn:2 * nn].reshape(n, n)), float(dy[-1]))


def _rk4_step(y, n, dt):
    k1 = _gauss_rhs(y, n)
    k2 = _gauss_rhs(y + 0.5 * dt * k1, n)
    k3 = _gauss_rhs(y + 0.5 * dt * k2, n)
    k4 = _gauss_rhs(y + dt * k3, n)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _resymmetrize(y, n):
    nn = n * n
    V = y[:nn].reshape(n, n)
    P = y[nn:2 * nn].reshape(n, n)
    y[:nn] = (0.5 * (V + V.T)).ravel()
    y[nn:2 * nn] = (0.5 * (P + P.T)).ravel()


def _check_step(y, n, step, check_spd=True):
    if not np.all(np.isfinite(y)):
        raise NonFiniteError("non-finite state during integration", step=step)
    if y[-2] <= 0.0:
        raise MassError("mass became nonpositive during integration",
                        step=step, m=float(y[-2]))
    if check_spd:
        try:
            np.linalg.cholesky(y[:n * n].reshape(n, n))
        except np.linalg.LinAlgError:
            raise SpdError("covariance lost positive-definiteness",
                           step=step) from None


def _advance(y0, n, dt, steps, spd_every=50):
    """Endpoint of the flow without recording (used by the shooting solver)."""
    y = y0.copy()
    for k in range(steps):
        y = _rk4_step(y, n, dt)
        _resymmetrize(y, n)
        _check_step(y, n, k + 1, check_spd=((k + 1) % spd_every == 0 or k + 1 == steps))
    return y


def integrate_geodesic(initial, dt, steps):
    """Fixed-step RK4 integration of the cotangent geodesic flow.

    The trace columns are t, m, xi, H followed by the row-major entries of V
    and P.  SPD loss of V, nonpositive mass, or non-finite values abort with
    the offending step index.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    state = initial.validate()
    n = state.n
    cols = (["t", "m", "xi", "H"]
            + [f"V_{i}_{j}" for i in range(n) for j in range(n)]
            + [f"P_{i}_{j}" for i in range(n) for j in range(n)])
    data = np.empty((steps + 1, len(cols)))
    y = _pack_state(state)
    for k in range(steps + 1):
        st = _unpack_state(y, n)
        data[k, 0] = k * dt
        data[k, 1] = st.m
        data[k, 2] = st.xi
        data[k, 3] = hamiltonian(st)
        data[k, 4:4 + n * n] = y[:n * n]
        data[k, 4 + n * n:] = y[n * n:2 * n * n]
        if k == steps:
            break
        y = _rk4_step(y, n, dt)
        _resymmetrize(y, n)
        _check_step(y, n, k + 1)
    return GeodesicTrace(columns=tuple(cols), data=data)


def mccann_geodesic(U, V, t):
    """Balanced-transport geodesic between covariances: W(0) = V, W(1) = U.

    T = U^{1/2} (U^{1/2} V U^{1/2})^{-1/2} U^{1/2} and
    W(t) = [(1-t) I + t T] V [(1-t) I + t T].
    """
    U = require_spd(U, "U")
    V = require_spd(V, "V")
    Uh = spd_power(U, 0.5, "U")
    mid = spd_power(Uh @ V @ Uh, -0.5, "U^(1/2) V U^(1/2)")
    T = symmetrize(Uh @ mid @ Uh)
    C = (1.0 - t) * np.eye(U.shape[0]) + t * T
    return symmetrize(C @ V @ C.T)


def mccann_initial_velocity(Sigma0, Sigma1):
    """Initial covariance velocity of the balanced geodesic from Sigma0 to Sigma1."""
    Sigma0 = require_spd(Sigma0, "Sigma0")
    Sigma1 = require_spd(Sigma1, "Sigma1")
    Uh = spd_power(Sigma1, 0.5, "Sigma1")
    mid = spd_power(Uh @ Sigma0 @ Uh, -0.5, "Sigma1^(1/2) Sigma0 Sigma1^(1/2)")
    T = symmetrize(Uh @ mid @ Uh)
    D = T - np.eye(T.shape[0])
    return symmetrize(D @ Sigma0 + Sigma0 @ D)


def _triu_weights(n):
    iu = np.triu_indices(n)
    w = np.where(iu[0] == iu[1], 1.0, np.sqrt(2.0))
    return iu, w


def _sym_from_triu(z, n, iu):
    M = np.zeros((n, n))
    M[iu] = z
    M.T[iu] = z
    return M


def _damped_newton(residual, z0, tol, max_iter, fd_eps=1e-6):
    """Newton iteration with finite-difference Jacobian and backtracking.

    ``residual`` maps the unknown vector to a residual vector; evaluations
    that raise a NumericsError are treated as infeasible trial points.
    """

    def safe(z):
        try:
            r = residual(z)
            nrm = float(np.linalg.norm(r))
            if not np.isfinite(nrm):
                return None, np.inf
            return r, nrm
        except NumericsError:
            return None, np.inf

    z = np.asarray(z0, dtype=float).copy()
    r, nrm = safe(z)
    if r is None:
        raise ShootingError("infeasible initial guess for the two-point solver")
    for it in range(max_iter):
        if nrm <= tol:
            return z, nrm, it
        J = np.empty((r.size, z.size))
        for k in range(z.size):
            eps = fd_eps * max(1.0, abs(z[k]))
            zk = z.copy()
            zk[k] += eps
            rk, nk = safe(zk)
            if rk is None:
                zk[k] = z[k] - eps
                rk, nk = safe(zk)
                if rk is None:
                    raise ShootingError("Jacobian evaluation failed",
                                        iteration=it, residual=nrm)
                J[:, k] = (r - rk) / eps
            else:
                J[:, k] = (rk - r) / eps
        step = np.linalg.lstsq(J, -r, rcond=None)[0]
        accepted = False
        for lam in 2.0 ** -np.arange(13):
            rt, nt = safe(z + lam * step)
            if rt is not None and nt < (1.0 - 1e-4 * lam) * nrm:
                z = z + lam * step
                r, nrm = rt, nt
                accepted = True
                break
        if not accepted:
            raise ShootingError("line search stalled", iteration=it, residual=nrm)
    if nrm <= tol:
        return z, nrm, max_iter
    raise ShootingError("no convergence within iteration budget",
                        iteration=max_iter, residual=nrm)


def shoot_bvp(Sigma0, m0, Sigma1, m1, tol=1e-8, dt=1e-3, max_iter=50):
    """Solve the two-point geodesic problem on (covariance, mass).

    Finds (P0, xi0) such that the unit-time flow from (Sigma0, m0, P0, xi0)
    lands on (Sigma1, m1) within tol in the combined Frobenius/absolute-mass
    norm.  Initialized from the balanced log map and the pure-scaling rate
    xi0 = 2 (sqrt(m1/m0) - 1); damped Newton with a finite-difference
    Jacobian does the rest.
    """
    Sigma0 = require_spd(Sigma0, "Sigma0")
    Sigma1 = require_spd(Sigma1, "Sigma1")
    if m0 <= 0.0 or m1 <= 0.0:
        raise MassError("endpoint masses must be positive", m0=float(m0), m1=float(m1))
    n = Sigma0.shape[0]
    if Sigma1.shape != (n, n):
        raise ValueError("endpoint covariances must have equal shapes")
    iu, w = _triu_weights(n)

    def make_residual(step_dt):
        steps = max(1, round(1.0 / step_dt))
        h = 1.0 / steps

        def residual(z):
            P0 = _sym_from_triu(z[:-1], n, iu)
            y0 = _pack_state(GaussianCotangentState(V=Sigma0, m=m0, P=P0, xi=z[-1]))
            y1 = _advance(y0, n, h, steps)
            dV = y1[:n * n].reshape(n, n) - Sigma1
            return np.concatenate([w * dV[iu], [y1[-2] - m1]])

        return residual

    P_init = 0.5 * m0 * lyapunov_solve(Sigma0, mccann_initial_velocity(Sigma0, Sigma1))
    z0 = np.concatenate([P_init[iu], [2.0 * (np.sqrt(m1 / m0) - 1.0)]])

    # coarse continuation keeps the finite-difference Jacobian cheap; the
    # returned parameters always satisfy the residual at the requested dt
    coarse = max(dt, 2e-3)
    if coarse > dt:
        try:
            z0, _, _ = _damped_newton(make_residual(coarse), z0, tol, max_iter)
        except ShootingError:
            pass
    z, nrm, _ = _damped_newton(make_residual(dt), z0, tol, max_iter)
    return _sym_from_triu(z[:-1], n, iu), float(z[-1])


@dataclass(frozen=True)
class AffineGaussian:
    Sigma: np.ndarray
    mean: np.ndarray
    m: float

    def validate(self):
        Sigma = require_spd(self.Sigma, "Sigma")
        mean = np.asarray(self.mean, dtype=float)
        if mean.shape != (Sigma.shape[0],):
            raise ValueError("mean length must match the covariance size")
        if self.m <= 0.0:
            raise MassError("mass must be positive", m=float(self.m))
        return AffineGaussian(Sigma=Sigma, mean=mean, m=float(self.m))


def _affine_rhs(y, n):
    # layout: V (n^2), P (n^2), b (n), pb (n), m, xi
    nn = n * n
    V = y[:nn].reshape(n, n)
    P = y[nn:2 * nn].reshape(n, n)
    pb = y[2 * nn + n:2 * nn + 2 * n]
    m = y[-2]
    xi = y[-1]
    PV = P @ V
    P2 = P @ P
    out = np.empty_like(y)
    out[:nn] = ((2.0 / m) * (PV + PV.T)).ravel()
    out[nn:2 * nn] = ((-2.0 / m) * P2).ravel()
    out[2 * nn:2 * nn + n] = pb / m
    out[2 * nn + n:2 * nn + 2 * n] = 0.0
    out[-2] = xi * m
    out[-1] = (2.0 / m**2) * np.sum(V * P2) + 0.5 * (pb @ pb) / m**2 - 0.5 * xi * xi
    return out


def _affine_advance(y0, n, dt, steps):
    nn = n * n
    y = y0.copy()
    for k in range(steps):
        k1 = _affine_rhs(y, n)
        k2 = _affine_rhs(y + 0.5 * dt * k1, n)
        k3 = _affine_rhs(y + 0.5 * dt * k2, n)
        k4 = _affine_rhs(y + dt * k3, n)
        y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        V = y[:nn].reshape(n, n)
        P = y[nn:2 * nn].reshape(n, n)
        y[:nn] = (0.5 * (V + V.T)).ravel()
        y[nn:2 * nn] = (0.5 * (P + P.T)).ravel()
        if not np.all(np.isfinite(y)):
            raise NonFiniteError("non-finite state during integration", step=k + 1)
        if y[-2] <= 0.0:
            raise MassError("mass became nonpositive during integration", step=k + 1)
    return y


@dataclass(frozen=True)
class AffineConnection:
    """Solved two-point problem between Gaussians with means.

    The covariance/mass pair follows the conical geodesic flow over the
    product base (covariances x means), where the mean motion enters through
    its conserved linear momentum; the reported mean itself is the affine
    interpolation of the endpoints.
    """

    g0: AffineGaussian
    g1: AffineGaussian
    P0: np.ndarray
    pb0: np.ndarray
    xi0: float
    dt: float

    def at(self, t):
        g0, g1 = self.g0, self.g1
        mean = (1.0 - t) * g0.mean + t * g1.mean
        if t == 0.0:
            return AffineGaussian(Sigma=g0.Sigma.copy(), mean=mean, m=g0.m)
        n = g0.Sigma.shape[0]
        steps = max(1, round(abs(t) / self.dt))
        y0 = np.concatenate([g0.Sigma.ravel(), self.P0.ravel(), g0.mean,
                             self.pb0, [g0.m, self.xi0]])
        y = _affine_advance(y0, n, t / steps, steps)
        return AffineGaussian(Sigma=symmetrize(y[:n * n].reshape(n, n)),
                              mean=mean, m=float(y[-2]))

    def mass_path(self, num=101):
        ts = np.linspace(0.0, 1.0, num)
        return ts, np.array([self.at(t).m for t in ts])


def connect_affine(g0, g1, tol=1e-8, dt=1e-3, max_iter=50):
    """Solve the two-point problem for Gaussians with means (zero-mean reference).

    Unknowns are the covariance momentum, the (conserved) mean momentum, and
    the initial log-mass rate; residuals are the covariance, mean, and mass
    endpoint mismatches at t = 1.
    """
    g0 = g0.validate()
    g1 = g1.validate()
    n = g0.Sigma.shape[0]
    if g1.Sigma.shape != (n, n):
        raise ValueError("endpoint covariances must have equal shapes")
    iu, w = _triu_weights(n)
    steps = max(1, round(1.0 / dt))
    h = 1.0 / steps

    def residual(z):
        P0 = _sym_from_triu(z[:iu[0].size], n, iu)
        pb0 = z[iu[0].size:iu[0].size + n]
        xi0 = z[-1]
        y0 = np.concatenate([g0.Sigma.ravel(), P0.ravel(), g0.mean, pb0,
                             [g0.m, xi0]])
        y1 = _affine_advance(y0, n, h, steps)
        dV = y1[:n * n].reshape(n, n) - g1.Sigma
        db = y1[2 * n * n:2 * n * n + n] - g1.mean
        return np.concatenate([w * dV[iu], db, [y1[-2] - g1.m]])

    P_init = 0.5 * g0.m * lyapunov_solve(
        g0.Sigma, mccann_initial_velocity(g0.Sigma, g1.Sigma))
    z0 = np.concatenate([P_init[iu],
                         0.5 * (g0.m + g1.m) * (g1.mean - g0.mean),
                         [2.0 * (np.sqrt(g1.m / g0.m) - 1.0)]])
    z, _, _ = _damped_newton(residual, z0, tol, max_iter)
    return AffineConnection(g0=g0, g1=g1,
                            P0=_sym_from_triu(z[:iu[0].size], n, iu),
                            pb0=z[iu[0].size:iu[0].size + n],
                            xi0=float(z[-1]), dt=dt)


def affine_geodesic(g0, g1, t, tol=1e-8, dt=1e-3, max_iter=50):
    """Interpolate Gaussians with means: affine mean motion, conical (Sigma, m).

    Solves the two-point problem on each call; reuse ``connect_affine`` when
    evaluating many parameter values of the same endpoint pair.
    """
    return connect_affine(g0, g1, tol=tol, dt=dt, max_iter=max_iter).at(t)


def submersion_consistency(A, m, thetaS, xi, Sigma):
    """Group metric of a horizontal lift vs base metric of its projection.

    The lift of the symmetric generator thetaS at (A, m) is (thetaS A, xi m);
    its projection moves the base covariance A Sigma A^T with velocity
    X = thetaS V + V thetaS.  Both numbers agree for horizontal data.
    """
    thetaS = require_symmetric(thetaS, "thetaS")
    A = np.asarray(A, dtype=float)
    Adot = thetaS @ A
    group_value = group_metric_eval(A, m, Adot, xi * m, Sigma)
    Vbase = symmetrize(A @ require_spd(Sigma, "Sigma") @ A.T)
    X = symmetrize(thetaS @ Vbase + Vbase @ thetaS)
    base_value = base_metric_eval(Vbase, m, X, xi)
    return group_value, base_value


def spd_base(n):
    """BaseManifold over Sym_+(n) with the balanced-transport metric.

    Points and tangents are row-major flattened n x n symmetric matrices.
    The metric is tr(V S_u S_v) with S_u the Lyapunov representer of u, and
    the geodesic acceleration is 2 S V S (whose integral curves are the
    balanced interpolation curves).
    """

    def metric(q, u, v):
        V = symmetrize(q.reshape(n, n))
        Su = lyapunov_solve(V, symmetrize(u.reshape(n, n)))
        return 0.5 * float(np.sum(Su * symmetrize(v.reshape(n, n))))

    def rhs(q, qdot):
        V = symmetrize(q.reshape(n, n))
        S = lyapunov_solve(V, symmetrize(qdot.reshape(n, n)))
        return (2.0 * S @ V @ S).ravel()

    return BaseManifold(dim=n * n, metric_eval=metric, geodesic_rhs=rhs)
