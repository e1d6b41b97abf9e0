"""Stationary problem, finite-horizon tracking, and averaged turnpike metrics.

The tracking cost is ``int_0^T (||u||^2 + ||C w - z||^2) dt``.  Targets z live
in the observation space realized through the symmetric factor
``C_mod = Q_obs**(1/2)`` acting on position coefficients, so z is a plain
coefficient vector of length n_modes.

The finite-horizon optimality system is solved in deviation variables
(state minus stationary state) by Riccati feedback plus a backward
feedforward: the deviation adjoint is ``q(t) = E(T-t) x(t) + h(t)`` with the
matrix Riccati flow E and a linear feedforward h ending at the lift of the
stationary adjoint.  A dense collocation solve of the same two-point boundary
value problem is provided as an independent oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.integrate
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .closed_loop import Trajectory
from .models import SpectralSystem
from .riccati import _e_times_a, first_order_matrices
from .spectral import DimensionError, DomainError, EnergyState, ModalVector


def g_weight(T: float, k: float, exponent: float) -> float:
    """Horizon weight ((T+1)^(1-k*e) - 1)/(1-k*e), with the ln(T+1) limit at k*e = 1.

    Evaluated through expm1 so the crossover is smooth; an infinite exponent
    returns 0 (the formula's limit).
    """
    if T <= 0.0:
        raise DomainError("T must be positive")
    if k <= 0.0 or exponent <= 0.0:
        raise DomainError("k and exponent must be positive")
    kappa = k * exponent
    if np.isinf(kappa):
        return 0.0
    u = (1.0 - kappa) * np.log1p(T)
    if kappa == 1.0:
        return float(np.log1p(T))
    return float(np.expm1(u) / (1.0 - kappa))


@dataclass
class StationarySolution:
    """Optimal stationary triple (w_bar, u_bar, p_bar) for a target z."""

    w_bar: ModalVector
    u_bar: np.ndarray
    p_bar: ModalVector
    optimality_residual: float


def stationary_cost(system: SpectralSystem, z, u) -> float:
    """Stationary objective ||u||^2 + ||C A^-1 B u - z||^2 (for convexity probes)."""
    z = np.asarray(z, dtype=float)
    u = np.asarray(u, dtype=float)
    Cm = system.observation_factor()
    w = (system.B_mod @ u) / system.lambdas**2
    return float(u @ u + np.sum((Cm @ w - z) ** 2))


def solve_stationary(system: SpectralSystem, z) -> StationarySolution:
    """Solve min_u ||u||^2 + ||C w - z||^2 subject to A w = B u.

    With G = C A^-1 B the optimal control solves (I + G^T G) u = G^T z; the
    adjoint satisfies A p = C*(C w - z) and u = -B* p.
    """
    z = np.asarray(z, dtype=float)
    n = system.n_modes
    if z.size != n:
        raise DimensionError("target z must have one entry per mode")
    lam2 = system.lambdas**2
    Cm = system.observation_factor()
    G = Cm @ (system.B_mod / lam2[:, None])
    m = G.shape[1]
    u = scipy.linalg.solve(np.eye(m) + G.T @ G, G.T @ z, assume_a="pos")
    a_bar = (system.B_mod @ u) / lam2
    obs_gap = Cm @ a_bar - z
    p_bar = (Cm.T @ obs_gap) / lam2

    r1 = np.linalg.norm(lam2 * a_bar - system.B_mod @ u) / (1.0 + np.linalg.norm(u))
    r2 = np.linalg.norm(lam2 * p_bar - Cm.T @ obs_gap) / (1.0 + np.linalg.norm(z))
    r3 = np.linalg.norm(u + system.B_mod.T @ p_bar) / (1.0 + np.linalg.norm(u))
    return StationarySolution(w_bar=ModalVector.position_only(a_bar), u_bar=u,
                              p_bar=ModalVector.position_only(p_bar),
                              optimality_residual=float(max(r1, r2, r3)))


def _lift_position(system: SpectralSystem, a: np.ndarray) -> np.ndarray:
    out = np.zeros(2 * system.n_modes)
    out[0::2] = system.lambdas * a
    return out


def _terminal_feedforward(system: SpectralSystem, stationary: StationarySolution) -> np.ndarray:
    """Lift of the terminal deviation adjoint (0, -p_bar) into energy coordinates.

    The adjoint pair (-p_t, p) is lifted dually as (-p_t/lambda, p); at t = T
    the deviation adjoint is (0, -p_bar).
    """
    h = np.zeros(2 * system.n_modes)
    h[1::2] = -stationary.p_bar.a
    return h


@dataclass
class TrackingSolution:
    """Finite-horizon tracking optimum, recorded on a uniform grid.

    ``deviation_states`` are x(t) = lift(w^T - w_bar, w_t^T) and
    ``deviation_controls`` are v = u^T - u_bar.  ``trajectory`` holds the full
    state/control pair for export.  Exact (solver-accumulated) integrals of
    the deviation running cost and of the deviation position are kept for
    cross-checking grid quadrature.
    """

    times: np.ndarray
    deviation_states: np.ndarray
    deviation_controls: np.ndarray
    trajectory: Trajectory
    stationary: StationarySolution
    z: np.ndarray
    horizon: float
    cost_quadrature: float        # int (||u||^2 + ||C w - z||^2) dt, exact
    deviation_cost_exact: float   # int (||v||^2 + ||C (w - w_bar)||^2) dt, exact
    mean_deviation_a: np.ndarray  # (1/T) int (a(t) - a_bar) dt, exact
    value_formula_cost: float     # Riccati + boundary-term expression of the cost
    system: SpectralSystem = None
    _forward_sol: object = None
    _backward_sol: object = None
    _h0: np.ndarray = None
    _E_T: np.ndarray = None


def solve_tracking(system: SpectralSystem, z, x0, horizon: float,
                   stationary: StationarySolution | None = None,
                   dt_record: float | None = None, rtol: float = 1e-10,
                   atol: float = 1e-12) -> TrackingSolution:
    """Solve the finite-horizon tracking problem via Riccati feedback + feedforward.

    Backward pass: the matrix Riccati flow E(tau) from 0 and the feedforward
    H(tau) = h(T - tau) from the lifted stationary adjoint, integrated
    jointly.  Forward pass: x' = A x + B v with v = -B^T (E(T-t) x + H(T-t)),
    with the running cost and the running position average accumulated as
    extra quadrature states.
    """
    if horizon <= 0.0:
        raise DomainError("horizon must be positive")
    z = np.asarray(z, dtype=float)
    if stationary is None:
        stationary = solve_stationary(system, z)
    lam = system.lambdas
    n = lam.size
    dim = 2 * n
    A, B, Q = first_order_matrices(system)
    BBT = B @ B.T
    iu = np.triu_indices(dim)
    n_pack = iu[0].size

    x0 = x0.to_vector() if isinstance(x0, EnergyState) else np.asarray(x0, dtype=float)
    if x0.size != dim:
        raise DimensionError("initial state dimension mismatch")
    x0_dev = x0 - _lift_position(system, stationary.w_bar.a)
    h_T = _terminal_feedforward(system, stationary)

    max_step = np.pi / (4.0 * lam.max())

    def backward_rhs(_tau, y):
        E = np.zeros((dim, dim))
        E[iu] = y[:n_pack]
        E.T[iu] = y[:n_pack]
        H = y[n_pack:]
        EA = _e_times_a(E, lam)
        EB = E @ B
        dE = Q + EA + EA.T - EB @ EB.T
        dH = -(A @ H + EB @ (B.T @ H))
        return np.concatenate([dE[iu], dH])

    y0 = np.concatenate([np.zeros(n_pack), h_T])
    back = scipy.integrate.solve_ivp(backward_rhs, (0.0, horizon), y0, method="DOP853",
                                     rtol=rtol, atol=atol, max_step=max_step,
                                     dense_output=True)
    if not back.success:
        raise RuntimeError(f"backward Riccati/feedforward pass failed: {back.message}")

    def gain_terms(t):
        y = back.sol(horizon - t)
        E = np.zeros((dim, dim))
        E[iu] = y[:n_pack]
        E.T[iu] = y[:n_pack]
        return E, y[n_pack:]

    Cm = system.observation_factor()
    obs_stationary_gap = Cm @ stationary.w_bar.a - z  # C w_bar - z
    u_bar = stationary.u_bar

    # forward state: [x_dev (dim), J_dev, J_full, int a_dev (n)]
    def forward_rhs(t, y):
        x = y[:dim]
        E, H = gain_terms(t)
        v = -(B.T @ (E @ x + H))
        dx = A @ x + B @ v
        a_dev = x[0::2] / lam
        obs_dev = Cm @ a_dev
        j_dev = float(v @ v + obs_dev @ obs_dev)
        u_full = u_bar + v
        obs_full = obs_dev + obs_stationary_gap
        j_full = float(u_full @ u_full + obs_full @ obs_full)
        return np.concatenate([dx, [j_dev, j_full], a_dev])

    yf0 = np.concatenate([x0_dev, [0.0, 0.0], np.zeros(n)])
    fwd = scipy.integrate.solve_ivp(forward_rhs, (0.0, horizon), yf0, method="DOP853",
                                    rtol=rtol, atol=atol, max_step=max_step,
                                    dense_output=True)
    if not fwd.success:
        raise RuntimeError(f"forward tracking pass failed: {fwd.message}")

    if dt_record is None:
        dt_record = min(0.02, np.pi / (8.0 * lam.max()))
    steps = max(2, int(np.ceil(horizon / dt_record)))
    times = np.linspace(0.0, horizon, steps + 1)

    X = np.empty((times.size, dim))
    V = np.empty((times.size, system.n_controls))
    values = np.empty(times.size)
    for k, t in enumerate(times):
        y = fwd.sol(t)
        x = y[:dim]
        E, H = gain_terms(t)
        X[k] = x
        V[k] = -(B.T @ (E @ x + H))
        values[k] = float(x @ E @ x)

    yT = fwd.sol(horizon)
    j_dev_exact = float(yT[dim])
    j_full_exact = float(yT[dim + 1])
    mean_a = yT[dim + 2:] / horizon

    E_T, h0 = gain_terms(0.0)
    zeta_dev_T = X[-1][1::2]
    zeta_dev_0 = x0_dev[1::2]
    p_bar = stationary.p_bar.a
    value_cost = (float(x0_dev @ E_T @ x0_dev) + float(h0 @ x0_dev)
                  - float(p_bar @ zeta_dev_T) + 2.0 * float(p_bar @ zeta_dev_0)
                  + horizon * (float(u_bar @ u_bar) + float(obs_stationary_gap @ obs_stationary_gap)))

    x_bar_lift = _lift_position(system, stationary.w_bar.a)
    full = X + x_bar_lift
    obs_dev_series = (X[:, 0::2] / lam) @ Cm.T
    obs_full = obs_dev_series + obs_stationary_gap
    traj = Trajectory(times=times, states=full,
                      energies=np.einsum("ij,ij->i", full, full), lambdas=lam,
                      kind="tracking", controls=V + u_bar, values=values,
                      control_power=np.einsum("ij,ij->i", V + u_bar, V + u_bar),
                      obs_power=np.einsum("ij,ij->i", obs_full, obs_full))

    return TrackingSolution(times=times, deviation_states=X, deviation_controls=V,
                            trajectory=traj, stationary=stationary, z=z,
                            horizon=float(horizon), cost_quadrature=j_full_exact,
                            deviation_cost_exact=j_dev_exact, mean_deviation_a=mean_a,
                            value_formula_cost=value_cost, system=system,
                            _forward_sol=fwd.sol, _backward_sol=back.sol,
                            _h0=h0, _E_T=E_T)


def tracking_os_residual(sol: TrackingSolution) -> float:
    """Verify the optimality system by an independent backward adjoint pass.

    The deviation adjoint is re-integrated backward from its terminal value
    using the recorded state interpolant; the returned residual is the worst
    grid mismatch of v = -B^T q plus the boundary-condition defects, relative
    to the control scale.
    """
    system = sol.system
    lam = system.lambdas
    dim = 2 * system.n_modes
    A, B, Q = first_order_matrices(system)
    h_T = _terminal_feedforward(system, sol.stationary)
    T = sol.horizon

    def adj_rhs(tau, q):
        x = sol._forward_sol(T - tau)[:dim]
        return -(A @ q) + Q @ x  # dq/dtau for q(tau) = q_adj(T - tau)

    back = scipy.integrate.solve_ivp(adj_rhs, (0.0, T), h_T, method="DOP853",
                                     rtol=1e-10, atol=1e-12,
                                     max_step=np.pi / (4.0 * lam.max()),
                                     dense_output=True)
    if not back.success:
        raise RuntimeError(f"adjoint verification pass failed: {back.message}")

    scale = 1.0 + np.abs(sol.deviation_controls).max()
    worst = 0.0
    for k, t in enumerate(sol.times):
        q = back.sol(T - t)
        v_check = -(B.T @ q)
        worst = max(worst, float(np.abs(v_check - sol.deviation_controls[k]).max()) / scale)
    # boundary conditions: x(0), q(T)
    ic = float(np.abs(sol.deviation_states[0] - sol._forward_sol(0.0)[:dim]).max())
    tc = float(np.abs(back.sol(0.0) - h_T).max())
    return max(worst, ic / (1.0 + np.abs(sol.deviation_states[0]).max()), tc / (1.0 + np.abs(h_T).max()))


def solve_tracking_collocation(system: SpectralSystem, z, x0, horizon: float,
                               n_steps: int = 2000,
                               stationary: StationarySolution | None = None):
    """Dense direct solve of the deviation two-point boundary value problem.

    Discretizes the joint Hamiltonian system for (x, q) with one-step Pade(2,2)
    collocation (Hermite-Simpson on this linear system) on a uniform grid and
    solves the resulting sparse block system.  Independent oracle for
    solve_tracking.  Returns (times, x_dev, v, deviation_cost).
    """
    z = np.asarray(z, dtype=float)
    if stationary is None:
        stationary = solve_stationary(system, z)
    A, B, Q = first_order_matrices(system)
    dim = 2 * system.n_modes
    x0 = x0.to_vector() if isinstance(x0, EnergyState) else np.asarray(x0, dtype=float)
    x0_dev = x0 - _lift_position(system, stationary.w_bar.a)
    h_T = _terminal_feedforward(system, stationary)

    M = np.zeros((2 * dim, 2 * dim))
    M[:dim, :dim] = A
    M[:dim, dim:] = -B @ B.T
    M[dim:, :dim] = -Q
    M[dim:, dim:] = A

    h = horizon / n_steps
    I = np.eye(2 * dim)
    M2 = M @ M
    left = I - 0.5 * h * M + (h * h / 12.0) * M2
    right = I + 0.5 * h * M + (h * h / 12.0) * M2
    P = scipy.linalg.solve(left, right)

    d = 2 * dim
    n_nodes = n_steps + 1
    rows = scipy.sparse.lil_matrix((d * n_nodes, d * n_nodes))
    rhs = np.zeros(d * n_nodes)
    for k in range(n_steps):
        r0 = k * d
        rows[r0:r0 + d, r0:r0 + d] = -P
        rows[r0:r0 + d, r0 + d:r0 + 2 * d] = np.eye(d)
    r0 = n_steps * d
    # boundary rows: x(0) fixed, q(T) fixed
    for i in range(dim):
        rows[r0 + i, i] = 1.0
        rhs[r0 + i] = x0_dev[i]
    for i in range(dim):
        rows[r0 + dim + i, (n_nodes - 1) * d + dim + i] = 1.0
        rhs[r0 + dim + i] = h_T[i]
    Y = scipy.sparse.linalg.spsolve(rows.tocsr(), rhs).reshape(n_nodes, d)

    times = np.linspace(0.0, horizon, n_nodes)
    x_dev = Y[:, :dim]
    q = Y[:, dim:]
    v = -(q @ B)
    lam = system.lambdas
    Cm = system.observation_factor()
    obs = (x_dev[:, 0::2] / lam) @ Cm.T
    integrand = np.einsum("ij,ij->i", v, v) + np.einsum("ij,ij->i", obs, obs)
    cost = float(scipy.integrate.simpson(integrand, x=times))
    return times, x_dev, v, cost


@dataclass
class TurnpikeReport:
    """Averaged tracking/state gaps over a horizon grid plus the bound proxy."""

    horizons: np.ndarray
    avg_tracking: np.ndarray
    avg_state_gap: np.ndarray
    bound_values: np.ndarray
    k_used: float
    ktilde_used: float


def averaged_metrics(runs, stationary: StationarySolution, k: float = 1.0,
                     ktilde: float = 1.0, rho: float | None = None,
                     eta: float | None = None) -> TurnpikeReport:
    """Averaged turnpike quantities per horizon, by quadrature on each run's grid.

    avg_tracking(T) = (1/T) int (||C (w - w_bar)||^2 + ||u - u_bar||^2) dt and
    avg_state_gap(T) = || (1/T) int (w - w_bar) dt ||^2 in the X_{1/2} norm.
    The bound proxy evaluates g1(T)/T * ||(w0 - w_bar, w1)||^2_{D(A^k)} +
    g2(T)/T * ||p_bar||^2_{X_{(ktilde+1)/2}} with unit constants (shape
    reference only; weights default to 1 when no exponent is planted).
    """
    if not runs:
        raise DomainError("no tracking runs given")
    system = runs[0].system
    lam = system.lambdas
    horizons = np.array([r.horizon for r in runs])
    if np.any(np.diff(horizons) <= 0.0):
        raise DomainError("horizons must be strictly increasing")
    for r in runs[1:]:
        if r.system is not system or not np.array_equal(r.z, runs[0].z):
            raise DomainError("all runs must share the system and target")

    Cm = system.observation_factor()
    avg_track = np.empty(horizons.size)
    avg_gap = np.empty(horizons.size)
    bounds = np.empty(horizons.size)

    rho_eff = rho if rho is not None else (system.rho if system.rho is not None else np.inf)
    eta_eff = eta if eta is not None else (system.eta if system.eta is not None else np.inf)

    x0_dev0 = runs[0].deviation_states[0]
    w_class = float(np.sum(lam ** (2.0 * k) * (x0_dev0[0::2] ** 2 + x0_dev0[1::2] ** 2)))
    p_bar = stationary.p_bar.a
    p_class = float(np.sum(lam ** (2.0 * (ktilde + 1.0)) * p_bar**2))

    for i, run in enumerate(runs):
        obs = (run.deviation_states[:, 0::2] / lam) @ Cm.T
        integrand = (np.einsum("ij,ij->i", run.deviation_controls, run.deviation_controls)
                     + np.einsum("ij,ij->i", obs, obs))
        T = run.horizon
        avg_track[i] = scipy.integrate.simpson(integrand, x=run.times) / T
        a_dev = run.deviation_states[:, 0::2] / lam
        mean_a = scipy.integrate.simpson(a_dev, x=run.times, axis=0) / T
        avg_gap[i] = float(np.sum(lam**2 * mean_a**2))
        g1 = 1.0 if np.isinf(rho_eff) else g_weight(T, k, rho_eff)
        g2 = 1.0 if np.isinf(eta_eff) else g_weight(T, ktilde, eta_eff)
        bounds[i] = g1 / T * w_class + g2 / T * p_class

    return TurnpikeReport(horizons=horizons, avg_tracking=avg_track,
                          avg_state_gap=avg_gap, bound_values=bounds,
                          k_used=float(k), ktilde_used=float(ktilde))
