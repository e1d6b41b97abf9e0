"""Differential and algebraic Riccati solvers for the first-order wave system.

Everything is expressed in energy coordinates, interleaved per mode as
``(xi_1, zeta_1, xi_2, zeta_2, ...)``.  There the generator is skew-symmetric
block diagonal with per-mode blocks ``[[0, lambda], [-lambda, 0]]``, dual
pairings are plain transposes, and the matrix Riccati equation

    E' = Q + E A + A^T E - E B B^T E,   E(0) = 0

is integrated in the time-to-go variable.  The quadratic form of a solution at
an initial state is the optimal cost of ``int (||u||^2 + ||C w||^2) dt``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.integrate
import scipy.linalg

from .models import SpectralSystem
from .spectral import DimensionError, DomainError, EnergyState


class StabilizabilityError(RuntimeError):
    """A costly mode is uncontrollable: no finite value function exists."""


class MethodError(RuntimeError):
    """A solver failed to converge; try the alternative method."""


class IntegrationError(RuntimeError):
    """DRE integration failed; partial results attached."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


@dataclass
class RiccatiSolution:
    """Symmetric PSD quadratic form on the truncated state space.

    ``horizon`` is the time-to-go of a DRE snapshot, or ``inf`` for a solution
    of the algebraic equation.  ``residual`` is the ARE residual norm (zero by
    convention for DRE snapshots).
    """

    E: np.ndarray
    horizon: float
    residual: float
    method: str

    def __post_init__(self):
        self.E = np.asarray(self.E, dtype=float)
        nrm = np.abs(self.E).max() if self.E.size else 0.0
        if np.abs(self.E - self.E.T).max() > 1e-10 * (1.0 + nrm):
            raise DomainError("Riccati solution must be symmetric")

    @property
    def dim(self) -> int:
        return self.E.shape[0]

    def min_eigenvalue(self) -> float:
        return float(scipy.linalg.eigh(self.E, eigvals_only=True, subset_by_index=[0, 0])[0])


def first_order_matrices(system: SpectralSystem):
    """(A_mat, B_mat, Q_mat) of the first-order system in energy coordinates.

    A_mat is skew block diagonal, B_mat stacks zeros over B_mod row-wise per
    mode, and Q_mat carries Q_obs conjugated by diag(1/lambda) on the xi block
    (positions are a = xi/lambda).
    """
    lam = system.lambdas
    n = lam.size
    A = np.zeros((2 * n, 2 * n))
    ix = np.arange(0, 2 * n, 2)
    A[ix, ix + 1] = lam
    A[ix + 1, ix] = -lam

    B = np.zeros((2 * n, system.n_controls))
    B[1::2, :] = system.B_mod

    Q = np.zeros((2 * n, 2 * n))
    Q[np.ix_(ix, ix)] = system.observation_energy_form()
    Q = 0.5 * (Q + Q.T)
    return A, B, Q


def _e_times_a(E: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """E @ A_mat using the per-mode rotation structure (O(n^2))."""
    out = np.empty_like(E)
    out[:, 0::2] = -E[:, 1::2] * lam
    out[:, 1::2] = E[:, 0::2] * lam
    return out


def _riccati_rhs(E: np.ndarray, lam: np.ndarray, B: np.ndarray, Q: np.ndarray) -> np.ndarray:
    EA = _e_times_a(E, lam)
    EB = E @ B
    return Q + EA + EA.T - EB @ EB.T


def _pack(E: np.ndarray, iu) -> np.ndarray:
    return E[iu]


def _unpack(v: np.ndarray, dim: int, iu) -> np.ndarray:
    E = np.zeros((dim, dim))
    E[iu] = v
    E.T[iu] = v
    return E


def integrate_dre(system: SpectralSystem, horizon: float, snapshot_times=None,
                  rtol: float = 1e-10, atol: float = 1e-12):
    """Integrate the matrix Riccati equation forward from E(0) = 0.

    Returns one RiccatiSolution per requested snapshot (default: the horizon
    only).  The state is propagated as its packed upper triangle, so symmetry
    is exact by construction; the quadratic form is monotone nondecreasing in
    the time-to-go.
    """
    if horizon <= 0.0:
        raise DomainError("horizon must be positive")
    lam = system.lambdas
    _, B, Q = first_order_matrices(system)
    dim = 2 * lam.size
    iu = np.triu_indices(dim)

    if snapshot_times is None:
        snapshot_times = [horizon]
    taus = np.atleast_1d(np.asarray(snapshot_times, dtype=float))
    if np.any(taus < 0.0) or np.any(taus > horizon + 1e-12):
        raise DomainError("snapshot times must lie in [0, horizon]")
    order = np.argsort(taus)

    def rhs(_t, y):
        E = _unpack(y, dim, iu)
        return _pack(_riccati_rhs(E, lam, B, Q), iu)

    max_step = np.pi / (4.0 * lam.max())
    eval_ts = np.unique(taus[taus > 0.0])
    sol = scipy.integrate.solve_ivp(
        rhs, (0.0, float(horizon)), np.zeros(iu[0].size), method="DOP853",
        t_eval=eval_ts if eval_ts.size else None, rtol=rtol, atol=atol,
        max_step=max_step, dense_output=False)
    if not sol.success:
        partial = [RiccatiSolution(_unpack(sol.y[:, k], dim, iu), float(sol.t[k]), 0.0, "dre")
                   for k in range(sol.t.size)]
        raise IntegrationError(f"DRE integration failed: {sol.message}", partial=partial)

    by_tau = {float(t): _unpack(sol.y[:, k], dim, iu) for k, t in enumerate(sol.t)}
    out = [None] * taus.size
    for k in order:
        tau = float(taus[k])
        E = np.zeros((dim, dim)) if tau == 0.0 else by_tau[min(by_tau, key=lambda s: abs(s - tau))]
        out[k] = RiccatiSolution(E=E, horizon=tau, residual=0.0, method="dre")
    return out


def _check_stabilizable(system: SpectralSystem, gain_tol: float = 1e-10, cost_tol: float = 1e-10):
    """Raise when an uncontrollable mode group carries observation cost.

    Frequencies are grouped by near-equality; within a group the controllable
    subspace is the row space of B_mod restricted to the group.
    """
    lam = system.lambdas
    Qe = system.observation_energy_form()
    groups = []
    start = 0
    for i in range(1, lam.size + 1):
        if i == lam.size or lam[i] - lam[start] > 1e-9 * max(1.0, lam[start]):
            groups.append(np.arange(start, i))
            start = i
    scale = max(np.abs(system.B_mod).max(), 1.0)
    for g in groups:
        rows = system.B_mod[g, :]
        u, s, _ = np.linalg.svd(rows, full_matrices=True)
        rank = int(np.sum(s > gain_tol * scale)) if s.size else 0
        if rank >= g.size:
            continue
        null = u[:, rank:]  # directions in the group with no control authority
        qg = Qe[np.ix_(g, g)]
        worst = np.abs(null.T @ qg @ null).max()
        if worst > cost_tol * max(1.0, np.abs(Qe).max()):
            raise StabilizabilityError(
                f"modes near lambda={lam[g[0]]:.6g} are uncontrollable but carry "
                f"observation cost {worst:.2e}")


def _are_residual(E: np.ndarray, lam: np.ndarray, B: np.ndarray, Q: np.ndarray) -> float:
    return float(np.linalg.norm(_riccati_rhs(E, lam, B, Q)))


def solve_are(system: SpectralSystem, method: str = "newton_kleinman",
              tol_scale: float = 1e-9, dre_tol: float = 1e-8,
              max_iter: int = 60) -> RiccatiSolution:
    """Solve ``Q + E A + A^T E - E B B^T E = 0`` for the truncated system.

    ``newton_kleinman`` iterates Lyapunov solves from a stabilizing guess
    (identity if it stabilizes, else a DRE snapshot at tau = 10/lambda_min);
    ``dre_limit`` integrates the DRE with geometrically doubled horizons until
    successive snapshots agree, realizing the minimal solution as the limit of
    the finite-horizon operators.
    """
    lam = system.lambdas
    A, B, Q = first_order_matrices(system)
    _check_stabilizable(system)

    if method == "dre_limit":
        return _solve_are_dre_limit(system, lam, B, Q, dre_tol)
    if method != "newton_kleinman":
        raise DomainError(f"unknown ARE method {method!r}")

    BBT = B @ B.T
    X = np.eye(2 * lam.size)
    if _spectral_abscissa(A - BBT) >= -1e-12:
        tau0 = 10.0 / lam.min()
        for _ in range(3):
            X = integrate_dre(system, tau0)[-1].E
            if _spectral_abscissa(A - BBT @ X) < -1e-12:
                break
            tau0 *= 2.0
        else:
            raise MethodError("no stabilizing initial guess found; try method='dre_limit'")

    for _ in range(max_iter):
        Acl = A - BBT @ X
        rhs = -(Q + X @ BBT @ X)
        X_new = scipy.linalg.solve_continuous_lyapunov(Acl.T, rhs)
        X_new = 0.5 * (X_new + X_new.T)
        if not np.all(np.isfinite(X_new)):
            raise MethodError("Newton-Kleinman diverged; try method='dre_limit'")
        X = X_new
        res = _are_residual(X, lam, B, Q)
        if res <= tol_scale * (1.0 + np.linalg.norm(X) ** 2):
            return RiccatiSolution(E=X, horizon=np.inf, residual=res, method="newton_kleinman")
    raise MethodError("Newton-Kleinman did not converge; try method='dre_limit'")


def _solve_are_dre_limit(system, lam, B, Q, dre_tol):
    tau = max(1.0, 10.0 / lam.min())
    dim = 2 * lam.size
    iu = np.triu_indices(dim)
    max_step = np.pi / (4.0 * lam.max())

    def rhs(_t, y):
        E = _unpack(y, dim, iu)
        return _pack(_riccati_rhs(E, lam, B, Q), iu)

    y = np.zeros(iu[0].size)
    prev = np.zeros((dim, dim))
    t_now = 0.0
    for _ in range(14):
        sol = scipy.integrate.solve_ivp(rhs, (t_now, tau), y, method="DOP853",
                                        rtol=1e-10, atol=1e-12, max_step=max_step)
        if not sol.success:
            raise IntegrationError(f"DRE integration failed: {sol.message}")
        y = sol.y[:, -1]
        t_now = tau
        cur = _unpack(y, dim, iu)
        if np.linalg.norm(cur - prev) <= dre_tol:
            res = _are_residual(cur, lam, B, Q)
            return RiccatiSolution(E=cur, horizon=np.inf, residual=res, method="dre_limit")
        prev = cur
        tau *= 2.0
    raise MethodError("dre_limit did not converge within the horizon cap")


def _spectral_abscissa(M: np.ndarray) -> float:
    return float(np.max(np.linalg.eigvals(M).real))


def closed_loop_matrix(system: SpectralSystem, solution: RiccatiSolution) -> np.ndarray:
    """A - B B^T E, the generator of the optimally controlled flow."""
    A, B, _ = first_order_matrices(system)
    return A - B @ (B.T @ solution.E)


def value(solution, x0) -> float:
    """Quadratic-form value x0^T E x0 (the optimal cost from x0)."""
    E = solution.E if isinstance(solution, RiccatiSolution) else np.asarray(solution, dtype=float)
    x = x0.to_vector() if isinstance(x0, EnergyState) else np.asarray(x0, dtype=float)
    if x.size != E.shape[0]:
        raise DimensionError("state dimension does not match the Riccati matrix")
    return float(x @ E @ x)


@dataclass
class BoundsReport:
    """Empirical two-sided bounds of the quadratic form against two norms.

    ``c1_hat * ||x||^2_weak <= x^T E x <= c2_hat * ||x||^2_strong`` holds on
    every probe used; the scales are stored so the claim is self-describing.
    """

    c1_hat: float
    c2_hat: float
    probe_count: int
    weak_scale: object
    strong_scale: object
    excluded: int = 0


def bounds_report(E_hat: RiccatiSolution, system: SpectralSystem, weak, strong,
                  n_random: int = 100, rng=None, extra_probes=None) -> BoundsReport:
    """Probe the ARE form with canonical and random unit vectors.

    c1_hat is the largest constant valid in the lower bound over the probe
    set (min of value/weak norm), c2_hat the smallest valid upper constant.
    Probes with vanishing weak norm but positive value are excluded and
    counted.
    """
    from .spectral import energy_norm_squared

    dim = E_hat.dim
    if rng is None:
        rng = np.random.default_rng(0)
    probes = [np.eye(dim)[:, k] for k in range(dim)]
    raw = rng.standard_normal((max(int(n_random), 100), dim))
    probes += [r / np.linalg.norm(r) for r in raw]
    if extra_probes is not None:
        probes += [np.asarray(p, dtype=float) for p in extra_probes]

    lam = system.lambdas
    c1, c2 = np.inf, 0.0
    excluded = 0
    used = 0
    for x in probes:
        val = value(E_hat, x)
        wn = energy_norm_squared(x, lam, weak)
        sn = energy_norm_squared(x, lam, strong)
        if wn <= 0.0:
            if val > 0.0:
                excluded += 1
                continue
            wn = np.nan
        used += 1
        if np.isfinite(wn):
            c1 = min(c1, val / wn)
        if sn > 0.0:
            c2 = max(c2, val / sn)
    return BoundsReport(c1_hat=float(max(c1, 0.0)), c2_hat=float(c2), probe_count=used,
                        weak_scale=weak, strong_scale=strong, excluded=excluded)
