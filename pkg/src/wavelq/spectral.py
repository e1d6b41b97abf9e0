"""Modal representation of second-order systems and the scale of weighted norms.

States of ``w_tt + A w = ...`` are kept as coefficient vectors in the
eigenbasis of A: a vector ``(w0, w1)`` is stored as the pairs ``(a_n, b_n)``
with frequencies ``lambda_n`` (eigenvalues of A are ``lambda_n**2``).  All
solvers work in *energy coordinates* ``(xi, zeta) = (lambda*a, b)``, in which
the state-space norm is plain Euclidean and the wave generator is
skew-symmetric.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DimensionError(ValueError):
    """Coefficient arrays of mismatched length."""


class DomainError(ValueError):
    """Parameter outside the admissible domain (frequencies, intervals, ...)."""


def as_frequencies(lambdas) -> np.ndarray:
    """Validate and return a frequency array: strictly positive, nondecreasing."""
    lam = np.atleast_1d(np.asarray(lambdas, dtype=float))
    if lam.ndim != 1 or lam.size == 0:
        raise DimensionError("frequencies must be a nonempty 1-d array")
    if not np.all(np.isfinite(lam)) or np.any(lam <= 0.0):
        raise DomainError("frequencies must be finite and strictly positive")
    if np.any(np.diff(lam) < 0.0):
        raise DomainError("frequencies must be sorted ascending")
    return lam


def _as_coeffs(x, name: str) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if arr.ndim != 1:
        raise DimensionError(f"{name} must be one-dimensional")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must contain only finite entries")
    return arr


@dataclass(frozen=True)
class ModalVector:
    """Truncated state as per-mode coefficient pairs.

    ``a`` are the position coefficients of w0 and ``b`` the velocity
    coefficients of w1 in the eigenbasis of A.
    """

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "a", _as_coeffs(self.a, "a"))
        object.__setattr__(self, "b", _as_coeffs(self.b, "b"))
        if self.a.shape != self.b.shape:
            raise DimensionError("a and b must have the same length")

    @property
    def n_modes(self) -> int:
        return self.a.size

    @classmethod
    def position_only(cls, a) -> "ModalVector":
        a = _as_coeffs(a, "a")
        return cls(a=a, b=np.zeros_like(a))


@dataclass(frozen=True)
class EnergyState:
    """State in energy coordinates: ``xi = lambda*a``, ``zeta = b``.

    The squared state-space norm is ``sum(xi**2 + zeta**2)``.
    """

    xi: np.ndarray
    zeta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "xi", _as_coeffs(self.xi, "xi"))
        object.__setattr__(self, "zeta", _as_coeffs(self.zeta, "zeta"))
        if self.xi.shape != self.zeta.shape:
            raise DimensionError("xi and zeta must have the same length")

    @property
    def n_modes(self) -> int:
        return self.xi.size

    def norm_h_squared(self) -> float:
        return float(np.dot(self.xi, self.xi) + np.dot(self.zeta, self.zeta))

    def to_vector(self) -> np.ndarray:
        """Interleaved flat vector (xi_1, zeta_1, xi_2, zeta_2, ...)."""
        out = np.empty(2 * self.n_modes)
        out[0::2] = self.xi
        out[1::2] = self.zeta
        return out

    @classmethod
    def from_vector(cls, x) -> "EnergyState":
        x = _as_coeffs(x, "x")
        if x.size % 2:
            raise DimensionError("energy vector length must be even")
        return cls(xi=x[0::2].copy(), zeta=x[1::2].copy())


# Norm-scale kinds.  Each kind defines a per-mode weight applied to the
# energy density lambda**2*a**2 + b**2, except sobolev_state which weights
# a**2 alone (a position-only norm).
_KINDS = ("sobolev_state", "graded", "graded_dual", "exp_weight")


@dataclass(frozen=True)
class NormScale:
    """A weight function on frequencies selecting one norm of the scale.

    kind / weight on the energy density ``lambda**2 a**2 + b**2``:

    * ``graded(s)``       -- ``lambda**(2s)``
    * ``graded_dual(s)``  -- ``lambda**(-2(s+1))``
    * ``exp_weight(alpha)`` -- ``exp(-2*alpha*lambda)``, alpha >= 0
    * ``sobolev_state(beta)`` -- ``lambda**(4*beta)`` applied to ``a**2`` only
    """

    kind: str
    param: float

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise DomainError(f"unknown norm-scale kind {self.kind!r}")
        if self.kind == "exp_weight" and self.param < 0.0:
            raise DomainError("exp_weight requires alpha >= 0")

    @classmethod
    def graded(cls, s: float) -> "NormScale":
        return cls("graded", float(s))

    @classmethod
    def graded_dual(cls, s: float) -> "NormScale":
        return cls("graded_dual", float(s))

    @classmethod
    def exp_weight(cls, alpha: float) -> "NormScale":
        return cls("exp_weight", float(alpha))

    @classmethod
    def sobolev_state(cls, beta: float) -> "NormScale":
        return cls("sobolev_state", float(beta))

    @classmethod
    def energy(cls) -> "NormScale":
        """The plain state-space norm (graded with s = 0)."""
        return cls("graded", 0.0)

    def density_weights(self, lambdas) -> np.ndarray:
        """Per-mode weight on the energy density (graded kinds only)."""
        lam = as_frequencies(lambdas)
        if self.kind == "graded":
            return lam ** (2.0 * self.param)
        if self.kind == "graded_dual":
            return lam ** (-2.0 * (self.param + 1.0))
        if self.kind == "exp_weight":
            return np.exp(-2.0 * self.param * lam)
        raise DomainError("sobolev_state has no energy-density weight")

    def describe(self) -> str:
        return f"{self.kind}({self.param:g})"


def norm_squared(v: ModalVector, lambdas, scale: NormScale) -> float:
    """Squared norm of a modal vector under the given scale.

    For graded kinds this is ``sum w_n(lambda_n) * (lambda_n**2 a_n**2 + b_n**2)``;
    for ``sobolev_state(beta)`` it is ``sum lambda_n**(4*beta) * a_n**2``.
    """
    lam = as_frequencies(lambdas)
    if lam.size != v.n_modes:
        raise DimensionError("frequency count does not match mode count")
    if scale.kind == "sobolev_state":
        return float(np.sum(lam ** (4.0 * scale.param) * v.a**2))
    w = scale.density_weights(lam)
    return float(np.sum(w * (lam**2 * v.a**2 + v.b**2)))


def energy_norm_squared(x, lambdas, scale: NormScale) -> float:
    """Squared norm of an energy-coordinate state (EnergyState or flat vector)."""
    if isinstance(x, EnergyState):
        xi, zeta = x.xi, x.zeta
    else:
        s = EnergyState.from_vector(x)
        xi, zeta = s.xi, s.zeta
    lam = as_frequencies(lambdas)
    if lam.size != xi.size:
        raise DimensionError("frequency count does not match mode count")
    if scale.kind == "sobolev_state":
        # a = xi / lambda, so the weight on xi**2 is lambda**(4*beta - 2)
        return float(np.sum(lam ** (4.0 * scale.param - 2.0) * xi**2))
    w = scale.density_weights(lam)
    return float(np.sum(w * (xi**2 + zeta**2)))


def apply_fractional_power(v: ModalVector, lambdas, beta: float) -> ModalVector:
    """Apply A**beta componentwise: both coefficient slots scale by lambda**(2*beta)."""
    lam = as_frequencies(lambdas)
    if lam.size != v.n_modes:
        raise DimensionError("frequency count does not match mode count")
    factor = lam ** (2.0 * float(beta))
    if not np.all(np.isfinite(factor)):
        raise DomainError("lambda**(2*beta) overflows or is undefined")
    return ModalVector(a=factor * v.a, b=factor * v.b)


def to_energy(v: ModalVector, lambdas) -> EnergyState:
    lam = as_frequencies(lambdas)
    if lam.size != v.n_modes:
        raise DimensionError("frequency count does not match mode count")
    return EnergyState(xi=lam * v.a, zeta=v.b.copy())


def from_energy(s: EnergyState, lambdas) -> ModalVector:
    lam = as_frequencies(lambdas)
    if lam.size != s.n_modes:
        raise DimensionError("frequency count does not match mode count")
    return ModalVector(a=s.xi / lam, b=s.zeta.copy())


def interpolation_gap(v: ModalVector, lambdas, rho: float, eta: float, s: float) -> float:
    """Slack of the interpolation inequality between the weak and strong scales.

    Returns RHS - LHS of

        ||v||^2_{graded(1/rho)} <=
            ||v||^{2*s*eta/Z}_{graded(-1/eta)} * ||v||^{2*(1+eta/rho)/Z}_{graded(1/rho+s)}

    with Z = 1 + eta/rho + s*eta.  Nonnegative by Hoelder; zero for a
    single-mode vector.
    """
    if rho <= 0.0 or eta <= 0.0 or s <= 0.0:
        raise DomainError("rho, eta, s must be positive")
    lam = as_frequencies(lambdas)
    weak = norm_squared(v, lam, NormScale.graded(-1.0 / eta))
    mid = norm_squared(v, lam, NormScale.graded(1.0 / rho))
    strong = norm_squared(v, lam, NormScale.graded(1.0 / rho + s))
    if weak == 0.0:
        raise DomainError("interpolation gap undefined for the zero vector")
    z = 1.0 + eta / rho + s * eta
    theta_weak = s * eta / z
    theta_strong = (1.0 + eta / rho) / z
    # rhs - mid evaluated as mid * expm1(log rhs - log mid): conditioned
    # relative to the mid norm even when the individual norms are huge
    log_ratio = (theta_weak * np.log(weak) + theta_strong * np.log(strong)
                 - np.log(mid))
    return float(mid * np.expm1(log_ratio))
