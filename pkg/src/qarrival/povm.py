"""Detection/no-detection operator pair and its audits.

Omega-bar is the Gram form U†U of the interaction-picture evolution; Omega
is either its complement or the time integral of the conjugated coupling.
Operator builds step with the exact matrix exponential of the chosen
discrete generator, so the completeness residual of the integral route is
pure time-quadrature error.  All adjoints are taken in the dx-weighted
inner product, which on a uniform grid is the plain conjugate transpose.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .dynamics import EvolutionMethod, crank_nicolson, hamiltonian_for
from .errors import ConfigurationError, ResourceCapError
from .grid import Grid1D, ModelParams, PotentialProfile

#: Largest grid for POVM operator builds.
POVM_BUILD_CAP = 512

#: Grids up to this size get eigenvalue audits by default.
EIGEN_AUDIT_CAP = 128


@dataclass(frozen=True)
class PovmPair:
    """Hermitian pair (omega, omega_bar) summing to the identity."""

    omega: np.ndarray
    omega_bar: np.ndarray
    gamma: float
    tau: float
    build_method: str  # via_U | via_integral | via_trotter


def _check_profile(V: PotentialProfile) -> np.ndarray:
    v = np.asarray(V.values)
    if not (np.isrealobj(v) or np.all(v.imag == 0)):
        raise ConfigurationError(
            "operator builds need a real coupling profile; complex profiles are "
            "supported in the evolution path only"
        )
    v = v.real.astype(float)
    if np.any(v < 0):
        raise ConfigurationError("operator builds need a nonnegative coupling profile")
    return v


def _check_cap(grid: Grid1D):
    if grid.n > POVM_BUILD_CAP:
        raise ResourceCapError(f"operator build needs n <= {POVM_BUILD_CAP}, got n={grid.n}")


def _hermitize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.conj().T)


def _generator(grid: Grid1D, v: np.ndarray, params: ModelParams,
               method: EvolutionMethod) -> tuple[np.ndarray, np.ndarray]:
    """(H, G) with G = -i H / hbar - (gamma/2) diag(v)."""
    h = _hermitize(np.asarray(hamiltonian_for(method, grid, params), dtype=complex))
    g = -1j * h / params.hbar - 0.5 * params.gamma * np.diag(v).astype(complex)
    return h, g


def _free_phase(h: np.ndarray, t: float, hbar: float) -> np.ndarray:
    """exp(+i H t / hbar) through the eigenbasis of the hermitian H."""
    w, q = np.linalg.eigh(h)
    return (q * np.exp(1j * w * t / hbar)[None, :]) @ q.conj().T


def build_U(grid: Grid1D, V: PotentialProfile, params: ModelParams,
            method: EvolutionMethod) -> np.ndarray:
    """Interaction-picture operator exp(+iHtau/hbar) exp(-iHtau/hbar - gamma V tau/2)."""
    _check_cap(grid)
    v = _check_profile(V)
    h, g = _generator(grid, v, params, method)
    a = expm(g * params.tau)
    return _free_phase(h, params.tau, params.hbar) @ a


def build_omega_bar(U: np.ndarray) -> np.ndarray:
    """No-detection operator U†U; hermitized to kill roundoff asymmetry."""
    return _hermitize(U.conj().T @ U)


def _integral_and_endpoint(grid: Grid1D, v: np.ndarray, params: ModelParams,
                           method: EvolutionMethod) -> tuple[np.ndarray, np.ndarray]:
    """Trapezoid of gamma A†(t) V A(t) on the params.dt grid, plus A(tau).

    A(t_k) is accumulated from the exact one-step exponential, so the only
    completeness error left is the quadrature itself.
    """
    _, g = _generator(grid, v, params, method)
    n_nodes = max(1, int(round(params.tau / params.dt)))
    dt = params.tau / n_nodes
    b = expm(g * dt)
    sup = v > 0
    root = np.sqrt(v[sup])

    def integrand(a):
        rows = root[:, None] * a[sup, :]
        return params.gamma * (rows.conj().T @ rows)

    a = np.eye(grid.n, dtype=complex)
    omega = 0.5 * integrand(a)
    for k in range(1, n_nodes + 1):
        a = b @ a
        omega += (0.5 if k == n_nodes else 1.0) * integrand(a)
    return _hermitize(omega * dt), a


def build_omega_integral(grid: Grid1D, V: PotentialProfile, params: ModelParams,
                         method: EvolutionMethod) -> np.ndarray:
    """Detection operator as the time integral of the conjugated gamma V."""
    _check_cap(grid)
    v = _check_profile(V)
    omega, _ = _integral_and_endpoint(grid, v, params, method)
    return omega


def build_povm_pair(grid: Grid1D, V: PotentialProfile, params: ModelParams,
                    method: EvolutionMethod, route: str = "via_integral",
                    trotter_steps: int | None = None) -> PovmPair:
    """Assemble the pair by the chosen route.

    via_integral carries the time-resolved physics and leaves a quadrature
    residual in omega + omega_bar - 1; via_U defines omega as the exact
    complement; via_trotter builds U from the product form.
    """
    _check_cap(grid)
    v = _check_profile(V)
    if route == "via_integral":
        omega, a = _integral_and_endpoint(grid, v, params, method)
        omega_bar = _hermitize(a.conj().T @ a)
    elif route == "via_U":
        u = build_U(grid, V, params, method)
        omega_bar = build_omega_bar(u)
        omega = np.eye(grid.n) - omega_bar
    elif route == "via_trotter":
        steps = trotter_steps if trotter_steps is not None else max(
            1, int(round(params.tau / params.dt)))
        u = build_U_trotter(grid, V, params, steps, method=method)
        omega_bar = build_omega_bar(u)
        omega = np.eye(grid.n) - omega_bar
    else:
        raise ConfigurationError(f"unknown build route {route!r}")
    return PovmPair(omega, omega_bar, params.gamma, params.tau, route)


@dataclass(frozen=True)
class PovmAuditReport:
    completeness_residual: float
    hermiticity_defect: float
    min_eig_omega: float
    min_eig_omega_bar: float
    max_eig_omega: float
    max_eig_omega_bar: float
    nonprojector_witness: float
    eigen_audited: bool


def audit_povm(pair: PovmPair, eigen: bool | None = None) -> PovmAuditReport:
    """Verify hermiticity, completeness, positivity, and non-projectorness.

    The witness is the spectral norm of omega_bar^2 - omega_bar, nonzero
    exactly when omega_bar has spectrum away from {0, 1}.
    """
    n = pair.omega.shape[0]
    if eigen is None:
        eigen = n <= EIGEN_AUDIT_CAP
    herm = max(
        float(np.max(np.abs(pair.omega - pair.omega.conj().T))),
        float(np.max(np.abs(pair.omega_bar - pair.omega_bar.conj().T))),
    )
    completeness = float(np.max(np.abs(pair.omega + pair.omega_bar - np.eye(n))))
    if eigen:
        eig_o = np.linalg.eigvalsh(_hermitize(pair.omega))
        eig_ob = np.linalg.eigvalsh(_hermitize(pair.omega_bar))
        witness = float(np.max(np.abs(eig_ob ** 2 - eig_ob)))
        report = PovmAuditReport(completeness, herm,
                                 float(eig_o[0]), float(eig_ob[0]),
                                 float(eig_o[-1]), float(eig_ob[-1]),
                                 witness, True)
    else:
        report = PovmAuditReport(completeness, herm,
                                 float("nan"), float("nan"),
                                 float("nan"), float("nan"),
                                 float("nan"), False)
    return report


def expectation(operator: np.ndarray, psi: np.ndarray, dx: float) -> float:
    """<psi|O|psi> under the dx-weighted inner product."""
    return float(np.real(psi.conj() @ (operator @ psi)) * dx)


def derivative_check(grid: Grid1D, V: PotentialProfile, params: ModelParams,
                     tau: float, h: float,
                     method: EvolutionMethod | None = None) -> float:
    """Max-entry residual of the no-detection derivative identity.

    Central difference of omega_bar at tau against the conjugated coupling
    -gamma A†(tau) V A(tau); both sides from exact exponentials of one
    generator, so the residual is O(h^2).
    """
    if not 0 < h < tau:
        raise ConfigurationError(f"need 0 < h < tau, got h={h}, tau={tau}")
    if method is None:
        method = crank_nicolson(params.dt)
    _check_cap(grid)
    v = _check_profile(V)
    _, g = _generator(grid, v, params, method)

    def omega_bar_at(t):
        a = expm(g * t)
        return a.conj().T @ a

    a_mid = expm(g * tau)
    diff = (omega_bar_at(tau + h) - omega_bar_at(tau - h)) / (2.0 * h)
    target = -params.gamma * (a_mid.conj().T @ (v[:, None] * a_mid))
    return float(np.max(np.abs(diff - target)))


def trotter_factor(grid: Grid1D, V: PotentialProfile, gamma: float, dt: float) -> np.ndarray:
    """Diagonal of the per-step product factor: 1 on x > 0, exp(-gamma dt/2) on x < 0.

    Valid only for 0/1 projector profiles, where exp(-gamma dt V / 2)
    equals (1 - V) + V exp(-gamma dt / 2) nodewise.
    """
    if not V.is_projector:
        raise ConfigurationError("the product form needs a 0/1 projector profile")
    v = V.values.real
    return np.where(v == 1.0, np.exp(-0.5 * gamma * dt), 1.0)


def build_U_trotter(grid: Grid1D, V: PotentialProfile, params: ModelParams,
                    n_steps: int, method: EvolutionMethod | None = None) -> np.ndarray:
    """Time-ordered product of per-step suppression factors, interaction picture.

    U = exp(+iHtau/hbar) [D B_f]^K with B_f the exact free step over tau/K
    and D the diagonal product factor; converges to build_U at first order
    in 1/K.
    """
    if n_steps < 1:
        raise ConfigurationError(f"n_steps must be >= 1, got {n_steps}")
    if method is None:
        method = crank_nicolson(params.dt)
    _check_cap(grid)
    h = _hermitize(np.asarray(hamiltonian_for(method, grid, params), dtype=complex))
    w, q = np.linalg.eigh(h)
    dt = params.tau / n_steps
    d = trotter_factor(grid, V, params.gamma, dt)
    b_free = (q * np.exp(-1j * w * dt / params.hbar)[None, :]) @ q.conj().T
    m = d[:, None] * b_free
    prod = np.linalg.matrix_power(m, n_steps)
    phase = (q * np.exp(1j * w * params.tau / params.hbar)[None, :]) @ q.conj().T
    return phase @ prod
