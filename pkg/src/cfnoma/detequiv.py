"""Deterministic-equivalent SINR machinery for the regularized precoder.

With uncorrelated antennas every per-cluster covariance is a scalar multiple
of the identity, so the resolvent traces collapse to scalars and the whole
computation runs on (M, N) arrays.  ``dense_reference`` keeps an explicit
L x L matrix implementation of the same quantities as a guard against a wrong
collapse.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceFailure, IllConditionedSystem
from .estimation import EstimationStats
from .noma import PowerAllocation
from .rates import sic_interference_weights


@dataclass(frozen=True)
class DetEquivState:
    """Converged fixed-point quantities, one row per AP."""

    e: np.ndarray            # (M, N) resolvent traces
    t: np.ndarray            # (M,) scalar resolvent (T_m = t_m I)
    e_prime: np.ndarray      # (M, N) derivative traces, feeds the norm psi_o
    e_prime_dir: np.ndarray  # (M, N, N) [m, j, n] = direction-n derivative, entry j
    psi_o: np.ndarray        # (M, N) asymptotic squared precoder norm
    upsilon: np.ndarray      # (M, N) inter-cluster leakage kernel
    iterations: int
    residual: float          # scaled sup-norm residual at convergence


def solve_fixed_point(theta_bar: np.ndarray, alpha: float, L: int,
                      tol: float = 1e-12, max_iter: int = 10000):
    """Picard iteration for the resolvent traces, started at 1/alpha.

    Convergence is declared when the sup-norm update is below
    ``tol * max(1, |e|)`` entrywise; a purely absolute threshold is not
    representable in double precision once the noise-normalized traces reach
    ~1e6.  Returns (e, t, iterations, residual).
    """
    if alpha <= 0:
        raise ValueError("regularization must be positive")
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    theta_bar = np.asarray(theta_bar, dtype=float)
    M, N = theta_bar.shape
    if N == 0:
        return (np.zeros((M, 0)), np.full(M, 1.0 / alpha), 0, 0.0)

    e = np.full((M, N), 1.0 / alpha)
    for it in range(1, max_iter + 1):
        t = 1.0 / ((theta_bar / (1.0 + e)).sum(axis=1) / L + alpha)
        e_next = theta_bar * t[:, None]
        scaled = np.abs(e_next - e) / np.maximum(1.0, np.abs(e_next))
        residual = float(scaled.max())
        e = e_next
        if residual <= tol:
            return e, t, it, residual
    raise ConvergenceFailure(
        f"fixed point did not reach tol={tol} after {max_iter} iterations",
        residual=residual, iterations=max_iter,
    )


def derivative_terms(e: np.ndarray, t: np.ndarray, theta_bar: np.ndarray,
                     L: int):
    """Solve the per-AP linear systems for the derivative traces.

    Returns ``e_prime`` (M, N) and the directional array ``e_prime_dir``
    (M, N, N) whose [m, j, n] entry is the j-th component of the direction-n
    derivative vector.
    """
    theta_bar = np.asarray(theta_bar, dtype=float)
    M, N = theta_bar.shape
    tsq = t ** 2                                           # (M,)
    damp = theta_bar / (1.0 + e) ** 2                      # (M, N)
    coupling = np.einsum("mi,mj->mij", theta_bar, damp) * (tsq[:, None, None] / L)
    system = np.eye(N)[None, :, :] - coupling              # (M, N, N)

    v = theta_bar * tsq[:, None]                           # (M, N)
    # Directional right-hand sides are the base one scaled by theta_bar of the
    # direction; stack everything into a single batched solve.
    rhs = np.concatenate(
        [v[:, :, None], v[:, :, None] * theta_bar[:, None, :]], axis=2
    )                                                      # (M, N, 1 + N)
    try:
        sol = np.linalg.solve(system, rhs)
    except np.linalg.LinAlgError as exc:
        raise IllConditionedSystem(
            "derivative system (I - J) is numerically singular"
        ) from exc
    return sol[:, :, 0], sol[:, :, 1:]


def psi_and_upsilon(e: np.ndarray, e_prime: np.ndarray, e_prime_dir: np.ndarray,
                    p_n: np.ndarray, L: int):
    """Asymptotic precoder norms and the inter-cluster leakage kernel.

    The leakage sum runs over the other clusters only; the self direction is
    computed but excluded here.
    """
    one_plus_sq = (1.0 + e) ** 2
    psi_o = e_prime / (L * one_plus_sq)
    # term[m, n', n] = p_n' * e'_{n',(m,n)} / (psi_o[m,n'] * (1 + e[m,n'])^2)
    weight = np.asarray(p_n, dtype=float)[None, :] / (psi_o * one_plus_sq)  # (M, N)
    term = e_prime_dir * weight[:, :, None]
    upsilon = (term.sum(axis=1) - np.einsum("mnn->mn", term)) / L
    return psi_o, upsilon


def solve(theta_bar: np.ndarray, alpha: float, L: int, p_n: np.ndarray,
          tol: float = 1e-12, max_iter: int = 10000) -> DetEquivState:
    """Run the full deterministic-equivalent pipeline for every AP."""
    e, t, iterations, residual = solve_fixed_point(theta_bar, alpha, L, tol, max_iter)
    e_prime, e_prime_dir = derivative_terms(e, t, theta_bar, L)
    psi_o, upsilon = psi_and_upsilon(e, e_prime, e_prime_dir, p_n, L)
    return DetEquivState(e=e, t=t, e_prime=e_prime, e_prime_dir=e_prime_dir,
                         psi_o=psi_o, upsilon=upsilon,
                         iterations=iterations, residual=residual)


def sinr_mrzf_noma(state: DetEquivState, stats: EstimationStats,
                   power: PowerAllocation, rho) -> np.ndarray:
    """Large-system SINR for the regularized local precoder."""
    e, psi_o, upsilon = state.e, state.psi_o, state.upsilon
    weight = e / ((1.0 + e) * np.sqrt(psi_o))              # (M, N)
    coherent = (stats.c * weight[:, :, None]).sum(axis=0) ** 2   # (N, K)
    intra = sic_interference_weights(power.p_nk, rho)
    leak_kernel = (stats.c ** 2 / (1.0 + e[:, :, None]) ** 2 + stats.a ** 2)
    leak = (upsilon[:, :, None] * leak_kernel).sum(axis=0)       # (N, K)
    return power.p_nk * coherent / (coherent * intra + leak + 1.0)


# --- dense-matrix reference (validation only) ---------------------------------

def dense_reference(theta_bar_row: np.ndarray, alpha: float, L: int,
                    p_n: np.ndarray, tol: float = 1e-12, max_iter: int = 10000) -> dict:
    """Single-AP recomputation with explicit L x L matrices and traces.

    Deliberately mirrors the matrix-valued definitions term by term (resolvent,
    trace ratios, derivative system, leakage kernel) so that any error in the
    scalar collapse of the production path shows up as a mismatch.
    """
    theta_bar_row = np.asarray(theta_bar_row, dtype=float)
    N = theta_bar_row.size
    eye = np.eye(L)
    thetas = [tb * eye for tb in theta_bar_row]

    e = np.full(N, 1.0 / alpha)
    for it in range(1, max_iter + 1):
        acc = sum(thetas[j] / (1.0 + e[j]) for j in range(N)) / L + alpha * eye
        T = np.linalg.inv(acc)
        e_next = np.array([np.trace(thetas[j] @ T).real / L for j in range(N)])
        scaled = np.abs(e_next - e) / np.maximum(1.0, np.abs(e_next))
        if scaled.max() <= tol:
            e = e_next
            break
        e = e_next
    else:
        raise ConvergenceFailure("dense fixed point did not converge",
                                 residual=float(scaled.max()), iterations=max_iter)

    acc = sum(thetas[j] / (1.0 + e[j]) for j in range(N)) / L + alpha * eye
    T = np.linalg.inv(acc)

    J = np.empty((N, N))
    for i in range(N):
        for j in range(N):
            J[i, j] = (np.trace(thetas[i] @ T @ thetas[j] @ T).real / L
                       / (L * (1.0 + e[j]) ** 2))
    v = np.array([np.trace(thetas[j] @ T @ T).real / L for j in range(N)])
    e_prime = np.linalg.solve(np.eye(N) - J, v)

    e_prime_dir = np.empty((N, N))  # [j, n]
    for n in range(N):
        v_n = np.array([np.trace(thetas[j] @ T @ thetas[n] @ T).real / L
                        for j in range(N)])
        e_prime_dir[:, n] = np.linalg.solve(np.eye(N) - J, v_n)

    # Derivative resolvent route: T' must reproduce e_prime.
    mid = sum(thetas[j] * (e_prime[j] / (1.0 + e[j]) ** 2) for j in range(N)) / L + eye
    T_prime = T @ mid @ T
    e_prime_from_resolvent = np.array(
        [np.trace(thetas[j] @ T_prime).real / L for j in range(N)]
    )

    psi_o = e_prime / (L * (1.0 + e) ** 2)
    upsilon = np.zeros(N)
    for n in range(N):
        for j in range(N):
            if j == n:
                continue
            upsilon[n] += (p_n[j] * e_prime_dir[j, n]
                           / (psi_o[j] * (1.0 + e[j]) ** 2))
    upsilon /= L

    return {
        "e": e, "T": T, "e_prime": e_prime, "e_prime_dir": e_prime_dir,
        "e_prime_from_resolvent": e_prime_from_resolvent,
        "psi_o": psi_o, "upsilon": upsilon, "iterations": it,
    }
