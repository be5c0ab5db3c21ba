"""Lowest-eigenpair solvers: Lanczos with full reorthogonalization plus a
dense fallback for small matrices and oracle tests.

Operators only need ``dim``, ``matvec(x)``, ``to_dense()`` and
``norm_estimate()``; BlockHamiltonian and ProjectedHamiltonian provide them.
Full reorthogonalization is deliberate: the matrix dimensions used here make
the extra O(dim * iters^2) work cheap, and it removes the ghost copies of
converged eigenvalues that would otherwise corrupt scaling fits.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh, eigh_tridiagonal

from .errors import ConvergenceError

__all__ = ["GroundState", "MatrixOperator", "ground_state", "lowest_pair"]

DENSE_CUTOFF = 2000
_CHUNK = 80


@dataclass
class MatrixOperator:
    """Adapter exposing a dense symmetric ndarray through the operator protocol."""

    matrix: np.ndarray

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self.matrix @ x

    def to_dense(self) -> np.ndarray:
        return self.matrix

    def norm_estimate(self) -> float:
        return float(np.abs(self.matrix).sum(axis=1).max())


@dataclass
class GroundState:
    """A converged eigenpair with enough metadata to reproduce and audit it.

    ``vector`` always lives in the full (unprojected) flat basis; solves done
    inside a parity sector are expanded before being stored here, and
    ``sector`` records where the solve happened.
    """

    energy: float
    vector: np.ndarray = field(repr=False)
    basis: str
    n_tr: int | None
    sector: str
    residual: float
    iterations: int
    method: str
    n_atoms: int | None = None
    ritz_history: tuple = field(default=(), repr=False)

    @property
    def table(self) -> np.ndarray:
        """Coefficients as an (N+1, n_tr+1) sector-major table."""
        if self.n_atoms is None or self.n_tr is None:
            raise ValueError("no sector structure attached to this state")
        return self.vector.reshape(self.n_atoms + 1, self.n_tr + 1)


def _canonical_sign(vec: np.ndarray) -> np.ndarray:
    i = int(np.argmax(np.abs(vec)))
    return -vec if vec[i] < 0 else vec


def _lanczos_lowest(op, nev: int, tol: float, seed: int, max_iter: int,
                    v0: np.ndarray | None = None):
    """Lanczos with full (two-pass) reorthogonalization.

    Returns (values, vectors, iterations, ritz_history).  Convergence needs
    both a stable Ritz value and a small residual bound beta*|s_last|; the
    returned vectors carry explicitly computed residuals upstream.
    """
    dim = op.dim
    scale = max(op.norm_estimate(), 1e-300)
    rng = np.random.default_rng(seed)
    if v0 is not None and np.linalg.norm(v0) > 1e-12:
        q = np.asarray(v0, dtype=float).copy()
    else:
        q = rng.standard_normal(dim)
    q /= np.linalg.norm(q)

    max_iter = min(max_iter, dim)
    Q = np.empty((dim, min(_CHUNK, max_iter + 1)))
    Q[:, 0] = q
    alphas: list[float] = []
    betas: list[float] = []
    ritz_history: list[float] = []
    theta_prev = np.inf

    m = 0
    while m < max_iter:
        if m + 1 >= Q.shape[1]:
            extra = np.empty((dim, min(_CHUNK, max_iter + 1 - Q.shape[1])))
            Q = np.hstack([Q, extra])
        w = op.matvec(Q[:, m])
        alpha = float(Q[:, m] @ w)
        alphas.append(alpha)
        w -= alpha * Q[:, m]
        if m > 0:
            w -= betas[-1] * Q[:, m - 1]
        # two-pass Gram-Schmidt against every stored vector kills the
        # rounding-induced loss of orthogonality (ghost eigenvalues)
        w -= Q[:, : m + 1] @ (Q[:, : m + 1].T @ w)
        w -= Q[:, : m + 1] @ (Q[:, : m + 1].T @ w)
        beta = float(np.linalg.norm(w))
        m += 1

        if beta < 1e-14 * scale:
            # invariant subspace: Ritz pairs are exact; top up with a fresh
            # random direction if more pairs are still needed
            if m >= nev:
                betas.append(0.0)
                break
            w = rng.standard_normal(dim)
            w -= Q[:, :m] @ (Q[:, :m].T @ w)
            beta = float(np.linalg.norm(w))
        betas.append(beta)
        Q[:, m] = w / beta

        if m >= max(nev + 1, 3):
            try:
                theta, s = eigh_tridiagonal(
                    np.asarray(alphas),
                    np.asarray(betas[:-1]),
                    select="i",
                    select_range=(0, nev - 1),
                )
            except np.linalg.LinAlgError:
                continue
            ritz_history.append(float(theta[0]))
            bound = beta * np.max(np.abs(s[-1, :]))
            theta_stable = abs(theta[0] - theta_prev) <= tol * max(1.0, abs(theta[0]))
            theta_prev = theta[0]
            if bound <= tol * scale and theta_stable:
                break

    theta, s = eigh_tridiagonal(
        np.asarray(alphas),
        np.asarray(betas[: len(alphas) - 1]) if len(alphas) > 1 else np.empty(0),
        select="i",
        select_range=(0, min(nev, len(alphas)) - 1),
    )
    vecs = Q[:, : len(alphas)] @ s
    # residual check on exit; refuse to hand back a silent partial answer
    worst = 0.0
    for i in range(vecs.shape[1]):
        v = vecs[:, i]
        v /= np.linalg.norm(v)
        vecs[:, i] = v
        worst = max(worst, float(np.linalg.norm(op.matvec(v) - theta[i] * v)))
    if worst > 10.0 * tol * scale:
        raise ConvergenceError(
            f"Lanczos did not converge in {m} iterations "
            f"(residual {worst:.3e}, target {tol * scale:.3e})",
            residual=worst,
        )
    return theta, vecs, m, ritz_history


def _metadata(h) -> dict:
    params = getattr(h, "params", None)
    return {
        "basis": getattr(h, "basis", "generic"),
        "n_tr": getattr(h, "n_tr", None),
        "sector": getattr(h, "sector", "full"),
        "n_atoms": params.n_atoms if params is not None else None,
    }


def _package(h, energy, vec, iterations, method, history) -> GroundState:
    resid = float(np.linalg.norm(h.matvec(vec) - energy * vec))
    full_vec = h.expand(vec) if hasattr(h, "expand") else vec
    full_vec = _canonical_sign(full_vec)
    return GroundState(
        energy=float(energy),
        vector=full_vec,
        residual=resid,
        iterations=iterations,
        method=method,
        ritz_history=tuple(history),
        **_metadata(h),
    )


def ground_state(h, tol: float = 1e-10, seed: int = 0,
                 max_iter: int | None = None, dense_cutoff: int = DENSE_CUTOFF,
                 v0: np.ndarray | None = None) -> GroundState:
    """Lowest eigenpair of a symmetric operator.

    Deterministic for a fixed seed.  Falls back to a dense solver below
    ``dense_cutoff``; raises ConvergenceError (with the best residual) instead
    of returning an unconverged pair.  ``v0`` optionally seeds the Krylov
    space (e.g. the solution at the previous truncation).
    """
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    if h.dim <= dense_cutoff:
        vals, vecs = eigh(h.to_dense(), subset_by_index=(0, 0))
        return _package(h, vals[0], vecs[:, 0], 0, "dense", ())
    if max_iter is None:
        max_iter = min(h.dim, 2500)
    theta, vecs, m, hist = _lanczos_lowest(h, 1, tol, seed, max_iter, v0=v0)
    return _package(h, theta[0], vecs[:, 0], m, "lanczos", hist)


def lowest_pair(h, tol: float = 1e-10, seed: int = 0,
                max_iter: int | None = None, dense_cutoff: int = DENSE_CUTOFF):
    """Two lowest eigenpairs, mutually orthogonal."""
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    if h.dim <= dense_cutoff:
        vals, vecs = eigh(h.to_dense(), subset_by_index=(0, 1))
        g0 = _package(h, vals[0], vecs[:, 0], 0, "dense", ())
        g1 = _package(h, vals[1], vecs[:, 1], 0, "dense", ())
        return g0, g1
    if max_iter is None:
        max_iter = min(h.dim, 2500)
    theta, vecs, m, hist = _lanczos_lowest(h, 2, tol, seed, max_iter)
    v0, v1 = vecs[:, 0], vecs[:, 1]
    v1 = v1 - (v0 @ v1) * v0
    v1 /= np.linalg.norm(v1)
    g0 = _package(h, theta[0], v0, m, "lanczos", hist)
    g1 = _package(h, theta[1], v1, m, "lanczos", ())
    return g0, g1
