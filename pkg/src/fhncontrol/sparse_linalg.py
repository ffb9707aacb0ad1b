"""Sparse storage and linear solves for Newton steps and adjoint sweeps.

Matrices are scipy CSR throughout; this module pins the solve contract:
either the returned solution satisfies the relative residual tolerance or
a typed error is raised. Direct factorization is the default (the system
matrix changes with the state Jacobian on every Newton step); an
ILU-preconditioned GMRES path exists for meshes too large to factor
comfortably.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class SingularSystemError(RuntimeError):
    """Direct factorization failed (structurally or numerically singular)."""


class IterativeSolveError(RuntimeError):
    """Iterative solver did not reach the tolerance within max_iter."""


@dataclass(frozen=True)
class LinearSolver:
    """Solve policy: 'direct' or 'ilu-gmres', with a residual contract."""

    method: str = "direct"
    tol: float = 1e-10
    max_iter: int = 500

    def __post_init__(self):
        if self.method not in ("direct", "ilu-gmres"):
            raise ValueError(f"unknown linear solver method {self.method!r}")


def as_csr(a) -> sp.csr_matrix:
    """Canonical CSR: sorted, duplicate-free column indices per row."""
    m = sp.csr_matrix(a)
    m.sum_duplicates()
    m.sort_indices()
    return m


def matvec(a, x) -> np.ndarray:
    if a.shape[1] != len(x):
        raise ValueError(f"matrix {a.shape} incompatible with vector of size {len(x)}")
    return a @ x


def add_scaled(a, b, alpha: float, beta: float) -> sp.csr_matrix:
    """alpha*A + beta*B with merged sparsity."""
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return as_csr(alpha * a + beta * b)


def factorize(a):
    """LU-factor a square sparse matrix; returns an object with .solve(b).

    Raises SingularSystemError when the factorization breaks down.
    """
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"matrix must be square, got {a.shape}")
    try:
        # minimum-degree on A' + A beats the default ordering for these
        # nearly structurally symmetric transport stencils
        return spla.splu(sp.csc_matrix(a), permc_spec="MMD_AT_PLUS_A")
    except RuntimeError as exc:  # SuperLU reports singularity this way
        raise SingularSystemError(str(exc)) from exc


def solve(a, b, solver: LinearSolver = LinearSolver()) -> np.ndarray:
    """Solve A x = b subject to the solver's residual contract."""
    b = np.asarray(b, dtype=float)
    if a.shape[0] != a.shape[1] or a.shape[0] != len(b):
        raise ValueError(f"matrix {a.shape} incompatible with rhs of size {len(b)}")
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros_like(b)

    if solver.method == "direct":
        x = factorize(a).solve(b)
        if not np.all(np.isfinite(x)):
            raise SingularSystemError("factorization produced non-finite solution")
    else:
        x = _ilu_gmres(a, b, solver)

    residual = np.linalg.norm(a @ x - b)
    if residual > max(solver.tol * bnorm, 1e2 * np.finfo(float).eps * bnorm):
        if solver.method == "direct":
            raise SingularSystemError(
                f"direct solve residual {residual:.3e} exceeds {solver.tol:.1e} * |b|")
        raise IterativeSolveError(
            f"iterative solve residual {residual:.3e} exceeds {solver.tol:.1e} * |b|")
    return x


def _ilu_gmres(a, b, solver: LinearSolver) -> np.ndarray:
    a = sp.csc_matrix(a)
    try:
        ilu = spla.spilu(a, drop_tol=1e-5, fill_factor=20)
    except RuntimeError as exc:
        raise SingularSystemError(f"ILU factorization failed: {exc}") from exc
    precond = spla.LinearOperator(a.shape, ilu.solve)
    x, info = spla.gmres(a, b, rtol=solver.tol, atol=0.0, M=precond,
                         maxiter=solver.max_iter, restart=50)
    if info != 0:
        raise IterativeSolveError(f"GMRES stopped with info={info} "
                                  f"after {solver.max_iter} iterations")
    return x
