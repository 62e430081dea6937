"""Sparse direct solves with a residual contract.

Backed by SuperLU through :mod:`scipy.sparse.linalg`.  The factorization is
kept so repeated solves with the same operator (fixed time step) only pay for
triangular substitutions.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import SolverError

DEFAULT_TOL = 1e-10
_MAX_REFINE = 3
_FLOOR_ULPS = 64


def equilibration(matrix):
    """Symmetric scaling ``r`` with ``max_j |r_i a_ij r_j| ~ 1`` (a few Ruiz sweeps)."""
    matrix = sp.csr_matrix(matrix)
    r = np.ones(matrix.shape[0])
    for _ in range(4):
        scaled = sp.diags(r) @ abs(matrix) @ sp.diags(r)
        rowmax = np.asarray(scaled.max(axis=1).todense()).ravel()
        rowmax[rowmax == 0.0] = 1.0
        r = r / np.sqrt(rowmax)
    return r


class Factorization:
    """LU of a square sparse matrix with iterative refinement.

    With ``equilibrate`` the operator is first scaled symmetrically and the
    residual contract applies to the scaled system, which is what keeps
    mixed-unit block systems (displacement and pressure) checkable in
    floating point.
    """

    def __init__(self, matrix, equilibrate=False, matvec=None):
        matrix = sp.csc_matrix(matrix)
        if matrix.shape[0] != matrix.shape[1]:
            raise SolverError(f"operator is not square: {matrix.shape}")
        # residuals use ``matvec`` when given (e.g. a cancellation-free form)
        self.matvec = matvec or matrix.__matmul__
        self.scale = equilibration(matrix) if equilibrate else None
        if self.scale is not None:
            matrix = sp.csc_matrix(sp.diags(self.scale) @ matrix @ sp.diags(self.scale))
        self.matrix = matrix
        self._abs = abs(matrix)
        try:
            self._lu = spla.splu(matrix)
        except RuntimeError as exc:  # "Factor is exactly singular"
            raise SolverError(f"factorization failed: {exc}") from exc

    def solve(self, rhs, tol=DEFAULT_TOL):
        rhs = np.asarray(rhs, dtype=float)
        if rhs.shape[0] != self.matrix.shape[0]:
            raise SolverError(f"rhs has {rhs.shape[0]} rows, operator {self.matrix.shape[0]}")
        r_scale = np.ones_like(rhs) if self.scale is None else self.scale
        rhs = r_scale * rhs
        bnorm = np.linalg.norm(rhs)
        if bnorm == 0.0:
            return np.zeros_like(rhs)
        x = self._lu.solve(rhs)
        for attempt in range(_MAX_REFINE + 1):
            r = rhs - r_scale * self.matvec(r_scale * x)
            rel = np.linalg.norm(r) / bnorm
            if not np.isfinite(rel):
                raise SolverError("solution is not finite", rel)
            # rounding floor of evaluating A x itself; binds only when x is
            # dominated by a near-null mode (tiny storage, closed boundaries)
            floor = _FLOOR_ULPS * np.finfo(float).eps * np.linalg.norm(self._abs @ np.abs(x))
            if rel <= tol or np.linalg.norm(r) <= floor:
                return r_scale * x
            if attempt < _MAX_REFINE:
                x = x + self._lu.solve(r)
        raise SolverError(f"relative residual {rel:.3e} above tolerance {tol:.1e}", rel)


def solve(matrix, rhs, tol=DEFAULT_TOL):
    """Solve ``matrix @ x = rhs`` to ``||rhs - matrix x|| <= tol ||rhs||``."""
    return Factorization(matrix).solve(rhs, tol)


class FactorCache:
    """Factorizations keyed by caller-chosen hashable keys (e.g. time step)."""

    def __init__(self, equilibrate=False):
        self._store = {}
        self.equilibrate = equilibrate

    def get(self, key, build, matvec=None):
        fac = self._store.get(key)
        if fac is None:
            fac = Factorization(build(), self.equilibrate, matvec)
            self._store[key] = fac
        return fac

    def clear(self):
        self._store.clear()
