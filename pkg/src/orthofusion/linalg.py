"""Singular value decomposition by one-sided Jacobi rotations.

Used by the differentiable nuclear-norm op, which needs the full set of
singular triplets with factors it can cache for the backward pass.
"""

from __future__ import annotations

import numpy as np

from .validation import ConfigError, NumericError


def _round_robin_rounds(m: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Partition all column pairs of an m-column matrix into rounds.

    Circle-method tournament schedule: every round pairs disjoint columns,
    so the rotations within a round are independent and can be applied as
    one vectorized update. All m*(m-1)/2 pairs appear exactly once per sweep.
    """
    cols = list(range(m))
    if m % 2 == 1:
        cols.append(m)  # dummy; pairs touching it are skipped
    k = len(cols)
    rounds = []
    for _ in range(k - 1):
        p_idx, q_idx = [], []
        for i in range(k // 2):
            a, b = cols[i], cols[k - 1 - i]
            if a < m and b < m:
                p_idx.append(min(a, b))
                q_idx.append(max(a, b))
        rounds.append((np.asarray(p_idx, dtype=np.intp), np.asarray(q_idx, dtype=np.intp)))
        cols = [cols[0], cols[-1]] + cols[1:-1]
    return rounds


def jacobi_svd(a, tol: float = 1e-14, max_sweeps: int = 60):
    """Full SVD ``a = u @ diag(s) @ v.T`` via one-sided (Hestenes) Jacobi.

    Plane rotations orthogonalize the columns of the working matrix; the
    rotated columns become ``u`` (normalized) and the accumulated rotations
    become ``v``. Wide inputs are decomposed through their transpose so the
    rotation loop always runs over the short side.

    Parameters
    ----------
    a : array_like of shape (r, c)
        Finite real matrix.
    tol : float
        Relative off-diagonal tolerance: columns p, q count as orthogonal
        when ``|wp . wq| <= tol * ||wp|| * ||wq||``.
    max_sweeps : int
        Sweep budget before declaring non-convergence.

    Returns
    -------
    u : ndarray of shape (r, k), s : ndarray of shape (k,), v : ndarray of shape (c, k)
        k = min(r, c); singular values sorted descending. Singular values
        below ~8*eps*||a||_F are numerically indistinguishable from the
        roundoff floor and are returned as exact zeros, with zero vectors
        in the corresponding columns of ``u``.

    Raises
    ------
    NumericError
        If a full sweep still rotates after ``max_sweeps`` sweeps.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.size == 0:
        raise ConfigError(f"jacobi_svd expects a non-empty 2-d matrix, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise ConfigError("jacobi_svd input contains non-finite values")
    if not tol > 0:
        raise ConfigError("tol must be positive")
    if max_sweeps < 1:
        raise ConfigError("max_sweeps must be >= 1")

    transposed = a.shape[0] < a.shape[1]
    w = (a.T if transposed else a).copy()
    m = w.shape[1]
    v = np.eye(m)
    rounds = _round_robin_rounds(m) if m > 1 else []
    # Columns below this norm are numerically zero (roundoff residue of a
    # rotation that annihilated a dependent column); rotating them against
    # anything would chase noise and stall convergence.
    floor_sq = (8.0 * np.finfo(np.float64).eps) ** 2 * float((w * w).sum())

    sweeps = 0
    while m > 1:
        rotated = False
        for p_idx, q_idx in rounds:
            wp = w[:, p_idx]
            wq = w[:, q_idx]
            alpha = np.einsum("ij,ij->j", wp, wp)
            beta = np.einsum("ij,ij->j", wq, wq)
            gamma = np.einsum("ij,ij->j", wp, wq)
            active = (
                (np.abs(gamma) > tol * np.sqrt(alpha * beta))
                & (alpha > floor_sq)
                & (beta > floor_sq)
            )
            if not active.any():
                continue
            rotated = True
            theta = np.where(active, 0.5 * np.arctan2(2.0 * gamma, alpha - beta), 0.0)
            c = np.cos(theta)
            s = np.sin(theta)
            w[:, p_idx] = c * wp + s * wq
            w[:, q_idx] = c * wq - s * wp
            vp = v[:, p_idx]
            vq = v[:, q_idx]
            v[:, p_idx] = c * vp + s * vq
            v[:, q_idx] = c * vq - s * vp
        if not rotated:
            break
        sweeps += 1
        if sweeps >= max_sweeps:
            raise NumericError(
                f"one-sided Jacobi SVD did not converge after {sweeps} sweeps "
                f"(shape {a.shape}, tol {tol:g})"
            )

    norms = np.sqrt(np.einsum("ij,ij->j", w, w))
    norms[norms * norms <= floor_sq] = 0.0
    order = np.argsort(-norms, kind="stable")
    s = norms[order]
    w = w[:, order]
    v = v[:, order]
    u = np.zeros_like(w)
    pos = s > 0
    u[:, pos] = w[:, pos] / s[pos]
    if transposed:
        return v, s, u
    return u, s, v


def nuclear_norm_value(a, tol: float = 1e-14, max_sweeps: int = 60) -> float:
    """Sum of singular values of ``a`` (convenience wrapper over jacobi_svd)."""
    _, s, _ = jacobi_svd(a, tol=tol, max_sweeps=max_sweeps)
    return float(s.sum())
