"""Jacobi-preconditioned conjugate gradients on grid-shaped arrays."""

from __future__ import annotations

import numpy as np

from .errors import ConvergenceError


def pcg(apply, b, x0=None, diag=None, rtol=1e-10, maxiter=None, atol=0.0):
    """Solve ``apply(x) = b`` for a symmetric positive definite operator.

    Stops when ``||r|| <= max(rtol ||b||, atol)``.  Returns ``(x, history)``
    where ``history`` lists the relative residuals, starting with the initial
    one.  Raises :class:`ConvergenceError` after ``maxiter`` iterations
    (default ``10 * b.size``).
    """
    b = np.asarray(b, dtype=float)
    maxiter = 10 * b.size if maxiter is None else maxiter
    bnorm = float(np.sqrt(np.vdot(b, b)))
    if bnorm == 0.0:
        return np.zeros_like(b), [0.0]
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    r = b - apply(x) if x0 is not None else b.copy()
    inv = 1.0 / diag if diag is not None else None
    target = max(rtol * bnorm, atol)
    rnorm = float(np.sqrt(np.vdot(r, r)))
    history = [rnorm / bnorm]
    if rnorm <= target:
        return x, history
    s = r * inv if inv is not None else r.copy()
    p = s.copy()
    rs = float(np.vdot(r, s))
    for _ in range(maxiter):
        q = apply(p)
        alpha = rs / float(np.vdot(p, q))
        x += alpha * p
        r -= alpha * q
        rnorm = float(np.sqrt(np.vdot(r, r)))
        history.append(rnorm / bnorm)
        if not np.isfinite(rnorm):
            raise ConvergenceError("CG produced a non-finite residual", history)
        if rnorm <= target:
            return x, history
        s = r * inv if inv is not None else r
        rs_new = float(np.vdot(r, s))
        p = s + (rs_new / rs) * p
        rs = rs_new
    raise ConvergenceError(
        f"CG did not reach rtol={rtol:g} in {maxiter} iterations "
        f"(last relative residual {history[-1]:.3e})",
        history,
    )
