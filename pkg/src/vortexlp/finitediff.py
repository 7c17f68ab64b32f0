"""Central finite-difference helpers with scale-aware step sizes.

Steps default to eps^(1/3) * max(1, |x_k|) per coordinate for first
derivatives and eps^(1/4) * max(1, |x_k|) for second derivatives, the
standard accuracy/roundoff compromise for central differences.
"""

from __future__ import annotations

import numpy as np

_EPS = float(np.finfo(float).eps)
STEP_GRADIENT = _EPS ** (1.0 / 3.0)
STEP_HESSIAN = _EPS ** 0.25


def _steps(x: np.ndarray, scale: float) -> np.ndarray:
    return scale * np.maximum(1.0, np.abs(x))


def gradient(f, x, scale: float = STEP_GRADIENT) -> np.ndarray:
    """Central-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=float)
    h = _steps(x, scale)
    g = np.empty_like(x)
    for k in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[k] += h[k]
        xm[k] -= h[k]
        g[k] = (f(xp) - f(xm)) / (2.0 * h[k])
    return g


def jacobian(F, x, scale: float = STEP_GRADIENT, steps=None) -> np.ndarray:
    """Central-difference Jacobian of a vector function, one column per
    coordinate.  ``steps`` overrides the per-coordinate step sizes."""
    x = np.asarray(x, dtype=float)
    h = np.asarray(steps, dtype=float) if steps is not None else _steps(x, scale)
    columns = []
    for k in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[k] += h[k]
        xm[k] -= h[k]
        columns.append((np.asarray(F(xp)) - np.asarray(F(xm))) / (2.0 * h[k]))
    return np.column_stack(columns)


def hessian(f, x, scale: float = STEP_HESSIAN) -> np.ndarray:
    """Central-difference Hessian of a scalar function (symmetric output)."""
    x = np.asarray(x, dtype=float)
    h = _steps(x, scale)
    n = x.size
    H = np.empty((n, n))
    f0 = f(x)
    for i in range(n):
        xp = x.copy()
        xm = x.copy()
        xp[i] += h[i]
        xm[i] -= h[i]
        H[i, i] = (f(xp) - 2.0 * f0 + f(xm)) / h[i] ** 2
    for i in range(n):
        for j in range(i + 1, n):
            xpp = x.copy(); xpm = x.copy(); xmp = x.copy(); xmm = x.copy()
            xpp[i] += h[i]; xpp[j] += h[j]
            xpm[i] += h[i]; xpm[j] -= h[j]
            xmp[i] -= h[i]; xmp[j] += h[j]
            xmm[i] -= h[i]; xmm[j] -= h[j]
            H[i, j] = H[j, i] = (f(xpp) - f(xpm) - f(xmp) + f(xmm)) / (4.0 * h[i] * h[j])
    return H
