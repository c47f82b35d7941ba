"""Backend selection for the numeric inner loops.

The compiled extension is used when it imports; otherwise the numpy
fallback serves the same signatures. ``use_backend`` switches explicitly,
mainly for tests and benchmarks.
"""

from __future__ import annotations

import numpy as np

from . import _kernels_py

try:
    from . import _kernels as _native
except ImportError:  # extension not built
    _native = None

VI_TOL = 1e-12
MAX_ITER = 1_000_000

_impl = _native if _native is not None else _kernels_py
BACKEND = "cython" if _native is not None else "python"


def available_backends() -> list[str]:
    return ["python"] + (["cython"] if _native is not None else [])


def use_backend(name: str) -> str:
    """Select ``"cython"`` or ``"python"``; returns the previous backend."""
    global _impl, BACKEND
    if name == "cython":
        if _native is None:
            raise RuntimeError("compiled kernels are not built")
        impl = _native
    elif name == "python":
        impl = _kernels_py
    else:
        raise ValueError(f"unknown backend {name!r}")
    previous = BACKEND
    _impl, BACKEND = impl, name
    return previous


def value_iteration(T, R, gamma, tol=VI_TOL, max_iter=MAX_ITER):
    """Optimal-control fixed point from ``V = 0``.

    ``T[s, a, s']`` transition, ``R[s, a]`` reward. Returns ``(Q, V,
    iterations, residual)`` with ``V = max_a Q`` exactly and residual the
    last sup-norm change of ``V``.
    """
    T = np.ascontiguousarray(T, dtype=np.float64)
    R = np.ascontiguousarray(R, dtype=np.float64)
    return _impl.value_iteration(T, R, float(gamma), float(tol), int(max_iter))


def policy_evaluation(T, r, gamma, tol=VI_TOL, max_iter=MAX_ITER):
    """Linear fixed point ``V = r + gamma T V`` from ``V = 0``."""
    T = np.ascontiguousarray(T, dtype=np.float64)
    r = np.ascontiguousarray(r, dtype=np.float64)
    return _impl.policy_evaluation(T, r, float(gamma), float(tol), int(max_iter))


def assemble(weights, keys, rows, rewards, qvals):
    """Weighted sums of per-key rows, accumulated in member order."""
    return _impl.assemble(
        np.ascontiguousarray(weights, dtype=np.float64),
        np.ascontiguousarray(keys, dtype=np.int64),
        np.ascontiguousarray(rows, dtype=np.float64),
        np.ascontiguousarray(rewards, dtype=np.float64),
        np.ascontiguousarray(qvals, dtype=np.float64),
    )
