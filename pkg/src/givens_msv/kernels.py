"""Backend dispatch for the batched hot kernels.

The compiled ``_ckernels`` extension is used when it imports; otherwise the
NumPy implementation in ``_pykernels`` is used. Set ``GIVENS_MSV_BACKEND=python``
to force the fallback. Both expose identical functions; :func:`get_backend`
returns either module explicitly (tests and the benchmark use it to compare).
"""

import os

import numpy as np

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

__all__ = [
    "BACKEND",
    "available_backends",
    "get_backend",
    "logdens_grad",
    "reconstruct",
    "rotate",
    "rotate_transpose",
    "tridiag_sample",
    "whiten",
]


def available_backends():
    names = ["python"]
    if _ckernels is not None:
        names.insert(0, "cython")
    return names


def _select():
    wanted = os.environ.get("GIVENS_MSV_BACKEND", "").strip().lower()
    if wanted == "python" or _ckernels is None:
        return "python"
    return "cython"


BACKEND = _select()


class _Dispatch:
    """Thin adapter that coerces inputs before calling a backend module."""

    def __init__(self, module):
        self.module = module
        self.name = "cython" if module is _ckernels else "python"

    @staticmethod
    def _m(a):
        return np.ascontiguousarray(a, dtype=np.float64)

    @staticmethod
    def _v(a):
        return np.ascontiguousarray(np.atleast_1d(a), dtype=np.float64)

    def rotate_transpose(self, omega, V):
        return self.module.rotate_transpose(self._m(omega), self._m(V))

    def rotate(self, omega, V):
        return self.module.rotate(self._m(omega), self._m(V))

    def whiten(self, h, omega, R):
        return self.module.whiten(self._m(h), self._m(omega), self._m(R))

    def logdens_grad(self, h, omega, R):
        return self.module.logdens_grad(self._m(h), self._m(omega), self._m(R))

    def reconstruct(self, h, omega):
        return self.module.reconstruct(self._m(h), self._m(omega))

    def tridiag_sample(self, phi, sigma, level, zeta, U, Z):
        return self.module.tridiag_sample(
            self._v(phi), self._v(sigma), self._v(level), float(zeta), self._m(U), self._m(Z)
        )


_BACKENDS = {"python": _Dispatch(_pykernels)}
if _ckernels is not None:
    _BACKENDS["cython"] = _Dispatch(_ckernels)


def get_backend(name=None):
    """Return the dispatcher for ``name`` (default: the active backend)."""
    if name is None:
        name = BACKEND
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(f"backend {name!r} not available; have {sorted(_BACKENDS)}") from None


_active = _BACKENDS[BACKEND]
rotate_transpose = _active.rotate_transpose
rotate = _active.rotate
whiten = _active.whiten
logdens_grad = _active.logdens_grad
reconstruct = _active.reconstruct
tridiag_sample = _active.tridiag_sample
