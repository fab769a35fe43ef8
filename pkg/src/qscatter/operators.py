"""Dense finite-dimensional operator algebra.

Operators are plain complex ``numpy`` arrays of shape ``(d, d)``; the
:class:`HilbertSpace` label is bookkeeping for composite systems and is
never required by the numerical routines.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg

from .errors import ArgumentError, CapacityError, SingularityError

#: Upper bound on the dimension of any single dense operator we build.
MAX_DIM = 4096

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)


@dataclass(frozen=True)
class HilbertSpace:
    label: str
    dim: int

    def __post_init__(self):
        if int(self.dim) < 1:
            raise ArgumentError(f"space {self.label!r} needs dim >= 1, got {self.dim}")

    def __mul__(self, other: "HilbertSpace") -> "HilbertSpace":
        labels = self.label.split("*") + other.label.split("*")
        if len(set(labels)) != len(labels):
            raise ArgumentError(f"duplicate factor labels in {labels}")
        return HilbertSpace("*".join(labels), self.dim * other.dim)


@dataclass(frozen=True)
class PhysicalConstants:
    """Reduced Planck constant and speed of light (natural units by default)."""

    hbar: float = 1.0
    c: float = 1.0

    def __post_init__(self):
        if not (self.hbar > 0 and self.c > 0):
            raise ArgumentError(f"constants must be positive, got hbar={self.hbar}, c={self.c}")


def as_operator(a) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ArgumentError(f"operator must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ArgumentError("operator has non-finite entries")
    return a


def tensor(a, b, max_dim: int = MAX_DIM) -> np.ndarray:
    """Kronecker product ``a (x) b`` with a capacity guard."""
    a, b = as_operator(a), as_operator(b)
    dim = a.shape[0] * b.shape[0]
    if dim > max_dim:
        raise CapacityError(f"tensor product dimension {dim} exceeds limit {max_dim}")
    return np.kron(a, b)


def tensor_all(*ops, max_dim: int = MAX_DIM) -> np.ndarray:
    out = np.eye(1, dtype=complex)
    for op in ops:
        out = tensor(out, op, max_dim=max_dim)
    return out


def dagger(a: np.ndarray) -> np.ndarray:
    return np.swapaxes(a, -1, -2).conj()


def _phi1(a: np.ndarray) -> np.ndarray:
    # sum_k a^k/(k+1)!, read off the exponential of an augmented block matrix
    d = a.shape[0]
    m = np.zeros((2 * d, 2 * d), dtype=complex)
    m[:d, :d] = a
    m[:d, d:] = np.eye(d)
    return scipy.linalg.expm(m)[:d, d:]


def _phi2(a: np.ndarray) -> np.ndarray:
    # sum_k a^k/(k+2)!
    d = a.shape[0]
    m = np.zeros((3 * d, 3 * d), dtype=complex)
    m[:d, :d] = a
    m[:d, d:2 * d] = np.eye(d)
    m[d:2 * d, 2 * d:] = np.eye(d)
    return scipy.linalg.expm(m)[:d, 2 * d:]


def matrix_function(a, kind: str) -> np.ndarray:
    """Evaluate one of the analytic matrix functions used by the limit triples.

    Parameters
    ----------
    a : array_like
        Square matrix ``E``.
    kind : {'exp_neg_i', 'cayley', 'phi', 'sine_remainder'}
        ``exp_neg_i`` is ``exp(-iE)``; ``cayley`` is
        ``(I - iE/2)(I + iE/2)^{-1}``; ``phi`` is ``(exp(-iE) - I)/E`` and
        ``sine_remainder`` is ``(E - sin E)/E^2``.  The last two are entire
        functions and are evaluated through their power series (as blocks of
        an augmented exponential), so singular ``E`` is fine.

    Returns
    -------
    numpy.ndarray
    """
    e = as_operator(a)
    d = e.shape[0]
    if kind == "exp_neg_i":
        return scipy.linalg.expm(-1j * e)
    if kind == "cayley":
        den = np.eye(d) + 0.5j * e
        if np.linalg.cond(den) > 1e13:
            raise SingularityError("I + iE/2 is singular; Cayley transform undefined")
        return np.linalg.solve(den, np.eye(d) - 0.5j * e)
    if kind == "phi":
        return -1j * _phi1(-1j * e)
    if kind == "sine_remainder":
        return (_phi2(1j * e) - _phi2(-1j * e)) / 2j
    raise ArgumentError(f"unknown matrix function kind {kind!r}")


def function_of_hermitian(h, f: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """Apply a scalar function to a hermitian operator through its eigenbasis.

    ``f`` maps an array of eigenvalues to values; it may return trailing axes
    (e.g. an ``(n, m, m)`` array for matrix-valued functions), in which case
    the result has shape ``(m, m, d, d)``.
    """
    h = as_operator(h)
    w, v = np.linalg.eigh(0.5 * (h + h.conj().T))
    vals = np.asarray(f(w), dtype=complex)
    if vals.ndim == 1:
        return (v * vals) @ v.conj().T
    vals = np.moveaxis(vals, 0, -1)
    return np.einsum("ij,...j,kj->...ik", v, vals, v.conj())


def annihilation(dim: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1).astype(complex)


def truncated_oscillator(dim: int, mass: float = 1.0, mode: str = "ladder",
                         omega: float = 1.0, hbar: float = 1.0, extent: float | None = None):
    """Position and momentum operators on a truncated space.

    Parameters
    ----------
    dim : int
        Truncation dimension (>= 2).
    mass, omega, hbar : float
        Oscillator scales; ``omega`` only sets the length unit
        ``sqrt(hbar/(mass*omega))``.
    mode : {'ladder', 'grid'}
        ``ladder``: number basis, ``[q, p] = i hbar`` holds exactly except in
        the last diagonal entry.  ``grid``: ``q`` diagonal on a uniform
        periodic grid and ``p`` the FFT spectral derivative ``-i hbar d/dq``.
    extent : float, optional
        Grid mode only; the grid covers ``[-extent/2, extent/2)``.  Defaults
        to a grid balanced between position and momentum resolution.

    Returns
    -------
    q, p : numpy.ndarray
    """
    if dim < 2:
        raise ArgumentError(f"oscillator needs dim >= 2, got {dim}")
    length = np.sqrt(hbar / (mass * omega))
    if mode == "ladder":
        a = annihilation(dim)
        q = length / np.sqrt(2) * (a + a.conj().T)
        p = 1j * hbar / (length * np.sqrt(2)) * (a.conj().T - a)
        return q, p
    if mode == "grid":
        if extent is None:
            extent = length * np.sqrt(2 * np.pi * dim)
        x = (np.arange(dim) - dim // 2) * (extent / dim)
        kx = 2 * np.pi * np.fft.fftfreq(dim, d=extent / dim)
        f = np.fft.fft(np.eye(dim), axis=0)
        p = hbar * (f.conj().T @ np.diag(kx) @ f) / dim
        return np.diag(x).astype(complex), 0.5 * (p + p.conj().T)
    raise ArgumentError(f"unknown oscillator mode {mode!r}")


def is_unitary(a, tol: float = 1e-10) -> bool:
    a = np.asarray(a, dtype=complex)
    return bool(np.max(np.abs(a.conj().T @ a - np.eye(a.shape[0]))) < tol)


def is_hermitian(a, tol: float = 1e-10) -> bool:
    a = np.asarray(a, dtype=complex)
    return bool(np.max(np.abs(a - a.conj().T)) < tol)


def is_positive(a, tol: float = 1e-10) -> bool:
    a = np.asarray(a, dtype=complex)
    if not is_hermitian(a, max(tol, 1e-12)):
        return False
    return bool(np.linalg.eigvalsh(0.5 * (a + a.conj().T)).min() > -tol)


def expectation(state, obs) -> complex:
    """``tr(state @ obs)``."""
    state, obs = np.asarray(state), np.asarray(obs)
    if state.shape != obs.shape or state.ndim != 2:
        raise ArgumentError(f"state {state.shape} and observable {obs.shape} differ in shape")
    return complex(np.einsum("ij,ji->", state, obs))


def random_hermitian(rng: np.random.Generator, d: int, scale: float = 1.0) -> np.ndarray:
    z = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return scale * 0.5 * (z + z.conj().T)


def random_unitary(rng: np.random.Generator, d: int) -> np.ndarray:
    z = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / np.sqrt(2)
    qm, r = np.linalg.qr(z)
    return qm * (np.diag(r) / np.abs(np.diag(r)))


def random_density(rng: np.random.Generator, d: int, rank: int | None = None) -> np.ndarray:
    g = rng.normal(size=(d, rank or d)) + 1j * rng.normal(size=(d, rank or d))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real
