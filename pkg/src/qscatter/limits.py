"""Singular limits of regularised exchange Hamiltonians.

An :class:`ExchangeMatrix` collects the operators ``E_{alpha beta}`` coupling
a system to ``m`` field channels.  Smearing the fundamental processes in two
different ways gives two different limit models:

* :func:`scheme1_triple`: the time-ordered (Holevo) limit, scattering matrix
  ``exp(-i E_ll)``;
* :func:`scheme2_triple`: the symmetric (Stratonovich) limit, scattering
  matrix the Cayley transform of ``E_ll``.

Block operators are stored as arrays with the channel indices first, e.g.
``S[j, k]`` is the ``(d, d)`` system operator in channel slot ``(j, k)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, InconsistencyError
from .operators import as_operator, dagger, matrix_function


def to_block(blocks: np.ndarray) -> np.ndarray:
    """``(m, n, d, e)`` block array -> ``(m*d, n*e)`` matrix."""
    m, n, d, e = blocks.shape
    return blocks.transpose(0, 2, 1, 3).reshape(m * d, n * e)


def from_block(mat: np.ndarray, m: int, n: int) -> np.ndarray:
    d, e = mat.shape[0] // m, mat.shape[1] // n
    return mat.reshape(m, d, n, e).transpose(0, 2, 1, 3)


def operator_imag(a: np.ndarray) -> np.ndarray:
    """Hermitian "imaginary part" ``(A - A^dagger) / 2i``."""
    return (a - a.conj().T) / 2j


@dataclass
class ExchangeMatrix:
    """Self-adjoint ``(m+1) x (m+1)`` array of system operators.

    Attributes
    ----------
    E00 : (d, d) array
    E0l : (m, d, d) array
        Row ``[E_01, ..., E_0m]``.
    El0 : (m, d, d) array
        Column ``[E_10, ..., E_m0]``; must equal ``E0l`` daggered.
    Ell : (m, m, d, d) array
        Exchange matrix ``[E_jk]``; hermitian as a block operator.
    """

    E00: np.ndarray
    E0l: np.ndarray
    El0: np.ndarray
    Ell: np.ndarray
    tol: float = 1e-10

    def __post_init__(self):
        self.E00 = as_operator(self.E00)
        d = self.E00.shape[0]
        self.Ell = np.asarray(self.Ell, dtype=complex)
        if self.Ell.ndim == 2 and d == 1:
            self.Ell = self.Ell[:, :, None, None]
        m = self.Ell.shape[0]
        self.E0l = np.asarray(self.E0l, dtype=complex).reshape(m, d, d)
        self.El0 = np.asarray(self.El0, dtype=complex).reshape(m, d, d)
        if self.Ell.shape != (m, m, d, d):
            raise ArgumentError(f"exchange block has shape {self.Ell.shape}, expected {(m, m, d, d)}")
        if np.max(np.abs(self.E00 - dagger(self.E00))) > self.tol:
            raise ArgumentError("E00 must be hermitian")
        if np.max(np.abs(self.E0l - dagger(self.El0)), initial=0) > self.tol:
            raise ArgumentError("E0l must be the adjoint of El0")
        blk = to_block(self.Ell)
        if np.max(np.abs(blk - blk.conj().T), initial=0) > self.tol:
            raise ArgumentError("exchange matrix E_ll must be hermitian")

    @classmethod
    def from_full(cls, full: np.ndarray, **kw) -> "ExchangeMatrix":
        """Build from an ``(m+1, m+1, d, d)`` array indexed ``E[alpha, beta]``."""
        full = np.asarray(full, dtype=complex)
        return cls(full[0, 0], full[0, 1:], full[1:, 0], full[1:, 1:], **kw)

    @classmethod
    def random(cls, rng: np.random.Generator, m: int, d: int, scale: float = 1.0) -> "ExchangeMatrix":
        n = (m + 1) * d
        z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        h = scale * 0.5 * (z + z.conj().T)
        return cls.from_full(from_block(h, m + 1, m + 1))

    @property
    def m(self) -> int:
        return self.Ell.shape[0]

    @property
    def dim(self) -> int:
        return self.E00.shape[0]

    def scaled(self, eps: float) -> "ExchangeMatrix":
        return ExchangeMatrix(eps * self.E00, eps * self.E0l, eps * self.El0, eps * self.Ell, self.tol)

    def full(self) -> np.ndarray:
        m, d = self.m, self.dim
        out = np.zeros((m + 1, m + 1, d, d), dtype=complex)
        out[0, 0], out[0, 1:], out[1:, 0], out[1:, 1:] = self.E00, self.E0l, self.El0, self.Ell
        return out

    def _column(self) -> np.ndarray:
        return self.El0.reshape(self.m * self.dim, self.dim)

    def _row(self) -> np.ndarray:
        return np.concatenate(list(self.E0l), axis=1)


@dataclass
class SLHTriple:
    S: np.ndarray   # (m, m, d, d)
    L: np.ndarray   # (m, d, d)
    H: np.ndarray   # (d, d)

    @property
    def m(self) -> int:
        return self.S.shape[0]

    @property
    def dim(self) -> int:
        return self.H.shape[0]

    def unitarity_residual(self) -> float:
        s = to_block(self.S)
        return float(np.max(np.abs(s.conj().T @ s - np.eye(s.shape[0]))))

    def hermiticity_residual(self) -> float:
        return float(np.max(np.abs(self.H - self.H.conj().T)))


def _triple(s_blk, l_col, h, m, d) -> SLHTriple:
    return SLHTriple(from_block(s_blk, m, m), l_col.reshape(m, d, d), h)


def scheme1_triple(E: ExchangeMatrix) -> SLHTriple:
    """Time-ordered limit: ``S = e^{-iE_ll}``, ``L = phi(E_ll) E_l0``,
    ``H = E00 - E_0l (E_ll - sin E_ll)/E_ll^2 E_l0``."""
    m, d = E.m, E.dim
    ell = to_block(E.Ell)
    col, row = E._column(), E._row()
    s = matrix_function(ell, "exp_neg_i")
    l_col = matrix_function(ell, "phi") @ col
    h = E.E00 - row @ matrix_function(ell, "sine_remainder") @ col
    return _triple(s, l_col, h, m, d)


def scheme2_triple(E: ExchangeMatrix) -> SLHTriple:
    """Symmetric limit: Cayley transform of the exchange matrix."""
    m, d = E.m, E.dim
    ell = to_block(E.Ell)
    col, row = E._column(), E._row()
    s = matrix_function(ell, "cayley")
    inv = np.linalg.inv(np.eye(m * d) + 0.5j * ell)
    l_col = -1j * inv @ col
    h = E.E00 + 0.5 * row @ operator_imag(inv) @ col
    return _triple(s, l_col, h, m, d)


def adiabatic_triple(E00, E01, E10, E11, gamma: float) -> SLHTriple:
    """Limit model after adiabatically eliminating a strongly damped cavity mode.

    ``S = (gamma/2 - i E11)(gamma/2 + i E11)^{-1}``,
    ``L = i sqrt(gamma) (gamma/2 + i E11)^{-1} E10`` and
    ``H = E00 + E01 Im{(gamma/2 + i E11)^{-1}} E10``.  Single channel.
    """
    if not gamma > 0:
        raise ArgumentError(f"gamma must be positive, got {gamma}")
    E00, E01, E10, E11 = (as_operator(x) for x in (E00, E01, E10, E11))
    d = E00.shape[0]
    den = 0.5 * gamma * np.eye(d) + 1j * E11
    inv = np.linalg.inv(den)
    s = (0.5 * gamma * np.eye(d) - 1j * E11) @ inv
    l_op = 1j * np.sqrt(gamma) * inv @ E10
    h = E00 + E01 @ operator_imag(inv) @ E10
    return SLHTriple(s[None, None], l_op[None], h)


def cavity_qed_smatrix(cos2, g0: float, gamma: float, delta: float, form: str = "ratio"):
    """Scalar scattering coefficient of an atom-cavity mirror.

    ``form='ratio'`` evaluates
    ``(gamma/2 + i g0^2/Delta cos^2) / (gamma/2 - i g0^2/Delta cos^2)``,
    ``form='phase'`` evaluates ``exp(2i arctan(2 g0^2 cos^2 / (gamma Delta)))``.
    """
    cos2 = np.asarray(cos2, dtype=float)
    if form == "ratio":
        x = g0 ** 2 / delta * cos2
        return (gamma / 2 + 1j * x) / (gamma / 2 - 1j * x)
    if form == "phase":
        return np.exp(2j * np.arctan(2 * g0 ** 2 * cos2 / (gamma * delta)))
    raise ArgumentError(f"unknown form {form!r}")


@dataclass
class QsdeGenerator:
    G: np.ndarray   # (m+1, m+1, d, d), index 0 is the time/vacuum slot

    def unitarity_residuals(self) -> tuple[float, float]:
        """Isometry and co-isometry conditions of ``dU = G_ab dLambda_ab U``.

        Returns the max residual of
        ``G_rs + G_sr^dag + sum_j G_jr^dag G_js`` and of
        ``G_rs + G_sr^dag + sum_j G_rj G_sj^dag`` over all ``r, s``.
        """
        g = self.G
        gd = dagger(g).transpose(1, 0, 2, 3)        # gd[r, s] = G[s, r]^dagger
        lat = g[1:]                                   # rows j >= 1
        iso = g + gd + np.einsum("jrba,jsbc->rsac", lat.conj(), lat)
        co = g + gd + np.einsum("rjab,sjcb->rsac", g[:, 1:], g[:, 1:].conj())
        return float(np.max(np.abs(iso))), float(np.max(np.abs(co)))


def qsde_generator(t: SLHTriple, tol: float = 1e-8) -> QsdeGenerator:
    """Coefficients ``G_{alpha beta}`` of the unitary QSDE for an SLH triple.

    ``G_jk = S_jk - delta_jk``, ``G_j0 = L_j``,
    ``G_0k = -sum_l L_l^dag S_lk`` and ``G_00 = -1/2 sum_l L_l^dag L_l - iH``.
    """
    if t.unitarity_residual() > tol:
        raise InconsistencyError(f"S is not unitary (residual {t.unitarity_residual():.3e})")
    m, d = t.m, t.dim
    g = np.zeros((m + 1, m + 1, d, d), dtype=complex)
    g[1:, 1:] = t.S - np.eye(m)[:, :, None, None] * np.eye(d)
    g[1:, 0] = t.L
    ldag = dagger(t.L)
    g[0, 1:] = -np.einsum("lab,lkbc->kac", ldag, t.S)
    g[0, 0] = -0.5 * np.einsum("lab,lbc->ac", ldag, t.L) - 1j * t.H
    return QsdeGenerator(g)


def scheme_discrepancy(E: ExchangeMatrix, epsilons) -> np.ndarray:
    """Spectral-norm gap between the two scattering matrices of ``eps * E``."""
    out = []
    for eps in np.atleast_1d(epsilons):
        ell = eps * to_block(E.Ell)
        diff = matrix_function(ell, "exp_neg_i") - matrix_function(ell, "cayley")
        out.append(np.linalg.norm(diff, 2))
    return np.array(out)


def loglog_slope(x, y) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])
