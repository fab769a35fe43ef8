"""Quantum stochastic dynamics on time-binned field modes.

The field over ``[0, T]`` is chopped into ``N`` bins of width ``dt``; each
bin carries one truncated mode per channel, so the increments become

* ``dLambda_jk = a_j^dag a_k`` (number/exchange),
* ``dB_j = sqrt(dt) a_j`` (annihilation),
* ``dLambda_00 = dt``.

Composite states are ordered ``system (x) bin_0 (x) ... (x) bin_{N-1}`` and
channels are ordered inside a bin.  Products of per-bin factors are time
ordered, later bins acting to the left.

The second half of the module handles a movable mirror under coherent
illumination: :class:`MirrorModel` bundles the mechanical degree of freedom
with a position-dependent scattering matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg

from . import modes
from .errors import ArgumentError, CapacityError, InconsistencyError, TruncationError
from .limits import ExchangeMatrix, cavity_qed_smatrix
from .operators import (MAX_DIM, PhysicalConstants, annihilation, as_operator, dagger,
                        function_of_hermitian, is_hermitian, matrix_function, tensor_all)
from .particle import Mollifier


# ---------------------------------------------------------------- bins

@dataclass(frozen=True)
class BinnedField:
    """``channels`` field modes in each of ``bins`` time bins of width ``dt``."""

    channels: int
    bins: int
    dt: float
    bin_dim: int = 2

    def __post_init__(self):
        if self.channels < 1 or self.bins < 1:
            raise ArgumentError(f"need channels >= 1 and bins >= 1, got {self.channels}, {self.bins}")
        if not self.dt > 0:
            raise ArgumentError(f"dt must be positive, got {self.dt}")
        if self.bin_dim < 2:
            raise ArgumentError(f"bin_dim must be >= 2, got {self.bin_dim}")

    @property
    def horizon(self) -> float:
        return self.bins * self.dt

    @property
    def local_dim(self) -> int:
        return self.bin_dim ** self.channels

    @property
    def dim(self) -> int:
        return self.local_dim ** self.bins

    def annihilators(self) -> list[np.ndarray]:
        """Per-channel annihilators on a single bin (``local_dim`` square)."""
        a = annihilation(self.bin_dim)
        eye = np.eye(self.bin_dim)
        return [tensor_all(*[a if c == j else eye for c in range(self.channels)])
                for j in range(self.channels)]

    def number_operator(self) -> np.ndarray:
        """Total photon number of a single bin."""
        return sum(b.conj().T @ b for b in self.annihilators())


def _check_capacity(total: int, max_dim: int):
    if total > max_dim:
        raise CapacityError(f"system (x) field dimension {total} exceeds limit {max_dim}")


def bin_generator(E: ExchangeMatrix, field: BinnedField) -> np.ndarray:
    """``E_ab (x) dLambda_ab`` on ``system (x) one bin``."""
    if E.m != field.channels:
        raise ArgumentError(f"exchange matrix has {E.m} channels, field has {field.channels}")
    a = field.annihilators()
    f = field.local_dim
    x = np.kron(E.E00, np.eye(f)) * field.dt
    rt = np.sqrt(field.dt)
    for j in range(E.m):
        x += rt * (np.kron(E.El0[j], a[j].conj().T) + np.kron(E.E0l[j], a[j]))
        for k in range(E.m):
            x += np.kron(E.Ell[j, k], a[j].conj().T @ a[k])
    return x


def _apply_bins(factor: np.ndarray, field: BinnedField, d: int, target: np.ndarray) -> np.ndarray:
    # apply `factor` (on system (x) bin b) for b = 0, 1, ..., N-1 in turn
    f, nb = field.local_dim, field.bins
    cols = target.shape[1]
    fr = factor.reshape(d, f, d, f)
    out = target
    for b in range(nb):
        t = out.reshape(d, f ** b, f, f ** (nb - 1 - b), cols)
        out = np.einsum("ajbk,bxkyc->axjyc", fr, t, optimize=True).reshape(-1, cols)
    return out


def _product(E, field, system_dim, kind, max_dim, state):
    d = E.dim
    if system_dim is not None and system_dim != d:
        raise ArgumentError(f"system_dim {system_dim} does not match exchange matrix dim {d}")
    total = d * field.dim
    _check_capacity(total, max_dim)
    x = bin_generator(E, field)
    factor = scipy.linalg.expm(-1j * x) if kind == "holevo" else matrix_function(x, "cayley")
    if state is None:
        return _apply_bins(factor, field, d, np.eye(total, dtype=complex))
    state = np.asarray(state, dtype=complex)
    if state.shape[0] != total:
        raise ArgumentError(f"state has length {state.shape[0]}, expected {total}")
    return _apply_bins(factor, field, d, state.reshape(total, -1)).reshape(state.shape)


def holevo_product(E: ExchangeMatrix, field: BinnedField, system_dim: int | None = None,
                   max_dim: int = MAX_DIM, state=None) -> np.ndarray:
    """Time-ordered product of per-bin factors ``exp(-i E_ab (x) dLambda_ab)``.

    Returns the unitary on ``system (x) bins``, or its action on ``state``
    when one is given (cheaper: no full matrix is formed).
    """
    return _product(E, field, system_dim, "holevo", max_dim, state)


def stratonovich_product(E: ExchangeMatrix, field: BinnedField, system_dim: int | None = None,
                         max_dim: int = MAX_DIM, state=None) -> np.ndarray:
    """As :func:`holevo_product` with each factor the Cayley transform of the bin generator."""
    return _product(E, field, system_dim, "stratonovich", max_dim, state)


def photon_counts(field: BinnedField) -> np.ndarray:
    """Photon number per bin for every field basis state, shape ``(dim, bins)``."""
    per_bin = np.diag(field.number_operator()).real.round().astype(int)
    idx = np.indices((field.local_dim,) * field.bins).reshape(field.bins, -1).T
    return per_bin[idx]


def exact_gauge_action(S, photon_occupied_bins, state, field: BinnedField | None = None):
    """Apply ``S^j`` to the system, ``j`` the photon count inside the window.

    Parameters
    ----------
    S : (d, d) array
        Unitary system operator.
    photon_occupied_bins : sequence of int
        Bins lying inside the window ``[0, t]``.
    state : dict or array
        Either ``{occupation tuple: system vector}`` with one photon number
        per bin, or a full vector on ``system (x) bins`` (``field`` required).
    """
    S = as_operator(S)
    window = sorted(set(int(b) for b in photon_occupied_bins))
    if isinstance(state, dict):
        out = {}
        powers: dict[int, np.ndarray] = {}
        for occ, vec in state.items():
            occ_t = tuple(occ)
            if any((not float(o).is_integer()) or o < 0 for o in occ_t):
                raise ArgumentError(f"occupation {occ_t} is not a definite photon number")
            if window and max(window) >= len(occ_t):
                raise ArgumentError(f"window bin {max(window)} outside occupation of length {len(occ_t)}")
            j = int(sum(occ_t[b] for b in window))
            if j not in powers:
                powers[j] = np.linalg.matrix_power(S, j)
            out[occ_t] = powers[j] @ np.asarray(vec, dtype=complex)
        return out
    if field is None:
        raise ArgumentError("a full state vector needs its BinnedField to fix photon numbers")
    d = S.shape[0]
    vec = np.asarray(state, dtype=complex).reshape(d, field.dim)
    counts = photon_counts(field)[:, window].sum(axis=1) if window else np.zeros(field.dim, int)
    out = np.empty_like(vec)
    for j in np.unique(counts):
        cols = counts == j
        out[:, cols] = np.linalg.matrix_power(S, int(j)) @ vec[:, cols]
    return out.reshape(-1)


def smeared_gauge_product(E11, system_state, wavepacket: Callable, tau: float, grid_points: int,
                          substeps: int = 8, c: float = 1.0, shape: str = "box"):
    """Grid approximation of the pure-gauge unitary driven by a smeared number density.

    The window ``[0, tau]`` carries ``grid_points * substeps`` fine qubit
    bins holding a single photon with amplitude ``wavepacket``.  The
    mollifier sharpness is tied to the grid, ``n = 2 c N / tau``, so the grid
    spacing equals the mollifier support.  Each grid factor is
    ``exp(-i E11 (tau/N) lambda(sigma_j))`` with ``lambda`` the mollified
    photon-number density, applied for ``sigma_j = j tau / N`` in order.

    Returns
    -------
    times : (K,) array
        Fine-bin centres.
    amplitudes : (K, d) array
        Output one-photon amplitudes (system vector per fine bin).
    initial : (K, d) array
        Input amplitudes, for the exact comparison.
    """
    E11 = as_operator(E11)
    psi = np.asarray(system_state, dtype=complex).reshape(-1)
    if psi.shape[0] != E11.shape[0]:
        raise ArgumentError("system state and E11 differ in dimension")
    N = int(grid_points)
    if N < 1 or substeps < 1:
        raise ArgumentError("grid_points and substeps must be positive")
    K = N * substeps
    h = tau / K
    s = (np.arange(K) + 0.5) * h
    xi = np.asarray(wavepacket(s), dtype=complex)
    xi = xi / np.sqrt(np.sum(np.abs(xi) ** 2))
    initial = xi[:, None] * psi[None, :]
    moll = Mollifier(shape, 2 * c * N / tau, c)
    sigma = np.arange(1, N + 1) * tau / N
    # weight[j, i] = (tau/N) * delta_n(sigma_j - s_i); grid factors commute here
    weights = (tau / N) * moll(sigma[:, None] - s[None, :])
    w, v = np.linalg.eigh(E11)
    coeff = initial @ v.conj()                  # amplitudes in the E11 eigenbasis
    phase = np.ones((K, w.size), dtype=complex)
    for j in range(N):
        phase *= np.exp(-1j * np.outer(weights[j], w))
    out = (coeff * phase) @ v.T
    return s, out, initial


def one_photon_gauge_reference(S, initial):
    """Exact gauge action on a one-photon amplitude array ``(K, d)``."""
    K = initial.shape[0]
    state = {tuple(int(i == b) for i in range(K)): initial[b] for b in range(K)}
    out = exact_gauge_action(S, range(K), state)
    return np.array([out[tuple(int(i == b) for i in range(K))] for b in range(K)])


def ito_residual(field: BinnedField) -> dict[str, float]:
    """Deviations of single-bin increment products from the quantum Ito table.

    Only defined for qubit bins, where ``a^dag a`` is a projector.
    """
    if field.bin_dim != 2:
        raise ArgumentError("Ito table check needs bin_dim = 2")
    a = field.annihilators()
    f, m, dt = field.local_dim, field.channels, field.dt
    ad = [x.conj().T for x in a]
    lam = [[ad[j] @ a[k] for k in range(m)] for j in range(m)]
    db = [np.sqrt(dt) * x for x in a]
    dbd = [np.sqrt(dt) * x for x in ad]
    vac = np.zeros(f)
    vac[0] = 1.0
    n_tot = np.diag(field.number_operator()).real
    p1 = np.diag((n_tot <= 1).astype(float))
    eye = np.eye(f)

    def nrm(x):
        return float(np.max(np.abs(x), initial=0.0))

    res = {
        "lambda_projector": max(nrm(lam[j][j] @ lam[j][j] - lam[j][j]) for j in range(m)),
        "lambda_table_one_photon": max(
            nrm(p1 @ (lam[j][k] @ lam[l][r] - (k == l) * lam[j][r]) @ p1)
            for j in range(m) for k in range(m) for l in range(m) for r in range(m)),
        "dB_dLambda_one_photon": max(
            nrm(p1 @ (db[j] @ lam[k][l] - (j == k) * db[l]) @ p1)
            for j in range(m) for k in range(m) for l in range(m)),
        "dLambda_dBdag_vacuum": max(
            nrm((lam[j][k] @ dbd[l] - (k == l) * dbd[j]) @ vac)
            for j in range(m) for k in range(m) for l in range(m)),
        "dB_dBdag_vacuum": max(abs(vac @ db[j] @ dbd[k] @ vac - (j == k) * dt)
                               for j in range(m) for k in range(m)),
        "dB_dBdag_operator": max(nrm(db[j] @ dbd[j] - dt * (eye - ad[j] @ a[j])) for j in range(m)),
        "dBdag_dB_vacuum": max(abs(vac @ dbd[j] @ db[k] @ vac) for j in range(m) for k in range(m)),
        "dt_squared": dt ** 2,
    }
    return {k: float(v) for k, v in res.items()}


# ---------------------------------------------------------------- mirror

@dataclass
class CoherentDrive:
    """Per-channel coherent amplitudes ``beta_a(t)`` (units 1/sqrt(time))."""

    beta: Callable[[float], np.ndarray] | np.ndarray | complex

    def __call__(self, t: float) -> np.ndarray:
        b = self.beta(t) if callable(self.beta) else self.beta
        b = np.atleast_1d(np.asarray(b, dtype=complex))
        if not np.all(np.isfinite(b)):
            raise ArgumentError(f"drive amplitude is not finite at t={t}")
        return b

    def intensity(self, t: float) -> float:
        return float(np.sum(np.abs(self(t)) ** 2))


def _as_smatrix_values(vals, n: int) -> np.ndarray:
    vals = np.asarray(vals, dtype=complex)
    if vals.ndim == 1:
        vals = vals[:, None, None]
    if vals.shape[0] != n or vals.ndim != 3 or vals.shape[1] != vals.shape[2]:
        raise ArgumentError(f"S(q) must return shape (n,) or (n, m, m), got {vals.shape}")
    return vals


def central_difference(f: Callable, x: np.ndarray, h: float) -> np.ndarray:
    """Sixth-order central difference of an array-valued function."""
    c = (1 / 60, -3 / 20, 3 / 4)
    acc = 0
    for i, w in enumerate(c):
        step = 3 - i
        acc = acc + w * (np.asarray(f(x + step * h)) - np.asarray(f(x - step * h)))
    return acc / h


@dataclass
class MirrorModel:
    """Mirror coordinate with ``H = p^2/2m + V(q)`` and scattering matrix ``S(q)``.

    Parameters
    ----------
    q, p : (d, d) arrays
        Hermitian position and momentum operators.
    smatrix : callable
        Maps an array of position values to ``(n,)`` scalars or ``(n, m, m)``
        unitary matrices.  Channel ``a`` of ``S_ab`` is the output.
    dsmatrix : callable, optional
        Derivative of ``smatrix``.  A sixth-order central difference with
        step ``fd_step / k`` is used when omitted.
    potential : (d, d) array or callable, optional
        ``V`` as an operator or as a function of position values.
    k : float
        Photon wavenumber (sets the finite-difference scale).
    edges : tuple of int
        Basis indices whose population signals truncation leakage.
    """

    q: np.ndarray
    p: np.ndarray
    smatrix: Callable
    mass: float = 1.0
    potential: np.ndarray | Callable | None = None
    dsmatrix: Callable | None = None
    k: float = 1.0
    hbar: float = 1.0
    edges: tuple = (-1,)
    fd_step: float = 1e-3
    tol: float = 1e-10
    S: np.ndarray = field(init=False, repr=False)
    dS: np.ndarray = field(init=False, repr=False)
    H: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.q, self.p = as_operator(self.q), as_operator(self.p)
        if not (is_hermitian(self.q, self.tol) and is_hermitian(self.p, self.tol)):
            raise ArgumentError("q and p must be hermitian")
        if not (self.mass > 0 and self.hbar > 0):
            raise ArgumentError("mass and hbar must be positive")
        d = self.q.shape[0]
        w = np.linalg.eigvalsh(0.5 * (self.q + self.q.conj().T))
        vals = _as_smatrix_values(self.smatrix(w), d)
        m = vals.shape[1]
        uni = np.max(np.abs(np.einsum("nca,ncb->nab", vals.conj(), vals) - np.eye(m)))
        if uni > self.tol:
            raise InconsistencyError(f"S(q) is not unitary on the q spectrum (residual {uni:.3e})")
        deriv = self.dsmatrix
        if deriv is None:
            h = self.fd_step / max(abs(self.k), 1e-12)
            deriv = lambda x: central_difference(lambda y: _as_smatrix_values(self.smatrix(y), len(y)), x, h)
        self.S = function_of_hermitian(self.q, lambda x: _as_smatrix_values(self.smatrix(x), len(x)))
        self.dS = function_of_hermitian(self.q, lambda x: _as_smatrix_values(deriv(x), len(x)))
        if self.potential is None:
            v = np.zeros((d, d), dtype=complex)
        elif callable(self.potential):
            v = function_of_hermitian(self.q, self.potential)
        else:
            v = as_operator(self.potential)
        if not is_hermitian(v, self.tol):
            raise ArgumentError("potential must be hermitian")
        self.H = self.p @ self.p / (2 * self.mass) + v
        self.H = 0.5 * (self.H + self.H.conj().T)

    @property
    def channels(self) -> int:
        return self.S.shape[0]

    @property
    def dim(self) -> int:
        return self.q.shape[0]

    def couplings(self, beta: np.ndarray) -> np.ndarray:
        """``L_a = sum_b S_ab beta_b``, shape ``(m, d, d)``."""
        beta = np.asarray(beta, dtype=complex)
        if beta.shape != (self.channels,):
            raise ArgumentError(f"drive has {beta.shape[0]} channels, model has {self.channels}")
        return np.einsum("abij,b->aij", self.S, beta)

    def edge_population(self, rho: np.ndarray) -> float:
        return float(max(rho[i, i].real for i in self.edges))


def harmonic_potential(mass: float, omega_m: float):
    return lambda x: 0.5 * mass * omega_m ** 2 * x ** 2


def _unit_c(k):
    return k, PhysicalConstants(c=1.0)


def perfect_mirror(q, p, k, **kw) -> MirrorModel:
    """``S = -exp(-2ikq)``: the mirror reflects every incoming photon."""
    return MirrorModel(q, p, lambda x: -np.exp(-2j * k * x),
                       dsmatrix=lambda x: 2j * k * np.exp(-2j * k * x), k=k, **kw)


def singular_boundary_mirror(q, p, k, mu, **kw) -> MirrorModel:
    """Wall at the origin plus a thin dielectric layer of strength ``mu`` at ``q``."""
    omega, const = _unit_c(k)
    f = lambda x: modes.closed_form("mirror_singular_boundary", omega, const, mu=mu, q=x).r_r
    return MirrorModel(q, p, f, k=k, **kw)


def layer_mirror(q, p, k, n, **kw) -> MirrorModel:
    """Wall at the origin with a dielectric of index ``n`` filling ``[0, q]``."""
    omega, const = _unit_c(k)
    f = lambda x: modes.closed_form("mirror_layer", omega, const, n=n, q=x).r_r
    return MirrorModel(q, p, f, k=k, **kw)


def dielectric_particle(q, p, k, mu, **kw) -> MirrorModel:
    """Two-channel point scatterer; channels ordered (right, left)."""
    omega, const = _unit_c(k)

    def f(x):
        cf = modes.closed_form("singular_point", omega, const, mu=mu, q=x)
        return np.stack([np.stack([cf.t_rr, cf.t_rl], -1), np.stack([cf.t_lr, cf.t_ll], -1)], -2)

    return MirrorModel(q, p, f, k=k, **kw)


def adiabatic_phase(x, k, g0, gamma, delta):
    """Phase of the atom-cavity mirror, ``2 arctan(2 g0^2 cos^2(kq) / (gamma Delta))``."""
    return 2 * np.arctan(2 * g0 ** 2 * np.cos(k * x) ** 2 / (gamma * delta))


def adiabatic_phase_derivative(x, k, g0, gamma, delta):
    c2 = np.cos(k * x) ** 2
    return -4 * k * gamma * delta * g0 ** 2 * np.sin(2 * k * x) / (gamma ** 2 * delta ** 2 + 4 * g0 ** 4 * c2 ** 2)


def adiabatic_mirror(q, p, k, g0, gamma, delta, analytic: bool = True, **kw) -> MirrorModel:
    """Atom-cavity mirror from adiabatic elimination of a damped cavity mode."""
    f = lambda x: cavity_qed_smatrix(np.cos(k * x) ** 2, g0, gamma, delta)
    df = None
    if analytic:
        df = lambda x: 1j * adiabatic_phase_derivative(x, k, g0, gamma, delta) * f(x)
    return MirrorModel(q, p, f, dsmatrix=df, k=k, **kw)


def radiation_pressure_force(model: MirrorModel, drive: CoherentDrive, t: float = 0.0,
                             tol: float = 1e-10) -> np.ndarray:
    """Hermitian force ``-i hbar sum_abc beta_a^* S_ca^dag S'_cb beta_b``."""
    beta = drive(t)
    if beta.shape != (model.channels,):
        raise ArgumentError(f"drive has {beta.shape[0]} channels, model has {model.channels}")
    prod = np.einsum("caji,cbjk->abik", model.S.conj(), model.dS)
    f = -1j * model.hbar * np.einsum("a,abik,b->ik", beta.conj(), prod, beta)
    scale = max(1.0, float(np.max(np.abs(f), initial=0.0)))
    if np.max(np.abs(f - f.conj().T), initial=0.0) > tol * scale:
        raise InconsistencyError("radiation pressure force is not hermitian; S(q) may not be unitary")
    return 0.5 * (f + f.conj().T)


@dataclass
class MomentSeries:
    t: np.ndarray
    q: np.ndarray
    p: np.ndarray
    q2: np.ndarray
    p2: np.ndarray
    trace_residual: np.ndarray
    rho: np.ndarray | None = None

    @property
    def var_q(self):
        return self.q2 - self.q ** 2

    @property
    def var_p(self):
        return self.p2 - self.p ** 2


def langevin_moments(model: MirrorModel, drive: CoherentDrive, rho0, T: float, dt: float,
                     method: str = "split", leak_tol: float = 1e-6) -> MomentSeries:
    """Evolve the full density matrix under the unconditional generator and record moments."""
    from .filtering import unconditional_step_raw

    rho = as_operator(rho0)
    if rho.shape[0] != model.dim:
        raise ArgumentError(f"initial state has dim {rho.shape[0]}, model has {model.dim}")
    if not (T > 0 and dt > 0):
        raise ArgumentError("T and dt must be positive")
    steps = int(round(T / dt))
    q, p = model.q, model.p
    q2, p2 = q @ q, p @ p
    obs = np.stack([q, p, q2, p2])
    out = np.zeros((steps + 1, 4))
    tr_res = np.zeros(steps + 1)
    out[0] = np.einsum("ij,kji->k", rho, obs).real
    for s in range(steps):
        rho = unconditional_step_raw(rho, model, drive, s * dt, dt, method)
        tr = np.trace(rho).real
        tr_res[s + 1] = abs(tr - 1.0)
        rho = rho / tr
        leak = model.edge_population(rho)
        if leak > leak_tol:
            raise TruncationError(f"edge population {leak:.2e} exceeds {leak_tol:.0e} at t={(s + 1) * dt:.4g}")
        out[s + 1] = np.einsum("ij,kji->k", rho, obs).real
    t = np.arange(steps + 1) * dt
    return MomentSeries(t, out[:, 0], out[:, 1], out[:, 2], out[:, 3], tr_res, rho)
