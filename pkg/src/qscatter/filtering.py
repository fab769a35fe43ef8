"""Conditional and unconditional dynamics of a coherently driven scatterer.

With coupling operators ``L_a = sum_b S_ab beta_b`` the unitarity of ``S``
gives ``sum_a L_a^dag L_a = |beta|^2 I``, so the unconditional generator is

    D(rho) = sum_a L_a rho L_a^dag - |beta|^2 rho + (i/hbar) [rho, H].

Because the no-detection damping is a multiple of the identity, the
dissipative part integrates exactly as a Poisson mixture of the channel map
``Phi(rho) = sum_a L_a rho L_a^dag / |beta|^2``.  Both the unconditional
step and the counting filter use that exact mixture, sandwiched between half
steps of the Hamiltonian flow.  The homodyne filter uses a positivity
preserving Kraus step (second order in the record increments).

All trajectory routines are batched: states have shape ``(M, d, d)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ArgumentError, IntegratorStepError, RateError
from .operators import as_operator
from .qsde import CoherentDrive, MirrorModel

POSITIVITY_TOL = 1e-8
TRACE_TOL = 1e-9


def _half_propagator(model: MirrorModel, dt: float) -> np.ndarray:
    cache = model.__dict__.setdefault("_half_propagators", {})
    if dt not in cache:
        cache[dt] = scipy.linalg.expm(-0.5j * dt * model.H / model.hbar)
    return cache[dt]


def _conj(u, rho):
    return u @ rho @ u.conj().T


def generator(rho, model: MirrorModel, drive: CoherentDrive, t: float) -> np.ndarray:
    """Unconditional generator ``D(rho)``."""
    beta = drive(t)
    L = model.couplings(beta)
    r = float(np.sum(np.abs(beta) ** 2))
    jump = np.einsum("aij,...jk,alk->...il", L, rho, L.conj())
    comm = rho @ model.H - model.H @ rho
    return jump - r * rho + 1j / model.hbar * comm


def _channel_map(rho, L, r):
    out = L[0] @ rho @ L[0].conj().T
    for la in L[1:]:
        out = out + la @ rho @ la.conj().T
    return out / r


def _poisson_dissipator(rho, L, r, dt, tail=1e-17):
    # exp(dt (r Phi - r)) = sum_k e^{-r dt} (r dt)^k / k! Phi^k
    x = r * dt
    w = np.exp(-x)
    out = w * rho
    term = rho
    k, acc = 0, w
    while 1.0 - acc > tail and k < 200:
        k += 1
        w *= x / k
        term = _channel_map(term, L, r)
        out = out + w * term
        acc += w
    return out


def unconditional_step_raw(rho, model: MirrorModel, drive: CoherentDrive, t: float, dt: float,
                           method: str = "split") -> np.ndarray:
    """One unconditional step without the final renormalisation.

    ``method='split'``: Hamiltonian half step, exact dissipator, Hamiltonian
    half step (drive frozen at the midpoint).  ``method='euler'``: the
    literal ``rho + D(rho) dt``.
    """
    if method == "euler":
        return rho + generator(rho, model, drive, t) * dt
    if method != "split":
        raise ArgumentError(f"unknown integrator {method!r}")
    u = _half_propagator(model, dt)
    beta = drive(t + 0.5 * dt)
    r = float(np.sum(np.abs(beta) ** 2))
    rho = _conj(u, rho)
    if r > 0:
        rho = _poisson_dissipator(rho, model.couplings(beta), r, dt)
    return _conj(u, rho)


def min_eigenvalue(rho) -> np.ndarray:
    rho = np.asarray(rho)
    return np.linalg.eigvalsh(0.5 * (rho + np.swapaxes(rho, -1, -2).conj()))[..., 0]


def unconditional_step(rho, model: MirrorModel, drive: CoherentDrive, t: float, dt: float,
                       method: str = "split", tol: float = POSITIVITY_TOL) -> np.ndarray:
    """Renormalised unconditional step; raises if positivity is lost."""
    out = unconditional_step_raw(as_operator(rho), model, drive, t, dt, method)
    out = out / np.trace(out).real
    ev = min_eigenvalue(out)
    if ev < -tol:
        raise IntegratorStepError(f"eigenvalue {ev:.2e} after step at t={t:.4g}; reduce dt")
    return out


def evolve_unconditional(rho0, model, drive, T: float, dt: float, method: str = "split"):
    """States at every step from ``0`` to ``T`` (shape ``(steps+1, d, d)``)."""
    steps = int(round(T / dt))
    out = np.empty((steps + 1,) + np.shape(rho0), dtype=complex)
    out[0] = rho0
    for s in range(steps):
        out[s + 1] = unconditional_step(out[s], model, drive, s * dt, dt, method)
    return out


# ---------------------------------------------------------------- conditional

@dataclass
class ConditionalState:
    rho: np.ndarray
    t: float = 0.0
    record: list = field(default_factory=list)

    def check(self, tol: float = TRACE_TOL, pos_tol: float = POSITIVITY_TOL):
        if abs(np.trace(self.rho).real - 1) > tol:
            raise IntegratorStepError(f"trace {np.trace(self.rho).real} deviates from 1")
        if np.max(np.abs(self.rho - self.rho.conj().T)) > tol:
            raise IntegratorStepError("state is not hermitian")
        if min_eigenvalue(self.rho) < -pos_tol:
            raise IntegratorStepError("state is not positive")


@dataclass
class StepDiagnostics:
    sme_trace: np.ndarray       # |tr| of the literal SME increment, per trajectory
    raw_trace: np.ndarray       # trace before renormalisation (the record likelihood for homodyne)
    trace_error: np.ndarray     # |tr - 1| after renormalisation
    rate_residual: float = 0.0  # max |sum_a nu_a - |beta|^2|


def homodyne_rates(rho, L):
    """``lambda_a = tr(rho (L_a + L_a^dag))`` for a batch, shape ``(M, m)``."""
    return 2 * np.einsum("mij,aji->ma", rho, L).real


def homodyne_kernel(rho, model, drive, t, dt, dW=None, dY=None):
    """Batched homodyne step.  Supply standard-normal-scaled ``dW`` (simulation)
    or measured ``dY`` (filtering), each shaped ``(M, m)``."""
    u = _half_propagator(model, dt)
    beta = drive(t + 0.5 * dt)
    L = model.couplings(beta)
    r = float(np.sum(np.abs(beta) ** 2))
    d = model.dim
    rho = _conj(u, rho)
    lam = homodyne_rates(rho, L)
    if dY is None:
        if dW is None:
            raise ArgumentError("homodyne step needs noise or a measured record")
        dY = dW + lam * dt
    dI = dY - lam * dt
    # literal SME increment (for the trace diagnostic)
    Lr = np.einsum("aij,mjk->maik", L, rho)
    h = Lr + np.swapaxes(Lr, -1, -2).conj() - lam[:, :, None, None] * rho[:, None]
    sme = np.einsum("maii->m", h * dI[:, :, None, None]) \
        + np.einsum("mii->m", generator(rho, model, drive, t + 0.5 * dt)) * dt
    # Kraus operator to second order in dY
    eye = np.eye(d)
    M = np.broadcast_to((1 - 0.5 * r * dt) * eye, (rho.shape[0], d, d)).astype(complex)
    M = M + np.einsum("aij,ma->mij", L, dY)
    LL = np.einsum("aij,bjk->abik", L, L)
    corr = dY[:, :, None] * dY[:, None, :] - dt * np.eye(L.shape[0])
    M = M + 0.5 * np.einsum("abik,mab->mik", LL, corr)
    rho = M @ rho @ np.swapaxes(M, -1, -2).conj()
    rho = _conj(u, rho)
    tr = np.einsum("mii->m", rho).real
    rho = rho / tr[:, None, None]
    err = np.abs(np.einsum("mii->m", rho).real - 1)
    return rho, dY, dI, StepDiagnostics(np.abs(sme), tr, err)


def counting_kernel(rho, model, drive, t, dt, counts, uniforms):
    """Batched counting step.

    ``counts[m]`` is the number of detections in the step (Poisson with mean
    ``|beta|^2 dt``) and ``uniforms[m]`` a sequence of at least that many
    uniforms used to pick each detection's channel.
    """
    u = _half_propagator(model, dt)
    beta = drive(t + 0.5 * dt)
    L = model.couplings(beta)
    r = float(np.sum(np.abs(beta) ** 2))
    if r * dt >= 0.1:
        raise RateError(f"|beta|^2 dt = {r * dt:.3g} is too large for the counting step")
    rho = _conj(u, rho)
    jumps = np.zeros((rho.shape[0], L.shape[0]), dtype=int)
    nu = np.einsum("aji,mjk,aki->ma", L.conj(), rho, L).real if r > 0 else np.zeros(jumps.shape)
    resid = float(np.max(np.abs(nu.sum(axis=1) - r), initial=0.0))
    for j in range(int(np.max(counts, initial=0))):
        idx = np.nonzero(counts > j)[0]
        if r <= 0:
            raise RateError("detection drawn with zero total rate")
        sub = rho[idx]
        nus = np.einsum("aji,mjk,aki->ma", L.conj(), sub, L).real
        resid = max(resid, float(np.max(np.abs(nus.sum(axis=1) - r))))
        pick = np.array([uniforms[i][j] for i in idx])
        chan = (pick[:, None] >= np.cumsum(nus, axis=1) / r).sum(axis=1)
        chan = np.minimum(chan, L.shape[0] - 1)
        nu_c = nus[np.arange(idx.size), chan]
        if np.any(nu_c <= 0):
            raise RateError("selected detection channel has non-positive rate")
        la = L[chan]
        rho[idx] = la @ sub @ np.swapaxes(la, -1, -2).conj() / nu_c[:, None, None]
        jumps[idx, chan] += 1
    rho = _conj(u, rho)
    tr = np.einsum("mii->m", rho).real
    rho = rho / tr[:, None, None]
    err = np.abs(np.einsum("mii->m", rho).real - 1)
    return rho, jumps, StepDiagnostics(np.zeros(rho.shape[0]), tr, err, resid)


def homodyne_step(state: ConditionalState, model, drive, dt, noise=None, record=None):
    """Single-trajectory homodyne step; returns ``(state', dY)``."""
    dW = None if noise is None else np.asarray(noise, float).reshape(1, -1)
    dY = None if record is None else np.asarray(record, float).reshape(1, -1)
    rho, dY, _, diag = homodyne_kernel(state.rho[None], model, drive, state.t, dt, dW, dY)
    if diag.sme_trace[0] > 1e-6:
        raise IntegratorStepError(f"SME increment changes the trace by {diag.sme_trace[0]:.2e}")
    return ConditionalState(rho[0], state.t + dt, state.record + [dY[0]]), dY[0]


def counting_step(state: ConditionalState, model, drive, dt, rng: np.random.Generator | None = None,
                  record=None):
    """Single-trajectory counting step; returns ``(state', jumps per channel)``.

    ``record``, if given, is the number of detections in the step; the
    channel of each detection is still drawn from ``rng``.
    """
    if rng is None:
        rng = np.random.default_rng()
    r = drive.intensity(state.t + 0.5 * dt)
    k = int(record) if record is not None else int(rng.poisson(r * dt))
    unif = rng.random(k)
    rho, jumps, _ = counting_kernel(state.rho[None].copy(), model, drive, state.t, dt,
                                    np.array([k]), [unif])
    return ConditionalState(rho[0], state.t + dt, state.record + [jumps[0]]), jumps[0]


# ---------------------------------------------------------------- ensembles

@dataclass
class FilterConfig:
    scheme: str
    model: MirrorModel
    drive: CoherentDrive
    rho0: np.ndarray
    dt: float
    T: float
    seed: int = 0
    trajectories: int = 1
    observables: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.scheme not in ("homodyne", "counting"):
            raise ArgumentError(f"unknown scheme {self.scheme!r}")
        if not (self.dt > 0 and self.T > 0):
            raise ArgumentError("dt and T must be positive")
        if self.trajectories < 1:
            raise ArgumentError("need at least one trajectory")
        self.rho0 = as_operator(self.rho0)

    @property
    def steps(self) -> int:
        return int(round(self.T / self.dt))


def trajectory_rng(seed: int, index: int) -> np.random.Generator:
    """Counter-based stream owned by one trajectory."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(index,))))


@dataclass
class EnsembleResult:
    times: np.ndarray
    indices: np.ndarray
    final_states: np.ndarray            # (M, d, d)
    mean_state: np.ndarray
    unconditional_state: np.ndarray
    gap: float                          # operator-norm distance of the two above
    mean_observables: dict
    unconditional_observables: dict
    innovations: np.ndarray             # homodyne: int dI, counting: jump counts, shape (M, m)
    max_sme_trace: float
    max_raw_trace_drift: float          # counting: exact dissipator drift; homodyne: likelihood spread
    max_trace_error: float
    min_eigenvalue: float
    max_rate_residual: float
    failures: list

    @property
    def mean_trace(self) -> float:
        return float(np.trace(self.mean_state).real)

    def innovation_stats(self) -> dict:
        x = self.innovations
        return {"mean": x.mean(axis=0), "var": x.var(axis=0, ddof=1) if len(x) > 1 else np.zeros(x.shape[1]),
                "histogram": np.bincount(x.sum(axis=1).astype(int)) if x.dtype.kind == "i" else None}


def run_ensemble(config: FilterConfig, indices=None) -> EnsembleResult:
    """Run trajectories ``indices`` (default ``range(M)``) with per-index seeded streams."""
    model, drive, dt = config.model, config.drive, config.dt
    idx = np.arange(config.trajectories) if indices is None else np.asarray(indices, dtype=int)
    M, steps, m, d = idx.size, config.steps, model.channels, model.dim
    rngs = [trajectory_rng(config.seed, int(i)) for i in idx]
    times = np.arange(steps + 1) * dt
    if config.scheme == "homodyne":
        noise = np.stack([g.standard_normal((steps, m)) for g in rngs]) * np.sqrt(dt)
    else:
        rates = np.array([drive.intensity(s * dt + 0.5 * dt) for s in range(steps)])
        counts = np.stack([g.poisson(rates * dt) for g in rngs])            # (M, steps)
        unif = [g.random(int(c.sum())) for g, c in zip(rngs, counts)]
        offsets = [np.concatenate([[0], np.cumsum(c)]) for c in counts]

    obs = {"q": model.q, "p": model.p, **config.observables}
    names = list(obs)
    ops = np.stack([obs[n] for n in names])

    def expect(r):
        return np.einsum("mij,kji->mk", r, ops).real

    rho = np.broadcast_to(config.rho0, (M, d, d)).copy()
    alive = np.ones(M, dtype=bool)
    failures = []
    cond = np.zeros((steps + 1, len(names)))
    cond[0] = expect(rho).mean(axis=0)
    innov = np.zeros((M, m), dtype=float if config.scheme == "homodyne" else int)
    max_sme = max_drift = max_err = max_rate = 0.0
    min_ev = float(min_eigenvalue(rho).min())
    rho_u = config.rho0.copy()
    uncond = np.zeros((steps + 1, len(names)))
    uncond[0] = expect(rho_u[None])[0]

    for s in range(steps):
        t = s * dt
        live = np.nonzero(alive)[0]
        if config.scheme == "homodyne":
            new, dY, dI, diag = homodyne_kernel(rho[live], model, drive, t, dt, dW=noise[live, s])
            innov[live] += dI
        else:
            k = counts[live, s]
            u_list = [unif[i][offsets[i][s]:offsets[i][s + 1]] for i in live]
            new, jumps, diag = counting_kernel(rho[live], model, drive, t, dt, k, u_list)
            innov[live] += jumps
            max_rate = max(max_rate, diag.rate_residual)
        ev = min_eigenvalue(new)
        bad = (ev < -POSITIVITY_TOL) | (diag.sme_trace > 1e-6) | ~np.isfinite(ev)
        for j in np.nonzero(bad)[0]:
            i = live[j]
            failures.append({"index": int(idx[i]), "seed": int(config.seed), "t": float(t + dt),
                             "error": f"min eigenvalue {ev[j]:.2e}, SME trace {diag.sme_trace[j]:.2e}"})
            alive[i] = False
        ok = ~bad
        rho[live[ok]] = new[ok]
        max_sme = max(max_sme, float(np.max(diag.sme_trace[ok], initial=0.0)))
        max_drift = max(max_drift, float(np.max(np.abs(diag.raw_trace[ok] - 1), initial=0.0)))
        max_err = max(max_err, float(np.max(diag.trace_error[ok], initial=0.0)))
        min_ev = min(min_ev, float(np.min(ev[ok], initial=np.inf)))
        rho_u = unconditional_step(rho_u, model, drive, t, dt)
        cond[s + 1] = expect(rho[alive]).mean(axis=0) if alive.any() else np.nan
        uncond[s + 1] = expect(rho_u[None])[0]

    keep = rho[alive]
    mean_state = keep.mean(axis=0) if len(keep) else np.full((d, d), np.nan)
    gap = float(np.linalg.norm(mean_state - rho_u, 2)) if len(keep) else np.inf
    return EnsembleResult(
        times=times, indices=idx, final_states=rho, mean_state=mean_state, unconditional_state=rho_u,
        gap=gap, mean_observables={n: cond[:, i] for i, n in enumerate(names)},
        unconditional_observables={n: uncond[:, i] for i, n in enumerate(names)},
        innovations=innov[alive], max_sme_trace=max_sme, max_raw_trace_drift=max_drift, max_trace_error=max_err,
        min_eigenvalue=min_ev, max_rate_residual=max_rate, failures=failures)


def run_trajectory(config: FilterConfig, index: int = 0) -> EnsembleResult:
    """A single trajectory through the same batched code path."""
    return run_ensemble(config, indices=[index])
