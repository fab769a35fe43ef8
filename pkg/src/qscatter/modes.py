"""Classical scattering of the travelling modes of a one-dimensional dielectric.

The mode functions solve ``U'' + zeta(z) omega^2 U = 0`` with
``zeta = n(z)^2 / c^2``.  A right-incoming mode behaves as
``exp(-i n_r w z/c) + t_rr exp(+i n_r w z/c)`` far to the right and as
``t_lr exp(-i n_l w z/c)`` far to the left; the left-incoming mode is the
mirror image with ``t_ll`` and ``t_rl``.

Two independent routes are provided:

* :func:`closed_form` evaluates explicit formulas for each standard geometry.
* :func:`boundary_oracle` assembles the piecewise plane-wave matching
  conditions for an arbitrary :class:`DielectricModel` and solves them.

The oracle is the reference; the closed forms are regression-tested against
it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ArgumentError, DegenerateGeometryError, InconsistencyError, SingularityError
from .operators import PhysicalConstants

KINDS = (
    "two_sided_boundary",
    "slab",
    "singular_boundary",
    "singular_point",
    "perfect_mirror",
    "mirror_singular_boundary",
    "mirror_layer",
)
MIRROR_KINDS = ("perfect_mirror", "mirror_singular_boundary", "mirror_layer")


@dataclass(frozen=True)
class Slab:
    z_lo: float
    z_hi: float
    n: float


@dataclass(frozen=True)
class SingularPoint:
    z: float
    mu: float


@dataclass(frozen=True)
class DielectricModel:
    """Piecewise-constant refractive index with optional delta layers.

    The index is ``n_left`` for ``z < z_boundary``, ``n_right`` for larger
    ``z`` except inside ``slabs``.  ``singular_points`` add
    ``mu * delta(z - z0)`` to ``zeta`` (``mu`` has units of length).  A
    perfectly conducting wall sits at ``z_boundary`` when ``n_left`` is
    ``inf``, or at ``z = 0`` when ``hard_wall_at_zero`` is set.
    """

    n_left: float = 1.0
    n_right: float = 1.0
    slabs: tuple[Slab, ...] = ()
    singular_points: tuple[SingularPoint, ...] = ()
    hard_wall_at_zero: bool = False
    z_boundary: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "slabs", tuple(Slab(*s) if not isinstance(s, Slab) else s
                                                for s in self.slabs))
        object.__setattr__(self, "singular_points",
                           tuple(SingularPoint(*p) if not isinstance(p, SingularPoint) else p
                                 for p in self.singular_points))
        if self.hard_wall_at_zero:
            if self.z_boundary != 0.0:
                raise ArgumentError("hard_wall_at_zero requires z_boundary == 0")
        elif not self.n_left >= 1:
            raise ArgumentError(f"n_left must be >= 1 or inf, got {self.n_left}")
        if not (np.isfinite(self.n_right) and self.n_right >= 1):
            raise ArgumentError(f"n_right must be finite and >= 1, got {self.n_right}")
        last = self.z_boundary
        for s in self.slabs:
            if not s.n > 0:
                raise ArgumentError(f"slab index must be positive, got {s.n}")
            if not s.z_lo < s.z_hi:
                raise ArgumentError(f"empty slab [{s.z_lo}, {s.z_hi}]")
            if s.z_lo < last:
                raise ArgumentError("slabs must be sorted, non-overlapping and right of z_boundary")
            last = s.z_hi
        zs = [p.z for p in self.singular_points]
        if len(set(zs)) != len(zs):
            raise ArgumentError("singular points must be distinct")
        for p in self.singular_points:
            if p.mu < 0:
                raise ArgumentError(f"singular point strength must be >= 0, got {p.mu}")
            if p.z < self.z_boundary or (self.is_mirror and p.z <= self.wall):
                raise ArgumentError(f"singular point at {p.z} lies outside the domain")

    @property
    def is_mirror(self) -> bool:
        return self.hard_wall_at_zero or np.isinf(self.n_left)

    @property
    def wall(self) -> float:
        return 0.0 if self.hard_wall_at_zero else self.z_boundary

    def breakpoints(self) -> np.ndarray:
        pts = {self.z_boundary}
        for s in self.slabs:
            pts.update((s.z_lo, s.z_hi))
        pts.update(p.z for p in self.singular_points)
        return np.array(sorted(pts))

    def index_at(self, z: float) -> float:
        if z < self.z_boundary:
            return self.n_left
        for s in self.slabs:
            if s.z_lo <= z < s.z_hi:
                return s.n
        return self.n_right


@dataclass
class ScatteringCoefficients:
    omega: float
    t_rr: complex | None = None
    t_rl: complex | None = None
    t_lr: complex | None = None
    t_ll: complex | None = None
    r_r: complex | None = None

    @property
    def is_mirror(self) -> bool:
        return self.r_r is not None

    def as_array(self) -> np.ndarray:
        if self.is_mirror:
            return np.array([self.r_r], dtype=complex)
        return np.array([[self.t_rr, self.t_rl], [self.t_lr, self.t_ll]], dtype=complex)


@dataclass
class NormalizedSMatrix:
    omega: float
    entries: np.ndarray = field(repr=False)


# --------------------------------------------------------------------------
# closed forms


def _boundary(n_r, n_l, q, k):
    s = n_l + n_r
    return (-(n_l - n_r) / s * np.exp(-2j * n_r * k * q),
            2 * n_r / s * np.exp(-1j * (n_r - n_l) * k * q))


def _slab(n_r, n_l, n, a, q, k):
    ep, em = np.exp(2j * n * a * k), np.exp(-2j * n * a * k)
    d = (n - n_r) * (n - n_l) * ep - (n + n_r) * (n + n_l) * em
    scale = abs((n + n_r) * (n + n_l))
    if np.any(np.abs(d) < 1e-12 * scale):
        raise SingularityError("slab denominator D(omega) vanishes")
    # reflection numerator: the exponent signs are fixed by the matching conditions
    num = (n + n_l) * (n - n_r) * em - (n - n_l) * (n + n_r) * ep
    t_rr = num * np.exp(-2j * n_r * (q + a) * k) / d
    t_lr = -4 * n * n_r * np.exp(1j * (n_l - n_r) * q * k) * np.exp(-1j * (n_r + n_l) * a * k) / d
    return t_rr, t_lr


def _singular_boundary(n_r, n_l, mu, q, k):
    den = (n_r + n_l) - 1j * mu * k
    return (((n_r - n_l) + 1j * mu * k) / den * np.exp(-2j * n_r * k * q),
            2 * n_r / den * np.exp(1j * (n_l - n_r) * k * q))


def mirror_singular_boundary_uncorrected(mu, q, omega, constants=PhysicalConstants()):
    """Reflection of a wall at 0 plus a delta layer at ``q``, in its uncorrected form.

    Kept for comparison only: it returns ``+1`` at ``mu = 0`` although a bare
    wall reflects with ``-1``.  :func:`closed_form` uses the corrected form
    ``-(1 - (i mu k/2)(e^{-2ikq} - 1)) / (1 + (i mu k/2)(e^{2ikq} - 1))``.
    """
    k = omega / constants.c
    return ((1 - 1j * mu * k / 2 * (np.exp(-2j * k * q) - 1))
            / (1 + 1j * mu * k * (np.exp(2j * k * q) - 1)))


def closed_form(kind: str, omega: float, constants: PhysicalConstants = PhysicalConstants(),
                **params) -> ScatteringCoefficients:
    """Explicit scattering coefficients for the standard geometries.

    Parameters
    ----------
    kind : str
        One of :data:`KINDS`.
    omega : float
        Angular frequency (> 0).
    **params
        ``two_sided_boundary``: ``n_r, n_l, q``;
        ``slab``: ``n_r, n_l, n, a, q`` (thickness ``2a`` centred at ``q``);
        ``singular_boundary``: ``n_r, n_l, mu, q``;
        ``singular_point``: ``mu, q``;
        ``perfect_mirror``: ``q`` and optionally ``n_r``;
        ``mirror_singular_boundary``: ``mu, q`` (wall at 0);
        ``mirror_layer``: ``n, q`` (wall at 0, index ``n`` on ``[0, q]``).
        ``q`` may be an array, in which case the coefficients broadcast.
    """
    if not omega > 0:
        raise ArgumentError(f"omega must be positive, got {omega}")
    k = omega / constants.c
    p = dict(params)
    try:
        if kind == "two_sided_boundary":
            n_r, n_l, q = p["n_r"], p["n_l"], p["q"]
            t_rr, t_lr = _boundary(n_r, n_l, q, k)
            s = n_l + n_r
            t_ll = (n_l - n_r) / s * np.exp(2j * n_l * k * q)
            t_rl = 2 * n_l / s * np.exp(-1j * (n_r - n_l) * k * q)
        elif kind == "slab":
            n_r, n_l, n, a, q = p["n_r"], p["n_l"], p["n"], p["a"], p["q"]
            t_rr, t_lr = _slab(n_r, n_l, n, a, q, k)
            # left incidence: a -> -a, n_r -> -n_l, n_l -> -n_r
            t_ll, t_rl = _slab(-n_l, -n_r, n, -a, q, k)
        elif kind in ("singular_boundary", "singular_point"):
            if kind == "singular_point":
                n_r = n_l = 1.0
            else:
                n_r, n_l = p["n_r"], p["n_l"]
            mu, q = p["mu"], p["q"]
            t_rr, t_lr = _singular_boundary(n_r, n_l, mu, q, k)
            t_ll, t_rl = _singular_boundary(-n_l, -n_r, -mu, q, k)
        elif kind == "perfect_mirror":
            return ScatteringCoefficients(omega, r_r=-np.exp(-2j * p.get("n_r", 1.0) * k * p["q"]))
        elif kind == "mirror_singular_boundary":
            mu, q = p["mu"], p["q"]
            h = 0.5j * mu * k
            r = -(1 - h * (np.exp(-2j * k * q) - 1)) / (1 + h * (np.exp(2j * k * q) - 1))
            return ScatteringCoefficients(omega, r_r=r)
        elif kind == "mirror_layer":
            n, q = p["n"], p["q"]
            cs, sn = np.cos(n * k * q), np.sin(n * k * q)
            r = -np.exp(-2j * k * q) * (cs + 1j / n * sn) / (cs - 1j / n * sn)
            return ScatteringCoefficients(omega, r_r=r)
        else:
            raise ArgumentError(f"unknown geometry kind {kind!r}")
    except KeyError as exc:
        raise ArgumentError(f"{kind} needs parameter {exc.args[0]!r}") from None
    return ScatteringCoefficients(omega, t_rr=t_rr, t_rl=t_rl, t_lr=t_lr, t_ll=t_ll)


def model_for(kind: str, **params) -> DielectricModel:
    """The :class:`DielectricModel` that a closed-form ``kind`` describes."""
    p = dict(params)
    if kind == "two_sided_boundary":
        return DielectricModel(p["n_l"], p["n_r"], z_boundary=p["q"])
    if kind == "slab":
        q, a = p["q"], p["a"]
        return DielectricModel(p["n_l"], p["n_r"], slabs=(Slab(q - a, q + a, p["n"]),),
                               z_boundary=q - a)
    if kind == "singular_boundary":
        return DielectricModel(p["n_l"], p["n_r"], singular_points=(SingularPoint(p["q"], p["mu"]),),
                               z_boundary=p["q"])
    if kind == "singular_point":
        return DielectricModel(1.0, 1.0, singular_points=(SingularPoint(p["q"], p["mu"]),),
                               z_boundary=p["q"])
    if kind == "perfect_mirror":
        return DielectricModel(np.inf, p.get("n_r", 1.0), z_boundary=p["q"])
    if kind == "mirror_singular_boundary":
        return DielectricModel(np.inf, 1.0, singular_points=(SingularPoint(p["q"], p["mu"]),),
                               hard_wall_at_zero=True)
    if kind == "mirror_layer":
        return DielectricModel(np.inf, 1.0, slabs=(Slab(0.0, p["q"], p["n"]),), hard_wall_at_zero=True)
    raise ArgumentError(f"unknown geometry kind {kind!r}")


# --------------------------------------------------------------------------
# boundary-condition oracle


@dataclass
class _Solution:
    edges: np.ndarray        # region i spans (edges[i], edges[i+1])
    indices: np.ndarray
    amps: np.ndarray         # (regions, 2): coefficients of exp(-i kz), exp(+i kz)
    kappa: np.ndarray        # wavenumber per region
    wall: float | None


def _solve_modes(model: DielectricModel, omega: float, channel: str,
                 constants: PhysicalConstants) -> _Solution:
    if not omega > 0:
        raise ArgumentError(f"omega must be positive, got {omega}")
    k0 = omega / constants.c
    bps = model.breakpoints()
    mirror = model.is_mirror
    if mirror and channel != "right_in":
        raise ArgumentError("mirror geometries only have the right_in channel")
    edges = np.concatenate([[-np.inf], bps, [np.inf]])
    mids = [_mid(edges[i], edges[i + 1]) for i in range(len(edges) - 1)]
    indices = np.array([model.index_at(z) for z in mids])
    mu_at = {p.z: 0.0 for p in model.singular_points}
    for p in model.singular_points:
        mu_at[p.z] += p.mu
    first = 1 if mirror else 0            # region 0 is the conductor for mirrors
    nreg = len(indices)
    kappa = np.where(np.isinf(indices), 0.0, indices) * k0
    nunk = 2 * (nreg - first)
    a = np.zeros((nunk, nunk), dtype=complex)
    rhs = np.zeros(nunk, dtype=complex)

    def col(region, which):
        return 2 * (region - first) + which

    row = 0
    if mirror:
        z = bps[0]
        a[row, col(1, 0)] = np.exp(-1j * kappa[1] * z)
        a[row, col(1, 1)] = np.exp(1j * kappa[1] * z)
        row += 1
    for j, z in enumerate(bps):
        left, right = j, j + 1
        if left < first:
            continue
        el = np.exp(np.array([-1j, 1j]) * kappa[left] * z)
        er = np.exp(np.array([-1j, 1j]) * kappa[right] * z)
        a[row, col(left, 0):col(left, 0) + 2] = el
        a[row, col(right, 0):col(right, 0) + 2] = -er
        row += 1
        # derivative jump, scaled by 1/k0:  U'(z-) - U'(z+) - mu k0^2 U(z) = 0
        mu = mu_at.get(z, 0.0)
        a[row, col(left, 0):col(left, 0) + 2] = np.array([-1j, 1j]) * indices[left] * el
        a[row, col(right, 0):col(right, 0) + 2] = (-np.array([-1j, 1j]) * indices[right] - mu * k0) * er
        row += 1
    last = nreg - 1
    if channel == "right_in":
        a[row, col(last, 0)] = 1.0
        rhs[row] = 1.0
        row += 1
        if not mirror:
            a[row, col(0, 1)] = 1.0
            row += 1
    elif channel == "left_in":
        a[row, col(0, 1)] = 1.0
        rhs[row] = 1.0
        row += 1
        a[row, col(last, 0)] = 1.0
        row += 1
    else:
        raise ArgumentError(f"unknown channel {channel!r}")
    if np.linalg.cond(a) > 1e13:
        raise DegenerateGeometryError(f"matching conditions are singular at omega={omega}")
    x = np.linalg.solve(a, rhs)
    amps = np.zeros((nreg, 2), dtype=complex)
    amps[first:] = x.reshape(-1, 2)
    return _Solution(edges, indices, amps, kappa, bps[0] if mirror else None)


def _mid(lo, hi):
    if np.isinf(lo):
        return hi - 1.0
    if np.isinf(hi):
        return lo + 1.0
    return 0.5 * (lo + hi)


def boundary_oracle(model: DielectricModel, omega: float,
                    constants: PhysicalConstants = PhysicalConstants()) -> ScatteringCoefficients:
    """Scattering coefficients from a direct solve of the matching conditions.

    Imposes continuity of ``U`` at every interface, the jump
    ``U'(z-) - U'(z+) = mu (omega/c)^2 U(z)`` at singular points and
    ``U = 0`` on a conducting wall.
    """
    right = _solve_modes(model, omega, "right_in", constants)
    if model.is_mirror:
        return ScatteringCoefficients(omega, r_r=right.amps[-1, 1])
    left = _solve_modes(model, omega, "left_in", constants)
    return ScatteringCoefficients(omega, t_rr=right.amps[-1, 1], t_lr=right.amps[0, 0],
                                  t_ll=left.amps[0, 0], t_rl=left.amps[-1, 1])


def flux_residuals(coeffs: ScatteringCoefficients, n_r: float, n_l: float):
    """Violations of the three far-zone momentum balance identities."""
    t_rr, t_rl, t_lr, t_ll = coeffs.t_rr, coeffs.t_rl, coeffs.t_lr, coeffs.t_ll
    return (abs(n_r * abs(t_rr) ** 2 + n_l * abs(t_lr) ** 2 - n_r),
            abs(n_r * abs(t_rl) ** 2 + n_l * abs(t_ll) ** 2 - n_l),
            abs(n_r * np.conj(t_rr) * t_rl + n_l * np.conj(t_lr) * t_ll))


def normalize_smatrix(coeffs: ScatteringCoefficients, n_r: float, n_l: float,
                      tol: float = 1e-8) -> NormalizedSMatrix:
    """Rescale the off-diagonal coefficients so the 2x2 matrix is unitary."""
    res = max(flux_residuals(coeffs, n_r, n_l))
    if res > tol:
        raise InconsistencyError(f"flux identities violated by {res:.3e} at omega={coeffs.omega}")
    s = np.array([[coeffs.t_rr, np.sqrt(n_r / n_l) * coeffs.t_rl],
                  [np.sqrt(n_l / n_r) * coeffs.t_lr, coeffs.t_ll]], dtype=complex)
    return NormalizedSMatrix(coeffs.omega, s)


def mode_function(model: DielectricModel, omega: float, channel: str, z_grid: Sequence[float],
                  constants: PhysicalConstants = PhysicalConstants()) -> np.ndarray:
    """Sample ``U_{omega,channel}(z)``; zero behind a conducting wall."""
    z = np.atleast_1d(np.asarray(z_grid, dtype=float))
    sing = np.array([p.z for p in model.singular_points])
    if sing.size and np.any(np.isin(z, sing)):
        raise ArgumentError("grid point coincides with a singular point")
    sol = _solve_modes(model, omega, channel, constants)
    region = np.searchsorted(sol.edges, z, side="right") - 1
    kap = sol.kappa[region]
    amp = sol.amps[region]
    u = amp[:, 0] * np.exp(-1j * kap * z) + amp[:, 1] * np.exp(1j * kap * z)
    if sol.wall is not None:
        u[z < sol.wall] = 0.0
    return u


def mode_overlap(model: DielectricModel, omega1: float, omega2: float, N: float,
                 channels: tuple[str, str] = ("right_in", "right_in"),
                 constants: PhysicalConstants = PhysicalConstants(),
                 points_per_wavelength: int = 40) -> complex:
    """Skewed principal-value overlap on ``[-N/n_l, N/n_r]``.

    ``int conj(U_{w1,b}) U_{w2,c} zeta dz`` by the composite midpoint rule,
    one uniform sub-grid per homogeneous region, plus the point masses of the
    singular layers.  For mirrors the lower limit is the wall.
    """
    lo = model.wall if model.is_mirror else -N / model.n_left
    hi = N / model.n_right
    cuts = [lo] + [b for b in model.breakpoints() if lo < b < hi] + [hi]
    nmax = max([model.n_right] + ([] if model.is_mirror else [model.n_left])
               + [s.n for s in model.slabs])
    wavelength = 2 * np.pi * constants.c / (nmax * max(omega1, omega2))
    total = 0.0j
    for z0, z1 in zip(cuts[:-1], cuts[1:]):
        npts = max(int(np.ceil((z1 - z0) / wavelength * points_per_wavelength)), 1)
        h = (z1 - z0) / npts
        z = z0 + h * (np.arange(npts) + 0.5)
        zeta = (model.index_at(0.5 * (z0 + z1)) / constants.c) ** 2
        u1 = mode_function(model, omega1, channels[0], z, constants)
        u2 = mode_function(model, omega2, channels[1], z, constants)
        total += h * zeta * np.sum(np.conj(u1) * u2)
    for p in model.singular_points:
        if lo < p.z < hi and p.mu:
            eps = 1e-12 * max(1.0, abs(p.z))
            u1 = mode_function(model, omega1, channels[0], [p.z + eps], constants)[0]
            u2 = mode_function(model, omega2, channels[1], [p.z + eps], constants)[0]
            total += p.mu / constants.c ** 2 * np.conj(u1) * u2
    return complex(total)
