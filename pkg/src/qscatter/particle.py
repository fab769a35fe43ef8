"""One-dimensional phase-jump problem ``i psi' + V psi = k psi``.

A first-order (chiral) wave crossing a sharply peaked potential picks up a
unimodular factor ``s = psi(left) / psi(right)`` once the plane-wave factor
``exp(-ikx)`` is removed.  Two regularisations are solved on a grid:

* ``scalar_delta``: ``V = eps * delta_n(x)``, a multiplication operator;
* ``rank_one``: ``V = eps |delta_n><delta_n|``, a rank-one projector.

They have different limits as ``n -> oo``, ``exp(-i eps)`` versus the
fractional-linear ``(1 - i eps/2) / (1 + i eps/2)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid

from .errors import ArgumentError, ResolutionError, SingularityError

SHAPES = ("box", "triangle", "raised_cosine")
KINDS = ("scalar_delta", "rank_one")

MIN_POINTS_ACROSS_SUPPORT = 64


def _profile(shape: str, u: np.ndarray) -> np.ndarray:
    # un-normalised even bump on [-1, 1]
    inside = np.abs(u) <= 1.0
    if shape == "box":
        g = np.ones_like(u)
    elif shape == "triangle":
        g = 1.0 - np.abs(u)
    elif shape == "raised_cosine":
        g = 0.5 * (1.0 + np.cos(np.pi * u))
    else:
        raise ArgumentError(f"unknown mollifier shape {shape!r}; expected one of {SHAPES}")
    return np.where(inside, g, 0.0)


@dataclass(frozen=True)
class Mollifier:
    """Even, compactly supported approximation ``delta_n(x) = n g(n x)``.

    ``g`` is supported on ``[-c, c]``, so ``delta_n`` lives on
    ``[-c/n, c/n]``.
    """

    shape: str = "raised_cosine"
    n: float = 256.0
    c: float = 1.0

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ArgumentError(f"unknown mollifier shape {self.shape!r}; expected one of {SHAPES}")
        if not (self.n > 0 and self.c > 0):
            raise ArgumentError(f"mollifier needs n > 0 and c > 0, got n={self.n}, c={self.c}")

    @property
    def half_width(self) -> float:
        return self.c / self.n

    def __call__(self, x) -> np.ndarray:
        """Continuum values, normalised analytically."""
        x = np.asarray(x, dtype=float)
        norm = {"box": 2.0, "triangle": 1.0, "raised_cosine": 1.0}[self.shape] * self.c
        return self.n * _profile(self.shape, self.n * x / self.c * 1.0) / norm

    def sampled(self, x: np.ndarray) -> np.ndarray:
        """Grid samples rescaled so the trapezoid rule integrates them to one."""
        vals = self(x)
        total = trapezoid(vals, x)
        if total <= 0:
            raise ResolutionError("grid misses the mollifier support")
        return vals / total


@dataclass
class ScatterProblem:
    kind: str
    epsilon: float
    k: float
    mollifier: Mollifier = field(default_factory=Mollifier)
    points_across_support: int = 256
    span: float = 3.0      # grid covers [-span, span] support half-widths

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ArgumentError(f"unknown problem kind {self.kind!r}; expected one of {KINDS}")
        if not np.isfinite(self.epsilon) or not np.isfinite(self.k):
            raise ArgumentError("epsilon and k must be finite")
        if self.span < 3.0:
            raise ArgumentError(f"grid must span at least 3 support half-widths, got {self.span}")

    def grid(self) -> np.ndarray:
        if self.points_across_support < MIN_POINTS_ACROSS_SUPPORT:
            raise ResolutionError(
                f"{self.points_across_support} points across the support; need >= {MIN_POINTS_ACROSS_SUPPORT}")
        w = self.mollifier.half_width
        # support edges land on grid nodes
        cells = int(round(self.span * self.points_across_support / 2)) * 2
        return np.linspace(-self.span * w, self.span * w, cells + 1)


@dataclass
class JumpResult:
    s_numeric: complex
    s_analytic: complex
    x: np.ndarray
    psi: np.ndarray

    @property
    def error(self) -> float:
        return abs(self.s_numeric - self.s_analytic)


def analytic_jump(kind: str, epsilon):
    """Limit phase jump: ``exp(-i eps)`` or ``(1 - i eps/2)/(1 + i eps/2)``.

    Returns a complex scalar for scalar ``epsilon`` and an array otherwise.
    """
    eps = np.asarray(epsilon, dtype=float)
    if kind in ("scalar_delta", "exponential", 1):
        out = np.exp(-1j * eps)
    elif kind in ("rank_one", "cayley", 2):
        out = (1 - 0.5j * eps) / (1 + 0.5j * eps)
    else:
        raise ArgumentError(f"unknown jump law {kind!r}")
    return complex(out) if out.ndim == 0 else out


def _far_zone_amplitudes(problem: ScatterProblem, x, psi) -> tuple[complex, complex]:
    # least-squares fit psi ~ A exp(-ikx) on each far segment, one support width of buffer
    w = problem.mollifier.half_width
    stripped = psi * np.exp(1j * problem.k * x)
    left = x <= -2.0 * w
    right = x >= 2.0 * w
    if left.sum() < 2 or right.sum() < 2:
        raise ResolutionError("far-zone fit windows are empty")
    return complex(stripped[left].mean()), complex(stripped[right].mean())


def solve_scalar(problem: ScatterProblem) -> JumpResult:
    """Integrating-factor solution of ``i psi' + eps delta_n psi = k psi``."""
    if problem.kind != "scalar_delta":
        raise ArgumentError(f"solve_scalar needs kind 'scalar_delta', got {problem.kind!r}")
    x = problem.grid()
    d = problem.mollifier.sampled(x)
    phase = problem.epsilon * cumulative_trapezoid(d, x, initial=0.0)
    psi = np.exp(-1j * problem.k * (x - x[0]) + 1j * phase)
    a_left, a_right = _far_zone_amplitudes(problem, x, psi)
    return JumpResult(a_left / a_right, analytic_jump("scalar_delta", problem.epsilon), x, psi)


def solve_rank_one(problem: ScatterProblem) -> JumpResult:
    """Direct solve of the self-consistency for ``V = eps |delta_n><delta_n|``.

    With ``alpha = <delta_n|psi>`` the equation becomes
    ``psi' = -ik psi + i eps alpha delta_n``, so
    ``psi = psi_0 + alpha * psi_1`` with a free wave ``psi_0`` and a driven
    part ``psi_1``.  Projecting onto ``delta_n`` with the grid quadrature
    gives one linear equation for ``alpha``.
    """
    if problem.kind != "rank_one":
        raise ArgumentError(f"solve_rank_one needs kind 'rank_one', got {problem.kind!r}")
    x = problem.grid()
    d = problem.mollifier.sampled(x)
    k, eps = problem.k, problem.epsilon
    psi0 = np.exp(-1j * k * x)
    psi1 = 1j * eps * psi0 * cumulative_trapezoid(np.exp(1j * k * x) * d, x, initial=0.0)
    a0 = trapezoid(d * psi0, x)
    a1 = trapezoid(d * psi1, x)
    den = 1.0 - a1
    if abs(den) < 1e-13:
        raise SingularityError("rank-one self-consistency is singular")
    alpha = a0 / den
    psi = psi0 + alpha * psi1
    a_left, a_right = _far_zone_amplitudes(problem, x, psi)
    return JumpResult(a_left / a_right, analytic_jump("rank_one", eps), x, psi)


def solve(problem: ScatterProblem) -> JumpResult:
    return solve_scalar(problem) if problem.kind == "scalar_delta" else solve_rank_one(problem)


def rank_one_exact(epsilon: float, k: float, mollifier: Mollifier) -> complex:
    """Finite-``n`` rank-one jump from adaptive quadrature (grid-free reference).

    ``s_n = (1 - i eps K) / (1 - i eps K + i eps |g_hat|^2)`` with
    ``g_hat = int delta_n e^{ikx}`` and
    ``K = int int_{y<x} delta_n(x) delta_n(y) e^{-ik(x-y)}``.
    """
    from scipy.integrate import dblquad, quad

    w = mollifier.half_width
    pts = [0.0] if mollifier.shape != "box" else None
    ghat = quad(lambda t: mollifier(t) * np.cos(k * t), -w, w, points=pts, epsabs=1e-14, epsrel=1e-13)[0]
    re = dblquad(lambda y, t: mollifier(t) * mollifier(y) * np.cos(k * (t - y)), -w, w, -w, lambda t: t,
                 epsabs=1e-13, epsrel=1e-12)[0]
    im = dblquad(lambda y, t: -mollifier(t) * mollifier(y) * np.sin(k * (t - y)), -w, w, -w, lambda t: t,
                 epsabs=1e-13, epsrel=1e-12)[0]
    kk = re + 1j * im
    return complex((1 - 1j * epsilon * kk) / (1 - 1j * epsilon * kk + 1j * epsilon * ghat ** 2))


def sweep(kind: str, epsilons, ns, k: float = 1.0, shape: str = "raised_cosine", c: float = 1.0):
    """Rows ``(epsilon, n, s)`` over a product of couplings and sharpness values."""
    rows = []
    for eps in epsilons:
        for n in ns:
            res = solve(ScatterProblem(kind, float(eps), k, Mollifier(shape, float(n), c)))
            rows.append((float(eps), float(n), res.s_numeric, res.error))
    return rows
