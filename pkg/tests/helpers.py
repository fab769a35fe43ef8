"""Shared random draws for the mode-solver tests and the acceptance suite."""

import numpy as np

from qscatter import modes


def random_params(kind: str, rng: np.random.Generator) -> dict:
    u = rng.uniform
    if kind == "two_sided_boundary":
        return dict(n_r=u(1, 3), n_l=u(1, 3), q=u(-1, 1))
    if kind == "slab":
        return dict(n_r=u(1, 3), n_l=u(1, 3), n=u(1, 4), a=u(0.05, 1), q=u(-1, 1))
    if kind == "singular_boundary":
        return dict(n_r=u(1, 3), n_l=u(1, 3), mu=u(0, 2), q=u(-1, 1))
    if kind == "singular_point":
        return dict(mu=u(0, 2), q=u(-1, 1))
    if kind == "perfect_mirror":
        return dict(q=u(0.1, 2))
    if kind == "mirror_singular_boundary":
        return dict(mu=u(0, 2), q=u(0.1, 2))
    if kind == "mirror_layer":
        return dict(n=u(1, 4), q=u(0.1, 2))
    raise ValueError(kind)


def coefficient_gap(a: modes.ScatteringCoefficients, b: modes.ScatteringCoefficients) -> float:
    return float(np.max(np.abs(a.as_array() - b.as_array())))


def indices(kind: str, params: dict) -> tuple[float, float]:
    return params.get("n_r", 1.0), params.get("n_l", 1.0)
