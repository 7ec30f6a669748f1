"""Integration on S^{2n+1} against the standard volume form.

The standard volume form of theta_0 is the round measure of the unit sphere,
so rules here are ordinary spherical cubatures: an exact Hopf product rule on
S^3 and seeded Monte Carlo for any n.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import ambient_dim, check_on_sphere, cr_dim, renormalize

VOLUME_TOL = 1e-10


class IntegrationError(ArithmeticError):
    pass


def sphere_volume(n: int) -> float:
    """Round volume of S^{2n+1}: 2 pi^{n+1} / n!."""
    return 2.0 * math.pi ** (n + 1) / math.gamma(n + 1)


def gauss_legendre(m: int, tol: float = 1e-15, max_iter: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration."""
    if m < 1:
        raise ValueError("need at least one node")
    k = np.arange(1, m + 1)
    x = np.cos(np.pi * (k - 0.25) / (m + 0.5))
    for _ in range(max_iter):
        pm, pm1 = _legendre_pair(m, x)
        dx = pm / (m * (x * pm - pm1) / (x * x - 1.0))
        x = x - dx
        if np.max(np.abs(dx)) < tol:
            break
    pm, pm1 = _legendre_pair(m, x)
    dp = m * (x * pm - pm1) / (x * x - 1.0)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    order = np.argsort(x)
    return x[order], w[order]


def _legendre_pair(m: int, x):
    """(P_m(x), P_{m-1}(x)) by the three-term recurrence."""
    p0, p1 = np.ones_like(x), x.copy()
    for j in range(2, m + 1):
        p0, p1 = p1, ((2 * j - 1) * x * p1 - (j - 1) * p0) / j
    return p1, p0


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray
    exact_degree: int
    descriptor: str
    n: int = field(init=False)

    def __post_init__(self):
        nodes = np.ascontiguousarray(self.nodes, dtype=float)
        weights = np.ascontiguousarray(self.weights, dtype=float)
        if nodes.ndim != 2 or nodes.shape[0] != weights.shape[0]:
            raise ValueError("nodes and weights must have matching lengths")
        if np.any(weights <= 0):
            raise ValueError("quadrature weights must be positive")
        check_on_sphere(nodes, 1e-12)
        nodes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "n", cr_dim(nodes.shape[1]))
        if self.exact_degree > 0:
            vol = math.fsum(weights)
            if abs(vol - sphere_volume(self.n)) > VOLUME_TOL:
                raise ValueError(f"exact rule volume {vol!r} disagrees with the sphere volume")

    def __len__(self):
        return self.weights.shape[0]

    @property
    def volume(self) -> float:
        return math.fsum(self.weights)

    def to_dict(self) -> dict:
        return {"descriptor": self.descriptor, "exact_degree": self.exact_degree, "nodes": len(self)}


def product_rule_s3(m: int) -> QuadratureRule:
    """Hopf product rule on S^3 with m * (2m+1)^2 nodes.

    zeta_1 = cos(eta) e^{i phi_1}, zeta_2 = sin(eta) e^{i phi_2}; Gauss-Legendre
    in s = cos(2 eta) and the trapezoid rule in both angles. The volume element
    is ds dphi_1 dphi_2 / 4.
    """
    if m < 2:
        raise ValueError("product rule needs m >= 2")
    s, ws = gauss_legendre(m)
    M = 2 * m + 1
    phi = 2.0 * np.pi * np.arange(M) / M
    S, P1, P2 = np.meshgrid(s, phi, phi, indexing="ij")
    c = np.sqrt((1.0 + S) / 2.0)
    sn = np.sqrt((1.0 - S) / 2.0)
    nodes = np.stack([c * np.cos(P1), c * np.sin(P1), sn * np.cos(P2), sn * np.sin(P2)], axis=-1)
    weights = np.broadcast_to(ws[:, None, None] * (2.0 * np.pi / M) ** 2 / 4.0, S.shape)
    return QuadratureRule(
        renormalize(nodes.reshape(-1, 4)),
        weights.reshape(-1).copy(),
        exact_degree=2 * m - 1,
        descriptor=f"product_s3(m={m})",
    )


def monte_carlo_rule(n: int, N: int, seed: int) -> QuadratureRule:
    """N uniform points (normalized Gaussians) with equal weights; deterministic in seed."""
    if N < 1000:
        raise ValueError("Monte Carlo rule needs N >= 1000")
    rng = np.random.default_rng(seed)
    nodes = renormalize(rng.standard_normal((N, ambient_dim(n))))
    weights = np.full(N, sphere_volume(n) / N)
    return QuadratureRule(nodes, weights, exact_degree=0, descriptor=f"montecarlo(n={n},N={N},seed={seed})")


def default_rule(n: int, degree: int, mc_samples: int = 200_000, seed: int = 0) -> QuadratureRule:
    """Product rule with m = 2D + 6 on S^3, Monte Carlo otherwise."""
    if n == 1:
        return product_rule_s3(2 * degree + 6)
    return monte_carlo_rule(n, mc_samples, seed)


def integrate(field, rule: QuadratureRule) -> float:
    """sum_i w_i field(node_i), exactly rounded.

    ``field`` is a constant, a callable on an (N, dim) array, or an array of
    node values.
    """
    if callable(field):
        values = field(rule.nodes)
    else:
        values = field
    values = np.broadcast_to(np.asarray(values, dtype=float), rule.weights.shape)
    bad = ~np.isfinite(values)
    if bad.any():
        raise IntegrationError(f"field is not finite at node {int(np.flatnonzero(bad)[0])}")
    return math.fsum(rule.weights * values)


def write_rule_csv(rule: QuadratureRule, path) -> None:
    dim = rule.nodes.shape[1]
    names = [f"{'xy'[i % 2]}{i // 2 + 1}" for i in range(dim)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(names + ["weight"])
        for node, weight in zip(rule.nodes, rule.weights):
            w.writerow([format(v, ".17g") for v in node] + [format(weight, ".17g")])
