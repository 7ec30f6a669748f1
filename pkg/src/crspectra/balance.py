"""Conformal barycenter balancing: find gamma_t^p pushing a measure's barycenter to the origin.

The unknown (p, t) is encoded as y in R^{2n+2} with t = |y| and p = y/|y|,
so b = tanh(t) p sweeps the open unit ball and t = 0 needs no pole.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.optimize

from .geometry import check_on_sphere, pole
from .moebius import CrAutomorphism, dilation, horizontal_energy
from .quadrature import QuadratureRule
from .spectral import factor_values

T_CAP = 20.0
ACCEPT_TOL = 1e-8
TARGET_TOL = 1e-13
MAX_ITER = 500
FD_STEP = 1e-7


class BalanceError(ArithmeticError):
    pass


class DegenerateMeasure(BalanceError):
    pass


class NoConvergence(BalanceError):
    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


@dataclass(frozen=True, eq=False)
class WeightedMeasure:
    nodes: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        nodes = check_on_sphere(np.atleast_2d(np.array(self.nodes, dtype=float)))
        masses = np.array(self.masses, dtype=float).reshape(-1)
        if masses.shape[0] != nodes.shape[0]:
            raise ValueError("one mass per node required")
        if not np.all(np.isfinite(masses) & (masses > 0)):
            raise ValueError("masses must be positive and finite")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "masses", masses)

    @property
    def total(self) -> float:
        return math.fsum(self.masses)

    @property
    def n(self) -> int:
        return self.nodes.shape[1] // 2 - 1

    def rotated(self, U) -> WeightedMeasure:
        return WeightedMeasure(self.nodes @ np.asarray(U).T, self.masses)

    @classmethod
    def from_factor(cls, rule: QuadratureRule, f) -> WeightedMeasure:
        """Discretized psi_{f theta_0}: masses w_i f(z_i)^{n+1}."""
        return cls(rule.nodes, rule.weights * factor_values(f, rule) ** (rule.n + 1))


@dataclass(frozen=True, eq=False)
class BalancePoint:
    pole: np.ndarray
    t: float
    residual: float
    iterations: int

    @property
    def ball_point(self) -> np.ndarray:
        return math.tanh(self.t) * np.asarray(self.pole)

    def automorphism(self) -> CrAutomorphism:
        return CrAutomorphism(self.pole, self.t)

    def to_dict(self) -> dict:
        return {
            "pole": [float(v) for v in self.pole],
            "t": self.t,
            "residual": self.residual,
            "iterations": self.iterations,
        }


def barycenter(mu: WeightedMeasure, g) -> np.ndarray:
    """(1/total) sum_i m_i g(node_i)."""
    return (mu.masses / mu.total) @ g(mu.nodes)


def _split(y, n):
    t = float(np.linalg.norm(y))
    if t == 0.0:
        return pole(n), 0.0
    return y / t, t


def _map(mu: WeightedMeasure, y) -> np.ndarray:
    p, t = _split(y, mu.n)
    return (mu.masses / mu.total) @ dilation(p, t, mu.nodes)


def _newton(mu, y0, max_iter=MAX_ITER):
    y = np.array(y0, dtype=float)
    G = _map(mu, y)
    r = float(np.linalg.norm(G))
    dim = y.size
    it = 0
    for it in range(1, max_iter + 1):
        if r <= TARGET_TOL:
            break
        Jac = np.empty((dim, dim))
        for k in range(dim):
            e = np.zeros(dim)
            e[k] = FD_STEP
            Jac[:, k] = (_map(mu, y + e) - _map(mu, y - e)) / (2 * FD_STEP)
        try:
            step = np.linalg.solve(Jac, -G)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(Jac, -G, rcond=None)[0]
        alpha = 1.0
        improved = False
        for _ in range(40):
            cand = y + alpha * step
            if np.linalg.norm(cand) <= T_CAP:
                Gc = _map(mu, cand)
                rc = float(np.linalg.norm(Gc))
                if rc < r:
                    y, G, r = cand, Gc, rc
                    improved = True
                    break
            alpha *= 0.5
        if not improved:
            break
    return y, r, it


def _starts(dim):
    out = []
    for k in range(dim):
        for s in (1.0, -1.0):
            e = np.zeros(dim)
            e[k] = 0.5 * s
            out.append(e)
    return out[:8]


def solve_balance(mu: WeightedMeasure) -> BalancePoint:
    """(p, t) with |barycenter(mu, gamma_t^p)| <= 1e-8; deterministic in mu."""
    spread = np.max(np.linalg.norm(mu.nodes - mu.nodes[0], axis=1))
    if spread < 1e-12:
        raise DegenerateMeasure("measure is supported on a single point")
    n = mu.n
    G0 = float(np.linalg.norm(_map(mu, np.zeros(2 * n + 2))))
    if G0 <= TARGET_TOL:
        return BalancePoint(pole(n), 0.0, G0, 0)

    total_iter = 0
    best = None
    for y0 in [np.zeros(2 * n + 2)] + _starts(2 * n + 2):
        y, r, it = _newton(mu, y0)
        total_iter += it
        if best is None or r < best[1]:
            best = (y, r)
        if r <= ACCEPT_TOL:
            break
    if best[1] > ACCEPT_TOL:
        res = scipy.optimize.minimize(
            lambda y: float(np.sum(_map(mu, y) ** 2)),
            best[0],
            method="L-BFGS-B",
            bounds=[(-T_CAP, T_CAP)] * (2 * n + 2),
            options={"ftol": 1e-30, "gtol": 1e-20, "maxiter": MAX_ITER},
        )
        total_iter += int(res.nit)
        if np.linalg.norm(res.x) <= T_CAP:
            y, r, it = _newton(mu, res.x)
            total_iter += it
            if r < best[1]:
                best = (y, r)
    y, r = best
    p, t = _split(y, n)
    point = BalancePoint(p, t, r, total_iter)
    if r > ACCEPT_TOL:
        raise NoConvergence(
            f"balancing failed: residual {r:.3e} at t={t:.4g} (cap {T_CAP})", best=point
        )
    return point


def balanced_test_energy(mu: WeightedMeasure, f, rule: QuadratureRule, h: float = 1e-6) -> float:
    """sum_j int |grad^H gamma_j|^2_theta psi_theta / V(theta) for the balanced gamma.

    The components of the balanced gamma are admissible test functions, so the
    value bounds lambda_1(f theta_0) from above.
    """
    point = solve_balance(mu)
    g = point.automorphism()
    n = rule.n
    fv = factor_values(f, rule)
    energy = horizontal_energy(g, rule.nodes, h)
    return math.fsum(rule.weights * fv**n * energy) / math.fsum(rule.weights * fv ** (n + 1))
