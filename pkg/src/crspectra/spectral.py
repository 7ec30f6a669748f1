"""Galerkin sub-Laplacian spectrum for conformal structures theta = f theta_0.

With L_{f theta_0} = f L_{theta_0} and psi_{f theta_0} = f^{n+1} psi_0, the
Dirichlet and mass forms pulled back to the round measure are

    A_jk = int f^n <grad^H phi_j, grad^H phi_k> psi_0,
    B_jk = int f^{n+1} phi_j phi_k psi_0,

where grad^H is taken for theta_0. The monomial trial space is rank
deficient on the sphere (|zeta|^2 = 1), so it is reduced through the
eigenvectors of the round Gram matrix before the generalized eigensolve.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from .geometry import apply_J, check_on_sphere, hermitian_product
from .polynomials import RealPolynomial, monomial_basis, monomial_gradients, monomial_values, random_polynomial
from .quadrature import QuadratureRule, default_rule

RANK_CUTOFF = 1e-10
KERNEL_REL_TOL = 1e-6
CLUSTER_REL_TOL = 1e-6
CHUNK = 4096


class SpectralError(ArithmeticError):
    pass


class NonPositiveFactor(SpectralError):
    pass


class RankDeficiency(SpectralError):
    pass


class EigensolverFailure(SpectralError):
    pass


class KernelDimensionAnomaly(SpectralError):
    pass


class DegenerateTestFunction(SpectralError):
    pass


# -- conformal factors ---------------------------------------------------------


@dataclass(frozen=True)
class Constant:
    c: float = 1.0

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        return np.full(z.shape[:-1], float(self.c))

    def scaled(self, k: float) -> Constant:
        return Constant(self.c * k)

    def rotated(self, U) -> Constant:
        return self

    def to_dict(self) -> dict:
        return {"kind": "constant", "c": self.c}


@dataclass(frozen=True, eq=False)
class Extremal:
    """c / |cosh t + sinh t (zeta, pole)|^2, the pullback of theta_0 by gamma_t^pole."""

    pole: np.ndarray
    t: float
    scale: float = 1.0

    def __post_init__(self):
        p = check_on_sphere(np.array(self.pole, dtype=float))
        p.setflags(write=False)
        object.__setattr__(self, "pole", p)
        if self.t < 0 or self.scale <= 0:
            raise ValueError("extremal factor needs t >= 0 and scale > 0")

    def __call__(self, z):
        den = np.cosh(self.t) + np.sinh(self.t) * hermitian_product(z, self.pole)
        return self.scale / np.abs(den) ** 2

    def scaled(self, k: float) -> Extremal:
        return Extremal(self.pole, self.t, self.scale * k)

    def rotated(self, U) -> Extremal:
        # (U z, p) = (z, U^* p)
        return Extremal(np.asarray(U).T @ self.pole, self.t, self.scale)

    def to_dict(self) -> dict:
        return {"kind": "extremal", "pole": [float(v) for v in self.pole], "t": self.t, "scale": self.scale}


@dataclass(frozen=True)
class ExpPoly:
    """scale * exp(eps * g)."""

    g: RealPolynomial
    eps: float
    scale: float = 1.0

    def __call__(self, z):
        return self.scale * np.exp(self.eps * np.asarray(self.g(np.atleast_2d(z))).reshape(np.shape(z)[:-1]))

    def scaled(self, k: float) -> ExpPoly:
        return ExpPoly(self.g, self.eps, self.scale * k)

    def rotated(self, U) -> ExpPoly:
        return ExpPoly(self.g.linear_substitute(U), self.eps, self.scale)

    def to_dict(self) -> dict:
        return {"kind": "exppoly", "poly": str(self.g), "eps": self.eps, "scale": self.scale}


@dataclass(frozen=True)
class PolyPositive:
    """A polynomial h, required to be positive at every node of the active rule."""

    h: RealPolynomial

    def __call__(self, z):
        return np.asarray(self.h(np.atleast_2d(z))).reshape(np.shape(z)[:-1])

    def scaled(self, k: float) -> PolyPositive:
        return PolyPositive(self.h * k)

    def rotated(self, U) -> PolyPositive:
        return PolyPositive(self.h.linear_substitute(U))

    def to_dict(self) -> dict:
        return {"kind": "polypositive", "poly": str(self.h)}


ConformalFactor = Constant | Extremal | ExpPoly | PolyPositive


def random_exppoly(n: int, eps: float, seed: int, degree: int = 2) -> ExpPoly:
    """exp(eps * g) with g of the given degree, coefficients uniform in [-1, 1]."""
    return ExpPoly(random_polynomial(n, degree, np.random.default_rng(seed)), eps)


def factor_from_dict(d: dict, n: int) -> ConformalFactor:
    kind = d.get("kind")
    dim = 2 * n + 2
    if kind == "constant":
        return Constant(float(d.get("c", 1.0)))
    if kind == "extremal":
        return Extremal(np.asarray(d["pole"], dtype=float), float(d.get("t", 0.0)), float(d.get("scale", 1.0)))
    if kind == "exppoly":
        if "poly" in d:
            g = RealPolynomial.parse(d["poly"], dim)
            return ExpPoly(g, float(d.get("eps", 1.0)), float(d.get("scale", 1.0)))
        f = random_exppoly(n, float(d.get("eps", 0.2)), int(d.get("seed", 0)), int(d.get("degree", 2)))
        return f.scaled(float(d.get("scale", 1.0)))
    if kind == "polypositive":
        return PolyPositive(RealPolynomial.parse(d["poly"], dim))
    raise ValueError(f"unknown conformal factor kind {kind!r}")


def factor_values(f, rule: QuadratureRule) -> np.ndarray:
    values = np.asarray(f(rule.nodes), dtype=float)
    bad = ~(np.isfinite(values) & (values > 0))
    if bad.any():
        idx = int(np.flatnonzero(bad)[0])
        raise NonPositiveFactor(f"conformal factor is not positive at node {idx} (value {values[idx]!r})")
    return values


# -- assembly and solve --------------------------------------------------------


def _basis_arrays(basis: Sequence[RealPolynomial]):
    """Union of monomials and the (K, M) coefficient matrix expressing the basis."""
    dim = basis[0].ambient_dim
    index: dict[tuple, int] = {}
    for u in basis:
        if u.ambient_dim != dim:
            raise ValueError("basis polynomials have mixed ambient dimensions")
        for e, _ in u.items():
            index.setdefault(e, len(index))
    C = np.zeros((len(basis), len(index)))
    for k, u in enumerate(basis):
        for e, c in u.items():
            C[k, index[e]] = c
    exps = np.array(list(index), dtype=int).reshape(len(index), dim)
    return exps, C


@dataclass(frozen=True, eq=False)
class SpectralProblem:
    stiffness: np.ndarray
    mass: np.ndarray
    gram: np.ndarray
    rank_map: np.ndarray
    basis: tuple
    volume: float
    reference_volume: float
    rule: str
    n: int

    @property
    def rank(self) -> int:
        return self.rank_map.shape[1]

    def reduced(self) -> tuple[np.ndarray, np.ndarray]:
        Q = self.rank_map
        A = Q.T @ self.stiffness @ Q
        B = Q.T @ self.mass @ Q
        return (A + A.T) / 2, (B + B.T) / 2


def assemble(f, basis: Sequence[RealPolynomial], rule: QuadratureRule) -> SpectralProblem:
    """Stiffness and mass matrices of f theta_0 on the span of ``basis``."""
    n = rule.n
    if basis[0].ambient_dim != rule.nodes.shape[1]:
        raise ValueError("basis and rule live in different dimensions")
    fv = factor_values(f, rule)
    exps, C = _basis_arrays(basis)
    K = C.shape[0]
    A = np.zeros((K, K))
    B = np.zeros((K, K))
    G = np.zeros((K, K))
    w = rule.weights
    for start in range(0, len(rule), CHUNK):
        sl = slice(start, start + CHUNK)
        z = rule.nodes[sl]
        vals = monomial_values(exps, z) @ C.T
        grads = monomial_gradients(exps, z) @ C.T
        Jz = apply_J(z)
        radial = np.einsum("nd,ndk->nk", z, grads)
        reeb = np.einsum("nd,ndk->nk", Jz, grads)
        horiz = grads - z[:, :, None] * radial[:, None, :] - Jz[:, :, None] * reeb[:, None, :]
        sa = np.sqrt(w[sl] * fv[sl] ** n)
        sb = np.sqrt(w[sl] * fv[sl] ** (n + 1))
        sg = np.sqrt(w[sl])
        H = (horiz * sa[:, None, None]).reshape(-1, K)
        A += H.T @ H
        Pb = vals * sb[:, None]
        B += Pb.T @ Pb
        Pg = vals * sg[:, None]
        G += Pg.T @ Pg
    A = (A + A.T) / 2
    B = (B + B.T) / 2
    G = (G + G.T) / 2
    evals, evecs = np.linalg.eigh(G)
    keep = evals > RANK_CUTOFF * evals[-1]
    if keep.sum() < 2:
        raise RankDeficiency(f"only {int(keep.sum())} independent basis functions on the sphere")
    Q = evecs[:, keep] / np.sqrt(evals[keep])
    return SpectralProblem(
        stiffness=A,
        mass=B,
        gram=G,
        rank_map=Q,
        basis=tuple(basis),
        volume=math.fsum(w * fv ** (n + 1)),
        reference_volume=rule.volume,
        rule=rule.descriptor,
        n=n,
    )


def cluster(values: np.ndarray, tol: float) -> list[tuple[float, int]]:
    out: list[list] = []
    for v in values:
        if out and v - out[-1][-1] <= tol:
            out[-1].append(v)
        else:
            out.append([v])
    return [(float(np.mean(c)), len(c)) for c in out]


@dataclass(frozen=True, eq=False)
class SpectralResult:
    eigenvalues: np.ndarray
    clusters: list
    lambda1: float
    volume: float
    n: int
    reference_volume: float
    basis_degree: int | None = None
    rule: str = ""
    invariant: float = field(init=False)
    bound: float = field(init=False)
    margin: float = field(init=False)

    def __post_init__(self):
        e = 1.0 / (self.n + 1)
        object.__setattr__(self, "invariant", self.lambda1 * self.volume**e)
        object.__setattr__(self, "bound", 2 * self.n * self.reference_volume**e)
        object.__setattr__(self, "margin", self.bound - self.invariant)

    def to_dict(self) -> dict:
        return {
            "eigenvalues": [float(v) for v in self.eigenvalues],
            "clusters": [[v, m] for v, m in self.clusters],
            "lambda1": self.lambda1,
            "volume": self.volume,
            "invariant": self.invariant,
            "bound": self.bound,
            "margin": self.margin,
            "basis_degree": self.basis_degree,
            "rule": self.rule,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def solve(problem: SpectralProblem, count: int | None = None, basis_degree: int | None = None) -> SpectralResult:
    A, B = problem.reduced()
    try:
        evals = scipy.linalg.eigh(A, B, eigvals_only=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigensolverFailure(str(exc)) from exc
    if not np.all(np.isfinite(evals)):
        raise EigensolverFailure("non-finite eigenvalues")
    scale = float(np.max(np.abs(evals)))
    ktol = KERNEL_REL_TOL * scale
    kernel = np.abs(evals) <= ktol
    if kernel.sum() != 1 or np.any(evals < -ktol):
        raise KernelDimensionAnomaly(
            f"{int(kernel.sum())} eigenvalues within {ktol:.3g} of zero; lowest {evals[:3]}"
        )
    positive = evals[evals > ktol]
    if positive.size == 0:
        raise KernelDimensionAnomaly("no positive eigenvalue in the trial space")
    shown = evals if count is None else evals[:count]
    return SpectralResult(
        eigenvalues=shown,
        clusters=cluster(shown, CLUSTER_REL_TOL * scale),
        lambda1=float(positive[0]),
        volume=problem.volume,
        n=problem.n,
        reference_volume=problem.reference_volume,
        basis_degree=basis_degree,
        rule=problem.rule,
    )


def invariant_report(f, n: int, D: int, rule: QuadratureRule | None = None, count: int | None = None) -> SpectralResult:
    """lambda_1(f theta_0) V^{1/(n+1)} against 2n V(theta_0)^{1/(n+1)} on one rule."""
    if rule is None:
        rule = default_rule(n, D)
    if rule.n != n:
        raise ValueError(f"rule is for n={rule.n}, asked for n={n}")
    problem = assemble(f, monomial_basis(n, D), rule)
    return solve(problem, count=count, basis_degree=D)


def rayleigh_quotient(u: RealPolynomial, f, rule: QuadratureRule) -> float:
    """int f^n |grad^H u|^2 / int f^{n+1} (u - mean)^2, mean taken against f^{n+1} psi_0."""
    n = rule.n
    fv = factor_values(f, rule)
    z = rule.nodes
    vals = np.asarray(u(z), dtype=float)
    g = u.gradient(z)
    dens = np.sum(g * g, axis=-1) - np.sum(g * z, axis=-1) ** 2 - np.sum(g * apply_J(z), axis=-1) ** 2
    wb = rule.weights * fv ** (n + 1)
    mean = math.fsum(wb * vals) / math.fsum(wb)
    denom = math.fsum(wb * (vals - mean) ** 2)
    if denom < 1e-14:
        raise DegenerateTestFunction("test function is constant on the nodes")
    return math.fsum(rule.weights * fv**n * dens) / denom
