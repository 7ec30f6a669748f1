"""Sparse real polynomials on R^{2n+2} and the bidegree spectral formulas.

Variables are ordered ``x1, y1, x2, y2, ...`` to match the interleaved sphere
coordinates. A polynomial is an immutable map from exponent tuples to
nonzero float coefficients, kept in lexicographic order so that iteration
(and anything assembled from it) is deterministic.
"""

from __future__ import annotations

import math
import re
import warnings
from math import comb
from typing import Iterable, Mapping, NamedTuple

import numpy as np

MONOMIAL_WARN = 20_000
MONOMIAL_CAP = 200_000


class BudgetExceeded(RuntimeError):
    pass


class PolynomialParseError(ValueError):
    pass


class BidegreeLabel(NamedTuple):
    p: int
    q: int


def variable_name(i: int) -> str:
    return f"{'xy'[i % 2]}{i // 2 + 1}"


def variable_index(name: str) -> int:
    m = re.fullmatch(r"([xy])(\d+)", name)
    if not m or int(m.group(2)) < 1:
        raise PolynomialParseError(f"unknown variable {name!r}")
    return 2 * (int(m.group(2)) - 1) + (m.group(1) == "y")


class RealPolynomial:
    __slots__ = ("_terms", "ambient_dim")

    def __init__(self, terms: Mapping[tuple, float] | Iterable, ambient_dim: int):
        items = terms.items() if isinstance(terms, Mapping) else terms
        acc: dict[tuple, float] = {}
        for exps, c in items:
            exps = tuple(int(e) for e in exps)
            if len(exps) != ambient_dim:
                raise ValueError(f"exponent {exps} does not match ambient dimension {ambient_dim}")
            if any(e < 0 for e in exps):
                raise ValueError(f"negative exponent in {exps}")
            acc[exps] = acc.get(exps, 0.0) + float(c)
        self._terms = tuple(sorted((k, v) for k, v in acc.items() if v != 0.0))
        self.ambient_dim = ambient_dim

    @classmethod
    def constant(cls, c: float, ambient_dim: int) -> RealPolynomial:
        return cls({(0,) * ambient_dim: c}, ambient_dim)

    @classmethod
    def variable(cls, i: int, ambient_dim: int) -> RealPolynomial:
        e = [0] * ambient_dim
        e[i] = 1
        return cls({tuple(e): 1.0}, ambient_dim)

    @classmethod
    def monomial(cls, exps, coeff: float = 1.0) -> RealPolynomial:
        return cls({tuple(exps): coeff}, len(exps))

    @classmethod
    def parse(cls, text: str, ambient_dim: int) -> RealPolynomial:
        return parse_polynomial(text, ambient_dim)

    @property
    def terms(self) -> dict[tuple, float]:
        return dict(self._terms)

    def items(self):
        return iter(self._terms)

    def __len__(self):
        return len(self._terms)

    @property
    def degree(self) -> int:
        return max((sum(e) for e, _ in self._terms), default=0)

    def is_zero(self) -> bool:
        return not self._terms

    def __eq__(self, other):
        if not isinstance(other, RealPolynomial):
            return NotImplemented
        return self.ambient_dim == other.ambient_dim and self._terms == other._terms

    def __hash__(self):
        return hash((self.ambient_dim, self._terms))

    def _coerce(self, other) -> RealPolynomial:
        if isinstance(other, RealPolynomial):
            if other.ambient_dim != self.ambient_dim:
                raise ValueError("ambient dimension mismatch")
            return other
        return RealPolynomial.constant(float(other), self.ambient_dim)

    def __add__(self, other):
        other = self._coerce(other)
        return RealPolynomial(list(self._terms) + list(other._terms), self.ambient_dim)

    __radd__ = __add__

    def __neg__(self):
        return RealPolynomial({e: -c for e, c in self._terms}, self.ambient_dim)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, RealPolynomial):
            c = float(other)
            return RealPolynomial({e: c * v for e, v in self._terms}, self.ambient_dim)
        other = self._coerce(other)
        out: dict[tuple, float] = {}
        for ea, ca in self._terms:
            for eb, cb in other._terms:
                e = tuple(a + b for a, b in zip(ea, eb))
                out[e] = out.get(e, 0.0) + ca * cb
        return RealPolynomial(out, self.ambient_dim)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        out = RealPolynomial.constant(1.0, self.ambient_dim)
        for _ in range(int(k)):
            out = out * self
        return out

    def partial_derivative(self, var: int) -> RealPolynomial:
        if not 0 <= var < self.ambient_dim:
            raise IndexError(f"variable index {var} out of range")
        out = {}
        for e, c in self._terms:
            if e[var]:
                d = list(e)
                d[var] -= 1
                out[tuple(d)] = c * e[var]
        return RealPolynomial(out, self.ambient_dim)

    def linear_substitute(self, M) -> RealPolynomial:
        """The polynomial z -> self(M z) for a square matrix M."""
        M = np.asarray(M, dtype=float)
        d = self.ambient_dim
        forms = [
            RealPolynomial({tuple(int(i == j) for i in range(d)): M[k, j] for j in range(d)}, d)
            for k in range(d)
        ]
        out = RealPolynomial({}, d)
        for e, c in self._terms:
            term = RealPolynomial.constant(c, d)
            for k, ek in enumerate(e):
                if ek:
                    term = term * forms[k] ** ek
            out = out + term
        return out

    def __call__(self, points) -> np.ndarray | float:
        """Evaluate at one point (exactly rounded sum) or a batch of points."""
        pts = np.asarray(points, dtype=float)
        if pts.shape[-1] != self.ambient_dim:
            raise ValueError(f"point dimension {pts.shape[-1]} != {self.ambient_dim}")
        if pts.ndim == 1:
            return math.fsum(c * math.prod(x**k for x, k in zip(pts, e) if k) for e, c in self._terms)
        if not self._terms:
            return np.zeros(pts.shape[:-1])
        exps = np.array([e for e, _ in self._terms])
        coeffs = np.array([c for _, c in self._terms])
        return monomial_values(exps, pts) @ coeffs

    def gradient(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        return np.stack(
            [np.asarray(self.partial_derivative(v)(pts), dtype=float) for v in range(self.ambient_dim)],
            axis=-1,
        )

    def __str__(self):
        if not self._terms:
            return "0"
        parts = []
        for e, c in self._terms:
            factors = [variable_name(i) + (f"^{k}" if k > 1 else "") for i, k in enumerate(e) if k]
            if factors and abs(c) == 1.0:
                parts.append(("-" if c < 0 else "") + " * ".join(factors))
            else:
                num = str(int(c)) if c.is_integer() and abs(c) < 2**53 else repr(c)
                parts.append(" * ".join([num] + factors))
        return " + ".join(parts).replace("+ -", "- ")

    def __repr__(self):
        return f"RealPolynomial({str(self)!r}, ambient_dim={self.ambient_dim})"


_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<var>[xy]\d+)(?:\^(?P<exp>[+-]?[^\s*+-]*))?"
    r"|(?P<op>[+-])|(?P<mul>\*))"
)


def parse_polynomial(text: str, ambient_dim: int) -> RealPolynomial:
    """Parse ``"coeff * x1^a y1^b ... + ..."``.

    Factors may be separated by ``*`` or whitespace. Coefficients must be
    numeric literals and exponents nonnegative integers.
    """
    if not text or not text.strip():
        raise PolynomialParseError("empty polynomial")
    terms: dict[tuple, float] = {}
    sign, coeff, exps, nfactors = 1.0, 1.0, [0] * ambient_dim, 0
    pending_sign = pending_mul = False

    def flush():
        if nfactors == 0:
            raise PolynomialParseError(f"empty term in {text!r}")
        key = tuple(exps)
        terms[key] = terms.get(key, 0.0) + sign * coeff

    pos, end = 0, len(text.rstrip())
    while pos < end:
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise PolynomialParseError(f"cannot parse {text[pos:].strip()!r}")
        pos = m.end()
        if pending_mul and not (m.group("num") or m.group("var")):
            raise PolynomialParseError(f"'*' must be followed by a factor in {text!r}")
        pending_mul = False
        if m.group("op"):
            if pending_sign:
                raise PolynomialParseError(f"repeated sign in {text!r}")
            if nfactors:
                flush()
            elif terms:
                raise PolynomialParseError(f"empty term in {text!r}")
            sign = -1.0 if m.group("op") == "-" else 1.0
            coeff, exps, nfactors, pending_sign = 1.0, [0] * ambient_dim, 0, True
        elif m.group("mul"):
            if not nfactors or pending_mul:
                raise PolynomialParseError(f"misplaced '*' in {text!r}")
            pending_mul = True
            continue
        elif m.group("num"):
            coeff *= float(m.group("num"))
            nfactors += 1
            pending_sign = False
        else:
            idx = variable_index(m.group("var"))
            if idx >= ambient_dim:
                raise PolynomialParseError(
                    f"variable {m.group('var')} exceeds ambient dimension {ambient_dim}"
                )
            k = m.group("exp")
            if k is not None and not re.fullmatch(r"\d+", k):
                raise PolynomialParseError(f"exponent must be a nonnegative integer, got {k!r}")
            exps[idx] += int(k) if k is not None else 1
            nfactors += 1
            pending_sign = False
    if pending_mul:
        raise PolynomialParseError(f"dangling '*' in {text!r}")
    flush()
    return RealPolynomial(terms, ambient_dim)


def monomial_values(exps, points) -> np.ndarray:
    """Values of monomials ``x^exps[k]`` at each point, shape (N, K)."""
    exps = np.asarray(exps, dtype=int)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    top = int(exps.max(initial=0))
    out = np.ones((pts.shape[0], exps.shape[0]))
    for v in range(pts.shape[1]):
        col = exps[:, v]
        if not col.any():
            continue
        powers = pts[:, v, None] ** np.arange(top + 1)
        out *= powers[:, col]
    return out


def monomial_gradients(exps, points) -> np.ndarray:
    """Ambient gradients of monomials, shape (N, dim, K)."""
    exps = np.asarray(exps, dtype=int)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    dim = exps.shape[1]
    out = np.zeros((pts.shape[0], dim, exps.shape[0]))
    for v in range(dim):
        mult = exps[:, v]
        if not mult.any():
            continue
        lowered = exps.copy()
        lowered[:, v] = np.maximum(lowered[:, v] - 1, 0)
        out[:, v, :] = monomial_values(lowered, pts) * mult
    return out


def reeb_derivative(u: RealPolynomial) -> RealPolynomial:
    """xi u = sum_j (x_j d/dy_j - y_j d/dx_j) u."""
    d = u.ambient_dim
    out = RealPolynomial({}, d)
    for j in range(d // 2):
        x = RealPolynomial.variable(2 * j, d)
        y = RealPolynomial.variable(2 * j + 1, d)
        out = out + x * u.partial_derivative(2 * j + 1) - y * u.partial_derivative(2 * j)
    return out


def subelliptic_eigenvalue(label, n: int) -> int:
    p, q = label
    if n < 1:
        raise ValueError("n must be >= 1")
    return 2 * n * (p + q) + 4 * p * q


def round_laplacian_consistency(label, n: int) -> int:
    """Eigenvalue from the round Laplacian minus xi^2; must agree with the bidegree formula."""
    p, q = label
    d = p + q
    value = d * (d + 2 * n) - (p - q) ** 2
    if value != subelliptic_eigenvalue(label, n):
        raise AssertionError(f"inconsistent eigenvalue for {label}, n={n}")
    return value


def bidegree_multiplicity(label, n: int) -> int:
    """dim V^{p,q} on C^{n+1}."""
    p, q = label
    if n < 1:
        raise ValueError("n must be >= 1")
    full = comb(n + p, p) * comb(n + q, q)
    if p == 0 or q == 0:
        return full
    return full - comb(n + p - 1, p - 1) * comb(n + q - 1, q - 1)


def spectrum_table(n: int, D: int) -> list[tuple[int, int]]:
    """(eigenvalue, multiplicity) of the flat sub-Laplacian on polynomials of degree <= D."""
    acc: dict[int, int] = {}
    for p in range(D + 1):
        for q in range(D + 1 - p):
            lam = subelliptic_eigenvalue((p, q), n)
            acc[lam] = acc.get(lam, 0) + bidegree_multiplicity((p, q), n)
    return sorted(acc.items())


def monomial_exponents(n: int, D: int) -> list[tuple[int, ...]]:
    """Exponents of total degree <= D in 2n+2 variables, by degree then reverse-lex."""
    dim = 2 * n + 2
    count = comb(dim + D, D)
    if count > MONOMIAL_CAP:
        raise BudgetExceeded(f"{count} monomials for n={n}, D={D} exceeds the cap {MONOMIAL_CAP}")
    if count > MONOMIAL_WARN:
        warnings.warn(f"large monomial basis: {count} terms", RuntimeWarning, stacklevel=2)
    out = []
    for d in range(D + 1):
        out.extend(sorted(_compositions(d, dim), reverse=True))
    return out


def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def monomial_basis(n: int, D: int) -> list[RealPolynomial]:
    if D < 1:
        raise ValueError("basis degree must be >= 1")
    return [RealPolynomial.monomial(e) for e in monomial_exponents(n, D)]


def random_polynomial(n: int, degree: int, rng: np.random.Generator, low=-1.0, high=1.0) -> RealPolynomial:
    """All monomials up to ``degree`` with coefficients uniform in [low, high]."""
    exps = monomial_exponents(n, degree)
    coeffs = rng.uniform(low, high, size=len(exps))
    return RealPolynomial(dict(zip(exps, coeffs)), 2 * n + 2)
