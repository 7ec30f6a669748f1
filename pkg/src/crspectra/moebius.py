"""CR automorphisms of the sphere: Cayley map, dilation groups, pullbacks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import (
    J_matrix,
    apply_J,
    check_on_sphere,
    complex_to_real_matrix,
    cr_dim,
    from_complex,
    hermitian_product,
    pole,
    renormalize,
    to_complex,
)

POLE_TOL = 1e-10
UNITARY_TOL = 1e-12


class PoleSingularity(ArithmeticError):
    pass


def _check_unitary(U, dim):
    if U is None:
        return None
    U = np.array(U, dtype=float)
    if U.shape != (dim, dim):
        raise ValueError(f"unitary must be {dim}x{dim}")
    if np.max(np.abs(U.T @ U - np.eye(dim))) > UNITARY_TOL:
        raise ValueError("matrix is not orthogonal")
    J = J_matrix(dim)
    if np.max(np.abs(U @ J - J @ U)) > UNITARY_TOL:
        raise ValueError("matrix does not commute with J")
    U.setflags(write=False)
    return U


@dataclass(frozen=True, eq=False)
class CrAutomorphism:
    """z -> post @ gamma_t^pole(pre @ z)."""

    pole: np.ndarray
    t: float
    pre_unitary: np.ndarray | None = None
    post_unitary: np.ndarray | None = None

    def __post_init__(self):
        p = check_on_sphere(np.array(self.pole, dtype=float))
        if p.ndim != 1:
            raise ValueError("pole must be a single point")
        p.setflags(write=False)
        t = float(self.t)
        if not np.isfinite(t) or t < 0:
            raise ValueError(f"t must be finite and >= 0, got {self.t!r}")
        object.__setattr__(self, "pole", p)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "pre_unitary", _check_unitary(self.pre_unitary, p.size))
        object.__setattr__(self, "post_unitary", _check_unitary(self.post_unitary, p.size))

    @classmethod
    def identity(cls, n: int) -> CrAutomorphism:
        return cls(pole(n), 0.0)

    @property
    def n(self) -> int:
        return cr_dim(self.pole.size)

    def __call__(self, z):
        return apply(self, z)

    def factor(self, z):
        return pullback_factor(self, z)

    def to_dict(self) -> dict:
        out = {"pole": [float(v) for v in self.pole], "t": self.t}
        if self.pre_unitary is not None:
            out["pre_unitary"] = self.pre_unitary.tolist()
        if self.post_unitary is not None:
            out["post_unitary"] = self.post_unitary.tolist()
        return out

    @classmethod
    def from_dict(cls, d: dict) -> CrAutomorphism:
        return cls(d["pole"], d["t"], d.get("pre_unitary"), d.get("post_unitary"))


def _denominator(p, t, z):
    return np.cosh(t) + np.sinh(t) * hermitian_product(z, p)


def dilation(p, t: float, z) -> np.ndarray:
    """gamma_t^p(z) for the bare one-parameter group (no unitary factors)."""
    zc = to_complex(z)
    pc = to_complex(p)
    ip = np.sum(zc * np.conj(pc), axis=-1)
    den = np.cosh(t) + np.sinh(t) * ip
    if np.any(np.abs(den) <= 1e-14):
        raise ArithmeticError("degenerate dilation denominator")
    num = zc + (np.sinh(t) + (np.cosh(t) - 1.0) * ip)[..., None] * pc
    return from_complex(num / den[..., None])


def apply(g: CrAutomorphism, z) -> np.ndarray:
    z = check_on_sphere(z)
    if g.pre_unitary is not None:
        z = z @ g.pre_unitary.T
    w = dilation(g.pole, g.t, z)
    if g.post_unitary is not None:
        w = w @ g.post_unitary.T
    return w


def pullback_factor(g: CrAutomorphism, z) -> np.ndarray:
    """Conformal factor of g^* theta_0 at z: 1 / |cosh t + sinh t (zeta, p)|^2."""
    z = check_on_sphere(z)
    if g.pre_unitary is not None:
        z = z @ g.pre_unitary.T
    return 1.0 / np.abs(_denominator(g.pole, g.t, z)) ** 2


def tangent_frame(z) -> np.ndarray:
    """Orthonormal basis of T_z S as rows; the first row is J z."""
    z = np.asarray(z, dtype=float)
    dim = z.size
    Q, _ = np.linalg.qr(np.column_stack([z, apply_J(z), np.eye(dim)]))
    frame = Q[:, 1:dim].T.copy()
    frame[0] = apply_J(z)
    return frame


def directional_derivative(fn, z, v, h: float = 1e-6) -> np.ndarray:
    """Central difference of fn along the great circle through z with velocity v (unit, v perp z)."""
    z = np.asarray(z, dtype=float)
    v = np.asarray(v, dtype=float)
    plus = np.cos(h) * z + np.sin(h) * v
    minus = np.cos(h) * z - np.sin(h) * v
    return (fn(plus) - fn(minus)) / (2.0 * h)


def pullback_residual(g, z, h: float = 1e-6) -> float:
    """max_v |theta_0(dg v) - factor(z) theta_0(v)| over a tangent frame at z.

    Both sides use the secant actually realized by the perturbed points, so the
    rounding of the curve itself cancels and the identity map scores exactly 0.
    """
    if not 1e-7 < h < 1e-4:
        raise ValueError("finite-difference step must lie in (1e-7, 1e-4)")
    z = check_on_sphere(z)
    frame = tangent_frame(z)
    plus = np.cos(h) * z + np.sin(h) * frame
    minus = np.cos(h) * z - np.sin(h) * frame
    secant = (plus - minus) / (2.0 * h)
    dg = (g(plus) - g(minus)) / (2.0 * h)
    lhs = dg @ apply_J(g(z))
    rhs = float(g.factor(z)) * (secant @ apply_J(z))
    return float(np.max(np.abs(lhs - rhs)))


def horizontal_energy(fn, z, h: float = 1e-6) -> np.ndarray:
    """sum_j |grad^H fn_j|^2 at each z (theta_0 Levi metric), by central differences.

    For each ambient e_a, v = P_H e_a is followed along (z + s v)/|z + s v|.
    Difference quotients are taken against the realized secant, and summing
    |dfn(v)|^2 over a gives the trace of dfn^T dfn on H.
    """
    z = check_on_sphere(np.atleast_2d(z))
    Jz = apply_J(z)
    total = np.zeros(z.shape[0])
    for a in range(z.shape[1]):
        v = -z[:, a, None] * z - Jz[:, a, None] * Jz
        v[:, a] += 1.0
        vv = np.sum(v * v, axis=-1)
        plus = renormalize(z + h * v)
        minus = renormalize(z - h * v)
        sec = np.sum((plus - minus) ** 2, axis=-1)
        d2 = np.sum((fn(plus) - fn(minus)) ** 2, axis=-1)
        ok = sec > 0
        total[ok] += d2[ok] / sec[ok] * vv[ok]
    return total


def unitary_to_pole(p) -> np.ndarray:
    """Real form of a unitary U with U p = e_{n+1}.

    Householder reflection H about p - w e_{n+1} with w = p_{n+1}/|p_{n+1}|
    (so that H p = w e_{n+1}), followed by the scalar phase conj(w).
    """
    p = check_on_sphere(p)
    n = cr_dim(p.size)
    pc = to_complex(p)
    last = pc[-1]
    w = last / abs(last) if abs(last) > 0 else 1.0 + 0j
    e = np.zeros(n + 1, dtype=complex)
    e[-1] = w
    u = pc - e
    nu = np.linalg.norm(u)
    if nu < 1e-15:
        H = np.eye(n + 1, dtype=complex)
    else:
        u = u / nu
        H = np.eye(n + 1, dtype=complex) - 2.0 * np.outer(u, np.conj(u))
    return complex_to_real_matrix(np.conj(w) * H)


def conjugated_dilation(p, t: float) -> CrAutomorphism:
    """gamma_t^p written as alpha_p^{-1} o gamma_t^{e_{n+1}} o alpha_p."""
    U = unitary_to_pole(p)
    n = cr_dim(np.asarray(p).size)
    return CrAutomorphism(pole(n), t, pre_unitary=U, post_unitary=U.T)


def cayley_to_siegel(z) -> np.ndarray:
    """Phi(zeta) = (zeta_1, ..., zeta_n, i(1 + zeta_{n+1})) / (1 - zeta_{n+1}).

    Returned as 2n+2 reals: the z-part interleaved, then (Re w, Im w).
    """
    z = check_on_sphere(z)
    zc = to_complex(z)
    den = 1.0 - zc[..., -1]
    if np.any(np.abs(den) <= POLE_TOL):
        raise PoleSingularity("point too close to e_{n+1}")
    out = np.concatenate([zc[..., :-1], (1j * (1.0 + zc[..., -1]))[..., None]], axis=-1)
    return from_complex(out / den[..., None])


def cayley_to_sphere(s, renormalize_result: bool = True) -> np.ndarray:
    """Phi^{-1}(z, w) = (2i z_1, ..., 2i z_n, w - i) / (w + i)."""
    sc = to_complex(np.asarray(s, dtype=float))
    w = sc[..., -1]
    den = w + 1j
    if np.any(np.abs(den) <= POLE_TOL):
        raise PoleSingularity("w too close to -i")
    out = np.concatenate([2j * sc[..., :-1], (w - 1j)[..., None]], axis=-1) / den[..., None]
    out = from_complex(out)
    return renormalize(out) if renormalize_result else out


def siegel_defect(s) -> np.ndarray:
    """|Im w - |z|^2|, zero on the boundary of the Siegel domain."""
    sc = to_complex(np.asarray(s, dtype=float))
    return np.abs(sc[..., -1].imag - np.sum(np.abs(sc[..., :-1]) ** 2, axis=-1))


def siegel_dilation(s, t: float) -> np.ndarray:
    """(z, w) -> (e^t z, e^{2t} w)."""
    s = np.array(s, dtype=float)
    s[..., :-2] *= np.exp(t)
    s[..., -2:] *= np.exp(2 * t)
    return s


class ComposedMap:
    """Application pipeline g_1 o g_2 o ... (rightmost applied first)."""

    def __init__(self, *maps):
        self.maps = tuple(maps)

    def __call__(self, z):
        for g in reversed(self.maps):
            z = g(z)
        return z

    def factor(self, z):
        lam = 1.0
        for g in reversed(self.maps):
            lam = lam * g.factor(z)
            z = g(z)
        return lam


def compose(g1, g2) -> ComposedMap:
    return ComposedMap(g1, g2)
