"""Pointwise CR geometry of the unit sphere S^{2n+1} in C^{n+1}.

Points and vectors are real arrays in interleaved coordinates
``(x1, y1, ..., x_{n+1}, y_{n+1})`` with ``zeta_j = x_j + i y_j``. Every
function accepts a single point of shape ``(2n+2,)`` or a batch of shape
``(N, 2n+2)``.
"""

from __future__ import annotations

import numpy as np

SPHERE_TOL = 1e-12


class OffSphereError(ValueError):
    pass


def ambient_dim(n: int) -> int:
    return 2 * n + 2


def cr_dim(dim: int) -> int:
    """Return n for an ambient dimension 2n+2."""
    if dim < 4 or dim % 2:
        raise ValueError(f"ambient dimension must be even and >= 4, got {dim}")
    return dim // 2 - 1


def apply_J(v):
    """Complex structure (x_j, y_j) -> (-y_j, x_j)."""
    v = np.asarray(v, dtype=float)
    out = np.empty_like(v)
    out[..., 0::2] = -v[..., 1::2]
    out[..., 1::2] = v[..., 0::2]
    return out


def J_matrix(dim: int) -> np.ndarray:
    return apply_J(np.eye(dim)).T


def to_complex(z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    return z[..., 0::2] + 1j * z[..., 1::2]


def from_complex(zc) -> np.ndarray:
    zc = np.asarray(zc, dtype=complex)
    out = np.empty(zc.shape[:-1] + (2 * zc.shape[-1],))
    out[..., 0::2] = zc.real
    out[..., 1::2] = zc.imag
    return out


def complex_to_real_matrix(M) -> np.ndarray:
    """Real (2k x 2k) matrix acting on interleaved coordinates like M acts on C^k."""
    M = np.asarray(M, dtype=complex)
    k = M.shape[0]
    R = np.zeros((2 * k, 2 * k))
    R[0::2, 0::2] = M.real
    R[0::2, 1::2] = -M.imag
    R[1::2, 0::2] = M.imag
    R[1::2, 1::2] = M.real
    return R


def real_to_complex_matrix(R) -> np.ndarray:
    R = np.asarray(R, dtype=float)
    return R[0::2, 0::2] + 1j * R[1::2, 0::2]


def hermitian_product(z, p) -> np.ndarray:
    """(zeta, p) = sum_j zeta_j conj(p_j); complex scalar per point."""
    return np.sum(to_complex(z) * np.conj(to_complex(p)), axis=-1)


def sphere_defect(z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    return np.abs(np.sum(z * z, axis=-1) - 1.0)


def check_on_sphere(z, tol: float = SPHERE_TOL) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if z.shape[-1] < 4 or z.shape[-1] % 2:
        raise ValueError(f"bad ambient dimension {z.shape[-1]}")
    bad = sphere_defect(z) > tol
    if np.any(bad):
        idx = int(np.flatnonzero(np.atleast_1d(bad))[0])
        raise OffSphereError(f"point {idx} is off the unit sphere (| |z|^2 - 1 | > {tol:g})")
    return z


def renormalize(z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    return z / np.linalg.norm(z, axis=-1, keepdims=True)


def sphere_point(coords, tol: float = SPHERE_TOL) -> np.ndarray:
    """Validated copy of ``coords`` as a sphere point (or batch)."""
    return check_on_sphere(np.array(coords, dtype=float), tol)


def pole(n: int) -> np.ndarray:
    """The point e_{n+1}."""
    e = np.zeros(ambient_dim(n))
    e[-2] = 1.0
    return e


def random_sphere_points(n: int, count: int, rng: np.random.Generator) -> np.ndarray:
    return renormalize(rng.standard_normal((count, ambient_dim(n))))


def random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random element of U(n+1) as a real orthogonal matrix commuting with J."""
    k = n + 1
    Z = (rng.standard_normal((k, k)) + 1j * rng.standard_normal((k, k))) / np.sqrt(2)
    Q, R = np.linalg.qr(Z)
    d = np.diag(R)
    Q = Q * (d / np.abs(d))
    return complex_to_real_matrix(Q)


def reeb_vector(z) -> np.ndarray:
    """Reeb field of theta_0 at z, equal to J z."""
    return apply_J(check_on_sphere(z))


def contact_form(z, v) -> np.ndarray:
    """theta_0 at z applied to v: <J z, v>."""
    z = check_on_sphere(z)
    return np.sum(apply_J(z) * np.asarray(v, dtype=float), axis=-1)


def horizontal_project(z, v) -> np.ndarray:
    """Orthogonal projection of v onto H_z = span{z, Jz}^perp."""
    z = check_on_sphere(z)
    v = np.asarray(v, dtype=float)
    Jz = apply_J(z)
    a = np.sum(v * z, axis=-1, keepdims=True)
    b = np.sum(v * Jz, axis=-1, keepdims=True)
    return v - a * z - b * Jz


def horizontal_energy_density(u, z) -> np.ndarray:
    """|grad^H u|^2 for theta_0 at z, from the ambient gradient of the polynomial u.

    Uses |grad u|^2 - <grad u, z>^2 - (xi u)^2, with the Levi form of theta_0
    taken as the round metric on H.
    """
    z = check_on_sphere(z)
    g = u.gradient(z)
    radial = np.sum(g * z, axis=-1)
    reeb = np.sum(g * apply_J(z), axis=-1)
    return np.maximum(np.sum(g * g, axis=-1) - radial**2 - reeb**2, 0.0)
