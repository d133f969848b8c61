"""Per-point linear algebra on 4-dimensional tangent spaces.

All functions are vectorized over arbitrary leading batch axes; a
"matrix" argument has shape (..., 4, 4).  Conventions, fixed once for the
whole package:

* forms are stored as component matrices  alpha[a, b] = alpha(d_a, d_b);
* an endomorphism acts on a 2-form by  (A alpha)(X, Y) = alpha(AX, Y),
  i.e. the matrix product  A^T @ alpha;
* the fundamental form of (g, A) is  omega_A(X, Y) = g(AX, Y),
  matrix  A^T @ g;
* the Poisson tensor of a structure is  sigma = [I, J] @ inv(g)  and its
  inverse 2-form is the literal matrix inverse, so  sigma @ Omega = Id.

These choices make the flat quaternionic background satisfy, exactly:
omega_I0 = dx01 + dx23, Pf(omega_I0) = 1, sigma = 2 K0, Omega = -K0/2,
F_plus = omega_I0 + omega_J0 with Pf(F_plus) = 2, and
Phi = log((1 - p)/(1 + p)).
"""

from __future__ import annotations

import numpy as np

from .errors import BrokenStructure, DegeneratePair, SingularForm

# Relative thresholds for declaring a form or pair degenerate.  Far below
# any physically meaningful degeneracy at desk scale, far above round-off.
EPS_INV = 1e-10
EPS_DEG = 1e-10


def quaternionic_triple():
    """Constant matrices (I0, J0, K0) of left quaternion multiplication.

    On the basis (1, i, j, k): I0: e0->e1, e1->-e0, e2->e3, e3->-e2;
    J0: e0->e2, e1->-e3, e2->-e0, e3->e1; K0 = I0 @ J0 = -J0 @ I0.
    """
    i0 = np.zeros((4, 4))
    for a, b, s in ((1, 0, 1), (0, 1, -1), (3, 2, 1), (2, 3, -1)):
        i0[a, b] = s
    j0 = np.zeros((4, 4))
    for a, b, s in ((2, 0, 1), (3, 1, -1), (0, 2, -1), (1, 3, 1)):
        j0[a, b] = s
    k0 = i0 @ j0
    return i0, j0, k0


def transpose(m: np.ndarray) -> np.ndarray:
    return np.swapaxes(m, -1, -2)


def sym(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + transpose(m))


def skew(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m - transpose(m))


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def pfaffian(f: np.ndarray) -> np.ndarray:
    """Pfaffian of an antisymmetric 4x4 matrix (batched).

    Pf(F) = F01 F23 - F02 F13 + F03 F12; F ^ F = 2 Pf(F) dx0123 and
    Pf(F)^2 = det(F).
    """
    return (
        f[..., 0, 1] * f[..., 2, 3]
        - f[..., 0, 2] * f[..., 1, 3]
        + f[..., 0, 3] * f[..., 1, 2]
    )


def det4(m: np.ndarray) -> np.ndarray:
    """Determinant by cofactor expansion along the first row (branch-free)."""
    c0 = _minor3(m, 0)
    c1 = _minor3(m, 1)
    c2 = _minor3(m, 2)
    c3 = _minor3(m, 3)
    return (
        m[..., 0, 0] * c0 - m[..., 0, 1] * c1 + m[..., 0, 2] * c2 - m[..., 0, 3] * c3
    )


def _minor3(m: np.ndarray, drop_col: int) -> np.ndarray:
    cols = [c for c in range(4) if c != drop_col]
    a, b, c = cols
    return (
        m[..., 1, a] * (m[..., 2, b] * m[..., 3, c] - m[..., 2, c] * m[..., 3, b])
        - m[..., 1, b] * (m[..., 2, a] * m[..., 3, c] - m[..., 2, c] * m[..., 3, a])
        + m[..., 1, c] * (m[..., 2, a] * m[..., 3, b] - m[..., 2, b] * m[..., 3, a])
    )


def inv4(m: np.ndarray, what: str = "matrix") -> np.ndarray:
    """Explicit adjugate inverse of a 4x4 stack.

    Raises SingularForm when |det| falls below EPS_INV relative to the
    max-norm scale of the input.
    """
    det = det4(m)
    scale = np.max(np.abs(m), axis=(-2, -1))
    bad = np.abs(det) <= EPS_INV * np.maximum(scale, 1.0) ** 4
    if np.any(bad):
        raise SingularForm(f"{what}: {int(np.sum(bad))} point(s) numerically singular")
    adj = np.empty_like(m)
    sign = 1.0
    for r in range(4):
        for c in range(4):
            adj[..., c, r] = _cofactor(m, r, c)
    return adj / det[..., None, None]


def _cofactor(m: np.ndarray, r: int, c: int) -> np.ndarray:
    rows = [i for i in range(4) if i != r]
    cols = [j for j in range(4) if j != c]
    (i0, i1, i2), (j0, j1, j2) = rows, cols
    minor = (
        m[..., i0, j0] * (m[..., i1, j1] * m[..., i2, j2] - m[..., i1, j2] * m[..., i2, j1])
        - m[..., i0, j1] * (m[..., i1, j0] * m[..., i2, j2] - m[..., i1, j2] * m[..., i2, j0])
        + m[..., i0, j2] * (m[..., i1, j0] * m[..., i2, j1] - m[..., i1, j1] * m[..., i2, j0])
    )
    return minor if (r + c) % 2 == 0 else -minor


def inv_antisym(f: np.ndarray, pf: np.ndarray) -> np.ndarray:
    """Inverse of an antisymmetric 4x4 stack given its Pfaffian.

    (F^{-1})_{ab} = -eps_{abcd} F_{cd} / (2 Pf); six divides per point.
    """
    out = np.zeros_like(f)
    out[..., 0, 1] = -f[..., 2, 3]
    out[..., 0, 2] = f[..., 1, 3]
    out[..., 0, 3] = -f[..., 1, 2]
    out[..., 1, 2] = -f[..., 0, 3]
    out[..., 1, 3] = f[..., 0, 2]
    out[..., 2, 3] = -f[..., 0, 1]
    out -= transpose(out)
    return out / pf[..., None, None]


def omega_of(endo: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Fundamental 2-form omega_A(X, Y) = g(AX, Y) as a component matrix."""
    return transpose(endo) @ g


def endo_on_twoform(endo: np.ndarray, form: np.ndarray) -> np.ndarray:
    """(A alpha)(X, Y) = alpha(AX, Y), realized as A^c_a alpha_{cb}."""
    return transpose(endo) @ form


def poisson_from_structure(g: np.ndarray, i: np.ndarray, j: np.ndarray) -> np.ndarray:
    """sigma = [I, J] g^{-1} as a bivector component matrix."""
    return commutator(i, j) @ inv4(g, "metric")


def symplectic_inverse(sigma: np.ndarray) -> np.ndarray:
    """2-form Omega with sigma @ Omega = Id (literal matrix inverse)."""
    return inv4(sigma, "Poisson tensor")


def taming_split(f: np.ndarray, i: np.ndarray):
    """Split the taming composition (X, Y) -> F(X, IY) into (g, b).

    g is the symmetric part, b the antisymmetric part.  Positivity of g is
    the caller's check, not enforced here.
    """
    m = f @ i
    return sym(m), skew(m)


def taming_compose(g: np.ndarray, b: np.ndarray, i: np.ndarray) -> np.ndarray:
    """Inverse of taming_split: the F with F(X, IY) = g(X, Y) + b(X, Y)."""
    return -(g + b) @ i


def reconstruct_J(psi2: np.ndarray, omega: np.ndarray) -> np.ndarray:
    """J = -psi2^{-1} @ Omega.

    The sign/transpose placement is fixed so that feeding the J0-action on
    the flat Omega returns J0 exactly.  Raises SingularForm when psi2 is
    degenerate; the complex-structure equation J^2 = -Id is the caller's
    check (BrokenStructure).
    """
    pf = pfaffian(psi2)
    scale = np.max(np.abs(psi2), axis=(-2, -1))
    bad = np.abs(pf) <= EPS_INV * np.maximum(scale, 1.0) ** 2
    if np.any(bad):
        raise SingularForm(
            f"Psi2: {int(np.sum(bad))} point(s) with |Pf| below threshold"
        )
    return -inv_antisym(psi2, pf) @ omega


def check_complex_structure(j: np.ndarray, tol: float = 1e-6) -> float:
    """Max-norm of J^2 + Id; raises BrokenStructure above `tol`."""
    resid = float(np.max(np.abs(j @ j + np.eye(4))))
    if resid > tol:
        raise BrokenStructure(f"J^2 + Id has max-norm {resid:.3e} (tol {tol:.1e})")
    return resid


def angle_function(i: np.ndarray, j: np.ndarray) -> np.ndarray:
    """p = -(1/4n) tr(IJ) with n = 1."""
    return -0.25 * np.einsum("...ab,...ba->...", i, j)


def fdefs_forms(g: np.ndarray, i: np.ndarray, j: np.ndarray):
    """F_plus, F_minus = -2 g (I +/- J)^{-1}, lowered on the first slot."""
    fp = omega_of(-2.0 * inv4(i + j, "I+J"), g)
    fm = omega_of(-2.0 * inv4(i - j, "I-J"), g)
    return fp, fm


def _check_nondegenerate(i: np.ndarray, j: np.ndarray):
    for sign, name in ((1.0, "I+J"), (-1.0, "I-J")):
        d = det4(i + sign * j)
        if np.any(np.abs(d) <= EPS_DEG):
            raise DegeneratePair(f"det({name}) below degeneracy threshold")


def phi_pfaffian(i: np.ndarray, j: np.ndarray, omega: np.ndarray) -> np.ndarray:
    """Ricci potential as log of the Pfaffian ratio of the taming forms.

    F_plus and F_minus are assembled through the closed imaginary parts
    psi_1 = I Omega, psi_2 = J Omega, which equals the -2g(I +/- J)^{-1}
    route identically.
    """
    _check_nondegenerate(i, j)
    psi1 = endo_on_twoform(i, omega)
    psi2 = endo_on_twoform(j, omega)
    fp = 2.0 * (psi1 - psi2)
    fm = 2.0 * (-psi1 - psi2)
    pfp = pfaffian(fp)
    pfm = pfaffian(fm)
    if np.any(pfp <= 0) or np.any(pfm <= 0):
        raise DegeneratePair("taming form with non-positive Pfaffian")
    return np.log(pfp / pfm)


def phi_determinant(i: np.ndarray, j: np.ndarray) -> np.ndarray:
    """Ricci potential from the determinant route, (1/2) log det(I-J)/det(I+J)."""
    _check_nondegenerate(i, j)
    return 0.5 * (np.log(det4(i - j)) - np.log(det4(i + j)))


def phi_angle(i: np.ndarray, j: np.ndarray) -> np.ndarray:
    """Ricci potential from the angle function, log((1 - p)/(1 + p)).

    The sign orientation was pinned once by the Pfaffian oracle on the
    p = 1/2 example (Phi = -log 3) and is frozen by a convention test.
    """
    p = angle_function(i, j)
    if np.any(np.abs(p) >= 1.0):
        raise DegeneratePair("angle function |p| >= 1")
    return np.log((1.0 - p) / (1.0 + p))


def phi_pointwise(i: np.ndarray, j: np.ndarray, omega: np.ndarray) -> np.ndarray:
    """Canonical Ricci potential (the Pfaffian route)."""
    return phi_pfaffian(i, j, omega)
