"""Tensor fields over a periodic grid.

Storage is component-major: each independent component is one contiguous
scalar array over the grid, so per-component spectral transforms stay
cache-friendly.  Index conventions: alpha_{ab} = alpha(d_a, d_b) for forms,
A^a_b for endomorphisms acting on vectors, g_{ab} symmetric.

Pointwise linear algebra is done on "matrix stacks" of shape
(*grid, 4, 4); the classes here bridge between packed component storage
and those stacks.
"""

from __future__ import annotations

import numpy as np

from .grid import PeriodicGrid

# Independent index sets for antisymmetric 2- and 3-tensors in dimension 4.
PAIRS = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))
TRIPLES = ((0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3))
SYM_PAIRS = ((0, 0), (0, 1), (0, 2), (0, 3), (1, 1), (1, 2), (1, 3), (2, 2), (2, 3), (3, 3))


def _check_finite(name: str, arr: np.ndarray) -> None:
    if not np.all(np.isfinite(arr)):
        raise FloatingPointError(f"{name} contains non-finite values")


class _Field:
    """Common base: a grid reference plus a packed component array.

    Fields are treated as immutable after construction, which lets the
    matrix-stack view be memoized.
    """

    ncomp_shape: tuple = ()

    def __init__(self, grid: PeriodicGrid, comps: np.ndarray, check: bool = True):
        comps = np.asarray(comps, dtype=np.float64)
        expected = self.ncomp_shape + grid.dims
        if comps.shape != expected:
            raise ValueError(
                f"{type(self).__name__}: expected components of shape {expected}, "
                f"got {comps.shape}"
            )
        if check:
            _check_finite(type(self).__name__, comps)
        self.grid = grid
        self.comps = comps
        self._mats = None

    def copy(self):
        return type(self)(self.grid, self.comps.copy(), check=False)

    def freeze(self):
        """Mark the underlying buffer read-only (shared across states)."""
        self.comps.flags.writeable = False
        return self

    def allclose(self, other, atol=0.0, rtol=0.0) -> bool:
        return np.allclose(self.comps, other.comps, atol=atol, rtol=rtol)

    def max_norm(self) -> float:
        return float(np.max(np.abs(self.comps)))


class ScalarField(_Field):
    """One real value per grid point."""

    ncomp_shape = ()

    @property
    def values(self) -> np.ndarray:
        return self.comps

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.dims), check=False)

    @classmethod
    def constant(cls, grid, value: float):
        return cls(grid, np.full(grid.dims, float(value)), check=True)


class OneFormField(_Field):
    """Covariant 1-tensor; 4 component scalars."""

    ncomp_shape = (4,)

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros((4,) + grid.dims), check=False)

    def covectors(self) -> np.ndarray:
        """Shape (*grid, 4)."""
        return np.moveaxis(self.comps, 0, -1)

    @classmethod
    def from_covectors(cls, grid, cov: np.ndarray, check: bool = True):
        return cls(grid, np.ascontiguousarray(np.moveaxis(cov, -1, 0)), check=check)


class TwoFormField(_Field):
    """Antisymmetric 2-tensor; 6 independent components alpha_{ab}, a<b."""

    ncomp_shape = (6,)

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros((6,) + grid.dims), check=False)

    def matrices(self) -> np.ndarray:
        """Full antisymmetric matrix stack of shape (*grid, 4, 4), memoized."""
        if self._mats is None:
            m = np.zeros(self.grid.dims + (4, 4))
            for i, (a, b) in enumerate(PAIRS):
                m[..., a, b] = self.comps[i]
                m[..., b, a] = -self.comps[i]
            self._mats = m
        return self._mats

    @classmethod
    def from_matrices(cls, grid, mats: np.ndarray, check: bool = True):
        comps = np.stack([mats[..., a, b] for a, b in PAIRS], axis=0)
        return cls(grid, np.ascontiguousarray(comps), check=check)

    @classmethod
    def from_constant_matrix(cls, grid, mat: np.ndarray):
        mats = np.broadcast_to(mat, grid.dims + (4, 4))
        return cls.from_matrices(grid, mats)


class ThreeFormField(_Field):
    """Alternating 3-tensor; 4 independent components in dimension 4."""

    ncomp_shape = (4,)

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros((4,) + grid.dims), check=False)

    def full(self) -> np.ndarray:
        """Fully alternating array of shape (*grid, 4, 4, 4), memoized."""
        if self._mats is None:
            out = np.zeros(self.grid.dims + (4, 4, 4))
            for i, (a, b, c) in enumerate(TRIPLES):
                v = self.comps[i]
                out[..., a, b, c] = v
                out[..., b, c, a] = v
                out[..., c, a, b] = v
                out[..., a, c, b] = -v
                out[..., c, b, a] = -v
                out[..., b, a, c] = -v
            self._mats = out
        return self._mats

    @classmethod
    def from_full(cls, grid, full: np.ndarray, check: bool = True):
        comps = np.stack([full[..., a, b, c] for a, b, c in TRIPLES], axis=0)
        return cls(grid, np.ascontiguousarray(comps), check=check)


class EndoField(_Field):
    """Endomorphism of the tangent bundle; 16 components A^a_b."""

    ncomp_shape = (4, 4)

    def matrices(self) -> np.ndarray:
        if self._mats is None:
            self._mats = np.ascontiguousarray(
                np.moveaxis(self.comps, (0, 1), (-2, -1))
            )
        return self._mats

    @classmethod
    def from_matrices(cls, grid, mats: np.ndarray, check: bool = True):
        comps = np.ascontiguousarray(np.moveaxis(mats, (-2, -1), (0, 1)))
        return cls(grid, comps, check=check)

    @classmethod
    def from_constant_matrix(cls, grid, mat: np.ndarray):
        mats = np.broadcast_to(mat, grid.dims + (4, 4))
        return cls.from_matrices(grid, mats)


class MetricField(_Field):
    """Symmetric 2-tensor; 10 independent components, a <= b.

    Symmetry holds by construction; positive-definiteness is checked by
    consumers, never assumed.
    """

    ncomp_shape = (10,)

    def __init__(self, grid, comps, check=True):
        super().__init__(grid, comps, check=check)
        self._inv = None
        self._pos = None

    def matrices(self) -> np.ndarray:
        if self._mats is None:
            m = np.zeros(self.grid.dims + (4, 4))
            for i, (a, b) in enumerate(SYM_PAIRS):
                m[..., a, b] = self.comps[i]
                m[..., b, a] = self.comps[i]
            self._mats = m
        return self._mats

    def inv_matrices(self) -> np.ndarray:
        """Memoized pointwise inverse (explicit adjugate formula)."""
        if self._inv is None:
            from .pointwise import inv4

            self._inv = inv4(self.matrices(), "metric")
        return self._inv

    @classmethod
    def from_matrices(cls, grid, mats: np.ndarray, check: bool = True):
        comps = np.stack([mats[..., a, b] for a, b in SYM_PAIRS], axis=0)
        return cls(grid, np.ascontiguousarray(comps), check=check)

    @classmethod
    def flat(cls, grid):
        return cls.from_matrices(grid, np.broadcast_to(np.eye(4), grid.dims + (4, 4)))

    def min_eigenvalue(self) -> float:
        """Smallest eigenvalue over all grid points (the positivity margin)."""
        eigs = np.linalg.eigvalsh(self.matrices())
        return float(eigs.min())

    def is_positive(self) -> bool:
        """Positive-definiteness by leading principal minors, memoized."""
        if self._pos is None:
            m = self.matrices()
            d1 = m[..., 0, 0]
            d2 = m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] ** 2
            d3 = np.linalg.det(m[..., :3, :3])
            from .pointwise import det4

            d4 = det4(m)
            self._pos = bool(
                np.all(d1 > 0) and np.all(d2 > 0) and np.all(d3 > 0) and np.all(d4 > 0)
            )
        return self._pos
