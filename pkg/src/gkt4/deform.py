"""Hamiltonian isotopies acting on generalized Kahler states.

The deformation is Eulerian: the potential 1-form evolves by
da/dt = s * (X_f -| Psi_2), which realizes dPsi_2/dt = s * L_{X_f} Psi_2
by Cartan's formula on the closed form Psi_2.  Omega and Psi_1 are never
touched, so I stays fixed and the deRham class of Psi_2 is exact.

The orientation-and-normalization constant s is pinned once by the
requirement dp/dt|_{t=0} = -(1/2n) Delta_g f on the flat background.  With
this package's conventions (X_f inverted from Omega itself rather than
from the quaternionic Kahler form, which is -2 Omega) the pinned value is
s = -1/2.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from . import calculus, pointwise
from .errors import PositivityLoss
from .fields import OneFormField, ScalarField, TwoFormField
from .state import GKState

# Orientation sign of the generator, fixed by the Joyce-derivative test.
JOYCE_ORIENTATION = -0.5

# Fraction of the initial positivity margin below which an isotopy stops.
EPS_POS_FRACTION = 1e-6


@dataclass(frozen=True)
class HamiltonianGenerator:
    """A mean-normalized generator, time-independent or a family t -> f_t."""

    f: Union[ScalarField, Callable[[float], ScalarField]]

    def at(self, t: float) -> ScalarField:
        return self.f(t) if callable(self.f) else self.f

    @property
    def time_dependent(self) -> bool:
        return callable(self.f)


def normalize_generator(f: ScalarField, omega: TwoFormField) -> ScalarField:
    """Subtract the mean with respect to the Omega^2 density."""
    dens = 2.0 * pointwise.pfaffian(omega.matrices())
    total = np.mean(dens)
    mean = np.mean(f.values * dens) / total
    return ScalarField(f.grid, f.values - mean, check=False)


def hamiltonian_vector_field(f: ScalarField, omega: TwoFormField) -> np.ndarray:
    """X_f with df = -X_f -| Omega, as contravariant components (*grid, 4).

    With the interior-product convention (X -| Omega)(Y) = Omega(X, Y) this
    reads X_f = Omega^{-1} grad f componentwise; the round trip
    X_f -| Omega + df = 0 is the defining check.
    """
    grad = np.moveaxis(f.grid.gradient(f.values), 0, -1)
    om_inv = pointwise.inv4(omega.matrices(), "Omega")
    return np.einsum("...ab,...b->...a", om_inv, grad)


def interior_product_two(vec: np.ndarray, form: TwoFormField) -> OneFormField:
    """(X -| alpha)(Y) = alpha(X, Y)."""
    cov = np.einsum("...a,...ab->...b", vec, form.matrices())
    return OneFormField.from_covectors(form.grid, cov, check=False)


def _potential_velocity(state: GKState, xf: np.ndarray, a: OneFormField) -> np.ndarray:
    """Right-hand side s * (X_f -| (Psi_2^0 + da)) for given potential comps."""
    da = calculus.exterior_derivative(a)
    psi2 = TwoFormField(state.grid, state.psi2_base.comps + da.comps, check=False)
    return JOYCE_ORIENTATION * interior_product_two(xf, psi2).comps


def joyce_deform(
    state: GKState,
    generator: HamiltonianGenerator | ScalarField,
    t_end: float,
    dt: float,
) -> GKState:
    """Flow the potential along the Omega-Hamiltonian isotopy of f.

    Classical fixed-step RK4 (the isotopy ODE is non-stiff advection).
    Stops with PositivityLoss when the taming metric's margin falls below
    EPS_POS_FRACTION times its initial value before t_end.  Negative t_end
    integrates backwards.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    if isinstance(generator, ScalarField):
        generator = HamiltonianGenerator(normalize_generator(generator, state.omega))
    state.require_valid()
    margin_floor = EPS_POS_FRACTION * state.positivity_margin

    xf_cache: dict[float, np.ndarray] = {}

    def xf_at(t: float) -> np.ndarray:
        if not generator.time_dependent:
            key = 0.0
        else:
            key = t
        if key not in xf_cache:
            f = normalize_generator(generator.at(t), state.omega)
            xf_cache[key] = hamiltonian_vector_field(f, state.omega)
            if generator.time_dependent and len(xf_cache) > 8:
                xf_cache.pop(next(iter(xf_cache)))
        return xf_cache[key]

    direction = 1.0 if t_end >= 0.0 else -1.0
    remaining = abs(t_end)
    nsteps = int(np.ceil(remaining / dt - 1e-12)) if remaining > 0 else 0
    t = 0.0
    current = state
    a = state.a
    for k in range(nsteps):
        h = direction * min(dt, remaining - k * dt)
        k1 = _potential_velocity(state, xf_at(t), a)
        a2 = OneFormField(state.grid, a.comps + 0.5 * h * k1, check=False)
        k2 = _potential_velocity(state, xf_at(t + 0.5 * h), a2)
        a3 = OneFormField(state.grid, a.comps + 0.5 * h * k2, check=False)
        k3 = _potential_velocity(state, xf_at(t + 0.5 * h), a3)
        a4 = OneFormField(state.grid, a.comps + h * k3, check=False)
        k4 = _potential_velocity(state, xf_at(t + h), a4)
        a = OneFormField(
            state.grid,
            a.comps + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4),
            check=False,
        )
        t += h
        current = state.with_potential(a, t=state.t + t)
        margin = current.positivity_margin
        if margin <= margin_floor:
            raise PositivityLoss(state.t + t, margin)
    current.J_endo  # structure check on the final state
    return current


def deformation_sweep(
    state: GKState,
    generator: HamiltonianGenerator | ScalarField,
    t_grid,
    dt: float = 1e-3,
):
    """Snapshots of the isotopy at each requested time.

    Returns a list of (t, state, summary) with summary carrying the
    lambda invariant, positivity margin, and sup|Phi|.
    """
    t_grid = [float(t) for t in t_grid]
    if any(b <= a for a, b in zip(t_grid, t_grid[1:])):
        raise ValueError("t_grid must be strictly increasing")
    out = []
    current = state
    prev_t = 0.0
    for t in t_grid:
        if t != prev_t:
            current = joyce_deform(current, generator, t - prev_t, dt)
            prev_t = t
        summary = {
            "lambda": current.lam,
            "margin": current.positivity_margin,
            "sup_phi": float(np.max(np.abs(current.phi.values))),
        }
        out.append((t, current, summary))
    return out
