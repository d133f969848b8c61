"""Generalized Kahler states on the flat 4-torus.

A state is the triple of closed 2-forms (Omega, Psi_1, Psi_2) with
Psi_2 = Psi_2^0 + da parametrized by a potential 1-form a, so closedness
and the deRham class of Psi_2 are exact by construction.  Everything else
(g, b, I, J, the taming forms, the Ricci potential, Lee forms, torsion) is
derived on demand and cached; a state is immutable once assembled.
"""

from __future__ import annotations

from functools import cached_property

import numpy as np

from . import calculus, pointwise
from .errors import BrokenStructure, NonPositiveMetric
from .fields import (
    EndoField,
    MetricField,
    OneFormField,
    ScalarField,
    ThreeFormField,
    TwoFormField,
)
from .grid import PeriodicGrid

# Tolerance for the closedness preconditions on the input forms and for
# the complex-structure equation of the reconstructed J.
CLOSEDNESS_TOL = 1e-8
STRUCTURE_TOL = 1e-6


class GKState:
    """Immutable generalized Kahler state (Omega, Psi_1, Psi_2^0 + da)."""

    def __init__(
        self,
        grid: PeriodicGrid,
        omega: TwoFormField,
        psi1: TwoFormField,
        psi2_base: TwoFormField,
        a: OneFormField,
        *,
        t: float = 0.0,
        provenance: str = "",
        check_closed: bool = True,
    ):
        self.grid = grid
        self.omega = omega
        self.psi1 = psi1
        self.psi2_base = psi2_base
        self.a = a
        self.t = float(t)
        self.provenance = provenance
        if check_closed:
            for name, form in (("Omega", omega), ("Psi1", psi1)):
                resid = calculus.exterior_derivative(form).max_norm()
                scale = max(form.max_norm(), 1.0)
                if resid > CLOSEDNESS_TOL * scale:
                    raise BrokenStructure(
                        f"d{name} has max-norm {resid:.3e}; input must be closed"
                    )

    # -- construction ---------------------------------------------------

    def with_potential(self, a: OneFormField, t: float | None = None) -> "GKState":
        """New state sharing every fixed form, with a different potential."""
        new = GKState(
            self.grid,
            self.omega,
            self.psi1,
            self.psi2_base,
            a,
            t=self.t if t is None else t,
            provenance=self.provenance,
            check_closed=False,
        )
        # I depends only on the shared (Psi_1, Omega); reuse the cache
        if "I_endo" in self.__dict__:
            new.__dict__["I_endo"] = self.__dict__["I_endo"]
        return new

    # -- fixed data -----------------------------------------------------

    @cached_property
    def psi2(self) -> TwoFormField:
        da = calculus.exterior_derivative(self.a)
        return TwoFormField(self.grid, self.psi2_base.comps + da.comps, check=False)

    @cached_property
    def I_endo(self) -> EndoField:
        """I = -Psi_1^{-1} Omega; constant along every isotopy and flow."""
        mats = pointwise.reconstruct_J(self.psi1.matrices(), self.omega.matrices())
        resid = float(np.max(np.abs(mats @ mats + np.eye(4))))
        if resid > STRUCTURE_TOL:
            raise BrokenStructure(f"I^2 + Id has max-norm {resid:.3e}")
        return EndoField.from_matrices(self.grid, mats, check=False)

    @cached_property
    def J_endo(self) -> EndoField:
        """J = -Psi_2^{-1} Omega."""
        mats = pointwise.reconstruct_J(self.psi2.matrices(), self.omega.matrices())
        pointwise.check_complex_structure(mats, STRUCTURE_TOL)
        return EndoField.from_matrices(self.grid, mats, check=False)

    @cached_property
    def F_plus(self) -> TwoFormField:
        comps = 2.0 * (self.psi1.comps - self.psi2.comps)
        return TwoFormField(self.grid, comps, check=False)

    @cached_property
    def F_minus(self) -> TwoFormField:
        comps = 2.0 * (-self.psi1.comps - self.psi2.comps)
        return TwoFormField(self.grid, comps, check=False)

    @cached_property
    def _taming(self):
        g, b = pointwise.taming_split(self.F_plus.matrices(), self.I_endo.matrices())
        return (
            MetricField.from_matrices(self.grid, g, check=False),
            TwoFormField.from_matrices(self.grid, b, check=False),
        )

    @property
    def metric(self) -> MetricField:
        return self._taming[0]

    @property
    def b_field(self) -> TwoFormField:
        return self._taming[1]

    @cached_property
    def positivity_margin(self) -> float:
        """min over grid points of the smallest eigenvalue of g."""
        return self.metric.min_eigenvalue()

    @property
    def is_valid(self) -> bool:
        """Positivity of the taming metric; a reportable flag, not an error."""
        return self.positivity_margin > 0.0

    def require_valid(self):
        if not self.is_valid:
            raise NonPositiveMetric(
                f"state invalid: positivity margin {self.positivity_margin:.3e}"
            )
        return self

    # -- derived geometry --------------------------------------------------

    @cached_property
    def omega_I(self) -> TwoFormField:
        mats = pointwise.omega_of(self.I_endo.matrices(), self.metric.matrices())
        return TwoFormField.from_matrices(self.grid, mats, check=False)

    @cached_property
    def omega_J(self) -> TwoFormField:
        mats = pointwise.omega_of(self.J_endo.matrices(), self.metric.matrices())
        return TwoFormField.from_matrices(self.grid, mats, check=False)

    @cached_property
    def torsion(self) -> ThreeFormField:
        """H = db, exact (hence closed) by construction."""
        return calculus.exterior_derivative(self.b_field)

    @cached_property
    def phi(self) -> ScalarField:
        """Ricci potential, log of the Pfaffian ratio Pf(F_+)/Pf(F_-)."""
        vals = pointwise.phi_pfaffian(
            self.I_endo.matrices(), self.J_endo.matrices(), self.omega.matrices()
        )
        return ScalarField(self.grid, vals, check=True)

    @cached_property
    def angle(self) -> ScalarField:
        vals = pointwise.angle_function(self.I_endo.matrices(), self.J_endo.matrices())
        return ScalarField(self.grid, vals, check=False)

    @cached_property
    def theta_I(self) -> OneFormField:
        return lee_form(self, "I")

    @cached_property
    def theta_J(self) -> OneFormField:
        return lee_form(self, "J")

    @cached_property
    def lam(self) -> float:
        """log of the ratio of the total F_+ and F_- volumes."""
        from .functionals import lambda_invariant

        return lambda_invariant(self)

    # -- convenience -------------------------------------------------------

    def d_phi(self) -> OneFormField:
        return calculus.exterior_derivative(self.phi)

    def sup_phi_dev(self) -> float:
        return float(np.max(np.abs(self.phi.values - self.lam)))

    def sup_grad_phi_sq(self) -> float:
        dphi = self.d_phi()
        return float(np.max(calculus.form_inner(dphi, dphi, self.metric)))


# -- constructors ------------------------------------------------------------


def flat_hyperkahler(grid: PeriodicGrid) -> GKState:
    """The flat quaternionic background: g flat, I = I0, J = J0, Phi = 0.

    Omega is the constant symplectic form inverse to sigma = [I0, J0]; in
    components Omega = (dx0^dx3 + dx1^dx2)/2 = -omega_{K0}/2 under the
    matrix-product convention for the fundamental form.
    """
    i0, j0, k0 = pointwise.quaternionic_triple()
    omega = TwoFormField.from_constant_matrix(grid, -0.5 * k0).freeze()
    psi1 = TwoFormField.from_constant_matrix(
        grid, pointwise.endo_on_twoform(i0, -0.5 * k0)
    ).freeze()
    psi2_base = TwoFormField.from_constant_matrix(
        grid, pointwise.endo_on_twoform(j0, -0.5 * k0)
    ).freeze()
    a = OneFormField.zeros(grid)
    return GKState(grid, omega, psi1, psi2_base, a, provenance="flat-hyperkahler")


def assemble(
    grid: PeriodicGrid,
    omega: TwoFormField,
    psi1: TwoFormField,
    a: OneFormField,
    psi2_base: TwoFormField | None = None,
    *,
    t: float = 0.0,
    provenance: str = "",
) -> GKState:
    """Assemble and structure-check a state from its defining forms.

    When psi2_base is omitted it is derived as half the matrix of the
    reconstructed I, which is the quaternionic partner on the flat
    deformation class (the only case where the derivation is well posed).
    Raises SingularForm / BrokenStructure; positivity failure is reported
    through state.is_valid, not raised.
    """
    if psi2_base is None:
        i_mats = pointwise.reconstruct_J(psi1.matrices(), omega.matrices())
        cand = 0.5 * i_mats
        if float(np.max(np.abs(cand + pointwise.transpose(cand)))) > 1e-12:
            raise BrokenStructure(
                "cannot derive a canonical Psi2 base from (Omega, Psi1); "
                "pass psi2_base explicitly"
            )
        psi2_base = TwoFormField.from_matrices(grid, cand)
    state = GKState(grid, omega, psi1, psi2_base, a, t=t, provenance=provenance)
    state.I_endo
    state.J_endo  # raises SingularForm / BrokenStructure on bad input
    return state


# -- lemma-level derived quantities -------------------------------------------


def ricci_potential(state: GKState) -> ScalarField:
    """Phi = log(Pf(F_+)/Pf(F_-)) pointwise."""
    return state.phi


def lee_form(state: GKState, which: str = "I") -> OneFormField:
    """theta = Lambda(d omega) for the chosen Hermitian structure.

    The alternative route I(delta omega) is a test oracle, not used here.
    """
    if which == "I":
        om = state.omega_I
    elif which == "J":
        om = state.omega_J
    else:
        raise ValueError("which must be 'I' or 'J'")
    return calculus.lambda_contraction(
        calculus.exterior_derivative(om), om, state.metric
    )


def bismut_ricci(state: GKState) -> TwoFormField:
    """(rho_B)_I = -1/2 d(J dPhi), a closed 2-form.

    J acts on dPhi through the metric duality (sharp, apply J, flat); this
    is the same code path as the flow velocity, so the flow equation
    dPsi_2/dt = (rho_B)_I holds identically.
    """
    jdphi = calculus.endo_on_oneform(state.J_endo, state.d_phi(), state.metric)
    d = calculus.exterior_derivative(jdphi)
    return TwoFormField(state.grid, -0.5 * d.comps, check=False)


def generalized_scalar_curvature(state: GKState) -> ScalarField:
    """Gscal = 4 [d(Omega F_-^{-1} dPhi) ^ F_+] / F_+^2, with 2n - 1 = 1.

    Spatially constant exactly when Phi is.  The contraction-slot
    normalization of the 1-form chain is pinned by the equivalent
    Laplacian expression -(1/4n)(Delta Phi + dPhi(corr)): under this
    package's index conventions that fixes an overall factor of -1/2,
    frozen by a regression test against the Laplacian route.
    """
    state.require_valid()
    fm_inv = pointwise.inv4(state.F_minus.matrices(), "F_minus")
    dphi = state.d_phi().covectors()
    w = np.einsum("...ab,...b->...a", fm_inv, dphi)
    xi_cov = np.einsum("...a,...ab->...b", w, state.omega.matrices())
    xi = OneFormField.from_covectors(state.grid, xi_cov, check=False)
    dxi = calculus.exterior_derivative(xi)
    numer = calculus.wedge_two_two(dxi, state.F_plus)
    denom = 2.0 * pointwise.pfaffian(state.F_plus.matrices())
    return ScalarField(state.grid, -0.5 * 4.0 * numer / denom, check=True)


def torsion_norm(state: GKState) -> float:
    """Integral of |H|^2_g over the torus; zero exactly at Kahler states."""
    h = state.torsion
    dens = calculus.form_inner(h, h, state.metric) * calculus.volume_density(
        state.metric
    )
    return state.grid.integrate(dens)
