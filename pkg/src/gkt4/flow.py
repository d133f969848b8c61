"""Generalized Kahler-Ricci flow in the I-fixed gauge.

The state's potential evolves by da/dt = -1/2 J dPhi (J acting through the
metric duality), so that dPsi_2/dt = -1/2 d(J dPhi) = (rho_B)_I while
Omega and Psi_1 are bit-identical along the run.  The Ricci potential then
obeys the plain heat equation with the Chern Laplacian, which the logged
heat residual monitors.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import calculus
from .errors import PositivityLoss
from .fields import OneFormField, ScalarField
from .state import GKState

CONVERGENCE_TOL = 1e-9


@dataclass
class FlowConfig:
    """Time-stepper, tolerance, and diagnostic settings."""

    dt_mode: str = "cfl"  # "fixed" | "cfl" (accepts "cfl-adaptive")
    dt: float = 1e-3
    cfl_safety: float = 0.5
    t_end: float = 1.0
    diagnostic_stride: int = 1
    integrator: str = "rk4"  # "rk4" | "euler"
    eps_pos: float = 1e-6
    heat_warn: float = 1e-3

    def __post_init__(self):
        if self.dt_mode in ("cfl-adaptive",):
            self.dt_mode = "cfl"
        if self.dt_mode not in ("fixed", "cfl"):
            raise ValueError(f"unknown dt_mode {self.dt_mode!r}")
        if self.integrator not in ("rk4", "euler"):
            raise ValueError(f"unknown integrator {self.integrator!r}")
        if self.dt_mode == "fixed" and self.dt <= 0.0:
            raise ValueError("dt must be positive in fixed mode")
        if not 0.0 < self.cfl_safety <= 1.0:
            raise ValueError("cfl_safety must lie in (0, 1]")
        if self.t_end < 0.0:
            raise ValueError("t_end must be nonnegative")
        if self.diagnostic_stride < 1:
            raise ValueError("diagnostic_stride must be a positive integer")


@dataclass
class DiagnosticsRecord:
    """One row of time-series output; field order matches the CSV schema."""

    t: float
    lam: float
    sup_phi_dev: float
    sup_grad_phi_sq: float
    F_value: float
    dF_dt: float
    energy_rhs: float
    mu_l2: float
    torsion_l2: float
    pos_margin: float
    heat_residual: float

    CSV_FIELDS = (
        "t",
        "lambda",
        "sup_phi_dev",
        "sup_grad_phi_sq",
        "F_value",
        "dF_dt",
        "energy_rhs",
        "mu_l2",
        "torsion_l2",
        "pos_margin",
        "heat_residual",
    )

    def as_tuple(self):
        return (
            self.t,
            self.lam,
            self.sup_phi_dev,
            self.sup_grad_phi_sq,
            self.F_value,
            self.dF_dt,
            self.energy_rhs,
            self.mu_l2,
            self.torsion_l2,
            self.pos_margin,
            self.heat_residual,
        )


@dataclass
class FlowTrace:
    """Diagnostics rows plus the final state and the termination reason."""

    records: List[DiagnosticsRecord]
    final_state: Optional[GKState]
    termination: str  # "reached t_end" | "converged" | "PositivityLoss"


# -- velocity -----------------------------------------------------------------


def gkrf_velocity(state: GKState) -> OneFormField:
    """Potential velocity v = -1/2 J dPhi; dv equals bismut_ricci exactly.

    Equivalently v = X_t -| Psi_2 for the Omega-Hamiltonian field
    X_t = -1/2 sigma dPhi, so the flow is an isotopy in the fixed class.
    """
    jdphi = calculus.endo_on_oneform(state.J_endo, state.d_phi(), state.metric)
    return OneFormField(state.grid, -0.5 * jdphi.comps, check=False)


def cfl_timestep(state: GKState, safety: float) -> float:
    """Stable explicit step for the heat-type flow of the Ricci potential.

    dt = safety * 2 / lambda_max with lambda_max = sup-eig(g^{-1}) times
    the squared bandwidth sum_i k_max,i^2.
    """
    if not 0.0 < safety <= 1.0:
        raise ValueError("safety must lie in (0, 1]")
    eigs = np.linalg.eigvalsh(state.metric.matrices())
    sup_eig_ginv = float(1.0 / eigs.min())
    ksq = sum(state.grid.max_wavenumber(i) ** 2 for i in range(4))
    lam_max = sup_eig_ginv * ksq
    if lam_max <= 0.0:
        return safety  # all axes trivial; any step is stable
    return safety * 2.0 / lam_max


# -- stepping ------------------------------------------------------------------


def _velocity_comps(state: GKState, a: OneFormField) -> np.ndarray:
    return gkrf_velocity(state.with_potential(a)).comps


def step(state: GKState, dt: float, integrator: str = "rk4") -> GKState:
    """One explicit time step; Omega and Psi_1 are shared, not copied."""
    a = state.a
    if integrator == "euler":
        k1 = _velocity_comps(state, a)
        new = a.comps + dt * k1
    elif integrator == "rk4":
        k1 = _velocity_comps(state, a)
        k2 = _velocity_comps(
            state, OneFormField(state.grid, a.comps + 0.5 * dt * k1, check=False)
        )
        k3 = _velocity_comps(
            state, OneFormField(state.grid, a.comps + 0.5 * dt * k2, check=False)
        )
        k4 = _velocity_comps(
            state, OneFormField(state.grid, a.comps + dt * k3, check=False)
        )
        new = a.comps + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    else:
        raise ValueError(f"unknown integrator {integrator!r}")
    out = state.with_potential(
        OneFormField(state.grid, new, check=False), t=state.t + dt
    )
    if not out.metric.is_positive():
        raise PositivityLoss(out.t, out.positivity_margin)
    return out


# -- driver ---------------------------------------------------------------------


def _row_core(state: GKState, lam0: float, t_local: float):
    """The per-row diagnostics that do not need neighboring rows.

    Rows carry flow-local time (t = 0 at the start of the run) so the
    t^{-1} decay bounds read off directly.
    """
    from .functionals import aubin_yau_sigma_flow, energy_rhs, moment_map
    from .state import torsion_norm

    phi = state.phi
    dphi = state.d_phi()
    grad_sq = calculus.form_inner(dphi, dphi, state.metric)
    theta = state.theta_I
    lap_c = calculus.laplacian_chern(phi, state.metric, theta)
    _, mu_norm = moment_map(state)
    return {
        "t": t_local,
        "lam": state.lam,
        "sup_phi_dev": float(np.max(np.abs(phi.values - lam0))),
        "sup_grad_phi_sq": float(np.max(grad_sq)),
        "sigma0phi": aubin_yau_sigma_flow(state),
        "energy_rhs": energy_rhs(state),
        "mu_l2": mu_norm,
        "torsion_l2": torsion_norm(state),
        "pos_margin": state.positivity_margin,
        "phi_values": phi.values,
        "lap_c_values": lap_c.values,
    }


def _assemble_records(core_rows) -> List[DiagnosticsRecord]:
    """Fill in the neighbor-dependent columns (dF_dt, heat residual, F)."""
    n = len(core_rows)
    ts = np.array([r["t"] for r in core_rows])
    sig = np.array([r["sigma0phi"] for r in core_rows])
    # F(t) = int_0^t sigma(0, Phi_s) ds, trapezoidal, base-point normalized.
    f_val = np.zeros(n)
    for i in range(1, n):
        f_val[i] = f_val[i - 1] + 0.5 * (ts[i] - ts[i - 1]) * (sig[i] + sig[i - 1])
    records = []
    for i, r in enumerate(core_rows):
        if 0 < i < n - 1:
            dt2 = ts[i + 1] - ts[i - 1]
            df_dt = (sig[i + 1] - sig[i - 1]) / dt2
            phidot = (core_rows[i + 1]["phi_values"] - core_rows[i - 1]["phi_values"]) / dt2
            heat = float(np.max(np.abs(phidot - r["lap_c_values"])))
        else:
            df_dt = 0.0
            heat = 0.0
        records.append(
            DiagnosticsRecord(
                t=r["t"],
                lam=r["lam"],
                sup_phi_dev=r["sup_phi_dev"],
                sup_grad_phi_sq=r["sup_grad_phi_sq"],
                F_value=f_val[i],
                dF_dt=df_dt,
                energy_rhs=r["energy_rhs"],
                mu_l2=r["mu_l2"],
                torsion_l2=r["torsion_l2"],
                pos_margin=r["pos_margin"],
                heat_residual=heat,
            )
        )
    return records


def run(state: GKState, config: FlowConfig, row_callback=None) -> FlowTrace:
    """Integrate to t_end, stopping early on convergence or positivity loss.

    Diagnostics are emitted every diagnostic_stride steps (plus the initial
    and final instants).  The step is uniform: in cfl mode the bound of the
    initial state is rounded down so the steps divide t_end exactly.  The
    run also stops (termination "PositivityLoss") when the margin falls
    below eps_pos times its initial value.  `row_callback(index, state)` is
    invoked at every logged row, e.g. for checkpointing.
    """
    state.require_valid()
    lam0 = state.lam
    margin_floor = config.eps_pos * state.positivity_margin

    def is_converged(row, st):
        return (
            row["sup_phi_dev"] <= CONVERGENCE_TOL
            and float(np.max(np.abs(st.d_phi().comps))) <= CONVERGENCE_TOL
        )

    first = _row_core(state, lam0, 0.0)
    if config.t_end == 0.0 or is_converged(first, state):
        reason = "converged" if is_converged(first, state) else "reached t_end"
        return FlowTrace(_assemble_records([first]), state, reason)
    if config.dt_mode == "cfl":
        dt_raw = cfl_timestep(state, config.cfl_safety)
    else:
        dt_raw = config.dt
    nsteps = max(1, int(np.ceil(config.t_end / dt_raw - 1e-12)))
    dt = config.t_end / nsteps

    core_rows = [first]
    current = state
    termination = "reached t_end"
    for k in range(nsteps):
        try:
            current = step(current, dt, config.integrator)
        except PositivityLoss:
            termination = "PositivityLoss"
            break
        if (k + 1) % config.diagnostic_stride == 0 or k == nsteps - 1:
            row = _row_core(current, lam0, (k + 1) * dt)
            core_rows.append(row)
            if row_callback is not None:
                row_callback(len(core_rows) - 1, current)
            if row["pos_margin"] <= margin_floor:
                termination = "PositivityLoss"
                break
            if is_converged(row, current):
                termination = "converged"
                break
    return FlowTrace(_assemble_records(core_rows), current, termination)
