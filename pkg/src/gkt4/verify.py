"""The identity battery: every checkable lemma-level formula, runnable on
any snapshot, with a pass/fail report and measured residuals.

Residuals are max-norms scaled by the max-norm of the identity's largest
term, so they are dimensionless and comparable across checks.  Each check
is a pure function of its inputs; identical seeds and snapshots yield
bit-identical reports.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np

from . import calculus, pointwise
from .fields import OneFormField, ScalarField, ThreeFormField, TwoFormField
from .flow import DiagnosticsRecord
from .state import GKState


@dataclass(frozen=True)
class CheckResult:
    name: str
    residual: float
    threshold: float

    @property
    def passed(self) -> bool:
        return self.residual <= self.threshold


@dataclass(frozen=True)
class CheckReport:
    checks: List[CheckResult]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_text(self) -> str:
        w = max(len(c.name) for c in self.checks) + 2
        lines = [f"{'check':<{w}}{'residual':>12}  {'threshold':>10}  status"]
        for c in self.checks:
            status = "pass" if c.passed else "FAIL"
            lines.append(
                f"{c.name:<{w}}{c.residual:>12.3e}  {c.threshold:>10.1e}  {status}"
            )
        lines.append(f"overall: {'pass' if self.passed else 'FAIL'}")
        return "\n".join(lines)

    def to_rows(self) -> List[str]:
        return [
            f"{c.name},{c.residual:.17g},{c.threshold:.17g},{int(c.passed)}"
            for c in self.checks
        ]

    def __getitem__(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def _relmax(err: np.ndarray, scale: float) -> float:
    return float(np.max(np.abs(err)) / max(scale, 1e-300))


# ---------------------------------------------------------------------------
# pointwise identities (batched matrix arguments)
# ---------------------------------------------------------------------------


def haar_rotations(rng: np.random.Generator, count: int) -> np.ndarray:
    """Deterministic Haar-distributed SO(4) samples (QR with sign fix)."""
    z = rng.standard_normal((count, 4, 4))
    q, r = np.linalg.qr(z)
    d = np.sign(np.diagonal(r, axis1=-2, axis2=-1))
    d[d == 0] = 1.0
    q = q * d[..., None, :]
    det = np.linalg.det(q)
    q[det < 0, :, 0] *= -1.0
    return q


def random_structures(seed: int, count: int):
    """Random valid pointwise structures with generic angle p in (-1, 1).

    Built by mixing (I0, J0) with a random angle and conjugating by a
    Haar-random rotation; the flat metric stays compatible.
    """
    i0, j0, _ = pointwise.quaternionic_triple()
    rng = np.random.default_rng(seed)
    rot = haar_rotations(rng, count)
    theta = rng.uniform(-1.2, 1.2, size=count)
    jmix = np.sin(theta)[:, None, None] * i0 + np.cos(theta)[:, None, None] * j0
    rot_t = pointwise.transpose(rot)
    i = rot @ i0 @ rot_t
    j = rot @ jmix @ rot_t
    g = np.broadcast_to(np.eye(4), (count, 4, 4)).copy()
    sigma = pointwise.poisson_from_structure(g, i, j)
    omega = pointwise.symplectic_inverse(sigma)
    return g, i, j, omega


def resid_pfaffian_det(g, i, j, omega) -> float:
    pf = pointwise.pfaffian(omega)
    det = pointwise.det4(omega)
    return _relmax(pf**2 - det, float(np.max(np.abs(det))))


def resid_fdefs(g, i, j, omega) -> float:
    """F_+/- from the psi route versus -2 g (I +/- J)^{-1}."""
    psi1 = pointwise.endo_on_twoform(i, omega)
    psi2 = pointwise.endo_on_twoform(j, omega)
    fp_def, fm_def = pointwise.fdefs_forms(g, i, j)
    err_p = 2.0 * (psi1 - psi2) - fp_def
    err_m = 2.0 * (-psi1 - psi2) - fm_def
    scale = float(max(np.max(np.abs(fp_def)), np.max(np.abs(fm_def))))
    return max(_relmax(err_p, scale), _relmax(err_m, scale))


def resid_b_formula(g, i, j, b=None) -> float:
    """b from the taming split versus (1/2) F (I - J) and the closed form."""
    fp, _ = pointwise.fdefs_forms(g, i, j)
    _, b_split = pointwise.taming_split(fp, i)
    if b is not None:
        b_split = b
    b_half = 0.5 * fp @ (i - j)
    b_closed = pointwise.omega_of(-pointwise.inv4(i + j, "I+J") @ (i - j), g)
    scale = float(max(np.max(np.abs(b_half)), 1e-30))
    return max(_relmax(b_split - b_half, scale), _relmax(b_split - b_closed, scale))


def resid_key5(g, i, j, omega) -> float:
    phi_pf = pointwise.phi_pfaffian(i, j, omega)
    phi_det = pointwise.phi_determinant(i, j)
    return _relmax(phi_pf - phi_det, float(max(np.max(np.abs(phi_pf)), 1.0)))


def resid_angle(g, i, j, omega) -> float:
    phi_pf = pointwise.phi_pfaffian(i, j, omega)
    phi_ang = pointwise.phi_angle(i, j)
    return _relmax(phi_pf - phi_ang, float(max(np.max(np.abs(phi_pf)), 1.0)))


def resid_basic1(g, i, j, b=None) -> float:
    fp, _ = pointwise.fdefs_forms(g, i, j)
    if b is None:
        _, b = pointwise.taming_split(fp, i)
    lhs_i = pointwise.endo_on_twoform(i, fp)
    lhs_j = pointwise.endo_on_twoform(j, fp)
    scale = float(np.max(np.abs(g)) + np.max(np.abs(b)))
    return max(
        _relmax(lhs_i - (-g + b), scale),
        _relmax(lhs_j - (-g - b), scale),
    )


def resid_taming_roundtrip(g, i, j, offset=0.0) -> float:
    fp, _ = pointwise.fdefs_forms(g, i, j)
    gs, bs = pointwise.taming_split(fp, i)
    rebuilt = pointwise.taming_compose(gs + offset, bs, i)
    return _relmax(rebuilt - fp, float(np.max(np.abs(fp))))


def resid_anticommute(g, i, j) -> float:
    a = i + j
    b = i - j
    return _relmax(a @ b + b @ a, float(np.max(np.abs(a @ b))) + 1e-30)


def resid_sigma_type(g, i, j) -> float:
    sigma = pointwise.poisson_from_structure(g, i, j)
    scale = float(np.max(np.abs(sigma)))
    r_i = _relmax(i @ sigma - sigma @ pointwise.transpose(i), scale)
    r_j = _relmax(j @ sigma - sigma @ pointwise.transpose(j), scale)
    return max(r_i, r_j)


def resid_sigma_omega(g, i, j, omega) -> float:
    sigma = pointwise.poisson_from_structure(g, i, j)
    return _relmax(sigma @ omega - np.eye(4), 1.0)


POINTWISE_CHECKS = (
    ("pfaffian_det", resid_pfaffian_det, 1e-9),
    ("fdefs_psi_route", resid_fdefs, 1e-9),
    ("b_formula", resid_b_formula, 1e-9),
    ("key5_phi", resid_key5, 1e-9),
    ("angle_phi", resid_angle, 1e-9),
    ("basic1_split", resid_basic1, 1e-9),
    ("taming_roundtrip", resid_taming_roundtrip, 1e-9),
    ("ab_anticommute", resid_anticommute, 1e-9),
    ("sigma_type", resid_sigma_type, 1e-9),
    ("sigma_omega_identity", resid_sigma_omega, 1e-9),
)


def run_pointwise_suite(seed: int, count: int) -> CheckReport:
    """Algebraic identities on `count` random valid pointwise structures."""
    if count < 1:
        raise ValueError("count must be >= 1")
    g, i, j, omega = random_structures(seed, count)
    checks = []
    for name, fn, tol in POINTWISE_CHECKS:
        if fn in (resid_anticommute, resid_sigma_type):
            r = fn(g, i, j)
        elif fn in (resid_b_formula, resid_basic1, resid_taming_roundtrip):
            r = fn(g, i, j)
        else:
            r = fn(g, i, j, omega)
        checks.append(CheckResult(name, r, tol))
    return CheckReport(checks)


# ---------------------------------------------------------------------------
# field-level identities on a state
# ---------------------------------------------------------------------------


def field_environment(state: GKState) -> Dict[str, object]:
    """Named derived quantities; negative-control tests override entries."""
    from .state import bismut_ricci

    return {
        "omega": state.omega,
        "psi1": state.psi1,
        "psi2": state.psi2,
        "I": state.I_endo,
        "J": state.J_endo,
        "g": state.metric,
        "b": state.b_field,
        "omega_I": state.omega_I,
        "omega_J": state.omega_J,
        "H": state.torsion,
        "phi": state.phi,
        "theta_I": state.theta_I,
        "theta_J": state.theta_J,
        "rho_B": bismut_ricci(state),
    }


def _closedness(form: TwoFormField) -> float:
    d = calculus.exterior_derivative(form)
    return _relmax(d.comps, max(form.max_norm(), 1.0))


def _d_threeform_density(eta: ThreeFormField) -> np.ndarray:
    g = eta.grid
    c = eta.comps
    return (
        g.deriv(c[3], 0) - g.deriv(c[2], 1) + g.deriv(c[1], 2) - g.deriv(c[0], 3)
    )


def field_checks(
    state: GKState,
    env: Optional[Dict[str, object]] = None,
    tol_scale: float = 1.0,
):
    """Compute the residual table for the field suite.

    Thresholds default to the band-limited N = 32 values; `tol_scale`
    loosens them uniformly for coarser grids (the (32/N)^4 guidance).
    """
    if env is None:
        env = field_environment(state)
    grid = state.grid
    g = env["g"]
    i_endo, j_endo = env["I"], env["J"]
    im, jm = i_endo.matrices(), j_endo.matrices()
    gm = g.matrices()
    b = env["b"]
    h = env["H"]
    phi = env["phi"]
    theta_i, theta_j = env["theta_I"], env["theta_J"]
    out: List[CheckResult] = []

    def add(name, residual, tol):
        out.append(CheckResult(name, float(residual), tol * tol_scale))

    add("closed_omega", _closedness(env["omega"]), 1e-6)
    add("closed_psi1", _closedness(env["psi1"]), 1e-6)
    add("closed_psi2", _closedness(env["psi2"]), 1e-6)
    add("i_square", _relmax(im @ im + np.eye(4), 1.0), 1e-6)
    add("j_square", _relmax(jm @ jm + np.eye(4), 1.0), 1e-6)
    gscale = float(np.max(np.abs(gm)))
    add("g_invariant_i", _relmax(pointwise.transpose(im) @ gm @ im - gm, gscale), 1e-6)
    add("g_invariant_j", _relmax(pointwise.transpose(jm) @ gm @ jm - gm, gscale), 1e-6)
    bm = b.matrices()
    bscale = max(float(np.max(np.abs(bm))), 1.0)
    add("b_type_i", _relmax(pointwise.transpose(im) @ bm @ im + bm, bscale), 1e-6)
    add("b_type_j", _relmax(pointwise.transpose(jm) @ bm @ jm + bm, bscale), 1e-6)

    # torsion: d^c_I omega_I = db = -d^c_J omega_J
    dci = calculus.dc_operator(env["omega_I"], i_endo)
    dcj = calculus.dc_operator(env["omega_J"], j_endo)
    hscale = max(h.max_norm(), dci.max_norm(), 1e-6)
    add("torsion_match_i", _relmax(dci.comps - h.comps, hscale), 1e-6)
    add("torsion_match_j", _relmax(dcj.comps + h.comps, hscale), 1e-6)
    add("pluriclosed", _relmax(_d_threeform_density(dci), max(hscale, 1.0)), 1e-6)

    # sigma . Omega = Id with sigma from the derived (g, I, J)
    sigma = pointwise.poisson_from_structure(gm, im, jm)
    add(
        "sigma_omega_identity",
        _relmax(sigma @ env["omega"].matrices() - np.eye(4), 1.0),
        1e-10,
    )

    # Phi triple agreement
    phi_pf = phi.values
    phi_ang = pointwise.phi_angle(im, jm)
    phi_det = pointwise.phi_determinant(im, jm)
    pscale = float(max(np.max(np.abs(phi_pf)), 1.0))
    add("phi_angle_route", _relmax(phi_pf - phi_ang, pscale), 1e-10)
    add("phi_det_route", _relmax(phi_pf - phi_det, pscale), 1e-10)

    # Lee form dual route: Lambda(d omega_I) = I(delta omega_I)
    delta_om = calculus.codifferential(env["omega_I"], g)
    alt = calculus.endo_on_oneform(i_endo, delta_om, g)
    tscale = max(float(np.max(np.abs(theta_i.comps))), 1e-3)
    add("lee_dual_route", _relmax(theta_i.comps - alt.comps, tscale), 1e-7)

    # l:Lee-forms: theta(X) = b(theta#, X) - <b, i_X db>_g + (delta b)(X)
    add("lee_structure_identity", _resid_lee_identity(state, env), 1e-6)

    # l:half-non-degenerate: d log det(I+J) = -2 <b, i_X H>_g
    add("half_nondegenerate", _resid_half_nondegenerate(state, env), 1e-6)

    # l:extension: [I, J] dPhi = 2 (theta_I - theta_J)
    dphi = calculus.exterior_derivative(phi)
    comm = calculus.endo_on_oneform(
        _endo_from_mats(grid, pointwise.commutator(im, jm)), dphi, g
    )
    diff = 2.0 * (theta_i.comps - theta_j.comps)
    escale = max(float(np.max(np.abs(diff))), 1e-3)
    add("lee_difference", _relmax(comm.comps - diff, escale), 1e-6)

    # rho_B closed (exact by construction)
    rho = env["rho_B"]
    add(
        "ricci_form_closed",
        _relmax(calculus.exterior_derivative(rho).comps, max(rho.max_norm(), 1e-3)),
        1e-10,
    )

    add(
        "nijenhuis_j",
        _relmax(calculus.nijenhuis(j_endo), 1.0),
        1e-6,
    )
    return out


def _endo_from_mats(grid, mats):
    from .fields import EndoField

    return EndoField.from_matrices(grid, mats, check=False)


def _resid_lee_identity(state: GKState, env) -> float:
    g = env["g"]
    b = env["b"]
    theta = env["theta_I"]
    grid = state.grid
    bm = b.matrices()
    ginv = pointwise.inv4(g.matrices(), "metric")
    theta_sharp = np.einsum("...ab,...b->...a", ginv, theta.covectors())
    term1 = np.einsum("...a,...ab->...b", theta_sharp, bm)
    db = calculus.exterior_derivative(b)
    dbf = db.full()
    b_up = np.einsum("...ac,...bd,...cd->...ab", ginv, ginv, bm)
    term2 = 0.5 * np.einsum("...ab,...xab->...x", b_up, dbf)
    term3 = calculus.codifferential(b, g).covectors()
    rhs = term1 - term2 + term3
    scale = max(float(np.max(np.abs(theta.covectors()))), 1e-3)
    return _relmax(theta.covectors() - rhs, scale)


def _resid_half_nondegenerate(state: GKState, env) -> float:
    g = env["g"]
    b = env["b"]
    h = env["H"]
    grid = state.grid
    im = env["I"].matrices()
    jm = env["J"].matrices()
    det_ipj = pointwise.det4(im + jm)
    lhs = np.moveaxis(grid.gradient(np.log(det_ipj)), 0, -1)
    ginv = pointwise.inv4(g.matrices(), "metric")
    b_up = np.einsum("...ac,...bd,...cd->...ab", ginv, ginv, b.matrices())
    hf = h.full()
    rhs = -2.0 * 0.5 * np.einsum("...ab,...xab->...x", b_up, hf)
    scale = max(float(np.max(np.abs(lhs))), 1e-3)
    return _relmax(lhs - rhs, scale)


def run_field_suite(
    state: GKState,
    env: Optional[Dict[str, object]] = None,
    tol_scale: float = 1.0,
) -> CheckReport:
    """Field-level identity battery on one state."""
    state.require_valid()
    return CheckReport(field_checks(state, env, tol_scale))


# ---------------------------------------------------------------------------
# flow-level claims on a diagnostics trace
# ---------------------------------------------------------------------------


def run_flow_suite(records: List[DiagnosticsRecord]) -> CheckReport:
    """Flow-level claims evaluated on logged diagnostics rows."""
    if len(records) < 3:
        raise ValueError("flow suite needs a trace with at least 3 rows")
    ts = np.array([r.t for r in records])
    dev = np.array([r.sup_phi_dev for r in records])
    lam = np.array([r.lam for r in records])
    grad = np.array([r.sup_grad_phi_sq for r in records])
    heat = np.array([r.heat_residual for r in records])
    dfdt = np.array([r.dF_dt for r in records])
    erhs = np.array([r.energy_rhs for r in records])
    fval = np.array([r.F_value for r in records])
    checks = []

    checks.append(
        CheckResult("lambda_conservation", float(np.max(np.abs(lam - lam[0]))), 1e-8)
    )
    checks.append(
        CheckResult(
            "max_principle",
            float(max(0.0, np.max(dev[1:] - dev[:-1]))),
            1e-12,
        )
    )
    sup0_sq = dev[0] ** 2
    late = ts >= 0.01
    if np.any(late) and sup0_sq > 0:
        excess = grad[late] * ts[late] / sup0_sq - 1.0
        decay_resid = float(max(0.0, np.max(excess)))
    else:
        decay_resid = 0.0
    checks.append(CheckResult("gradient_decay", decay_resid, 0.05))

    dt_log = float(np.max(np.diff(ts)))
    checks.append(
        CheckResult(
            "heat_residual",
            float(np.max(heat)),
            10.0 * (dt_log**2 + 1e-6),
        )
    )

    interior = (ts >= 0.01) & (np.arange(len(ts)) > 0) & (np.arange(len(ts)) < len(ts) - 1)
    if np.any(interior):
        denom = np.maximum(np.abs(erhs[interior]), 1e-30)
        rel = np.abs(dfdt[interior] - erhs[interior]) / denom
        energy_resid = float(np.max(rel))
        sign_resid = float(max(0.0, -np.min(np.minimum(dfdt[interior], erhs[interior]))))
    else:
        energy_resid = 0.0
        sign_resid = 0.0
    checks.append(CheckResult("energy_identity", energy_resid, 0.02))
    checks.append(CheckResult("energy_nonnegative", sign_resid, 1e-10))

    h1 = ts[1:-1] - ts[:-2]
    h2 = ts[2:] - ts[1:-1]
    # reduces to the plain second difference on uniform spacing, stays
    # sign-correct on a shortened final interval
    second = 2.0 * (h1 * fval[2:] - (h1 + h2) * fval[1:-1] + h2 * fval[:-2]) / (h1 + h2)
    checks.append(
        CheckResult("f_convexity", float(max(0.0, -np.min(second))), 1e-8)
    )
    return CheckReport(checks)
