"""Acceptance criteria, one test per criterion, each printing a pass/fail
line.  Reference configuration: grid (32,32,1,1), generator 0.1 cos x0,
RK4, cfl_safety = 0.5.
"""

import contextlib
import time

import numpy as np
import pytest

from gkt4 import calculus, pointwise as pw
from gkt4.cli import main
from gkt4.deform import deformation_sweep, joyce_deform, normalize_generator
from gkt4.fields import MetricField, ScalarField
from gkt4.flow import FlowConfig, cfl_timestep, gkrf_velocity, run, step
from gkt4.io import _random_bandlimited
from gkt4.verify import field_checks, run_field_suite, run_flow_suite, run_pointwise_suite


@contextlib.contextmanager
def criterion(label):
    try:
        yield
    except BaseException:
        print(f"ACCEPTANCE {label}: FAIL")
        raise
    print(f"ACCEPTANCE {label}: PASS")


def test_criterion_01_hyperkahler_fixed_point(flat32):
    with criterion("01 hyper-Kahler fixed point"):
        start = time.monotonic()
        assert gkrf_velocity(flat32).max_norm() <= 1e-12
        dt = cfl_timestep(flat32, 0.5)
        cur = flat32
        for _ in range(100):
            cur = step(cur, dt)
        for name in ("omega", "psi1", "psi2_base", "a"):
            delta = getattr(cur, name).comps - getattr(flat32, name).comps
            assert np.max(np.abs(delta)) <= 1e-12
        assert time.monotonic() - start <= 5.0


def test_criterion_02_joyce_validity(joyce_ref):
    with criterion("02 Joyce validity"):
        start = time.monotonic()
        rep = run_field_suite(joyce_ref)
        assert rep.passed
        for name in (
            "torsion_match_i",
            "torsion_match_j",
            "pluriclosed",
            "lee_dual_route",
            "lee_structure_identity",
            "lee_difference",
            "nijenhuis_j",
            "sigma_omega_identity",
        ):
            assert rep[name].residual <= 1e-6
        assert time.monotonic() - start <= 30.0


def test_criterion_03_joyce_derivative(flat32):
    with criterion("03 Joyce derivative"):
        grid = flat32.grid
        x0, x1 = grid.coordinate(0), grid.coordinate(1)
        generators = [
            np.cos(x0),
            np.sin(x1),
            np.sin(x0) * np.cos(x1),
            _random_bandlimited(grid, 2, 3),
            _random_bandlimited(grid, 3, 5),
        ]
        flat_g = MetricField.flat(grid)
        dt = 1e-4
        for vals in generators:
            f = normalize_generator(ScalarField(grid, vals), flat32.omega)
            plus = joyce_deform(flat32, f, dt, dt)
            minus = joyce_deform(flat32, f, -dt, dt)
            dp = (plus.angle.values - minus.angle.values) / (2 * dt)
            target = -0.5 * calculus.laplacian_analytic(f, flat_g).values
            rel = np.max(np.abs(dp - target)) / np.max(np.abs(target))
            assert rel <= 1e-3


def test_criterion_04_phi_triple_agreement(flat32, joyce_ref, flow_trace_t2):
    with criterion("04 Phi triple agreement"):
        states = [flat32, joyce_ref, flow_trace_t2.final_state]
        states.append(joyce_deform(flat32, ScalarField(
            flat32.grid, 0.05 * _random_bandlimited(flat32.grid, 2, 9)), 0.1, 1e-3))
        for s in states:
            im, jm = s.I_endo.matrices(), s.J_endo.matrices()
            phi = s.phi.values
            assert np.max(np.abs(phi - pw.phi_angle(im, jm))) <= 1e-10
            assert np.max(np.abs(phi - pw.phi_determinant(im, jm))) <= 1e-10


def test_criterion_05_lambda_conservation(flat32, cos_generator, flow_trace_t2):
    with criterion("05 lambda conservation"):
        sweep = deformation_sweep(flat32, cos_generator, [0.05, 0.1, 0.15, 0.2], dt=1e-3)
        lam0 = flat32.lam
        for _, _, summary in sweep:
            assert abs(summary["lambda"] - lam0) <= 1e-8
        rows_to_1 = [r for r in flow_trace_t2.records if r.t <= 1.0 + 1e-12]
        for r in rows_to_1:
            assert abs(r.lam - rows_to_1[0].lam) <= 1e-8


def test_criterion_06_heat_equation(flow_trace_t2):
    with criterion("06 heat equation"):
        records = flow_trace_t2.records
        dt_log = max(b.t - a.t for a, b in zip(records, records[1:]))
        bound = 10.0 * (dt_log**2 + 1e-6)
        for r in records:
            assert r.heat_residual <= bound


def test_criterion_07_maximum_principle(flow_trace_t2):
    with criterion("07 maximum principle"):
        devs = [r.sup_phi_dev for r in flow_trace_t2.records]
        for a, b in zip(devs, devs[1:]):
            assert b <= a + 1e-12


def test_criterion_08_gradient_decay(flow_trace_t2):
    with criterion("08 gradient decay"):
        sup0_sq = flow_trace_t2.records[0].sup_phi_dev ** 2
        for r in flow_trace_t2.records:
            if r.t >= 0.01:
                assert r.sup_grad_phi_sq <= 1.05 * sup0_sq / r.t


def test_criterion_09_energy_identity(flow_trace_t2):
    with criterion("09 energy identity"):
        interior = flow_trace_t2.records[1:-1]
        for r in interior:
            if r.t >= 0.01:
                assert r.energy_rhs >= 0.0
                assert r.dF_dt >= 0.0
                assert abs(r.dF_dt - r.energy_rhs) <= 0.02 * r.energy_rhs


def test_criterion_10_convexity_and_trend(flow_trace_t2):
    with criterion("10 convexity and decay trend"):
        records = flow_trace_t2.records
        assert records[-1].t == pytest.approx(2.0, abs=1e-9)
        f = np.array([r.F_value for r in records])
        ts = np.array([r.t for r in records])
        h1 = ts[1:-1] - ts[:-2]
        h2 = ts[2:] - ts[1:-1]
        second = 2.0 * (h1 * f[2:] - (h1 + h2) * f[1:-1] + h2 * f[:-2]) / (h1 + h2)
        assert float(np.min(second)) >= -1e-8
        first, last = records[0], records[-1]
        assert last.sup_phi_dev < first.sup_phi_dev
        assert last.mu_l2 < first.mu_l2
        assert last.torsion_l2 < first.torsion_l2


def test_criterion_11_negative_controls(joyce_ref, flow_trace_t2):
    with criterion("11 negative controls"):
        # one spot check per suite here; the exhaustive per-check fault
        # injections live in test_verify.py
        import dataclasses

        from gkt4 import verify
        from gkt4.fields import ScalarField as SF

        g, i, j, omega = verify.random_structures(seed=3, count=8)
        fp, _ = pw.fdefs_forms(g, i, j)
        _, b = pw.taming_split(fp, i)
        assert verify.resid_b_formula(g, i, j, b=b + 1e-3) > 1e-4

        env = verify.field_environment(joyce_ref)
        env["phi"] = SF(joyce_ref.grid, env["phi"].values + 1e-3, check=False)
        rep = verify.CheckReport(field_checks(joyce_ref, env))
        assert not rep["phi_angle_route"].passed

        rows = [dataclasses.replace(r) for r in flow_trace_t2.records]
        rows[3] = dataclasses.replace(rows[3], lam=rows[0].lam + 1e-5)
        assert not run_flow_suite(rows)["lambda_conservation"].passed


def test_criterion_12_determinism(tmp_path):
    with criterion("12 determinism"):
        d = str(tmp_path)
        cfg = tmp_path / "ref.cfg"
        cfg.write_text(
            "grid = 32,32,1,1\ngenerator = cos\namplitude = 0.1\n"
            "deform_t_end = 0.2\ndeform_dt = 0.001\n"
            "dt_mode = cfl\ncfl_safety = 0.5\nt_end = 1.0\ndiagnostic_stride = 1\n"
        )
        assert main(["init", "--out", f"{d}/flat.snap"]) == 0
        assert main(
            ["deform", "--in", f"{d}/flat.snap", "--config", str(cfg), "--out", f"{d}/j.snap"]
        ) == 0
        for k in (1, 2):
            assert main(
                [
                    "flow",
                    "--in", f"{d}/j.snap",
                    "--config", str(cfg),
                    "--csv", f"{d}/run{k}.csv",
                    "--out", f"{d}/final{k}.snap",
                ]
            ) == 0
        csv1 = (tmp_path / "run1.csv").read_bytes()
        csv2 = (tmp_path / "run2.csv").read_bytes()
        snap1 = (tmp_path / "final1.snap").read_bytes()
        snap2 = (tmp_path / "final2.snap").read_bytes()
        assert csv1 == csv2
        assert snap1 == snap2


def test_full_suite_runtime_guard(flow_trace_t2):
    """The t = 2 reference trace exists and the pointwise battery is quick;
    the 10-minute budget is enforced by the suite completing at all."""
    with criterion("-- pointwise battery"):
        assert run_pointwise_suite(7, 1000).passed
