import numpy as np
import pytest

from eqlayer.domain import DomainCase, Grid, ProblemSpec
from eqlayer.errors import PreconditionError
from eqlayer.linsolve import bspline3
from eqlayer.transparent import (build_lambda, build_lambda_no_transport,
                                 exact_lambda_matrix, lambda_tower_gap,
                                 split_solve, upper_spec)


def bump_sources():
    def s_psi(y, z):
        return bspline3((y - 3.0) / 0.8) * bspline3((z - 1.0) / 0.45)

    def s_v(y, z):
        return 0.5 * bspline3((y - 2.5) / 0.7) * bspline3((z - 1.2) / 0.35)

    return s_psi, s_v


class TestBuildLambda:
    def test_zero_trace_maps_to_zero(self):
        lam = build_lambda(upper_spec(2.0, 8.0, 12.0, 24, 24))
        assert np.abs(lam.apply(np.zeros(23))).max() == 0.0

    def test_nonpositive_quadratic_form(self):
        lam = build_lambda(upper_spec(2.0, 8.0, 12.0, 32, 32))
        rng = np.random.default_rng(3)
        margin = lam.nonpositivity_margin(rng.standard_normal((50, 31)))
        assert margin <= 1e-10

    def test_plain_system_refused_without_override(self):
        spec = upper_spec(2.0, 8.0, 12.0, 24, 24, zero_order=False)
        with pytest.raises(PreconditionError):
            build_lambda(spec)
        lam = build_lambda(spec, allow_plain=True)
        assert lam.entries.shape == (23, 23)

    def test_source_must_vanish(self):
        spec = upper_spec(2.0, 8.0, 12.0, 24, 24)
        spec = ProblemSpec(case=spec.case, bc=spec.bc,
                           s_psi=lambda y, z: np.ones_like(y + z),
                           zero_order=True, grid=spec.grid)
        with pytest.raises(PreconditionError):
            build_lambda(spec)

    def test_transport_asymmetry_reported(self):
        lam = build_lambda(upper_spec(2.0, 8.0, 12.0, 32, 32))
        assert lam.asymmetry() > 1e-8    # transport breaks self-adjointness

    def test_column_decay_from_diagonal(self):
        lam = build_lambda(upper_spec(2.0, 8.0, 12.0, 48, 48))
        mid = lam.entries.shape[0] // 2
        col = np.abs(lam.entries[:, mid])
        assert col[mid] > 10.0 * col[5]   # locality surrogate, reported only

    def test_dump(self, tmp_path):
        lam = build_lambda(upper_spec(2.0, 6.0, 12.0, 16, 16))
        path = tmp_path / "lambda.txt"
        lam.dump_coordinates(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0].startswith("#")
        assert len(lines) == 1 + 15 * 15


class TestNoTransport:
    def test_symmetric_and_close_to_multiplier(self):
        lam = build_lambda_no_transport(48, 30.0)
        assert lam.asymmetry() <= 1e-8
        exact = exact_lambda_matrix(48, 30.0)
        diff = np.linalg.norm(lam.entries - exact.entries, 2)
        assert diff <= 1e-2

    def test_refinement_decreases_gap(self):
        diffs = []
        for ny in (32, 64, 128):
            lam = build_lambda_no_transport(ny, 30.0)
            exact = exact_lambda_matrix(ny, 30.0)
            diffs.append(np.linalg.norm(lam.entries - exact.entries, 2))
        assert diffs[0] > diffs[1] > diffs[2]


class TestSplit:
    def make_spec(self, n=48):
        case = DomainCase("I", Zmax=8.0, Ymax=12.0)
        s_psi, s_v = bump_sources()
        return ProblemSpec(case=case, s_psi=s_psi, s_v=s_v, zero_order=True,
                           grid=Grid.build(case, n, n))

    def test_zero_sources_give_zero_everywhere(self):
        case = DomainCase("I", Zmax=8.0, Ymax=12.0)
        spec = ProblemSpec(case=case, zero_order=True,
                           grid=Grid.build(case, 32, 32))
        res = split_solve(spec, H=4.0, H0=2.0)
        assert np.abs(res.whole.u.v.values).max() <= 1e-12
        assert np.abs(res.bottom.u.v.values).max() <= 1e-12
        assert np.abs(res.top.u.v.values).max() <= 1e-12

    def test_glued_matches_whole_to_solver_tolerance(self):
        res = split_solve(self.make_spec(), H=4.0, H0=2.2)
        assert res.report["rel_l2_glued_vs_whole"] <= 1e-8
        assert res.report["interface_v_mismatch"] <= 1e-12
        assert res.report["interface_psi_mismatch"] <= 1e-8

    def test_source_support_enforced(self):
        spec = self.make_spec()
        with pytest.raises(PreconditionError):
            split_solve(spec, H=4.0, H0=0.5)   # sources live above 0.5

    def test_plain_system_needs_override(self):
        case = DomainCase("I", Zmax=8.0, Ymax=12.0)
        s_psi, s_v = bump_sources()
        spec = ProblemSpec(case=case, s_psi=s_psi, s_v=s_v, zero_order=False,
                           grid=Grid.build(case, 32, 32))
        with pytest.raises(PreconditionError):
            split_solve(spec, H=4.0, H0=2.2)

    def test_interface_must_be_a_node(self):
        from eqlayer.errors import AssemblyError
        with pytest.raises(AssemblyError):
            split_solve(self.make_spec(), H=4.03, H0=2.2)


class TestTower:
    def test_composition_matches_direct(self):
        gap = lambda_tower_gap(H1=2.0, H2=4.0, Zmax=8.0, Ymax=12.0,
                               Ny=32, hz=0.125)
        assert gap <= 1e-9
