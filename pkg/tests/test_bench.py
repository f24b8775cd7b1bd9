import numpy as np
import pytest

from surfpinn import bench, network
from surfpinn.errors import (
    NoExactSolution,
    QuadratureTooCoarse,
    UnknownProblem,
    ZeroDenominator,
)
from surfpinn.geometry import Sphere, Torus
from surfpinn.irk import gauss_legendre_tableau
from surfpinn.network import init_params

from conftest import random_sphere_points


def constant_net(layer_sizes, value):
    p = init_params(layer_sizes, seed=0)
    for w in p.weights:
        w[...] = 0.0
    for b in p.biases:
        b[...] = 0.0
    p.biases[-1][...] = value
    return p


class TestRegistry:
    def test_names(self):
        assert bench.registry() == [
            "sphere-continuous",
            "sphere-discrete-long",
            "sphere-discrete-short",
            "torus-heating",
        ]

    def test_unknown_problem(self):
        with pytest.raises(UnknownProblem):
            bench.get_problem("sphere-cubed")

    def test_sphere_continuous_defaults(self):
        p = bench.get_problem("sphere-continuous")
        assert p.n_space * p.n_times == 50_000
        assert p.mode == "continuous" and p.horizon == 1.0
        assert p.layer_sizes() == (4, 100, 100, 100, 100, 1)

    def test_discrete_short_defaults(self):
        p = bench.get_problem("sphere-discrete-short")
        assert p.n_space == 500 and p.mode == "discrete"
        assert p.horizon == 0.5 and p.t_ref is None
        assert p.layer_sizes() == (3, 200, 200, 200, 200, 9)

    def test_torus_heating_defaults(self):
        p = bench.get_problem("torus-heating")
        assert p.lhs_sampling and p.n_u == 50_000 and p.horizon == 3.0
        assert p.exact is None

    def test_long_problem_variants(self):
        default = bench.get_problem("sphere-discrete-long")
        assert default.t_ref == 0.5 and default.horizon == 3.0
        sin = bench.get_problem("sphere-discrete-long", exact_variant="sin")
        assert sin.exact.name != default.exact.name
        with pytest.raises(UnknownProblem):
            bench.get_problem("sphere-discrete-long", exact_variant="cos")

    @pytest.mark.parametrize(
        "name", ["sphere-continuous", "sphere-discrete-short", "sphere-discrete-long"]
    )
    def test_initial_data_matches_exact_solution(self, name, rng):
        p = bench.get_problem(name)
        pts = random_sphere_points(rng, 50)
        assert np.max(np.abs(p.u0(pts) - p.exact.u(pts, 0.0))) <= 1e-12


class TestTorusForcing:
    def test_mollifier_midpoint_ring(self):
        # the tube section at the source centre sits at distance exactly 0.25
        for x in ([0.0, 1.25, 0.0], [0.0, 0.75, 0.0], [0.0, 1.0, 0.25]):
            assert bench.torus_forcing(np.array(x), eps=0.05) == pytest.approx(50.0, abs=1e-9)

    def test_far_side_decays(self):
        assert bench.torus_forcing(np.array([0.0, -1.25, 0.0]), eps=0.05) <= 1e-10

    def test_sharp_indicator(self):
        assert bench.torus_forcing(np.array([0.0, 1.25, 0.0]), eps=0.0) == 100.0
        assert bench.torus_forcing(np.array([0.0, -1.25, 0.0]), eps=0.0) == 0.0

    def test_mass_is_resolution_stable(self):
        t = Torus(1.0, 0.25)
        m1 = bench.forcing_mass(t, resolution=256)
        m2 = bench.forcing_mass(t, resolution=512)
        assert m1 == pytest.approx(m2, rel=1e-6)
        assert 15.0 <= m2 <= 25.0


class TestManufacturedRhs:
    def test_oracle_matches_analytic_harmonic_forcing(self, rng):
        # u = x1 x2 x3 e^t has lap_surface(u) = -12 u, so f = 13 u
        problem = bench.get_problem("sphere-discrete-short")
        pts = random_sphere_points(rng, 40)
        for t in (0.0, 0.25, 0.5):
            f_oracle = problem.rhs(pts, t)
            f_analytic = problem.exact.analytic_rhs(pts, t)
            assert np.max(np.abs(f_oracle - f_analytic)) <= 1e-6

    def test_provenance_tags(self):
        assert bench.get_problem("sphere-continuous").rhs.provenance == "oracle-manufactured"
        assert bench.get_problem("torus-heating").rhs.provenance == "analytic"

    def test_vector_time_argument(self, rng):
        problem = bench.get_problem("sphere-continuous")
        pts = random_sphere_points(rng, 12)
        ts = np.repeat([0.25, 0.75], 6)
        out = problem.rhs(pts, ts)
        assert np.allclose(out[:6], problem.rhs(pts[:6], 0.25))
        assert np.allclose(out[6:], problem.rhs(pts[6:], 0.75))


class TestRelativeError:
    def _predicting_problem(self, params, scale=1.0):
        surface = Sphere(1.0)
        exact = bench.ExactSolution(
            name="net",
            u=lambda X, t, s=scale: bench.predict(params, self._spec, X, t) / s,
            u_t=lambda X, t: np.zeros(len(X)),
        )
        self._spec = bench.ProblemSpec(
            name="probe", surface=surface, mode="continuous", horizon=1.0,
            rhs=bench.PdeRhs(fn=lambda X, t: np.zeros(len(X))),
            u0=lambda X: np.zeros(len(X)),
        )
        self._spec.exact = exact
        return self._spec

    def test_exact_prediction_gives_zero(self, rng):
        params = init_params((4, 10, 1), seed=1)
        spec = self._predicting_problem(params, scale=1.0)
        pts = random_sphere_points(rng, 100)
        assert bench.relative_error(params, spec, pts, 0.5) == 0.0

    def test_scaling_identity(self, rng):
        # u_h = 1.1 u gives Err = 0.1 exactly
        params = init_params((4, 10, 1), seed=1)
        spec = self._predicting_problem(params, scale=1.1)
        pts = random_sphere_points(rng, 100)
        assert bench.relative_error(params, spec, pts, 0.5) == pytest.approx(0.1, abs=1e-12)

    def test_missing_exact_solution(self, rng):
        problem = bench.get_problem("torus-heating")
        params = init_params(problem.layer_sizes(), seed=0)
        with pytest.raises(NoExactSolution):
            bench.relative_error(params, problem, np.zeros((1, 3)), 0.0)

    def test_zero_denominator(self, rng):
        params = init_params((4, 10, 1), seed=1)
        spec = self._predicting_problem(params)
        spec.exact = bench.ExactSolution(
            name="zero", u=lambda X, t: np.zeros(len(X)), u_t=lambda X, t: np.zeros(len(X))
        )
        with pytest.raises(ZeroDenominator):
            bench.relative_error(params, spec, random_sphere_points(rng, 10), 0.5)


class TestDiscretePredict:
    def _constant_head_problem(self, biases):
        spec = bench.ProblemSpec(
            name="probe-discrete", surface=Sphere(1.0), mode="discrete",
            horizon=0.5, rhs=bench.PdeRhs(fn=lambda X, t: np.zeros(len(X))),
            u0=lambda X: np.zeros(len(X)), q=2,
        )
        params = constant_net((3, 4, 3), 0.0)
        params.biases[-1][:] = biases
        return spec, params

    def test_head_hit_at_stage_and_final_nodes(self, rng):
        spec, params = self._constant_head_problem([1.5, -2.0, 3.25])
        tab = gauss_legendre_tableau(2)
        pts = random_sphere_points(rng, 5)
        assert np.allclose(bench.predict(params, spec, pts, tab.c[0] * 0.5), 1.5)
        assert np.allclose(bench.predict(params, spec, pts, tab.c[1] * 0.5), -2.0)
        assert np.allclose(bench.predict(params, spec, pts, 0.5), 3.25)

    def test_cubic_interpolation_between_nodes(self, rng):
        spec, params = self._constant_head_problem([1.0, 2.0, 4.0])
        tab = gauss_legendre_tableau(2)
        nodes = np.append(tab.c * 0.5, 0.5)
        vals = np.array([1.0, 2.0, 4.0])
        t = 0.2
        expected = 0.0
        for i in range(3):
            w = 1.0
            for j in range(3):
                if j != i:
                    w *= (t - nodes[j]) / (nodes[i] - nodes[j])
            expected += w * vals[i]
        pts = random_sphere_points(rng, 4)
        assert np.allclose(bench.predict(params, spec, pts, t), expected, atol=1e-12)

    def test_rescaled_final_time_maps_to_last_head(self, rng):
        problem = bench.get_problem("sphere-discrete-long")
        params = constant_net(problem.layer_sizes(), 0.0)
        params.biases[-1][-1] = 7.5
        pts = random_sphere_points(rng, 3)
        assert np.allclose(bench.predict(params, problem, pts, 3.0), 7.5)


class TestHeatContent:
    def test_zero_network_zero_content(self):
        problem = bench.get_problem("torus-heating")
        params = constant_net(problem.layer_sizes(), 0.0)
        assert bench.heat_content(params, problem, 0.0) == pytest.approx(0.0, abs=1e-12)

    def test_constant_prediction_is_conserved(self):
        problem = bench.get_problem("torus-heating")
        params = constant_net(problem.layer_sizes(), 2.0)
        area = np.pi**2
        expected = 2.0 * problem.output_scale * area
        for t in (0.0, 1.5, 3.0):
            assert bench.heat_content(params, problem, t) == pytest.approx(expected, rel=1e-9)


class TestVerifyTheorem:
    def test_normal_constant_extension_lemma_case(self):
        s = Sphere(1.0)

        def cp_ext(fld):
            return lambda X: fld(X / np.linalg.norm(X, axis=1)[:, None])

        trig = lambda X: np.sin(X[:, 0]) * np.cos(2 * X[:, 1]) + np.sin(X[:, 1] * X[:, 2])
        u = cp_ext(trig)

        def fd_grad(X, h=1e-4):
            g = np.empty((len(X), 3))
            for k in range(3):
                e = np.zeros(3)
                e[k] = h
                g[:, k] = (u(X + e) - u(X - e)) / (2 * h)
            return g

        trial = bench.TheoremTrial(
            scalar_u=u,
            vector_v=lambda X: np.zeros((len(X), 3)),
            vector_f=fd_grad,
            scalar_g=lambda X: np.zeros(len(X)),
        )
        rows = bench.verify_theorem(s, [trial], resolution=128)
        est1 = rows[0]
        assert est1.lhs <= 1e-6
        assert est1.margin >= -1e-8

    def test_sphere_eigenfunction_case(self):
        # u = x3 extended along normals, g = lap_surface(u) = -2 x3:
        # both sides of estimate (3) vanish to oracle accuracy and C = 2
        s = Sphere(1.0)
        ubar = lambda X: X[:, 2] / np.linalg.norm(X, axis=1)
        trial = bench.TheoremTrial(
            scalar_u=ubar,
            vector_v=lambda X: np.column_stack([ubar(X)] * 3),
            vector_f=lambda X: np.zeros((len(X), 3)),
            scalar_g=lambda X: -2.0 * X[:, 2],
        )
        rows = bench.verify_theorem(s, [trial], resolution=128)
        est3 = rows[2]
        assert est3.lhs <= 1e-6 and est3.rhs <= 1e-6
        assert est3.constant == pytest.approx(2.0, abs=1e-6)
        assert est3.margin >= -1e-8

    def test_random_trials_margins(self, rng):
        for surface in (Sphere(1.0), Torus(1.0, 0.25)):
            rows = bench.verify_theorem(
                surface, bench.random_trials(rng, 3), resolution=128
            )
            assert len(rows) == 9
            assert min(r.margin for r in rows) >= -1e-8

    def test_torus_constant_from_curvature_sweep(self, rng):
        rows = bench.verify_theorem(
            Torus(1.0, 0.25), bench.random_trials(rng, 1), resolution=128
        )
        # sup |H| = 2.4 at the outer equator under the div(n) = -2H
        # convention; the midpoint grid samples it to O(resolution^-2)
        assert rows[0].constant == pytest.approx(4.8, abs=1e-3)

    def test_coarse_resolution_detected(self):
        osc = lambda X: np.sin(60 * X[:, 0]) * np.cos(60 * X[:, 1])
        trial = bench.TheoremTrial(
            scalar_u=osc,
            vector_v=lambda X: np.column_stack([osc(X)] * 3),
            vector_f=lambda X: np.zeros((len(X), 3)),
            scalar_g=lambda X: np.zeros(len(X)),
        )
        with pytest.raises(QuadratureTooCoarse):
            bench.verify_theorem(Sphere(1.0), [trial], resolution=32)


class TestReports:
    def test_error_report_csv(self, tmp_path):
        report = bench.ErrorReport()
        report.append(0.25, 0.031, 10_000, 0)
        report.append(1.0, 0.0676, 10_000, 0)
        path = tmp_path / "errors.csv"
        report.to_csv(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "t,err,n_eval,seed"
        assert len(lines) == 3

    def test_fields_csv_with_and_without_exact(self, tmp_path):
        pts = np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0]])
        pred = np.array([0.5, 0.25])
        path = tmp_path / "fields.csv"
        bench.dump_fields_csv(path, pts, 0.5, pred, u_exact=np.array([0.4, 0.3]))
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "x,y,z,t,u_pred,u_exact,abs_err"
        assert len(lines[1].split(",")) == 7
        bench.dump_fields_csv(path, pts, 0.5, pred)
        lines = path.read_text().strip().splitlines()
        assert lines[1].endswith(",,")
