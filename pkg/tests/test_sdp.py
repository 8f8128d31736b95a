import numpy as np
import pytest

from plmirelax.errors import CapExceeded, ConfigError, DimensionError
from plmirelax.matexpr import (
    AffineSymMatrix,
    PlmiSpec,
    VarRegistry,
    eval_expr,
    expr_scale,
    make_example_spec,
)
from plmirelax.relax import LmiSet, gen_tuan
from plmirelax.sdp import (
    FeasibilityProblem,
    SolverOptions,
    Status,
    compile_problem,
    solve_feasibility,
    stabilization_problem,
    sym_eig,
)


def scalar_lmis(*rows):
    """1x1 constraints const + coeff*x over a single scalar variable."""
    reg = VarRegistry()
    reg.add_scalar("x")
    reg.freeze()
    cons = [
        AffineSymMatrix.build(reg, 1, [[const]], {0: [[coeff]]})
        for const, coeff in rows
    ]
    return LmiSet(reg, cons, [("manual", i) for i in range(len(cons))], "manual")


def constant_lmis(*values):
    reg = VarRegistry()
    reg.freeze()
    cons = [AffineSymMatrix.build(reg, 1, [[v]]) for v in values]
    return LmiSet(reg, cons, [("manual", i) for i in range(len(cons))], "manual")


class TestSymEig:
    def test_known_spectra(self):
        w, v = sym_eig(np.eye(2))
        assert np.allclose(w, [1.0, 1.0])
        w, _ = sym_eig(np.array([[0.0, 1.0], [1.0, 0.0]]))
        assert np.allclose(w, [-1.0, 1.0])

    def test_reconstruction(self):
        rng = np.random.default_rng(0)
        m = rng.normal(size=(8, 8))
        m = m + m.T
        w, v = sym_eig(m)
        resid = np.linalg.norm(v @ np.diag(w) @ v.T - m)
        assert resid <= 1e-10 * max(1.0, np.linalg.norm(m))
        assert np.all(np.diff(w) >= -1e-12)

    def test_input_validation(self):
        with pytest.raises(DimensionError):
            sym_eig(np.zeros((2, 3)))
        with pytest.raises(DimensionError):
            sym_eig(np.array([[0.0, 1.0], [0.0, 0.0]]))
        with pytest.raises(CapExceeded):
            sym_eig(np.eye(65))


class TestScalarProblems:
    def test_feasible_one_dim(self):
        lmis = scalar_lmis((-1, 1))  # x - 1 < 0
        res = solve_feasibility(
            FeasibilityProblem(lmi_set=lmis), SolverOptions(ball_radius=10.0)
        )
        assert res.status is Status.FEASIBLE_WITH_MARGIN
        assert res.witness is not None and res.witness[0] < 1 - 1e-6
        assert abs(res.margin - (res.witness[0] - 1)) < 1e-9

    def test_constant_infeasible(self):
        res = solve_feasibility(FeasibilityProblem(lmi_set=constant_lmis(1)))
        assert res.status is Status.INFEASIBLE
        assert res.witness is None
        assert abs(res.margin - 1.0) < 1e-6

    def test_conflicting_pair_infeasible(self):
        # x + 1 < 0 and 1 - x < 0 cannot hold together; best margin is +1
        lmis = scalar_lmis((1, 1), (1, -1))
        res = solve_feasibility(FeasibilityProblem(lmi_set=lmis))
        assert res.status is Status.INFEASIBLE
        assert abs(res.margin - 1.0) < 1e-3

    def test_boundary_is_inconclusive(self):
        # x < 0 and -x < 0: the optimum margin is exactly zero
        lmis = scalar_lmis((0, 1), (0, -1))
        res = solve_feasibility(FeasibilityProblem(lmi_set=lmis))
        assert res.status is Status.INCONCLUSIVE
        assert res.witness is None
        assert abs(res.margin) < 1e-4

    def test_ball_bounds_the_push(self):
        # -x < 0 alone: the margin improves all the way to the ball radius
        lmis = scalar_lmis((0, -1))
        res = solve_feasibility(
            FeasibilityProblem(lmi_set=lmis), SolverOptions(ball_radius=10.0)
        )
        assert res.status is Status.FEASIBLE_WITH_MARGIN
        assert res.witness[0] <= 10.0 + 1e-9
        assert -10.0 - 1e-9 <= res.margin <= -9.9


class TestCompile:
    def test_caps(self):
        reg = VarRegistry()
        reg.add_mat("X", 201, 1)
        reg.freeze()
        e = AffineSymMatrix.build(reg, 1, [[-1]])
        p = FeasibilityProblem(lmi_set=LmiSet(reg, [e], [("c",)], "manual"))
        with pytest.raises(CapExceeded):
            compile_problem(p)

        lmis = constant_lmis(-1)
        many = LmiSet(
            lmis.registry,
            lmis.constraints * 5001,
            lmis.provenance * 5001,
            "manual",
        )
        with pytest.raises(CapExceeded):
            compile_problem(FeasibilityProblem(lmi_set=many))

    def test_no_constraints(self):
        reg = VarRegistry()
        reg.freeze()
        with pytest.raises(ConfigError):
            compile_problem(
                FeasibilityProblem(lmi_set=LmiSet(reg, [], [], "manual"))
            )

    def test_scale_and_grouping(self):
        reg = VarRegistry()
        reg.add_scalar("x")
        reg.freeze()
        small = AffineSymMatrix.build(reg, 1, [[0]], {0: [[3]]})
        big = AffineSymMatrix.build(reg, 2, None, {0: [[4, 0], [0, 3]]})
        cp = compile_problem(
            FeasibilityProblem(
                lmi_set=LmiSet(reg, [small, big], [("a",), ("b",)], "manual")
            )
        )
        assert cp.scale == 5.0
        assert sorted(g.dim for g in cp.groups) == [1, 2]
        assert cp.dims == [1, 2]

    def test_constant_only_scale(self):
        cp = compile_problem(FeasibilityProblem(lmi_set=constant_lmis(7)))
        assert cp.scale == 7.0


class TestSolverOptions:
    def test_from_mapping_round_trip(self):
        opts = SolverOptions.from_mapping({"max_outer": 30, "ball_radius": 50})
        assert opts.max_outer == 30 and opts.ball_radius == 50.0
        assert SolverOptions.from_mapping({}) == SolverOptions()

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="warp"):
            SolverOptions.from_mapping({"warp": 9})

    def test_bad_type(self):
        with pytest.raises(ConfigError, match="eps_margin"):
            SolverOptions.from_mapping({"eps_margin": "tight"})
        with pytest.raises(ConfigError, match="max_outer"):
            SolverOptions.from_mapping({"max_outer": "lots"})


@pytest.fixture(scope="module")
def solved():
    spec = make_example_spec(0, 0, q=2)
    lmis = gen_tuan(spec)
    problem = stabilization_problem(spec, lmis)
    return spec, lmis, solve_feasibility(problem)


class TestExampleProblem:

    def test_feasible_with_margin(self, solved):
        _, _, res = solved
        assert res.status is Status.FEASIBLE_WITH_MARGIN
        assert res.margin < -1e-6
        assert res.iterations > 0 and res.wall_time >= 0.0 and res.scale > 0

    def test_witness_validity(self, solved):
        spec, lmis, res = solved
        for c in lmis:
            w, _ = sym_eig(eval_expr(c, res.witness))
            assert w[-1] <= res.margin + 1e-9

    def test_lyapunov_block_above_identity(self, solved):
        spec, _, res = solved
        ids = spec.registry.block_ids("Q")
        qm = np.array(
            [
                [res.witness[ids[0]], res.witness[ids[1]]],
                [res.witness[ids[1]], res.witness[ids[2]]],
            ]
        )
        assert np.linalg.eigvalsh(qm)[0] > 1.0

    def test_witness_scaling_stays_feasible(self, solved):
        # the constraint family is homogeneous in the variables, so any
        # positive upscaling of a strict witness remains a strict witness
        spec, lmis, res = solved
        doubled = 2.0 * res.witness
        for c in lmis:
            w, _ = sym_eig(eval_expr(c, doubled))
            assert w[-1] < 0
        ids = spec.registry.block_ids("Q")
        qm = np.array(
            [
                [doubled[ids[0]], doubled[ids[1]]],
                [doubled[ids[1]], doubled[ids[2]]],
            ]
        )
        assert np.linalg.eigvalsh(qm)[0] > 1.0

    def test_monotone_outer_history(self, solved):
        _, _, res = solved
        hist = res.history
        assert len(hist) >= 1
        assert all(b <= a + 1e-9 for a, b in zip(hist, hist[1:]))

    def test_determinism(self, solved):
        spec, lmis, res = solved
        again = solve_feasibility(stabilization_problem(spec, lmis))
        assert again.status is res.status
        assert again.margin == res.margin
        assert again.iterations == res.iterations
        assert np.array_equal(again.witness, res.witness)
        assert again.history == res.history

    def test_scale_invariance_of_status(self, solved):
        # scaling every constraint (side constraint included) by a positive
        # factor leaves the classification alone and scales the margin
        spec, lmis, res = solved
        base = stabilization_problem(spec, lmis)
        scaled = FeasibilityProblem(
            lmi_set=LmiSet(
                lmis.registry,
                [expr_scale(c, 1000) for c in lmis],
                lmis.provenance,
                lmis.method,
            ),
            extra=[expr_scale(e, 1000) for e in base.extra],
            ball_radius=base.ball_radius,
        )
        res2 = solve_feasibility(scaled)
        assert res2.status is Status.FEASIBLE_WITH_MARGIN
        assert res2.margin == pytest.approx(1000 * res.margin, rel=1e-5)


class TestStabilizationProblem:
    def test_adds_one_side_constraint(self):
        spec = make_example_spec(0, 0, q=2)
        lmis = gen_tuan(spec)
        problem = stabilization_problem(spec, lmis)
        assert len(problem.all_constraints()) == len(lmis) + 1
        side = problem.extra[0]
        x = np.zeros(9)
        assert np.array_equal(eval_expr(side, x), np.eye(2))

    def test_requires_designated_variable(self):
        spec = make_example_spec(0, 0, q=2)
        bare = PlmiSpec(
            spec.q, spec.r, spec.dim, spec.registry, spec.vertex, lyapunov_var=None
        )
        with pytest.raises(ConfigError):
            stabilization_problem(bare, gen_tuan(spec))

    def test_rejects_nonsymmetric_designation(self):
        spec = make_example_spec(0, 0, q=2)
        wrong = PlmiSpec(
            spec.q, spec.r, spec.dim, spec.registry, spec.vertex, lyapunov_var="F1"
        )
        with pytest.raises(ConfigError):
            stabilization_problem(wrong, gen_tuan(spec))
