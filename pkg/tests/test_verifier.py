import math

import numpy as np
import pytest

from modent.core import DimensionError, DomainError, LogFn, MultFn, log_eval, mult_eval
from modent.solutions import (
    CaseOne,
    CaseProjection,
    HFn,
    PsiFn,
    derive_h,
    make_one,
    make_other,
    make_projection,
    make_shannon,
    make_user,
    make_zero_mu,
)
from modent.verifier import (
    ResidualReport,
    SampleSpec,
    bivariate_from_expr,
    check_associativity,
    check_entropy_classic,
    check_ent_special,
    check_feim,
    check_h_symmetry,
    check_homogeneity,
    check_modified,
    check_symmetry,
    classify,
    draw,
    exchange_gap,
    in_region,
    oracle_lemma_log,
    oracle_lemma_mult,
    oracle_normalization,
    residual_ent_special,
    residual_entropy_classic,
    residual_feim,
    residual_modified,
    run_residuals,
)

import reference as ref

SHANNON = make_shannon()
ID = MultFn.identity()


class TestSampling:
    @pytest.mark.parametrize("region", ["cone", "open_cube", "feim_d"])
    @pytest.mark.parametrize("k", [1, 3])
    def test_region_predicate(self, region, k):
        spec = SampleSpec(k, 5000, 9, region)
        pts = draw(spec, 3)
        assert in_region(spec, pts)
        if region == "feim_d":
            x, y = pts[:, 0], pts[:, 1]
            assert np.all(x + y < 1) and np.all(y > 0)

    def test_deterministic(self):
        spec = SampleSpec(2, 100, 123)
        assert np.array_equal(draw(spec, 3), draw(spec, 3))
        assert not np.array_equal(draw(spec, 3), draw(spec.with_(seed=124), 3))

    def test_custom_cone_bounds(self):
        spec = SampleSpec(1, 1000, 0, "cone", lo=2.0, hi=3.0)
        pts = draw(spec)
        assert pts.min() > 2.0 and pts.max() <= 3.0

    def test_bad_spec(self):
        with pytest.raises(ValueError):
            SampleSpec(1, 10, 0, "sphere")
        with pytest.raises(ValueError):
            SampleSpec(1, 0, 0)


class TestResiduals:
    def test_shannon_modified(self):
        assert abs(residual_modified(SHANNON, ID, [1.0], [2.0], [3.0])) <= 1e-12

    def test_case_one(self):
        f = make_one(PsiFn.expr("ln(s[0])"))
        assert abs(residual_modified(f, MultFn.one(1), 1, 2, 3)) <= 1e-15

    def test_broken_case_one_brute_force(self):
        # psi(s) = s violates psi(1) = 0; the residual is -psi(1) = -1 everywhere
        broken = CaseOne(1, psi=PsiFn.expr("s[0]"))
        rng = np.random.default_rng(0)
        for _ in range(10):
            x, y, z = rng.uniform(0.1, 10, 3)
            oracle = ref.modified_residual(lambda a, b, c: a[0] + b[0] + c[0], lambda t: 1.0, [x], [y], [z])
            got = residual_modified(broken, MultFn.one(1), x, y, z)
            assert oracle == pytest.approx(-1.0, abs=1e-12)
            assert got == pytest.approx(-1.0, abs=1e-12)

    def test_entropy_classic(self):
        assert abs(residual_entropy_classic(SHANNON, 1, 1, 1)) <= 1e-12
        assert abs(residual_entropy_classic(SHANNON, 0.2, 0.3, 0.5)) <= 1e-12

    def test_entropy_classic_constant_breaks(self):
        # Shannon + 1, written as the projection family with psi shifted by 1
        plus_one = CaseProjection(1, mu=ID, l=LogFn.natural(), psi=PsiFn.neg_x_log_x().shifted(1.0))
        for pt in [(1, 1, 1), (0.2, 0.3, 0.5), (3, 7, 0.1)]:
            assert plus_one(*pt) == pytest.approx(SHANNON(*pt) + 1, abs=1e-12)
            assert residual_entropy_classic(plus_one, *pt) == pytest.approx(-1.0, abs=1e-12)

    def test_ent_special(self):
        assert abs(residual_ent_special(SHANNON, 2, 3, 5)) <= 1e-11
        proj = make_projection(ID, LogFn.natural(), PsiFn.neg_x_log_x())
        assert abs(residual_ent_special(proj, 1, 1, 1)) <= 1e-15

    def test_ent_special_matches_modified(self):
        pts = draw(SampleSpec(1, 1000, 5), 3)
        for f in (SHANNON, make_projection(ID, LogFn([2.0]), PsiFn.neg_x_log_x())):
            a = residual_ent_special(f, pts[:, 0], pts[:, 1], pts[:, 2])
            b = residual_modified(f, ID, pts[:, 0], pts[:, 1], pts[:, 2])
            assert np.max(np.abs(a - b)) == 0.0

    def test_k_mismatch(self):
        f = make_one(PsiFn.neg_x_log_x(2))
        with pytest.raises(DimensionError):
            residual_entropy_classic(f, [1, 1], [1, 1], [1, 1])

    def test_strict_points_required(self):
        with pytest.raises(DomainError):
            residual_modified(SHANNON, ID, 0, 1, 1)

    def test_feim_examples(self):
        proj = HFn.projection(ID, LogFn.natural(), 0.0)
        assert abs(residual_feim(proj, ID, [0.2], [0.3])) <= 1e-12
        one = HFn.one(LogFn.natural(), 0.0)
        assert abs(residual_feim(one, MultFn.one(1), [0.25], [0.25])) <= 1e-12
        mu2 = MultFn.power([2.0])
        other = HFn.other(mu2, 1.0, 3.0)
        for pair in [(0.1, 0.2), (0.5, 0.3), (0.05, 0.9)]:
            assert abs(residual_feim(other, mu2, [pair[0]], [pair[1]])) <= 1e-12

    def test_feim_outside_d(self):
        with pytest.raises(DomainError):
            residual_feim(HFn.one(LogFn.natural(), 0.0), MultFn.one(1), [0.6], [0.5])

    def test_feim_wrong_mu_detected(self):
        proj = HFn.projection(ID, LogFn.natural(), 0.0)
        assert abs(residual_feim(proj, MultFn.power([2.0]), [0.2], [0.3])) > 1e-3


class TestReports:
    def test_report_fields(self):
        r = check_modified(SHANNON, ID, SampleSpec(1, 1000, 3))
        assert set(r.to_json()) == {
            "equation_id", "sample_count", "max_abs_residual", "mean_abs_residual",
            "argmax", "tolerance", "pass", "seed",
        }
        assert ResidualReport.from_json(r.to_json()) == r

    def test_argmax_reproduces_max(self):
        f = CaseOne(1, psi=PsiFn.expr("s[0]^2"))
        r = check_modified(f, MultFn.one(1), SampleSpec(1, 2000, 4))
        x, y, z = r.argmax
        assert abs(residual_modified(f, MultFn.one(1), x, y, z)) == r.max_abs_residual
        assert not r.passed

    def test_pass_iff_within_tolerance(self):
        pts = np.arange(10.0).reshape(10, 1)
        r = run_residuals("t", pts, lambda p: (p[:, 0] * 1e-10, np.ones(len(p))), 0, atol=1e-9, rtol=0)
        assert r.passed and r.max_abs_residual == pytest.approx(9e-10)
        r = run_residuals("t", pts, lambda p: (p[:, 0] * 1e-9, np.ones(len(p))), 0, atol=1e-9, rtol=0)
        assert not r.passed

    def test_ties_take_lowest_index(self):
        pts = np.arange(20000.0).reshape(-1, 1)
        r = run_residuals("t", pts, lambda p: (np.ones(len(p)), np.ones(len(p))), 0, threads=4)
        assert r.argmax == [0.0]

    def test_thread_count_invariance(self):
        spec = SampleSpec(2, 30000, 17)
        f = make_other(MultFn.power([1.5, -0.5]), 2.0, PsiFn.const(-2.0, 2))
        a = check_modified(f, spec=spec, threads=1)
        b = check_modified(f, spec=spec, threads=4)
        assert a == b


class TestChecks:
    def test_shannon_suite(self):
        spec = SampleSpec(1, 20000, 1)
        for r in (
            check_modified(SHANNON, spec=spec),
            check_entropy_classic(SHANNON, spec),
            check_ent_special(SHANNON, spec),
            check_symmetry(SHANNON, spec),
            check_homogeneity(SHANNON, 1, spec),
        ):
            assert r.passed, r

    def test_symmetry_failure(self):
        f = make_user("x[0]", 1)
        r = check_symmetry(f, SampleSpec(1, 100, 0))
        assert not r.passed
        assert abs(f(1, 2, 3) - f(2, 1, 3)) == 1.0

    def test_case_other_symmetric(self):
        f = make_other(MultFn.power([3.0]), -0.5, PsiFn.const(0.5))
        assert check_symmetry(f, SampleSpec(1, 5000, 2)).passed

    def test_homogeneity_degree(self):
        f = make_user("x[0]^2 + y[0]^2 + z[0]^2", 1)
        assert check_homogeneity(f, 2, SampleSpec(1, 1000, 0)).passed
        assert not check_homogeneity(f, 1, SampleSpec(1, 1000, 0)).passed

    def test_feim_bridge(self):
        spec = SampleSpec(2, 5000, 8)
        cases = [
            make_projection(MultFn.coordinate(0, 2), LogFn([1.0, 2.0]), PsiFn.neg_x_log_x(2)),
            make_one(PsiFn.linear([1.0, -1.0])),
            make_other(MultFn.power([0.5, 2.0]), 3.0, PsiFn.const(-3.0, 2)),
            make_zero_mu(LogFn([1.0, 1.0]), PsiFn.const(4.0, 2)),
        ]
        for f in cases:
            assert check_feim(derive_h(f), f.declared_mu(), spec).passed, f.case
            assert check_h_symmetry(derive_h(f), spec).passed


class TestAssociativity:
    def test_sum(self):
        res = check_associativity(bivariate_from_expr("x[0] + y[0]"), SampleSpec(1, 1000, 0))
        assert res.passed
        assert res.phi(np.array([[3.0]]))[0] == 3.0

    def test_product_fails(self):
        A = bivariate_from_expr("x[0]*y[0]")
        res = check_associativity(A, SampleSpec(1, 1000, 0))
        assert not res.passed and res.witness.found
        assert exchange_gap(A, [1.0], [2.0], [3.0]) == 5.0 - 8.0

    def test_exp_of_sum(self):
        A = bivariate_from_expr("exp(x[0] + y[0] + x[1] + y[1])", 2)
        assert check_associativity(A, SampleSpec(2, 1000, 0, hi=3.0)).passed

    def test_projection_fails(self):
        res = check_associativity(bivariate_from_expr("x[0]"), SampleSpec(1, 1000, 0))
        assert not res.passed
        x, y, z = res.witness.points
        assert abs(x[0] - y[0]) == pytest.approx(res.witness.violation)


class TestOracles:
    def test_mult_examples(self):
        mu = MultFn.power([1.0])
        assert abs(mu([0.25]) - mu([0.75])) == 0.5
        w = oracle_lemma_mult(mu, SampleSpec(1, 100, 0))
        assert w.found and w.violation > 0.1
        x = np.array(w.points[0])
        assert abs(mu(x) - mu(1 - x)) == w.violation

    def test_mult_no_witness(self):
        assert not oracle_lemma_mult(MultFn.one(1), SampleSpec(1, 1000, 0)).found
        assert not oracle_lemma_mult(MultFn.zero(2), SampleSpec(2, 1000, 0)).found

    def test_mult_vector(self):
        w = oracle_lemma_mult(MultFn.power([2.0, -1.0]), SampleSpec(2, 100, 0))
        assert w.found and w.violation > 1e-6

    def test_log_examples(self):
        l = LogFn([1.0])
        assert abs(l([0.2]) - l([0.8])) == pytest.approx(math.log(4), rel=1e-15)
        assert not oracle_lemma_log(LogFn([0.0]), SampleSpec(1, 100, 0)).found
        w = oracle_lemma_log(LogFn([1.0, -2.0]), SampleSpec(2, 100, 0))
        assert w.found
        x = np.array(w.points[0])
        assert abs(log_eval(LogFn([1.0, -2.0]), x) - log_eval(LogFn([1.0, -2.0]), 1 - x)) == w.violation

    def test_normalization_case_one(self):
        w = oracle_normalization("one", 1.0, SampleSpec(1, 200, 0))
        assert w.found and w.violation == pytest.approx(1.0, abs=1e-9)

    def test_normalization_projection_point(self):
        broken = CaseProjection(1, mu=ID, l=LogFn.natural(), psi=PsiFn.neg_x_log_x().shifted(1.0))
        assert abs(residual_modified(broken, ID, 1, 1, 1)) == pytest.approx(2.0, abs=1e-12)

    def test_normalization_zero_mu(self):
        w = oracle_normalization("zero_mu", 5.0, SampleSpec(2, 500, 0))
        assert not w.found

    def test_normalization_magnitude(self):
        spec = SampleSpec(2, 500, 1)
        for case in ("projection", "other"):
            w = oracle_normalization(case, 1e-3, spec)
            x, y, z = (np.array(p) for p in w.points)
            mu = {"projection": MultFn.coordinate(0, 2), "other": MultFn.power([2.0, 2.0])}[case]
            assert w.violation == pytest.approx(mult_eval(mu, y + z) * 1e-3, rel=1e-6)

    def test_delta_zero_rejected(self):
        with pytest.raises(ValueError):
            oracle_normalization("one", 0.0, SampleSpec(1, 10, 0))


class TestClassify:
    def test_shannon(self):
        c = classify(SHANNON)
        assert c.case == "projection"
        assert abs(c.params["alpha"][0] - 1) <= 1e-6
        assert c.params["base"] == pytest.approx(math.e, rel=1e-9)

    def test_shannon_base2(self):
        c = classify(make_shannon(2.0))
        assert c.params["base"] == pytest.approx(2.0, rel=1e-9)

    def test_case_one(self):
        assert classify(make_one(PsiFn.expr("ln(s[0])"))).case == "one"

    def test_zero_mu(self):
        c = classify(make_zero_mu(LogFn.natural(), PsiFn.const(2.0)))
        assert c.case == "zero_mu" and c.params["psi_at_one"] == pytest.approx(2.0)

    def test_other(self):
        c = classify(make_other(MultFn.power([3.0]), 2.0, PsiFn.const(-2.0)))
        assert c.case == "other"
        assert abs(c.params["alpha"][0] - 3) <= 1e-6 and abs(c.params["b"] - 2) <= 1e-6

    def test_callable_input(self):
        c = classify(lambda x, y, z: SHANNON(x, y, z))
        assert c.case == "projection"

    def test_unclassified(self):
        f = make_user("x[0]^2 + y[0]^2 + z[0]^2 + x[0]*y[0]*z[0]", 1)
        assert classify(f).case == "unclassified"

    def test_k1_only(self):
        with pytest.raises(DimensionError):
            classify(SHANNON, SampleSpec(2, 10, 0))
