from __future__ import annotations

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from conftest import COEX, COEX_UNFIT2, FOUNDER, PLANAR_COEX, coexistence_params, model_params
from dormhgt import stability as sb
from dormhgt.errors import BoundaryCase, DegenerateCase, InapplicableError
from dormhgt.model import ModelParams, chain, coexistence_equilibrium
from dormhgt.ode import converge, rhs_full

TRANSFER_SWEEP = dict(C=1, mu=1, kappa=0, sigma=1, p=0.05)


def numeric_jacobian(params: ModelParams, state, h: float = 1e-6) -> np.ndarray:
    state = np.asarray(state, float)
    out = np.empty((3, 3))
    for j in range(3):
        e = np.zeros(3)
        e[j] = h
        out[:, j] = (rhs_full(params, state + e) - rhs_full(params, state - e)) / (2 * h)
    return out


def safe_classify(p: ModelParams):
    try:
        ch = chain(p)
    except InapplicableError:
        return None
    if ch.boundary:
        return None
    try:
        coexistence_equilibrium(p)
    except DegenerateCase:
        return None
    return sb.classify_equilibria(p)


class TestJacobian:
    def test_origin_diagonal(self):
        a = sb.jacobian(COEX, (0, 0, 0))
        expected = np.diag([COEX.lambda1 - COEX.mu, -COEX.dormant_outflow, COEX.lambda2 - COEX.mu])
        expected[0, 1] = COEX.sigma
        np.testing.assert_array_equal(a, expected)

    @given(model_params(), st.tuples(*[st.floats(0, 5)] * 3))
    def test_matches_finite_differences(self, p, state):
        a = sb.jacobian(p, state)
        assert a[2, 1] == 0
        np.testing.assert_allclose(a, numeric_jacobian(p, state), rtol=1e-6, atol=1e-6)

    @given(coexistence_params())
    def test_determinant_identity_at_coexistence(self, drawn):
        p, (n1a, n2) = drawn
        point = coexistence_equilibrium(p)
        assert point is not None
        assert (point[0], point[2]) == pytest.approx((n1a, n2), rel=1e-8)
        jac = sb.jacobian(p, point)
        _, _, det = sb.characteristic_coefficients(jac)
        expected = p.tau * point[0] * point[2] * (p.C * p.p * p.sigma - p.dormant_outflow * p.tau)
        # rounding in the entries moves det by about eps times the Hadamard bound
        hadamard = float(np.prod(np.linalg.norm(jac, axis=1)))
        assert det == pytest.approx(expected, rel=1e-8, abs=1e-12 * hadamard)
        assert np.trace(sb.jacobian(p, point)) < 0


class TestEigenvalues:
    @given(st.lists(st.floats(-10, 10), min_size=9, max_size=9))
    def test_match_numpy(self, entries):
        a = np.array(entries).reshape(3, 3)
        ref = np.linalg.eigvals(a)
        scale = max(1.0, np.abs(a).max())
        gaps = [abs(ref[i] - ref[j]) for i in range(3) for j in range(i)]
        # a double root is only determined to about sqrt(machine eps) by the polynomial
        tol = 1e-9 * scale if min(gaps) > 1e-3 * scale else 1e-5 * scale
        ours = np.array(sb.eigenvalues(a))
        for z in ref:
            assert np.min(np.abs(ours - z)) < tol

    def test_near_double_root_keeps_distinct_roots(self):
        a = np.array([[0.0, 1.0, 0.0], [1e-140, 0.0, 0.0], [0.0, 0.0, 1.5]])
        eigs = sb.eigenvalues(a)
        assert eigs[0] == pytest.approx(1.5)
        assert abs(eigs[1]) < 1e-12 and abs(eigs[2]) < 1e-12

    def test_one_real_root_without_cancellation(self):
        a = np.array([[0.0, -1e-5, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
        ref = np.linalg.eigvals(a)
        ours = np.array(sb.eigenvalues(a))
        for z in ref:
            assert np.min(np.abs(ours - z)) < 1e-12

    def test_sorted_by_real_part(self):
        eigs = sb.eigenvalues(np.diag([1.0, -3.0, 2.0]))
        assert [z.real for z in eigs] == pytest.approx([2, 1, -3])

    def test_labels(self):
        assert sb.eigen_label([-1, -2, -3]) == sb.STABLE
        assert sb.eigen_label([1, -2, -3]) == sb.UNSTABLE
        assert sb.eigen_label([0, -2, -3]) == sb.BOUNDARY


class TestClassify:
    def test_founder_control(self):
        labels = {k: v.label for k, v in sb.classify_equilibria(FOUNDER).items()}
        assert labels == {"origin": sb.UNSTABLE, "trait2": sb.STABLE, "trait1": sb.STABLE,
                          "coexistence": sb.UNSTABLE}

    def test_unfit_trait2_coexistence(self):
        res = sb.classify_equilibria(COEX_UNFIT2)
        assert res["trait1"].label == sb.UNSTABLE
        coex = res["coexistence"]
        assert coex.label == sb.INDETERMINATE
        assert coex.trace < 0 and coex.det < 0
        assert res["trait2"].label == sb.COINCIDES and res["trait2"].outside_orthant

    def test_trait2_at_threshold_coincides(self):
        p = COEX_UNFIT2.with_(lambda2=COEX_UNFIT2.mu)
        res = sb.classify_equilibria(p)
        assert res["trait2"].label == sb.COINCIDES
        assert res["trait2"].state == (0.0, 0.0, 0.0)

    def test_boundary_labels_everything(self):
        p = ModelParams(lambda1=3, lambda2=1, mu=1, C=1, p=0, kappa=0, sigma=1, tau=1)
        assert {v.label for v in sb.classify_equilibria(p).values()} == {sb.BOUNDARY}

    def test_dormancy_free_coexistence_is_stable(self):
        assert sb.classify_equilibria(PLANAR_COEX)["coexistence"].label == sb.STABLE

    def test_serializable(self):
        d = sb.classify_equilibria(COEX)["coexistence"].to_dict()
        assert d["label"] == sb.INDETERMINATE and len(d["eigenvalues"]) == 3

    @given(model_params())
    def test_table_consistency(self, p):
        res = safe_classify(p)
        assume(res is not None)
        expected = sb.expected_labels(p)
        for name, label in expected.items():
            got = res[name]
            if label in (sb.INDETERMINATE, sb.COINCIDES, sb.NONEXISTENT):
                assert got.label == label
            else:
                assert got.eigen_label == label, name

    @given(model_params())
    def test_origin_unstable(self, p):
        res = sb.classify_equilibria(p)
        assert res["origin"].eigen_label == sb.UNSTABLE

    @given(coexistence_params(founder=True))
    def test_founder_control_coexistence_has_positive_eigenvalue(self, drawn):
        p, _ = drawn
        assert chain(p).founder_control
        res = sb.classify_equilibria(p)
        assert max(z.real for z in res["coexistence"].eigenvalues) > 0

    @given(coexistence_params(founder=False))
    def test_strong_transfer_gives_stable_coexistence_chain(self, drawn):
        p, _ = drawn
        assert chain(p).stable_coexistence

    @given(model_params())
    def test_trait2_wins_implies_trait2_fit(self, p):
        ch = chain(p)
        if ch.fit2 > ch.middle and ch.middle < ch.fit1:
            assert p.lambda2 > p.mu

    @given(coexistence_params())
    def test_effective_competition_balance(self, drawn):
        p, _ = drawn
        n1a, _, n2 = coexistence_equilibrium(p)
        signed_n2 = (p.lambda2 - p.mu) / p.C
        assert p.C * signed_n2 == pytest.approx(p.C * (n1a + n2) - p.tau * n1a,
                                                abs=1e-10 * max(1.0, n1a, n2) * max(p.C, p.tau))


class TestRegime:
    def test_unfit_resident(self):
        assert sb.regime(COEX.with_(lambda1=0.9)) == sb.RESIDENT_UNFIT

    def test_coexistence_with_unfit_trait2(self):
        assert sb.regime(COEX_UNFIT2) == "III′"

    def test_founder_control(self):
        assert sb.regime(FOUNDER) == "I"

    def test_equal_births_and_transfer_equals_competition(self):
        p = ModelParams(lambda1=2, lambda2=2, mu=1, C=1, p=0.4, kappa=0.5, sigma=1, tau=1)
        ch = chain(p)
        assert ch.middle < ch.fit2 and ch.trait2_wins
        # the sub-label split lambda1 < lambda2 versus lambda1 > lambda2 is undecided
        assert sb.regime(p) == sb.BOUNDARY

    @pytest.mark.parametrize(
        "params,label",
        [
            (ModelParams(2, 1.5, 1, 1, 0.2, 0, 1, 0.5), "II′"),
            (ModelParams(3.1, 1.1, 1, 1, 0.5, 0, 1, 1), "III"),
            (ModelParams(3, 3, 1, 1, 0.5, 0, 1, 2).with_(lambda1=2.9), "IV"),
            (ModelParams(2, 1.9, 1, 1, 0.5, 0, 1, 2), "IV′"),
        ],
    )
    def test_sub_labels(self, params, label):
        assert sb.regime(params) == label

    @given(model_params(p_zero=False))
    def test_label_matches_chain(self, p):
        label = sb.regime(p)
        assume(label != sb.BOUNDARY)
        ch = chain(p)
        family = {"I": ch.founder_control, "II": ch.trait1_wins, "III": ch.stable_coexistence,
                  "IV": ch.trait2_wins}
        assert family[label.rstrip("′″")]
        if label.rstrip("′″") in ("II", "IV"):
            # unprimed labels mark the trait with the lower birth rate winning
            assert (p.lambda1 < p.lambda2) == (label in ("II", "IV"))


def planar_outcome(p: ModelParams) -> str:
    res = converge(p, "p0", (0.3, 0.3), t_cap=1e5)
    return res.label


class TestDormancyFree:
    def test_planar_coexistence(self):
        assert sb.dormancy_free_regime(PLANAR_COEX) == "stable-coexistence"

    def test_unfit_trait2_coexists(self):
        assert sb.dormancy_free_regime(ModelParams(5, 1, 2, 1, 0, 0, 1, 2)) == "stable-coexistence"

    def test_fast_transfer(self):
        p = ModelParams(3, 3.5, 1, 1, 0, 0, 1, 10)
        m = (1 / 10) * (3 - 3.5)
        assert 3.5 - 1 > m and 3 - 1 > m
        assert sb.dormancy_free_regime(p) == "fixation-2"

    @pytest.mark.parametrize(
        "params",
        [
            ModelParams(3, 3.5, 1, 1, 0, 0, 1, 10),
            ModelParams(3, 1.5, 1, 1, 0, 0, 1, 0.5),
            ModelParams(5, 3, 2, 1, 0, 0, 1, 1),
            ModelParams(2, 2.5, 1, 1, 0, 0, 1, 0.5),
        ],
    )
    def test_agrees_with_flow(self, params):
        label = sb.dormancy_free_regime(params)
        reached = planar_outcome(params)
        expected = {"stable-coexistence": "coexistence", "fixation-1": "trait1",
                    "fixation-2": "trait2"}[label]
        assert reached == expected

    def test_requires_zero_p(self):
        with pytest.raises(InapplicableError):
            sb.dormancy_free_regime(COEX)


class TestHgtFree:
    def test_equal_births(self):
        assert sb.hgt_free_regime(ModelParams(2, 2, 1, 1, 0.3, 0, 1, 0)) == "fixation-1"

    def test_dormancy_beats_faster_reproducer(self):
        p = ModelParams(3.1, 3.5, 1, 1, 0.5, 0, 1, 0)
        assert 0.5 * 2.5 * 1 / 1 > 0.4
        assert sb.hgt_free_regime(p) == "fixation-1"
        res = converge(p, "tau0", (0.2, 0.0, 0.2), t_cap=1e5)
        assert res.label == "trait1"

    def test_faster_reproducer_wins(self):
        p = ModelParams(2, 3.5, 1, 1, 0.2, 0, 1, 0)
        assert sb.hgt_free_regime(p) == "fixation-2"
        assert converge(p, "tau0", (0.2, 0.0, 0.2), t_cap=1e5).label == "trait2"

    def test_equality_is_boundary(self):
        # lambda2 - lambda1 == p (lambda2 - mu) sigma / (kappa mu + sigma)
        p = ModelParams(2, 2.5, 1, 1, 1 / 3, 0, 1, 0)
        assert sb.hgt_free_regime(p) == sb.BOUNDARY


class TestCriticalLines:
    def test_through_threshold_point(self):
        lines = sb.critical_lines(ModelParams(2, 2, **TRANSFER_SWEEP, tau=1.2))
        for line in (lines.mutant2, lines.mutant1):
            assert line.value(1.0, 1.0) == pytest.approx(0, abs=1e-14)

    @given(st.floats(0.2, 3.0), st.floats(1.5, 8.0))
    def test_mutant2_line_is_trait1_fitness_line(self, tau, l1):
        base = ModelParams(2, 2, **TRANSFER_SWEEP, tau=tau)
        try:
            lines = sb.critical_lines(base)
        except DegenerateCase:
            assume(False)
        for line, attr in ((lines.mutant2, "fit1"), (lines.mutant1, "fit2")):
            assume(line.b != 0)
            l2 = (line.c - line.a * l1) / line.b
            assume(l2 > 0)
            ch = chain(base.with_(lambda1=l1, lambda2=l2))
            assert ch.middle == pytest.approx(getattr(ch, attr), abs=1e-9)

    def test_slope_sign_flips_at_transfer_equal_competition(self):
        slopes = {}
        for tau in np.linspace(0.3, 3.0, 28):
            if abs(tau - 1.0) < 1e-9:
                continue
            lines = sb.critical_lines(ModelParams(2, 2, **TRANSFER_SWEEP, tau=float(tau)))
            slopes[float(tau)] = lines.mutant2.slope
            assert lines.mutant1.slope > 0
        for tau, slope in slopes.items():
            assert (slope < 0) == (tau > 1.0)

    def test_slopes_either_side_of_competition(self):
        steep = sb.critical_lines(ModelParams(2, 2, **TRANSFER_SWEEP, tau=1.2)).mutant2.slope
        k, a = 1 / 1.2, 0.05 / 1.2
        assert steep == pytest.approx((k - 1) / (k - a), rel=1e-14)
        assert steep < 0

    def test_degenerate(self):
        with pytest.raises(DegenerateCase):
            sb.critical_lines(ModelParams(2, 2, 1, 1, 0.1, 0, 0.9, 0.1))


class TestRegimeMap:
    grid1 = np.linspace(1.05, 8, 40)
    grid2 = np.linspace(0.05, 8, 45)

    def labels(self, tau):
        cells = sb.regime_map(ModelParams(2, 2, **TRANSFER_SWEEP, tau=tau), self.grid1, self.grid2)
        return cells

    def test_weak_transfer_has_no_unfit_coexistence(self):
        assert not any(label == "III′" for _, _, label in self.labels(0.8))

    def test_strong_transfer_has_unfit_coexistence(self):
        cells = [(l1, l2) for l1, l2, label in self.labels(1.2) if label == "III′"]
        assert cells and all(l2 < 1 for _, l2 in cells)

    def test_all_unfit(self):
        cells = sb.regime_map(COEX, [0.2, 0.5, 1.0], [0.5, 2])
        assert {label for *_, label in cells} == {sb.RESIDENT_UNFIT}
        assert len(cells) == 6
