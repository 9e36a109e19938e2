"""Tests for the dimension-adaptive refinement loop."""

import numpy as np
import pytest

from borefield_uq import adaptive as ad
from borefield_uq import sparse_grid as sg
from borefield_uq.exceptions import EvaluationError


def _quadratic(x):
    return x[0] ** 2 + x[1] ** 2


DOM2 = [[-1.0, 1.0], [-1.0, 1.0]]


class TestInitState:
    def test_root_only(self):
        state = ad.init_state(DOM2, _quadratic)
        assert state.interpolant.n_points == 1
        assert state.interpolant.index_set == ((1, 1),)
        assert state.evaluations == 1
        assert dict(state.active) == {(1, 1): 0.0}

    def test_center_of_shifted_domain(self):
        seen = []
        def f(x):
            seen.append(tuple(x))
            return 1.0
        ad.init_state([[2.0, 6.0], [0.0, 1.0]], f)
        assert seen == [(4.0, 0.5)]


class TestAdmissibleChildren:
    def test_from_root(self):
        state = ad.init_state(DOM2, _quadratic)
        kids = ad.admissible_children(state, (1, 1))
        assert kids == [(2, 1), (1, 2)]

    def test_blocked_by_missing_neighbor(self):
        state = ad.init_state(DOM2, _quadratic)
        state = ad.refine_step(state, _quadratic)   # refines (1, 1)
        # (1, 2) is active; refining it cannot add (2, 2) because (2, 1)
        # has not been refined
        probe = ad.AdaptiveState(
            state.interpolant, state.active, state.old | {(1, 2)},
            state.evaluations, state.config,
        )
        kids = ad.admissible_children(probe, (1, 2))
        assert (2, 2) not in kids and (1, 3) in kids

    def test_level_cap(self):
        cfg = ad.RefinementConfig(max_level_per_dim=2)
        state = ad.init_state(DOM2, _quadratic, cfg)
        state = ad.refine_step(state, _quadratic)
        # with both first-level indices refined, (2, 1) may spawn (2, 2)
        # but not (3, 1), which the level cap forbids
        probe_old = state.old | {(1, 2)}
        probe = ad.AdaptiveState(state.interpolant, state.active, probe_old,
                                 state.evaluations, cfg)
        assert ad.admissible_children(probe, (2, 1)) == [(2, 2)]


class TestRefineStep:
    def test_first_step_refines_root(self):
        state = ad.init_state(DOM2, _quadratic)
        state = ad.refine_step(state, _quadratic)
        assert state.old == {(1, 1)}
        assert set(dict(state.active)) == {(2, 1), (1, 2)}
        assert state.interpolant.n_points == 5
        assert state.evaluations == 5

    def test_tie_break_lexicographic(self):
        # both children of the root get indicator 1; the lexicographically
        # smaller index (1, 2) must be refined next
        state = ad.init_state(DOM2, _quadratic)
        state = ad.refine_step(state, _quadratic)
        state = ad.refine_step(state, _quadratic)
        assert state.history[-1].refined == (1, 2)

    def test_functional_update(self):
        s0 = ad.init_state(DOM2, _quadratic)
        s1 = ad.refine_step(s0, _quadratic)
        assert s0.interpolant.n_points == 1 and s1.interpolant.n_points == 5
        assert s0.old == frozenset()

    def test_failure_leaves_state_usable(self):
        calls = {"n": 0}
        def flaky(x):
            calls["n"] += 1
            if calls["n"] > 3:
                raise RuntimeError("boom")
            return float(x[0])
        state = ad.init_state(DOM2, flaky)
        with pytest.raises(EvaluationError):
            ad.refine_step(state, flaky)  # fails partway through the batch
        # the failed step must not have touched the input state
        assert state.interpolant.n_points == 1
        assert state.old == frozenset()
        assert dict(state.active) == {(1, 1): 0.0}

    def test_evaluation_error_carries_point(self):
        def bad(x):
            if abs(x[0] - 1.0) < 1e-12:
                raise RuntimeError("no")
            return 0.0
        state = ad.init_state(DOM2, bad)
        with pytest.raises(EvaluationError) as err:
            ad.refine_step(state, bad)
        assert err.value.point == (1.0, 0.0)

    def test_non_finite_value_rejected(self):
        def nanny(x):
            return float("nan") if x[0] > 0.5 else 0.0
        state = ad.init_state(DOM2, nanny)
        with pytest.raises(EvaluationError):
            ad.refine_step(state, nanny)


class TestRunAdaptive:
    def test_constant_stops_after_first_wave(self):
        calls = []
        def f(x):
            calls.append(tuple(x))
            return 7.0
        res = ad.run_adaptive(f, DOM2, ad.RefinementConfig(tolerance=1e-12))
        assert res.termination == "tolerance"
        assert res.global_error == 0.0
        assert res.interpolant.n_points == 5

    def test_quadratic_recovered_exactly(self):
        res = ad.run_adaptive(_quadratic, DOM2, ad.RefinementConfig(tolerance=1e-10))
        assert res.termination == "tolerance"
        xs = np.random.default_rng(0).uniform(-1, 1, (100, 2))
        got = sg.interpolant_eval_many(res.interpolant, xs)
        want = xs[0:, 0] ** 2 + xs[:, 1] ** 2
        assert np.abs(got - want).max() < 1e-12
        assert res.interpolant.n_points == 13

    def test_anisotropic_refinement(self):
        # steep in dim 0, almost flat in dim 1: refinement depth must
        # differ accordingly
        f = lambda x: x[0] ** 4 + 0.01 * x[1]
        res = ad.run_adaptive(f, DOM2, ad.RefinementConfig(tolerance=1e-6, max_points=200))
        levels = np.array(res.interpolant.index_set)
        assert levels[:, 0].max() > levels[:, 1].max()

    def test_budget_termination(self):
        f = lambda x: np.sin(5 * x[0]) * np.cos(5 * x[1])
        res = ad.run_adaptive(f, DOM2, ad.RefinementConfig(tolerance=0.0, max_points=30))
        assert res.termination == "budget"
        assert res.evaluations >= 30
        # overshoot is bounded by the last batch
        assert res.evaluations <= 30 + max(rec.new_points for rec in res.history)

    def test_exhausted_termination(self):
        f = lambda x: np.exp(x[0] + x[1])
        cfg = ad.RefinementConfig(tolerance=0.0, max_points=10_000, max_level_per_dim=2)
        res = ad.run_adaptive(f, DOM2, cfg)
        assert res.termination == "exhausted"
        assert res.interpolant.n_points == 9  # full 3x3 tensor grid

    def test_downward_closed_and_unique_evaluations(self):
        seen = {}
        def f(x):
            key = tuple(x)
            seen[key] = seen.get(key, 0) + 1
            return float(np.sin(3 * x[0]) + x[1] ** 2)
        res = ad.run_adaptive(f, DOM2, ad.RefinementConfig(tolerance=1e-4, max_points=400))
        assert max(seen.values()) == 1, "some point evaluated more than once"
        idx_set = set(res.interpolant.index_set)
        for idx in idx_set:
            for d in range(2):
                if idx[d] > 1:
                    parent = idx[:d] + (idx[d] - 1,) + idx[d + 1:]
                    assert parent in idx_set

    def test_deterministic_repeat(self):
        f = lambda x: np.sin(2.2 * x[0]) + 0.3 * x[1] ** 3
        cfg = ad.RefinementConfig(tolerance=1e-8, max_points=300)
        r1 = ad.run_adaptive(f, DOM2, cfg)
        r2 = ad.run_adaptive(f, DOM2, cfg)
        assert r1.interpolant.index_set == r2.interpolant.index_set
        assert (r1.interpolant.surpluses == r2.interpolant.surpluses).all()
        assert [rec.refined for rec in r1.history] == [rec.refined for rec in r2.history]

    def test_trace_csv(self, tmp_path):
        res = ad.run_adaptive(_quadratic, DOM2, ad.RefinementConfig(tolerance=1e-10))
        path = tmp_path / "trace.csv"
        ad.write_trace_csv(res.history, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0].startswith("step,refined_index")
        assert len(lines) == len(res.history) + 1
        assert lines[1].split(",")[1] == "1|1"


class TestConfigValidation:
    def test_bad_values(self):
        with pytest.raises(ValueError):
            ad.RefinementConfig(tolerance=-1.0)
        with pytest.raises(ValueError):
            ad.RefinementConfig(max_points=0)
        with pytest.raises(ValueError):
            ad.RefinementConfig(max_level_per_dim=0)
        with pytest.raises(ValueError):
            ad.RefinementConfig(max_level_per_dim=99)
