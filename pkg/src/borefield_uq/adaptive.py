"""Dimension-adaptive refinement of sparse-grid interpolants.

The classic greedy strategy over level multi-indices: keep an *active*
front of indices whose contribution has been measured but whose forward
neighbors have not, repeatedly refine the active index with the largest
indicator (the maximum absolute hierarchical surplus among the points it
introduced), and admit a forward neighbor once all of its backward
neighbors have been refined.  The sum of active indicators serves as the
global error estimate.

States are immutable; each refinement step returns a new state, so a
failed model evaluation leaves the previous state intact.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from . import sparse_grid as sg
from .exceptions import EvaluationError

DEFAULT_TOLERANCE = 1e-3
DEFAULT_MAX_POINTS = 3000
DEFAULT_MAX_LEVEL = 8


@dataclass(frozen=True)
class RefinementConfig:
    """Stopping rules for the adaptive loop.

    ``tolerance`` bounds the global error estimate, ``max_points`` the
    number of model evaluations (checked between steps, so the final
    batch may overshoot by its own size), and ``max_level_per_dim`` the
    one-dimensional resolution of any index.
    """

    tolerance: float = DEFAULT_TOLERANCE
    max_points: int = DEFAULT_MAX_POINTS
    max_level_per_dim: int = DEFAULT_MAX_LEVEL

    def __post_init__(self):
        if not (np.isfinite(self.tolerance) and self.tolerance >= 0.0):
            raise ValueError(f"tolerance must be >= 0, got {self.tolerance}")
        if self.max_points < 1:
            raise ValueError(f"max_points must be >= 1, got {self.max_points}")
        if not 1 <= self.max_level_per_dim <= sg.MAX_LEVEL:
            raise ValueError(
                f"max_level_per_dim must be in [1, {sg.MAX_LEVEL}], "
                f"got {self.max_level_per_dim}"
            )


@dataclass(frozen=True)
class StepRecord:
    """One refinement step, for the trace output."""

    step: int
    refined: tuple[int, ...]
    indicator: float
    children: tuple[tuple[int, ...], ...]
    new_points: int
    points_total: int
    global_error: float


@dataclass(frozen=True)
class AdaptiveState:
    """Snapshot of the refinement loop between steps."""

    interpolant: sg.SparseInterpolant
    active: tuple[tuple[tuple[int, ...], float], ...]
    old: frozenset
    evaluations: int
    config: RefinementConfig
    history: tuple[StepRecord, ...] = field(default=())

    @property
    def active_dict(self) -> dict:
        return dict(self.active)


def global_error(state: AdaptiveState) -> float:
    """Sum of the indicators of all active indices."""
    return float(sum(ind for _, ind in state.active))


def _call_evaluator(evaluator, x):
    try:
        v = float(evaluator(np.asarray(x, dtype=float)))
    except Exception as exc:
        raise EvaluationError(f"model evaluation failed: {exc}", point=x) from exc
    if not np.isfinite(v):
        raise EvaluationError(f"model returned non-finite value {v}", point=x)
    return v


def init_state(domain, evaluator, config: RefinementConfig | None = None,
               labels=None) -> AdaptiveState:
    """Start a refinement run from the single center point.

    The root index owns one collocation point (the domain center); its
    indicator is the absolute model value there, which makes the initial
    global error an estimate of the function's own magnitude until the
    root is refined.
    """
    if config is None:
        config = RefinementConfig()
    itp = sg.empty_interpolant(domain, labels=labels)
    root = (1,) * itp.dimension
    center = itp.from_reference(np.zeros(itp.dimension))
    value = _call_evaluator(evaluator, center)
    itp = sg.compute_surpluses(itp, root, [value])
    return AdaptiveState(
        interpolant=itp,
        active=((root, abs(value)),),
        old=frozenset(),
        evaluations=1,
        config=config,
    )


def admissible_children(state: AdaptiveState, index) -> list[tuple[int, ...]]:
    """Forward neighbors of ``index`` that may be added once it is refined.

    A child is admissible when every backward neighbor belongs to the
    refined (old) set, counting ``index`` itself as refined.  Children
    that would exceed ``max_level_per_dim`` are excluded.
    """
    index = tuple(index)
    d = state.interpolant.dimension
    refined = set(state.old) | {index}
    out = []
    for k in range(d):
        child = index[:k] + (index[k] + 1,) + index[k + 1:]
        if child[k] > state.config.max_level_per_dim:
            continue
        ok = True
        for j in range(d):
            if child[j] > 1:
                parent = child[:j] + (child[j] - 1,) + child[j + 1:]
                if parent not in refined:
                    ok = False
                    break
        if ok:
            out.append(child)
    return out


def refine_step(state: AdaptiveState, evaluator, map_fn=map) -> AdaptiveState:
    """Refine the most promising active index.

    Ties on the indicator are broken toward the lexicographically
    smallest index, which keeps runs reproducible.  The batch of new
    collocation points is pushed through ``map_fn`` (a parallel map may
    be substituted); each distinct point is evaluated exactly once.  A
    failing evaluation raises :class:`EvaluationError` carrying the
    offending physical point, and the input state is left unchanged.
    """
    if not state.active:
        raise ValueError("no active indices left to refine")
    best, best_ind = min(state.active, key=lambda kv: (-kv[1], kv[0]))

    remaining = [kv for kv in state.active if kv[0] != best]
    itp = state.interpolant
    old = frozenset(state.old | {best})
    evaluations = state.evaluations
    probe = AdaptiveState(itp, tuple(remaining), old, evaluations, state.config,
                          state.history)
    children = admissible_children(probe, best)

    added = []
    for child in sorted(children):
        ref_pts = sg.index_new_points(child)
        phys = itp.from_reference(ref_pts)
        vals = list(map_fn(partial(_call_evaluator, evaluator), [row for row in phys]))
        evaluations += len(vals)
        itp = sg.compute_surpluses(itp, child, np.asarray(vals, dtype=float))
        indicator = float(np.abs(itp.surpluses[-ref_pts.shape[0]:]).max())
        added.append((child, indicator))

    active = tuple(remaining) + tuple(added)
    err = float(sum(ind for _, ind in active))
    record = StepRecord(
        step=len(state.history) + 1,
        refined=best,
        indicator=float(best_ind),
        children=tuple(idx for idx, _ in added),
        new_points=evaluations - state.evaluations,
        points_total=itp.n_points,
        global_error=err,
    )
    return AdaptiveState(itp, active, old, evaluations, state.config,
                         state.history + (record,))


@dataclass(frozen=True)
class AdaptiveResult:
    """Outcome of :func:`run_adaptive`."""

    interpolant: sg.SparseInterpolant
    termination: str
    global_error: float
    evaluations: int
    history: tuple[StepRecord, ...]


def run_adaptive(evaluator, domain, config: RefinementConfig | None = None,
                 labels=None, map_fn=map) -> AdaptiveResult:
    """Run the adaptive loop to one of its stopping conditions.

    Returns
    -------
    AdaptiveResult
        With ``termination`` one of ``"tolerance"`` (global error at or
        below the requested tolerance), ``"budget"`` (evaluation budget
        exhausted), or ``"exhausted"`` (no admissible refinement left,
        typically because of the per-dimension level cap).
    """
    if config is None:
        config = RefinementConfig()
    state = init_state(domain, evaluator, config, labels=labels)
    while True:
        if not state.active:
            termination = "exhausted"
            break
        # the root indicator is just |f(center)|, so the tolerance test
        # is meaningful only once at least one step has run
        if state.history and global_error(state) <= config.tolerance:
            termination = "tolerance"
            break
        if state.evaluations >= config.max_points:
            termination = "budget"
            break
        state = refine_step(state, evaluator, map_fn=map_fn)
    return AdaptiveResult(
        interpolant=state.interpolant,
        termination=termination,
        global_error=global_error(state),
        evaluations=state.evaluations,
        history=state.history,
    )


def write_trace_csv(history, path) -> None:
    """Write refinement steps as CSV, one row per step."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "refined_index", "indicator", "children",
                    "new_points", "points_total", "global_error"])
        for rec in history:
            w.writerow([
                rec.step,
                "|".join(str(v) for v in rec.refined),
                repr(rec.indicator),
                ";".join("|".join(str(v) for v in c) for c in rec.children),
                rec.new_points,
                rec.points_total,
                repr(rec.global_error),
            ])
