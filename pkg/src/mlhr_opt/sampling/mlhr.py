"""Multi-criteria local Latin-hypercube refinement (MLHR).

One iteration: fit surrogates on D^k, cluster the current Pareto designs
into local boxes, draw an oversampled LHS pool inside the boxes, keep the
``batch`` candidates the GP ranks best, evaluate them for real and append
them to the dataset.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from ..optimizer.pareto import crowding_distance, ranks
from .cluster import cluster_boxes, select_radius
from .dataset import Dataset
from .gp import GpFitError, gp_fit
from .lhs import lhs_init
from .svr import SvrFitError, svr_fit

log = logging.getLogger(__name__)

POOL_FACTOR = 20
SVR_LAMBDA = 1.0
SVR_EPSILON = 1e-3
SVR_MAX_TRAIN = 120


@dataclass
class RefinementState:
    dataset: Dataset
    n_obj: int  # leading Y columns are objectives; the rest are constraint violations (0 = satisfied)
    pareto_idx: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    local_bounds: list = field(default_factory=list)  # [(lo, hi)] in the unit cube
    d_m: float = math.nan
    log: list = field(default_factory=list)  # one dict per iteration

    @property
    def k(self) -> int:
        return self.dataset.k

    def objectives(self) -> np.ndarray:
        return self.dataset.Y[:, : self.n_obj]

    def violations(self) -> np.ndarray:
        extra = self.dataset.Y[:, self.n_obj:]
        return np.maximum(extra, 0.0).sum(axis=1) if extra.shape[1] else np.zeros(self.dataset.m)


def pareto_indices(Y, n_obj: int) -> np.ndarray:
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    cv = np.maximum(Y[:, n_obj:], 0.0).sum(axis=1) if Y.shape[1] > n_obj else np.zeros(Y.shape[0])
    return np.flatnonzero(ranks(Y[:, :n_obj], cv) == 0)


def initial_state(dataset: Dataset, n_obj: int) -> RefinementState:
    st = RefinementState(dataset=dataset, n_obj=int(n_obj))
    st.pareto_idx = pareto_indices(dataset.Y, n_obj)
    return cluster_refine(st)


def cluster_refine(state: RefinementState, min_samples: int = 3) -> RefinementState:
    """Recompute the local boxes around the current Pareto designs."""
    if state.pareto_idx.size == 0:
        raise ValueError("pareto set is empty")
    P = state.dataset.X[state.pareto_idx]
    lower, upper = np.zeros(P.shape[1]), np.ones(P.shape[1])
    if P.shape[0] == 1:
        labels = np.zeros(1, dtype=np.int64)
        d_m = 1.0
    else:
        d_m, labels = select_radius(P, min_samples=min_samples)
    state.local_bounds = cluster_boxes(P, labels, lower, upper)
    state.d_m = float(d_m) if d_m > 0 else 1.0
    return state


@dataclass
class Surrogates:
    gps: list
    svrs: list

    def predict_gp(self, X) -> np.ndarray:
        return np.column_stack([g.predict(X) for g in self.gps])

    def predict_svr(self, X) -> np.ndarray:
        cols = [s.predict(X) if s is not None else np.full(np.atleast_2d(X).shape[0], np.nan) for s in self.svrs]
        return np.column_stack(cols)


def fit_surrogates(dataset: Dataset, previous: Surrogates | None = None, use_svr: bool = True,
                   n_starts: int = 8, seed=0) -> Surrogates:
    """One GP (standardised targets) and optionally one SVR per response column.

    With ``previous`` the GP hyperparameters are reused as the start point
    and only a single local search is run.
    """
    gps, svrs = [], []
    for j in range(dataset.Y.shape[1]):
        init = previous.gps[j].theta_h if previous is not None else None
        starts = 1 if previous is not None else n_starts
        gp = gp_fit(dataset.X, dataset.Y[:, j], init_theta=init, n_starts=starts, seed=seed, normalize_y=True)
        gps.append(gp)
        svr = None
        if use_svr:
            svr = _fit_svr(dataset, j, gp.theta_h)
        svrs.append(svr)
    return Surrogates(gps, svrs)


def _fit_svr(dataset, j, theta_gp):
    X, y = dataset.X, dataset.Y[:, j]
    if X.shape[0] > SVR_MAX_TRAIN:
        X, y = X[-SVR_MAX_TRAIN:], y[-SVR_MAX_TRAIN:]
    scale = float(np.std(y)) or 1.0
    try:
        s = svr_fit(X, (y - y.mean()) / scale, SVR_LAMBDA, SVR_EPSILON, np.maximum(theta_gp, 0.5))
    except SvrFitError as exc:
        log.info("svr fit skipped for output %d: %s", j, exc)
        return None
    # fold the target scaling back into the model
    return replace(s, c=s.c * scale, b=s.b * scale + float(y.mean()))


def box_pool(boxes, n_total: int, rng) -> np.ndarray:
    """LHS points spread over the boxes, about n_total / len(boxes) in each."""
    per = max(2, int(math.ceil(n_total / max(1, len(boxes)))))
    parts = []
    for lo, hi in boxes:
        U = lhs_init(per, lo.size, rng)
        parts.append(lo + U * (hi - lo))
    return np.vstack(parts)


def prescreen(candidates, predicted, reference, n_obj: int, batch: int, exclude=None, min_dist: float = 1e-9):
    """Indices of the ``batch`` candidates ranked best by predicted (constrained) dominance.

    Candidates are ranked together with the ``reference`` rows (true values of
    the current designs); ties inside a front go to the larger crowding
    distance. Candidates closer than ``min_dist`` to an ``exclude`` row or to
    an already chosen candidate are skipped.
    """
    if batch <= 0 or candidates.shape[0] == 0:
        return np.zeros(0, dtype=np.int64)
    both = np.vstack([reference, predicted]) if reference is not None and len(reference) else predicted
    n_ref = both.shape[0] - predicted.shape[0]
    cv = np.maximum(both[:, n_obj:], 0.0).sum(axis=1) if both.shape[1] > n_obj else None
    r = ranks(both[:, :n_obj], cv)
    crowd = np.zeros(both.shape[0])
    for k in np.unique(r):
        idx = np.flatnonzero(r == k)
        crowd[idx] = crowding_distance(both[idx, :n_obj])
    cand_r = r[n_ref:]
    cand_c = crowd[n_ref:]
    order = np.lexsort((np.arange(cand_r.size), -cand_c, cand_r))
    chosen = []
    taken = np.zeros((0, candidates.shape[1])) if exclude is None else np.asarray(exclude, dtype=float)
    for i in order:
        x = candidates[i]
        if taken.shape[0] and np.min(np.abs(taken - x).sum(axis=1)) <= min_dist:
            continue
        chosen.append(i)
        taken = np.vstack([taken, x])
        if len(chosen) == batch:
            break
    return np.asarray(chosen, dtype=np.int64)


def evaluate_batch(evaluator, X_phys, n_out: int, workers: int = 1):
    """Run the evaluator on each row; failed rows come back as None (and are logged)."""

    def one(i):
        try:
            y = np.asarray(evaluator(X_phys[i]), dtype=float).reshape(-1)
        except Exception as exc:  # evaluator errors are reported, never imputed
            log.warning("evaluation of candidate %d failed: %s", i, exc)
            return None
        if y.size != n_out or not np.all(np.isfinite(y)):
            log.warning("evaluation of candidate %d returned an invalid response", i)
            return None
        return y

    idx = range(X_phys.shape[0])
    if workers > 1 and X_phys.shape[0] > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(one, idx))
    return [one(i) for i in idx]


def mlhr_iterate(state: RefinementState, evaluator, batch: int, seed=None, *, workers: int = 1,
                 use_svr: bool = True, pool_factor: int = POOL_FACTOR,
                 surrogates: Surrogates | None = None) -> RefinementState:
    """Advance D^k to D^(k+1) with ``batch`` surrogate-picked, truly evaluated designs.

    ``evaluator`` maps a physical design vector to the full response row
    (objectives then constraint violations). Prediction errors of the
    surrogates on the new rows are appended to ``state.log``.
    """
    ds = state.dataset
    batch = int(batch)
    if batch < 0:
        raise ValueError("batch must be >= 0")
    if batch == 0:
        new_ds = Dataset(ds.X.copy(), ds.Y.copy(), ds.bounds.copy(), ds.k + 1)
        out = replace(state, dataset=new_ds, log=state.log + [{"k": ds.k + 1, "added": 0, "dropped": 0,
                                                               "gp_error": math.nan, "svr_error": math.nan}])
        return out
    rng = np.random.default_rng(seed)
    if not state.local_bounds:
        state = cluster_refine(state)
    if surrogates is None:
        try:
            surrogates = fit_surrogates(ds, use_svr=use_svr, seed=int(rng.integers(2**31)))
        except GpFitError:
            surrogates = None
    pool = box_pool(state.local_bounds, pool_factor * batch, rng)
    if surrogates is not None:
        pred = surrogates.predict_gp(pool)
        pick = prescreen(pool, pred, ds.Y[state.pareto_idx], state.n_obj, batch, exclude=ds.X)
    else:
        pick = np.arange(min(batch, pool.shape[0]))
    X_new = pool[pick]
    results = evaluate_batch(evaluator, ds.physical(X_new), ds.Y.shape[1], workers)
    ok = np.array([r is not None for r in results], dtype=bool)
    dropped = int((~ok).sum())
    X_ok = X_new[ok]
    Y_ok = np.array([r for r in results if r is not None]).reshape(-1, ds.Y.shape[1])
    gp_err = svr_err = math.nan
    if surrogates is not None and X_ok.shape[0]:
        no = state.n_obj
        gp_err = float(np.median(np.abs(surrogates.predict_gp(X_ok)[:, :no] - Y_ok[:, :no])))
        if use_svr:
            e = np.abs(surrogates.predict_svr(X_ok)[:, :no] - Y_ok[:, :no])
            svr_err = float(np.nanmedian(e)) if np.isfinite(e).any() else math.nan
    new_ds = ds.append(X_ok, Y_ok) if X_ok.shape[0] else Dataset(ds.X.copy(), ds.Y.copy(), ds.bounds.copy())
    new_ds.k = ds.k + 1
    entry = {"k": new_ds.k, "added": int(X_ok.shape[0]), "dropped": dropped, "gp_error": gp_err,
             "svr_error": svr_err}
    nxt = RefinementState(dataset=new_ds, n_obj=state.n_obj, log=state.log + [entry])
    nxt.pareto_idx = pareto_indices(new_ds.Y, state.n_obj)
    return cluster_refine(nxt)


def sensitivity_sweep(evaluator, variable: str, n_points: int, fixed):
    """One-at-a-time sweep of ``variable`` across its bounds; returns [(value, response)] ascending."""
    n_points = int(n_points)
    if n_points < 2:
        raise ValueError("need n_points >= 2")
    lo, hi = fixed.bounds[variable]
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ValueError(f"{variable} needs finite bounds")
    out = []
    for v in np.linspace(lo, hi, n_points):
        out.append((float(v), evaluator(replace(fixed, **{variable: float(v)}))))
    return out
