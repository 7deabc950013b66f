"""NSGA-II with constrained dominance, an elitist archive and an optional MLHR sampler."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from ..sampling.cluster import cluster_boxes, select_radius
from ..sampling.gp import GpFitError, gp_fit
from ..sampling.lhs import lhs_init, lhs_optimize
from ..sampling.mlhr import box_pool, prescreen
from .pareto import crowding_distance, hypervolume, ranks
from .problems import Problem

log = logging.getLogger(__name__)

HISTORY_HEADER = "generation,true_evals,hypervolume,best_cost"


class OptimizerError(RuntimeError):
    """Evaluator failure; ``partial`` holds the result up to the failing generation."""

    def __init__(self, msg, partial=None):
        super().__init__(msg)
        self.partial = partial


@dataclass(frozen=True)
class Nsga2Config:
    pop_size: int = 100
    max_generations: int = 100
    p_crossover: float = 0.8
    p_mutation: float = 0.33
    elitism_rate: float = 0.55
    seed: int = 0
    eta_c: float = 15.0
    eta_m: float = 20.0
    lhs_iterations: int = 200
    # MLHR sampler
    batch: int = 10
    pool_factor: int = 20
    refit_every: int = 5
    max_train: int = 150
    target_hv: float | None = None  # stop early once the archive reaches it

    def __post_init__(self):
        if self.pop_size < 2 or self.pop_size % 2:
            raise ValueError("pop_size must be even and >= 2")
        if self.max_generations < 0:
            raise ValueError("max_generations must be >= 0")
        for name in ("p_crossover", "p_mutation", "elitism_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.batch < 1:
            raise ValueError("batch must be >= 1")

    @classmethod
    def from_dict(cls, data: dict) -> "Nsga2Config":
        known = {k: v for k, v in data.items() if k in cls.__dataclass_fields__}
        return cls(**known)


@dataclass
class ParetoFront:
    X: np.ndarray  # physical designs
    F: np.ndarray
    violations: np.ndarray  # (n, n_con)
    rank: np.ndarray
    crowding: np.ndarray
    generation: int

    def __len__(self):
        return self.X.shape[0]

    def to_dict(self) -> dict:
        def r(v):
            v = float(v)
            return v if not math.isfinite(v) else float(f"{v:.9g}")

        members = []
        for i in range(len(self)):
            members.append({
                "x": [r(v) for v in self.X[i]], "objectives": [r(v) for v in self.F[i]],
                "violations": [r(v) for v in self.violations[i]], "rank": int(self.rank[i]),
                "crowding": "inf" if math.isinf(self.crowding[i]) else r(self.crowding[i]),
            })
        return {"generation": int(self.generation), "members": members}

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


@dataclass
class HistoryRow:
    generation: int
    true_evals: int
    hypervolume: float
    best_cost: float


@dataclass
class Nsga2Result:
    front: ParetoFront
    history: list = field(default_factory=list)
    sampler: str = "plain"

    @property
    def true_evals(self) -> int:
        return self.history[-1].true_evals if self.history else 0

    def evals_to_reach(self, target: float):
        """True evaluations spent when the archive hypervolume first reached ``target`` (None if never)."""
        for h in self.history:
            if h.hypervolume >= target:
                return h.true_evals
        return None

    def generations_to_reach(self, target: float):
        for h in self.history:
            if h.hypervolume >= target:
                return h.generation
        return None

    def history_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(HISTORY_HEADER.split(","))
        for h in self.history:
            w.writerow([h.generation, h.true_evals, f"{h.hypervolume:.9g}", f"{h.best_cost:.9g}"])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


# ---------------------------------------------------------------- operators

def sbx(p1, p2, eta, rng):
    """Simulated binary crossover on the unit cube (bounded variant)."""
    c1, c2 = p1.copy(), p2.copy()
    for k in range(p1.size):
        if rng.random() > 0.5 or abs(p1[k] - p2[k]) < 1e-14:
            continue
        y1, y2 = min(p1[k], p2[k]), max(p1[k], p2[k])
        u = rng.random()
        beta = 1.0 + 2.0 * y1 / (y2 - y1)
        alpha = 2.0 - beta ** -(eta + 1.0)
        bq = (u * alpha) ** (1.0 / (eta + 1.0)) if u <= 1.0 / alpha else (1.0 / (2.0 - u * alpha)) ** (1.0 / (eta + 1.0))
        a = 0.5 * ((y1 + y2) - bq * (y2 - y1))
        beta = 1.0 + 2.0 * (1.0 - y2) / (y2 - y1)
        alpha = 2.0 - beta ** -(eta + 1.0)
        bq = (u * alpha) ** (1.0 / (eta + 1.0)) if u <= 1.0 / alpha else (1.0 / (2.0 - u * alpha)) ** (1.0 / (eta + 1.0))
        b = 0.5 * ((y1 + y2) + bq * (y2 - y1))
        a, b = min(max(a, 0.0), 1.0), min(max(b, 0.0), 1.0)
        if rng.random() <= 0.5:
            a, b = b, a
        c1[k], c2[k] = a, b
    return c1, c2


def polynomial_mutation(x, eta, p_var, rng):
    """Each variable mutates with probability ``p_var``."""
    y = x.copy()
    for k in range(x.size):
        if rng.random() >= p_var:
            continue
        u = rng.random()
        d1, d2 = y[k], 1.0 - y[k]
        mp = 1.0 / (eta + 1.0)
        if u < 0.5:
            val = 2.0 * u + (1.0 - 2.0 * u) * (1.0 - d1) ** (eta + 1.0)
            dq = val**mp - 1.0
        else:
            val = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * (1.0 - d2) ** (eta + 1.0)
            dq = 1.0 - val**mp
        y[k] = min(max(y[k] + dq, 0.0), 1.0)
    return y


def _rank_and_crowd(F, cv):
    r = ranks(F, cv)
    crowd = np.zeros(F.shape[0])
    for k in np.unique(r):
        idx = np.flatnonzero(r == k)
        crowd[idx] = crowding_distance(F[idx])
    return r, crowd


def _tournament(r, crowd, rng, n):
    picks = np.empty(n, dtype=np.int64)
    size = r.size
    for i in range(n):
        a, b = rng.integers(0, size, 2)
        if r[a] != r[b]:
            picks[i] = a if r[a] < r[b] else b
        elif crowd[a] != crowd[b]:
            picks[i] = a if crowd[a] > crowd[b] else b
        else:
            picks[i] = min(a, b)
    return picks


def make_offspring(X, F, cv, cfg: Nsga2Config, rng, n: int):
    r, crowd = _rank_and_crowd(F, cv)
    parents = _tournament(r, crowd, rng, n + (n % 2))
    kids = []
    for i in range(0, parents.size, 2):
        p1, p2 = X[parents[i]], X[parents[i + 1]]
        if rng.random() < cfg.p_crossover:
            c1, c2 = sbx(p1, p2, cfg.eta_c, rng)
        else:
            c1, c2 = p1.copy(), p2.copy()
        kids.append(polynomial_mutation(c1, cfg.eta_m, cfg.p_mutation, rng))
        kids.append(polynomial_mutation(c2, cfg.eta_m, cfg.p_mutation, rng))
    return np.array(kids[:n])


def _fill(idx, F, cv, k):
    """Standard NSGA-II truncation: whole fronts first, then largest crowding distance."""
    if k <= 0:
        return np.zeros(0, dtype=np.int64)
    idx = np.asarray(idx)
    r, crowd = _rank_and_crowd(F[idx], cv[idx])
    order = np.lexsort((np.arange(idx.size), -crowd, r))
    return idx[order[:k]]


def survive(F, cv, n_parents: int, pop_size: int, elitism_rate: float):
    """Indices of the next population from a pool whose first ``n_parents`` rows are the parents.

    The best ceil(elitism_rate * pop_size) parents (by rank and crowding) are
    kept first; the remaining places are filled from the rest of the pool
    with the usual front-by-front rule.
    """
    n_elite = min(n_parents, int(math.ceil(elitism_rate * pop_size)))
    elite = _fill(np.arange(n_parents), F, cv, n_elite)
    rest = np.setdiff1d(np.arange(F.shape[0]), elite)
    fill = _fill(rest, F, cv, pop_size - elite.size)
    return np.concatenate([elite, fill])


# ---------------------------------------------------------------- driver

class _Archive:
    """Every feasible non-dominated true evaluation seen so far."""

    def __init__(self, n_obj):
        self.X = np.zeros((0, 0))
        self.F = np.zeros((0, n_obj))
        self.V = None
        self.generation = 0

    def update(self, X, F, V, generation):
        feas = V.sum(axis=1) <= 0 if V.shape[1] else np.ones(F.shape[0], dtype=bool)
        if not feas.any():
            return
        X, F, V = X[feas], F[feas], V[feas]
        if self.X.size == 0:
            allX, allF, allV = X, F, V
        else:
            allX, allF, allV = np.vstack([self.X, X]), np.vstack([self.F, F]), np.vstack([self.V, V])
        keep = ranks(allF) == 0
        # drop exact duplicates so the archive does not grow with repeats
        _, first = np.unique(np.round(allF[keep], 15), axis=0, return_index=True)
        sel = np.flatnonzero(keep)[np.sort(first)]
        old_n = self.F.shape[0]
        changed = not (sel.size == old_n and np.array_equal(sel, np.arange(old_n)))
        self.X, self.F, self.V = allX[sel], allF[sel], allV[sel]
        if changed:
            self.generation = generation


def _evaluate(problem: Problem, X_unit, workers: int):
    lo, hi = problem.lower, problem.upper
    X_phys = lo + X_unit * (hi - lo)

    def one(x):
        return problem.response(x)

    if workers > 1 and X_phys.shape[0] > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            rows = list(ex.map(one, X_phys))
    else:
        rows = [one(x) for x in X_phys]
    Y = np.array(rows, dtype=float).reshape(X_phys.shape[0], -1)
    if not np.all(np.isfinite(Y)):
        raise ValueError("evaluator returned non-finite values")
    return Y


def _best_cost(F):
    """Smallest sum of objectives over the archive (the scalarised f = f1 + f2)."""
    return float(F.sum(axis=1).min()) if F.shape[0] else math.nan


def _front_from(archive, X, F, V, lo, hi, generation):
    if archive.F.shape[0]:
        Xa, Fa, Va = archive.X, archive.F, archive.V
        return ParetoFront(lo + Xa * (hi - lo), Fa.copy(), Va.copy(), np.zeros(Fa.shape[0], dtype=np.int64),
                           crowding_distance(Fa), archive.generation)
    cv = V.sum(axis=1) if V.shape[1] else np.zeros(F.shape[0])
    r = ranks(F, cv)
    idx = np.flatnonzero(r == 0)
    return ParetoFront(lo + X[idx] * (hi - lo), F[idx].copy(), V[idx].copy(), r[idx], crowding_distance(F[idx]),
                       generation)


def nsga2_run(problem: Problem, cfg: Nsga2Config, sampler: str = "plain", workers: int = 1) -> Nsga2Result:
    """Run NSGA-II; ``sampler`` is ``"plain"`` (LHS start, full offspring evaluation) or ``"mlhr"``.

    With ``"mlhr"`` each generation builds a candidate pool from the usual
    offspring plus LHS points inside cluster boxes around the archive,
    screens it with GP surrogates trained on every true evaluation so far,
    and evaluates only ``cfg.batch`` candidates for real.
    """
    if sampler not in ("plain", "mlhr"):
        raise ValueError("sampler must be 'plain' or 'mlhr'")
    rng = np.random.default_rng(cfg.seed)
    n_var, n_obj = problem.n_var, problem.n_obj
    lo, hi = problem.lower, problem.upper
    X = lhs_init(cfg.pop_size, n_var, rng)
    if cfg.lhs_iterations:
        X = lhs_optimize(X, cfg.lhs_iterations, rng)
    archive = _Archive(n_obj)
    history: list[HistoryRow] = []
    evals = 0

    def partial(gen, X, F, V):
        return Nsga2Result(_front_from(archive, X, F, V, lo, hi, gen), list(history), sampler)

    try:
        Y = _evaluate(problem, X, workers)
    except Exception as exc:
        raise OptimizerError(f"evaluation failed in the initial population: {exc}",
                             Nsga2Result(ParetoFront(np.zeros((0, n_var)), np.zeros((0, n_obj)),
                                                     np.zeros((0, problem.n_con)), np.zeros(0, dtype=np.int64),
                                                     np.zeros(0), 0), [], sampler)) from exc
    evals += X.shape[0]
    F, V = Y[:, :n_obj], Y[:, n_obj:]
    archive.update(X, F, V, 0)
    data_X, data_Y = X.copy(), Y.copy()

    def record(gen):
        hv = hypervolume(archive.F, problem.ref_point) if archive.F.shape[0] else 0.0
        history.append(HistoryRow(gen, evals, hv, _best_cost(archive.F)))
        return hv

    hv = record(0)
    models = None
    for gen in range(1, cfg.max_generations + 1):
        if cfg.target_hv is not None and hv >= cfg.target_hv:
            break
        cv = V.sum(axis=1) if V.shape[1] else np.zeros(F.shape[0])
        if sampler == "plain":
            Q = make_offspring(X, F, cv, cfg, rng, cfg.pop_size)
        else:
            Q, models = _mlhr_candidates(X, F, V, cv, archive, data_X, data_Y, n_obj, cfg, rng, gen, models)
        try:
            YQ = _evaluate(problem, Q, workers)
        except Exception as exc:
            raise OptimizerError(f"evaluation failed in generation {gen}: {exc}", partial(gen - 1, X, F, V)) from exc
        evals += Q.shape[0]
        data_X, data_Y = np.vstack([data_X, Q]), np.vstack([data_Y, YQ])
        pool_X = np.vstack([X, Q])
        pool_F = np.vstack([F, YQ[:, :n_obj]])
        pool_V = np.vstack([V, YQ[:, n_obj:]])
        pool_cv = pool_V.sum(axis=1) if pool_V.shape[1] else np.zeros(pool_F.shape[0])
        keep = survive(pool_F, pool_cv, X.shape[0], cfg.pop_size, cfg.elitism_rate)
        X, F, V = pool_X[keep], pool_F[keep], pool_V[keep]
        archive.update(Q, YQ[:, :n_obj], YQ[:, n_obj:], gen)
        hv = record(gen)
    last = history[-1].generation
    return Nsga2Result(_front_from(archive, X, F, V, lo, hi, last), history, sampler)


def _training_rows(data_X, data_Y, n_obj, max_train):
    """The newest ``max_train`` rows plus every non-dominated row, capped at ``max_train``."""
    m = data_X.shape[0]
    if m <= max_train:
        return np.arange(m)
    cv = np.maximum(data_Y[:, n_obj:], 0).sum(axis=1) if data_Y.shape[1] > n_obj else None
    front = np.flatnonzero(ranks(data_Y[:, :n_obj], cv) == 0)
    if front.size >= max_train:
        return front[np.linspace(0, front.size - 1, max_train).astype(int)]
    recent = np.setdiff1d(np.arange(m - max_train, m), front)
    idx = np.concatenate([front, recent[-(max_train - front.size):]])
    return np.sort(idx)


def _fit_models(Xt, Yt, previous, refit, seed):
    models = []
    for j in range(Yt.shape[1]):
        y = Yt[:, j]
        if previous is not None and not refit:
            p = previous[j]
            models.append(gp_fit(Xt, y, init_theta=p.theta_h, init_sigma2=p.sigma2, optimize=False, normalize_y=True))
        else:
            init = previous[j].theta_h if previous is not None else None
            starts = 2 if previous is not None else 4
            models.append(gp_fit(Xt, y, init_theta=init, n_starts=starts, seed=seed, normalize_y=True,
                                 max_evals=200))
    return models


def _mlhr_candidates(X, F, V, cv, archive, data_X, data_Y, n_obj, cfg, rng, gen, models):
    offspring = make_offspring(X, F, cv, cfg, rng, cfg.pop_size)
    if archive.X.shape[0]:
        P = archive.X
    else:
        P = X[ranks(F, cv) == 0]
    if P.shape[0] > 1:
        _, labels = select_radius(P)
    else:
        labels = np.zeros(P.shape[0], dtype=np.int64)
    boxes = cluster_boxes(P, labels, np.zeros(X.shape[1]), np.ones(X.shape[1]))
    local = box_pool(boxes, cfg.pool_factor * cfg.batch, rng)
    cand = np.vstack([offspring, local])
    rows = _training_rows(data_X, data_Y, n_obj, cfg.max_train)
    refit = models is None or (gen - 1) % cfg.refit_every == 0
    try:
        models = _fit_models(data_X[rows], data_Y[rows], models, refit, int(rng.integers(2**31)))
    except GpFitError as exc:
        log.info("surrogate fit failed in generation %d (%s); falling back to offspring", gen, exc)
        return offspring[: cfg.batch], None
    pred = np.column_stack([m.predict(cand) for m in models])
    ref = np.hstack([F, V])
    ref = ref[cv <= 0] if np.any(cv <= 0) else ref
    pick = prescreen(cand, pred, ref, n_obj, cfg.batch, exclude=data_X)
    if pick.size < cfg.batch:
        extra = np.setdiff1d(np.arange(cand.shape[0]), pick)[: cfg.batch - pick.size]
        pick = np.concatenate([pick, extra])
    return cand[pick], models


def config_dict(cfg: Nsga2Config) -> dict:
    return asdict(cfg)
