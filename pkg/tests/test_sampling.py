import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mlhr_opt.motor import REFERENCE_DESIGN, evaluate_design
from mlhr_opt.sampling.cluster import (
    cluster_boxes,
    dbscan,
    n_clusters,
    pairwise_distances,
    select_radius,
)
from mlhr_opt.sampling.dataset import Dataset
from mlhr_opt.sampling.gp import GpFitError, _factor, gp_fit, gp_predict, log_likelihood
from mlhr_opt.sampling.kernel import se_kernel
from mlhr_opt.sampling.lhs import is_latin, lhs_init, lhs_optimize, phi_p
from mlhr_opt.sampling.mlhr import (
    cluster_refine,
    initial_state,
    mlhr_iterate,
    pareto_indices,
    prescreen,
    sensitivity_sweep,
)
from mlhr_opt.sampling.svr import SvrFitError, svr_fit
from mlhr_opt.trajectory import max_torque_at_speed


def zdt(x):
    f1 = x[0]
    g = 1 + 9 * np.mean(x[1:])
    return np.array([f1, g * (1 - np.sqrt(f1 / g))])


# ---------------------------------------------------------------- LHS

@pytest.mark.parametrize("n", [2, 10, 100])
@pytest.mark.parametrize("dims", [1, 8])
def test_lhs_stratification(n, dims):
    for seed in range(5):
        X = lhs_init(n, dims, seed)
        assert X.shape == (n, dims)
        for col in X.T:
            strata = np.floor(col * n).astype(int)
            assert sorted(strata) == list(range(n))


def test_lhs_two_samples_one_per_half():
    X = lhs_init(2, 1, 3)
    s = np.sort(X[:, 0])
    assert 0 <= s[0] < 0.5 <= s[1] < 1


def test_lhs_deterministic_and_preconditions():
    assert np.array_equal(lhs_init(100, 8, 11), lhs_init(100, 8, 11))
    with pytest.raises(ValueError, match="n >= 2"):
        lhs_init(1, 3, 0)
    with pytest.raises(ValueError):
        lhs_init(5, 0, 0)


def test_phi_two_samples():
    assert phi_p(np.array([[0.0], [1.0]]), p=50) == pytest.approx(1.0, rel=1e-15)
    assert phi_p(np.array([[0.0], [1.0]]), p=3) == pytest.approx(1.0, rel=1e-15)
    assert phi_p(np.array([[0.0], [2.0]]), p=50) == pytest.approx(0.5, rel=1e-14)


def _phi_exact(dists, p):
    s = sum(Fraction(d).limit_denominator(10**6) ** -p for d in dists)
    return float(s) ** (1.0 / p)


def test_phi_three_samples_hand():
    X = np.array([[0.0], [0.4], [1.0]])
    # (0.4^-2 + 0.6^-2 + 1) = 361/36, so the score is 19/6
    assert phi_p(X, p=2, t=1) == pytest.approx(19 / 6, rel=1e-14)
    assert phi_p(X, p=50, t=1) == pytest.approx(_phi_exact(["0.4", "0.6", "1"], 50), rel=1e-13)


def test_phi_t2_uses_euclidean_distance():
    X = np.array([[0.0, 0.0], [0.3, 0.4]])
    assert phi_p(X, p=50, t=2) == pytest.approx(1 / 0.5, rel=1e-14)
    assert phi_p(X, p=50, t=1) == pytest.approx(1 / 0.7, rel=1e-14)


def test_phi_duplicates_are_infinite():
    assert math.isinf(phi_p(np.array([[0.2, 0.2], [0.2, 0.2], [0.9, 0.1]])))


def test_phi_preconditions():
    with pytest.raises(ValueError):
        phi_p(np.array([[0.5]]))
    with pytest.raises(ValueError):
        phi_p(np.array([[0.0], [1.0]]), p=0.5)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000))
def test_phi_permutation_invariant_and_monotone(seed):
    rng = np.random.default_rng(seed)
    X = rng.random((6, 3))
    base = phi_p(X)
    assert phi_p(X[rng.permutation(6)]) == pytest.approx(base, rel=1e-12)
    # pushing one 1-D sample away from all others increases every distance to it
    Y = np.array([[0.0], [0.3], [0.5]])
    Z = np.array([[0.0], [0.3], [0.5 + 0.1 * rng.random() + 1e-3]])
    assert phi_p(Z, p=5) < phi_p(Y, p=5)


def test_lhs_optimize_trace_monotone_and_latin():
    X0 = lhs_init(10, 2, 4)
    X1, trace = lhs_optimize(X0, 500, seed=4, return_trace=True)
    assert trace.size == 500
    assert np.all(np.diff(trace) <= 0)
    assert trace[-1] == pytest.approx(phi_p(X1), rel=1e-12)
    assert phi_p(X1) <= phi_p(X0)
    assert is_latin(X1)
    for j in range(2):
        assert np.array_equal(np.sort(X1[:, j]), np.sort(X0[:, j]))


def test_lhs_optimize_improves_on_average():
    before, after = [], []
    for seed in range(20):
        X0 = lhs_init(20, 3, seed)
        before.append(phi_p(X0))
        after.append(phi_p(lhs_optimize(X0, 300, seed)))
    assert np.mean(after) < np.mean(before)


def test_lhs_optimize_two_samples_unchanged_score():
    X0 = np.array([[0.1], [0.9]])
    X1 = lhs_optimize(X0, 50, 0)
    assert phi_p(X1) == phi_p(X0)


# ---------------------------------------------------------------- GP

def test_gp_hand_alpha_two_points():
    X = np.array([[0.0], [1.0]])
    y = np.array([0.0, 1.0])
    theta, sigma2 = 2.0, 1.5
    s = gp_fit(X, y, init_theta=[theta], init_sigma2=sigma2, optimize=False)
    k = sigma2 * math.exp(-theta)
    det = sigma2 * sigma2 - k * k
    alpha = np.array([(sigma2 * 0 - k * 1) / det, (-k * 0 + sigma2 * 1) / det])
    np.testing.assert_allclose(s.alpha, alpha, rtol=1e-12)


def test_gp_interpolates_training_points():
    rng = np.random.default_rng(1)
    X = rng.random((15, 3))
    y = np.sin(4 * X[:, 0]) + X[:, 1] * X[:, 2]
    s = gp_fit(X, y)
    assert s.jitter == 0.0
    assert np.max(np.abs(gp_predict(s, X) - y)) < 1e-8


def test_gp_constant_data():
    X = np.array([[0.1], [0.4], [0.8]])
    s = gp_fit(X, np.full(3, 2.5), normalize_y=True)
    np.testing.assert_allclose(s.predict(X), 2.5, atol=1e-12)
    np.testing.assert_allclose(s.predict(np.array([[0.2], [0.6]])), 2.5, atol=1e-12)


def test_gp_prediction_linear_in_targets():
    rng = np.random.default_rng(2)
    X = rng.random((12, 2))
    y1, y2 = rng.normal(size=12), rng.normal(size=12)
    kw = dict(init_theta=[3.0, 1.0], init_sigma2=1.0, optimize=False)
    s1, s2, s12 = gp_fit(X, y1, **kw), gp_fit(X, y2, **kw), gp_fit(X, y1 + y2, **kw)
    P = rng.random((30, 2))
    np.testing.assert_allclose(s12.predict(P), s1.predict(P) + s2.predict(P), atol=1e-10)


def test_gp_likelihood_not_worse_after_fit():
    for seed in range(50):
        rng = np.random.default_rng(seed)
        m, n = rng.integers(4, 15), rng.integers(1, 4)
        X = rng.random((m, n))
        y = np.cos(3 * X.sum(axis=1)) + 0.1 * rng.normal(size=m)
        s = gp_fit(X, y, n_starts=3, seed=seed)
        assert s.log_likelihood >= s.init_log_likelihood
        assert s.log_likelihood == pytest.approx(log_likelihood(X, y, s.theta_h, s.sigma2), rel=1e-12)


def test_gp_sine_against_dense_solve():
    X = np.linspace(0, 1, 10)[:, None]
    y = np.sin(2 * np.pi * X[:, 0])
    s = gp_fit(X, y)
    P = np.linspace(0, 1, 101)[:, None]
    C = se_kernel(X, X, s.theta_h, s.sigma2)
    oracle = se_kernel(P, X, s.theta_h, s.sigma2) @ np.linalg.solve(C, y)
    np.testing.assert_allclose(s.predict(P), oracle, atol=1e-6)
    truth = np.sin(2 * np.pi * P[:, 0])
    # untrained baseline: the zero prior mean
    assert np.max(np.abs(s.predict(P) - truth)) < np.max(np.abs(truth))
    assert np.max(np.abs(s.predict(P) - truth)) < 1e-3


def test_gp_duplicate_rows():
    X = np.array([[0.2], [0.2], [0.7]])
    y = np.array([1.0, 1.0, 0.0])
    s = gp_fit(X, y, sigma_eps=1e-3)
    assert np.all(np.isfinite(s.predict(X)))
    exact = gp_fit(X, y, init_theta=[1.0], init_sigma2=1.0, optimize=False)
    assert exact.jitter > 0
    with pytest.raises(GpFitError):
        _factor(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_gp_dataset_input_and_json():
    X = lhs_init(8, 2, 0)
    Y = np.column_stack([X.sum(axis=1), X[:, 0] * X[:, 1]])
    ds = Dataset(X, Y, np.array([[0, 1], [0, 1]]))
    s = gp_fit(ds, output=1, n_starts=2)
    np.testing.assert_allclose(s.predict(X), Y[:, 1], atol=1e-8)
    assert '"theta_h"' in s.to_json()


# ---------------------------------------------------------------- SVR

def test_svr_flat_data_zero_coefficients():
    X = np.linspace(0, 1, 6)[:, None]
    y = 3.0 + 0.004 * np.sin(7 * X[:, 0])
    s = svr_fit(X, y, lambda_pen=10.0, epsilon=0.01, theta_h=2.0)
    assert np.all(s.c == 0.0)
    assert np.all(np.abs(y - s.b) <= 0.01 + 1e-12)
    assert np.all(s.zeta_u == 0) and np.all(s.zeta_l == 0)


def test_svr_near_interpolation_two_points():
    X = np.array([[0.0], [1.0]])
    y = np.array([0.3, -0.5])
    s = svr_fit(X, y, lambda_pen=1e4, epsilon=0.0, theta_h=1.0)
    assert np.max(np.abs(s.predict(X) - y)) <= 1e-3


def _qp_oracle(X, y, lam, eps, theta):
    cp = pytest.importorskip("cvxpy")
    m = y.size
    K = se_kernel(X, X, np.full(X.shape[1], theta))
    c, b = cp.Variable(m), cp.Variable()
    zu, zl = cp.Variable(m), cp.Variable(m)
    f = K @ c + b
    prob = cp.Problem(cp.Minimize(0.5 * cp.sum_squares(c) + lam * cp.sum(zu + zl)),
                      [y - f <= eps + zl, f - y <= eps + zu, zu >= 0, zl >= 0])
    prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-12, tol_gap_rel=1e-12, tol_feas=1e-12)
    return prob.value


@pytest.mark.parametrize("seed", range(5))
def test_svr_objective_matches_qp_oracle(seed):
    rng = np.random.default_rng(seed)
    X = rng.random((5, 2))
    y = np.sin(3 * X[:, 0]) + X[:, 1] ** 2
    s = svr_fit(X, y, 5.0, 0.05, 2.0)
    assert s.objective == pytest.approx(_qp_oracle(X, y, 5.0, 0.05, 2.0), abs=1e-5)
    assert s.kkt_residual <= 1e-6


def test_svr_kkt_and_slack_invariants():
    rng = np.random.default_rng(7)
    X = rng.random((40, 3))
    y = np.sin(3 * X[:, 0]) + X[:, 1] + 0.05 * rng.normal(size=40)
    s = svr_fit(X, y, lambda_pen=2.0, epsilon=0.02, theta_h=1.5)
    assert s.kkt_residual <= 1e-6
    assert np.all(s.zeta_u >= 0) and np.all(s.zeta_l >= 0)
    r = np.abs(y - s.predict(X))
    assert np.all(r <= 0.02 + np.maximum(s.zeta_u, s.zeta_l) + 1e-8)
    assert abs(s.dual.sum()) <= 1e-9


def test_svr_errors():
    X = np.array([[0.0], [1.0]])
    with pytest.raises(ValueError):
        svr_fit(X, [0, 1], lambda_pen=0.0)
    with pytest.raises(ValueError):
        svr_fit(X, [0, 1], epsilon=-1.0)
    rng = np.random.default_rng(0)
    X = rng.random((30, 2))
    with pytest.raises(SvrFitError):
        svr_fit(X, rng.normal(size=30), lambda_pen=100.0, epsilon=0.0, theta_h=1.0, max_iter=3)


# ---------------------------------------------------------------- clustering

def test_dbscan_matches_sklearn():
    sk = pytest.importorskip("sklearn.cluster")
    for seed in range(20):
        rng = np.random.default_rng(seed)
        X = np.vstack([rng.normal(c, 0.05, (15, 2)) for c in rng.random((3, 2))])
        for eps in (0.03, 0.08, 0.2):
            ours = dbscan(X, eps, 3)
            ref = sk.DBSCAN(eps=eps, min_samples=3).fit(X).labels_
            assert np.array_equal(ours, ref)


@pytest.mark.parametrize("seed", range(25))
def test_two_separated_blobs_give_two_clusters(seed):
    rng = np.random.default_rng(seed)
    diam = 0.02
    a = rng.uniform(-0.5, 0.5, (25, 2)) * diam + 0.3
    b = rng.uniform(-0.5, 0.5, (25, 2)) * diam + 0.3 + np.array([10 * diam, 0])
    X = np.vstack([a, b])
    d_m, labels = select_radius(X)
    assert n_clusters(labels) == 2
    a_lab, b_lab = set(labels[:25]) - {-1}, set(labels[25:]) - {-1}
    assert len(a_lab) == 1 and len(b_lab) == 1 and a_lab != b_lab
    assert d_m > 0


def test_identical_points_one_point_box():
    X = np.full((6, 3), 0.4)
    d_m, labels = select_radius(X)
    assert n_clusters(labels) == 1 and np.all(labels == 0)
    (lo, hi), = cluster_boxes(X, labels, np.zeros(3), np.ones(3))
    np.testing.assert_allclose(lo, 0.35)
    np.testing.assert_allclose(hi, 0.45)


def test_boxes_inflated_and_nested():
    rng = np.random.default_rng(3)
    for _ in range(20):
        X = rng.random((30, 4))
        _, labels = select_radius(X)
        boxes = cluster_boxes(X, labels, np.zeros(4), np.ones(4))
        for lo, hi in boxes:
            assert np.all(lo >= 0) and np.all(hi <= 1) and np.all(lo <= hi)
        members = [np.flatnonzero(labels == c) for c in range(n_clusters(labels))]
        for idx, (lo, hi) in zip(members, boxes):
            assert np.all(X[idx] >= lo) and np.all(X[idx] <= hi)


def test_box_width_grows_ten_percent():
    X = np.array([[0.3, 0.3], [0.5, 0.6], [0.4, 0.45]])
    (lo, hi), = cluster_boxes(X, np.zeros(3, dtype=int), np.zeros(2), np.ones(2))
    np.testing.assert_allclose(hi - lo, [0.22, 0.33])
    np.testing.assert_allclose(0.5 * (lo + hi), [0.4, 0.45])


def test_pairwise_distance_count():
    assert pairwise_distances(np.random.default_rng(0).random((7, 2))).size == 21


# ---------------------------------------------------------------- MLHR loop

def _state(seed, n=20, dims=2):
    X = lhs_init(n, dims, seed)
    Y = np.array([zdt(x) for x in X])
    return initial_state(Dataset(X, Y, np.tile([0.0, 1.0], (dims, 1))), 2)


def test_mlhr_batch_zero_only_advances_k():
    st0 = _state(0)
    st1 = mlhr_iterate(st0, zdt, 0, 0)
    assert st1.k == st0.k + 1
    assert np.array_equal(st1.dataset.X, st0.dataset.X)
    assert np.array_equal(st1.dataset.Y, st0.dataset.Y)


def test_mlhr_bookkeeping_five_iterations():
    st = _state(1)
    m0 = st.dataset.m
    for k in range(5):
        prev = st
        st = mlhr_iterate(st, zdt, 10, k)
        assert st.k == prev.k + 1
        assert np.array_equal(st.dataset.X[: prev.dataset.m], prev.dataset.X)
        for lo, hi in st.local_bounds:
            assert np.all(lo >= 0) and np.all(hi <= 1)
    assert st.dataset.m == m0 + 50
    assert len(st.log) == 5
    assert all(entry["added"] == 10 for entry in st.log)


def test_mlhr_failed_candidates_are_dropped():
    calls = {"n": 0}

    def flaky(x):
        calls["n"] += 1
        if calls["n"] % 3 == 0:
            raise RuntimeError("solver crashed")
        return zdt(x)

    st = _state(2)
    nxt = mlhr_iterate(st, flaky, 9, 0)
    assert nxt.log[-1]["dropped"] == 3
    assert nxt.dataset.m == st.dataset.m + 6
    assert np.all(np.isfinite(nxt.dataset.Y))


def test_mlhr_learning_curve():
    wins = 0
    for seed in range(10):
        st = _state(seed)
        for k in range(5):
            st = mlhr_iterate(st, zdt, 10, seed * 100 + k)
        errs = [entry["gp_error"] for entry in st.log]
        wins += errs[-1] <= errs[0]
    assert wins >= 7


def test_pareto_indices_with_violations():
    Y = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.5, 0.5, 0.0], [0.0, 0.0, 1.0]])
    assert list(pareto_indices(Y, 2)) == [0, 1, 2]


def test_prescreen_prefers_dominating_candidates():
    cands = np.array([[0.1], [0.2], [0.3]])
    pred = np.array([[2.0, 2.0], [0.1, 0.1], [1.0, 1.0]])
    ref = np.array([[0.5, 0.5]])
    assert list(prescreen(cands, pred, ref, 2, 2)) == [1, 0] or list(prescreen(cands, pred, ref, 2, 2))[0] == 1
    assert prescreen(cands, pred, ref, 2, 3, exclude=np.array([[0.2]])).tolist()[0] != 1


def test_cluster_refine_single_point():
    X = np.array([[0.5, 0.5], [0.9, 0.9]])
    Y = np.array([[0.0, 0.0], [1.0, 1.0]])
    st = initial_state(Dataset(X, Y, None), 2)
    assert list(st.pareto_idx) == [0]
    st = cluster_refine(st)
    (lo, hi), = st.local_bounds
    np.testing.assert_allclose(lo, 0.45)
    np.testing.assert_allclose(hi, 0.55)


def _peak_torque(d):
    return max_torque_at_speed(evaluate_design(d), 0.0)


def _power(d):
    # shaft power at a speed inside the constant-torque range
    return 300.0 * max_torque_at_speed(evaluate_design(d), 300.0)


def test_sensitivity_sweep_endpoints_and_order():
    out = sensitivity_sweep(_peak_torque, "T_m", 2, REFERENCE_DESIGN)
    assert [v for v, _ in out] == [2.0, 7.16]
    with pytest.raises(ValueError):
        sensitivity_sweep(_peak_torque, "T_m", 1, REFERENCE_DESIGN)


def test_sensitivity_torque_monotone_in_thickness():
    out = sensitivity_sweep(_peak_torque, "T_m", 12, REFERENCE_DESIGN)
    vals = [r for _, r in out]
    assert np.all(np.diff([v for v, _ in out]) > 0)
    assert np.all(np.diff(vals) >= -1e-9)


def test_sensitivity_power_monotone_in_length():
    out = sensitivity_sweep(_power, "L_m", 6, REFERENCE_DESIGN)
    assert np.all(np.diff([r for _, r in out]) >= -1e-9)


# ---------------------------------------------------------------- dataset

def test_dataset_csv_round_trip(tmp_path):
    X = lhs_init(5, 3, 0)
    Y = np.column_stack([X.sum(axis=1), np.cos(X[:, 0])])
    bounds = np.array([[0, 10], [1, 2], [-1, 1]], dtype=float)
    ds = Dataset(X, Y, bounds, k=2)
    path = tmp_path / "d.csv"
    ds.to_csv(path)
    back = Dataset.from_csv(path, bounds, k=2)
    assert np.array_equal(back.X, ds.X) and np.array_equal(back.Y, ds.Y)
    assert path.read_text().splitlines()[0] == "x1,x2,x3,y1,y2"
    np.testing.assert_allclose(ds.normalize(ds.physical()), X, atol=1e-15)


def test_dataset_rejects_out_of_cube():
    with pytest.raises(ValueError):
        Dataset(np.array([[1.2]]), np.array([0.0]), None)
