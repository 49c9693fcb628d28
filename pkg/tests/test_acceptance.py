"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line that is printed in the terminal summary.
Derived quantities are checked against oracles computed independently in this
file (brute-force sums, finite differences, the oracle recipe's own sampler).
"""
import dataclasses
import itertools
import math
import time

import numpy as np
import pytest

from mdcrbm import files
from mdcrbm.cli import main
from mdcrbm.elasticity import choice_jacobian, continuous_slots, elasticity, elasticity_density
from mdcrbm.generator import choice_prob, conditional_choice_prob, impute, synthesize
from mdcrbm.nn_benchmark import NnParams, nn_gradient, nn_loss, nn_train
from mdcrbm.oracle import get_recipe
from mdcrbm.rbm import RbmParams, enumerate_exact, exact_loglik_grad, free_energy, free_energy_grad
from mdcrbm.schema import Schema, VariableSpec, encode, fit_norm
from mdcrbm.stats import central_moments, compare, fd_edges, hist_fit
from mdcrbm.trainer import TrainConfig, cd_gradient, train

from conftest import mixed_schema, random_design, random_params, record_acceptance

slow = pytest.mark.slow


def cat_schema(*ks):
    return Schema(tuple(VariableSpec.categorical(f"v{i}", k) for i, k in enumerate(ks)))


def one_hot_states(ks):
    """Every visible configuration of a purely categorical schema."""
    blocks = [np.eye(k) for k in ks]
    return np.array([np.concatenate(choice) for choice in itertools.product(*blocks)])


def hidden_states(J):
    return np.array(list(itertools.product((0.0, 1.0), repeat=J))).reshape(2 ** J, J)


def central_diff(f, arr, h=1e-5):
    g = np.zeros(arr.shape)
    for idx in np.ndindex(arr.shape):
        up, dn = arr.copy(), arr.copy()
        up[idx] += h
        dn[idx] -= h
        g[idx] = (f(up) - f(dn)) / (2 * h)
    return g


def rel_err(a, b):
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-12))


# 1 ---------------------------------------------------------------------------------

def test_criterion_01_free_energy_identity():
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    worst = 0.0
    for _ in range(100):
        ks = []
        while sum(ks) < 2 or (rng.random() < 0.5 and sum(ks) + 2 <= 8):
            ks.append(int(rng.integers(2, min(4, 8 - sum(ks)) + 1)))
        J = int(rng.integers(1, 7))
        p = random_params(cat_schema(*ks), J, rng, scale=1.0)
        X, S = one_hot_states(ks), hidden_states(J)
        W, b, c = np.asarray(p.W), np.asarray(p.b), np.asarray(p.c)
        # -E(x, s) = x W s + b x + c s for every (x, s) pair
        neg_e = X @ W @ S.T + (X @ b)[:, None] + (S @ c)[None, :]
        total = np.exp(neg_e).sum(axis=1)
        worst = max(worst, float(np.max(np.abs(np.exp(-free_energy(X, p)) - total) / total)))
    seconds = time.perf_counter() - t0
    ok = worst <= 1e-10 and seconds < 10
    record_acceptance(1, "free-energy identity on 100 discrete models", ok,
                      f"max rel err {worst:.2e}, {seconds:.1f}s")
    assert ok


# 2 ---------------------------------------------------------------------------------

def test_criterion_02_gradient_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(202)
    s = mixed_schema()
    worst = {"free energy": 0.0, "jacobian": 0.0, "nn": 0.0}
    for _ in range(50):
        J = int(rng.integers(1, 6))
        p = random_params(s, J, rng)
        x = random_design(s, 4, rng)
        dW, db, dc = free_energy_grad(x, p)
        for got, name in ((dW, "W"), (db, "b"), (dc, "c")):
            ref = central_diff(lambda v, name=name: free_energy(x, p.replace(**{name: v})).mean(),
                               np.array(getattr(p, name)))
            worst["free energy"] = max(worst["free energy"], rel_err(got, ref))

        row = x[0]
        cols = continuous_slots(p)
        for target in ("mode", "purpose"):
            ref = np.zeros((s[target].k, len(cols)))
            for j, i in enumerate(cols):
                up, dn = row.copy(), row.copy()
                up[i] += 1e-5
                dn[i] -= 1e-5
                ref[:, j] = (choice_prob(up, target, p) - choice_prob(dn, target, p)) / 2e-5
            worst["jacobian"] = max(worst["jacobian"], rel_err(choice_jacobian(row, target, p), ref))

        q = NnParams(rng.normal(0, 0.8, (6, J)), rng.normal(0, 0.8, J), rng.normal(0, 0.8, (J, 3)),
                     rng.normal(0, 0.8, 3))
        xs, ys = rng.normal(size=(5, 6)), rng.integers(0, 3, 5)
        for name, got in zip(("W1", "c1", "W2", "b2"), nn_gradient(xs, ys, q)):
            ref = central_diff(lambda v, name=name: nn_loss(xs, ys, NnParams(**{**q.__dict__, name: v})),
                               getattr(q, name))
            worst["nn"] = max(worst["nn"], rel_err(got, ref))
    seconds = time.perf_counter() - t0
    ok = max(worst.values()) <= 1e-6 and seconds < 30
    record_acceptance(2, "finite-difference gradient oracle", ok,
                      ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + f", {seconds:.1f}s")
    assert ok


# 3 ---------------------------------------------------------------------------------

def test_criterion_03_mnl_collapse():
    rng = np.random.default_rng(303)
    s = Schema((VariableSpec.categorical("mode", 4), VariableSpec.gaussian("income"),
                VariableSpec.categorical("purpose", 3)))
    norm = fit_norm(np.array([[0, -1.0, 0], [1, 1.0, 1]]), s)
    worst = 0.0
    for _ in range(20):
        b = rng.normal(0, 2, s.width)
        p = RbmParams(np.zeros((s.width, 5)), b, np.zeros(5), s, norm)
        row = [np.nan, rng.normal(), rng.integers(0, 3)]
        offsets = b[:4]
        ref = [math.exp(v) / sum(math.exp(u) for u in offsets) for v in offsets]
        worst = max(worst, float(np.max(np.abs(conditional_choice_prob(row, "mode", p) - ref))))
    ok = worst <= 1e-12
    record_acceptance(3, "MNL collapse with zero coupling", ok, f"max abs err {worst:.1e}")
    assert ok


# 4 ---------------------------------------------------------------------------------

@slow
def test_criterion_04_cd_consistency():
    t0 = time.perf_counter()
    rng = np.random.default_rng(404)
    s = cat_schema(3, 3)
    p = random_params(s, 4, rng, scale=0.7)
    n = 10_000
    data = np.column_stack([np.eye(3)[rng.choice(3, n, p=[0.6, 0.3, 0.1])],
                            np.eye(3)[rng.choice(3, n, p=[0.1, 0.2, 0.7])]])
    exact = np.concatenate([g.ravel() for g in exact_loglik_grad(data, p, enumerate_exact(p))])
    # cd_gradient is a descent direction; flip it to compare with the ascent direction
    cd = -np.concatenate([g.ravel() for g in cd_gradient(data, p, 500, rng)])
    cosine = float(cd @ exact / (np.linalg.norm(cd) * np.linalg.norm(exact)))
    seconds = time.perf_counter() - t0
    ok = cosine >= 0.9 and seconds < 120
    record_acceptance(4, "CD-500 agrees with the exact gradient", ok, f"cosine {cosine:.4f}, {seconds:.1f}s")
    assert ok


# 5 ---------------------------------------------------------------------------------

@slow
def test_criterion_05_distribution_recovery():
    t0 = time.perf_counter()
    rec = get_recipe("mdc")
    s = rec.schema
    rng = np.random.default_rng(1)
    data, held = rec.sample(50_000, rng), rec.sample(10_000, rng)
    config = TrainConfig(epochs=50, lr=0.1, decay=2e-4, batch_size=64, cd_steps=5, seed=0)
    params, report = train(data, s, 16, config)
    assert report.aborted is None
    gen = synthesize(params, 20_000, np.random.default_rng(2), chains=1000,
                     init=encode(data, s, params.norm))
    rep = compare(held, gen, s)
    r2 = {v: rep[v].r2 for v in ("mode", "purpose")}
    kw_p = {v: rep[v].kw_p for v in ("mode", "purpose")}
    d = s.index("distance")
    # first moment about zero, second about the mean
    mean_err = abs(gen[:, d].mean() / held[:, d].mean() - 1)
    var_err = abs(central_moments(gen[:, d])[1] / central_moments(held[:, d])[1] - 1)
    corr_mad = rep.correlations.mean_abs_difference
    seconds = time.perf_counter() - t0
    checks = {
        "a": min(r2.values()) >= 0.95,
        "b": max(mean_err, var_err) <= 0.15,
        "c": corr_mad <= 0.05,
        "d": min(kw_p.values()) > 0.05,
        "time": seconds < 600,
    }
    ok = all(checks.values())
    detail = (f"R2 {min(r2.values()):.4f}, distance mean/var err {mean_err:.3f}/{var_err:.3f}, "
              f"corr MAD {corr_mad:.4f}, min KW p {min(kw_p.values()):.3f}, {seconds:.0f}s")
    record_acceptance(5, "distribution recovery on the oracle", ok, detail)
    assert ok, checks


# 6 ---------------------------------------------------------------------------------

def _distance_edges(held):
    inner = fd_edges(held)[1:-1]
    return np.concatenate([[0.0], inner, [np.inf]])


@slow
def test_criterion_06_capacity_ordering():
    rec = dataclasses.replace(get_recipe("mdc"), distance_scale=5.0)
    s = rec.schema
    d = s.index("distance")
    medians = {}
    for J in (2, 8, 32):
        values = []
        for seed in range(5):
            rng = np.random.default_rng(1000 + seed)
            data, held = rec.sample(10_000, rng), rec.sample(10_000, rng)
            config = TrainConfig(epochs=50, lr=0.05, decay=2e-4, batch_size=64, cd_steps=20, seed=seed)
            params, _ = train(data, s, J, config)
            gen = synthesize(params, 10_000, np.random.default_rng(2000 + seed), chains=1000,
                             init=encode(data, s, params.norm))
            values.append(hist_fit(held[:, d], gen[:, d], bins=_distance_edges(held[:, d]))[1])
        medians[J] = float(np.median(values))
    ok = medians[32] < medians[2]
    record_acceptance(6, "distance histogram improves with hidden units", ok,
                      ", ".join(f"J={J} RMSE {m:.1f}" for J, m in medians.items()))
    assert ok


# 7 and 8 share one model fitted with a finer distance resolution -------------------

@pytest.fixture(scope="module")
def fine_model():
    rec = dataclasses.replace(get_recipe("mdc"), distance_scale=5.0)
    rng = np.random.default_rng(7)
    data, held = rec.sample(50_000, rng), rec.sample(5_000, rng)
    config = TrainConfig(epochs=50, lr=0.1, decay=5e-5, batch_size=64, cd_steps=5, seed=7)
    params, report = train(data, rec.schema, 16, config, norm=fit_norm(data, rec.schema))
    assert report.aborted is None
    return rec, data, held, params


@slow
def test_criterion_07_imputation_beats_majority(fine_model):
    rec, _, held, params = fine_model
    m = rec.schema.index("mode")
    truth = held[:, m].astype(int)
    masked = held.copy()
    masked[:, m] = np.nan
    filled = impute(masked, params, np.random.default_rng(8))
    accuracy = float(np.mean(filled[:, m] == truth))
    majority = float(np.bincount(truth).max() / len(truth))
    ok = accuracy >= majority + 0.10
    record_acceptance(7, "mode imputation beats the majority class", ok,
                      f"accuracy {accuracy:.4f}, majority {majority:.4f}")
    assert ok


@slow
def test_criterion_08_elasticity_sanity(fine_model):
    rec, data, held, params = fine_model
    s = rec.schema
    rows = held[:2000]
    walk = elasticity_density(rows, "mode", "distance", params).mean[0]

    d = s.index("distance")
    base = np.stack([elasticity(r, "mode", "distance", params) for r in rows[:200]])
    worst = 0.0
    for alpha in (1000.0, 1 / 1.609344):
        scaled_data, scaled_rows = data.copy(), rows[:200].copy()
        scaled_data[:, d] *= alpha
        scaled_rows[:, d] *= alpha
        rescaled = params.replace(norm=fit_norm(scaled_data, s))
        got = np.stack([elasticity(r, "mode", "distance", rescaled) for r in scaled_rows])
        worst = max(worst, float(np.max(np.abs(got - base))))
    ok = walk < 0 and worst <= 1e-8
    record_acceptance(8, "walk elasticity negative and unit invariant", ok,
                      f"mean walk elasticity {walk:.4f}, max change under rescaling {worst:.1e}")
    assert ok


# 9 ---------------------------------------------------------------------------------

@slow
def test_criterion_09_overfitting_signature():
    rec = get_recipe("mdc")
    s = rec.schema
    nn_gaps, rbm_gaps = [], []
    for seed in range(5):
        data = rec.sample(2000, np.random.default_rng(900 + seed))
        config = TrainConfig(epochs=100, lr=0.1, decay=2e-4, batch_size=64, seed=seed, choice="mode")
        _, rbm_curve = train(data, s, 16, config)
        _, nn_curve = nn_train(data, s, "mode", 16, config)
        assert rbm_curve.aborted is None and nn_curve.aborted is None
        for curve, gaps in ((rbm_curve, rbm_gaps), (nn_curve, nn_gaps)):
            i = curve.epoch.index(100)
            gaps.append(curve.loglik_train[i] - curve.loglik_val[i])
    nn_med, rbm_med = float(np.median(nn_gaps)), float(np.median(rbm_gaps))
    ok = nn_med > rbm_med
    record_acceptance(9, "NN generalization gap exceeds the RBM's", ok,
                      f"median gap NN {nn_med:.4f}, RBM {rbm_med:.4f}")
    assert ok


# 10 and 11 run through the command line ------------------------------------------

@pytest.fixture
def oracle_files(tmp_path):
    data, schema = tmp_path / "data.csv", tmp_path / "schema.txt"
    assert main(["synth-oracle", "--n", "3000", "--out", str(data), "--schema", str(schema)], {}) == 0
    return tmp_path, data, schema


def test_criterion_10_statistical_identities(oracle_files):
    tmp, data, schema = oracle_files
    out = tmp / "report.txt"
    code = main(["validate", "--schema", str(schema), "--data", str(data), "--generated", str(data),
                 "--out", str(out)], {})
    s, _ = files.read_schema(schema)
    table = files.read_table(data, s)
    rep = compare(table, table, s)
    values = []
    for v in rep.variables:
        values += [v.r2 == 1.0, v.rmse == 0.0, v.kw_h == 0.0]
        if v.chi2 is not None:
            values += [v.chi2 == 0.0, v.msd == 0.0]
    lines = out.read_text().split("[chi_square]")[1].split("[histogram_fit]")
    chi_rows = [r.split("\t") for r in lines[0].strip().splitlines()[1:]]
    hist_rows = [r.split("\t") for r in lines[1].split("\n\n")[0].strip().splitlines()[1:]]
    text_ok = all(r[1] == "0" and r[2] == "0" and r[3] == "1" for r in chi_rows) and \
        all(r[1] == "1" and r[2] == "0" for r in hist_rows)
    ok = code == 0 and all(values) and text_ok and len(chi_rows) == 2
    record_acceptance(10, "validate(file, file) gives identity values", ok)
    assert ok


def test_criterion_11_training_is_byte_identical(oracle_files):
    tmp, data, schema = oracle_files
    blobs = []
    for name in ("first", "second"):
        model = tmp / f"{name}.bin"
        code = main(["train", "--schema", str(schema), "--data", str(data), "--model", str(model),
                     "--epochs", "3", "--hidden", "8", "--seed", "11", "--out", str(tmp / f"{name}.tsv")], {})
        assert code == 0
        blobs.append(model.read_bytes())
    ok = blobs[0] == blobs[1]
    record_acceptance(11, "cmd_train is byte-for-byte deterministic", ok, f"{len(blobs[0])} bytes")
    assert ok
