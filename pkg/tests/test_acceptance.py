"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Tolerances are pinned below. Criterion 4 is long-running and only runs with
NQS_TOMO_RELEASE=1.
"""

import os

import numpy as np
import pytest

from conftest import random_state
from test_mle import direct_T
from test_models import random_rbm, random_rnn, rbm_hidden_sum
from test_train import direct_loss
from nqs_tomo import analysis, harness, mle, rbm, rnn, sampler, train
from nqs_tomo.pauli import MeasurementBasis, group_bases, tfim_chain
from nqs_tomo.statevec import StateVector, basis_bits, fidelity, groundstate

# pinned tolerances
PARAM_COUNTS = {(4, 3): 38, (6, 9): 138, (8, 5): 106}
RNN_COUNTS = {4: 39, 15: 303, 9: 129, 64: 4419}
SHADOW_SLOPE, SHADOW_SLOPE_TOL, SHADOW_R2 = -2.0, 0.2, 0.99
WF_SLOPE, WF_SLOPE_TOL, WF_R2 = -1.0, 0.3, 0.99
MODEL_SLOPE, MODEL_SLOPE_TOL = -1.0, 0.4
FIXED_POINT_FIDELITY = 1 - 1e-10
FIXED_POINT_MAX_ITERS = 2
FD_STEP, FD_RTOL, FD_INSTANCES = 1e-5, 1e-4, 20
ORACLE_RTOL = 1e-10
NORM_TOL = 1e-10
EPS_FLOOR = -1e-9
G_ROUNDOFF = 1e-12
OVERFIT_SHOTS, OVERFIT_REPS = 1000, 10

BASE_SEED = 0
REPETITIONS = 20
RELEASE = os.environ.get("NQS_TOMO_RELEASE") == "1"

RESULTS: list[str] = []


def verdict(number: int, title: str, ok: bool, detail: str):
    line = f"criterion {number} {'PASS' if ok else 'FAIL'}: {title} ({detail})"
    RESULTS.append(line)
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def tfim():
    h = tfim_chain(4)
    return h, groundstate(h), group_bases(h)


@pytest.fixture(scope="module")
def sweep(tfim):
    plan = harness.SweepPlan(hamiltonian=tfim[0], methods=["shadows", "wavefunction"],
                             shot_grid=harness.desk_grid(), repetitions=REPETITIONS,
                             base_seed=BASE_SEED)
    return harness.run_sweep(plan)


def test_criterion_1_param_counts():
    got = {k: rbm.param_count(*k) for k in PARAM_COUNTS}
    got_rnn = {k: rnn.param_count(k) for k in RNN_COUNTS}
    ok = got == PARAM_COUNTS and got_rnn == RNN_COUNTS
    verdict(1, "parameter counts", ok,
            f"rbm {sorted(got.values())}, rnn {sorted(got_rnn.values())}")


def test_criterion_2_shadow_scaling(sweep):
    fit = analysis.fit_records(sweep.records, "shadows")
    ok = abs(fit.slope - SHADOW_SLOPE) <= SHADOW_SLOPE_TOL and fit.r_squared > SHADOW_R2
    verdict(2, "shadows epsilon slope -2.0+-0.2, R^2>0.99", ok,
            f"slope {fit.slope:.3f}, R^2 {fit.r_squared:.4f}, {REPETITIONS} reps")


def test_criterion_3_wavefunction_scaling(sweep):
    fits = {q: analysis.fit_records(sweep.records, "wavefunction", q) for q in ("epsilon", "delta")}
    ok = all(abs(f.slope - WF_SLOPE) <= WF_SLOPE_TOL and f.r_squared > WF_R2
             for f in fits.values())
    detail = ", ".join(f"{q} slope {f.slope:.3f} R^2 {f.r_squared:.4f}" for q, f in fits.items())
    verdict(3, "wavefunction epsilon and delta slopes -1.0+-0.3, R^2>0.99", ok, detail)


@pytest.mark.slow
@pytest.mark.skipif(not RELEASE, reason="set NQS_TOMO_RELEASE=1 to run")
def test_criterion_4_model_scaling(tfim):
    plan = harness.SweepPlan(hamiltonian=tfim[0], methods=["rbm", "rnn", "shadows"],
                             shot_grid=harness.desk_grid(), repetitions=REPETITIONS,
                             base_seed=BASE_SEED)
    manifest = harness.run_sweep(plan)
    shadow = {s: m for s, m, _, _ in analysis.summarize(manifest.records, "shadows")}
    parts, ok = [], not manifest.failures
    for method in ("rbm", "rnn"):
        summary = analysis.summarize(manifest.records, method)
        fit = analysis.fit_records(manifest.records, method)
        below = all(m < shadow[s] for s, m, _, _ in summary) and len(summary) == len(shadow)
        ok = ok and abs(fit.slope - MODEL_SLOPE) <= MODEL_SLOPE_TOL and below
        parts.append(f"{method} slope {fit.slope:.3f} below-shadows {below}")
    verdict(4, "model epsilon slope -1.0+-0.4 and below shadows at every S", ok,
            "; ".join(parts) + f"; failures {len(manifest.failures)}")


def test_criterion_5_exact_fixed_point():
    rng = np.random.default_rng(5)
    bases = (MeasurementBasis("XYZ"), MeasurementBasis("ZZX"), MeasurementBasis("YYY"))
    worst_fid, worst_iters, worst_t = 1.0, 0, 0.0
    for _ in range(10):
        target = random_state(3, rng)
        data = sampler.exact_dataset(target, bases)
        t = mle.apply_T(target, data).amplitudes
        worst_t = max(worst_t, float(np.abs(t - target.amplitudes).max()))
        res = mle.iterate(target, data)
        worst_fid = min(worst_fid, fidelity(res.state, target))
        worst_iters = max(worst_iters, res.iterations if res.converged else 10**9)
    ok = worst_fid >= FIXED_POINT_FIDELITY and worst_iters <= FIXED_POINT_MAX_ITERS
    ok = ok and worst_t < 1e-10
    verdict(5, "exact-data fixed point", ok,
            f"max |T psi - psi| {worst_t:.1e}, iterations {worst_iters}, "
            f"min fidelity 1-{1 - worst_fid:.1e}")


def test_criterion_6_gradient_oracle():
    rng = np.random.default_rng(6)
    worst = {}
    for kind, make in (("rbm", random_rbm), ("rnn", random_rnn)):
        worst[kind] = 0.0
        for _ in range(FD_INSTANCES):
            n = int(rng.integers(1, 4))
            nh = int(rng.integers(1, 5))
            bases = tuple(MeasurementBasis("".join(rng.choice(list("XYZ"), n))) for _ in range(3))
            data = sampler.sample_dataset(random_state(n, rng), bases, 300,
                                          int(rng.integers(2**31)))
            model = make(n, nh, rng)
            analytic = train.gradient(model, data)
            numeric = train.finite_difference_gradient(model, data, FD_STEP)
            rel = np.abs(analytic - numeric).max() / max(np.abs(numeric).max(), 1e-300)
            worst[kind] = max(worst[kind], float(rel))
    ok = all(v <= FD_RTOL for v in worst.values())
    verdict(6, "gradients vs central finite differences", ok,
            ", ".join(f"{k} max rel {v:.1e}" for k, v in worst.items()))


def test_criterion_7_brute_force_equivalence():
    rng = np.random.default_rng(7)
    worst = {"rbm": 0.0, "loss": 0.0, "G": 0.0, "T": 0.0}
    bases = (MeasurementBasis("XYZ"), MeasurementBasis("ZZX"), MeasurementBasis("YYY"))
    for _ in range(10):
        p = random_rbm(3, 3, rng)
        for sigma in basis_bits(3):
            brute = rbm_hidden_sum(p, sigma)
            fast = np.exp(rbm.unnormalized_log_amplitude(p, sigma))
            worst["rbm"] = max(worst["rbm"], abs(fast - brute) / abs(brute))
        target = random_state(3, rng)
        data = sampler.sample_dataset(target, bases, 500, int(rng.integers(2**31)))
        model = random_state(3, rng)
        direct = direct_loss(model.amplitudes, data)
        worst["loss"] = max(worst["loss"], abs(train.loss(model, data).loss - direct) / direct)
        p_t = sampler.rotated_probabilities(target, bases)
        q = sampler.rotated_probabilities(model, bases)
        g_direct = -sum(p_t[k, i] * np.log(q[k, i]) for k in range(3) for i in range(8)) / 3
        g = analysis.generalization_error(model, target, bases)
        worst["G"] = max(worst["G"], abs(g - g_direct) / g_direct)
        t_direct = direct_T(model.amplitudes, data)
        t = mle.apply_T(model, data).amplitudes
        worst["T"] = max(worst["T"], float(np.abs(t - t_direct).max() / np.abs(t_direct).max()))
    ok = all(v <= ORACLE_RTOL for v in worst.values())
    verdict(7, "brute-force oracles", ok, ", ".join(f"{k} {v:.1e}" for k, v in worst.items()))


def test_criterion_8_inequalities(tfim, sweep):
    h, gs, bases = tfim
    rng = np.random.default_rng(8)
    norm_err = 0.0
    for _ in range(100):
        n = int(rng.integers(1, 6))
        p = random_rnn(n, int(rng.integers(1, 8)), rng, scale=float(rng.uniform(0.1, 3)))
        norm_err = max(norm_err, abs(np.linalg.norm(np.exp(p.log_psi())) - 1))
    # produced states: sweep outputs plus briefly trained models and their fixed points
    h_val = analysis.entropy_H(gs.state, bases)
    g_min = min(r.g_error for r in sweep.records if r.g_error is not None)
    eps_min = min(r.epsilon for r in sweep.records)
    data = sampler.sample_dataset(gs.state, bases, 1000, 8)
    for model in (rbm.RbmParams.random(4, 3, seed=1), rnn.RnnParams.random(4, 4, seed=1)):
        fitted = train.fit(model, data, train.TrainConfig(learning_rate=1e-2, epochs=300)).model
        for state in (train.model_statevector(fitted),
                      mle.iterate(train.model_statevector(fitted), data).state):
            g_min = min(g_min, analysis.generalization_error(state, gs.state, bases) - h_val)
            eps_min = min(eps_min, analysis.epsilon(state, h, gs))
    ok = (norm_err <= NORM_TOL and g_min >= -G_ROUNDOFF and eps_min >= EPS_FLOOR
          and not sweep.failures)
    verdict(8, "normalization, G>=H, epsilon>=-1e-9", ok,
            f"max norm err {norm_err:.1e}, min G-H {g_min:.1e}, min epsilon {eps_min:.1e}")


def test_criterion_9_overfitting_direction(tfim):
    h, gs, bases = tfim
    eps_start, eps_end, loss_drop = [], [], []
    cfg = harness.DEFAULT_RNN
    for rep in range(OVERFIT_REPS):
        data = sampler.sample_dataset(
            gs.state, bases, OVERFIT_SHOTS,
            harness.child_seed(BASE_SEED, "dataset", OVERFIT_SHOTS, rep))
        seed = harness.child_seed(BASE_SEED, "rnn", OVERFIT_SHOTS, rep)
        model = train.fit(rnn.RnnParams.random(4, cfg["n_hidden"], seed=seed), data,
                          train.TrainConfig(learning_rate=cfg["learning_rate"],
                                            epochs=cfg["epochs"])).model
        rows = harness.emit_trajectory_comparison(h, train.model_statevector(model), data)
        eps_start.append(rows[0]["epsilon"])
        eps_end.append(rows[-1]["epsilon"])
        loss_drop.append(rows[0]["loss"] - rows[-1]["loss"])
    ok = min(loss_drop) > 0 and np.mean(eps_end) > np.mean(eps_start)
    verdict(9, "fixed point from trained RNN lowers loss and raises epsilon", ok,
            f"loss lowered in {sum(d > 0 for d in loss_drop)}/{OVERFIT_REPS}, mean epsilon "
            f"{np.mean(eps_start):.4f} -> {np.mean(eps_end):.4f}")
