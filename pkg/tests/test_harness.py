import json

import numpy as np
import pytest

from nqs_tomo import harness, mle
from nqs_tomo.pauli import group_bases, tfim_chain
from nqs_tomo.sampler import sample_dataset
from nqs_tomo.statevec import groundstate

TFIM3 = tfim_chain(3)


def small_plan(**kw):
    base = dict(hamiltonian=TFIM3, methods=["shadows", "wavefunction"],
                shot_grid=[500, 2000, 8000], repetitions=3, base_seed=4)
    base.update(kw)
    return harness.SweepPlan(**base)


@pytest.mark.parametrize("kw", [
    {"methods": []},
    {"methods": ["dmrg"]},
    {"shot_grid": [1000, 1000, 5000]},
    {"shot_grid": [0, 10, 100]},
    {"repetitions": 0},
])
def test_plan_validation(kw):
    with pytest.raises(ValueError):
        small_plan(**kw)


def test_desk_grid():
    assert harness.desk_grid() == [1000, 3162, 10000, 31623, 100000]


def test_plan_from_json(tmp_path):
    (tmp_path / "h.json").write_text(TFIM3.serialize())
    plan = harness.SweepPlan.from_json(json.dumps(
        {"hamiltonian": "h.json", "methods": ["rbm"], "rbm": {"epochs": 5}}), str(tmp_path))
    assert plan.load_hamiltonian() == TFIM3
    assert plan.rbm["epochs"] == 5 and plan.rbm["n_hidden"] == harness.DEFAULT_RBM["n_hidden"]
    assert plan.repetitions == 20


def test_child_seed_distinct():
    seeds = {harness.child_seed(0, t, s, r) for t in ("a", "b") for s in (1, 2) for r in range(5)}
    assert len(seeds) == 20
    assert harness.child_seed(0, "a", 1, 0) == harness.child_seed(0, "a", 1, 0)


def test_sweep_reproducible_and_parallel_equal():
    plan = small_plan()
    a = harness.run_sweep(plan, workers=1)
    b = harness.run_sweep(plan, workers=2)
    assert a.records == b.records
    assert len(a.records) == 2 * 3 * 3
    assert not a.failures
    c = harness.run_sweep(small_plan(base_seed=5), workers=1)
    assert [r.epsilon for r in c.records] != [r.epsilon for r in a.records]


def test_records_fields():
    m = harness.run_sweep(small_plan(methods=["wavefunction"]), workers=1)
    for r in m.records:
        assert r.delta is not None and r.epsilon >= 0 and r.g_error >= -1e-12
    assert set(m.fits["wavefunction"]) == {"epsilon", "delta"}


def test_model_methods_run():
    plan = small_plan(methods=["rbm", "rnn"], shot_grid=[500, 1000, 2000], repetitions=1,
                      rbm={"epochs": 20}, rnn={"epochs": 20})
    m = harness.run_sweep(plan, workers=1)
    assert len(m.records) == 6 and not m.failures


def test_manifest_round_trip(tmp_path):
    m = harness.run_sweep(small_plan(methods=["shadows"]), workers=1)
    path = tmp_path / "manifest.json"
    m.write(path)
    again = harness.RunManifest.read(path)
    assert again.records == m.records
    assert again.rng_scheme == harness.RNG_SCHEME
    rows = harness.emit_histograms(m, bins=5)
    assert sum(r["count"] for r in rows) == len(m.records)


def test_failures_recorded():
    plan = small_plan(methods=["rbm"], shot_grid=[10, 20, 40], repetitions=1,
                      rbm={"epochs": 3, "learning_rate": 1e6})
    m = harness.run_sweep(plan, workers=1)
    assert len(m.records) + len(m.failures) == 3


def test_trajectory_flat_from_exact_start():
    gs = groundstate(TFIM3)
    data = sample_dataset(gs.state, group_bases(TFIM3), 2000, 1)
    cfg = mle.FixedPointConfig(max_iterations=2000)
    conv = mle.iterate(gs.state, data, cfg).state
    rows = harness.emit_trajectory_comparison(TFIM3, conv, data, cfg)
    losses = np.array([r["loss"] for r in rows])
    assert np.ptp(losses) < 1e-9
    assert rows[0]["loss_min"] == pytest.approx(losses[-1], abs=1e-9)
    assert list(rows[0]) == ["iter", "loss", "epsilon", "delta", "step_norm", "loss_min"]


def test_gnuplot_script():
    text = harness.gnuplot_script("summary.csv", "rbm")
    assert "summary.csv" in text and "logscale" in text
