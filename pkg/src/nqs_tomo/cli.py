"""Command-line entry point: ``nqs-tomo <subcommand> ...``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys

from . import analysis, harness, mle, pauli, rbm, rnn, sampler, shadows, train
from .statevec import groundstate, load_state, save_state


def _write_csv(path, rows: list[dict], columns=None):
    columns = columns or (list(rows[0]) if rows else [])
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: "" if row.get(k) is None else row.get(k) for k in columns})


def cmd_ham_info(args):
    h = pauli.load_hamiltonian(args.hamiltonian)
    print(pauli.coverage_table(h, pauli.group_bases(h)))


def cmd_ground(args):
    h = pauli.load_hamiltonian(args.hamiltonian)
    gs = groundstate(h)
    print(f"energy {gs.energy:.12f}  residual {gs.residual_norm:.2e}")
    if args.out:
        save_state(args.out, gs.state)


def cmd_sample(args):
    h = pauli.load_hamiltonian(args.hamiltonian)
    data = sampler.sample_dataset(groundstate(h).state, pauli.group_bases(h), args.shots, args.seed)
    sampler.save_dataset(args.out, data)
    print(f"{data.total_shots} shots over {len(data.bases)} bases -> {args.out}")


def _monitor(h):
    exact = groundstate(h)

    def monitor(model):
        state = train.model_statevector(model)
        return analysis.epsilon(state, h, exact), analysis.delta(state, exact.state)

    return monitor


def cmd_train(args, kind):
    h = pauli.load_hamiltonian(args.hamiltonian)
    data = sampler.load_dataset(args.data)
    cfg = train.TrainConfig(learning_rate=args.lr, epochs=args.epochs, seed=args.seed,
                            checkpoint_every=args.checkpoint_every,
                            gradient_check=args.gradient_check)
    if kind == "rbm":
        init = rbm.RbmParams.random(h.n_qubits, args.nh, seed=args.seed)
    else:
        init = rnn.RnnParams.random(h.n_qubits, args.nh, seed=args.seed)
    try:
        result = train.fit(init, data, cfg, monitor=_monitor(h))
    except train.TrainingDiverged as exc:
        train.save_checkpoint(args.out, exc.last_good)
        print(f"training diverged: {exc}; last good parameters saved to {args.out}",
              file=sys.stderr)
        return 1
    train.save_checkpoint(args.out, result.model)
    if args.history:
        _write_csv(args.history, result.history, ["epoch", "loss", "epsilon", "delta"])
    final = result.history[-1]
    print(f"loss {final['loss']:.8f}  epsilon {final['epsilon']:.3e}  delta {final['delta']:.3e}")


def cmd_mle(args):
    h = pauli.load_hamiltonian(args.hamiltonian)
    data = sampler.load_dataset(args.data)
    exact = groundstate(h)
    if args.start == "exact":
        start = exact.state
    else:
        start = train.model_statevector(train.load_checkpoint(args.start))
    cfg = mle.FixedPointConfig(args.max_iterations, args.tol,
                               "exact_target" if args.start == "exact" else "supplied_state")
    result = mle.iterate(start, data, cfg, observe=lambda s: (
        analysis.epsilon(s, h, exact), analysis.delta(s, exact.state)))
    save_state(args.out, result.state)
    if args.traj:
        result.trajectory.write_csv(args.traj)
    last = result.trajectory.records[-1]
    print(f"iterations {result.iterations}  converged {result.converged}  "
          f"loss {last.loss:.8f}  epsilon {last.epsilon:.3e}  delta {last.delta:.3e}")


def cmd_shadows(args):
    h = pauli.load_hamiltonian(args.hamiltonian)
    exact = groundstate(h)
    est = shadows.estimate_energy(h, shadows.shadow_table(exact.state, args.shots, args.seed))
    doc = {"energy": est.energy, "shots": est.shots, "seed": args.seed,
           "exact_energy": exact.energy, "epsilon": analysis.shadow_epsilon(est.energy, exact)}
    with open(args.out, "w") as fh:
        json.dump(doc, fh, indent=2)
    print(f"energy {est.energy:.8f}  epsilon {doc['epsilon']:.3e}")


def cmd_fit(args):
    records = analysis.read_records(args.records)
    methods = [args.method] if args.method else sorted({r.method for r in records})
    out = {}
    for m in methods:
        if args.quality == "delta" and m == "shadows":
            continue
        fit = analysis.fit_records(records, m, args.quality)
        out[m] = {"quality": args.quality, "mean_of": args.quality, **fit.__dict__}
        print(f"{m:<13} slope {fit.slope:+.3f}  R^2 {fit.r_squared:.4f}")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(out, fh, indent=2)


def cmd_sweep(args):
    with open(args.plan) as fh:
        plan = harness.SweepPlan.from_json(fh.read(), os.path.dirname(os.path.abspath(args.plan)))
    manifest = harness.run_sweep(plan, workers=args.workers)
    manifest.write(args.out)
    if args.records:
        analysis.write_records(args.records, manifest.records)
    if args.histograms:
        rows = harness.emit_histograms(manifest, args.bins)
        _write_csv(args.histograms, rows,
                   ["method", "shots", "quality", "log10_lo", "log10_hi", "count", "sum"])
    if args.summary:
        rows = [{"method": m, "quality": q, **p} for m, qs in manifest.summaries.items()
                for q, pts in qs.items() for p in pts]
        _write_csv(args.summary, rows, ["method", "shots", "mean", "sem", "count", "quality"])
    for m, fits in manifest.fits.items():
        for q, f in fits.items():
            if "slope" in f:
                print(f"{m:<13} {q:<8} slope {f['slope']:+.3f}  R^2 {f['r_squared']:.4f}")
    if manifest.failures:
        print(f"{len(manifest.failures)} runs failed (see manifest)", file=sys.stderr)


def cmd_trajectory(args):
    h = pauli.load_hamiltonian(args.hamiltonian)
    start = train.model_statevector(train.load_checkpoint(args.model))
    rows = harness.emit_trajectory_comparison(h, start, sampler.load_dataset(args.data))
    _write_csv(args.out, rows)
    print(f"loss {rows[0]['loss']:.6f} -> {rows[-1]['loss']:.6f} (min {rows[0]['loss_min']:.6f}); "
          f"epsilon {rows[0]['epsilon']:.3e} -> {rows[-1]['epsilon']:.3e}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nqs-tomo", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ham-info", help="qubits, terms and measurement bases of a Hamiltonian")
    p.add_argument("hamiltonian")
    p.set_defaults(func=cmd_ham_info)

    p = sub.add_parser("ground", help="exact groundstate")
    p.add_argument("hamiltonian")
    p.add_argument("--out")
    p.set_defaults(func=cmd_ground)

    p = sub.add_parser("sample", help="synthetic measurement dataset from the groundstate")
    p.add_argument("hamiltonian")
    p.add_argument("--shots", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    for kind, nh, lr in (("rbm", 3, 3e-3), ("rnn", 4, 1e-3)):
        p = sub.add_parser(f"train-{kind}", help=f"train a complex {kind.upper()} on a dataset")
        p.add_argument("hamiltonian")
        p.add_argument("data")
        p.add_argument("--nh", type=int, default=nh)
        p.add_argument("--lr", type=float, default=lr)
        p.add_argument("--epochs", type=int, default=10_000)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--checkpoint-every", type=int, default=1000)
        p.add_argument("--gradient-check", action="store_true")
        p.add_argument("--out", required=True)
        p.add_argument("--history")
        p.set_defaults(func=lambda a, kind=kind: cmd_train(a, kind))

    p = sub.add_parser("mle", help="fixed-point maximum-likelihood wavefunction")
    p.add_argument("hamiltonian")
    p.add_argument("data")
    p.add_argument("--start", default="exact", help="'exact' or a model checkpoint")
    p.add_argument("--max-iterations", type=int, default=10_000)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--out", required=True)
    p.add_argument("--traj")
    p.set_defaults(func=cmd_mle)

    p = sub.add_parser("shadows", help="uniform classical-shadow energy estimate")
    p.add_argument("hamiltonian")
    p.add_argument("--shots", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_shadows)

    p = sub.add_parser("fit", help="power-law fit of S against mean quality")
    p.add_argument("records")
    p.add_argument("--quality", choices=("epsilon", "delta"), default="epsilon")
    p.add_argument("--method")
    p.add_argument("--out")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("sweep", help="run a sample-complexity sweep plan")
    p.add_argument("plan")
    p.add_argument("--out", required=True)
    p.add_argument("--records")
    p.add_argument("--histograms")
    p.add_argument("--summary")
    p.add_argument("--bins", type=int, default=20)
    p.add_argument("--workers", type=int,
                   default=int(os.environ.get(harness.WORKERS_ENV, "1")))
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("trajectory", help="fixed-point trajectory from a trained model")
    p.add_argument("hamiltonian")
    p.add_argument("model")
    p.add_argument("data")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_trajectory)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args) or 0
    except (OSError, ValueError, ArithmeticError) as exc:
        # bad inputs and domain errors: message without traceback
        print(f"nqs-tomo {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
