"""Command-line entry point: ``dcsc-lab <subcommand> ...``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import load_config
from .conv_dict import (
    SignMask,
    build_conv_dictionary,
    load_dense,
    load_local_dictionary,
    save_dense,
    save_local_dictionary,
    sample_sign_mask,
)
from .errors import DCSCError, IOFailure
from .forward import run_forward_pass
from .generator import LayeredSignal, NoisyObservation, child_seed, inject_noise, sample_layered_signal
from .harness import (
    BOUND_COLUMNS,
    RADEMACHER_COLUMNS,
    REGIME_COLUMNS,
    ROLE_MASK,
    ROLE_NOISE,
    ROLE_SIGNAL,
    TrialRecord,
    bound_table,
    bound_table_rows,
    build_dictionaries,
    column_zetas,
    records_csv,
    run_experiment,
    run_regime_comparison,
    table_csv,
    trial_seed,
    verify_rademacher,
)
from .sparsity import PatchSpec, StripeSpec, patch_max_norm, stripe_length, stripe_max_norm


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.replace(";", ",").split(",") if v.strip()]


def _emit(text: str, out: str | None) -> None:
    if out:
        try:
            Path(out).parent.mkdir(parents=True, exist_ok=True)
            Path(out).write_text(text)
        except OSError as exc:
            raise IOFailure(str(exc)) from exc
    else:
        sys.stdout.write(text)


def _config(args):
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg.root_seed = args.seed
    if getattr(args, "trials", None) is not None:
        cfg.num_trials = args.trials
    if getattr(args, "workers", None) is not None:
        cfg.workers = args.workers
    if getattr(args, "delta", None) is not None:
        cfg.delta = args.delta
    return cfg


def cmd_generate(args) -> int:
    cfg = _config(args)
    spec = cfg.spec
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dicts = build_dictionaries(cfg)
    seed = trial_seed(cfg.root_seed, 0, args.trial)
    masks = [sample_sign_mask(spec.layer(l).n, spec.M, child_seed(seed, ROLE_MASK, l), l) for l in range(1, spec.L + 1)]
    truth = sample_layered_signal(spec, dicts, masks, child_seed(seed, ROLE_SIGNAL))
    obs = inject_noise(truth, spec.zeta_0, child_seed(seed, ROLE_NOISE), spec.input_patch_spec(1))
    for l, (A, D) in enumerate(zip(dicts, masks), start=1):
        save_local_dictionary(out / f"local_{l}.csv", A.local)
        save_dense(out / f"mask_{l}.csv", D.diagonal[None, :])
    for l, X in enumerate(truth.layers):
        save_dense(out / f"X_{l}.csv", X)
    save_dense(out / "x_hat_0.csv", obs.x_hat_0)
    save_dense(out / "noise.csv", obs.noise)
    (out / "seed.txt").write_text(f"{seed}\n")
    print(f"wrote layers 0..{spec.L} for d={spec.d} columns to {out} (trial seed {seed})")
    return 0


def cmd_forward(args) -> int:
    cfg = _config(args)
    spec = cfg.spec
    data = Path(args.data)
    dicts, masks = [], []
    for l in range(1, spec.L + 1):
        local = load_local_dictionary(data / f"local_{l}.csv")
        dicts.append(build_conv_dictionary(local, spec.M, spec.stride(l)))
        masks.append(SignMask(load_dense(data / f"mask_{l}.csv").ravel(), l))
    truth = LayeredSignal([load_dense(data / f"X_{l}.csv").reshape(spec.vector_len(l), -1) for l in range(spec.L + 1)])
    x_hat_0 = load_dense(data / "x_hat_0.csv").reshape(spec.M, -1)
    obs = NoisyObservation(x_hat_0, x_hat_0 - truth.layers[0])
    result = run_forward_pass(obs, truth, dicts, masks, spec)
    table = bound_table(spec, dicts, cfg.delta)
    seed_file = data / "seed.txt"
    seed = int(seed_file.read_text()) if seed_file.exists() else 0
    rec = TrialRecord(
        point=0, trial_id=0, seed=seed,
        support_match=result.support_match, errors=result.errors,
        zeta=column_zetas(result, spec, [a.mu for a in table.layers]),
        layer_bound=np.array([a.layer_bound for a in table.layers]),
        layer_bound_raw=np.array([a.layer_bound_raw for a in table.layers]),
        theorem1_bound=table.theorem1_bound, theorem1_bound_raw=table.theorem1_bound_raw,
    )
    _emit(records_csv([rec]), args.out)
    return 0


def cmd_bounds(args) -> int:
    cfg = _config(args)
    table = bound_table(cfg.spec, build_dictionaries(cfg), cfg.delta)
    _emit(table_csv(bound_table_rows(table), BOUND_COLUMNS), args.out)
    return 0


def cmd_montecarlo(args) -> int:
    cfg = _config(args)
    if args.out:
        cfg.output_path = Path(args.out)
    result = run_experiment(cfg)
    if not args.out:
        sys.stdout.write(result.csv_text())
    for s in result.summaries:
        print(
            f"point {s['point']} {s['label']}: failure rate {s['trial_failure_rate']:.4f} "
            f"(bound {s['theorem1_bound']:.4g} + {s['binomial_margin']:.4g}), "
            f"error-bound violations {s['error_bound_violations']}",
            file=sys.stderr,
        )
    return 0


def cmd_compare(args) -> int:
    cfg = _config(args)
    S_values = [int(v) for v in _floats(args.S)] if args.S else None
    rows = run_regime_comparison(cfg, S_values, args.layer)
    _emit(table_csv(rows, REGIME_COLUMNS), args.out)
    return 0


def cmd_rademacher(args) -> int:
    alpha = _floats(args.alpha)
    t_grid = _floats(args.t_grid)
    seed = args.seed if args.seed is not None else 0
    rows = verify_rademacher(args.draws, alpha, t_grid, seed)
    _emit(table_csv(rows, RADEMACHER_COLUMNS), args.out)
    return 0 if all(r["holds"] for r in rows) else 1


def cmd_measure(args) -> int:
    x = load_dense(args.input).ravel()
    if args.kind == "patch":
        spec = PatchSpec(args.length, x.size)
        value = patch_max_norm(x, spec, args.alpha)
    else:
        length = args.length if args.length else stripe_length(args.m, args.s, args.n)
        value = stripe_max_norm(x, StripeSpec(length, x.size), args.alpha)
    print(repr(value))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dcsc-lab", description=__doc__)
    p.add_argument("--version", action="version", version=f"dcsc-lab {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, trials=False):
        sp.add_argument("--config", required=True, help="experiment config (INI)")
        sp.add_argument("--seed", type=int, help="root seed (u64)")
        sp.add_argument("--out", help="output path (stdout when omitted)")
        sp.add_argument("--delta", type=float, help="failure level for admissible sparsity")
        if trials:
            sp.add_argument("--trials", type=int)
            sp.add_argument("--workers", type=int)

    sp = sub.add_parser("generate", help="sample one layered signal and write it as CSV files")
    common(sp)
    sp.add_argument("--trial", type=int, default=0, help="trial index whose seed to use")
    sp.set_defaults(func=cmd_generate)

    sp = sub.add_parser("forward", help="run the forward pass on a directory written by generate")
    common(sp)
    sp.add_argument("--data", required=True)
    sp.set_defaults(func=cmd_forward)

    sp = sub.add_parser("bounds", help="print the closed-form bound table")
    common(sp)
    sp.set_defaults(func=cmd_bounds)

    sp = sub.add_parser("montecarlo", help="run Monte Carlo trials over the config's sweep")
    common(sp, trials=True)
    sp.set_defaults(func=cmd_montecarlo)

    sp = sub.add_parser("compare-regimes", help="sweep S at a fixed dictionary")
    common(sp, trials=True)
    sp.add_argument("--layer", type=int)
    sp.add_argument("--S", help="comma list of S values (default 1..stripe length)")
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("rademacher", help="check the Rademacher tail bound empirically")
    sp.add_argument("--alpha", required=True, help="comma list of coefficients")
    sp.add_argument("--t-grid", required=True, help="comma list of thresholds")
    sp.add_argument("--draws", type=int, default=100_000)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_rademacher)

    sp = sub.add_parser("measure", help="patch/stripe max-measure of a vector CSV")
    sp.add_argument("--input", required=True)
    sp.add_argument("--kind", choices=("patch", "stripe"), default="patch")
    sp.add_argument("--alpha", type=int, choices=(0, 2), default=2)
    sp.add_argument("--length", type=int, help="window length (patch length, or explicit stripe length)")
    sp.add_argument("--m", type=int, help="atom length, for the stripe formula")
    sp.add_argument("--s", type=int, default=1, help="stride, for the stripe formula")
    sp.add_argument("--n", type=int, default=1, help="atoms per position, for the stripe formula")
    sp.set_defaults(func=cmd_measure)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command == "measure" and args.kind == "patch" and not args.length:
        print("error: --length is required for patch measures", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except DCSCError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
