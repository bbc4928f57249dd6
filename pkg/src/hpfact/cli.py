"""Command line driver: ``hpfact {verify-kernel,factorize,commutator,decay-table}``.

Exit codes: 0 pass, 1 error (bad config, failed check), 2 non-contraction.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import operators
from .atoms import AtomicDecomposition, atomic_quasinorm
from .config import ConfigError, ExperimentConfig
from .experiments import kernel_checks, random_separated_triple
from .factorization import (
    approximate_atom,
    factorization_norm,
    save_factorization,
    uchiyama_factorize,
)
from .commutator import duality_pairing_check, estimate_commutator_norm
from .grid import Ball, GridSpec
from .reference import lip_member, make_atom

log = logging.getLogger("hpfact")

EXIT_OK, EXIT_ERROR, EXIT_NONCONTRACTION = 0, 1, 2

DECAY_COLUMNS = ["round", "num_triples", "error_quasinorm_p", "contraction_ratio", "triple_norm_budget_max"]


def _write_csv(path: Path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row[c]) for c in columns])


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


def _input_atom(cfg: ExperimentConfig):
    ppr = cfg.points_per_radius or (32 if cfg.dim == 1 else 6)
    spec = GridSpec(cfg.dim, cfg.atom_half_width, 1.0 / ppr)
    return make_atom(spec, Ball((0.0,) * cfg.dim, 1.0), cfg.p, lambda x: x[..., 0])


def cmd_verify_kernel(cfg: ExperimentConfig, out: Path) -> int:
    K = cfg.kernel_spec()
    recs = kernel_checks(K, cfg.verify_N, cfg.samples, cfg.seed, cfg.slot)
    _write_json(out / "kernel_report.json", {"kernel": K.name, "dim": K.dim, "epsilon": K.epsilon,
                                              "A": K.A, "C_hom": K.C_hom, "checks": recs})
    for r in recs:
        log.info("%-22s measured=%-12.6g %s", r["name"], r["measured"], "pass" if r["passed"] else "FAIL")
    return EXIT_OK if all(r["passed"] for r in recs) else EXIT_ERROR


def cmd_factorize(cfg: ExperimentConfig, out: Path) -> int:
    K = cfg.kernel_spec()
    f = AtomicDecomposition([(1.0, _input_atom(cfg))], cfg.p)
    res = uchiyama_factorize(
        K, cfg.slot, f, cfg.exponents(), int(cfg.N), int(cfg.rounds), cfg.stop_tol, cfg.points_per_radius,
        progress=lambda M, n, e: log.info("round %d: %d triples, error^p = %.6g", M, n, e),
    )
    _write_csv(out / "decay.csv", DECAY_COLUMNS, res.decay_table())
    save_factorization(out / "factorization.json", res)
    log.info("factorization norm %.6g, input quasinorm %.6g", factorization_norm(res), atomic_quasinorm(f))
    if res.non_contraction:
        log.warning("non-contraction: error grew in two consecutive rounds")
        return EXIT_NONCONTRACTION
    return EXIT_OK


def cmd_commutator(cfg: ExperimentConfig, out: Path) -> int:
    K = cfg.kernel_spec()
    exps = cfg.exponents()
    spec = cfg.commutator_grid()
    alpha = exps.lip_alpha(cfg.dim)
    rows = []
    for name in cfg.b_family:
        b = lip_member(name, spec, alpha)
        est = estimate_commutator_norm(K, cfg.slot, b, exps, cfg.trials, cfg.seed)
        rng = np.random.default_rng(cfg.seed)
        errs = [
            duality_pairing_check(K, cfg.slot, b, *random_separated_triple(spec, rng)).rel_err
            for _ in range(cfg.duality_triples)
        ]
        rows.append(
            {
                "b": name,
                "seminorm_est": b.seminorm_est,
                "commutator_estimate": est,
                "ratio": est / b.seminorm_est if b.seminorm_est > 0 else 0.0,
                "duality_rel_err": max(errs, default=0.0),
            }
        )
        log.info("%-14s seminorm=%.6g estimate=%.6g", name, b.seminorm_est, est)
    _write_csv(out / "commutator.csv", ["b", "seminorm_est", "commutator_estimate", "ratio", "duality_rel_err"], rows)
    return EXIT_OK


def cmd_decay_table(cfg: ExperimentConfig, out: Path) -> int:
    K = cfg.kernel_spec()
    exps = cfg.exponents()
    a = _input_atom(cfg)
    rows, prev = [], None
    for N in cfg.decay_N:
        ap = approximate_atom(K, a, exps, cfg.slot, int(N))
        sup = ap.error.sup()
        info = ap.triple.info
        rows.append(
            {
                "N": int(N),
                "sup_error": sup,
                "W1_sup": info["W1_sup"],
                "W2_sup": info["W2_sup"],
                "halving_ratio": sup / prev if prev else "",
                "triple_norm_budget": info["budget_ratio"],
                "decay_ratio": info["decay_ratio"],
            }
        )
        prev = sup
    cols = ["N", "sup_error", "W1_sup", "W2_sup", "halving_ratio", "triple_norm_budget", "decay_ratio"]
    _write_csv(out / "decay_table.csv", cols, rows)
    return EXIT_OK


COMMANDS = {
    "verify-kernel": cmd_verify_kernel,
    "factorize": cmd_factorize,
    "commutator": cmd_commutator,
    "decay-table": cmd_decay_table,
}


class _Parser(argparse.ArgumentParser):
    # exit code 2 is reserved for non-contraction
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="hpfact", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=Path, help="JSON experiment config (defaults apply when omitted)")
        sp.add_argument("--seed", type=int, help="override the config seed")
        sp.add_argument("--out", type=Path, help="output directory (default: config out_dir)")
        sp.add_argument("--threads", type=int, default=1, help="quadrature threads; never changes results")
        sp.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
        if args.seed is not None:
            cfg.seed = args.seed
        cfg.validate()
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
    except (ConfigError, OSError, TypeError) as exc:
        print(f"hpfact: config error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    out = args.out or Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    operators.set_threads(args.threads)
    try:
        return COMMANDS[args.command](cfg, out)
    except (ValueError, ArithmeticError) as exc:
        print(f"hpfact: {args.command} failed: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
