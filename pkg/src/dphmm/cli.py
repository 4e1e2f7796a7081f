"""Command-line surface.

Subcommands: simulate, fit, crp, summarize. Exit codes: 0 success, 1 usage,
2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np
import pandas as pd

from . import io, summary
from .dp import crp_draw
from .engine import (
    Dataset,
    McmcConfig,
    combine_chains,
    run_chains,
)
from .errors import DataError, DomainError, NumericalError
from .simulate import SimDesign, simulate

log = logging.getLogger("dphmm")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3


def _out_dir(args) -> Path:
    out = args.out_dir or os.environ.get("DPHMM_OUT_DIR", ".")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _cmd_simulate(args) -> int:
    with open(args.design) as fh:
        design_dict = json.load(fh)
    if args.seed is not None:
        design_dict["seed"] = args.seed
    design = SimDesign.from_dict(design_dict)
    t0 = time.time()
    result = simulate(design)
    out = _out_dir(args)
    manifest = io.RunManifest(
        command="simulate",
        config=design.to_dict(),
        seed=design.seed,
        input_digests={str(args.design): io.file_digest(args.design)},
        wall_clock_seconds=time.time() - t0,
    )
    run_id = manifest.run_id()
    io.write_capture_csv(
        result.histories, out / "capture.csv", design.model, run_id
    )
    io.write_ground_truth_csv(result, out / "truth.csv", run_id)
    manifest.write(out / "manifest.json")
    log.info("wrote %s and %s", out / "capture.csv", out / "truth.csv")
    return EXIT_OK


def _cmd_fit(args) -> int:
    cfg_dict = {}
    if args.config:
        with open(args.config) as fh:
            cfg_dict = json.load(fh)
    for name in ("iterations", "burn_in", "thin", "chains", "m", "seed", "model"):
        value = getattr(args, name)
        if value is not None:
            cfg_dict[name] = value
    cfg_dict.setdefault("iterations", 1000)
    config = McmcConfig(**cfg_dict)

    histories = io.parse_capture_csv(args.data, config.model)
    dataset = Dataset.from_histories(histories, config.model)

    t0 = time.time()
    results = run_chains(dataset, config)
    samples = combine_chains(results)
    out = _out_dir(args)
    manifest = io.RunManifest(
        command="fit",
        config=vars(config).copy(),
        seed=config.seed,
        input_digests={str(args.data): io.file_digest(args.data)},
        retained_per_chain=[len(r.samples) for r in results],
        wall_clock_seconds=time.time() - t0,
    )
    io.write_samples_csv(samples, dataset.ids, out / "samples.csv", manifest.run_id())
    manifest.write(out / "manifest.json")
    log.info("wrote %s (%d samples)", out / "samples.csv", len(samples))
    return EXIT_OK


def _cmd_crp(args) -> int:
    if args.n < 1 or args.alpha <= 0 or args.replicates < 1:
        raise DomainError("crp requires n >= 1, alpha > 0, replicates >= 1")
    rng = np.random.default_rng(args.seed)
    rows = [
        (r, crp_draw(args.n, args.alpha, lambda g: g.normal(), rng).n_clusters)
        for r in range(args.replicates)
    ]
    frame = pd.DataFrame(rows, columns=["replicate", "k"])
    if args.out:
        frame.to_csv(args.out, index=False)
        log.info("wrote %s", args.out)
    else:
        frame.to_csv(sys.stdout, index=False)
    return EXIT_OK


def _cmd_summarize(args) -> int:
    samples, ids = io.read_samples_csv(args.samples)
    tables = summary.summarize(samples, ids)
    out = _out_dir(args)
    run_id = None
    io._write_csv(tables.k_table, out / "k_counts.csv", run_id)
    io._write_csv(tables.log_alpha_density, out / "log_alpha_density.csv", run_id)
    io._write_csv(tables.pooled_density, out / "pooled_density.csv", run_id)
    io._write_csv(
        tables.individual_summary, out / "individual_summary.csv", run_id
    )
    with open(out / "summary_meta.json", "w") as fh:
        json.dump({"bandwidths": tables.bandwidths}, fh, indent=2)
    log.info("wrote summary tables to %s", out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dphmm",
        description=(
            "Hierarchical hidden Markov mark-recapture models with "
            "Dirichlet-process random effects"
        ),
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate synthetic capture histories")
    p.add_argument("--design", required=True, help="design JSON file")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out-dir", default=None)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("fit", help="run the MCMC sampler on a capture CSV")
    p.add_argument("--data", required=True, help="capture-history CSV")
    p.add_argument("--config", default=None, help="config JSON file")
    p.add_argument("--model", choices=["two-state", "three-state"], default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--chains", type=int, default=None)
    p.add_argument("--iterations", type=int, default=None)
    p.add_argument("--burn-in", dest="burn_in", type=int, default=None)
    p.add_argument("--thin", type=int, default=None)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--out-dir", default=None)
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("crp", help="simulate Chinese restaurant processes")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--replicates", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_crp)

    p = sub.add_parser("summarize", help="summary tables from a samples CSV")
    p.add_argument("--samples", required=True)
    p.add_argument("--out-dir", default=None)
    p.set_defaults(func=_cmd_summarize)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s"
    )
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    log.setLevel(logging.DEBUG if args.verbose else logging.INFO)
    try:
        return args.func(args)
    except NumericalError as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL
    except (DataError, DomainError, OSError, json.JSONDecodeError, KeyError,
            TypeError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
