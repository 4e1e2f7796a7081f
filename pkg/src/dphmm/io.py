"""File formats: capture-history CSV, ground-truth CSV, long-format sample
CSV, and the run manifest.

All CSVs are plain comma-separated files; output files carry the run digest
in a leading `# run_id=...` comment line, which every reader here skips.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from . import __version__
from .engine import (
    THREE_STATE,
    TWO_STATE,
    DpSummary,
    FixedEffects,
    PosteriorSample,
)
from .errors import DataError
from .hmm import SEASON_WEEK_MAX, SEASON_WEEK_MIN, CaptureHistory

_FLOAT_FMT = "%.17g"


def _write_csv(frame: pd.DataFrame, path, run_id: str | None = None):
    with open(path, "w", newline="") as fh:
        if run_id:
            fh.write(f"# run_id={run_id}\n")
        frame.to_csv(fh, index=False, float_format=_FLOAT_FMT)


def _read_csv(path) -> pd.DataFrame:
    # round_trip parsing: floats written with %.17g read back bit-exactly
    return pd.read_csv(path, comment="#", float_precision="round_trip")


# -- capture histories ------------------------------------------------------


def parse_capture_csv(path, model: str) -> list:
    """Read capture histories.

    Two-state files carry (individual_id, occasion, seen); three-state files
    carry (individual_id, season, week, seen). Rows before an individual's
    first sighting are dropped; an individual never sighted is an error.
    """
    three_state = model == THREE_STATE
    want = (
        ["individual_id", "season", "week", "seen"]
        if three_state
        else ["individual_id", "occasion", "seen"]
    )
    try:
        frame = _read_csv(path)
    except Exception as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    missing = [c for c in want if c not in frame.columns]
    if missing:
        raise DataError(f"{path}: missing columns {missing}")

    # line numbers in the physical file: header is line 1 (plus an optional
    # run_id comment line, which pandas drops before numbering)
    offset = 2
    with open(path) as fh:
        if fh.readline().startswith("#"):
            offset = 3
    seen = frame["seen"]
    bad = ~seen.isin((0, 1))
    if bad.any():
        line = int(np.flatnonzero(bad.to_numpy())[0]) + offset
        raise DataError(f"{path}:{line}: seen must be 0 or 1")
    if three_state:
        weeks = frame["week"]
        bad = (weeks < SEASON_WEEK_MIN) | (weeks > SEASON_WEEK_MAX)
        if bad.any():
            line = int(np.flatnonzero(bad.to_numpy())[0]) + offset
            raise DataError(
                f"{path}:{line}: week outside "
                f"[{SEASON_WEEK_MIN}, {SEASON_WEEK_MAX}]"
            )

    histories = []
    for ind, grp in frame.groupby("individual_id", sort=True):
        if three_state:
            grp = grp.sort_values(["season", "week"])
            occ = grp[["season", "week"]].to_numpy(dtype=np.int64)
        else:
            grp = grp.sort_values("occasion")
            occ = grp["occasion"].to_numpy(dtype=np.int64)
        obs = grp["seen"].to_numpy(dtype=np.int8)
        hits = np.flatnonzero(obs == 1)
        if hits.size == 0:
            raise DataError(f"{path}: individual {ind!r} has no sighting")
        first = hits[0]
        histories.append(
            CaptureHistory(
                individual_id=str(ind),
                observations=obs[first:],
                occasions=occ[first:],
            )
        )
    if not histories:
        raise DataError(f"{path}: no capture histories")
    return histories


def write_capture_csv(histories, path, model: str, run_id=None):
    rows = []
    for h in histories:
        occ = h.occasions
        for t, x in enumerate(h.observations):
            if model == THREE_STATE:
                rows.append((h.individual_id, int(occ[t, 0]), int(occ[t, 1]), int(x)))
            else:
                o = t if occ is None else int(occ[t])
                rows.append((h.individual_id, o, int(x)))
    cols = (
        ["individual_id", "season", "week", "seen"]
        if model == THREE_STATE
        else ["individual_id", "occasion", "seen"]
    )
    _write_csv(pd.DataFrame(rows, columns=cols), path, run_id)


# -- ground truth -----------------------------------------------------------


def write_ground_truth_csv(sim_result, path, run_id=None):
    rows = []
    for name, (vals, labels) in sim_result.truth.items():
        for i, h in enumerate(sim_result.histories):
            label = int(labels[i]) if labels[i] >= 0 else "continuous"
            rows.append((h.individual_id, name, float(vals[i]), label))
    frame = pd.DataFrame(
        rows, columns=["individual_id", "parameter", "true_value", "group_label"]
    )
    _write_csv(frame, path, run_id)


def read_ground_truth_csv(path) -> dict:
    frame = _read_csv(path)
    out = {}
    for name, grp in frame.groupby("parameter"):
        grp = grp.sort_values("individual_id")
        out[name] = {
            "individual_id": grp["individual_id"].astype(str).tolist(),
            "true_value": grp["true_value"].to_numpy(dtype=float),
            "group_label": grp["group_label"].tolist(),
        }
    return out


# -- posterior samples ------------------------------------------------------


def samples_to_frame(samples, ids) -> pd.DataFrame:
    """Long format: one row per (iteration, chain, parameter, unit, value)."""
    parts = []
    n = len(ids)
    its = np.array([s.iteration for s in samples])
    chains = np.array([s.chain for s in samples])
    for name in ("pi", "gamma_hh", "gamma_aa"):
        vals = np.stack([getattr(s, name) for s in samples])
        parts.append(
            pd.DataFrame(
                {
                    "iteration": np.repeat(its, n),
                    "chain": np.repeat(chains, n),
                    "parameter": name,
                    "unit_id": np.tile(np.asarray(ids, dtype=object), len(samples)),
                    "value": vals.ravel(),
                }
            )
        )
    for name in ("pi", "gamma_hh", "gamma_aa"):
        for fld in ("alpha", "k", "base_a", "base_b"):
            vals = np.array([getattr(s.dp[name], fld) for s in samples], float)
            parts.append(
                pd.DataFrame(
                    {
                        "iteration": its,
                        "chain": chains,
                        "parameter": f"{fld}_{name}",
                        "unit_id": "",
                        "value": vals,
                    }
                )
            )
    if samples and samples[0].fixed is not None:
        n_seasons = samples[0].fixed.beta_yr.size
        beta = np.stack([s.fixed.beta_yr for s in samples])
        for j in range(n_seasons):
            parts.append(
                pd.DataFrame(
                    {
                        "iteration": its,
                        "chain": chains,
                        "parameter": "beta_yr",
                        "unit_id": str(j),
                        "value": beta[:, j],
                    }
                )
            )
        for name, vals in (
            ("gamma_d", [s.fixed.gamma_d for s in samples]),
            ("q", [s.fixed.q for s in samples]),
        ):
            parts.append(
                pd.DataFrame(
                    {
                        "iteration": its,
                        "chain": chains,
                        "parameter": name,
                        "unit_id": "",
                        "value": np.asarray(vals, float),
                    }
                )
            )
    parts.append(
        pd.DataFrame(
            {
                "iteration": its,
                "chain": chains,
                "parameter": "log_likelihood",
                "unit_id": "",
                "value": np.array([s.log_likelihood for s in samples]),
            }
        )
    )
    return pd.concat(parts, ignore_index=True)


def write_samples_csv(samples, ids, path, run_id=None):
    _write_csv(samples_to_frame(samples, ids), path, run_id)


def frame_to_samples(frame: pd.DataFrame):
    """Inverse of samples_to_frame: rebuild the PosteriorSample stream."""
    frame = frame.copy()
    frame["unit_id"] = frame["unit_id"].fillna("").astype(str)
    ind = frame[frame["parameter"] == "pi"]
    ids = ind[ind["iteration"] == ind["iteration"].iloc[0]]
    ids = ids[ids["chain"] == ids["chain"].iloc[0]]["unit_id"].tolist()
    has_fixed = (frame["parameter"] == "gamma_d").any()
    samples = []
    for (chain, it), grp in frame.groupby(["chain", "iteration"], sort=True):
        by = {p: g for p, g in grp.groupby("parameter")}

        def vec(name):
            return by[name].set_index("unit_id")["value"].reindex(ids).to_numpy()

        def scalar(name):
            return float(by[name]["value"].iloc[0])

        dp_summaries = {
            name: DpSummary(
                alpha=scalar(f"alpha_{name}"),
                k=int(scalar(f"k_{name}")),
                base_a=scalar(f"base_a_{name}"),
                base_b=scalar(f"base_b_{name}"),
            )
            for name in ("pi", "gamma_hh", "gamma_aa")
        }
        fixed = None
        if has_fixed:
            g = by["beta_yr"].copy()
            g["unit_id"] = g["unit_id"].astype(int)
            beta = g.sort_values("unit_id")["value"].to_numpy()
            fixed = FixedEffects(beta, scalar("gamma_d"), scalar("q"))
        samples.append(
            PosteriorSample(
                iteration=int(it),
                chain=int(chain),
                pi=vec("pi"),
                gamma_hh=vec("gamma_hh"),
                gamma_aa=vec("gamma_aa"),
                dp=dp_summaries,
                fixed=fixed,
                log_likelihood=scalar("log_likelihood"),
            )
        )
    samples.sort(key=lambda s: (s.chain, s.iteration))
    return samples, ids


def read_samples_csv(path):
    return frame_to_samples(_read_csv(path))


# -- manifest ---------------------------------------------------------------


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    command: str
    config: dict
    seed: int | None
    version: str = __version__
    input_digests: dict = field(default_factory=dict)
    retained_per_chain: list = field(default_factory=list)
    wall_clock_seconds: float = 0.0
    created: str = ""

    def run_id(self) -> str:
        core = {
            "command": self.command,
            "config": self.config,
            "seed": self.seed,
            "version": self.version,
            "input_digests": self.input_digests,
        }
        blob = json.dumps(core, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def write(self, path):
        payload = {
            "run_id": self.run_id(),
            "command": self.command,
            "config": self.config,
            "seed": self.seed,
            "version": self.version,
            "input_digests": self.input_digests,
            "retained_per_chain": self.retained_per_chain,
            "wall_clock_seconds": self.wall_clock_seconds,
            "created": self.created or time.strftime("%Y-%m-%dT%H:%M:%S"),
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True, default=str)
            fh.write("\n")


def read_manifest(path) -> dict:
    with open(path) as fh:
        return json.load(fh)
