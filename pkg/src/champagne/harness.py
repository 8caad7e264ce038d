"""CLI, run configuration, persistence, and combined reports.

Subcommands: generate | whitney | criteria | simulate | report.  All outputs
are deterministic for a fixed config and seed; manifest timestamps honor
SOURCE_DATE_EPOCH so full runs can be byte-identical when required.

Exit codes: 0 success, 2 invalid configuration, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .bubbles import (
    BubbleConfig,
    generate_shell_config,
    profile_from_json,
    weight_from_json,
)
from .criteria import (
    TailModel,
    aikawa_sum,
    classify_avoidability,
    quasi_additivity_interval,
    uniform_boundary_grid,
    wiener_dyadic_sum,
)
from .geometry import BallDomain
from .kernels import Constants
from .simulate import SimParams, estimate_hitting
from .whitney import bubble_cube_ratio_bound, decompose, max_cubes_per_ball

__all__ = ["RunConfig", "ConfigError", "main", "cmd_generate", "cmd_whitney",
           "cmd_criteria", "cmd_simulate", "cmd_report"]

FORMAT_VERSION = "1"

APPROXIMATION_NOTES = [
    "simulator: Euler jump-suppression chain; convergence to the censored process is assumed",
    "simulator: lifetime proxy delta_D < boundary_eps biases p_hat downward",
    "criteria: a.e.-boundary statements are proxied by a deterministic grid",
]


class ConfigError(ValueError):
    """Invalid run configuration (exit code 2)."""


@dataclass
class RunConfig:
    """Everything needed to reproduce a run; round-trips bit-exactly."""

    domain: BallDomain
    constants: Constants
    profile: object
    weight: object
    shell_a: float = 0.5
    shells: int = 4
    seed: int = 0
    whitney_max_level: int = 8
    grid_size: int = 32
    wiener_n_max: int = 24
    sim: SimParams | None = None
    out_dir: str | None = None
    per_trajectory_csv: bool = False
    format_version: str = FORMAT_VERSION

    def to_json(self) -> dict:
        out = {
            "format_version": self.format_version,
            "domain": self.domain.to_json(),
            "constants": self.constants.to_json(),
            "profile": self.profile.to_json(),
            "weight": self.weight.to_json(),
            "shells": {"a": self.shell_a, "count": self.shells, "seed": self.seed},
            "whitney": {"max_level": self.whitney_max_level},
            "criteria": {"grid": self.grid_size, "wiener_n_max": self.wiener_n_max},
            "per_trajectory_csv": self.per_trajectory_csv,
        }
        if self.sim is not None:
            out["sim"] = self.sim.to_json()
        if self.out_dir is not None:
            out["out_dir"] = self.out_dir
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "RunConfig":
        try:
            version = str(obj.get("format_version", FORMAT_VERSION))
            if version != FORMAT_VERSION:
                raise ConfigError(f"unsupported format_version {version!r}")
            if "profile" not in obj:
                raise ConfigError("missing field: profile")
            shells = obj.get("shells", {})
            sim = None
            if "sim" in obj:
                sim_obj = dict(obj["sim"])
                sim_obj.setdefault("alpha", obj["constants"]["alpha"])
                sim = SimParams(**sim_obj)
            return cls(
                domain=BallDomain.from_json(obj["domain"]),
                constants=Constants.from_json(obj["constants"]),
                profile=profile_from_json(obj["profile"]),
                weight=weight_from_json(obj.get("weight", {"kind": "one"})),
                shell_a=float(shells.get("a", 0.5)),
                shells=int(shells.get("count", 4)),
                seed=int(shells.get("seed", 0)),
                whitney_max_level=int(obj.get("whitney", {}).get("max_level", 8)),
                grid_size=int(obj.get("criteria", {}).get("grid", 32)),
                wiener_n_max=int(obj.get("criteria", {}).get("wiener_n_max", 24)),
                sim=sim,
                out_dir=obj.get("out_dir"),
                per_trajectory_csv=bool(obj.get("per_trajectory_csv", False)),
                format_version=version,
            )
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    def canonical_bytes(self) -> bytes:
        return json.dumps(self.to_json(), sort_keys=True, separators=(",", ":")).encode()

    def hash(self) -> str:
        return hashlib.sha256(self.canonical_bytes()).hexdigest()

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            with open(path) as f:
                obj = json.load(f)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_json(obj)


def _timestamps() -> dict:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    now = int(epoch) if epoch is not None else int(time.time())
    return {"unix": now, "source_date_epoch": epoch is not None}


def _write_json(path: Path, obj: dict) -> None:
    with open(path, "w") as f:
        json.dump(obj, f, sort_keys=True, indent=1)
        f.write("\n")


def _manifest(cfg: RunConfig, empirical: dict | None = None) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "config_hash": cfg.hash(),
        "seed": cfg.seed,
        "tool_version": __version__,
        "empirical": empirical or {},
        "timestamps": _timestamps(),
        "approximation_notes": APPROXIMATION_NOTES,
    }


def _build_config(cfg: RunConfig, out: Path) -> BubbleConfig:
    bubbles_csv = out / "bubbles.csv"
    if bubbles_csv.exists():
        return BubbleConfig.from_csv(bubbles_csv, cfg.domain)
    return generate_shell_config(cfg.domain, cfg.profile, cfg.shell_a, cfg.shells, cfg.seed)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_generate(cfg: RunConfig, out: Path) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    config = generate_shell_config(cfg.domain, cfg.profile, cfg.shell_a, cfg.shells, cfg.seed)
    config.to_csv(out / "bubbles.csv")
    _write_json(out / "run_config.json", cfg.to_json())
    empirical = {
        "n_bubbles": config.n,
        "ratio_sup": config.ratio_sup,
        "coverage_a": config.meta.get("coverage_a"),
        "shell_t": config.meta.get("t"),
    }
    _write_json(out / "manifest.json", _manifest(cfg, empirical))
    return out / "bubbles.csv"


def cmd_whitney(cfg: RunConfig, out: Path) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    dec = decompose(cfg.domain, cfg.whitney_max_level)
    dec.to_csv(out / "whitney.csv")
    per_level = {str(lev): int(dec.level_indices(lev).shape[0]) for lev in dec.levels}
    empirical = {
        "n_cubes": len(dec),
        "cubes_per_level": per_level,
        "coverage_threshold": dec.coverage_threshold,
    }
    _write_json(out / "manifest.json", _manifest(cfg, empirical))
    return out / "whitney.csv"


def cmd_criteria(cfg: RunConfig, out: Path, threads: int = 1) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    config = _build_config(cfg, out)
    if not (out / "bubbles.csv").exists():
        config.to_csv(out / "bubbles.csv")
    grid = uniform_boundary_grid(cfg.domain, cfg.grid_size)
    tail = TailModel(cfg.profile, cfg.weight)
    report = classify_avoidability(config, cfg.constants, grid, tail)

    dec = decompose(cfg.domain, cfg.whitney_max_level)
    empirical = {}
    traces = {}
    if config.n:
        empirical["c2_cubes_per_ball"] = max_cubes_per_ball(dec, config)
        empirical["C1_ratio_bound"] = bubble_cube_ratio_bound(dec, config, grid.points)
        qa = quasi_additivity_interval(dec, config, cfg.constants)
        empirical["quasi_additivity_interval"] = [qa[0], qa[1]]

        def trace_one(i: int):
            z = grid.points[i]
            aik = aikawa_sum(dec, config, z, cfg.constants)
            wie = wiener_dyadic_sum(dec, config, z, cfg.constants, cfg.wiener_n_max)
            return i, aik, wie

        if threads > 1:
            from concurrent.futures import ThreadPoolExecutor

            with ThreadPoolExecutor(max_workers=threads) as ex:
                results = list(ex.map(trace_one, range(grid.n)))
        else:
            results = [trace_one(i) for i in range(grid.n)]
        results.sort(key=lambda r: r[0])

        with open(out / "wiener_trace.csv", "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["z_index", "shell_n", "term_lower", "term_upper",
                        "cum_lower", "cum_upper", "truncated"])
            for i, _, wie in results:
                cums = wie.cumulative()
                truncated = set(int(t) for t in wie.truncated_shells)
                for sh, term, cum in zip(wie.shells, wie.terms, cums):
                    w.writerow([i, int(sh), repr(term.lower), repr(term.upper),
                                repr(cum.lower), repr(cum.upper), int(int(sh) in truncated)])
        traces["aikawa_total"] = [
            {"z_index": i, "lower": aik.total.lower, "upper": aik.total.upper,
             "n_cubes": int(aik.cube_ids.size), "warnings": aik.warnings}
            for i, aik, _ in results
        ]

    verdicts = {
        "format_version": FORMAT_VERSION,
        "aggregate": report.aggregate,
        "separation": report.separation,
        "per_z": [
            {"z": [float(v) for v in grid.points[i]], **report.per_z[i].to_json()}
            for i in range(grid.n)
        ],
        "notes": report.notes,
        "whitney": {
            "n_cubes": len(dec),
            "max_level": dec.max_level,
            "coverage_threshold": dec.coverage_threshold,
        },
        "traces": traces,
    }
    _write_json(out / "verdicts.json", verdicts)
    _write_json(out / "manifest.json", _manifest(cfg, empirical))
    return out / "verdicts.json"


def cmd_simulate(cfg: RunConfig, out: Path, threads: int = 1) -> Path:
    if cfg.sim is None:
        raise ConfigError("missing field: sim")
    out.mkdir(parents=True, exist_ok=True)
    config = _build_config(cfg, out)
    if not (out / "bubbles.csv").exists():
        config.to_csv(out / "bubbles.csv")
    x0 = cfg.domain.center
    estimate, outcomes = estimate_hitting(
        x0, config, cfg.sim, threads=threads, return_outcomes=True
    )
    payload = {"format_version": FORMAT_VERSION, **estimate.to_json()}
    _write_json(out / "estimate.json", payload)
    if cfg.per_trajectory_csv:
        tags, steps, bubbles, finals = outcomes
        from .simulate import _TAGS

        with open(out / "trajectories.csv", "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["traj", "outcome", "steps", "bubble"]
                       + [f"x_{j + 1}" for j in range(cfg.domain.dimension)])
            for t in range(len(tags)):
                w.writerow([t, _TAGS[int(tags[t])], int(steps[t]), int(bubbles[t])]
                           + [repr(float(v)) for v in finals[t]])
    _write_json(out / "manifest.json", _manifest(cfg))
    return out / "estimate.json"


def cmd_report(run_dirs, out_path: Path, fmt: str = "csv") -> Path:
    """One row per completed run: profile parameters, verdict, estimate."""
    rows = []
    for run in run_dirs:
        run = Path(run)
        manifest = run / "manifest.json"
        if not manifest.exists():
            print(f"warning: {run} has no manifest.json; skipped", file=sys.stderr)
            continue
        row = {"run": run.name}
        cfg_path = run / "run_config.json"
        if cfg_path.exists():
            with open(cfg_path) as f:
                cfg_obj = json.load(f)
            prof = cfg_obj.get("profile", {})
            row["profile_kind"] = prof.get("kind", "")
            row["profile_param"] = prof.get("c", prof.get("beta", prof.get("p", "")))
            row["weight_kind"] = cfg_obj.get("weight", {}).get("kind", "")
            row["a"] = cfg_obj.get("shells", {}).get("a", "")
            row["shells"] = cfg_obj.get("shells", {}).get("count", "")
        verdicts = run / "verdicts.json"
        if verdicts.exists():
            with open(verdicts) as f:
                row["verdict"] = json.load(f).get("aggregate", "")
        estimate = run / "estimate.json"
        if estimate.exists():
            with open(estimate) as f:
                est = json.load(f)
            row["p_hat"] = est.get("p_hat", "")
            row["ci_halfwidth"] = est.get("ci_halfwidth", "")
            row["timeout_fraction"] = est.get("timeout_fraction", "")
        rows.append(row)

    fields = ["run", "profile_kind", "profile_param", "weight_kind", "a", "shells",
              "verdict", "p_hat", "ci_halfwidth", "timeout_fraction"]
    out_path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        _write_json(out_path, {"format_version": FORMAT_VERSION, "rows": rows})
    else:
        with open(out_path, "w", newline="") as f:
            w = csv.DictWriter(f, fieldnames=fields)
            w.writeheader()
            for row in rows:
                w.writerow({k: row.get(k, "") for k in fields})
    return out_path


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="champagne", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("generate", "whitney", "criteria", "simulate"):
        q = sub.add_parser(name)
        q.add_argument("--config", required=True, help="JSON run configuration")
        q.add_argument("--out", required=True, help="output directory")
        q.add_argument("--seed", type=int, default=None, help="override config seed")
        q.add_argument("--threads", type=int, default=1)
        q.add_argument("--format", choices=("json", "csv"), default="json")
    r = sub.add_parser("report")
    r.add_argument("runs", nargs="*", help="completed run directories")
    r.add_argument("--out", required=True, help="output file")
    r.add_argument("--threads", type=int, default=1)
    r.add_argument("--format", choices=("json", "csv"), default="csv")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "report":
            cmd_report(args.runs, Path(args.out), args.format)
            return 0
        cfg = RunConfig.load(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
            if cfg.sim is not None:
                cfg.sim = SimParams(**{**cfg.sim.to_json(), "seed": args.seed})
        out = Path(args.out)
        if args.command == "generate":
            cmd_generate(cfg, out)
        elif args.command == "whitney":
            cmd_whitney(cfg, out)
        elif args.command == "criteria":
            cmd_criteria(cfg, out, threads=args.threads)
        elif args.command == "simulate":
            cmd_simulate(cfg, out, threads=args.threads)
        return 0
    except ConfigError as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
