"""Command line: ``pqsphoton simulate | estimate | experiment``.

Exit codes: 0 success, 1 invalid config or record, 2 I/O failure,
3 numerical failure. ``PQSPHOTON_WORKERS`` sets the experiment worker
count; ``PQSPHOTON_DISABLE_NUMBA=1`` forces the pure-numpy kernels.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from . import io as pio
from .errors import ConfigError, PQSError
from .estimator import smooth, summarize
from .experiments import (
    EXP1_REALIZATIONS,
    EXP2_RUNS,
    FULL_EXP1_REALIZATIONS,
    FULL_EXP2_RUNS,
    experiment1_config,
    experiment2_config,
    run_experiment1,
    run_experiment2,
)
from .simulate import SimConfig, realization_rngs, simulate_run

log = logging.getLogger("pqsphoton")


def cmd_simulate(config: SimConfig, out_dir, n_records: int, seed: int) -> list[Path]:
    """Write ``n_records`` record files plus ``manifest.json`` into ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, rng in enumerate(realization_rngs(seed, n_records)):
        record = simulate_run(config, rng)
        record = replace(record, seed=seed, meta={**record.meta, "realization": i})
        path = out_dir / f"record_{i:05d}.txt"
        pio.write_record(record, path)
        paths.append(path)
    manifest = out_dir / "manifest.json"
    pio.RunManifest(
        pio.config_hash(config), seed, f"simulate n_records={n_records}",
        [p.name for p in paths], __version__,
    ).write(manifest)
    return paths + [manifest]


def cmd_estimate(record_path, out_path) -> Path:
    """Forward, backward and PQS estimates of one record as CSV."""
    record = pio.read_record(record_path).without_truth()
    traj = smooth(record.params, record)
    summaries = {k: summarize(getattr(traj, k), traj.times) for k in ("forward", "backward", "pqs")}
    out_path = Path(out_path)
    pio.atomic_write(out_path, pio.trajectory_csv(traj, summaries))
    return out_path


def cmd_experiment(which: int, config: SimConfig | None, out_dir, n_realizations=None, seed=None, full_scale=False):
    out_dir = Path(out_dir)
    if which == 1:
        config = config or experiment1_config()
        n = n_realizations if n_realizations is not None else (FULL_EXP1_REALIZATIONS if full_scale else EXP1_REALIZATIONS)
        seed = config.seed if seed is None else seed
        result = run_experiment1(config, n, seed)
    elif which == 2:
        config = config or experiment2_config()
        if config.injection is None:
            raise ConfigError("experiment 2 needs injection_sample in the config")
        n = n_realizations if n_realizations is not None else (FULL_EXP2_RUNS if full_scale else EXP2_RUNS)
        seed = config.seed if seed is None else seed
        result = run_experiment2(config, n, seed)
    else:
        raise ValueError(f"unknown experiment {which}")
    csv_path = out_dir / f"experiment{which}.csv"
    json_path = out_dir / f"experiment{which}.json"
    sidecar = result.summary()
    sidecar["requested_realizations"] = n
    sidecar["config"] = pio.dump_config(config)
    pio.atomic_write(csv_path, pio.experiment_csv(result))
    pio.atomic_write(json_path, pio.to_json(sidecar))
    pio.RunManifest(
        pio.config_hash(config), seed, f"experiment {which} realizations={n}",
        [csv_path.name, json_path.name], __version__,
    ).write(out_dir / "manifest.json")
    return result, [csv_path, json_path, out_dir / "manifest.json"]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pqsphoton", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="generate synthetic detection records")
    s.add_argument("--config", help="flat key = value config file (defaults: experiment 1)")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--records", "--realizations", dest="records", type=int, default=1)
    s.add_argument("--seed", type=int, default=None)

    e = sub.add_parser("estimate", help="forward/backward/PQS estimate of a record file")
    e.add_argument("record")
    e.add_argument("--out", required=True, help="output CSV path")

    x = sub.add_parser("experiment", help="run experiment 1 or 2 over an ensemble")
    x.add_argument("which", type=int, choices=(1, 2))
    x.add_argument("--config")
    x.add_argument("--out", required=True, help="output directory")
    x.add_argument("--realizations", type=int, default=None,
                   help="realizations (experiment 1) or simulated runs (experiment 2)")
    x.add_argument("--seed", type=int, default=None)
    x.add_argument("--full-scale", action="store_true", help="use the full reference ensemble sizes (6000 realizations, 16320 runs)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "simulate":
            config = pio.load_config(args.config) if args.config else experiment1_config()
            seed = config.seed if args.seed is None else args.seed
            paths = cmd_simulate(config, args.out, args.records, seed)
            log.info("wrote %d files to %s", len(paths), args.out)
        elif args.command == "estimate":
            cmd_estimate(args.record, args.out)
        else:
            config = pio.load_config(args.config) if args.config else None
            result, _ = cmd_experiment(args.which, config, args.out, args.realizations, args.seed, args.full_scale)
            if result.failures:
                log.warning("%d realizations failed and were excluded", len(result.failures))
    except PQSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
