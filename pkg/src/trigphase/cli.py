"""Command-line driver: ``trigphase {mix,reconstruct,bench,eval}``.

Exit codes: 0 success, 1 some scenes failed, 2 invalid config or manifest.
"""
from __future__ import annotations

import argparse
import csv
import itertools
import json
import logging
import os
import sys
from dataclasses import asdict
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .metrics import EvalRecord, EvalReport, capped_db, si_sdr, si_sdri
from .pipeline import (
    ESTIMATORS,
    METHODS,
    START_PHASES,
    ConfigError,
    RunConfig,
    analyse,
    evaluate,
)
from .scenes import ManifestError, MixtureScene, load_scene, read_manifest, read_wav, write_wav
from .spectral import StftConfig, Waveform

log = logging.getLogger("trigphase")

EXIT_OK, EXIT_PARTIAL, EXIT_CONFIG = 0, 1, 2
WAV_LSB = 1.0 / 32768


class UsageError(Exception):
    pass


def _dump_json(obj, path: Path):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _resolve_seed(args, file_cfg: dict) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("TRIGPHASE_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"TRIGPHASE_SEED must be an integer, got {env!r}") from None
    return int(file_cfg.get("seed", 0))


def _load_config_file(path) -> dict:
    if path is None:
        return {}
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise UsageError(f"config {path} must hold a JSON object")
    return cfg


def _csv_list(value):
    return [v.strip() for v in value.split(",") if v.strip()] if value else None


# ---------------------------------------------------------------- mix

def cmd_mix(args) -> int:
    entries = read_manifest(args.manifest)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    base = Path(args.manifest).parent
    index = []
    for e in entries:
        scene = load_scene(e, base)
        names = {"mixture": f"{e.id}_mix.wav", "s1": f"{e.id}_s1.wav", "s2": f"{e.id}_s2.wav"}
        clipped = write_wav(out / names["mixture"], scene.mixture)
        for i, key in enumerate(("s1", "s2")):
            clipped += write_wav(out / names[key], scene.sources[i])
        index.append({"id": scene.id, **names, "snr_db": e.snr_db, "seed": e.seed,
                      "sample_rate_hz": scene.sample_rate_hz, "n_samples": len(scene.mixture),
                      "clipped_samples": clipped})
    _dump_json({"schema": 1, "scenes": index}, out / "index.json")
    log.info("wrote %d scenes to %s", len(index), out)
    return EXIT_OK


# ---------------------------------------------------------------- reconstruct

def _run_config(args, file_cfg: dict) -> RunConfig:
    cfg = dict(file_cfg)
    for key, attr in (("method", "method"), ("misi_k", "misi_k"), ("starting_phase", "start_phase"),
                      ("estimator", "estimator"), ("gd_source", "gd")):
        v = getattr(args, attr, None)
        if v is not None:
            cfg[key] = v
    cfg["seed"] = _resolve_seed(args, file_cfg)
    if getattr(args, "out", None):
        cfg["output"] = str(args.out)
    return RunConfig.from_dict(cfg)


def _scene_from_wavs(mix_path, source_paths, scene_id) -> MixtureScene:
    sources = [read_wav(p) for p in source_paths]
    n = min(len(s) for s in sources)
    rate = sources[0].sample_rate_hz
    if any(s.sample_rate_hz != rate for s in sources):
        raise UsageError("source files have different sample rates")
    sources = [Waveform(s.samples[:n], rate) for s in sources]
    total = np.sum([s.samples for s in sources], axis=0)
    if mix_path is not None:
        mix = read_wav(mix_path)
        if len(mix) < n or np.max(np.abs(mix.samples[:n] - total)) > 4 * WAV_LSB:
            raise UsageError(f"{mix_path} is not the sum of the given sources")
    # quantised files only add up to within a few LSBs; the sum keeps the scene exact
    return MixtureScene(Waveform(total, rate), sources, float("nan"), 0, scene_id)


def cmd_reconstruct(args) -> int:
    file_cfg = _load_config_file(args.config)
    run = _run_config(args, file_cfg)
    if args.manifest:
        if not args.scene:
            raise UsageError("--manifest needs --scene ID")
        entries = {e.id: e for e in read_manifest(args.manifest)}
        if args.scene not in entries:
            raise UsageError(f"scene {args.scene!r} not in {args.manifest}")
        scene = load_scene(entries[args.scene], Path(args.manifest).parent, run.stft.sample_rate_hz)
    else:
        if not args.sources:
            raise UsageError(f"method {run.method!r} with estimator {run.estimator!r} needs the "
                             "reference sources (--sources); no learned estimator is available")
        scene = _scene_from_wavs(args.mix, args.sources, args.scene or Path(args.sources[0]).stem)
    if scene.sample_rate_hz != run.stft.sample_rate_hz:
        run = RunConfig.from_dict({**run.to_dict(), "stft": {**run.to_dict()["stft"],
                                                             "sample_rate_hz": scene.sample_rate_hz}})
    rec, record = evaluate(scene, run)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for i, w in enumerate(rec.waveforms, 1):
        name = f"{scene.id}_est{i}.wav"
        write_wav(out / name, w)
        files.append(name)
    _dump_json({"schema": 1, "config": run.to_dict(), "record": asdict(record), "files": files,
                "cheating_oracle": record.uses_ground_truth_phase}, out / f"{scene.id}.json")
    print(json.dumps({"scene": scene.id, "method": record.method, "si_sdr_db": record.si_sdr_db}))
    return EXIT_OK


# ---------------------------------------------------------------- bench

def sweep_runs(sweep: dict) -> list[RunConfig]:
    """Expand a sweep (lists of methods, estimators, gd sources, start phases) into run configs.

    Axes that do not apply to a method are collapsed; duplicate labels are dropped.
    """
    if "runs" in sweep:
        runs = [RunConfig.from_dict({"stft": sweep.get("stft", {}), "seed": sweep.get("seed", 0),
                                     "output": sweep.get("output"), **r})
                for r in sweep["runs"]]
    else:
        methods = sweep.get("methods", ["mixture_phase", "misi"])
        estimators = sweep.get("estimators", ["oracle"])
        gds = sweep.get("gd_sources", ["oracle"])
        starts = sweep.get("starting_phases", ["mixture"])
        ks = sweep.get("misi_k", [5])
        ks = ks if isinstance(ks, list) else [ks]
        runs = []
        for m, est in itertools.product(methods, estimators):
            for start, k, gd in itertools.product(starts if m == "misi" else ["mixture"],
                                                  ks if m == "misi" else [5], gds):
                run = RunConfig(stft=StftConfig(**sweep.get("stft", {})), method=m, misi_k=k,
                                starting_phase=start, estimator=est, gd_source=gd,
                                seed=sweep.get("seed", 0), output=sweep.get("output"))
                if not run.uses_gd and gd != gds[0]:
                    continue
                if not run.uses_gd:
                    run.gd_source = "oracle"
                runs.append(run)
    seen, unique = set(), []
    for r in runs:
        if r.label not in seen:
            seen.add(r.label)
            unique.append(r)
    return unique


def _bench_scene(job):
    entry, base_dir, runs = job
    records = []
    try:
        scene = load_scene(entry, base_dir, runs[0].stft.sample_rate_hz)
        an = analyse(scene, runs[0].stft)
    except Exception as exc:  # recorded per scene, the sweep continues
        return [EvalRecord(entry.id, r.label, [], [], [], error=f"{type(exc).__name__}: {exc}") for r in runs]
    for run in runs:
        try:
            records.append(evaluate(scene, run, an)[1])
        except Exception as exc:
            records.append(EvalRecord(entry.id, run.label, [], [], [], error=f"{type(exc).__name__}: {exc}"))
    return records


def run_bench(manifest, sweep: dict, jobs: int = 1) -> EvalReport:
    entries = read_manifest(manifest)
    runs = sweep_runs(sweep)
    if not runs:
        raise ConfigError("sweep expands to no runs")
    stfts = {r.stft for r in runs}
    if len(stfts) != 1:
        raise ConfigError("all runs in one bench must share the STFT configuration")
    base = Path(manifest).parent
    job_list = [(e, base, runs) for e in entries]
    if jobs > 1 and len(job_list) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_bench_scene, job_list))
    else:
        chunks = [_bench_scene(j) for j in job_list]
    records = [r for chunk in chunks for r in chunk]
    config = {"manifest": str(manifest), "runs": [r.to_dict() for r in runs]}
    return EvalReport(records, config)


def write_report(report: EvalReport, out: Path):
    out.mkdir(parents=True, exist_ok=True)
    _dump_json(report.to_dict(), out / "report.json")
    with open(out / "report.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=EvalReport.CSV_FIELDS, lineterminator="\n")
        w.writeheader()
        for row in report.csv_rows():
            w.writerow(row)


def cmd_bench(args) -> int:
    sweep = _load_config_file(args.config)
    for key, attr in (("methods", "method"), ("estimators", "estimator"), ("gd_sources", "gd"),
                      ("starting_phases", "start_phase")):
        v = _csv_list(getattr(args, attr))
        if v:
            sweep[key] = v
    if args.misi_k is not None:
        sweep["misi_k"] = [args.misi_k]
    sweep["seed"] = _resolve_seed(args, sweep)
    out = Path(args.out)
    sweep["output"] = str(out)
    report = run_bench(args.manifest, sweep, args.jobs)
    write_report(report, out)
    failed = [r for r in report.records if r.error]
    for r in failed:
        log.error("scene %s / %s failed: %s", r.scene_id, r.method, r.error)
    agg = report.aggregates()
    for method, a in agg.items():
        mean = a["si_sdri_mean"]
        print(f"{method:55s} SI-SDRi mean {mean if mean is None else round(mean, 3)} dB "
              f"({a['n_records']} scenes, {a['n_failed']} failed, {a['n_capped']} capped)")
    return EXIT_PARTIAL if failed else EXIT_OK


# ---------------------------------------------------------------- eval

def cmd_eval(args) -> int:
    if args.report:
        report = EvalReport.from_dict(json.loads(Path(args.report).read_text()))
        print(json.dumps(report.aggregates(), indent=2, sort_keys=True))
        return EXIT_OK
    if not args.ref or not args.est or len(args.ref) != len(args.est):
        raise UsageError("eval needs --report, or matching --ref and --est lists")
    refs = [read_wav(p) for p in args.ref]
    ests = [read_wav(p) for p in args.est]
    mix = read_wav(args.mix) if args.mix else None
    rows = []
    for rp, ep, r, e in zip(args.ref, args.est, refs, ests):
        n = min(len(r), len(e), len(mix) if mix else len(r))
        row = {"ref": rp, "est": ep}
        row["si_sdr_db"], row["capped"] = capped_db(si_sdr(e.samples[:n], r.samples[:n]))
        if mix is not None:
            row["si_sdri_db"], c = capped_db(si_sdri(e.samples[:n], r.samples[:n], mix.samples[:n]))
            row["capped"] = row["capped"] or c
        rows.append(row)
    print(json.dumps(rows, indent=2))
    return EXIT_OK


# ---------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="trigphase", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, multi=False):
        sp.add_argument("--config", help="JSON file with run (reconstruct) or sweep (bench) settings")
        hint = " (comma-separated list)" if multi else ""
        sp.add_argument("--method", help=f"one of {', '.join(METHODS)}{hint}")
        sp.add_argument("--misi-k", type=int, dest="misi_k")
        sp.add_argument("--start-phase", dest="start_phase", help=f"one of {', '.join(START_PHASES)}{hint}")
        sp.add_argument("--estimator", help=f"one of {', '.join(ESTIMATORS)} (perturbed:<db>){hint}")
        sp.add_argument("--gd", help=f"oracle or perturbed:<spread radians>{hint}")
        sp.add_argument("--seed", type=int, help="falls back to $TRIGPHASE_SEED, then the config file")
        sp.add_argument("--out", required=True)

    m = sub.add_parser("mix", help="render manifest scenes to WAV files")
    m.add_argument("manifest")
    m.add_argument("--out", required=True)
    m.set_defaults(func=cmd_mix)

    r = sub.add_parser("reconstruct", help="separate one scene with one method")
    common(r)
    r.add_argument("--manifest")
    r.add_argument("--scene")
    r.add_argument("--mix")
    r.add_argument("--sources", nargs="+")
    r.set_defaults(func=cmd_reconstruct)

    b = sub.add_parser("bench", help="run a method x estimator sweep over a manifest")
    b.add_argument("manifest")
    common(b, multi=True)
    b.add_argument("--jobs", type=int, default=1)
    b.set_defaults(func=cmd_bench)

    e = sub.add_parser("eval", help="score separated WAVs or re-aggregate a report")
    e.add_argument("--report")
    e.add_argument("--ref", nargs="+")
    e.add_argument("--est", nargs="+")
    e.add_argument("--mix")
    e.set_defaults(func=cmd_eval)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError, ManifestError) as exc:
        print(f"trigphase: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError) as exc:
        print(f"trigphase: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
