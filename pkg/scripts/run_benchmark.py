"""Method comparison on a manifest: oracle magnitudes and IRM-applied magnitudes.

Writes report.json / report.csv to --out and prints a table of mean SI-SDRi.
"""
import argparse
from pathlib import Path

from trigphase.cli import run_bench, write_report

SWEEP = {
    "runs": [
        {"method": "mixture_phase"},
        {"method": "misi", "misi_k": 5},
        {"method": "misi", "misi_k": 5, "starting_phase": "gd_viterbi"},
        {"method": "gd_viterbi"},
        {"method": "oracle_sign"},
        {"method": "mixture_phase", "estimator": "irm_applied"},
        {"method": "misi", "misi_k": 5, "estimator": "irm_applied"},
        {"method": "mixture_phase", "estimator": "psm_clamped_applied"},
        {"method": "misi", "misi_k": 5, "estimator": "psm_clamped_applied"},
    ]
}


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--manifest", default=str(Path(__file__).resolve().parents[1] / "manifests" / "standard50.txt"))
    p.add_argument("--out", default="runs/benchmark")
    p.add_argument("--jobs", type=int, default=1)
    args = p.parse_args()
    report = run_bench(args.manifest, SWEEP, args.jobs)
    write_report(report, Path(args.out))
    print(f"{'method':45s} {'SI-SDRi mean':>12s} {'median':>8s}")
    for method, a in report.aggregates().items():
        print(f"{method:45s} {a['si_sdri_mean']:12.2f} {a['si_sdri_median']:8.2f}")


if __name__ == "__main__":
    main()
