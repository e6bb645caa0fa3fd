"""SI-SDRi of Viterbi sign decoding (and MISI started from it) as group-delay noise grows."""
import argparse
from pathlib import Path

from trigphase.cli import run_bench

SPREADS = [0.0, 0.1, 0.2, 0.4, 0.8, 1.6]


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--manifest", default=str(Path(__file__).resolve().parents[1] / "manifests" / "standard50.txt"))
    p.add_argument("--jobs", type=int, default=1)
    args = p.parse_args()
    runs = [{"method": "mixture_phase"}, {"method": "misi", "misi_k": 5}]
    for s in SPREADS:
        gd = "oracle" if s == 0 else f"perturbed:{s}"
        runs += [{"method": "gd_viterbi", "gd_source": gd},
                 {"method": "misi", "misi_k": 5, "starting_phase": "gd_viterbi", "gd_source": gd}]
    agg = run_bench(args.manifest, {"runs": runs}, args.jobs).aggregates()
    for method, a in agg.items():
        print(f"{method:50s} {a['si_sdri_mean']:8.2f} dB")


if __name__ == "__main__":
    main()
