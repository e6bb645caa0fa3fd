"""Write a seeded synthetic benchmark manifest."""
import argparse
from pathlib import Path

from trigphase.scenes import SYNTH_KINDS, format_manifest, standard_manifest


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("out")
    p.add_argument("--n-scenes", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--kind", choices=SYNTH_KINDS, default="am_harmonic")
    args = p.parse_args()
    text = format_manifest(standard_manifest(args.n_scenes, args.seed, args.kind))
    Path(args.out).write_text(text)
    print(f"wrote {args.n_scenes} scenes to {args.out}")


if __name__ == "__main__":
    main()
