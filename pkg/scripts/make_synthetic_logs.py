"""Write synthetic magnetometer logs for the standard driving profiles.

    python3 scripts/make_synthetic_logs.py --out data/ [--noise 5] [--seed 0]
"""

import argparse
from pathlib import Path

import numpy as np

from isotraj import synth
from isotraj.ingest import format_log

PROFILES = {
    "straight": lambda: synth.straight(500, 30.0),
    "circle": lambda: synth.constant_turn(400, 9.0),
    "left_turn": lambda: synth.turn(300, 90.0, lead=100),
    "right_turn": lambda: synth.turn(300, -90.0, lead=100),
    "lane_change": lambda: synth.lane_change(300, 8.0, lead=100),
    "loop": synth.loop_route,
}


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    parser.add_argument("--out", default="data")
    parser.add_argument("--noise", type=float, default=0.0, help="uniform heading noise amplitude [deg]")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    for name, make in PROFILES.items():
        headings = make()
        if args.noise > 0:
            headings = synth.add_noise(headings, args.noise, rng)
        path = out / f"{name}.csv"
        path.write_text(format_log(synth.synth_log(headings)), encoding="utf-8", newline="")
        print(f"{path}: {len(headings)} samples")


if __name__ == "__main__":
    main()
