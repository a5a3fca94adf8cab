"""Two-squares scene (128 x 128) reconstructed by rFISTA for each big-square OSC.

One ``twopixel run`` per OSC value goes to ``<out>/osc_<value>``; the PSNR
of each run is gathered into ``<out>/two_squares.csv``.
"""

import json
import sys
from pathlib import Path

from _common import launch, parser
from twopixel import cli
from twopixel.experiments import two_squares_experiment

OSCS = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)

if __name__ == "__main__":
    p = parser(__doc__.splitlines()[0], "results/two_squares")
    p.set_defaults(seed=11)
    args = p.parse_args()
    rows = []
    for osc in OSCS:
        out = Path(args.out) / f"osc_{osc:.1f}"
        code = launch("run", two_squares_experiment(osc), args, out=out)
        if code != 0:
            sys.exit(code)
        metrics = json.loads((out / "manifest.json").read_text())["metrics"]
        rows.append({"osc_big": osc, "psnr_db": metrics["psnr_db"]})
    cli.write_csv(Path(args.out) / "two_squares.csv", rows)
    for row in rows:
        print(f"osc_big {row['osc_big']:.1f}: {row['psnr_db']:.2f} dB")
