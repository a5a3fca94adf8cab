"""rFISTA phase map over incidence angle and compression rate at SNR 60 dB (N = 256).

The default grid is the reduced 6 x 8 one; ``--full`` uses every degree from
17 to 65 and compression rates in steps of 4%.
"""

import sys

import numpy as np

from _common import launch, parser
from twopixel.experiments import ExperimentSpec, SensingSpec, SweepSpec
from twopixel.imaging import SceneSpec

if __name__ == "__main__":
    p = parser(__doc__.splitlines()[0], "results/sweep_phase")
    p.add_argument("--full", action="store_true", help="dense grid")
    p.add_argument("--realizations", type=int, default=4)
    args = p.parse_args()
    if args.full:
        thetas = tuple(float(t) for t in range(17, 66))
        rates = tuple(float(r) for r in np.round(np.arange(0.0, 0.97, 0.04), 2))
    else:
        thetas = (27.0, 35.0, 42.0, 50.0, 55.0, 60.0)
        rates = (0.0, 0.2, 0.3, 0.5, 0.7, 0.8, 0.92, 0.96)
    spec = ExperimentSpec(scene=SceneSpec(size=256), sensing=SensingSpec(snr_db=60.0),
                          sweep=SweepSpec(theta_deg=thetas, compression_rate=rates,
                                          realizations=args.realizations))
    sys.exit(launch("sweep-phase", spec, args))
