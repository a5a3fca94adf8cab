"""PSNR versus incidence-angle bias, with and without +-1 deg per-mirror tilt errors.

SNR 80 dB and no compression (M = N - 1 patterns), N = 256.
"""

import sys

from _common import launch, parser
from twopixel.experiments import ExperimentSpec, SensingSpec, SweepSpec
from twopixel.imaging import SceneSpec

BIASES = (0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0)

if __name__ == "__main__":
    args = parser(__doc__.splitlines()[0], "results/sweep_bias").parse_args()
    spec = ExperimentSpec(scene=SceneSpec(size=256),
                          sensing=SensingSpec(compression_rate=0.0, snr_db=80.0),
                          sweep=SweepSpec(bias_deg=BIASES, realizations=3))
    sys.exit(launch("sweep-bias", spec, args))
