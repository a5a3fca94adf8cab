"""Median PSNR of the three methods versus detector SNR (1D scene, N = 512, 40% compression).

With ``--paper-scale`` the solvers run L = 20000 iterations over 30 realizations.
"""

import sys

from _common import launch, parser
from twopixel.experiments import ExperimentSpec, SensingSpec, SweepSpec
from twopixel.imaging import SceneSpec

SNRS = (0.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0)

if __name__ == "__main__":
    args = parser(__doc__.splitlines()[0], "results/sweep_snr").parse_args()
    spec = ExperimentSpec(scene=SceneSpec(size=512), sensing=SensingSpec(compression_rate=0.4),
                          sweep=SweepSpec(snr_db=SNRS, realizations=10))
    sys.exit(launch("sweep-snr", spec, args))
