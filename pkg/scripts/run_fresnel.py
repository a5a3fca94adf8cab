"""Reflectances and kappa(A) over incidence angle (17-65 deg) and wavelength (450-850 nm).

    python scripts/run_fresnel.py --out results/fresnel
"""

import sys

from _common import launch, parser
from twopixel.experiments import ExperimentSpec

if __name__ == "__main__":
    args = parser(__doc__.splitlines()[0], "results/fresnel").parse_args()
    sys.exit(launch("fresnel", ExperimentSpec(), args))
