"""Regenerate the bundled aluminum optical-constant table.

Values come from the Lorentz-Drude fit of Rakic, Djurisic, Elazar and Majewski,
"Optical properties of metallic films for vertical-cavity optoelectronic
devices", Appl. Opt. 37, 5271 (1998), evaluated on a 10 nm grid.

    python scripts/make_aluminum_table.py > src/twopixel/data/aluminum.txt
"""

import numpy as np

HC_EV_NM = 1239.84193
PLASMA_EV = 14.98
# (oscillator strength, damping eV, resonance eV); first entry is the Drude term
OSCILLATORS = [
    (0.523, 0.047, 0.0),
    (0.227, 0.333, 0.162),
    (0.050, 0.312, 1.544),
    (0.166, 1.351, 1.808),
    (0.030, 3.382, 3.473),
]


def permittivity(wavelength_nm):
    w = HC_EV_NM / wavelength_nm
    f0, g0, _ = OSCILLATORS[0]
    eps = 1 - f0 * PLASMA_EV**2 / (w * (w + 1j * g0))
    for f, g, w0 in OSCILLATORS[1:]:
        eps += f * PLASMA_EV**2 / (w0**2 - w**2 - 1j * w * g)
    return eps


def main():
    print("# Aluminum, Lorentz-Drude model of Rakic et al., Appl. Opt. 37, 5271 (1998)")
    print("# generated by scripts/make_aluminum_table.py")
    print("wavelength_nm n k")
    for lam in range(450, 851, 10):
        nt = np.sqrt(permittivity(lam))
        print(f"{lam:d} {nt.real:.6f} {nt.imag:.6f}")


if __name__ == "__main__":
    main()
