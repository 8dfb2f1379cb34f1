"""Smoke test for the gdiode_py extension.

Build and install first:
    pip install --no-build-isolation ./crates/python
then run:
    python python/smoke_test.py
"""

import math
import sys

import gdiode_py as gd


def lorentzian(f, c, fwhm):
    h = 0.5 * fwhm
    return h * h / ((f - c) ** 2 + h * h)


def main():
    toml = gd.default_config()
    assert "[device]" in toml and "[solver]" in toml

    eq = gd.equilibrium()
    psi = eq["psi"]
    drop = max(psi) - min(psi)
    assert 0.5 < drop < 1.2, drop
    assert len(eq["x_um"]) == len(eq["n"]) > 1000

    points = gd.bias_sweep([0.0, -10.0, -50.0])
    widths = [w for _, _, w in points]
    assert widths == sorted(widths), widths

    volts, amps = gd.iv([0.0, -20.0, 20.0])
    assert amps[2] > 1e3 * abs(amps[1]), amps

    offsets = [-300.0 + 600.0 * k / 1023 for k in range(1024)]
    spectrum = [3.0 * lorentzian(f, 12.5, 20.0) + 0.1 for f in offsets]
    fit = gd.fit_lorentzian(offsets, spectrum)
    assert fit["converged"] and not fit["no_line"]
    assert math.isclose(fit["center_ghz"], 12.5, abs_tol=1e-3), fit
    assert math.isclose(fit["fwhm_ghz"], 20.0, rel_tol=1e-3), fit

    try:
        gd.default_config("[solver]\nabsolute_tolerance = -1.0\n")
    except ValueError as e:
        assert "solver" in str(e)
    else:
        raise AssertionError("negative tolerance was accepted")

    scale = gd.calibrate()
    volts, shifts = gd.stark_shifts()
    assert scale > 0
    assert abs(shifts[1]) < 2.0 and shifts[-1] < -50.0, shifts

    print(f"gdiode_py {gd.__version__}: ok (scale {scale:.4e} GHz/(V/cm), "
          f"shift at {volts[-1]:.0f} V = {shifts[-1]:.1f} GHz)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
