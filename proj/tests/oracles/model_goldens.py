#!/usr/bin/env python3
"""Arbitrary-precision oracle for the closed-form rate and ratio goldens.

Evaluates the printed rate expressions directly with mpmath at 50 digits.
The C++ tests freeze the values printed here; rerun to regenerate them.
"""
from mpmath import mp, mpf, pi, sqrt, exp, log

mp.dps = 50
TWO_PI = 2 * pi
HBAR = mpf("1.054571817e-34")
KB = mpf("1.380649e-23")


def gamma_par(g, eps, delta, kappa):
    return 4 * g**2 * sqrt(eps * (1 - eps)) * delta / (delta**2 + kappa**2 / 4)


def gamma_eff(gamma_m, g, eps, delta, kappa, omega_m):
    def lor(d):
        return 1 / (d**2 + kappa**2 / 4)
    return gamma_m + g**2 * kappa * (
        eps * lor(delta) - eps * lor(delta - 2 * omega_m)
        + (1 - eps) * lor(delta + 2 * omega_m) - (1 - eps) * lor(delta))


def main():
    kappa = TWO_PI * mpf("1.4e6")
    omega_m = TWO_PI * mpf("530e3")
    gamma_m = omega_m / mpf("6.4e6")
    g = TWO_PI * mpf("1e3")

    print("gamma_par(g=2pi*1kHz, eps=0.8, delta=2pi*530kHz) =",
          mp.nstr(gamma_par(g, mpf("0.8"), TWO_PI * mpf("530e3"), kappa), 20))
    print("gamma_eff(eps=1, delta=0) =",
          mp.nstr(gamma_eff(gamma_m, g, mpf(1), mpf(0), kappa, omega_m), 20))
    print("gamma_m =", mp.nstr(gamma_m, 20))
    print("gamma_eff(eps=0.8, delta=2pi*530kHz) =",
          mp.nstr(gamma_eff(gamma_m, g, mpf("0.8"), TWO_PI * mpf("530e3"), kappa, omega_m), 20))
    delta = TWO_PI * mpf("106e3")
    ge = gamma_eff(gamma_m, g, mpf("0.8"), delta, kappa, omega_m)
    gp = gamma_par(g, mpf("0.8"), delta, kappa)
    print("gamma_eff(eps=0.8, delta=2pi*106kHz) =", mp.nstr(ge, 20))
    print("gamma_par(eps=0.8, delta=2pi*106kHz) =", mp.nstr(gp, 20))
    print("s(eps=0.8, delta=2pi*106kHz) =", mp.nstr(gp / ge, 20))
    nbar_th = 1 / (exp(HBAR * omega_m / (KB * 7)) - 1)
    print("bose(T=7K, 2pi*530kHz) =", mp.nstr(nbar_th, 20))
    for nbar, s in [(mpf("5.8"), mpf(0)), (mpf("5.8"), mpf("0.5"))]:
        print("ratios", nbar, s, mp.nstr((nbar + 1) / nbar, 20),
              mp.nstr((nbar + 1 + s / 2) / (nbar - s / 2), 20),
              mp.nstr((nbar + 1 - s / 2) / (nbar + s / 2), 20))


if __name__ == "__main__":
    main()
