"""Time-domain reference for the phonon correlation function.

The correlation function C(t) is assembled from the exact lower-half-plane
poles of the spectral density (amplitudes via residues, no closed-form
shortcuts) plus the Matsubara series, whose slow 1/nu_n head is resummed
with the exact logarithm.  Re C(Omega) is then the numeric half-line
Fourier transform: the oscillatory pole pieces integrate in closed form
on the tail while the smooth thermal remainder goes through adaptive
cosine quadrature.  None of this shares algebra with the frequency-domain
expression under test.
"""

import numpy as np
from scipy import integrate


def _pole_terms(bath):
    """(amplitude, pole) with C(s) pole part = sum amp * exp(-i pole s)."""
    beta = bath.beta
    terms = []

    def add(num, dprime, pole):
        residue = num(pole) / dprime(pole)
        terms.append((-1j * residue * (1.0 / np.tanh(0.5 * beta * pole) + 1.0), pole))

    l0, g0 = bath.lambda0, bath.gamma0
    add(lambda w: 2 * l0 * g0 * w, lambda w: 2 * w, -1j * g0)
    for lj, wj, gj in bath.brownian_modes:
        if wj <= gj / 2.0:
            raise ValueError("reference assumes underdamped modes")
        om = np.sqrt(wj**2 - gj**2 / 4.0)
        num = lambda w, lj=lj, wj=wj, gj=gj: 2 * lj * wj**2 * gj * w
        dpr = lambda w, wj=wj, gj=gj: 4 * w * (w**2 - wj**2) + 2 * gj**2 * w
        add(num, dpr, +om - 1j * gj / 2.0)
        add(num, dpr, -om - 1j * gj / 2.0)
    return terms


def _spectral_density_complex(bath, w):
    out = 2 * bath.lambda0 * bath.gamma0 * w / (w * w + bath.gamma0**2)
    for lj, wj, gj in bath.brownian_modes:
        out = out + 2 * lj * wj**2 * gj * w / ((wj**2 - w * w) ** 2 + (w * gj) ** 2)
    return out


def re_correlation_time_domain(bath, omega: float, n_matsubara: int = 3000) -> float:
    """Re of the half-line Fourier transform of C(t) at ``omega`` (cm^-1)."""
    beta = bath.beta
    nu1 = 2 * np.pi / beta
    nus = nu1 * np.arange(1, n_matsubara + 1)
    amps = (-1j * (2.0 / beta) * _spectral_density_complex(bath, -1j * nus)).real
    c_tail = 4.0 * bath.lambda0 * bath.gamma0 / beta
    resid = amps - c_tail / nus  # remaining coefficients fall off like 1/n^3
    poles = _pole_terms(bath)

    def smooth_tail(s):
        return np.sum(resid * np.exp(-nus * s)) - c_tail * np.log1p(-np.exp(-nu1 * s)) / nu1

    def full_c(s):
        total = smooth_tail(s) + 0.0j
        for amp, pole in poles:
            total += amp * np.exp(-1j * pole * s)
        return total

    s_c = 0.5 / nu1
    head, _ = integrate.quad(
        lambda s: (full_c(s) * np.exp(1j * omega * s)).real,
        0.0, s_c, limit=200, epsabs=1e-11, epsrel=1e-12,
    )
    analytic = 0.0
    for amp, pole in poles:
        a = omega - pole
        analytic += (amp * (1j / a) * np.exp(1j * a * s_c)).real
    cos_part, _ = integrate.quad(
        smooth_tail, s_c, np.inf, weight="cos", wvar=omega, limit=400, epsabs=1e-12
    )
    return head + analytic + cos_part
