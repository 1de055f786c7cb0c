"""Time-frequency filtered two-photon coincidence counting.

The detection stage watches the cascaded emission f -> e -> g of the
two-exciton populations prepared by :mod:`excitonscope.excitation`.  Each
photon passes a Lorentzian spectral gate and a one-sided exponential
temporal gate; the gate pair is summarized by the detector spectrogram
:func:`spectrogram`.  Folding the spectrogram delay axis against an
emission coherence gives the closed rational lineshapes of
:func:`filtered_lineshape`, and the coincidence map then factorizes into
a sum over the shared one-exciton index of (two-exciton side) x
(one-exciton side) profiles once the transport intervals are frozen at
the waiting times.

Two evaluation routes are provided:

* :func:`coincidence_snapshot` - the waiting-time factorization: the
  slow gate-time envelopes are absorbed into the overall normalization
  and the population propagators act for exactly ``t_wait_two`` (between
  pair absorption and the f -> e emission) and ``t_wait_one`` (between
  the two emissions).
* :func:`coincidence_time_oracle` - brute-force evaluation of the nested
  gate-time integrals for small systems, keeping the full time arguments
  of both population propagators, including the coupling of the second
  detection window to the first through t1' - t2' - tau2.  The tau1 and
  t1' integrals are exponentials against the one-exciton transport
  eigenmodes and are done in closed form, preserving the kink at
  max(gate opening, emission completion); the remaining two time axes
  are integrated on graded Gauss-Legendre panels with the horizon set by
  the slowest gate decay and a two-level convergence check.

Filters are named by role (the f -> e gate and the e -> g gate), and the
detector density of states is a constant scalar folded into the overall
normalization (idealized flat detectors).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import units
from .excitation import ExcitonSystem, PoleTable
from .propagators import population_propagator


@dataclass(frozen=True)
class FilterSpec:
    """One detection channel: spectral gate center and half width (cm^-1),
    temporal gate opening time (fs) and decay parameter (cm^-1)."""

    omega_center: float
    sigma_omega: float
    t_center: float = 0.0
    sigma_t: float = 1.0

    def __post_init__(self):
        if self.sigma_omega <= 0.0:
            raise ValueError("sigma_omega must be positive")
        if self.sigma_t <= 0.0:
            raise ValueError("sigma_t must be positive")


def spectral_gate(filt: FilterSpec, omega):
    """Lorentzian gate amplitude i / (omega - center + i sigma_omega)."""
    return 1j / (np.asarray(omega, dtype=float) - filt.omega_center + 1j * filt.sigma_omega)


def temporal_gate(filt: FilterSpec, t_fs):
    """One-sided exponential gate opening at ``t_center``."""
    t = np.asarray(t_fs, dtype=float)
    arg = units.TWO_PI_C * filt.sigma_t * (t - filt.t_center)
    return np.where(t >= filt.t_center, np.exp(-np.clip(arg, 0.0, None)), 0.0)


def spectrogram(filt: FilterSpec, t_prime_fs, tau_fs):
    """Detector spectrogram of the Lorentzian gate pair.

    Vanishes unless both detection times t' and t' + tau lie past the
    gate opening; decays as exp(-sigma_omega |tau|) in the delay and
    exp(-2 sigma_t (t' - t_center)) in the detection time, carries the
    scan phase exp(-i omega_center tau) and an overall 1 / (2 sigma_omega).
    """
    tp = np.asarray(t_prime_fs, dtype=float)
    tau = np.asarray(tau_fs, dtype=float)
    x = units.TWO_PI_C * tau
    y = units.TWO_PI_C * (tp - filt.t_center)
    open_both = (y >= 0.0) & (y + x >= 0.0)
    log_env = -filt.sigma_omega * np.abs(x) - filt.sigma_t * x - 2.0 * filt.sigma_t * y
    log_env = np.where(open_both, log_env, -np.inf)
    return (0.5 / filt.sigma_omega) * np.exp(log_env - 1j * filt.omega_center * x)


def filtered_lineshape(filt: FilterSpec, omega_ab: float, gamma_ab: float):
    """Closed-form delay integrals of the spectrogram against an emission
    coherence at gap ``omega_ab`` (cm^-1) with width ``gamma_ab`` (cm^-1).

    Returns the (tau > 0, tau < 0) branch values separately since the two
    coincidence pathway terms weight them differently.  Both peak at
    omega_center = omega_ab; the tau < 0 branch only converges while
    sigma_omega + gamma_ab > sigma_t.
    """
    if gamma_ab < 0.0:
        raise ValueError("gamma_ab must be non-negative")
    _check_negative_branch(filt, gamma_ab)
    return _lineshape_branches(
        np.asarray(filt.omega_center, dtype=float),
        omega_ab, gamma_ab, filt.sigma_omega, filt.sigma_t,
    )


def _check_negative_branch(filt: FilterSpec, gamma_min: float):
    if filt.sigma_omega + gamma_min <= filt.sigma_t:
        raise ValueError(
            "tau < 0 branch diverges: need sigma_omega + gamma_ab > sigma_t, "
            f"got {filt.sigma_omega} + {gamma_min} <= {filt.sigma_t}"
        )


def _lineshape_branches(omega_bar, omega_ab, gamma_ab, sigma_omega, sigma_t):
    norm = 0.5 / sigma_omega / units.TWO_PI_C
    detune = omega_bar - omega_ab
    pos = norm / ((sigma_omega + sigma_t + gamma_ab) + 1j * detune)
    neg = norm / ((sigma_omega - sigma_t + gamma_ab) - 1j * detune)
    return pos, neg


@dataclass
class SignalGrid:
    """Detector frequency axes (cm^-1), waiting times (fs) and the filled
    coincidence map.

    ``result`` rows follow ``omega_fe`` (the f -> e gate scan) and columns
    ``omega_eg``; the map is max-normalized with small negative
    interference residue clipped at zero.
    """

    omega_fe: np.ndarray
    omega_eg: np.ndarray
    t_wait_two: float
    t_wait_one: float
    detector_dos: float = 1.0
    result: np.ndarray | None = None
    clipped_cells: int = 0

    def __post_init__(self):
        self.omega_fe = np.atleast_1d(np.asarray(self.omega_fe, dtype=float))
        self.omega_eg = np.atleast_1d(np.asarray(self.omega_eg, dtype=float))
        if self.t_wait_two < 0.0 or self.t_wait_one < 0.0:
            raise ValueError("waiting times must be non-negative")
        if self.detector_dos <= 0.0:
            raise ValueError("detector density of states must be positive")


def _detection_tables(system: ExcitonSystem):
    """Emission gaps, floored coherence widths and squared dipole norms.

    Detection is unpolarized, so the vertex weights are the squared
    Cartesian norms rather than the projected amplitudes used on the
    excitation side.
    """
    poles = PoleTable.from_system(system)
    dm_eg, dm_fe = system.dipoles.magnitudes()
    return (
        poles.fe.real, -poles.fe.imag,
        poles.eg.real, -poles.eg.imag,
        dm_fe**2, dm_eg**2,
    )


def coincidence_snapshot(
    system: ExcitonSystem,
    rho_ff: np.ndarray,
    filter_fe: FilterSpec,
    filter_eg: FilterSpec,
    grid: SignalGrid,
) -> SignalGrid:
    """Waiting-time factorized coincidence map.

    The two-exciton populations ``rho_ff`` evolve for ``grid.t_wait_two``,
    emit through the f -> e gate with both delay branches, the resulting
    one-exciton populations evolve for ``grid.t_wait_one`` and emit
    through the e -> g gate with the positive-delay branch; the map is
    2 Re of the factorized sum over the shared one-exciton index.
    """
    rho = np.asarray(rho_ff, dtype=float)
    if rho.shape != (system.n_two,):
        raise ValueError(f"rho_ff must have shape ({system.n_two},), got {rho.shape}")
    w_fe, g_fe, w_eg, g_eg, dd_fe, dd_eg = _detection_tables(system)
    _check_negative_branch(filter_fe, float(g_fe.min()))

    populations_f = population_propagator(system.transport_two, grid.t_wait_two) @ rho
    green_e = population_propagator(system.transport_one, grid.t_wait_one)

    # two-exciton side: all f' emitters feeding each shared e, both branches
    side_fe = np.zeros((system.n_one, grid.omega_fe.size), dtype=complex)
    for fp in range(system.n_two):
        for e in range(system.n_one):
            weight = populations_f[fp] * dd_fe[fp, e]
            if weight == 0.0:
                continue
            pos, neg = _lineshape_branches(
                grid.omega_fe, w_fe[fp, e], g_fe[fp, e],
                filter_fe.sigma_omega, filter_fe.sigma_t,
            )
            side_fe[e] += weight * (pos + neg)

    # one-exciton side: transport from the shared e to the emitter e'
    side_eg = np.zeros((system.n_one, grid.omega_eg.size), dtype=complex)
    for ep in range(system.n_one):
        pos, _ = _lineshape_branches(
            grid.omega_eg, w_eg[ep], g_eg[ep],
            filter_eg.sigma_omega, filter_eg.sigma_t,
        )
        side_eg += dd_eg[ep] * np.outer(green_e[ep, :], pos)

    signal = 2.0 * np.real(np.einsum("ei,ej->ij", side_fe, side_eg))
    signal *= grid.detector_dos
    peak = np.abs(signal).max(initial=0.0)
    if peak > 0.0:
        signal = signal / peak
    grid.clipped_cells = int(np.count_nonzero(signal < 0.0))
    grid.result = np.clip(signal, 0.0, None)
    return grid


# ---------------------------------------------------------------------------
# brute-force time-domain oracle


def _panel_nodes(edges: np.ndarray, n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def _power_edges(span: float, panels: int, power: float) -> np.ndarray:
    """Panel edges on [0, span], graded toward zero for power > 1."""
    return span * np.linspace(0.0, 1.0, panels + 1) ** power


def _delay_axis(rate: float, detune: float, horizon_factor: float,
                n_panels: int, n_nodes: int):
    """Delay nodes resolving both the decay at ``rate`` (1/fs) and the
    worst-case detuning oscillation at ``detune`` (rad/fs)."""
    horizon = horizon_factor / rate
    osc_panels = int(math.ceil(1.5 * detune * horizon / (1.2 * n_nodes)))
    return _panel_nodes(_power_edges(horizon, max(n_panels, osc_panels), 1.5), n_nodes)


_ORACLE_LEVELS = {
    1: dict(panels=8, nodes=8, horizon=10.0),
    2: dict(panels=11, nodes=10, horizon=13.0),
}


def _time_oracle_map(
    system: ExcitonSystem,
    rho_ff: np.ndarray,
    filter_fe: FilterSpec,
    filter_eg: FilterSpec,
    omega_fe_axis: np.ndarray,
    omega_eg_axis: np.ndarray,
    level: int,
) -> np.ndarray:
    """Nested-time evaluation of both pathway terms on a frequency grid.

    The first term covers the positive-delay wedge (t2' >= tbar2,
    tau2 >= 0, one-exciton transport over t1' - t2' - tau2).  The second
    covers the negative-delay wedge, reparametrized by s = -tau2 >= 0 and
    v = t2' - tbar2 - s >= 0 so the domain is a product and only the
    closed-form t1' integral keeps the max(tbar1, .) kink.
    """
    ang = units.TWO_PI_C
    w_fe, g_fe, w_eg, g_eg, dd_fe, dd_eg = _detection_tables(system)
    one, two = system.transport_one, system.transport_two
    cfg = _ORACLE_LEVELS[level]
    n_panels, n_nodes, hor = cfg["panels"], cfg["nodes"], cfg["horizon"]

    tbar1, tbar2 = filter_eg.t_center, filter_fe.t_center
    if tbar1 < tbar2:
        raise ValueError("the e -> g gate must open at or after the f -> e gate")
    _check_negative_branch(filter_fe, float(g_fe.min()))

    rho_tilde = (two.chi_left @ np.asarray(rho_ff, dtype=float)) / two.dpp

    def gf_at(t: np.ndarray) -> np.ndarray:
        return (np.exp(-np.outer(t, two.lambdas) * ang) * rho_tilde[None, :]) @ two.chi_right.T

    alpha1 = 2.0 * filter_eg.sigma_t * ang
    beta_e = one.lambdas * ang
    right_e = one.chi_right / one.dpp[None, :]

    def upper_integrals(a: np.ndarray) -> np.ndarray:
        # I_p(a) = int_{max(tbar1, a)} dt1' e^{-alpha1 (t1'-tbar1)} e^{-beta_p (t1'-a)}
        early = a[..., None] <= tbar1
        dt = np.where(early, tbar1 - a[..., None], a[..., None] - tbar1)
        decay = np.where(early, beta_e, alpha1)
        return np.exp(-decay * dt) / (alpha1 + beta_e)

    rate2 = 2.0 * filter_fe.sigma_t * ang
    gamma_min = float(g_fe.min())
    rate_pos = (filter_fe.sigma_omega + filter_fe.sigma_t + gamma_min) * ang
    rate_neg = (filter_fe.sigma_omega - filter_fe.sigma_t + gamma_min) * ang
    detune = float(np.abs(omega_fe_axis[:, None] - w_fe.ravel()[None, :]).max()) * ang

    t2_nodes, t2_w = _panel_nodes(tbar2 + _power_edges(hor / rate2, n_panels, 2.0), n_nodes)
    tau_nodes, tau_w = _delay_axis(rate_pos, detune, hor, n_panels, n_nodes)
    s_nodes, s_w = _delay_axis(rate_neg, detune, hor, n_panels, n_nodes)
    v_nodes, v_w = _panel_nodes(_power_edges(hor / rate2, n_panels, 2.0), n_nodes)

    # term 1: D_> pairs the fe coherence over tau2 with population
    # transport over t2' and t1' - t2' - tau2
    gf1 = gf_at(t2_nodes) * (t2_w * np.exp(-rate2 * (t2_nodes - tbar2)))[:, None]
    trans1 = np.einsum("up,ijp,pe->ijue", right_e, upper_integrals(
        t2_nodes[:, None] + tau_nodes[None, :]), one.chi_left)
    core1 = np.einsum("if,ijue->feuj", gf1, trans1)
    coh1 = np.exp((
        (1j * w_fe - g_fe)[:, :, None]
        - (filter_fe.sigma_omega + filter_fe.sigma_t)
    ) * ang * tau_nodes[None, None, :])
    prof1 = core1 * coh1[:, :, None, :]

    # term 2: D_< pairs the conjugate fe coherence over s = -tau2 with
    # transport over t2' - s = tbar2 + v and t1' - t2'
    gf2 = gf_at(tbar2 + v_nodes) * v_w[:, None]
    trans2 = np.einsum("up,ijp,pe->ijue", right_e, upper_integrals(
        tbar2 + v_nodes[:, None] + s_nodes[None, :]), one.chi_left)
    env2 = np.exp(-rate2 * (v_nodes[:, None] + s_nodes[None, :]))
    core2 = np.einsum("if,ij,ijue->feuj", gf2, env2, trans2)
    coh2 = np.exp((
        (-1j * w_fe - g_fe)[:, :, None]
        - (filter_fe.sigma_omega - filter_fe.sigma_t)
    ) * ang * s_nodes[None, None, :])
    prof2 = core2 * coh2[:, :, None, :]

    # scan phases, then dipole weights and the closed e -> g lineshape
    phase_pos = np.exp(-1j * ang * np.outer(tau_nodes, omega_fe_axis)) * tau_w[:, None]
    phase_neg = np.exp(+1j * ang * np.outer(s_nodes, omega_fe_axis)) * s_w[:, None]
    maps = prof1 @ phase_pos + prof2 @ phase_neg

    l_eg = np.empty((system.n_one, omega_eg_axis.size), dtype=complex)
    for ep in range(system.n_one):
        l_eg[ep], _ = _lineshape_branches(
            omega_eg_axis, w_eg[ep], g_eg[ep],
            filter_eg.sigma_omega, filter_eg.sigma_t,
        )
    weights = dd_fe[:, :, None] * dd_eg[None, None, :]
    return 2.0 * np.real(np.einsum("feua,feu,ub->ab", maps, weights, l_eg))


def coincidence_time_map(
    system: ExcitonSystem,
    rho_ff: np.ndarray,
    filter_fe: FilterSpec,
    filter_eg: FilterSpec,
    omega_fe_axis,
    omega_eg_axis,
    rtol: float = 1e-3,
) -> np.ndarray:
    """Convergence-checked oracle map over detector frequency grids.

    Runs the nested-time integration at two refinement levels (panel and
    node counts, decay horizons) and raises when the max-normalized maps
    disagree beyond ``rtol``.  Intended for small systems only.
    """
    if system.aggregate.n_sites > 3:
        raise ValueError("the time-domain oracle is intended for at most 3 sites")
    fe_axis = np.atleast_1d(np.asarray(omega_fe_axis, dtype=float))
    eg_axis = np.atleast_1d(np.asarray(omega_eg_axis, dtype=float))
    coarse = _time_oracle_map(system, rho_ff, filter_fe, filter_eg, fe_axis, eg_axis, 1)
    fine = _time_oracle_map(system, rho_ff, filter_fe, filter_eg, fe_axis, eg_axis, 2)
    scale = np.abs(fine).max(initial=0.0)
    diff = float(np.abs(fine - coarse).max(initial=0.0) / scale) if scale > 0.0 else 0.0
    if not np.isfinite(diff) or diff > rtol:
        raise RuntimeError(
            f"time-domain oracle did not converge: refinement levels differ by "
            f"{diff:.3e} (requested {rtol:.3e})"
        )
    return fine


def coincidence_time_oracle(
    system: ExcitonSystem,
    rho_ff: np.ndarray,
    filter_fe: FilterSpec,
    filter_eg: FilterSpec,
    rtol: float = 1e-3,
) -> float:
    """Oracle value at the filters' own spectral centers."""
    value = coincidence_time_map(
        system, rho_ff, filter_fe, filter_eg,
        np.array([filter_fe.omega_center]),
        np.array([filter_eg.omega_center]),
        rtol=rtol,
    )
    return float(value[0, 0])


def parameter_study(
    system: ExcitonSystem,
    rho_ff: np.ndarray,
    filter_fe: FilterSpec,
    filter_eg: FilterSpec,
    grid: SignalGrid,
    variations=None,
):
    """Snapshot maps for the six-panel filtering study.

    The default set varies the spectral gate width, the one-exciton
    waiting time, both together, the temporal gate width, and the
    two-exciton waiting time against the reference configuration.
    Spectral and temporal width changes apply to both gates.
    """
    if variations is None:
        variations = [
            ("reference", {}),
            ("sigma_omega_20", {"sigma_omega": 20.0}),
            ("t_wait_one_1000", {"t_wait_one": 1000.0}),
            ("sigma_omega_20_t_wait_one_1000", {"sigma_omega": 20.0, "t_wait_one": 1000.0}),
            ("sigma_t_0.5409", {"sigma_t": 0.5409}),
            ("t_wait_two_50", {"t_wait_two": 50.0}),
        ]
    results = {}
    for label, changes in variations:
        fe, eg = filter_fe, filter_eg
        if "sigma_omega" in changes:
            fe = replace(fe, sigma_omega=changes["sigma_omega"])
            eg = replace(eg, sigma_omega=changes["sigma_omega"])
        if "sigma_t" in changes:
            fe = replace(fe, sigma_t=changes["sigma_t"])
            eg = replace(eg, sigma_t=changes["sigma_t"])
        panel = SignalGrid(
            omega_fe=grid.omega_fe.copy(),
            omega_eg=grid.omega_eg.copy(),
            t_wait_two=changes.get("t_wait_two", grid.t_wait_two),
            t_wait_one=changes.get("t_wait_one", grid.t_wait_one),
            detector_dos=grid.detector_dos,
        )
        results[label] = coincidence_snapshot(system, rho_ff, fe, eg, panel)
    return results
