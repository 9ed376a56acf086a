"""Driven-dissipative Tavis-Cummings model of one circularly polarized
cavity mode coupled to N two-level atoms.

Only the probed polarization branch is simulated; the orthogonal, undriven
mode stays in vacuum and is dropped. This is exact in the weak-drive limit
and is the desk-scale approximation used for the photon statistics.

Rates and detunings enter in MHz (same HWHM amplitude convention as
linear_response); internally everything is converted to angular units
(rad/us), so correlation delays are in microseconds. Collapse operators are
sqrt(2 kappa) a and sqrt(2 gamma) sigma_j, giving amplitude decay kappa.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce

import numpy as np

from . import numerics

TWO_PI = 2.0 * math.pi
DEFAULT_DIM_CAP = 4096
LU_DIM_LIMIT = 64  # above this Hilbert dimension, steady states use time evolution


class DynamicsError(Exception):
    pass


def _destroy(n_levels: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, n_levels, dtype=float)), k=1).astype(complex)


def _kron_chain(ops) -> np.ndarray:
    return reduce(np.kron, ops)


@dataclass(frozen=True)
class QuantumModel:
    """Hilbert-space description plus cached operators (angular units)."""

    n_atoms: int
    n_max: int
    g_mhz: float
    kappa_mhz: float
    kappa1_mhz: float
    kappa2_mhz: float
    gamma_mhz: float
    delta_mhz: float
    delta_ac_mhz: float
    epsilon: float          # drive amplitude, rad/us
    dim: int
    a: np.ndarray           # cavity annihilation operator
    sigmas: tuple[np.ndarray, ...]   # per-atom lowering operators
    hamiltonian: np.ndarray
    collapse_ops: tuple[np.ndarray, ...]

    @property
    def input_flux(self) -> float:
        """Incident photon flux epsilon^2 / (2 kappa_1), photons per us."""
        return self.epsilon**2 / (2.0 * TWO_PI * self.kappa1_mhz)

    @property
    def cavity_lifetime_us(self) -> float:
        """Intensity decay time 1 / (2 kappa)."""
        return 1.0 / (2.0 * TWO_PI * self.kappa_mhz)


def build_model(
    n_atoms: int,
    n_max: int,
    g_mhz: float,
    kappa_mhz: float,
    kappa1_mhz: float,
    kappa2_mhz: float,
    gamma_mhz: float,
    delta_mhz: float = 0.0,
    delta_ac_mhz: float = 0.0,
    input_flux: float = 0.0,
    dim_cap: int = DEFAULT_DIM_CAP,
) -> QuantumModel:
    """Assemble operators for N atoms and one cavity mode in the rotating
    frame of the probe.

    `g_mhz` is the per-atom coupling; `input_flux` (photons/us) sets the
    coherent drive via epsilon = sqrt(2 kappa_1 flux).
    """
    if n_atoms < 0 or n_max < 1:
        raise DynamicsError("need n_atoms >= 0 and n_max >= 1")
    if min(kappa_mhz, kappa1_mhz, kappa2_mhz, gamma_mhz) <= 0:
        raise DynamicsError("all decay rates must be positive")
    if kappa_mhz < kappa1_mhz + kappa2_mhz:
        raise DynamicsError("kappa must be at least kappa1 + kappa2")
    if input_flux < 0:
        raise DynamicsError("input flux must be non-negative")
    dim = (n_max + 1) * 2**n_atoms
    if dim > dim_cap:
        raise DynamicsError(f"Hilbert dimension {dim} exceeds cap {dim_cap}")

    n_levels = n_max + 1
    id_cav = np.eye(n_levels, dtype=complex)
    id_atom = np.eye(2, dtype=complex)
    sm = np.array([[0, 1], [0, 0]], dtype=complex)  # |g><e|

    a = _kron_chain([_destroy(n_levels)] + [id_atom] * n_atoms)
    sigmas = []
    for j in range(n_atoms):
        ops = [id_cav] + [id_atom] * n_atoms
        ops[1 + j] = sm
        sigmas.append(_kron_chain(ops))

    w_delta = TWO_PI * delta_mhz
    w_atom = TWO_PI * (delta_mhz + delta_ac_mhz)
    w_g = TWO_PI * g_mhz
    epsilon = math.sqrt(2.0 * TWO_PI * kappa1_mhz * input_flux)

    h = -w_delta * (a.conj().T @ a)
    for s in sigmas:
        h += -w_atom * (s.conj().T @ s)
        h += w_g * (a.conj().T @ s + s.conj().T @ a)
    h += epsilon * (a + a.conj().T)

    collapse = [math.sqrt(2.0 * TWO_PI * kappa_mhz) * a]
    collapse += [math.sqrt(2.0 * TWO_PI * gamma_mhz) * s for s in sigmas]

    return QuantumModel(
        n_atoms=n_atoms, n_max=n_max, g_mhz=g_mhz,
        kappa_mhz=kappa_mhz, kappa1_mhz=kappa1_mhz, kappa2_mhz=kappa2_mhz,
        gamma_mhz=gamma_mhz, delta_mhz=delta_mhz, delta_ac_mhz=delta_ac_mhz,
        epsilon=epsilon, dim=dim, a=a, sigmas=tuple(sigmas),
        hamiltonian=h, collapse_ops=tuple(collapse),
    )


def model_for_cooperativity(
    c: float,
    n_atoms: int,
    n_max: int,
    kappa_mhz: float,
    kappa1_mhz: float,
    kappa2_mhz: float,
    gamma_mhz: float,
    delta_mhz: float = 0.0,
    delta_ac_mhz: float = 0.0,
    input_flux: float = 0.0,
) -> QuantumModel:
    """Desk-scale model with the per-atom coupling scaled so that
    n_atoms * g^2 = g_eff^2 = 2 kappa gamma C."""
    if c < 0:
        raise DynamicsError("cooperativity must be non-negative")
    if n_atoms < 1:
        raise DynamicsError("need at least one atom to carry the coupling")
    g = math.sqrt(2.0 * kappa_mhz * gamma_mhz * c / n_atoms)
    return build_model(
        n_atoms, n_max, g, kappa_mhz, kappa1_mhz, kappa2_mhz, gamma_mhz,
        delta_mhz, delta_ac_mhz, input_flux,
    )


# ---------------------------------------------------------------------------
# Lindblad generator
# ---------------------------------------------------------------------------

def lindblad_rhs(model: QuantumModel, rho: np.ndarray) -> np.ndarray:
    """d rho / dt in matrix form (works at any dimension)."""
    h = model.hamiltonian
    out = -1j * (h @ rho - rho @ h)
    for c in model.collapse_ops:
        cdc = c.conj().T @ c
        out += c @ rho @ c.conj().T - 0.5 * (cdc @ rho + rho @ cdc)
    return out


def liouvillian_matrix(model: QuantumModel) -> np.ndarray:
    """Dense superoperator L with column-stacking convention
    (vec(rho) = rho.flatten(order='F'))."""
    d = model.dim
    ident = np.eye(d, dtype=complex)
    h = model.hamiltonian
    lv = -1j * (np.kron(ident, h) - np.kron(h.T, ident))
    for c in model.collapse_ops:
        cdc = c.conj().T @ c
        lv += np.kron(c.conj(), c)
        lv -= 0.5 * (np.kron(ident, cdc) + np.kron(cdc.T, ident))
    return lv


@dataclass(frozen=True)
class SteadyState:
    rho: np.ndarray
    photon_number: float
    transmission: float
    atomic_excitation: float


def _expect(op: np.ndarray, rho: np.ndarray) -> float:
    return float(np.trace(op @ rho).real)


def _finalize_state(model: QuantumModel, rho: np.ndarray) -> SteadyState:
    rho = 0.5 * (rho + rho.conj().T)
    tr = np.trace(rho).real
    if abs(tr - 1.0) > 1e-6:
        raise DynamicsError(f"steady-state trace {tr} deviates from 1")
    rho = rho / tr
    n_ph = _expect(model.a.conj().T @ model.a, rho)
    exc = sum(_expect(s.conj().T @ s, rho) for s in model.sigmas)
    flux_out = 2.0 * TWO_PI * model.kappa2_mhz * n_ph
    flux_in = model.input_flux
    transmission = flux_out / flux_in if flux_in > 0 else 0.0
    return SteadyState(
        rho=rho, photon_number=n_ph, transmission=transmission,
        atomic_excitation=exc,
    )


def steady_state(model: QuantumModel) -> SteadyState:
    """Null space of the Liouvillian with the trace constraint.

    Small systems (dim <= 64) use a dense LU solve with one row of the
    Liouvillian replaced by the trace row; larger ones relax from vacuum by
    time evolution until ||d rho/dt|| < 1e-9.
    """
    d = model.dim
    if d <= LU_DIM_LIMIT:
        lv = liouvillian_matrix(model)
        # column-major vec: diagonal entries sit at i*(d+1)
        lv[0, :] = 0.0
        lv[0, np.arange(d) * (d + 1)] = 1.0
        rhs = np.zeros(d * d, dtype=complex)
        rhs[0] = 1.0
        vec = numerics.solve_linear(lv, rhs)
        rho = vec.reshape((d, d), order="F")
        return _finalize_state(model, rho)
    return _steady_state_by_evolution(model)


def _steady_state_by_evolution(
    model: QuantumModel, tol: float = 1e-9, max_lifetimes: float = 2000.0
) -> SteadyState:
    d = model.dim
    rho = np.zeros((d, d), dtype=complex)
    rho[0, 0] = 1.0
    chunk = 20.0 * model.cavity_lifetime_us
    elapsed = 0.0

    def deriv(_t, y):
        return lindblad_rhs(model, y.reshape(d, d)).reshape(-1)

    while elapsed < max_lifetimes * model.cavity_lifetime_us:
        y = numerics.integrate_ode(deriv, rho.reshape(-1), (0.0, chunk), tol=1e-10)
        rho = y.reshape(d, d)
        elapsed += chunk
        if np.linalg.norm(lindblad_rhs(model, rho)) < tol:
            return _finalize_state(model, rho)
    raise DynamicsError("time evolution did not converge to a steady state")


def residual_norm(model: QuantumModel, state: SteadyState) -> float:
    """||L rho_ss||, the fixed-point check."""
    return float(np.linalg.norm(lindblad_rhs(model, state.rho)))


# ---------------------------------------------------------------------------
# Photon statistics
# ---------------------------------------------------------------------------

def g2_zero(state: SteadyState, model: QuantumModel) -> float:
    """Equal-time second-order correlation <a+ a+ a a> / <a+ a>^2."""
    if state.photon_number <= 1e-12:
        raise DynamicsError("photon number underflows; g2 undefined on vacuum")
    a = model.a
    num = _expect(a.conj().T @ a.conj().T @ a @ a, state.rho)
    return num / state.photon_number**2


@dataclass(frozen=True)
class CorrelationResult:
    taus_us: np.ndarray
    g2: np.ndarray

    @property
    def g2_zero(self) -> float:
        return float(self.g2[0])


def g2_tau(state: SteadyState, model: QuantumModel, taus_us) -> CorrelationResult:
    """Temporal correlation g2(tau) by the quantum regression theorem:
    evolve a rho_ss a+ / <a+ a> under the same generator and read out the
    photon number."""
    taus = np.asarray(taus_us, dtype=float)
    if taus.ndim != 1 or taus.size == 0 or taus[0] != 0.0:
        raise DynamicsError("tau grid must be 1-D and start at 0")
    if taus.size > 1 and not np.all(np.diff(taus) > 0):
        raise DynamicsError("tau grid must be strictly ascending")
    if state.photon_number <= 1e-12:
        raise DynamicsError("photon number underflows; g2 undefined on vacuum")
    d = model.dim
    a = model.a
    n_op = a.conj().T @ a
    rho0 = a @ state.rho @ a.conj().T / state.photon_number

    def deriv(_t, y):
        return lindblad_rhs(model, y.reshape(d, d)).reshape(-1)

    if taus.size == 1:
        rows = rho0.reshape(1, -1)
    else:
        rows = numerics.integrate_ode(
            deriv, rho0.reshape(-1), (0.0, float(taus[-1])), tol=1e-10, t_eval=taus
        )
    g2 = np.array([
        _expect(n_op, row.reshape(d, d)) / state.photon_number for row in rows
    ])
    return CorrelationResult(taus_us=taus, g2=g2)


def check_truncation(model: QuantumModel, rel_tol: float = 1e-3) -> None:
    """Reject an operating point whose photon number or g2(0) moves by more
    than `rel_tol` when the Fock truncation is raised by one."""
    base = steady_state(model)
    bigger = build_model(
        model.n_atoms, model.n_max + 1, model.g_mhz, model.kappa_mhz,
        model.kappa1_mhz, model.kappa2_mhz, model.gamma_mhz, model.delta_mhz,
        model.delta_ac_mhz, model.input_flux,
    )
    ref = steady_state(bigger)
    dn = abs(base.photon_number - ref.photon_number) / max(ref.photon_number, 1e-30)
    if dn > rel_tol:
        raise DynamicsError(
            f"under-truncated: photon number shifts by {dn:.2e} with n_max+1"
        )
    if base.photon_number > 1e-12:
        dg = abs(g2_zero(base, model) - g2_zero(ref, bigger)) / abs(
            g2_zero(ref, bigger)
        )
        if dg > rel_tol:
            raise DynamicsError(
                f"under-truncated: g2(0) shifts by {dg:.2e} with n_max+1"
            )


# ---------------------------------------------------------------------------
# Scenario-level sweeps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SaturationPoint:
    input_flux: float
    output_flux: float
    photon_number: float
    polariton_number: float
    transmission: float


def saturation_curve(model: QuantumModel, input_fluxes) -> list[SaturationPoint]:
    """Steady-state response over an ascending list of drive fluxes."""
    fluxes = list(map(float, input_fluxes))
    if any(b <= a for a, b in zip(fluxes, fluxes[1:])):
        raise DynamicsError("input fluxes must be strictly ascending")
    points = []
    for flux in fluxes:
        m = build_model(
            model.n_atoms, model.n_max, model.g_mhz, model.kappa_mhz,
            model.kappa1_mhz, model.kappa2_mhz, model.gamma_mhz,
            model.delta_mhz, model.delta_ac_mhz, flux,
        )
        st = steady_state(m)
        points.append(SaturationPoint(
            input_flux=flux,
            output_flux=2.0 * TWO_PI * m.kappa2_mhz * st.photon_number,
            photon_number=st.photon_number,
            polariton_number=st.photon_number + st.atomic_excitation,
            transmission=st.transmission,
        ))
    return points


@dataclass(frozen=True)
class NonreciprocalStatistics:
    g2_plus: float
    g2_minus: float
    t_plus: float
    t_minus: float


def nonreciprocal_statistics_scenario(
    c_plus: float,
    c_minus: float,
    delta_ac_plus_mhz: float,
    delta_ac_minus_mhz: float,
    kappa_mhz: float,
    kappa1_mhz: float,
    kappa2_mhz: float,
    gamma_mhz: float,
    delta_mhz: float,
    input_flux: float,
    n_atoms: int = 2,
    n_max: int = 3,
) -> NonreciprocalStatistics:
    """Photon statistics for both probe directions with branch-asymmetric
    cooperativities and cavity-atom detunings (per-atom couplings scaled to
    preserve the branch cooperativities at desk-scale atom numbers)."""
    if c_plus <= 0 or c_minus <= 0:
        raise DynamicsError("both branch cooperativities must be positive")
    results = {}
    for label, c, dac in (
        ("+", c_plus, delta_ac_plus_mhz),
        ("-", c_minus, delta_ac_minus_mhz),
    ):
        m = model_for_cooperativity(
            c, n_atoms, n_max, kappa_mhz, kappa1_mhz, kappa2_mhz, gamma_mhz,
            delta_mhz, dac, input_flux,
        )
        st = steady_state(m)
        results[label] = (g2_zero(st, m), st.transmission)
    return NonreciprocalStatistics(
        g2_plus=results["+"][0], g2_minus=results["-"][0],
        t_plus=results["+"][1], t_minus=results["-"][1],
    )
