"""Cesium D2 atomic structure: angular-momentum algebra, Zeeman populations,
and the map from a ground-state population distribution to the
direction-dependent effective cooperativities and dispersive shifts.

Ground manifold is 6S_1/2 F=4 (nine sublevels m_F = -4..+4); excited levels
are the 6P_3/2 hyperfine levels F' = 3, 4, 5. Circular polarizations sigma+-
drive Delta m_F = +-1 transitions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from importlib import resources
from pathlib import Path

F_GROUND = 4
M_VALUES = tuple(range(-F_GROUND, F_GROUND + 1))
EXCITED_F = (3, 4, 5)


class AtomicError(Exception):
    pass


# ---------------------------------------------------------------------------
# Wigner 3-j (Racah formula, exact rational arithmetic)
# ---------------------------------------------------------------------------

def _two_j(x, name: str) -> int:
    """Convert a half-integer to its doubled integer representation."""
    t = 2 * x
    ti = round(t)
    if abs(t - ti) > 1e-9:
        raise AtomicError(f"{name}={x} is not a half-integer")
    return int(ti)


def wigner_3j(j1, j2, j3, m1, m2, m3) -> float:
    """Wigner 3-j symbol by the Racah sum formula.

    Angular momenta must be non-negative half-integers satisfying the
    triangle inequality, with |m_i| <= j_i and j_i + m_i integral.
    Returns 0 when m1 + m2 + m3 != 0.
    """
    tj = [_two_j(j, f"j{i+1}") for i, j in enumerate((j1, j2, j3))]
    tm = [_two_j(m, f"m{i+1}") for i, m in enumerate((m1, m2, m3))]
    for i in range(3):
        if tj[i] < 0:
            raise AtomicError(f"j{i+1} must be non-negative")
        if abs(tm[i]) > tj[i]:
            raise AtomicError(f"|m{i+1}| exceeds j{i+1}")
        if (tj[i] + tm[i]) % 2 != 0:
            raise AtomicError(f"j{i+1} + m{i+1} must be integral")
    if not (abs(tj[0] - tj[1]) <= tj[2] <= tj[0] + tj[1]):
        raise AtomicError("triangle inequality |j1-j2| <= j3 <= j1+j2 violated")
    if (tj[0] + tj[1] + tj[2]) % 2 != 0:
        raise AtomicError("j1 + j2 + j3 must be integral")
    if tm[0] + tm[1] + tm[2] != 0:
        return 0.0

    fac = math.factorial

    def f2(n: int) -> int:
        # factorial of a doubled-integer argument (must be even and >= 0)
        assert n % 2 == 0 and n >= 0
        return fac(n // 2)

    a, b, c = tj
    al, be, ga = tm
    delta = Fraction(
        f2(a + b - c) * f2(a - b + c) * f2(-a + b + c), f2(a + b + c + 2)
    )
    prefac = delta * Fraction(
        f2(a + al) * f2(a - al) * f2(b + be) * f2(b - be) * f2(c + ga) * f2(c - ga)
    )
    kmin = max(0, (b - c - al) // 2, (a - c + be) // 2)
    kmax = min((a + b - c) // 2, (a - al) // 2, (b + be) // 2)
    total = Fraction(0)
    for k in range(kmin, kmax + 1):
        denom = (
            fac(k)
            * f2(a + b - c - 2 * k)
            * f2(a - al - 2 * k)
            * f2(b + be - 2 * k)
            * f2(c - b + al + 2 * k)
            * f2(c - a - be + 2 * k)
        )
        total += Fraction((-1) ** k, denom)
    phase = (-1) ** ((a - b - ga) // 2)
    value = phase * total * math.sqrt(prefac)
    return float(value)


# ---------------------------------------------------------------------------
# Reference data (bundled plain-text key = value file)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CesiumD2Data:
    """Excited-level positions (MHz, relative to F'=5) and relative
    hyperfine dipole strength factors for F=4 -> F'."""

    level_mhz: dict[int, float]
    strength: dict[int, float]


def _parse_keyvalue(text: str, origin: str) -> dict[str, float]:
    values: dict[str, float] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise AtomicError(f"{origin}:{lineno}: expected 'key = value'")
        key, _, val = line.partition("=")
        try:
            values[key.strip()] = float(val.strip())
        except ValueError as exc:
            raise AtomicError(f"{origin}:{lineno}: bad number {val.strip()!r}") from exc
    return values


def load_cesium_d2(path: str | Path | None = None) -> CesiumD2Data:
    """Load the bundled cesium D2 reference table (or a user-supplied one)."""
    if path is None:
        text = resources.files("nrpolariton.data").joinpath("cesium_d2.dat").read_text()
        origin = "cesium_d2.dat"
    else:
        text = Path(path).read_text()
        origin = str(path)
    kv = _parse_keyvalue(text, origin)
    try:
        levels = {fp: kv[f"fprime_{fp}_mhz"] for fp in EXCITED_F}
        strengths = {fp: kv[f"strength_{fp}"] for fp in EXCITED_F}
    except KeyError as exc:
        raise AtomicError(f"{origin}: missing key {exc}") from exc
    return CesiumD2Data(level_mhz=levels, strength=strengths)


# ---------------------------------------------------------------------------
# Coupling weights and transition table
# ---------------------------------------------------------------------------

def clebsch_gordan_weight(
    f: int, m_f: int, q: int, fprime: int, m_fprime: int,
    data: CesiumD2Data | None = None,
) -> float:
    """Squared dipole coupling weight for |F=4, m_F> -> |F', m_F' = m_F + q>.

    Combines the squared Clebsch-Gordan factor with the relative hyperfine
    strength S_{4F'}, normalized so the stretched sigma+ transition
    (4, 4) -> (5, 5) has weight exactly 1. Returns 0 (not an error) for
    nonexistent target sublevels or violated selection rules.
    """
    if f != F_GROUND:
        raise AtomicError(f"ground manifold must be F={F_GROUND}")
    if fprime not in EXCITED_F:
        raise AtomicError(f"F' must be one of {EXCITED_F}")
    if q not in (+1, -1):
        raise AtomicError("polarization q must be +1 or -1")
    if abs(m_f) > f:
        raise AtomicError(f"|m_F| exceeds F={f}")
    if m_fprime != m_f + q or abs(m_fprime) > fprime:
        return 0.0
    if data is None:
        data = load_cesium_d2()
    # |<F m; 1 q | F' m'>|^2 = (2F'+1) * 3j(F 1 F'; m q -m')^2
    cg2 = (2 * fprime + 1) * wigner_3j(f, 1, fprime, m_f, q, -m_fprime) ** 2
    anchor = data.strength[5] * (2 * 5 + 1) * wigner_3j(f, 1, 5, f, 1, -5) ** 2
    return data.strength[fprime] * cg2 / anchor


@dataclass(frozen=True)
class TransitionEntry:
    f: int
    m_f: int
    q: int            # +1 for sigma+, -1 for sigma-
    fprime: int
    m_fprime: int
    weight: float     # squared Clebsch-Gordan factor, stretched transition = 1
    detuning_mhz: float  # level position relative to the resonant F'


@dataclass(frozen=True)
class TransitionTable:
    """All sigma+- dipole transitions out of the F=4 ground manifold,
    with detunings measured from a chosen resonant excited level."""

    resonant_fprime: int
    entries: tuple[TransitionEntry, ...]

    @classmethod
    def for_cesium_d2(
        cls, resonant_fprime: int, data: CesiumD2Data | None = None
    ) -> "TransitionTable":
        if resonant_fprime not in EXCITED_F:
            raise AtomicError(f"resonant F' must be one of {EXCITED_F}")
        if data is None:
            data = load_cesium_d2()
        ref = data.level_mhz[resonant_fprime]
        entries = []
        for fp in EXCITED_F:
            for m in M_VALUES:
                for q in (+1, -1):
                    mp = m + q
                    if abs(mp) > fp:
                        continue
                    w = clebsch_gordan_weight(F_GROUND, m, q, fp, mp, data)
                    if w == 0.0:
                        continue
                    entries.append(
                        TransitionEntry(
                            f=F_GROUND, m_f=m, q=q, fprime=fp, m_fprime=mp,
                            weight=w, detuning_mhz=data.level_mhz[fp] - ref,
                        )
                    )
        return cls(resonant_fprime=resonant_fprime, entries=tuple(entries))

    def weight_sum(self, q: int, fprime: int, pop: "PopulationDistribution") -> float:
        """Population-weighted sum of coupling weights for one polarization
        into one excited level."""
        return sum(
            pop.p(e.m_f) * e.weight
            for e in self.entries
            if e.q == q and e.fprime == fprime
        )


# ---------------------------------------------------------------------------
# Zeeman populations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PopulationDistribution:
    """Occupation probabilities of the nine F=4 Zeeman sublevels,
    ordered m_F = -4 .. +4."""

    probabilities: tuple[float, ...]

    def __post_init__(self):
        if len(self.probabilities) != len(M_VALUES):
            raise AtomicError(f"need {len(M_VALUES)} probabilities, one per m_F")
        if any(p < 0 for p in self.probabilities):
            raise AtomicError("probabilities must be non-negative")
        total = sum(self.probabilities)
        if abs(total - 1.0) > 1e-12:
            raise AtomicError(f"probabilities sum to {total!r}, expected 1")

    def p(self, m: int) -> float:
        if m not in M_VALUES:
            raise AtomicError(f"m_F={m} outside -4..4")
        return self.probabilities[m + F_GROUND]

    def reflected(self) -> "PopulationDistribution":
        """Mirror image p(m) -> p(-m)."""
        return PopulationDistribution(tuple(reversed(self.probabilities)))

    @classmethod
    def uniform(cls) -> "PopulationDistribution":
        n = len(M_VALUES)
        return cls(tuple(1.0 / n for _ in range(n)))

    @classmethod
    def pumped(cls, target_m: int, fidelity: float = 1.0) -> "PopulationDistribution":
        """Optically pumped state: `fidelity` in the target sublevel, the
        remainder spread uniformly over the other eight."""
        if target_m not in M_VALUES:
            raise AtomicError(f"target m_F={target_m} outside -4..4")
        if not 0.0 <= fidelity <= 1.0:
            raise AtomicError("fidelity must lie in [0, 1]")
        leak = (1.0 - fidelity) / (len(M_VALUES) - 1)
        probs = [fidelity if m == target_m else leak for m in M_VALUES]
        return cls(tuple(probs))


# ---------------------------------------------------------------------------
# Effective cooperativities and dispersive shifts
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CooperativityPair:
    c_plus: float
    c_minus: float
    g_eff_plus_mhz: float
    g_eff_minus_mhz: float


def effective_cooperativity(
    pop: PopulationDistribution,
    table: TransitionTable,
    g0_mhz: float,
    n_atoms: float,
    kappa_mhz: float,
    gamma_mhz: float,
) -> CooperativityPair:
    """Direction-dependent cooperativities from the ground-state populations.

    g_eff,+-^2 = g0^2 * N * sum_m p(m) * weight(4, m, +-1 -> resonant F')
    and C_+- = g_eff,+-^2 / (2 kappa gamma). g0 is the single-atom coupling
    on the stretched (weight-1) transition.
    """
    if g0_mhz <= 0 or kappa_mhz <= 0 or gamma_mhz <= 0:
        raise AtomicError("g0, kappa, gamma must be positive")
    if n_atoms < 0:
        raise AtomicError("atom number must be non-negative")
    fp = table.resonant_fprime
    g2_plus = g0_mhz**2 * n_atoms * table.weight_sum(+1, fp, pop)
    g2_minus = g0_mhz**2 * n_atoms * table.weight_sum(-1, fp, pop)
    denom = 2.0 * kappa_mhz * gamma_mhz
    return CooperativityPair(
        c_plus=g2_plus / denom,
        c_minus=g2_minus / denom,
        g_eff_plus_mhz=math.sqrt(g2_plus),
        g_eff_minus_mhz=math.sqrt(g2_minus),
    )


def dispersive_shift(
    pop: PopulationDistribution,
    table: TransitionTable,
    g0_mhz: float,
    n_atoms: float,
) -> tuple[float, float]:
    """Cavity frequency pulls (MHz) from the off-resonant excited levels,
    by adiabatic elimination: shift = N g0^2 sum p(m) weight / detuning."""
    if g0_mhz <= 0:
        raise AtomicError("g0 must be positive")
    shifts = []
    for q in (+1, -1):
        s = 0.0
        for e in table.entries:
            if e.q != q or e.fprime == table.resonant_fprime:
                continue
            if e.detuning_mhz == 0.0:
                raise AtomicError(
                    f"off-resonant level F'={e.fprime} has zero detuning"
                )
            s += pop.p(e.m_f) * e.weight / e.detuning_mhz
        shifts.append(n_atoms * g0_mhz**2 * s)
    return shifts[0], shifts[1]
