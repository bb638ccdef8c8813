"""Torus translation flows, trigonometric observables, spectral measures.

An observable is a finite Fourier series f(x) = sum_m c_m e^{2 pi i <m, x>}
on the d-torus.  The translation flow T_t f(x) = f(x + t) acts on each
frequency as multiplication by e^{i <2 pi m, t>}, so the spectral measure of
f is exactly the atomic measure with mass |c_m|^2 at location 2 pi m.  Every
averaging operator in this package is applied in this Fourier domain, where
it is exact.

Spectral atoms carry their location both in angular units (t = 2 pi s) and
in cycles (s).  Phases <u, t> at very large |t| are irrecoverable in float64,
so modulation factors e^{i <u, 2 pi s>} are reduced through the exact
fractional part of <u, s> computed in rational arithmetic when the products
are large; see ``fractional_cycles``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .seeding import rng_for

_TWO_PI = 2.0 * math.pi
_SYMMETRY_TOL = 1e-12
# above this magnitude the float64 product u*s has phase error beyond ~1e-3 cycles
_EXACT_CYCLE_THRESHOLD = 2.0**40


@dataclass(frozen=True, eq=False)
class TorusObservable:
    """Finite Fourier series on the d-torus.

    ``freqs`` is an (n, d) integer array of distinct frequency vectors m and
    ``coeffs`` the matching complex coefficients.  ``real_valued`` certifies
    the conjugate symmetry c_{-m} = conj(c_m).  Instances are immutable.
    """

    freqs: np.ndarray
    coeffs: np.ndarray

    def __post_init__(self):
        fr = np.atleast_2d(np.asarray(self.freqs, dtype=np.int64))
        co = np.asarray(self.coeffs, dtype=complex).ravel()
        if fr.shape[0] != co.shape[0]:
            raise ValueError("freqs and coeffs must have matching length")
        if fr.shape[0] == 0:
            raise ValueError("an observable needs at least one term")
        if len({tuple(row) for row in fr.tolist()}) != fr.shape[0]:
            raise ValueError("duplicate frequencies; use from_terms to merge")
        object.__setattr__(self, "freqs", fr)
        object.__setattr__(self, "coeffs", co)

    @classmethod
    def from_terms(cls, d: int, terms: Sequence) -> "TorusObservable":
        """Build from (frequency, coefficient) pairs, merging duplicates."""
        acc: dict = {}
        for m, c in terms:
            key = (int(m),) if np.isscalar(m) else tuple(int(v) for v in m)
            if len(key) != d:
                raise ValueError(f"frequency {key} does not have dimension {d}")
            acc[key] = acc.get(key, 0.0) + complex(c)
        keys = sorted(acc)
        return cls(freqs=np.array(keys, dtype=np.int64).reshape(len(keys), d), coeffs=np.array([acc[k] for k in keys]))

    @classmethod
    def constant(cls, value=1.0, d: int = 1) -> "TorusObservable":
        return cls(freqs=np.zeros((1, d), dtype=np.int64), coeffs=np.array([complex(value)]))

    @classmethod
    def random(cls, d: int, n_terms: int, seed: int, max_freq: int = 8,
               real: bool = True, normalize: bool = True) -> "TorusObservable":
        """Seeded random observable; with ``real`` the coefficients pair up."""
        rng = rng_for(seed, "observable")
        terms = []
        for _ in range(n_terms):
            m = tuple(int(v) for v in rng.integers(-max_freq, max_freq + 1, size=d))
            c = complex(rng.normal(), rng.normal())
            terms.append((m, c))
            if real:
                terms.append((tuple(-v for v in m), c.conjugate()))
        obs = cls.from_terms(d, terms)
        if normalize:
            nrm = math.sqrt(obs.norm_sq)
            if nrm > 0:
                obs = cls(freqs=obs.freqs, coeffs=obs.coeffs / nrm)
        return obs

    @property
    def d(self) -> int:
        return self.freqs.shape[1]

    @property
    def n_terms(self) -> int:
        return self.freqs.shape[0]

    @property
    def norm_sq(self) -> float:
        """Squared L2 norm sum |c_m|^2 (Parseval)."""
        return float(np.sum(np.abs(self.coeffs) ** 2))

    @property
    def real_valued(self) -> bool:
        table = {tuple(m): c for m, c in zip(self.freqs.tolist(), self.coeffs)}
        for m, c in table.items():
            neg = tuple(-v for v in m)
            if neg not in table or abs(table[neg] - c.conjugate()) > _SYMMETRY_TOL:
                return False
        return True

    def to_json_dict(self) -> dict:
        return {
            "d": self.d,
            "terms": [[m.tolist(), float(c.real), float(c.imag)] for m, c in zip(self.freqs, self.coeffs)],
        }

    @classmethod
    def from_json_dict(cls, data: Mapping) -> "TorusObservable":
        d = int(data["d"])
        return cls.from_terms(d, [(m, complex(re, im)) for m, re, im in data["terms"]])

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(), fh)

    @classmethod
    def load(cls, path) -> "TorusObservable":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json_dict(json.load(fh))


def _as_torus_points(x, d: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        if d != 1:
            raise ValueError("scalar points only valid in dimension 1")
        return x.reshape(1, 1)
    if x.ndim == 1:
        if d == 1:
            return x.reshape(-1, 1)
        if x.shape[0] == d:
            return x.reshape(1, d)
        raise ValueError(f"points must have {d} coordinates")
    if x.shape[-1] != d:
        raise ValueError(f"points must have trailing dimension {d}")
    return x.reshape(-1, d)


def evaluate(f: TorusObservable, x, shift=None) -> np.ndarray:
    """f(x + shift) = sum_m c_m e^{2 pi i <m, x + shift>} at one or many points."""
    pts = _as_torus_points(x, f.d)
    if shift is not None:
        pts = pts + np.asarray(shift, dtype=float).reshape(1, f.d)
    vals = np.exp(2j * np.pi * (pts @ f.freqs.T.astype(float))) @ f.coeffs
    return complex(vals[0]) if np.asarray(x).ndim == 0 or (np.asarray(x).ndim == 1 and f.d > 1) else vals


@dataclass(frozen=True, eq=False)
class SpectralMeasure:
    """Atomic spectral measure: mass rho_j at location t_j in R^d.

    ``cycles`` stores t_j / (2 pi) exactly when the atoms come from integer
    frequencies or synthetic placements, enabling exact phase reduction of
    modulation factors at extreme |t|.
    """

    locations: np.ndarray
    masses: np.ndarray
    cycles: Optional[np.ndarray] = None

    def __post_init__(self):
        loc = np.atleast_2d(np.asarray(self.locations, dtype=float))
        mass = np.asarray(self.masses, dtype=float).ravel()
        if loc.shape[0] != mass.shape[0]:
            raise ValueError("locations and masses must have matching length")
        if np.any(mass < 0):
            raise ValueError("spectral masses must be nonnegative")
        object.__setattr__(self, "locations", loc)
        object.__setattr__(self, "masses", mass)
        if self.cycles is not None:
            cyc = np.atleast_2d(np.asarray(self.cycles, dtype=float))
            if cyc.shape != loc.shape:
                raise ValueError("cycles must match locations in shape")
            object.__setattr__(self, "cycles", cyc)

    @classmethod
    def from_cycles(cls, cycles, masses) -> "SpectralMeasure":
        cyc = np.atleast_2d(np.asarray(cycles, dtype=float))
        return cls(locations=_TWO_PI * cyc, masses=masses, cycles=cyc)

    @property
    def d(self) -> int:
        return self.locations.shape[1]

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.masses))

    def abs_locations(self) -> np.ndarray:
        """Max-coordinate norm |t_j| per atom."""
        return np.max(np.abs(self.locations), axis=1)


def spectral_measure(f: TorusObservable) -> SpectralMeasure:
    """Spectral measure of f under translation: mass |c_m|^2 at 2 pi m."""
    return SpectralMeasure.from_cycles(f.freqs.astype(float), np.abs(f.coeffs) ** 2)


def loglog_moment(mu: SpectralMeasure) -> float:
    """sum_j rho_j max(1, ln ln |t_j|), guarding |t_j| <= e."""
    t = mu.abs_locations()
    vals = np.ones_like(t)
    big = t > math.e
    vals[big] = np.maximum(1.0, np.log(np.log(t[big])))
    return float(np.sum(mu.masses * vals))


def logpsi_moment(mu: SpectralMeasure, psi: Callable) -> float:
    """sum_j rho_j (log psi)+(|t_j|) with (log psi)+(y) = log2 psi(y) when
    psi(y) > 2 and 1 otherwise.  ``psi`` is the generalized inverse of the
    configured growth function."""
    t = mu.abs_locations()
    psiv = np.asarray(psi(t), dtype=float)
    vals = np.where(psiv > 2.0, np.log2(np.maximum(psiv, 2.0)), 1.0)
    return float(np.sum(mu.masses * vals))


def apply_multiplier(f: TorusObservable, multiplier: Callable) -> TorusObservable:
    """Apply a Fourier multiplier: c_m -> multiplier(2 pi m) * c_m.

    ``multiplier`` receives an (n, d) array of atom locations and must return
    the n complex values; multipliers compose exactly under products.
    """
    locs = _TWO_PI * f.freqs.astype(float)
    vals = np.asarray(multiplier(locs), dtype=complex).ravel()
    if vals.shape != (f.n_terms,):
        raise ValueError("multiplier must return one value per frequency")
    return TorusObservable(freqs=f.freqs, coeffs=f.coeffs * vals)


def fractional_cycles(u: Sequence[float], s: Sequence[float]) -> float:
    """Exact fractional part of <u, s> for float64 inputs.

    Both vectors are exact binary rationals, so the inner product is a
    rational number whose fractional part is computed without rounding; the
    result in [0, 1) is then a correctly rounded float.
    """
    total = Fraction(0)
    for uj, sj in zip(u, s):
        total += Fraction(float(uj)) * Fraction(float(sj))
    return float(total - math.floor(total))


def cycle_phases(U: np.ndarray, cycles: np.ndarray) -> np.ndarray:
    """Fractional parts of U @ cycles.T, exact where products are large.

    ``U`` is (K, d) and ``cycles`` (M, d); the result is (M, K) fractional
    cycle counts.  Entries whose coordinate products exceed 2^40 in magnitude
    are recomputed in rational arithmetic so the phase survives cancellation.
    """
    q = cycles @ U.T
    frac = q - np.floor(q)
    bound = np.abs(cycles) @ np.abs(U).T
    needs_exact = bound > _EXACT_CYCLE_THRESHOLD
    if np.any(needs_exact):
        for i, k in zip(*np.nonzero(needs_exact)):
            frac[i, k] = fractional_cycles(U[k], cycles[i])
    return frac
