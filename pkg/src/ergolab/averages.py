"""Random averaging operators in the Fourier domain.

An average over the index box [1, n]^r applies the kernel

    K_n_hat(t) = (1 / b_n) sum over k of nu_k_hat(t)

to an observable as a Fourier multiplier; the expected kernel E_n_hat and
the centered kernel D_n_hat = K_n_hat - E_n_hat share the same machinery.
Everything acts exactly on trigonometric observables, so square functions,
series partial sums, and convergence diagnostics reduce to evaluations of
these kernels at the spectral atoms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import ConfigurationError
from .kernels import EvalPoints, KernelEvaluator
from .measures import TransitionMeasureModel, _as_point_array
from .stats import sample_points
from .torus import SpectralMeasure, TorusObservable, apply_multiplier, evaluate, loglog_moment, logpsi_moment, spectral_measure

FAMILY_KINDS = ("K", "E", "D", "G", "H", "F")


@dataclass(frozen=True)
class AverageFamily:
    """Selector for which average a model realizes.

    - ``K``: the model as configured (base measure and smoothing included)
    - ``E``: its expected kernel
    - ``D``: the centered kernel K - E
    - ``G``: point masses at n_k + delta_k only
    - ``H``: point masses at delta_k only (subsequence ignored)
    - ``F``: smoothed point masses (smoothing required)

    For probability ingredients the normalization is b_n = n^r; a complex
    base measure scales it by its variation mass.
    """

    kind: str

    def __post_init__(self):
        if self.kind not in FAMILY_KINDS:
            raise ValueError(f"unknown family kind {self.kind!r}")

    @property
    def component(self) -> str:
        return {"E": "expected", "D": "centered"}.get(self.kind, "full")

    def evaluator_flags(self, model: TransitionMeasureModel) -> dict:
        if self.kind in ("K", "E", "D"):
            return {"include_theta": True, "include_smoothing": None, "include_subsequence": True}
        if self.kind == "G":
            return {"include_theta": False, "include_smoothing": False, "include_subsequence": True}
        if self.kind == "H":
            return {"include_theta": False, "include_smoothing": False, "include_subsequence": False}
        if not model.has_smoothing:
            raise ConfigurationError("the smoothed family requires a model with smoothing")
        return {"include_theta": False, "include_smoothing": True, "include_subsequence": True}

    def normalization(self, model: TransitionMeasureModel, n: int) -> float:
        mass = model.theta_mass if (self.kind in ("K", "E", "D") and model.theta is not None) else 1.0
        return float(n) ** model.r * mass


def _as_family(family: Union[AverageFamily, str]) -> AverageFamily:
    return family if isinstance(family, AverageFamily) else AverageFamily(kind=str(family))


def _family_evaluator(family: AverageFamily, model: TransitionMeasureModel, omega_seed: int) -> KernelEvaluator:
    return KernelEvaluator(model, omega_seed, a_rule="unit", **family.evaluator_flags(model))


def kernel_values(
    family: Union[AverageFamily, str],
    model: TransitionMeasureModel,
    omega_seed: int,
    ns: Sequence[int],
    pts: EvalPoints,
) -> np.ndarray:
    """Family kernel at the points for every index in ``ns``, shape (len(ns), M)."""
    fam = _as_family(family)
    ev = _family_evaluator(fam, model, omega_seed)
    ns = list(ns)
    if any(n < 1 for n in ns):
        raise ValueError("average index n must be >= 1")
    order = np.argsort(ns, kind="stable")
    cuts = [ns[i] for i in order]
    if any(c2 <= c1 for c1, c2 in zip(cuts, cuts[1:])):
        raise ValueError("indices ns must be distinct")
    A, B = ev.components_cumulative(pts, cuts)
    theta = ev.theta_transform(pts)[None, :]
    ephi = ev.expectation_factor(pts)[None, :]
    if fam.component == "full":
        raw = theta * A
    elif fam.component == "expected":
        raw = theta * ephi * B
    else:
        raw = theta * (A - ephi * B)
    b = np.array([fam.normalization(model, c) for c in cuts])[:, None]
    ordered = raw / b
    out = np.empty_like(ordered)
    out[order] = ordered
    return out


def kernel_value(
    family: Union[AverageFamily, str],
    model: TransitionMeasureModel,
    omega_seed: int,
    n: int,
    t,
):
    """Family kernel at a single point or batch of points."""
    pts_arr, single = _as_point_array(t, model.d)
    vals = kernel_values(family, model, omega_seed, [n], EvalPoints(t=pts_arr))[0]
    return complex(vals[0]) if single else vals


def _spectral_points(mu: SpectralMeasure) -> EvalPoints:
    return EvalPoints(t=mu.locations, cycles=mu.cycles)


def apply_average(
    family: Union[AverageFamily, str],
    model: TransitionMeasureModel,
    omega_seed: int,
    n: int,
    f: TorusObservable,
) -> TorusObservable:
    """Apply the family average to an observable, exactly in the Fourier domain."""
    mu = spectral_measure(f)
    vals = kernel_values(family, model, omega_seed, [n], _spectral_points(mu))[0]
    lookup = {tuple(m): v for m, v in zip(f.freqs.tolist(), vals)}
    return apply_multiplier(f, lambda locs: np.array([lookup[tuple(np.rint(loc / (2 * np.pi)).astype(int))] for loc in locs]))


@dataclass(frozen=True, eq=False)
class SquareFunctionResult:
    """Squared L2 norm of the square function along floor(rho^n), with the
    spectral moment it is compared against."""

    rho: float
    N: int
    value: float
    moment: float
    ratio: float
    indices: tuple


def exponential_indices(rho: float, N: int) -> list[int]:
    """Distinct values of floor(rho^n), n = 1..N (duplicates would double count)."""
    if rho <= 1:
        raise ValueError("rho must exceed 1")
    if N < 1:
        raise ValueError("N must be >= 1")
    seen = sorted({int(math.floor(rho**n)) for n in range(1, N + 1)})
    return [v for v in seen if v >= 1]


def square_function(
    model: TransitionMeasureModel,
    omega_seed: int,
    f: Union[TorusObservable, SpectralMeasure],
    rho: float,
    N: int,
    moment: str = "loglog",
    psi: Optional[Callable] = None,
) -> SquareFunctionResult:
    """sum over atoms of mass * sum_n |D_hat_{floor(rho^n)}(t_atom)|^2.

    ``f`` may be an observable or a spectral measure directly (synthetic
    atoms).  ``moment`` selects the comparison moment: "loglog" or "logpsi"
    (the latter needs the generalized inverse ``psi``).
    """
    mu = f if isinstance(f, SpectralMeasure) else spectral_measure(f)
    ns = exponential_indices(rho, N)
    vals = kernel_values("D", model, omega_seed, ns, _spectral_points(mu))
    value = float(np.sum(mu.masses[None, :] * np.abs(vals) ** 2))
    if moment == "loglog":
        mom = loglog_moment(mu)
    elif moment == "logpsi":
        if psi is None:
            raise ValueError("logpsi moment requires the inverse growth function psi")
        mom = logpsi_moment(mu, psi)
    else:
        raise ValueError(f"unknown moment kind {moment!r}")
    return SquareFunctionResult(rho=rho, N=N, value=value, moment=mom, ratio=value / mom, indices=tuple(ns))


@dataclass(frozen=True, eq=False)
class SeriesState:
    """Partial sum S_n of the smoothed centered series, as an observable and
    at the fixed audit sample points."""

    n: int
    observable: TorusObservable
    sample_points: np.ndarray
    sample_values: np.ndarray


def _series_evaluator(model: TransitionMeasureModel, omega_seed: int) -> KernelEvaluator:
    if not model.has_smoothing:
        raise ConfigurationError("the centered series requires a model with smoothing")
    return KernelEvaluator(
        model,
        omega_seed,
        include_theta=False,
        include_smoothing=True,
        include_subsequence=True,
        a_rule="inverse_power",
    )


def series_partial_sum(model: TransitionMeasureModel, omega_seed: int, f: TorusObservable, n: int) -> SeriesState:
    """S_n f = sum over k in [1, n]^r of the centered smoothed term / |k|^r."""
    if n < 1:
        raise ValueError("n must be >= 1")
    ev = _series_evaluator(model, omega_seed)
    mu = spectral_measure(f)
    vals = ev.centered_cumulative(_spectral_points(mu), [n])[0]
    lookup = {tuple(m): v for m, v in zip(f.freqs.tolist(), vals)}
    obs = apply_multiplier(f, lambda locs: np.array([lookup[tuple(np.rint(loc / (2 * np.pi)).astype(int))] for loc in locs]))
    pts = sample_points(model.d)
    return SeriesState(n=n, observable=obs, sample_points=pts, sample_values=evaluate(obs, pts))


def series_window_norms(
    model: TransitionMeasureModel,
    omega_seed: int,
    f: TorusObservable,
    pairs: Sequence[tuple],
) -> list[float]:
    """L2 norms of S_m - S_n for each (n, m): sqrt(sum_j rho_j |window sum|^2)."""
    ev = _series_evaluator(model, omega_seed)
    mu = spectral_measure(f)
    pts = _spectral_points(mu)
    out = []
    for n, m in pairs:
        if not (m > n >= 0):
            raise ValueError("window requires m > n >= 0")
        vals = ev.centered_points(pts, n, m)
        out.append(float(math.sqrt(np.sum(mu.masses * np.abs(vals) ** 2))))
    return out


def series_increment_norm(model: TransitionMeasureModel, omega_seed: int, f: TorusObservable, n: int, m: int) -> float:
    """||S_m - S_n||_2 computed exactly from the spectral atoms."""
    return series_window_norms(model, omega_seed, f, [(n, m)])[0]


@dataclass(frozen=True, eq=False)
class MoriczReport:
    """Outcome of checking the blockwise second-moment hypothesis
    ||sum_{k=n+1}^m G_k||^2 <= constant * A_m * sum_{k=n+1}^m alpha_k."""

    holds: bool
    constant: float
    max_ratio: float
    worst_pair: Optional[tuple]
    violations: tuple
    growth_ratio: float
    series_bound: float


def moricz_check(
    norms: Sequence[tuple],
    alpha: Sequence[float],
    A: Sequence[float],
    gamma: float,
    constant: float = 1.0,
) -> MoriczReport:
    """Verify the hypothesis on supplied norm data and report the bound.

    ``norms`` holds (n, m, ||sum_{k=n+1}^m G_k||_2) triples; ``alpha`` and
    ``A`` are 1-based sequences covering every index used.  ``A`` must be
    non-decreasing with A_n growing at most like n^gamma; the maximal-sum
    bound constant sum alpha_n A_n (log n)^2 is reported over the supplied
    range.
    """
    alpha = np.asarray(alpha, dtype=float)
    A = np.asarray(A, dtype=float)
    if len(A) != len(alpha):
        raise ValueError("alpha and A must cover the same index range")
    if np.any(np.diff(A) < 0):
        raise ValueError("A must be non-decreasing")
    if np.any(alpha < 0):
        raise ValueError("alpha must be nonnegative")
    idx = np.arange(1, len(A) + 1, dtype=float)
    growth_ratio = float(np.max(A / idx**gamma))
    logs = np.log(idx)
    series_bound = float(np.sum(alpha * A * logs**2))
    max_ratio = 0.0
    worst = None
    violations = []
    for n, m, value in norms:
        if not (m > n >= 0):
            raise ValueError("norm data requires m > n >= 0")
        if m > len(alpha) or m > len(A):
            raise ValueError("alpha and A must cover every index in the data")
        rhs = A[m - 1] * float(np.sum(alpha[n : m]))
        ratio = value**2 / rhs if rhs > 0 else (0.0 if value == 0 else math.inf)
        if ratio > max_ratio:
            max_ratio = ratio
            worst = (n, m)
        if value**2 > constant * rhs * (1.0 + 1e-12):
            violations.append((n, m, ratio))
    return MoriczReport(
        holds=not violations,
        constant=constant,
        max_ratio=max_ratio,
        worst_pair=worst,
        violations=tuple(violations),
        growth_ratio=growth_ratio,
        series_bound=series_bound,
    )
