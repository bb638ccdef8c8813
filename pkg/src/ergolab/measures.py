"""Finite complex atomic measures, smoothing kernels, and transition models.

An atomic measure is a finite list of weighted points in R^d; its
Fourier-Stieltjes transform is an exponential sum over the atoms.  Smoothing
densities are never atomized: their transform factor enters every evaluation
in closed form, which keeps kernel values exact and fast.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy.special import sici, wofz

from .errors import ConfigurationError, ParameterError
from .perturbations import PerturbationSpec, SubsequenceSpec
from .seeding import stream_seed

_PROB_TOL = 1e-12

KERNEL_FAMILIES = ("box", "triangle", "gaussian_truncated")


@dataclass(frozen=True, eq=False)
class AtomicMeasure:
    """Finite complex measure sum_j w_j * delta_{u_j} on R^d.

    ``points`` has shape (m, d) and ``weights`` shape (m,).  Instances are
    immutable after construction and safe for concurrent use.
    """

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        w = np.asarray(self.weights, dtype=complex).ravel()
        if pts.shape[0] != w.shape[0]:
            raise ValueError("points and weights must have matching length")
        if pts.shape[0] == 0:
            raise ValueError("a measure needs at least one atom")
        if not np.all(np.isfinite(pts)) or not np.all(np.isfinite(w)):
            raise ValueError("atoms must be finite")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "_mass", float(np.sum(np.abs(w))))

    @classmethod
    def from_atoms(cls, atoms: Sequence) -> "AtomicMeasure":
        pts = [np.atleast_1d(np.asarray(p, dtype=float)) for p, _ in atoms]
        w = [complex(wj) for _, wj in atoms]
        return cls(points=np.vstack(pts), weights=np.array(w))

    @classmethod
    def dirac(cls, point) -> "AtomicMeasure":
        return cls(points=np.atleast_2d(np.asarray(point, dtype=float)), weights=np.array([1.0 + 0j]))

    @property
    def d(self) -> int:
        return self.points.shape[1]

    @property
    def n_atoms(self) -> int:
        return self.points.shape[0]

    @property
    def mass(self) -> float:
        """Total variation mass sum_j |w_j|."""
        return self._mass

    @property
    def is_probability(self) -> bool:
        w = self.weights
        return bool(
            np.all(np.abs(w.imag) <= _PROB_TOL)
            and np.all(w.real >= -_PROB_TOL)
            and abs(np.sum(w.real) - 1.0) <= _PROB_TOL
        )

    @property
    def has_real_weights(self) -> bool:
        return bool(np.all(np.abs(self.weights.imag) <= _PROB_TOL))

    def shift(self, vector) -> "AtomicMeasure":
        return AtomicMeasure(points=self.points + np.asarray(vector, dtype=float), weights=self.weights)

    def weighted_abs_coord(self) -> np.ndarray:
        """sum_j |w_j| |u_{j,i}| per coordinate (Lipschitz bookkeeping)."""
        return np.abs(self.weights)[:, None] * np.abs(self.points)

    def to_json_dict(self) -> dict:
        return {"atoms": [[p.tolist(), float(w.real), float(w.imag)] for p, w in zip(self.points, self.weights)]}

    @classmethod
    def from_json_dict(cls, data: Mapping) -> "AtomicMeasure":
        pts, ws = [], []
        for u, re, im in data["atoms"]:
            pts.append(np.atleast_1d(np.asarray(u, dtype=float)))
            ws.append(complex(re, im))
        return cls(points=np.vstack(pts), weights=np.array(ws))

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    @classmethod
    def from_json(cls, text: str) -> "AtomicMeasure":
        return cls.from_json_dict(json.loads(text))


def variation_mass(measure: AtomicMeasure) -> float:
    """Total variation mass sum_j |w_j|."""
    return measure.mass


def _as_point_array(t, d: int):
    t = np.asarray(t, dtype=float)
    if t.ndim == 0:
        if d != 1:
            raise ValueError("scalar t only valid in dimension 1")
        return t.reshape(1, 1), True
    if t.ndim == 1:
        if t.shape[0] == d:
            return t.reshape(1, d), True
        if d == 1:
            return t.reshape(-1, 1), False
        raise ValueError(f"t must have {d} coordinates")
    if t.shape[-1] != d:
        raise ValueError(f"t must have trailing dimension {d}")
    return t.reshape(-1, d), False


def fourier_stieltjes(measure: AtomicMeasure, t, smoothing=None):
    """sum_j w_j exp(i<t, u_j>), optionally times the smoothing factor.

    ``t`` may be a single point (scalar or shape (d,)) or an array of points
    with trailing dimension d.  ``smoothing`` is an (epsilon, SmoothingKernel)
    pair; the factor zeta_hat(epsilon . t) multiplies the atomic transform.
    The modulus never exceeds the variation mass.
    """
    pts, single = _as_point_array(t, measure.d)
    vals = np.exp(1j * (pts @ measure.points.T)) @ measure.weights
    if smoothing is not None:
        eps, kernel = smoothing
        eps = np.asarray(eps, dtype=float).reshape(measure.d)
        vals = vals * kernel.transform(pts * eps)
    return complex(vals[0]) if single else vals


def truncated_transform(measure: AtomicMeasure, t, L: float):
    """Transform restricted to atoms inside the closed box [-L, L]^d."""
    if L <= 0:
        raise ValueError("truncation half-width L must be positive")
    mask = np.max(np.abs(measure.points), axis=1) <= L
    pts, single = _as_point_array(t, measure.d)
    if not np.any(mask):
        vals = np.zeros(pts.shape[0], dtype=complex)
    else:
        vals = np.exp(1j * (pts @ measure.points[mask].T)) @ measure.weights[mask]
    return complex(vals[0]) if single else vals


@dataclass(frozen=True, eq=False)
class SmoothingKernel:
    """Product smoothing density zeta on R^d with closed-form transform.

    Per-axis profiles (each nonnegative with unit integral, so zeta_hat(0)=1
    and |zeta_hat| <= 1):

    - ``box``:                 1/2 on [-1, 1]; transform sin(x)/x
    - ``triangle``:            (1 - |u|)+ ; transform (sin(x/2)/(x/2))^2
    - ``gaussian_truncated``:  standard normal restricted to [-hw, hw]

    ``decay_alpha`` is the polynomial decay exponent with certificate
    sup_x max(1, |x|)^alpha |zeta_hat(x)| < infinity per axis.
    """

    family: str = "box"
    halfwidth: float = 3.0

    def __post_init__(self):
        if self.family not in KERNEL_FAMILIES:
            raise ParameterError(f"unknown smoothing kernel {self.family!r}")
        if self.family == "gaussian_truncated" and self.halfwidth <= 0:
            raise ParameterError("gaussian_truncated halfwidth must be positive")

    @property
    def decay_alpha(self) -> float:
        return 2.0 if self.family == "triangle" else 1.0

    def transform1d(self, x) -> np.ndarray:
        """Per-axis transform zeta1_hat(x)."""
        x = np.asarray(x, dtype=float)
        if self.family == "box":
            return np.sinc(x / np.pi)
        if self.family == "triangle":
            return np.sinc(x / (2.0 * np.pi)) ** 2
        return self._gauss_trunc_transform(x)

    def _gauss_trunc_transform(self, x: np.ndarray) -> np.ndarray:
        # integral_{-a}^{a} e^{ixu} e^{-u^2/2} du, normalized to 1 at x = 0,
        # evaluated through the scaled complementary error function so the
        # e^{-x^2/2} underflow and erf overflow cancel analytically:
        #   e^{-x^2/2} erfc((a - ix)/sqrt2) = e^{-a^2/2} e^{iax} erfcx((a - ix)/sqrt2)
        a = self.halfwidth
        w = (a - 1j * x) / math.sqrt(2.0)
        erfcx_w = wofz(1j * w)
        small = np.exp(-a * a / 2.0) * np.exp(1j * a * x) * erfcx_w
        f = np.where(np.abs(x) < 37.0, np.exp(-np.minimum(x * x, 2744.0) / 2.0), 0.0) - small
        z = math.erf(a / math.sqrt(2.0))
        return f.real / z

    def transform(self, t) -> np.ndarray:
        """Product transform over the trailing axis of ``t``."""
        t = np.asarray(t, dtype=float)
        return np.prod(self.transform1d(t), axis=-1)

    def mean_abs1d(self) -> float:
        """integral |u| zeta1(u) du per axis (derivative bound for the factor)."""
        if self.family == "box":
            return 0.5
        if self.family == "triangle":
            return 1.0 / 3.0
        a = self.halfwidth
        z = math.erf(a / math.sqrt(2.0)) * math.sqrt(2.0 * math.pi)
        return 2.0 * (1.0 - math.exp(-a * a / 2.0)) / z

    def decay_certificate(self, d: int = 1) -> float:
        """sup_t prod_j max(1, |t_j|)^alpha |zeta_hat(t)| over R^d."""
        if self.family == "box":
            per_axis = 1.0  # |x sinc(x)| = |sin x| <= 1
        elif self.family == "triangle":
            per_axis = 4.0  # x^2 sinc(x/2)^2 = 4 sin(x/2)^2 <= 4
        else:
            xs = np.linspace(0.0, 400.0, 120001)
            per_axis = float(np.max(np.maximum(1.0, xs) ** self.decay_alpha * np.abs(self.transform1d(xs))))
        return per_axis**d

    def to_config(self) -> dict:
        cfg = {"family": self.family}
        if self.family == "gaussian_truncated":
            cfg["halfwidth"] = self.halfwidth
        return cfg

    @classmethod
    def from_config(cls, cfg: Mapping) -> "SmoothingKernel":
        return cls(family=cfg["family"], halfwidth=float(cfg.get("halfwidth", 3.0)))


@dataclass(frozen=True, eq=False)
class TransitionMeasureModel:
    """Recipe mapping sampled randomness to a sequence of atomic measures.

    The measure at multi-index k is the base measure theta (default: Dirac at
    the origin) shifted by n_k + delta_k(omega); when smoothing is configured
    the factor zeta_hat(epsilon_k . t) multiplies every transform in closed
    form rather than being atomized.  Per-index randomness comes from
    documented substreams of the omega seed, so any window of indices is
    reproducible independently of evaluation order.
    """

    delta: PerturbationSpec
    subsequence: SubsequenceSpec
    epsilon: Optional[PerturbationSpec] = None
    kernel: Optional[SmoothingKernel] = None
    theta: Optional[AtomicMeasure] = None
    a_rule: str = "unit"
    n_expectation_samples: int = 100_000

    def __post_init__(self):
        if (self.epsilon is None) != (self.kernel is None):
            raise ConfigurationError("smoothing requires both an epsilon spec and a kernel")
        d = self.delta.d
        if self.subsequence.d != d:
            raise ConfigurationError("delta and subsequence dimensions disagree")
        if self.epsilon is not None and self.epsilon.d != d:
            raise ConfigurationError("epsilon dimension disagrees with delta")
        if self.theta is not None and self.theta.d != d:
            raise ConfigurationError("theta dimension disagrees with delta")
        if self.a_rule not in ("unit", "inverse_power"):
            raise ConfigurationError(f"unknown coefficient rule {self.a_rule!r}")

    @property
    def d(self) -> int:
        return self.delta.d

    @property
    def r(self) -> int:
        return self.subsequence.r

    @property
    def has_smoothing(self) -> bool:
        return self.epsilon is not None

    @property
    def theta_mass(self) -> float:
        return 1.0 if self.theta is None else self.theta.mass

    @property
    def is_probability(self) -> bool:
        return self.theta is None or self.theta.is_probability

    def a_value(self, magnitude: int) -> float:
        """Coefficient a_k as a function of |k|."""
        if self.a_rule == "unit":
            return 1.0
        return 1.0 / float(magnitude) ** self.r

    def delta_at(self, omega_seed: int, k) -> np.ndarray:
        k = (k,) if isinstance(k, (int, np.integer)) else tuple(int(v) for v in k)
        return self.delta.sample_stream(omega_seed, "delta", k)

    def epsilon_at(self, omega_seed: int, k) -> np.ndarray:
        if self.epsilon is None:
            raise ConfigurationError("model has no smoothing component")
        k = (k,) if isinstance(k, (int, np.integer)) else tuple(int(v) for v in k)
        return self.epsilon.sample_stream(omega_seed, "epsilon", k)

    def n_at(self, k) -> np.ndarray:
        return self.subsequence.values(k)

    def to_config(self) -> dict:
        cfg = {
            "delta": self.delta.to_config(),
            "subsequence": self.subsequence.to_config(),
            "a_rule": self.a_rule,
            "n_expectation_samples": self.n_expectation_samples,
        }
        if self.epsilon is not None:
            cfg["epsilon"] = self.epsilon.to_config()
            cfg["kernel"] = self.kernel.to_config()
        if self.theta is not None:
            cfg["theta"] = self.theta.to_json_dict()
        return cfg

    @classmethod
    def from_config(cls, cfg: Mapping) -> "TransitionMeasureModel":
        return cls(
            delta=PerturbationSpec.from_config(cfg["delta"]),
            subsequence=SubsequenceSpec.from_config(cfg["subsequence"]),
            epsilon=PerturbationSpec.from_config(cfg["epsilon"]) if "epsilon" in cfg else None,
            kernel=SmoothingKernel.from_config(cfg["kernel"]) if "kernel" in cfg else None,
            theta=AtomicMeasure.from_json_dict(cfg["theta"]) if "theta" in cfg else None,
            a_rule=cfg.get("a_rule", "unit"),
            n_expectation_samples=int(cfg.get("n_expectation_samples", 100_000)),
        )


def realize_measure(model: TransitionMeasureModel, omega_seed: int, k) -> AtomicMeasure:
    """The atomic part of the measure at index k: theta shifted by n_k + delta_k.

    The smoothing factor, when configured, stays in closed form and is not
    atomized; pass (epsilon_k, kernel) to ``fourier_stieltjes`` to include it.
    """
    base = model.theta if model.theta is not None else AtomicMeasure.dirac(np.zeros(model.d))
    return base.shift(model.n_at(k) + model.delta_at(omega_seed, k))


# Fixed substream for Monte Carlo expectation estimates: the expectation is a
# deterministic function of the model, so its sample must not vary with omega.
_EXPECTATION_STREAM = ("expectation", "monte-carlo")
_MC_CACHE: dict = {}


def _mc_sample(spec: PerturbationSpec, count: int) -> np.ndarray:
    key = (json.dumps(spec.to_config(), sort_keys=True), count)
    cached = _MC_CACHE.get(key)
    if cached is None:
        if len(_MC_CACHE) > 8:
            _MC_CACHE.clear()
        cached = spec.sample(count, stream_seed(0, *_EXPECTATION_STREAM, spec.family))
        _MC_CACHE[key] = cached
    return cached


def delta_char_factor(model: TransitionMeasureModel, pts: np.ndarray, method: str = "auto"):
    """E exp(i<delta, t>) on points, with closed form preferred.

    Returns (values, standard_error, method_used).  The Monte Carlo fallback
    uses ``model.n_expectation_samples`` draws from a fixed substream and
    reports the worst-case standard error over the points.
    """
    if method not in ("auto", "closed_form", "monte_carlo"):
        raise ValueError(f"unknown method {method!r}")
    if method in ("auto", "closed_form") and model.delta.has_closed_char:
        return model.delta.char_function(pts), 0.0, "closed_form"
    if method == "closed_form":
        raise ConfigurationError(f"no closed form for family {model.delta.family!r}")
    n = model.n_expectation_samples
    if n < 1_000:
        raise ConfigurationError("Monte Carlo expectation needs at least 1000 samples")
    sample = _mc_sample(model.delta, n)
    vals = np.empty(pts.shape[0], dtype=complex)
    worst_std = 0.0
    chunk = max(1, 20_000_000 // max(n, 1))
    for lo in range(0, pts.shape[0], chunk):
        phases = np.exp(1j * (pts[lo : lo + chunk] @ sample.T))
        vals[lo : lo + chunk] = phases.mean(axis=1)
        worst_std = max(worst_std, float(np.max(np.std(phases, axis=1))))
    return vals, worst_std / math.sqrt(n), "monte_carlo"


def kernel_expectation_factor(model: TransitionMeasureModel, pts: np.ndarray, method: str = "auto"):
    """E zeta_hat(epsilon . t) on points; closed forms per axis where known.

    Closed forms: box kernel against constant, uniform, or exponential
    epsilon; triangle and gaussian_truncated against constant epsilon.
    """
    if not model.has_smoothing:
        return np.ones(pts.shape[0]), 0.0, "closed_form"
    eps, kern = model.epsilon, model.kernel
    closed = None
    if eps.family == "constant":
        c = eps._coords["c"]
        closed = kern.transform(pts * c)
    elif kern.family == "box" and eps.family == "uniform":
        a = eps._coords["a"]
        z = pts * a
        si, _ = sici(np.abs(z))
        with np.errstate(invalid="ignore", divide="ignore"):
            per = np.where(np.abs(z) < 1e-8, 1.0, si / np.maximum(np.abs(z), 1e-300))
        closed = np.prod(per, axis=-1)
    elif kern.family == "box" and eps.family == "exponential":
        lam = eps._coords["rate"]
        z = pts
        with np.errstate(invalid="ignore", divide="ignore"):
            per = np.where(np.abs(z) < 1e-8, 1.0, lam * np.arctan(z / lam) / np.where(np.abs(z) < 1e-8, 1.0, z))
        closed = np.prod(per, axis=-1)
    if method in ("auto", "closed_form") and closed is not None:
        return closed, 0.0, "closed_form"
    if method == "closed_form":
        raise ConfigurationError(f"no closed form for kernel {kern.family!r} against epsilon {eps.family!r}")
    n = model.n_expectation_samples
    if n < 1_000:
        raise ConfigurationError("Monte Carlo expectation needs at least 1000 samples")
    sample = _mc_sample(eps, n)
    vals = np.empty(pts.shape[0], dtype=float)
    errs = 0.0
    chunk = max(1, 10_000_000 // max(n, 1))
    for lo in range(0, pts.shape[0], chunk):
        block = kern.transform(pts[lo : lo + chunk, None, :] * sample[None, :, :])
        vals[lo : lo + chunk] = block.mean(axis=1)
        errs = max(errs, float(np.max(np.std(block, axis=1))))
    return vals, errs / math.sqrt(n), "monte_carlo"


def expected_transform(model: TransitionMeasureModel, k, t, method: str = "auto"):
    """E nu_k_hat(t) = theta_hat(t) e^{i<n_k,t>} E(e^{i<delta,t>}) E(zeta_hat(eps.t)).

    Closed forms are used whenever available; otherwise a Monte Carlo
    estimate with a recorded standard error (see ``expected_transform_info``).
    """
    vals, _, _ = expected_transform_info(model, k, t, method=method)
    return vals


def expected_transform_info(model: TransitionMeasureModel, k, t, method: str = "auto"):
    """Like ``expected_transform`` but returns (values, standard_error, method)."""
    pts, single = _as_point_array(t, model.d)
    nk = model.n_at(k)
    base = np.exp(1j * (pts @ nk))
    if model.theta is not None:
        base = base * fourier_stieltjes(model.theta, pts)
    dvals, derr, dmeth = delta_char_factor(model, pts, method=method)
    kvals, kerr, kmeth = kernel_expectation_factor(model, pts, method=method)
    vals = base * dvals * kvals
    err = model.theta_mass * (derr + kerr)
    used = "monte_carlo" if "monte_carlo" in (dmeth, kmeth) else "closed_form"
    return (complex(vals[0]) if single else vals), err, used
