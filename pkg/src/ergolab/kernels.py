"""Centered random exponential sums on boxes with certified suprema.

The engine evaluates windowed sums

    P_{n,m}(t) = sum over n < |k| <= m of a_k (nu_k_hat(t) - E nu_k_hat(t))

by factoring each term into a base-measure transform, a pure modulation
e^{i<n_k + delta_k, t>}, a closed-form smoothing factor, and a closed-form
(or cached Monte Carlo) expectation factor.  On tensor grids the modulations
are computed per axis and combined by separable accumulation, so the
expensive complex exponentials scale with the sum of axis lengths per term.

Suprema over a box come with a certificate: grid maximum plus Lipschitz
slack, sharpened by pruned local refinement.  A cell is discarded only when
its value plus slack cannot exceed the best value seen, so the reported
``certified_bound`` always dominates the true supremum.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConfigurationError, SizeError
from .measures import (
    TransitionMeasureModel,
    _as_point_array,
    delta_char_factor,
    expected_transform,
    fourier_stieltjes,
    kernel_expectation_factor,
    realize_measure,
)
from .torus import cycle_phases

_SHELL_BLOCK = 64
_POINT_CHUNK = 65536


@dataclass(frozen=True, eq=False)
class EvalPoints:
    """A batch of evaluation points, optionally with exact cycle coordinates.

    When ``cycles`` is set, t = 2 pi * cycles and modulation phases are
    reduced through exact fractional cycle counts, which keeps them accurate
    at locations far beyond float64 phase resolution.
    """

    t: np.ndarray
    cycles: Optional[np.ndarray] = None

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        if t.ndim != 2:
            raise ValueError("EvalPoints.t must have shape (count, d)")
        object.__setattr__(self, "t", t)
        if self.cycles is not None:
            cyc = np.asarray(self.cycles, dtype=float)
            if cyc.shape != t.shape:
                raise ValueError("cycles must match t in shape")
            object.__setattr__(self, "cycles", cyc)

    @property
    def count(self) -> int:
        return self.t.shape[0]


@dataclass(frozen=True)
class GridSpec:
    """Box [-T, T]^d with base spacing h and pruned local refinement.

    ``h = None`` matches the spacing to the window's fastest oscillation
    (one node per radian of the highest frequency), clamped by ``budget``;
    pruned refinement then sharpens both the maximum and its certificate.
    """

    T: float
    h: Optional[float] = None
    d: int = 1
    refinement_levels: int = 2
    refine_factor: int = 10
    budget: int = 4_194_304

    def __post_init__(self):
        if self.T <= 0:
            raise ValueError("box half-width T must be positive")
        if self.h is not None and self.h <= 0:
            raise ValueError("grid spacing h must be positive")
        if self.refinement_levels < 0 or self.refine_factor < 2:
            raise ValueError("invalid refinement parameters")


@dataclass(frozen=True, eq=False)
class SupResult:
    """Certified supremum of |P_{n,m}| over a box."""

    sup_value: float
    argmax: np.ndarray
    certified_bound: float
    lipschitz_constant: float
    points_evaluated: int
    refinement_saturated: bool = False


@dataclass(frozen=True, eq=False)
class RatioStatistic:
    """Largest observed quotient sup^2 / denominator with its witnesses."""

    value: float
    witness: dict
    rows: tuple


@dataclass(frozen=True, eq=False)
class _ShellData:
    U: np.ndarray
    N: np.ndarray
    EPS: Optional[np.ndarray]
    a: np.ndarray
    count: int


def _shell_indices(j: int, r: int):
    if r == 1:
        return [(j,)]
    return [k for k in itertools.product(range(1, j + 1), repeat=r) if max(k) == j]


class KernelEvaluator:
    """Per-(model, seed) cache of realized randomness and factored terms.

    All methods are pure functions of the construction arguments; instances
    may be shared across threads for reading.  ``include_*`` flags select
    which ingredients of the model participate (the plain-translation and
    shift-only average families reuse the same machinery).
    """

    def __init__(
        self,
        model: TransitionMeasureModel,
        omega_seed: int,
        include_subsequence: bool = True,
        include_theta: bool = True,
        include_smoothing: Optional[bool] = None,
        a_rule: Optional[str] = None,
    ):
        self.model = model
        self.omega_seed = omega_seed
        self.include_subsequence = include_subsequence
        self.include_theta = include_theta and model.theta is not None
        self.include_smoothing = model.has_smoothing if include_smoothing is None else include_smoothing
        if self.include_smoothing and not model.has_smoothing:
            raise ConfigurationError("model has no smoothing component")
        self.a_rule = model.a_rule if a_rule is None else a_rule
        if self.a_rule not in ("unit", "inverse_power"):
            raise ConfigurationError(f"unknown coefficient rule {self.a_rule!r}")
        self.d = model.d
        self.r = model.r
        self._shells: dict[int, _ShellData] = {}
        self._mc_delta_mean: Optional[np.ndarray] = None

    # -- realized randomness ------------------------------------------------

    def _a_value(self, j: int) -> float:
        return 1.0 if self.a_rule == "unit" else 1.0 / float(j) ** self.r

    def shell(self, j: int) -> _ShellData:
        cached = self._shells.get(j)
        if cached is not None:
            return cached
        ks = _shell_indices(j, self.r)
        c = len(ks)
        U = np.empty((c, self.d))
        N = np.zeros((c, self.d))
        EPS = np.empty((c, self.d)) if self.include_smoothing else None
        for row, k in enumerate(ks):
            delta = self.model.delta_at(self.omega_seed, k)
            nk = self.model.n_at(k) if self.include_subsequence else np.zeros(self.d)
            U[row] = nk + delta
            N[row] = nk
            if EPS is not None:
                EPS[row] = self.model.epsilon_at(self.omega_seed, k)
        data = _ShellData(U=U, N=N, EPS=EPS, a=np.full(c, self._a_value(j)), count=c)
        self._shells[j] = data
        return data

    def _blocks(self, n: int, m: int):
        """Shells n+1..m stacked into blocks of bounded row count."""
        rows_U, rows_N, rows_E, rows_a, shells = [], [], [], [], []
        total = 0
        for j in range(n + 1, m + 1):
            sd = self.shell(j)
            rows_U.append(sd.U)
            rows_N.append(sd.N)
            rows_a.append(sd.a)
            if sd.EPS is not None:
                rows_E.append(sd.EPS)
            shells.append((j, sd.count))
            total += sd.count
            if total >= _SHELL_BLOCK:
                yield self._stack_block(rows_U, rows_N, rows_E, rows_a, shells)
                rows_U, rows_N, rows_E, rows_a, shells = [], [], [], [], []
                total = 0
        if shells:
            yield self._stack_block(rows_U, rows_N, rows_E, rows_a, shells)

    @staticmethod
    def _stack_block(rows_U, rows_N, rows_E, rows_a, shells):
        U = np.vstack(rows_U)
        N = np.vstack(rows_N)
        EPS = np.vstack(rows_E) if rows_E else None
        a = np.concatenate(rows_a)
        return U, N, EPS, a, shells

    # -- shared factors -------------------------------------------------------

    def theta_transform(self, pts: EvalPoints) -> np.ndarray:
        if not self.include_theta:
            return np.ones(pts.count, dtype=complex)
        th = self.model.theta
        mods = self._modulation(th.points, pts)
        return mods @ th.weights

    def expectation_factor(self, pts: EvalPoints) -> np.ndarray:
        dvals, _, dmeth = delta_char_factor(self.model, pts.t)
        if self.include_smoothing:
            kvals, _, _ = kernel_expectation_factor(self.model, pts.t)
        else:
            kvals = 1.0
        if dmeth == "monte_carlo" and self._mc_delta_mean is None:
            from .measures import _mc_sample

            self._mc_delta_mean = np.mean(np.abs(_mc_sample(self.model.delta, self.model.n_expectation_samples)), axis=0)
        return dvals * kvals

    def _delta_mean_abs(self) -> np.ndarray:
        if self.model.delta.has_closed_char:
            return self.model.delta.mean_abs_coord()
        if self._mc_delta_mean is None:
            from .measures import _mc_sample

            self._mc_delta_mean = np.mean(np.abs(_mc_sample(self.model.delta, self.model.n_expectation_samples)), axis=0)
        return self._mc_delta_mean

    @property
    def symmetric(self) -> bool:
        """|P(-t)| = |P(t)|: holds whenever all weights are real."""
        return not self.include_theta or self.model.theta.has_real_weights

    @property
    def is_degenerate(self) -> bool:
        """True when every measure equals its expectation, so the centered
        sum vanishes identically (constant perturbations)."""
        if self.model.delta.family != "constant":
            return False
        return not self.include_smoothing or self.model.epsilon.family == "constant"

    # -- point evaluation -----------------------------------------------------

    def _modulation(self, U: np.ndarray, pts: EvalPoints) -> np.ndarray:
        """exp(i <u_k, t>) for all points and rows, shape (M, K)."""
        if pts.cycles is None:
            return np.exp(1j * (pts.t @ U.T))
        frac = cycle_phases(U, pts.cycles)
        return np.exp(2j * np.pi * frac)

    def _smoothing_factor(self, EPS: np.ndarray, pts: EvalPoints) -> np.ndarray:
        """zeta_hat(eps_k . t) per point and row, shape (M, K)."""
        kern = self.model.kernel
        return kern.transform(pts.t[:, None, :] * EPS[None, :, :])

    def components_points(self, pts: EvalPoints, n: int, m: int):
        """(A, B) with A = sum a_k e^{i<u_k,t>} zeta_hat(eps_k . t), B = sum a_k e^{i<n_k,t>}."""
        M = pts.count
        A = np.zeros(M, dtype=complex)
        B = np.zeros(M, dtype=complex)
        for U, N, EPS, a, _ in self._blocks(n, m):
            mods = self._modulation(U, pts)
            if EPS is not None:
                mods = mods * self._smoothing_factor(EPS, pts)
            A += mods @ a
            B += self._modulation(N, pts) @ a
        return A, B

    def centered_clusters(self, centers: np.ndarray, offsets: np.ndarray, n: int, m: int) -> np.ndarray:
        """P_{n,m} on the points centers[c] + offsets[o], shape (C, O).

        Modulation phases factor as e^{i<u, c>} e^{i<u, o>}, so the sum over
        terms becomes one matrix product per block; only the pointwise
        factors are evaluated on the full cluster set.  Smoothing factors do
        not factor this way, so smoothed models fall back to the flat path.
        """
        C, O = centers.shape[0], offsets.shape[0]
        flat = (centers[:, None, :] + offsets[None, :, :]).reshape(-1, self.d)
        if self.include_smoothing:
            return self.centered_points(EvalPoints(t=flat), n, m).reshape(C, O)
        A = np.zeros((C, O), dtype=complex)
        B = np.zeros((C, O), dtype=complex)
        for U, N, EPS, a, _ in self._blocks(n, m):
            Ec = np.exp(1j * (centers @ U.T))
            Eo = np.exp(1j * (offsets @ U.T))
            A += (Ec * a) @ Eo.T
            Nc = np.exp(1j * (centers @ N.T))
            No = np.exp(1j * (offsets @ N.T))
            B += (Nc * a) @ No.T
        pts = EvalPoints(t=flat)
        theta = self.theta_transform(pts).reshape(C, O)
        ephi = self.expectation_factor(pts).reshape(C, O)
        return theta * (A - ephi * B)

    def centered_points(self, pts: EvalPoints, n: int, m: int) -> np.ndarray:
        """P_{n,m} at the points."""
        A, B = self.components_points(pts, n, m)
        return self.theta_transform(pts) * (A - self.expectation_factor(pts) * B)

    def components_cumulative(self, pts: EvalPoints, cuts: Sequence[int]):
        """(A, B) at the points for every cut, each of shape (len(cuts), M).

        Cuts must be strictly increasing; each shell is accumulated once.
        """
        cuts = list(cuts)
        if any(c2 <= c1 for c1, c2 in zip(cuts, cuts[1:])):
            raise ValueError("cuts must be strictly increasing")
        A_out = np.empty((len(cuts), pts.count), dtype=complex)
        B_out = np.empty((len(cuts), pts.count), dtype=complex)
        A = np.zeros(pts.count, dtype=complex)
        B = np.zeros(pts.count, dtype=complex)
        prev = 0
        for row, c in enumerate(cuts):
            dA, dB = self.components_points(pts, prev, c)
            A += dA
            B += dB
            A_out[row] = A
            B_out[row] = B
            prev = c
        return A_out, B_out

    def centered_cumulative(self, pts: EvalPoints, cuts: Sequence[int]) -> np.ndarray:
        """P_{0,c} at the points for every cut c, shape (len(cuts), M)."""
        A, B = self.components_cumulative(pts, cuts)
        return self.theta_transform(pts)[None, :] * (A - self.expectation_factor(pts)[None, :] * B)

    # -- grid evaluation ------------------------------------------------------

    def centered_grid(self, axes: Sequence[np.ndarray], windows: Sequence[tuple]):
        """P window sums on the tensor grid; returns one flat array per window.

        Modulations are evaluated per axis and combined by outer products, so
        exp calls scale with the axis lengths per term instead of the full
        grid.  Prefix sums are snapshot at every window boundary and windows
        assembled by subtraction, so each shell is visited exactly once.
        """
        d = self.d
        if len(axes) != d:
            raise ValueError("one axis per dimension required")
        if d > 2:
            pts = EvalPoints(t=_flatten_grid(axes))
            return [self.centered_points(pts, n, m) for n, m in windows]
        shape = tuple(len(ax) for ax in axes)
        size = int(np.prod(shape))
        bounds = sorted({n for n, _ in windows} | {m for _, m in windows})
        snapA: dict[int, np.ndarray] = {}
        snapB: dict[int, np.ndarray] = {}
        A_run = np.zeros(shape, dtype=complex)
        B_run = np.zeros(shape, dtype=complex)
        if bounds and bounds[0] == 0:
            snapA[0] = A_run.copy()
            snapB[0] = B_run.copy()
            bounds = bounds[1:]
        kern = self.model.kernel
        prev = 0
        for cut in bounds:
            for U, N, EPS, a, _ in self._blocks(prev, cut):
                VU = []
                VN = []
                for ax in range(d):
                    vu = np.exp(1j * U[:, ax, None] * axes[ax][None, :])
                    if EPS is not None:
                        vu = vu * kern.transform1d(EPS[:, ax, None] * axes[ax][None, :])
                    VU.append(vu)
                    VN.append(np.exp(1j * N[:, ax, None] * axes[ax][None, :]))
                if d == 1:
                    A_run += VU[0].T @ a
                    B_run += VN[0].T @ a
                else:
                    A_run += (a[:, None] * VU[0]).T @ VU[1]
                    B_run += (a[:, None] * VN[0]).T @ VN[1]
            snapA[cut] = A_run.copy()
            snapB[cut] = B_run.copy()
            prev = cut
        zero = np.zeros(size, dtype=complex)
        flat_pts = EvalPoints(t=_flatten_grid(axes))
        theta = self.theta_transform(flat_pts)
        ephi = self.expectation_factor(flat_pts)
        out = []
        for n, m in windows:
            dA = snapA[m].ravel() - (snapA[n].ravel() if n else zero)
            dB = snapB[m].ravel() - (snapB[n].ravel() if n else zero)
            out.append(theta * (dA - ephi * dB))
        return out

    # -- certificates -----------------------------------------------------------

    def dense_prefix_scan_1d(self, cuts: Sequence[int], start: float, end: float, n_points: int,
                             want_derivative: bool, curvatures: dict, lips: dict):
        """Scan a uniform 1-d grid once, reducing each prefix window at its cut.

        The grid factors exactly as centers + offsets, so modulation sums are
        matrix products with one complex exponential per center and offset.
        For each cut c the window (0, c] is reduced to a dict with the grid
        maximum, its location, a certified bound, and the active nodes whose
        cell certificate exceeds the maximum.  Precondition: bare modulation
        form (no base measure, no smoothing).
        """
        if self.include_theta or self.include_smoothing:
            raise ConfigurationError("dense prefix scan requires the bare modulation form")
        O = min(2048, n_points)
        C = (n_points + O - 1) // O
        total = C * O
        h = (end - start) / (total - 1)
        centers = (start + (h * O) * np.arange(C)).reshape(-1, 1)
        offsets = (h * np.arange(O)).reshape(-1, 1)
        flat_t = (centers[:, None, 0] + offsets[None, :, 0]).ravel()
        phi = self.expectation_factor(EvalPoints(t=flat_t.reshape(-1, 1)))
        e_abs = float(self.model.delta.mean_abs_coord()[0])
        A = np.zeros((C, O), dtype=complex)
        B = np.zeros((C, O), dtype=complex)
        if want_derivative:
            A1 = np.zeros((C, O), dtype=complex)
            B1 = np.zeros((C, O), dtype=complex)
        prev = 0
        hw = h / 2.0
        results = {}
        for cut in sorted(cuts):
            for U, N, _, a, _ in self._blocks(prev, cut):
                u = U[:, 0]
                nk = N[:, 0]
                Ec = np.exp(1j * (centers * u[None, :]))
                Eo = np.exp(1j * (offsets * u[None, :]))
                Nc = np.exp(1j * (centers * nk[None, :]))
                No = np.exp(1j * (offsets * nk[None, :]))
                A += Ec @ (Eo * a).T
                B += Nc @ (No * a).T
                if want_derivative:
                    A1 += 1j * (Ec @ (Eo * (a * u)).T)
                    B1 += 1j * (Nc @ (No * (a * nk)).T)
            prev = cut
            vals = np.abs(A.ravel() - phi * B.ravel())
            best_idx = int(np.argmax(vals))
            best = float(vals[best_idx])
            if want_derivative:
                g = np.abs(A1.ravel()) + e_abs * np.abs(B.ravel()) + np.abs(phi) * np.abs(B1.ravel())
                certs = vals + g * hw + 0.5 * curvatures[cut] * hw * hw
            else:
                certs = vals + lips[cut] * hw
            active = certs > best
            results[cut] = {
                "best": best,
                "best_at": np.array([flat_t[best_idx]]),
                "certified": float(np.max(certs)),
                "active_pts": flat_t[active].reshape(-1, 1),
                "active_vals": vals[active],
                "h": h,
                "n_points": total,
            }
        return results

    def lipschitz(self, n: int, m: int) -> float:
        """Upper bound on the Euclidean gradient norm of P_{n,m}.

        Product rule over the factored form: each term contributes per
        coordinate the base-measure derivative mass, the modulation frequency
        scaled by total mass, and the smoothing-factor derivative bound.
        """
        d = self.d
        if self.include_theta:
            th = self.model.theta
            m_theta = th.mass
            d_theta = np.sum(th.weighted_abs_coord(), axis=0)
        else:
            m_theta = 1.0
            d_theta = np.zeros(d)
        m1 = self.model.kernel.mean_abs1d() if self.include_smoothing else 0.0
        e_delta = self._delta_mean_abs()
        if self.include_smoothing:
            eps_spec = self.model.epsilon
            e_eps = eps_spec.mean_abs_coord() if eps_spec.has_closed_char else np.mean(
                np.abs(self._mc_eps_sample()), axis=0
            )
        else:
            e_eps = np.zeros(d)
        L = np.zeros(d)
        for U, N, EPS, a, _ in self._blocks(n, m):
            side_omega = d_theta[None, :] + m_theta * (np.abs(U) + (EPS * m1 if EPS is not None else 0.0))
            side_mean = d_theta[None, :] + m_theta * (np.abs(N) + e_delta[None, :] + e_eps[None, :] * m1)
            L += a @ (side_omega + side_mean)
        return float(np.sqrt(np.sum(L**2)))

    def _mc_eps_sample(self):
        from .measures import _mc_sample

        return _mc_sample(self.model.epsilon, self.model.n_expectation_samples)

    def max_position(self, n: int, m: int) -> float:
        """Largest coordinate magnitude among the window's atom positions;
        sets the oscillation scale of P_{n,m}."""
        top = 0.0
        for U, N, _, _, _ in self._blocks(n, m):
            top = max(top, float(np.max(np.abs(U))), float(np.max(np.abs(N))))
            if self.include_theta:
                top_theta = float(np.max(np.abs(self.model.theta.points)))
                top = max(top, top_theta + float(np.max(np.abs(U))))
        return top

    @property
    def supports_derivative_certificate(self) -> bool:
        """Node-local gradient certificates need the bare modulation form
        (no base measure, no smoothing) and finite first two moments."""
        if self.include_theta or self.include_smoothing:
            return False
        if not self.model.delta.has_closed_char:
            return False
        return bool(
            np.all(np.isfinite(self.model.delta.mean_abs_coord()))
            and np.all(np.isfinite(self.model.delta.mean_sq_coord()))
        )

    def curvature_bound(self, n: int, m: int) -> float:
        """Upper bound on the Hessian operator norm of P_{n,m} (bare form).

        The omega side contributes |u_k|_2^2 per term exactly; the expected
        side E e^{i<delta + n_k, t>} contributes at most (s + |n_k|_2)^2 with
        s^2 = sum of the per-coordinate second moments of delta.
        """
        s_sq = float(np.sum(self.model.delta.mean_sq_coord()))
        s = math.sqrt(s_sq)
        total = 0.0
        for U, N, _, a, _ in self._blocks(n, m):
            u_norms_sq = np.sum(U * U, axis=1)
            n_norms = np.sqrt(np.sum(N * N, axis=1))
            total += float(a @ (u_norms_sq + (s + n_norms) ** 2))
        return total

    def cluster_scan(self, centers: np.ndarray, offsets: np.ndarray, n: int, m: int, want_derivative: bool):
        """|P_{n,m}| and optionally a gradient bound on centers[c] + offsets[o].

        Returns (flat points, |P| flat, g flat or None).  The gradient bound
        per axis is |A'_ax| + E|delta_ax| |B| + |phi| |B'_ax|, combined in l2;
        it requires the bare modulation form (no base measure or smoothing).
        """
        d = self.d
        C, O = centers.shape[0], offsets.shape[0]
        flat = (centers[:, None, :] + offsets[None, :, :]).reshape(-1, d)
        if self.include_theta or self.include_smoothing or not want_derivative:
            vals = np.empty(C * O)
            for lo in range(0, C, max(1, _POINT_CHUNK // max(O, 1))):
                hi = min(C, lo + max(1, _POINT_CHUNK // max(O, 1)))
                block = self.centered_clusters(centers[lo:hi], offsets, n, m)
                vals[lo * O : hi * O] = np.abs(block).ravel()
            return flat, vals, None
        A = np.zeros((C, O), dtype=complex)
        B = np.zeros((C, O), dtype=complex)
        A1 = [np.zeros((C, O), dtype=complex) for _ in range(d)]
        B1 = [np.zeros((C, O), dtype=complex) for _ in range(d)]
        for U, N, _, a, _ in self._blocks(n, m):
            Ec = np.exp(1j * (centers @ U.T))
            Eo = np.exp(1j * (offsets @ U.T))
            Nc = np.exp(1j * (centers @ N.T))
            No = np.exp(1j * (offsets @ N.T))
            A += Ec @ (Eo * a).T
            B += Nc @ (No * a).T
            for ax in range(d):
                A1[ax] += 1j * (Ec @ (Eo * (a * U[:, ax])).T)
                B1[ax] += 1j * (Nc @ (No * (a * N[:, ax])).T)
        pts = EvalPoints(t=flat)
        phi = self.expectation_factor(pts)
        P = A.ravel() - phi * B.ravel()
        e_abs = self.model.delta.mean_abs_coord()
        absB = np.abs(B.ravel())
        absphi = np.abs(phi)
        g_sq = np.zeros(C * O)
        for ax in range(d):
            g_ax = np.abs(A1[ax].ravel()) + e_abs[ax] * absB + absphi * np.abs(B1[ax].ravel())
            g_sq += g_ax * g_ax
        return flat, np.abs(P), np.sqrt(g_sq)

    def sum_sq_coefficients(self, n: int, m: int, weighted_by_mass: bool = False) -> float:
        """sum over the window of a_k^2, optionally times the squared mass."""
        total = 0.0
        for j in range(n + 1, m + 1):
            count = j**self.r - (j - 1) ** self.r
            total += count * self._a_value(j) ** 2
        if weighted_by_mass:
            total *= self.model.theta_mass**2
        return total


def _flatten_grid(axes) -> np.ndarray:
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def _build_axes(grid: GridSpec, h: float, symmetric: bool, d: int):
    axes = []
    for ax in range(d):
        if ax == 0 and symmetric:
            count = max(2, int(round(grid.T / h)) + 1)
            axes.append(np.linspace(0.0, grid.T, count))
        else:
            count = max(3, 2 * int(round(grid.T / h)) + 1)
            axes.append(np.linspace(-grid.T, grid.T, count))
    return axes


def _auto_spacing(grid: GridSpec, lip: float, oscillation: float, symmetric: bool, d: int) -> float:
    if grid.h is not None:
        h = grid.h
        if _axis_count(grid, h, symmetric, d) > grid.budget:
            suggested = _spacing_for_budget(grid, symmetric, d)
            raise SizeError(
                f"grid of spacing {h:g} exceeds the {grid.budget}-point budget",
                suggested_spacing=suggested,
            )
        return h
    if lip <= 0 or not math.isfinite(lip):
        return grid.T / 16.0
    # base spacing resolves the fastest oscillation; pruned refinement then
    # drives the slack down to lip * h / (2 * factor^levels)
    h = min(grid.T / 16.0, 1.0 / max(oscillation, 1e-300))
    h_budget = _spacing_for_budget(grid, symmetric, d)
    return max(h, h_budget)


def _axis_count(grid: GridSpec, h: float, symmetric: bool, d: int) -> int:
    total = 1
    for ax in range(d):
        if ax == 0 and symmetric:
            total *= max(2, int(round(grid.T / h)) + 1)
        else:
            total *= max(3, 2 * int(round(grid.T / h)) + 1)
    return total


def _spacing_for_budget(grid: GridSpec, symmetric: bool, d: int) -> float:
    per_axis = max(3.0, float(grid.budget) ** (1.0 / d))
    width = grid.T if (symmetric and d == 1) else 2.0 * grid.T
    return width / (per_axis - 1.0)


def certified_sup(
    evaluator: KernelEvaluator,
    windows: Sequence[tuple],
    grid: GridSpec,
) -> list[SupResult]:
    """Certified suprema of |P_{n,m}| over [-T, T]^d for several windows.

    The level-0 grid is shared; each window is then refined independently.
    A node's cell certificate is the node value plus either an exact-gradient
    Taylor slack (bare modulation form) or a global Lipschitz slack; a cell
    is pruned only when its certificate cannot exceed the best value seen,
    so the reported bound always dominates the true supremum.
    """
    d = evaluator.d
    if grid.d != d:
        raise ValueError("grid dimension disagrees with the model")
    if evaluator.is_degenerate:
        origin = np.zeros(d)
        return [
            SupResult(
                sup_value=0.0,
                argmax=origin,
                certified_bound=0.0,
                lipschitz_constant=0.0,
                points_evaluated=0,
            )
            for _ in windows
        ]
    lips = {w: evaluator.lipschitz(*w) for w in windows}
    lip_max = max(lips.values())
    osc = max(evaluator.max_position(*w) for w in windows)
    symmetric = evaluator.symmetric
    h0 = _auto_spacing(grid, lip_max, osc, symmetric, d)
    deriv = evaluator.supports_derivative_certificate
    curvatures = {w: evaluator.curvature_bound(*w) for w in windows} if deriv else {}
    sqrt_d = math.sqrt(d)
    use_dense = d == 1 and deriv and all(w[0] == 0 for w in windows)
    state = {}
    if use_dense:
        start = 0.0 if symmetric else -grid.T
        n_points = max(2, int(round((grid.T - start) / h0)) + 1)
        cuts = [m for _, m in windows]
        scan = evaluator.dense_prefix_scan_1d(
            cuts,
            start,
            grid.T,
            n_points,
            True,
            {m: curvatures[(0, m)] for _, m in windows},
            {m: lips[(0, m)] for _, m in windows},
        )
        for w in windows:
            r = scan[w[1]]
            state[w] = {
                "best": r["best"],
                "best_at": r["best_at"],
                "certified": r["certified"],
                "pts": r["active_pts"],
                "vals": r["active_vals"],
                "hw": r["h"] / 2.0,
                "n_eval": r["n_points"],
            }
    else:
        axes = _build_axes(grid, h0, symmetric, d)
        h_eff = max(float(ax[1] - ax[0]) for ax in axes)
        coords = _flatten_grid(axes)
        values = evaluator.centered_grid(axes, list(windows))
        for w, vals in zip(windows, values):
            absvals = np.abs(vals)
            best_idx = int(np.argmax(absvals))
            best = float(absvals[best_idx])
            certs = absvals + lips[w] * h_eff * sqrt_d / 2.0
            active = certs > best
            state[w] = {
                "best": best,
                "best_at": coords[best_idx].copy(),
                "certified": float(np.max(certs)),
                "pts": coords[active],
                "vals": absvals[active],
                "hw": h_eff / 2.0,
                "n_eval": coords.shape[0],
            }
    results = []
    for w in windows:
        st = state[w]
        best = st["best"]
        best_at = st["best_at"]
        certified = max(best, st["certified"])
        pts_cur, vals_cur = st["pts"], st["vals"]
        hw = st["hw"]
        n_eval = st["n_eval"]
        saturated = False
        for _ in range(grid.refinement_levels):
            if pts_cur.shape[0] == 0:
                certified = best
                break
            offsets_1d = np.linspace(-hw, hw, grid.refine_factor + 1)
            offsets = _flatten_grid([offsets_1d] * d)
            if pts_cur.shape[0] * offsets.shape[0] > 4 * grid.budget:
                saturated = True
                break
            hw_new = hw / grid.refine_factor
            flat, vals_new, g = evaluator.cluster_scan(pts_cur, offsets, w[0], w[1], deriv)
            n_eval += flat.shape[0]
            # offsets may step just outside the box; those evaluations still
            # certify nearby in-box cells but must not become the argmax
            in_box = np.all(np.abs(flat) <= grid.T + 1e-12, axis=1)
            if np.any(in_box):
                masked = np.where(in_box, vals_new, -1.0)
                idx = int(np.argmax(masked))
                if vals_new[idx] > best:
                    best = float(vals_new[idx])
                    best_at = flat[idx].copy()
            radius = hw_new * sqrt_d
            if g is not None:
                certs = vals_new + g * radius + 0.5 * curvatures[w] * radius * radius
            else:
                certs = vals_new + lips[w] * radius
            certified = max(best, float(np.max(certs)))
            active = certs > best
            pts_cur = flat[active]
            vals_cur = vals_new[active]
            hw = hw_new
        results.append(
            SupResult(
                sup_value=best,
                argmax=best_at,
                certified_bound=max(best, certified),
                lipschitz_constant=lips[w],
                points_evaluated=n_eval,
                refinement_saturated=saturated,
            )
        )
    return results


def partial_sum_transform(model: TransitionMeasureModel, omega_seed: int, n: int, m: int, t):
    """P_{n,m}(t) = sum over n < |k| <= m of a_k (nu_k_hat(t) - E nu_k_hat(t))."""
    if not (m > n >= 0):
        raise ValueError("window requires m > n >= 0")
    ev = KernelEvaluator(model, omega_seed)
    pts_arr, single = _as_point_array(t, model.d)
    vals = ev.centered_points(EvalPoints(t=pts_arr), n, m)
    return complex(vals[0]) if single else vals


def partial_sum_reference(model: TransitionMeasureModel, omega_seed: int, n: int, m: int, t):
    """Straightforward reference evaluator: realize each measure, transform,
    subtract the expected transform, sum.  Slow; used to validate the engine."""
    if not (m > n >= 0):
        raise ValueError("window requires m > n >= 0")
    pts_arr, single = _as_point_array(t, model.d)
    out = np.zeros(pts_arr.shape[0], dtype=complex)
    for j in range(n + 1, m + 1):
        for k in _shell_indices(j, model.r):
            a_k = model.a_value(j)
            measure = realize_measure(model, omega_seed, k)
            smoothing = (model.epsilon_at(omega_seed, k), model.kernel) if model.has_smoothing else None
            for row in range(pts_arr.shape[0]):
                tv = pts_arr[row]
                val = fourier_stieltjes(measure, tv, smoothing=smoothing)
                exp_val = expected_transform(model, k, tv)
                out[row] += a_k * (val - exp_val)
    return complex(out[0]) if single else out


def sup_on_grid(model: TransitionMeasureModel, omega_seed: int, n: int, m: int, grid: GridSpec) -> SupResult:
    """Certified supremum of |P_{n,m}| over [-T, T]^d."""
    if not (m > n >= 0):
        raise ValueError("window requires m > n >= 0")
    ev = KernelEvaluator(model, omega_seed)
    return certified_sup(ev, [(n, m)], grid)[0]


def ratio_statistic(
    model: TransitionMeasureModel,
    omega_seed: int,
    pairs: Sequence[tuple],
    Ts: Sequence[float],
    phi: Callable,
    grid: Optional[GridSpec] = None,
    mode: str = "probability",
) -> RatioStatistic:
    """Largest quotient sup_T |P_{n,m}|^2 / denominator over the supplied grid.

    In ``probability`` mode the denominator is (sum a_k^2) log(max(phi(m), T));
    in ``general`` mode it is 1 + (sum a_k^2 mass^2) log(max(phi(m), T)).
    """
    pairs = list(pairs)
    if not pairs:
        raise ValueError("at least one (n, m) pair is required")
    if any(not (m > n >= 0) for n, m in pairs):
        raise ValueError("every pair must satisfy m > n >= 0")
    if any(T < 2 for T in Ts):
        raise ValueError("box sizes T must be >= 2")
    if mode not in ("probability", "general"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "probability" and not model.is_probability:
        raise ConfigurationError("probability mode requires a probability model")
    ev = KernelEvaluator(model, omega_seed)
    base = grid or GridSpec(T=2.0, d=model.d)
    best = None
    rows = []
    for T in Ts:
        gspec = GridSpec(
            T=float(T),
            h=base.h,
            d=model.d,
            refinement_levels=base.refinement_levels,
            refine_factor=base.refine_factor,
            budget=base.budget,
        )
        sups = certified_sup(ev, pairs, gspec)
        for (n, m), sup in zip(pairs, sups):
            s2 = ev.sum_sq_coefficients(n, m, weighted_by_mass=(mode == "general"))
            log_term = math.log(max(float(phi(m)), float(T)))
            denom = (1.0 + s2 * log_term) if mode == "general" else s2 * log_term
            ratio = sup.sup_value**2 / denom
            rows.append(
                {
                    "n": n,
                    "m": m,
                    "T": float(T),
                    "sup": sup.sup_value,
                    "certified": sup.certified_bound,
                    "ratio": ratio,
                }
            )
            if best is None or ratio > best[0]:
                best = (ratio, {"n": n, "m": m, "T": float(T), "t_star": sup.argmax.tolist()})
    return RatioStatistic(value=best[0], witness=best[1], rows=tuple(rows))


def decay_profile(
    model: TransitionMeasureModel,
    omega_seed: int,
    ns: Sequence[int],
    beta: Optional[float] = None,
    r: Optional[int] = None,
    t_max: float = 8.0,
    grid: Optional[GridSpec] = None,
) -> list[dict]:
    """Certified sup of |D_n|^2 over |t| <= min(2^(n^(r beta)), t_max) per n.

    D_n = P_{0,n} / n^r for probability models.  The box cap is recorded in
    each row (``capped``).
    """
    if not model.is_probability:
        raise ConfigurationError("decay profile requires a probability model")
    beta = model.subsequence.beta if beta is None else beta
    r = model.subsequence.r if r is None else r
    ev = KernelEvaluator(model, omega_seed)
    base = grid or GridSpec(T=2.0, d=model.d)
    by_T: dict[float, list[int]] = {}
    capped: dict[int, bool] = {}
    for n in ns:
        expo = float(n) ** (r * beta)
        T_nat = 2.0**expo if expo < 512 else float("inf")
        T = min(T_nat, t_max)
        capped[n] = T_nat > t_max
        by_T.setdefault(T, []).append(n)
    rows = []
    for T, group in sorted(by_T.items()):
        gspec = GridSpec(
            T=T,
            h=base.h,
            d=model.d,
            refinement_levels=base.refinement_levels,
            refine_factor=base.refine_factor,
            budget=base.budget,
        )
        windows = [(0, n) for n in sorted(group)]
        sups = certified_sup(ev, windows, gspec)
        for (_, n), sup in zip(windows, sups):
            b_n = float(n) ** r
            rows.append(
                {
                    "n": n,
                    "T": T,
                    "capped": capped[n],
                    "sup_sq": (sup.sup_value / b_n) ** 2,
                    "certified_sq": (sup.certified_bound / b_n) ** 2,
                }
            )
    rows.sort(key=lambda row: row["n"])
    return rows
