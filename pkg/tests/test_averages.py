import math

import numpy as np
import pytest

from ergolab.averages import (
    AverageFamily,
    apply_average,
    exponential_indices,
    kernel_value,
    kernel_values,
    moricz_check,
    series_increment_norm,
    series_partial_sum,
    square_function,
)
from ergolab.errors import ConfigurationError
from ergolab.kernels import EvalPoints
from ergolab.measures import SmoothingKernel, TransitionMeasureModel
from ergolab.perturbations import PerturbationSpec, SubsequenceSpec
from ergolab.torus import SpectralMeasure, TorusObservable, evaluate, spectral_measure


def g_model(beta=0.5, family="lacunary_exponential"):
    return TransitionMeasureModel(
        delta=PerturbationSpec("uniform", params={"a": 1.0}),
        subsequence=SubsequenceSpec(family, beta=beta),
    )


def f_model(beta=0.5):
    return TransitionMeasureModel(
        delta=PerturbationSpec("uniform", params={"a": 1.0}),
        subsequence=SubsequenceSpec("lacunary_exponential", beta=beta),
        epsilon=PerturbationSpec("uniform", params={"a": 1.0}),
        kernel=SmoothingKernel("box"),
    )


def nonnegative_observable(seed, n_terms=3):
    """|h|^2 for a random trig polynomial h: nonnegative with exact coeffs."""
    h = TorusObservable.random(1, n_terms, seed=seed, real=False, normalize=False)
    terms = []
    for m1, c1 in zip(h.freqs[:, 0], h.coeffs):
        for m2, c2 in zip(h.freqs[:, 0], h.coeffs):
            terms.append((int(m1 - m2), c1 * np.conj(c2)))
    return TorusObservable.from_terms(1, terms)


def test_g_kernel_single_term_modulation():
    model = TransitionMeasureModel(
        delta=PerturbationSpec("constant", params={"c": 0.5}),
        subsequence=SubsequenceSpec("linear", beta=0.5),
    )
    t = 2.0
    assert kernel_value("G", model, 0, 1, np.array([t])) == pytest.approx(np.exp(1j * t * 1.5))


def test_centered_kernel_vanishes_for_deterministic_delta():
    model = TransitionMeasureModel(
        delta=PerturbationSpec("constant", params={"c": 0.5}),
        subsequence=SubsequenceSpec("linear", beta=0.5),
    )
    ts = np.linspace(-4, 4, 9).reshape(-1, 1)
    vals = kernel_value("D", model, 3, 6, ts)
    assert np.max(np.abs(vals)) < 1e-13


def test_centered_equals_full_minus_expected():
    model = g_model()
    ts = np.linspace(-2, 2, 7).reshape(-1, 1)
    kk = kernel_value("K", model, 5, 8, ts)
    ke = kernel_value("E", model, 5, 8, ts)
    kd = kernel_value("D", model, 5, 8, ts)
    assert np.allclose(kd, kk - ke)


def test_probability_kernel_bounded_by_one():
    model = g_model()
    ts = np.linspace(-30, 30, 101).reshape(-1, 1)
    for fam in ("K", "G", "H"):
        vals = kernel_value(fam, model, 2, 16, ts)
        assert np.all(np.abs(vals) <= 1.0 + 1e-12), fam


def test_smoothed_family_requires_smoothing():
    with pytest.raises(ConfigurationError):
        kernel_value("F", g_model(), 1, 4, np.array([1.0]))


def test_smoothed_kernel_against_window_quadrature():
    # one smoothed term is (1/(2 eps)) integral over |s| < eps of
    # e^{i (n + delta + s) t} ds; Simpson quadrature to 1e-8
    model = f_model()
    seed, t = 3, 1.3
    vals = kernel_values("F", model, seed, [4], EvalPoints(t=np.array([[t]])))[0]
    total = 0.0 + 0.0j
    for k in range(1, 5):
        shift = model.n_at((k,))[0] + model.delta_at(seed, (k,))[0]
        eps = model.epsilon_at(seed, (k,))[0]
        s = np.linspace(-eps, eps, 20001)
        total += np.trapezoid(np.exp(1j * (shift + s) * t), s) / (2 * eps)
    assert abs(vals[0] - total / 4) < 1e-8


def test_apply_average_preserves_constants():
    model = g_model()
    const = TorusObservable.constant(2.5)
    for fam in ("K", "G", "H"):
        out = apply_average(fam, model, 7, 8, const)
        assert np.allclose(out.coeffs, const.coeffs), fam


def test_shift_family_single_term_is_translation():
    model = g_model()
    f = TorusObservable.random(1, 4, seed=5)
    out = apply_average("H", model, 11, 1, f)
    delta = model.delta_at(11, (1,))
    xs = np.linspace(0, 1, 16, endpoint=False).reshape(-1, 1)
    assert np.allclose(evaluate(out, xs), evaluate(f, xs, shift=delta), atol=1e-12)


def test_apply_average_matches_time_domain():
    model = g_model()
    f = TorusObservable.random(1, 4, seed=3)
    out = apply_average("G", model, 9, 8, f)
    xs = np.linspace(0, 1, 16, endpoint=False).reshape(-1, 1)
    direct = np.zeros(16, dtype=complex)
    for k in range(1, 9):
        shift = model.n_at((k,)) + model.delta_at(9, (k,))
        direct += evaluate(f, xs, shift=shift)
    direct /= 8
    assert np.max(np.abs(evaluate(out, xs) - direct)) < 1e-8


def test_centered_average_l2_contraction():
    # ||D_n f||_2 <= 2 ||f||_2 for probability families
    model = g_model()
    f = TorusObservable.random(1, 6, seed=13)
    mu = spectral_measure(f)
    vals = kernel_values("D", model, 3, [8], EvalPoints(t=mu.locations, cycles=mu.cycles))[0]
    norm_sq = float(np.sum(mu.masses * np.abs(vals) ** 2))
    assert norm_sq <= 4.0 * f.norm_sq + 1e-12


def test_exponential_indices_deduplicate():
    assert exponential_indices(2.0, 4) == [2, 4, 8, 16]
    idx = exponential_indices(1.2, 10)
    assert idx == sorted(set(idx))
    assert all(v >= 1 for v in idx)
    with pytest.raises(ValueError):
        exponential_indices(1.0, 4)


def test_square_function_zero_for_deterministic():
    model = TransitionMeasureModel(
        delta=PerturbationSpec("constant", params={"c": 0.5}),
        subsequence=SubsequenceSpec("linear", beta=0.5),
    )
    f = TorusObservable.random(1, 3, seed=2)
    res = square_function(model, 1, f, rho=2.0, N=5)
    assert res.value < 1e-20
    assert res.moment >= 1.0


def test_square_function_single_atom_reduction():
    model = g_model()
    mu = SpectralMeasure.from_cycles(np.array([[3.0]]), np.array([1.0]))
    res = square_function(model, 6, mu, rho=2.0, N=4)
    vals = kernel_values("D", model, 6, res.indices, EvalPoints(t=mu.locations, cycles=mu.cycles))
    expect = float(np.sum(np.abs(vals) ** 2))
    assert res.value == pytest.approx(expect, rel=1e-12)
    assert res.ratio == pytest.approx(res.value / res.moment)


def test_square_function_additive_over_atoms():
    model = g_model()
    mu_a = SpectralMeasure.from_cycles(np.array([[1.0]]), np.array([0.5]))
    mu_b = SpectralMeasure.from_cycles(np.array([[7.0]]), np.array([0.25]))
    mu_ab = SpectralMeasure.from_cycles(np.array([[1.0], [7.0]]), np.array([0.5, 0.25]))
    va = square_function(model, 4, mu_a, 1.5, 6).value
    vb = square_function(model, 4, mu_b, 1.5, 6).value
    vab = square_function(model, 4, mu_ab, 1.5, 6).value
    assert vab == pytest.approx(va + vb, rel=1e-12)


def test_square_function_monotone_in_truncation():
    model = g_model()
    f = TorusObservable.random(1, 4, seed=19)
    v1 = square_function(model, 8, f, 2.0, 3).value
    v2 = square_function(model, 8, f, 2.0, 6).value
    assert v2 >= v1 - 1e-15


def test_square_function_logpsi_moment_option():
    model = g_model()
    f = TorusObservable.random(1, 4, seed=23)
    psi = lambda y: np.log2(np.maximum(y, 1.0)) ** 2
    res = square_function(model, 2, f, 2.0, 4, moment="logpsi", psi=psi)
    assert res.moment >= 1.0
    with pytest.raises(ValueError):
        square_function(model, 2, f, 2.0, 4, moment="logpsi")


def test_sandwich_property_time_domain():
    # for nonnegative f and probability weights, intermediate averages are
    # pinched between scaled dyadic ones
    model = g_model()
    f = nonnegative_observable(seed=4)
    xs = np.linspace(0, 1, 24, endpoint=False).reshape(-1, 1)
    seed = 17

    def time_avg(n):
        acc = np.zeros(len(xs), dtype=complex)
        for k in range(1, n + 1):
            shift = model.n_at((k,)) + model.delta_at(seed, (k,))
            acc += evaluate(f, xs, shift=shift)
        return (acc / n).real

    rho = 2.0
    for npow in (2, 3):
        a, b = int(rho**npow), int(rho ** (npow + 1))
        ka, kb = time_avg(a), time_avg(b)
        for m in (a, (a + b) // 2, b - 1):
            km = time_avg(m)
            lower = (a / b) * ka
            upper = (b / a) * kb
            assert np.all(km >= lower - 1e-10)
            assert np.all(km <= upper + 1e-10)


def test_series_zero_for_deterministic_model():
    model = TransitionMeasureModel(
        delta=PerturbationSpec("constant", params={"c": 0.5}),
        subsequence=SubsequenceSpec("linear", beta=0.5),
        epsilon=PerturbationSpec("constant", params={"c": 0.25}),
        kernel=SmoothingKernel("box"),
    )
    f = TorusObservable.random(1, 4, seed=1)
    state = series_partial_sum(model, 3, f, 8)
    assert np.max(np.abs(state.sample_values)) < 1e-12


def test_series_single_term_matches_centered_kernel():
    # S_1 multiplier equals the centered single smoothed term at each atom
    from ergolab.kernels import KernelEvaluator

    model = f_model()
    f = TorusObservable.random(1, 4, seed=31)
    state = series_partial_sum(model, 5, f, 1)
    mu = spectral_measure(f)
    pts = EvalPoints(t=mu.locations, cycles=mu.cycles)
    ev = KernelEvaluator(model, 5, include_theta=False, include_smoothing=True, a_rule="inverse_power")
    centered = ev.centered_points(pts, 0, 1)
    got = {tuple(mk): c for mk, c in zip(state.observable.freqs.tolist(), state.observable.coeffs)}
    for mk, c, cent in zip(f.freqs.tolist(), f.coeffs, centered):
        assert got[tuple(mk)] == pytest.approx(c * cent, rel=1e-12)


def test_series_requires_smoothing():
    with pytest.raises(ConfigurationError):
        series_partial_sum(g_model(), 1, TorusObservable.constant(1.0), 4)


def test_series_increment_norm_matches_state_difference():
    model = f_model()
    f = TorusObservable.random(1, 4, seed=41)
    s8 = series_partial_sum(model, 9, f, 8)
    s16 = series_partial_sum(model, 9, f, 16)
    diff_sq = 0.0
    c8 = {tuple(m): c for m, c in zip(s8.observable.freqs.tolist(), s8.observable.coeffs)}
    for m, c in zip(s16.observable.freqs.tolist(), s16.observable.coeffs):
        diff_sq += abs(c - c8[tuple(m)]) ** 2
    inc = series_increment_norm(model, 9, f, 8, 16)
    assert inc == pytest.approx(math.sqrt(diff_sq), rel=1e-10)


def test_series_cauchy_decay_median():
    model = f_model()
    f = TorusObservable.random(1, 5, seed=7)
    meds = []
    for m in (8, 16, 32, 64):
        norms = [series_increment_norm(model, seed, f, m, 2 * m) for seed in range(30)]
        meds.append(float(np.median(norms)))
    assert meds[-1] < meds[0]


def test_moricz_zero_terms():
    report = moricz_check([(1, 4, 0.0), (2, 8, 0.0)], alpha=[1.0] * 8, A=[1.0] * 8, gamma=1.0)
    assert report.holds
    assert report.max_ratio == 0.0


def test_moricz_orthogonal_equality():
    # orthogonal G_k with ||G_k||^2 = alpha_k and A = 1 meet the bound with
    # equality
    alpha = [0.5, 0.25, 0.125, 0.0625]
    norms = []
    for n in range(0, 3):
        for m in range(n + 1, 5):
            norms.append((n, m, math.sqrt(sum(alpha[n:m]))))
    report = moricz_check(norms, alpha=alpha, A=[1.0] * 4, gamma=0.5)
    assert report.holds
    assert report.max_ratio == pytest.approx(1.0)


def test_moricz_violation_reported():
    report = moricz_check([(0, 2, 10.0)], alpha=[1.0, 1.0], A=[1.0, 1.0], gamma=1.0)
    assert not report.holds
    assert report.violations[0][:2] == (0, 2)
    assert report.worst_pair == (0, 2)


def test_moricz_validates_inputs():
    with pytest.raises(ValueError):
        moricz_check([(0, 2, 1.0)], alpha=[1.0, 1.0], A=[2.0, 1.0], gamma=1.0)
    with pytest.raises(ValueError):
        moricz_check([(0, 3, 1.0)], alpha=[1.0, 1.0], A=[1.0, 1.0], gamma=1.0)


def test_average_family_validation():
    with pytest.raises(ValueError):
        AverageFamily("Z")
    fam = AverageFamily("D")
    assert fam.component == "centered"
    assert fam.normalization(g_model(), 4) == pytest.approx(4.0)
