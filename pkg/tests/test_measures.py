import math

import numpy as np
import pytest

from ergolab.errors import ConfigurationError
from ergolab.measures import (
    AtomicMeasure,
    SmoothingKernel,
    TransitionMeasureModel,
    expected_transform,
    expected_transform_info,
    fourier_stieltjes,
    realize_measure,
    truncated_transform,
    variation_mass,
)
from ergolab.perturbations import PerturbationSpec, SubsequenceSpec


def model_of(delta, subsequence=None, **kw):
    return TransitionMeasureModel(
        delta=delta,
        subsequence=subsequence or SubsequenceSpec("linear", beta=0.5),
        **kw,
    )


def test_variation_mass_trivial_cases():
    prob = AtomicMeasure.from_atoms([((0.0,), 0.25), ((1.0,), 0.75)])
    assert variation_mass(prob) == pytest.approx(1.0)
    assert prob.is_probability
    signed = AtomicMeasure.from_atoms([((0.0,), 1.0), ((1.0,), -1.0)])
    assert variation_mass(signed) == pytest.approx(2.0)
    assert not signed.is_probability
    cplx = AtomicMeasure.from_atoms([((0.0,), 1j), ((1.0,), 3.0)])
    assert variation_mass(cplx) == pytest.approx(4.0)


def test_fourier_stieltjes_dirac_modulus_one():
    m = AtomicMeasure.dirac((0.7,))
    for t in (0.0, 1.0, -3.3):
        v = fourier_stieltjes(m, np.array([t]))
        assert v == pytest.approx(np.exp(1j * t * 0.7))
        assert abs(v) == pytest.approx(1.0)


def test_fourier_stieltjes_total_mass_at_zero():
    m = AtomicMeasure.from_atoms([((0.0,), 0.5), ((2.5,), 0.5)])
    assert fourier_stieltjes(m, np.array([0.0])) == pytest.approx(1.0)


def test_box_smoothing_zero_at_pi():
    m = AtomicMeasure.dirac((0.0,))
    kern = SmoothingKernel("box")
    v = fourier_stieltjes(m, np.array([math.pi]), smoothing=(np.array([1.0]), kern))
    assert abs(v) < 1e-15


def test_transform_bounded_by_mass_random_sweep():
    rng = np.random.default_rng(7)
    for _ in range(50):
        n = rng.integers(1, 6)
        d = int(rng.integers(1, 3))
        m = AtomicMeasure(
            points=rng.normal(size=(n, d)) * 3,
            weights=rng.normal(size=n) + 1j * rng.normal(size=n),
        )
        t = rng.normal(size=(20, d)) * 5
        vals = fourier_stieltjes(m, t)
        assert np.all(np.abs(vals) <= m.mass + 1e-12)


def test_conjugate_symmetry_for_real_measures():
    rng = np.random.default_rng(8)
    m = AtomicMeasure(points=rng.normal(size=(4, 1)), weights=rng.normal(size=4).astype(complex))
    t = rng.normal(size=(10, 1))
    assert np.allclose(fourier_stieltjes(m, -t), np.conj(fourier_stieltjes(m, t)))


def test_truncated_transform_cases():
    m = AtomicMeasure.from_atoms([((0.0,), 0.5), ((4.0,), 0.5)])
    t = np.array([0.0])
    # all atoms inside
    assert truncated_transform(m, t, L=10.0) == pytest.approx(fourier_stieltjes(m, t))
    # mass inside only
    assert truncated_transform(m, t, L=2.0) == pytest.approx(0.5)
    # all atoms outside
    shifted = m.shift((5.0,))
    assert truncated_transform(shifted, t, L=2.0) == 0.0
    with pytest.raises(ValueError):
        truncated_transform(m, t, L=0.0)


def test_truncated_converges_to_full():
    rng = np.random.default_rng(3)
    m = AtomicMeasure(points=rng.normal(size=(6, 2)), weights=rng.normal(size=6).astype(complex))
    t = rng.normal(size=(5, 2))
    L = float(np.max(np.abs(m.points))) + 0.1
    assert np.allclose(truncated_transform(m, t, L), fourier_stieltjes(m, t))


def test_realize_measure_shifts_base_atoms():
    model = model_of(PerturbationSpec("constant", params={"c": 0.5}))
    got = realize_measure(model, omega_seed=1, k=(3,))
    assert got.points == pytest.approx(np.array([[3.5]]))
    assert got.weights == pytest.approx(np.array([1.0 + 0j]))

    theta = AtomicMeasure.from_atoms([((0.0,), 0.5), ((1.0,), 0.5)])
    model2 = model_of(PerturbationSpec("constant", params={"c": 0.25}), theta=theta)
    got2 = realize_measure(model2, omega_seed=1, k=(2,))
    assert got2.points == pytest.approx(np.array([[2.25], [3.25]]))
    assert np.array_equal(got2.weights, theta.weights)


def test_realize_measure_uniform_support():
    model = model_of(PerturbationSpec("uniform", params={"a": 1.0}))
    for k in (1, 4, 9):
        got = realize_measure(model, omega_seed=5, k=(k,))
        assert k < got.points[0, 0] <= k + 1


def test_expected_transform_constant_is_modulation():
    model = model_of(PerturbationSpec("constant", params={"c": 0.3}))
    t = np.array([1.1])
    v = expected_transform(model, (2,), t)
    assert v == pytest.approx(np.exp(1j * 1.1 * 2.3))


def test_expected_transform_uniform_full_period_vanishes():
    model = model_of(PerturbationSpec("uniform", params={"a": 1.0}))
    v = expected_transform(model, (1,), np.array([2 * math.pi]))
    # modulation has modulus 1; the delta factor is exactly 0
    assert abs(v) < 1e-12


def test_expected_transform_monte_carlo_vs_closed_form():
    # exponential(1) at t = 1 has closed form 1 / (1 - i); forcing the Monte
    # Carlo path must agree within 3 standard errors
    model = model_of(PerturbationSpec("exponential", params={"rate": 1.0}), subsequence=SubsequenceSpec("linear", beta=0.5))
    t = np.array([1.0])
    closed = expected_transform(model, (1,), t, method="closed_form")
    assert closed == pytest.approx(np.exp(1j * 1.0) * (1.0 / (1.0 - 1j)))
    mc, err, used = expected_transform_info(model, (1,), t, method="monte_carlo")
    assert used == "monte_carlo"
    assert err > 0
    assert abs(mc - closed) <= 3.0 * err


def test_expected_transform_mc_uniform_agrees():
    model = model_of(PerturbationSpec("uniform", params={"a": 1.0}))
    t = np.array([2.7])
    closed = expected_transform(model, (3,), t, method="closed_form")
    mc, err, _ = expected_transform_info(model, (3,), t, method="monte_carlo")
    assert abs(mc - closed) <= 3.0 * err


def test_expected_transform_requires_enough_samples():
    model = TransitionMeasureModel(
        delta=PerturbationSpec("pareto", params={"tail_index": 3.0, "scale": 1.0}),
        subsequence=SubsequenceSpec("linear", beta=0.5),
        n_expectation_samples=100,
    )
    with pytest.raises(ConfigurationError):
        expected_transform(model, (1,), np.array([1.0]))


def test_smoothing_kernel_transforms():
    box = SmoothingKernel("box")
    assert box.transform1d(0.0) == pytest.approx(1.0)
    assert abs(box.transform1d(math.pi)) < 1e-15
    tri = SmoothingKernel("triangle")
    xs = np.linspace(-20, 20, 101)
    assert np.allclose(tri.transform1d(xs), np.sinc(xs / (2 * math.pi)) ** 2)
    assert np.all(np.abs(box.transform1d(xs)) <= 1.0 + 1e-12)


def test_gaussian_truncated_transform_against_quadrature():
    kern = SmoothingKernel("gaussian_truncated", halfwidth=3.0)
    u = np.linspace(-3.0, 3.0, 40001)
    dens = np.exp(-u * u / 2.0)
    dens /= np.trapezoid(dens, u)
    for x in (0.0, 0.5, 2.0, 7.5, 30.0):
        quad = np.trapezoid(dens * np.exp(1j * x * u), u)
        assert kern.transform1d(np.array([x]))[0] == pytest.approx(quad.real, abs=1e-7)
    # stays finite and tiny far out instead of overflowing
    far = kern.transform1d(np.array([500.0]))[0]
    assert np.isfinite(far) and abs(far) < 1e-3


def test_kernel_decay_certificates():
    assert SmoothingKernel("box").decay_certificate() == pytest.approx(1.0)
    assert SmoothingKernel("triangle").decay_certificate() == pytest.approx(4.0)
    g = SmoothingKernel("gaussian_truncated").decay_certificate()
    assert np.isfinite(g) and g > 0
    assert SmoothingKernel("box").decay_certificate(d=2) == pytest.approx(1.0)


def test_kernel_mean_abs():
    assert SmoothingKernel("box").mean_abs1d() == pytest.approx(0.5)
    assert SmoothingKernel("triangle").mean_abs1d() == pytest.approx(1.0 / 3.0)
    # numeric value for the truncated gaussian: 2(1 - e^{-a^2/2}) / (sqrt(2 pi) erf(a/sqrt2))
    a = 3.0
    expect = 2.0 * (1.0 - math.exp(-a * a / 2)) / (math.sqrt(2 * math.pi) * math.erf(a / math.sqrt(2)))
    assert SmoothingKernel("gaussian_truncated", halfwidth=a).mean_abs1d() == pytest.approx(expect)


def test_atomic_measure_json_round_trip():
    m = AtomicMeasure.from_atoms([((0.0, 1.0), 0.5 + 0.25j), ((2.0, -1.0), -0.5)])
    again = AtomicMeasure.from_json(m.to_json())
    assert np.array_equal(again.points, m.points)
    assert np.array_equal(again.weights, m.weights)


def test_model_config_round_trip():
    model = TransitionMeasureModel(
        delta=PerturbationSpec("uniform", params={"a": 1.0}),
        subsequence=SubsequenceSpec("lacunary_exponential", beta=0.5),
        epsilon=PerturbationSpec("uniform", params={"a": 1.0}),
        kernel=SmoothingKernel("box"),
        theta=AtomicMeasure.from_atoms([((0.0,), 1.0)]),
        a_rule="inverse_power",
    )
    again = TransitionMeasureModel.from_config(model.to_config())
    assert again.a_rule == "inverse_power"
    assert again.has_smoothing
    assert np.array_equal(again.delta_at(3, (2,)), model.delta_at(3, (2,)))
    assert np.array_equal(again.epsilon_at(3, (2,)), model.epsilon_at(3, (2,)))


def test_model_validation_errors():
    delta = PerturbationSpec("uniform", params={"a": 1.0})
    sub = SubsequenceSpec("linear", beta=0.5)
    with pytest.raises(ConfigurationError):
        TransitionMeasureModel(delta=delta, subsequence=sub, epsilon=PerturbationSpec("uniform"))
    with pytest.raises(ConfigurationError):
        TransitionMeasureModel(delta=delta, subsequence=SubsequenceSpec("linear", beta=0.5, d=2))
    with pytest.raises(ConfigurationError):
        TransitionMeasureModel(delta=delta, subsequence=sub, a_rule="sqrt")


def test_per_index_streams_are_order_independent():
    model = model_of(PerturbationSpec("uniform", params={"a": 1.0}))
    first = model.delta_at(42, (5,))
    _ = [model.delta_at(42, (k,)) for k in range(1, 20)]
    assert np.array_equal(model.delta_at(42, (5,)), first)
