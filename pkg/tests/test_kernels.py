import math

import numpy as np
import pytest

from ergolab.errors import ConfigurationError, SizeError
from ergolab.kernels import (
    EvalPoints,
    GridSpec,
    KernelEvaluator,
    decay_profile,
    partial_sum_reference,
    partial_sum_transform,
    ratio_statistic,
    sup_on_grid,
)
from ergolab.measures import AtomicMeasure, SmoothingKernel, TransitionMeasureModel
from ergolab.perturbations import GrowthFunction, PerturbationSpec, SubsequenceSpec


def uniform_model(beta=0.5, family="lacunary_exponential", **kw):
    return TransitionMeasureModel(
        delta=PerturbationSpec("uniform", params={"a": 1.0}),
        subsequence=SubsequenceSpec(family, beta=beta, **{k: v for k, v in kw.items() if k in ("r", "d", "p")}),
        **{k: v for k, v in kw.items() if k not in ("r", "d", "p")},
    )


def test_deterministic_model_gives_zero_sum():
    model = TransitionMeasureModel(
        delta=PerturbationSpec("constant", params={"c": 0.5}),
        subsequence=SubsequenceSpec("linear", beta=0.5),
    )
    ts = np.linspace(-3, 3, 11).reshape(-1, 1)
    vals = partial_sum_transform(model, 3, 0, 8, ts)
    assert np.max(np.abs(vals)) < 1e-12


def test_single_index_dirac_vanishes_at_zero():
    model = uniform_model(family="linear")
    v = partial_sum_transform(model, 1, 0, 1, np.array([0.0]))
    assert abs(v) < 1e-14


def test_engine_matches_naive_reference_fixed_seeds():
    model = uniform_model(family="linear")
    ts = np.array([[0.0], [0.3], [-1.7], [4.0]])
    for seed in range(10):
        engine = partial_sum_transform(model, seed, 0, 64, ts)
        naive = partial_sum_reference(model, seed, 0, 64, ts)
        assert np.max(np.abs(engine - naive)) < 1e-10


def test_engine_matches_reference_higher_rank_and_dim():
    model = TransitionMeasureModel(
        delta=PerturbationSpec("uniform", d=2, params={"a": 1.0}),
        subsequence=SubsequenceSpec("linear", beta=0.5, r=2, d=2),
    )
    ts = np.array([[0.2, -0.4], [1.0, 2.0]])
    engine = partial_sum_transform(model, 9, 1, 6, ts)
    naive = partial_sum_reference(model, 9, 1, 6, ts)
    assert np.max(np.abs(engine - naive)) < 1e-10


def test_engine_matches_reference_with_smoothing_and_theta():
    model = TransitionMeasureModel(
        delta=PerturbationSpec("uniform", params={"a": 1.0}),
        subsequence=SubsequenceSpec("lacunary_exponential", beta=0.5),
        epsilon=PerturbationSpec("uniform", params={"a": 1.0}),
        kernel=SmoothingKernel("box"),
        theta=AtomicMeasure.from_atoms([((0.0,), 0.5), ((0.5,), 0.5)]),
        a_rule="inverse_power",
    )
    ts = np.array([[0.9], [-2.2]])
    engine = partial_sum_transform(model, 4, 2, 10, ts)
    naive = partial_sum_reference(model, 4, 2, 10, ts)
    assert np.max(np.abs(engine - naive)) < 1e-10


def test_window_requires_m_greater_than_n():
    model = uniform_model()
    with pytest.raises(ValueError):
        partial_sum_transform(model, 1, 4, 4, np.array([0.0]))


def test_conjugate_symmetry_of_partial_sums():
    model = uniform_model()
    ts = np.linspace(0.1, 5.0, 20).reshape(-1, 1)
    plus = partial_sum_transform(model, 8, 0, 12, ts)
    minus = partial_sum_transform(model, 8, 0, 12, -ts)
    assert np.allclose(np.abs(plus), np.abs(minus))


def test_sup_zero_for_deterministic_model():
    model = TransitionMeasureModel(
        delta=PerturbationSpec("constant", params={"c": 0.5}),
        subsequence=SubsequenceSpec("linear", beta=0.5),
    )
    res = sup_on_grid(model, 1, 0, 8, GridSpec(T=2.0))
    assert res.sup_value == 0.0
    assert res.certified_bound == 0.0


def test_sup_finds_interior_maximum():
    model = uniform_model()
    res = sup_on_grid(model, 2, 0, 16, GridSpec(T=4.0))
    # P(0) = 0 always, so a nonzero sup proves the search looked inside
    assert abs(partial_sum_transform(model, 2, 0, 16, np.array([0.0]))) < 1e-12
    assert res.sup_value > 0.5
    assert res.sup_value <= res.certified_bound


def test_certified_bound_dominates_dense_grid():
    rng = np.random.default_rng(17)
    model = uniform_model()
    for seed in rng.integers(0, 10_000, size=5):
        res = sup_on_grid(model, int(seed), 0, 12, GridSpec(T=3.0))
        ts = np.linspace(-3, 3, 120_001).reshape(-1, 1)
        dense = float(np.max(np.abs(partial_sum_transform(model, int(seed), 0, 12, ts))))
        assert dense <= res.certified_bound + 1e-12
        assert res.sup_value <= res.certified_bound
        assert res.sup_value >= dense - 0.01 * max(dense, 1.0)


def test_certified_bound_dominates_with_user_grid():
    # explicit coarse spacing: certificate must still dominate a 10x
    # finer grid maximum
    model = uniform_model()
    res = sup_on_grid(model, 5, 0, 8, GridSpec(T=2.0, h=0.05, refinement_levels=0))
    fine = np.linspace(-2, 2, 8001).reshape(-1, 1)
    dense = float(np.max(np.abs(partial_sum_transform(model, 5, 0, 8, fine))))
    assert dense <= res.certified_bound + 1e-12


def test_sup_single_modulated_term_against_dense_grid():
    # one term: |e^{itu} zeta-free - phi(t)| has known structure; dense
    # cross-check of both value and certificate
    model = uniform_model(family="linear")
    res = sup_on_grid(model, 3, 0, 1, GridSpec(T=3.0))
    ts = np.linspace(-3, 3, 200_001).reshape(-1, 1)
    dense = float(np.max(np.abs(partial_sum_transform(model, 3, 0, 1, ts))))
    assert res.sup_value == pytest.approx(dense, abs=1e-4)
    assert dense <= res.certified_bound + 1e-12


def test_budget_error_reports_suggested_spacing():
    model = uniform_model()
    with pytest.raises(SizeError) as err:
        sup_on_grid(model, 1, 0, 8, GridSpec(T=2.0, h=1e-9, budget=10_000))
    assert err.value.suggested_spacing is not None
    assert err.value.suggested_spacing > 1e-9


def test_dimension_mismatch_rejected():
    model = uniform_model()
    with pytest.raises(ValueError):
        sup_on_grid(model, 1, 0, 4, GridSpec(T=2.0, d=2))


def test_ratio_statistic_deterministic_zero():
    model = TransitionMeasureModel(
        delta=PerturbationSpec("constant", params={"c": 0.5}),
        subsequence=SubsequenceSpec("linear", beta=0.5),
    )
    phi = GrowthFunction.for_subsequence(model.subsequence).phi
    stat = ratio_statistic(model, 1, [(0, 8)], [2.0], phi)
    assert stat.value < 1e-24


def test_ratio_statistic_is_compositional():
    model = uniform_model()
    phi = GrowthFunction.for_subsequence(model.subsequence).phi
    grid = GridSpec(T=2.0)
    stat = ratio_statistic(model, 6, [(0, 8)], [2.0], phi, grid=grid)
    ev = KernelEvaluator(model, 6)
    sup = sup_on_grid(model, 6, 0, 8, grid)
    denom = ev.sum_sq_coefficients(0, 8) * math.log(max(phi(8), 2.0))
    assert stat.value == pytest.approx(sup.sup_value**2 / denom, rel=1e-12)
    assert stat.witness["m"] == 8


def test_ratio_statistic_scaling_invariance():
    # on a single-shell window the coefficient rule is a pure scaling, which
    # must cancel between numerator and denominator
    phi = GrowthFunction(c=1.0, r=1, beta=0.5).phi
    unit = uniform_model()
    scaled = TransitionMeasureModel(
        delta=unit.delta, subsequence=unit.subsequence, a_rule="inverse_power"
    )
    grid = GridSpec(T=2.0)
    r1 = ratio_statistic(unit, 9, [(7, 8)], [2.0], phi, grid=grid)
    r2 = ratio_statistic(scaled, 9, [(7, 8)], [2.0], phi, grid=grid)
    assert r1.value == pytest.approx(r2.value, rel=1e-6)


def test_ratio_statistic_argument_errors():
    model = uniform_model()
    phi = GrowthFunction.for_subsequence(model.subsequence).phi
    with pytest.raises(ValueError):
        ratio_statistic(model, 1, [], [2.0], phi)
    with pytest.raises(ValueError):
        ratio_statistic(model, 1, [(0, 8)], [1.0], phi)
    with pytest.raises(ValueError):
        ratio_statistic(model, 1, [(8, 8)], [2.0], phi)
    general = TransitionMeasureModel(
        delta=PerturbationSpec("uniform", params={"a": 1.0}),
        subsequence=SubsequenceSpec("linear", beta=0.5),
        theta=AtomicMeasure.from_atoms([((0.0,), 1.0), ((1.0,), -0.5)]),
    )
    with pytest.raises(ConfigurationError):
        ratio_statistic(general, 1, [(0, 4)], [2.0], phi, mode="probability")
    stat = ratio_statistic(general, 1, [(0, 4)], [2.0], phi, mode="general")
    assert stat.value >= 0.0


def test_decay_profile_deterministic_zero():
    model = TransitionMeasureModel(
        delta=PerturbationSpec("constant", params={"c": 0.5}),
        subsequence=SubsequenceSpec("linear", beta=0.5),
    )
    rows = decay_profile(model, 1, [2, 4], t_max=4.0)
    assert all(r["sup_sq"] < 1e-24 for r in rows)


def test_decay_profile_single_term_dense_cross_check():
    model = uniform_model(family="linear")
    rows = decay_profile(model, 7, [1], t_max=2.0)
    ts = np.linspace(-2, 2, 100_001).reshape(-1, 1)
    dense = float(np.max(np.abs(partial_sum_transform(model, 7, 0, 1, ts)))) ** 2
    assert rows[0]["sup_sq"] == pytest.approx(dense, rel=1e-4)
    assert dense <= rows[0]["certified_sq"] + 1e-12


def test_decay_profile_caps_and_records_box():
    model = uniform_model()
    rows = decay_profile(model, 3, [16, 64], t_max=8.0)
    assert all(r["T"] == 8.0 and r["capped"] for r in rows)
    small = decay_profile(model, 3, [4], t_max=8.0)
    assert small[0]["T"] == 4.0 and not small[0]["capped"]


def test_decay_requires_probability_model():
    general = TransitionMeasureModel(
        delta=PerturbationSpec("uniform", params={"a": 1.0}),
        subsequence=SubsequenceSpec("linear", beta=0.5),
        theta=AtomicMeasure.from_atoms([((0.0,), 2.0)]),
    )
    with pytest.raises(ConfigurationError):
        decay_profile(general, 1, [4])


def test_certified_sup_two_dimensional():
    model = TransitionMeasureModel(
        delta=PerturbationSpec("uniform", d=2, params={"a": 1.0}),
        subsequence=SubsequenceSpec("linear", beta=0.5, d=2),
    )
    res = sup_on_grid(model, 4, 0, 6, GridSpec(T=2.0, d=2, refinement_levels=1))
    assert res.sup_value <= res.certified_bound
    axis = np.linspace(-2, 2, 301)
    mesh = np.stack(np.meshgrid(axis, axis, indexing="ij"), axis=-1).reshape(-1, 2)
    dense = float(np.max(np.abs(partial_sum_transform(model, 4, 0, 6, mesh))))
    assert dense <= res.certified_bound + 1e-12
    assert res.sup_value >= dense - 0.05 * max(dense, 1.0)


def test_exact_cycle_points_match_generic_at_moderate_scale():
    model = uniform_model()
    ev = KernelEvaluator(model, 5)
    cycles = np.array([[3.0], [17.0]])
    with_cycles = ev.centered_points(EvalPoints(t=2 * math.pi * cycles, cycles=cycles), 0, 8)
    plain = ev.centered_points(EvalPoints(t=2 * math.pi * cycles), 0, 8)
    assert np.max(np.abs(with_cycles - plain)) < 1e-9


def test_cumulative_matches_windowed_evaluation():
    model = uniform_model()
    ev = KernelEvaluator(model, 11)
    pts = EvalPoints(t=np.linspace(-1, 1, 7).reshape(-1, 1))
    cum = ev.centered_cumulative(pts, [4, 8, 16])
    for row, m in zip(cum, [4, 8, 16]):
        direct = ev.centered_points(pts, 0, m)
        assert np.allclose(row, direct)
