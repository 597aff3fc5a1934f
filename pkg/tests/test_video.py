import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eonvideo.config import TrainConfig
from eonvideo.video import (
    PSNR_CAP,
    EstimatorError,
    GopModel,
    QualityEstimator,
    VideoSample,
    ber_for_packet_error,
    build_dataset,
    dataset_mse,
    default_ber_grid,
    dfr_expectation_oracle,
    estimate,
    fit_estimator,
    fit_rbf,
    frame_error_probs,
    generate_ground_truth,
    gop_dfr_samples,
    packet_error_prob,
    psnr_from_mse,
    split_dataset,
    utility,
    video_cost,
)

GOP = GopModel()


def test_gop_structure():
    assert GOP.packets.tolist() == [20, 5, 5, 10, 5, 5, 10, 5, 5, 10, 5, 5]
    assert GOP.references[3] == (0,)
    assert GOP.references[1] == (0, 3)
    assert GOP.references[10] == (9,)


@pytest.mark.parametrize("kw", [dict(pattern="PBB"), dict(pattern="BIBPBBPBBPBB"), dict(threshold=0),
                                dict(pattern="IBBXBBPBBPBB"), dict(baseline_psnr=0)])
def test_gop_validation(kw):
    with pytest.raises(ValueError):
        GopModel(**kw)


def test_psnr_from_mse():
    assert psnr_from_mse(255.0**2) == pytest.approx(0.0, abs=1e-12)
    assert psnr_from_mse(65.025) == pytest.approx(10 * math.log10(255**2 / 65.025))
    assert psnr_from_mse(65.025) == pytest.approx(30.0)
    assert psnr_from_mse(0.0) == PSNR_CAP
    with pytest.raises(ValueError):
        psnr_from_mse(-1.0)


def test_lossless_channel():
    s = generate_ground_truth(GOP, 0.0, 500, seed=3)
    assert s.dfr == 1.0 and s.psnr == GOP.baseline_psnr


def test_losing_the_intra_frame_loses_everything():
    usable = np.ones(12, dtype=bool)
    usable[0] = False
    assert GOP.decodable(usable).sum() == 0


def test_losing_the_last_two_b_frames():
    usable = np.ones(12, dtype=bool)
    usable[10:] = False
    assert GOP.decodable(usable).mean() == pytest.approx(10 / 12)


def test_nothing_decodable_gives_zero_psnr():
    s = generate_ground_truth(GOP, 0.2, 50, seed=1)
    assert s.dfr == 0.0 and s.psnr == 0.0


def brute_dfr(usable):
    """Walk the reference chain directly, frame by frame."""
    pattern = GOP.pattern
    anchors = [i for i, t in enumerate(pattern) if t in "IP"]
    ok = {}
    for i in anchors:
        prev = [a for a in anchors if a < i]
        ok[i] = usable[i] and (not prev or ok[prev[-1]])
    for i, t in enumerate(pattern):
        if t == "B":
            before = max(a for a in anchors if a < i)
            after = [a for a in anchors if a > i]
            ok[i] = usable[i] and ok[before] and (not after or ok[after[0]])
    return sum(ok.values()) / len(pattern)


@settings(max_examples=300)
@given(st.lists(st.booleans(), min_size=12, max_size=12))
def test_decodability_matches_reference_walk(bits):
    assert GOP.decodable(np.array(bits)).mean() == pytest.approx(brute_dfr(bits))


def test_oracle_edges():
    assert dfr_expectation_oracle(GOP, 0.0) == 1.0
    assert dfr_expectation_oracle(GOP, 1.0) == 0.0
    with pytest.raises(ValueError):
        dfr_expectation_oracle(GOP, 1.5)


def test_oracle_uniform_value():
    # a closed-form count at p = 0.1: each frame decodes iff it and its reference chain survive
    q = 0.9
    expect = (q + q**2 + q**3 + q**4  # I, P3, P6, P9
              + 2 * q**3 + 2 * q**4 + 2 * q**5  # B pairs between anchors
              + 2 * q**6 - 2 * q**6 + 2 * q**5) / 12  # B10, B11 reference P9 only
    assert dfr_expectation_oracle(GOP, 0.1) == pytest.approx(expect, rel=1e-12)


def test_frame_error_probability_all_packets_needed():
    p = packet_error_prob(GOP, 2e-6)
    want = [1 - (1 - p) ** n for n in GOP.packets]
    assert frame_error_probs(GOP, 2e-6) == pytest.approx(want, rel=1e-9)
    assert packet_error_prob(GOP, ber_for_packet_error(GOP, 0.1)) == pytest.approx(0.1, rel=1e-12)


@pytest.mark.parametrize("p", [0.01, 0.1, 0.3])
def test_monte_carlo_converges_to_enumeration(p):
    ber = ber_for_packet_error(GOP, p)
    mean, var = dfr_expectation_oracle(GOP, frame_error_probs(GOP, ber), with_variance=True)
    samples = gop_dfr_samples(GOP, ber, 10_000, seed=11)
    assert abs(samples.mean() - mean) <= 3 * math.sqrt(var / len(samples))
    assert generate_ground_truth(GOP, ber, 10_000, seed=11).dfr == pytest.approx(samples.mean())


def test_ground_truth_non_increasing_in_ber():
    bers = np.logspace(-8, -4, 9)
    seeds = range(4)
    dfr = [np.mean([generate_ground_truth(GOP, b, 2000, s).dfr for s in seeds]) for b in bers]
    psnr = [np.mean([generate_ground_truth(GOP.__class__(threshold=0.8), b, 2000, s).psnr for s in seeds])
            for b in bers]
    assert all(b <= a for a, b in zip(dfr, dfr[1:]))
    assert all(b <= a + 1e-9 for a, b in zip(psnr, psnr[1:]))


def test_dataset_is_reproducible():
    a = build_dataset(GOP, [1e-7, 1e-6], 300, seed=5)
    assert a == build_dataset(GOP, [1e-7, 1e-6], 300, seed=5)
    train, test = split_dataset(list(range(30)), seed=2)
    assert len(train) == 20 and len(test) == 10 and not set(train) & set(test)


# -- estimator ---------------------------------------------------------------------


def samples_from(bers, psnr, dfr):
    return [VideoSample(float(b), float(p), float(d)) for b, p, d in zip(bers, psnr, dfr)]


def test_constant_targets_need_no_neurons():
    est, fit = fit_estimator(samples_from(np.logspace(-9, -5, 10), [35.0] * 10, [0.7] * 10))
    assert len(est.centers) == 0 and fit.mse_history[-1] == pytest.approx(0.0, abs=1e-24)
    assert estimate(est, 3e-7) == pytest.approx((35.0, 0.7))


def test_single_bump_recovered_with_one_neuron():
    x = np.linspace(0, 1, 51)
    spread = 0.1
    bump = np.exp(-np.log(2) * ((x - 0.5) / spread) ** 2)
    y = np.column_stack([10 * bump, 0.5 * bump])
    fit = fit_rbf(x, y, spread, mse_goal=1e-12, max_neurons=5)
    assert len(fit.centers) == 1 and fit.centers[0] == 0.5
    assert fit.mse_history[-1] < 1e-9


def test_training_mse_non_increasing_on_synthetic_set():
    rng = np.random.default_rng(0)
    x = np.sort(rng.random(50))
    y = np.column_stack([30 + 5 * np.sin(6 * x), np.clip(1.2 - x, 0, 1)]) + rng.normal(0, 0.05, (50, 2))
    fit = fit_rbf(x, y, 0.1, mse_goal=0.0, max_neurons=40)
    assert len(fit.mse_history) > 5
    assert all(b <= a for a, b in zip(fit.mse_history, fit.mse_history[1:]))


def test_exact_fit_interpolates_training_points():
    bers = np.logspace(-9, -5, 5)
    data = samples_from(bers, [40, 39, 35, 20, 2], [1.0, 0.95, 0.8, 0.3, 0.0])
    est, _ = fit_estimator(data, mse_goal=0.0, max_neurons=5, monotone=False)
    for s in data:
        assert estimate(est, s.ber) == pytest.approx((s.psnr, s.dfr), abs=1e-6)


def test_degenerate_inputs():
    with pytest.raises(EstimatorError):
        fit_estimator(samples_from([1e-6] * 4, [1, 2, 3, 4], [0.1] * 4))
    with pytest.raises(EstimatorError):
        fit_estimator(samples_from([1e-6], [1], [1]))


def test_default_estimator(estimator):
    psnr, dfr = estimate(estimator, 0.0)
    assert abs(dfr - 1.0) <= 0.05
    for b in (1e-9, 1e-7, 2e-6, 3e-5, 0.1):
        p, d = estimate(estimator, b)
        assert p >= 0 and 0 <= d <= 1


def test_predictions_are_continuous(estimator):
    # where the map is flat an absolute 1e-9 step in BER is invisible
    for b in (0.0, 1e-12, 1e-10, 1e-9, 1e-4, 1e-2):
        assert np.allclose(estimate(estimator, b), estimate(estimator, b + 1e-9), atol=1e-6)
    # on the steep part the change shrinks with the step
    for b in (1e-7, 1e-6, 1e-5):
        gaps = [np.abs(np.subtract(estimate(estimator, b), estimate(estimator, b * (1 + h)))).max()
                for h in (1e-2, 1e-4, 1e-6)]
        assert gaps[1] < gaps[0] / 10 and gaps[2] < 1e-6


def test_monotone_envelope_tracks_raw_fit(estimator):
    import dataclasses

    raw = dataclasses.replace(estimator, monotone=False)
    bers = np.logspace(-12, -2, 2000)
    env, fit = estimator.predict(bers), raw.predict(bers)
    assert np.abs(env - fit).max() < 0.01
    assert np.all(np.diff(env, axis=0) <= 1e-12)


def test_default_estimator_is_the_default_training_run(estimator):
    from eonvideo.cli import train_model

    result = train_model(GOP, TrainConfig())
    assert result.estimator.to_json() == estimator.to_json()
    assert result.test_mse <= 2 * result.train_mse


def test_json_roundtrip(tmp_path, estimator):
    path = tmp_path / "m.json"
    estimator.save(path)
    again = QualityEstimator.load(path)
    assert again == estimator
    assert again.predict([1e-8, 1e-6]).tolist() == estimator.predict([1e-8, 1e-6]).tolist()


def test_lower_ber_never_costs_more(estimator):
    bers = np.logspace(-12, -2, 400)
    costs = [video_cost(utility(*estimate(estimator, b))) for b in bers]
    assert all(b >= a - 1e-12 for a, b in zip(costs, costs[1:]))


def test_utility_and_cost():
    assert utility(40, 1) == 40 and utility(40, 0.5) == 20 and utility(0, 0.7) == 0
    assert video_cost(1.0) == 0.0
    assert video_cost(20.0) == pytest.approx(-1.30103, abs=1e-5)
    assert video_cost(0.0) == 3.0 and math.isfinite(video_cost(0.0))


@given(st.floats(1e-3, 1e4, exclude_min=True), st.floats(1e-3, 1e4, exclude_min=True))
def test_cost_strictly_decreasing(a, b):
    if a < b:
        assert video_cost(a) > video_cost(b)


def test_ber_grid():
    g = default_ber_grid()
    assert len(g) == 25 and g[0] == pytest.approx(1e-9) and g[-1] == pytest.approx(10**-4.5)


def test_estimator_mse_helper(estimator):
    data = build_dataset(GOP, [1e-8, 1e-6], 200, seed=1)
    assert dataset_mse(estimator, data) >= 0
    assert math.isnan(dataset_mse(estimator, []))
