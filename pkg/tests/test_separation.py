import itertools

import numpy as np
import pytest

from src.dsp.spectral import fit_stats, istft, log_mag, normalize, stft
from src.exceptions import InvalidArgumentError
from src.separation.masking import (
    AssignmentMode,
    FrameAssignment,
    SeparatedSources,
    assign_frames,
    hard_masks,
    reconstruct,
    wiener_masks,
)
from src.separation.metrics import evaluate, format_report, log_spectral_distance, si_sdr
from src.signals.siggen import (
    HeartParams,
    LungParams,
    SourceSignal,
    dominance_labels,
    gen_heart,
    gen_lung,
    mix,
)
from src.vae.model import VAEArchitecture, VAEModel

SR = 4000


@pytest.fixture
def tiny_setup(rng):
    """A short random mixture analysed with a 32-point STFT, plus a matching model."""
    spec = stft(rng.uniform(-0.5, 0.5, 2000), 32, 8, SR)
    features = log_mag(spec)
    stats = fit_stats(features)
    model = VAEModel.create(VAEArchitecture(input_dim=17, latent_dim=3, hidden_sizes=(8,)), rng)
    return spec, normalize(features, stats), stats, model


@pytest.fixture(scope="module")
def synthetic_mixture():
    heart = gen_heart(HeartParams(), 10.0, SR, seed=7)
    lung = gen_lung(LungParams(), 10.0, SR, seed=8)
    mixture = mix([heart, lung], [1.0, 0.6])
    components = [
        SourceSignal(src.samples * gain, SR, src.kind)
        for src, gain in zip((heart, lung), mixture.component_gains)
    ]
    return mixture, components


def test_single_cluster_assigns_everything_to_zero(tiny_setup):
    _, frames, _, model = tiny_setup
    assignment = assign_frames(model, frames, c=1)
    assert np.all(assignment.ids == 0)
    assert len(assignment) == frames.shape[0]


def test_assignment_is_deterministic(tiny_setup):
    _, frames, _, model = tiny_setup
    a = assign_frames(model, frames, c=2, seed=5)
    b = assign_frames(model, frames, c=2, seed=5)
    np.testing.assert_array_equal(a.ids, b.ids)
    np.testing.assert_array_equal(a.centroids, b.centroids)


def test_assignment_rejects_mismatched_features(tiny_setup):
    _, frames, _, model = tiny_setup
    with pytest.raises(InvalidArgumentError):
        assign_frames(model, frames[:, :10], c=2)


def test_frame_assignment_validates_ids():
    with pytest.raises(InvalidArgumentError):
        FrameAssignment(np.array([0, 2]), 2)


def test_hard_all_to_first_source(tiny_setup):
    spec, _, stats, model = tiny_setup
    assignment = FrameAssignment(np.zeros(spec.n_frames), 2, AssignmentMode.HARD)
    separated = reconstruct(spec, model, assignment, stats)
    np.testing.assert_array_equal(separated.signals[0], istft(spec))
    assert not np.any(separated.signals[1])
    assert separated.provenance["mode"] == "hard"
    assert separated.provenance["model"] == model.fingerprint()


@pytest.mark.parametrize("mode", list(AssignmentMode))
def test_sources_sum_to_mixture(tiny_setup, mode):
    spec, frames, stats, model = tiny_setup
    assignment = assign_frames(model, frames, c=3, seed=1, mode=mode)
    separated = reconstruct(spec, model, assignment, stats)
    reference = istft(spec)
    total = np.sum(separated.signals, axis=0)
    assert np.linalg.norm(total - reference) / np.linalg.norm(reference) < 1e-6
    np.testing.assert_allclose(separated.masks.sum(axis=0), 1.0, atol=1e-12)


def test_wiener_masks_are_uniform_where_nothing_is_predicted():
    magnitudes = np.array([[0.0, 3.0], [0.0, 4.0]])
    masks = wiener_masks(magnitudes, n_frames=5)
    assert masks.shape == (2, 2, 5)
    np.testing.assert_allclose(masks[:, 0, :], 0.5)
    np.testing.assert_allclose(masks[:, 1, 0], [9.0 / 25.0, 16.0 / 25.0])


def test_hard_masks_gate_whole_frames():
    masks = hard_masks(FrameAssignment(np.array([0, 1, 1]), 2, AssignmentMode.HARD), n_bins=4)
    assert masks.shape == (2, 4, 3)
    np.testing.assert_array_equal(masks[0, :, 0], 1.0)
    np.testing.assert_array_equal(masks[1, :, 0], 0.0)
    np.testing.assert_array_equal(masks[1, :, 2], 1.0)


def test_reconstruct_rejects_bad_inputs(tiny_setup):
    spec, _, stats, model = tiny_setup
    with pytest.raises(InvalidArgumentError):
        reconstruct(spec, model, FrameAssignment(np.zeros(3), 2, AssignmentMode.HARD), stats)
    with pytest.raises(InvalidArgumentError, match="centroids"):
        reconstruct(spec, model, FrameAssignment(np.zeros(spec.n_frames), 2), stats)


def _oracle_separation(mixture, labels, n_fft=256, hop=64):
    spec = stft(mixture, n_fft, hop)
    stats = fit_stats(log_mag(spec))
    model = VAEModel.create(VAEArchitecture(), np.random.default_rng(0))
    return reconstruct(spec, model, FrameAssignment(labels, 2, AssignmentMode.HARD), stats)


def test_oracle_assignment_improves_every_source(synthetic_mixture):
    mixture, components = synthetic_mixture
    labels = dominance_labels(components, 256, 64)
    separated = _oracle_separation(mixture, labels)
    report = evaluate(separated, components, mixture.samples)
    assert report.permutation == (0, 1)
    for score in report.scores:
        assert score.si_sdr_improvement > 0.0, score


def test_oracle_beats_random_assignment(synthetic_mixture):
    mixture, components = synthetic_mixture
    labels = dominance_labels(components, 256, 64)
    oracle = evaluate(_oracle_separation(mixture, labels), components, mixture.samples).mean_si_sdr
    wins = 0
    for seed in range(20):
        random_labels = np.random.default_rng(seed).integers(0, 2, labels.size)
        score = evaluate(_oracle_separation(mixture, random_labels), components, mixture.samples).mean_si_sdr
        wins += oracle >= score
    assert wins >= 19


def test_si_sdr_sentinels(rng):
    x = rng.standard_normal(500)
    assert si_sdr(x, x) == float("inf")
    assert si_sdr(np.zeros(500), x) == float("-inf")
    with pytest.raises(InvalidArgumentError):
        si_sdr(x, np.zeros(500))
    with pytest.raises(InvalidArgumentError):
        si_sdr(x[:10], x)


def test_si_sdr_is_scale_invariant(rng):
    ref = rng.standard_normal(1000)
    est = ref + 0.3 * rng.standard_normal(1000)
    base = si_sdr(est, ref)
    for alpha in (1e-3, 0.5, 7.0, 1e4):
        assert si_sdr(alpha * est, ref) == pytest.approx(base, abs=1e-9)


def test_si_sdr_matches_direct_formula(rng):
    for _ in range(10):
        ref = rng.standard_normal(300)
        est = ref + rng.standard_normal(300) * rng.uniform(0.1, 2.0)
        scale = sum(e * r for e, r in zip(est, ref)) / sum(r * r for r in ref)
        target = [scale * r for r in ref]
        error = [e - t for e, t in zip(est, target)]
        expected = 10.0 * np.log10(sum(t * t for t in target) / sum(e * e for e in error))
        assert si_sdr(est, ref) == pytest.approx(expected, abs=1e-9)


def test_lsd_special_cases(rng):
    ref = rng.standard_normal(2048)
    assert log_spectral_distance(ref, ref) == 0.0
    assert log_spectral_distance(10.0 * ref, ref) == pytest.approx(20.0, abs=1e-9)
    with pytest.raises(InvalidArgumentError):
        log_spectral_distance(ref[:100], ref[:100])


def test_lsd_matches_bin_wise_computation(rng):
    n = 1024
    noise = rng.standard_normal(n)
    sine = np.sin(2 * np.pi * 300.0 * np.arange(n) / SR)
    est_bins, ref_bins = stft(noise, 256, 64).bins, stft(sine, 256, 64).bins
    total, count = 0.0, 0
    for b in range(est_bins.shape[0]):
        for t in range(est_bins.shape[1]):
            e = max(abs(est_bins[b, t]), 1e-5)
            r = max(abs(ref_bins[b, t]), 1e-5)
            total += (20.0 * (np.log10(e) - np.log10(r))) ** 2
            count += 1
    assert log_spectral_distance(noise, sine) == pytest.approx(np.sqrt(total / count), abs=1e-9)


def test_evaluate_perfect_estimates_in_any_order(rng):
    refs = [rng.standard_normal(1024), rng.standard_normal(1024)]
    swapped = SeparatedSources([refs[1], refs[0]], SR)
    report = evaluate(swapped, refs)
    assert report.permutation == (1, 0)
    assert report.permutations_evaluated == 2
    assert all(s.si_sdr == float("inf") for s in report.scores)
    assert all(s.lsd == 0.0 for s in report.scores)


def test_evaluate_is_invariant_to_estimate_order(rng):
    refs = [rng.standard_normal(1024) for _ in range(3)]
    estimates = [r + 0.5 * rng.standard_normal(1024) for r in refs]
    base = evaluate(SeparatedSources(estimates, SR), refs)
    assert base.permutations_evaluated == 6
    for order in itertools.permutations(range(3)):
        report = evaluate(SeparatedSources([estimates[i] for i in order], SR), refs)
        assert [s.si_sdr for s in report.scores] == [s.si_sdr for s in base.scores]
        assert [order[i] for i in report.permutation] == list(base.permutation)


def test_evaluate_improvement_uses_mixture(rng):
    refs = [rng.standard_normal(1024), rng.standard_normal(1024)]
    mixture = refs[0] + refs[1]
    estimates = [refs[0] + 0.1 * refs[1], refs[1] + 0.1 * refs[0]]
    report = evaluate(SeparatedSources(estimates, SR), refs, mixture)
    for score in report.scores:
        baseline = si_sdr(mixture, refs[score.reference])
        assert score.si_sdr_improvement == pytest.approx(score.si_sdr - baseline)
        assert score.si_sdr_improvement > 0


def test_evaluate_rejects_count_mismatch(rng):
    with pytest.raises(InvalidArgumentError):
        evaluate(SeparatedSources([rng.standard_normal(512)], SR), [rng.standard_normal(512)] * 2)


def test_format_report_mentions_every_source(rng):
    refs = [rng.standard_normal(1024), rng.standard_normal(1024)]
    text = format_report(evaluate(SeparatedSources([r + 0.1 for r in refs], SR), refs, purity=0.9))
    assert "reference 0" in text and "reference 1" in text
    assert "cluster purity: 0.9000" in text
