from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
import pytest

from jeanie.config import APP_CONFIG
from jeanie.core.encoders import EncodingNetwork
from jeanie.core.evaluation import evaluate_protocol, summarize_outcomes, sweep_protocol
from jeanie.core.fewshot import build_pool
from jeanie.core.synthetic import class_names, generate_synthetic
from jeanie.data.models import AlignmentConfig, EncoderConfig, EpisodeOutcome, ProtocolConfig, ViewGrid
from jeanie.errors import InvalidArgument, ProtocolViolation

SMALL = EncoderConfig(block_size=4, stride=4, feature_dim=6, output_dim=5, layers=2, dropout=0.0, init_std=0.1, seed=2)


def _protocol(**overrides) -> ProtocolConfig:
    base = dict(
        n_way=2, z_shot=1, episodes=6, seed=4,
        alignment=AlignmentConfig(gamma=0.05, iota=1),
        grid=ViewGrid(eta_az=1, eta_alt=0),
        encoder=SMALL,
    )
    return ProtocolConfig(**{**base, **overrides})


@pytest.fixture(scope='module')
def perturbed_pool():
    return build_pool(
        generate_synthetic(class_id, 8, view_perturb=25.0, rng_seed=seed)
        for class_id in (0, 3, 6, 9)
        for seed in range(3)
    )


def test_overlapping_classes_are_rejected(perturbed_pool):
    names = list(perturbed_pool)
    protocol = _protocol(train_classes=names[:2], test_classes=names[1:])
    with pytest.raises(ProtocolViolation):
        evaluate_protocol(perturbed_pool, protocol, EncodingNetwork(SMALL))


def test_test_classes_default_to_everything_not_trained(perturbed_pool):
    names = list(perturbed_pool)
    report = evaluate_protocol(perturbed_pool, _protocol(train_classes=names[:2]), EncodingNetwork(SMALL))
    assert report.diagnostics['test_classes'] == sorted(names[2:])
    assert {row.truth for row in report.rows} <= set(names[2:])


def test_indistinguishable_labels_score_at_chance():
    # every sample is the same clip, so every distance ties and the smallest id always wins
    pool = build_pool(
        replace(generate_synthetic(0, 8, rng_seed=1), label=f"l{label}")
        for label in range(5)
        for _ in range(4)
    )
    episodes = 300
    report = evaluate_protocol(pool, _protocol(n_way=5, episodes=episodes, grid=ViewGrid.single()), EncodingNetwork(SMALL))
    assert len(report.rows) == episodes
    assert all(row.predicted == 'l0' for row in report.rows)
    se = math.sqrt(0.2 * 0.8 / episodes)
    assert abs(report.accuracy - 0.2) <= 4 * se


def test_view_alignment_never_scores_above_plain_soft_dtw(perturbed_pool):
    encoder = EncodingNetwork(SMALL)
    jeanie_report = evaluate_protocol(perturbed_pool, _protocol(episodes=10), encoder)
    plain_report = evaluate_protocol(perturbed_pool, _protocol(episodes=10, method='softdtw'), encoder)
    for ours, plain in zip(jeanie_report.rows, plain_report.rows):
        assert ours.truth == plain.truth
        assert ours.d_pos_mean <= plain.d_pos_mean + 1e-12
        assert ours.d_neg_min <= plain.d_neg_min + 1e-12


def test_thread_count_does_not_change_rows(perturbed_pool, monkeypatch: pytest.MonkeyPatch):
    encoder = EncodingNetwork(SMALL)
    serial = evaluate_protocol(perturbed_pool, _protocol(), encoder, workers=1)
    monkeypatch.setenv('JEANIE_THREADS', '3')
    threaded = evaluate_protocol(perturbed_pool, _protocol(), encoder)
    assert [row.to_dict() for row in threaded.rows] == [row.to_dict() for row in serial.rows]


def test_fvm_and_support_views_evaluate(perturbed_pool):
    encoder = EncodingNetwork(SMALL)
    for protocol in (_protocol(method='fvm'), _protocol(support_views=True), _protocol(method='fvm', support_views=True)):
        report = evaluate_protocol(perturbed_pool, protocol, encoder)
        assert len(report.rows) == 6
        assert 0.0 <= report.accuracy <= 1.0


def test_summarize_outcomes_statistics():
    names = class_names()
    rows = [
        EpisodeOutcome(0, names[0], names[0], 0.1, 0.5),
        EpisodeOutcome(1, names[1], names[0], 0.4, 0.3),
        EpisodeOutcome(2, names[1], names[1], 0.2, 0.6),
        EpisodeOutcome(3, names[2], names[2], 0.1, 0.9),
    ]
    report = summarize_outcomes(rows)
    assert report.accuracy == 0.75
    assert report.stderr == pytest.approx(0.25)
    assert report.confusion[(names[0], names[1])] == 1
    assert report.confusion[(names[1], names[1])] == 1
    assert summarize_outcomes([]).accuracy == 0.0


def test_sweep_over_iota(perturbed_pool):
    protocol = _protocol(episodes=3, grid=ViewGrid(eta_az=2, eta_alt=0))
    points = sweep_protocol(perturbed_pool, protocol, EncodingNetwork(SMALL), 'iota', [1, 2, 3, 4])
    assert [x for x, _, _ in points] == [1.0, 2.0, 3.0, 4.0]
    assert all(0.0 <= accuracy <= 1.0 for _, accuracy, _ in points)
    assert {series for _, _, series in points} == {'jeanie:iota'}


def test_sweep_rejects_bad_requests(perturbed_pool):
    with pytest.raises(InvalidArgument):
        sweep_protocol(perturbed_pool, _protocol(), EncodingNetwork(SMALL), 'iota', [])
    with pytest.raises(InvalidArgument):
        sweep_protocol(perturbed_pool, _protocol(), EncodingNetwork(SMALL), 'sigma', [1.0])


def test_single_view_methods_agree(perturbed_pool):
    encoder = EncodingNetwork(SMALL)
    grid = ViewGrid.single()
    rows = {
        method: evaluate_protocol(perturbed_pool, _protocol(method=method, grid=grid), encoder).rows
        for method in ('jeanie', 'softdtw', 'fvm')
    }
    for method in ('jeanie', 'fvm'):
        for ours, plain in zip(rows[method], rows['softdtw']):
            assert ours.d_pos_mean == pytest.approx(plain.d_pos_mean, rel=1e-9, abs=1e-12)
            assert ours.d_neg_min == pytest.approx(plain.d_neg_min, rel=1e-9, abs=1e-12)


def _warped_corpus(classes: int, per_class: int, seed: int):
    max_perturb = float(APP_CONFIG['SYNTH_MAX_PERTURB'])
    warp_lo, warp_hi = APP_CONFIG['SYNTH_WARP_RANGE']
    rng = np.random.default_rng(seed)
    for class_id in range(classes):
        for _ in range(per_class):
            perturb = float(rng.uniform(-max_perturb, max_perturb))
            warp = float(rng.uniform(warp_lo, warp_hi))
            yield generate_synthetic(class_id, int(APP_CONFIG['SYNTH_FRAMES']), perturb, warp, int(rng.integers(0, 2 ** 31 - 1)))


def test_view_alignment_beats_temporal_only_and_free_matching():
    pool = build_pool(_warped_corpus(10, 6, seed=0))
    encoder = EncodingNetwork(EncoderConfig())
    protocol = ProtocolConfig(
        n_way=5, z_shot=1, episodes=500, seed=0,
        alignment=AlignmentConfig(gamma=1e-4, iota=2),
        grid=ViewGrid(eta_az=1, eta_alt=1),
    )
    accuracy = {
        method: evaluate_protocol(pool, replace(protocol, method=method), encoder).accuracy
        for method in ('jeanie', 'softdtw', 'fvm')
    }
    assert accuracy['jeanie'] >= accuracy['softdtw'] + 0.03
    assert accuracy['jeanie'] >= accuracy['fvm']
