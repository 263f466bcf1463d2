import numpy as np
import pytest

from detector.resonance import (
    DetectorThreshold,
    ResonanceHead,
    ResonanceTrace,
    TrajectoryVariant,
    align_epoch,
    compute_tau,
    detect_ood_tau,
    gradient_projection_diagnostic,
    project_onto_gradient,
    select_resonant_epoch,
    tau_threshold,
    train_resonance,
    trajectory_scores,
)
from detector.targets import assign_targets, generate_targets
from errors import ConfigurationError, SelectionError, UndefinedProjectionError, ValidationError
from evaluation.ood_metrics import ScoredLabels, auroc
from graph.datasets import make_toy_dataset
from graph.graph import FeatureScaler
from models.models import TargetMode, TargetSpec, ToySpec
from nn.layers import make_rng


def make_trace(taus, val_auroc=None):
    taus = np.asarray(taus, dtype=float)
    epochs = taus.shape[0]
    return ResonanceTrace(
        taus=taus,
        val_auroc=np.zeros(epochs) if val_auroc is None else np.asarray(val_auroc, dtype=float),
        losses=np.zeros(epochs),
    )


@pytest.mark.parametrize("k", [2, 3, 5])
def test_etf_gram_matrix(k):
    """Testa diagonal 1 e fora da diagonal -1/(K-1) no ETF simplex"""
    targets = generate_targets(TargetSpec(mode=TargetMode.ETF_BY_LABEL, num_targets=k, dim=16, seed=4))
    gram = targets @ targets.T
    expected = np.full((k, k), -1.0 / (k - 1))
    np.fill_diagonal(expected, 1.0)
    assert np.max(np.abs(gram - expected)) < 1e-10


def test_etf_requires_enough_dimensions():
    with pytest.raises(ConfigurationError):
        generate_targets(TargetSpec(mode=TargetMode.ETF_BY_LABEL, num_targets=5, dim=4))


def test_etf_by_label_needs_one_target_per_class():
    """Testa que num_targets precisa igualar o número de classes dos nós conhecidos"""
    spec = TargetSpec(mode=TargetMode.ETF_BY_LABEL, num_targets=3, dim=8, labels=[0, 1, 0, 1])
    with pytest.raises(ConfigurationError):
        generate_targets(spec)
    spec = TargetSpec(mode=TargetMode.ETF_BY_LABEL, num_targets=2, dim=8, labels=[0, 1, 0, 1])
    targets = generate_targets(spec)
    assigned = assign_targets(targets, 4, spec.labels)
    assert np.array_equal(assigned[0], assigned[2])
    assert np.array_equal(assigned[1], assigned[3])
    assert not np.array_equal(assigned[0], assigned[1])


def test_single_random_target_is_unit_and_deterministic():
    spec = TargetSpec(mode=TargetMode.SINGLE_RANDOM, dim=16, seed=9)
    first = generate_targets(spec)
    assert first.shape == (1, 16)
    assert abs(np.linalg.norm(first) - 1.0) < 1e-12
    assert np.array_equal(first, generate_targets(spec))


def test_single_random_rejects_many_targets():
    with pytest.raises(ConfigurationError):
        generate_targets(TargetSpec(mode=TargetMode.SINGLE_RANDOM, num_targets=2))


def test_multi_random_targets_are_unit():
    targets = generate_targets(TargetSpec(mode=TargetMode.MULTI_RANDOM, num_targets=4, dim=8, seed=1))
    assert np.allclose(np.linalg.norm(targets, axis=1), 1.0, atol=1e-12)


def test_assign_targets_round_robin_and_labels():
    targets = np.eye(3)
    assert assign_targets(targets, 5).tolist() == [targets[i % 3].tolist() for i in range(5)]
    assert assign_targets(targets, 2, labels=[2, 0]).tolist() == [[0, 0, 1], [1, 0, 0]]
    with pytest.raises(ValidationError):
        assign_targets(targets, 2, labels=[0, 3])


def test_align_epoch_fixed_point():
    """Testa que W já alinhado não se move"""
    p = np.array([[1.0, 0.0], [1.0, 0.0]])
    e = np.array([0.6, 0.8])
    head = ResonanceHead(weight=np.array([[0.6, 5.0], [0.8, -3.0]]), lr=0.5)
    updated, loss = align_epoch(head, p, np.tile(e, (2, 1)))
    assert loss == 0.0
    assert np.array_equal(updated.weight, head.weight)


def test_align_epoch_zero_inputs():
    head = ResonanceHead(weight=np.array([[0.3, -0.2]]), lr=0.5)
    updated, _ = align_epoch(head, np.zeros((3, 2)), np.ones((3, 1)))
    assert np.array_equal(updated.weight, head.weight)


def test_align_epoch_one_dimensional_hand_case():
    head = ResonanceHead(weight=np.array([[0.0]]), lr=0.5)
    updated, loss = align_epoch(head, np.array([[1.0]]), np.array([[1.0]]))
    assert loss == 1.0
    assert updated.weight.tolist() == [[1.0]]


def test_compute_tau_trivial_cases():
    w_before = np.array([[1.0, 2.0]])
    w_after = np.array([[1.5, 0.0]])
    assert compute_tau(w_before, w_after, np.zeros((2, 2))).tolist() == [0.0, 0.0]
    assert compute_tau(w_before, w_before, np.ones((3, 2))).tolist() == [0.0, 0.0, 0.0]


def test_one_step_change_matches_closed_form():
    """Testa Δh = (2α/(n·d))·x̃ X_knownᵀ (1eᵀ - X_known Wᵀ) em instâncias aleatórias"""
    rng = make_rng(17)
    lr = 0.005
    for _ in range(20):
        n, d_in, dim = int(rng.integers(1, 11)), int(rng.integers(1, 6)), int(rng.integers(1, 5))
        x_known = rng.standard_normal((n, d_in))
        x_wild = rng.standard_normal((6, d_in))
        e = rng.standard_normal(dim)
        head = ResonanceHead(weight=rng.standard_normal((dim, d_in)), lr=lr)
        updated, _ = align_epoch(head, x_known, np.tile(e, (n, 1)))

        delta = x_wild @ updated.weight.T - x_wild @ head.weight.T
        closed_form = (2 * lr / (n * dim)) * x_wild @ x_known.T @ (e - x_known @ head.weight.T)
        assert np.max(np.abs(delta - closed_form)) < 1e-8
        tau = compute_tau(head.weight, updated.weight, x_wild)
        assert np.allclose(tau, np.linalg.norm(closed_form, axis=1), atol=1e-8)


def test_tau_scales_linearly_with_lr():
    rng = make_rng(3)
    x_known, x_wild = rng.standard_normal((8, 4)), rng.standard_normal((5, 4))
    assigned = np.tile(rng.standard_normal(3), (8, 1))
    weight = rng.standard_normal((3, 4))
    taus = []
    for lr in (0.005, 0.01):
        head = ResonanceHead(weight=weight, lr=lr)
        updated, _ = align_epoch(head, x_known, assigned)
        taus.append(compute_tau(head.weight, updated.weight, x_wild))
    assert np.max(np.abs(taus[1] - 2 * taus[0])) < 1e-10
    assert np.all(taus[0] >= 0.0)


def training_setup(seed=0, epochs=50):
    rng = make_rng(seed)
    p_known = rng.standard_normal((30, 5)) + 2.0
    p_wild = np.vstack([rng.standard_normal((20, 5)) + 2.0, rng.standard_normal((20, 5))])
    assigned = np.tile(generate_targets(TargetSpec(dim=4, seed=seed)), (30, 1))
    head = ResonanceHead.initialize(5, 4, 0.05, seed)
    val_positions = np.array([0, 1, 2, 20, 21, 22])
    val_is_ood = np.array([0, 0, 0, 1, 1, 1], dtype=bool)
    return head, p_known, p_wild, assigned, epochs, val_positions, val_is_ood


def test_telescoping_trajectory():
    """Testa ‖Σ_t Δh_t - (h_T - h_0)‖ < 1e-6 por nó em 50 épocas"""
    head, p_known, p_wild, assigned, epochs, val_positions, val_is_ood = training_setup()
    final, trace = train_resonance(
        head, p_known, p_wild, assigned, epochs, val_positions, val_is_ood, keep_representations=True
    )
    reps = trace.representations
    assert reps.shape == (epochs + 1, 40, 4)
    summed = np.diff(reps, axis=0).sum(axis=0)
    assert np.max(np.linalg.norm(summed - (reps[-1] - reps[0]), axis=1)) < 1e-6
    vector_norm = trajectory_scores(trace, TrajectoryVariant.VECTOR_NORM)
    assert np.allclose(vector_norm, np.linalg.norm(summed, axis=1), atol=1e-6)
    assert np.allclose(vector_norm, compute_tau(head.weight, final.weight, p_wild), atol=1e-10)
    # τ por época é a norma de cada Δh
    assert np.allclose(trace.taus, np.linalg.norm(np.diff(reps, axis=0), axis=2), atol=1e-12)


def test_train_resonance_records_validation_auroc():
    head, p_known, p_wild, assigned, epochs, val_positions, val_is_ood = training_setup(epochs=5)
    _, trace = train_resonance(head, p_known, p_wild, assigned, epochs, val_positions, val_is_ood)
    assert trace.num_epochs == 5
    assert trace.representations is None
    for t in range(5):
        expected = auroc(ScoredLabels(-trace.taus[t, val_positions], val_is_ood))
        assert trace.val_auroc[t] == expected
    assert np.all((trace.val_auroc >= 0.0) & (trace.val_auroc <= 1.0))


def test_trajectory_variants_single_epoch():
    tau = np.array([0.2, 0.7, 0.1])
    trace = ResonanceTrace(
        taus=tau[None, :],
        val_auroc=np.array([0.5]),
        losses=np.array([1.0]),
        representations=np.stack([np.zeros((3, 1)), tau[:, None]]),
    )
    assert np.array_equal(trajectory_scores(trace, TrajectoryVariant.SCALAR_SUM), tau)
    assert np.array_equal(trajectory_scores(trace, TrajectoryVariant.VECTOR_NORM), tau)
    assert np.array_equal(trajectory_scores(trace, TrajectoryVariant.WINDOW, window=1, epoch=0), tau)


def test_window_variant():
    taus = np.arange(1.0, 11.0)[:, None] * np.ones((1, 2))
    trace = make_trace(taus)
    assert trajectory_scores(trace, TrajectoryVariant.WINDOW, window=1, epoch=4).tolist() == [5.0, 5.0]
    assert trajectory_scores(trace, TrajectoryVariant.WINDOW, window=3, epoch=4).tolist() == [12.0, 12.0]
    # janela cortada no início do trace
    assert trajectory_scores(trace, TrajectoryVariant.WINDOW, window=5, epoch=1).tolist() == [3.0, 3.0]
    assert trajectory_scores(trace, TrajectoryVariant.SCALAR_SUM).tolist() == [55.0, 55.0]
    with pytest.raises(ConfigurationError):
        trajectory_scores(trace, TrajectoryVariant.WINDOW, window=11)


def test_vector_norm_requires_representations():
    with pytest.raises(ConfigurationError):
        trajectory_scores(make_trace(np.ones((2, 2))), TrajectoryVariant.VECTOR_NORM)


def test_select_resonant_epoch():
    val_positions = np.array([0, 1, 2, 3])
    val_is_ood = np.array([0, 0, 1, 1], dtype=bool)
    assert select_resonant_epoch(make_trace([[1.0, 2.0, 3.0, 4.0]]), val_positions, val_is_ood) == 0

    taus = np.array([[1.0, 2.0, 3.0, 4.0]] * 5)
    taus[3] = [5.0, 6.0, 1.0, 2.0]  # OOD com τ menor que todo ID
    assert select_resonant_epoch(make_trace(taus), val_positions, val_is_ood) == 3

    flat = np.ones((4, 4))
    assert select_resonant_epoch(make_trace(flat), val_positions, val_is_ood) == 0


def test_select_resonant_epoch_is_rank_invariant():
    rng = make_rng(8)
    taus = rng.random((12, 30))
    val_positions = np.arange(0, 30, 2)
    val_is_ood = np.arange(15) % 3 == 0
    baseline = select_resonant_epoch(make_trace(taus), val_positions, val_is_ood)
    assert select_resonant_epoch(make_trace(np.exp(3 * taus)), val_positions, val_is_ood) == baseline
    assert select_resonant_epoch(make_trace(7.0 * taus + 0.5), val_positions, val_is_ood) == baseline


def test_select_resonant_epoch_needs_both_classes():
    with pytest.raises(SelectionError):
        select_resonant_epoch(make_trace(np.ones((2, 3))), np.array([0, 1]), np.array([0, 0], dtype=bool))


def test_tau_threshold():
    assert tau_threshold(np.arange(1.0, 21.0), 0.95).gamma == 1.0
    assert tau_threshold(np.full(7, 0.25), 0.95).gamma == 0.25
    assert tau_threshold(np.array([3.0, 0.5, 2.0]), 1.0).gamma == 0.5
    with pytest.raises(ValidationError):
        tau_threshold(np.array([]), 0.95)


def test_detect_ood_tau():
    threshold = DetectorThreshold(gamma=0.2)
    assert detect_ood_tau(np.array([0.2]), threshold).tolist() == [1]
    assert detect_ood_tau(np.array([0.3, 0.9]), threshold).tolist() == [0, 0]
    assert detect_ood_tau(np.array([0.1, 0.5]), threshold).tolist() == [1, 0]


def test_project_onto_gradient():
    assert project_onto_gradient(np.array([0.0, 1.0]), np.array([2.0, 0.0])).tolist() == [0.0, 0.0]
    assert np.allclose(project_onto_gradient(np.array([1.5, -2.0]), np.array([1.5, -2.0])), [1.5, -2.0])
    assert project_onto_gradient(np.array([1.0, 1.0]), np.array([2.0, 0.0])).tolist() == [1.0, 0.0]
    with pytest.raises(UndefinedProjectionError):
        project_onto_gradient(np.array([1.0, 1.0]), np.zeros(2))


def test_gradient_projection_diagnostic_shape():
    head, p_known, p_wild, assigned, *_ = training_setup()
    lengths = gradient_projection_diagnostic(head, p_known, assigned, p_wild)
    assert lengths.shape == (40,)
    assert np.all(np.isfinite(lengths))


def resonance_on_toy(seed):
    dataset = make_toy_dataset(ToySpec(seed=seed))
    masks = dataset.masks
    features = FeatureScaler().fit(dataset.graph.features[masks.known_id]).transform(dataset.graph.features)
    p_known, p_wild = features[masks.known_id], features[masks.wild]
    assigned = assign_targets(generate_targets(TargetSpec(dim=16, seed=seed + 1)), masks.known_id.size)
    head = ResonanceHead.initialize(p_known.shape[1], 16, 0.005, seed + 2)
    val_positions = masks.wild_positions(masks.val)
    val_is_ood = dataset.is_ood[masks.val]
    _, trace = train_resonance(head, p_known, p_wild, assigned, 200, val_positions, val_is_ood)
    t_star = select_resonant_epoch(trace, val_positions, val_is_ood)
    tau = trace.taus[t_star]
    test_positions = masks.wild_positions(masks.test)
    test_auroc = auroc(ScoredLabels(-tau[test_positions], dataset.is_ood[masks.test]))
    wild_is_ood = dataset.is_ood[masks.wild]
    return test_auroc, tau[~wild_is_ood].mean(), tau[wild_is_ood].mean()


def test_toy_resonance_phenomenon():
    """Testa que nós ID selvagens se movem mais que OOD no t* escolhido pela validação"""
    results = [resonance_on_toy(seed) for seed in range(5)]
    assert np.median([r[0] for r in results]) >= 0.90
    for _, mean_id, mean_ood in results:
        assert mean_id > mean_ood
