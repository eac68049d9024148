import numpy as np
import pytest
from hypothesis import given, strategies as st

from lpbf_defects import (
    DefectLabels,
    ProcessParameters,
    Record,
    evaluate,
    export_projection,
    pca_project,
)
from lpbf_defects.evaluation import (
    DegenerateFeatures,
    EmptyInput,
    LengthMismatch,
    TooFewPoints,
    records_to_features,
)

from oracles import fix_sign, jacobi_eigendecomposition, standardized_covariance


def labels_of(*flags):
    return DefectLabels.from_flags(*flags)


K = labels_of(True, False, False)
KB = labels_of(True, False, True)
KL = labels_of(True, True, False)
NONE = labels_of(False, False, False)


def test_identical_lists_score_perfectly():
    report = evaluate([K, KL, NONE], [K, KL, NONE])
    assert report.subset_accuracy == 1.0
    assert report.hamming_loss == 0.0


def test_hand_constructed_five_example_case():
    # three exact matches; two misses each wrong in exactly 1 of 4 flags
    truths = [K, K, K, K, KL]
    predictions = [K, K, K, KB, K]
    report = evaluate(predictions, truths)
    assert report.subset_accuracy == 0.6
    assert report.hamming_loss == pytest.approx(0.1, abs=1e-15)
    assert report.n_examples == 5


def test_per_label_counts_reconcile():
    truths = [K, KL, NONE, KB]
    predictions = [K, K, NONE, NONE]
    report = evaluate(predictions, truths)
    for name, confusion in report.confusion.items():
        assert confusion.tp + confusion.fp + confusion.fn + confusion.tn == 4
        assert report.per_label[name].support == confusion.tp + confusion.fn


def test_zero_support_zero_prediction_convention():
    report = evaluate([K, K], [K, K])
    balling = report.per_label["balling"]
    assert balling.support == 0
    assert balling.precision == balling.recall == balling.f1 == 0.0


def test_empty_and_mismatched_inputs_rejected():
    with pytest.raises(EmptyInput):
        evaluate([], [])
    with pytest.raises(LengthMismatch):
        evaluate([K], [K, K])


@given(st.lists(st.tuples(st.booleans(), st.booleans(), st.booleans()), min_size=1, max_size=40))
def test_perfect_iff_zero_hamming(flag_rows):
    labels = [labels_of(*row) for row in flag_rows]
    report = evaluate(labels, labels)
    assert report.subset_accuracy == 1.0 and report.hamming_loss == 0.0
    if len(labels) > 1:
        flipped = labels[:-1] + [labels_of(not labels[-1].keyhole, False, False)]
        mixed = evaluate(flipped, labels)
        assert (mixed.subset_accuracy == 1.0) == (mixed.hamming_loss == 0.0)


@given(
    st.lists(
        st.tuples(
            st.tuples(st.booleans(), st.booleans(), st.booleans()),
            st.tuples(st.booleans(), st.booleans(), st.booleans()),
        ),
        min_size=1,
        max_size=40,
    )
)
def test_f1_is_harmonic_mean_when_defined(pairs):
    predictions = [labels_of(*p) for p, _ in pairs]
    truths = [labels_of(*t) for _, t in pairs]
    report = evaluate(predictions, truths)
    for metrics in report.per_label.values():
        if metrics.precision > 0 and metrics.recall > 0:
            harmonic = 2 / (1 / metrics.precision + 1 / metrics.recall)
            assert abs(metrics.f1 - harmonic) <= 1e-12


# --- PCA ---------------------------------------------------------------------


def random_dataset(n=50, d=3, seed=3):
    rng = np.random.default_rng(seed)
    data = rng.normal(size=(n, d)) @ np.diag([3.0, 1.0, 0.4][:d]) + rng.normal(size=d)
    labels = [labels_of(bool(i % 2), False, False) for i in range(n)]
    return data, labels


def test_components_orthonormal_and_variances_descending():
    data, labels = random_dataset()
    projection = pca_project(data, labels)
    c1, c2 = projection.components
    assert abs(float(c1 @ c2)) <= 1e-9
    assert abs(float(np.linalg.norm(c1)) - 1.0) <= 1e-9
    assert abs(float(np.linalg.norm(c2)) - 1.0) <= 1e-9
    assert projection.explained_variance[0] >= projection.explained_variance[1] >= 0.0


def test_matches_jacobi_oracle():
    data, labels = random_dataset()
    projection = pca_project(data, labels)
    covariance = standardized_covariance(data.tolist())
    values, vectors = jacobi_eigendecomposition(covariance)
    for i in range(2):
        assert projection.explained_variance[i] == pytest.approx(values[i], abs=1e-6)
        oracle_vector = np.array(fix_sign(vectors[i]))
        assert np.allclose(projection.components[i], oracle_vector, atol=1e-6)


def test_collinear_data_has_zero_second_variance():
    line = np.column_stack([np.arange(12.0), 2.0 * np.arange(12.0) - 3.0])
    projection = pca_project(line, [NONE] * 12)
    assert projection.explained_variance[1] <= 1e-9


def test_translation_invariance():
    data, labels = random_dataset()
    base = pca_project(data, labels)
    moved = pca_project(data + np.array([100.0, -40.0, 7.0]), labels)
    assert np.allclose(base.components, moved.components, atol=1e-9)
    assert np.allclose(
        [p[:2] for p in base.points], [p[:2] for p in moved.points], atol=1e-9
    )


def test_total_variance_equals_feature_count():
    data, _ = random_dataset(n=80, d=3)
    covariance = standardized_covariance(data.tolist())
    values, _ = jacobi_eigendecomposition(covariance)
    assert sum(values) == pytest.approx(3.0, abs=1e-9)


def test_degenerate_inputs_rejected():
    with pytest.raises(TooFewPoints):
        pca_project(np.zeros((2, 3)), [NONE] * 2)
    with pytest.raises(DegenerateFeatures):
        pca_project(np.ones((5, 3)), [NONE] * 5)


def test_projection_deterministic():
    data, labels = random_dataset()
    a = pca_project(data, labels)
    b = pca_project(data.copy(), labels)
    assert np.array_equal(a.components, b.components)
    assert a.points == b.points


def test_records_to_features_imputes_missing():
    records = [
        Record(
            id=f"r-{i}",
            params=ProcessParameters(
                material="SS316L", power=100.0 + i, velocity=500.0,
                beam_diameter=None if i else 90.0,
            ),
            labels=NONE,
        )
        for i in range(3)
    ]
    features, labels = records_to_features(records)
    assert features.shape == (3, 5)
    assert features[1, 2] == 90.0 and features[2, 2] == 90.0
    assert len(labels) == 3


def test_export_projection_files(tmp_path):
    data, labels = random_dataset(n=20)
    projection = pca_project(data, labels)
    csv_path, image_path = export_projection(projection, tmp_path / "proj.csv")
    lines = csv_path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "x,y,keyhole,lof,balling,none"
    assert len(lines) == 21
    assert image_path.stat().st_size > 0


def test_export_to_unwritable_path_raises(tmp_path):
    data, labels = random_dataset(n=10)
    projection = pca_project(data, labels)
    with pytest.raises(OSError):
        export_projection(projection, tmp_path / "missing_dir" / "proj.csv")
