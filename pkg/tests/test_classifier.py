import numpy as np
import pytest

from rcdtns.classifier import (
    REJECT_LABEL,
    TrainConfig,
    evaluate,
    evaluate_multi,
    load_model,
    predict,
    save_model,
    train,
)
from rcdtns.data import (
    OOD_LABEL,
    DeformationSpec,
    LabeledDataset,
    default_templates,
    generate_synthetic,
)
from rcdtns.errors import FormatError, InsufficientData, InvalidInput
from rcdtns.rcdt import TransformConfig, rcdt_forward
from rcdtns.subspace import distance_to_subspace

SIZE = 32
FAST_TRANSFORM = TransformConfig(n_angles=12, supersample=4)
SPEC = DeformationSpec(translate=(3, 3), scale=(0.85, 1.15), count=40, seed=11)
TEST_SPEC = DeformationSpec(translate=(3, 3), scale=(0.85, 1.15), count=12, seed=77)


@pytest.fixture(scope="module")
def templates():
    return default_templates(SIZE, ["gaussian", "ring", "cross"])


@pytest.fixture(scope="module")
def train_set(templates):
    return generate_synthetic(templates, SPEC)


@pytest.fixture(scope="module")
def model(train_set):
    return train(train_set, TrainConfig(transform=FAST_TRANSFORM, seed=0))


@pytest.fixture(scope="module")
def test_set(templates):
    return generate_synthetic(templates, TEST_SPEC)


class TestTrain:
    def test_model_components(self, model):
        assert model.class_labels == ["cross", "gaussian", "ring"]
        assert set(model.bases) == set(model.class_labels)
        assert set(model.densities) == set(model.class_labels)
        for summary in model.summaries:
            assert summary.n_fit + summary.n_validation == 40
            assert summary.n_validation == 8  # 0.2 of 40
            assert summary.rank >= 1

    def test_deterministic_given_seed(self, train_set):
        cfg = TrainConfig(transform=FAST_TRANSFORM, seed=3)
        m1 = train(train_set, cfg)
        m2 = train(train_set, cfg)
        for label in m1.class_labels:
            assert np.array_equal(
                m1.bases[label].singular_values, m2.bases[label].singular_values
            )
            assert np.array_equal(m1.bases[label].basis, m2.bases[label].basis)
            assert np.array_equal(
                m1.densities[label].support_points, m2.densities[label].support_points
            )

    def test_single_sample_class_rejected(self, templates):
        images = np.stack([templates[0].image, templates[1].image, templates[1].image])
        ds = LabeledDataset(images=images, labels=["a", "b", "b"])
        with pytest.raises(InsufficientData, match="'a'"):
            train(ds, TrainConfig(transform=FAST_TRANSFORM))

    def test_too_few_validation_samples_rejected(self, templates):
        images = np.stack([templates[0].image] * 4)
        ds = LabeledDataset(images=images, labels=["a"] * 4)
        # 0.2 * 4 rounds to 1 validation sample
        with pytest.raises(InsufficientData, match="validation"):
            train(ds, TrainConfig(transform=FAST_TRANSFORM, validation_fraction=0.2))

    def test_ood_in_training_set_rejected(self, templates):
        images = np.stack([templates[0].image] * 4)
        ds = LabeledDataset(images=images, labels=["a", "a", "a", OOD_LABEL])
        with pytest.raises(InvalidInput, match="__ood__"):
            train(ds, TrainConfig(transform=FAST_TRANSFORM))

    def test_validation_fraction_bounds(self):
        with pytest.raises(InvalidInput):
            TrainConfig(validation_fraction=0.0)
        with pytest.raises(InvalidInput):
            TrainConfig(validation_fraction=0.6)

    def test_validation_separates_own_class(self, model, test_set):
        # fresh same-class samples are closer to their own subspace
        correct = 0
        for i in range(len(test_set)):
            vec = rcdt_forward(test_set.images[i], model.transform)
            dists = {
                label: distance_to_subspace(vec, model.bases[label])
                for label in model.class_labels
            }
            if min(dists, key=dists.get) == test_set.labels[i]:
                correct += 1
        assert correct / len(test_set) >= 0.95


class TestPredict:
    def test_alpha_zero_always_accepts(self, model, test_set):
        for i in range(0, len(test_set), 7):
            p = predict(model, test_set.images[i], alpha=0.0)
            assert p.decision == "accept"
            assert p.accepted_class == p.nearest_class
            assert set(p.distances) == set(model.class_labels)

    def test_training_image_accepted_at_small_alpha(self, model, train_set):
        p = predict(model, train_set.images[0], alpha=0.01)
        assert p.decision == "accept"
        assert p.accepted_class == train_set.labels[0]

    def test_unseen_class_mostly_rejected(self, model):
        ood = generate_synthetic(
            default_templates(SIZE, ["crescent"]),
            DeformationSpec(translate=(3, 3), scale=(0.85, 1.15), count=20, seed=5),
        )
        rejected = sum(
            predict(model, ood.images[i], alpha=0.05).decision == "reject"
            for i in range(len(ood))
        )
        assert rejected / len(ood) >= 0.9

    def test_alpha_bounds(self, model, test_set):
        with pytest.raises(InvalidInput):
            predict(model, test_set.images[0], alpha=1.0)

    def test_midpoints_stay_in_class(self, model, test_set):
        # transform-space convexity: same-class midpoints keep the class label
        rng = np.random.default_rng(4)
        labels = np.asarray(test_set.labels)
        hits, total = 0, 0
        for label in model.class_labels:
            idx = np.flatnonzero(labels == label)
            for _ in range(20):
                i, j = rng.choice(idx, size=2, replace=False)
                vi = rcdt_forward(test_set.images[i], model.transform)
                vj = rcdt_forward(test_set.images[j], model.transform)
                mid = 0.5 * (vi.values + vj.values)
                dists = {
                    lab: np.linalg.norm(
                        mid - model.bases[lab].basis @ (model.bases[lab].basis.T @ mid)
                    )
                    for lab in model.class_labels
                }
                hits += min(dists, key=dists.get) == label
                total += 1
        assert hits / total >= 0.95


class TestEvaluate:
    def test_pure_inclass_alpha_zero(self, model, test_set):
        report = evaluate(model, test_set, alpha=0.0)
        assert report.n_samples == len(test_set)
        assert report.n_rejected == 0
        assert report.accuracy_percent >= 95.0

    def test_all_ood_rejecting_model_scores_full(self, model):
        ood = generate_synthetic(
            default_templates(SIZE, ["crescent"]),
            DeformationSpec(translate=(3, 3), scale=(0.85, 1.15), count=15, seed=6),
            ood_names=["crescent"],
        )
        report = evaluate(model, ood, alpha=0.5)
        if report.n_rejected == report.n_samples:
            assert report.accuracy_percent == 100.0
        assert report.per_class_accuracy[OOD_LABEL] == pytest.approx(
            100.0 * report.confusion[OOD_LABEL][REJECT_LABEL] / report.n_samples
        )

    def test_confusion_counts_sum(self, model, test_set):
        report = evaluate(model, test_set, alpha=0.05)
        total = sum(sum(row.values()) for row in report.confusion.values())
        assert total == report.n_samples
        # accuracy recomputable from the matrix
        correct = sum(
            report.confusion[label].get(label, 0)
            for label in report.confusion
            if label != OOD_LABEL
        ) + (report.confusion.get(OOD_LABEL, {}).get(REJECT_LABEL, 0))
        assert report.accuracy_percent == pytest.approx(100.0 * correct / report.n_samples)

    def test_alpha_monotone_rejections(self, model, test_set):
        reports = evaluate_multi(model, test_set, [0.0, 0.01, 0.05, 0.10])
        counts = [r.n_rejected for r in reports]
        assert counts == sorted(counts)

    def test_per_sample_records(self, model, test_set):
        report = evaluate(model, test_set, alpha=0.05)
        assert len(report.per_sample) == len(test_set)
        rec = report.per_sample[0]
        assert set(rec) == {
            "index",
            "true_label",
            "nearest_class",
            "distance",
            "likelihood",
            "decision",
        }

    def test_empty_test_set_rejected(self, model):
        with pytest.raises(InvalidInput):
            evaluate(model, LabeledDataset(images=np.zeros((0, 4, 4)), labels=[]), 0.0)

    def test_unknown_label_rejected(self, model, test_set):
        bad = LabeledDataset(images=test_set.images[:1], labels=["mystery"])
        with pytest.raises(InvalidInput, match="mystery"):
            evaluate(model, bad, 0.0)


class TestModelIO:
    def test_roundtrip_identical_predictions(self, model, test_set, tmp_path):
        path = save_model(model, tmp_path / "model.rcdtns")
        loaded = load_model(path)
        assert loaded.class_labels == model.class_labels
        assert loaded.transform == model.transform
        for i in range(0, len(test_set), 5):
            a = predict(model, test_set.images[i], alpha=0.05)
            b = predict(loaded, test_set.images[i], alpha=0.05)
            assert a == b

    def test_save_deterministic(self, model, tmp_path):
        p1 = save_model(model, tmp_path / "m1.bin")
        p2 = save_model(model, tmp_path / "m2.bin")
        assert p1.read_bytes() == p2.read_bytes()

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"NOTAMODEL" + b"\x00" * 64)
        with pytest.raises(FormatError, match="not a classifier model"):
            load_model(path)
