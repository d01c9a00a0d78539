import numpy as np
import pytest

from facetweak.augment.cluster_augmenter import (
    AugmentationStats,
    augment_cluster,
    make_candidate,
    measure_rejection,
)
from facetweak.clustering import gmm
from facetweak.errors import ConfigError, DegenerateConfigurationError
from facetweak.model.network import NetworkModel

# label landmarks placed on pixel centres of a 40x40 crop
LABEL_INDICES = np.array([[12, 14], [26, 14], [20, 22], [14, 29], [25, 29]], dtype=float)
LABEL = (LABEL_INDICES + 0.5) / 40
SOURCE = LABEL + [4 / 40, 0.0]


def _blob_image(centre, sigma=1.5):
    rows, cols = np.mgrid[0:40, 0:40].astype(float)
    blob = np.exp(-0.5 * ((cols - centre[0]) ** 2 + (rows - centre[1]) ** 2) / sigma ** 2)
    return np.repeat(blob[:, :, np.newaxis], 3, axis=2)


def _peak(image):
    row, col = np.unravel_index(np.argmax(image[:, :, 0]), image.shape[:2])
    return int(col), int(row)


@pytest.fixture(scope='module')
def routed(synthetic_dataset):
    """A seeded default network, its FC5 features and a two-component router."""
    trunk = NetworkModel(rng=np.random.default_rng(3))
    features = trunk.extract_features_batch(synthetic_dataset.images, tap='FC5')
    router = gmm.fit(features, k=2, seed=0, tap='FC5').model
    assignments, _ = router.assign_many(features)
    return trunk, router, assignments


@pytest.fixture(scope='module')
def single_router(routed, synthetic_dataset):
    trunk, _, _ = routed
    features = trunk.extract_features_batch(synthetic_dataset.images, tap='FC5')
    return gmm.fit(features, k=1, seed=0, tap='FC5').model


def test_aligned_candidate_moves_source_landmarks_onto_labels():
    image = _blob_image(LABEL_INDICES[0] + [4, 0])
    warped, labels = make_candidate(image, SOURCE, LABEL, warp_mode='aligned')
    assert _peak(warped) == (12, 14)
    np.testing.assert_array_equal(labels, LABEL)


def test_literal_candidate_applies_the_inverse_map():
    image = _blob_image(LABEL_INDICES[0] + [4, 0])
    warped, labels = make_candidate(image, SOURCE, LABEL, warp_mode='literal')
    assert _peak(warped) == (20, 14)
    np.testing.assert_array_equal(labels, LABEL)


def test_candidate_errors():
    image = np.zeros((40, 40, 3))
    with pytest.raises(ConfigError):
        make_candidate(image, SOURCE, LABEL, warp_mode='sideways')
    with pytest.raises(DegenerateConfigurationError):
        make_candidate(image, SOURCE, np.tile([[0.5, 0.5]], (5, 1)))


def test_single_component_router_accepts_everything(routed, single_router, synthetic_dataset):
    trunk, _, _ = routed
    members = np.arange(10)
    images, landmarks, stats = augment_cluster(
        synthetic_dataset.images[members], synthetic_dataset.landmarks[members], 0,
        single_router, trunk, target=25, rng=np.random.default_rng(0), batch=4,
    )
    assert len(images) == len(landmarks) == 25
    assert stats.accepted == 15 and stats.rejected == 0 and stats.attempted == 15
    assert stats.shortfall == 0
    np.testing.assert_array_equal(images[:10], synthetic_dataset.images[members])
    np.testing.assert_array_equal(landmarks[:10], synthetic_dataset.landmarks[members])


def test_accepted_samples_route_back_to_the_cluster(routed, synthetic_dataset):
    trunk, router, assignments = routed
    cluster = int(np.argmax(np.bincount(assignments, minlength=2)))
    members = np.flatnonzero(assignments == cluster)
    images, landmarks, stats = augment_cluster(
        synthetic_dataset.images[members], synthetic_dataset.landmarks[members], cluster,
        router, trunk, target=len(members) + 12, retry_cap=60, rng=np.random.default_rng(1),
    )
    assert len(images) == len(members) + stats.accepted
    assert stats.accepted + stats.rejected == stats.attempted
    if stats.accepted:
        features = trunk.extract_features_batch(images[len(members):], tap='FC5')
        labels, _ = router.assign_many(features)
        assert np.all(labels == cluster)
    # every label set is one of the member label sets
    for row in landmarks[len(members):]:
        assert np.any(np.all(np.isclose(synthetic_dataset.landmarks[members], row), axis=(1, 2)))


def test_retry_cap_bounds_the_work(routed, single_router, synthetic_dataset):
    trunk, _, _ = routed
    images, _, stats = augment_cluster(
        synthetic_dataset.images[:6], synthetic_dataset.landmarks[:6], 1,
        single_router, trunk, target=20, retry_cap=9, rng=np.random.default_rng(0),
    )
    assert stats.attempted == 9
    assert stats.accepted == 0 and stats.rejected == 9
    assert stats.shortfall == 14
    assert stats.rejection_rate == 1.0
    assert len(images) == 6


def test_augmentation_is_reproducible(routed, single_router, synthetic_dataset):
    trunk, _, _ = routed
    runs = [
        augment_cluster(synthetic_dataset.images[:8], synthetic_dataset.landmarks[:8], 0,
                        single_router, trunk, target=14, rng=np.random.default_rng(5))
        for _ in range(2)
    ]
    assert runs[0][0].tobytes() == runs[1][0].tobytes()
    np.testing.assert_array_equal(runs[0][1], runs[1][1])


def test_nothing_to_do(routed, single_router, synthetic_dataset):
    trunk, _, _ = routed
    images, _, stats = augment_cluster(
        synthetic_dataset.images[:5], synthetic_dataset.landmarks[:5], 0, single_router, trunk, target=3,
    )
    assert len(images) == 5 and stats.attempted == 0
    images, _, stats = augment_cluster(
        synthetic_dataset.images[:1], synthetic_dataset.landmarks[:1], 0, single_router, trunk, target=10,
    )
    assert len(images) == 1 and stats.attempted == 0 and stats.shortfall == 9


def test_stats_row():
    stats = AugmentationStats(cluster=2, members=5, target=10, attempted=8, accepted=4, rejected=4)
    row = stats.to_row()
    assert row['rejection_rate'] == 0.5
    assert row['shortfall'] == 1


def test_measure_rejection(routed, single_router, synthetic_dataset):
    trunk, _, _ = routed
    assignments = np.array([0] * 30 + [1] * 30)
    same = measure_rejection(synthetic_dataset.images, synthetic_dataset.landmarks, assignments, 0,
                             single_router, trunk, attempts=12, rng=np.random.default_rng(0))
    cross = measure_rejection(synthetic_dataset.images, synthetic_dataset.landmarks, assignments, 0,
                              single_router, trunk, attempts=12, rng=np.random.default_rng(0), cross=True)
    assert (same.source, same.attempted, same.rejected) == ('same', 12, 0)
    assert (cross.source, cross.attempted, cross.rejected) == ('cross', 12, 0)
    lonely = measure_rejection(synthetic_dataset.images, synthetic_dataset.landmarks, np.arange(60), 0,
                               single_router, trunk, attempts=12)
    assert lonely.attempted == 0
    assert np.isnan(lonely.rejection_rate)
