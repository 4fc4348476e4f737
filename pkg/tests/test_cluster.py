import logging
from collections import deque

import numpy as np
import numpy.typing as npt
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.distance import cdist
from sklearn.cluster import DBSCAN

from psmlab.cluster import (
    NOISE,
    ClusterProfile,
    analyze_person,
    cluster_au_frequencies,
    cluster_count,
    cluster_sweep,
    custom_metric_raw,
    dbscan,
    normalize_matrix,
    novelty_flags,
    principal_components,
    project_2d,
    summarize_cluster_differences,
)
from psmlab.cluster.dbscan import SweepResult
from psmlab.config import ClusterConfig
from psmlab.data_ingest import N_AUS
from psmlab.errors import ErrorKind


def density_reachability(points: npt.NDArray[np.float64], eps: float, min_samples: int) -> npt.NDArray[np.int64]:
    """Textbook DBSCAN: clusters grow from cores in index order, borders take the lowest adjacent cluster."""
    near = cdist(points, points) <= eps
    core = near.sum(axis=1) >= min_samples
    labels = np.full(len(points), NOISE, dtype=np.int64)
    next_id = 0
    for seed in range(len(points)):
        if not core[seed] or labels[seed] != NOISE:
            continue
        labels[seed] = next_id
        queue = deque([seed])
        while queue:
            point = queue.popleft()
            for other in np.flatnonzero(near[point] & core):
                if labels[other] == NOISE:
                    labels[other] = next_id
                    queue.append(other)
        next_id += 1
    for point in np.flatnonzero(~core):
        claimed = labels[near[point] & core]
        if claimed.size:
            labels[point] = claimed.min()
    return labels


def blobs(
    rng: np.random.Generator,
    centers: list[tuple[float, float]],
    per: int,
    sigma: float,
) -> npt.NDArray[np.float64]:
    return np.concatenate([rng.normal(center, sigma, size=(per, 2)) for center in centers])


def same_partition(a: npt.NDArray[np.int64], b: npt.NDArray[np.int64]) -> bool:
    pairs = set(zip(a.tolist(), b.tolist(), strict=True))
    return len(pairs) == len({x for x, _ in pairs}) == len({y for _, y in pairs})


@settings(max_examples=60, deadline=None)
@given(
    st.integers(min_value=0, max_value=2**32 - 1),
    st.integers(min_value=5, max_value=150),
    st.sampled_from([3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0]),
    st.integers(min_value=4, max_value=8),
)
def test_dbscan_matches_density_reachability(seed: int, n: int, eps: float, min_samples: int) -> None:
    points = np.random.default_rng(seed).uniform(0.0, 40.0, size=(n, 2))
    labels = dbscan(points, eps, min_samples).unwrap()
    assert np.array_equal(labels, density_reachability(points, eps, min_samples))


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=2**32 - 1), st.sampled_from([3.0, 5.0, 8.0]), st.integers(4, 8))
def test_dbscan_core_points_agree_with_sklearn(seed: int, eps: float, min_samples: int) -> None:
    points = np.random.default_rng(seed).uniform(0.0, 40.0, size=(120, 2))
    ours = dbscan(points, eps, min_samples).unwrap()
    reference = DBSCAN(eps=eps, min_samples=min_samples).fit(points)
    core = reference.core_sample_indices_
    assert same_partition(ours[core], reference.labels_[core])
    assert np.array_equal(ours == NOISE, reference.labels_ == NOISE)


def test_dbscan_finds_separated_blobs(rng: np.random.Generator) -> None:
    points = blobs(rng, [(0.0, 0.0), (10.0, 0.0), (0.0, 10.0)], 30, 0.1)
    labels = dbscan(points, 1.0, 4).unwrap()
    assert cluster_count(labels) == 3
    assert labels.tolist() == [0] * 30 + [1] * 30 + [2] * 30


def test_dbscan_degenerate_inputs() -> None:
    same = np.zeros((10, 3))
    assert cluster_count(dbscan(same, 0.5, 4).unwrap()) == 1
    spread = np.arange(20, dtype=np.float64).reshape(10, 2)
    assert np.all(dbscan(spread, 1e-6, 2).unwrap() == NOISE)
    assert dbscan(np.zeros((0, 2)), 1.0, 4).unwrap().shape == (0,)


@pytest.mark.parametrize(
    ("points", "eps", "min_samples"),
    [
        (np.zeros((5, 2)), 0.0, 4),
        (np.zeros((5, 2)), 1.0, 0),
        (np.zeros(5), 1.0, 4),
        (np.array([[0.0, np.nan]]), 1.0, 1),
    ],
)
def test_dbscan_rejects_bad_input(points: npt.NDArray[np.float64], eps: float, min_samples: int) -> None:
    assert dbscan(points, eps, min_samples).unwrap_err().kind is ErrorKind.INVALID_PARAMS


def test_cluster_sweep_covers_the_grid(rng: np.random.Generator) -> None:
    points = blobs(rng, [(0.0, 0.0), (40.0, 0.0)], 20, 0.5)
    sweep = cluster_sweep(points).unwrap()
    assert len(sweep.counts) == 40
    assert set(sweep.counts.values()) == {2}
    assert sweep.average == 2.0
    assert sweep.closest_to_average() == (3.0, 4)
    assert len(sweep.to_dict()["runs"]) == 40


def test_cluster_sweep_failures() -> None:
    assert cluster_sweep(np.zeros((5, 2))).unwrap_err().kind is ErrorKind.TOO_FEW_POINTS
    assert cluster_sweep(np.zeros((10, 2)), eps_values=()).unwrap_err().kind is ErrorKind.INVALID_PARAMS


def test_closest_to_average_prefers_earliest_setting() -> None:
    sweep = SweepResult({(1.0, 4): 1, (2.0, 4): 3, (3.0, 4): 2, (4.0, 4): 2})
    assert sweep.average == 2.0
    assert sweep.closest_to_average() == (3.0, 4)


def test_cluster_au_frequencies() -> None:
    labels = np.array([0, 0, NOISE, 1, 1, 1])
    aus = np.zeros((6, N_AUS), dtype=bool)
    aus[[0, 3, 4], 0] = True
    keys = [f"SN001:{i}" for i in range(6)]
    profiles = cluster_au_frequencies(labels, aus, "psm", keys).unwrap()
    assert [p.cluster_id for p in profiles] == [0, 1]
    assert profiles[0].au_frequency[0] == 0.5
    assert profiles[1].au_frequency[0] == pytest.approx(2 / 3)
    assert profiles[1].member_keys == ("SN001:3", "SN001:4", "SN001:5")
    assert profiles[0].to_dict()["au_frequency"]["AU1"] == 0.5
    assert cluster_au_frequencies(labels[:4], aus, "psm").unwrap_err().kind is ErrorKind.LENGTH_MISMATCH
    assert cluster_au_frequencies(labels, aus, "psm", keys[:2]).unwrap_err().kind is ErrorKind.LENGTH_MISMATCH


def test_custom_metric() -> None:
    v = np.linspace(0.0, 1.0, N_AUS)
    assert custom_metric_raw(v, v) == pytest.approx(1.0)
    first, second = np.eye(N_AUS)[0], np.eye(N_AUS)[1]
    assert custom_metric_raw(first, second) == pytest.approx(-1 / 11 - 2)
    assert custom_metric_raw(first, second, "l2") == pytest.approx(-1 / 11 - np.sqrt(2))


def test_custom_metric_constant_vector(caplog: pytest.LogCaptureFixture) -> None:
    with caplog.at_level(logging.WARNING):
        value = custom_metric_raw(np.full(N_AUS, 0.5), np.full(N_AUS, 0.25))
    assert value == pytest.approx(-0.25 * N_AUS)
    assert "ZeroVariance" in caplog.text


def test_normalize_matrix() -> None:
    assert np.array_equal(normalize_matrix(np.full((2, 3), -4.0)), np.ones((2, 3)))
    scaled = normalize_matrix(np.array([[-2.0, 0.0], [2.0, 1.0]]))
    assert scaled.min() == 0.0
    assert scaled.max() == 1.0
    assert scaled[0, 1] == pytest.approx(0.5)


def profile(cluster_id: int, active: list[int], source: str) -> ClusterProfile:
    frequency = np.zeros(N_AUS)
    frequency[active] = 1.0
    return ClusterProfile(cluster_id, np.arange(3), (), frequency, source)


def test_novelty_flags() -> None:
    psm = [profile(0, [0, 1], "psm"), profile(1, [10, 11], "psm")]
    gm = [profile(0, [0, 1], "gm")]
    analysis = novelty_flags(psm, gm).unwrap()
    assert analysis.raw.shape == (2, 1)
    assert analysis.normalized[0, 0] == 1.0
    assert analysis.normalized[1, 0] == 0.0
    assert analysis.novel_psm == (1,)
    assert analysis.novel_gm == ()
    assert analysis.to_dict()["novel_psm"] == [1]


def test_novelty_needs_both_sides() -> None:
    error = novelty_flags([], [profile(0, [0], "gm")]).unwrap_err()
    assert error.kind is ErrorKind.EMPTY_SIDE
    assert error.details == {"psm": 0, "gm": 1}


def test_principal_components(rng: np.random.Generator) -> None:
    t = rng.normal(size=200)
    x = np.stack([3.0 * t, 0.1 * rng.normal(size=200), np.zeros(200)], axis=1)
    coords = principal_components(x, 2).unwrap()
    assert coords.shape == (200, 2)
    assert np.corrcoef(coords[:, 0], x[:, 0])[0, 1] > 0.99
    assert np.array_equal(coords, principal_components(x, 2).unwrap())
    padded = principal_components(x[:, :2], 4).unwrap()
    assert padded.shape == (200, 4)
    assert np.all(padded[:, 2:] == 0.0)
    assert project_2d(x).unwrap().shape == (200, 2)


def test_principal_components_failures() -> None:
    assert principal_components(np.zeros((1, 3)), 2).unwrap_err().kind is ErrorKind.TOO_FEW_POINTS
    assert principal_components(np.array([[0.0, np.inf], [1.0, 1.0]]), 2).unwrap_err().kind is ErrorKind.INVALID_INPUT


SMALL_GRID = ClusterConfig(eps_values=(1.0,), min_samples_values=(4,))


def test_analyze_person(rng: np.random.Generator) -> None:
    psm = blobs(rng, [(0.0, 0.0), (10.0, 0.0), (0.0, 10.0)], 20, 0.1)
    gm = blobs(rng, [(0.0, 0.0)], 60, 0.1)
    labels = np.zeros((60, N_AUS), dtype=bool)
    labels[:20, 0] = True
    labels[20:40, 5] = True
    labels[40:, 11] = True
    keys = [f"SN001:{i}" for i in range(60)]
    analysis = analyze_person(psm, gm, labels, SMALL_GRID, keys).unwrap()
    assert len(analysis.psm.profiles) == 3
    assert len(analysis.gm.profiles) == 1
    assert analysis.difference == -2.0
    assert analysis.psm.reference == (1.0, 4)
    assert analysis.psm.projection.shape == (60, 2)
    assert analysis.novelty is not None
    assert len(analysis.novelty.psm) == 3
    assert analysis.psm.profiles[2].member_keys[0] == "SN001:40"
    assert analysis.to_dict()["difference"] == -2.0


def test_analyze_person_without_gm_clusters(rng: np.random.Generator) -> None:
    psm = blobs(rng, [(0.0, 0.0)], 20, 0.1)
    gm = np.arange(40, dtype=np.float64).reshape(20, 2) * 10.0
    labels = rng.random((20, N_AUS)) < 0.5
    analysis = analyze_person(psm, gm, labels, SMALL_GRID).unwrap()
    assert analysis.gm.profiles == []
    assert analysis.novelty is None


def test_analyze_person_in_pca_space(rng: np.random.Generator) -> None:
    psm = np.hstack([blobs(rng, [(0.0, 0.0), (10.0, 0.0)], 15, 0.1), np.zeros((30, 6))])
    labels = rng.random((30, N_AUS)) < 0.5
    config = ClusterConfig(eps_values=(1.0,), min_samples_values=(4,), space="pca", pca_components=2)
    analysis = analyze_person(psm, psm, labels, config).unwrap()
    assert analysis.difference == 0.0
    assert len(analysis.psm.profiles) == 2


def test_analyze_person_length_mismatch(rng: np.random.Generator) -> None:
    points = rng.normal(size=(20, 2))
    labels = np.zeros((19, N_AUS), dtype=bool)
    assert analyze_person(points, points, labels).unwrap_err().kind is ErrorKind.LENGTH_MISMATCH


def test_summarize_cluster_differences() -> None:
    summary = summarize_cluster_differences({"A": -2.0, "B": -1.0, "C": -3.0}).unwrap()
    assert summary.mean == -2.0
    assert summary.std == pytest.approx(1.0)
    assert summary.statistic < 0
    assert 0.0 < summary.p_value < 0.1
    assert summary.to_dict()["differences"] == {"A": -2.0, "B": -1.0, "C": -3.0}
    assert summarize_cluster_differences({"A": 1.0}).unwrap_err().kind is ErrorKind.TOO_FEW_SAMPLES
