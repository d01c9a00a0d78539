import numpy as np
import pytest

from facetweak.scoring.comparison import ModelComparator


@pytest.fixture
def comparator():
    return ModelComparator()


def test_verdicts(comparator):
    assert comparator.verdict(5.0, 4.0) == 'improved'
    assert comparator.verdict(5.0, 6.0) == 'worse'
    assert comparator.verdict(5.0, 5.0) == 'unchanged'
    assert comparator.verdict(float('nan'), 5.0) == 'no data'


def test_compare_per_cluster(comparator):
    vanilla = [4.0, 6.0, 10.0, 3.0]
    tweaked = [3.0, 5.0, 12.0, 3.0]
    results = comparator.compare(vanilla, tweaked, clusters=[0, 0, 1, 2], k=4)
    assert [r.count for r in results] == [2, 1, 1, 0]
    assert results[0].vanilla_error == 5.0
    assert results[0].tweaked_error == 4.0
    assert results[0].improvement == 1.0
    assert [r.verdict for r in results] == ['improved', 'worse', 'unchanged', 'no data']
    assert np.isnan(results[3].vanilla_error)


def test_summarize(comparator):
    results = comparator.compare([4.0, 6.0, 10.0], [3.0, 5.0, 12.0], clusters=[0, 1, 2], k=3)
    summary = comparator.summarize(results)
    assert summary['populated'] == 3
    assert summary['improved'] == 2
    assert summary['worse'] == 1
    assert summary['not_worse_share'] == pytest.approx(2 / 3)
    assert "most clusters" in summary['summary']


def test_summarize_without_faces(comparator):
    summary = comparator.summarize(comparator.compare([], [], clusters=[], k=2))
    assert summary['populated'] == 0
    assert summary['summary'] == "No cluster received evaluation faces"


def test_to_frame(comparator):
    frame = ModelComparator.to_frame(comparator.compare([1.0], [0.5], clusters=[1], k=2))
    assert list(frame.columns) == ['cluster', 'count', 'vanilla_error', 'tweaked_error', 'improvement', 'verdict']
    assert frame.loc[1, 'verdict'] == 'improved'
