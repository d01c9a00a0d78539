import numpy as np
import pytest

from facetweak.dataio.annotations import AnnotationParser, AnnotationRecord
from facetweak.errors import DataError

SAMPLE = """\
# path x y w h landmarks... attributes
img/a.png 10 20 100 100 40 50 80 50 60 70 45 90 75 90 1 0 0

img/b.png - - - - 0 0 0 0 0 0 0 0 0 0 0 1 1
img/c.png 0 0 50.5 50.5 1.5 2 3 4 5 6 7 8 9 10 0 0 0
"""


@pytest.fixture
def parser():
    return AnnotationParser()


def test_parse_text(parser):
    records = parser.parse_text(SAMPLE)
    assert [r.image_path for r in records] == ['img/a.png', 'img/b.png', 'img/c.png']
    assert records[0].box == (10.0, 20.0, 100.0, 100.0)
    assert records[0].m == 5
    assert records[0].attributes == (1, 0, 0)
    assert records[0].line_number == 2
    np.testing.assert_array_equal(records[0].landmarks[1], [80.0, 50.0])


def test_detector_failure(parser):
    records = parser.parse_text(SAMPLE)
    assert records[1].is_failure
    assert records[1].box is None
    assert not records[0].is_failure


def test_records_without_attributes(parser):
    record = parser.parse_line("x.png 0 0 10 10 1 2 3 4 5 6 7 8 9 10")
    assert record.attributes is None
    assert record.m == 5


def test_format_record(parser):
    records = parser.parse_text(SAMPLE)
    assert parser.format_record(records[0]) == \
        "img/a.png 10 20 100 100 40 50 80 50 60 70 45 90 75 90 1 0 0"
    assert parser.format_record(records[1]).startswith("img/b.png - - - - ")
    assert parser.format_record(records[2]).startswith("img/c.png 0 0 50.5 50.5 1.5 2 ")


def test_write_then_parse(parser, tmp_path):
    records = parser.parse_text(SAMPLE)
    path = parser.write(records, tmp_path / "annotations.txt")
    again = parser.parse(path)
    assert [parser.format_record(r) for r in again] == [parser.format_record(r) for r in records]


@pytest.mark.parametrize("line", [
    "x.png 0 0 10 10 1 2",
    "x.png 0 0 ten 10 1 2 3 4 5 6 7 8 9 10",
    "x.png 0 0 0 10 1 2 3 4 5 6 7 8 9 10",
    "x.png 0 0 10 10 1 2 3 4 5 6 7 8 9 nan",
    "x.png 0 0 10 10 1 2 3 4 5 6 7 8 9 10 1 2 0",
])
def test_bad_lines(parser, line):
    with pytest.raises(DataError):
        parser.parse_line(line)


def test_inconsistent_landmark_count(parser):
    text = "a.png 0 0 10 10 1 2 3 4 5 6 7 8 9 10\nb.png 0 0 10 10 1 2 3 4 5 6\n"
    with pytest.raises(DataError, match=":2:"):
        parser.parse_text(text)


def test_missing_file(parser, tmp_path):
    with pytest.raises(DataError):
        parser.parse(tmp_path / "nope.txt")


def test_is_annotation_file(parser):
    assert parser.is_annotation_file("annotations.txt")
    assert parser.is_annotation_file("Landmarks_test.lst")
    assert not parser.is_annotation_file("images.png")


def test_to_frame(parser):
    df = parser.to_frame(parser.parse_text(SAMPLE))
    assert len(df) == 3
    assert list(df['failure']) == [False, True, False]
    assert df.loc[0, 'x5'] == 75.0
    assert df.loc[0, 'male'] == 1


def test_record_defaults():
    record = AnnotationRecord('a.png', (0, 0, 1, 1), np.zeros((5, 2)))
    assert record.attributes is None
    assert record.line_number == 0
