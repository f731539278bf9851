import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from monovote.errors import FormatError, MonovoteError, ParseError, ValidationError
from monovote.geometry import Box2D, Box3D
from monovote.kitti_io import (DetectionRecord, format_calibration, parse_calibration,
                               parse_detection_line, parse_label_line, read_labels,
                               write_detection_line, write_label_line)

CAR = "Car 0.00 0 -1.58 100 150 200 250 1.5 1.6 3.9 2.0 1.65 15.0 -1.55"


class TestCalibration:
    def test_p2_fields(self):
        cam = parse_calibration("P2: 700 0 600 0 0 700 180 0 0 0 1 0")
        assert (cam.f, cam.p_x, cam.p_y) == (700, 600, 180)

    def test_translation_ignored(self):
        cam = parse_calibration("P2: 700 0 600 44.9 0 700 180 0.1 0 0 1 0.003")
        assert (cam.f, cam.p_x, cam.p_y) == (700, 600, 180)

    def test_missing_p2(self):
        with pytest.raises(FormatError):
            parse_calibration("P0: 700 0 600 0 0 700 180 0 0 0 1 0\n")

    def test_non_numeric_token_position(self):
        with pytest.raises(ParseError) as err:
            parse_calibration("P0: 1\nP2: 700 0 abc 0 0 700 180 0 0 0 1 0")
        assert err.value.line == 2
        assert err.value.column == 11

    def test_nonpositive_focal(self):
        with pytest.raises(ValidationError):
            parse_calibration("P2: -700 0 600 0 0 700 180 0 0 0 1 0")

    def test_other_camera_key(self):
        text = "P2: 700 0 600 0 0 700 180 0 0 0 1 0\nP3: 710 0 610 0 0 710 170 0 0 0 1 0"
        assert parse_calibration(text, camera="P3").f == 710

    def test_format_round_trip(self, cam):
        back = parse_calibration(format_calibration(cam))
        assert back == cam


class TestLabels:
    def test_car_row(self):
        g = parse_label_line(CAR)
        assert g.class_name == "Car"
        assert g.box3d.center == pytest.approx((2.0, 0.9, 15.0))
        assert g.box3d.dims == (1.5, 1.6, 3.9)
        assert g.box3d.yaw == -1.55
        assert g.source_location_y == 1.65

    def test_dontcare_unvalidated(self):
        g = parse_label_line("DontCare -1 -1 -10 500 160 550 190 -1 -1 -1 -1000 -1000 -1000 -10")
        assert g.is_dontcare and g.box3d is None
        assert g.box2d == Box2D(500, 160, 550, 190)

    def test_too_few_fields(self):
        with pytest.raises(FormatError):
            parse_label_line("Car 0 0 0 1 2 3 4 5 6")

    def test_negative_dimension(self):
        with pytest.raises(ValidationError):
            parse_label_line(CAR.replace(" 1.5 1.6", " -1.5 1.6"))

    def test_unknown_class_is_other(self):
        assert parse_label_line(CAR.replace("Car", "Hovercraft")).class_name == "Other"

    @pytest.mark.parametrize("field,value", [(1, "1.5"), (2, "4"), (2, "0.5")])
    def test_truncation_occlusion_ranges(self, field, value):
        toks = CAR.split()
        toks[field] = value
        with pytest.raises(ValidationError):
            parse_label_line(" ".join(toks))

    def test_label_rewrite_preserves_location_y(self):
        line = write_label_line(parse_label_line(CAR))
        assert line.split()[12] == "1.65"
        assert parse_label_line(line) == parse_label_line(CAR)

    def test_file_errors_name_path_and_line(self, tmp_path):
        p = tmp_path / "000001.txt"
        p.write_text(CAR + "\n\nCar 0 0 0 1 2 x 4 1 1 1 0 0 5 0\n")
        with pytest.raises(ParseError) as err:
            read_labels(p)
        assert err.value.line == 3 and err.value.path == p
        assert "000001.txt" in str(err.value)


def _record(y=0.75, score=0.9):
    return DetectionRecord("Car", 0.0, Box2D(10, 20, 30, 40), Box3D((0, y, 10), (1.5, 1.6, 3.9), 0.0), score)


class TestDetections:
    def test_bottom_center_written(self):
        fields = write_detection_line(_record()).split()
        assert len(fields) == 16
        assert fields[11:14] == ["0.000000", "1.500000", "10.000000"]
        assert fields[-1] == "0.900000"

    def test_score_one(self):
        assert write_detection_line(_record(score=1.0)).split()[-1] == "1.000000"

    def test_round_trip_of_label_example(self):
        g = parse_label_line(CAR)
        d = DetectionRecord(g.class_name, g.alpha, g.box2d, g.box3d, 0.5)
        back = parse_detection_line(write_detection_line(d))
        assert back.box3d.center == pytest.approx(g.box3d.center, abs=1e-4)
        assert back.box3d.dims == pytest.approx(g.box3d.dims, abs=1e-4)
        assert back.alpha == pytest.approx(g.alpha, abs=1e-4)

    def test_score_out_of_range(self):
        with pytest.raises(ValidationError):
            parse_detection_line(write_detection_line(_record()).rsplit(" ", 1)[0] + " 1.5")


@st.composite
def detection_records(draw):
    x1 = draw(st.floats(-500, 1500))
    y1 = draw(st.floats(-500, 500))
    box2d = Box2D(x1, y1, x1 + draw(st.floats(0.01, 500)), y1 + draw(st.floats(0.01, 500)))
    box3d = Box3D((draw(st.floats(-50, 50)), draw(st.floats(-5, 5)), draw(st.floats(-10, 100))),
                  (draw(st.floats(0.01, 20)), draw(st.floats(0.01, 20)), draw(st.floats(0.01, 20))),
                  draw(st.floats(-math.pi, math.pi)))
    return DetectionRecord(draw(st.sampled_from(["Car", "Pedestrian", "Cyclist", "Van"])),
                           draw(st.floats(-math.pi, math.pi)), box2d, box3d, draw(st.floats(0, 1)))


def assert_close_record(a, b, tol=1e-4):
    assert a.class_name == b.class_name
    assert abs(a.alpha - b.alpha) <= tol
    assert abs(a.score - b.score) <= tol
    for u, v in zip(a.box2d.as_array(), b.box2d.as_array()):
        assert abs(u - v) <= tol
    for u, v in zip(a.box3d.center + a.box3d.dims + (a.box3d.yaw,),
                    b.box3d.center + b.box3d.dims + (b.box3d.yaw,)):
        assert abs(u - v) <= tol


@settings(max_examples=300)
@given(detection_records())
def test_write_parse_round_trip(d):
    assert_close_record(parse_detection_line(write_detection_line(d)), d)


@settings(max_examples=500)
@given(st.one_of(st.text(), st.binary()))
def test_parsers_raise_only_typed_errors(data):
    for fn in (parse_label_line, parse_detection_line, parse_calibration):
        try:
            fn(data)
        except MonovoteError:
            pass
