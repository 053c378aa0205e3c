"""Tests for MSE / angular error / CIEDE2000 and aggregation."""

import numpy as np
import pytest

from wbstudio.metrics import (
    MetricReport,
    aggregate,
    ciede2000_lab,
    delta_e_2000,
    mae,
    mse,
    srgb_to_lab,
)

# The standard published CIEDE2000 verification pairs (Sharma, Wu & Dalal's
# implementation-notes dataset): (L1, a1, b1, L2, a2, b2, expected dE00).
# These exercise every branch of the hue arithmetic.
CIEDE2000_CASES = [
    (50.0000, 2.6772, -79.7751, 50.0000, 0.0000, -82.7485, 2.0425),
    (50.0000, 3.1571, -77.2803, 50.0000, 0.0000, -82.7485, 2.8615),
    (50.0000, 2.8361, -74.0200, 50.0000, 0.0000, -82.7485, 3.4412),
    (50.0000, -1.3802, -84.2814, 50.0000, 0.0000, -82.7485, 1.0000),
    (50.0000, -1.1848, -84.8006, 50.0000, 0.0000, -82.7485, 1.0000),
    (50.0000, -0.9009, -85.5211, 50.0000, 0.0000, -82.7485, 1.0000),
    (50.0000, 0.0000, 0.0000, 50.0000, -1.0000, 2.0000, 2.3669),
    (50.0000, -1.0000, 2.0000, 50.0000, 0.0000, 0.0000, 2.3669),
    (50.0000, 2.4900, -0.0010, 50.0000, -2.4900, 0.0009, 7.1792),
    (50.0000, 2.4900, -0.0010, 50.0000, -2.4900, 0.0010, 7.1792),
    (50.0000, 2.4900, -0.0010, 50.0000, -2.4900, 0.0011, 7.2195),
    (50.0000, 2.4900, -0.0010, 50.0000, -2.4900, 0.0012, 7.2195),
    (50.0000, -0.0010, 2.4900, 50.0000, 0.0009, -2.4900, 4.8045),
    (50.0000, -0.0010, 2.4900, 50.0000, 0.0010, -2.4900, 4.8045),
    (50.0000, -0.0010, 2.4900, 50.0000, 0.0011, -2.4900, 4.7461),
    (50.0000, 2.5000, 0.0000, 50.0000, 0.0000, -2.5000, 4.3065),
    (50.0000, 2.5000, 0.0000, 73.0000, 25.0000, -18.0000, 27.1492),
    (50.0000, 2.5000, 0.0000, 61.0000, -5.0000, 29.0000, 22.8977),
    (50.0000, 2.5000, 0.0000, 56.0000, -27.0000, -3.0000, 31.9030),
    (50.0000, 2.5000, 0.0000, 58.0000, 24.0000, 15.0000, 19.4535),
    (50.0000, 2.5000, 0.0000, 50.0000, 3.1736, 0.5854, 1.0000),
    (50.0000, 2.5000, 0.0000, 50.0000, 3.2972, 0.0000, 1.0000),
    (50.0000, 2.5000, 0.0000, 50.0000, 1.8634, 0.5757, 1.0000),
    (50.0000, 2.5000, 0.0000, 50.0000, 3.2592, 0.3350, 1.0000),
    (60.2574, -34.0099, 36.2677, 60.4626, -34.1751, 39.4387, 1.2644),
    (63.0109, -31.0961, -5.8663, 62.8187, -29.7946, -4.0864, 1.2630),
    (61.2901, 3.7196, -5.3901, 61.4292, 2.2480, -4.9620, 1.8731),
    (35.0831, -44.1164, 3.7933, 35.0232, -40.0716, 1.5901, 1.8645),
    (22.7233, 20.0904, -46.6940, 23.0331, 14.9730, -42.5619, 2.0373),
    (36.4612, 47.8580, 18.3852, 36.2715, 50.5065, 21.2231, 1.4146),
    (90.8027, -2.0831, 1.4410, 91.1528, -1.6435, 0.0447, 1.4441),
    (90.9257, -0.5406, -0.9208, 88.6381, -0.8985, -0.7239, 1.5381),
    (6.7747, -0.2908, -2.4247, 5.8714, -0.0985, -2.2286, 0.6377),
    (2.0776, 0.0795, -1.1350, 0.9033, -0.0636, -0.5514, 0.9082),
]


def const_image(rgb, h=4, w=4):
    return np.tile(np.asarray(rgb, dtype=np.float32), (h, w, 1))


class TestMse:
    def test_zero_when_equal(self):
        rng = np.random.default_rng(0)
        a = rng.random((5, 7, 3), dtype=np.float32)
        assert mse(a, a.copy()) == 0.0

    def test_one_8bit_step(self):
        rng = np.random.default_rng(1)
        a = rng.uniform(0.0, 250.0 / 255.0, (6, 6, 3)).astype(np.float32)
        b = a + np.float32(1.0 / 255.0)
        assert mse(a, b) == pytest.approx(1.0, abs=1e-4)

    def test_matches_direct_summation_oracle(self):
        rng = np.random.default_rng(2)
        a = rng.random((8, 9, 3))
        b = rng.random((8, 9, 3))
        total = 0.0
        for i in range(8):
            for j in range(9):
                for c in range(3):
                    total += ((a[i, j, c] - b[i, j, c]) * 255.0) ** 2
        assert mse(a, b) == pytest.approx(total / (8 * 9 * 3), rel=1e-6)

    def test_dims_mismatch(self):
        with pytest.raises(ValueError):
            mse(np.zeros((2, 2, 3)), np.zeros((2, 3, 3)))


class TestMae:
    def test_identical_nonzero_is_zero(self):
        rng = np.random.default_rng(3)
        a = rng.uniform(0.1, 1.0, (4, 4, 3))
        assert mae(a, a.copy()) == pytest.approx(0.0, abs=1e-5)

    def test_orthogonal_constants_90_degrees(self):
        assert mae(const_image([1, 0, 0]), const_image([0, 1, 0])) == pytest.approx(90.0, abs=1e-6)

    def test_known_45_degrees(self):
        assert mae(const_image([1, 1, 0]), const_image([1, 0, 0])) == pytest.approx(45.0, abs=1e-6)

    def test_scale_invariance(self):
        rng = np.random.default_rng(4)
        a = rng.uniform(0.1, 0.5, (5, 5, 3))
        b = rng.uniform(0.1, 0.5, (5, 5, 3))
        assert mae(a * 1.7, b) == pytest.approx(mae(a, b), abs=1e-8)

    def test_black_pixels_contribute_zero(self):
        a = const_image([1, 0, 0])
        b = const_image([0, 1, 0])
        a[0, 0] = 0.0  # below norm threshold: dropped from the average
        expect = 90.0
        assert mae(a, b) == pytest.approx(expect, abs=1e-6)


class TestCiede2000:
    @pytest.mark.parametrize("case", CIEDE2000_CASES)
    def test_published_pairs(self, case):
        l1, a1, b1, l2, a2, b2, expect = case
        got = float(ciede2000_lab(np.array([l1, a1, b1]), np.array([l2, a2, b2])))
        assert got == pytest.approx(expect, abs=1e-4)

    def test_zero_when_equal(self):
        rng = np.random.default_rng(5)
        img = rng.random((4, 4, 3))
        assert delta_e_2000(img, img.copy()) == pytest.approx(0.0, abs=1e-9)

    def test_symmetry(self):
        rng = np.random.default_rng(6)
        for _ in range(5):
            a = rng.random((3, 3, 3))
            b = rng.random((3, 3, 3))
            assert delta_e_2000(a, b) == pytest.approx(delta_e_2000(b, a), abs=1e-10)

    def test_srgb_to_lab_white_and_black(self):
        lab_white = srgb_to_lab(np.array([1.0, 1.0, 1.0]))
        assert lab_white[0] == pytest.approx(100.0, abs=0.01)
        assert abs(lab_white[1]) < 0.01 and abs(lab_white[2]) < 0.01
        lab_black = srgb_to_lab(np.array([0.0, 0.0, 0.0]))
        assert np.allclose(lab_black, 0.0, atol=1e-9)


class TestAggregate:
    def test_small_example(self):
        agg = aggregate([1.0, 2.0, 3.0, 4.0])
        assert agg["mean"] == pytest.approx(2.5)
        assert agg["q2"] == pytest.approx(2.5)

    def test_single_value(self):
        agg = aggregate([7.5])
        assert all(agg[k] == pytest.approx(7.5) for k in ("mean", "q1", "q2", "q3"))

    def test_matches_sort_based_oracle(self):
        rng = np.random.default_rng(7)
        vals = rng.random(1000) * 10.0
        agg = aggregate(vals)

        # oracle: linear interpolation on the sorted sample at (n-1)*q
        s = np.sort(vals)

        def quantile(q):
            pos = (len(s) - 1) * q
            lo = int(np.floor(pos))
            hi = int(np.ceil(pos))
            return s[lo] + (s[hi] - s[lo]) * (pos - lo)

        assert agg["q1"] == pytest.approx(quantile(0.25), abs=1e-12)
        assert agg["q2"] == pytest.approx(quantile(0.50), abs=1e-12)
        assert agg["q3"] == pytest.approx(quantile(0.75), abs=1e-12)
        assert agg["mean"] == pytest.approx(vals.mean(), rel=1e-12)
        assert agg["q1"] <= agg["q2"] <= agg["q3"]

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            aggregate([])


class TestReport:
    def test_round_trip_and_layout(self, tmp_path):
        rows = [("img0:awb", 10.0, 1.0, 0.5), ("img1:awb", 20.0, 3.0, 1.5)]
        report = MetricReport.from_rows(rows)
        assert report.aggregate["mse"]["mean"] == pytest.approx(15.0)
        assert report.aggregate["mae"]["q2"] == pytest.approx(2.0)
        path = tmp_path / "report.csv"
        report.write_csv(str(path))
        text = path.read_text()
        assert "img0:awb" in text and "deltaE2000" in text and "q3" in text
        data = __import__("json").loads(report.to_json())
        assert len(data["per_image"]) == 2
