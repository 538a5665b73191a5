import numpy as np
import pytest

import rwpattern as rw
from oracles import peak_label_map_oracle
from rwpattern.errors import ValidationError
from rwpattern.geometry import CoordMap
from rwpattern.peaks import (
    LABEL_CANDIDATE,
    LABEL_NONE,
    LABEL_PEAK,
    Peak,
    PeakSearchParams,
    local_max_pass,
    peak_search,
    peaks_from_map,
    peaks_to_boxes,
    threshold_pass,
)


def matrix_from(a, dt_record=0.5, dx=1.0):
    a = np.asarray(a, dtype=np.float64)
    return rw.AmplitudeMatrix(
        a=a, t0=0.0, dt_record=dt_record, x0=-0.5 * a.shape[1], dx=dx
    )


def labels_of(a, params):
    return local_max_pass(np.asarray(a, float), threshold_pass(np.asarray(a, float), params), params)


# ---------------------------------------------------------------------------
# parameters


def test_params_reject_threshold_at_or_below_background():
    with pytest.raises(ValidationError):
        PeakSearchParams(eta=0.5)
    with pytest.raises(ValidationError):
        PeakSearchParams(eta=1.0)
    assert PeakSearchParams(eta=1.7, level=2.0).threshold == pytest.approx(3.4)


def test_params_validation():
    with pytest.raises(ValidationError):
        PeakSearchParams(level=0.0)
    with pytest.raises(ValidationError):
        PeakSearchParams(radius=0)
    with pytest.raises(ValidationError):
        PeakSearchParams(box_px=0)
    with pytest.raises(ValidationError):
        PeakSearchParams(metric="manhattan")


def test_neighbourhood_offsets():
    cheb = PeakSearchParams(radius=2).offsets()
    assert len(cheb) == 24
    assert (0, 0) not in cheb
    euc = PeakSearchParams(radius=2, metric="euclidean").offsets()
    assert len(euc) == 12
    assert (2, 2) not in euc
    assert (2, 0) in euc and (1, 1) in euc


# ---------------------------------------------------------------------------
# labeling semantics


def test_threshold_is_inclusive():
    params = PeakSearchParams(eta=1.7)
    got = threshold_pass(np.array([[1.7, 1.6999999], [0.0, 2.0]]), params)
    assert got.tolist() == [[1, 0], [0, 1]]


def test_isolated_candidate_becomes_peak():
    a = np.zeros((5, 5))
    a[2, 2] = 2.0
    lab = labels_of(a, PeakSearchParams())
    assert lab[2, 2] == LABEL_PEAK
    assert (lab == LABEL_PEAK).sum() == 1


def test_equal_maxima_tie_promotes_scan_order_first():
    a = np.zeros((3, 4))
    a[1, 1] = 2.0
    a[1, 2] = 2.0
    lab = labels_of(a, PeakSearchParams(radius=2))
    assert lab[1, 1] == LABEL_PEAK
    assert lab[1, 2] == LABEL_CANDIDATE


def test_tie_across_rows_promotes_earlier_row():
    a = np.zeros((5, 5))
    a[1, 3] = 2.0
    a[2, 1] = 2.0  # within chebyshev radius 2 of (1, 3)
    lab = labels_of(a, PeakSearchParams(radius=2))
    assert lab[1, 3] == LABEL_PEAK
    assert lab[2, 1] == LABEL_CANDIDATE


def test_strictly_higher_neighbour_suppresses():
    a = np.zeros((5, 5))
    a[2, 2] = 2.0
    a[2, 3] = 2.1
    lab = labels_of(a, PeakSearchParams())
    assert lab[2, 2] == LABEL_CANDIDATE
    assert lab[2, 3] == LABEL_PEAK


def test_matrix_edges_do_not_suppress():
    a = np.zeros((4, 4))
    a[0, 0] = 1.8
    lab = labels_of(a, PeakSearchParams())
    assert lab[0, 0] == LABEL_PEAK


def test_peaks_outside_radius_coexist():
    a = np.zeros((9, 9))
    a[2, 2] = 2.0
    a[2, 7] = 2.0  # distance 5 > radius 2
    lab = labels_of(a, PeakSearchParams())
    assert lab[2, 2] == LABEL_PEAK and lab[2, 7] == LABEL_PEAK


def test_euclidean_metric_ignores_diagonal_corners():
    a = np.zeros((6, 6))
    a[2, 2] = 2.0
    a[4, 4] = 2.5  # chebyshev distance 2, euclidean sqrt(8) > 2
    cheb = labels_of(a, PeakSearchParams(radius=2))
    assert cheb[2, 2] == LABEL_CANDIDATE  # suppressed by the higher corner
    euc = labels_of(a, PeakSearchParams(radius=2, metric="euclidean"))
    assert euc[2, 2] == LABEL_PEAK
    assert euc[4, 4] == LABEL_PEAK


def test_background_stays_unlabeled():
    a = np.full((4, 4), 1.2)
    lab = labels_of(a, PeakSearchParams())
    assert (lab == LABEL_NONE).all()


def test_mismatched_mask_shape_rejected():
    params = PeakSearchParams()
    with pytest.raises(ValidationError):
        local_max_pass(np.zeros((3, 3)), np.zeros((2, 3), np.uint8), params)
    with pytest.raises(ValidationError):
        threshold_pass(np.zeros(5), params)


# ---------------------------------------------------------------------------
# oracle equivalence


def _random_matrix(rng):
    nt = int(rng.integers(5, 129))
    nx = int(rng.integers(5, 129))
    if rng.random() < 0.5:
        # discrete levels straddling the threshold produce many exact ties
        levels = np.array([0.0, 0.5, 1.0, 1.6999, 1.7, 1.75, 2.0, 2.0, 3.0])
        return levels[rng.integers(0, len(levels), (nt, nx))]
    return rng.uniform(0.0, 3.0, (nt, nx))


def test_label_maps_match_brute_force_oracle():
    rng = np.random.default_rng(41)
    for trial in range(50):
        a = _random_matrix(rng)
        params = PeakSearchParams(
            eta=float(rng.uniform(1.3, 2.0)),
            radius=int(rng.integers(1, 4)),
            metric="euclidean" if trial % 3 == 0 else "chebyshev",
        )
        got = labels_of(a, params)
        want = peak_label_map_oracle(
            a, params.eta, params.level, params.radius, params.metric
        )
        assert np.array_equal(got, want), f"trial {trial} diverged from oracle"


def test_simulated_run_matches_brute_force_oracle(gauss_run):
    params = PeakSearchParams()
    got = labels_of(gauss_run.a, params)
    want = peak_label_map_oracle(
        gauss_run.a, params.eta, params.level, params.radius, params.metric
    )
    assert np.array_equal(got, want)
    assert (got == LABEL_PEAK).sum() > 5  # the run develops a real cascade


def test_raising_eta_only_removes_peaks(gauss_run):
    base = {(p.i, p.j) for p in peak_search(gauss_run, PeakSearchParams(eta=1.7)).peaks}
    tighter = {(p.i, p.j) for p in peak_search(gauss_run, PeakSearchParams(eta=2.5)).peaks}
    assert tighter <= base
    assert 0 < len(tighter) < len(base)


def test_masked_rerun_is_idempotent(gauss_run):
    params = PeakSearchParams()
    result = peak_search(gauss_run, params)
    masked = gauss_run.a * (result.label_map > 0)
    again = labels_of(masked, params)
    assert np.array_equal(
        np.argwhere(again == LABEL_PEAK), np.argwhere(result.label_map == LABEL_PEAK)
    )


# ---------------------------------------------------------------------------
# peak records and boxes


def test_peak_records_carry_physical_coordinates():
    a = np.zeros((5, 8))
    a[3, 6] = 2.2
    m = matrix_from(a, dt_record=0.25, dx=0.5)
    peaks = peak_search(m).peaks
    assert len(peaks) == 1
    pk = peaks[0]
    assert (pk.i, pk.j) == (3, 6)
    assert pk.t == pytest.approx(0.75)
    assert pk.x == pytest.approx(-4.0 + 0.5 * 6)
    assert pk.amplitude == pytest.approx(2.2)


def test_peaks_listed_in_row_major_order(gauss_run):
    peaks = peak_search(gauss_run).peaks
    keys = [(p.i, p.j) for p in peaks]
    assert keys == sorted(keys)


def test_boxes_are_fixed_size_and_centred():
    a = np.zeros((16, 16))
    a[8, 8] = 2.0
    m = matrix_from(a)
    spec = CoordMap.for_matrix(m, 512, 512)
    result = peak_search(m, PeakSearchParams(box_px=20), spec)
    box = result.boxes[0]
    px, py = spec.to_pixel(8, 8)
    assert (box.cx, box.cy) == pytest.approx((px, py))
    assert (box.w, box.h) == (20, 20)


def test_corner_boxes_are_clipped_to_the_image():
    a = np.zeros((16, 16))
    a[0, 0] = 2.0
    a[15, 15] = 2.0
    m = matrix_from(a)
    spec = CoordMap.for_matrix(m, 64, 64)  # 4 px per cell: corner boxes clip
    boxes = peak_search(m, PeakSearchParams(box_px=20), spec).boxes
    for box in boxes:
        x_min, y_min, x_max, y_max = box.corners
        assert 0 <= x_min < x_max <= 64
        assert 0 <= y_min < y_max <= 64
        assert box.area < 400


def test_box_construction_rejects_map_outside_image():
    a = np.zeros((16, 16))
    a[8, 8] = 2.0
    m = matrix_from(a)
    bad = CoordMap(
        scale_x=8, scale_y=8, offset_x=900.0, offset_y=4.0, image_w=64, image_h=64,
    )
    with pytest.raises(ValidationError):
        peaks_to_boxes(peak_search(m).peaks, bad, m=m)


def test_peaks_from_map_shape_check(gauss_run):
    with pytest.raises(ValidationError):
        peaks_from_map(gauss_run, np.zeros((2, 2), np.uint8))


def test_peak_dataclass_is_frozen():
    pk = Peak(i=0, j=0, t=0.0, x=0.0, amplitude=2.0)
    with pytest.raises(AttributeError):
        pk.i = 1


# ---------------------------------------------------------------------------
# overlap suppression


def detection_with(centers_amps):
    peaks, boxes = [], []
    for k, (cx, amp) in enumerate(centers_amps):
        peaks.append(Peak(i=k, j=k, t=float(k), x=float(cx), amplitude=amp))
        boxes.append(
            rw.BoundingBox(cx=float(cx), cy=0.0, w=10.0, h=10.0, t=float(k), x=float(cx), amplitude=amp)
        )
    return rw.PeakSearchResult(label_map=np.zeros((2, 2), np.uint8), peaks=peaks, boxes=boxes)


def test_dedupe_keeps_brightest_of_identical_boxes():
    det = detection_with([(0.0, 1.9), (0.0, 3.0), (0.0, 2.4)])
    out = rw.dedupe_detection(det, iou_threshold=0.5)
    assert len(out.boxes) == 1
    assert out.boxes[0].amplitude == 3.0
    assert out.peaks[0].amplitude == 3.0
    assert out.label_map is det.label_map


def test_dedupe_chain_is_greedy_by_brightness():
    # 10-px boxes 5 px apart overlap at IoU 1/3; A(0) and C(10) are disjoint
    det = detection_with([(0.0, 3.0), (5.0, 1.9), (10.0, 2.4)])
    out = rw.dedupe_detection(det, iou_threshold=0.3)
    assert [b.cx for b in out.boxes] == [0.0, 10.0]  # middle box suppressed
    assert [p.x for p in out.peaks] == [0.0, 10.0]   # lists stay parallel
    # a looser threshold keeps all three
    out_loose = rw.dedupe_detection(det, iou_threshold=0.4)
    assert len(out_loose.boxes) == 3


def test_dedupe_preserves_original_order():
    det = detection_with([(0.0, 1.9), (30.0, 3.0), (60.0, 2.4)])
    out = rw.dedupe_detection(det, iou_threshold=0.5)
    assert [b.cx for b in out.boxes] == [0.0, 30.0, 60.0]


def test_dedupe_amplitude_tie_keeps_earlier_index():
    det = detection_with([(0.0, 2.0), (1.0, 2.0)])
    out = rw.dedupe_detection(det, iou_threshold=0.3)
    assert len(out.boxes) == 1
    assert out.boxes[0].cx == 0.0


def test_dedupe_threshold_validation():
    det = detection_with([(0.0, 2.0)])
    for bad in (0.0, -0.5, 1.5):
        with pytest.raises(ValidationError):
            rw.dedupe_detection(det, iou_threshold=bad)
    # threshold 1.0 is legal and still removes exact duplicates
    dup = detection_with([(0.0, 2.0), (0.0, 1.9)])
    assert len(rw.dedupe_detection(dup, iou_threshold=1.0).boxes) == 1


def test_dedupe_rejects_mismatched_lists():
    det = detection_with([(0.0, 2.0), (30.0, 1.9)])
    det.peaks = det.peaks[:1]
    with pytest.raises(ValidationError):
        rw.dedupe_detection(det, iou_threshold=0.5)
