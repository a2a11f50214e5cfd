"""Annotation text formats, cropping, dataset indexing, annotation runs."""

import numpy as np
import pytest

from scatterkit.annotio import (DatasetIndex, InstanceAnnotation, crop_chip,
                                format_annotation, index_dataset,
                                parse_annotation, parse_predictions,
                                parse_truth, run_dog, run_skaa,
                                write_annotation, write_truth)
from scatterkit.ascmodel import FrequencyGrid, Scatterer, synth_target
from scatterkit.chipio import write_chip
from scatterkit.errors import BadKeypointCount, BoxOutsideImage, MalformedLine
from scatterkit.keypoints import KeypointSet
from scatterkit.metrics import OrientedBox
from scatterkit.raster import ComplexRaster
from scatterkit.spectral import taylor_window_2d

BOX_LINE = "0 0 4 0 4 4 0 4 tank 0"


def test_parse_minimal_line(tmp_path):
    p = tmp_path / "a.txt"
    p.write_text(BOX_LINE + "\n")
    (ann,), = [parse_annotation(p)]
    assert ann.class_name == "tank"
    assert ann.difficulty == 0
    assert ann.keypoints is None
    np.testing.assert_array_equal(ann.box.corners,
                                  [[0, 0], [4, 0], [4, 4], [0, 4]])


def test_parse_line_with_nine_keypoints(tmp_path):
    coords = " ".join(f"{v}.5 {v}.5" for v in range(1, 10))
    p = tmp_path / "a.txt"
    p.write_text("0 0 20 0 20 20 0 20 ship 1 kp " + coords + "\n")
    (ann,) = parse_annotation(p)
    assert ann.difficulty == 1
    assert ann.keypoints.k == 9
    assert ann.keypoints.points[0] == (1.5, 1.5)
    assert ann.keypoints.points[-1] == (9.5, 9.5)


def test_parse_odd_keypoint_count_rejected(tmp_path):
    coords = " ".join(str(v) for v in range(17))
    p = tmp_path / "a.txt"
    p.write_text("0 0 20 0 20 20 0 20 ship 0 kp " + coords + "\n")
    with pytest.raises(BadKeypointCount) as exc:
        parse_annotation(p)
    assert exc.value.line_no == 1
    assert "17" in str(exc.value)


def test_parse_empty_keypoint_list_rejected(tmp_path):
    p = tmp_path / "a.txt"
    p.write_text("0 0 20 0 20 20 0 20 ship 0 kp\n")
    with pytest.raises(BadKeypointCount):
        parse_annotation(p)


def test_parse_unknown_trailing_token_rejected(tmp_path):
    p = tmp_path / "a.txt"
    p.write_text("0 0 20 0 20 20 0 20 ship 0 xp 1 2\n")
    with pytest.raises(MalformedLine) as exc:
        parse_annotation(p)
    assert "xp" in str(exc.value)


def test_parse_reports_one_based_line_numbers(tmp_path):
    p = tmp_path / "a.txt"
    p.write_text(BOX_LINE + "\n\n" + "0 0 4 0 4 4 0 4 tank nope\n")
    with pytest.raises(MalformedLine) as exc:
        parse_annotation(p)
    assert exc.value.line_no == 3
    assert str(exc.value).startswith("line 3:")


def test_parse_rejects_bad_tokens(tmp_path):
    p = tmp_path / "a.txt"
    for bad in ("0 0 4 0 4 4 0 tank 0",          # 9 tokens
                "0 0 4 0 4 4 0 spam tank 0",     # corner not a float
                "0 0 4 0 4 4 0 4 tank 2",        # difficulty out of range
                "0 0 0 0 0 0 0 0 tank 0"):       # degenerate box
        p.write_text(bad + "\n")
        with pytest.raises(MalformedLine):
            parse_annotation(p)


def test_parse_rejects_non_ascii(tmp_path):
    p = tmp_path / "a.txt"
    p.write_bytes("0 0 4 0 4 4 0 4 tank 0 \xff\n".encode("latin-1"))
    with pytest.raises(MalformedLine):
        parse_annotation(p)


def test_parse_keypoint_far_outside_box_rejected(tmp_path):
    p = tmp_path / "a.txt"
    p.write_text("0 0 4 0 4 4 0 4 tank 0 kp 50 50\n")
    with pytest.raises(MalformedLine):
        parse_annotation(p)


def test_annotation_round_trip_exact(tmp_path):
    annots = [
        InstanceAnnotation(
            box=OrientedBox.from_rect(1.25, 2.5, 21.25, 30.5),
            class_name="tank", difficulty=0,
            keypoints=KeypointSet(points=((3.5, 4.25), (10.0, 11.0)), k=2)),
        InstanceAnnotation(
            box=OrientedBox.from_rect(5.0, 5.0, 9.0, 9.0),
            class_name="ship", difficulty=1),
    ]
    path = tmp_path / "round.txt"
    write_annotation(annots, path)
    back = parse_annotation(path)
    assert len(back) == 2
    np.testing.assert_array_equal(back[0].box.corners, annots[0].box.corners)
    assert back[0].keypoints.points == annots[0].keypoints.points
    assert back[1].keypoints is None
    assert format_annotation(back) == format_annotation(annots)


def test_annotation_formats_six_significant_digits():
    ann = InstanceAnnotation(
        box=OrientedBox.from_rect(0.123456789, 0, 10, 10), class_name="t")
    assert "0.123457" in format_annotation([ann])


def test_truth_round_trip(tmp_path):
    truths = [Scatterer(1.5, 2.25, 0.75), Scatterer(10.0, 20.0, 1.0)]
    path = tmp_path / "truth.txt"
    write_truth(truths, path)
    assert parse_truth(path) == truths
    path.write_text("1 2\n")
    with pytest.raises(MalformedLine):
        parse_truth(path)


def test_parse_predictions(tmp_path):
    p = tmp_path / "preds.txt"
    p.write_text(
        "img0 0 0.9 0 0 4 0 4 4 0 4\n"
        "img1 1 0.5 10 10 14 10 14 14 10 14\n"
        "img0 0 0.4 1 1 5 1 5 5 1 5\n")
    preds = parse_predictions(p)
    assert sorted(preds) == ["img0", "img1"]
    assert [d.score for d in preds["img0"]] == [0.9, 0.4]
    assert preds["img1"][0].class_id == 1
    p.write_text("img0 0 0.9 0 0 4 0 4 4 0\n")  # 10 tokens
    with pytest.raises(MalformedLine):
        parse_predictions(p)
    p.write_text("img0 0 1.9 0 0 4 0 4 4 0 4\n")  # score out of range
    with pytest.raises(MalformedLine):
        parse_predictions(p)


def _image64():
    rng = np.random.Generator(np.random.PCG64(80))
    return ComplexRaster(rng.normal(size=(64, 64)) + 1j * rng.normal(size=(64, 64)))


def test_crop_axis_aligned_box():
    img = _image64()
    chip, origin = crop_chip(img, OrientedBox.from_rect(10, 20, 30, 40))
    assert origin == (10, 20)
    assert (chip.height, chip.width) == (20, 20)
    np.testing.assert_array_equal(chip.samples, img.samples[20:40, 10:30])


def test_crop_rotated_box_covers_aabb():
    img = _image64()
    c, s = np.cos(np.pi / 4), np.sin(np.pi / 4)
    half = np.array([[-8, -8], [8, -8], [8, 8], [-8, 8]], dtype=float)
    corners = half @ np.array([[c, s], [-s, c]]) + [32, 32]
    chip, origin = crop_chip(img, OrientedBox(corners))
    x0, y0 = origin
    assert x0 == int(np.floor(corners[:, 0].min()))
    assert y0 == int(np.floor(corners[:, 1].min()))
    assert chip.width == int(np.ceil(corners[:, 0].max())) - x0
    np.testing.assert_array_equal(
        chip.samples, img.samples[y0:y0 + chip.height, x0:x0 + chip.width])


def test_crop_clamps_partial_overlap():
    img = _image64()
    chip, origin = crop_chip(img, OrientedBox.from_rect(-10, -5, 10, 15))
    assert origin == (0, 0)
    assert (chip.height, chip.width) == (15, 10)


def test_crop_rejects_box_outside_image():
    img = _image64()
    with pytest.raises(BoxOutsideImage):
        crop_chip(img, OrientedBox.from_rect(100, 100, 120, 120))
    with pytest.raises(BoxOutsideImage):
        crop_chip(img, OrientedBox.from_rect(-20, -20, -5, -5))


def test_index_dataset_pairs_and_validates(tmp_path):
    images = tmp_path / "images"
    annots = tmp_path / "annots"
    images.mkdir()
    annots.mkdir()
    write_chip(_image64(), images / "b.csar")
    write_chip(_image64(), images / "a.csar")
    (images / "ignored.bin").write_bytes(b"xx")
    for stem in ("a", "b"):
        (annots / f"{stem}.txt").write_text(BOX_LINE + "\n")
    index = index_dataset(images, annots)
    assert [img.stem for img, _ in index.entries] == ["a", "b"]
    with pytest.raises(FileNotFoundError):
        index_dataset(tmp_path / "nope", annots)
    (images / "c.csar").write_bytes(b"")
    with pytest.raises(FileNotFoundError):
        index_dataset(images, annots)  # c.txt missing


def _mini_dataset(tmp_path, n_chips=2, all_zero_last=False):
    images = tmp_path / "images"
    annots = tmp_path / "annots"
    images.mkdir()
    annots.mkdir()
    grid = FrequencyGrid(48, 48)
    window = taylor_window_2d(48, 48)
    for i in range(n_chips):
        stem = f"chip_{i:05d}"
        if all_zero_last and i == n_chips - 1:
            write_chip(ComplexRaster(np.zeros((48, 48), dtype=np.complex128)),
                       images / f"{stem}.csar")
            box = OrientedBox.from_rect(8, 8, 40, 40)
            ann = InstanceAnnotation(box=box, class_name="scatterer")
        else:
            chip = synth_target(4, grid, window,
                                np.random.Generator(np.random.PCG64(100 + i)),
                                min_separation=6.0)
            write_chip(chip.image, images / f"{stem}.csar")
            ann = InstanceAnnotation(box=chip.box, class_name=chip.class_name)
        write_annotation([ann], annots / f"{stem}.txt")
    return index_dataset(images, annots)


def test_run_skaa_extends_annotations(tmp_path):
    index = _mini_dataset(tmp_path)
    out = tmp_path / "out"
    summary = run_skaa(index, out, master_seed=0)
    assert summary.instances == 2
    assert summary.failures == 0
    assert len(summary.instance_ms) == 2
    for _, ann_path in index.entries:
        (ann,) = parse_annotation(out / ann_path.name)
        assert ann.keypoints is not None and ann.keypoints.k == 9
        c = ann.box.corners
        for x, y in ann.keypoints.points:
            assert c[:, 0].min() - 2 <= x <= c[:, 0].max() + 2
            assert c[:, 1].min() - 2 <= y <= c[:, 1].max() + 2


def test_run_skaa_reruns_byte_identical(tmp_path):
    index = _mini_dataset(tmp_path)
    out1, out2, out4 = (tmp_path / n for n in ("o1", "o2", "o4"))
    run_skaa(index, out1, master_seed=0)
    run_skaa(index, out2, master_seed=0)
    run_skaa(index, out4, master_seed=0, threads=4)
    for _, ann_path in index.entries:
        ref = (out1 / ann_path.name).read_bytes()
        assert (out2 / ann_path.name).read_bytes() == ref
        assert (out4 / ann_path.name).read_bytes() == ref


def test_run_skaa_replaces_existing_keypoints(tmp_path):
    index = _mini_dataset(tmp_path)
    out1 = tmp_path / "o1"
    run_skaa(index, out1, master_seed=0)
    index2 = index_dataset(tmp_path / "images", out1)
    out2 = tmp_path / "o2"
    run_skaa(index2, out2, master_seed=0)
    for _, ann_path in index.entries:
        assert (out2 / ann_path.name).read_bytes() == \
            (out1 / ann_path.name).read_bytes()


def test_run_skaa_keeps_degenerate_instances(tmp_path, caplog):
    index = _mini_dataset(tmp_path, n_chips=2, all_zero_last=True)
    out = tmp_path / "out"
    summary = run_skaa(index, out, master_seed=0)
    assert summary.failures == 1
    zero_ann = parse_annotation(out / "chip_00001.txt")
    assert zero_ann[0].keypoints is None  # original line kept verbatim


def test_run_dog_baseline(tmp_path):
    index = _mini_dataset(tmp_path)
    out1, out2 = tmp_path / "d1", tmp_path / "d2"
    s = run_dog(index, out1, master_seed=0)
    run_dog(index, out2, master_seed=0)
    assert s.instances == 2 and s.failures == 0
    for _, ann_path in index.entries:
        (ann,) = parse_annotation(out1 / ann_path.name)
        assert ann.keypoints is not None and ann.keypoints.k == 9
        assert (out2 / ann_path.name).read_bytes() == \
            (out1 / ann_path.name).read_bytes()


def test_dataset_index_requires_existing_files(tmp_path):
    img = tmp_path / "x.csar"
    ann = tmp_path / "x.txt"
    with pytest.raises(FileNotFoundError):
        DatasetIndex(entries=((img, ann),), root=tmp_path)
