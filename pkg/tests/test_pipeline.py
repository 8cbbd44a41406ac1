import json
import shutil

import numpy as np
import pytest
from PIL import Image

from gradevents import GrayImage, build_threshold_matrix
from gradevents.cli import EXIT_IO, EXIT_OK, EXIT_VALIDATION, main
from gradevents.codec import decode_sequence
from gradevents.metrics import MetricsReport, build_report, event_probability
from gradevents.pipeline import (FRAME_PERIOD_US, RunConfig, encode_frames, ingest_frames, load_frame,
                                 load_stream)
from gradevents.reconstruct import ReconstructionParams, reconstruct_stream

from conftest import DEFAULT_THRESHOLDS, natural_image_paths


def write_png(path, arr):
    Image.fromarray(np.asarray(arr, dtype=np.uint8), mode="L").save(path)


@pytest.fixture
def frames_dir(tmp_path):
    d = tmp_path / "frames"
    d.mkdir()
    for i, p in enumerate(natural_image_paths()[:3]):
        shutil.copy(p, d / f"f{i:03d}.png")
    return d


@pytest.fixture
def static_dir(tmp_path):
    d = tmp_path / "static"
    d.mkdir()
    src = natural_image_paths()[0]
    for i in range(4):
        shutil.copy(src, d / f"s{i:03d}.png")
    return d


# -- ingest -----------------------------------------------------------------

def test_ingest_three_frames(frames_dir):
    frames = ingest_frames(frames_dir)
    assert len(frames) == 3
    ts = [t for t, _ in frames]
    assert ts == [0, FRAME_PERIOD_US, 2 * FRAME_PERIOD_US]
    assert all(img.shape == (180, 240) for _, img in frames)


def test_ingest_normalises_255(tmp_path):
    write_png(tmp_path / "a.png", np.full((4, 4), 255))
    img = ingest_frames(tmp_path)[0][1]
    assert img.data.max() == 1.0


def test_ingest_sidecar_timestamps(frames_dir, tmp_path):
    ts = tmp_path / "ts.txt"
    ts.write_text("10\n20\n\n35\n")
    assert [t for t, _ in ingest_frames(frames_dir, ts)] == [10, 20, 35]
    ts.write_text("10\n20\n")
    with pytest.raises(ValueError, match="2 timestamps for 3 frames"):
        ingest_frames(frames_dir, ts)
    ts.write_text("10\n5\n1\n")
    with pytest.raises(ValueError, match="non-decreasing"):
        ingest_frames(frames_dir, ts)


def test_ingest_mixed_dimensions(frames_dir):
    write_png(frames_dir / "f999.png", np.zeros((10, 10)))
    with pytest.raises(ValueError, match="f999.png"):
        ingest_frames(frames_dir)


def test_ingest_rejects_colour(tmp_path):
    Image.new("RGB", (4, 4)).save(tmp_path / "c.png")
    with pytest.raises(ValueError, match="mode"):
        ingest_frames(tmp_path)


def test_ingest_unreadable(tmp_path):
    (tmp_path / "broken.png").write_bytes(b"not a png")
    with pytest.raises(OSError, match="broken.png"):
        ingest_frames(tmp_path)


def test_ingest_empty_and_missing(tmp_path):
    with pytest.raises(ValueError, match="no frames"):
        ingest_frames(tmp_path)
    with pytest.raises(FileNotFoundError):
        ingest_frames(tmp_path / "nope")


def test_run_config_validation():
    assert RunConfig().threshold_values == DEFAULT_THRESHOLDS
    with pytest.raises(ValueError):
        RunConfig(thresholds=())
    with pytest.raises(ValueError):
        RunConfig(alpha=2.5)
    with pytest.raises(ValueError):
        RunConfig(iterations=0)
    with pytest.raises(ValueError):
        RunConfig(scale=-1)


# -- CLI --------------------------------------------------------------------

def test_encode_decode_matches_library(frames_dir, tmp_path):
    stream = tmp_path / "clip.gev"
    assert main(["encode", "--input", str(frames_dir), "--output", str(stream)]) == EXIT_OK
    header, events = load_stream(stream)
    assert (header.width, header.height, header.compressed) == (240, 180, False)
    frames = ingest_frames(frames_dir)
    _, expected = encode_frames(frames, build_threshold_matrix(240, 180, DEFAULT_THRESHOLDS))
    assert events == expected

    out = tmp_path / "tern"
    assert main(["decode", "--input", str(stream), "--output", str(out)]) == EXIT_OK
    for i, tern in enumerate(decode_sequence(events)):
        dump = np.load(out / f"frame_{i:06d}.npy")
        np.testing.assert_array_equal(dump[0], tern.tx)
        np.testing.assert_array_equal(dump[1], tern.ty)
    assert (out / "timestamps.txt").read_text().split() == ["0", "33333", "66666"]


def test_pipeline_composability(frames_dir, tmp_path):
    stream = tmp_path / "clip.gev"
    recon = tmp_path / "recon"
    report = tmp_path / "report.jsonl"
    assert main(["encode", "--input", str(frames_dir), "--output", str(stream), "--rc"]) == EXIT_OK
    assert main(["reconstruct", "--input", str(stream), "--output", str(recon),
                 "--gt", str(frames_dir), "--rc"]) == EXIT_OK
    assert main(["eval", "--input", str(recon), "--gt", str(frames_dir), "--events", str(stream),
                 "--output", str(report)]) == EXIT_OK

    gt = [img for _, img in ingest_frames(frames_dir)]
    theta = build_threshold_matrix(240, 180, DEFAULT_THRESHOLDS)
    header, events = encode_frames(ingest_frames(frames_dir), theta, compressed=True)
    lib = list(reconstruct_stream(header, events, theta, ReconstructionParams(),
                                  mean_bias=[float(g.data.mean()) for g in gt]))
    cli = [load_frame(recon / f"frame_{i:06d}.png") for i in range(3)]
    for a, b in zip(cli, lib):
        np.testing.assert_array_equal(a.to_uint8(), b.to_uint8())
    expected = build_report(gt, [GrayImage.from_uint8(x.to_uint8()) for x in lib],
                            [event_probability(e) for e in events])
    with open(report) as fh:
        got = MetricsReport.read(fh)
    assert got.mse == expected.mse and got.ssim == expected.ssim
    assert got.event_probability == expected.event_probability


def test_eval_directory_against_itself(frames_dir, tmp_path):
    report = tmp_path / "r.jsonl"
    assert main(["eval", "--input", str(frames_dir), "--gt", str(frames_dir), "--output", str(report)]) == 0
    lines = [json.loads(l) for l in report.read_text().splitlines()]
    assert [r["mse"] for r in lines[:-1]] == [0.0, 0.0, 0.0]
    assert all(r["ssim"] == pytest.approx(1.0) for r in lines[:-1])
    assert lines[-1]["summary"]["frames"] == 3


def test_stats_static_sequence(static_dir, tmp_path):
    stream = tmp_path / "s.gev"
    stats = tmp_path / "stats.json"
    assert main(["encode", "--input", str(static_dir), "--output", str(stream)]) == 0
    assert main(["stats", "--input", str(stream), "--output", str(stats)]) == 0
    data = json.loads(stats.read_text())
    p = data["probabilities"]
    assert len(p) == 4 and p[0] > 0
    assert p[1:] == [0.0, 0.0, 0.0]


def test_reconstruct_fixed_bias(frames_dir, tmp_path):
    stream = tmp_path / "clip.gev"
    out = tmp_path / "recon"
    main(["encode", "--input", str(frames_dir), "--output", str(stream)])
    assert main(["reconstruct", "--input", str(stream), "--output", str(out), "--mean-bias", "0.4",
                 "--warm-start", "--iters", "20"]) == 0
    imgs = ingest_frames(out, out / "timestamps.txt")
    assert len(imgs) == 3 and imgs[2][0] == 66666


def test_encode_with_timestamps(frames_dir, tmp_path):
    ts = tmp_path / "ts.txt"
    ts.write_text("5\n6\n9\n")
    stream = tmp_path / "c.gev"
    assert main(["encode", "--input", str(frames_dir), "--output", str(stream),
                 "--timestamps", str(ts)]) == 0
    assert [e.timestamp for e in load_stream(stream)[1]] == [5, 6, 9]


def test_exit_codes(frames_dir, tmp_path, capsys):
    stream = tmp_path / "clip.gev"
    assert main(["encode", "--input", str(frames_dir), "--output", str(stream)]) == 0
    # validation problems
    assert main(["encode", "--input", str(frames_dir), "--output", str(stream), "--thresholds", "4,x"]) == EXIT_VALIDATION
    assert main(["encode", "--input", str(frames_dir), "--output", str(stream), "--thresholds", "4,0"]) == EXIT_VALIDATION
    assert main(["reconstruct", "--input", str(stream), "--output", str(tmp_path / "r")]) == EXIT_VALIDATION
    assert main(["reconstruct", "--input", str(stream), "--output", str(tmp_path / "r"),
                 "--mean-bias", "0.5", "--thresholds", "4,8"]) == EXIT_VALIDATION
    assert main(["reconstruct", "--input", str(stream), "--output", str(tmp_path / "r"),
                 "--mean-bias", "0.5", "--alpha", "3"]) == EXIT_VALIDATION
    assert main(["frobnicate"]) == EXIT_VALIDATION
    assert main(["encode", "--output", str(stream)]) == EXIT_VALIDATION
    # I/O problems
    assert main(["encode", "--input", str(tmp_path / "missing"), "--output", str(stream)]) == EXIT_IO
    bad = tmp_path / "bad.gev"
    bad.write_bytes(b"JUNKJUNKJUNK")
    assert main(["stats", "--input", str(bad)]) == EXIT_IO
    assert main(["stats", "--input", str(tmp_path / "nothing.gev")]) == EXIT_IO
    err = capsys.readouterr().err
    assert "not a GEV1 stream" in err
