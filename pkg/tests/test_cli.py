import csv
import os
from pathlib import Path

import numpy as np
import pytest

from jdcc import (
    DccString,
    Direction,
    TransitionParams,
    build_tree,
    deserialize_tree,
    read_contours,
    read_pgm,
    trace_contours,
    write_pgm,
)
from jdcc.cli import main
from jdcc.shapes import shape_frames


@pytest.fixture()
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


def write_frames(workdir, kind="rect", size=48, frames=3, seed=13):
    paths = []
    for t, frame in enumerate(shape_frames(kind, size=size, frames=frames, seed=seed)):
        p = workdir / f"{kind}_{t}.pgm"
        p.write_bytes(write_pgm(frame))
        paths.append(p)
    return paths


def test_gen_shapes_writes_frames(workdir):
    assert main(["gen-shapes", "--kind", "blob", "--size", "48", "--frames", "2",
                 "--seed", "3", "--out", "shapes"]) == 0
    files = sorted(os.listdir(workdir / "shapes"))
    assert files == ["frame_000.pgm", "frame_001.pgm"]
    mask = read_pgm((workdir / "shapes" / files[0]).read_bytes())
    assert mask.pixels.sum() > 0


def test_train_builds_expected_tree(workdir, capsys):
    paths = write_frames(workdir)
    assert main(["train", str(paths[0]), str(paths[1]), "--out", "tree.jctx"]) == 0
    tree = deserialize_tree((workdir / "tree.jctx").read_bytes())
    contours = []
    for p in paths[:2]:
        contours.extend(trace_contours(read_pgm(p.read_bytes())))
    want = build_tree(contours)
    assert tree == want
    out = capsys.readouterr().out
    assert f"depth {want.depth}" in out


def test_train_no_contours_is_data_error(workdir):
    blank = workdir / "blank.pgm"
    blank.write_bytes(b"P2\n4 4\n255\n" + b"0 " * 16)
    assert main(["train", str(blank), "--out", "t.jctx"]) == 2


def test_corrupt_identity_and_determinism(workdir):
    paths = write_frames(workdir)
    assert main(["corrupt", str(paths[2]), "--delta", "0", "--seed", "5",
                 "--out", "same.pgm"]) == 0
    assert read_pgm((workdir / "same.pgm").read_bytes()) == read_pgm(paths[2].read_bytes())
    main(["corrupt", str(paths[2]), "--delta", "0.2", "--seed", "5", "--out", "n1.pgm"])
    main(["corrupt", str(paths[2]), "--delta", "0.2", "--seed", "5", "--out", "n2.pgm"])
    assert (workdir / "n1.pgm").read_bytes() == (workdir / "n2.pgm").read_bytes()


def test_encode_decode_round_trip(workdir, capsys):
    paths = write_frames(workdir)
    main(["train", str(paths[0]), str(paths[1]), "--out", "tree.jctx"])
    assert main(["encode", str(paths[2]), "--tree", "tree.jctx", "--out", "bits.jdcc"]) == 0
    out = capsys.readouterr().out
    assert "bits/symbol" in out
    assert main(["decode", "bits.jdcc", "--tree", "tree.jctx", "--out", "back.txt"]) == 0
    decoded = read_contours((workdir / "back.txt").read_text())
    assert decoded == trace_contours(read_pgm(paths[2].read_bytes()))


def test_decode_bad_stream_is_data_error(workdir):
    paths = write_frames(workdir)
    main(["train", str(paths[0]), "--out", "tree.jctx"])
    (workdir / "junk.jdcc").write_bytes(b"NOPE")
    assert main(["decode", "junk.jdcc", "--tree", "tree.jctx", "--out", "x.txt"]) == 2


def test_denoise_pipeline_round_trip(workdir):
    paths = write_frames(workdir)
    main(["train", str(paths[0]), str(paths[1]), "--out", "tree.jctx"])
    main(["corrupt", str(paths[2]), "--delta", "0.1", "--seed", "4", "--out", "noisy.pgm"])
    (workdir / "params.txt").write_text(TransitionParams(0.1, 0.4, 0.4).to_text())
    assert main(["denoise", "noisy.pgm", "--tree", "tree.jctx", "--params", "params.txt",
                 "--lambda", "0", "--beta", "1", "--out", "den.txt"]) == 0
    denoised = read_contours((workdir / "den.txt").read_text())
    assert denoised
    # denoised output re-encodes and decodes to itself
    assert main(["encode", "den.txt", "--tree", "tree.jctx", "--out", "den.jdcc"]) == 0
    assert main(["decode", "den.jdcc", "--tree", "tree.jctx", "--out", "den2.txt"]) == 0
    assert read_contours((workdir / "den2.txt").read_text()) == denoised


def test_denoise_deterministic(workdir):
    paths = write_frames(workdir)
    main(["train", str(paths[0]), str(paths[1]), "--out", "tree.jctx"])
    main(["corrupt", str(paths[2]), "--delta", "0.1", "--seed", "4", "--out", "noisy.pgm"])
    (workdir / "params.txt").write_text(TransitionParams(0.1, 0.4, 0.4).to_text())
    for name in ("a.txt", "b.txt"):
        main(["denoise", "noisy.pgm", "--tree", "tree.jctx", "--params", "params.txt",
              "--beta", "1", "--out", name])
    assert (workdir / "a.txt").read_bytes() == (workdir / "b.txt").read_bytes()


def test_denoise_with_config_file(workdir):
    paths = write_frames(workdir)
    main(["train", str(paths[0]), str(paths[1]), "--out", "tree.jctx"])
    main(["corrupt", str(paths[2]), "--delta", "0.1", "--seed", "4", "--out", "noisy.pgm"])
    (workdir / "run.cfg").write_text("lambda=0.0 beta=1.0 Ds=4 p=0.1 q1=0.4 q2=0.4\n")
    assert main(["denoise", "noisy.pgm", "--tree", "tree.jctx", "--config", "run.cfg",
                 "--out", "den.txt"]) == 0


def test_denoise_without_params_is_usage_error(workdir):
    paths = write_frames(workdir)
    main(["train", str(paths[0]), "--out", "tree.jctx"])
    assert main(["denoise", str(paths[2]), "--tree", "tree.jctx", "--out", "x.txt"]) == 1


def test_estimate_from_pairs_and_alternating(workdir):
    paths = write_frames(workdir)
    main(["train", str(paths[0]), str(paths[1]), "--out", "tree.jctx"])
    main(["corrupt", str(paths[2]), "--delta", "0.1", "--seed", "4", "--out", "noisy.pgm"])
    clean = trace_contours(read_pgm(paths[2].read_bytes()))
    noisy = trace_contours(read_pgm((workdir / "noisy.pgm").read_bytes()))
    keep = min(len(clean), len(noisy))
    from jdcc import write_contours

    (workdir / "clean.txt").write_text(write_contours(clean[:keep]))
    (workdir / "noisy.txt").write_text(write_contours(noisy[:keep]))
    assert main(["estimate", "--noisy", "noisy.txt", "--clean", "clean.txt",
                 "--out", "pairs.params"]) == 0
    got = TransitionParams.from_text((workdir / "pairs.params").read_text())
    assert 0 < got.p < 1

    assert main(["estimate", "--noisy", "noisy.txt", "--tree", "tree.jctx",
                 "--beta", "1", "--max-iter", "4", "--out", "alt.params"]) == 0
    TransitionParams.from_text((workdir / "alt.params").read_text())


def test_estimate_alternating_requires_tree(workdir):
    (workdir / "noisy.txt").write_text("CONTOUR 1 1 E 0\nssrl\n")
    assert main(["estimate", "--noisy", "noisy.txt", "--out", "p.txt"]) == 1


def test_aic_report(workdir, capsys):
    rng = np.random.default_rng(50)
    from jdcc import corrupt_string, write_contours

    params = TransitionParams(0.08, 0.5, 0.5)
    xs, ys = [], []
    for _ in range(10):
        x = DccString((5, 5), Direction.E, "".join(rng.choice(list("lsr"), size=120)))
        y, _ = corrupt_string(x, params, seed=int(rng.integers(1 << 30)))
        xs.append(x)
        ys.append(y)
    (workdir / "clean.txt").write_text(write_contours(xs))
    (workdir / "noisy.txt").write_text(write_contours(ys))
    assert main(["aic", "--clean", "clean.txt", "--noisy", "noisy.txt",
                 "--out", "report.txt"]) == 0
    report = (workdir / "report.txt").read_text()
    assert "k=3" in report and "k=2" in report
    burst = float(report.split("aic_burst=")[1].split()[0])
    iid = float(report.split("aic_iid=")[1].split()[0])
    assert burst < iid


def test_rd_sweep_writes_consistent_csv(workdir):
    paths = write_frames(workdir, kind="rect", size=48, seed=13)
    assert main([
        "rd-sweep", "--train", str(paths[0]), str(paths[1]), "--target", str(paths[2]),
        "--delta", "0.1", "--seed", "9", "--beta", "1.0",
        "--lambdas", "0,0.5", "--betas", "1,2", "--out", "rd",
    ]) == 0
    for scheme in ("joint", "separate"):
        with open(workdir / "rd" / f"{scheme}.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert rows
        assert list(rows[0]) == ["lambda", "beta", "rate_bits_per_symbol",
                                 "distortion", "contours", "millis"]
        for row in rows:
            assert float(row["rate_bits_per_symbol"]) >= 0
            assert float(row["distortion"]) >= 0


def test_rd_sweep_deterministic_apart_from_timing(workdir):
    paths = write_frames(workdir, kind="rect", size=48, seed=13)
    args = ["rd-sweep", "--train", str(paths[0]), str(paths[1]), "--target", str(paths[2]),
            "--delta", "0.1", "--seed", "9", "--beta", "1.0",
            "--lambdas", "0,1", "--betas", "1,2"]
    main(args + ["--out", "rd1"])
    main(args + ["--out", "rd2"])
    for scheme in ("joint", "separate"):
        a = [r.rsplit(",", 1)[0] for r in (workdir / "rd1" / f"{scheme}.csv").read_text().splitlines()]
        b = [r.rsplit(",", 1)[0] for r in (workdir / "rd2" / f"{scheme}.csv").read_text().splitlines()]
        assert a == b


def test_usage_error_exit_code():
    assert main(["no-such-command"]) == 1


def test_missing_file_is_data_error(workdir):
    assert main(["encode", "missing.txt", "--tree", "nope.jctx", "--out", "x"]) == 2


def test_threads_env_respected(workdir, monkeypatch):
    paths = write_frames(workdir)
    main(["train", str(paths[0]), str(paths[1]), "--out", "tree.jctx"])
    main(["corrupt", str(paths[2]), "--delta", "0.1", "--seed", "4", "--out", "noisy.pgm"])
    (workdir / "params.txt").write_text(TransitionParams(0.1, 0.4, 0.4).to_text())
    monkeypatch.setenv("JDCC_THREADS", "2")
    assert main(["denoise", "noisy.pgm", "--tree", "tree.jctx", "--params", "params.txt",
                 "--beta", "1", "--out", "t2.txt"]) == 0
    monkeypatch.setenv("JDCC_THREADS", "1")
    assert main(["denoise", "noisy.pgm", "--tree", "tree.jctx", "--params", "params.txt",
                 "--beta", "1", "--out", "t1.txt"]) == 0
    assert (workdir / "t1.txt").read_text() == (workdir / "t2.txt").read_text()
