"""CLI subcommands driven in-process through main(), plus one real-binary check."""

import csv
import subprocess
import sys

import numpy as np
import pytest

from quadriclens.cli import main
from quadriclens.session import deserialize_scene
from quadriclens.volume import load_raw_volume


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def scene_text(volume_name, lens_lines="", tf_alpha=0.05, width=32, height=32):
    tf = (
        "    transfer_function {\n"
        "      node 0.0 0.0 0.0 0.0 0.0\n"
        f"      node 1.0 1.0 1.0 1.0 {tf_alpha}\n"
        "    }\n"
    )
    return (
        "qscene 1\n"
        f"volume {volume_name}\n"
        "background 0.0 0.0 0.0\n"
        "camera {\n"
        "  eye 0.5 0.5 2.0\n"
        "  look_at 0.5 0.5 0.5\n"
        "  up 0.0 1.0 0.0\n"
        "  vertical_fov 0.9\n"
        f"  width {width}\n"
        f"  height {height}\n"
        "}\n"
        "settings {\n" + tf + "}\n" + lens_lines
    )


LENS_BLOCK = (
    "lens {\n"
    "  id 1\n"
    "  position 0.5 0.5 0.8\n"
    "  orientation 1.0 0.0 0.0 0.0\n"
    "  length 0.3\n"
    "  k1 1.5\n"
    "  k2 1.5\n"
    "}\n"
)


@pytest.fixture
def shell_scene(tmp_path, capsys):
    vol = tmp_path / "shell.qvol"
    code, out, err = run(
        capsys, "gen-volume", "--kind", "sphere_shell", "--dims", "48", "48", "48",
        "--radius", "0.3", "--width", "0.05", "--dtype", "u8", "-o", str(vol),
    )
    assert code == 0, err
    scene = tmp_path / "scene.qscene"
    scene.write_text(scene_text("shell.qvol", LENS_BLOCK))
    return scene


# --- gen-volume -----------------------------------------------------------------


def test_gen_volume_constant_stats_line(tmp_path, capsys):
    out_path = tmp_path / "c.qvol"
    code, out, err = run(
        capsys, "gen-volume", "--kind", "constant", "--dims", "16", "16", "16",
        "-o", str(out_path),
    )
    assert code == 0 and err == ""
    assert out.strip() == "dims=16x16x16 range=0.5 0.5"
    grid = load_raw_volume(out_path)
    assert grid.dims == (16, 16, 16)
    assert grid.values.size == 4096
    assert np.all(grid.values == 0.5)


def test_gen_volume_rejects_degenerate_dims(tmp_path, capsys):
    code, out, err = run(
        capsys, "gen-volume", "--kind", "constant", "--dims", "1", "8", "8",
        "-o", str(tmp_path / "x.qvol"),
    )
    assert code == 1
    assert err.startswith("error: ")
    assert ">= 2" in err
    assert err.count("\n") == 1  # single line


def test_gen_volume_u16_roundtrip(tmp_path, capsys):
    out_path = tmp_path / "g.qvol"
    code, _, _ = run(
        capsys, "gen-volume", "--kind", "axis_linear", "--axis", "z",
        "--dims", "8", "8", "8", "--dtype", "u16le", "-o", str(out_path),
    )
    assert code == 0
    grid = load_raw_volume(out_path)
    assert grid.values[0, 0, 0] < grid.values[7, 0, 0]  # grows along z


# --- render -----------------------------------------------------------------------


def test_render_writes_image_and_stats(shell_scene, tmp_path, capsys):
    out_img = tmp_path / "frame.png"
    code, out, err = run(capsys, "render", "--scene", str(shell_scene), "-o", str(out_img))
    assert code == 0, err
    assert out_img.exists()
    fields = dict(kv.split("=") for kv in out.split())
    assert fields["pixels"] == "1024"
    assert fields["rays"] == "1024"
    assert int(fields["samples"]) > 0
    assert float(fields["wall_ms"]) > 0


def test_render_twice_is_byte_identical(shell_scene, tmp_path, capsys):
    a = tmp_path / "a.png"
    b = tmp_path / "b.png"
    assert run(capsys, "render", "--scene", str(shell_scene), "-o", str(a))[0] == 0
    assert run(capsys, "render", "--scene", str(shell_scene), "-o", str(b))[0] == 0
    assert a.read_bytes() == b.read_bytes()


def test_render_mode_override_culls_samples(shell_scene, tmp_path, capsys):
    samples = {}
    for mode in ("vis1", "vis2"):
        code, out, _ = run(
            capsys, "render", "--scene", str(shell_scene), "--mode", mode,
            "-o", str(tmp_path / f"{mode}.ppm"),
        )
        assert code == 0
        samples[mode] = int(dict(kv.split("=") for kv in out.split())["samples"])
    assert samples["vis2"] < samples["vis1"]


def test_render_empty_scene_is_flat_background(tmp_path, capsys):
    vol = tmp_path / "c.qvol"
    assert run(capsys, "gen-volume", "--kind", "constant", "--dims", "8", "8", "8",
               "-o", str(vol))[0] == 0
    scene = tmp_path / "empty.qscene"
    scene.write_text(scene_text("c.qvol", lens_lines="", tf_alpha=0.0))
    out_img = tmp_path / "bg.ppm"
    code, _, _ = run(capsys, "render", "--scene", str(scene), "-o", str(out_img))
    assert code == 0
    payload = out_img.read_bytes()
    pixels = payload.split(b"255\n", 1)[1]
    assert pixels == b"\x00" * (32 * 32 * 3)


def test_render_size_override(shell_scene, tmp_path, capsys):
    out_img = tmp_path / "small.ppm"
    code, out, _ = run(
        capsys, "render", "--scene", str(shell_scene), "--size", "8", "4",
        "-o", str(out_img),
    )
    assert code == 0
    assert out_img.read_bytes().startswith(b"P6\n8 4\n255\n")
    assert "pixels=32 " in out


def test_render_missing_scene_errors(tmp_path, capsys):
    code, out, err = run(
        capsys, "render", "--scene", str(tmp_path / "nope.qscene"), "-o", str(tmp_path / "x.png")
    )
    assert code == 1
    assert err.startswith("error: ")


def test_render_bad_scene_reports_line(tmp_path, capsys):
    bad = tmp_path / "bad.qscene"
    bad.write_text("qscene 1\nsettings {\n  global_alpha nope\n}\n")
    code, _, err = run(capsys, "render", "--scene", str(bad), "-o", str(tmp_path / "x.png"))
    assert code == 1
    assert err.startswith("error: line 3:")


# --- replay -----------------------------------------------------------------------


def test_replay_empty_log_matches_render(shell_scene, tmp_path, capsys):
    log = tmp_path / "empty.qevents"
    log.write_text("")
    out_dir = tmp_path / "rep"
    code, out, err = run(
        capsys, "replay", "--scene", str(shell_scene), "--events", str(log),
        "--out-dir", str(out_dir),
    )
    assert code == 0, err
    assert "events=0 frames=1" in out
    ref = tmp_path / "direct.png"
    assert run(capsys, "render", "--scene", str(shell_scene), "-o", str(ref))[0] == 0
    assert (out_dir / "frame_000000.png").read_bytes() == ref.read_bytes()
    final = deserialize_scene((out_dir / "final.qscene").read_text())
    assert len(final.lenses) == 1


def test_replay_applies_interactions(tmp_path, capsys):
    vol = tmp_path / "c.qvol"
    assert run(capsys, "gen-volume", "--kind", "constant", "--dims", "8", "8", "8",
               "-o", str(vol))[0] == 0
    scene = tmp_path / "plain.qscene"
    scene.write_text(scene_text("c.qvol", lens_lines="", width=8, height=8))
    # Create a lens, pull its k1 rim handle up by 0.2 in lens z, release.
    log = tmp_path / "drag.qevents"
    log.write_text(
        "0,primary,0.5,0.5,0.5,1.0,0.0,0.0,0.0,grip_pressed\n"
        "10,primary,0.625,0.5,0.5,1.0,0.0,0.0,0.0,trigger_pressed\n"
        "20,primary,0.625,0.5,0.7,1.0,0.0,0.0,0.0\n"
        "30,primary,0.625,0.5,0.7,1.0,0.0,0.0,0.0,trigger_released\n"
    )
    out_dir = tmp_path / "rep"
    code, out, err = run(
        capsys, "replay", "--scene", str(scene), "--events", str(log),
        "--out-dir", str(out_dir), "--every", "2",
    )
    assert code == 0, err
    assert "events=4 frames=3" in out  # after events 2 and 4, plus the final frame
    assert (out_dir / "frame_000002.png").exists()
    final = deserialize_scene((out_dir / "final.qscene").read_text())
    assert len(final.lenses) == 1
    assert final.lenses[0].k1 == pytest.approx(0.2, abs=1e-9)
    assert final.lenses[0].k2 == 0.0


def test_replay_bad_log_line_number(shell_scene, tmp_path, capsys):
    log = tmp_path / "bad.qevents"
    log.write_text(
        "0,primary,0.5,0.5,0.5,1.0,0.0,0.0,0.0\n"
        "1,primary,oops\n"
    )
    code, _, err = run(
        capsys, "replay", "--scene", str(shell_scene), "--events", str(log),
        "--out-dir", str(tmp_path / "rep"),
    )
    assert code == 1
    assert err.startswith("error: line 2:")
    assert err.count("\n") == 1


# --- bench ------------------------------------------------------------------------


def test_bench_reports_csv_and_figure(shell_scene, tmp_path, capsys):
    report = tmp_path / "bench.csv"
    code, out, err = run(
        capsys, "bench", "--scene", str(shell_scene), "--size", "24", "24",
        "--reps", "2", "--report", str(report),
    )
    assert code == 0, err
    assert "reps=2" in out and "msamples_per_s=" in out
    assert f"report={report}" in out
    figure = tmp_path / "bench.png"
    assert figure.exists()
    assert figure.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
    with open(report, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert [row["rep"] for row in rows] == ["1", "2"]
    for row in rows:
        assert float(row["wall_ms"]) > 0
        assert int(row["samples"]) > 0
        assert float(row["msamples_per_s"]) > 0


def test_bench_rejects_bad_reps(shell_scene, tmp_path, capsys):
    code, _, err = run(capsys, "bench", "--scene", str(shell_scene), "--reps", "0")
    assert code == 1
    assert err.startswith("error: reps must be >= 1")


# --- validate ----------------------------------------------------------------------


def test_validate_all_three(shell_scene, tmp_path, capsys):
    log = tmp_path / "ok.qevents"
    log.write_text("0,primary,0.5,0.5,0.5,1.0,0.0,0.0,0.0\n")
    vol = shell_scene.parent / "shell.qvol"
    code, out, err = run(
        capsys, "validate", "--scene", str(shell_scene), "--volume", str(vol),
        "--events", str(log),
    )
    assert code == 0, err
    lines = out.strip().splitlines()
    assert lines[0].startswith("ok volume dims=48x48x48")
    assert lines[1].startswith("ok scene lenses=1")
    assert lines[2] == "ok events count=1"


def test_validate_requires_target(capsys):
    code, _, err = run(capsys, "validate")
    assert code == 1
    assert err.startswith("error: nothing to validate")


def test_validate_bad_volume(tmp_path, capsys):
    bad = tmp_path / "bad.qvol"
    bad.write_bytes(b"not a volume\n")
    code, _, err = run(capsys, "validate", "--volume", str(bad))
    assert code == 1
    assert err.startswith("error: ")
    assert err.count("\n") == 1


# --- installed entry point -----------------------------------------------------------


def test_console_script_end_to_end(tmp_path):
    vol = tmp_path / "c.qvol"
    proc = subprocess.run(
        ["quadriclens", "gen-volume", "--kind", "constant", "--dims", "16", "16", "16",
         "-o", str(vol)],
        capture_output=True, text=True, timeout=300,
    )
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout.strip() == "dims=16x16x16 range=0.5 0.5"
    proc = subprocess.run(
        ["quadriclens", "validate", "--volume", str(vol)],
        capture_output=True, text=True, timeout=300,
    )
    assert proc.returncode == 0
    assert proc.stdout.startswith("ok volume dims=16x16x16")
