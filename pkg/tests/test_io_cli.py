import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from stitchkit import io
from stitchkit.cli import main


@pytest.fixture
def cloud(rng):
    return rng.normal(scale=20, size=(50, 3))


def test_csv_cloud_roundtrip(tmp_path, cloud):
    io.write_cloud(tmp_path / "c.csv", cloud)
    assert np.allclose(io.read_cloud(tmp_path / "c.csv"), cloud, rtol=1e-8)


def test_ply_cloud_roundtrip(tmp_path, cloud):
    io.write_cloud(tmp_path / "c.ply", cloud)
    assert np.allclose(io.read_cloud(tmp_path / "c.ply"), cloud, atol=1e-4)
    io.write_cloud_ply(tmp_path / "b.ply", cloud, binary=True)
    assert np.allclose(io.read_cloud_ply(tmp_path / "b.ply"), cloud, atol=1e-4)


def test_cloud_errors(tmp_path):
    (tmp_path / "bad.csv").write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        io.read_cloud_csv(tmp_path / "bad.csv")
    with pytest.raises(ValueError):
        io.read_cloud(tmp_path / "c.xyz")
    (tmp_path / "empty.csv").write_text("x,y,z\n")
    assert io.read_cloud_csv(tmp_path / "empty.csv").shape == (0, 3)


@settings(max_examples=30)
@given(arrays(np.uint16, st.tuples(st.integers(1, 12), st.integers(1, 12))), st.booleans())
def test_pgm_roundtrip(tmp_path_factory, img, binary):
    path = tmp_path_factory.mktemp("pgm") / "m.pgm"
    io.write_pgm(path, img, binary=binary)
    assert np.array_equal(io.read_pgm(path), img)


def test_mask_pgm_and_comments(tmp_path):
    mask = np.zeros((4, 5), bool)
    mask[1:3, 2] = True
    io.write_pgm(tmp_path / "m.pgm", mask)
    assert np.array_equal(io.read_mask(tmp_path / "m.pgm"), mask)
    (tmp_path / "c.pgm").write_text("P2\n# made by hand\n2 1\n255\n0 7\n")
    assert io.read_pgm(tmp_path / "c.pgm").tolist() == [[0, 7]]
    with pytest.raises(ValueError):
        io.write_pgm(tmp_path / "n.pgm", -np.ones((2, 2)))


def test_depth_roundtrip(tmp_path):
    d = np.array([[150.25, np.nan], [0.0, 1e3]])
    io.write_depth_csv(tmp_path / "d.csv", d)
    assert np.allclose(io.read_depth_csv(tmp_path / "d.csv"), d, equal_nan=True)


def test_dumps_canonical():
    s = io.dumps({"b": np.float64(1.5), "a": np.arange(2)})
    assert s == '{\n  "a": [\n    0,\n    1\n  ],\n  "b": 1.5\n}\n'
    with pytest.raises(TypeError):
        io.dumps({"x": object()})


# cli
@pytest.fixture(scope="module")
def scene_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("scene")
    assert main(["gen", "--out", str(out), "--seed", "3"]) == 0
    return out


def test_gen_files(scene_dir):
    names = {p.name for p in scene_dir.iterdir()}
    assert {"mask.pgm", "depth.csv", "camera.json", "oracle.json", "wound_center.csv",
            "wound_surface.csv", "phantom.csv"} <= names
    assert sum(n.startswith("needle_") for n in names) == 10
    assert io.read_mask(scene_dir / "mask.pgm").any()


def test_gen_deterministic(tmp_path):
    for d in ("a", "b"):
        assert main(["gen", "--out", str(tmp_path / d), "--seed", "9", "--clouds", "2", "--format", "ply"]) == 0
    for name in ("needle_000.ply", "oracle.json", "depth.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_estimate_matches_oracle(scene_dir, tmp_path):
    oracle = io.read_json(scene_dir / "oracle.json")["needle"]
    clouds = sorted(str(p) for p in scene_dir.glob("needle_*.csv"))
    args = ["estimate", *clouds, "--camera", str(scene_dir / "camera.json"),
            "--depth", str(scene_dir / "depth.csv"), "--tip-side", oracle["tip_side"],
            "--out", str(tmp_path / "est.json")]
    assert main(args) == 0
    est = io.read_json(tmp_path / "est.json")
    assert est["accepted_count"] == 3 and est["consumed_count"] == 10
    assert np.linalg.norm(np.subtract(est["center"], oracle["center"])) < 0.5
    assert abs(est["radius"] - oracle["radius"]) < 0.2
    for side in ("left", "right"):
        assert np.linalg.norm(np.subtract(est["endpoints"][side], oracle["endpoints"][side])) < 2.0
    assert np.linalg.norm(np.subtract(est["tip"], oracle["tip"])) < 2.0


def test_estimate_without_ekf(scene_dir, capsys):
    clouds = sorted(str(p) for p in scene_dir.glob("needle_*.csv"))[:2]
    assert main(["estimate", *clouds, "--no-ekf"]) == 0
    est = json.loads(capsys.readouterr().out)
    assert est["consumed_count"] == 1


def test_plan_matches_oracle(scene_dir, capsys):
    wound = io.read_json(scene_dir / "oracle.json")["wound"]
    assert main(["plan", "--center", str(scene_dir / "wound_center.csv"),
                 "--surface", str(scene_dir / "wound_surface.csv"),
                 "--phantom", str(scene_dir / "phantom.csv"), "-n", "6"]) == 0
    plan = json.loads(capsys.readouterr().out)
    assert len(plan["pairs"]) == 6
    assert plan["h"] == pytest.approx(wound["h"], rel=0.05)
    ins = np.array([p["insertion"] for p in plan["pairs"]])
    assert np.allclose(np.diff(ins, axis=0), np.diff(ins, axis=0)[0], atol=1e-6)


def test_print_schema(capsys):
    assert main(["gen", "--print-schema"]) == 0
    schema = json.loads(capsys.readouterr().out)
    assert "needle" in schema["properties"]


def test_gen_needs_out():
    assert main(["gen"]) == 2


def test_bad_config_exit_code(tmp_path):
    (tmp_path / "t.json").write_text('{"tangle_prob_raw": 1.5}')
    assert main(["simulate", "--trials", "1", "--config", str(tmp_path / "t.json")]) == 2
    (tmp_path / "u.json").write_text('{"speed": 3}')
    assert main(["simulate", "--trials", "1", "--config", str(tmp_path / "u.json")]) == 2
    assert main(["simulate", "--trials", "1", "--closure-miss-prob", "2"]) == 2


def test_missing_file_exit_code(tmp_path):
    assert main(["estimate", str(tmp_path / "nope.csv")]) == 1


def test_simulate_deterministic(tmp_path):
    outs = []
    for k in range(2):
        path = tmp_path / f"r{k}.json"
        assert main(["simulate", "--trials", "2", "--ablation", "no-ekf", "--out", str(path)]) == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]
    report = json.loads(outs[0])
    assert report["n_trials"] == 2 and report["seed"] == 42
    assert set(report["error_counts"]) == {"A", "T", "I", "M"}


def test_benchmark_cli(tmp_path):
    assert main(["benchmark", "--repeat", "1", "--points", "100", "--size", "30",
                 "--out", str(tmp_path / "b.json")]) == 0
    rows = io.read_json(tmp_path / "b.json")
    assert {r["kernel"] for r in rows} == {"farthest_pair", "zhang_suen"}
