import json
import socket
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from trusim import ALL_SECTORS, SectorScheme12, ProstateModel, sector_midpoint_target, solve_pose_for_target
from trusim.biopsy import GunParams
from trusim.cli import main
from trusim.probe import ProbeRig
from trusim.store import params_to_record
from trusim.volume import PhantomParams, load_volume

SMALL = [
    "--extent", "40", "--spacing", "0.5", "--semi-axes", "10", "9", "11", "--center", "20", "20", "20",
]


def run_cli(capsys, *args):
    code = main(list(args))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestPhantomCommand:
    def test_deterministic_bytes(self, tmp_path, capsys):
        a, b = tmp_path / "a.bvol", tmp_path / "b.bvol"
        assert run_cli(capsys, "phantom", *SMALL, "--seed", "9", "--out", str(a))[0] == 0
        assert run_cli(capsys, "phantom", *SMALL, "--seed", "9", "--out", str(b))[0] == 0
        assert a.read_bytes() == b.read_bytes()
        assert json.loads((tmp_path / "a.bvol.meta.json").read_text()) == json.loads(
            (tmp_path / "b.bvol.meta.json").read_text()
        )

    def test_default_gland_volume(self, tmp_path, capsys):
        code, out, _ = run_cli(capsys, "phantom", "--seed", "0", "--out", str(tmp_path / "d.bvol"), "--format", "record")
        assert code == 0
        assert json.loads(out)["gland_volume_cc"] == pytest.approx(41.469, abs=0.01)

    def test_invalid_params_exit_2(self, tmp_path, capsys):
        code, _, err = run_cli(
            capsys, "phantom", "--extent", "40", "--semi-axes", "30", "9", "11",
            "--center", "20", "20", "20", "--out", str(tmp_path / "x.bvol"),
        )
        assert code == 2
        assert err.strip()

    def test_usage_error_exit_1(self, capsys):
        assert run_cli(capsys, "phantom")[0] == 1  # --out missing


@pytest.fixture(scope="module")
def small_bvol(tmp_path_factory):
    out = tmp_path_factory.mktemp("vols") / "small.bvol"
    assert main(["phantom", *SMALL, "--seed", "4", "--out", str(out)]) == 0
    return out


class TestBenchCommand:
    def test_reports_times(self, small_bvol, capsys):
        code, out, _ = run_cli(
            capsys, "bench-reslice", "--volume", str(small_bvol), "--resolution", "64x64",
            "--iterations", "10", "--format", "record",
        )
        assert code == 0
        rec = json.loads(out)
        assert rec["median_ms"] > 0.0 and rec["p95_ms"] >= rec["median_ms"]

    def test_budget_zero_fails(self, small_bvol, capsys):
        code, _, err = run_cli(
            capsys, "bench-reslice", "--volume", str(small_bvol), "--resolution", "64x64",
            "--iterations", "5", "--budget", "0",
        )
        assert code == 3
        assert "budget" in err


def write_perfect_session_log(path: Path) -> dict:
    """Pose/fire script covering all 12 sectors on the default phantom."""
    params = PhantomParams()
    model = ProstateModel(center=np.array(params.gland_center), semi_axes=np.array(params.gland_semi_axes))
    rig, gun, scheme = ProbeRig(), GunParams(), SectorScheme12()
    lines = [{"type": "replay_header", "v": 1,
              "phantom": {"params": params_to_record(params), "seed": 2},
              "gun": None, "resolution": [48, 48], "views": ["probe", "axial"]}]
    for sector in ALL_SECTORS:
        pose, depth = solve_pose_for_target(rig, gun, sector_midpoint_target(model, scheme, sector))
        lines.append({"type": "pose", "pitch": pose.pitch, "yaw": pose.yaw, "roll": pose.roll,
                      "insertion": pose.insertion})
        lines.append({"type": "fire", "needle_depth": depth})
    path.write_text("\n".join(json.dumps(l) for l in lines) + "\n")
    return lines[0]


class TestReplayCommand:
    def test_perfect_session_coverage(self, tmp_path, capsys):
        log = tmp_path / "session.jsonl"
        write_perfect_session_log(log)
        code, out, _ = run_cli(capsys, "replay", "--session-log", str(log))
        assert code == 0
        rec = json.loads(out)
        assert rec["stats"]["sector_coverage"] == 1.0
        assert rec["fires"] == 12

    def test_missing_file_exit_2(self, tmp_path, capsys):
        assert run_cli(capsys, "replay", "--session-log", str(tmp_path / "nope.jsonl"))[0] == 2

    def test_replay_twice_identical_output(self, tmp_path, capsys):
        log = tmp_path / "session.jsonl"
        write_perfect_session_log(log)
        _, out1, _ = run_cli(capsys, "replay", "--session-log", str(log))
        _, out2, _ = run_cli(capsys, "replay", "--session-log", str(log))
        assert out1 == out2

    def test_digest_round_trip(self, tmp_path, capsys):
        log = tmp_path / "session.jsonl"
        augmented = tmp_path / "with_digests.jsonl"
        write_perfect_session_log(log)
        assert run_cli(capsys, "replay", "--session-log", str(log), "--record-digests", str(augmented))[0] == 0
        assert run_cli(capsys, "replay", "--session-log", str(augmented))[0] == 0

    def test_corrupt_digest_exit_2(self, tmp_path, capsys):
        log = tmp_path / "session.jsonl"
        augmented = tmp_path / "with_digests.jsonl"
        write_perfect_session_log(log)
        run_cli(capsys, "replay", "--session-log", str(log), "--record-digests", str(augmented))
        lines = augmented.read_text().splitlines()
        for i, line in enumerate(lines):
            rec = json.loads(line)
            if rec["type"] == "frame_digest":
                rec["sha256"] = "0" * 64
                lines[i] = json.dumps(rec)
                break
        augmented.write_text("\n".join(lines) + "\n")
        code, _, err = run_cli(capsys, "replay", "--session-log", str(augmented))
        assert code == 2 and "mismatch" in err

    def test_store_persistence(self, tmp_path, capsys):
        log = tmp_path / "session.jsonl"
        write_perfect_session_log(log)
        store_dir = tmp_path / "store"
        assert run_cli(capsys, "replay", "--session-log", str(log), "--store", str(store_dir))[0] == 0
        from trusim import SessionStore

        store = SessionStore(store_dir)
        assert len(store.get_session(1).cores) == 12


class TestCompareCommand:
    def test_zero_noise_full_coverage_row(self, capsys):
        code, out, _ = run_cli(
            capsys, "compare", "--builtin", "twelve-core", "--trials", "3", "--seed", "1", "--format", "record",
        )
        assert code == 0
        rec = json.loads(out)
        assert rec["schemes"][0]["mean_sector_coverage"] == 1.0

    def test_huge_tumor_detected(self, capsys):
        code, out, _ = run_cli(
            capsys, "compare", "--builtin", "twelve-core,sextant", "--trials", "3",
            "--tumor-radius", "100", "--format", "record",
        )
        assert code == 0
        for row in json.loads(out)["schemes"]:
            assert row["detection_probability"] == 1.0

    def test_same_seed_identical_bytes(self, capsys):
        args = ("compare", "--builtin", "twelve-core,sextant", "--trials", "25", "--seed", "7",
                "--noise-angle", "0.02", "--noise-depth", "1.0", "--gland-sigma", "0.05")
        _, out1, _ = run_cli(capsys, *args)
        _, out2, _ = run_cli(capsys, *args)
        assert out1 == out2 and "scheme" in out1

    def test_schemes_file(self, tmp_path, capsys):
        schemes = {"schemes": [{"name": "two-core", "targets": [[0.25, 0.0, 0.0], [-0.25, 0.0, 0.0]]}]}
        path = tmp_path / "schemes.json"
        path.write_text(json.dumps(schemes))
        code, out, _ = run_cli(capsys, "compare", "--schemes", str(path), "--trials", "3", "--format", "record")
        assert code == 0
        assert json.loads(out)["schemes"][0]["name"] == "two-core"

    def test_unknown_builtin_exit_2(self, capsys):
        assert run_cli(capsys, "compare", "--builtin", "mystery", "--trials", "2")[0] == 2

    def test_no_schemes_usage(self, capsys):
        assert run_cli(capsys, "compare", "--trials", "2")[0] == 1


def free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


class TestServeCommand:
    def test_occupied_port_fails(self, tmp_path, capsys):
        holder = socket.socket()
        holder.bind(("127.0.0.1", 0))
        port = holder.getsockname()[1]
        try:
            code, _, err = run_cli(capsys, "serve", "--store", str(tmp_path / "s"), "--listen", f"127.0.0.1:{port}")
            assert code == 2
            assert "bind" in err
        finally:
            holder.close()

    def test_serve_lifecycle_and_restart(self, tmp_path):
        import httpx

        store_dir = tmp_path / "store"
        ui_dir = tmp_path / "ui"
        ui_dir.mkdir()
        (ui_dir / "index.html").write_text("<!doctype html><title>trusim</title>")
        port = free_port()

        def launch():
            return subprocess.Popen(
                [sys.executable, "-m", "trusim.cli", "serve", "--store", str(store_dir),
                 "--listen", f"127.0.0.1:{port}", "--ui", str(ui_dir)],
                stdout=subprocess.PIPE, stderr=subprocess.STDOUT,
            )

        def wait_ready():
            for _ in range(100):
                try:
                    return httpx.get(f"http://127.0.0.1:{port}/phantoms", timeout=1.0)
                except httpx.TransportError:
                    time.sleep(0.2)
            raise TimeoutError("server did not come up")

        proc = launch()
        try:
            phantoms = wait_ready().json()
            assert len(phantoms) == 1  # default phantom registered on first run
            op = httpx.post(f"http://127.0.0.1:{port}/operators", json={"name": "ada", "level": "novice"}).json()["id"]
            sid = httpx.post(f"http://127.0.0.1:{port}/sessions",
                             json={"operator_id": op, "phantom_id": phantoms[0]["id"]}).json()["id"]
            assert httpx.get(f"http://127.0.0.1:{port}/sessions/{sid}").status_code == 200
        finally:
            proc.terminate()
            proc.wait(timeout=10)

        proc = launch()
        try:
            wait_ready()
            again = httpx.get(f"http://127.0.0.1:{port}/sessions/1")
            assert again.status_code == 200
            assert again.json()["operator_id"] == 1
        finally:
            proc.terminate()
            proc.wait(timeout=10)
