"""Headless command-line access.

Subcommands: ``phantom`` (generate + save a BVOL volume), ``bench-reslice``
(slice timing), ``replay`` (re-execute a pose/fire log), ``compare``
(protocol Monte-Carlo report), ``serve`` (run the API).

Exit codes: 0 success, 1 usage, 2 data error, 3 budget/acceptance failure.
Every command is deterministic given explicit seeds; timestamps never enter
byte-compared output.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import socket
import sys
import time
from pathlib import Path

import numpy as np

from .analytics import (
    GlandSizeDistribution,
    NoiseModel,
    ProtocolDefinition,
    ProtocolReport,
    compare_protocols,
    session_stats,
    sextant_protocol,
    twelve_core_protocol,
)
from .anatomy import ProstateModel, SectorScheme12
from .biopsy import GunParams, fire
from .errors import FormatError, TrusimError
from .probe import ProbePose, ProbeRig, clamp_pose, image_plane
from .reslice import View, apply_fan_mask, canonical_plane, extract_slice
from .store import SessionStore, params_from_record, params_to_record, phantom_meta, stats_to_record
from .volume import PhantomParams, Volume3D, generate_phantom, load_volume, quantize_u8, save_volume

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_BUDGET = 3

BUILTIN_PROTOCOLS = {"twelve-core": twelve_core_protocol, "sextant": sextant_protocol}


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the documented code is 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ------------------------------------------------------------------ phantom

def _phantom_params(args) -> PhantomParams:
    base = PhantomParams()
    if args.params:
        base = params_from_record(json.loads(Path(args.params).read_text()))
    overrides = {}
    if args.extent is not None:
        overrides["volume_extent"] = (args.extent,) * 3
    if args.spacing is not None:
        overrides["spacing"] = args.spacing
    if args.semi_axes is not None:
        overrides["gland_semi_axes"] = tuple(args.semi_axes)
    if args.center is not None:
        overrides["gland_center"] = tuple(args.center)
    if args.speckle_amplitude is not None:
        overrides["speckle_amplitude"] = args.speckle_amplitude
    if overrides:
        base = PhantomParams(**{**params_to_dict(base), **overrides})
    return base


def params_to_dict(p: PhantomParams) -> dict:
    rec = params_to_record(p)
    rec["volume_extent"] = tuple(rec["volume_extent"])
    rec["gland_semi_axes"] = tuple(rec["gland_semi_axes"])
    rec["gland_center"] = tuple(rec["gland_center"])
    return rec


def cmd_phantom(args) -> int:
    params = _phantom_params(args)
    params.validate()
    vol, _ = generate_phantom(params, args.seed)
    save_volume(vol, args.out)
    meta = phantom_meta(0, params, args.seed)
    record = {
        "type": "phantom",
        "v": 1,
        "params": params_to_record(params),
        "seed": args.seed,
        "gland_volume_cc": meta.gland_volume_cc,
        "pseudo_age": meta.pseudo_age,
        "pseudo_psa": meta.pseudo_psa,
    }
    Path(f"{args.out}.meta.json").write_text(json.dumps(record, sort_keys=True) + "\n")
    if args.format == "record":
        print(json.dumps({"out": str(args.out), "gland_volume_cc": meta.gland_volume_cc}, sort_keys=True))
    else:
        print(f"wrote {args.out} ({vol.dims[0]}x{vol.dims[1]}x{vol.dims[2]} @ {vol.spacing[0]} mm)")
        print(f"gland_volume_cc {meta.gland_volume_cc:.3f}")
    return EXIT_OK


# ------------------------------------------------------------- bench-reslice

def _random_valid_pose(rig: ProbeRig, rng: np.random.Generator) -> ProbePose:
    return ProbePose(
        pitch=rng.uniform(-rig.pitch_max, rig.pitch_max),
        yaw=rng.uniform(-rig.yaw_max, rig.yaw_max),
        roll=rng.uniform(-np.pi, np.pi),
        insertion=rng.uniform(0.0, rig.insertion_max),
    )


def cmd_bench_reslice(args) -> int:
    vol: Volume3D = load_volume(args.volume)
    w, h = (int(x) for x in args.resolution.lower().split("x"))
    rig = ProbeRig()
    rng = np.random.default_rng(args.seed)
    poses = [_random_valid_pose(rig, rng) for _ in range(args.iterations)]

    def run_one(pose: ProbePose) -> None:
        plane = image_plane(rig, pose)
        img = extract_slice(vol, plane, (w, h))
        if args.end_to_end:
            img = apply_fan_mask(img, rig.fan)
            quantize_u8(img.pixels).tobytes()

    run_one(poses[0])  # JIT warmup, not timed
    times_ms = []
    for pose in poses:
        t0 = time.perf_counter()
        run_one(pose)
        times_ms.append((time.perf_counter() - t0) * 1e3)
    median = float(np.median(times_ms))
    p95 = float(np.percentile(times_ms, 95))
    if args.format == "record":
        print(json.dumps({"median_ms": median, "p95_ms": p95, "iterations": args.iterations,
                          "resolution": [w, h], "end_to_end": bool(args.end_to_end)}, sort_keys=True))
    else:
        mode = "pose->frame" if args.end_to_end else "slice"
        print(f"{mode} {w}x{h} over {args.iterations} poses: median {median:.3f} ms, p95 {p95:.3f} ms")
    if args.budget is not None and median > args.budget:
        print(f"budget exceeded: median {median:.3f} ms > {args.budget} ms", file=sys.stderr)
        return EXIT_BUDGET
    return EXIT_OK


# ------------------------------------------------------------------- replay

def _digest(payload_pixels: bytes) -> str:
    return hashlib.sha256(payload_pixels).hexdigest()


def cmd_replay(args) -> int:
    path = Path(args.session_log)
    if not path.exists():
        print(f"no such session log: {path}", file=sys.stderr)
        return EXIT_DATA
    events = []
    for i, line in enumerate(path.read_text().splitlines()):
        line = line.strip()
        if not line:
            continue
        try:
            events.append(json.loads(line))
        except json.JSONDecodeError as exc:
            print(f"{path}:{i + 1}: bad record: {exc}", file=sys.stderr)
            return EXIT_DATA
    if not events or events[0].get("type") != "replay_header":
        print("session log must start with a replay_header record", file=sys.stderr)
        return EXIT_DATA
    header = events[0]
    params = params_from_record(header["phantom"]["params"]) if header["phantom"].get("params") else PhantomParams()
    seed = header["phantom"].get("seed", 0)
    vol, model = generate_phantom(params, seed)
    rig = ProbeRig()
    gun = GunParams(**header["gun"]) if header.get("gun") else GunParams()
    scheme = SectorScheme12()
    res = tuple(header.get("resolution", (128, 128)))
    views = [View(v) for v in header.get("views", ["probe"])]

    pose = ProbePose()
    cores = []
    digests: dict[str, str] = {}
    out_lines = [] if args.record_digests else None
    if out_lines is not None:
        out_lines.append(json.dumps(header, sort_keys=True))

    def render(view: View) -> str:
        plane = image_plane(rig, pose) if view is View.PROBE else canonical_plane(view, model, rig.image_extent)
        img = extract_slice(vol, plane, res)
        if view is View.PROBE:
            img = apply_fan_mask(img, rig.fan)
        return _digest(quantize_u8(img.pixels).tobytes())

    for ev in events[1:]:
        etype = ev.get("type")
        if etype == "pose":
            pose = clamp_pose(rig, ProbePose(ev.get("pitch", 0.0), ev.get("yaw", 0.0), ev.get("roll", 0.0), ev.get("insertion", 0.0)))
            for view in views:
                digests[view.value] = render(view)
            if out_lines is not None:
                out_lines.append(json.dumps(ev, sort_keys=True))
                for view in views:
                    out_lines.append(json.dumps({"type": "frame_digest", "view": view.value, "sha256": digests[view.value]}, sort_keys=True))
        elif etype == "fire":
            core = fire(rig, pose, ev["needle_depth"], gun, model, scheme, fired_at=0.0)
            cores.append(core)
            if out_lines is not None:
                out_lines.append(json.dumps(ev, sort_keys=True))
        elif etype == "frame_digest":
            got = digests.get(ev["view"])
            if got != ev["sha256"]:
                print(f"frame digest mismatch for view {ev['view']}: got {got}, log says {ev['sha256']}", file=sys.stderr)
                return EXIT_DATA
        else:
            print(f"unknown event type {etype!r}", file=sys.stderr)
            return EXIT_DATA

    if args.store:
        store = SessionStore(args.store)
        op_id = store.create_operator("replay", "expert", created_at=0.0)
        meta = store.register_phantom(params, seed)
        sid = store.open_session(op_id, meta.id, started_at=0.0)
        for core in cores:
            store.append_core(sid, core)
        store.close_session(sid)

    if out_lines is not None:
        Path(args.record_digests).write_text("\n".join(out_lines) + "\n")

    stats = session_stats(cores, model, scheme)
    record = {"stats": stats_to_record(stats), "fires": len(cores),
              "sectors": sorted(c.sector.key for c in cores if c.sector is not None)}
    print(json.dumps(record, sort_keys=True))
    return EXIT_OK


# ------------------------------------------------------------------ compare

def _load_schemes(args) -> list[ProtocolDefinition]:
    schemes: list[ProtocolDefinition] = []
    if args.builtin:
        for name in args.builtin.split(","):
            name = name.strip()
            if name not in BUILTIN_PROTOCOLS:
                raise FormatError(f"unknown builtin protocol {name!r} (have {sorted(BUILTIN_PROTOCOLS)})")
            schemes.append(BUILTIN_PROTOCOLS[name]())
    if args.schemes:
        data = json.loads(Path(args.schemes).read_text())
        for entry in data["schemes"]:
            schemes.append(ProtocolDefinition(name=entry["name"], targets=tuple(tuple(t) for t in entry["targets"])))
    return schemes


def _report_record(report: ProtocolReport) -> dict:
    return {
        "tumor_radius": report.tumor_radius,
        "trials": report.trials,
        "seed": report.seed,
        "schemes": [
            {
                "name": s.name,
                "mean_sector_coverage": s.mean_sector_coverage,
                "mean_apex_coverage": s.mean_apex_coverage,
                "detection_probability": s.detection_probability,
                "trials": s.trials,
                "ci_half_width": s.ci_half_width,
                "skipped": s.skipped,
                "infeasible_target": s.infeasible_target,
            }
            for s in report.schemes
        ],
    }


def cmd_compare(args) -> int:
    schemes = _load_schemes(args)
    if not schemes:
        print("no schemes given (use --schemes FILE and/or --builtin NAMES)", file=sys.stderr)
        return EXIT_USAGE
    rig = ProbeRig()
    gun = GunParams()
    params = PhantomParams()
    base = ProstateModel(center=np.array(params.gland_center), semi_axes=np.array(params.gland_semi_axes))
    report = compare_protocols(
        schemes,
        rig,
        gun,
        GlandSizeDistribution(base=base, semi_axis_sigma=args.gland_sigma),
        NoiseModel(angular_sigma=args.noise_angle, depth_sigma=args.noise_depth, seed=args.seed),
        tumor_radius=args.tumor_radius,
        trials=args.trials,
    )
    if args.format == "record":
        print(json.dumps(_report_record(report), sort_keys=True))
    else:
        print(f"tumor radius {report.tumor_radius} mm, {report.trials} trials, seed {report.seed}")
        print(f"{'scheme':<16}{'coverage':>10}{'apex':>8}{'detection':>11}{'ci95':>8}{'trials':>8}")
        for s in report.schemes:
            if s.skipped:
                print(f"{s.name:<16}SKIPPED (target {s.infeasible_target} unreachable)")
            else:
                print(
                    f"{s.name:<16}{s.mean_sector_coverage:>10.4f}{s.mean_apex_coverage:>8.4f}"
                    f"{s.detection_probability:>11.4f}{s.ci_half_width:>8.4f}{s.trials:>8d}"
                )
    return EXIT_OK


# -------------------------------------------------------------------- serve

def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    host, _, port_s = args.listen.rpartition(":")
    host = host or "127.0.0.1"
    port = int(port_s)
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.bind((host, port))
    except OSError as exc:
        print(f"cannot bind {host}:{port}: {exc}", file=sys.stderr)
        return EXIT_DATA
    finally:
        probe.close()

    app = create_app(args.store)
    state = app.state.service
    if args.phantom_dir:
        _import_phantoms(state, Path(args.phantom_dir))
    if not state.store.list_phantoms():
        state.store.register_phantom(PhantomParams(), seed=0)
    if args.ui:
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=args.ui, html=True), name="ui")
    print(f"listening on http://{host}:{port}")
    uvicorn.run(app, host=host, port=port, log_level="warning")
    return EXIT_OK


def _import_phantoms(state, phantom_dir: Path) -> None:
    """Register phantom metadata records found next to BVOL files."""
    existing = {(m.seed, json.dumps(params_to_record(m.params), sort_keys=True)) for m in state.store.list_phantoms()}
    for meta_path in sorted(phantom_dir.glob("*.meta.json")):
        rec = json.loads(meta_path.read_text())
        params = params_from_record(rec["params"])
        key = (rec["seed"], json.dumps(params_to_record(params), sort_keys=True))
        if key in existing:
            continue
        meta = state.store.register_phantom(params, rec["seed"])
        bvol = Path(str(meta_path)[: -len(".meta.json")])
        if bvol.exists():
            state._volumes[meta.id] = load_volume(bvol)


# --------------------------------------------------------------------- main

def build_parser() -> _Parser:
    parser = _Parser(prog="trusim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("phantom", help="generate a phantom volume (BVOL + metadata)")
    p.add_argument("--params", help="JSON file of phantom parameters")
    p.add_argument("--extent", type=float, help="cube extent mm (overrides params)")
    p.add_argument("--spacing", type=float)
    p.add_argument("--semi-axes", type=float, nargs=3, metavar=("A", "B", "C"))
    p.add_argument("--center", type=float, nargs=3, metavar=("X", "Y", "Z"))
    p.add_argument("--speckle-amplitude", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("text", "record"), default="text")
    p.set_defaults(func=cmd_phantom)

    p = sub.add_parser("bench-reslice", help="time slice extraction over random poses")
    p.add_argument("--volume", required=True)
    p.add_argument("--resolution", default="512x512")
    p.add_argument("--iterations", type=int, default=50)
    p.add_argument("--budget", type=float, help="fail (exit 3) if median ms exceeds this")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--end-to-end", action="store_true", help="include fan mask + 8-bit packing")
    p.add_argument("--format", choices=("text", "record"), default="text")
    p.set_defaults(func=cmd_bench_reslice)

    p = sub.add_parser("replay", help="re-execute a recorded pose/fire log")
    p.add_argument("--session-log", required=True)
    p.add_argument("--store", help="also persist the replayed session into this store dir")
    p.add_argument("--record-digests", help="write an augmented log with frame digests")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("compare", help="Monte-Carlo comparison of biopsy protocols")
    p.add_argument("--schemes", help="JSON file with named target lists (normalized coords)")
    p.add_argument("--builtin", help="comma-separated builtin protocols (twelve-core, sextant)")
    p.add_argument("--noise-angle", type=float, default=0.0, help="pitch/yaw sigma rad")
    p.add_argument("--noise-depth", type=float, default=0.0, help="needle depth sigma mm")
    p.add_argument("--gland-sigma", type=float, default=0.0, help="relative semi-axis sigma")
    p.add_argument("--tumor-radius", type=float, default=5.0)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("text", "record"), default="text")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("serve", help="run the API service")
    p.add_argument("--store", required=True)
    p.add_argument("--listen", default="127.0.0.1:8470")
    p.add_argument("--phantom-dir", help="import *.bvol + *.meta.json phantoms at startup")
    p.add_argument("--ui", help="serve this directory (the built frontend) at /ui")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse signals usage errors / --help by exiting
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (FormatError, TrusimError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
