"""Command-line pipeline: simulate, reconstruct, decode, characterize,
oracle, dataset.

Every command is a pure function of its config file, input files and seeds;
manifests echo the fully resolved config and list outputs by relative name,
so reruns are byte-identical.  Exit codes: 0 success, 2 config error,
3 numerical failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from . import arrayio
from .config import (
    ConfigError,
    dump_manifest,
    load_config,
    load_manifest,
)
from .containers import SpectralCube, ValidationError
from .interferometer import EncodingError, decode_depth
from .metrics import FitError
from .phantoms import PhantomError
from .recon import SolverError, solve
from .sensing import SensingDimensionError, SensingOperator

PROG = "fringe3d"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


def _write_csv(path, header, rows) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        w.writerows(rows)


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


# -- simulate -----------------------------------------------------------------


def cmd_simulate(args) -> int:
    from . import pipeline

    cfg = load_config(args.config, "simulate")
    out = Path(args.out)
    products = pipeline.simulate(cfg)
    out.mkdir(parents=True, exist_ok=True)

    arrayio.save_mask(out / "mask", products.mask)
    arrayio.mask_to_pgm(out / "mask.pgm", products.mask)
    arrayio.save_measurement(out / "measurement", products.measurement)
    arrayio.save_cube(out / "truth_ac", products.cubes.ac)
    arrayio.save_cube(out / "truth_total", products.cubes.total)
    arrayio.save_volume(out / "truth_volume", products.volume)
    # raw signal frame as 16-bit graymap, scaled to its own peak
    peak = float(products.measurement.image.max())
    if peak > 0:
        img = np.round(products.measurement.image / peak * 65535.0).astype(np.uint16)
        arrayio.write_pgm16(out / "measurement.pgm", img)
    manifest = {
        "command": "simulate",
        "effective_config": cfg,
        "derived": {
            "measurement_shape": list(products.operator.measurement_shape),
            "depth_interval_um": products.grid.depth_interval_um,
            "axial_fov_um": products.grid.axial_fov_um,
            "photon_scale_e": products.photon_scale_e,
            "measurement_pgm_scale": peak / 65535.0 if peak > 0 else None,
        },
        "files": {
            "mask": "mask",
            "mask_pgm": "mask.pgm",
            "measurement": "measurement",
            "truth_ac": "truth_ac",
            "truth_total": "truth_total",
            "truth_volume": "truth_volume",
        },
    }
    dump_manifest(out / "manifest.yaml", manifest)
    print(f"simulate: wrote {out}")
    return EXIT_OK


# -- reconstruct -----------------------------------------------------------------


def cmd_reconstruct(args) -> int:
    from .experiments import solver_config_from
    from .pipeline import ac_measurement
    from . import report

    cfg = load_config(args.config, "reconstruct")
    sim_dir = Path(args.measurement)
    manifest_in = load_manifest(sim_dir / "manifest.yaml")
    grid_cfg = manifest_in["effective_config"]["grid"]
    mask = arrayio.load_mask(sim_dir / manifest_in["files"]["mask"])
    measurement = arrayio.load_measurement(
        sim_dir / manifest_in["files"]["measurement"]
    )
    op = SensingOperator(mask, num_channels=int(grid_cfg["num_channels"]))
    y_ac = ac_measurement(measurement)
    solver_cfg = solver_config_from(cfg["solver"])
    x, state = solve(y_ac, op, solver_cfg)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    from .pipeline import grid_from

    grid = grid_from(grid_cfg)
    sheared_meta = {
        "contains": "sheared-cube",
        "axes": "x yshear lambda",
        "center_wavelength_nm": repr(grid.center_wavelength_nm),
        "channel_spacing_nm": repr(grid.channel_spacing_nm),
        "num_channels": grid.num_channels,
    }
    arrayio.write_array(out / "recon_sheared", x, sheared_meta)
    cube = SpectralCube(data=op.unshear(x), grid=grid, kind="ac_only")
    arrayio.save_cube(out / "recon_cube", cube)
    _write_csv(
        out / "residuals.csv",
        ["iteration", "relative_residual", "objective"],
        [
            [i + 1, repr(r), repr(o)]
            for i, (r, o) in enumerate(
                zip(state.residual_history, state.objective_history)
            )
        ],
    )
    report.residual_plot(
        state.residual_history, out / "residuals.png", state.objective_history
    )
    if cfg["save_state"]:
        state.save(out / "state")
    dump_manifest(
        out / "manifest.yaml",
        {
            "command": "reconstruct",
            "effective_config": cfg,
            "derived": {
                "iterations": state.iteration,
                "final_residual": state.residual_history[-1],
            },
            "files": {
                "recon_sheared": "recon_sheared",
                "recon_cube": "recon_cube",
                "residuals": "residuals.csv",
                "residual_plot": "residuals.png",
            },
        },
    )
    print(
        f"reconstruct: {state.iteration} iterations, "
        f"relative residual {state.residual_history[-1]:.4f}"
    )
    return EXIT_OK


# -- decode -----------------------------------------------------------------


def cmd_decode(args) -> int:
    cube = arrayio.load_cube(args.cube)
    decoded = decode_depth(cube)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    peak = float(decoded.data.max())
    scale = peak / 65535.0 if peak > 0 else 1.0
    names = []
    for z in range(decoded.depth.num_planes):
        plane = decoded.data[:, :, z]
        img = np.round(plane / peak * 65535.0).astype(np.uint16) if peak > 0 else (
            np.zeros(plane.shape, dtype=np.uint16)
        )
        name = f"plane_{z:03d}.pgm"
        arrayio.write_pgm16(out / name, img)
        names.append(name)
    arrayio.write_array(
        out / "decoded_volume",
        decoded.data,
        {
            "contains": "decoded-volume",
            "axes": "x y z",
            "plane_spacing_um": repr(decoded.depth.plane_spacing_um),
            "origin_um": repr(decoded.depth.origin_um),
        },
    )
    profile = decoded.axial_profile()
    _write_csv(
        out / "axial_profile.csv",
        ["z_bin", "z_um", "mean_amplitude"],
        [
            [z, repr(float(decoded.depth.planes_um[z])), repr(float(profile[z]))]
            for z in range(profile.size)
        ],
    )
    dump_manifest(
        out / "manifest.yaml",
        {
            "command": "decode",
            "derived": {
                "num_planes": decoded.depth.num_planes,
                "plane_spacing_um": decoded.depth.plane_spacing_um,
                "pgm_scale": scale,
            },
            "files": {
                "volume": "decoded_volume",
                "planes": names,
                "axial_profile": "axial_profile.csv",
            },
        },
    )
    print(f"decode: {decoded.depth.num_planes} planes -> {out}")
    return EXIT_OK


# -- characterize --------------------------------------------------------------


def cmd_characterize(args) -> int:
    from . import experiments, report

    cfg = load_config(args.config, "characterize")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    solver = experiments.solver_config_from(cfg["solver"])
    rows = []
    files = {"metrics": "metrics.csv"}

    if "axial" in cfg["protocols"]:
        ax_cfg = cfg["axial"]
        profiles = []
        for fwhm in ax_cfg["bandwidths_nm"]:
            r = experiments.axial_resolution_experiment(
                float(fwhm),
                num_channels=int(ax_cfg["num_channels"]),
                lateral_shape=tuple(ax_cfg["lateral_shape"]),
                plane_index=int(ax_cfg["plane_index"]),
                mask_seed=int(ax_cfg["mask_seed"]),
                grid_cfg=cfg["grid"],
                solver=solver,
            )
            rows.append(
                ["axial", ax_cfg["num_channels"], f"fwhm_um@{fwhm}nm",
                 _fmt(r.measured_fwhm_um), _fmt(r.theory_fwhm_um)]
            )
            profiles.append(
                (f"bandwidth {fwhm} nm", r.depth.planes_um, r.profile,
                 r.measured_fwhm_um)
            )
            _write_csv(
                out / f"axial_profile_{fwhm}nm.csv",
                ["z_um", "mean_amplitude"],
                [[repr(float(z)), repr(float(a))]
                 for z, a in zip(r.depth.planes_um, r.profile)],
            )
        report.axial_profile_plot(profiles, out / "axial_profiles.png")
        files["axial_plot"] = "axial_profiles.png"

    if "lateral" in cfg["protocols"]:
        lat_cfg = cfg["lateral"]
        finest_rows = []
        for cr in lat_cfg["cr_list"]:
            r = experiments.lateral_resolution_experiment(
                int(cr),
                bar_widths_px=[int(w) for w in lat_cfg["bar_widths_px"]],
                lateral_shape=tuple(lat_cfg["lateral_shape"]),
                mask_seed=int(lat_cfg["mask_seed"]),
                noise_seed=int(lat_cfg["noise_seed"]),
                grid_cfg=cfg["grid"],
                solver=solver,
            )
            finest = r.finest_period_px
            rows.append(
                ["lateral", cr, "finest_period_px",
                 "unresolved" if finest is None else finest, ""]
            )
            for period, dip in sorted(r.dips.items()):
                rows.append(["lateral", cr, f"dip@period{period}", _fmt(dip), ""])
            if finest is not None:
                finest_rows.append((cr, finest))
            entries = [
                (f"CR {cr}, period {p}px", prof, r.dips[p])
                for p, prof in sorted(r.profiles.items())
            ]
            report.bar_profile_plot(entries, out / f"lateral_profiles_cr{cr}.png")
            files[f"lateral_plot_cr{cr}"] = f"lateral_profiles_cr{cr}.png"
        if finest_rows:
            report.metric_vs_cr_plot(
                finest_rows, out / "lateral_vs_cr.png", "finest period (px)"
            )
            files["lateral_vs_cr_plot"] = "lateral_vs_cr.png"

    if "sensitivity" in cfg["protocols"]:
        sen_cfg = cfg["sensitivity"]
        for seed in sen_cfg["seeds"]:
            r = experiments.sensitivity_experiment(
                seed=int(seed),
                num_channels=int(sen_cfg["num_channels"]),
                lateral_shape=tuple(sen_cfg["lateral_shape"]),
                plane_bin=int(sen_cfg["plane_bin"]),
                fwhm_bandwidth_nm=float(sen_cfg["fwhm_bandwidth_nm"]),
                floor_start_bin=int(sen_cfg["floor_start_bin"]),
                full_well_e=float(sen_cfg["full_well_e"]),
                grid_cfg=cfg["grid"],
            )
            rows.append(
                ["sensitivity", sen_cfg["num_channels"], f"seed{seed}_db",
                 _fmt(r.measured_db), _fmt(r.theory_db)]
            )

    if "benchmark" in cfg["protocols"]:
        b_cfg = cfg["benchmark"]
        r = experiments.two_layer_benchmark(
            lateral_shape=tuple(b_cfg["lateral_shape"]),
            num_channels=int(b_cfg["num_channels"]),
            mask_seed=int(b_cfg["mask_seed"]),
            stagger_px=int(b_cfg["stagger_px"]),
            grid_cfg=cfg["grid"],
            solver=solver,
        )
        rows.append(
            ["benchmark", b_cfg["num_channels"], "final_residual",
             _fmt(r.final_residual), ""]
        )
        rows.append(
            ["benchmark", b_cfg["num_channels"], "psnr_gain_db",
             _fmt(r.psnr_gain_db), ""]
        )
        report.residual_plot(r.residual_history, out / "benchmark_residuals.png")
        files["benchmark_plot"] = "benchmark_residuals.png"

    _write_csv(
        out / "metrics.csv",
        ["protocol", "compression_ratio", "metric", "value", "reference"],
        rows,
    )
    dump_manifest(
        out / "manifest.yaml",
        {"command": "characterize", "effective_config": cfg, "files": files},
    )
    print(f"characterize: {len(rows)} metric rows -> {out}")
    return EXIT_OK


# -- oracle -----------------------------------------------------------------


def cmd_oracle(args) -> int:
    from .containers import CodedAperture

    nx, ny, nl = args.dims
    rng = np.random.default_rng(args.seed)
    lines = []
    ok = True

    mask = CodedAperture(pattern=rng.random((nx, ny)))
    op = SensingOperator(mask, num_channels=nl)
    worst = 0.0
    for _ in range(15):
        x = rng.standard_normal((nx, op.width, nl))
        y = rng.standard_normal(op.measurement_shape)
        lhs = float(np.sum(op.forward_sheared(x) * y))
        rhs = float(np.sum(x * op.adjoint_sheared(y)))
        worst = max(worst, abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300))
    passed = worst <= 1e-12
    ok &= passed
    lines.append(
        f"{'PASS' if passed else 'FAIL'} adjoint identity: worst relative "
        f"error {worst:.3e} (limit 1e-12, 15 instances)"
    )

    if nx * ny * nl <= 10_000:
        phi = op.dense_matrix()
        xs = rng.random((nx, op.width, nl))
        xvec = np.concatenate([xs[:, :, k].ravel() for k in range(nl)])
        y_dense = (phi @ xvec).reshape(op.measurement_shape)
        y_fast = op.forward_sheared(xs)
        tol = 4 * np.spacing(np.maximum(np.abs(y_dense), np.abs(y_fast)))
        passed = bool(np.all(np.abs(y_dense - y_fast) <= tol))
        ok &= passed
        lines.append(
            f"{'PASS' if passed else 'FAIL'} dense-oracle equivalence "
            f"(<= 4 ulp elementwise)"
        )
        gram_diag = np.diag(phi @ phi.T).reshape(op.measurement_shape)
        err = float(np.abs(gram_diag - op.psi()).max())
        passed = err <= 1e-12 * max(float(op.psi().max()), 1.0)
        ok &= passed
        lines.append(
            f"{'PASS' if passed else 'FAIL'} psi equals diag(Phi Phi^T): "
            f"max abs error {err:.3e}"
        )
    else:
        lines.append("SKIP dense-oracle checks (instance above the size guard)")

    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text)
    if not ok:
        raise SolverError("oracle checks failed")
    return EXIT_OK


# -- dataset -----------------------------------------------------------------


def cmd_dataset(args) -> int:
    from . import pipeline
    from .containers import DepthGrid
    from .interferometer import encode_depth
    from .noise import NoiseConfig, apply_shot_noise, quantize
    from .phantoms import glyph_layer, sample_glyph_poses

    cfg = load_config(args.config, "dataset")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    shape = tuple(int(s) for s in cfg["lateral_shape"])
    grid = pipeline.grid_from(cfg["grid"])
    depth = DepthGrid.from_spectral(grid)
    source = pipeline.source_from(cfg["source"], grid)
    mask = pipeline.mask_from(cfg["mask"], shape)
    camera = pipeline.camera_from(cfg["camera"])
    op = SensingOperator(mask, num_channels=grid.num_channels)
    count = int(cfg["count"])
    n_val = max(1, round(count * float(cfg["val_fraction"]))) if count > 1 else 0
    poses = sample_glyph_poses(
        count,
        shape,
        num_planes=depth.num_planes,
        seed=int(cfg["pose_seed"]),
        max_chars=int(cfg["glyph"]["max_chars"]),
        scale=int(cfg["glyph"]["scale"]),
        rotations=[float(r) for r in cfg["glyph"]["rotations"]],
    )
    realizations = int(cfg["noise"]["realizations"]) if cfg["noise"]["enabled"] else 1

    def truth_for(pose):
        vol = glyph_layer(
            pose.text,
            shape,
            pose.plane_index,
            depth,
            offset=pose.offset,
            rotation_deg=pose.rotation_deg,
            scale=int(cfg["glyph"]["scale"]),
        )
        return encode_depth(vol, source)

    # pass 1: the global target scale maps every sheared truth into (-1, 1)
    peak = 0.0
    for pose in poses:
        enc = truth_for(pose)
        peak = max(peak, float(np.abs(enc.ac.data).max()))
    target_scale = peak / 0.95 if peak > 0 else 1.0

    arrayio.save_mask(out / "mask", mask)
    entries = []
    base_seed = int(cfg["noise"]["seed"])
    for idx, pose in enumerate(poses):
        enc = truth_for(pose)
        sheared_truth = op.shear(enc.ac.data)
        sample_dir = out / f"sample_{idx:05d}"
        meta = {
            "center_wavelength_nm": repr(grid.center_wavelength_nm),
            "channel_spacing_nm": repr(grid.channel_spacing_nm),
            "num_channels": grid.num_channels,
            "target_scale": repr(target_scale),
        }
        arrayio.write_array(
            sample_dir / "target",
            sheared_truth / target_scale,
            {"contains": "dataset-target", "axes": "x yshear lambda", **meta},
        )
        frames = [
            op.forward(c.data)
            for c in (enc.total, enc.dc_reference, enc.dc_sample)
        ]
        input_names = []
        for r in range(realizations):
            if cfg["noise"]["enabled"]:
                scale_cfg = cfg["noise"]["photon_scale_e"]
                if scale_cfg is None:
                    raise ConfigError("dataset noise requires photon_scale_e")
                scale = (
                    camera.full_well_e / float(frames[0].max())
                    if scale_cfg == "full_well"
                    else float(scale_cfg)
                )
                noisy = []
                for i, frame in enumerate(frames):
                    seed = base_seed + (idx * realizations + r) * 3 + i
                    shot = apply_shot_noise(
                        frame, NoiseConfig(photon_scale_e=scale, seed=seed)
                    )
                    noisy.append(quantize(shot * scale, camera) / scale)
                y_ac = noisy[0] - noisy[1] - noisy[2]
            else:
                y_ac = frames[0] - frames[1] - frames[2]
            net_input = op.normalized_backprojection(y_ac) / target_scale
            name = f"input_r{r}"
            arrayio.write_array(
                sample_dir / name,
                net_input,
                {"contains": "dataset-input", "axes": "x yshear lambda", **meta},
            )
            input_names.append(name)
        entries.append(
            {
                "id": idx,
                "split": "val" if idx >= count - n_val else "train",
                "text": pose.text,
                "offset": list(pose.offset),
                "rotation_deg": pose.rotation_deg,
                "plane_index": pose.plane_index,
                "directory": f"sample_{idx:05d}",
                "target": "target",
                "inputs": input_names,
            }
        )
    dump_manifest(
        out / "manifest.yaml",
        {
            "command": "dataset",
            "effective_config": cfg,
            "derived": {
                "target_scale": target_scale,
                "sheared_shape": [op.nx, op.width, op.num_channels],
                "num_train": count - n_val,
                "num_val": n_val,
            },
            "files": {"mask": "mask"},
            "entries": entries,
        },
    )
    print(f"dataset: {count} samples ({n_val} validation) -> {out}")
    return EXIT_OK


# -- entry point -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog=PROG,
        description="snapshot interferometric 3D imaging: simulation, "
        "reconstruction, depth decoding and characterization",
    )
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="forward-simulate a phantom into camera frames")
    s.add_argument("--config", "-c", default=None, help="YAML config file")
    s.add_argument("--out", "-o", required=True, help="output directory")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("reconstruct", help="ADMM reconstruction of a simulated run")
    s.add_argument("--measurement", "-m", required=True,
                   help="simulate output directory")
    s.add_argument("--config", "-c", default=None)
    s.add_argument("--out", "-o", required=True)
    s.set_defaults(func=cmd_reconstruct)

    s = sub.add_parser("decode", help="Fourier depth decoding of a spectral cube")
    s.add_argument("--cube", "-i", required=True, help="cube container (base path)")
    s.add_argument("--out", "-o", required=True)
    s.set_defaults(func=cmd_decode)

    s = sub.add_parser("characterize", help="resolution and sensitivity protocols")
    s.add_argument("--config", "-c", default=None)
    s.add_argument("--out", "-o", required=True)
    s.set_defaults(func=cmd_characterize)

    s = sub.add_parser("oracle", help="operator self-checks against the dense oracle")
    s.add_argument("--dims", nargs=3, type=int, default=[6, 6, 4],
                   metavar=("NX", "NY", "NL"))
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", "-o", default=None, help="optional report file")
    s.set_defaults(func=cmd_oracle)

    s = sub.add_parser("dataset", help="simulated training pairs for learned inversion")
    s.add_argument("--config", "-c", default=None)
    s.add_argument("--out", "-o", required=True)
    s.set_defaults(func=cmd_dataset)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, PhantomError) as exc:
        print(f"ERROR code={EXIT_CONFIG} kind=config msg={exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (
        SolverError,
        FitError,
        EncodingError,
        ValidationError,
        SensingDimensionError,
        ValueError,
    ) as exc:
        print(f"ERROR code={EXIT_NUMERICAL} kind=numerical msg={exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"ERROR code={EXIT_IO} kind=io msg={exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
