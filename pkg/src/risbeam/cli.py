"""Command-line simulator around the library.

Every subcommand resolves a config (profile defaults plus optional JSON
overrides), runs one experiment, and writes its artifacts plus a manifest
(config, config hash, seed, library version, artifact hashes) into the
output directory. All writes are atomic and all randomness flows from the
recorded seed, so re-running a manifest's config reproduces the artifacts
byte for byte.
"""

import argparse
import hashlib
import json
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from .benchmarks import wmmse_sum_rate
from .codebook import (
    CodebookSpec,
    build_codebook,
    load_codebook,
    save_codebook,
)
from .config import (
    config_hash,
    db_to_amplitude,
    geometry_from_config,
    load_config,
    require_blocks,
)
from .geometry import build_channel_set
from .hybrid import hybrid_factorize
from .interference import FairnessParams, default_fairness_params, jain_index
from .solvers import IpddConfig
from .training import exhaustive_train, hierarchical_train


def _format_value(value):
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.12g}"
    return str(value)


def _atomic_write(path, data):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def export_csv(rows, path, columns=None):
    """Write dict rows as CSV with 12-significant-digit floats, atomically."""
    rows = list(rows)
    if not rows:
        raise ValueError("refusing to write an empty CSV")
    if columns is None:
        columns = list(rows[0].keys())
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_format_value(row[col]) for col in columns))
    _atomic_write(path, "\n".join(lines) + "\n")


def _write_json(payload, path):
    _atomic_write(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _sha256_file(path):
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_manifest(out_dir, subcommand, cfg, seed, artifacts):
    manifest = {
        "subcommand": subcommand,
        "config": cfg,
        "config_hash": config_hash(cfg),
        "seed": seed,
        "version": __version__,
        "artifacts": {
            name: _sha256_file(os.path.join(out_dir, name)) for name in artifacts
        },
    }
    _write_json(manifest, os.path.join(out_dir, "manifest.json"))
    return manifest


def _codebook_spec(cfg):
    require_blocks(cfg, ["codebook"])
    cb = cfg["codebook"]
    return CodebookSpec(
        x_range=tuple(cb["x_range_m"]),
        z_range=tuple(cb["z_range_m"]),
        s1_x=int(cb["s1_x"]),
        s1_z=int(cb["s1_z"]),
        s2_x=int(cb["s2_x"]),
        s2_z=int(cb["s2_z"]),
        gain=db_to_amplitude(float(cb["gain_db"])),
        bits=int(cb["bits"]),
        method=cb.get("method", "socc"),
        design_x=int(cb["design_x"]) if "design_x" in cb else None,
        design_z=int(cb["design_z"]) if "design_z" in cb else None,
    )


def _ipdd_config(bits, block=None):
    block = block or {}
    return IpddConfig(
        bits=bits,
        penalty_init=float(block.get("penalty_init", 10.0)),
        penalty_decay=float(block.get("penalty_decay", 0.8)),
        consensus_tol=float(block.get("consensus_tol", 1e-4)),
        max_outer_iters=int(block.get("max_outer_iters", 200)),
    )


def _ensure_codebook(cfg, out_dir):
    path = cfg.get("training", {}).get("codebook")
    if path:
        return load_codebook(path)
    geom = geometry_from_config(cfg)
    spec = _codebook_spec(cfg)
    return build_codebook(geom, spec, _ipdd_config(spec.bits, cfg.get("ipdd")))


def run_codebook_build(cfg, out_dir, seed=None):
    geom = geometry_from_config(cfg)
    spec = _codebook_spec(cfg)
    codebook = build_codebook(geom, spec, _ipdd_config(spec.bits, cfg.get("ipdd")))
    os.makedirs(out_dir, exist_ok=True)
    save_codebook(codebook, os.path.join(out_dir, "codebook.json"))
    rows = [
        {
            "level": cw.level,
            "region_index": cw.region_index,
            "objective": cw.objective,
            "power": float(np.linalg.norm(cw.bs_precoder) ** 2),
        }
        for level in codebook.levels
        for cw in level
    ]
    export_csv(rows, os.path.join(out_dir, "codebook_build.csv"))
    return _write_manifest(
        out_dir, "codebook-build", cfg, seed,
        ["codebook.json", "codebook_build.csv"],
    )


def run_train(cfg, out_dir, seed=None):
    require_blocks(cfg, ["training"])
    geom = geometry_from_config(cfg)
    train_cfg = cfg["training"]
    seed = train_cfg.get("seed") if seed is None else seed
    if seed is None:
        raise ValueError("training requires a seed (config training.seed or --seed)")
    codebook = _ensure_codebook(cfg, out_dir)
    spec = _codebook_spec(cfg)
    placements = int(train_cfg.get("placements", 25))
    noisy = train_cfg.get("noise", "off") == "awgn"
    snr_db = float(train_cfg.get("snr_db", 6.0))
    rng = np.random.default_rng(seed)

    probe_rows = []
    summaries = []
    for placement in range(placements):
        x = rng.uniform(*spec.x_range)
        z = rng.uniform(*spec.z_range)
        user = (x, geom.user_plane_y_m, z)
        noise_power = geom.noise_power_w
        if noisy:
            # calibrate the probe noise to the requested SNR at the
            # noise-free best leaf
            best = exhaustive_train(codebook, geom, user, geom.noise_power_w)
            peak = best.selected_snr * geom.noise_power_w
            noise_power = peak / 10.0 ** (snr_db / 10.0)
        result = hierarchical_train(
            codebook, geom, user, noise_power, rng=rng if noisy else None
        )
        for level, region_index, snr in result.probe_log:
            probe_rows.append(
                {
                    "placement": placement,
                    "level": level,
                    "region_index": region_index,
                    "snr_db": 10.0 * np.log10(snr) if snr > 0 else -np.inf,
                }
            )
        (x_lo, x_hi), (z_lo, z_hi) = _leaf_region(codebook, result.selected_path[-1])
        summaries.append(
            {
                "placement": placement,
                "true_xz": [x, z],
                "estimated_xz": list(result.estimated_user_xz),
                "contained": bool(x_lo <= x <= x_hi and z_lo <= z <= z_hi),
                "probes_used": result.probes_used,
                "achieved_rate": result.achieved_rate,
                "selected_path": result.selected_path,
            }
        )
    export_csv(probe_rows, os.path.join(out_dir, "training_probes.csv"))
    _write_json(
        {"placements": summaries, "snr_db": snr_db, "noise": train_cfg.get("noise", "off")},
        os.path.join(out_dir, "training_summary.json"),
    )
    return _write_manifest(
        out_dir, "train", cfg, seed,
        ["training_probes.csv", "training_summary.json"],
    )


def _leaf_region(codebook, region_index):
    for cw in codebook.levels[-1]:
        if cw.region_index == region_index:
            return cw.region
    raise ValueError(f"no leaf with region index {region_index}")


def _user_positions(cfg, geom, block_name, rng):
    block = cfg[block_name]
    if "user_positions_m" in block:
        return [tuple(p) for p in block["user_positions_m"]]
    require_blocks(cfg, ["codebook"])
    k = int(block["k_users"])
    xr = cfg["codebook"]["x_range_m"]
    zr = cfg["codebook"]["z_range_m"]
    return [
        (rng.uniform(*xr), geom.user_plane_y_m, rng.uniform(*zr)) for _ in range(k)
    ]


def run_im(cfg, out_dir, seed=None):
    require_blocks(cfg, ["im"])
    geom = geometry_from_config(cfg)
    im_cfg = cfg["im"]
    seed = im_cfg.get("seed") if seed is None else seed
    if seed is None:
        raise ValueError("im requires a seed (config im.seed or --seed)")
    rng = np.random.default_rng(seed)
    positions = _user_positions(cfg, geom, "im", rng)
    channels = build_channel_set(geom, positions)
    bits = int(im_cfg.get("bits", 3))
    params = _fairness_from_config(im_cfg, geom, len(positions))
    result = _run_im_solver(geom, channels, params, im_cfg, bits)
    export_csv(result.trace, os.path.join(out_dir, "im_trace.csv"))
    _write_json(
        {
            "best_iteration": result.best_iteration,
            "jain": result.best.jain,
            "sum_rate": result.best.sum_rate,
            "rates": [float(r) for r in result.best.rates],
            "phase_indices": [int(i) for i in result.best.ris_phases.indices],
            "phase_bits": result.best.ris_phases.bits,
            "user_positions_m": [list(p) for p in positions],
        },
        os.path.join(out_dir, "im_result.json"),
    )
    return _write_manifest(
        out_dir, "im", cfg, seed, ["im_trace.csv", "im_result.json"]
    )


def _fairness_from_config(im_cfg, geom, k_users):
    defaults = default_fairness_params(geom.max_power_w, k_users)
    return FairnessParams(
        alpha=float(im_cfg.get("alpha", defaults.alpha)),
        beta=float(im_cfg.get("beta", defaults.beta)),
        gamma1=float(im_cfg.get("gamma1", defaults.gamma1)),
        gamma2=float(im_cfg.get("gamma2", defaults.gamma2)),
        gamma3=float(im_cfg.get("gamma3", defaults.gamma3)),
        step=float(im_cfg.get("step", defaults.step)),
        perturb=float(im_cfg.get("perturb", defaults.perturb)),
    )


def _run_im_solver(geom, channels, params, im_cfg, bits):
    from .interference import run_im as run_im_solver

    return run_im_solver(
        geom,
        channels.cascaded,
        params,
        _ipdd_config(bits, im_cfg.get("ipdd")),
        phase_method=im_cfg.get("phase_method", "ipdd"),
        iters=int(im_cfg.get("adapt_iters", 10)),
        inner_rounds=int(im_cfg.get("inner_rounds", 10)),
        probe_rounds=int(im_cfg.get("probe_rounds", 5)),
    )


def run_wmmse(cfg, out_dir, seed=None):
    require_blocks(cfg, ["benchmark", "im"])
    geom = geometry_from_config(cfg)
    bench = cfg["benchmark"]
    seed = bench.get("seed") if seed is None else seed
    if seed is None:
        raise ValueError("wmmse requires a seed (config benchmark.seed or --seed)")
    rng = np.random.default_rng(seed)
    positions = _user_positions(cfg, geom, "im", rng)
    channels = build_channel_set(geom, positions)
    bits = int(bench.get("bits", 3))
    state = wmmse_sum_rate(
        channels.cascaded,
        _ipdd_config(bits, bench.get("ipdd")),
        geom.max_power_w,
        geom.noise_power_w,
        iters=int(bench.get("iters", 50)),
    )
    from .benchmarks import achievable_rates

    rows = []
    for it, sum_rate in enumerate(state.sum_rate_trace, start=1):
        rows.append({"iteration": it, "sum_rate": sum_rate})
    rates = achievable_rates(
        channels.cascaded, state.w_matrix, state.ris_phases.values,
        geom.noise_power_w,
    )
    for k, rate in enumerate(rates):
        rows[-1][f"rate_{k + 1}"] = float(rate)
    columns = ["iteration", "sum_rate"] + [f"rate_{k + 1}" for k in range(len(rates))]
    for row in rows:
        for col in columns:
            row.setdefault(col, "")
    export_csv(rows, os.path.join(out_dir, "wmmse_trace.csv"), columns=columns)
    _write_json(
        {
            "sum_rate": state.sum_rate_trace[-1] if state.sum_rate_trace else None,
            "rates": [float(r) for r in rates],
            "jain": jain_index(rates),
            "user_positions_m": [list(p) for p in positions],
        },
        os.path.join(out_dir, "wmmse_result.json"),
    )
    return _write_manifest(
        out_dir, "wmmse", cfg, seed, ["wmmse_trace.csv", "wmmse_result.json"]
    )


def run_hybrid(cfg, out_dir, seed=None):
    require_blocks(cfg, ["hybrid", "codebook"])
    geom = geometry_from_config(cfg)
    hyb = cfg["hybrid"]
    spec = _codebook_spec(cfg)
    from .codebook import desired_pattern, level1_grid, solve_socc

    grid = level1_grid(spec)
    region_index = int(hyb.get("region_index", 0))
    pattern = desired_pattern(grid, grid.cell(region_index), spec.gain)
    codeword = solve_socc(
        geom, grid, pattern, _ipdd_config(spec.bits, cfg.get("ipdd"))
    )
    bits = int(hyb.get("bits", spec.bits))
    result = hybrid_factorize(
        codeword.bs_precoder,
        int(hyb["m_rf"]),
        bits,
        _ipdd_config(bits, hyb.get("ipdd")),
        geom.max_power_w,
        rounds=int(hyb.get("rounds", 10)),
    )
    rows = [
        {"round": i, "residual": res}
        for i, res in enumerate(result.residual_trace)
    ]
    export_csv(rows, os.path.join(out_dir, "hybrid_trace.csv"))
    _write_json(
        {
            "residual": result.residual,
            "target_power": float(np.linalg.norm(codeword.bs_precoder) ** 2),
            "effective_power": float(np.linalg.norm(result.effective) ** 2),
            "digital": [[v.real, v.imag] for v in result.digital],
            "analog_indices": [[int(v) for v in row] for row in result.analog_indices],
            "bits": result.bits,
        },
        os.path.join(out_dir, "hybrid_result.json"),
    )
    return _write_manifest(
        out_dir, "hybrid", cfg, seed, ["hybrid_trace.csv", "hybrid_result.json"]
    )


def _apply_override(cfg, dotted, value):
    parts = dotted.split(".")
    node = cfg
    for part in parts[:-1]:
        if part not in node or not isinstance(node[part], dict):
            raise ValueError(f"sweep parameter path '{dotted}' not in config")
        node = node[part]
    if parts[-1] not in node:
        raise ValueError(f"sweep parameter path '{dotted}' not in config")
    node[parts[-1]] = value


def _sweep_point(args):
    cfg, target, parameter, value, seed = args
    import copy as _copy

    point_cfg = _copy.deepcopy(cfg)
    _apply_override(point_cfg, parameter, value)
    geom = geometry_from_config(point_cfg)
    rng = np.random.default_rng(seed)
    positions = _user_positions(point_cfg, geom, "im", rng)
    channels = build_channel_set(geom, positions)
    if target == "wmmse":
        bench = point_cfg["benchmark"]
        bits = int(bench.get("bits", 3))
        state = wmmse_sum_rate(
            channels.cascaded,
            _ipdd_config(bits, bench.get("ipdd")),
            geom.max_power_w,
            geom.noise_power_w,
            iters=int(bench.get("iters", 50)),
        )
        from .benchmarks import achievable_rates

        rates = achievable_rates(
            channels.cascaded, state.w_matrix, state.ris_phases.values,
            geom.noise_power_w,
        )
        return {
            "parameter": parameter,
            "value": value,
            "sum_rate": float(np.sum(rates)),
            "jain": jain_index(rates),
            "seed": seed,
        }
    if target == "im":
        im_cfg = point_cfg["im"]
        bits = int(im_cfg.get("bits", 3))
        params = _fairness_from_config(im_cfg, geom, len(positions))
        result = _run_im_solver(geom, channels, params, im_cfg, bits)
        return {
            "parameter": parameter,
            "value": value,
            "sum_rate": result.best.sum_rate,
            "jain": result.best.jain,
            "seed": seed,
        }
    raise ValueError("sweep target must be 'im' or 'wmmse'")


def run_sweep(cfg, out_dir, seed=None):
    require_blocks(cfg, ["sweep"])
    sweep = cfg["sweep"]
    for key in ("target", "parameter", "values"):
        if key not in sweep:
            raise ValueError(f"config block 'sweep' is missing '{key}'")
    seed = sweep.get("seed", cfg.get("im", {}).get("seed")) if seed is None else seed
    if seed is None:
        raise ValueError("sweep requires a seed")
    jobs = [
        (cfg, sweep["target"], sweep["parameter"], value, seed)
        for value in sweep["values"]
    ]
    workers = int(sweep.get("workers", 1))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_point, jobs))
    else:
        rows = [_sweep_point(job) for job in jobs]
    export_csv(rows, os.path.join(out_dir, "sweep.csv"))
    return _write_manifest(out_dir, "sweep", cfg, seed, ["sweep.csv"])


_RUNNERS = {
    "codebook-build": run_codebook_build,
    "train": run_train,
    "im": run_im,
    "wmmse": run_wmmse,
    "hybrid": run_hybrid,
    "sweep": run_sweep,
}


def run_experiment(subcommand, cfg, out_dir, seed=None):
    """Run one named experiment on a resolved config; returns the manifest."""
    if subcommand not in _RUNNERS:
        raise ValueError(f"unknown subcommand '{subcommand}'")
    os.makedirs(out_dir, exist_ok=True)
    return _RUNNERS[subcommand](cfg, out_dir, seed=seed)


def _add_common(parser):
    parser.add_argument("--config", default=None, help="JSON config overrides")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument(
        "--profile", choices=("desk", "paper"), default="desk",
        help="base parameter profile",
    )


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="risbeam",
        description="near-field codebook, beam-training and precoding simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    codebook = sub.add_parser("codebook", help="codebook operations")
    codebook_sub = codebook.add_subparsers(dest="codebook_command", required=True)
    build = codebook_sub.add_parser("build", help="train every codeword")
    _add_common(build)

    for name, help_text in (
        ("train", "hierarchical beam training over random placements"),
        ("im", "fairness-adaptive interference management"),
        ("wmmse", "weighted-MMSE sum-rate baseline"),
        ("hybrid", "hybrid factorization of a trained codeword"),
        ("sweep", "parameter sweep over im or wmmse runs"),
    ):
        _add_common(sub.add_parser(name, help=help_text))

    args = parser.parse_args(argv)
    command = args.command
    if command == "codebook":
        command = "codebook-build"
    cfg = load_config(args.config, profile=args.profile)
    out_dir = args.out or cfg.get("output", "out")
    manifest = run_experiment(command, cfg, out_dir, seed=args.seed)
    print(f"wrote {len(manifest['artifacts'])} artifacts to {out_dir}")
    return 0


if __name__ == "__main__":
    main()
