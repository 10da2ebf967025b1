"""Batch command-line interface: sweeps, stream generation/analysis, reports.

Subcommands write diffable CSV files plus a JSON summary embedding the full
configuration echo and a content hash of the frozen circuit constants.  No
wall-clock data enters any output, so re-running a configuration reproduces
files byte for byte.

Exit codes: 0 success, 2 configuration/input error, 3 numerical-contract
violation (for example a sign-gate solve failure or an estimation abort).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from . import circuits, cnot, constants, entangle, fock, hom, source, timetag

WORKERS_ENV = "PNCSIM_WORKERS"


class ConfigError(ValueError):
    pass


def _load_config(path: Optional[str]) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config file must hold a JSON object")
    return cfg


def _merge(defaults: dict, file_cfg: dict, flags: dict) -> dict:
    """Precedence: flag > file > default."""
    out = dict(defaults)
    for key, val in file_cfg.items():
        if key not in defaults:
            raise ConfigError(f"unknown config key {key!r}")
        out[key] = val
    for key, val in flags.items():
        if val is not None:
            out[key] = val
    return out


def _config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()


def _parse_floats(text: str) -> list[float]:
    try:
        return [float(eval(tok, {"__builtins__": {}}, {"pi": math.pi}))
                for tok in text.split(",") if tok.strip()]
    except Exception as exc:
        raise ConfigError(f"cannot parse float list {text!r}: {exc}") from exc


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    return format(float(x), ".12g")


def _write_csv(path: Path, header: str, rows: Sequence[Sequence]) -> None:
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _write_summary(path: Path, cfg: dict, payload: dict) -> None:
    doc = {"config": cfg, "config_hash": _config_hash(cfg),
           "constants_hash": constants.circuit_constants_hash()}
    doc.update(payload)
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}")
    return max(1, n)


def _map_indexed(fn, items: list):
    """Evaluate fn over items, optionally on parallel workers, order-stable."""
    workers = _worker_count()
    if workers == 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# hom-sweep


_HOM_DEFAULTS = {
    "thetas": [0.1 * k * math.pi for k in range(1, 10)],
    "phis": "averaged",
    "ms": [1.0],
    "window": 5,
    "quadrature_points": 64,
}


def _hom_point(args):
    theta, phi, m, window, qp = args
    return hom.sweep_point(theta, phi, m, window=window, quadrature_points=qp)


def cmd_hom_sweep(ns: argparse.Namespace) -> int:
    cfg = _merge(_HOM_DEFAULTS, _load_config(ns.config), {
        "thetas": _parse_floats(ns.thetas) if ns.thetas else None,
        "phis": (ns.phis if ns.phis == "averaged"
                 else _parse_floats(ns.phis)) if ns.phis else None,
        "ms": _parse_floats(ns.ms) if ns.ms else None,
        "window": ns.window,
    })
    out_dir = Path(ns.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    phis = cfg["phis"] if isinstance(cfg["phis"], list) else [cfg["phis"]]
    grid = [(t, p, m, cfg["window"], cfg["quadrature_points"])
            for t in cfg["thetas"] for p in phis for m in cfg["ms"]]
    points = _map_indexed(_hom_point, grid)
    rows = [[p["theta"], p["phi"], p["m"], p["g2_k0"], p["g2_k1"], p["g2_kfar"],
             p["vhom"], p["c1"], p["ratio"]] for p in points]
    _write_csv(out_dir / "hom_sweep.csv", hom.SWEEP_HEADER, rows)
    ratios = [p["ratio"] for p in points]
    _write_summary(out_dir / "hom_sweep_summary.json", cfg, {
        "rows": len(rows),
        "ratio_min": min(ratios),
        "ratio_max": max(ratios),
        "g2_kfar_min": min(p["g2_kfar"] for p in points),
        "vhom_range": [min(p["vhom"] for p in points),
                       max(p["vhom"] for p in points)],
        "outputs": ["hom_sweep.csv"],
    })
    print(f"wrote {out_dir / 'hom_sweep.csv'} ({len(rows)} rows)")
    return 0


# ---------------------------------------------------------------------------
# cnot


_CNOT_DEFAULTS = {
    "grid_start": 0.3,
    "grid_stop": 1.0,
    "grid_step": 0.01,
    "alphas": [0.0, 0.0, 0.0, 0.0],
    "optimize_at": [0.6],
    "include_incoherent": True,
}

CNOT_HEADER = "theta,alpha1,alpha2,alpha3,alpha4,p_herald,fidelity,p4,bayes_f"


def _cnot_rows(points, alphas):
    return [[p.theta, *alphas, p.p_herald, p.fidelity, p.p4, p.bayes_f]
            for p in points]


def cmd_cnot(ns: argparse.Namespace) -> int:
    cfg = _merge(_CNOT_DEFAULTS, _load_config(ns.config), {
        "grid_start": ns.grid_start,
        "grid_stop": ns.grid_stop,
        "grid_step": ns.grid_step,
        "alphas": _parse_floats(ns.alphas) if ns.alphas else None,
        "optimize_at": _parse_floats(ns.optimize_at) if ns.optimize_at else None,
    })
    if len(cfg["alphas"]) != 4:
        raise ConfigError("alphas needs exactly four phases")
    out_dir = Path(ns.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    n_steps = int(round((cfg["grid_stop"] - cfg["grid_start"]) / cfg["grid_step"]))
    grid = [min((cfg["grid_start"] + k * cfg["grid_step"]), 1.0) * math.pi
            for k in range(n_steps + 1)]
    phase_cfg = cnot.PhaseConfig(tuple(cfg["alphas"]))
    coherent = cnot.sweep_theta(grid, phase_cfg)
    _write_csv(out_dir / "cnot_coherent.csv", CNOT_HEADER,
               _cnot_rows(coherent, phase_cfg.alphas))
    outputs = ["cnot_coherent.csv"]
    summary = {
        "coherent_peak_p_herald": max(p.p_herald for p in coherent),
        "coherent_peak_theta": max(coherent, key=lambda p: p.p_herald).theta,
        "theta_pi_p_herald": coherent[-1].p_herald,
    }
    if cfg["include_incoherent"]:
        incoherent = cnot.sweep_theta(grid, incoherent=True)
        _write_csv(out_dir / "cnot_incoherent.csv", CNOT_HEADER,
                   _cnot_rows(incoherent, (0.0, 0.0, 0.0, 0.0)))
        outputs.append("cnot_incoherent.csv")
        summary["incoherent_peak_p_herald"] = max(p.p_herald for p in incoherent)
        summary["bayes_residual_max"] = max(
            abs(p.fidelity - p.bayes_f) for p in incoherent if p.p_herald > 0)
    opt_rows = []
    for frac in cfg["optimize_at"]:
        theta = frac * math.pi
        for objective in ("max", "min"):
            config, p, fid = cnot.optimize_phases(theta, objective)
            p1 = math.sin(theta / 2.0) ** 2
            opt_rows.append([theta, *config.alphas, p, fid, p1 ** 4,
                             cnot.bayes_fidelity(p1, p)])
            summary[f"p_herald_{objective}_at_{frac:g}pi"] = p
    if opt_rows:
        _write_csv(out_dir / "cnot_optimized.csv", CNOT_HEADER, opt_rows)
        outputs.append("cnot_optimized.csv")
    summary["outputs"] = outputs
    _write_summary(out_dir / "cnot_summary.json", cfg, summary)
    print(f"wrote {len(outputs)} CSV files to {out_dir}")
    return 0


# ---------------------------------------------------------------------------
# timetag


_GEN_DEFAULTS = {
    "theta": 0.22 * math.pi,
    "alpha": 0.0,
    "m": 1.0,
    "p2": None,
    "n_pulses": 100_000,
    "efficiency": 1.0,
    "efficiency_2": None,
    "pulse_period_ps": timetag.TAU_P_DEFAULT_PS,
    "seed": 0,
    "drift_kind": "sinusoid",
    "drift_period_pulses": 200_000.0,
    "drift_amplitude": math.pi,
    "drift_step_rad": 0.01,
    "drift_seed": 0,
}


def cmd_timetag_gen(ns: argparse.Namespace) -> int:
    cfg = _merge(_GEN_DEFAULTS, _load_config(ns.config), {
        "theta": ns.theta, "m": ns.m, "n_pulses": ns.n_pulses,
        "efficiency": ns.efficiency, "seed": ns.seed,
        "drift_kind": ns.drift_kind,
    })
    spec = source.SourcePulseSpec(theta=cfg["theta"], alpha=cfg["alpha"],
                                  m_overlap=cfg["m"], p2=cfg["p2"])
    drift = timetag.DriftModel(
        kind=cfg["drift_kind"], period_pulses=cfg["drift_period_pulses"],
        amplitude=cfg["drift_amplitude"], step_rad=cfg["drift_step_rad"],
        seed=cfg["drift_seed"])
    eff = (cfg["efficiency"] if cfg["efficiency_2"] is None
           else (cfg["efficiency"], cfg["efficiency_2"]))
    stream = timetag.generate_stream(spec, drift, int(cfg["n_pulses"]),
                                     efficiency=eff,
                                     pulse_period_ps=int(cfg["pulse_period_ps"]),
                                     seed=int(cfg["seed"]))
    out = Path(ns.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    if out.suffix == ".bin":
        timetag.write_binary(stream, out)
    else:
        timetag.write_csv(stream, out)
    _write_summary(out.with_suffix(out.suffix + ".json"), cfg,
                   {"records": len(stream), "stream_file": out.name})
    print(f"wrote {len(stream)} records to {out}")
    return 0


_ANALYZE_DEFAULTS = {
    "block_length": 5000,
    "phase_bins": 12,
    "bootstrap": 100,
    "seed": 1,
    "pulse_period_ps": timetag.TAU_P_DEFAULT_PS,
}


def _read_stream(path: str, pulse_period_ps: int) -> timetag.TimeTagStream:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"stream file {path} does not exist")
    if p.stat().st_size == 0:
        raise ConfigError(f"stream file {path} is empty")
    if p.suffix == ".bin":
        return timetag.read_binary(p, pulse_period_ps)
    return timetag.read_csv(p, pulse_period_ps)


def cmd_timetag_analyze(ns: argparse.Namespace) -> int:
    cfg = _merge(_ANALYZE_DEFAULTS, _load_config(ns.config), {
        "block_length": ns.block_length,
        "bootstrap": ns.bootstrap,
        "seed": ns.seed,
    })
    stream = _read_stream(ns.stream, int(cfg["pulse_period_ps"]))
    if len(stream) == 0:
        raise ConfigError(f"stream {ns.stream} holds no records")
    perp = (_read_stream(ns.perp, int(cfg["pulse_period_ps"]))
            if ns.perp else None)
    est = timetag.estimate_parameters(
        stream, perp_stream=perp, block_length=int(cfg["block_length"]),
        phase_bins=int(cfg["phase_bins"]), bootstrap=int(cfg["bootstrap"]),
        seed=int(cfg["seed"]))
    report = {
        "estimates": {
            "c1": est.c1_hat, "c1_sigma": est.c1_sigma,
            "m": est.m_hat, "m_sigma": est.m_sigma,
            "s": est.s_hat, "s_sigma": est.s_sigma,
            "c1_ratio": est.c1_ratio, "r_phase_avg": est.r_phase_avg,
            "gamma": est.gamma_hat,
        },
        "n_blocks": est.n_blocks,
        "n_flagged": est.n_flagged,
        "phase_bins_occupied": est.phase_bins_occupied,
        "phase_binned": [list(row) for row in est.phase_binned],
        "stream_records": len(stream),
    }
    cfg_echo = dict(cfg)
    cfg_echo["stream"] = Path(ns.stream).name
    out = Path(ns.out) if ns.out else Path(ns.stream).with_suffix(".report.json")
    _write_summary(out, cfg_echo, report)
    print(f"c1 = {est.c1_hat:.4f} +/- {est.c1_sigma:.4f}, "
          f"M = {est.m_hat:.4f}, s = {est.s_hat:.4f} -> {out}")
    return 0


# ---------------------------------------------------------------------------
# concurrence


def cmd_concurrence(ns: argparse.Namespace) -> int:
    phi = float(ns.phi)
    weights = tuple(_parse_floats(ns.weights)) if ns.weights else None
    state = entangle.postselected_state(phi, weights)
    doc = {
        "phi": phi,
        "weights": list(weights) if weights else [1.0, 1.0, 1.0, 0.0],
        "basis": list(entangle.BASIS),
        "amplitudes": [[a.real, a.imag] for a in state.amplitudes],
        "concurrence": entangle.concurrence(state),
        "constants_hash": constants.circuit_constants_hash(),
    }
    if ns.s2 is not None:
        doc["concurrence_from_s"] = entangle.concurrence_from_s(float(ns.s2))
    json.dump(doc, sys.stdout, sort_keys=True, indent=2)
    sys.stdout.write("\n")
    return 0


# ---------------------------------------------------------------------------
# driver


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="pncsim",
        description="Fock-space simulator for interference of 0/1 photon "
                    "superpositions: sweeps, heralded-gate studies, "
                    "time-tag streams.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("hom-sweep", help="interference peak-area sweeps")
    p.add_argument("--config")
    p.add_argument("--out", default="hom_out")
    p.add_argument("--thetas", help="comma list, 'pi' allowed, e.g. 0.22*pi,0.5*pi")
    p.add_argument("--phis", help="'averaged' or comma list of phases")
    p.add_argument("--ms", help="comma list of overlaps")
    p.add_argument("--window", type=int)
    p.set_defaults(fn=cmd_hom_sweep)

    p = sub.add_parser("cnot", help="heralded-gate sweeps and phase optimization")
    p.add_argument("--config")
    p.add_argument("--out", default="cnot_out")
    p.add_argument("--grid-start", type=float, dest="grid_start")
    p.add_argument("--grid-stop", type=float, dest="grid_stop")
    p.add_argument("--grid-step", type=float, dest="grid_step")
    p.add_argument("--alphas", help="four comma-separated phases")
    p.add_argument("--optimize-at", dest="optimize_at",
                   help="pulse areas (fractions of pi) for phase optimization")
    p.set_defaults(fn=cmd_cnot)

    p = sub.add_parser("timetag-gen", help="generate a detector time-tag stream")
    p.add_argument("--config")
    p.add_argument("--out", default="stream.csv")
    p.add_argument("--theta", type=float)
    p.add_argument("--m", type=float)
    p.add_argument("--n-pulses", type=int, dest="n_pulses")
    p.add_argument("--efficiency", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--drift-kind", dest="drift_kind",
                   choices=["sinusoid", "random-walk"])
    p.set_defaults(fn=cmd_timetag_gen)

    p = sub.add_parser("timetag-analyze", help="estimate parameters from a stream")
    p.add_argument("--config")
    p.add_argument("stream")
    p.add_argument("--perp", help="orthogonal-configuration stream file")
    p.add_argument("--out")
    p.add_argument("--block-length", type=int, dest="block_length")
    p.add_argument("--bootstrap", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(fn=cmd_timetag_analyze)

    p = sub.add_parser("concurrence", help="post-selected path-state concurrence")
    p.add_argument("--phi", default="0.0")
    p.add_argument("--weights", help="branch magnitudes LU,UU,LL[,UL]")
    p.add_argument("--s2", help="oscillation amplitude for the closed-form map")
    p.set_defaults(fn=cmd_concurrence)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = build_parser()
    try:
        ns = ap.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad usage already; normalize other codes
        return int(exc.code) if exc.code else 0
    try:
        return ns.fn(ns)
    except (circuits.NsSolveError, timetag.EstimationError, fock.FockError) as exc:
        print(f"numerical contract violated: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
