"""``phonon-cat`` command line harness.

    phonon-cat <subcommand> --config FILE [--seed N] [--out DIR] [--threads K] [--preset NAME]

Exit status: 0 success, 2 configuration/schema error, 3 numerical failure
(a ``diagnostic.json`` is written to the output directory).
"""

from __future__ import annotations

import argparse
import copy
import json
import logging
import math
import os
import sys
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from . import config as C
from .dynamics import (
    MasterEquationSpec,
    SteadyStateError,
    branch_quadrature_variances,
    evolve,
    observables,
    residual,
    steady_state,
)
from .hilbert import DensityOperator, HilbertConfig, TruncationError, basis_ket, top_level_population
from .io import OutputCollector, config_checksum
from .magnetics import MagnetPair, coupling_map, gap_sweep, gradients, offset_sweep
from .model import (
    TWO_PI,
    cooperativity,
    dephasing_threshold,
    dressed_tls,
    g1_from_device,
    g2_from_device,
)
from .phase_space import (
    CatSpec,
    GridSpec,
    cat_state,
    cattiness,
    coherent_state,
    fidelity,
    matched_cat_amplitude,
    negativity,
    wigner,
)
from .tomography import MeasurementPlan, fringe_contrast, quadrature_estimate, sample_measurements
from .trajectories import default_dt, mcwf_run

log = logging.getLogger("phonon_cat")

EXIT_OK, EXIT_SCHEMA, EXIT_NUMERIC = 0, 2, 3
NUMERIC_ERRORS = (FloatingPointError, SteadyStateError, TruncationError, np.linalg.LinAlgError,
                  ArithmeticError, RuntimeError)


# ---------------------------------------------------------------- helpers

def _hz(x: float) -> float:
    return x / TWO_PI


def _grid(run: dict) -> GridSpec:
    g = run.get("grid", {})
    return GridSpec(half_width=g.get("half_width"), points=g.get("points", 201))


def _sample_times(run: dict, t_final: float) -> np.ndarray:
    if "sample_times_s" in run:
        ts = sorted(set(float(t) for t in run["sample_times_s"]) | {0.0})
        return np.asarray([t for t in ts if t <= t_final])
    return np.linspace(0.0, t_final, run.get("n_samples", 101))


def _ground_state(n_max: int) -> DensityOperator:
    return basis_ket(HilbertConfig(n_max, 2), 0, 0).to_density()


def _fit_exponent(x, y) -> float:
    if len(x) < 2:
        return float("nan")
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def _lobes(grid) -> tuple[float, float]:
    """Imaginary parts of the Wigner maxima in the upper and lower half planes."""
    im = grid.alpha_im
    up = grid.values[im > 0]
    lo = grid.values[im < 0]
    iu = np.unravel_index(np.argmax(up), up.shape)
    il = np.unravel_index(np.argmax(lo), lo.shape)
    return float(im[im > 0][iu[0]]), float(im[im < 0][il[0]])


# ---------------------------------------------------------------- subcommands

def cmd_params(cfg: dict, out: OutputCollector, ctx: dict) -> dict:
    dev = C.device(cfg)
    sysp = C.system(cfg)
    n_th = sysp.n_th
    rows = [
        ("g2_hz", _hz(sysp.g2)),
        ("gamma_m_hz", _hz(sysp.gamma_m)),
        ("n_th", n_th),
        ("loss_rate_hz", _hz(sysp.gamma_m * n_th)),
        ("gamma_z_hz", _hz(sysp.gamma_z)),
        ("G2_T_per_m2", dev.G2),
        ("G1_T_per_m", dev.G1),
        ("g1_hz", _hz(g1_from_device(dev))),
        ("gamma_z_threshold_hz", _hz(dephasing_threshold(sysp.g2, sysp.gamma_m, n_th))),
    ]
    coop = cooperativity(sysp.g2, sysp.gamma_z, sysp.gamma_m, n_th) if sysp.gamma_z > 0 else float("inf")
    rows.append(("cooperativity", coop))
    pair = C.magnet_pair(cfg)
    if pair is not None:
        rep = gradients(pair, cfg["magnets"].get("offset_m", 0.0))
        rows += [("B0_T", rep.B0), ("magnet_G2_T_per_m2", rep.G2), ("magnet_G1_T_per_m", rep.G1)]
    lab = C.lab(cfg)
    if lab is not None:
        p, lab_amp = lab
        q = dressed_tls(p, lab_amplitude=lab_amp)
        rows += [(f"dressed_{k}" + ("_hz" if k in ("R", "omega_gd", "omega_de") else ""),
                  _hz(v) if k in ("R", "omega_gd", "omega_de") else v) for k, v in q.items()]
        rows.append(("hierarchy_violations", len(p.hierarchy_violations(lab_amplitude=lab_amp))))
    out.write_csv("params.csv", ["quantity", "value"], rows)
    summary = {k: v for k, v in rows}
    out.write_json("params.json", summary)
    return summary


def _steady_point(args):
    sysp, n_max, method, grid = args
    spec = MasterEquationSpec.from_params(sysp, HilbertConfig(n_max, 2))
    rho = steady_state(spec, method)
    obs = observables(rho)
    row = {
        "Omega_hz": _hz(sysp.Omega),
        "n": obs["n"],
        "var_x": obs["var_x"],
        "abs_a": abs(obs["a"]),
        "residual": residual(spec, rho),
        "top_population": top_level_population(rho),
        "lobe_expected": math.sqrt(sysp.Omega / sysp.g2) if sysp.g2 > 0 else float("nan"),
    }
    if obs["n"] > 1.0:
        w = wigner(rho, grid)
        up, lo = _lobes(w)
        row.update(lobe_upper=up, lobe_lower=lo, grid_step=w.h)
    return row


def _pool_map(fn, tasks, threads):
    if threads <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, tasks))


def cmd_steady_sweep(cfg: dict, out: OutputCollector, ctx: dict) -> dict:
    run = C.run_section(cfg)
    omegas = cfg.get("sweep", {}).get("Omega_hz")
    if not omegas:
        raise C.ConfigError("sweep.Omega_hz must be a nonempty list")
    base = C.system(cfg)
    n_max = run.get("n_max", 100)
    tasks = [(base.with_(Omega=TWO_PI * om), n_max, run.get("steady_method", "auto"), _grid(run))
             for om in omegas]
    rows = _pool_map(_steady_point, tasks, ctx["threads"])
    long = []
    for r in rows:
        for k, v in r.items():
            if k != "Omega_hz":
                long.append((r["Omega_hz"], k, v))
    out.write_csv("steady_sweep.csv", ["Omega_hz", "observable", "value"], long)
    om = np.array([r["Omega_hz"] for r in rows])
    n = np.array([r["n"] for r in rows])
    lowm = (n > 0) & (n < 0.3)
    highm = n > 2.0
    diag = {
        "exponent_below": _fit_exponent(om[lowm], n[lowm]),
        "exponent_above": _fit_exponent(om[highm], n[highm]),
        "max_abs_a": float(max(r["abs_a"] for r in rows)),
        "max_residual": float(max(r["residual"] for r in rows)),
        "points": len(rows),
    }
    top = max(rows, key=lambda r: r["Omega_hz"])
    if "lobe_upper" in top:
        diag["largest_omega_lobe_separation"] = top["lobe_upper"] - top["lobe_lower"]
        diag["largest_omega_expected_separation"] = 2 * top["lobe_expected"]
        diag["grid_step"] = top["grid_step"]
    out.write_json("steady_sweep_diagnostics.json", diag)
    return diag


def cmd_transient(cfg: dict, out: OutputCollector, ctx: dict) -> dict:
    run = C.run_section(cfg)
    sysp = C.system(cfg)
    n_max = run.get("n_max", 40)
    t_final = run.get("t_final_s", 0.3)
    cfgH = HilbertConfig(n_max, 2)
    spec = MasterEquationSpec.from_params(sysp, cfgH)
    ts = _sample_times(run, t_final)
    snaps = [float(t) for t in run.get("snapshot_times_s", [])]
    res = evolve(_ground_state(n_max), spec, t_final, ts, snapshot_times=sorted(set(snaps) | set(ts.tolist())),
                 rtol=run.get("rtol", 1e-8))
    branch = np.array([branch_quadrature_variances(res.snapshots[float(t)]) for t in res.times])
    dt = run.get("dt_s") or default_dt(spec)
    steps = max(1, int(math.ceil(t_final / dt)))
    dt = t_final / steps
    rec_every = run.get("record_every", max(1, steps // 1000))
    seed = ctx["seed"]
    traj = mcwf_run(basis_ket(cfgH, 0, 0), spec, t_final, dt, seed, record_every=rec_every,
                    snapshot_times=snaps)
    rows = []
    for k, v in res.observables.items():
        for t, x in zip(res.times, v):
            rows.append(("master", t, k, abs(x) if np.iscomplexobj(v) else x))
    for k, v in traj.observables.items():
        for t, x in zip(traj.times, v):
            rows.append(("trajectory", t, k, abs(x) if np.iscomplexobj(v) else x))
    for t, (vp, vm) in zip(res.times, branch):
        rows += [("master", t, "var_q45_given_plus", vp), ("master", t, "var_qm45_given_minus", vm)]
    out.write_csv("transient_series.csv", ["source", "t_s", "observable", "value"], rows,
                  meta={"seed": seed, "dt_s": dt})
    out.write_json("transient_jumps.json", traj.to_json())
    grid = _grid(run)
    wrows, snap_summary = [], []
    for t in snaps:
        for source, state in (("master", res.snapshots.get(t)), ("trajectory", traj.snapshots.get(t))):
            if state is None:
                continue
            w = wigner(state, grid)
            wrows += [(source, t, re, im, val) for re, im, val in w.rows()]
            snap_summary.append({"source": source, "t_s": t, "negativity": negativity(w, check_support=False),
                                 "argmax": [w.argmax().real, w.argmax().imag]})
    if wrows:
        out.write_csv("transient_wigner.csv", ["source", "t_s", "re", "im", "W"], wrows)
    summary = {"seed": seed, "dt_s": dt, "jumps": len(traj.jumps), "snapshots": snap_summary,
               "final_n_master": float(res.observables["n"][-1]),
               "min_var_q45_given_plus": float(np.nanmin(branch[:, 0])),
               "min_var_qm45_given_minus": float(np.nanmin(branch[:, 1])),
               "max_trace_drift": res.max_trace_drift}
    out.write_json("transient_summary.json", summary)
    return summary


def _cattiness_series(args):
    sysp, n_max, t_final, ts, grid, rule, rtol = args
    spec = MasterEquationSpec.from_params(sysp, HilbertConfig(n_max, 2))
    # atol well below the truncation threshold so integrator noise in the tail is not flagged
    res = evolve(_ground_state(n_max), spec, t_final, ts, snapshot_times=ts, rtol=rtol, atol=1e-13)
    rows = []
    for t in res.times:
        rho = res.snapshots[float(t)]
        n = observables(rho)["n"]
        try:
            c, det = cattiness(rho, grid, rule=rule, return_details=True)
            neg = det["negativity"]
        except ValueError:
            c, neg = float("nan"), float("nan")
        rows.append((float(t), n, neg, c))
    return rows


def cmd_cattiness(cfg: dict, out: OutputCollector, ctx: dict) -> dict:
    run = C.run_section(cfg)
    base = C.system(cfg)
    gzs = cfg.get("sweep", {}).get("gamma_z_hz") or [_hz(base.gamma_z)]
    n_max = run.get("n_max", 40)
    t_final = run.get("t_final_s", 0.15)
    ts = _sample_times(run, t_final)
    rule = run.get("cattiness_rule", "occupation")
    tasks = [(base.with_(gamma_z=TWO_PI * g), n_max, t_final, ts, _grid(run), rule, run.get("rtol", 1e-8))
             for g in gzs]
    series = _pool_map(_cattiness_series, tasks, ctx["threads"])
    rows, peaks = [], []
    for g, ser in zip(gzs, series):
        for t, n, neg, c in ser:
            rows += [(g, t, "n", n), (g, t, "negativity", neg), (g, t, "cattiness", c)]
        cs = np.array([r[3] for r in ser])
        k = int(np.nanargmax(cs)) if np.any(np.isfinite(cs)) else 0
        peaks.append({"gamma_z_hz": g, "peak_time_s": ser[k][0], "peak_value": float(np.nan_to_num(cs[k])),
                      "positive_window": bool(np.nanmax(np.nan_to_num(cs)) > 0)})
    out.write_csv("cattiness.csv", ["gamma_z_hz", "t_s", "observable", "value"], rows,
                  meta={"reference": f"even cat, {rule} matching"})
    summary = {"peaks": peaks}
    out.write_json("cattiness_peaks.json", summary)
    return summary


def cmd_fidelity_decay(cfg: dict, out: OutputCollector, ctx: dict) -> dict:
    run = C.run_section(cfg)
    sysp = C.system(cfg)
    n_max = run.get("n_max", 40)
    cfgH = HilbertConfig(n_max, 2)
    spec = MasterEquationSpec.from_params(sysp, cfgH)
    rho_ss = steady_state(spec, run.get("steady_method", "auto"))
    n_ss = observables(rho_ss)["n"]
    beta = 1j * matched_cat_amplitude(n_ss, run.get("cattiness_rule", "occupation"))
    cat = cat_state(CatSpec(beta, "even"), cfgH)
    n_a = float(np.real(np.vdot(cat.amplitudes, np.arange(n_max) * cat.amplitudes)))
    rho0 = cat.tensor([1.0, 0.0]).to_density()
    t_final = run.get("t_final_s", 3.0)
    ts = _sample_times(run, t_final)
    res = evolve(rho0, spec, t_final, ts, snapshot_times=ts, rtol=run.get("rtol", 1e-10), atol=1e-12)
    rate = 0.5 * sysp.gamma_m * sysp.n_th * n_a
    rows = []
    F = []
    for t in res.times:
        f = fidelity(res.snapshots[float(t)], cat)
        F.append(f)
        rows += [(t, "F", f), (t, "linear_law", 1 - rate * t)]
    F = np.array(F)
    short = (res.times > 0) & (res.times <= 1e-3 + 1e-15)
    slope = float(np.polyfit(res.times[short], F[short], 1)[0]) if short.sum() >= 2 else float("nan")
    summary = {
        "n_ss": n_ss,
        "n_a": n_a,
        "beta_abs": abs(beta),
        "predicted_slope": -rate,
        "fitted_slope": slope,
        "F_at_1ms": float(np.interp(1e-3, res.times, F)),
        "F_final": float(F[-1]),
        "F_steady_state": fidelity(rho_ss, cat),
    }
    out.write_csv("fidelity.csv", ["t_s", "observable", "value"], rows)
    out.write_json("fidelity_summary.json", summary)
    return summary


def cmd_magnetics(cfg: dict, out: OutputCollector, ctx: dict) -> dict:
    dev = C.device(cfg)
    sw = cfg.get("sweep", {})
    mag = cfg.get("magnets", {"material": "Dy"})
    materials = sw.get("materials") or [mag["material"]]
    radius, length = mag.get("radius_m", 15e-9), mag.get("length_m", 150e-9)
    # |G2| at the center rises up to gap = radius, so the default sweep starts there
    gaps = sw.get("gap_m") or list(np.linspace(radius, 100e-9, 18))
    rows = []
    for m in materials:
        gs = gap_sweep(m, gaps, dev.z_zpf, radius, length)
        for g, G2, g2 in zip(gs["gap"], gs["G2"], gs["g2"]):
            rows += [("gap_sweep", m, g, "G2_T_per_m2", G2), ("gap_sweep", m, g, "g2_hz", _hz(g2))]
    zz = sw.get("z_zpf_m") or list(np.geomspace(10e-15, 1e-12, 21))
    for z in zz:
        rows.append(("zpf_sweep", materials[0], z, "g2_hz", _hz(g2_from_device(dev.with_(z_zpf=z)))))
    Qs = sw.get("Q") or list(np.geomspace(1e7, 1e10, 16))
    cmap = coupling_map(dev, zz, Qs)
    for i, z in enumerate(cmap["z_zpf"]):
        for j, q in enumerate(cmap["Q"]):
            rows.append(("coop_map", f"Q={q!r}", z, "C", cmap["C"][i, j]))
        rows.append(("coop_map", "C=1", z, "Q_threshold", cmap["Q_threshold"][i]))
    pair = MagnetPair.of(materials[0], radius, length, mag.get("gap_m", 30e-9))
    offs = sw.get("offset_m") or list(np.linspace(-2e-9, 2e-9, 41))
    osw = offset_sweep(pair, offs, dev.z_zpf)
    for o, g1, g2 in zip(osw["offset"], osw["g1"], osw["g2"]):
        rows += [("offset_sweep", materials[0], o, "g1_hz", _hz(g1)), ("offset_sweep", materials[0], o, "g2_hz", _hz(g2))]
    out.write_csv("magnetics.csv", ["table", "label", "x", "observable", "value"], rows)
    center = {m: gradients(MagnetPair.of(m, radius, length, mag.get("gap_m", 30e-9))) for m in materials}
    summary = {m: {"B0_T": r.B0, "G1_T_per_m": r.G1, "G2_T_per_m2": r.G2} for m, r in center.items()}
    out.write_json("magnetics_summary.json", summary)
    return summary


def cmd_tomography(cfg: dict, out: OutputCollector, ctx: dict) -> dict:
    run = C.run_section(cfg)
    meas = cfg.get("measurement")
    if meas is None:
        raise C.ConfigError("a 'measurement' section is required")
    amp = 15.0 if run.get("full_amplitude") else meas["amplitude"]
    seed = meas.get("seed", ctx["seed"])
    if "angles_rad" in meas:
        plan = MeasurementPlan(amp, meas["angles_rad"], meas["shots"], seed)
    else:
        plan = MeasurementPlan.uniform(amp, meas.get("n_angles", 16), meas["shots"], seed)
    sysp = C.system(cfg)
    n_max = run.get("n_max", 40)
    t_gen = (run.get("snapshot_times_s") or [0.05])[0]
    spec = MasterEquationSpec.from_params(sysp, HilbertConfig(n_max, 2))
    res = evolve(_ground_state(n_max), spec, t_gen, [0.0, t_gen], snapshot_times=[t_gen])
    generated = res.snapshots[t_gen]
    n_gen = observables(generated)["n"]
    osc = HilbertConfig(n_max, 1)
    beta = matched_cat_amplitude(n_gen, "occupation")
    states = {
        "generated": generated,
        "cat": cat_state(CatSpec(1j * beta, "even"), osc).to_density(),
        "coherent": coherent_state(1j * math.sqrt(n_gen), osc).to_density(),
    }
    rows, summary = [], {"plan": plan.to_json(), "mean_n": n_gen, "generation_time_s": t_gen, "states": {}}
    for name, rho in states.items():
        data = sample_measurements(rho, plan)
        rows += [(name, th, n, c) for th, n, c in data.rows()]
        fr = [fringe_contrast(p) for p in data.exact]
        fr_emp = [fringe_contrast(h) for h in data.histograms]
        summary["states"][name] = {
            "fringe_exact": fr,
            "fringe_sampled": fr_emp,
            "quadrature_estimate": list(quadrature_estimate(data)),
        }
    out.write_csv("tomography_counts.csv", ["state", "angle_rad", "n", "count"], rows,
                  meta={"amplitude": amp, "shots": plan.shots, "seed": plan.seed})
    out.write_json("tomography_plan.json", summary)
    return {k: {"max_fringe": max(v["fringe_exact"])} for k, v in summary["states"].items()}


COMMANDS = {
    "params": cmd_params,
    "steady-sweep": cmd_steady_sweep,
    "transient": cmd_transient,
    "cattiness": cmd_cattiness,
    "fidelity-decay": cmd_fidelity_decay,
    "magnetics": cmd_magnetics,
    "tomography": cmd_tomography,
}


# ---------------------------------------------------------------- driver

def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="phonon-cat", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="JSON configuration file")
        s.add_argument("--preset", help="built-in configuration: " + ", ".join(C.PRESETS))
        s.add_argument("--seed", type=int)
        s.add_argument("--out", help="output directory")
        s.add_argument("--threads", type=int)
        s.add_argument("-v", "--verbose", action="store_true")
    r = sub.add_parser("replay", help="re-run a manifest and compare output checksums")
    r.add_argument("--manifest", required=True)
    r.add_argument("--out", help="output directory for the replay")
    r.add_argument("--threads", type=int)
    r.add_argument("-v", "--verbose", action="store_true")
    return p


def _checksum_view(cfg: dict) -> dict:
    """Config without fields that cannot affect results (output location, parallelism)."""
    view = copy.deepcopy(cfg)
    run = view.get("run", {})
    run.pop("output_dir", None)
    run.pop("threads", None)
    return view


def execute(command: str, cfg: dict, out_dir: str | Path, threads: int) -> tuple[int, dict]:
    """Run one subcommand on a validated config; returns ``(exit_code, manifest_or_diagnostic)``."""
    run = cfg.get("run", {})
    seed = int(run.get("seed", 0))
    out = OutputCollector(out_dir, config_checksum(_checksum_view(cfg)))
    ctx = {"seed": seed, "threads": threads}
    t0 = time.perf_counter()
    try:
        summary = COMMANDS[command](cfg, out, ctx)
    except C.ConfigError as exc:
        return EXIT_SCHEMA, {"error": "schema", "message": str(exc)}
    except NUMERIC_ERRORS as exc:
        diag = {"error": "numerical", "type": type(exc).__name__, "message": str(exc),
                "command": command, "traceback": traceback.format_exc().splitlines()[-6:]}
        req = getattr(exc, "required_n_max", None)
        if req is not None:
            diag["required_n_max"] = req
        out.write_json("diagnostic.json", diag)
        return EXIT_NUMERIC, diag
    manifest = {
        "tool": "phonon-cat",
        "version": __version__,
        "command": command,
        "config": cfg,
        "config_sha256": out.config_sha,
        "seeds": {"run": seed, **({"measurement": cfg["measurement"].get("seed", seed)} if "measurement" in cfg else {})},
        "threads": threads,
        "wall_clock_s": round(time.perf_counter() - t0, 3),
        "outputs": out.checksums(),
        "summary": summary,
    }
    (Path(out_dir) / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True, default=_jsonable))
    return EXIT_OK, manifest


def _jsonable(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, complex):
        return {"re": o.real, "im": o.imag}
    return str(o)


def _threads(flag: int | None, run: dict) -> int:
    if flag:
        return flag
    env = os.environ.get("PHONONCAT_THREADS")
    if env:
        return max(1, int(env))
    return int(run.get("threads", os.cpu_count() or 1))


def _replay(args) -> int:
    try:
        manifest = json.loads(Path(args.manifest).read_text())
        cfg = C.validate(manifest["config"])
        command = manifest["command"]
    except (OSError, KeyError, json.JSONDecodeError, C.ConfigError) as exc:
        print(f"phonon-cat: cannot replay: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    out_dir = args.out or str(Path(args.manifest).parent / "replay")
    code, new = execute(command, cfg, out_dir, _threads(args.threads, cfg.get("run", {})))
    if code != EXIT_OK:
        print(json.dumps(new, default=_jsonable), file=sys.stderr)
        return code
    old = {o["path"]: o["sha256"] for o in manifest["outputs"]}
    now = {o["path"]: o["sha256"] for o in new["outputs"]}
    mismatched = sorted(k for k in old if old[k] != now.get(k))
    print(json.dumps({"replayed": command, "identical": not mismatched, "mismatched": mismatched}))
    return EXIT_OK if not mismatched else EXIT_NUMERIC


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "replay":
        return _replay(args)
    try:
        cfg = C.load(args.config, args.preset)
        run = cfg.setdefault("run", {})
        if args.seed is not None:
            run["seed"] = args.seed
        cfg = C.validate(cfg)
    except C.ConfigError as exc:
        print(f"phonon-cat: configuration error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    out_dir = args.out or os.environ.get("PHONONCAT_OUT") or run.get("output_dir") or f"phonon_cat_out/{args.command}"
    threads = _threads(args.threads, run)
    code, result = execute(args.command, cfg, out_dir, threads)
    if code == EXIT_SCHEMA:
        print(f"phonon-cat: configuration error: {result['message']}", file=sys.stderr)
    elif code == EXIT_NUMERIC:
        print(json.dumps(result, default=_jsonable), file=sys.stderr)
    else:
        print(json.dumps(result["summary"], indent=2, default=_jsonable))
    return code


if __name__ == "__main__":
    sys.exit(main())
