"""Run scenarios, compare engines and write CSV / JSON-lines outputs."""

from __future__ import annotations

import csv
import json
import math
import os
import time
import tracemalloc
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from linkqueue.analysis import (
    KW_FIRST_EXIT,
    KW_SHOCK_AT_ENTRY,
    SINGLE_LINK_T1,
    SINGLE_LINK_T2,
    closed_form_single_link,
    detect_oscillation,
    dm2_stability,
    mfd_link_queue,
    simulated_mfd,
)
from linkqueue.ctm import CellTrajectory, CtmConfig, cell_counts, ctm_simulate
from linkqueue.lqm import SimConfig, Trajectory, simulate
from linkqueue.networks import RingConfig
from linkqueue.scenario import Scenario

FLOAT_DIGITS_ENV = "LINKQUEUE_FLOAT_DIGITS"


def float_format() -> str:
    digits = os.environ.get(FLOAT_DIGITS_ENV, "12")
    try:
        n = int(digits)
    except ValueError:
        raise ValueError(f"{FLOAT_DIGITS_ENV} must be an integer, got {digits!r}") from None
    if not 1 <= n <= 17:
        raise ValueError(f"{FLOAT_DIGITS_ENV} must lie in [1, 17]")
    return f".{n}g"


def _fmt(x, spec) -> str:
    x = float(x)
    return "" if math.isnan(x) else format(x, spec)


def run_engine(sc: Scenario, engine: str, record_cells: bool = False) -> tuple[Trajectory, CellTrajectory | None]:
    sim = sc.simulation
    if engine == "lq":
        cfg = SimConfig(sim.dt, sim.horizon, sim.record_every, sim.cfl_override)
        return simulate(sc.network, sc.initial, sc.boundary, cfg), None
    if engine == "ctm":
        if sim.dx is None:
            raise ValueError("the ctm engine needs dx")
        cfg = CtmConfig(dx=sim.dx, dt=sc.ctm_dt, horizon=sim.horizon, record_every=sim.record_every)
        return ctm_simulate(sc.network, sc.initial, sc.boundary, cfg, record_cells=record_cells)
    raise ValueError(f"unknown engine {engine!r}")


def write_trajectory_csv(traj: Trajectory, path) -> None:
    """Long format: one row per (t, link) or, for routed networks, per (t, link, commodity)."""
    spec = float_format()
    net = traj.network
    routed = net.routed
    header = ["t", "link", "k", "f", "g"] + (["commodity", "k_w", "f_w", "g_w"] if routed else [])
    pair_cols: dict[int, list[tuple[int, int]]] = {}
    for p, (lid, w) in enumerate(traj.pairs):
        pair_cols.setdefault(lid, []).append((p, w))
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(header)
        for i, t in enumerate(traj.times):
            ts = _fmt(t, spec)
            for j, link in enumerate(net.links):
                base = [ts, link.id, _fmt(traj.density[i, j], spec), _fmt(traj.inflow[i, j], spec),
                        _fmt(traj.outflow[i, j], spec)]
                if not routed:
                    out.writerow(base)
                    continue
                for p, w in pair_cols.get(link.id, []):
                    out.writerow(base + [w, _fmt(traj.commodity_density[i, p], spec),
                                         _fmt(traj.commodity_inflow[i, p], spec),
                                         _fmt(traj.commodity_outflow[i, p], spec)])


def write_cells_csv(cells: CellTrajectory, path) -> None:
    """Wide format: one row per sample time, one column per cell."""
    spec = float_format()
    lids = sorted(cells.density)
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["t"] + [f"L{lid}_c{c}" for lid in lids for c in range(cells.density[lid].shape[1])])
        for i, t in enumerate(cells.times):
            row = [_fmt(t, spec)]
            for lid in lids:
                row += [_fmt(x, spec) for x in cells.density[lid][i]]
            out.writerow(row)


def jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return None if math.isnan(x) else x
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def write_jsonl(records, path) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(jsonable(rec), sort_keys=True, allow_nan=False) + "\n")


def _normal_ids(sc: Scenario) -> list[int]:
    return [l.id for l in sc.network.normal_links]


def trajectory_summary(traj: Trajectory) -> dict:
    net = traj.network
    final = {l.id: float(traj.density[-1, net.link_index[l.id]]) for l in net.normal_links}
    return {
        "engine": traj.engine,
        "samples": len(traj.times),
        "dt": traj.meta.get("dt"),
        "conservation_error": traj.conservation_error(),
        "terminal_density": final,
    }


def single_link_oracle(lq: Trajectory | None, ctm: Trajectory | None, link_id: int = 1) -> dict:
    """Compare runs of the single-link scenario against the closed forms."""
    out: dict = {"kind": "single-link-oracle"}
    if lq is not None:
        t = lq.times
        k = lq.series(link_id, "k")
        exact = np.array([closed_form_single_link(x) for x in t])
        mask = exact > 0
        rel = np.abs(k[mask] - exact[mask]) / exact[mask]
        out["lq"] = {
            "max_relative_error": float(rel.max()) if rel.size else 0.0,
            "time_at_18": _first_crossing(t, k, 18.0),
            "time_at_36": _first_crossing(t, k, 36.0),
            "expected_time_at_18": SINGLE_LINK_T1,
            "expected_time_at_36": SINGLE_LINK_T2,
            "terminal_density": float(k[-1]),
        }
    if ctm is not None:
        t = ctm.times
        g = ctm.series(link_id, "g")
        f = ctm.series(link_id, "f")
        out["ctm"] = {
            "first_outflow_time": _first_time(t, g > 0),
            "inflow_drop_time": _first_crossing(t, -f, -0.5 * (2340.0 + 1170.0)),
            "expected_first_outflow_time": KW_FIRST_EXIT,
            "expected_inflow_drop_time": KW_SHOCK_AT_ENTRY,
            "terminal_density": float(ctm.series(link_id, "k")[-1]),
        }
    return out


def _first_time(t, mask) -> float | None:
    idx = np.flatnonzero(mask)
    return float(t[idx[0]]) if idx.size else None


def _first_crossing(t, y, level) -> float | None:
    """First sample time at which ``y`` reaches ``level``."""
    return _first_time(t, y >= level)


def ring_mfd(sc: Scenario) -> dict:
    """Sweep densities and cycle lengths on the scenario's ring."""
    params = sc.experiment.params
    link = sc.network.normal_links[0]
    junction = sc.network.junctions[0]
    green = junction.signal.green_ratio if junction.signal is not None else 1.0
    if sc.simulation.dx is None:
        raise ValueError("ring-mfd needs dx")
    ring = RingConfig(
        length=link.length,
        lanes=link.fd.lanes,
        green_ratio=green,
        cells=max(1, round(link.length / sc.simulation.dx)),
        horizon=sc.simulation.horizon,
        average_cycles=params.get("average_cycles", 4),
    )
    densities = params.get("densities", (18.0,))
    cycles = [m / 60.0 for m in params.get("cycle_minutes", (1.0,))]
    points = []
    for engine in sc.simulation.engines:
        for p in simulated_mfd(ring, densities, cycles, engine):
            points.append({
                "engine": engine,
                "k": p.k,
                "cycle_minutes": p.cycle * 60.0,
                "flux": p.flux,
                "link_queue_mfd": mfd_link_queue(link.fd, green, p.k),
            })
    return {"kind": "ring-mfd", "green_ratio": green, "points": points}


def oscillation_for(traj: Trajectory, series) -> dict:
    cols = np.column_stack([traj.series(lid, "k") for lid in series])
    dt = float(traj.times[1] - traj.times[0])
    rep = detect_oscillation(cols, dt).to_dict()
    rep["links"] = list(series)
    return rep


def run_scenario(sc: Scenario, output_dir, record_cells: bool = False) -> dict:
    """Run every engine of ``sc``, write CSVs and a JSON-lines report; return the report."""
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    records = []
    runs: dict[str, Trajectory] = {}
    for engine in sc.simulation.engines:
        start = time.perf_counter()
        traj, cells = run_engine(sc, engine, record_cells and engine == "ctm")
        elapsed = time.perf_counter() - start
        runs[engine] = traj
        write_trajectory_csv(traj, out / f"{sc.name}_{engine}.csv")
        if cells is not None:
            write_cells_csv(cells, out / f"{sc.name}_{engine}_cells.csv")
        rec = {"record": "run", "scenario": sc.name, **trajectory_summary(traj)}
        # wall time goes to the report only; data files stay byte-identical
        rec["wall_seconds"] = elapsed
        records.append(rec)

    exp = sc.experiment
    if exp is not None:
        if exp.kind == "single-link-oracle":
            records.append({"record": "experiment", **single_link_oracle(runs.get("lq"), runs.get("ctm"))})
        elif exp.kind == "ring-mfd":
            records.append({"record": "experiment", **ring_mfd(sc)})
        elif exp.kind == "dm2-regime":
            series = exp.params.get("series", tuple(_normal_ids(sc)))
            for engine, traj in runs.items():
                records.append({"record": "experiment", "kind": "dm2-regime", "engine": engine,
                                **oscillation_for(traj, series)})
        elif exp.kind == "stability":
            records.append({"record": "experiment", "kind": "stability",
                            **dm2_stability(exp.params.get("xi", 0.45)).to_dict()})
    write_jsonl(records, out / f"{sc.name}_report.jsonl")
    return {"scenario": sc.name, "records": records}


def _time_average(traj: Trajectory, col: int) -> float:
    t = traj.times
    y = traj.density[:, col]
    if t.size < 2:
        return float(y[0])
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(t)) / (t[-1] - t[0]))


def compare_engines(sc: Scenario, series=None, parallel: bool = False) -> dict:
    """Run both engines and report per-link differences and oscillation regimes.

    With ``parallel`` the two runs execute in separate processes.
    """
    if parallel:
        with ProcessPoolExecutor(max_workers=2) as pool:
            jobs = [pool.submit(run_engine, sc, e) for e in ("lq", "ctm")]
            (lq, _), (ctm, _) = (job.result() for job in jobs)
    else:
        lq, _ = run_engine(sc, "lq")
        ctm, _ = run_engine(sc, "ctm")
    net = sc.network
    if series is None:
        if sc.experiment is not None and "series" in sc.experiment.params:
            series = sc.experiment.params["series"]
        else:
            series = _normal_ids(sc)
    links = {}
    for link in net.normal_links:
        j = net.link_index[link.id]
        k_lq, k_ctm = float(lq.density[-1, j]), float(ctm.density[-1, j])
        avg_lq, avg_ctm = _time_average(lq, j), _time_average(ctm, j)
        links[link.id] = {
            "terminal_lq": k_lq,
            "terminal_ctm": k_ctm,
            "terminal_difference": k_ctm - k_lq,
            "terminal_relative_difference": _rel(k_ctm, k_lq),
            "mean_lq": avg_lq,
            "mean_ctm": avg_ctm,
            "mean_difference": avg_ctm - avg_lq,
            "mean_relative_difference": _rel(avg_ctm, avg_lq),
        }
    report = {"scenario": sc.name, "links": links, "series": list(series)}
    if series and len(lq.times) >= 32 and len(ctm.times) >= 32:
        report["oscillation"] = {"lq": oscillation_for(lq, series), "ctm": oscillation_for(ctm, series)}
    report["conservation_error"] = {"lq": lq.conservation_error(), "ctm": ctm.conservation_error()}
    return report


def _rel(a: float, b: float) -> float:
    scale = max(abs(a), abs(b))
    return 0.0 if scale == 0 else abs(a - b) / scale


def bench(sc: Scenario, repetitions: int) -> dict:
    """Wall time per simulated hour and state size of each engine."""
    if repetitions < 1:
        raise ValueError("repetitions must be at least 1")
    net = sc.network
    engines = ["lq"] + (["ctm"] if sc.simulation.dx is not None else [])
    ncom = {l.id: max(1, len(net.link_commodities[l.id])) for l in net.normal_links}
    report: dict = {"scenario": sc.name, "repetitions": repetitions, "engines": {}}
    for engine in engines:
        times = []
        for _ in range(repetitions):
            start = time.perf_counter()
            run_engine(sc, engine)
            times.append(time.perf_counter() - start)
        # tracing slows allocation down, so memory gets a separate run
        tracemalloc.start()
        try:
            run_engine(sc, engine)
            peak = tracemalloc.get_traced_memory()[1]
        finally:
            tracemalloc.stop()
        if engine == "lq":
            states = {l.id: 1 for l in net.normal_links}
        else:
            states = cell_counts(net, CtmConfig(dx=sc.simulation.dx))
        report["engines"][engine] = {
            "seconds_per_simulated_hour": float(np.median(times)) / sc.simulation.horizon,
            "seconds": times,
            "states_per_link": states,
            "state_values": sum(n * (1 + (ncom[lid] if net.routed else 0)) for lid, n in states.items()),
            "peak_traced_bytes": peak,
        }
    if "ctm" in report["engines"]:
        lq_t = report["engines"]["lq"]["seconds_per_simulated_hour"]
        ctm_t = report["engines"]["ctm"]["seconds_per_simulated_hour"]
        report["ctm_to_lq_time_ratio"] = ctm_t / lq_t if lq_t > 0 else math.inf
        report["predicted_state_ratio"] = {
            lid: n for lid, n in report["engines"]["ctm"]["states_per_link"].items()
        }
    return report

