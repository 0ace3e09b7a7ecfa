"""Scenario-driven command line: build catalog members, run flows, execute
the identity suite, search for closed curves, emit reports.

Every subcommand assembles a JSON-serializable scenario config (a config
file can seed it; explicit flags win) and hands it to :func:`run_scenario`,
which writes ``report.json`` into the output directory.  Reports are
deterministic byte-for-byte for a fixed config and seed; wall-clock timing
lives in the single ``timing`` field so consumers can exclude it.

Exit status: 0 when every declared threshold passes, 1 on threshold
violations, 2 on configuration errors.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import alcurve, catalog
from .ambient import mainly_positive_margin
from .flow import (
    BoundaryPolicy,
    FlowState,
    StepScheme,
    exact_hyperquadric_solution,
    homothety_detect,
    norm_evolution_check,
    run_flow,
)
from .geometry import build_frame
from .identities import (
    bounded_geometry_report,
    convergence_study,
    identity_suite,
    p_spectral_diagnostics,
    shrinker_residual,
)
from .mesh import GridField, grid_csv

SCHEMA_VERSION = 1

DEFAULT_THRESHOLDS = {
    "identities": {"min_order": 2.0, "floor": 1e-8},
    "flow": {"law_sup": 1e-3},
    "alcurve": {"closure_gap": 1e-4},
    "diagnose": {"spectrum_tol": 1e-6},
}


class ScenarioError(ValueError):
    pass


def _threads_from(config: dict) -> int:
    env = os.environ.get("PSEUDOMCF_THREADS")
    if env:
        return max(1, int(env))
    return max(1, int(config.get("threads", 1)))


def parallel_map(fn, items, threads: int):
    """Order-preserving map; the worker count never changes results."""
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _dump_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=False)
                    + "\n", encoding="utf-8")


def _clean(x):
    """JSON-safe copy: numpy scalars to python, non-finite to strings."""
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(x, np.bool_):
        return bool(x)
    return x


# ---------------------------------------------------------------------------
# scenario actions

def _scenario_catalog(config: dict, outdir: Path | None):
    entries = catalog.list_catalog()
    return {"results": [
        {"name": e["name"], "sup": None, "mean": None, "threshold": None,
         "pass": True, "meta": e} for e in entries
    ]}


def _scenario_identities(config: dict, outdir: Path | None):
    name = config.get("case")
    if not name:
        raise ScenarioError("identities needs a case name")
    resolution = config.get("resolution")
    order = int(config.get("order", 4))
    levels = int(config.get("levels", 3))
    thr = {**DEFAULT_THRESHOLDS["identities"], **config.get("thresholds", {})}
    _, meta = catalog.build(name, resolution, order)
    factor = meta.get("homothety_factor")

    def builder(level):
        sample, _ = catalog.build(name, resolution, order, refine=level)
        return build_frame(sample)

    threads = _threads_from(config)
    study = convergence_study(
        builder, levels=levels,
        laplace_normH_factor=factor if factor is not None else -1.0,
        floor=thr["floor"],
        mapper=lambda fn, items: parallel_map(fn, list(items), threads),
    )
    results = []
    for ident, tab in study["orders"].items():
        if tab.get("skipped"):
            results.append({"name": ident, "sup": None, "mean": None,
                            "threshold": None, "pass": True,
                            "skipped": True, "reason": tab.get("reason", "")})
            continue
        if ident == "shrinker" and not meta.get("shrinker"):
            # a non-shrinker's defect is not supposed to converge away
            results.append({"name": ident, "sup": tab["sups"][-1],
                            "mean": None, "threshold": None, "pass": True,
                            "sups": tab["sups"], "orders": tab["orders"],
                            "non_shrinker_case": True})
            continue
        ok = bool(tab["at_floor"] or (tab["orders"] is not None
                                      and min(tab["orders"]) >= thr["min_order"]))
        results.append({"name": ident, "sup": tab["sups"][-1], "mean": None,
                        "threshold": thr["min_order"], "pass": ok,
                        "sups": tab["sups"], "orders": tab["orders"],
                        "at_floor": tab["at_floor"]})
    return {"results": results,
            "convergence": study["orders"],
            "finest": study["finest"]}


def _scenario_flow(config: dict, outdir: Path | None):
    name = config.get("case")
    if not name:
        raise ScenarioError("flow needs a case name")
    resolution = config.get("resolution")
    order = int(config.get("order", 4))
    scheme = StepScheme(config.get("scheme", "rk4"),
                        float(config.get("dt_alpha", 0.1)))
    t_end = float(config.get("until", 0.25))
    thr = {**DEFAULT_THRESHOLDS["flow"], **config.get("thresholds", {})}
    sample, meta = catalog.build(name, resolution, order)

    policy_kind = config.get("boundary", "auto")
    if policy_kind == "auto":
        periodic = all(ax.periodic for ax in sample.domain.axes)
        policy_kind = "none" if periodic else (
            "pin_exact" if meta.get("k") is not None else "freeze")
    policy = BoundaryPolicy(policy_kind, int(config.get("pin_width", 8)))

    state = FlowState(0.0, sample, policy)
    report = run_flow(state, scheme, t_end,
                      snapshot_every=int(config.get("snapshot_every", 50)))
    results = [{"name": "halt_reason", "sup": None, "mean": None,
                "threshold": None, "pass": True, "value": report.halt_reason,
                "steps": report.steps, "t_final": report.t_final}]
    manifest = {"snapshots": []}
    k = meta.get("k")
    if k is not None:
        checks = norm_evolution_check(report, k=k, sample=sample)
        sup = max(c["sup_error"] for c in checks)
        results.append({"name": "norm_evolution_sup", "sup": sup, "mean": None,
                        "threshold": thr["law_sup"],
                        "pass": bool(sup <= thr["law_sup"])})
        for c in checks:
            manifest["snapshots"].append(
                {"t": c["t"], "law": c["law"], "sup_error": c["sup_error"]})
    fits = homothety_detect(report)
    if k is not None:
        m = sample.m
        cerr = max(abs(f["c_fit"] - math.sqrt(k / (k - 2 * m * f["t"])))
                   for f in fits)
        results.append({"name": "homothety_fit_error", "sup": cerr,
                        "mean": None, "threshold": thr["law_sup"],
                        "pass": bool(cerr <= thr["law_sup"])})
    results.append({"name": "homothety_residual_final",
                    "sup": fits[-1]["residual_rms"], "mean": None,
                    "threshold": None, "pass": True})
    if outdir is not None:
        for i, snap in enumerate(report.snapshots):
            grid_csv(GridField(sample.domain, snap.positions),
                     outdir / f"snapshot_{i:04d}.csv")
        _dump_json(_clean(manifest), outdir / "flow_manifest.json")
    return {"results": results, "homothety": _clean(fits)}


def _scenario_alcurve(config: dict, outdir: Path | None):
    bracket = config.get("kappa0", [0.3, 0.9])
    target = config.get("target", "2/3")
    thr = {**DEFAULT_THRESHOLDS["alcurve"], **config.get("thresholds", {})}
    tol = float(config.get("tolerance", thr["closure_gap"]))
    ds = float(config.get("ds", 1e-3))
    report = alcurve.find_closed(tuple(bracket), target, tolerance=tol, ds=ds)
    results = [{"name": "closure", "sup": None, "mean": None,
                "threshold": tol, "pass": bool(report.success),
                "reason": report.reason, "n_evals": report.n_evals}]
    payload = {"results": results, "search": {
        "success": report.success, "reason": report.reason,
        "n_evals": report.n_evals, "bracket": list(report.bracket),
        "target": list(report.target)}}
    if report.success and report.curve is not None:
        c = report.curve
        results.append({"name": "gap_position", "sup": c.gap_position,
                        "mean": None, "threshold": tol,
                        "pass": bool(c.gap_position <= tol)})
        results.append({"name": "gap_angle", "sup": c.gap_angle, "mean": None,
                        "threshold": tol, "pass": bool(c.gap_angle <= tol)})
        payload["curve"] = {"kappa0": c.kappa0, "winding": list(c.winding),
                            "s_total": c.s_total}
        if outdir is not None:
            alcurve.curve_csv(c, outdir / "curve.csv")
    else:
        payload["details"] = _clean(report.details)
    return payload


def _scenario_diagnose(config: dict, outdir: Path | None):
    name = config.get("case")
    if not name:
        raise ScenarioError("diagnose needs a case name")
    resolution = config.get("resolution")
    order = int(config.get("order", 4))
    thr = {**DEFAULT_THRESHOLDS["diagnose"], **config.get("thresholds", {})}
    sample, meta = catalog.build(name, resolution, order)
    frame = build_frame(sample)
    results = []

    sh = shrinker_residual(frame)
    expect_shrinker = bool(meta.get("shrinker"))
    ok = (sh.sup <= 1e-3) if expect_shrinker else True
    results.append({"name": "shrinker_residual", "sup": sh.sup,
                    "mean": sh.mean, "threshold": 1e-3 if expect_shrinker else None,
                    "pass": bool(ok), "expected_shrinker": expect_shrinker})

    payload = {"results": results, "spacelike": bool(frame.spacelike)}
    if frame.spacelike:
        spec = p_spectral_diagnostics(frame)
        payload["p_spectral"] = _clean(spec)
        expected = meta.get("expected_P_spectrum")
        if expected is not None:
            lo = np.array(spec["eigenvalues_min"])
            hi = np.array(spec["eigenvalues_max"])
            want = np.sort(np.array(expected, dtype=float))
            dev = float(max(np.abs(lo - want).max(), np.abs(hi - want).max()))
            results.append({"name": "p_spectrum_deviation", "sup": dev,
                            "mean": None, "threshold": thr["spectrum_tol"],
                            "pass": bool(dev <= thr["spectrum_tol"])})
    bg = bounded_geometry_report(frame, K=int(config.get("bg_order", 1)))
    payload["bounded_geometry"] = _clean(bg)
    margin = mainly_positive_margin(
        frame.signature, frame.F.reshape(-1, frame.signature.n),
        float(config.get("margin_threshold", 0.0)))
    payload["mainly_margin"] = _clean(margin)
    exp_h2 = meta.get("expected_normH2")
    if exp_h2 is not None:
        dev = float(np.abs(frame.normH2 - exp_h2)[frame.interior].max())
        results.append({"name": "normH2_deviation", "sup": dev, "mean": None,
                        "threshold": thr["spectrum_tol"],
                        "pass": bool(dev <= thr["spectrum_tol"])})
    return payload


_ACTIONS = {
    "catalog": _scenario_catalog,
    "identities": _scenario_identities,
    "flow": _scenario_flow,
    "alcurve": _scenario_alcurve,
    "diagnose": _scenario_diagnose,
}


def run_scenario(config: dict | str | Path, outdir=None) -> tuple[dict, int]:
    """Execute a scenario config (dict or path to a JSON file).

    Returns (report, exit_code); the report is also written to
    ``<outdir>/report.json`` when an output directory is given.
    """
    if not isinstance(config, dict):
        config = json.loads(Path(config).read_text(encoding="utf-8"))
    config = dict(config)
    config.setdefault("schema_version", SCHEMA_VERSION)
    if config["schema_version"] != SCHEMA_VERSION:
        raise ScenarioError(
            f"unsupported schema_version {config['schema_version']}"
        )
    action = config.get("action")
    if action not in _ACTIONS:
        raise ScenarioError(
            f"unknown action {action!r}; known: {', '.join(_ACTIONS)}"
        )
    if outdir is None and config.get("out"):
        outdir = config["out"]
    outpath = None
    if outdir is not None:
        outpath = Path(outdir)
        outpath.mkdir(parents=True, exist_ok=True)

    started = datetime.now(timezone.utc).isoformat()
    t0 = time.perf_counter()
    payload = _ACTIONS[action](config, outpath)
    elapsed = time.perf_counter() - t0

    results = payload.get("results", [])
    passed = all(r.get("pass", True) for r in results)
    grid = None
    if config.get("case"):
        try:
            sample, _ = catalog.build(config["case"], config.get("resolution"),
                                      int(config.get("order", 4)))
            grid = list(sample.domain.shape)
        except Exception:
            grid = None
    report = {
        "schema_version": SCHEMA_VERSION,
        "scenario": _clean({k: v for k, v in sorted(config.items())}),
        "grid": grid,
        "passed": passed,
        **{k: _clean(v) for k, v in payload.items()},
        "timing": {"elapsed_seconds": elapsed, "started_utc": started},
    }
    if outpath is not None:
        _dump_json(report, outpath / "report.json")
    return report, 0 if passed else 1


def list_catalog() -> list[dict]:
    return catalog.list_catalog()


# ---------------------------------------------------------------------------
# argument parsing

def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON scenario config; explicit flags win")
    p.add_argument("--case", help="catalog case name")
    p.add_argument("--resolution", type=int)
    p.add_argument("--order", type=int, choices=(2, 4))
    p.add_argument("--out", help="output directory for reports and CSVs")
    p.add_argument("--threads", type=int,
                   help="worker count (PSEUDOMCF_THREADS overrides)")
    p.add_argument("--seed", type=int, help="seed echoed into the report")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="pseudomcf",
        description="self-similar mean curvature flow in pseudo-Euclidean "
                    "spaces: catalog, identity suite, flows, curve search",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("catalog", help="list catalog members and invariants")
    _add_common(p)

    p = sub.add_parser("identities", help="residual suite with grid refinement")
    _add_common(p)
    p.add_argument("--levels", type=int, default=3)

    p = sub.add_parser("flow", help="integrate dF/dt = H and check the "
                                    "level-set law")
    _add_common(p)
    p.add_argument("--scheme", choices=("rk4", "euler"))
    p.add_argument("--dt-alpha", type=float, dest="dt_alpha")
    p.add_argument("--until", type=float)
    p.add_argument("--boundary", choices=("auto", "none", "pin_exact", "freeze"))

    p = sub.add_parser("alcurve", help="closed self-shrinking curve search")
    _add_common(p)
    p.add_argument("--kappa0", type=float, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--target", help="tangent-winding ratio, e.g. 2/3")
    p.add_argument("--tolerance", type=float)
    p.add_argument("--ds", type=float)

    p = sub.add_parser("diagnose", help="spectral, bounded-geometry and "
                                        "light-cone-angle diagnostics")
    _add_common(p)
    return ap


def _config_from_args(args: argparse.Namespace) -> dict:
    config: dict = {}
    if args.config:
        config.update(json.loads(Path(args.config).read_text(encoding="utf-8")))
    config["action"] = args.command
    for key in ("case", "resolution", "order", "out", "threads", "seed",
                "levels", "scheme", "dt_alpha", "until", "boundary",
                "kappa0", "target", "tolerance", "ds"):
        val = getattr(args, key, None)
        if val is not None:
            config[key] = val
    return config


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = _config_from_args(args)
        report, code = run_scenario(config, outdir=config.get("out"))
    except (ScenarioError, catalog.CatalogError, ValueError) as exc:
        print(json.dumps({"error": str(exc)}), file=sys.stderr)
        return 2
    if args.command == "catalog":
        print(json.dumps([r["meta"] for r in report["results"]],
                         indent=2, sort_keys=True))
    else:
        summary = {
            "passed": report["passed"],
            "results": [{k: r.get(k) for k in ("name", "sup", "threshold", "pass")}
                        for r in report["results"]],
        }
        print(json.dumps(_clean(summary), indent=2, sort_keys=True))
    return code


if __name__ == "__main__":
    sys.exit(main())
