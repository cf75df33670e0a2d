"""Command-line runner for scenario files.

Usage::

    steermon run SCENARIO [--out DIR] [--seed N] [--format report|table|graph]

Outputs go to ``DIR/<scenario name>/`` where ``DIR`` defaults to
``$STEERMON_OUT`` or ``./steermon-out``. Exit status is 0 on success, 1
when the scenario fails validation and 2 when evaluation fails.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .discrete import MultipartyDensityState, pauli, resolve_parties, spin_matrices, spin_of_dim
from .gaussian import GaussianState, QuadratureObservable
from .graph import DirectedEdge, SteeringGraph, build_steering_graph, export_graph, graph_from_dict, graph_to_dict
from .inference import inf_variance_discrete, inf_variance_gaussian
from .monogamy import (
    check_bell_sum,
    check_chsh_moment_pair,
    check_cross_uncertainty,
    check_qubit_group_sums,
    check_R1,
    check_R2,
    check_R3,
    check_R4,
    check_R5_R6,
    check_spin_cross_sums,
    max_bell_sum,
)
from .scenario import Scenario, ScenarioError, build_state, load_scenario, substitute
from .suites import run_suite
from .witnesses import (
    SQRT2,
    bell_chsh,
    chsh_moment_settings,
    chsh_pair_steering,
    epr_E,
    s2,
    s3,
    s_tilde_m,
)

log = logging.getLogger("steermon")

OUT_ENV = "STEERMON_OUT"
DEFAULT_OUT = "steermon-out"
EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2


class EvaluationError(RuntimeError):
    pass


@dataclass
class ReportDocument:
    """Numeric payload of a run plus wall-clock timing kept apart from it."""

    payload: dict
    timing: dict = field(default_factory=dict)

    def payload_json(self) -> str:
        return json.dumps(self.payload, indent=2, sort_keys=True)

    def to_json(self) -> str:
        return json.dumps({"payload": self.payload, "timing": self.timing}, indent=2, sort_keys=True) + "\n"


# --------------------------------------------------------------------------- #
# item evaluation
# --------------------------------------------------------------------------- #


def _labels(state, parties, where: str) -> tuple[str, ...]:
    try:
        if isinstance(state, GaussianState):
            return tuple(state.labels[k] for k in state.modes(parties))
        return tuple(state.labels[k] for k in resolve_parties(state, parties))
    except (ValueError, KeyError, TypeError) as exc:
        raise ScenarioError(where, f"unknown party or mode {parties!r} ({exc})") from None


def _pauli_string(state: MultipartyDensityState, group: Sequence[str], spec: str, where: str) -> np.ndarray:
    """``"xz"`` means ``sigma_x`` on the first group party times ``sigma_z`` on the second; ``i`` is identity."""
    if not isinstance(spec, str) or len(spec) != len(group) or set(spec) - set("xyzi"):
        raise ScenarioError(where, f"expected {len(group)} letters from x, y, z, i; got {spec!r}")
    op = np.eye(1)
    for party, c in zip(group, spec):
        d = state.party_dims[state.index_of(party)]
        op = np.kron(op, np.eye(d) if c == "i" else spin_matrices(spin_of_dim(d), c))
    return op


def _settings(raw, where: str):
    if raw is None or raw in ("chsh1", "chsh2"):
        return chsh_moment_settings(which=2 if raw == "chsh2" else 1)
    try:
        return [tuple(float(x) for x in s) for s in raw]
    except (TypeError, ValueError):
        raise ScenarioError(where, "settings must be 'chsh1', 'chsh2' or a list of [c, theta, theta_p]") from None


def _angles(raw, n: int, where: str):
    try:
        out = tuple(float(x) for x in raw)
    except (TypeError, ValueError):
        raise ScenarioError(where, f"expected {n} angles") from None
    if len(out) != n:
        raise ScenarioError(where, f"expected {n} angles, got {len(out)}")
    return out


def _quadrature(state: GaussianState, terms, where: str) -> QuadratureObservable:
    """``{X_B: 1, P_C: -1}`` style linear combination."""
    if not isinstance(terms, dict):
        raise ScenarioError(where, "quadrature must be a mapping like {X_B: 1, P_C: 1}")
    try:
        return QuadratureObservable.from_terms(state.n_modes, {k: float(v) for k, v in terms.items()})
    except (ValueError, TypeError) as exc:
        raise ScenarioError(where, str(exc)) from None


def evaluate_witness(state, item: dict, where: str):
    kind = item["kind"]
    steered = _labels(state, item["steered"], f"{where}.steered")
    group = _labels(state, item["group"], f"{where}.group")
    if set(steered) & set(group):
        raise ScenarioError(where, "steered and steering parties overlap")
    if kind == "E":
        if not isinstance(state, GaussianState):
            raise ScenarioError(f"{where}.kind", "witness E needs a Gaussian state")
        quads = None
        if "quadratures" in item:
            q = item["quadratures"]
            if not isinstance(q, list) or len(q) != 2:
                raise ScenarioError(f"{where}.quadratures", "expected a list of two quadratures")
            quads = tuple(_quadrature(state, t, f"{where}.quadratures[{k}]") for k, t in enumerate(q))
        return epr_E(state, steered, group, quads)
    if not isinstance(state, MultipartyDensityState):
        raise ScenarioError(f"{where}.kind", f"witness {kind} needs a discrete state")
    if kind in ("S2", "S3"):
        mode = item.get("mode", "optimized")
        cond = item.get("conditioning")
        if cond is not None:
            if not isinstance(cond, dict):
                raise ScenarioError(f"{where}.conditioning", "must map each axis to a Pauli string")
            cond = {ax: _pauli_string(state, group, s, f"{where}.conditioning.{ax}") for ax, s in cond.items()}
        kw = {"axes": tuple(item["axes"])} if kind == "S2" and "axes" in item else {}
        fn = s2 if kind == "S2" else s3
        return fn(state, steered, group, mode, conditioning=cond, **kw)
    if kind == "S_tilde_m":
        return s_tilde_m(state, steered, group, _settings(item.get("settings"), f"{where}.settings"),
                         float(item.get("C_m", SQRT2)))
    if kind == "CHSH_pair":
        which = item.get("which", 1)
        if which not in (1, 2):
            raise ScenarioError(f"{where}.which", "must be 1 or 2")
        kw = {"optimize": bool(item.get("optimize", True))}
        if "primed" in item:
            kw["primed_angles"] = _angles(item["primed"], 2, f"{where}.primed")
        return chsh_pair_steering(state, steered, group, **kw)[which - 1]
    if kind == "Bell_CHSH":
        kw = {"optimize": bool(item.get("optimize", "angles" not in item))}
        if "angles" in item:
            kw["angles"] = _angles(item["angles"], 4, f"{where}.angles")
        return bell_chsh(state, steered, group, **kw)
    raise ScenarioError(f"{where}.kind", f"unknown witness kind {kind!r}")


def evaluate_inference(state, item: dict, where: str) -> dict:
    steered = _labels(state, item["steered"], f"{where}.steered")
    group = _labels(state, item["group"], f"{where}.group")
    if isinstance(state, GaussianState):
        res = inf_variance_gaussian(state, steered, _quadrature(state, item["target"], f"{where}.target"), group)
        cond = res.conditioning.tolist()
    else:
        units = item.get("units", "J")
        if units not in ("J", "pauli"):
            raise ScenarioError(f"{where}.units", "must be 'J' or 'pauli'")
        target = item["target"]
        if target not in ("x", "y", "z"):
            raise ScenarioError(f"{where}.target", "must be one of x, y, z")
        d = state.party_dims[state.index_of(steered[0])]
        t_m = pauli(target) if units == "pauli" else spin_matrices(spin_of_dim(d), target)
        mode = item.get("mode", "specified" if "conditioning" in item else "optimized")
        cond = None
        if mode == "specified":
            raw = item.get("conditioning", target if len(group) == 1 else None)
            if raw is None:
                raise ScenarioError(f"{where}.conditioning", "specified mode on a group needs a Pauli string")
            cond = _pauli_string(state, group, raw, f"{where}.conditioning")
        res = inf_variance_discrete(state, steered, t_m, group, mode, cond)
        cond = None if mode == "specified" else "optimized"
    return {
        "steered": "".join(steered),
        "group": "".join(group),
        "target": item["target"],
        "mode": res.mode,
        "variance": res.variance,
        "conditioning": cond,
    }


def _parties(state, item: dict, keys: Sequence[str], where: str) -> dict:
    out = {}
    for k in keys:
        if k not in item:
            raise ScenarioError(f"{where}.{k}", "missing required field")
        out[k] = "".join(_labels(state, item[k], f"{where}.{k}"))
    return out


def evaluate_check(state, item: dict, where: str) -> list:
    check = item["check"]
    gaussian = {"R1", "R5_R6", "cross_uncertainty"}
    if (check in gaussian) != isinstance(state, GaussianState):
        raise ScenarioError(f"{where}.check", f"check {check} is not defined for this kind of state")
    if check == "R4":
        B = "".join(_labels(state, _req(item, "B", where), f"{where}.B"))
        groups = ["".join(_labels(state, g, f"{where}.groups[{k}]")) for k, g in enumerate(_req(item, "groups", where))]
        return [check_R4(state, B, groups, _settings(item.get("settings"), f"{where}.settings"),
                         float(item.get("C_m", SQRT2)))]
    four = check in ("R3", "spin_cross_sums") or (check == "qubit_group_sums" and "D" in item)
    p = _parties(state, item, ("B", "A", "C", "D") if four else ("B", "A", "C"), where)
    mode = item.get("mode", "optimized")
    if check == "R1":
        return [check_R1(state, **p)]
    if check == "R5_R6":
        return check_R5_R6(state, **p)
    if check == "cross_uncertainty":
        return check_cross_uncertainty(state, **p)
    if check == "R2":
        return [check_R2(state, **p, witness_mode=mode)]
    if check == "R3":
        return [check_R3(state, **p, witness_mode=mode)]
    if check == "spin_cross_sums":
        return check_spin_cross_sums(state, **p, mode=mode)
    if check == "qubit_group_sums":
        return check_qubit_group_sums(state, **p, pair_mode=mode)
    if check == "chsh_moment_pair":
        kw = {"which": int(item.get("which", 1))}
        if "primed" in item:
            kw["primed_A"] = _angles(item["primed"], 2, f"{where}.primed")
        return [check_chsh_moment_pair(state, **p, **kw)]
    if check == "bell_sum":
        angles = _angles(item.get("angles", (0.0, np.pi / 2, np.pi / 4, -np.pi / 4)), 4, f"{where}.angles")
        return [check_bell_sum(state, **p, angles=angles)]
    if check == "bell_sum_max":
        value, angles = max_bell_sum(state, **p, grid=int(item.get("grid", 8)))
        return [{"inequality_id": "Bell_sum", "grid_max": value, "rhs": 4.0, "angles": [float(a) for a in angles]}]
    raise ScenarioError(f"{where}.check", f"unknown check {check!r}")


def _req(item, key, where):
    if key not in item:
        raise ScenarioError(f"{where}.{key}", "missing required field")
    return item[key]


def _as_dict(rep) -> dict:
    return rep if isinstance(rep, dict) else rep.to_dict()


# --------------------------------------------------------------------------- #
# running
# --------------------------------------------------------------------------- #


def _state_summary(state) -> dict:
    if isinstance(state, GaussianState):
        return {"type": "gaussian", "modes": list(state.labels)}
    return {"type": "discrete", "parties": list(state.labels), "dims": list(state.party_dims)}


def evaluate_point(sc: Scenario, params: dict) -> dict:
    """Evaluate every witness, inference and single-state check at one parameter point."""
    state = build_state(substitute(sc.state, params, "state"))
    witnesses = [evaluate_witness(state, substitute(w, params, f"witnesses[{k}]"), f"witnesses[{k}]")
                 for k, w in enumerate(sc.witnesses)]
    inferences = [evaluate_inference(state, substitute(i, params, f"inferences[{k}]"), f"inferences[{k}]")
                  for k, i in enumerate(sc.inferences)]
    monogamy = []
    for k, m in enumerate(sc.monogamy):
        if "suite" not in m:
            monogamy += [_as_dict(r) for r in evaluate_check(state, substitute(m, params, f"monogamy[{k}]"), f"monogamy[{k}]")]
    point = {
        "parameters": {k: params[k] for k in sorted(params)},
        "state": _state_summary(state),
        "witnesses": [w.to_dict() for w in witnesses],
        "inferences": inferences,
        "monogamy": monogamy,
    }
    if "graph" in sc.outputs:
        point["graph"] = graph_to_dict(_graph_from_witnesses(state, witnesses))
    return point


def _graph_from_witnesses(state, witnesses) -> SteeringGraph:
    # reuse the evaluated records so per-item options carry over; the
    # builder with an empty plan supplies the concurrence edges
    base = build_steering_graph(state, [])
    edges = tuple(
        DirectedEdge(tuple(sorted(w.steering_group)), tuple(sorted(w.steered)), w.kind, float(w.value))
        for w in witnesses if w.detects_steering
    )
    return SteeringGraph(base.nodes, edges, base.undirected_edges, tuple(witnesses))


def run_scenario(path: str | Path, seed: int | None = None, outputs: Sequence[str] | None = None) -> ReportDocument:
    """Load, validate and evaluate a scenario; returns the report without writing files.

    ``seed`` overrides the file's seed. ``outputs`` overrides the file's
    output list (only ``"graph"`` changes the payload).
    """
    sc = load_scenario(path)
    if outputs is not None:
        sc.outputs = tuple(outputs)
    return _run_loaded(sc, seed)


def _witness_key(w: dict) -> str:
    return f"{w['kind']}[{w['steered']}|{w['steering_group']}]"


def _target_name(inference: dict) -> str:
    target = inference["target"]
    if isinstance(target, dict):
        return "+".join(k if v == 1 else f"{v!r}*{k}" for k, v in target.items()).replace("+-", "-")
    return f"{target}_{inference['steered']}"


def emit_table(doc: ReportDocument, delimiter: str = "\t") -> str:
    """One row per grid point: the swept parameter, witness values, inference variances, report slacks."""
    payload = doc.payload
    sweep = payload["sweep"]
    header, rows = [], []
    for k, pt in enumerate(payload["points"]):
        cols, vals = [], []
        if sweep is not None:
            cols.append(sweep["parameter"])
            vals.append(pt["parameters"][sweep["parameter"]])
        for w in pt["witnesses"]:
            cols.append(_witness_key(w))
            vals.append(w["value"])
        for i in pt["inferences"]:
            cols.append(f"var[{_target_name(i)}|{i['group']}]")
            vals.append(i["variance"])
        for j, m in enumerate(pt["monogamy"]):
            if "slack" in m:
                cols.append(f"{m['inequality_id']}#{j}.slack")
                vals.append(m["slack"])
            else:
                cols.append(f"{m['inequality_id']}#{j}.grid_max")
                vals.append(m["grid_max"])
        if k == 0:
            header = cols
        elif cols != header:
            raise EvaluationError("table columns differ between sweep points")
        rows.append(delimiter.join(repr(float(v)) for v in vals))
    return "\n".join([delimiter.join(header), *rows]) + "\n"


def write_outputs(doc: ReportDocument, outputs: Sequence[str], out_dir: Path) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    if "report" in outputs:
        p = out_dir / "report.json"
        p.write_text(doc.to_json())
        written.append(p)
    if "table" in outputs:
        p = out_dir / "table.tsv"
        p.write_text(emit_table(doc))
        written.append(p)
    if "graph" in outputs:
        points = doc.payload["points"]
        for k, pt in enumerate(points):
            if "graph" not in pt:
                continue
            g = graph_from_dict(pt["graph"])
            stem = "graph" if len(points) == 1 else f"graph-{k:03d}"
            for fmt, ext in (("dot", "dot"), ("structured", "json")):
                p = out_dir / f"{stem}.{ext}"
                p.write_text(export_graph(g, fmt))
                written.append(p)
    return written


def _cmd_run(args) -> int:
    try:
        sc = load_scenario(args.scenario)
        if args.format:
            sc.outputs = (args.format,)
        doc = _run_loaded(sc, args.seed)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
        log.debug("evaluation failed", exc_info=True)
        print(f"error: evaluation failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    out_root = Path(args.out or os.environ.get(OUT_ENV) or DEFAULT_OUT)
    try:
        written = write_outputs(doc, sc.outputs, out_root / sc.name)
    except OSError as exc:
        print(f"error: cannot write outputs: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for p in written:
        print(p)
    return EXIT_OK


def _run_loaded(sc: Scenario, seed: int | None) -> ReportDocument:
    seed = sc.seed if seed is None else seed
    if sc.needs_seed and seed is None:
        raise ScenarioError("seed", "randomised suites need a seed (in the file or via --seed)")
    t0 = time.perf_counter()
    points, item_times = [], []
    for params in sc.points():
        t = time.perf_counter()
        points.append(evaluate_point(sc, params))
        item_times.append(time.perf_counter() - t)
    suites = []
    for m in sc.monogamy:
        if "suite" in m:
            t = time.perf_counter()
            suites.append(run_suite(m["suite"], int(m["samples"]), int(seed)).to_dict())
            item_times.append(time.perf_counter() - t)
    payload = {
        "scenario": sc.name,
        "tool_version": __version__,
        "seed": seed,
        "sweep": None if sc.sweep is None else {"parameter": sc.sweep.parameter, "values": list(sc.sweep.values)},
        "points": points,
        "suites": suites,
    }
    return ReportDocument(payload, {"total_seconds": time.perf_counter() - t0, "item_seconds": item_times})


class _Parser(argparse.ArgumentParser):
    # usage mistakes are validation failures, not argparse's default status 2
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="steermon", description="Evaluate steering witnesses and monogamy relations.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log debugging detail")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a scenario file")
    run.add_argument("scenario", help="path to a YAML scenario")
    run.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./{DEFAULT_OUT})")
    run.add_argument("--seed", type=int, help="override the scenario seed")
    run.add_argument("--format", choices=("report", "table", "graph"), help="write only this output")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command == "run":
        return _cmd_run(args)
    parser.error(f"unknown command {args.command!r}")
    return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
