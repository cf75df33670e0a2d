"""Scenario files: YAML descriptions of a state, what to evaluate on it, and what to write.

Schema (all keys other than ``name`` and ``state`` are optional)::

    name: tmsv_loss_sweep
    seed: 7                    # required when a randomised suite is listed
    parameters: {r: 2.0}       # defaults for "$name" substitution
    state:                     # canonical string or source + channels
      source: tmsv:$r          # one string or a list (tensor / direct sum)
      channels:
        - loss: {mode: A, eta: $eta}
        - beamsplitter: {i: B, j: C, eta: 0.5}
    witnesses:
      - {kind: E, steered: B, group: A}
      - {kind: S3, steered: B, group: A, mode: specified}
    inferences:
      - {steered: B, group: A, target: z, conditioning: z, units: pauli}
    monogamy:
      - {check: R1, B: B, A: A, C: C}
      - {suite: qubit3_pure, samples: 300}
    sweep: {parameter: eta, start: 0.0, stop: 1.0, step: 0.05}
    outputs: [report, table, graph]

Canonical states are ``ghz3``, ``ghz:N``, ``w``, ``bell:KIND``
(``phi+``, ``phi-``, ``psi+``, ``psi-``), ``mixed:N``, ``tmsv:R``,
``cv_ghz:R``, ``dual:R`` and ``vacuum:N``. Any scalar written ``$name`` is
replaced by the matching parameter; sweep values override the defaults.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np
import yaml

from . import discrete as qd
from . import gaussian as qg
from .suites import SUITES

WITNESS_KINDS = ("E", "S2", "S3", "S_tilde_m", "CHSH_pair", "Bell_CHSH")
CHECKS = (
    "R1",
    "R2",
    "R3",
    "R4",
    "R5_R6",
    "chsh_moment_pair",
    "bell_sum",
    "bell_sum_max",
    "qubit_group_sums",
    "cross_uncertainty",
    "spin_cross_sums",
)
OUTPUTS = ("report", "table", "graph")
_PARAM = re.compile(r"\$([A-Za-z_][A-Za-z0-9_]*)")


class ScenarioError(ValueError):
    """Validation failure; ``field`` is a dotted path into the scenario document."""

    def __init__(self, field: str, message: str, source: str | None = None):
        self.field = field
        self.message = message
        self.source = source
        where = f"{source}: " if source else ""
        super().__init__(f"{where}{field}: {message}")


@dataclass(frozen=True)
class Sweep:
    parameter: str
    values: tuple[float, ...]


@dataclass
class Scenario:
    name: str
    state: Any
    parameters: dict[str, Any] = field(default_factory=dict)
    seed: int | None = None
    witnesses: list[dict] = field(default_factory=list)
    inferences: list[dict] = field(default_factory=list)
    monogamy: list[dict] = field(default_factory=list)
    sweep: Sweep | None = None
    outputs: tuple[str, ...] = ("report",)
    source: str | None = None
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def needs_seed(self) -> bool:
        return any("suite" in m for m in self.monogamy)

    def points(self) -> list[dict[str, Any]]:
        """Parameter assignments, one per sweep grid point."""
        if self.sweep is None:
            return [dict(self.parameters)]
        return [{**self.parameters, self.sweep.parameter: v} for v in self.sweep.values]


# --------------------------------------------------------------------------- #
# loading
# --------------------------------------------------------------------------- #


def _mark(err: yaml.YAMLError) -> str:
    mark = getattr(err, "problem_mark", None)
    if mark is None:
        return ""
    return f"line {mark.line + 1}, column {mark.column + 1}: "


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError("<file>", f"cannot read scenario: {exc.strerror}", str(path)) from exc
    return parse_scenario(text, source=str(path))


def parse_scenario(text: str, source: str | None = None) -> Scenario:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        problem = getattr(exc, "problem", None) or str(exc)
        raise ScenarioError("<yaml>", f"{_mark(exc)}{problem}", source) from exc
    try:
        return validate(doc, source)
    except ScenarioError as exc:
        if exc.source is None and source is not None:
            raise ScenarioError(exc.field, exc.message, source) from None
        raise


def _require(doc: Mapping, key: str, where: str):
    if key not in doc:
        raise ScenarioError(f"{where}{key}", "missing required field")
    return doc[key]


def _list_of_maps(doc: Mapping, key: str) -> list[dict]:
    items = doc.get(key) or []
    if not isinstance(items, list):
        raise ScenarioError(key, "must be a list")
    for k, it in enumerate(items):
        if not isinstance(it, dict):
            raise ScenarioError(f"{key}[{k}]", "must be a mapping")
    return items


def _sweep(raw, where: str = "sweep") -> Sweep:
    if not isinstance(raw, dict):
        raise ScenarioError(where, "must be a mapping")
    param = _require(raw, "parameter", f"{where}.")
    if not isinstance(param, str):
        raise ScenarioError(f"{where}.parameter", "must be a name")
    if "values" in raw:
        values = raw["values"]
        if not isinstance(values, list) or not values:
            raise ScenarioError(f"{where}.values", "must be a non-empty list")
        try:
            grid = [float(v) for v in values]
        except (TypeError, ValueError):
            raise ScenarioError(f"{where}.values", "entries must be numbers") from None
    else:
        try:
            start, stop, step = (float(_require(raw, k, f"{where}.")) for k in ("start", "stop", "step"))
        except (TypeError, ValueError):
            raise ScenarioError(where, "start, stop and step must be numbers") from None
        if not step > 0:
            raise ScenarioError(f"{where}.step", "must be positive")
        n = (stop - start) / step
        if n < 0 or abs(n - round(n)) > 1e-9 * max(1.0, abs(n)):
            raise ScenarioError(f"{where}.step", "must divide stop - start into whole steps")
        # rounding strips accumulated float noise such as 0.15000000000000002
        grid = list(np.round(np.linspace(start, stop, int(round(n)) + 1), 12))
    if not all(math.isfinite(v) for v in grid):
        raise ScenarioError(where, "grid values must be finite")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ScenarioError(where, "grid must be strictly increasing")
    return Sweep(param, tuple(float(v) for v in grid))


def validate(doc, source: str | None = None) -> Scenario:
    if not isinstance(doc, dict):
        raise ScenarioError("<root>", "scenario must be a mapping")
    unknown = set(doc) - {"name", "seed", "parameters", "state", "witnesses", "inferences", "monogamy", "sweep", "outputs"}
    if unknown:
        raise ScenarioError(sorted(unknown)[0], "unknown field")
    name = _require(doc, "name", "")
    if not isinstance(name, str) or not re.fullmatch(r"[A-Za-z0-9_.-]+", name):
        raise ScenarioError("name", "must be a non-empty identifier (letters, digits, _ . -)")
    seed = doc.get("seed")
    if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int) or seed < 0):
        raise ScenarioError("seed", "must be a nonnegative integer")
    params = doc.get("parameters") or {}
    if not isinstance(params, dict):
        raise ScenarioError("parameters", "must be a mapping")
    outputs = doc.get("outputs", ["report"])
    if isinstance(outputs, str):
        outputs = [outputs]
    for k, o in enumerate(outputs):
        if o not in OUTPUTS:
            raise ScenarioError(f"outputs[{k}]", f"unknown output {o!r}; expected one of {list(OUTPUTS)}")
    sc = Scenario(
        name=name,
        state=_require(doc, "state", ""),
        parameters=dict(params),
        seed=seed,
        witnesses=_list_of_maps(doc, "witnesses"),
        inferences=_list_of_maps(doc, "inferences"),
        monogamy=_list_of_maps(doc, "monogamy"),
        sweep=_sweep(doc["sweep"]) if doc.get("sweep") is not None else None,
        outputs=tuple(outputs),
        source=source,
        raw=doc,
    )
    for k, w in enumerate(sc.witnesses):
        kind = _require(w, "kind", f"witnesses[{k}].")
        if kind not in WITNESS_KINDS:
            raise ScenarioError(f"witnesses[{k}].kind", f"unknown witness kind {kind!r}")
        _require(w, "steered", f"witnesses[{k}].")
        _require(w, "group", f"witnesses[{k}].")
    for k, inf in enumerate(sc.inferences):
        for key in ("steered", "group", "target"):
            _require(inf, key, f"inferences[{k}].")
    for k, m in enumerate(sc.monogamy):
        if "suite" in m:
            if m["suite"] not in SUITES:
                raise ScenarioError(f"monogamy[{k}].suite", f"unknown suite {m['suite']!r}")
            samples = _require(m, "samples", f"monogamy[{k}].")
            if isinstance(samples, bool) or not isinstance(samples, int) or samples < 1:
                raise ScenarioError(f"monogamy[{k}].samples", "must be a positive integer")
        else:
            check = _require(m, "check", f"monogamy[{k}].")
            if check not in CHECKS:
                raise ScenarioError(f"monogamy[{k}].check", f"unknown check {check!r}")
    # every $name must resolve at every grid point; building the state also
    # validates party references, so try it once per point
    for point in sc.points():
        substitute(doc.get("state"), point, "state")
        for key in ("witnesses", "inferences", "monogamy"):
            substitute(doc.get(key) or [], point, key)
    return sc


# --------------------------------------------------------------------------- #
# parameters and states
# --------------------------------------------------------------------------- #


def substitute(obj, params: Mapping[str, Any], where: str):
    """Replace ``$name`` scalars (or ``$name`` inside canonical strings) by parameter values."""
    if isinstance(obj, dict):
        return {k: substitute(v, params, f"{where}.{k}") for k, v in obj.items()}
    if isinstance(obj, list):
        return [substitute(v, params, f"{where}[{k}]") for k, v in enumerate(obj)]
    if isinstance(obj, str) and "$" in obj:
        m = _PARAM.fullmatch(obj)
        if m:
            if m.group(1) not in params:
                raise ScenarioError(where, f"undefined parameter ${m.group(1)}")
            return params[m.group(1)]

        def repl(mm):
            if mm.group(1) not in params:
                raise ScenarioError(where, f"undefined parameter ${mm.group(1)}")
            return repr(params[mm.group(1)])

        return _PARAM.sub(repl, obj)
    return obj


def _number(value, where: str) -> float:
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise ScenarioError(where, f"expected a number, got {value!r}") from None
    if not math.isfinite(v):
        raise ScenarioError(where, "must be finite")
    return v


def _count(value, where: str) -> int:
    v = _number(value, where)
    if v != int(v) or v < 1:
        raise ScenarioError(where, f"expected a positive integer, got {value!r}")
    return int(v)


def canonical_state(spec: str, where: str = "state"):
    """Build a canonical state from ``"name"`` or ``"name:arg"``."""
    if not isinstance(spec, str):
        raise ScenarioError(where, f"expected a canonical state string, got {spec!r}")
    name, _, arg = spec.strip().partition(":")
    argw = f"{where} ({spec})"
    try:
        if name == "ghz3" and not arg:
            return qd.make_ghz(3)
        if name == "ghz":
            return qd.make_ghz(_count(arg, argw))
        if name == "w" and not arg:
            return qd.make_w()
        if name == "bell":
            return qd.make_bell(arg)
        if name == "mixed":
            return qd.maximally_mixed(_count(arg, argw))
        if name == "tmsv":
            return qg.two_mode_squeezed(_number(arg, argw))
        if name == "cv_ghz":
            return qg.cv_ghz(_number(arg, argw))
        if name == "dual":
            return qg.dual_steering_network(_number(arg, argw))
        if name == "vacuum":
            return qg.vacuum(_count(arg or 1, argw))
    except ScenarioError:
        raise
    except ValueError as exc:
        raise ScenarioError(where, str(exc)) from None
    raise ScenarioError(where, f"unknown canonical state {spec!r}")


def _combine(states, where: str):
    if all(isinstance(s, qg.GaussianState) for s in states):
        return qg.direct_sum(*states)
    if all(isinstance(s, qd.MultipartyDensityState) for s in states):
        return qd.tensor(*states)
    raise ScenarioError(where, "cannot combine discrete and Gaussian sources")


def _mode(state, value, where: str) -> int:
    try:
        return state.mode_index(value)
    except ValueError as exc:
        raise ScenarioError(where, str(exc)) from None


def _apply_channel(state, ch, where: str):
    if not isinstance(ch, dict) or len(ch) != 1:
        raise ScenarioError(where, "a channel is a single-key mapping such as {loss: {mode: A, eta: 0.5}}")
    (kind, args), = ch.items()
    if not isinstance(state, qg.GaussianState):
        raise ScenarioError(where, f"channel {kind!r} needs a Gaussian state")
    if not isinstance(args, dict):
        raise ScenarioError(f"{where}.{kind}", "arguments must be a mapping")
    w = f"{where}.{kind}"
    if kind == "loss":
        eta = _number(_require(args, "eta", f"{w}."), f"{w}.eta")
        if not 0 <= eta <= 1:
            raise ScenarioError(f"{w}.eta", "transmission must lie in [0, 1]")
        return qg.apply_loss(state, _mode(state, _require(args, "mode", f"{w}."), f"{w}.mode"), eta)
    if kind == "beamsplitter":
        eta = _number(_require(args, "eta", f"{w}."), f"{w}.eta")
        if not 0 <= eta <= 1:
            raise ScenarioError(f"{w}.eta", "transmissivity must lie in [0, 1]")
        i = _mode(state, _require(args, "i", f"{w}."), f"{w}.i")
        j = _mode(state, _require(args, "j", f"{w}."), f"{w}.j")
        if i == j:
            raise ScenarioError(w, "beam splitter needs two different modes")
        return qg.apply_beam_splitter(state, i, j, eta)
    raise ScenarioError(where, f"unknown channel {kind!r}; expected loss or beamsplitter")


def build_state(spec, where: str = "state"):
    """Construct the state described by a (parameter-substituted) state field."""
    if isinstance(spec, str):
        return canonical_state(spec, where)
    if not isinstance(spec, dict):
        raise ScenarioError(where, "must be a canonical state string or a mapping with source/channels")
    unknown = set(spec) - {"source", "channels"}
    if unknown:
        raise ScenarioError(f"{where}.{sorted(unknown)[0]}", "unknown field")
    src = _require(spec, "source", f"{where}.")
    if isinstance(src, list):
        if not src:
            raise ScenarioError(f"{where}.source", "must not be empty")
        state = _combine([canonical_state(s, f"{where}.source[{k}]") for k, s in enumerate(src)], f"{where}.source")
    else:
        state = canonical_state(src, f"{where}.source")
    channels = spec.get("channels") or []
    if not isinstance(channels, list):
        raise ScenarioError(f"{where}.channels", "must be a list")
    for k, ch in enumerate(channels):
        try:
            state = _apply_channel(state, ch, f"{where}.channels[{k}]")
        except qd.InvalidStateError as exc:
            raise ScenarioError(f"{where}.channels[{k}]", f"constructed state is invalid: {exc}") from None
    return state
