"""Problem-file loading, strict validation, overrides, and round-trip write.

Problem files are YAML with four blocks:

    plant:   orders, initial_state, dynamics (one expression per state),
             controls, control_lower, control_upper
    cost:    terms: list of {order, operand}; order 0 terms are terminal
             operands over t and x, others run over t, x and u
    solver:  t0, tf plus any SweepConfig field, and quadratic_control
    output:  csv, report paths (optional)

Unknown keys anywhere are rejected.  Validation errors name the offending
field; YAML syntax errors carry the parser's line/column mark.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
import yaml

from .cost import CostTerm, PerformanceIndex
from .errors import ConfigError
from .expressions import compile_expression
from .plant import FractionalPlant
from .problem import HJBProblem
from .sweep import SweepConfig

__all__ = ["ParsedProblem", "parse_problem", "load_raw", "write_problem",
           "apply_overrides", "build_problem"]

_PLANT_KEYS = {"orders", "initial_state", "dynamics", "controls",
               "control_lower", "control_upper"}
_COST_KEYS = {"terms"}
_TERM_KEYS = {"order", "operand"}
_SOLVER_KEYS = {"t0", "tf", "dt", "u_init", "n_a", "n_b", "p_max",
                "max_iters", "error_tol", "relaxation", "stepper",
                "b_series", "fd_step", "quadratic_control"}
_OUTPUT_KEYS = {"csv", "report"}
_TOP_KEYS = {"plant", "cost", "solver", "output"}


@dataclass
class ParsedProblem:
    """A validated problem file: solver-ready objects plus the normalized
    document for round-tripping."""

    problem: HJBProblem
    config: SweepConfig
    csv_path: Optional[str]
    report_path: Optional[str]
    raw: Dict = field(repr=False)


def _reject_unknown(block: Dict, allowed: set, where: str) -> None:
    if not isinstance(block, dict):
        raise ConfigError(f"{where}: expected a mapping")
    unknown = set(block) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")


def _need(block: Dict, key: str, where: str):
    if key not in block:
        raise ConfigError(f"{where}.{key}: missing required field")
    return block[key]


def _float_list(value, where: str) -> List[float]:
    if not isinstance(value, (list, tuple)) or not value:
        raise ConfigError(f"{where}: expected a non-empty list of numbers")
    out = []
    for i, item in enumerate(value):
        if isinstance(item, bool) or not isinstance(item, (int, float)):
            raise ConfigError(f"{where}[{i}]: expected a number")
        out.append(float(item))
    return out


def load_raw(path: str) -> Dict:
    """Read and parse the YAML document, reporting line/column on errors."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError(f"problem file not found: {path}")
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        loc = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigError(f"{path}: YAML parse error{loc}: {exc.problem}")
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: document must be a mapping")
    return doc


def apply_overrides(doc: Dict, overrides: List[str]) -> Dict:
    """Apply dotted key=value overrides, coercing to the existing type.

    Example: solver.max_iters=0.  Paths must already exist in the
    document (strict mode).
    """
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        dotted, text = item.split("=", 1)
        parts = dotted.strip().split(".")
        node = doc
        for part in parts[:-1]:
            if not isinstance(node, dict) or part not in node:
                raise ConfigError(f"override path {dotted!r} does not exist")
            node = node[part]
        leaf = parts[-1]
        if not isinstance(node, dict) or leaf not in node:
            raise ConfigError(f"override path {dotted!r} does not exist")
        current = node[leaf]
        try:
            if isinstance(current, bool):
                if text.lower() not in ("true", "false"):
                    raise ValueError
                node[leaf] = text.lower() == "true"
            elif isinstance(current, int):
                node[leaf] = int(float(text))
            elif isinstance(current, float):
                node[leaf] = float(text)
            elif isinstance(current, str):
                node[leaf] = text
            else:
                node[leaf] = yaml.safe_load(text)
        except ValueError:
            raise ConfigError(
                f"override {dotted!r}: cannot coerce {text!r} to "
                f"{type(current).__name__}")
    return doc


def build_problem(doc: Dict) -> ParsedProblem:
    """Validate a parsed document and assemble solver objects."""
    _reject_unknown(doc, _TOP_KEYS, "document")
    plant_block = _need(doc, "plant", "document")
    cost_block = _need(doc, "cost", "document")
    solver_block = _need(doc, "solver", "document")
    output_block = doc.get("output", {}) or {}
    _reject_unknown(plant_block, _PLANT_KEYS, "plant")
    _reject_unknown(cost_block, _COST_KEYS, "cost")
    _reject_unknown(solver_block, _SOLVER_KEYS, "solver")
    _reject_unknown(output_block, _OUTPUT_KEYS, "output")

    orders = _float_list(_need(plant_block, "orders", "plant"), "plant.orders")
    for i, q in enumerate(orders):
        if not 0.0 < q < 1.0:
            raise ConfigError(
                f"plant.orders[{i}]: order must lie in (0,1), got {q}")
    x0 = _float_list(_need(plant_block, "initial_state", "plant"),
                     "plant.initial_state")
    if len(x0) != len(orders):
        raise ConfigError("plant.initial_state: length must match plant.orders")
    n_controls = _need(plant_block, "controls", "plant")
    if isinstance(n_controls, bool) or not isinstance(n_controls, int) \
            or n_controls < 1:
        raise ConfigError("plant.controls: expected a positive integer")
    dynamics_src = _need(plant_block, "dynamics", "plant")
    if not isinstance(dynamics_src, list) or len(dynamics_src) != len(orders):
        raise ConfigError("plant.dynamics: one expression per state required")
    lo = _float_list(_need(plant_block, "control_lower", "plant"),
                     "plant.control_lower")
    hi = _float_list(_need(plant_block, "control_upper", "plant"),
                     "plant.control_upper")
    if len(lo) != n_controls or len(hi) != n_controls:
        raise ConfigError("plant.control_lower/upper: one bound per control")

    n = len(orders)
    state_names = [f"x{i + 1}" for i in range(n)]
    control_names = [f"u{j + 1}" for j in range(n_controls)]
    dyn_vars = ["t"] + state_names + control_names
    try:
        dyn_fns = [compile_expression(src, dyn_vars) for src in dynamics_src]
    except ConfigError as exc:
        raise ConfigError(f"plant.dynamics: {exc}")

    def rhs(t, x, u):
        env = {"t": t}
        env.update(zip(state_names, x))
        env.update(zip(control_names, u))
        return np.array([fn(env) for fn in dyn_fns])

    terms_block = _need(cost_block, "terms", "cost")
    if not isinstance(terms_block, list) or not terms_block:
        raise ConfigError("cost.terms: expected a non-empty list")
    terms = []
    for i, entry in enumerate(terms_block):
        where = f"cost.terms[{i}]"
        _reject_unknown(entry, _TERM_KEYS, where)
        v = _need(entry, "order", where)
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"{where}.order: expected a number")
        v = float(v)
        if not 0.0 <= v <= 2.0:
            raise ConfigError(f"{where}.order: must lie in [0,2], got {v}")
        src = _need(entry, "operand", where)
        if v == 0.0:
            try:
                fn = compile_expression(src, ["t"] + state_names)
            except ConfigError as exc:
                raise ConfigError(f"{where}.operand: {exc}")

            def terminal(tf, x, fn=fn):
                env = {"t": tf}
                env.update(zip(state_names, x))
                return fn(env)

            terms.append(CostTerm(v=0.0, terminal=terminal))
        else:
            try:
                fn = compile_expression(src, dyn_vars)
            except ConfigError as exc:
                raise ConfigError(f"{where}.operand: {exc}")

            def running(t, x, u, fn=fn):
                env = {"t": t}
                env.update(zip(state_names, x))
                env.update(zip(control_names, u))
                return fn(env)

            terms.append(CostTerm(v=v, running=running))

    t0 = float(solver_block.get("t0", 0.0))
    tf = _need(solver_block, "tf", "solver")
    if isinstance(tf, bool) or not isinstance(tf, (int, float)) or tf <= t0:
        raise ConfigError("solver.tf: expected a number greater than t0")
    quadratic = bool(solver_block.get("quadratic_control", False))

    cfg_fields = {k: v for k, v in solver_block.items()
                  if k not in ("t0", "tf", "quadratic_control")}
    try:
        config = SweepConfig(**cfg_fields)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"solver: {exc}")

    plant = FractionalPlant(orders=tuple(orders), rhs=rhs,
                            x0=np.array(x0), n_controls=n_controls, t0=t0)
    problem = HJBProblem(plant=plant, index=PerformanceIndex(tuple(terms)),
                         tf=float(tf), u_lower=np.array(lo),
                         u_upper=np.array(hi), quadratic_control=quadratic)
    return ParsedProblem(problem=problem, config=config,
                         csv_path=output_block.get("csv"),
                         report_path=output_block.get("report"),
                         raw=doc)


def parse_problem(path: str, overrides: Optional[List[str]] = None) -> ParsedProblem:
    doc = load_raw(path)
    if overrides:
        doc = apply_overrides(doc, overrides)
    return build_problem(doc)


def write_problem(parsed: ParsedProblem, path: str) -> None:
    """Write the normalized document back out (round-trip safe)."""
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(parsed.raw, fh, sort_keys=False)
