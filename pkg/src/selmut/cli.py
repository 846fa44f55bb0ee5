"""Scenario-driven command-line front end.

Reads a JSON scenario (strategy space, model, mutation kernel, initial
measure, integrator settings, analysis requests), runs it, and writes
CSV series plus a JSON report into an output directory.

Commands:
    simulate     integrate and write trajectory.csv
    analyze      simulate, then run the requested checks (and the
                 equilibrium/continuation sections when present)
    equilibrium  Newton solve / continuation only, no time integration
    sweep        repeat a scenario over a list of parameter values

Exit codes: 0 success, 2 configuration invalid (every violation is
reported before any numeric work starts), 3 numeric failure (partial
artifacts are still written).

Outputs are deterministic: identical configs produce bit-identical
files.  Reports carry no timestamps, JSON keys are sorted, and CSV
floats are printed with 17 significant digits.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import os
import re
import sys
from math import isfinite

import numpy as np

from .analysis import (
    VERDICT_TOL,
    ass_verdict,
    choose_c,
    lyapunov_series,
    permanence_check,
    persistence_certificate,
    ratio_diagnostic,
)
from .dynamics import (
    IntegratorConfig,
    continuation,
    find_equilibrium,
    integrate,
    verify_integral_representation,
)
from .errors import (
    DomainError,
    EigenConvergenceError,
    InputError,
    InvalidModelError,
    PreconditionError,
    SearchFailureError,
    StiffnessError,
)
from .kernel import (
    MutationKernel,
    blend_toward,
    directed_kernel,
    gaussian_grid_kernel,
    identity_kernel,
    uniform_kernel,
)
from .measure import AtomicMeasure, StrategySpace, default_family
from .vitals import (
    LogisticModel,
    RickerModel,
    TabulatedModel,
    build_profile,
)

__all__ = ["main", "run_scenario", "sweep"]

SCHEMA_VERSION = 1

_ID_PATTERN = re.compile(r"^[A-Za-z0-9_.+-]+$")

_NUMERIC_ERRORS = (
    StiffnessError,
    DomainError,
    SearchFailureError,
    EigenConvergenceError,
    InvalidModelError,
    PreconditionError,
    InputError,
    OverflowError,
    np.linalg.LinAlgError,
)


# ---------------------------------------------------------------------------
# validation plumbing
# ---------------------------------------------------------------------------

class _Validator:
    """Collects every configuration violation with its JSON path."""

    def __init__(self) -> None:
        self.errors: list[str] = []

    def error(self, path: str, msg: str) -> None:
        self.errors.append(f"{path}: {msg}")

    def keys(self, obj, path: str, required=(), optional=()) -> bool:
        if not isinstance(obj, dict):
            self.error(path, f"expected an object, got {type(obj).__name__}")
            return False
        ok = True
        for key in required:
            if key not in obj:
                self.error(path, f"missing required field '{key}'")
                ok = False
        allowed = set(required) | set(optional)
        for key in sorted(obj):
            if key not in allowed:
                self.error(path, f"unknown field '{key}'")
                ok = False
        return ok

    def number(self, value, path: str, *, positive=False, nonnegative=False):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.error(path, "expected a number")
            return None
        if not isfinite(value):
            self.error(path, "must be finite")
            return None
        if positive and value <= 0:
            self.error(path, "must be > 0")
            return None
        if nonnegative and value < 0:
            self.error(path, "must be >= 0")
            return None
        return float(value)

    def vector(self, value, path: str, n: int, **kw):
        if not isinstance(value, list):
            self.error(path, "expected a list of numbers")
            return None
        if len(value) != n:
            self.error(path, f"expected {n} entries, got {len(value)}")
            return None
        out = []
        for i, item in enumerate(value):
            num = self.number(item, f"{path}[{i}]", **kw)
            if num is None:
                return None
            out.append(num)
        return out

    def atom(self, value, path: str, space: StrategySpace):
        if not isinstance(value, str):
            self.error(path, f"expected an atom id string, got {value!r}")
            return None
        try:
            return space.index(value)
        except InputError:
            self.error(path, f"unknown atom id {value!r}")
            return None

    def atom_set(self, value, path: str, space: StrategySpace):
        if not isinstance(value, list) or not value:
            self.error(path, "expected a nonempty list of atom ids")
            return None
        idx = []
        for i, item in enumerate(value):
            q = self.atom(item, f"{path}[{i}]", space)
            if q is None:
                return None
            idx.append(q)
        if len(set(idx)) != len(idx):
            self.error(path, "atom ids must be distinct")
            return None
        return tuple(sorted(idx))


# ---------------------------------------------------------------------------
# section builders (each logs to the validator and returns None on failure)
# ---------------------------------------------------------------------------

def _build_space(v: _Validator, spec) -> StrategySpace | None:
    path = "space"
    if not v.keys(spec, path, optional=("atoms", "grid")):
        return None
    has_atoms = "atoms" in spec
    has_grid = "grid" in spec
    if has_atoms == has_grid:
        v.error(path, "provide exactly one of 'atoms' or 'grid'")
        return None
    if has_grid:
        g = spec["grid"]
        if not v.keys(g, f"{path}.grid", required=("start", "stop", "num"),
                      optional=("id_prefix",)):
            return None
        start = v.number(g["start"], f"{path}.grid.start")
        stop = v.number(g["stop"], f"{path}.grid.stop")
        num = g["num"]
        if isinstance(num, bool) or not isinstance(num, int) or num < 1:
            v.error(f"{path}.grid.num", "expected an integer >= 1")
            return None
        prefix = g.get("id_prefix", "q")
        if not isinstance(prefix, str) or not _ID_PATTERN.match(prefix):
            v.error(f"{path}.grid.id_prefix", "expected a plain identifier string")
            return None
        if start is None or stop is None:
            return None
        if stop < start:
            v.error(f"{path}.grid", "stop must be >= start")
            return None
        return StrategySpace.grid_1d(start, stop, num, prefix)

    atoms = spec["atoms"]
    if not isinstance(atoms, list) or not atoms:
        v.error(f"{path}.atoms", "expected a nonempty list")
        return None
    points = []
    dim = None
    ok = True
    for i, entry in enumerate(atoms):
        epath = f"{path}.atoms[{i}]"
        if not v.keys(entry, epath, required=("id",), optional=("coords",)):
            ok = False
            continue
        atom_id = entry["id"]
        if not isinstance(atom_id, str) or not _ID_PATTERN.match(atom_id):
            v.error(f"{epath}.id",
                    "atom ids must be nonempty strings of [A-Za-z0-9_.+-]")
            ok = False
            continue
        coords = entry.get("coords", float(i))
        if isinstance(coords, (int, float)) and not isinstance(coords, bool):
            coords = [float(coords)]
        elif isinstance(coords, list):
            nums = []
            for j, c in enumerate(coords):
                num = v.number(c, f"{epath}.coords[{j}]")
                if num is None:
                    ok = False
                    break
                nums.append(num)
            else:
                coords = nums
            if len(nums) != len(coords):
                continue
            if not coords:
                v.error(f"{epath}.coords", "must be nonempty")
                ok = False
                continue
        else:
            v.error(f"{epath}.coords", "expected a number or list of numbers")
            ok = False
            continue
        if dim is None:
            dim = len(coords)
        elif len(coords) != dim:
            v.error(f"{epath}.coords", f"expected {dim} coordinates")
            ok = False
            continue
        points.append((atom_id, coords))
    if not ok:
        return None
    ids = [p[0] for p in points]
    if len(set(ids)) != len(ids):
        v.error(f"{path}.atoms", "atom ids must be unique")
        return None
    try:
        return StrategySpace.from_points(points)
    except InputError as exc:
        v.error(path, str(exc))
        return None


def _build_model(v: _Validator, spec, space: StrategySpace, base_dir: str):
    path = "model"
    if not isinstance(spec, dict) or "family" not in spec:
        v.error(path, "expected an object with a 'family' field")
        return None
    family = spec["family"]
    n = len(space)
    if family == "ricker":
        if not v.keys(spec, path, required=("family", "kappa", "eta", "theta")):
            return None
        kappa = v.vector(spec["kappa"], f"{path}.kappa", n, positive=True)
        eta = v.vector(spec["eta"], f"{path}.eta", n, nonnegative=True)
        theta = v.number(spec["theta"], f"{path}.theta", nonnegative=True)
        if kappa is None or eta is None or theta is None:
            return None
        try:
            return RickerModel(kappa, eta, theta)
        except InputError as exc:
            v.error(path, str(exc))
            return None
    if family == "logistic":
        if not v.keys(spec, path, required=("family", "r", "d", "a")):
            return None
        r = v.vector(spec["r"], f"{path}.r", n, nonnegative=True)
        d = v.vector(spec["d"], f"{path}.d", n, positive=True)
        a = v.vector(spec["a"], f"{path}.a", n, nonnegative=True)
        if r is None or d is None or a is None:
            return None
        try:
            return LogisticModel(r, d, a)
        except InputError as exc:
            v.error(path, str(exc))
            return None
    if family == "tabulated":
        if not v.keys(spec, path, required=("family", "csv")):
            return None
        csv_path = spec["csv"]
        if not isinstance(csv_path, str) or not csv_path:
            v.error(f"{path}.csv", "expected a file path string")
            return None
        full = csv_path if os.path.isabs(csv_path) else os.path.join(base_dir, csv_path)
        if not os.path.isfile(full):
            v.error(f"{path}.csv", f"file not found: {full}")
            return None
        try:
            return TabulatedModel.from_csv(full, space)
        except InputError as exc:
            v.error(f"{path}.csv", str(exc))
            return None
    v.error(f"{path}.family",
            f"unknown family {family!r} (expected ricker, logistic, or tabulated)")
    return None


def _build_kernel(v: _Validator, spec, space: StrategySpace, base_dir: str,
                  path: str = "kernel") -> MutationKernel | None:
    if not isinstance(spec, dict) or "kind" not in spec:
        v.error(path, "expected an object with a 'kind' field")
        return None
    kind = spec["kind"]
    n = len(space)
    if kind == "identity":
        if not v.keys(spec, path, required=("kind",)):
            return None
        return identity_kernel(space)
    if kind == "uniform":
        if not v.keys(spec, path, required=("kind",)):
            return None
        return uniform_kernel(space)
    if kind == "directed":
        if not v.keys(spec, path, required=("kind", "qd", "Qd"), optional=("pull",)):
            return None
        qd = v.atom(spec["qd"], f"{path}.qd", space)
        Qd = v.atom_set(spec["Qd"], f"{path}.Qd", space)
        pull = v.number(spec.get("pull", 0.3), f"{path}.pull", positive=True)
        if qd is None or Qd is None or pull is None:
            return None
        try:
            return directed_kernel(space, qd, Qd, pull)
        except InputError as exc:
            v.error(path, str(exc))
            return None
    if kind == "gaussian":
        if not v.keys(spec, path, required=("kind", "sigma")):
            return None
        sigma = v.number(spec["sigma"], f"{path}.sigma", positive=True)
        if sigma is None:
            return None
        try:
            return gaussian_grid_kernel(space, sigma)
        except InputError as exc:
            v.error(path, str(exc))
            return None
    if kind == "csv":
        if not v.keys(spec, path, required=("kind", "path")):
            return None
        rel = spec["path"]
        if not isinstance(rel, str) or not rel:
            v.error(f"{path}.path", "expected a file path string")
            return None
        full = rel if os.path.isabs(rel) else os.path.join(base_dir, rel)
        if not os.path.isfile(full):
            v.error(f"{path}.path", f"file not found: {full}")
            return None
        try:
            return MutationKernel.from_csv(full, space)
        except InputError as exc:
            v.error(f"{path}.path", str(exc))
            return None
    if kind == "explicit":
        if not v.keys(spec, path, required=("kind", "rows")):
            return None
        rows = spec["rows"]
        if not isinstance(rows, list) or len(rows) != n:
            v.error(f"{path}.rows", f"expected {n} rows")
            return None
        mat = []
        for i, row in enumerate(rows):
            vec = v.vector(row, f"{path}.rows[{i}]", n)
            if vec is None:
                return None
            mat.append(vec)
        try:
            return MutationKernel(space, np.array(mat))
        except InputError as exc:
            v.error(f"{path}.rows", str(exc))
            return None
    if kind == "blend":
        if not v.keys(spec, path, required=("kind", "base", "target", "eps")):
            return None
        base = _build_kernel(v, spec["base"], space, base_dir, f"{path}.base")
        target = _build_kernel(v, spec["target"], space, base_dir, f"{path}.target")
        eps = v.number(spec["eps"], f"{path}.eps", nonnegative=True)
        if eps is not None and eps > 1:
            v.error(f"{path}.eps", "must lie in [0, 1]")
            eps = None
        if base is None or target is None or eps is None:
            return None
        return blend_toward(base, target, eps)
    v.error(f"{path}.kind",
            f"unknown kind {kind!r} (expected identity, uniform, directed, "
            "gaussian, csv, explicit, or blend)")
    return None


def _build_initial(v: _Validator, spec, space: StrategySpace,
                   seed: int) -> AtomicMeasure | None:
    path = "initial"
    if not isinstance(spec, dict) or "kind" not in spec:
        v.error(path, "expected an object with a 'kind' field")
        return None
    kind = spec["kind"]
    n = len(space)
    if kind == "explicit":
        if not v.keys(spec, path, required=("kind", "weights")):
            return None
        weights = v.vector(spec["weights"], f"{path}.weights", n, nonnegative=True)
        if weights is None:
            return None
        return AtomicMeasure(space, np.array(weights))
    if kind == "uniform":
        if not v.keys(spec, path, required=("kind", "total")):
            return None
        total = v.number(spec["total"], f"{path}.total", positive=True)
        if total is None:
            return None
        return AtomicMeasure.uniform(space, total)
    if kind == "dirac":
        if not v.keys(spec, path, required=("kind", "atom"), optional=("total",)):
            return None
        atom = v.atom(spec["atom"], f"{path}.atom", space)
        total = v.number(spec.get("total", 1.0), f"{path}.total", positive=True)
        if atom is None or total is None:
            return None
        return AtomicMeasure.dirac(space, atom, total)
    if kind == "random":
        if not v.keys(spec, path, required=("kind", "total")):
            return None
        total = v.number(spec["total"], f"{path}.total", positive=True)
        if total is None:
            return None
        rng = np.random.default_rng(seed)
        raw = rng.random(n) + 1e-12
        return AtomicMeasure(space, raw * (total / raw.sum()))
    v.error(f"{path}.kind",
            f"unknown kind {kind!r} (expected explicit, uniform, dirac, or random)")
    return None


def _build_integrator(v: _Validator, spec) -> IntegratorConfig | None:
    path = "integrator"
    if not v.keys(spec, path, required=("t_end",),
                  optional=("rel_tol", "abs_tol", "dt_init", "dt_min",
                            "clamp_floor", "dt_out")):
        return None
    kwargs = {}
    t_end = v.number(spec["t_end"], f"{path}.t_end", positive=True)
    if t_end is None:
        return None
    kwargs["t_end"] = t_end
    for name in ("rel_tol", "abs_tol", "dt_init", "dt_min", "clamp_floor"):
        if name in spec:
            num = v.number(spec[name], f"{path}.{name}", positive=True)
            if num is None:
                return None
            kwargs[name] = num
    if "dt_out" in spec and spec["dt_out"] is not None:
        num = v.number(spec["dt_out"], f"{path}.dt_out", positive=True)
        if num is None:
            return None
        kwargs["dt_out"] = num
    try:
        return IntegratorConfig(**kwargs)
    except InputError as exc:
        v.error(path, str(exc))
        return None


_ANALYSIS_KINDS = ("permanence", "persistence", "lyapunov", "ass", "ratio", "intrep")


def _build_analyses(v: _Validator, spec, space: StrategySpace,
                    kernel_spec) -> list[dict] | None:
    path = "analyses"
    if not isinstance(spec, list):
        v.error(path, "expected a list of analysis requests")
        return None
    out: list[dict] = []
    ok = True
    for i, req in enumerate(spec):
        rpath = f"{path}[{i}]"
        if not isinstance(req, dict) or "kind" not in req:
            v.error(rpath, "expected an object with a 'kind' field")
            ok = False
            continue
        kind = req["kind"]
        if kind == "permanence":
            if not v.keys(req, rpath, required=("kind",)):
                ok = False
                continue
            out.append({"kind": kind})
        elif kind == "persistence":
            if not v.keys(req, rpath, required=("kind", "E", "eps")):
                ok = False
                continue
            E = v.atom_set(req["E"], f"{rpath}.E", space)
            eps = v.number(req["eps"], f"{rpath}.eps", positive=True)
            if E is None or eps is None:
                ok = False
                continue
            out.append({"kind": kind, "E": E, "eps": eps})
        elif kind == "lyapunov":
            if not v.keys(req, rpath, required=("kind", "function"),
                          optional=("qd", "c")):
                ok = False
                continue
            function = req["function"]
            if function == "V":
                out.append({"kind": kind, "function": "V"})
            elif function == "volterra":
                if "qd" not in req:
                    v.error(rpath, "volterra requires a 'qd' atom id")
                    ok = False
                    continue
                qd = v.atom(req["qd"], f"{rpath}.qd", space)
                c = None
                if req.get("c") is not None:
                    c = v.number(req["c"], f"{rpath}.c", positive=True)
                    if c is None:
                        ok = False
                        continue
                if qd is None:
                    ok = False
                    continue
                out.append({"kind": kind, "function": "volterra", "qd": qd, "c": c})
            else:
                v.error(f"{rpath}.function", "expected 'V' or 'volterra'")
                ok = False
        elif kind == "ass":
            if not v.keys(req, rpath, required=("kind",), optional=("tol",)):
                ok = False
                continue
            tol = VERDICT_TOL
            if "tol" in req:
                tol = v.number(req["tol"], f"{rpath}.tol", positive=True)
                if tol is None:
                    ok = False
                    continue
            out.append({"kind": kind, "tol": tol})
        elif kind == "ratio":
            if not v.keys(req, rpath, required=("kind", "U", "V", "xi")):
                ok = False
                continue
            U = v.atom_set(req["U"], f"{rpath}.U", space)
            Vset = v.atom_set(req["V"], f"{rpath}.V", space)
            xi = v.number(req["xi"], f"{rpath}.xi", positive=True)
            if U is None or Vset is None or xi is None:
                ok = False
                continue
            out.append({"kind": kind, "U": U, "V": Vset, "xi": xi})
        elif kind == "intrep":
            if not v.keys(req, rpath, required=("kind",), optional=("tol",)):
                ok = False
                continue
            tol = 1e-5
            if "tol" in req:
                tol = v.number(req["tol"], f"{rpath}.tol", positive=True)
                if tol is None:
                    ok = False
                    continue
            kernel_kind = kernel_spec.get("kind") if isinstance(kernel_spec, dict) else None
            if kernel_kind != "identity":
                v.error(rpath,
                        "the integral-representation check requires the "
                        "identity kernel (pure selection)")
                ok = False
                continue
            out.append({"kind": kind, "tol": tol})
        else:
            v.error(f"{rpath}.kind",
                    f"unknown kind {kind!r} (expected one of "
                    f"{', '.join(_ANALYSIS_KINDS)})")
            ok = False
    return out if ok else None


def _build_equilibrium(v: _Validator, spec, space: StrategySpace):
    path = "equilibrium"
    if not v.keys(spec, path, optional=("x_init", "newton_tol", "x_ref")):
        return None
    n = len(space)
    out = {"x_init": None, "newton_tol": 1e-10, "x_ref": None}
    if spec.get("x_init") is not None:
        x = v.vector(spec["x_init"], f"{path}.x_init", n, nonnegative=True)
        if x is None:
            return None
        out["x_init"] = np.array(x)
    if "newton_tol" in spec:
        tol = v.number(spec["newton_tol"], f"{path}.newton_tol", positive=True)
        if tol is None:
            return None
        out["newton_tol"] = tol
    if spec.get("x_ref") is not None:
        x = v.vector(spec["x_ref"], f"{path}.x_ref", n, nonnegative=True)
        if x is None:
            return None
        out["x_ref"] = np.array(x)
    return out


def _build_continuation(v: _Validator, spec, space: StrategySpace,
                        base_dir: str):
    path = "continuation"
    if not v.keys(spec, path, required=("eps_list",),
                  optional=("base", "target", "x_init", "newton_tol", "x_ref")):
        return None
    eps_raw = spec["eps_list"]
    if not isinstance(eps_raw, list) or not eps_raw:
        v.error(f"{path}.eps_list", "expected a nonempty list of numbers")
        return None
    eps_list = []
    for i, e in enumerate(eps_raw):
        num = v.number(e, f"{path}.eps_list[{i}]", nonnegative=True)
        if num is None:
            return None
        if num > 1:
            v.error(f"{path}.eps_list[{i}]", "must lie in [0, 1]")
            return None
        eps_list.append(num)
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        v.error(f"{path}.eps_list", "must be strictly decreasing")
        return None
    out = {"eps_list": eps_list, "base": None, "target": None,
           "x_init": None, "newton_tol": 1e-10, "x_ref": None}
    if spec.get("base") is not None:
        out["base"] = _build_kernel(v, spec["base"], space, base_dir, f"{path}.base")
        if out["base"] is None:
            return None
    if spec.get("target") is not None:
        out["target"] = _build_kernel(v, spec["target"], space, base_dir,
                                      f"{path}.target")
        if out["target"] is None:
            return None
    if spec.get("x_init") is not None:
        x = v.vector(spec["x_init"], f"{path}.x_init", len(space), nonnegative=True)
        if x is None:
            return None
        out["x_init"] = np.array(x)
    if "newton_tol" in spec:
        tol = v.number(spec["newton_tol"], f"{path}.newton_tol", positive=True)
        if tol is None:
            return None
        out["newton_tol"] = tol
    if spec.get("x_ref") is not None:
        x = v.vector(spec["x_ref"], f"{path}.x_ref", len(space), nonnegative=True)
        if x is None:
            return None
        out["x_ref"] = np.array(x)
    return out


_TOP_OPTIONAL = ("kernel", "initial", "integrator", "analyses",
                 "equilibrium", "continuation")

_COMMAND_NEEDS = {
    "simulate": ("kernel", "initial", "integrator"),
    "analyze": ("kernel", "initial", "integrator"),
    "equilibrium": ("kernel",),
}


def _parse_scenario(v: _Validator, cfg, base_dir: str, command: str, seed: int):
    """Validate the whole config and build all runtime objects.

    Returns a dict of built pieces; consult v.errors before using it.
    """
    if not isinstance(cfg, dict):
        v.error("config", "top level must be a JSON object")
        return None
    v.keys(cfg, "config", required=("schema", "space", "model"),
           optional=_TOP_OPTIONAL)
    if cfg.get("schema") != SCHEMA_VERSION:
        v.error("config.schema",
                f"expected schema {SCHEMA_VERSION}, got {cfg.get('schema')!r}")
    for section in _COMMAND_NEEDS.get(command, ()):
        if section not in cfg:
            v.error("config", f"command '{command}' requires a '{section}' section")

    built: dict = {}
    space = _build_space(v, cfg["space"]) if "space" in cfg else None
    built["space"] = space
    if space is None:
        return built
    built["model"] = _build_model(v, cfg["model"], space, base_dir) \
        if "model" in cfg else None
    built["kernel"] = _build_kernel(v, cfg["kernel"], space, base_dir) \
        if "kernel" in cfg else None
    built["initial"] = _build_initial(v, cfg["initial"], space, seed) \
        if "initial" in cfg else None
    built["integrator"] = _build_integrator(v, cfg["integrator"]) \
        if "integrator" in cfg else None
    built["analyses"] = _build_analyses(v, cfg.get("analyses", []), space,
                                        cfg.get("kernel"))
    built["equilibrium"] = _build_equilibrium(v, cfg["equilibrium"], space) \
        if "equilibrium" in cfg else None
    built["continuation"] = _build_continuation(v, cfg["continuation"], space,
                                                base_dir) \
        if "continuation" in cfg else None
    built["random_initial"] = (
        isinstance(cfg.get("initial"), dict) and cfg["initial"].get("kind") == "random"
    )
    return built


# ---------------------------------------------------------------------------
# deterministic output helpers
# ---------------------------------------------------------------------------

def _jsonify(obj):
    """Convert report values to strict-JSON-safe plain Python types."""
    if isinstance(obj, dict):
        return {str(k): _jsonify(x) for k, x in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(x) for x in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonify(x) for x in obj.tolist()]
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not isfinite(obj):
        # strict JSON has no Infinity/NaN literals
        if obj != obj:
            return "nan"
        return "inf" if obj > 0 else "-inf"
    return obj


def _write_report(out_dir: str, report: dict) -> None:
    text = json.dumps(_jsonify(report), sort_keys=True, indent=2,
                      allow_nan=False) + "\n"
    with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8") as fh:
        fh.write(text)


def _fmt_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return "%.17g" % value
    return str(value)


# ---------------------------------------------------------------------------
# run pipeline
# ---------------------------------------------------------------------------

def _run_summary(traj) -> dict:
    final = traj.weights[-1]
    return {
        "t_end": float(traj.times[-1]),
        "n_snapshots": len(traj),
        "n_accepted": traj.n_accepted,
        "n_rejected": traj.n_rejected,
        "min_weight_seen": traj.min_weight_seen,
        "pure_selection": traj.pure_selection,
        "final_total": float(final.sum()),
        "final_weights": [float(x) for x in final],
    }


def _profile_dict(profile) -> dict:
    return {
        "K": [float(x) for x in profile.K],
        "Kd": profile.Kd,
        "kd": profile.kd,
        "Qd": list(profile.Qd),
        "tol_Q": profile.tol_Q,
    }


def _equilibrium_dict(result, x_ref) -> dict:
    x_star = result.x_star.weights
    d = {
        "converged": result.converged,
        "residual": result.residual,
        "n_iter": result.n_iter,
        "spectral_bound": result.spectral_bound,
        "x_star": [float(x) for x in x_star],
        "jacobian": [[float(x) for x in row] for row in result.jacobian],
    }
    if x_ref is not None:
        d["x_ref_l1_error"] = float(np.abs(x_star - x_ref).sum())
    return d


def _run_analyses(requests, traj, profile, fam, model, kern, out_dir):
    results = []
    for i, req in enumerate(requests):
        kind = req["kind"]
        if kind == "permanence":
            d = permanence_check(traj, profile).to_dict()
        elif kind == "persistence":
            d = persistence_certificate(model, kern, req["E"], req["eps"]).to_dict()
        elif kind == "lyapunov":
            if req["function"] == "V":
                series = lyapunov_series(traj, profile, "V")
                d = series.to_dict()
            else:
                c = req["c"]
                if c is None:
                    c = choose_c(model, profile, req["qd"])
                series = lyapunov_series(traj, profile, "volterra",
                                         (req["qd"], profile.Qd, c))
                d = series.to_dict()
                d["qd"] = req["qd"]
                d["c"] = c
            fname = f"series_{i:02d}_lyapunov.csv"
            series.to_csv(os.path.join(out_dir, fname))
            d["series_file"] = fname
        elif kind == "ass":
            d = ass_verdict(traj, profile, fam, req["tol"]).to_dict()
        elif kind == "ratio":
            diag = ratio_diagnostic(traj, req["U"], req["V"], req["xi"])
            d = diag.to_dict()
            fname = f"series_{i:02d}_ratio.csv"
            diag.to_csv(os.path.join(out_dir, fname))
            d["series_file"] = fname
        else:  # intrep
            max_err = verify_integral_representation(traj, model)
            d = {
                "kind": "intrep",
                "max_rel_error": max_err,
                "tol": req["tol"],
                "ok": bool(max_err <= req["tol"]),
            }
        results.append(d)
    return results


def _run_equilibrium_phase(built, out_dir: str, report: dict) -> None:
    space = built["space"]
    model = built["model"]
    kern = built["kernel"]
    eq_cfg = built["equilibrium"] or {"x_init": None, "newton_tol": 1e-10,
                                      "x_ref": None}
    x_init = eq_cfg["x_init"]
    if x_init is None:
        x_init = np.ones(len(space))
    result = find_equilibrium(kern, model, x_init, eq_cfg["newton_tol"])
    report["equilibrium"] = _equilibrium_dict(result, eq_cfg["x_ref"])

    cont_cfg = built["continuation"]
    if cont_cfg is None:
        return
    entries = continuation(
        cont_cfg["target"] if cont_cfg["target"] is not None else kern,
        model,
        cont_cfg["eps_list"],
        k_base=cont_cfg["base"],
        x_init=cont_cfg["x_init"],
        newton_tol=cont_cfg["newton_tol"],
    )
    x_ref = cont_cfg["x_ref"]
    rows = []
    for eps, res, dist in entries:
        d = {
            "eps": eps,
            "kernel_distance": dist,
            "converged": res.converged,
            "residual": res.residual,
            "n_iter": res.n_iter,
            "spectral_bound": res.spectral_bound,
            "x_star": [float(x) for x in res.x_star.weights],
        }
        if x_ref is not None:
            d["x_ref_l1_error"] = float(np.abs(res.x_star.weights - x_ref).sum())
        rows.append(d)
    report["continuation"] = rows

    header = ["eps", "kernel_distance", "residual", "spectral_bound",
              "converged"]
    if x_ref is not None:
        header.append("x_ref_l1_error")
    header += [f"x_{aid}" for aid in space.ids]
    with open(os.path.join(out_dir, "continuation.csv"), "w",
              encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for d in rows:
            cells = [d["eps"], d["kernel_distance"], d["residual"],
                     d["spectral_bound"], d["converged"]]
            if x_ref is not None:
                cells.append(d["x_ref_l1_error"])
            cells += d["x_star"]
            writer.writerow([_fmt_cell(c) for c in cells])


def _run_built(built, out_dir: str, command: str, seed: int) -> tuple[int, dict]:
    """Numeric phase: run a validated scenario.  Returns (exit, report)."""
    os.makedirs(out_dir, exist_ok=True)
    space = built["space"]
    report: dict = {
        "schema": SCHEMA_VERSION,
        "command": command,
        "atom_ids": list(space.ids),
    }
    if built.get("random_initial"):
        report["seed"] = seed
    try:
        if command in ("simulate", "analyze"):
            traj = integrate(built["initial"], built["kernel"], built["model"],
                             built["integrator"])
            traj.to_csv(os.path.join(out_dir, "trajectory.csv"))
            report["run"] = _run_summary(traj)
            if command == "analyze":
                profile = build_profile(built["model"], space)
                fam = default_family(space)
                report["profile"] = _profile_dict(profile)
                report["analyses"] = _run_analyses(
                    built["analyses"], traj, profile, fam, built["model"],
                    built["kernel"], out_dir)
                if built["equilibrium"] is not None or built["continuation"] is not None:
                    _run_equilibrium_phase(built, out_dir, report)
        elif command == "equilibrium":
            _run_equilibrium_phase(built, out_dir, report)
        else:
            raise ValueError(f"unknown command {command!r}")
    except StiffnessError as exc:
        if exc.trajectory is not None:
            exc.trajectory.to_csv(os.path.join(out_dir, "trajectory.csv"))
            report["run"] = _run_summary(exc.trajectory)
        report["error"] = {"type": "StiffnessError", "message": str(exc)}
        _write_report(out_dir, report)
        return 3, report
    except _NUMERIC_ERRORS as exc:
        report["error"] = {"type": type(exc).__name__, "message": str(exc)}
        _write_report(out_dir, report)
        return 3, report
    _write_report(out_dir, report)
    return 0, report


def _load_config(path: str):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh), None
    except OSError as exc:
        return None, f"cannot read config: {exc}"
    except json.JSONDecodeError as exc:
        return None, f"config is not valid JSON: {exc}"


def _report_validation_errors(errors) -> None:
    for err in errors:
        print(f"error: {err}", file=sys.stderr)
    print(f"{len(errors)} validation error(s); nothing was run", file=sys.stderr)


def run_scenario(path: str, out_dir: str | None = None, seed: int = 0,
                 command: str = "analyze") -> int:
    """Run one scenario file end to end.  Returns the process exit code."""
    cfg, load_err = _load_config(path)
    if load_err is not None:
        print(f"error: {load_err}", file=sys.stderr)
        return 2
    base_dir = os.path.dirname(os.path.abspath(path))
    if out_dir is None:
        out_dir = os.path.splitext(os.path.basename(path))[0] + "_out"
    v = _Validator()
    built = _parse_scenario(v, cfg, base_dir, command, seed)
    if v.errors:
        _report_validation_errors(v.errors)
        return 2
    code, report = _run_built(built, out_dir, command, seed)
    if code == 3:
        err = report.get("error", {})
        print(f"error: {err.get('type', 'numeric failure')}: "
              f"{err.get('message', '')}", file=sys.stderr)
    return code


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

_SWEEPABLE = re.compile(r"^(kernel\.eps|initial\.total|model\.[A-Za-z_][A-Za-z0-9_]*)$")


def _check_sweepable(v: _Validator, cfg, param: str) -> None:
    if not _SWEEPABLE.match(param):
        v.error("sweep.param",
                f"{param!r} is not sweepable (use kernel.eps, initial.total, "
                "or model.<scalar>)")
        return
    if param == "kernel.eps":
        kspec = cfg.get("kernel")
        if not (isinstance(kspec, dict) and kspec.get("kind") == "blend"):
            v.error("sweep.param", "kernel.eps requires a blend kernel")
    elif param == "initial.total":
        ispec = cfg.get("initial")
        if not (isinstance(ispec, dict)
                and ispec.get("kind") in ("uniform", "dirac", "random")):
            v.error("sweep.param",
                    "initial.total requires a uniform, dirac, or random "
                    "initial measure")
    else:
        name = param.split(".", 1)[1]
        mspec = cfg.get("model")
        if not isinstance(mspec, dict) or name not in mspec:
            v.error("sweep.param", f"model has no field {name!r}")
        elif isinstance(mspec[name], bool) or not isinstance(mspec[name], (int, float)):
            v.error("sweep.param", f"model.{name} is not a scalar number")


def _apply_sweep_value(cfg: dict, param: str, value: float) -> dict:
    clone = copy.deepcopy(cfg)
    if param == "kernel.eps":
        clone["kernel"]["eps"] = value
    elif param == "initial.total":
        clone["initial"]["total"] = value
    else:
        clone["model"][param.split(".", 1)[1]] = value
    return clone


def _flatten(obj, prefix: str, out: dict) -> None:
    if isinstance(obj, dict):
        for key in sorted(obj):
            _flatten(obj[key], f"{prefix}.{key}" if prefix else str(key), out)
    elif isinstance(obj, (bool, int, float, str)) or obj is None:
        out[prefix] = obj
    # lists (series, matrices) live in their own CSVs; skip them here


def sweep(path: str, param: str, values, out_dir: str | None = None,
          seed: int = 0) -> int:
    """Run one scenario per value of a sweepable parameter.

    Each run writes into <out_dir>/run_<i>; results are merged into
    merged.csv / merged.json keyed by input value order.  Per-run
    failures are recorded and the sweep continues.
    """
    cfg, load_err = _load_config(path)
    if load_err is not None:
        print(f"error: {load_err}", file=sys.stderr)
        return 2
    base_dir = os.path.dirname(os.path.abspath(path))
    if out_dir is None:
        out_dir = os.path.splitext(os.path.basename(path))[0] + "_out"

    # Equilibrium-only configs (no trajectory sections) sweep the Newton
    # solve instead of a full simulation.
    run_command = "analyze"
    if isinstance(cfg, dict) and not ("initial" in cfg and "integrator" in cfg):
        if "equilibrium" in cfg or "continuation" in cfg:
            run_command = "equilibrium"

    v = _Validator()
    values = list(values)
    if not values:
        v.error("sweep.values", "must be a nonempty list of numbers")
    else:
        for i, val in enumerate(values):
            v.number(val, f"sweep.values[{i}]")
    _check_sweepable(v, cfg if isinstance(cfg, dict) else {}, param)
    _parse_scenario(v, cfg, base_dir, run_command, seed)
    if v.errors:
        _report_validation_errors(v.errors)
        return 2

    os.makedirs(out_dir, exist_ok=True)
    runs = []
    for i, value in enumerate(values):
        run_dir = os.path.join(out_dir, f"run_{i:03d}")
        clone = _apply_sweep_value(cfg, param, float(value))
        rv = _Validator()
        built = _parse_scenario(rv, clone, base_dir, run_command, seed)
        if rv.errors:
            runs.append({"value": float(value), "dir": f"run_{i:03d}",
                         "exit": 2, "report": None,
                         "errors": list(rv.errors)})
            continue
        code, report = _run_built(built, run_dir, run_command, seed)
        runs.append({"value": float(value), "dir": f"run_{i:03d}",
                     "exit": code, "report": report})

    merged = {
        "schema": SCHEMA_VERSION,
        "command": "sweep",
        "run_command": run_command,
        "param": param,
        "values": [float(x) for x in values],
        "runs": runs,
    }
    text = json.dumps(_jsonify(merged), sort_keys=True, indent=2,
                      allow_nan=False) + "\n"
    with open(os.path.join(out_dir, "merged.json"), "w", encoding="utf-8") as fh:
        fh.write(text)

    flat_rows = []
    for run in runs:
        flat: dict = {}
        if run["report"] is not None:
            _flatten(_jsonify(run["report"]), "", flat)
        flat_rows.append(flat)
    columns = sorted(set().union(*[set(r) for r in flat_rows])) if flat_rows else []
    with open(os.path.join(out_dir, "merged.csv"), "w", encoding="utf-8",
              newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["value", "exit", *columns])
        for run, flat in zip(runs, flat_rows):
            row = [_fmt_cell(run["value"]), _fmt_cell(run["exit"])]
            row += [_fmt_cell(flat.get(col)) for col in columns]
            writer.writerow(row)
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="selmut",
        description="Simulate and analyze selection-mutation population "
                    "dynamics on finite strategy spaces.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("config", help="path to a JSON scenario file")
        p.add_argument("--out", default=None,
                       help="output directory (default: <config stem>_out)")
        p.add_argument("--seed", type=int, default=0,
                       help="seed for randomized initial measures")

    add_common(sub.add_parser(
        "simulate", help="integrate the system and write trajectory.csv"))
    add_common(sub.add_parser(
        "analyze", help="simulate, then run the requested checks"))
    add_common(sub.add_parser(
        "equilibrium", help="Newton equilibrium solve / continuation, no "
                            "time integration"))
    p_sweep = sub.add_parser(
        "sweep", help="repeat a scenario over a list of parameter values")
    add_common(p_sweep)
    p_sweep.add_argument("--param", required=True,
                         help="kernel.eps | initial.total | model.<scalar>")
    p_sweep.add_argument("--values", required=True,
                         help="comma-separated numbers, e.g. 0.1,0.01,0.001")

    args = parser.parse_args(argv)
    if args.command == "sweep":
        tokens = [tok.strip() for tok in args.values.split(",") if tok.strip()]
        values = []
        for tok in tokens:
            try:
                values.append(float(tok))
            except ValueError:
                print(f"error: sweep.values: {tok!r} is not a number",
                      file=sys.stderr)
                return 2
        return sweep(args.config, args.param, values, args.out, args.seed)
    return run_scenario(args.config, out_dir=args.out, seed=args.seed,
                        command=args.command)


if __name__ == "__main__":
    sys.exit(main())
