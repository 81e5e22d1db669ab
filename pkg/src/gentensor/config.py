"""JSON configuration for decompositions and networks.

Schema::

    {
      "n": 4, "m": 2,
      "mode": "cp" | "ht",
      "shared": false,
      "widths": [2, 2],                  # Z for cp, r_0..r_(L-1) for ht
      "operator": "product" | "relu-max" | "relu-sum",
      "f": "identity" | "<path to GTEN1 matrix>",
      "weights": {...} | "construction": {...},
      "architecture": "shallow" | "deep" | "shallow-wxh" | "shallow-fc",   # optional
      "k": 2, "templates": [[...], ...], "repr": {"kind": ..., "params": {...}}
    }

``weights`` holds ``conv`` and ``output`` for cp (plus ``n`` via the top
level) or ``leaf``, ``levels`` and ``output`` for ht, as nested lists in the
shapes documented in :mod:`gentensor.decompositions`.  ``construction``
selects a built-in weight setting instead: ``{"name": "indicator", "index":
[1, 2]}``, ``{"name": "trivial", "variant": "unshared"}`` or ``{"name":
"depth-eff"}``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import constructions as cons
from .decompositions import (
    CpParams,
    HtParams,
    SharedCpParams,
    SharedHtParams,
    generalized_cp,
    generalized_ht,
)
from .networks import (
    ReprFamily,
    build_repr_matrix,
    check_templates,
    deep_score,
    fc_score,
    grid_tensor,
    shallow_score,
    wxh_grid_tensor,
    wxh_score,
)
from .operators import get_operator
from .tensor_core import read_gten


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


def load_config(path) -> dict:
    text = Path(path).read_text()
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from None
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: top-level JSON value must be an object")
    return cfg


def _require(cfg, key):
    if key not in cfg:
        raise ConfigError(f"missing required key {key!r}")
    return cfg[key]


@dataclass
class GridSpec:
    """A resolved configuration: parameters, ``F`` and an evaluation recipe."""

    cfg: dict
    n: int
    m: int
    operator: object
    F: np.ndarray
    params: object
    reprs: ReprFamily | None = None
    templates: np.ndarray | None = None

    def grid(self, max_elements: int | None = None) -> np.ndarray:
        arch = self.cfg.get("architecture")
        if arch is None or self.reprs is None:
            return self._decomposition(max_elements)
        score = self._score_fn(arch)
        return grid_tensor(score, self.templates, self.n, max_elements)

    def _decomposition(self, max_elements):
        arch = self.cfg.get("architecture")
        if arch == "shallow-wxh":
            conv, output = self.params
            return wxh_grid_tensor(conv, output, self.F, max_elements)
        if arch == "shallow-fc":
            raise ConfigError("shallow-fc grid tensors need templates and a repr family")
        if isinstance(self.params, (HtParams, SharedHtParams)):
            return generalized_ht(self.params, self.F, self.operator, max_elements)
        return generalized_cp(self.params, self.F, self.operator, max_elements)

    def _score_fn(self, arch):
        g, p, r = self.operator, self.params, self.reprs
        if arch == "shallow":
            return lambda X: shallow_score(X, p, r, g)
        if arch == "deep":
            return lambda X: deep_score(X, p, r, g)
        if arch == "shallow-wxh":
            return lambda X: wxh_score(X, p[0], p[1], r)
        if arch == "shallow-fc":
            return lambda X: fc_score(X, p[0], p[1], r)
        raise ConfigError(f"unknown architecture {arch!r}")


def _repr_family(spec: dict, templates) -> ReprFamily:
    kind = _require(spec, "kind")
    params = spec.get("params", {})
    if kind in ("relu-neuron", "sigmoid-neuron"):
        return ReprFamily(kind, weights=_require(params, "weights"), biases=_require(params, "biases"))
    if kind == "identity-onehot":
        return ReprFamily(kind, templates=templates)
    if kind == "raw-coordinates":
        return ReprFamily(kind, size=int(params.get("size", np.shape(templates)[1])))
    raise ConfigError(f"representation kind {kind!r} is not available from JSON")


def _arr(x, name):
    try:
        return np.asarray(x, dtype=np.float64)
    except (TypeError, ValueError):
        raise ConfigError(f"weights.{name} must be a (nested) list of numbers") from None


def resolve(cfg: dict, base_dir=".") -> GridSpec:
    """Turn a parsed JSON config into parameters and a representation matrix."""
    try:
        n = int(_require(cfg, "n"))
        m = int(_require(cfg, "m"))
        g = get_operator(cfg.get("operator", "product"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    arch = cfg.get("architecture")
    mode = cfg.get("mode", "ht" if arch == "deep" else "cp")
    shared = bool(cfg.get("shared", False))
    reprs = templates = None
    if "templates" in cfg:
        templates = check_templates(cfg["templates"])
        reprs = _repr_family(_require(cfg, "repr"), templates)
        F = build_repr_matrix(templates, reprs)
    else:
        f = cfg.get("f", "identity")
        F = np.eye(m) if f == "identity" else read_gten(Path(base_dir) / f)
    if F.shape != (m, m):
        raise ConfigError(f"F must be {m}x{m}, got {F.shape}")

    if "construction" in cfg:
        params = _construction(cfg["construction"], n, m, F, cfg)
    elif arch in ("shallow-wxh", "shallow-fc"):
        w = _require(cfg, "weights")
        params = (_arr(_require(w, "conv"), "conv"), _arr(_require(w, "output"), "output"))
    else:
        params = _weights(_require(cfg, "weights"), mode, shared, n)
    return GridSpec(cfg, n, m, g, F, params, reprs, templates)


def _weights(w: dict, mode: str, shared: bool, n: int):
    try:
        if mode == "cp":
            conv, out = _arr(_require(w, "conv"), "conv"), _arr(_require(w, "output"), "output")
            return SharedCpParams(conv, out, n) if shared else CpParams(conv, out)
        if mode == "ht":
            leaf = _arr(_require(w, "leaf"), "leaf")
            levels = [_arr(x, "levels") for x in w.get("levels", [])]
            out = _arr(_require(w, "output"), "output")
            return SharedHtParams(leaf, levels, out, n) if shared else HtParams(leaf, levels, out)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    raise ConfigError(f"mode must be 'cp' or 'ht', got {mode!r}")


def _construction(spec: dict, n: int, m: int, F, cfg):
    name = _require(spec, "name")
    widths = cfg.get("widths", [2])
    if name == "indicator":
        return cons.indicator_cp([int(d) for d in _require(spec, "index")], m, n, F)
    if name == "trivial":
        deep, _ = cons.trivial_ht_weights(m, widths, n, F, spec.get("variant", "unshared"))
        return deep
    if name == "depth-eff":
        return cons.depth_eff_ht_weights(m, int(widths[0]), n, F, widths if len(widths) > 1 else None)
    raise ConfigError(f"unknown construction {name!r}")
