"""Metric recipes: JSON descriptions resolved against a benchmark."""

from __future__ import annotations

from typing import Optional

import numpy as np

from .benchmarks import BenchmarkSpec, oscillator_chart_metric, oscillator_complement
from .construction import OrthComplementMap, build_product_metric, p_mod
from .errors import ConfigError
from .fields import ConstantMetric, SmoothMap

MATRIX = {"type": "array", "items": {"type": "array", "items": {"type": "number"}, "minItems": 1}, "minItems": 1}

METRIC_SPEC = {
    "oneOf": [
        {"type": "number", "exclusiveMinimum": 0},
        {"type": "object", "properties": {"constant": MATRIX}, "required": ["constant"],
         "additionalProperties": False},
        {"type": "object", "properties": {"builtin": {"enum": ["oscillator"]}}, "required": ["builtin"],
         "additionalProperties": False},
    ]
}

MONOMIAL = {"type": "array", "prefixItems": [{"type": "number"},
                                             {"type": "array", "items": {"type": "integer", "minimum": 0}}],
            "minItems": 2, "maxItems": 2}

METRIC_RECIPE_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    # own resource id, so that the recursive reference below still points here when embedded
    "$id": "urn:geodesic-observer:metric-recipe",
    "type": "object",
    "properties": {
        "type": {"enum": ["product", "pmod", "builtin"]},
        "name": {"type": "string"},
        "base": {"$ref": "#"},
        "Q": METRIC_SPEC,
        "R": METRIC_SPEC,
        "h_perp": {
            "oneOf": [
                {"enum": ["oscillator", "normalized-position"]},
                {"type": "object", "properties": {"polynomial": {"type": "array", "items": {
                    "type": "array", "items": MONOMIAL}}}, "required": ["polynomial"],
                 "additionalProperties": False},
            ]
        },
        "rank": {"type": "integer", "minimum": 0},
        "params": {"type": "object", "additionalProperties": {"type": ["number", "array"]}},
    },
    "required": ["type"],
    "additionalProperties": False,
    "allOf": [
        {"if": {"properties": {"type": {"const": "builtin"}}}, "then": {"required": ["name"]}},
        {"if": {"properties": {"type": {"const": "product"}}}, "then": {"required": ["Q", "R", "h_perp"]}},
    ],
}


def polynomial_map(components, n):
    """Map whose ``i``-th output is ``sum coef * prod x_j^k_j`` over its monomials."""
    terms = []
    for comp in components:
        mons = []
        for coef, powers in comp:
            if len(powers) != n:
                raise ConfigError(f"monomial exponent list must have {n} entries, got {len(powers)}")
            mons.append((float(coef), [int(k) for k in powers]))
        terms.append(mons)

    def fn(x):
        out = []
        for mons in terms:
            total = 0.0 * x[0]
            for coef, powers in mons:
                term = coef
                for j, k in enumerate(powers):
                    for _ in range(k):
                        term = term * x[j]
                total = total + term
            out.append(total)
        return np.array(out, dtype=object)

    return SmoothMap(fn, n, len(terms), name="polynomial")


def _metric_spec(spec, dim, params, label):
    if isinstance(spec, (int, float)):
        return ConstantMetric(np.eye(dim) * float(spec), label)
    if "constant" in spec:
        M = np.asarray(spec["constant"], dtype=float)
        if M.shape != (dim, dim):
            raise ConfigError(f"{label} must be {dim}x{dim}, got {M.shape}")
        return ConstantMetric(M, label)
    if spec["builtin"] == "oscillator":
        if "a" not in params or "b" not in params:
            raise ConfigError("builtin oscillator complement metric needs params a and b")
        return oscillator_complement(params["a"], params["b"]).R
    raise ConfigError(f"unknown metric spec {spec!r}")


def _normalized_position():
    def fn(x):
        norm = np.sqrt(x[0] * x[0] + x[1] * x[1])
        return np.array([x[0] / norm, x[1] / norm], dtype=object)

    return SmoothMap(fn, 2, 2, name="normalized_position")


def resolve_metric(recipe, bench: Optional[BenchmarkSpec], dim=None):
    """Return the metric field described by ``recipe`` for the system of ``bench``.

    Without a benchmark only the builtins ``identity`` (of dimension ``dim``),
    ``constant`` and ``oscillator-chart`` are available.
    """
    kind = recipe["type"]
    params = dict(bench.params) if bench is not None else {}
    params.update(recipe.get("params", {}))
    if kind == "builtin":
        name = recipe["name"]
        if bench is not None and name in bench.metrics:
            return bench.metrics[name]
        if name == "identity":
            n = bench.model.n if bench is not None else dim
            if n is None:
                raise ConfigError("identity metric needs a benchmark or a dimension")
            return ConstantMetric(np.eye(n), "identity")
        if name == "constant":
            if "matrix" not in params:
                raise ConfigError("builtin constant metric needs params.matrix")
            M = np.asarray(params["matrix"], dtype=float)
            return _metric_spec({"constant": M}, M.shape[0], params, "constant")
        if name == "oscillator-chart":
            if "a" not in params:
                raise ConfigError("oscillator-chart metric needs params.a (or the oscillator benchmark)")
            return oscillator_chart_metric(params["a"], params.get("c", 1.0))
        known = sorted(bench.metrics) if bench is not None else []
        raise ConfigError(f"unknown builtin metric {name!r}; choose from {known} or identity, constant, oscillator-chart")
    if bench is None:
        raise ConfigError(f"metric recipes of type {kind!r} need a benchmark")
    model = bench.model
    if kind == "pmod":
        base = resolve_metric(recipe.get("base", {"type": "builtin", "name": "identity"}), bench)
        Q = _metric_spec(recipe.get("Q", 1.0), model.p, params, "Q")
        return p_mod(base, Q, model.h)
    # product
    Q = _metric_spec(recipe["Q"], model.p, params, "Q")
    hp = recipe["h_perp"]
    if hp == "oscillator":
        if "a" not in params or "b" not in params:
            raise ConfigError("builtin oscillator complement needs params a and b")
        h_perp = oscillator_complement(params["a"], params["b"]).h_perp
    elif hp == "normalized-position":
        h_perp = _normalized_position()
    else:
        h_perp = polynomial_map(hp["polynomial"], model.n)
    R = _metric_spec(recipe["R"], h_perp.n_out, params, "R")
    rank = int(recipe.get("rank", model.n - model.p))
    ortho = OrthComplementMap(h_perp, R, rank)
    return build_product_metric(Q, ortho, model.h, check_points=bench.region.sample(0, 16))
