"""Reading and writing the JSON documents the command line exchanges:
market specifications, strategies, price-system certificates and claims.

A market specification carries the scenario tree (labels, probabilities,
event times with pre/post partitions), one price path per scenario for every
model, and the cost levels.  All reals are plain JSON numbers; cells are
lists of scenario labels.  Validation failures raise
:class:`~spreadtree.errors.MarketSpecError` whose ``path`` names the
offending field.
"""

from __future__ import annotations

import json
from typing import Any, Mapping

import jsonschema

from .cps import ConsistentPriceSystem
from .errors import ContractViolation, MarketSpecError
from .market import ModelFamily, ScenarioTree, Strategy, _interval_partitions, _right_site_partitions, _right_site_times
from .paths import LadlagPath, PathEvent

__all__ = [
    "MARKET_SPEC_SCHEMA",
    "market_from_dict",
    "market_to_dict",
    "load_market",
    "strategy_from_dict",
    "strategy_to_dict",
    "cps_from_dict",
    "cps_to_dict",
    "claim_from_dict",
]

_CELLS = {
    "type": "array",
    "minItems": 1,
    "items": {"type": "array", "minItems": 1, "items": {"type": "string"}},
}

MARKET_SPEC_SCHEMA: dict = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "spreadtree market specification",
    "type": "object",
    "required": ["horizon", "scenarios", "events", "models", "lambda"],
    "additionalProperties": False,
    "properties": {
        "horizon": {"type": "number", "exclusiveMinimum": 0},
        "scenarios": {
            "type": "object",
            "required": ["labels", "probabilities"],
            "additionalProperties": False,
            "properties": {
                "labels": {
                    "type": "array",
                    "minItems": 1,
                    "uniqueItems": True,
                    "items": {"type": "string"},
                },
                "probabilities": {"type": "array", "minItems": 1, "items": {"type": "number"}},
            },
        },
        "root": _CELLS,
        "events": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["time", "pre", "post"],
                "additionalProperties": False,
                "properties": {
                    "time": {"type": "number", "exclusiveMinimum": 0},
                    "pre": _CELLS,
                    "post": _CELLS,
                },
            },
        },
        "models": {
            "type": "object",
            "minProperties": 1,
            "additionalProperties": {
                "type": "object",
                "required": ["initial"],
                "additionalProperties": False,
                "properties": {
                    "initial": {"type": "object", "additionalProperties": {"type": "number"}},
                    "left_jumps": {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "required": ["time", "values"],
                            "additionalProperties": False,
                            "properties": {
                                "time": {"type": "number"},
                                "values": {
                                    "type": "object",
                                    "additionalProperties": {"type": "number"},
                                },
                            },
                        },
                    },
                    "slopes": {
                        "type": "object",
                        "additionalProperties": {"type": "array", "items": {"type": "number"}},
                    },
                },
            },
        },
        "lambda": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "lambda_prime": {"type": "number", "exclusiveMinimum": 0},
    },
}


def _schema_path(err: jsonschema.ValidationError) -> str:
    return ".".join(str(p) for p in err.absolute_path) or "$"


def market_from_dict(doc: Mapping[str, Any]) -> ModelFamily:
    try:
        jsonschema.validate(doc, MARKET_SPEC_SCHEMA)
    except jsonschema.ValidationError as err:
        raise MarketSpecError(_schema_path(err), err.message) from None
    labels = tuple(doc["scenarios"]["labels"])
    probs = [float(p) for p in doc["scenarios"]["probabilities"]]
    if len(probs) != len(labels):
        raise MarketSpecError("scenarios.probabilities", "need one probability per label")
    if any(p <= 0.0 for p in probs):
        raise MarketSpecError("scenarios.probabilities", "probabilities must be positive")
    if abs(sum(probs) - 1.0) > 1e-9:
        raise MarketSpecError(
            "scenarios.probabilities", f"probabilities sum to {sum(probs)!r}, expected 1"
        )
    index = {lab: i for i, lab in enumerate(labels)}
    horizon = float(doc["horizon"])

    def cells(raw, where):
        out = []
        for cell in raw:
            members = []
            for lab in cell:
                if lab not in index:
                    raise MarketSpecError(where, f"unknown scenario label {lab!r}")
                members.append(index[lab])
            out.append(frozenset(members))
        return tuple(out)

    events = sorted(doc["events"], key=lambda e: e["time"])
    times = []
    pres, posts = [], []
    for i, ev in enumerate(events):
        t = float(ev["time"])
        if not 0.0 < t <= horizon:
            raise MarketSpecError(f"events[{i}].time", f"event time {t} outside (0, horizon]")
        if times and t <= times[-1]:
            raise MarketSpecError(f"events[{i}].time", "event times must be strictly increasing")
        times.append(t)
        pres.append(cells(ev["pre"], f"events[{i}].pre"))
        posts.append(cells(ev["post"], f"events[{i}].post"))
    root = cells(doc["root"], "root") if "root" in doc else (frozenset(range(len(labels))),)
    try:
        tree = ScenarioTree(
            labels=labels,
            probabilities=tuple(probs),
            horizon=horizon,
            event_times=tuple(times),
            pre_partitions=tuple(pres),
            post_partitions=tuple(posts),
            root_partition=root,
        )
    except ContractViolation as err:
        raise MarketSpecError("events", str(err)) from None

    models = {}
    for name, spec in doc["models"].items():
        where = f"models.{name}"
        init = spec["initial"]
        jumps = {}
        for j, row in enumerate(spec.get("left_jumps", [])):
            t = float(row["time"])
            if t not in tree.event_times:
                raise MarketSpecError(f"{where}.left_jumps[{j}].time", f"no event at time {t}")
            jumps[t] = row["values"]
        slopes = spec.get("slopes", {})
        paths = []
        for w, lab in enumerate(labels):
            if lab not in init:
                raise MarketSpecError(f"{where}.initial", f"missing value for scenario {lab!r}")
            row_slopes = slopes.get(lab, [0.0] * (len(times) + 1))
            if len(row_slopes) != len(times) + 1:
                raise MarketSpecError(
                    f"{where}.slopes.{lab}", f"need {len(times) + 1} slopes, got {len(row_slopes)}"
                )
            evs = []
            for t in tree.event_times:
                values = jumps.get(t, {})
                evs.append(PathEvent(t, float(values.get(lab, 0.0)), 0.0))
            paths.append(
                LadlagPath(horizon, float(init[lab]), 0.0, tuple(evs),
                           tuple(float(s) for s in row_slopes))
            )
        models[name] = tuple(paths)
    lam = float(doc["lambda"])
    lam_p = doc.get("lambda_prime")
    if lam_p is not None and not 0.0 < float(lam_p) < lam:
        raise MarketSpecError("lambda_prime", f"must lie in (0, lambda={lam})")
    try:
        return ModelFamily(
            tree=tree,
            models=models,
            transaction_cost=lam,
            reference_cost=None if lam_p is None else float(lam_p),
        )
    except ContractViolation as err:
        raise MarketSpecError("models", str(err)) from None


def load_market(path: str) -> ModelFamily:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as err:
            raise MarketSpecError("$", f"not valid JSON: {err}") from None
    return market_from_dict(doc)


def _cell_labels(tree: ScenarioTree, cell) -> list[str]:
    return [tree.labels[w] for w in sorted(cell)]


def market_to_dict(family: ModelFamily) -> dict:
    tree = family.tree
    doc: dict = {
        "horizon": tree.horizon,
        "scenarios": {"labels": list(tree.labels), "probabilities": list(tree.probabilities)},
        "root": [_cell_labels(tree, c) for c in tree.root_partition],
        "events": [
            {
                "time": t,
                "pre": [_cell_labels(tree, c) for c in tree.pre_partitions[i]],
                "post": [_cell_labels(tree, c) for c in tree.post_partitions[i]],
            }
            for i, t in enumerate(tree.event_times)
        ],
        "models": {},
        "lambda": family.transaction_cost,
    }
    if family.reference_cost is not None:
        doc["lambda_prime"] = family.reference_cost
    for name, paths in family.models.items():
        entry = {
            "initial": {tree.labels[w]: paths[w].value_at(0.0) for w in range(tree.n_scenarios)},
            "left_jumps": [
                {
                    "time": t,
                    "values": {
                        tree.labels[w]: paths[w].left_jump_at(t) for w in range(tree.n_scenarios)
                    },
                }
                for t in tree.event_times
            ],
            "slopes": {
                tree.labels[w]: [paths[w].slope_right_of(b) for b in (0.0,) + tree.event_times]
                for w in range(tree.n_scenarios)
            },
        }
        doc["models"][name] = entry
    return doc


def strategy_to_dict(strategy: Strategy) -> dict:
    tree = strategy.tree
    left = [
        {"time": t, "cell": _cell_labels(tree, cell), "buy": strategy.left_buys[i][c],
         "sell": strategy.left_sells[i][c]}
        for i, t in enumerate(tree.event_times)
        for c, cell in enumerate(tree.pre_partitions[i])
    ]
    right = [
        {"time": t, "cell": _cell_labels(tree, cell), "buy": strategy.right_buys[i][c],
         "sell": strategy.right_sells[i][c]}
        for i, t in enumerate(_right_site_times(tree))
        for c, cell in enumerate(_right_site_partitions(tree)[i])
    ]
    rates = [
        {"interval": i, "cell": _cell_labels(tree, cell), "buy": strategy.rate_buys[i][c],
         "sell": strategy.rate_sells[i][c]}
        for i, partition in enumerate(_interval_partitions(tree))
        for c, cell in enumerate(partition)
    ]
    return {"initial_cash": strategy.initial_cash, "left": left, "right": right, "rates": rates}


def strategy_from_dict(doc: Mapping[str, Any], tree: ScenarioTree) -> Strategy:
    try:
        left = {
            (float(row["time"]), tuple(row["cell"])): (float(row["buy"]), float(row["sell"]))
            for row in doc.get("left", [])
        }
        right = {
            (float(row["time"]), tuple(row["cell"])): (float(row["buy"]), float(row["sell"]))
            for row in doc.get("right", [])
        }
        rates = {
            (int(row["interval"]), tuple(row["cell"])): (float(row["buy"]), float(row["sell"]))
            for row in doc.get("rates", [])
        }
        return Strategy.from_trades(
            tree, float(doc["initial_cash"]), left=left, right=right, rates=rates
        )
    except (KeyError, TypeError, ValueError) as err:
        raise MarketSpecError("strategy", f"malformed strategy document: {err}") from None
    except ContractViolation as err:
        raise MarketSpecError("strategy", str(err)) from None


def cps_to_dict(cps: ConsistentPriceSystem, tree: ScenarioTree) -> dict:
    return {
        "theta": cps.theta,
        "lambda": cps.lambda_check,
        "delta": cps.delta,
        "horizon": cps.horizon,
        "layers": [
            {
                "time": t,
                "cells": [_cell_labels(tree, c) for c in cps.layer_partitions[l]],
                "z0": list(cps.z0[l]),
                "z1": list(cps.z1[l]),
            }
            for l, t in enumerate(cps.layer_times)
        ],
    }


def cps_from_dict(doc: Mapping[str, Any], tree: ScenarioTree) -> ConsistentPriceSystem:
    try:
        times = tuple(float(layer["time"]) for layer in doc["layers"])
        partitions, z0, z1 = [], [], []
        for layer in doc["layers"]:
            cells = [frozenset(tree.label_index[lab] for lab in cell) for cell in layer["cells"]]
            rows = sorted(
                zip(cells, layer["z0"], layer["z1"]), key=lambda row: min(row[0])
            )
            partitions.append(tuple(c for c, _, _ in rows))
            z0.append(tuple(float(v) for _, v, _ in rows))
            z1.append(tuple(float(v) for _, _, v in rows))
        return ConsistentPriceSystem(
            theta=str(doc["theta"]),
            lambda_check=float(doc["lambda"]),
            delta=float(doc["delta"]),
            horizon=float(doc["horizon"]),
            layer_times=times,
            layer_partitions=tuple(partitions),
            z0=tuple(z0),
            z1=tuple(z1),
        )
    except (KeyError, TypeError, ValueError) as err:
        raise MarketSpecError("certificate", f"malformed certificate document: {err}") from None


def claim_from_dict(doc: Mapping[str, Any], tree: ScenarioTree) -> list[float]:
    values = doc.get("values")
    if not isinstance(values, Mapping):
        raise MarketSpecError("values", "claim document needs a values.{label: number} map")
    out = []
    for lab in tree.labels:
        if lab not in values:
            raise MarketSpecError("values", f"missing claim value for scenario {lab!r}")
        out.append(float(values[lab]))
    return out
