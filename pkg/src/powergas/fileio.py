"""System and scenario file ingestion.

System files are JSON with top-level keys {horizon, gas, power, coupling,
penalties}; scenario files are JSON arrays of {probability, wind,
electric_load, gas_load} with per-profile arrays indexed by period.  Both
are checked structurally against the JSON Schemas shipped under
``powergas/schema`` and then semantically against the domain invariants.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import jsonschema

from .system import (Bus, CoalUnit, CompressorPipeline, CouplingSpec,
                     ElectricLoad, EnergySystem, GasFiredUnit, GasLoad,
                     GasNetwork, GasNode, GasSource, GasStorage, Horizon,
                     Line, PenaltyPrices, Pipeline, PowerNetwork, PowerToGas,
                     ResSite, Scenario, ScenarioSet, ValidationError,
                     system_to_dict)


class ParseError(ValueError):
    """File is malformed (bad JSON or schema violation)."""


def _schema(name):
    with resources.files("powergas.schema").joinpath(name).open() as fh:
        return json.load(fh)


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as err:
        raise ParseError(f"{path}: invalid JSON: {err}") from err
    except OSError as err:
        raise ParseError(f"{path}: {err}") from err


def parse_system(doc: dict) -> EnergySystem:
    """Build and validate an EnergySystem from a schema-conforming dict."""
    try:
        jsonschema.validate(doc, _schema("system.schema.json"))
    except jsonschema.ValidationError as err:
        raise ParseError(f"system file schema violation: {err.message} "
                         f"at {'/'.join(str(p) for p in err.absolute_path)}") from err

    h = Horizon(**doc["horizon"])
    g = doc["gas"]
    gas = GasNetwork(
        nodes=tuple(GasNode(**n) for n in g["nodes"]),
        sources=tuple(GasSource(**s) for s in g["sources"]),
        storages=tuple(GasStorage(**s) for s in g["storages"]),
        loads=tuple(GasLoad(**d) for d in g["loads"]),
        passive_pipelines=tuple(
            Pipeline(id=p["id"], from_node=p["from"], to_node=p["to"],
                     k_gf=p["k_gf"], k_lp=p["k_lp"],
                     initial_linepack=p["initial_linepack"])
            for p in g["passive_pipelines"]),
        active_pipelines=tuple(
            CompressorPipeline(id=p["id"], from_node=p["from"], to_node=p["to"],
                               ratio_min=p["ratio_min"], ratio_max=p["ratio_max"],
                               beta=p["beta"], initial_linepack=p["initial_linepack"])
            for p in g["active_pipelines"]),
        storage_objective_sign=float(g.get("storage_objective_sign", -1.0)))
    p = doc["power"]
    power = PowerNetwork(
        buses=tuple(Bus(**b) for b in p["buses"]),
        lines=tuple(Line(id=l["id"], from_bus=l["from"], to_bus=l["to"],
                         reactance=l["reactance"], rating=l["rating"])
                    for l in p["lines"]),
        cfus=tuple(CoalUnit(**c) for c in p["cfus"]),
        gfus=tuple(GasFiredUnit(**c) for c in p["gfus"]),
        ptgs=tuple(PowerToGas(**c) for c in p["ptgs"]),
        res_sites=tuple(ResSite(**r) for r in p["res_sites"]),
        loads=tuple(ElectricLoad(**d) for d in p["loads"]))
    coupling = CouplingSpec(**doc.get("coupling", {}))
    penalties = PenaltyPrices(**doc["penalties"])
    system = EnergySystem(horizon=h, gas=gas, power=power,
                          coupling=coupling, penalties=penalties)
    system.validate()
    return system


def load_system(path) -> EnergySystem:
    """Read, parse and validate a system file."""
    return parse_system(_load_json(path))


def save_system(system: EnergySystem, path) -> None:
    Path(path).write_text(json.dumps(system_to_dict(system), indent=2) + "\n")


def parse_scenarios(doc: list) -> ScenarioSet:
    try:
        jsonschema.validate(doc, _schema("scenarios.schema.json"))
    except jsonschema.ValidationError as err:
        raise ParseError(f"scenario file schema violation: {err.message}") from err
    scenarios = []
    probs = []
    for entry in doc:
        probs.append(float(entry["probability"]))
        scenarios.append(Scenario(
            wind={k: tuple(float(x) for x in v) for k, v in entry["wind"].items()},
            electric_load={k: tuple(float(x) for x in v)
                           for k, v in entry["electric_load"].items()},
            gas_load={k: tuple(float(x) for x in v)
                      for k, v in entry["gas_load"].items()}))
    return ScenarioSet(scenarios=tuple(scenarios), probabilities=tuple(probs))


def load_scenarios(path, horizon: Horizon | None = None,
                   system: EnergySystem | None = None) -> ScenarioSet:
    """Read a scenario file; validates against the horizon/system if given."""
    sets = parse_scenarios(_load_json(path))
    if horizon is not None or system is not None:
        h = horizon if horizon is not None else system.horizon
        sets.validate(h,
                      power=system.power if system else None,
                      gas=system.gas if system else None)
    return sets


def scenarios_to_doc(sets: ScenarioSet) -> list:
    out = []
    for sc, prob in zip(sets.scenarios, sets.probabilities):
        out.append({
            "probability": prob,
            "wind": {k: list(v) for k, v in sc.wind.items()},
            "electric_load": {k: list(v) for k, v in sc.electric_load.items()},
            "gas_load": {k: list(v) for k, v in sc.gas_load.items()},
        })
    return out


def save_scenarios(sets: ScenarioSet, path) -> None:
    Path(path).write_text(json.dumps(scenarios_to_doc(sets), indent=2) + "\n")
