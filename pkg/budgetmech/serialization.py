"""
JSON formats for instances, priors, mapping distributions and reports.

Numbers may be JSON numbers or rational strings such as ``"1/3"``; rational
inputs keep EXACT runs exact. Fractions are written back as ``"p/q"`` strings
(integers as plain numbers). Agents are numbered from 1 in JSON and
unassigned items are ``null``; type indices in profiles start at 0.

Example:
    >>> data = {"n": 1, "m": 2, "values": [[3, 3]], "budgets": [3],
    ...         "multipliers": [1], "virtual_values": [["-2", "-2"]]}
    >>> instance = instance_from_dict(data)
    >>> instance.virtual_values
    ((Fraction(-2, 1), Fraction(-2, 1)),)
"""

import json
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import jsonschema

from .bavwm import BavwmResult
from .exceptions import BudgetMechError, SerializationError, handle_json_error
from .gap import GapInstance, IntegralAssignment, assignment_cost, machine_loads
from .mechanism import (
    BidderPrior,
    MappingDistribution,
    MechanismOutcome,
    MechanismSolution,
    Prior,
    TypeSpec,
    VirtualMapping,
)
from .model import UNASSIGNED, Allocation, BavwmInstance
from .numeric import Number

PathLike = Union[str, Path]

NUMBER_SCHEMA = {
    "anyOf": [
        {"type": "number"},
        {"type": "string", "pattern": r"^\s*-?\d+(\.\d+)?(\s*/\s*\d+)?\s*$"},
    ]
}
_VECTOR = {"type": "array", "items": NUMBER_SCHEMA}
_MATRIX = {"type": "array", "items": _VECTOR}

INSTANCE_SCHEMA = {
    "type": "object",
    "required": ["values", "budgets", "multipliers", "virtual_values"],
    "properties": {
        "n": {"type": "integer", "minimum": 0},
        "m": {"type": "integer", "minimum": 0},
        "values": _MATRIX,
        "budgets": _VECTOR,
        "multipliers": _VECTOR,
        "virtual_values": _MATRIX,
    },
}

ALLOCATION_SCHEMA = {
    "type": "object",
    "required": ["assignment"],
    "properties": {
        "assignment": {
            "type": "array",
            "items": {"anyOf": [{"type": "integer", "minimum": 1}, {"type": "null"}]},
        }
    },
}

GAP_SCHEMA = {
    "type": "object",
    "required": ["processing", "cost", "capacities"],
    "properties": {
        "processing": _MATRIX,
        "cost": _MATRIX,
        "capacities": _VECTOR,
        "jobs": {"type": "integer", "minimum": 0},
    },
}

PRIOR_SCHEMA = {
    "type": "object",
    "required": ["m", "bidders"],
    "properties": {
        "m": {"type": "integer", "minimum": 0},
        "bidders": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["types"],
                "properties": {
                    "types": {
                        "type": "array",
                        "minItems": 1,
                        "items": {
                            "type": "object",
                            "required": ["values", "budget", "probability"],
                            "properties": {
                                "values": _VECTOR,
                                "budget": NUMBER_SCHEMA,
                                "probability": NUMBER_SCHEMA,
                            },
                        },
                    }
                },
            },
        },
    },
}

MAPPING_DISTRIBUTION_SCHEMA = {
    "type": "object",
    "required": ["mappings"],
    "properties": {
        "mappings": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["weight", "multipliers", "virtual_values"],
                "properties": {
                    "weight": NUMBER_SCHEMA,
                    "multipliers": _MATRIX,
                    "virtual_values": {"type": "array", "items": _MATRIX},
                },
            },
        }
    },
}

_NULLABLE_NUMBER = {"type": ["number", "null"]}

BENCH_REPORT_SCHEMA = {
    "type": "object",
    "required": ["instances", "aggregates"],
    "properties": {
        "instances": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["index", "n", "m", "exact_objective", "approx_objective", "ratio"],
                "properties": {
                    "index": {"type": "integer"},
                    "n": {"type": "integer"},
                    "m": {"type": "integer"},
                    "exact_objective": _NULLABLE_NUMBER,
                    "approx_objective": _NULLABLE_NUMBER,
                    "lp_bound": _NULLABLE_NUMBER,
                    "ratio": _NULLABLE_NUMBER,
                    "wall_time": {"type": "number"},
                    "skipped": {"type": "boolean"},
                    "violation": {"type": "boolean"},
                    "note": {"type": "string"},
                },
            },
        },
        "aggregates": {
            "type": "object",
            "required": ["completed", "skipped", "min_ratio", "mean_ratio", "violations"],
            "properties": {
                "completed": {"type": "integer"},
                "skipped": {"type": "integer"},
                "min_ratio": _NULLABLE_NUMBER,
                "mean_ratio": _NULLABLE_NUMBER,
                "violations": {"type": "integer"},
            },
        },
    },
}

VERIFICATION_REPORT_SCHEMA = {
    "type": "object",
    "required": ["passed", "checks"],
    "properties": {
        "passed": {"type": "boolean"},
        "checks": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["code", "name", "passed"],
                "properties": {
                    "code": {"type": "string", "pattern": r"^V\d{3}$"},
                    "name": {"type": "string"},
                    "passed": {"type": "boolean"},
                    "message": {"type": "string"},
                },
            },
        },
    },
}


def validate_schema(data: Any, schema: Dict[str, Any], operation: str = "deserialize") -> None:
    """Raise SerializationError when ``data`` does not match ``schema``."""
    try:
        jsonschema.validate(data, schema)
    except jsonschema.ValidationError as e:
        raise handle_json_error(e, operation) from e


def parse_number(value: Any) -> Number:
    """JSON number or rational string to a Python number; strings become Fractions."""
    if isinstance(value, str):
        try:
            return Fraction(value.replace(" ", ""))
        except (ValueError, ZeroDivisionError) as e:
            raise SerializationError("deserialize", f"not a rational number: {value!r}") from e
    return value


def format_number(value: Any) -> Any:
    """Python number to JSON; non-integral Fractions become "p/q" strings."""
    if isinstance(value, Fraction):
        return value.numerator if value.denominator == 1 else f"{value.numerator}/{value.denominator}"
    if hasattr(value, "item"):
        return value.item()
    return value


def _numbers(values: Any) -> Any:
    if isinstance(values, (list, tuple)):
        return [_numbers(v) for v in values]
    return parse_number(values)


def _formatted(values: Any) -> Any:
    if isinstance(values, (list, tuple)):
        return [_formatted(v) for v in values]
    return format_number(values)


def load_json(path: PathLike) -> Any:
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise handle_json_error(e, "deserialize", text) from e


def dump_json(data: Any, path: Optional[PathLike] = None) -> str:
    """Serialize ``data`` (indent 2, sorted keys); write it when ``path`` is given."""
    try:
        text = json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False)
    except (TypeError, ValueError) as e:
        raise handle_json_error(e, "serialize") from e
    if path is not None:
        Path(path).write_text(text + "\n")
    return text


def instance_from_dict(data: Dict[str, Any]) -> BavwmInstance:
    """
    Build a raw instance; ``n`` and ``m`` default to the matrix shape.

    Raises:
        SerializationError: On schema violations or when n / m disagree with the data
    """
    validate_schema(data, INSTANCE_SCHEMA)
    budgets = _numbers(data["budgets"])
    values = _numbers(data["values"])
    n = data.get("n", len(budgets))
    m = data.get("m", len(values[0]) if values else 0)
    if n != len(budgets) or any(len(row) != m for row in values):
        raise SerializationError("deserialize", f"declared n={n}, m={m} do not match the matrices")
    return BavwmInstance(
        n=n,
        m=m,
        values=values,
        budgets=budgets,
        multipliers=_numbers(data["multipliers"]),
        virtual_values=_numbers(data["virtual_values"]),
    )


def instance_to_dict(instance: BavwmInstance) -> Dict[str, Any]:
    return {
        "n": instance.n,
        "m": instance.m,
        "values": _formatted(instance.values),
        "budgets": _formatted(instance.budgets),
        "multipliers": _formatted(instance.multipliers),
        "virtual_values": _formatted(instance.virtual_values),
    }


def load_instance(path: PathLike) -> BavwmInstance:
    return instance_from_dict(load_json(path))


def dump_instance(instance: BavwmInstance, path: Optional[PathLike] = None) -> str:
    return dump_json(instance_to_dict(instance), path)


def allocation_to_dict(allocation: Allocation) -> Dict[str, Any]:
    return {
        "assignment": [None if owner is UNASSIGNED else owner + 1 for owner in allocation.assignment]
    }


def allocation_from_dict(data: Dict[str, Any]) -> Allocation:
    validate_schema(data, ALLOCATION_SCHEMA)
    return Allocation(tuple(None if owner is None else owner - 1 for owner in data["assignment"]))


def result_to_dict(result: BavwmResult) -> Dict[str, Any]:
    """Allocation, prices, objective and (for approximations) the LP certificate."""
    data = {
        "method": result.method.value,
        "allocation": allocation_to_dict(result.allocation)["assignment"],
        "prices": _formatted(result.prices.prices),
        "objective": format_number(result.objective_value),
    }
    if result.certificate is not None:
        data["lp_bound"] = format_number(result.certificate)
    return data


def gap_from_dict(data: Dict[str, Any]) -> GapInstance:
    validate_schema(data, GAP_SCHEMA)
    try:
        return GapInstance(
            processing=_numbers(data["processing"]),
            cost=_numbers(data["cost"]),
            capacities=_numbers(data["capacities"]),
            jobs=data.get("jobs"),
        )
    except BudgetMechError as e:
        raise SerializationError("deserialize", e.message) from e


def gap_to_dict(gap: GapInstance) -> Dict[str, Any]:
    return {
        "processing": _formatted(gap.processing),
        "cost": _formatted(gap.cost),
        "capacities": _formatted(gap.capacities),
        "jobs": gap.jobs,
    }


def load_gap(path: PathLike) -> GapInstance:
    return gap_from_dict(load_json(path))


def rounding_to_dict(gap: GapInstance, assignment: IntegralAssignment) -> Dict[str, Any]:
    """Machine per job (0-based machines), total cost and per-machine loads."""
    return {
        "machine_of": list(assignment.machine_of),
        "cost": format_number(assignment_cost(gap, assignment)),
        "loads": _formatted(machine_loads(gap, assignment)),
        "capacities": _formatted(gap.capacities),
    }


def prior_from_dict(data: Dict[str, Any]) -> Prior:
    validate_schema(data, PRIOR_SCHEMA)
    bidders = [
        BidderPrior(
            [
                TypeSpec(_numbers(t["values"]), parse_number(t["budget"]), parse_number(t["probability"]))
                for t in bidder["types"]
            ]
        )
        for bidder in data["bidders"]
    ]
    return Prior(data["m"], bidders)


def prior_to_dict(prior: Prior) -> Dict[str, Any]:
    return {
        "m": prior.m,
        "bidders": [
            {
                "types": [
                    {
                        "values": _formatted(t.values),
                        "budget": format_number(t.budget),
                        "probability": format_number(t.probability),
                    }
                    for t in bidder.types
                ]
            }
            for bidder in prior.bidders
        ],
    }


def load_prior(path: PathLike) -> Prior:
    return prior_from_dict(load_json(path))


def mapping_distribution_from_dict(data: Dict[str, Any]) -> MappingDistribution:
    validate_schema(data, MAPPING_DISTRIBUTION_SCHEMA)
    return MappingDistribution(
        tuple(
            (
                parse_number(entry["weight"]),
                VirtualMapping(_numbers(entry["multipliers"]), _numbers(entry["virtual_values"])),
            )
            for entry in data["mappings"]
        )
    )


def mapping_distribution_to_dict(delta: MappingDistribution) -> Dict[str, Any]:
    return {
        "mappings": [
            {
                "weight": format_number(weight),
                "multipliers": _formatted(mapping.multipliers),
                "virtual_values": _formatted(mapping.virtual_values),
            }
            for weight, mapping in delta.entries
        ]
    }


def load_mapping_distribution(path: PathLike) -> MappingDistribution:
    return mapping_distribution_from_dict(load_json(path))


def solution_to_dict(solution: MechanismSolution) -> Dict[str, Any]:
    """Revenue, interim form and the full lottery table."""
    return {
        "revenue": format_number(solution.revenue),
        "bic_mode": solution.bic_mode.value if solution.bic_mode else None,
        "mode": solution.mode.value,
        "interim": {
            "allocation": _formatted(solution.interim.allocation),
            "payments": _formatted(solution.interim.payments),
        },
        "lotteries": [
            {
                "profile": list(profile),
                "entries": [
                    {
                        "allocation": allocation_to_dict(Allocation(entry.allocation))["assignment"],
                        "weight": format_number(entry.weight),
                        "payments": _formatted(entry.payments),
                    }
                    for entry in entries
                ],
            }
            for profile, entries in solution.table
        ],
    }


def outcome_to_dict(outcome: MechanismOutcome) -> Dict[str, Any]:
    return {
        "mapping_index": outcome.mapping_index,
        "allocation": allocation_to_dict(outcome.allocation)["assignment"],
        "prices": _formatted(outcome.prices.prices),
        "virtual_objective": format_number(outcome.objective_value),
    }


def report_to_json(report: Any, schema: Dict[str, Any], path: Optional[PathLike] = None, **kwargs: Any) -> str:
    """Serialize a BenchReport or VerificationReport after checking it against ``schema``."""
    data = report.to_dict(**kwargs)
    validate_schema(data, schema, "serialize")
    return dump_json(data, path)


def parse_profile(text: str) -> List[int]:
    """Comma-separated 0-based type indices, e.g. ``"0,2,1"``."""
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise SerializationError("deserialize", f"profile must be comma-separated integers: {text!r}") from e
