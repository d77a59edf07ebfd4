"""Problem instances: data model, JSON document format, validation, big-M values."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple, Optional

import jsonschema
import numpy as np

VEHICLE_OWNER = "vehicle_owner"
CARLESS = "carless"
GATHERING = "gathering"
KINDS = (VEHICLE_OWNER, CARLESS, GATHERING)

# miles per minute (30 mph); only used to derive distances for ATD reporting
DEFAULT_SPEED = 0.5


class SchemaError(ValueError):
    """The document does not match the instance format."""


class ValidationError(ValueError):
    """The document parsed but describes an invalid instance."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


@dataclass(frozen=True)
class Violation:
    code: str
    location: Optional[str] = None
    detail: str = ""

    def __str__(self):
        where = f" {self.location}" if self.location is not None else ""
        tail = f": {self.detail}" if self.detail else ""
        return f"{self.code}{where}{tail}"


@dataclass(frozen=True)
class Location:
    id: str
    kind: str
    demand: int
    capacity: Optional[int] = None
    coord: Optional[tuple[float, float]] = None


class Arrays(NamedTuple):
    """Index-based view of an instance used by the solvers."""

    owners: tuple  # location indices of R, in declaration order
    carless: tuple  # location indices of H
    gathering: tuple  # location indices of S
    demand: tuple
    capacity: tuple  # 0 for non-owners
    tt: list  # travel_time as nested lists (fast scalar indexing)
    dd: list  # travel distance as nested lists
    t_p: float
    t_max: float


def _freeze(matrix):
    if matrix is None:
        return None
    return tuple(tuple(float(v) for v in row) for row in matrix)


@dataclass(frozen=True)
class Instance:
    """An evacuation instance.  Matrices are indexed in ``locations`` order.

    Construction does not validate; use :func:`validate` or
    :func:`parse_instance`.
    """

    name: str
    locations: tuple
    travel_time: tuple
    t_p: float
    t_max: float
    travel_distance: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "locations", tuple(self.locations))
        object.__setattr__(self, "travel_time", _freeze(self.travel_time))
        object.__setattr__(self, "travel_distance", _freeze(self.travel_distance))

    # -- lookups -----------------------------------------------------------

    @cached_property
    def index(self) -> dict:
        return {loc.id: i for i, loc in enumerate(self.locations)}

    def _of_kind(self, kind):
        return tuple(i for i, loc in enumerate(self.locations) if loc.kind == kind)

    @property
    def owners(self):
        return self._of_kind(VEHICLE_OWNER)

    @property
    def carless(self):
        return self._of_kind(CARLESS)

    @property
    def gathering(self):
        return self._of_kind(GATHERING)

    @property
    def time_matrix(self) -> np.ndarray:
        return np.array(self.travel_time, dtype=np.float64)

    @property
    def distance_matrix(self) -> np.ndarray:
        """Given travel distances, or travel time at the default speed."""
        if self.travel_distance is not None:
            return np.array(self.travel_distance, dtype=np.float64)
        return self.time_matrix * DEFAULT_SPEED

    @property
    def total_demand(self) -> int:
        return sum(loc.demand for loc in self.locations if loc.kind != GATHERING)

    @cached_property
    def arrays(self) -> Arrays:
        return Arrays(
            owners=self.owners,
            carless=self.carless,
            gathering=self.gathering,
            demand=tuple(loc.demand for loc in self.locations),
            capacity=tuple(loc.capacity or 0 for loc in self.locations),
            tt=self.time_matrix.tolist(),
            dd=self.distance_matrix.tolist(),
            t_p=float(self.t_p),
            t_max=float(self.t_max),
        )

    def replace(self, **changes) -> "Instance":
        fields = dict(
            name=self.name,
            locations=self.locations,
            travel_time=self.travel_time,
            t_p=self.t_p,
            t_max=self.t_max,
            travel_distance=self.travel_distance,
        )
        fields.update(changes)
        return Instance(**fields)

    def to_dict(self) -> dict:
        locs = []
        for loc in self.locations:
            d = {"id": loc.id, "kind": loc.kind, "demand": loc.demand}
            if loc.capacity is not None:
                d["capacity"] = loc.capacity
            if loc.coord is not None:
                d["coord"] = list(loc.coord)
            locs.append(d)
        doc = {
            "name": self.name,
            "t_p": self.t_p,
            "t_max": self.t_max,
            "locations": locs,
            "travel_time": [list(r) for r in self.travel_time],
        }
        if self.travel_distance is not None:
            doc["travel_distance"] = [list(r) for r in self.travel_distance]
        return doc


# ---------------------------------------------------------------------------
# document format

_NUMBER_MATRIX = {"type": "array", "items": {"type": "array", "items": {"type": "number"}}}

INSTANCE_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["name", "t_p", "t_max", "locations", "travel_time"],
    "properties": {
        "name": {"type": "string"},
        "t_p": {"type": "number"},
        "t_max": {"type": "number"},
        "locations": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["id", "kind", "demand"],
                "properties": {
                    "id": {"type": "string"},
                    "kind": {"enum": list(KINDS)},
                    "demand": {"type": "integer"},
                    "capacity": {"type": "integer"},
                    "coord": {
                        "type": "array",
                        "items": {"type": "number"},
                        "minItems": 2,
                        "maxItems": 2,
                    },
                },
            },
        },
        "travel_time": _NUMBER_MATRIX,
        "travel_distance": _NUMBER_MATRIX,
    },
}


def instance_from_dict(doc: dict, check: bool = True) -> Instance:
    try:
        jsonschema.validate(doc, INSTANCE_SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path)
        raise SchemaError(f"{path or '<root>'}: {exc.message}") from None
    locations = tuple(
        Location(
            id=d["id"],
            kind=d["kind"],
            demand=d["demand"],
            capacity=d.get("capacity"),
            coord=tuple(d["coord"]) if "coord" in d else None,
        )
        for d in doc["locations"]
    )
    inst = Instance(
        name=doc["name"],
        locations=locations,
        travel_time=doc["travel_time"],
        t_p=doc["t_p"],
        t_max=doc["t_max"],
        travel_distance=doc.get("travel_distance"),
    )
    if check:
        problems = validate(inst)
        if problems:
            raise ValidationError(problems)
    return inst


def parse_instance(text: str, check: bool = True) -> Instance:
    """Parse an instance document.

    Raises SchemaError for malformed JSON or structure, ValidationError when
    ``check`` is set and the instance breaks an invariant.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}") from None
    return instance_from_dict(doc, check=check)


def serialize_instance(inst: Instance, indent: Optional[int] = None) -> str:
    return json.dumps(inst.to_dict(), indent=indent)


def load_instance(path, check: bool = True) -> Instance:
    with open(path, encoding="utf-8") as fh:
        return parse_instance(fh.read(), check=check)


# ---------------------------------------------------------------------------
# validation


def _check_matrix(name, matrix, n, out):
    if len(matrix) != n or any(len(row) != n for row in matrix):
        out.append(Violation("NonSquareMatrix", None, f"{name} must be {n}x{n}"))
        return False
    return True


def validate(inst: Instance) -> list:
    """Return every invariant violation of ``inst`` (empty list when valid)."""
    out = []
    seen = set()
    for loc in inst.locations:
        if loc.id in seen:
            out.append(Violation("DuplicateId", loc.id))
        seen.add(loc.id)
        if loc.kind not in KINDS:
            out.append(Violation("UnknownKind", loc.id, repr(loc.kind)))
            continue
        if loc.demand < 0:
            out.append(Violation("NegativeDemand", loc.id, f"demand {loc.demand} < 0"))
        if loc.kind == GATHERING:
            if loc.demand != 0:
                out.append(Violation("GatheringDemand", loc.id, f"demand {loc.demand} != 0"))
            if loc.capacity is not None:
                out.append(Violation("UnexpectedCapacity", loc.id, "gathering place has a capacity"))
        elif loc.kind == CARLESS:
            if loc.capacity is not None:
                out.append(Violation("UnexpectedCapacity", loc.id, "carless household has a capacity"))
        else:
            if loc.capacity is None:
                out.append(Violation("MissingCapacity", loc.id, "vehicle owner without capacity"))
            elif loc.capacity <= 0:
                out.append(Violation("NonPositiveCapacity", loc.id, f"capacity {loc.capacity}"))
            elif loc.capacity < loc.demand:
                out.append(
                    Violation(
                        "CapacityBelowDemand",
                        loc.id,
                        f"capacity < own demand ({loc.capacity} < {loc.demand})",
                    )
                )
    if not any(loc.kind == GATHERING for loc in inst.locations):
        out.append(Violation("NoGatheringPlace", None, "no gathering place"))

    for pname in ("t_p", "t_max"):
        val = getattr(inst, pname)
        if not math.isfinite(val) or val < 0:
            out.append(Violation("InvalidParameter", None, f"{pname} = {val}"))

    n = len(inst.locations)
    ids = [loc.id for loc in inst.locations]
    for name, matrix in (("travel_time", inst.travel_time), ("travel_distance", inst.travel_distance)):
        if matrix is None or not _check_matrix(name, matrix, n, out):
            continue
        for i in range(n):
            if matrix[i][i] != 0:
                out.append(Violation("NonzeroDiagonal", ids[i], f"{name}[{i}][{i}] = {matrix[i][i]}"))
            for j in range(n):
                v = matrix[i][j]
                if not math.isfinite(v) or v < 0:
                    out.append(
                        Violation("InvalidEntry", ids[i], f"{name}[{ids[i]}][{ids[j]}] = {v}")
                    )
    return out


# ---------------------------------------------------------------------------
# big-M


@dataclass(frozen=True)
class BigMValues:
    m_load: float
    m_time: float


def compute_big_m(inst: Instance) -> BigMValues:
    """Per-family big-M values: loads use the largest capacity, times the
    deadline plus the longest arc plus a full vehicle's boarding time."""
    caps = [loc.capacity for loc in inst.locations if loc.kind == VEHICLE_OWNER]
    max_cap = max(caps, default=0)
    max_t = max((max(row) for row in inst.travel_time), default=0.0)
    m_time = inst.t_max + max_t + inst.t_p * max_cap
    # keep M strictly positive on degenerate all-zero instances
    return BigMValues(m_load=max(max_cap, 1), m_time=max(m_time, 1))
