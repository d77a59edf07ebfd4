"""Symbolic mixed-integer model of the ridesharing evacuation problem and an
LP-format writer / reader for handing it to external solvers.

Index sets follow the instance: V = R + H + S in declaration order and one
vehicle per owner location.  Variables fixed to zero by the start-location
rules (foreign starts, self loops, other vehicles' load at an owner node) are
never created; the strengthened mode additionally drops departures from
gathering places and arrivals at owner locations, and adds a per-vehicle
gathering constraint.

Constraints whose only guarding arc variable was eliminated are skipped.
With the arc fixed at 0 each of them reduces to an inequality already
implied by the loads staying within capacity and every clock staying within
the deadline, so the feasible set is unchanged.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .instance import CARLESS, GATHERING, VEHICLE_OWNER, Instance, compute_big_m
from .plan import Plan, make_plan, make_route

VERBATIM = "verbatim"
STRENGTHENED = "strengthened"
MODES = (VERBATIM, STRENGTHENED)

BINARY = "binary"
INTEGER = "integer"
CONTINUOUS = "continuous"

LE, EQ, GE = "<=", "=", ">="


class LPParseError(ValueError):
    pass


@dataclass(frozen=True)
class MipVariable:
    name: str
    kind: str
    lower: float = 0.0
    upper: float = math.inf


@dataclass(frozen=True)
class Constraint:
    name: str
    terms: tuple  # ((variable name, coefficient), ...)
    sense: str
    rhs: float


@dataclass(frozen=True)
class MipModel:
    name: str
    variables: tuple
    constraints: tuple
    objective: tuple  # maximized
    mode: str

    def family_counts(self) -> dict:
        """Variables per family letter and constraints per family tag,
        e.g. ``{"x": 3, ..., "c11_u_prop": 1}``."""
        out = {}
        for v in self.variables:
            fam = v.name.split("_", 1)[0]
            out[fam] = out.get(fam, 0) + 1
        for c in self.constraints:
            fam = _family_of(c.name)
            out[fam] = out.get(fam, 0) + 1
        return out

    @property
    def n_variables(self) -> int:
        return len(self.variables)

    @property
    def n_constraints(self) -> int:
        return len(self.constraints)


_FAMILIES = (
    "c2_depart",
    "c3_flow",
    "c4k_gather",
    "c4_gather",
    "c5_own",
    "c6_pick_lb",
    "c7_pick_ub",
    "c8_pick_arc",
    "c9_u_start",
    "c10_u_arc",
    "c11_u_prop",
    "c12_time",
    "c13_deadline",
    "c14_cap",
)


def _family_of(cname):
    for fam in _FAMILIES:
        if cname == fam or cname.startswith(fam + "_"):
            return fam
    return cname


def sanitize(token: str) -> str:
    return re.sub(r"[^A-Za-z0-9_]", "_", token)


# ---------------------------------------------------------------------------
# model building


class _Builder:
    def __init__(self):
        self.vars = {}
        self.cons = []
        self.names = set()

    def var(self, name, kind, lower=0.0, upper=math.inf):
        if kind == BINARY:
            lower, upper = 0.0, 1.0
        self.vars[name] = MipVariable(name, kind, float(lower), float(upper))

    def add(self, name, terms, sense, rhs):
        merged = {}
        for v, c in terms:
            if v not in self.vars:
                continue  # eliminated variable: fixed at 0
            merged[v] = merged.get(v, 0.0) + float(c)
        terms = tuple((v, c) for v, c in merged.items() if c != 0.0)
        if not terms:
            return
        if name in self.names:
            raise ValueError(f"duplicate constraint name {name}")
        self.names.add(name)
        self.cons.append(Constraint(name, terms, sense, float(rhs)))


def build_model(inst: Instance, mode: str = STRENGTHENED) -> MipModel:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    strong = mode == STRENGTHENED
    locs = inst.locations
    names = [sanitize(loc.id) for loc in locs]
    if len(set(names)) != len(names):
        raise ValueError("location ids collide after sanitising to [A-Za-z0-9_]")
    R = [i for i, loc in enumerate(locs) if loc.kind == VEHICLE_OWNER]
    H = [i for i, loc in enumerate(locs) if loc.kind == CARLESS]
    S = [i for i, loc in enumerate(locs) if loc.kind == GATHERING]
    V = list(range(len(locs)))
    RH = sorted(R + H)
    HS = sorted(H + S)
    d = [loc.demand for loc in locs]
    cap = {k: locs[k].capacity for k in R}
    tt = inst.travel_time
    big = compute_big_m(inst)
    m_load, m_time = big.m_load, big.m_time

    def x(i, j, k):
        return f"x_{names[i]}_{names[j]}_{names[k]}"

    def y(i, k):
        return f"y_{names[i]}_{names[k]}"

    def u(i, k):
        return f"u_{names[i]}_{names[k]}"

    def v(i):
        return f"v_{names[i]}"

    def z(i):
        return f"z_{names[i]}"

    b = _Builder()
    # variables, declaration order: x, y, u, v, z
    for k in R:
        for i in V:
            if i in R and i != k:
                continue
            if strong and i in S:
                continue
            for j in V:
                if i == j or (strong and j in R):
                    continue
                b.var(x(i, j, k), BINARY)
    for k in R:
        for i in RH:
            if i in R and i != k:
                continue
            b.var(y(i, k), INTEGER)
    for k in R:
        for i in RH:
            if i in R and i != k:
                continue
            b.var(u(i, k), CONTINUOUS)
    for i in RH:
        b.var(v(i), CONTINUOUS)
    for i in RH:
        b.var(z(i), BINARY)

    objective = tuple((y(i, k), 1.0) for i in RH for k in R if y(i, k) in b.vars)

    # only vehicle i leaves owner location i
    for i in R:
        b.add(f"c2_depart_{names[i]}", [(x(i, j, i), 1) for j in V] + [(z(i), -1)], EQ, 0)
    # flow balance at carless locations
    for j in H:
        for k in R:
            terms = [(x(i, j, k), 1) for i in RH] + [(x(j, i, k), -1) for i in HS]
            b.add(f"c3_flow_{names[j]}_{names[k]}", terms, EQ, 0)
    # every used vehicle reaches a gathering place
    terms = [(x(i, j, k), 1) for i in RH for j in S for k in R] + [(z(i), -1) for i in R]
    b.add("c4_gather", terms, EQ, 0)
    if strong:
        for k in R:
            terms = [(x(i, j, k), 1) for i in V for j in S] + [(z(k), -1)]
            b.add(f"c4k_gather_{names[k]}", terms, EQ, 0)
    # an owner's household always rides in its own vehicle
    for i in R:
        b.add(f"c5_own_{names[i]}", [(y(i, i), 1), (z(i), -d[i])], EQ, 0)
    # pickups at carless locations
    for i in H:
        b.add(f"c6_pick_lb_{names[i]}", [(y(i, k), 1) for k in R] + [(z(i), -1)], GE, 0)
        b.add(f"c7_pick_ub_{names[i]}", [(y(i, k), 1) for k in R] + [(z(i), -d[i])], LE, 0)
    # pick up only where the vehicle arrives
    for j in H:
        for k in R:
            terms = [(y(j, k), 1)] + [(x(i, j, k), -m_load) for i in RH]
            b.add(f"c8_pick_arc_{names[j]}_{names[k]}", terms, LE, 0)
    # load when leaving the start
    for k in R:
        b.add(f"c9_u_start_{names[k]}_{names[k]}", [(u(k, k), 1), (y(k, k), -1)], EQ, 0)
    # load only where the vehicle arrives
    for j in H:
        for k in R:
            terms = [(u(j, k), 1)] + [(x(i, j, k), -m_load) for i in RH]
            b.add(f"c10_u_arc_{names[j]}_{names[k]}", terms, LE, 0)
    # load propagation along arcs
    for k in R:
        for i in RH:
            for j in H:
                if x(i, j, k) not in b.vars:
                    continue
                terms = [(u(j, k), 1), (u(i, k), -1), (y(j, k), -1), (x(i, j, k), -m_load)]
                b.add(f"c11_u_prop_{names[i]}_{names[j]}_{names[k]}", terms, GE, -m_load)
    # clock propagation along arcs
    for k in R:
        for i in RH:
            for j in RH:
                if x(i, j, k) not in b.vars:
                    continue
                terms = [(v(j), 1), (v(i), -1), (y(j, k), -inst.t_p), (x(i, j, k), -m_time)]
                b.add(f"c12_time_{names[i]}_{names[j]}_{names[k]}", terms, GE, tt[i][j] - m_time)
    # deadline at the gathering place
    for k in R:
        for i in RH:
            for j in S:
                if x(i, j, k) not in b.vars:
                    continue
                terms = [(v(i), 1), (x(i, j, k), tt[i][j])]
                b.add(f"c13_deadline_{names[i]}_{names[j]}_{names[k]}", terms, LE, inst.t_max)
    # capacity
    for k in R:
        for i in RH:
            if u(i, k) in b.vars:
                b.add(f"c14_cap_{names[i]}_{names[k]}", [(u(i, k), 1)], LE, cap[k])

    return MipModel(
        name=sanitize(inst.name) or "evacuation",
        variables=tuple(b.vars.values()),
        constraints=tuple(b.cons),
        objective=objective,
        mode=mode,
    )


# ---------------------------------------------------------------------------
# LP text

_WRAP = 100


def _num(c: float) -> str:
    if c == int(c) and abs(c) < 1e15:
        return str(int(c))
    return repr(c)


def _expr_lines(head, terms):
    parts = []
    for i, (v, c) in enumerate(terms):
        sign = "-" if c < 0 else "+"
        mag = abs(c)
        body = v if mag == 1.0 else f"{_num(mag)} {v}"
        if i == 0:
            parts.append(body if sign == "+" else f"- {body}")
        else:
            parts.append(f"{sign} {body}")
    lines, cur = [], head
    for p in parts:
        if len(cur) + len(p) + 1 > _WRAP and cur.strip():
            lines.append(cur)
            cur = "   " + p
        else:
            cur = f"{cur} {p}" if cur else p
    lines.append(cur)
    return lines


def export_lp(model: MipModel) -> str:
    out = ["Maximize"]
    out += _expr_lines(" obj:", model.objective or (("0", 0.0),))
    out.append("Subject To")
    for c in model.constraints:
        lines = _expr_lines(f" {c.name}:", c.terms)
        lines[-1] += f" {c.sense} {_num(c.rhs)}"
        out += lines
    out.append("Bounds")
    for v in model.variables:
        if v.kind == BINARY:
            continue
        if math.isinf(v.upper):
            out.append(f" {v.name} >= {_num(v.lower)}")
        else:
            out.append(f" {_num(v.lower)} <= {v.name} <= {_num(v.upper)}")
    gens = [v.name for v in model.variables if v.kind == INTEGER]
    bins = [v.name for v in model.variables if v.kind == BINARY]
    if gens:
        out.append("Generals")
        out += _name_lines(gens)
    if bins:
        out.append("Binaries")
        out += _name_lines(bins)
    out.append("End")
    return "\n".join(out) + "\n"


def _name_lines(names):
    lines, cur = [], ""
    for n in names:
        if cur and len(cur) + len(n) + 1 > _WRAP:
            lines.append(cur)
            cur = ""
        cur = f"{cur} {n}"
    if cur:
        lines.append(cur)
    return lines


_SECTIONS = {
    "maximize": "max",
    "maximum": "max",
    "max": "max",
    "minimize": "min",
    "minimum": "min",
    "min": "min",
    "subject to": "st",
    "such that": "st",
    "st": "st",
    "s.t.": "st",
    "bounds": "bounds",
    "bound": "bounds",
    "generals": "gen",
    "general": "gen",
    "gen": "gen",
    "binaries": "bin",
    "binary": "bin",
    "bin": "bin",
    "end": "end",
}
_TOKEN = re.compile(r"\s*([+-]?)\s*([0-9]*\.?[0-9]+(?:[eE][+-]?[0-9]+)?)?\s*([A-Za-z_][A-Za-z0-9_.]*)")
_LABEL = re.compile(r"^\s*[A-Za-z_][A-Za-z0-9_.]*\s*:")
_SENSE = re.compile(r"(<=|>=|=<|=>|<|>|=)")


def _parse_expr(text):
    terms = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise LPParseError(f"cannot parse expression near {text[pos:pos + 20]!r}")
        sign, coef, var = m.groups()
        c = float(coef) if coef else 1.0
        terms.append((var, -c if sign == "-" else c))
        pos = m.end()
        while pos < len(text) and text[pos] == " ":
            pos += 1
    return terms


def parse_lp(text: str, mode: Optional[str] = None) -> MipModel:
    """Read the LP subset written by :func:`export_lp` back into a model."""
    section = None
    blocks = {"max": [], "st": [], "bounds": [], "gen": [], "bin": []}
    for raw in text.splitlines():
        line = raw.split("\\", 1)[0].rstrip()
        if not line.strip():
            continue
        key = line.strip().lower()
        if key in _SECTIONS:
            section = _SECTIONS[key]
            if section == "end":
                break
            if section == "min":
                raise LPParseError("only maximisation models are supported")
            continue
        if section is None:
            raise LPParseError(f"content before the objective section: {line!r}")
        starts = _LABEL.match(line) is not None
        if section in ("max", "st") and blocks[section] and not starts:
            blocks[section][-1] += " " + line.strip()  # wrapped row
        else:
            blocks[section].append(line.strip())

    objective = ()
    if blocks["max"]:
        body = blocks["max"][0]
        if ":" in body:
            body = body.split(":", 1)[1]
        objective = tuple((v, c) for v, c in _parse_expr(body) if v != "0" and c != 0.0)

    constraints = []
    for row in blocks["st"]:
        if ":" not in row:
            raise LPParseError(f"unnamed constraint: {row!r}")
        name, body = row.split(":", 1)
        parts = _SENSE.split(body)
        if len(parts) != 3:
            raise LPParseError(f"constraint {name.strip()} has no single sense")
        lhs, sense, rhs = parts
        sense = {"=<": LE, "<": LE, "=>": GE, ">": GE}.get(sense, sense)
        constraints.append(Constraint(name.strip(), tuple(_parse_expr(lhs)), sense, float(rhs)))

    declared = {}
    order = []

    def touch(name):
        if name not in declared:
            declared[name] = [CONTINUOUS, 0.0, math.inf]
            order.append(name)

    for row in blocks["bounds"]:
        toks = row.split()
        if len(toks) == 3 and toks[1] == ">=":
            touch(toks[0])
            declared[toks[0]][1] = float(toks[2])
        elif len(toks) == 5 and toks[1] == "<=" and toks[3] == "<=":
            touch(toks[2])
            declared[toks[2]][1] = float(toks[0])
            declared[toks[2]][2] = float(toks[4])
        elif len(toks) == 2 and toks[1].lower() == "free":
            touch(toks[0])
            declared[toks[0]][1] = -math.inf
        else:
            raise LPParseError(f"unsupported bound: {row!r}")
    for row in blocks["gen"]:
        for n in row.split():
            touch(n)
            declared[n][0] = INTEGER
    for row in blocks["bin"]:
        for n in row.split():
            touch(n)
            declared[n] = [BINARY, 0.0, 1.0]

    # the writer lists every variable in its sections; anything else was
    # only referenced in rows
    for v, _ in objective:
        touch(v)
    for c in constraints:
        for v, _ in c.terms:
            touch(v)
    # keep the family-major declaration order of the writer
    rank = {"x": 0, "y": 1, "u": 2, "v": 3, "z": 4}
    pos = {n: i for i, n in enumerate(order)}
    ordered = sorted(order, key=lambda n: (rank.get(n.split("_", 1)[0], 5), pos[n]))
    variables = tuple(MipVariable(n, *declared[n]) for n in ordered)
    name = "lp"
    return MipModel(name, variables, tuple(constraints), objective, mode or "unknown")


# ---------------------------------------------------------------------------
# matrix view and solution decoding


@dataclass(frozen=True)
class MatrixForm:
    """``max c @ x`` s.t. ``row_lo <= A @ x <= row_hi``, ``lb <= x <= ub``."""

    names: tuple
    c: np.ndarray
    A: np.ndarray
    row_lo: np.ndarray
    row_hi: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    integrality: np.ndarray  # 1 for binary / integer columns


def to_matrix(model: MipModel) -> MatrixForm:
    names = tuple(v.name for v in model.variables)
    col = {n: i for i, n in enumerate(names)}
    n, m = len(names), len(model.constraints)
    c = np.zeros(n)
    for v, coef in model.objective:
        c[col[v]] += coef
    A = np.zeros((m, n))
    lo = np.full(m, -np.inf)
    hi = np.full(m, np.inf)
    for r, con in enumerate(model.constraints):
        for v, coef in con.terms:
            A[r, col[v]] += coef
        if con.sense in (LE, EQ):
            hi[r] = con.rhs
        if con.sense in (GE, EQ):
            lo[r] = con.rhs
    lb = np.array([v.lower for v in model.variables])
    ub = np.array([v.upper for v in model.variables])
    integ = np.array([0 if v.kind == CONTINUOUS else 1 for v in model.variables])
    return MatrixForm(names, c, A, lo, hi, lb, ub, integ)


def plan_from_solution(inst: Instance, model: MipModel, values) -> Plan:
    """Turn a MIP solution (``{variable name: value}``) into a Plan by
    following each used vehicle's arcs from its start.

    Timestamps are recomputed per vehicle; the model's shared clock is not
    copied.
    """
    names = {sanitize(loc.id): i for i, loc in enumerate(inst.locations)}
    arcs = {}
    for v in model.variables:
        if v.name.startswith("x_") and values.get(v.name, 0.0) > 0.5:
            i, j, k = _split_x(v.name, names)
            arcs.setdefault(k, {})[i] = j
    routes = []
    for k in inst.owners:
        if values.get(f"z_{sanitize(inst.locations[k].id)}", 0.0) < 0.5:
            routes.append(make_route(inst, k, (), None))
            continue
        succ = arcs.get(k, {})
        stops, cur, seen = [], k, {k}
        while True:
            nxt = succ.get(cur)
            if nxt is None:
                raise ValueError(f"vehicle {inst.locations[k].id} has no path to a gathering place")
            if inst.locations[nxt].kind == GATHERING:
                break
            if nxt in seen:
                raise ValueError(f"vehicle {inst.locations[k].id} revisits {inst.locations[nxt].id}")
            seen.add(nxt)
            key = f"y_{sanitize(inst.locations[nxt].id)}_{sanitize(inst.locations[k].id)}"
            stops.append((nxt, int(round(values.get(key, 0.0)))))
            cur = nxt
        routes.append(make_route(inst, k, stops, nxt))
    return make_plan(inst, routes)


def _split_x(name, ids):
    # ids may contain underscores; try every split of the body into three ids
    body = name[2:].split("_")
    n = len(body)
    for a in range(1, n - 1):
        for b in range(a + 1, n):
            i, j, k = "_".join(body[:a]), "_".join(body[a:b]), "_".join(body[b:])
            if i in ids and j in ids and k in ids:
                return ids[i], ids[j], ids[k]
    raise ValueError(f"cannot decode {name}")
