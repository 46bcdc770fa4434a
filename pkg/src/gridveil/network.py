"""Power-network data model.

Buses, lines (series impedance plus charging/tap/shift), and generators,
all in per-unit on the system MVA base. Networks are immutable after
construction and safe to share across worker processes.

Only the series conductance/susceptance of a line is treated as sensitive
by the obfuscation pipeline; charging, taps, and shifts are carried along
unchanged.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping


class CaseError(Exception):
    """Base class for problems with network input data."""


class CaseFormatError(CaseError):
    """Raised when a case file or JSON document cannot be parsed."""


class ValidationError(CaseError):
    """Raised when parsed data violates a structural network invariant."""


@dataclass(frozen=True)
class Bus:
    """A network bus.

    Voltage bounds and loads are per unit; ``base_kv`` is the nominal
    voltage used to group lines into voltage levels.
    """

    id: int
    v_min: float
    v_max: float
    base_kv: float = 0.0
    is_slack: bool = False
    p_load: float = 0.0
    q_load: float = 0.0
    g_shunt: float = 0.0
    b_shunt: float = 0.0

    @property
    def load(self) -> complex:
        return complex(self.p_load, self.q_load)


@dataclass(frozen=True)
class Line:
    """A transmission line or transformer branch.

    ``r`` and ``x`` are the series impedance in per unit. ``s_max`` is the
    apparent-power thermal limit (``math.inf`` when unlimited) and
    ``angle_max`` the symmetric bound on the phase-angle difference across
    the branch, in radians. ``charging`` is the total line-charging
    susceptance, split evenly between the two ends; ``tap`` and ``shift``
    describe an off-nominal transformer on the from side.
    """

    id: int
    from_bus: int
    to_bus: int
    r: float
    x: float
    s_max: float = math.inf
    angle_max: float = math.pi / 3
    charging: float = 0.0
    tap: float = 1.0
    shift: float = 0.0


@dataclass(frozen=True)
class Generator:
    """A dispatchable generator with box bounds and polynomial cost.

    Cost of a dispatch ``p`` (per unit) is ``c2*(p*base)**2 + c1*(p*base)
    + c0`` in $/h, with ``base`` the system MVA base.
    """

    id: int
    bus: int
    p_min: float
    p_max: float
    q_min: float
    q_max: float
    c0: float = 0.0
    c1: float = 0.0
    c2: float = 0.0


@dataclass(frozen=True)
class Network:
    """An immutable network: buses, lines, generators, and the MVA base."""

    base_mva: float
    buses: tuple[Bus, ...]
    lines: tuple[Line, ...]
    generators: tuple[Generator, ...]
    name: str = ""

    def __post_init__(self) -> None:
        validate(self)

    @property
    def n_buses(self) -> int:
        return len(self.buses)

    @property
    def n_lines(self) -> int:
        return len(self.lines)

    def bus(self, bus_id: int) -> Bus:
        return self.buses[self.bus_index()[bus_id]]

    def line(self, line_id: int) -> Line:
        for ln in self.lines:
            if ln.id == line_id:
                return ln
        raise KeyError(f"no line with id {line_id}")

    def bus_index(self) -> dict[int, int]:
        """Map bus id to position in ``buses``."""
        return {b.id: i for i, b in enumerate(self.buses)}

    def slack_bus(self) -> Bus:
        return next(b for b in self.buses if b.is_slack)

    def with_lines(self, lines: Iterable[Line], name: str | None = None) -> "Network":
        return Network(
            base_mva=self.base_mva,
            buses=self.buses,
            lines=tuple(lines),
            generators=self.generators,
            name=self.name if name is None else name,
        )

    def with_loads(self, p_load: Mapping[int, float], q_load: Mapping[int, float]) -> "Network":
        """Copy with per-bus loads replaced (per unit, keyed by bus id)."""
        buses = tuple(
            replace(b, p_load=p_load.get(b.id, b.p_load), q_load=q_load.get(b.id, b.q_load))
            for b in self.buses
        )
        return Network(self.base_mva, buses, self.lines, self.generators, self.name)


def validate(net: Network) -> None:
    """Check structural invariants, raising :class:`ValidationError`.

    Enforced: positive MVA base, unique bus ids, exactly one slack bus,
    line endpoints exist and differ, nonzero reactance, positive thermal
    and angle limits, generator buses exist, ordered generator bounds,
    nonnegative quadratic cost, and a connected graph.

    An empty voltage box (``v_min > v_max``) is deliberately allowed so
    such networks can be represented and reported as AC-infeasible.
    """
    if net.base_mva <= 0:
        raise ValidationError("base MVA must be positive")
    ids = [b.id for b in net.buses]
    if len(set(ids)) != len(ids):
        raise ValidationError("duplicate bus ids")
    if not net.buses:
        raise ValidationError("network has no buses")
    n_slack = sum(1 for b in net.buses if b.is_slack)
    if n_slack == 0:
        raise ValidationError("missing slack bus")
    if n_slack > 1:
        raise ValidationError("multiple slack buses")
    for b in net.buses:
        if b.v_min <= 0 or b.v_max <= 0:
            raise ValidationError(f"bus {b.id}: voltage bounds must be positive")
    known = set(ids)
    line_ids = [ln.id for ln in net.lines]
    if len(set(line_ids)) != len(line_ids):
        raise ValidationError("duplicate line ids")
    for ln in net.lines:
        if ln.from_bus not in known or ln.to_bus not in known:
            raise ValidationError(f"line {ln.id}: endpoint bus does not exist")
        if ln.from_bus == ln.to_bus:
            raise ValidationError(f"line {ln.id}: from and to bus coincide")
        if ln.x == 0.0:
            raise ValidationError(f"line {ln.id}: zero reactance")
        if not (ln.s_max > 0):
            raise ValidationError(f"line {ln.id}: thermal limit must be positive")
        if not (ln.angle_max > 0):
            raise ValidationError(f"line {ln.id}: angle limit must be positive")
        if ln.tap <= 0:
            raise ValidationError(f"line {ln.id}: tap ratio must be positive")
    for g in net.generators:
        if g.bus not in known:
            raise ValidationError(f"generator {g.id}: bus does not exist")
        if g.p_min > g.p_max or g.q_min > g.q_max:
            raise ValidationError(f"generator {g.id}: bounds out of order")
        if g.c2 < 0:
            raise ValidationError(f"generator {g.id}: negative quadratic cost")
    if net.lines or len(net.buses) > 1:
        _check_connected(net)


def _check_connected(net: Network) -> None:
    adj: dict[int, set[int]] = {b.id: set() for b in net.buses}
    for ln in net.lines:
        adj[ln.from_bus].add(ln.to_bus)
        adj[ln.to_bus].add(ln.from_bus)
    start = net.buses[0].id
    seen = {start}
    stack = [start]
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    if len(seen) != len(net.buses):
        raise ValidationError("disconnected graph")


def admittance(line: Line) -> tuple[float, float]:
    """Series admittance ``(g, b)`` of a line, per unit.

    ``g = r / (r^2 + x^2)`` and ``b = -x / (r^2 + x^2)``, so that
    ``(g + jb) * (r + jx) = 1``.
    """
    d = line.r * line.r + line.x * line.x
    if d == 0.0:
        raise ValueError("zero impedance")
    return line.r / d, -line.x / d


def impedance(g: float, b: float) -> tuple[float, float]:
    """Inverse of :func:`admittance`: map ``(g, b)`` back to ``(r, x)``."""
    d = g * g + b * b
    if d == 0.0:
        raise ValueError("zero admittance")
    return g / d, -b / d


def voltage_levels(net: Network) -> dict[tuple[float, float], tuple[int, ...]]:
    """Partition line ids by voltage level.

    The grouping key is the unordered pair of endpoint base voltages, so
    transformers form their own groups. Keys are sorted for deterministic
    iteration; every line appears in exactly one group.
    """
    kv = {b.id: b.base_kv for b in net.buses}
    groups: dict[tuple[float, float], list[int]] = {}
    for ln in net.lines:
        key = tuple(sorted((kv[ln.from_bus], kv[ln.to_bus])))
        groups.setdefault(key, []).append(ln.id)
    return {k: tuple(groups[k]) for k in sorted(groups)}


def preprocess(net: Network) -> Network:
    """Normalize line parameters ahead of obfuscation.

    Parallel lines (same unordered endpoint pair) get the arithmetic mean
    of their ``(r, x)``, and negative resistances are clamped to zero.
    Idempotent; everything else is left untouched.
    """
    groups: dict[tuple[int, int], list[Line]] = {}
    for ln in net.lines:
        key = (min(ln.from_bus, ln.to_bus), max(ln.from_bus, ln.to_bus))
        groups.setdefault(key, []).append(ln)
    merged: dict[int, tuple[float, float]] = {}
    for members in groups.values():
        r = sum(ln.r for ln in members) / len(members)
        x = sum(ln.x for ln in members) / len(members)
        if x == 0.0:
            raise ValidationError(
                f"parallel group {members[0].from_bus}-{members[0].to_bus}: "
                "mean reactance is zero"
            )
        for ln in members:
            merged[ln.id] = (r, x)
    out = []
    for ln in net.lines:
        r, x = merged[ln.id]
        out.append(replace(ln, r=max(r, 0.0), x=x))
    return net.with_lines(out)


def series_admittances(net: Network) -> tuple[list[float], list[float]]:
    """Vectors of series conductance/susceptance in line order."""
    g, b = [], []
    for ln in net.lines:
        gi, bi = admittance(ln)
        g.append(gi)
        b.append(bi)
    return g, b


def network_with_admittances(net: Network, g: Iterable[float], b: Iterable[float]) -> Network:
    """Copy of ``net`` whose line impedances realize the given admittances.

    Used to release obfuscated networks: each line's ``(r, x)`` is
    recomputed from the supplied series ``(g, b)``; charging, taps and all
    other fields are preserved.
    """
    gl, bl = list(g), list(b)
    if len(gl) != net.n_lines or len(bl) != net.n_lines:
        raise ValueError("admittance vectors must have one entry per line")
    out = []
    for ln, gi, bi in zip(net.lines, gl, bl):
        r, x = impedance(gi, bi)
        out.append(replace(ln, r=r, x=x))
    return net.with_lines(out)


# ---------------------------------------------------------------------------
# JSON serialization. Floats go through repr (shortest round-trip form), so
# a dump/load cycle reproduces every numeric field bit-exactly.
# ---------------------------------------------------------------------------

def network_to_json(net: Network) -> str:
    doc = {
        "base_mva": net.base_mva,
        "name": net.name,
        "buses": [
            {
                "id": b.id,
                "v_min": b.v_min,
                "v_max": b.v_max,
                "base_kv": b.base_kv,
                "is_slack": b.is_slack,
                "p_load": b.p_load,
                "q_load": b.q_load,
                "g_shunt": b.g_shunt,
                "b_shunt": b.b_shunt,
            }
            for b in net.buses
        ],
        "lines": [
            {
                "id": ln.id,
                "from_bus": ln.from_bus,
                "to_bus": ln.to_bus,
                "r": ln.r,
                "x": ln.x,
                "s_max": None if math.isinf(ln.s_max) else ln.s_max,
                "angle_max": ln.angle_max,
                "charging": ln.charging,
                "tap": ln.tap,
                "shift": ln.shift,
            }
            for ln in net.lines
        ],
        "generators": [
            {
                "id": g.id,
                "bus": g.bus,
                "p_min": g.p_min,
                "p_max": g.p_max,
                "q_min": g.q_min,
                "q_max": g.q_max,
                "c0": g.c0,
                "c1": g.c1,
                "c2": g.c2,
            }
            for g in net.generators
        ],
    }
    return json.dumps(doc, indent=1)


def network_from_json(text: str) -> Network:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CaseFormatError(f"invalid JSON: {exc}") from exc
    try:
        buses = tuple(Bus(**b) for b in doc["buses"])
        lines = tuple(
            Line(**{**ln, "s_max": math.inf if ln.get("s_max") is None else ln["s_max"]})
            for ln in doc["lines"]
        )
        gens = tuple(Generator(**g) for g in doc["generators"])
        return Network(
            base_mva=doc["base_mva"],
            buses=buses,
            lines=lines,
            generators=gens,
            name=doc.get("name", ""),
        )
    except (KeyError, TypeError) as exc:
        raise CaseFormatError(f"malformed network document: {exc}") from exc
