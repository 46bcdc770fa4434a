"""Case-file input and output.

Reads the standard matrix-based case format (``mpc.bus``, ``mpc.gen``,
``mpc.branch``, ``mpc.gencost`` tables) or this package's JSON schema,
producing a per-unit :class:`~gridveil.network.Network`. Also writes
networks back to both formats and exposes the bundled IEEE test cases.
"""

from __future__ import annotations

import math
import re
from importlib import resources

from .network import (
    Bus,
    CaseFormatError,
    Generator,
    Line,
    Network,
    ValidationError,
    network_from_json,
    network_to_json,
)

# Angle-difference limit applied when a case row has none (0 or >= 90 deg).
DEFAULT_ANGLE_MAX = math.pi / 3

_TABLE_RE = re.compile(r"mpc\.(\w+)\s*=\s*\[(.*?)\];", re.DOTALL)
_SCALAR_RE = re.compile(r"mpc\.(\w+)\s*=\s*([^;\[\]]+?);")


def parse_case(text: str) -> Network:
    """Parse case text (matrix format or JSON) into a per-unit network.

    Out-of-service branches and generators are dropped. Raises
    :class:`CaseFormatError` for malformed input and
    :class:`~gridveil.network.ValidationError` for structural problems
    such as a missing slack bus or a disconnected graph.
    """
    stripped = text.lstrip()
    if stripped.startswith("{"):
        return network_from_json(text)
    return _parse_matrix_case(text)


def _strip_comments(text: str) -> str:
    return re.sub(r"%[^\n]*", "", text)


def _parse_table(body: str, name: str) -> list[list[float]]:
    rows = []
    for raw in body.replace(";", "\n").split("\n"):
        raw = raw.strip()
        if not raw:
            continue
        try:
            rows.append([float(tok) for tok in raw.split()])
        except ValueError as exc:
            raise CaseFormatError(f"malformed {name} row: {raw!r}") from exc
    if rows and len({len(r) for r in rows}) != 1:
        raise CaseFormatError(f"ragged {name} table")
    return rows


def _parse_matrix_case(text: str) -> Network:
    text = _strip_comments(text)
    tables = {m.group(1): _parse_table(m.group(2), m.group(1)) for m in _TABLE_RE.finditer(text)}
    scalars = {m.group(1): m.group(2).strip() for m in _SCALAR_RE.finditer(text)}

    for required in ("bus", "gen", "branch"):
        if required not in tables or not tables[required]:
            raise CaseFormatError(f"missing {required} table")
    try:
        base = float(scalars.get("baseMVA", "100"))
    except ValueError as exc:
        raise CaseFormatError("malformed baseMVA") from exc

    name = scalars.get("casename", "").strip("'\" ")

    buses = []
    for row in tables["bus"]:
        if len(row) < 13:
            raise CaseFormatError("bus row has fewer than 13 columns")
        bus_type = int(row[1])
        if bus_type == 4:
            raise ValidationError(f"bus {int(row[0])}: isolated bus")
        buses.append(
            Bus(
                id=int(row[0]),
                v_min=row[12],
                v_max=row[11],
                base_kv=row[9],
                is_slack=bus_type == 3,
                p_load=row[2] / base,
                q_load=row[3] / base,
                g_shunt=row[4] / base,
                b_shunt=row[5] / base,
            )
        )

    lines = []
    line_id = 0
    for row in tables["branch"]:
        if len(row) < 11:
            raise CaseFormatError("branch row has fewer than 11 columns")
        if int(row[10]) == 0:
            continue
        line_id += 1
        rate_a = row[5] / base
        ang = DEFAULT_ANGLE_MAX
        if len(row) >= 13:
            lo, hi = abs(row[11]), abs(row[12])
            cand = min(lo, hi) if lo > 0 and hi > 0 else max(lo, hi)
            if 0.0 < cand < 90.0:
                ang = math.radians(cand)
        tap = row[8] if row[8] != 0.0 else 1.0
        lines.append(
            Line(
                id=line_id,
                from_bus=int(row[0]),
                to_bus=int(row[1]),
                r=row[2],
                x=row[3],
                s_max=math.inf if rate_a <= 0 else rate_a,
                angle_max=ang,
                charging=row[4],
                tap=tap,
                shift=math.radians(row[9]),
            )
        )

    gencost = tables.get("gencost")
    gens = []
    gen_id = 0
    for i, row in enumerate(tables["gen"]):
        if len(row) < 10:
            raise CaseFormatError("gen row has fewer than 10 columns")
        if row[7] <= 0:  # status
            continue
        gen_id += 1
        c0 = c1 = c2 = 0.0
        if gencost is not None:
            if i >= len(gencost):
                raise CaseFormatError("gencost has fewer rows than gen")
            c0, c1, c2 = _poly_cost(gencost[i])
        gens.append(
            Generator(
                id=gen_id,
                bus=int(row[0]),
                p_min=row[9] / base,
                p_max=row[8] / base,
                q_min=row[4] / base,
                q_max=row[3] / base,
                c0=c0,
                c1=c1,
                c2=c2,
            )
        )

    return Network(base_mva=base, buses=tuple(buses), lines=tuple(lines),
                   generators=tuple(gens), name=name)


def _poly_cost(row: list[float]) -> tuple[float, float, float]:
    model = int(row[0])
    if model != 2:
        raise CaseFormatError(f"unsupported cost model {model} (only polynomial)")
    ncost = int(row[3])
    coeffs = row[4:4 + ncost]
    if len(coeffs) != ncost:
        raise CaseFormatError("gencost row shorter than its declared ncost")
    if ncost > 3:
        raise CaseFormatError("cost polynomials above degree 2 are unsupported")
    c = [0.0, 0.0, 0.0]  # c0, c1, c2
    for k, coeff in enumerate(reversed(coeffs)):
        c[k] = coeff
    return c[0], c[1], c[2]


def write_case(net: Network) -> str:
    """Serialize a network to matrix case-format text.

    Numeric fields are written in shortest round-trip form. Angle limits
    are emitted in degrees (the case-format convention), so they round
    trip to within one ulp rather than bit-exactly; use the JSON format
    when bit-exact fidelity matters.
    """
    out = ["function mpc = case", "mpc.version = '2';"]
    if net.name:
        out.insert(1, f"mpc.casename = '{net.name}';")
    out.append(f"mpc.baseMVA = {net.base_mva!r};")
    b = net.base_mva

    rows = []
    for bus in net.buses:
        bus_type = 3 if bus.is_slack else 1
        rows.append(
            f"\t{bus.id}\t{bus_type}\t{bus.p_load * b!r}\t{bus.q_load * b!r}"
            f"\t{bus.g_shunt * b!r}\t{bus.b_shunt * b!r}\t1\t1\t0"
            f"\t{bus.base_kv!r}\t1\t{bus.v_max!r}\t{bus.v_min!r}"
        )
    out.append("mpc.bus = [\n" + "\n".join(rows) + "\n];")

    rows = []
    for g in net.generators:
        rows.append(
            f"\t{g.bus}\t0\t0\t{g.q_max * b!r}\t{g.q_min * b!r}\t1\t{b!r}\t1"
            f"\t{g.p_max * b!r}\t{g.p_min * b!r}"
        )
    out.append("mpc.gen = [\n" + "\n".join(rows) + "\n];")

    rows = []
    for ln in net.lines:
        rate = 0.0 if math.isinf(ln.s_max) else ln.s_max * b
        ang = math.degrees(ln.angle_max)
        rows.append(
            f"\t{ln.from_bus}\t{ln.to_bus}\t{ln.r!r}\t{ln.x!r}\t{ln.charging!r}"
            f"\t{rate!r}\t0\t0\t{ln.tap!r}\t{math.degrees(ln.shift)!r}\t1"
            f"\t{-ang!r}\t{ang!r}"
        )
    out.append("mpc.branch = [\n" + "\n".join(rows) + "\n];")

    rows = []
    for g in net.generators:
        rows.append(f"\t2\t0\t0\t3\t{g.c2!r}\t{g.c1!r}\t{g.c0!r}")
    out.append("mpc.gencost = [\n" + "\n".join(rows) + "\n];")
    return "\n".join(out) + "\n"


def write_case_json(net: Network) -> str:
    """Serialize a network to the JSON schema (bit-exact round trip)."""
    return network_to_json(net)


def bundled_cases() -> tuple[str, ...]:
    """Names of the IEEE test cases shipped with the package."""
    files = resources.files("gridveil.cases")
    return tuple(sorted(p.name[:-2] for p in files.iterdir() if p.name.endswith(".m")))


def load_case(name: str) -> Network:
    """Load a bundled IEEE test case (for example ``"case39"``)."""
    files = resources.files("gridveil.cases")
    path = files / f"{name}.m"
    try:
        text = path.read_text()
    except FileNotFoundError as exc:
        raise CaseFormatError(f"no bundled case named {name!r}") from exc
    net = parse_case(text)
    return net if net.name else Network(net.base_mva, net.buses, net.lines, net.generators, name)
