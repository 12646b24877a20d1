#!/usr/bin/env python3
"""
Network and generator data model for GridSync Screener

Holds the immutable NetworkCase (buses, branches, loads, generators with their
inertia/damping data), the case-file readers (JSON schema and MATPOWER .m with a
dynamic-data sidecar), structural/dynamic validation, serialization, and the
technology presets used by the frequency-response studies.

Units: every electrical quantity is per-unit on base_mva, angles are radians,
ratings are MVA. Inertia is stored as M = 2H (S / base_mva) / omega_base
(p.u. s^2/rad, H in seconds on the machine rating S) and damping D as p.u.
power on base_mva per rad/s, so the swing equation reads
    M * d(dw)/dt = P* - P_e - D * dw
with dw in rad/s.
"""

import json
import logging
import math
import re
from dataclasses import asdict, dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

from src.core.errors import CaseParseError, CaseValidationError
from src.utils.config import omega_base

logger = logging.getLogger(__name__)


class BusKind(str, Enum):
    SLACK = 'slack'
    PV = 'pv'
    PQ = 'pq'


class Tech(str, Enum):
    SG = 'SG'
    GFM_VSM = 'GFM_VSM'
    GFM_DROOP = 'GFM_DROOP'
    GFL = 'GFL'


@dataclass(frozen=True)
class BusSpec:
    id: int
    kind: BusKind
    voltage_setpoint: Optional[float] = None
    angle_setpoint: float = 0.0
    shunt_g: float = 0.0
    shunt_b: float = 0.0


@dataclass(frozen=True)
class BranchSpec:
    from_bus: int
    to_bus: int
    series_impedance: complex
    shunt_susceptance: float = 0.0


@dataclass(frozen=True)
class GeneratorSpec:
    id: int
    bus: int
    tech: Tech
    inertia_M: float
    damping_D: float
    rating_S: float
    dispatch_P: float
    dispatch_Q: Optional[float] = None

    @property
    def is_dynamic(self) -> bool:
        return self.tech != Tech.GFL

    @property
    def damping_factor(self) -> float:
        """d = D/M (1/s); only meaningful for dynamic generators with M > 0."""
        return self.damping_D / self.inertia_M


@dataclass(frozen=True)
class LoadSpec:
    bus: int
    P: float
    Q: float = 0.0


@dataclass(frozen=True)
class NetworkCase:
    base_mva: float
    base_freq: float
    buses: Tuple[BusSpec, ...]
    branches: Tuple[BranchSpec, ...]
    generators: Tuple[GeneratorSpec, ...]
    loads: Tuple[LoadSpec, ...] = ()
    name: str = ''

    @property
    def bus_ids(self) -> List[int]:
        return [bus.id for bus in self.buses]

    @property
    def n_generators(self) -> int:
        return len(self.generators)

    @property
    def slack_bus(self) -> BusSpec:
        slack = [bus for bus in self.buses if bus.kind == BusKind.SLACK]
        if len(slack) != 1:
            raise CaseValidationError(validate_case(self))
        return slack[0]

    @property
    def dynamic_generators(self) -> List[GeneratorSpec]:
        return [gen for gen in self.generators if gen.is_dynamic]

    @property
    def omega_base(self) -> float:
        return omega_base(self.base_freq)

    def bus(self, bus_id: int) -> BusSpec:
        for bus in self.buses:
            if bus.id == bus_id:
                return bus
        raise KeyError(f"Bus {bus_id} not in case")

    def generator(self, gen_id: int) -> GeneratorSpec:
        for gen in self.generators:
            if gen.id == gen_id:
                return gen
        raise KeyError(f"Generator {gen_id} not in case")

    def gfl_penetration(self) -> float:
        """Share of installed rating (MVA) held by GFL generators."""
        total = sum(gen.rating_S for gen in self.generators)
        if total <= 0:
            return 0.0
        return sum(gen.rating_S for gen in self.generators if gen.tech == Tech.GFL) / total


# ============================================================================
# VALIDATION
# ============================================================================

STRUCTURE = 'structure'
DYNAMICS = 'dynamics'
DISPATCH = 'dispatch'


@dataclass(frozen=True)
class ValidationIssue:
    location: str
    message: str
    kind: str = STRUCTURE


@dataclass(frozen=True)
class ValidationReport:
    issues: Tuple[ValidationIssue, ...] = ()

    @property
    def is_empty(self) -> bool:
        return not self.issues

    @property
    def structural(self) -> List[ValidationIssue]:
        return [issue for issue in self.issues if issue.kind == STRUCTURE]

    def to_dict(self) -> Dict:
        return {
            'valid': self.is_empty,
            'issues': [asdict(issue) for issue in self.issues],
        }


def validate_case(case: NetworkCase) -> ValidationReport:
    """
    Check every invariant of a case and list the violations.

    Returns an empty report iff the case is well-formed. Structural problems
    (bad references, missing slack, degenerate branches) are tagged 'structure';
    inertia/damping problems 'dynamics'; reserve-margin problems 'dispatch'.
    """
    issues: List[ValidationIssue] = []

    def add(location, message, kind=STRUCTURE):
        issues.append(ValidationIssue(location, message, kind))

    if not case.base_mva > 0:
        add('case.base_mva', f"base_mva must be positive, got {case.base_mva}")
    if not case.base_freq > 0:
        add('case.base_freq', f"base_freq must be positive, got {case.base_freq}")

    bus_ids = set()
    for bus in case.buses:
        if bus.id in bus_ids:
            add(f"bus {bus.id}", "duplicate bus id")
        bus_ids.add(bus.id)
        if bus.kind in (BusKind.SLACK, BusKind.PV):
            if bus.voltage_setpoint is None:
                add(f"bus {bus.id}", f"{bus.kind.value} bus has no voltage setpoint")
            elif not bus.voltage_setpoint > 0:
                add(f"bus {bus.id}", f"voltage setpoint must be positive, got {bus.voltage_setpoint}")

    n_slack = sum(1 for bus in case.buses if bus.kind == BusKind.SLACK)
    if n_slack != 1:
        add('case.buses', f"exactly one slack bus required, found {n_slack}")

    for k, branch in enumerate(case.branches):
        where = f"branch {k} ({branch.from_bus}-{branch.to_bus})"
        for end in (branch.from_bus, branch.to_bus):
            if end not in bus_ids:
                add(where, f"endpoint bus {end} does not exist")
        if branch.from_bus == branch.to_bus:
            add(where, "branch connects a bus to itself")
        if not abs(branch.series_impedance) > 0:
            add(where, "series impedance magnitude must be positive")

    gen_ids = set()
    dynamic_buses = {}
    for gen in case.generators:
        where = f"generator {gen.id} (bus {gen.bus})"
        if gen.id in gen_ids:
            add(where, "duplicate generator id")
        gen_ids.add(gen.id)
        if gen.bus not in bus_ids:
            add(where, f"bus {gen.bus} does not exist")
        if gen.inertia_M < 0 or gen.damping_D < 0:
            add(where, "inertia and damping must be non-negative")
        if gen.is_dynamic:
            if not gen.inertia_M > 0:
                add(where, f"{gen.tech.value} generator requires inertia M > 0", DYNAMICS)
            if not gen.damping_D > 0:
                add(where, f"{gen.tech.value} generator requires damping D > 0", DYNAMICS)
            if gen.bus in dynamic_buses:
                add(where, f"shares bus {gen.bus} with dynamic generator {dynamic_buses[gen.bus]}", DYNAMICS)
            dynamic_buses.setdefault(gen.bus, gen.id)
        dispatch_mw = gen.dispatch_P * case.base_mva
        if dispatch_mw < 0 or dispatch_mw > gen.rating_S * (1 + 1e-12):
            add(where, f"dispatch {dispatch_mw:.6g} MW outside [0, rating {gen.rating_S:.6g} MVA]", DISPATCH)

    if case.generators and not case.dynamic_generators:
        add('case.generators', "no dynamic (non-GFL) generator present", DYNAMICS)
    elif not case.generators:
        add('case.generators', "no dynamic (non-GFL) generator present", DYNAMICS)

    for k, load in enumerate(case.loads):
        if load.bus not in bus_ids:
            add(f"load {k} (bus {load.bus})", f"bus {load.bus} does not exist")

    return ValidationReport(tuple(issues))


# ============================================================================
# INERTIA CONVERSION
# ============================================================================

def inertia_h_to_m(H: float, base_freq: float, rating_S: float, base_mva: float) -> float:
    """
    Inertia constant H (s, on the machine rating) to system per-unit M:
        M = 2 H (rating_S / base_mva) / omega_base
    """
    return 2.0 * H * (rating_S / base_mva) / omega_base(base_freq)


def inertia_m_to_h(M: float, base_freq: float, rating_S: float, base_mva: float) -> float:
    """System per-unit M back to H on the machine rating; 0 for an unrated unit."""
    if rating_S <= 0:
        return 0.0
    return M * omega_base(base_freq) * base_mva / (2.0 * rating_S)


def damping_to_system(D: float, rating_S: float, base_mva: float) -> float:
    """Damping on the machine rating to p.u. on base_mva."""
    return D * rating_S / base_mva


def damping_to_machine(D: float, rating_S: float, base_mva: float) -> float:
    """Damping in p.u. on base_mva to the machine rating; 0 for an unrated unit."""
    if rating_S <= 0:
        return 0.0
    return D * base_mva / rating_S


# ============================================================================
# JSON CASE FILES
# ============================================================================

def _read_generator(entry: Dict, position: int, base_freq: float, base_mva: float) -> GeneratorSpec:
    tech = Tech(entry.get('tech', 'SG'))
    if 'inertia_M' in entry:
        M = float(entry['inertia_M'])
    elif 'inertia_H' in entry:
        M = inertia_h_to_m(float(entry['inertia_H']), base_freq, float(entry['rating_S']), base_mva)
    elif tech == Tech.GFL:
        M = 0.0
    else:
        raise KeyError('inertia_M or inertia_H')
    if 'damping_D' in entry:
        D = float(entry['damping_D'])
    elif tech == Tech.GFL:
        D = 0.0
    else:
        raise KeyError('damping_D')
    dispatch_Q = entry.get('dispatch_Q')
    return GeneratorSpec(
        id=int(entry.get('id', position + 1)),
        bus=int(entry['bus']),
        tech=tech,
        inertia_M=M,
        damping_D=D,
        rating_S=float(entry['rating_S']),
        dispatch_P=float(entry.get('dispatch_P', 0.0)),
        dispatch_Q=None if dispatch_Q is None else float(dispatch_Q),
    )


def case_from_dict(data: Dict, path=None) -> NetworkCase:
    """Build a NetworkCase from the documented JSON schema."""
    try:
        base_freq = float(data['base_freq'])
        buses = tuple(
            BusSpec(
                id=int(b['id']),
                kind=BusKind(b['kind']),
                voltage_setpoint=None if b.get('voltage_setpoint') is None else float(b['voltage_setpoint']),
                angle_setpoint=float(b.get('angle_setpoint', 0.0)),
                shunt_g=float(b.get('shunt_g', 0.0)),
                shunt_b=float(b.get('shunt_b', 0.0)),
            )
            for b in data['buses']
        )
        branches = tuple(
            BranchSpec(
                from_bus=int(br['from_bus']),
                to_bus=int(br['to_bus']),
                series_impedance=complex(float(br['r']), float(br['x'])),
                shunt_susceptance=float(br.get('b', 0.0)),
            )
            for br in data['branches']
        )
        generators = tuple(
            _read_generator(g, k, base_freq, float(data['base_mva'])) for k, g in enumerate(data.get('generators', []))
        )
        loads = tuple(
            LoadSpec(bus=int(ld['bus']), P=float(ld['P']), Q=float(ld.get('Q', 0.0)))
            for ld in data.get('loads', [])
        )
        return NetworkCase(
            base_mva=float(data['base_mva']),
            base_freq=base_freq,
            buses=buses,
            branches=branches,
            generators=generators,
            loads=loads,
            name=str(data.get('name', '')),
        )
    except KeyError as e:
        raise CaseParseError(f"Missing required field {e}", path=path)
    except (TypeError, ValueError) as e:
        raise CaseParseError(f"Invalid value: {e}", path=path)


def serialize_case(case: NetworkCase) -> Dict:
    """JSON-ready dict in the documented schema; load_case inverts it exactly."""
    def generator_entry(gen):
        entry = {
            'id': gen.id,
            'bus': gen.bus,
            'tech': gen.tech.value,
            'inertia_M': gen.inertia_M,
            'damping_D': gen.damping_D,
            'rating_S': gen.rating_S,
            'dispatch_P': gen.dispatch_P,
        }
        if gen.dispatch_Q is not None:
            entry['dispatch_Q'] = gen.dispatch_Q
        return entry

    return {
        'name': case.name,
        'base_mva': case.base_mva,
        'base_freq': case.base_freq,
        'buses': [
            {
                'id': bus.id,
                'kind': bus.kind.value,
                'voltage_setpoint': bus.voltage_setpoint,
                'angle_setpoint': bus.angle_setpoint,
                'shunt_g': bus.shunt_g,
                'shunt_b': bus.shunt_b,
            }
            for bus in case.buses
        ],
        'branches': [
            {
                'from_bus': br.from_bus,
                'to_bus': br.to_bus,
                'r': br.series_impedance.real,
                'x': br.series_impedance.imag,
                'b': br.shunt_susceptance,
            }
            for br in case.branches
        ],
        'generators': [generator_entry(gen) for gen in case.generators],
        'loads': [{'bus': ld.bus, 'P': ld.P, 'Q': ld.Q} for ld in case.loads],
    }


def save_case(case: NetworkCase, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(serialize_case(case), f, indent=2)
    return path


def _load_json(path: Path) -> Dict:
    try:
        with open(path, 'r', encoding='utf-8') as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise CaseParseError(f"Malformed JSON: {e.msg}", path=path, line=e.lineno)


# ============================================================================
# MATPOWER CASE FILES
# ============================================================================

# Only these tables are read; everything else in the file is ignored with a warning
MATPOWER_TABLES = ('bus', 'branch', 'gen')

_ASSIGNMENT = re.compile(r'mpc\.(\w+)\s*=')
_TABLE = re.compile(r'mpc\.(\w+)\s*=\s*\[(.*?)\]\s*;?', re.DOTALL)
_BASE_MVA = re.compile(r'mpc\.baseMVA\s*=\s*([-+0-9.eE]+)\s*;')


def _strip_comments(text: str) -> str:
    # keeps line structure so reported line numbers stay valid
    return '\n'.join(line.split('%', 1)[0] for line in text.splitlines())


def parse_matpower(text: str, path=None) -> Dict:
    """
    Read baseMVA and the bus/branch/gen tables of a MATPOWER case file.

    Returns {'baseMVA': float, 'bus': rows, 'branch': rows, 'gen': rows} where
    each row is a (line_number, [floats]) pair.
    """
    text = _strip_comments(text)
    base = _BASE_MVA.search(text)
    if not base:
        raise CaseParseError("mpc.baseMVA not found", path=path)

    tables = {}
    for match in _TABLE.finditer(text):
        name = match.group(1)
        if name not in MATPOWER_TABLES:
            continue
        start_line = text.count('\n', 0, match.start(2)) + 1
        rows = []
        for offset, chunk in enumerate(match.group(2).split('\n')):
            for row_text in chunk.split(';'):
                row_text = row_text.strip()
                if not row_text:
                    continue
                try:
                    rows.append((start_line + offset, [float(v) for v in re.split(r'[\s,]+', row_text) if v]))
                except ValueError:
                    raise CaseParseError(f"Non-numeric entry in mpc.{name}", path=path, line=start_line + offset)
        tables[name] = rows

    for name in sorted(set(_ASSIGNMENT.findall(text))):
        if name not in MATPOWER_TABLES and name not in ('baseMVA', 'version'):
            logger.warning(f"Ignoring mpc.{name} (only baseMVA, bus, branch, gen are read)")

    missing = [name for name in MATPOWER_TABLES if name not in tables]
    if missing:
        raise CaseParseError(f"Missing MATPOWER table(s): {', '.join('mpc.' + m for m in missing)}", path=path)

    tables['baseMVA'] = float(base.group(1))
    return tables


_MATPOWER_BUS_KIND = {1: BusKind.PQ, 2: BusKind.PV, 3: BusKind.SLACK}


def case_from_matpower(tables: Dict, dyn: Dict, path=None) -> NetworkCase:
    """Combine MATPOWER steady-state tables with the dynamic-data sidecar."""
    base_mva = tables['baseMVA']
    base_freq = float(dyn.get('base_freq', 60.0))

    gen_rows = []
    for line, row in tables['gen']:
        if len(row) < 8:
            raise CaseParseError("mpc.gen row needs at least 8 columns", path=path, line=line)
        if row[7] <= 0:
            logger.warning(f"Skipping out-of-service generator at bus {int(row[0])} (line {line})")
            continue
        gen_rows.append((line, row))

    vg_by_bus = {}
    for _, row in gen_rows:
        vg_by_bus.setdefault(int(row[0]), row[5])

    buses, loads = [], []
    for line, row in tables['bus']:
        if len(row) < 9:
            raise CaseParseError("mpc.bus row needs at least 9 columns", path=path, line=line)
        bus_id, bus_type = int(row[0]), int(row[1])
        if bus_type not in _MATPOWER_BUS_KIND:
            logger.warning(f"Bus {bus_id} has type {bus_type}; treating it as PQ")
        kind = _MATPOWER_BUS_KIND.get(bus_type, BusKind.PQ)
        setpoint = None
        if kind != BusKind.PQ:
            setpoint = float(vg_by_bus.get(bus_id, row[7]))
        buses.append(BusSpec(
            id=bus_id,
            kind=kind,
            voltage_setpoint=setpoint,
            angle_setpoint=math.radians(row[8]) if kind == BusKind.SLACK else 0.0,
            shunt_g=row[4] / base_mva,
            shunt_b=row[5] / base_mva,
        ))
        if row[2] != 0 or row[3] != 0:
            loads.append(LoadSpec(bus=bus_id, P=row[2] / base_mva, Q=row[3] / base_mva))

    branches = []
    for line, row in tables['branch']:
        if len(row) < 5:
            raise CaseParseError("mpc.branch row needs at least 5 columns", path=path, line=line)
        if len(row) > 10 and row[10] <= 0:
            logger.warning(f"Skipping out-of-service branch {int(row[0])}-{int(row[1])} (line {line})")
            continue
        tap = row[8] if len(row) > 8 else 0.0
        shift = row[9] if len(row) > 9 else 0.0
        if (tap not in (0.0, 1.0)) or shift != 0.0:
            logger.warning(f"Branch {int(row[0])}-{int(row[1])}: tap/phase shift not modelled, using nominal ratio")
        branches.append(BranchSpec(
            from_bus=int(row[0]),
            to_bus=int(row[1]),
            series_impedance=complex(row[2], row[3]),
            shunt_susceptance=row[4],
        ))

    dyn_gens = dyn.get('generators', [])
    if len(dyn_gens) != len(gen_rows):
        raise CaseParseError(
            f"Sidecar lists {len(dyn_gens)} generators but the case has {len(gen_rows)} in service",
            path=path,
        )

    generators = []
    for k, ((line, row), entry) in enumerate(zip(gen_rows, dyn_gens)):
        bus_id = int(row[0])
        if 'bus' in entry and int(entry['bus']) != bus_id:
            raise CaseParseError(
                f"Sidecar generator {k} is on bus {entry['bus']} but mpc.gen row is on bus {bus_id}",
                path=path, line=line,
            )
        merged = {
            'bus': bus_id,
            'dispatch_P': row[1] / base_mva,
            'rating_S': entry.get('rating_S', row[6] if row[6] > 0 else row[8]),
        }
        merged.update({key: value for key, value in entry.items() if key != 'bus'})
        try:
            generators.append(_read_generator(merged, k, base_freq, base_mva))
        except KeyError as e:
            raise CaseParseError(f"Sidecar generator {k} missing field {e}", path=path)
        except (TypeError, ValueError) as e:
            raise CaseParseError(f"Sidecar generator {k}: {e}", path=path)

    return NetworkCase(
        base_mva=base_mva,
        base_freq=base_freq,
        buses=tuple(buses),
        branches=tuple(branches),
        generators=tuple(generators),
        loads=tuple(loads),
        name=str(dyn.get('name', Path(path).stem if path else '')),
    )


# ============================================================================
# LOADING
# ============================================================================

def load_case(path: Union[str, Path], format: Optional[str] = None,
              dyn: Optional[Union[str, Path]] = None, strict: bool = True) -> NetworkCase:
    """
    Load and validate a case file.

    Args:
        path: case file
        format: 'json' or 'matpower_m' (inferred from the suffix if omitted)
        dyn: dynamic-data sidecar (required for matpower_m)
        strict: raise on structural issues (the validate command turns this off)

    Raises:
        CaseParseError: malformed file or missing fields
        CaseValidationError: structural invariant violated
    """
    path = Path(path)
    if not path.exists():
        raise CaseParseError("Case file not found", path=path)
    if format is None:
        format = 'matpower_m' if path.suffix == '.m' else 'json'

    if format == 'json':
        case = case_from_dict(_load_json(path), path=path)
    elif format == 'matpower_m':
        if dyn is None:
            raise CaseParseError("MATPOWER cases need a dynamic-data sidecar (--dyn)", path=path)
        dyn_path = Path(dyn)
        if not dyn_path.exists():
            raise CaseParseError("Dynamic-data sidecar not found", path=dyn_path)
        tables = parse_matpower(path.read_text(encoding='utf-8'), path=path)
        case = case_from_matpower(tables, _load_json(dyn_path), path=path)
    else:
        raise CaseParseError(f"Unknown case format '{format}'", path=path)

    if not strict:
        return case

    report = validate_case(case)
    if report.structural:
        raise CaseValidationError(ValidationReport(tuple(report.structural)))
    for issue in report.issues:
        logger.warning(f"{path.name}: {issue.location}: {issue.message}")

    logger.info(f"Loaded {path.name}: {len(case.buses)} buses, {len(case.branches)} branches, "
                f"{len(case.generators)} generators")
    return case


# ============================================================================
# CASE TRANSFORMS
# ============================================================================

def retype_generator(case: NetworkCase, gen_id: int, tech: Union[Tech, str]) -> NetworkCase:
    """Change one generator's technology; GFL generators store M = D = 0."""
    tech = Tech(tech)
    case.generator(gen_id)
    generators = []
    for gen in case.generators:
        if gen.id == gen_id:
            if tech == Tech.GFL:
                gen = replace(gen, tech=tech, inertia_M=0.0, damping_D=0.0)
            else:
                gen = replace(gen, tech=tech)
        generators.append(gen)
    return replace(case, generators=tuple(generators))


def scale_dynamics(case: NetworkCase, inertia_factor: float = 1.0, damping_factor: float = 1.0,
                   gen_ids: Optional[Sequence[int]] = None) -> NetworkCase:
    """Scale M and D of the selected (default: all dynamic) generators."""
    selected = set(gen_ids) if gen_ids is not None else None
    generators = []
    for gen in case.generators:
        if gen.is_dynamic and (selected is None or gen.id in selected):
            gen = replace(gen, inertia_M=gen.inertia_M * inertia_factor,
                          damping_D=gen.damping_D * damping_factor)
        generators.append(gen)
    return replace(case, generators=tuple(generators))


# preset: (technology or None to keep, inertia factor, damping factor)
TECH_PRESETS = {
    'all_sg': (Tech.SG, 1.0, 1.0),
    'all_gfm_vsm': (Tech.GFM_VSM, 1.0, 1.0),
    'all_gfm_droop': (Tech.GFM_DROOP, 0.01, 2.0),
    'gfl_90': (None, 0.1, 0.1),
    'all_gfl': (Tech.GFL, 0.0, 0.0),
}


def apply_tech_preset(case: NetworkCase, preset: str) -> NetworkCase:
    """
    Re-express every generator under one of the frequency-response presets.

    The case's own M, D are read as synchronous-machine values; droop GFM keeps
    1% of the inertia with twice the damping, 'gfl_90' leaves 10% of each
    plant's inertia and damping in service.
    """
    if preset not in TECH_PRESETS:
        raise ValueError(f"Unknown preset '{preset}' (choose from {', '.join(TECH_PRESETS)})")
    tech, m_factor, d_factor = TECH_PRESETS[preset]
    generators = []
    for gen in case.generators:
        if tech == Tech.GFL:
            gen = replace(gen, tech=Tech.GFL, inertia_M=0.0, damping_D=0.0)
        elif gen.is_dynamic:
            gen = replace(gen, tech=tech or gen.tech,
                          inertia_M=gen.inertia_M * m_factor,
                          damping_D=gen.damping_D * d_factor)
        generators.append(gen)
    return replace(case, generators=tuple(generators))


def scale_loads(case: NetworkCase, factors: Union[float, Sequence[float]],
                scale_dispatch: bool = True) -> NetworkCase:
    """
    Scale loads by one global factor or one factor per load.

    With scale_dispatch, non-slack generator dispatch follows the mean factor
    so the slack generator does not absorb the whole change.
    """
    if isinstance(factors, (int, float)):
        factors = [float(factors)] * len(case.loads)
    if len(factors) != len(case.loads):
        raise ValueError(f"Expected {len(case.loads)} load factors, got {len(factors)}")
    loads = tuple(replace(ld, P=ld.P * f, Q=ld.Q * f) for ld, f in zip(case.loads, factors))
    generators = case.generators
    if scale_dispatch and factors:
        mean_factor = sum(factors) / len(factors)
        slack_id = case.slack_bus.id
        generators = tuple(
            gen if gen.bus == slack_id else replace(gen, dispatch_P=gen.dispatch_P * mean_factor)
            for gen in case.generators
        )
    return replace(case, loads=loads, generators=generators)
