"""File formats: JSON fleet files, CSV signal files, CSV result export.

Fleet file (JSON, UTF-8)::

    {
      "units": {"power": "kW", "energy": "kWh"},
      "devices": [
        {"id": "a1", "p_max": 4.0, "energy": 108.0},
        {"id": "a2", "p_max": 18.0, "energy": 36.0}
      ]
    }

Signal file (CSV, UTF-8; '#' starts a comment, blank lines ignored)::

    units,h,kW
    0,22
    2,4
    3,

The first data row names the time and power units.  Each following row is
(segment start, requested power); the final row carries the horizon and an
empty value.  Starts must begin at 0 and increase strictly.

Exported CSVs use '.' as the decimal separator regardless of locale and
end with a newline.  Rates in a trajectory CSV apply to the interval
starting at that row's time; the last row repeats the final rates so
steps-post plots close at the horizon.
"""

from __future__ import annotations

import csv
import json
from decimal import Decimal, InvalidOperation, localcontext
from fractions import Fraction
from typing import TextIO

from .dispatch import Trajectory, max_available_power
from .epcurve import EPCurve
from .errors import FleetFileError, InvalidDevice, SignalFileError
from .model import Device, FleetState, StepSignal, make_fleet

POWER_UNITS = {"W": 1.0, "kW": 1e3, "MW": 1e6}
ENERGY_UNITS = {"J": 1.0, "kWh": 3.6e6, "MWh": 3.6e9}
TIME_UNITS = {"s": 1.0, "min": 60.0, "h": 3600.0}

_CANONICAL = {name.lower(): name for name in (*POWER_UNITS, *ENERGY_UNITS, *TIME_UNITS)}


def _unit_factor(name: object, table: dict[str, float], kind: str) -> tuple[str, float]:
    """Resolve a unit name case-insensitively; returns (canonical, SI factor)."""
    if not isinstance(name, str):
        raise ValueError(f"{kind} unit must be a string, got {name!r}")
    canon = _CANONICAL.get(name.strip().lower())
    if canon is None or canon not in table:
        raise ValueError(f"unknown {kind} unit {name!r}; expected one of {sorted(table)}")
    return canon, table[canon]


def _si_value(number, factor: float) -> float:
    """Convert a parsed file number to SI with a single rounding.

    Every supported unit factor is an exact binary64 integer, so the
    product of the file's decimal literal and the factor has one exact
    rational value; rounding that once (instead of float(text) * factor,
    which rounds twice) is what makes write/read cycles lossless.
    """
    return float(Fraction(number) * int(factor))


def _file_number(v_si: float, factor: float) -> str:
    """Decimal literal in file units that _si_value maps back to v_si.

    25 significant digits of the exact quotient leave the product within
    5e-25 relative of v_si, far inside half an ulp, so the reader's
    single rounding always lands on v_si. Shorter forms (repr of the
    rounded quotient) can miss by an ulp after multiplication.
    """
    if v_si == 0:
        return "0"
    with localcontext() as ctx:
        ctx.prec = 25
        q = Decimal(v_si) / int(factor)
    q = q.normalize()
    exponent = q.adjusted()
    if -7 < exponent < 22:
        return format(q, "f")
    return str(q)


def read_fleet(path: str, tolerance: float | None = None) -> FleetState:
    """Parse a fleet JSON file into an SI FleetState."""
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh, parse_float=Decimal)
    except OSError as exc:
        raise FleetFileError(str(exc), path=path) from exc
    except json.JSONDecodeError as exc:
        raise FleetFileError(f"invalid JSON: {exc.msg}", path=path, line=exc.lineno) from exc

    if not isinstance(raw, dict):
        raise FleetFileError("top level must be a JSON object", path=path)
    units = raw.get("units")
    if not isinstance(units, dict):
        raise FleetFileError('missing "units" object', path=path)
    try:
        _, p_fac = _unit_factor(units.get("power"), POWER_UNITS, "power")
        _, e_fac = _unit_factor(units.get("energy"), ENERGY_UNITS, "energy")
    except ValueError as exc:
        raise FleetFileError(str(exc), path=path) from exc

    rows = raw.get("devices")
    if not isinstance(rows, list):
        raise FleetFileError('missing "devices" list', path=path)
    devices = []
    for k, row in enumerate(rows):
        if not isinstance(row, dict):
            raise FleetFileError(f"devices[{k}] must be an object", path=path)
        try:
            dev_id = row["id"]
            p_max = row["p_max"]
            energy = row["energy"]
        except KeyError as exc:
            raise FleetFileError(f"devices[{k}] missing key {exc.args[0]!r}", path=path) from exc
        if not isinstance(p_max, (int, Decimal)) or isinstance(p_max, bool):
            raise FleetFileError(f"devices[{k}].p_max must be a finite number", path=path)
        if not isinstance(energy, (int, Decimal)) or isinstance(energy, bool):
            raise FleetFileError(f"devices[{k}].energy must be a finite number", path=path)
        try:
            devices.append(Device(dev_id, _si_value(p_max, p_fac), _si_value(energy, e_fac)))
        except InvalidDevice as exc:
            raise FleetFileError(f"devices[{k}]: {exc}", path=path) from exc
    if not devices:
        raise FleetFileError('"devices" list is empty', path=path)
    if len({d.id for d in devices}) != len(devices):
        raise FleetFileError("device ids must be unique", path=path)

    if tolerance is None:
        return make_fleet(devices)
    return make_fleet(devices, tolerance=tolerance)


def write_fleet(path: str, fleet: FleetState, power_unit: str = "kW",
                energy_unit: str = "kWh") -> None:
    """Write a fleet JSON file; read_fleet after write_fleet rebuilds the
    exact same devices.

    Emitted by hand because json.dump cannot place the high-precision
    decimal literals exact round-trips need (see _file_number).
    """
    p_name, p_fac = _unit_factor(power_unit, POWER_UNITS, "power")
    e_name, e_fac = _unit_factor(energy_unit, ENERGY_UNITS, "energy")
    rows = ",\n".join(
        f'    {{"id": {json.dumps(d.id)},'
        f' "p_max": {_file_number(d.p_max, p_fac)},'
        f' "energy": {_file_number(d.energy, e_fac)}}}'
        for d in fleet.devices)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write('{\n'
                 f'  "units": {{"power": {json.dumps(p_name)},'
                 f' "energy": {json.dumps(e_name)}}},\n'
                 '  "devices": [\n'
                 f'{rows}\n'
                 '  ]\n'
                 '}\n')


def _parse_number(text: str) -> Decimal:
    try:
        d = Decimal(text)
    except InvalidOperation:
        raise ValueError(f"not a number: {text!r}") from None
    if not d.is_finite():
        raise ValueError(f"not finite: {text!r}")
    return d


def _signal_rows(path: str):
    """Yield (line_number, cells) for data rows; comments and blanks skipped."""
    try:
        fh = open(path, encoding="utf-8", newline="")
    except OSError as exc:
        raise SignalFileError(str(exc), path=path) from exc
    with fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            cells = [c.strip() for c in row]
            while cells and cells[-1] == "":
                if len(cells) == 1:
                    break
                # keep a single trailing empty cell: it marks the horizon row
                if len(cells) == 2 and cells[0] != "":
                    break
                cells.pop()
            if not cells or cells == [""] or cells[0].startswith("#"):
                continue
            yield lineno, cells


def read_signal(path: str) -> StepSignal:
    """Parse a signal CSV file into an SI StepSignal."""
    t_fac = p_fac = None
    starts: list[float] = []
    values: list[float] = []
    horizon = None
    horizon_line = None
    for lineno, cells in _signal_rows(path):
        if t_fac is None:
            if cells[0].lower() != "units" or len(cells) != 3:
                raise SignalFileError(
                    "first data row must be units,<time_unit>,<power_unit>",
                    path=path, line=lineno)
            try:
                _, t_fac = _unit_factor(cells[1], TIME_UNITS, "time")
                _, p_fac = _unit_factor(cells[2], POWER_UNITS, "power")
            except ValueError as exc:
                raise SignalFileError(str(exc), path=path, line=lineno) from exc
            continue
        if horizon is not None:
            raise SignalFileError(
                f"data after the horizon row (line {horizon_line})", path=path, line=lineno)
        if len(cells) > 2:
            raise SignalFileError("expected <t>,<value> or <horizon>,", path=path, line=lineno)
        try:
            t = _si_value(_parse_number(cells[0]), t_fac)
        except ValueError:
            raise SignalFileError(f"bad time {cells[0]!r}", path=path, line=lineno) from None
        if len(cells) == 1 or cells[1] == "":
            horizon, horizon_line = t, lineno
            continue
        try:
            v = _si_value(_parse_number(cells[1]), p_fac)
        except ValueError:
            raise SignalFileError(f"bad value {cells[1]!r}", path=path, line=lineno) from None
        if v < 0:
            raise SignalFileError(f"value must be >= 0, got {cells[1]}",
                                  path=path, line=lineno)
        starts.append(t)
        values.append(v)

    if t_fac is None:
        raise SignalFileError("empty signal file", path=path)
    if horizon is None:
        raise SignalFileError("missing final horizon row (time with empty value)", path=path)
    if not starts and horizon != 0:
        raise SignalFileError("no segments before the horizon row", path=path)
    try:
        return StepSignal(tuple(starts), tuple(values), horizon)
    except Exception as exc:
        raise SignalFileError(str(exc), path=path) from exc


def write_signal(path: str, signal: StepSignal, time_unit: str = "h",
                 power_unit: str = "kW") -> None:
    """Write a signal CSV file; read_signal(write_signal(s)) rebuilds s."""
    t_name, t_fac = _unit_factor(time_unit, TIME_UNITS, "time")
    p_name, p_fac = _unit_factor(power_unit, POWER_UNITS, "power")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["units", t_name, p_name])
        for t, v in zip(signal.breakpoints, signal.values):
            w.writerow([_file_number(t, t_fac), _file_number(v, p_fac)])
        w.writerow([_file_number(signal.horizon, t_fac), ""])


def write_curve(out: TextIO, curve: EPCurve, power_unit: str = "kW",
                energy_unit: str = "kWh") -> None:
    """Write curve breakpoints as CSV columns p,E in the given units."""
    p_name, p_fac = _unit_factor(power_unit, POWER_UNITS, "power")
    e_name, e_fac = _unit_factor(energy_unit, ENERGY_UNITS, "energy")
    out.write(f"# units: power={p_name} energy={e_name}\n")
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["p", "E"])
    for p, e in zip(curve.p, curve.E):
        w.writerow([_file_number(float(p), p_fac), _file_number(float(e), e_fac)])


def write_trajectory(out: TextIO, traj: Trajectory, time_unit: str = "h",
                     power_unit: str = "kW") -> None:
    """Write per-event rows: t, available_power, delivered, deficit."""
    t_name, t_fac = _unit_factor(time_unit, TIME_UNITS, "time")
    p_name, p_fac = _unit_factor(power_unit, POWER_UNITS, "power")
    out.write(f"# units: time={t_name} power={p_name}\n")
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["t", "available_power", "delivered", "deficit"])
    n = len(traj.delivered)
    for i, t in enumerate(traj.event_times):
        j = min(i, n - 1) if n else 0
        delivered = traj.delivered[j] if n else 0.0
        deficit = traj.deficits[j] if n else 0.0
        w.writerow([
            _file_number(t, t_fac),
            _file_number(max_available_power(traj.states[i]), p_fac),
            _file_number(float(delivered), p_fac),
            _file_number(float(deficit), p_fac),
        ])
