"""Ground-truth scenario generator and the report/truth file formats."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

VEHICLE_TYPES = ("tank", "apc", "truck")
REPORTED_TYPES = VEHICLE_TYPES + ("unknown",)
ACTIVITY_READINGS = {"combatOps": "moving", "refit": "stationary"}
CO_SUBTYPES = ("armorCo", "mechCo", "teamCo")
CO_ACTIVITIES = ("combatOps", "refit")
PLATOON_SUBTYPES = ("armor", "mech", "armorHQ", "mechHQ")

ROSTERS = {
    "armor": ("tank",) * 4,
    "mech": ("apc",) * 4,
    "armorHQ": ("tank", "tank", "apc", "truck", "truck"),
    "mechHQ": ("apc", "apc", "apc", "truck", "truck", "truck"),
}

CSV_HEADER = ("report_id", "time_s", "x_m", "y_m", "vehicle_type", "type_conf", "activity", "activity_conf")


class ScenarioFormatError(ValueError):
    """Malformed report CSV or truth file; the message names the line."""


@dataclass(frozen=True)
class ScenarioConfig:
    """Defaults give five companies (~80 vehicles) and ~90 reports.

    ``noise`` is the per-vehicle confusion rate for both the type and the
    activity reading.  ``clutter_rate`` is the expected number of false
    reports per scan per 80 true vehicles.
    """

    n_companies: int = 5
    noise: float = 0.1
    clutter_rate: float = 14.0
    miss_rate: float = 0.1
    seed: int = 0
    field_extent: float = 30000.0
    spread_radius: float = 100.0
    ring_radius: float = 1000.0
    ring_jitter: float = 100.0
    min_separation: float = 6000.0
    p_three_maneuver: float = 0.7
    n_scans: int = 1
    scan_interval: float = 60.0

    def __post_init__(self):
        if self.n_companies < 0:
            raise ValueError("n_companies must be >= 0")
        for name in ("noise", "miss_rate"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise ValueError(f"{name} must be in [0, 1), got {v}")
        if not 0.0 <= self.p_three_maneuver <= 1.0:
            raise ValueError("p_three_maneuver must be a probability")
        if self.clutter_rate < 0:
            raise ValueError("clutter_rate must be >= 0")
        if self.n_scans < 1:
            raise ValueError("n_scans must be >= 1")
        if self.spread_radius <= 0 or self.field_extent <= 0:
            raise ValueError("spread_radius and field_extent must be > 0")


@dataclass(frozen=True)
class Vehicle:
    vehicle_id: str
    vehicle_type: str
    x: float
    y: float


@dataclass(frozen=True)
class Platoon:
    platoon_id: str
    company_id: str
    subtype: str
    n_vehicles: int
    x: float = math.nan
    y: float = math.nan
    vehicles: tuple[Vehicle, ...] = ()


@dataclass(frozen=True)
class Company:
    company_id: str
    subtype: str
    activity: str
    x: float
    y: float


@dataclass
class GroundTruth:
    """Companies and platoons; ``star`` optionally carries instance star
    beliefs when the same structure describes an estimate."""

    companies: list[Company] = field(default_factory=list)
    platoons: list[Platoon] = field(default_factory=list)
    star: dict[str, float] = field(default_factory=dict)

    def platoons_of(self, company_id: str) -> list[Platoon]:
        return [p for p in self.platoons if p.company_id == company_id]

    @property
    def n_vehicles(self) -> int:
        return sum(p.n_vehicles for p in self.platoons)


@dataclass(frozen=True)
class VehicleReport:
    report_id: int
    time_s: float
    x: float
    y: float
    vehicle_type: str
    type_conf: float
    activity: str
    activity_conf: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.time_s)):
            raise ValueError(f"report {self.report_id}: coordinates must be finite")
        if not (0.0 <= self.type_conf <= 1.0 and 0.0 <= self.activity_conf <= 1.0):
            raise ValueError(f"report {self.report_id}: confidences must lie in [0, 1]")
        if self.vehicle_type not in REPORTED_TYPES:
            raise ValueError(f"report {self.report_id}: unknown vehicle type {self.vehicle_type!r}")
        if self.activity not in ACTIVITY_READINGS.values():
            raise ValueError(f"report {self.report_id}: unknown activity {self.activity!r}")

    @property
    def position(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass
class Scenario:
    truth: GroundTruth
    reports: list[VehicleReport]
    provenance: dict[int, str | None]  # report id -> vehicle id, None for clutter


def company_subtype_for(platoon_subtypes) -> str:
    kinds = {s.replace("HQ", "") for s in platoon_subtypes}
    if kinds == {"armor"}:
        return "armorCo"
    if kinds == {"mech"}:
        return "mechCo"
    return "teamCo"


def _place_companies(rng: np.random.Generator, cfg: ScenarioConfig) -> list[tuple[float, float]]:
    margin = cfg.ring_radius + cfg.ring_jitter + cfg.spread_radius
    lo, hi = margin, cfg.field_extent - margin
    if hi <= lo and cfg.n_companies:
        raise ValueError("field too small for company layout")
    out: list[tuple[float, float]] = []
    for _ in range(cfg.n_companies):
        for _attempt in range(10000):
            x, y = rng.uniform(lo, hi, size=2)
            if all(math.hypot(x - a, y - b) >= cfg.min_separation for a, b in out):
                out.append((float(x), float(y)))
                break
        else:
            raise ValueError("could not place companies at the requested separation")
    return out


def _company_platoons(rng: np.random.Generator, subtype: str, n_maneuver: int) -> list[str]:
    if subtype == "armorCo":
        return ["armor"] * n_maneuver + ["armorHQ"]
    if subtype == "mechCo":
        return ["mech"] * n_maneuver + ["mechHQ"]
    man = ["armor", "mech"] + [str(rng.choice(["armor", "mech"])) for _ in range(n_maneuver - 2)]
    rng.shuffle(man)
    return man + [str(rng.choice(["armorHQ", "mechHQ"]))]


def generate_scenario(cfg: ScenarioConfig) -> Scenario:
    rng = np.random.default_rng(cfg.seed)
    truth = GroundTruth()
    centres = _place_companies(rng, cfg)
    units = 0
    vehicles: list[tuple[Vehicle, str]] = []  # with the company activity
    for k, (cx, cy) in enumerate(centres, 1):
        subtype = CO_SUBTYPES[int(rng.integers(3))]
        activity = CO_ACTIVITIES[int(rng.integers(2))]
        cid = f"p{k}"
        truth.companies.append(Company(cid, subtype, activity, cx, cy))
        n_man = 3 if rng.random() < cfg.p_three_maneuver else 2
        kinds = _company_platoons(rng, subtype, n_man)
        offset = rng.uniform(0, 2 * math.pi)
        for j, kind in enumerate(kinds):
            units += 1
            if kind.endswith("HQ"):
                px, py = cx, cy
            else:
                ang = offset + 2 * math.pi * j / n_man
                rad = cfg.ring_radius + rng.uniform(-cfg.ring_jitter, cfg.ring_jitter)
                px, py = cx + rad * math.cos(ang), cy + rad * math.sin(ang)
            vs = []
            for vtype in ROSTERS[kind]:
                r = cfg.spread_radius * math.sqrt(rng.random())
                a = rng.uniform(0, 2 * math.pi)
                v = Vehicle(f"v{len(vehicles) + 1}", vtype, px + r * math.cos(a), py + r * math.sin(a))
                vehicles.append((v, activity))
                vs.append(v)
            truth.platoons.append(Platoon(f"u{units}", cid, kind, len(vs), px, py, tuple(vs)))

    raw: list[tuple[float, tuple, str | None]] = []
    conf = round(1.0 - cfg.noise, 3)
    for scan in range(cfg.n_scans):
        t = scan * cfg.scan_interval
        for v, act in vehicles:
            if rng.random() < cfg.miss_rate:
                continue
            vtype = v.vehicle_type
            if rng.random() < cfg.noise:
                others = [x for x in VEHICLE_TYPES if x != vtype]
                vtype = others[int(rng.integers(len(others)))]
            reading = ACTIVITY_READINGS[act]
            if rng.random() < cfg.noise:
                reading = "stationary" if reading == "moving" else "moving"
            raw.append((t, (v.x, v.y, vtype, reading), v.vehicle_id))
        n_clutter = int(rng.poisson(cfg.clutter_rate * len(vehicles) / 80.0)) if vehicles else 0
        for _ in range(n_clutter):
            x, y = rng.uniform(0, cfg.field_extent, size=2)
            vtype = VEHICLE_TYPES[int(rng.integers(3))]
            reading = ("moving", "stationary")[int(rng.integers(2))]
            raw.append((t, (float(x), float(y), vtype, reading), None))
    # shuffle within each scan so clutter is not always last, then number by time
    rank = rng.permutation(len(raw))
    raw = [raw[i] for i in sorted(range(len(raw)), key=lambda i: (raw[i][0], rank[i]))]
    reports, prov = [], {}
    for rid, (t, (x, y, vtype, reading), src) in enumerate(raw, 1):
        reports.append(VehicleReport(rid, t, round(x, 1), round(y, 1), vtype, conf, reading, conf))
        prov[rid] = src
    return Scenario(truth, reports, prov)


# -- report CSV ----------------------------------------------------------------------

def dumps_reports(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in reports:
        w.writerow([r.report_id, f"{r.time_s:.1f}", f"{r.x:.1f}", f"{r.y:.1f}", r.vehicle_type,
                    f"{r.type_conf:.3f}", r.activity, f"{r.activity_conf:.3f}"])
    return buf.getvalue()


def loads_reports(text: str) -> list[VehicleReport]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != CSV_HEADER:
        raise ScenarioFormatError("line 1: expected header " + ",".join(CSV_HEADER))
    out = []
    seen = set()
    for n, row in enumerate(rows[1:], 2):
        if not row:
            continue
        if len(row) != len(CSV_HEADER):
            raise ScenarioFormatError(f"line {n}: expected {len(CSV_HEADER)} fields, got {len(row)}")
        try:
            rep = VehicleReport(int(row[0]), float(row[1]), float(row[2]), float(row[3]), row[4],
                                float(row[5]), row[6], float(row[7]))
        except ValueError as exc:
            raise ScenarioFormatError(f"line {n}: {exc}") from None
        if rep.report_id in seen:
            raise ScenarioFormatError(f"line {n}: duplicate report id {rep.report_id}")
        seen.add(rep.report_id)
        out.append(rep)
    return out


def write_reports(path, reports) -> None:
    Path(path).write_text(dumps_reports(reports), encoding="utf-8")


def read_reports(path) -> list[VehicleReport]:
    return loads_reports(Path(path).read_text(encoding="utf-8"))


# -- truth / estimate file -----------------------------------------------------------

def dumps_truth(truth: GroundTruth) -> str:
    lines = [f"company {c.company_id} {c.subtype} {c.activity} {c.x:.1f} {c.y:.1f}" for c in truth.companies]
    lines += [f"platoon {p.platoon_id} {p.company_id} {p.subtype} {p.n_vehicles}" for p in truth.platoons]
    lines += [f"star {i} {p:.9f}" for i, p in sorted(truth.star.items())]
    return "".join(line + "\n" for line in lines)


def loads_truth(text: str) -> GroundTruth:
    out = GroundTruth()
    for n, line in enumerate(text.splitlines(), 1):
        parts = line.split()
        if not parts or parts[0].startswith("#"):
            continue
        try:
            if parts[0] == "company" and len(parts) == 6:
                if parts[2] not in CO_SUBTYPES or parts[3] not in CO_ACTIVITIES:
                    raise ValueError(f"bad company subtype/activity {parts[2]!r}/{parts[3]!r}")
                out.companies.append(Company(parts[1], parts[2], parts[3], float(parts[4]), float(parts[5])))
            elif parts[0] == "platoon" and len(parts) == 5:
                if parts[3] not in PLATOON_SUBTYPES:
                    raise ValueError(f"bad platoon subtype {parts[3]!r}")
                out.platoons.append(Platoon(parts[1], parts[2], parts[3], int(parts[4])))
            elif parts[0] == "star" and len(parts) == 3:
                out.star[parts[1]] = float(parts[2])
            else:
                raise ValueError(f"unrecognized record {parts[0]!r} with {len(parts) - 1} fields")
        except ValueError as exc:
            raise ScenarioFormatError(f"line {n}: {exc}") from None
    known = {c.company_id for c in out.companies}
    for p in out.platoons:
        if p.company_id not in known:
            raise ScenarioFormatError(f"platoon {p.platoon_id} names unknown company {p.company_id}")
    return out


def write_truth(path, truth: GroundTruth) -> None:
    Path(path).write_text(dumps_truth(truth), encoding="utf-8")


def read_truth(path) -> GroundTruth:
    return loads_truth(Path(path).read_text(encoding="utf-8"))
