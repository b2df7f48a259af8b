"""Domain types and file formats shared by the whole pipeline.

Traces are JSON-lines files: an optional meta header, one object per sample,
and an optional ground-truth trailer.  Metro networks are single JSON
documents describing one line; the reverse direction is derived, never stored.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

GRAVITY = 9.81

ALPHA_RANGE = (-90.0, 90.0)
MIN_DWELL = 20.0


class TraceFormatError(ValueError):
    """Raised when a trace file violates the JSON-lines contract."""


class NetworkFormatError(ValueError):
    """Raised when a network file violates the network schema."""


# --- sample-level types ---------------------------------------------------


@dataclass(frozen=True)
class SensorSample:
    """One accelerometer reading: phone-frame acc plus orientation in degrees."""

    t: float
    acc: tuple[float, float, float]
    orient: tuple[float, float, float]  # (alpha, beta, gamma) degrees


@dataclass(frozen=True)
class EnuSample:
    """One earth-frame reading: east/north/vertical components and HRA."""

    t: float
    eca: float
    nca: float
    vca: float
    hra: float


@dataclass(frozen=True)
class TruthRange:
    start: float
    end: float
    label: str


@dataclass(frozen=True)
class Segment:
    """Half-open sample index range of one candidate station interval."""

    start: int
    end: int
    true_interval: int | None = None

    def __post_init__(self):
        if self.start >= self.end:
            raise ValueError(f"empty segment [{self.start}, {self.end})")

    @property
    def length(self) -> int:
        return self.end - self.start


# --- network ----------------------------------------------------------------


@dataclass(frozen=True)
class StationInterval:
    """Directed track piece between two adjacent stations."""

    id: int
    from_station: str
    to_station: str
    min_duration: float
    max_duration: float
    reverse: bool = False

    def __post_init__(self):
        if not (0 < self.min_duration <= self.max_duration):
            raise NetworkFormatError(
                f"interval {self.id}: bad duration bounds "
                f"[{self.min_duration}, {self.max_duration}]"
            )

    @property
    def nominal_duration(self) -> float:
        return 0.5 * (self.min_duration + self.max_duration)


@dataclass(frozen=True)
class MetroNetwork:
    """One metro line with both travel directions materialized.

    Directed interval ids run 0..k-1 forward and k..2k-1 reverse, where the
    reverse id k+i is the forward interval k-1-i ridden the other way.  Ids
    inside one direction follow ride order, so a trip always occupies a run
    of consecutive directed ids.
    """

    name: str
    sample_rate: float
    intervals: tuple[StationInterval, ...]
    dwell_min: float
    dwell_max: float

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise NetworkFormatError("sample_rate must be positive")
        if not (MIN_DWELL <= self.dwell_min <= self.dwell_max):
            raise NetworkFormatError(
                f"dwell bounds [{self.dwell_min}, {self.dwell_max}] invalid "
                f"(minimum stop time is {MIN_DWELL} s)"
            )
        fwd = [iv for iv in self.intervals if not iv.reverse]
        rev = [iv for iv in self.intervals if iv.reverse]
        if len(fwd) != len(rev) or not fwd:
            raise NetworkFormatError("forward and reverse lists must match and be non-empty")
        k = len(fwd)
        if [iv.id for iv in self.intervals] != list(range(2 * k)):
            raise NetworkFormatError("directed interval ids must be 0..2k-1 in order")

    @property
    def num_intervals(self) -> int:
        """Number of station intervals on the line (direction-free count)."""
        return len(self.intervals) // 2

    @property
    def num_directed(self) -> int:
        return len(self.intervals)

    @property
    def forward(self) -> tuple[StationInterval, ...]:
        return self.intervals[: self.num_intervals]

    @property
    def reverse(self) -> tuple[StationInterval, ...]:
        return self.intervals[self.num_intervals :]

    def undirected(self, gid: int) -> int:
        """Map a directed interval id onto its track segment id."""
        k = self.num_intervals
        return gid if gid < k else 2 * k - 1 - gid

    def directed(self, uid: int, direction: str) -> int:
        k = self.num_intervals
        if direction == "forward":
            return uid
        return 2 * k - 1 - uid

    def interval(self, gid: int) -> StationInterval:
        return self.intervals[gid]

    def nominal_duration(self, uid: int) -> float:
        return self.forward[uid].nominal_duration

    @property
    def min_interval_duration(self) -> float:
        return min(iv.min_duration for iv in self.forward)

    @property
    def max_interval_duration(self) -> float:
        return max(iv.max_duration for iv in self.forward)

    @property
    def dwell_nominal(self) -> float:
        return 0.5 * (self.dwell_min + self.dwell_max)


# --- trace ------------------------------------------------------------------


@dataclass
class Trace:
    """A sensor recording: timestamps, phone-frame acc, orientation angles.

    Orientation is kept in degrees end to end so that file round-trips are
    exact; the coordinate module converts when it builds rotation matrices.
    """

    device_id: str
    sample_rate: float
    t: np.ndarray  # (n,) seconds
    acc: np.ndarray  # (n, 3) m/s^2, phone frame
    orient: np.ndarray  # (n, 3) degrees (alpha, beta, gamma)
    truth: tuple[TruthRange, ...] = ()

    @property
    def n_samples(self) -> int:
        return len(self.t)

    @property
    def duration(self) -> float:
        return float(self.t[-1] - self.t[0]) if self.n_samples > 1 else 0.0

    def sample(self, i: int) -> SensorSample:
        return SensorSample(float(self.t[i]), tuple(self.acc[i]), tuple(self.orient[i]))

    def truth_ranges(self, prefix: str = "") -> list[TruthRange]:
        return [r for r in self.truth if r.label.startswith(prefix)]

    def validate(self) -> None:
        n = self.n_samples
        if self.acc.shape != (n, 3) or self.orient.shape != (n, 3):
            raise TraceFormatError("acc and orient must be (n, 3) arrays")
        if n > 1:
            dt = np.diff(self.t)
            if np.any(dt <= 0):
                bad = int(np.argmax(dt <= 0)) + 2
                raise TraceFormatError(f"timestamps not strictly increasing at line offset {bad}")
            if self.sample_rate > 0:
                nominal = 1.0 / self.sample_rate
                if np.any(np.abs(dt - nominal) > 0.01 * nominal):
                    raise TraceFormatError("sample spacing deviates more than 1% from 1/sample_rate")
        a = self.orient[:, 0]
        if np.any((a < ALPHA_RANGE[0] - 1e-9) | (a > ALPHA_RANGE[1] + 1e-9)):
            raise TraceFormatError("alpha outside [-90, 90] degrees")


def normalize_orientation(orient: np.ndarray) -> np.ndarray:
    """Wrap beta into [-180, 180) and gamma into [0, 360); alpha untouched."""
    out = np.array(orient, dtype=float)
    out[:, 1] = (out[:, 1] + 180.0) % 360.0 - 180.0
    out[:, 2] = out[:, 2] % 360.0
    return out


def slice_trace(trace: Trace, start: int, end: int) -> Trace:
    """View of a sample index range as a standalone trace (truth dropped)."""
    return Trace(
        device_id=trace.device_id,
        sample_rate=trace.sample_rate,
        t=trace.t[start:end],
        acc=trace.acc[start:end],
        orient=trace.orient[start:end],
    )


# --- trace I/O --------------------------------------------------------------


def save_trace(trace: Trace, path: str | Path) -> None:
    """Write a trace as JSON lines; floats round-trip exactly via repr."""
    path = Path(path)
    with path.open("w") as fh:
        meta = {"meta": {"device_id": trace.device_id, "sample_rate": trace.sample_rate}}
        fh.write(json.dumps(meta, allow_nan=False) + "\n")
        for i in range(trace.n_samples):
            row = {
                "t": float(trace.t[i]),
                "acc": [float(v) for v in trace.acc[i]],
                "orient": [float(v) for v in trace.orient[i]],
            }
            fh.write(json.dumps(row, allow_nan=False) + "\n")
        if trace.truth:
            trailer = {
                "truth": [
                    {"start": r.start, "end": r.end, "label": r.label} for r in trace.truth
                ]
            }
            fh.write(json.dumps(trailer, allow_nan=False) + "\n")


def load_trace(path: str | Path) -> Trace:
    """Parse a JSON-lines trace file; errors carry 1-based line numbers."""
    path = Path(path)
    device_id = ""
    sample_rate = 0.0
    rows_t: list[float] = []
    rows_acc: list[list[float]] = []
    rows_orient: list[list[float]] = []
    truth: list[TruthRange] = []
    trailer_seen = False

    with path.open() as fh:
        for lineno, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise TraceFormatError(f"{path.name}:{lineno}: not valid JSON ({exc.msg})")
            if "meta" in obj:
                if lineno != 1:
                    raise TraceFormatError(f"{path.name}:{lineno}: meta must be the first line")
                meta = obj["meta"]
                device_id = str(meta.get("device_id", ""))
                sample_rate = float(meta.get("sample_rate", 0.0))
            elif "truth" in obj:
                if trailer_seen:
                    raise TraceFormatError(f"{path.name}:{lineno}: duplicate truth trailer")
                trailer_seen = True
                for entry in obj["truth"]:
                    truth.append(
                        TruthRange(float(entry["start"]), float(entry["end"]), str(entry["label"]))
                    )
            else:
                if trailer_seen:
                    raise TraceFormatError(f"{path.name}:{lineno}: samples after truth trailer")
                try:
                    t = float(obj["t"])
                    acc = [float(v) for v in obj["acc"]]
                    orient = [float(v) for v in obj["orient"]]
                except (KeyError, TypeError, ValueError):
                    raise TraceFormatError(f"{path.name}:{lineno}: sample needs t, acc[3], orient[3]")
                if len(acc) != 3 or len(orient) != 3:
                    raise TraceFormatError(f"{path.name}:{lineno}: acc and orient must have 3 entries")
                rows_t.append(t)
                rows_acc.append(acc)
                rows_orient.append(orient)

    if not rows_t:
        raise TraceFormatError(f"{path.name}: no samples")
    trace = Trace(
        device_id=device_id,
        sample_rate=sample_rate,
        t=np.asarray(rows_t, dtype=float),
        acc=np.asarray(rows_acc, dtype=float),
        orient=normalize_orientation(np.asarray(rows_orient, dtype=float)),
        truth=tuple(truth),
    )
    trace.validate()
    return trace


# --- network I/O ------------------------------------------------------------


def build_network(
    name: str,
    sample_rate: float,
    dwell: tuple[float, float],
    forward: list[StationInterval],
) -> MetroNetwork:
    """Assemble a network from forward intervals, deriving the reverse ride."""
    k = len(forward)
    if [iv.id for iv in forward] != list(range(k)):
        raise NetworkFormatError("forward interval ids must be consecutive from 0")
    reverse = []
    for i in range(k):
        src = forward[k - 1 - i]
        reverse.append(
            StationInterval(
                id=k + i,
                from_station=src.to_station,
                to_station=src.from_station,
                min_duration=src.min_duration,
                max_duration=src.max_duration,
                reverse=True,
            )
        )
    return MetroNetwork(
        name=name,
        sample_rate=sample_rate,
        intervals=tuple(forward) + tuple(reverse),
        dwell_min=dwell[0],
        dwell_max=dwell[1],
    )


def network_from_dict(doc: dict, source: str = "network") -> MetroNetwork:
    try:
        name = str(doc["name"])
        sample_rate = float(doc["sample_rate"])
        dwell = (float(doc["dwell"][0]), float(doc["dwell"][1]))
        raw = doc["intervals"]
    except (KeyError, TypeError, IndexError, ValueError):
        raise NetworkFormatError(f"{source}: needs name, sample_rate, dwell[2], intervals")
    forward = []
    for entry in raw:
        try:
            forward.append(
                StationInterval(
                    id=int(entry["id"]),
                    from_station=str(entry["from"]),
                    to_station=str(entry["to"]),
                    min_duration=float(entry["min_duration"]),
                    max_duration=float(entry["max_duration"]),
                )
            )
        except (KeyError, TypeError, ValueError):
            raise NetworkFormatError(f"{source}: bad interval entry {entry!r}")
    forward.sort(key=lambda iv: iv.id)
    return build_network(name, sample_rate, dwell, forward)


def network_to_dict(network: MetroNetwork) -> dict:
    return {
        "name": network.name,
        "sample_rate": network.sample_rate,
        "dwell": [network.dwell_min, network.dwell_max],
        "intervals": [
            {
                "id": iv.id,
                "from": iv.from_station,
                "to": iv.to_station,
                "min_duration": iv.min_duration,
                "max_duration": iv.max_duration,
            }
            for iv in network.forward
        ],
    }


def load_network(path: str | Path) -> MetroNetwork:
    """Read one line's forward intervals and derive the reverse direction."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise NetworkFormatError(f"{path.name}: not valid JSON ({exc.msg})")
    return network_from_dict(doc, source=path.name)


def save_network(network: MetroNetwork, path: str | Path) -> None:
    doc = network_to_dict(network)
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n")
