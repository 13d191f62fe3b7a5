"""End-to-end latency model for the staged video pipeline.

A profile records, per stage, the output size, the compute latency on
each tier, and the measured upload latency of its output to the edge and
cloud tiers. The first stage is pinned to the iot tier (it runs where the
data is generated); a partition point names the first stage that runs on
cloud, with every earlier stage (after the generator) on edge. The
sentinel ``EDGE_ONLY`` keeps everything after the generator on edge.

Total latency = every stage's compute on its tier, plus each stage's
output uploaded to the tier where its successor runs (the handoff goes
through the destination tier's object store even within a tier).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

import yaml

from ..errors import InvalidField, UnknownStage

EDGE_ONLY = "none"


@dataclass(frozen=True)
class StageProfile:
    name: str
    output_bytes: int
    compute_s: Mapping[str, float]
    upload_edge_s: float
    upload_cloud_s: float

    def upload_to(self, tier: str) -> float:
        if tier == "edge":
            return self.upload_edge_s
        if tier == "cloud":
            return self.upload_cloud_s
        return 0.0

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "output_bytes": self.output_bytes,
            "compute_s": dict(self.compute_s),
            "upload_edge_s": self.upload_edge_s,
            "upload_cloud_s": self.upload_cloud_s,
        }


@dataclass(frozen=True)
class LatencyProfile:
    stages: tuple[StageProfile, ...]

    def __post_init__(self) -> None:
        if not self.stages:
            raise InvalidField("profile needs at least one stage")
        if "iot" not in self.stages[0].compute_s:
            raise InvalidField("first stage needs an iot compute latency")
        for stage in self.stages:
            for field_name in ("upload_edge_s", "upload_cloud_s"):
                if getattr(stage, field_name) < 0:
                    raise InvalidField(f"{stage.name}: negative {field_name}")
        for stage in self.stages[1:]:
            missing = {"edge", "cloud"} - set(stage.compute_s)
            if missing:
                raise InvalidField(f"{stage.name}: missing compute for {missing}")

    def names(self) -> list[str]:
        return [s.name for s in self.stages]

    def index(self, stage_name: str) -> int:
        for i, stage in enumerate(self.stages):
            if stage.name == stage_name:
                return i
        raise UnknownStage(stage_name)

    def to_dict(self) -> dict[str, Any]:
        return {"stages": [s.to_dict() for s in self.stages]}

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "LatencyProfile":
        stages = tuple(
            StageProfile(
                name=str(entry["name"]),
                output_bytes=int(entry["output_bytes"]),
                compute_s={str(t): float(v)
                           for t, v in dict(entry["compute_s"]).items()},
                upload_edge_s=float(entry["upload_edge_s"]),
                upload_cloud_s=float(entry["upload_cloud_s"]),
            )
            for entry in doc["stages"]
        )
        return cls(stages=stages)

    @classmethod
    def from_yaml(cls, source: str | Path) -> "LatencyProfile":
        text = str(source)
        if "\n" not in text and Path(text).exists():
            text = Path(text).read_text()
        return cls.from_dict(yaml.safe_load(text))

    def to_yaml(self, path: str | Path) -> None:
        Path(path).write_text(yaml.safe_dump(self.to_dict(), sort_keys=False))


def stage_tiers(profile: LatencyProfile, partition: str | None) -> list[str]:
    """Tier per stage under the given partition point.

    The named stage and everything after it run on cloud; the first stage
    is always iot; the rest run on edge.
    """
    if partition is None:
        partition = EDGE_ONLY
    cut = len(profile.stages) if partition == EDGE_ONLY else profile.index(partition)
    return ["iot" if i == 0 else ("cloud" if i >= cut else "edge")
            for i in range(len(profile.stages))]


@dataclass(frozen=True)
class LatencyBreakdown:
    partition: str
    total_s: float
    compute_s: float
    transfer_s: float
    computes: tuple[tuple[str, str, float], ...]   # (stage, tier, seconds)
    transfers: tuple[tuple[str, str, float], ...]  # (stage output, dst tier, seconds)


def end_to_end_latency(profile: LatencyProfile,
                       partition: str | None) -> LatencyBreakdown:
    tiers = stage_tiers(profile, partition)
    computes = []
    for stage, tier in zip(profile.stages, tiers):
        try:
            computes.append((stage.name, tier, float(stage.compute_s[tier])))
        except KeyError:
            raise InvalidField(f"{stage.name}: no compute latency for tier {tier!r}")
    transfers = [
        (profile.stages[i - 1].name, tiers[i],
         profile.stages[i - 1].upload_to(tiers[i]))
        for i in range(1, len(profile.stages))
    ]
    compute_s = sum(s for _, _, s in computes)
    transfer_s = sum(s for _, _, s in transfers)
    return LatencyBreakdown(
        partition=partition if partition is not None else EDGE_ONLY,
        total_s=compute_s + transfer_s,
        compute_s=compute_s,
        transfer_s=transfer_s,
        computes=tuple(computes),
        transfers=tuple(transfers),
    )


@dataclass(frozen=True)
class PartitionCost:
    partition: str
    compute_s: float
    transfer_s: float
    total_s: float


@dataclass(frozen=True)
class PartitionReport:
    entries: tuple[PartitionCost, ...]
    best: str | None

    def entry(self, partition: str) -> PartitionCost:
        for e in self.entries:
            if e.partition == partition:
                return e
        raise UnknownStage(partition)


def sweep_partitions(profile: LatencyProfile) -> PartitionReport:
    """Evaluate every partition point; the argmin prefers the earliest
    stage on ties."""
    points = profile.names() + [EDGE_ONLY]
    entries = []
    for point in points:
        b = end_to_end_latency(profile, point)
        entries.append(PartitionCost(point, b.compute_s, b.transfer_s, b.total_s))
    best = min(range(len(entries)), key=lambda i: (entries[i].total_s, i))
    return PartitionReport(entries=tuple(entries), best=entries[best].partition)


# -- report rendering ---------------------------------------------------------

_CSV_HEADER = ["partition", "compute_s", "transfer_s", "total_s", "best"]


def emit_report(report: PartitionReport, fmt: str = "csv",
                path: str | Path = "partition_report.csv") -> Path:
    """Write the report as csv, a plain-text table, or an SVG bar chart."""
    path = Path(path)
    if fmt == "csv":
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(_CSV_HEADER)
            for e in report.entries:
                writer.writerow([e.partition, repr(e.compute_s), repr(e.transfer_s),
                                 repr(e.total_s), "1" if e.partition == report.best else ""])
    elif fmt == "table":
        path.write_text(render_table(report))
    elif fmt == "svg":
        path.write_text(render_svg(report))
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    return path


def parse_report_csv(path: str | Path) -> PartitionReport:
    entries = []
    best = None
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != _CSV_HEADER:
            raise ValueError(f"unexpected header: {reader.fieldnames}")
        for row in reader:
            entry = PartitionCost(row["partition"], float(row["compute_s"]),
                                  float(row["transfer_s"]), float(row["total_s"]))
            entries.append(entry)
            if row["best"] == "1":
                best = entry.partition
    return PartitionReport(entries=tuple(entries), best=best)


def render_table(report: PartitionReport) -> str:
    width = max([len("partition")] + [len(e.partition) for e in report.entries])
    lines = [f"{'partition':<{width}}  {'compute_s':>10}  {'transfer_s':>10}  "
             f"{'total_s':>10}  best"]
    for e in report.entries:
        marker = "*" if e.partition == report.best else ""
        lines.append(f"{e.partition:<{width}}  {e.compute_s:>10.3f}  "
                     f"{e.transfer_s:>10.3f}  {e.total_s:>10.3f}  {marker}")
    return "\n".join(lines) + "\n"


def render_svg(report: PartitionReport, width: int = 640, height: int = 320) -> str:
    """Minimal stacked bar chart (compute + transfer) per partition."""
    entries = report.entries
    if not entries:
        return f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}"/>'
    margin, axis = 40, 20
    plot_w, plot_h = width - 2 * margin, height - 2 * margin - axis
    peak = max(e.total_s for e in entries) or 1.0
    bar_w = plot_w / len(entries)
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
             f'font-family="monospace" font-size="10">']
    for i, e in enumerate(entries):
        x = margin + i * bar_w
        h_total = e.total_s / peak * plot_h
        h_compute = e.compute_s / peak * plot_h
        y_top = margin + plot_h - h_total
        parts.append(f'<rect x="{x + 2:.1f}" y="{y_top:.1f}" width="{bar_w - 4:.1f}" '
                     f'height="{h_total - h_compute:.1f}" fill="#6baed6"/>')
        parts.append(f'<rect x="{x + 2:.1f}" y="{y_top + h_total - h_compute:.1f}" '
                     f'width="{bar_w - 4:.1f}" height="{h_compute:.1f}" fill="#2171b5"/>')
        mark = " *" if e.partition == report.best else ""
        parts.append(f'<text x="{x + bar_w / 2:.1f}" y="{height - margin + 12}" '
                     f'text-anchor="middle">{e.partition}{mark}</text>')
        parts.append(f'<text x="{x + bar_w / 2:.1f}" y="{y_top - 4:.1f}" '
                     f'text-anchor="middle">{e.total_s:.1f}s</text>')
    parts.append("</svg>")
    return "\n".join(parts)


def random_profile(rng, max_stages: int = 6) -> LatencyProfile:
    """Arbitrary valid profile for property tests and trace equivalence runs."""
    n = rng.randint(1, max_stages)
    stages = []
    for i in range(n):
        stages.append(StageProfile(
            name=f"stage-{i}",
            output_bytes=rng.randint(0, 100_000_000),
            compute_s={"iot": rng.uniform(0, 10),
                       "edge": rng.uniform(0, 5),
                       "cloud": rng.uniform(0, 5)},
            upload_edge_s=rng.uniform(0, 20),
            upload_cloud_s=rng.uniform(0, 100),
        ))
    return LatencyProfile(stages=tuple(stages))
