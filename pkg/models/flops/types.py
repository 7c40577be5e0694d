from collections import defaultdict
from dataclasses import dataclass, field

from pydantic import BaseModel, ConfigDict, Field


class LayerCostSpec(BaseModel):
    model_config = ConfigDict(extra='forbid', frozen=True)

    kind: str
    out_channels: int = Field(0, ge=0)
    kernel: int = Field(1, ge=1)
    stride: int = Field(1, ge=1)
    pad: int = Field(0, ge=0)
    out_features: int = Field(0, ge=0)


@dataclass(frozen=True)
class LayerCost:
    name: str
    kind: str
    output_shape: tuple[int, ...]
    macs: int
    shared: bool


@dataclass
class FlopReport:
    """Per-test-image multiply-accumulate counts; the cost unit reported as "FLOPs"."""

    records: list[LayerCost] = field(default_factory=list)

    @property
    def shared_macs(self) -> int:
        return sum(r.macs for r in self.records if r.shared)

    @property
    def head_macs(self) -> int:
        return sum(r.macs for r in self.records if not r.shared)

    @property
    def total_macs(self) -> int:
        return self.shared_macs + self.head_macs

    @property
    def shared_fraction(self) -> float:
        total = self.total_macs
        return self.shared_macs / total if total else 1.0

    @property
    def total_gmacs(self) -> float:
        return self.total_macs / 1e9

    def by_operator(self) -> dict[str, int]:
        totals: dict[str, int] = defaultdict(int)
        for record in self.records:
            totals[record.kind] += record.macs
        return dict(totals)

    def by_module(self) -> dict[str, int]:
        """Totals per top-level module (``stem``, ``block1``, ``transition1``, ``head0`` ...)."""
        totals: dict[str, int] = defaultdict(int)
        for record in self.records:
            totals[record.name.split('.')[0]] += record.macs
        return dict(totals)


@dataclass(frozen=True)
class CurveRow:
    family: str
    members: int
    gmacs: float
