from __future__ import annotations

from dataclasses import asdict, dataclass


@dataclass(frozen=True)
class SurvivalRecord:
    """Time to treatment failure in days; ``event=False`` means censored."""

    patient_id: str
    time_days: int
    event: bool

    def __post_init__(self):
        if self.time_days < 1:
            raise ValueError(f"time_days must be >= 1, got {self.time_days}")

    def to_dict(self) -> dict:
        return asdict(self)
