"""Survey campaign calendar.

Longitudinal campaigns run dense then sparse: one survey every
``phase1_interval_days`` inside the first ``phase1_months`` calendar
months, then every ``phase2_interval_days`` anchored to the last dense
survey. Each raw cadence date shifts forward 0-6 days onto the
preferred weekday before phase membership is judged, so the dense phase
never leaks past its month boundary. Event-triggered surveys slot in
after a lag without disturbing anything scheduled, and reschedules move
a single entry to the first free date at or after the earliest feasible
day, keeping the one-entry-per-date rule intact.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date, timedelta
from typing import Any, Iterable, Mapping

from .errors import DomainError, NotFoundError

SCHEDULED = "SCHEDULED"
EVENT = "EVENT"
RESCHEDULED = "RESCHEDULED"

RAIN = "RAIN"
EQUIPMENT_UNAVAILABLE = "EQUIPMENT_UNAVAILABLE"

FRIDAY = 4  # date.weekday() numbering, Monday == 0


@dataclass(frozen=True)
class CampaignPolicy:
    start_date: date
    phase1_interval_days: int = 14
    phase1_months: int = 4
    phase2_interval_days: int = 42
    preferred_weekday: int = FRIDAY
    event_lag_days: int = 1

    def __post_init__(self) -> None:
        if self.phase1_interval_days <= 0 or self.phase2_interval_days <= 0:
            raise DomainError("cadence intervals must be positive")
        if self.phase1_months < 0:
            raise DomainError("phase1_months must be >= 0")
        if not 0 <= self.preferred_weekday <= 6:
            raise DomainError("preferred_weekday must be 0..6 (Monday=0)")
        if self.event_lag_days < 0:
            raise DomainError("event_lag_days must be >= 0")

    def to_dict(self) -> dict[str, Any]:
        return {
            "start_date": self.start_date.isoformat(),
            "phase1_interval_days": self.phase1_interval_days,
            "phase1_months": self.phase1_months,
            "phase2_interval_days": self.phase2_interval_days,
            "preferred_weekday": self.preferred_weekday,
            "event_lag_days": self.event_lag_days,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "CampaignPolicy":
        kwargs = dict(data)
        kwargs["start_date"] = date.fromisoformat(kwargs["start_date"])
        return cls(**kwargs)


@dataclass(frozen=True)
class SurveyEntry:
    survey_date: date
    kind: str  # SCHEDULED | EVENT | RESCHEDULED
    note: str = ""


@dataclass(frozen=True)
class SurveyCalendar:
    policy: CampaignPolicy
    horizon_days: int
    entries: tuple[SurveyEntry, ...]  # sorted by date, unique dates

    def dates(self) -> list[date]:
        return [e.survey_date for e in self.entries]

    def to_dict(self) -> dict[str, Any]:
        return {
            "policy": self.policy.to_dict(),
            "horizon_days": self.horizon_days,
            "entries": [
                {
                    "date": e.survey_date.isoformat(),
                    "kind": e.kind,
                    "note": e.note,
                }
                for e in self.entries
            ],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "SurveyCalendar":
        return cls(
            policy=CampaignPolicy.from_dict(data["policy"]),
            horizon_days=int(data["horizon_days"]),
            entries=tuple(
                SurveyEntry(
                    survey_date=date.fromisoformat(e["date"]),
                    kind=e["kind"],
                    note=e.get("note", ""),
                )
                for e in data["entries"]
            ),
        )


def _shift_to_weekday(d: date, weekday: int) -> date:
    return d + timedelta(days=(weekday - d.weekday()) % 7)


def _add_months(d: date, months: int) -> tuple[int, int]:
    month_index = d.year * 12 + (d.month - 1) + months
    return month_index // 12, month_index % 12 + 1


def _phase1_end(policy: CampaignPolicy) -> date:
    """Last day of the phase1_months-th calendar month, counting the
    start month as the first."""
    if policy.phase1_months == 0:
        return policy.start_date - timedelta(days=1)
    year, month = _add_months(policy.start_date, policy.phase1_months)
    return date(year, month, 1) - timedelta(days=1)


def generate_calendar(policy: CampaignPolicy, horizon_days: int) -> SurveyCalendar:
    """Build the planned survey calendar over ``horizon_days`` days.

    Dense phase: start + k * phase1_interval_days, each date shifted
    forward to the preferred weekday, kept while it stays inside the
    first phase1_months calendar months. Sparse phase: steps of
    phase2_interval_days from the last dense survey (from the shifted
    start itself when the dense phase is empty). The horizon bound is
    inclusive.
    """
    if horizon_days < 0:
        raise DomainError("horizon_days must be >= 0")
    horizon_end = policy.start_date + timedelta(days=horizon_days)
    boundary = _phase1_end(policy)

    phase1: list[date] = []
    k = 0
    while True:
        candidate = _shift_to_weekday(
            policy.start_date + timedelta(days=k * policy.phase1_interval_days),
            policy.preferred_weekday,
        )
        if candidate > boundary:
            break
        phase1.append(candidate)
        k += 1

    dates: list[date] = [d for d in phase1 if d <= horizon_end]
    if phase1:
        nxt = phase1[-1] + timedelta(days=policy.phase2_interval_days)
    else:
        nxt = _shift_to_weekday(policy.start_date, policy.preferred_weekday)
    while nxt <= horizon_end:
        dates.append(nxt)
        nxt += timedelta(days=policy.phase2_interval_days)

    entries = tuple(SurveyEntry(survey_date=d, kind=SCHEDULED) for d in sorted(set(dates)))
    return SurveyCalendar(policy=policy, horizon_days=horizon_days, entries=entries)


def insert_event_survey(
    calendar: SurveyCalendar, event_date: date, note: str
) -> SurveyCalendar:
    """Add an event-response survey at event_date + lag, sliding forward
    past any date that already holds a survey. Existing entries are
    untouched."""
    occupied = set(calendar.dates())
    target = event_date + timedelta(days=calendar.policy.event_lag_days)
    while target in occupied:
        target += timedelta(days=1)
    entries = sorted(
        calendar.entries + (SurveyEntry(survey_date=target, kind=EVENT, note=note),),
        key=lambda e: e.survey_date,
    )
    return SurveyCalendar(
        policy=calendar.policy,
        horizon_days=calendar.horizon_days,
        entries=tuple(entries),
    )


def reschedule(
    calendar: SurveyCalendar,
    entry_date: date,
    reason: str,
    earliest_feasible: date,
) -> SurveyCalendar:
    """Move the entry on ``entry_date`` to the first unoccupied date at or
    after ``earliest_feasible``, marking it RESCHEDULED with the reason.

    Raises NotFoundError when no entry exists on ``entry_date``.
    """
    if not reason:
        raise DomainError("reschedule needs a reason")
    found = None
    rest: list[SurveyEntry] = []
    for e in calendar.entries:
        if e.survey_date == entry_date and found is None:
            found = e
        else:
            rest.append(e)
    if found is None:
        raise NotFoundError(f"no survey scheduled on {entry_date.isoformat()}")

    occupied = {e.survey_date for e in rest}
    target = earliest_feasible
    while target in occupied:
        target += timedelta(days=1)
    note = reason if not found.note else f"{reason}; {found.note}"
    rest.append(SurveyEntry(survey_date=target, kind=RESCHEDULED, note=note))
    rest.sort(key=lambda e: e.survey_date)
    return SurveyCalendar(
        policy=calendar.policy,
        horizon_days=calendar.horizon_days,
        entries=tuple(rest),
    )
