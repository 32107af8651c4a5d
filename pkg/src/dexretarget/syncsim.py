"""Discrete-event simulation of multi-sensor acquisition timing.

Two regimes: ``hard`` drives every stream from a shared trigger clock, so
per-frame spread comes only from each stream's bounded trigger-to-sample
latency; ``soft`` lets each stream free-run with a random phase and adds
15-100 ms delivery latency, the usual loosely-coupled baseline.  All times
are seconds; reports convert to milliseconds.  Everything is seeded and
deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FRESH, HELD, MISSING = 0, 1, 2
# per-event roles after assembly, for conservation accounting
ROLE_DROPPED, ROLE_MEMBER, ROLE_SUPERSEDED, ROLE_UNALIGNED = 0, 1, 2, 3

_EPS = 1e-9


class SyncConfigError(Exception):
    """A stream configuration is invalid."""


@dataclass(frozen=True)
class StreamSpec:
    """One sensor stream: nominal period, latency bound, jitter, dropout."""

    name: str
    period: float
    latency_bound: float
    jitter: str = "uniform"   # "uniform" or "gauss" (truncated at the bound)
    dropout: float = 0.0


@dataclass(frozen=True)
class StreamConfig:
    """Full acquisition setup: streams, frame clock, regime, seed."""

    streams: tuple[StreamSpec, ...]
    rate_hz: float = 25.0
    mode: str = "hard"
    soft_latency: tuple[float, float] = (0.015, 0.100)
    seed: int = 0

    def __post_init__(self):
        if not self.streams:
            raise SyncConfigError("at least one stream is required")
        names = [s.name for s in self.streams]
        if len(set(names)) != len(names):
            raise SyncConfigError(f"stream names must be unique, got {names}")
        for s in self.streams:
            if s.period <= 0.0:
                raise SyncConfigError(f"stream {s.name!r}: period must be positive")
            if s.latency_bound < 0.0:
                raise SyncConfigError(f"stream {s.name!r}: latency bound must be >= 0")
            if s.jitter not in ("uniform", "gauss"):
                raise SyncConfigError(f"stream {s.name!r}: unknown jitter {s.jitter!r}")
            if not 0.0 <= s.dropout <= 1.0:
                raise SyncConfigError(f"stream {s.name!r}: dropout must be in [0, 1]")
        if self.rate_hz <= 0.0:
            raise SyncConfigError("rate_hz must be positive")
        if self.mode not in ("hard", "soft"):
            raise SyncConfigError(f"mode must be 'hard' or 'soft', got {self.mode!r}")
        lo, hi = self.soft_latency
        if lo < 0.0 or hi < lo:
            raise SyncConfigError(f"soft_latency must satisfy 0 <= lo <= hi, got {self.soft_latency}")


def reference_hard_config(dropout=0.0, seed=0):
    """Trigger-synchronized setup: camera within 2 ms of the trigger, taxel
    scans within 7 ms, proprioception within 1 ms, all at 25 Hz."""
    period = 1.0 / 25.0
    streams = [StreamSpec("camera", period, 0.002, dropout=dropout)]
    streams += [StreamSpec(f"tactile_{i}", period, 0.007, dropout=dropout) for i in range(5)]
    streams += [StreamSpec("proprio", period, 0.001, dropout=dropout)]
    return StreamConfig(tuple(streams), rate_hz=25.0, mode="hard", seed=seed)


def reference_soft_config(dropout=0.044, seed=0):
    """Free-running baseline: same sensors, random phases, 15-100 ms
    delivery latency, lossy transport."""
    hard = reference_hard_config(dropout=dropout, seed=seed)
    return StreamConfig(hard.streams, rate_hz=25.0, mode="soft",
                        soft_latency=(0.015, 0.100), seed=seed)


@dataclass(frozen=True)
class SyncEvent:
    """One sensor sample: when it was taken, when it arrived."""

    stream: str
    emission: float
    delivered: float
    payload: int | None
    dropped: bool


class EventLog:
    """Columnar, emission-ordered record of every simulated event."""

    def __init__(self, config, duration, stream_idx, emission, delivered, payload, dropped):
        order = np.lexsort((stream_idx, emission))
        self.config = config
        self.duration = float(duration)
        self.stream_idx = stream_idx[order]
        self.emission = emission[order]
        self.delivered = delivered[order]
        self.payload = payload[order]
        self.dropped = dropped[order]

    @property
    def stream_names(self):
        return tuple(s.name for s in self.config.streams)

    def __len__(self):
        return self.emission.size

    def event(self, k):
        dropped = bool(self.dropped[k])
        return SyncEvent(self.stream_names[self.stream_idx[k]],
                         float(self.emission[k]), float(self.delivered[k]),
                         None if dropped else int(self.payload[k]), dropped)

    def __iter__(self):
        return (self.event(k) for k in range(len(self)))

    def dropout_rate(self):
        """Fraction of emitted events lost in transport."""
        return float(self.dropped.mean()) if len(self) else 0.0


def _count_in(duration, period, phase=0.0):
    return max(int(np.ceil((duration - phase) / period - _EPS)), 0)


def _latency(rng, spec, n):
    if spec.latency_bound == 0.0:
        return np.zeros(n)
    if spec.jitter == "uniform":
        return rng.uniform(0.0, spec.latency_bound, n)
    draw = rng.normal(0.5 * spec.latency_bound, 0.25 * spec.latency_bound, n)
    return np.clip(draw, 0.0, spec.latency_bound)


def simulate(config, duration):
    """Run the acquisition clocks for ``duration`` seconds.

    Returns:
        EventLog covering emissions in [0, duration).  Identical config and
        duration always reproduce the same log.
    """
    if duration <= 0.0:
        raise SyncConfigError("duration must be positive")
    rng = np.random.default_rng(config.seed)
    cols = {"stream": [], "emission": [], "delivered": [], "payload": [], "dropped": []}
    for s_idx, spec in enumerate(config.streams):
        if config.mode == "hard":
            n = _count_in(duration, spec.period)
            emission = np.arange(n) * spec.period + _latency(rng, spec, n)
            delivered = emission.copy()
        else:
            phase = rng.uniform(0.0, spec.period)
            n = _count_in(duration, spec.period, phase)
            emission = phase + np.arange(n) * spec.period + _latency(rng, spec, n)
            lo, hi = config.soft_latency
            delivered = emission + rng.uniform(lo, hi, n)
        dropped = rng.random(n) < spec.dropout
        cols["stream"].append(np.full(n, s_idx, dtype=np.int32))
        cols["emission"].append(emission)
        cols["delivered"].append(delivered)
        cols["payload"].append(np.arange(n, dtype=np.int64))
        cols["dropped"].append(dropped)
    return EventLog(config, duration,
                    np.concatenate(cols["stream"]),
                    np.concatenate(cols["emission"]),
                    np.concatenate(cols["delivered"]),
                    np.concatenate(cols["payload"]),
                    np.concatenate(cols["dropped"]))


@dataclass(frozen=True)
class FrameMember:
    """One stream's contribution to an assembled frame."""

    status: str            # "fresh", "held", or "missing"
    event_index: int | None
    emission: float | None
    age: float             # seconds since emission for held members, else 0

    _NAMES = ("fresh", "held", "missing")


@dataclass(frozen=True)
class SyncedFrame:
    index: int
    trigger: float
    members: dict[str, FrameMember]
    skew: float
    complete: bool


class FrameSet:
    """Assembled frames in columnar form; ``frame(f)`` materializes one."""

    def __init__(self, log, triggers, member_event, member_emission, status, age,
                 skew, complete, event_role, window, max_hold_age):
        self.log = log
        self.triggers = triggers
        self.member_event = member_event      # (F, S) int64, -1 when absent
        self.member_emission = member_emission
        self.status = status                  # (F, S) int8
        self.age = age                        # (F, S) seconds, nan when missing
        self.skew = skew                      # (F,) seconds
        self.complete = complete              # (F,) bool
        self.event_role = event_role          # (N,) int8 over the log
        self.window = window
        self.max_hold_age = max_hold_age

    def __len__(self):
        return self.triggers.size

    @property
    def stream_names(self):
        return self.log.stream_names

    def frame(self, f):
        members = {}
        for s, name in enumerate(self.stream_names):
            st = int(self.status[f, s])
            ev = int(self.member_event[f, s])
            members[name] = FrameMember(
                status=FrameMember._NAMES[st],
                event_index=None if ev < 0 else ev,
                emission=None if ev < 0 else float(self.member_emission[f, s]),
                age=float(self.age[f, s]) if st == HELD else 0.0)
        return SyncedFrame(f, float(self.triggers[f]), members,
                           float(self.skew[f]), bool(self.complete[f]))

    def __iter__(self):
        return (self.frame(f) for f in range(len(self)))


def assemble_frames(log, window=None, max_hold_age=None):
    """Group events into frames on the consumer's frame clock.

    An event is the fresh member of the frame nearest its emission when it
    falls within ``window`` of that trigger (default: half a frame period);
    when several qualify the newest wins and the rest are superseded.
    Frames missing a fresh member reuse the stream's last earlier event up
    to ``max_hold_age`` (default: two periods), else the slot is missing.
    Frame skew is max minus min emission over fresh members only; staleness
    of held members is tracked separately as age.

    Returns:
        FrameSet; every non-dropped event is a member of exactly one frame
        or carries a discard role (superseded/unaligned).
    """
    rate = log.config.rate_hz
    period = 1.0 / rate
    if window is None:
        window = 0.5 * period
    if max_hold_age is None:
        max_hold_age = 2.0 * period
    if window <= 0.0 or max_hold_age < 0.0:
        raise SyncConfigError("window must be > 0 and max_hold_age >= 0")
    n_frames = _count_in(log.duration, period)
    if n_frames == 0:
        raise SyncConfigError("duration too short for a single frame")
    triggers = np.arange(n_frames) * period
    n_streams = len(log.config.streams)

    member_event = np.full((n_frames, n_streams), -1, dtype=np.int64)
    member_emission = np.full((n_frames, n_streams), np.nan)
    status = np.full((n_frames, n_streams), MISSING, dtype=np.int8)
    age = np.full((n_frames, n_streams), np.nan)
    event_role = np.full(len(log), ROLE_UNALIGNED, dtype=np.int8)
    event_role[log.dropped] = ROLE_DROPPED

    for s in range(n_streams):
        live = np.nonzero((log.stream_idx == s) & ~log.dropped)[0]
        if live.size == 0:
            continue
        em = log.emission[live]  # ascending: the log is emission-ordered
        nearest = np.clip(np.rint(em * rate).astype(np.int64), 0, n_frames - 1)
        aligned = np.abs(em - triggers[nearest]) <= window + _EPS
        cand = np.nonzero(aligned)[0]
        if cand.size:
            # newest candidate per frame wins: scan reversed, keep first hit
            rev = cand[::-1]
            frames_rev = nearest[rev]
            uniq, first = np.unique(frames_rev, return_index=True)
            winners = rev[first]
            member_event[uniq, s] = live[winners]
            member_emission[uniq, s] = em[winners]
            status[uniq, s] = FRESH
            age[uniq, s] = 0.0
            event_role[live[cand]] = ROLE_SUPERSEDED
            event_role[live[winners]] = ROLE_MEMBER
        # hold-last fill for frames without a fresh member
        open_frames = np.nonzero(status[:, s] != FRESH)[0]
        if open_frames.size:
            pos = np.searchsorted(em, triggers[open_frames] + _EPS, side="right") - 1
            has_prev = pos >= 0
            rows = open_frames[has_prev]
            prev = pos[has_prev]
            hold_age = triggers[rows] - em[prev]
            ok = hold_age <= max_hold_age + _EPS
            rows, prev, hold_age = rows[ok], prev[ok], hold_age[ok]
            member_event[rows, s] = live[prev]
            member_emission[rows, s] = em[prev]
            status[rows, s] = HELD
            age[rows, s] = hold_age

    fresh = status == FRESH
    lo = np.where(fresh, member_emission, np.inf).min(axis=1)
    hi = np.where(fresh, member_emission, -np.inf).max(axis=1)
    skew = np.where(fresh.sum(axis=1) >= 2, hi - lo, 0.0)
    complete = ~np.any(status == MISSING, axis=1)
    return FrameSet(log, triggers, member_event, member_emission, status, age,
                    skew, complete, event_role, window, max_hold_age)


@dataclass(frozen=True)
class AlignmentReport:
    """Timing quality summary over an assembled frame set."""

    frames: int
    mean_skew_ms: float
    max_skew_ms: float
    dropout_rate: float      # member slots not served by a fresh event
    incomplete_rate: float   # frames with at least one missing member
    effective_hz: float      # complete frames per simulated second
    fresh_slots: int
    held_slots: int
    missing_slots: int


def alignment_report(frames):
    """Summarize skew, dropout, and completeness for a FrameSet."""
    if len(frames) == 0:
        raise SyncConfigError("cannot report on an empty frame set")
    status = frames.status
    total = status.size
    fresh = int((status == FRESH).sum())
    held = int((status == HELD).sum())
    missing = int((status == MISSING).sum())
    return AlignmentReport(
        frames=len(frames),
        mean_skew_ms=float(frames.skew.mean() * 1e3),
        max_skew_ms=float(frames.skew.max() * 1e3),
        dropout_rate=(held + missing) / total,
        incomplete_rate=float((~frames.complete).mean()),
        effective_hz=float(frames.complete.sum() / frames.log.duration),
        fresh_slots=fresh,
        held_slots=held,
        missing_slots=missing,
    )
