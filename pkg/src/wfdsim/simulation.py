"""Discrete-event simulator for group-owner negotiation under attack.

Devices follow fixed schedules: every ``period`` seconds a scheduled device
initiates a session with a peer and, if negotiation settles, a group runs
for ``group_duration`` seconds.  Energy drains by role (idle 1, client 2,
owner 11 units/second) from a battery sized to last 365 idle days.  The
run is driven by a single seeded RNG and a single event heap, so equal
configuration and seed reproduce the result byte for byte.

Attackers manipulate the tie-breaker bit when initiating (standard
negotiation only; commitment variants reduce manipulation to honest
randomness) and may reject assigned owner roles by quitting prematurely
and retrying.  Defending devices keep per-peer profiles and refuse to
negotiate with peers classified as hostile, both when receiving a request
and before accepting an owner role.

Energy accounting is integer end to end: a device operates through each
whole second it can fully fund and leaves service at the first second
boundary it cannot, keeping ``capacity - remaining`` exactly equal to the
rate-weighted role seconds.  The reported depletion instant interpolates
the sub-second remainder.
"""

from __future__ import annotations

import dataclasses
import heapq
import json
import math
import random
from dataclasses import dataclass
from enum import Enum

from .learning import (
    SECONDS_PER_DAY,
    FAIRNESS_THRESHOLD,
    Ignorance,
    InvalidConfig,
    InvalidDuration,
    PeerProfile,
    assess,
    should_reject,
)
from .protocol import NegotiationMode, TieBreakerBit

DEFAULT_CAPACITY = 365 * SECONDS_PER_DAY  # idle-rate units for a 365-day battery

DEFAULT_RETRY_CAP = 16

# A peer must have been interacting for this long (and have a usable
# window) before rejection can kick in; rebuilt from scratch whenever the
# window drains empty.  Ten hours puts a minute-scale schedule past the
# small-window confidence regimes below before its first evaluation.
MIN_PAIR_AGE_SECONDS = 10 * 3600

# Rejection fires only when the lower confidence bound of the observed
# owner-time share clears the fairness threshold.  The margin comes in
# three regimes: sparse windows (slow schedules never accumulate more
# than a dozen negotiations per pair, so the bound must stay loose to
# catch saturated attackers there), mid-size windows (z=1), and ample
# ones (z=3, keeping borderline-fair peers from locking in on noise).
# Fast schedules pass the pair-age gate only after leaving the sparse
# regime, so the loose bound never applies to them.
SPARSE_WINDOW_NEGOTIATIONS = 40
GUARD_Z_SPARSE = 0.4
GUARD_Z_LIMITED = 1.0
GUARD_Z_AMPLE = 3.0

# Once the guard fires, the rejection is held for a full window span.
# Without the hold, a window whose records trickled in over many days
# drains one bucket at a time, dips below the eligibility floor,
# re-admits a forced session, and oscillates there indefinitely.
FLAG_HOLD_SECONDS = 30 * SECONDS_PER_DAY


class Role(Enum):
    IDLE = "idle"
    CLIENT = "client"
    GO = "go"


@dataclass(frozen=True)
class EnergyModel:
    """Per-second drain rates: base always applies, extras stack by role."""

    base_rate: int = 1
    client_extra: int = 1
    go_extra: int = 10

    def __post_init__(self) -> None:
        if self.base_rate < 0 or self.client_extra < 0 or self.go_extra < 0:
            raise InvalidConfig("energy rates cannot be negative")

    def rate_for(self, role: Role) -> int:
        if role is Role.IDLE:
            return self.base_rate
        if role is Role.CLIENT:
            return self.base_rate + self.client_extra
        return self.base_rate + self.go_extra


DEFAULT_ENERGY = EnergyModel()


@dataclass
class Battery:
    capacity: int = DEFAULT_CAPACITY
    remaining: int | None = None
    depleted_at: float | None = None

    def __post_init__(self) -> None:
        if self.remaining is None:
            self.remaining = self.capacity
        if self.capacity <= 0:
            raise InvalidConfig(f"battery capacity must be positive: {self.capacity}")
        if not 0 <= self.remaining <= self.capacity:
            raise InvalidConfig(f"remaining charge outside [0, {self.capacity}]: {self.remaining}")


def drain(battery: Battery, role: Role, duration: float, now: float = 0.0,
          model: EnergyModel = DEFAULT_ENERGY) -> Battery:
    """Drain for ``duration`` seconds in ``role``, clamping at empty.

    The depletion instant is recorded by linear interpolation within the
    segment the crossing happens in.
    """
    if duration < 0:
        raise InvalidDuration(f"duration cannot be negative: {duration!r}")
    rate = model.rate_for(role)
    cost = rate * duration
    if cost <= battery.remaining:
        battery.remaining -= cost
    else:
        if battery.depleted_at is None and rate > 0:
            battery.depleted_at = now + battery.remaining / rate
        battery.remaining = 0
    return battery


@dataclass(frozen=True)
class Schedule:
    period: int
    group_duration: int

    def __post_init__(self) -> None:
        if self.period <= 0 or not 0 < self.group_duration <= self.period:
            raise InvalidConfig(
                f"need 0 < group_duration <= period, got {self.group_duration}/{self.period}"
            )


MINUTE_SCHEDULE = Schedule(period=360, group_duration=60)      # 1 minute of group every 6
HOUR_SCHEDULE = Schedule(period=43200, group_duration=3600)    # 1 hour of group every 12


@dataclass(frozen=True)
class AttackProfile:
    tbb_strength: float = 0.0   # chance of forcing the tie bit per initiated negotiation
    r_strength: float = 0.0     # chance of quitting prematurely when assigned owner
    retry_cap: int = DEFAULT_RETRY_CAP

    def __post_init__(self) -> None:
        if not 0.0 <= self.tbb_strength <= 1.0:
            raise InvalidConfig(f"tbb_strength outside [0, 1]: {self.tbb_strength}")
        if not 0.0 <= self.r_strength <= 1.0:
            raise InvalidConfig(f"r_strength outside [0, 1]: {self.r_strength}")
        if self.retry_cap < 0:
            raise InvalidConfig(f"retry_cap cannot be negative: {self.retry_cap}")


class DefenseMode(Enum):
    STANDARD = "S"
    LEARNING = "L"
    COMMITMENT = "C"
    LEARNING_COMMITMENT = "LC"

    @property
    def uses_learning(self) -> bool:
        return self in (DefenseMode.LEARNING, DefenseMode.LEARNING_COMMITMENT)

    @property
    def uses_commitment(self) -> bool:
        return self in (DefenseMode.COMMITMENT, DefenseMode.LEARNING_COMMITMENT)


@dataclass(frozen=True)
class DeviceConfig:
    device_id: str
    defense: DefenseMode = DefenseMode.STANDARD
    schedule: Schedule | None = None   # None: never initiates, only responds
    attack: AttackProfile | None = None
    battery_capacity: int = DEFAULT_CAPACITY
    phase: int | None = None           # first tick offset; None draws one per seed

    def __post_init__(self) -> None:
        if not self.device_id:
            raise InvalidConfig("device id cannot be empty")
        if self.battery_capacity <= 0:
            raise InvalidConfig(f"battery capacity must be positive: {self.battery_capacity}")
        if self.phase is not None:
            if self.schedule is None:
                raise InvalidConfig(f"{self.device_id}: phase given without a schedule")
            if not 0 <= self.phase < self.schedule.period:
                raise InvalidConfig(f"{self.device_id}: phase outside [0, period)")


class QuitDecision(Enum):
    ACCEPT = "accept"
    QUIT_AND_RETRY = "quit_and_retry"
    QUIT_AND_STOP = "quit_and_stop"


def attacker_choose_tbb(profile: AttackProfile, rng: random.Random) -> TieBreakerBit:
    """Tie bit an attacker declares: the one making the peer owner, or fair.

    Forcing only works where the declared bit decides the tie (standard
    negotiation, attacker initiating); under commitment tie-breaking the
    choice is XORed with an independent honest bit and loses all bias.
    """
    if rng.random() < profile.tbb_strength:
        return TieBreakerBit(0)
    return TieBreakerBit(rng.getrandbits(1))


def attacker_maybe_quit(profile: AttackProfile, retries_so_far: int,
                        rng: random.Random) -> QuitDecision:
    """Decide whether an attacker assigned the owner role walks out."""
    if rng.random() >= profile.r_strength:
        return QuitDecision.ACCEPT
    if retries_so_far < profile.retry_cap:
        return QuitDecision.QUIT_AND_RETRY
    return QuitDecision.QUIT_AND_STOP


@dataclass(frozen=True)
class DeviceStats:
    device_id: str
    battery_capacity: int
    remaining: int
    depletion_day: float | None
    idle_seconds: int
    client_seconds: int
    go_seconds: int
    go_time_fraction: float
    negotiations: int
    go_wins: int
    peer_quits_observed: int
    tie_rounds: int
    go_assignments: int
    rejections_issued: int
    initiations_avoided: int
    skips_busy: int
    sessions_exhausted: int


def energy_conserved(stats: DeviceStats, model: EnergyModel = DEFAULT_ENERGY) -> bool:
    spent = (model.rate_for(Role.IDLE) * stats.idle_seconds
             + model.rate_for(Role.CLIENT) * stats.client_seconds
             + model.rate_for(Role.GO) * stats.go_seconds)
    return stats.battery_capacity - stats.remaining == spent


@dataclass(frozen=True)
class SimResult:
    seed: int
    mode: str
    horizon_seconds: int
    devices: tuple[DeviceStats, ...]
    sessions: tuple[tuple, ...]

    def device(self, device_id: str) -> DeviceStats:
        for stats in self.devices:
            if stats.device_id == device_id:
                return stats
        raise KeyError(device_id)

    def to_json(self) -> str:
        payload = {
            "seed": self.seed,
            "mode": self.mode,
            "horizon_seconds": self.horizon_seconds,
            "devices": [dataclasses.asdict(d) for d in self.devices],
            "sessions": [list(s) for s in self.sessions],
        }
        return json.dumps(payload, sort_keys=True, separators=(",", ":"))


# Event kinds, ordered so that at equal timestamps groups end before
# deaths resolve and both precede new session ticks.
_EV_GROUP_END = 0
_EV_DEATH = 1
_EV_TICK = 2


class _Group:
    __slots__ = ("go", "client", "start", "active")

    def __init__(self, go: "_Device", client: "_Device", start: int):
        self.go = go
        self.client = client
        self.start = start
        self.active = True


class _Device:
    __slots__ = (
        "index", "cfg", "id", "defense", "schedule", "attack",
        "remaining", "capacity", "rate", "role", "last_update", "energy_version",
        "idle_seconds", "client_seconds", "go_seconds",
        "alive", "depletion_time", "group",
        "profiles", "pair_start", "guard_cache", "flag_hold",
        "negotiations", "go_wins", "peer_quits_observed",
        "tie_rounds", "go_assignments",
        "rejections_issued", "initiations_avoided", "skips_busy", "sessions_exhausted",
    )

    def __init__(self, index: int, cfg: DeviceConfig):
        self.index = index
        self.cfg = cfg
        self.id = cfg.device_id
        self.defense = cfg.defense
        self.schedule = cfg.schedule
        self.attack = cfg.attack
        self.capacity = cfg.battery_capacity
        self.remaining = cfg.battery_capacity
        self.rate = 0
        self.role = Role.IDLE
        self.last_update = 0
        self.energy_version = 0
        self.idle_seconds = 0
        self.client_seconds = 0
        self.go_seconds = 0
        self.alive = True
        self.depletion_time: float | None = None
        self.group: _Group | None = None
        self.profiles: dict[str, PeerProfile] = {}
        self.pair_start: dict[str, int] = {}
        self.guard_cache: dict[str, tuple[int, bool]] = {}
        self.flag_hold: dict[str, int] = {}
        self.negotiations = 0
        self.go_wins = 0
        self.peer_quits_observed = 0
        self.tie_rounds = 0
        self.go_assignments = 0
        self.rejections_issued = 0
        self.initiations_avoided = 0
        self.skips_busy = 0
        self.sessions_exhausted = 0


class _Simulator:
    def __init__(self, configs: list[DeviceConfig], mode: NegotiationMode,
                 horizon: int, seed: int, energy: EnergyModel):
        self.mode = mode
        self.horizon = horizon
        self.seed = seed
        self.energy = energy
        self.rng = random.Random(seed)
        self.devices = [_Device(i, cfg) for i, cfg in enumerate(configs)]
        self.heap: list[tuple] = []
        self.seq = 0
        self.groups: list[_Group] = []
        self.sessions: list[tuple] = []
        self.idle_rate = energy.rate_for(Role.IDLE)
        self.client_rate = energy.rate_for(Role.CLIENT)
        self.go_rate = energy.rate_for(Role.GO)
        for dev in self.devices:
            dev.rate = self.idle_rate

    def _push(self, time: int, kind: int, a: int, b: int = 0) -> None:
        self.seq += 1
        heapq.heappush(self.heap, (time, kind, self.seq, a, b))

    def _advance(self, dev: _Device, now: int) -> None:
        dt = now - dev.last_update
        if dt <= 0:
            return
        dev.remaining -= dev.rate * dt
        if dev.remaining < 0:
            raise RuntimeError(f"{dev.id}: energy went negative at t={now}")
        if dev.role is Role.IDLE:
            dev.idle_seconds += dt
        elif dev.role is Role.CLIENT:
            dev.client_seconds += dt
        else:
            dev.go_seconds += dt
        dev.last_update = now

    def _set_role(self, dev: _Device, now: int, role: Role, until: int | None = None) -> None:
        """Switch drain rate; schedule depletion if it can strike before
        ``until`` (the next known role change, default the horizon)."""
        self._advance(dev, now)
        dev.role = role
        dev.rate = self.energy.rate_for(role)
        dev.energy_version += 1
        if dev.rate > 0:
            die_at = now + dev.remaining // dev.rate
            if die_at <= (self.horizon if until is None else until):
                self._push(die_at, _EV_DEATH, dev.index, dev.energy_version)

    def _record_negotiation(self, dev: _Device, peer: _Device, t: int,
                            self_was_go: bool, peer_quit: bool) -> None:
        prof = dev.profiles.get(peer.id)
        if prof is None:
            prof = PeerProfile(peer.id)
            dev.profiles[peer.id] = prof
        day = t // SECONDS_PER_DAY
        prof.roll_to(day)
        if prof.negotiations == 0:
            dev.pair_start[peer.id] = t
        prof.record_negotiation(day, self_was_go, peer_quit)
        dev.negotiations += 1
        if self_was_go:
            dev.go_wins += 1
        if peer_quit:
            dev.peer_quits_observed += 1

    def _record_group_time(self, dev: _Device, peer: _Device, t: int,
                           go_seconds: int, comm_seconds: int) -> None:
        prof = dev.profiles.get(peer.id)
        if prof is None:
            prof = PeerProfile(peer.id)
            dev.profiles[peer.id] = prof
        prof.record_group_time(t // SECONDS_PER_DAY, go_seconds, comm_seconds)

    def _rejects(self, dev: _Device, peer: _Device, now: int) -> bool:
        """Whether ``dev`` currently refuses to deal with ``peer``."""
        if now < dev.flag_hold.get(peer.id, 0):
            return True
        prof = dev.profiles.get(peer.id)
        if prof is None:
            return False
        prof.roll_to(now // SECONDS_PER_DAY)
        n = prof.negotiations
        if n == 0:
            return False
        if now - dev.pair_start[peer.id] < MIN_PAIR_AGE_SECONDS:
            return False
        cached = dev.guard_cache.get(peer.id)
        if cached is not None and cached[0] == prof.version:
            result = cached[1]
        else:
            assessment = assess(prof)
            if assessment.ignorance is Ignorance.HIGH or not should_reject(assessment):
                result = False
            else:
                pf = assessment.peer_fairness
                if assessment.ignorance is Ignorance.LOW:
                    z = GUARD_Z_AMPLE
                elif n < SPARSE_WINDOW_NEGOTIATIONS:
                    z = GUARD_Z_SPARSE
                else:
                    z = GUARD_Z_LIMITED
                result = pf - z * math.sqrt(pf * (1.0 - pf) / n) > FAIRNESS_THRESHOLD
            dev.guard_cache[peer.id] = (prof.version, result)
        if result:
            dev.flag_hold[peer.id] = now + FLAG_HOLD_SECONDS
        return result

    def _tick(self, t: int, dev: _Device) -> None:
        if not dev.alive:
            return
        nxt = t + dev.schedule.period
        if nxt < self.horizon:
            self._push(nxt, _EV_TICK, dev.index)
        if dev.group is not None:
            dev.skips_busy += 1
            return
        candidates = [d for d in self.devices if d is not dev]
        if not candidates:
            return
        if len(candidates) == 1:
            peer = candidates[0]
        else:
            peer = candidates[self.rng.randrange(len(candidates))]
        if dev.defense.uses_learning and self._rejects(dev, peer, t):
            dev.initiations_avoided += 1
            self.sessions.append((t, "avoided", dev.id, peer.id, "", 0, 0))
            return
        if peer.group is not None or not peer.alive:
            dev.skips_busy += 1
            return
        if peer.defense.uses_learning and self._rejects(peer, dev, t):
            # a refused requester restarts the hold clock; only staying
            # away for a full window span earns a clean slate
            peer.flag_hold[dev.id] = t + FLAG_HOLD_SECONDS
            peer.rejections_issued += 1
            self.sessions.append((t, "rejected", dev.id, peer.id, "", 0, 0))
            return
        self._session(t, dev, peer)

    def _session(self, t: int, initiator: _Device, responder: _Device) -> None:
        if initiator.defense.uses_commitment or responder.defense.uses_commitment:
            variant = self.mode
        else:
            variant = NegotiationMode.STANDARD
        rng = self.rng
        rounds = 0
        quits = 0
        retries = 0
        while True:
            rounds += 1
            if variant is NegotiationMode.STANDARD:
                # intent values tie at zero, so the initiator's declared
                # bit decides ownership outright
                if initiator.attack is not None:
                    effective = attacker_choose_tbb(initiator.attack, rng)
                else:
                    effective = rng.getrandbits(1)
            else:
                if initiator.attack is not None:
                    bit_i = attacker_choose_tbb(initiator.attack, rng)
                else:
                    bit_i = rng.getrandbits(1)
                if responder.attack is not None:
                    bit_r = attacker_choose_tbb(responder.attack, rng)
                else:
                    bit_r = rng.getrandbits(1)
                effective = bit_i ^ bit_r
            if effective:
                owner, member = initiator, responder
            else:
                owner, member = responder, initiator
            initiator.tie_rounds += 1
            responder.tie_rounds += 1
            owner.go_assignments += 1
            # a defending device re-checks the peer each time it is
            # assigned the owner role
            if owner.defense.uses_learning and self._rejects(owner, member, t):
                owner.rejections_issued += 1
                self.sessions.append((t, "declined", initiator.id, responder.id, owner.id, rounds, quits))
                return
            if owner.attack is not None and owner.attack.r_strength > 0.0:
                decision = attacker_maybe_quit(owner.attack, retries, rng)
                if decision is not QuitDecision.ACCEPT:
                    quits += 1
                    self._record_negotiation(owner, member, t, True, False)
                    self._record_negotiation(member, owner, t, False, True)
                    if decision is QuitDecision.QUIT_AND_RETRY:
                        retries += 1
                        continue
                    initiator.sessions_exhausted += 1
                    self.sessions.append((t, "exhausted", initiator.id, responder.id, "", rounds, quits))
                    return
            self._record_negotiation(owner, member, t, True, False)
            self._record_negotiation(member, owner, t, False, False)
            end = min(t + initiator.schedule.group_duration, self.horizon)
            if end > t:
                group = _Group(owner, member, t)
                owner.group = group
                member.group = group
                self._set_role(owner, t, Role.GO, until=end)
                self._set_role(member, t, Role.CLIENT, until=end)
                self.groups.append(group)
                self._push(end, _EV_GROUP_END, len(self.groups) - 1)
            self.sessions.append((t, "group", initiator.id, responder.id, owner.id, rounds, quits))
            return

    def _end_group(self, t: int, group: _Group) -> None:
        if not group.active:
            return
        group.active = False
        duration = t - group.start
        for dev in (group.go, group.client):
            dev.group = None
            self._set_role(dev, t, Role.IDLE)
        if duration > 0:
            self._record_group_time(group.go, group.client, t, duration, duration)
            self._record_group_time(group.client, group.go, t, 0, duration)

    def _death(self, t: int, dev: _Device, version: int) -> None:
        if not dev.alive or version != dev.energy_version:
            return
        self._advance(dev, t)
        if dev.remaining >= dev.rate:
            return
        dev.alive = False
        dev.energy_version += 1
        dev.depletion_time = t + (dev.remaining / dev.rate if dev.rate > 0 else 0.0)
        group = dev.group
        if group is not None:
            self._end_group(t, group)

    def run(self) -> SimResult:
        for dev in self.devices:
            # seed the idle-drain death event so even a silent device
            # depletes on schedule
            self._set_role(dev, 0, Role.IDLE)
            if dev.schedule is not None:
                phase = dev.cfg.phase
                if phase is None:
                    phase = self.rng.randrange(dev.schedule.period)
                if phase < self.horizon:
                    self._push(phase, _EV_TICK, dev.index)
        heap = self.heap
        while heap:
            t, kind, _seq, a, b = heapq.heappop(heap)
            if t > self.horizon:
                break
            if kind == _EV_TICK:
                self._tick(t, self.devices[a])
            elif kind == _EV_GROUP_END:
                self._end_group(t, self.groups[a])
            else:
                self._death(t, self.devices[a], b)
        stats = []
        for dev in self.devices:
            if dev.alive:
                self._advance(dev, self.horizon)
            accounted = dev.idle_seconds + dev.client_seconds + dev.go_seconds
            stats.append(DeviceStats(
                device_id=dev.id,
                battery_capacity=dev.capacity,
                remaining=dev.remaining,
                depletion_day=(None if dev.depletion_time is None
                               else dev.depletion_time / SECONDS_PER_DAY),
                idle_seconds=dev.idle_seconds,
                client_seconds=dev.client_seconds,
                go_seconds=dev.go_seconds,
                go_time_fraction=(dev.go_seconds / accounted if accounted else 0.0),
                negotiations=dev.negotiations,
                go_wins=dev.go_wins,
                peer_quits_observed=dev.peer_quits_observed,
                tie_rounds=dev.tie_rounds,
                go_assignments=dev.go_assignments,
                rejections_issued=dev.rejections_issued,
                initiations_avoided=dev.initiations_avoided,
                skips_busy=dev.skips_busy,
                sessions_exhausted=dev.sessions_exhausted,
            ))
        return SimResult(
            seed=self.seed,
            mode=self.mode.value,
            horizon_seconds=self.horizon,
            devices=tuple(stats),
            sessions=tuple(self.sessions),
        )


def run(devices: list[DeviceConfig], mode: NegotiationMode = NegotiationMode.PROBE_COMMIT,
        horizon: int = 400 * SECONDS_PER_DAY, seed: int = 0,
        energy: EnergyModel = DEFAULT_ENERGY) -> SimResult:
    """Simulate the device population until ``horizon`` seconds.

    ``mode`` selects which commitment handshake defended pairs use; pairs
    with no commitment-mode member always run the standard exchange.
    """
    if len(devices) < 2:
        raise InvalidConfig("need at least 2 devices")
    ids = [cfg.device_id for cfg in devices]
    if len(set(ids)) != len(ids):
        raise InvalidConfig(f"duplicate device ids: {ids}")
    if horizon <= 0:
        raise InvalidConfig(f"horizon must be positive: {horizon}")
    if mode is NegotiationMode.STANDARD:
        for cfg in devices:
            if cfg.defense.uses_commitment:
                raise InvalidConfig(
                    f"{cfg.device_id} needs a commitment negotiation mode, got standard"
                )
    if all(cfg.schedule is None for cfg in devices):
        raise InvalidConfig("no device has a schedule; nothing would ever happen")
    return _Simulator(devices, mode, horizon, seed, energy).run()
