"""Peer-behaviour profiling and attacker classification.

Each device keeps, per peer, a 30-day sliding window of daily counters:
negotiations run, negotiations this device won (became owner), premature
quits by the peer, and owner/total communication seconds.  Three window
shares are derived from it:

* share of negotiations this device ended up owner,
* share of negotiations the peer walked out of prematurely,
* share of communication time this device spent as owner.

The shares are discretised into five bands, the window size into three
history depths, and a small naive-Bayes model turns the result into a
posterior over five peer dispositions.  A peer is treated as hostile when
enough posterior mass lands on the two attacker dispositions, and
rejection additionally requires the owner-time share to exceed the
fairness bound.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum, IntEnum

WINDOW_DAYS = 30
SECONDS_PER_DAY = 86400

FAIRNESS_THRESHOLD = 0.6

# Posterior mass on the two attacker dispositions above which a peer is
# classed hostile.  0.45 keeps the all-above-average window state (mass
# 0.4921) on the hostile side while every fair-leaning state stays at or
# below 0.35.
ATTACKER_MASS_THRESHOLD = 0.45


class OutOfRange(ValueError):
    """A share outside [0, 1] was offered for discretisation."""


class ClockRegression(ValueError):
    """A record arrived for an earlier day than the profile has reached."""


class InvalidDuration(ValueError):
    """Negative durations, or owner seconds exceeding session seconds."""


class DegenerateDistribution(ValueError):
    """A prior or likelihood product with no mass to normalise."""


class InvalidConfig(ValueError):
    """Malformed classifier configuration text."""


class Band(IntEnum):
    """Five-level discretisation of a share in [0, 1]."""

    LOW = 0            # [0.00, 0.25)
    SMALL = 1          # [0.25, 0.40)
    AVERAGE = 2        # [0.40, 0.60)
    ABOVE_AVERAGE = 3  # [0.60, 0.75)
    HIGH = 4           # [0.75, 1.00]


_BAND_EDGES = (0.25, 0.40, 0.60, 0.75)


def discretize_share(value: float) -> Band:
    if not 0.0 <= value <= 1.0:
        raise OutOfRange(f"share must lie in [0, 1]: {value!r}")
    for band, edge in enumerate(_BAND_EDGES):
        if value < edge:
            return Band(band)
    return Band.HIGH


class HistoryDepth(IntEnum):
    """How much window evidence backs the derived shares."""

    INSUFFICIENT = 0   # fewer than 10 negotiations
    LIMITED = 1        # 10..99
    AMPLE = 2          # 100 or more


def history_depth(negotiations: int) -> HistoryDepth:
    if negotiations < 10:
        return HistoryDepth.INSUFFICIENT
    if negotiations < 100:
        return HistoryDepth.LIMITED
    return HistoryDepth.AMPLE


class Ignorance(Enum):
    HIGH = "high"
    MEDIUM = "medium"
    LOW = "low"


_IGNORANCE_BY_DEPTH = {
    HistoryDepth.INSUFFICIENT: Ignorance.HIGH,
    HistoryDepth.LIMITED: Ignorance.MEDIUM,
    HistoryDepth.AMPLE: Ignorance.LOW,
}


class Disposition(IntEnum):
    """Peer behaviour classes the classifier distinguishes."""

    STRONG_ATTACKER = 0
    MEDIUM_ATTACKER = 1
    FAIR = 2
    BETTER_THAN_AVERAGE = 3
    ALTRUIST = 4


ATTACKER_DISPOSITIONS = (Disposition.STRONG_ATTACKER, Disposition.MEDIUM_ATTACKER)


@dataclass(frozen=True)
class FeatureVector:
    self_go: Band        # share of negotiations this device won
    peer_quit: Band      # share of negotiations the peer quit prematurely
    go_time: Band        # share of communication time spent as owner
    depth: HistoryDepth


# Likelihood of each band given disposition, one 5x5 table per history
# depth; rows are dispositions, columns are bands LOW..HIGH.  All three
# share features use the same table at a given depth.
_CPT_AMPLE = (
    (0.05, 0.10, 0.20, 0.20, 0.45),
    (0.05, 0.10, 0.20, 0.45, 0.20),
    (0.10, 0.20, 0.40, 0.20, 0.10),
    (0.20, 0.40, 0.20, 0.10, 0.10),
    (0.40, 0.20, 0.20, 0.10, 0.10),
)

_CPT_LIMITED = (
    (0.14, 0.14, 0.14, 0.22, 0.36),
    (0.13, 0.13, 0.20, 0.34, 0.20),
    (0.13, 0.20, 0.34, 0.20, 0.13),
    (0.20, 0.34, 0.20, 0.13, 0.13),
    (0.36, 0.22, 0.14, 0.14, 0.14),
)

_CPT_INSUFFICIENT = (
    (0.17, 0.17, 0.17, 0.24, 0.25),
    (0.15, 0.15, 0.23, 0.24, 0.23),
    (0.15, 0.23, 0.24, 0.23, 0.15),
    (0.23, 0.24, 0.23, 0.15, 0.15),
    (0.25, 0.24, 0.17, 0.17, 0.17),
)

DEFAULT_PRIOR = (0.15, 0.20, 0.45, 0.10, 0.10)

_ROW_SUM_TOLERANCE = 1e-9


@dataclass(frozen=True)
class Cpt:
    """Band likelihood tables keyed by history depth; rows sum to one."""

    tables: tuple[tuple[tuple[float, ...], ...], ...]

    def __post_init__(self) -> None:
        if len(self.tables) != len(HistoryDepth):
            raise InvalidConfig(f"need one table per history depth, got {len(self.tables)}")
        for depth, table in zip(HistoryDepth, self.tables):
            if len(table) != len(Disposition):
                raise InvalidConfig(f"{depth.name}: need one row per disposition")
            for disposition, row in zip(Disposition, table):
                if len(row) != len(Band):
                    raise InvalidConfig(f"{depth.name}/{disposition.name}: need one entry per band")
                if any(p < 0.0 for p in row):
                    raise InvalidConfig(f"{depth.name}/{disposition.name}: negative probability")
                if abs(sum(row) - 1.0) > _ROW_SUM_TOLERANCE:
                    raise InvalidConfig(f"{depth.name}/{disposition.name}: row sums to {sum(row)!r}")

    def row(self, depth: HistoryDepth, disposition: Disposition) -> tuple[float, ...]:
        return self.tables[depth][disposition]


DEFAULT_CPT = Cpt((_CPT_INSUFFICIENT, _CPT_LIMITED, _CPT_AMPLE))


def posterior(
    features: FeatureVector,
    cpt: Cpt = DEFAULT_CPT,
    prior: tuple[float, ...] = DEFAULT_PRIOR,
) -> tuple[float, ...]:
    """Posterior over dispositions given the three banded shares.

    The three leaves are conditionally independent given the disposition,
    so the joint collapses to a product of per-band likelihoods.
    """
    if len(prior) != len(Disposition):
        raise DegenerateDistribution(f"prior needs {len(Disposition)} entries")
    if any(p < 0.0 for p in prior) or sum(prior) <= 0.0:
        raise DegenerateDistribution(f"prior must be non-negative with positive mass: {prior!r}")
    table = cpt.tables[features.depth]
    unnorm = []
    for disposition in Disposition:
        row = table[disposition]
        unnorm.append(
            prior[disposition] * row[features.self_go] * row[features.peer_quit] * row[features.go_time]
        )
    total = sum(unnorm)
    if total <= 0.0:
        raise DegenerateDistribution("likelihood product has no mass to normalise")
    return tuple(u / total for u in unnorm)


@dataclass(slots=True)
class DailyBucket:
    day: int
    negotiations: int = 0
    self_go_wins: int = 0
    peer_premature_quits: int = 0
    self_go_seconds: int = 0
    comm_seconds: int = 0


class PeerProfile:
    """Sliding 30-day window of interaction counters for one peer.

    Buckets are kept per day and dropped from the running totals once they
    age out, so reads are O(1) and memory stays bounded no matter how long
    the conversation runs.
    """

    __slots__ = (
        "peer_id", "current_day", "version", "_buckets",
        "negotiations", "self_go_wins", "peer_premature_quits",
        "self_go_seconds", "comm_seconds",
    )

    def __init__(self, peer_id: str):
        self.peer_id = peer_id
        self.current_day = 0
        self.version = 0
        self._buckets: deque[DailyBucket] = deque()
        self.negotiations = 0
        self.self_go_wins = 0
        self.peer_premature_quits = 0
        self.self_go_seconds = 0
        self.comm_seconds = 0

    def roll_to(self, day: int) -> None:
        """Advance the window clock, expiring buckets older than 30 days."""
        if day < self.current_day:
            raise ClockRegression(f"day {day} precedes current day {self.current_day}")
        self.current_day = day
        cutoff = day - WINDOW_DAYS
        buckets = self._buckets
        while buckets and buckets[0].day <= cutoff:
            old = buckets.popleft()
            self.negotiations -= old.negotiations
            self.self_go_wins -= old.self_go_wins
            self.peer_premature_quits -= old.peer_premature_quits
            self.self_go_seconds -= old.self_go_seconds
            self.comm_seconds -= old.comm_seconds
            self.version += 1

    def _bucket_for(self, day: int) -> DailyBucket:
        self.roll_to(day)
        buckets = self._buckets
        if buckets and buckets[-1].day == day:
            return buckets[-1]
        bucket = DailyBucket(day)
        buckets.append(bucket)
        return bucket

    def record_negotiation(self, day: int, self_was_go: bool, peer_quit_prematurely: bool) -> None:
        bucket = self._bucket_for(day)
        bucket.negotiations += 1
        self.negotiations += 1
        if self_was_go:
            bucket.self_go_wins += 1
            self.self_go_wins += 1
        if peer_quit_prematurely:
            bucket.peer_premature_quits += 1
            self.peer_premature_quits += 1
        self.version += 1

    def record_group_time(self, day: int, self_go_seconds: int, comm_seconds: int) -> None:
        if comm_seconds < 0 or self_go_seconds < 0:
            raise InvalidDuration("durations cannot be negative")
        if self_go_seconds > comm_seconds:
            raise InvalidDuration(
                f"owner seconds {self_go_seconds} exceed session seconds {comm_seconds}"
            )
        bucket = self._bucket_for(day)
        bucket.self_go_seconds += self_go_seconds
        bucket.comm_seconds += comm_seconds
        self.self_go_seconds += self_go_seconds
        self.comm_seconds += comm_seconds
        self.version += 1

    def buckets(self) -> list[DailyBucket]:
        return list(self._buckets)

    def export_log(self) -> str:
        """One line per retained bucket, oldest first, for offline rechecking."""
        lines = []
        for b in self._buckets:
            lines.append(
                f"day={b.day} negotiations={b.negotiations} wins={b.self_go_wins} "
                f"quits={b.peer_premature_quits} go_seconds={b.self_go_seconds} "
                f"comm_seconds={b.comm_seconds}"
            )
        return "\n".join(lines)

    @classmethod
    def from_log(cls, peer_id: str, text: str) -> "PeerProfile":
        profile = cls(peer_id)
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line:
                continue
            fields = {}
            for item in line.split():
                key, _, value = item.partition("=")
                if not _ or not value.lstrip("-").isdigit():
                    raise InvalidConfig(f"line {lineno}: bad field {item!r}")
                fields[key] = int(value)
            try:
                bucket = DailyBucket(**_log_fields_to_bucket(fields))
            except TypeError as exc:
                raise InvalidConfig(f"line {lineno}: {exc}") from exc
            target = profile._bucket_for(bucket.day)
            target.negotiations += bucket.negotiations
            target.self_go_wins += bucket.self_go_wins
            target.peer_premature_quits += bucket.peer_premature_quits
            target.self_go_seconds += bucket.self_go_seconds
            target.comm_seconds += bucket.comm_seconds
            profile.negotiations += bucket.negotiations
            profile.self_go_wins += bucket.self_go_wins
            profile.peer_premature_quits += bucket.peer_premature_quits
            profile.self_go_seconds += bucket.self_go_seconds
            profile.comm_seconds += bucket.comm_seconds
            profile.version += 1
        return profile


def _log_fields_to_bucket(fields: dict[str, int]) -> dict[str, int]:
    mapping = {
        "day": "day",
        "negotiations": "negotiations",
        "wins": "self_go_wins",
        "quits": "peer_premature_quits",
        "go_seconds": "self_go_seconds",
        "comm_seconds": "comm_seconds",
    }
    out = {}
    for key, value in fields.items():
        if key not in mapping:
            raise InvalidConfig(f"unknown field {key!r}")
        out[mapping[key]] = value
    return out


def peer_fairness(profile: PeerProfile) -> float:
    """Share of communication time this device spent as owner; 0 when unknown."""
    if profile.negotiations == 0 or profile.comm_seconds == 0:
        return 0.0
    return profile.self_go_seconds / profile.comm_seconds


def features(profile: PeerProfile) -> FeatureVector:
    n = profile.negotiations
    if n == 0:
        return FeatureVector(Band.LOW, Band.LOW, Band.LOW, HistoryDepth.INSUFFICIENT)
    return FeatureVector(
        discretize_share(profile.self_go_wins / n),
        discretize_share(profile.peer_premature_quits / n),
        discretize_share(peer_fairness(profile)),
        history_depth(n),
    )


@dataclass(frozen=True)
class PeerAssessment:
    peer_id: str
    features: FeatureVector
    posterior: tuple[float, ...]
    peer_fairness: float
    ignorance: Ignorance
    is_attacker: bool
    window_negotiations: int


def assess(
    profile: PeerProfile,
    cpt: Cpt = DEFAULT_CPT,
    prior: tuple[float, ...] = DEFAULT_PRIOR,
    attacker_mass_threshold: float = ATTACKER_MASS_THRESHOLD,
) -> PeerAssessment:
    f = features(profile)
    post = posterior(f, cpt, prior)
    mass = sum(post[d] for d in ATTACKER_DISPOSITIONS)
    return PeerAssessment(
        peer_id=profile.peer_id,
        features=f,
        posterior=post,
        peer_fairness=peer_fairness(profile),
        ignorance=_IGNORANCE_BY_DEPTH[f.depth],
        is_attacker=mass > attacker_mass_threshold,
        window_negotiations=profile.negotiations,
    )


def should_reject(assessment: PeerAssessment) -> bool:
    """Reject a hostile peer only while it is actually treating us unfairly."""
    return assessment.is_attacker and assessment.peer_fairness > FAIRNESS_THRESHOLD


_DEPTH_TOKENS = {
    "insufficient": HistoryDepth.INSUFFICIENT,
    "limited": HistoryDepth.LIMITED,
    "ample": HistoryDepth.AMPLE,
}

_DISPOSITION_TOKENS = {
    "strong_attacker": Disposition.STRONG_ATTACKER,
    "medium_attacker": Disposition.MEDIUM_ATTACKER,
    "fair": Disposition.FAIR,
    "better_than_average": Disposition.BETTER_THAN_AVERAGE,
    "altruist": Disposition.ALTRUIST,
}


def parse_classifier_config(text: str) -> tuple[Cpt, tuple[float, ...]]:
    """Parse ``key = v1 v2 ...`` lines, overriding the built-in tables.

    Recognised keys are ``prior`` and ``cpt.<depth>.<disposition>``; ``#``
    starts a comment.  Unknown keys and malformed rows raise InvalidConfig.
    """
    tables = [list(map(list, table)) for table in DEFAULT_CPT.tables]
    prior = list(DEFAULT_PRIOR)
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise InvalidConfig(f"line {lineno}: expected 'key = values'")
        key = key.strip()
        try:
            values = [float(v) for v in value.split()]
        except ValueError as exc:
            raise InvalidConfig(f"line {lineno}: {exc}") from exc
        if key == "prior":
            if len(values) != len(Disposition):
                raise InvalidConfig(f"line {lineno}: prior needs {len(Disposition)} values")
            prior = values
            continue
        parts = key.split(".")
        if len(parts) != 3 or parts[0] != "cpt":
            raise InvalidConfig(f"line {lineno}: unknown key {key!r}")
        depth = _DEPTH_TOKENS.get(parts[1])
        disposition = _DISPOSITION_TOKENS.get(parts[2])
        if depth is None or disposition is None:
            raise InvalidConfig(f"line {lineno}: unknown key {key!r}")
        if len(values) != len(Band):
            raise InvalidConfig(f"line {lineno}: row needs {len(Band)} values")
        tables[depth][disposition] = values
    cpt = Cpt(tuple(tuple(tuple(row) for row in table) for table in tables))
    if any(p < 0.0 for p in prior) or sum(prior) <= 0.0:
        raise InvalidConfig(f"prior must be non-negative with positive mass: {prior!r}")
    return cpt, tuple(prior)


def format_classifier_config(cpt: Cpt = DEFAULT_CPT, prior: tuple[float, ...] = DEFAULT_PRIOR) -> str:
    lines = ["prior = " + " ".join(repr(p) for p in prior)]
    for depth_token, depth in _DEPTH_TOKENS.items():
        for disposition_token, disposition in _DISPOSITION_TOKENS.items():
            row = cpt.row(depth, disposition)
            lines.append(f"cpt.{depth_token}.{disposition_token} = " + " ".join(repr(p) for p in row))
    return "\n".join(lines) + "\n"
