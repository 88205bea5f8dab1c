"""Experiment presets, sweep execution, and CSV emission.

The built-in presets mirror the depletion experiments: a tie-bit
manipulation sweep and a quit-and-retry sweep on a two-device pair with
minute-scale groups, and attacker-ratio sweeps over five- and ten-device
populations with hour-scale groups.  A sweep crosses every grid value
with every requested defense mode, runs one simulation per seed in a
consecutive block, and reports the victim's depletion time.  Rows come
back ordered by grid value, then mode, and serialize to CSV bytes that
are identical from run to run.

``main`` is the console entry point: pick a preset with ``--experiment``
or describe a custom sweep in a key=value config file via ``--config``.
"""

from __future__ import annotations

import argparse
import dataclasses
import statistics
import sys
from dataclasses import dataclass
from pathlib import Path

from .learning import SECONDS_PER_DAY, InvalidConfig
from .protocol import NegotiationMode
from .simulation import (
    HOUR_SCHEDULE,
    MINUTE_SCHEDULE,
    AttackProfile,
    DefenseMode,
    DeviceConfig,
    Schedule,
    run,
)

PRESET_NAMES = (
    "var_tbb_strength",
    "var_r_strength",
    "attacker_ratio_5",
    "attacker_ratio_10",
)

_SWEEPS = ("tbb_strength", "r_strength", "attacker_ratio")

STRENGTH_GRID = tuple(round(i / 10, 1) for i in range(11))
RATIO_GRID = (0.25, 0.5, 0.75)

_ALL_MODES = (
    DefenseMode.STANDARD,
    DefenseMode.LEARNING,
    DefenseMode.COMMITMENT,
    DefenseMode.LEARNING_COMMITMENT,
)


@dataclass(frozen=True)
class ExperimentConfig:
    """One sweep: a grid of attack parameters crossed with defense modes."""

    experiment: str
    device_count: int
    modes: tuple[DefenseMode, ...]
    sweep: str
    grid: tuple[float, ...]
    seeds: int = 10
    seed_base: int = 0
    horizon_days: int = 400
    schedule: Schedule = MINUTE_SCHEDULE
    tbb_strength: float = 1.0
    r_strength: float = 0.0
    retry_cap: int = 16
    variant: NegotiationMode = NegotiationMode.PROBE_COMMIT

    def __post_init__(self) -> None:
        if not self.experiment:
            raise InvalidConfig("experiment label cannot be empty")
        if self.device_count < 2:
            raise InvalidConfig(f"need at least 2 devices: {self.device_count}")
        if not self.modes:
            raise InvalidConfig("no defense modes requested")
        if len(set(self.modes)) != len(self.modes):
            raise InvalidConfig(f"duplicate defense modes: {[m.value for m in self.modes]}")
        if self.sweep not in _SWEEPS:
            raise InvalidConfig(f"unknown sweep variable {self.sweep!r}, expected one of {_SWEEPS}")
        if not self.grid:
            raise InvalidConfig("sweep grid cannot be empty")
        for value in self.grid:
            if not 0.0 <= value <= 1.0:
                raise InvalidConfig(f"grid value outside [0, 1]: {value}")
        if self.seeds < 1:
            raise InvalidConfig(f"need at least 1 seed: {self.seeds}")
        if self.horizon_days < 1:
            raise InvalidConfig(f"horizon must be at least a day: {self.horizon_days}")
        for name in ("tbb_strength", "r_strength"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise InvalidConfig(f"{name} outside [0, 1]: {value}")
        if self.retry_cap < 0:
            raise InvalidConfig(f"retry cap cannot be negative: {self.retry_cap}")
        if self.variant is NegotiationMode.STANDARD:
            raise InvalidConfig("variant must be a commitment handshake; "
                                "standard pairs get it automatically")


@dataclass(frozen=True)
class ResultRow:
    """Aggregated victim depletion for one (grid value, defense mode) cell."""

    sweep_value: float
    mode: DefenseMode
    mean_days: float
    stddev_days: float
    seed_days: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.seed_days:
            raise ValueError("a result row needs at least one seed value")
        lo, hi = min(self.seed_days), max(self.seed_days)
        if not lo - 1e-9 <= self.mean_days <= hi + 1e-9:
            raise ValueError(f"mean {self.mean_days} outside seed range [{lo}, {hi}]")


def preset(name: str) -> ExperimentConfig:
    """Built-in experiment configuration by name."""
    if name == "var_tbb_strength":
        return ExperimentConfig(experiment=name, device_count=2, modes=_ALL_MODES,
                                sweep="tbb_strength", grid=STRENGTH_GRID,
                                schedule=MINUTE_SCHEDULE)
    if name == "var_r_strength":
        return ExperimentConfig(experiment=name, device_count=2, modes=_ALL_MODES,
                                sweep="r_strength", grid=STRENGTH_GRID,
                                schedule=MINUTE_SCHEDULE, tbb_strength=0.5)
    if name in ("attacker_ratio_5", "attacker_ratio_10"):
        count = 5 if name.endswith("_5") else 10
        return ExperimentConfig(experiment=name, device_count=count,
                                modes=(DefenseMode.STANDARD, DefenseMode.LEARNING),
                                sweep="attacker_ratio", grid=RATIO_GRID,
                                schedule=HOUR_SCHEDULE, tbb_strength=1.0)
    raise InvalidConfig(f"unknown experiment preset {name!r}, "
                        f"expected one of {PRESET_NAMES}")


def build_devices(cfg: ExperimentConfig, mode: DefenseMode,
                  value: float) -> list[DeviceConfig]:
    """Device population for one grid cell.

    Device 0 is always the honest victim.  Strength sweeps field a single
    attacker; in the two-device case the victim never initiates, so the
    attacker alone drives the schedule.  Ratio sweeps convert the grid
    value into an attacker headcount among the victim's peers (rounding
    half up) and schedule every device.
    """
    tbb, quit_rate = cfg.tbb_strength, cfg.r_strength
    ratio = None
    if cfg.sweep == "tbb_strength":
        tbb = value
    elif cfg.sweep == "r_strength":
        quit_rate = value
    else:
        ratio = value
    others = cfg.device_count - 1
    attackers = 1 if ratio is None else int(ratio * others + 0.5)
    attack = AttackProfile(tbb_strength=tbb, r_strength=quit_rate,
                           retry_cap=cfg.retry_cap)
    victim_schedule = None if ratio is None and cfg.device_count == 2 else cfg.schedule
    devices = [DeviceConfig("victim", defense=mode, schedule=victim_schedule)]
    for i in range(attackers):
        devices.append(DeviceConfig(f"attacker{i}", schedule=cfg.schedule,
                                    attack=attack))
    for i in range(others - attackers):
        devices.append(DeviceConfig(f"peer{i}", defense=mode,
                                    schedule=cfg.schedule))
    return devices


def run_experiment(cfg: ExperimentConfig) -> list[ResultRow]:
    """Execute the sweep; one simulation per (grid value, mode, seed).

    A victim still alive at the horizon is reported as the horizon in
    days, so censored runs lower-bound the mean instead of skewing it.
    """
    horizon = cfg.horizon_days * SECONDS_PER_DAY
    rows = []
    for value in cfg.grid:
        for mode in cfg.modes:
            negotiation = cfg.variant if mode.uses_commitment else NegotiationMode.STANDARD
            days = []
            for offset in range(cfg.seeds):
                result = run(build_devices(cfg, mode, value), mode=negotiation,
                             horizon=horizon, seed=cfg.seed_base + offset)
                depleted = result.device("victim").depletion_day
                days.append(depleted if depleted is not None else float(cfg.horizon_days))
            stddev = statistics.stdev(days) if len(days) > 1 else 0.0
            rows.append(ResultRow(value, mode, statistics.fmean(days), stddev,
                                  tuple(days)))
    return rows


def emit_csv(rows: list[ResultRow]) -> bytes:
    """Serialize rows deterministically; same rows, same bytes."""
    if rows:
        count = len(rows[0].seed_days)
        for row in rows:
            if len(row.seed_days) != count:
                raise InvalidConfig("rows disagree on seed count")
        header = ("sweep,mode,mean_days,stddev_days,"
                  + ",".join(f"seed_{i}" for i in range(count)))
    else:
        header = "sweep,mode,mean_days,stddev_days"
    lines = [header]
    for row in rows:
        cells = [repr(row.sweep_value), row.mode.value,
                 f"{row.mean_days:.6f}", f"{row.stddev_days:.6f}"]
        cells.extend(f"{d:.6f}" for d in row.seed_days)
        lines.append(",".join(cells))
    return ("\n".join(lines) + "\n").encode("ascii")


def _parse_modes(text: str) -> tuple[DefenseMode, ...]:
    by_value = {m.value: m for m in DefenseMode}
    modes = []
    for token in text.split(","):
        token = token.strip()
        if token not in by_value:
            raise InvalidConfig(f"unknown defense mode {token!r}, "
                                f"expected one of {sorted(by_value)}")
        modes.append(by_value[token])
    return tuple(modes)


def _parse_grid(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(token) for token in text.split(","))
    except ValueError:
        raise InvalidConfig(f"grid must be comma-separated numbers: {text!r}") from None


def _parse_schedule(text: str) -> Schedule:
    if text == "minute":
        return MINUTE_SCHEDULE
    if text == "hour":
        return HOUR_SCHEDULE
    period, sep, duration = text.partition("/")
    if sep:
        try:
            return Schedule(int(period), int(duration))
        except ValueError:
            pass
    raise InvalidConfig(f"schedule must be 'minute', 'hour', or "
                        f"'<period>/<duration>' in seconds: {text!r}")


def _parse_variant(text: str) -> NegotiationMode:
    if text == NegotiationMode.PROBE_COMMIT.value:
        return NegotiationMode.PROBE_COMMIT
    if text == NegotiationMode.INLINE_COMMIT.value:
        return NegotiationMode.INLINE_COMMIT
    raise InvalidConfig(f"variant must be '{NegotiationMode.PROBE_COMMIT.value}' or "
                        f"'{NegotiationMode.INLINE_COMMIT.value}': {text!r}")


_CONFIG_PARSERS = {
    "experiment": str,
    "device_count": int,
    "modes": _parse_modes,
    "sweep": str,
    "grid": _parse_grid,
    "seeds": int,
    "seed_base": int,
    "horizon_days": int,
    "schedule": _parse_schedule,
    "tbb_strength": float,
    "r_strength": float,
    "retry_cap": int,
    "variant": _parse_variant,
}


def parse_experiment_config(text: str) -> ExperimentConfig:
    """Build a configuration from key=value lines.

    Unset keys fall back to a two-device tie-bit sweep over all four
    defense modes.  ``#`` starts a comment; keys may not repeat.
    """
    overrides: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise InvalidConfig(f"line {lineno}: expected key=value, got {raw.strip()!r}")
        parser = _CONFIG_PARSERS.get(key)
        if parser is None:
            raise InvalidConfig(f"line {lineno}: unknown key {key!r}, "
                                f"expected one of {sorted(_CONFIG_PARSERS)}")
        if key in overrides:
            raise InvalidConfig(f"line {lineno}: duplicate key {key!r}")
        try:
            overrides[key] = parser(value)
        except InvalidConfig as exc:
            raise InvalidConfig(f"line {lineno}: {exc}") from None
        except ValueError:
            raise InvalidConfig(f"line {lineno}: bad value for {key}: {value!r}") from None
    settings: dict[str, object] = {
        "experiment": "custom",
        "device_count": 2,
        "modes": _ALL_MODES,
        "sweep": "tbb_strength",
        "grid": STRENGTH_GRID,
    }
    settings.update(overrides)
    return ExperimentConfig(**settings)  # type: ignore[arg-type]


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="wfdsim",
        description="Run battery-depletion experiments and emit CSV.")
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--experiment", choices=PRESET_NAMES,
                        help="built-in experiment preset")
    source.add_argument("--config", metavar="PATH",
                        help="key=value config file describing a custom sweep")
    parser.add_argument("--modes", metavar="LIST",
                        help="comma-separated defense modes, e.g. S,L")
    parser.add_argument("--seeds", type=int, metavar="N",
                        help="seeds per grid cell")
    parser.add_argument("--seed-base", type=int, metavar="N",
                        help="first seed of the consecutive block")
    parser.add_argument("--horizon-days", type=int, metavar="N",
                        help="simulated days per run")
    parser.add_argument("--variant",
                        choices=(NegotiationMode.PROBE_COMMIT.value,
                                 NegotiationMode.INLINE_COMMIT.value),
                        help="commitment handshake used by C and LC modes")
    parser.add_argument("--out", metavar="PATH",
                        help="write CSV here instead of stdout")
    args = parser.parse_args(argv)
    try:
        if args.config is not None:
            try:
                text = Path(args.config).read_text(encoding="utf-8")
            except OSError as exc:
                raise InvalidConfig(f"cannot read config file: {exc}") from None
            cfg = parse_experiment_config(text)
        else:
            cfg = preset(args.experiment)
        overrides: dict[str, object] = {}
        if args.modes is not None:
            overrides["modes"] = _parse_modes(args.modes)
        if args.seeds is not None:
            overrides["seeds"] = args.seeds
        if args.seed_base is not None:
            overrides["seed_base"] = args.seed_base
        if args.horizon_days is not None:
            overrides["horizon_days"] = args.horizon_days
        if args.variant is not None:
            overrides["variant"] = _parse_variant(args.variant)
        if overrides:
            cfg = dataclasses.replace(cfg, **overrides)
        payload = emit_csv(run_experiment(cfg))
    except InvalidConfig as exc:
        print(f"wfdsim: {exc}", file=sys.stderr)
        return 2
    if args.out is not None:
        try:
            Path(args.out).write_bytes(payload)
        except OSError as exc:
            print(f"wfdsim: cannot write {args.out}: {exc}", file=sys.stderr)
            return 1
    else:
        sys.stdout.buffer.write(payload)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
