"""Game-theoretic checks and feedback regulation for the token economy.

The three-community game has players Labor, Capital, Governance (payoff
tuples are ordered that way), each choosing invest/contribute/govern ``I``
or abstain ``N``. Equilibria are weak: a profile survives when no single
player can strictly gain by switching.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, Iterable, Iterator, Mapping, Sequence

from dcc.canonical import as_fraction, quantize
from dcc.errors import EmptyWindow, ParseError
from dcc.ledger import ExchangeRate, update_rate

PLAYERS = ("L", "C", "G")
STRATEGIES = ("I", "N")

Profile = tuple[str, str, str]
PROFILES: tuple[Profile, ...] = tuple(itertools.product(STRATEGIES, repeat=3))


def profile_label(profile: Profile) -> str:
    return "".join(profile)


def parse_profile(label: str) -> Profile:
    label = label.strip().upper().replace(",", "").replace(" ", "")
    if len(label) != 3 or any(c not in STRATEGIES for c in label):
        raise ValueError(f"bad profile label {label!r}")
    return tuple(label)  # type: ignore[return-value]


@dataclass(frozen=True)
class PayoffMatrix3:
    """Total map from the 8 strategy profiles to (u_L, u_C, u_G)."""

    payoff: Mapping[Profile, tuple[Fraction, Fraction, Fraction]]

    def __post_init__(self):
        missing = [p for p in PROFILES if p not in self.payoff]
        if missing:
            raise ValueError(f"payoff missing for {[profile_label(p) for p in missing]}")
        clean = {p: tuple(as_fraction(x) for x in self.payoff[p]) for p in PROFILES}
        if any(len(v) != 3 for v in clean.values()):
            raise ValueError("each payoff is a triple")
        object.__setattr__(self, "payoff", clean)

    def __getitem__(self, profile: Profile) -> tuple[Fraction, Fraction, Fraction]:
        return self.payoff[profile]

    def transformed(self, scale: Sequence, shift: Sequence) -> "PayoffMatrix3":
        """Per-player affine map u_i -> scale_i * u_i + shift_i."""
        a = [as_fraction(x) for x in scale]
        b = [as_fraction(x) for x in shift]
        return PayoffMatrix3({p: tuple(a[i] * u + b[i] for i, u in enumerate(v)) for p, v in self.payoff.items()})


def deviate(profile: Profile, player: int) -> Profile:
    s = list(profile)
    s[player] = "N" if s[player] == "I" else "I"
    return tuple(s)  # type: ignore[return-value]


@dataclass(frozen=True)
class Deviation:
    player: str
    to: Profile
    gain: Fraction


def profitable_deviation(matrix: PayoffMatrix3, profile: Profile) -> Deviation | None:
    """First unilateral switch that strictly raises the switcher's payoff."""
    for i in range(3):
        alt = deviate(profile, i)
        gain = matrix[alt][i] - matrix[profile][i]
        if gain > 0:
            return Deviation(PLAYERS[i], alt, gain)
    return None


def find_pure_nash(matrix: PayoffMatrix3) -> list[Profile]:
    return [p for p in PROFILES if profitable_deviation(matrix, p) is None]


def dominates(u: Sequence, v: Sequence) -> bool:
    """``u`` weakly better in every coordinate and strictly better in one."""
    return all(a >= b for a, b in zip(u, v)) and any(a > b for a, b in zip(u, v))


def is_pareto_optimal(profile: Profile, matrix: PayoffMatrix3) -> bool:
    return not any(dominates(matrix[q], matrix[profile]) for q in PROFILES if q != profile)


def pareto_set(matrix: PayoffMatrix3) -> list[Profile]:
    return [p for p in PROFILES if is_pareto_optimal(p, matrix)]


def parse_matrix(text: str) -> PayoffMatrix3:
    """Read 8 lines ``<profile> <u_L> <u_C> <u_G>``; ``#`` starts a comment.

    Profiles are labelled in (L, C, G) order, e.g. ``INI``.
    """
    payoff = {}
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.replace(",", " ").split()
        if len(parts) != 4:
            raise ParseError(no, f"expected a profile and 3 payoffs, got {len(parts)} fields")
        try:
            prof = parse_profile(parts[0])
            vals = tuple(as_fraction(x) for x in parts[1:])
        except (ValueError, ZeroDivisionError) as exc:
            raise ParseError(no, str(exc)) from None
        if prof in payoff:
            raise ParseError(no, f"duplicate profile {parts[0]}")
        payoff[prof] = vals
    if len(payoff) != 8:
        raise ParseError(max(1, len(text.splitlines())), f"need all 8 profiles, found {len(payoff)}")
    return PayoffMatrix3(payoff)


# -- utility conditions over an allocation grid ---------------------------------


@dataclass(frozen=True)
class Allocation:
    X_C: Fraction
    X_L: Fraction
    X_G: Fraction

    def __post_init__(self):
        for name in ("X_C", "X_L", "X_G"):
            v = as_fraction(getattr(self, name))
            if v < 0:
                raise ValueError(f"{name} must be non-negative")
            object.__setattr__(self, name, v)


_OWN = {"C": "X_C", "L": "X_L", "G": "X_G"}


def check_utility_conditions(
    alloc_star: Allocation,
    utilities: Mapping[str, Callable[[Allocation], object]],
    grid: Iterable[Allocation],
) -> tuple[bool, tuple[str, Allocation] | None]:
    """Check each community's own-share optimality on a finite grid.

    For community ``i``, fixing the other two shares at any grid point,
    putting ``i``'s share at its starred value must do at least as well as
    the grid point's own value. Returns ``(ok, (community, witness))``.
    """
    grid = list(grid)
    for community in ("C", "L", "G"):
        u = utilities[community]
        attr = _OWN[community]
        for point in grid:
            starred = replace(point, **{attr: getattr(alloc_star, attr)})
            if as_fraction(u(starred)) < as_fraction(u(point)):
                return False, (community, point)
    return True, None


# -- circulation metrics ---------------------------------------------------------


@dataclass(frozen=True)
class CirculationMetrics:
    start: int
    end: int
    token_supply: int
    total_information_quantity: int
    invalid_information_quantity: int
    valid_ratio: Fraction
    absorbed_tokens: int
    circulation_ratio: Fraction
    inflation_ratio: Fraction

    def as_row(self) -> dict:
        return {
            "epoch": self.end,
            "token_supply": self.token_supply,
            "total_information": self.total_information_quantity,
            "invalid_information": self.invalid_information_quantity,
            "valid_ratio": self.valid_ratio,
            "absorbed_tokens": self.absorbed_tokens,
            "circulation_ratio": self.circulation_ratio,
            "inflation_ratio": self.inflation_ratio,
        }


CIRCULATING_OPS = {
    "transfer": "amount",
    "convert_labor_to_capital": "labor_amount",
    "start_governance_conversion": "labor_amount",
    "convert_governance_to_labor": "amount",
}


def valid_ratio(total: int, invalid: int) -> Fraction:
    return Fraction(total - invalid, total) if total > 0 else Fraction(1)


class MetricsTracker:
    """Streams event records and answers window queries without rescanning."""

    def __init__(self):
        self.supply = 0
        self.absorbed = 0
        self.by_epoch: dict[int, list[int]] = {}
        self.supply_at: dict[int, int] = {}
        self.absorbed_at: dict[int, int] = {}

    def feed(self, event: Mapping) -> None:
        epoch = event["epoch"]
        row = self.by_epoch.setdefault(epoch, [0, 0, 0, 0])
        payload = event["payload"]
        op = event["op"]
        for holder, _kind, delta in payload["effects"]:
            if holder == "minted":
                self.supply += delta
                row[3] += delta
            elif holder == "burned":
                self.supply -= delta
            elif holder.startswith("escrow:") and holder.endswith(".capital"):
                self.absorbed += delta
        if op == "close_content_audit" and payload["result"].get("accepted"):
            row[0] += 1
        elif op == "arbitrate" and payload["result"].get("revoked"):
            row[1] += 1
        elif op in CIRCULATING_OPS:
            row[2] += payload["args"][CIRCULATING_OPS[op]]
        self.supply_at[epoch] = self.supply
        self.absorbed_at[epoch] = self.absorbed

    def _at(self, table: dict[int, int], epoch: int) -> int:
        known = [e for e in table if e <= epoch]
        return table[max(known)] if known else 0

    def window(self, start: int, end: int) -> CirculationMetrics:
        if end < start:
            raise EmptyWindow(f"window [{start}, {end}] is empty")
        acc = inv = circ = mint = 0
        for e in range(start, end + 1):
            r = self.by_epoch.get(e)
            if r:
                acc += r[0]
                inv += r[1]
                circ += r[2]
                mint += r[3]
        supply = self._at(self.supply_at, end)
        epochs = end - start + 1
        return CirculationMetrics(
            start, end, supply, acc, inv, valid_ratio(acc, inv), self._at(self.absorbed_at, end),
            Fraction(circ, epochs * supply) if supply else Fraction(0),
            Fraction(mint, epochs * supply) if supply else Fraction(0),
        )


def compute_metrics(events: Iterable[Mapping], start: int, end: int) -> CirculationMetrics:
    """Metrics over epochs ``[start, end]`` of an event history."""
    if end < start:
        raise EmptyWindow(f"window [{start}, {end}] is empty")
    tracker = MetricsTracker()
    for ev in events:
        if ev["epoch"] > end:
            break
        tracker.feed(ev)
    return tracker.window(start, end)


# -- regulator -------------------------------------------------------------------


@dataclass(frozen=True)
class RegulatorConfig:
    target: Fraction = Fraction(4, 5)
    dead_band: Fraction = Fraction(1, 20)
    quota_gain: Fraction = Fraction(1, 10)
    incentive_gain: Fraction = Fraction(1, 10)
    quota_bounds: tuple[Fraction, Fraction] = (Fraction(1, 10), Fraction(2))
    incentive_bounds: tuple[Fraction, Fraction] = (Fraction(1, 2), Fraction(4))
    window: int = 5
    quantum: Fraction | None = Fraction(1, 10**6)

    def __post_init__(self):
        for name in ("target", "dead_band", "quota_gain", "incentive_gain"):
            object.__setattr__(self, name, as_fraction(getattr(self, name)))
        object.__setattr__(self, "quota_bounds", tuple(as_fraction(x) for x in self.quota_bounds))
        object.__setattr__(self, "incentive_bounds", tuple(as_fraction(x) for x in self.incentive_bounds))
        if self.quantum is not None:
            object.__setattr__(self, "quantum", as_fraction(self.quantum))
        if not (0 < self.quota_gain < 1 and 0 < self.incentive_gain < 1):
            raise ValueError("regulator gains must lie in (0, 1)")
        if self.window < 1:
            raise ValueError("regulator window must be at least one epoch")

    def in_band(self, ratio) -> bool:
        return abs(as_fraction(ratio) - self.target) <= self.dead_band


@dataclass(frozen=True)
class RegulatorState:
    labor_distribution_quota: Fraction = Fraction(1)
    supervision_incentive: Fraction = Fraction(1)
    config: RegulatorConfig = field(default_factory=RegulatorConfig)

    def to_state(self) -> dict:
        return {"incentive": self.supervision_incentive, "quota": self.labor_distribution_quota}


def _clamp(x: Fraction, bounds: tuple[Fraction, Fraction]) -> Fraction:
    return min(max(x, bounds[0]), bounds[1])


def regulate(regulator: RegulatorState, metrics: CirculationMetrics | Fraction) -> RegulatorState:
    """Cut the reward quota and raise the supervision incentive when too much
    revoked information shows up; relax both when the ratio runs above band."""
    cfg = regulator.config
    ratio = metrics.valid_ratio if isinstance(metrics, CirculationMetrics) else as_fraction(metrics)
    q, s = regulator.labor_distribution_quota, regulator.supervision_incentive
    if ratio < cfg.target - cfg.dead_band:
        q, s = q * (1 - cfg.quota_gain), s * (1 + cfg.incentive_gain)
    elif ratio > cfg.target + cfg.dead_band:
        q, s = q * (1 + cfg.quota_gain), s * (1 - cfg.incentive_gain)
    else:
        return regulator
    q = _clamp(quantize(q, cfg.quantum), cfg.quota_bounds)
    s = _clamp(quantize(s, cfg.quantum), cfg.incentive_bounds)
    return replace(regulator, labor_distribution_quota=q, supervision_incentive=s)


# -- exchange-rate feedback --------------------------------------------------------


def proportional_supply(demand, steady_rate) -> Callable[[Fraction], Fraction]:
    """Labor supply that falls as Labor gets cheaper: equals demand at ``steady_rate``."""
    demand = as_fraction(demand)
    steady_rate = as_fraction(steady_rate)
    return lambda rate: demand * steady_rate / rate


def rate_trajectory(
    rate: ExchangeRate,
    demand,
    supply_of: Callable[[Fraction], Fraction],
    steps: int,
    **update_kwargs,
) -> Iterator[ExchangeRate]:
    """Iterate the rate law with supply responding to the current rate."""
    demand = as_fraction(demand)
    for _ in range(steps):
        rate = update_rate(rate, supply_of(rate.labor_per_capital), demand, **update_kwargs)
        yield rate
