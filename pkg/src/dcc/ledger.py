"""Three-token ledger: balances, escrows, reward pools and conversion rules.

All amounts are non-negative integers in minimal token units. Exchange rates
are exact rationals; conversions floor the credited side and burn whatever
value the floor drops, so the supply identity

    minted[k] - burned[k] == balances + escrows + pools + pending locks

holds exactly for every kind ``k`` after every operation.

Every holding change is also written to an effects journal keyed by holder
(``acct:<id>``, ``escrow:<id>``, ``pool:<name>``, ``lock:<id>``, plus the
``minted``/``burned`` counters). The event log stores one netted journal per
command, which is what the log auditor checks conservation against.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from math import floor

from dcc.canonical import as_fraction, quantize
from dcc.errors import (
    DuplicateAccount,
    InsufficientBalance,
    InvalidMintReason,
    NonTransferableKind,
    UnknownAccount,
    UnknownEscrow,
    ZeroAmount,
    ZeroPhases,
)


class TokenKind(str, Enum):
    CAPITAL = "capital"
    LABOR = "labor"
    GOVERNANCE = "governance"


KINDS = (TokenKind.CAPITAL, TokenKind.LABOR, TokenKind.GOVERNANCE)
_SLOT = {TokenKind.CAPITAL: 0, TokenKind.LABOR: 1, TokenKind.GOVERNANCE: 2}


class MintReason(str, Enum):
    """Closed set of reasons Labor may be created for.

    Governance is never minted through this path; it only appears when a
    pending conversion applies a phase in :meth:`Ledger.advance_epoch`.
    """

    CONTENT_REWARD = "ContentReward"
    TIPOFF_REWARD = "TipOffReward"
    TRANCHE_CONVERSION = "TrancheConversion"
    GAS_RECYCLE = "GasRecycle"
    POOL_DISTRIBUTION = "PoolDistribution"


POOLS = ("labor", "governance")

_ID_RE = re.compile(r"^[A-Za-z0-9_.:\-]+$")


def check_id(value: str, what: str = "id") -> str:
    if not isinstance(value, str) or not _ID_RE.match(value):
        raise ValueError(f"invalid {what}: {value!r}")
    return value


@dataclass(frozen=True)
class ExchangeRate:
    """Labor units per Capital unit, plus the band Capital's peg index must stay in."""

    labor_per_capital: Fraction
    peg_band: tuple[Fraction, Fraction] = (Fraction(9, 10), Fraction(11, 10))

    def __post_init__(self):
        object.__setattr__(self, "labor_per_capital", as_fraction(self.labor_per_capital))
        lo, hi = (as_fraction(x) for x in self.peg_band)
        object.__setattr__(self, "peg_band", (lo, hi))
        if self.labor_per_capital <= 0:
            raise ValueError("labor_per_capital must be positive")
        if not 0 < lo <= hi:
            raise ValueError("peg band must satisfy 0 < lower <= upper")

    def peg_ok(self, index) -> bool:
        lo, hi = self.peg_band
        return lo <= as_fraction(index) <= hi

    def to_state(self) -> dict:
        return {"labor_per_capital": self.labor_per_capital, "peg_band": list(self.peg_band)}


def update_rate(
    rate: ExchangeRate,
    labor_supply_signal,
    labor_demand_signal,
    kappa=Fraction(1, 2),
    rate_min=Fraction(1, 100),
    rate_max=Fraction(100),
    quantum: Fraction | None = None,
) -> ExchangeRate:
    """One negative-feedback step of the Labor/Capital rate.

    Excess Labor supply raises ``labor_per_capital`` (Labor gets cheaper),
    excess demand lowers it. The step is multiplicative in the relative
    imbalance and clamped to ``[rate_min, rate_max]``.
    """
    supply = as_fraction(labor_supply_signal)
    demand = as_fraction(labor_demand_signal)
    kappa = as_fraction(kappa)
    if supply <= 0 or demand < 0:
        raise ValueError("supply signal must be > 0 and demand signal >= 0")
    if not 0 < kappa <= 1:
        raise ValueError("kappa must lie in (0, 1]")
    new = rate.labor_per_capital * (1 + kappa * (supply - demand) / supply)
    new = quantize(new, quantum)
    new = min(max(new, as_fraction(rate_min)), as_fraction(rate_max))
    return ExchangeRate(new, rate.peg_band)


@dataclass
class PendingConversion:
    id: str
    account: str
    total_labor: int
    phases_total: int
    per_phase: int
    start_epoch: int
    parameter: Fraction = Fraction(1)
    phases_applied: int = 0
    governance_credited: int = 0

    def portion(self, phase: int) -> int:
        """Labor consumed by 0-based ``phase``; the last phase takes the remainder."""
        if phase == self.phases_total - 1:
            return self.total_labor - self.per_phase * (self.phases_total - 1)
        return self.per_phase

    @property
    def locked(self) -> int:
        return self.total_labor - sum(self.portion(i) for i in range(self.phases_applied))

    @property
    def complete(self) -> bool:
        return self.phases_applied >= self.phases_total

    def to_state(self) -> list:
        return [
            self.account,
            self.total_labor,
            self.phases_total,
            self.per_phase,
            self.start_epoch,
            self.parameter,
            self.phases_applied,
            self.governance_credited,
        ]


@dataclass
class Escrow:
    kind: TokenKind
    amount: int = 0
    purpose: str = ""


def _positive(amount: int) -> int:
    if isinstance(amount, bool) or not isinstance(amount, int):
        raise TypeError("token amounts are integers")
    if amount <= 0:
        raise ZeroAmount("amount must be positive")
    return amount


@dataclass
class Ledger:
    rate: ExchangeRate = field(default_factory=lambda: ExchangeRate(Fraction(1)))
    governance_parameter: Fraction = Fraction(1)
    epoch: int = 0

    def __post_init__(self):
        self._balances: dict[str, list[int]] = {}
        self.escrows: dict[str, Escrow] = {}
        self.pools: dict[str, int] = {p: 0 for p in POOLS}
        self.minted: dict[TokenKind, int] = {k: 0 for k in KINDS}
        self.burned: dict[TokenKind, int] = {k: 0 for k in KINDS}
        self.pending: dict[str, PendingConversion] = {}
        self._next_conversion = 1
        self._effects: dict[tuple[str, str], int] = {}

    # -- effects journal ---------------------------------------------------

    def _fx(self, holder: str, kind: TokenKind, delta: int) -> None:
        key = (holder, kind.value)
        self._effects[key] = self._effects.get(key, 0) + delta

    def take_effects(self) -> list[list]:
        """Return and clear the netted journal since the last call."""
        out = [[h, k, d] for (h, k), d in sorted(self._effects.items()) if d]
        self._effects = {}
        return out

    # -- queries -------------------------------------------------------------

    def has_account(self, account: str) -> bool:
        return account in self._balances

    def accounts(self) -> list[str]:
        return sorted(self._balances)

    def balance(self, account: str, kind: TokenKind) -> int:
        try:
            return self._balances[account][_SLOT[TokenKind(kind)]]
        except KeyError:
            raise UnknownAccount(account) from None

    def identity_verified(self, account: str) -> bool:
        return account in self._balances

    def escrow_amount(self, escrow_id: str) -> int:
        return self._escrow(escrow_id).amount

    def supply(self, kind: TokenKind) -> int:
        return self.minted[kind] - self.burned[kind]

    def holdings(self, kind: TokenKind) -> int:
        slot = _SLOT[kind]
        total = sum(b[slot] for b in self._balances.values())
        total += sum(e.amount for e in self.escrows.values() if e.kind == kind)
        if kind == TokenKind.LABOR:
            total += sum(self.pools.values())
            total += sum(p.locked for p in self.pending.values())
        return total

    def conservation_violations(self) -> list[str]:
        out = []
        for k in KINDS:
            if self.supply(k) != self.holdings(k):
                out.append(f"{k.value}: supply {self.supply(k)} != holdings {self.holdings(k)}")
        for a, b in self._balances.items():
            if min(b) < 0:
                out.append(f"negative balance for {a}")
        for eid, e in self.escrows.items():
            if e.amount < 0:
                out.append(f"negative escrow {eid}")
        for p, v in self.pools.items():
            if v < 0:
                out.append(f"negative pool {p}")
        return out

    # -- primitives ----------------------------------------------------------

    def _require(self, account: str) -> list[int]:
        try:
            return self._balances[account]
        except KeyError:
            raise UnknownAccount(account) from None

    def _escrow(self, escrow_id: str) -> Escrow:
        try:
            return self.escrows[escrow_id]
        except KeyError:
            raise UnknownEscrow(escrow_id) from None

    def _need(self, account: str, kind: TokenKind, amount: int) -> None:
        have = self._require(account)[_SLOT[kind]]
        if have < amount:
            raise InsufficientBalance(f"{account} holds {have} {kind.value}, needs {amount}")

    def _move_balance(self, account: str, kind: TokenKind, delta: int) -> None:
        self._balances[account][_SLOT[kind]] += delta
        self._fx("acct:" + account, kind, delta)

    def _mint(self, kind: TokenKind, amount: int) -> None:
        self.minted[kind] += amount
        self._fx("minted", kind, amount)

    def _burn(self, kind: TokenKind, amount: int) -> None:
        self.burned[kind] += amount
        self._fx("burned", kind, amount)

    # -- accounts ------------------------------------------------------------

    def open_account(self, account: str) -> None:
        check_id(account, "account id")
        if account in self._balances:
            raise DuplicateAccount(account)
        self._balances[account] = [0, 0, 0]

    def deposit_capital(self, account: str, amount: int) -> None:
        """Credit Capital bought with outside money (legal tender, assets)."""
        self._require(account)
        _positive(amount)
        self._mint(TokenKind.CAPITAL, amount)
        self._move_balance(account, TokenKind.CAPITAL, amount)

    def mint_labor(self, account: str, amount: int, reason: MintReason) -> None:
        try:
            reason = MintReason(reason)
        except ValueError:
            raise InvalidMintReason(str(reason)) from None
        self._require(account)
        _positive(amount)
        self._mint(TokenKind.LABOR, amount)
        self._move_balance(account, TokenKind.LABOR, amount)

    # -- conversions -----------------------------------------------------------

    def convert_labor_to_capital(self, account: str, labor_amount: int, rate: ExchangeRate | None = None) -> int:
        """Burn ``labor_amount`` Labor, mint the floored Capital equivalent."""
        rate = rate or self.rate
        _positive(labor_amount)
        self._need(account, TokenKind.LABOR, labor_amount)
        capital = floor(Fraction(labor_amount) / rate.labor_per_capital)
        self._move_balance(account, TokenKind.LABOR, -labor_amount)
        self._burn(TokenKind.LABOR, labor_amount)
        if capital:
            self._mint(TokenKind.CAPITAL, capital)
            self._move_balance(account, TokenKind.CAPITAL, capital)
        return capital

    def start_governance_conversion(self, account: str, labor_amount: int, phases: int, epoch: int | None = None) -> PendingConversion:
        _positive(labor_amount)
        if phases < 1:
            raise ZeroPhases("phases must be >= 1")
        self._need(account, TokenKind.LABOR, labor_amount)
        conv = PendingConversion(
            id=f"conv-{self._next_conversion:06d}",
            account=account,
            total_labor=labor_amount,
            phases_total=phases,
            per_phase=labor_amount // phases,
            start_epoch=self.epoch if epoch is None else epoch,
            parameter=self.governance_parameter,
        )
        self._next_conversion += 1
        self._move_balance(account, TokenKind.LABOR, -labor_amount)
        self._fx("lock:" + conv.id, TokenKind.LABOR, labor_amount)
        self.pending[conv.id] = conv
        return conv

    def advance_epoch(self) -> list[tuple[str, int]]:
        """Apply one phase of every pending conversion and bump the epoch.

        Returns ``(conversion id, governance credited)`` for each phase applied.
        """
        applied = []
        for conv in list(self.pending.values()):
            portion = conv.portion(conv.phases_applied)
            gov = floor(portion * conv.parameter)
            conv.phases_applied += 1
            self._fx("lock:" + conv.id, TokenKind.LABOR, -portion)
            self._burn(TokenKind.LABOR, portion)
            if gov:
                self._mint(TokenKind.GOVERNANCE, gov)
                self._move_balance(conv.account, TokenKind.GOVERNANCE, gov)
            conv.governance_credited += gov
            applied.append((conv.id, gov))
            if conv.complete:
                del self.pending[conv.id]
        self.epoch += 1
        return applied

    def convert_governance_to_labor(self, account: str, amount: int) -> int:
        """Instant, full-amount conversion back to Labor at the current parameter."""
        _positive(amount)
        self._need(account, TokenKind.GOVERNANCE, amount)
        labor = floor(Fraction(amount) / self.governance_parameter)
        self._move_balance(account, TokenKind.GOVERNANCE, -amount)
        self._burn(TokenKind.GOVERNANCE, amount)
        if labor:
            self._mint(TokenKind.LABOR, labor)
            self._move_balance(account, TokenKind.LABOR, labor)
        return labor

    # -- transfers and fees ------------------------------------------------------

    def transfer(self, src: str, dst: str, kind: TokenKind, amount: int) -> None:
        kind = TokenKind(kind)
        if kind != TokenKind.CAPITAL:
            raise NonTransferableKind(f"{kind.value} tokens cannot move between users")
        _positive(amount)
        self._require(dst)
        self._need(src, kind, amount)
        self._move_balance(src, kind, -amount)
        self._move_balance(dst, kind, amount)

    def pay_gas(self, account: str, capital_amount: int, rate: ExchangeRate | None = None) -> int:
        """Burn Capital gas and recycle its Labor value into the labor reward pool."""
        rate = rate or self.rate
        _positive(capital_amount)
        self._need(account, TokenKind.CAPITAL, capital_amount)
        labor = floor(capital_amount * rate.labor_per_capital)
        self._move_balance(account, TokenKind.CAPITAL, -capital_amount)
        self._burn(TokenKind.CAPITAL, capital_amount)
        if labor:
            self._mint(TokenKind.LABOR, labor)
            self.pools["labor"] += labor
            self._fx("pool:labor", TokenKind.LABOR, labor)
        return labor

    # -- escrows -----------------------------------------------------------------

    def open_escrow(self, escrow_id: str, kind: TokenKind, purpose: str = "") -> None:
        if escrow_id in self.escrows:
            raise ValueError(f"escrow {escrow_id} exists")
        self.escrows[escrow_id] = Escrow(TokenKind(kind), 0, purpose)

    def close_escrow(self, escrow_id: str) -> None:
        if self._escrow(escrow_id).amount != 0:
            raise ValueError(f"escrow {escrow_id} still holds tokens")
        del self.escrows[escrow_id]

    def _move_escrow(self, escrow_id: str, delta: int) -> None:
        e = self.escrows[escrow_id]
        e.amount += delta
        self._fx("escrow:" + escrow_id, e.kind, delta)

    def escrow_in(self, account: str, escrow_id: str, amount: int) -> None:
        e = self._escrow(escrow_id)
        _positive(amount)
        self._need(account, e.kind, amount)
        self._move_balance(account, e.kind, -amount)
        self._move_escrow(escrow_id, amount)

    def escrow_out(self, escrow_id: str, account: str, amount: int) -> None:
        e = self._escrow(escrow_id)
        self._require(account)
        if amount <= 0:
            return
        if e.amount < amount:
            raise InsufficientBalance(f"escrow {escrow_id} holds {e.amount}, needs {amount}")
        self._move_escrow(escrow_id, -amount)
        self._move_balance(account, e.kind, amount)

    def escrow_burn(self, escrow_id: str, amount: int) -> None:
        e = self._escrow(escrow_id)
        if amount <= 0:
            return
        if e.amount < amount:
            raise InsufficientBalance(f"escrow {escrow_id} holds {e.amount}, needs {amount}")
        self._move_escrow(escrow_id, -amount)
        self._burn(e.kind, amount)

    def escrow_move(self, src: str, dst: str, amount: int) -> None:
        a, b = self._escrow(src), self._escrow(dst)
        if a.kind != b.kind:
            raise ValueError("escrow kinds differ")
        if amount <= 0:
            return
        if a.amount < amount:
            raise InsufficientBalance(f"escrow {src} holds {a.amount}, needs {amount}")
        self._move_escrow(src, -amount)
        self._move_escrow(dst, amount)

    def escrow_convert_to_labor(self, escrow_id: str, account: str, capital_amount: int, rate: ExchangeRate | None = None) -> int:
        """Burn escrowed Capital and mint its Labor equivalent to ``account``.

        This and :meth:`pay_gas` are the only Capital-to-Labor paths.
        """
        rate = rate or self.rate
        e = self._escrow(escrow_id)
        if e.kind != TokenKind.CAPITAL:
            raise ValueError("tranche conversion needs a Capital escrow")
        self._require(account)
        if capital_amount <= 0:
            return 0
        if e.amount < capital_amount:
            raise InsufficientBalance(f"escrow {escrow_id} holds {e.amount}, needs {capital_amount}")
        labor = floor(capital_amount * rate.labor_per_capital)
        self._move_escrow(escrow_id, -capital_amount)
        self._burn(TokenKind.CAPITAL, capital_amount)
        if labor:
            self._mint(TokenKind.LABOR, labor)
            self._move_balance(account, TokenKind.LABOR, labor)
        return labor

    # -- pools and forced burns ------------------------------------------------------

    def pool_pay(self, pool: str, account: str, amount: int) -> None:
        self._require(account)
        if amount <= 0:
            return
        if self.pools[pool] < amount:
            raise InsufficientBalance(f"pool {pool} holds {self.pools[pool]}, needs {amount}")
        self.pools[pool] -= amount
        self._fx("pool:" + pool, TokenKind.LABOR, -amount)
        self._move_balance(account, TokenKind.LABOR, amount)

    def pool_move(self, src: str, dst: str, amount: int) -> None:
        if amount <= 0:
            return
        if self.pools[src] < amount:
            raise InsufficientBalance(f"pool {src} holds {self.pools[src]}, needs {amount}")
        self.pools[src] -= amount
        self.pools[dst] += amount
        self._fx("pool:" + src, TokenKind.LABOR, -amount)
        self._fx("pool:" + dst, TokenKind.LABOR, amount)

    def burn_balance(self, account: str, kind: TokenKind, amount: int) -> int:
        """Destroy up to ``amount`` from a balance; returns what was actually burned."""
        kind = TokenKind(kind)
        have = self._require(account)[_SLOT[kind]]
        burn = min(have, max(amount, 0))
        if burn:
            self._move_balance(account, kind, -burn)
            self._burn(kind, burn)
        return burn

    # -- snapshot ----------------------------------------------------------------

    def to_state(self) -> dict:
        return {
            "accounts": self._balances,
            "burned": {k.value: v for k, v in self.burned.items()},
            "epoch": self.epoch,
            "escrows": {eid: [e.kind.value, e.amount, e.purpose] for eid, e in self.escrows.items()},
            "minted": {k.value: v for k, v in self.minted.items()},
            "next_conversion": self._next_conversion,
            "pending": {cid: c.to_state() for cid, c in self.pending.items()},
            "pools": self.pools,
            "rate": self.rate.to_state(),
        }
