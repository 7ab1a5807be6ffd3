"""Delegated Proof of Labor Representative governance.

Seats are apportioned between parties by largest remainder over the parties'
Governance-token totals. Within a party, each seat goes to the member whose
lottery digest ``H(seed | party | seat | member)`` is smallest, so the draw is
reproducible from the epoch seed and independent of iteration order. Capital
balances are never read here: voting power comes from Governance tokens only.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, fields, replace
from enum import Enum
from fractions import Fraction
from typing import Iterable, Mapping

from dcc.apportion import largest_remainder
from dcc.canonical import as_fraction
from dcc.errors import (
    AlreadyInParty,
    EmptyParty,
    InsufficientGovernanceTokens,
    NoEligibleParties,
    NotAMember,
    NotChief,
    NotSenatorial,
    OutOfBounds,
    QuorumNotMet,
    RoleCountMismatch,
    UnknownAccount,
    UnknownParty,
    WrongState,
)
from dcc.ledger import TokenKind, check_id

PLATFORM_PARTY = "platform"


class Role(str, Enum):
    CHIEF = "Chief"
    SENATORIAL = "Senatorial"
    ARBITRAL = "Arbitral"


@dataclass
class ParameterSet:
    labor_to_governance: Fraction = Fraction(1)
    incentive_pool_split: Fraction = Fraction(1, 2)
    platform_supervision_share: Fraction = Fraction(1, 2)
    amendment_threshold: Fraction = Fraction(2, 3)
    impeachment_threshold: Fraction = Fraction(2, 3)
    audit_threshold: Fraction = Fraction(3, 5)
    arbitration_threshold: Fraction = Fraction(3, 5)

    # (lower, upper, lower inclusive)
    BOUNDS = {
        "labor_to_governance": (Fraction(0), Fraction(100), False),
        "incentive_pool_split": (Fraction(0), Fraction(1), True),
        "platform_supervision_share": (Fraction(0), Fraction(1), True),
        "amendment_threshold": (Fraction(1, 2), Fraction(1), False),
        "impeachment_threshold": (Fraction(1, 2), Fraction(1), False),
        "audit_threshold": (Fraction(0), Fraction(1), False),
        "arbitration_threshold": (Fraction(0), Fraction(1), False),
    }

    def __post_init__(self):
        for f in fields(self):
            value = as_fraction(getattr(self, f.name))
            lo, hi, lo_inclusive = self.BOUNDS[f.name]
            if not ((lo <= value) if lo_inclusive else (lo < value)) or value > hi:
                raise OutOfBounds(f"{f.name}={value} outside its range")
            setattr(self, f.name, value)

    def changed(self, delta: Mapping[str, object]) -> "ParameterSet":
        unknown = set(delta) - {f.name for f in fields(self)}
        if unknown:
            raise OutOfBounds(f"unknown parameters: {sorted(unknown)}")
        return replace(self, **{k: as_fraction(v) for k, v in delta.items()})

    def to_state(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class Party:
    id: str
    charter_digest: str
    founder: str
    members: set[str] = field(default_factory=set)


@dataclass
class Seat:
    index: int
    role: Role
    holder: str
    party: str
    party_seat: int

    def to_state(self) -> list:
        return [self.index, self.role.value, self.holder, self.party, self.party_seat]


@dataclass
class Assembly:
    epoch: int
    seed: str
    seats: list[Seat] = field(default_factory=list)

    def holders(self, role: Role) -> list[str]:
        return sorted({s.holder for s in self.seats if s.role == role})

    def seats_of(self, role: Role) -> list[Seat]:
        return [s for s in self.seats if s.role == role]

    def roles_of(self, account: str) -> set[Role]:
        return {s.role for s in self.seats if s.holder == account}

    def roster(self) -> list[list]:
        return [s.to_state() for s in self.seats]

    def to_state(self) -> dict:
        return {"epoch": self.epoch, "seats": self.roster(), "seed": self.seed}


@dataclass
class Nomination:
    issued_epoch: int
    candidates: tuple[str, ...]
    boost: Fraction

    def to_state(self) -> dict:
        return {"boost": self.boost, "candidates": list(self.candidates), "issued": self.issued_epoch}


# -- pure election functions ---------------------------------------------------


def epoch_seed(previous_state_hash: str, epoch: int) -> str:
    return hashlib.sha256(bytes.fromhex(previous_state_hash) + epoch.to_bytes(8, "big")).hexdigest()


def lottery_digest(seed: str, party: str, seat: int, member: str) -> int:
    h = hashlib.sha256(f"{seed}|{party}|{seat}|{member}".encode()).digest()
    return int.from_bytes(h, "big")


def _shuffle_digest(seed: str, party: str, seat: int) -> int:
    h = hashlib.sha256(f"{seed}|shuffle|{party}|{seat}".encode()).digest()
    return int.from_bytes(h, "big")


def allocate_seats(party_tokens: Mapping[str, int], total_seats: int) -> dict[str, int]:
    """Largest-remainder seat counts; ties on remainders go to the smaller party id."""
    if total_seats < 1:
        raise ValueError("at least one seat is required")
    eligible = {p: t for p, t in party_tokens.items() if t > 0}
    if not eligible:
        raise NoEligibleParties("no party holds Governance tokens")
    counts = largest_remainder(eligible, total_seats)
    return {p: counts[p] for p in sorted(counts)}


def _ticket_key(digest: int, weight: int | None, boost: Fraction | None):
    if weight is None:
        return digest if boost is None else Fraction(digest) / boost
    # exponential race: P(win) proportional to weight
    u = (digest + 0.5) / 2.0**256
    key = -math.log(u) / weight
    return key if boost is None else key / float(boost)


def select_members(
    party_id: str,
    members: Iterable[str],
    seat_count: int,
    seed: str,
    *,
    seat_numbers: Iterable[int] | None = None,
    boosted: Mapping[str, Fraction] | None = None,
    boost_seats: Iterable[int] = (),
    weights: Mapping[str, int] | None = None,
    exclude: Iterable[str] = (),
) -> list[str]:
    """Holder for each of a party's seats: the member with the smallest digest.

    ``boosted`` maps nominated members to their divisor; it only applies on
    seats listed in ``boost_seats``. With ``weights`` the lottery becomes
    token-weighted instead of one ticket per member.
    """
    pool = sorted(set(members))
    if not pool:
        raise EmptyParty(party_id)
    excluded = set(exclude)
    if excluded and len(pool) > len(excluded & set(pool)):
        pool = [m for m in pool if m not in excluded]
    numbers = list(range(seat_count)) if seat_numbers is None else list(seat_numbers)
    boost_on = set(boost_seats)
    boosted = boosted or {}
    out = []
    for j in numbers:
        best = None
        for m in pool:
            b = boosted.get(m) if j in boost_on else None
            w = None if weights is None else max(weights.get(m, 0), 1)
            key = (_ticket_key(lottery_digest(seed, party_id, j, m), w, b), m)
            if best is None or key < best:
                best = key
        out.append(best[1])
    return out


def assign_roles(
    party_seats: list[tuple[str, int]], seed: str, n_chief: int, n_sen: int, n_arb: int
) -> list[tuple[str, int, Role]]:
    """Shuffle party seats by a seed-keyed digest, then cut into role ranges."""
    if n_chief + n_sen + n_arb != len(party_seats) or min(n_chief, n_sen, n_arb) < 0:
        raise RoleCountMismatch(f"role counts {n_chief}+{n_sen}+{n_arb} != {len(party_seats)} seats")
    order = sorted(party_seats, key=lambda ps: (_shuffle_digest(seed, *ps), ps))
    roles = [Role.CHIEF] * n_chief + [Role.SENATORIAL] * n_sen + [Role.ARBITRAL] * n_arb
    return [(p, j, r) for (p, j), r in zip(order, roles)]


def elect(
    party_members: Mapping[str, Iterable[str]],
    party_tokens: Mapping[str, int],
    seed: str,
    epoch: int,
    n_chief: int,
    n_sen: int,
    n_arb: int,
    *,
    platform_nodes: Iterable[str] = (),
    reserved_arbitral: int = 0,
    nomination: Nomination | None = None,
    member_weights: Mapping[str, int] | None = None,
) -> Assembly:
    """Full election from a membership/token snapshot and a seed.

    ``reserved_arbitral`` arbitral seats are held by platform nodes; the rest
    of the assembly is apportioned among parties. With no eligible party only
    the platform seats are filled.
    """
    platform = sorted(set(platform_nodes))
    reserved = min(reserved_arbitral, n_arb) if platform else 0
    elected_total = n_chief + n_sen + n_arb - reserved
    seats: list[Seat] = []
    eligible = {p: t for p, t in party_tokens.items() if t > 0}
    if elected_total > 0 and eligible:
        counts = allocate_seats(eligible, elected_total)
        party_seats = [(p, j) for p in sorted(counts) for j in range(counts[p])]
        plan = assign_roles(party_seats, seed, n_chief, n_sen, n_arb - reserved)
        boosted = {}
        if nomination is not None:
            boosted = {c: nomination.boost for c in nomination.candidates}
        by_party: dict[str, list[tuple[int, Role]]] = {}
        for p, j, r in plan:
            by_party.setdefault(p, []).append((j, r))
        holders: dict[tuple[str, int], str] = {}
        for p in sorted(by_party):
            numbers = [j for j, _ in by_party[p]]
            arb = [j for j, r in by_party[p] if r == Role.ARBITRAL]
            chosen = select_members(
                p, party_members[p], len(numbers), seed,
                seat_numbers=numbers, boosted=boosted, boost_seats=arb, weights=member_weights,
            )
            holders.update({(p, j): h for j, h in zip(numbers, chosen)})
        for idx, (p, j, r) in enumerate(plan):
            seats.append(Seat(idx, r, holders[(p, j)], p, j))
    for j, h in enumerate(select_members(PLATFORM_PARTY, platform, reserved, seed) if reserved else []):
        seats.append(Seat(len(seats), Role.ARBITRAL, h, PLATFORM_PARTY, j))
    return Assembly(epoch, seed, seats)


def elect_from_snapshot(snapshot: Mapping, seed: str, epoch: int, config: "GovernanceConfig") -> Assembly:
    nom = snapshot.get("nomination")
    nomination = None
    if nom:
        nomination = Nomination(nom["issued"], tuple(nom["candidates"]), as_fraction(nom["boost"]))
    return elect(
        snapshot["members"], snapshot["tokens"], seed, epoch,
        config.n_chief, config.n_senatorial, config.n_arbitral,
        platform_nodes=snapshot["platform"], reserved_arbitral=snapshot["reserved"],
        nomination=nomination, member_weights=snapshot.get("weights"),
    )


def reserved_arbitral_seats(share: Fraction, n_arb: int) -> int:
    return min(n_arb, math.ceil(share * n_arb))


def senatorial_approval(assembly: Assembly, votes: Mapping[str, bool]) -> Fraction:
    """Share of senatorial seats whose holder voted yes; absent votes count as no."""
    seats = assembly.seats_of(Role.SENATORIAL)
    if not seats:
        return Fraction(0)
    return Fraction(sum(1 for s in seats if votes.get(s.holder)), len(seats))


# -- stateful governance --------------------------------------------------------


@dataclass
class GovernanceConfig:
    party_min_tokens: int = 50
    n_chief: int = 1
    n_senatorial: int = 4
    n_arbitral: int = 6
    split_bounds: tuple[Fraction, Fraction] = (Fraction(0), Fraction(1))
    platform_decay: Fraction = Fraction(4, 5)
    platform_cutoff: Fraction = Fraction(1, 100)
    weighted_tickets: bool = False

    def __post_init__(self):
        self.platform_decay = as_fraction(self.platform_decay)
        self.platform_cutoff = as_fraction(self.platform_cutoff)
        self.split_bounds = tuple(as_fraction(x) for x in self.split_bounds)
        if not 0 < self.platform_decay < 1:
            raise ValueError("platform decay must lie strictly between 0 and 1")
        if self.n_chief < 0 or self.n_senatorial < 0 or self.n_arbitral < 0:
            raise ValueError("role counts must be non-negative")
        if self.n_chief + self.n_senatorial + self.n_arbitral < 1:
            raise ValueError("assembly needs at least one seat")

    @property
    def total_seats(self) -> int:
        return self.n_chief + self.n_senatorial + self.n_arbitral


class Governance:
    """Parties, the sitting assembly and the mutable parameter set.

    Reads token state only through ``ledger.balance(account, GOVERNANCE)``
    and ``ledger.has_account``.
    """

    def __init__(self, ledger, params: ParameterSet | None = None, config: GovernanceConfig | None = None,
                 platform_nodes: Iterable[str] = ()):
        self.ledger = ledger
        self.params = params or ParameterSet()
        self.config = config or GovernanceConfig()
        self.platform_nodes = tuple(sorted(set(platform_nodes)))
        self.parties: dict[str, Party] = {}
        self.membership: dict[str, str] = {}
        self.pending_joins: dict[str, str] = {}
        self.pending_leaves: set[str] = set()
        self.assembly: Assembly | None = None
        self.nomination: Nomination | None = None
        self.impeachments = 0
        self._next_party = 1

    def _gov(self, account: str) -> int:
        return self.ledger.balance(account, TokenKind.GOVERNANCE)

    # -- parties ---------------------------------------------------------------

    def _busy(self, account: str) -> bool:
        return account in self.membership or account in self.pending_joins

    def form_party(self, founder: str, charter_digest: str) -> Party:
        if not self.ledger.has_account(founder):
            raise UnknownAccount(founder)
        if self._busy(founder):
            raise AlreadyInParty(f"{founder} already belongs to a party")
        if self._gov(founder) < self.config.party_min_tokens:
            raise InsufficientGovernanceTokens(
                f"{founder} needs {self.config.party_min_tokens} Governance tokens to found a party"
            )
        pid = f"party-{self._next_party:04d}"
        self._next_party += 1
        party = Party(pid, charter_digest, founder, {founder})
        self.parties[pid] = party
        self.membership[founder] = pid
        return party

    def join_party(self, node: str, party_id: str) -> None:
        if party_id not in self.parties:
            raise UnknownParty(party_id)
        if not self.ledger.has_account(node):
            raise UnknownAccount(node)
        if self._busy(node):
            raise AlreadyInParty(f"{node} already belongs to a party")
        if self._gov(node) < 1:
            raise InsufficientGovernanceTokens(f"{node} holds no Governance tokens")
        self.pending_joins[node] = party_id

    def leave_party(self, node: str) -> None:
        if node not in self.membership or node in self.pending_leaves:
            raise NotAMember(f"{node} is not a party member")
        self.pending_leaves.add(node)

    def apply_membership_changes(self) -> None:
        for node in sorted(self.pending_leaves):
            party = self.parties[self.membership.pop(node)]
            party.members.discard(node)
            if not party.members:
                del self.parties[party.id]
        self.pending_leaves.clear()
        for node in sorted(self.pending_joins):
            pid = self.pending_joins[node]
            if pid in self.parties:
                self.parties[pid].members.add(node)
                self.membership[node] = pid
        self.pending_joins.clear()

    def eligible_members(self, party_id: str) -> list[str]:
        return sorted(m for m in self.parties[party_id].members if self._gov(m) >= 1)

    def party_tokens(self) -> dict[str, int]:
        return {pid: sum(self._gov(m) for m in p.members) for pid, p in sorted(self.parties.items())}

    # -- elections -------------------------------------------------------------

    def election_snapshot(self) -> dict:
        """Everything an election reads, in serializable form."""
        members = {pid: self.eligible_members(pid) for pid in sorted(self.parties)}
        members = {pid: ms for pid, ms in members.items() if ms}
        snap = {
            "members": members,
            "tokens": {pid: sum(self._gov(m) for m in ms) for pid, ms in members.items()},
            "platform": list(self.platform_nodes),
            "reserved": reserved_arbitral_seats(self.params.platform_supervision_share, self.config.n_arbitral),
            "nomination": self.nomination.to_state() if self.nomination else None,
        }
        if self.config.weighted_tickets:
            snap["weights"] = {m: self._gov(m) for ms in members.values() for m in ms}
        return snap

    def hold_election(self, epoch: int, seed: str) -> Assembly:
        self.assembly = elect_from_snapshot(self.election_snapshot(), seed, epoch, self.config)
        self.nomination = None
        return self.assembly

    def roles_of(self, account: str) -> set[Role]:
        return self.assembly.roles_of(account) if self.assembly else set()

    def arbitral_nodes(self) -> list[str]:
        return self.assembly.holders(Role.ARBITRAL) if self.assembly else []

    def _require_role(self, account: str, *roles: Role, error=NotChief) -> Role:
        held = self.roles_of(account)
        for r in roles:
            if r in held:
                return r
        raise error(f"{account} holds none of {[r.value for r in roles]}")

    def _senate_votes(self, votes: Mapping[str, bool]) -> Fraction:
        senators = set(self.assembly.holders(Role.SENATORIAL)) if self.assembly else set()
        outsiders = sorted(set(votes) - senators)
        if outsiders:
            raise NotSenatorial(f"{outsiders[0]} holds no senatorial seat")
        return senatorial_approval(self.assembly, votes)

    # -- role-gated rights -------------------------------------------------------

    def nominate(self, chief: str, candidates: Iterable[str], boost, epoch: int) -> Nomination:
        self._require_role(chief, Role.CHIEF)
        boost = as_fraction(boost)
        if boost <= 1:
            raise OutOfBounds("nomination boost must exceed 1")
        cands = tuple(sorted(set(candidates)))
        if not cands:
            raise OutOfBounds("nomination needs at least one candidate")
        self.nomination = Nomination(epoch, cands, boost)
        return self.nomination

    def adjust_incentive_pool(self, chief: str, new_split) -> ParameterSet:
        self._require_role(chief, Role.CHIEF)
        split = as_fraction(new_split)
        lo, hi = self.config.split_bounds
        if not lo <= split <= hi:
            raise OutOfBounds(f"split {split} outside [{lo}, {hi}]")
        self.params = self.params.changed({"incentive_pool_split": split})
        return self.params

    def set_conversion_parameter(self, chief: str, value) -> ParameterSet:
        self._require_role(chief, Role.CHIEF)
        self.params = self.params.changed({"labor_to_governance": value})
        return self.params

    def amend_rules(self, proposer: str, delta: Mapping[str, object], votes: Mapping[str, bool]) -> ParameterSet:
        self._require_role(proposer, Role.SENATORIAL, Role.CHIEF, error=NotSenatorial)
        candidate = self.params.changed(delta)
        approval = self._senate_votes(votes)
        if approval < self.params.amendment_threshold:
            raise QuorumNotMet(f"amendment approval {approval} below {self.params.amendment_threshold}")
        self.params = candidate
        return self.params

    def impeach_chief(self, mover: str, votes: Mapping[str, bool]) -> tuple[str, str]:
        """Vacate and refill the chief seat; returns (removed, replacement)."""
        self._require_role(mover, Role.SENATORIAL, error=NotSenatorial)
        approval = self._senate_votes(votes)
        if approval < self.params.impeachment_threshold:
            raise QuorumNotMet(f"impeachment approval {approval} below {self.params.impeachment_threshold}")
        chief_seats = self.assembly.seats_of(Role.CHIEF)
        if not chief_seats:
            raise WrongState("no chief seat to vacate")
        seat = chief_seats[0]
        removed = seat.holder
        party = self.parties.get(seat.party)
        pool = self.eligible_members(seat.party) if party else [removed]
        self.impeachments += 1
        sub_seed = hashlib.sha256(f"{self.assembly.seed}|impeach|{self.impeachments}".encode()).hexdigest()
        seat.holder = select_members(seat.party, pool or [removed], 1, sub_seed,
                                     seat_numbers=[seat.party_seat], exclude=[removed])[0]
        return removed, seat.holder

    def phase_down_platform(self) -> Fraction:
        share = self.params.platform_supervision_share
        if share > 0:
            share = share * self.config.platform_decay
            if share < self.config.platform_cutoff:
                share = Fraction(0)
            self.params = self.params.changed({"platform_supervision_share": share})
        return self.params.platform_supervision_share

    def to_state(self) -> dict:
        return {
            "assembly": self.assembly.to_state() if self.assembly else None,
            "impeachments": self.impeachments,
            "membership": self.membership,
            "next_party": self._next_party,
            "nomination": self.nomination.to_state() if self.nomination else None,
            "params": self.params.to_state(),
            "parties": {
                pid: {"charter": p.charter_digest, "founder": p.founder, "members": sorted(p.members)}
                for pid, p in self.parties.items()
            },
            "pending_joins": self.pending_joins,
            "pending_leaves": sorted(self.pending_leaves),
            "platform_nodes": list(self.platform_nodes),
        }
