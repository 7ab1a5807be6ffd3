"""Behavioural policies for simulated agents.

A policy is a bundle of rates and thresholds plus the decision rules below.
Every decision is a function of what the agent can observe and of draws
from its own per-epoch random stream, never of iteration order.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

POLICY_DEFAULTS: dict[str, dict[str, float]] = {
    "honest-creator": {"submit": 0.8, "pledge": 0.2, "pledge_amount": 10, "convert_governance": 0.05,
                       "convert_back": 0.02, "join": 0.5, "rebut": 1.0},
    "plagiarist": {"submit": 0.3, "rebut": 0.2, "convert_capital": 0.3},
    "diligent-investor": {"invest": 0.7, "amount": 40, "rate": 0.5, "alert_below": 35},
    "fickle-investor": {"invest": 0.3, "amount": 30, "rate": 0.5, "reject": 0.3, "alert": 0.05},
    "active-governor": {"submit": 0.5, "convert_governance": 0.5, "join": 1.0, "vote": 0.9, "accuracy": 0.9,
                        "nominate": 0.2, "boost": 4},
    "passive-holder": {"transfer": 0.1, "amount": 10, "convert_capital": 0.2},
    "honest-reporter": {"submit": 0.3, "detect": 0.5},
    "false-reporter": {"submit": 0.3, "report": 0.2},
    "platform": {"vote": 0.9, "accuracy": 0.9, "audit_detect": 0.3},
}
POLICY_NAMES = tuple(n for n in POLICY_DEFAULTS if n != "platform")

DEFAULT_ENDOWMENT = {"diligent-investor": 1000, "fickle-investor": 600, "passive-holder": 300}

CONTENT_SUBMITTERS = frozenset({"honest-creator", "plagiarist", "active-governor", "honest-reporter", "false-reporter"})
INVESTORS = frozenset({"diligent-investor", "fickle-investor"})
HONEST_AUTHORS = frozenset({"honest-creator", "active-governor", "honest-reporter", "false-reporter"})


@dataclass(frozen=True)
class Agent:
    id: str
    policy: str
    params: dict

    def p(self, key: str, default: float = 0.0) -> float:
        return self.params.get(key, default)


def agent_id(policy: str, index: int) -> str:
    return f"{policy}-{index:03d}"


class CounterStream:
    """Counter-keyed draws: the n-th draw is ``H(key | n)``, nothing else.

    Streams for different agents or epochs share no state, so adding an
    agent never shifts anyone else's draws.
    """

    __slots__ = ("_key", "_n")

    def __init__(self, key: bytes):
        self._key = key
        self._n = 0

    def _next(self) -> int:
        h = hashlib.sha256(self._key + self._n.to_bytes(8, "big")).digest()
        self._n += 1
        return int.from_bytes(h[:8], "big")

    def random(self) -> float:
        return (self._next() >> 11) * (1.0 / 9007199254740992.0)

    def below(self, n: int) -> int:
        if n < 1:
            raise ValueError("empty range")
        return self._next() % n

    def choice(self, seq):
        return seq[self.below(len(seq))]


def stream(master_seed: int, agent: str, epoch: int) -> CounterStream:
    """Independent stream for one agent in one epoch."""
    return CounterStream(f"{master_seed}|{agent}|{epoch}|".encode())


# -- arbitral judgement ----------------------------------------------------------


def audit_verdict(agent: Agent, rng: CounterStream, genuine: bool) -> bool:
    """Vote on accepting a content submission."""
    if genuine:
        return rng.random() < agent.p("accuracy", 0.75)
    return rng.random() >= agent.p("audit_detect", 0.25)


def tipoff_audit_verdict(agent: Agent, rng: CounterStream, report_true: bool) -> bool:
    """Vote on publishing a tip-off after the preliminary audit."""
    acc = agent.p("accuracy", 0.75)
    return rng.random() < (acc if report_true else 1 - acc)


def arbitration_verdict(agent: Agent, rng: CounterStream, accused_innocent: bool) -> bool:
    """Vote on whether the accused party's rebuttal succeeds."""
    acc = agent.p("accuracy", 0.75)
    return rng.random() < (acc if accused_innocent else 1 - acc)


# -- funder judgement ----------------------------------------------------------------


def accepts_contracts(agent: Agent, rng: CounterStream) -> bool:
    if agent.policy == "fickle-investor":
        return rng.random() >= agent.p("reject")
    return True


def satisfaction(agent: Agent, rng: CounterStream, creator_honest: bool) -> int:
    if agent.policy == "diligent-investor":
        return 1 if creator_honest else -1
    return rng.choice((-1, 0, 1))


def council_approves(agent: Agent, rng: CounterStream, creator_honest: bool) -> bool:
    if agent.policy == "diligent-investor":
        return creator_honest
    return rng.random() < 0.5
