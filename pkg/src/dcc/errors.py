"""Exception hierarchy shared by every subsystem.

Every rejected operation raises a subclass of :class:`DCCError` before any
state is touched, so a failed command never leaves a partial mutation behind.
"""

from __future__ import annotations


class DCCError(Exception):
    """Base class for all protocol-level rejections."""


# ledger
class DuplicateAccount(DCCError):
    pass


class UnknownAccount(DCCError):
    pass


class ZeroAmount(DCCError):
    pass


class InsufficientBalance(DCCError):
    pass


class ZeroPhases(DCCError):
    pass


class NonTransferableKind(DCCError):
    pass


class InvalidMintReason(DCCError):
    pass


class UnknownEscrow(DCCError):
    pass


# crowdfunding
class BadTrancheSchedule(DCCError):
    pass


class CreditTooLow(DCCError):
    pass


class InvalidProportion(DCCError):
    pass


class WrongState(DCCError):
    pass


class PastDeadline(DCCError):
    pass


class BeforeDeadline(DCCError):
    pass


class OverTarget(DCCError):
    pass


class NotAFunder(DCCError):
    pass


class DuplicateVote(DCCError):
    pass


class OutOfOrderTranche(DCCError):
    pass


class ProjectSuspended(DCCError):
    pass


class CouncilVoteRequired(DCCError):
    pass


class UnknownProject(DCCError):
    pass


# governance
class InsufficientGovernanceTokens(DCCError):
    pass


class AlreadyInParty(DCCError):
    pass


class NotAMember(DCCError):
    pass


class NoEligibleParties(DCCError):
    pass


class EmptyParty(DCCError):
    pass


class RoleCountMismatch(DCCError):
    pass


class NotChief(DCCError):
    pass


class NotSenatorial(DCCError):
    pass


class NotArbitral(DCCError):
    pass


class OutOfBounds(DCCError):
    pass


class QuorumNotMet(DCCError):
    pass


class UnknownParty(DCCError):
    pass


# supervision
class IntervalOpen(DCCError):
    pass


class DuplicateRating(DCCError):
    pass


class ChallengeWindowClosed(DCCError):
    pass


class UnknownCase(DCCError):
    pass


class NotTheTarget(DCCError):
    pass


# analysis / tooling
class EmptyWindow(DCCError):
    pass


class ConfigInvalid(DCCError):
    pass


class ParseError(DCCError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class UnknownKind(DCCError):
    pass


class CorruptLog(DCCError):
    """Replay diverged from the recorded log; ``seq`` is the first bad record."""

    def __init__(self, seq: int, message: str = ""):
        super().__init__(f"corrupt log at seq {seq}" + (f": {message}" if message else ""))
        self.seq = seq


class IoFailure(DCCError):
    pass
