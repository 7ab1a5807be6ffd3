"""Three-token economy with crowdfunding, party-based governance and distributed supervision."""

from dcc.ledger import ExchangeRate, Ledger, MintReason, TokenKind
from dcc.system import Ecosystem, Params

__all__ = ["Ecosystem", "ExchangeRate", "Ledger", "MintReason", "Params", "TokenKind"]
__version__ = "0.1.0"
