"""Wire messages exchanged by the simulated nodes.

Every message is a tagged dataclass; ``signing_bytes`` yields the canonical
byte string a signature covers.  The ``phase_of`` map assigns each tag to the
protocol phase used for complexity accounting; consensus traffic is bucketed
by the purpose of its instance.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .crypto import Signature
from .ledger import Transaction


def enc(*parts) -> bytes:
    """Canonical length-prefixed encoding of mixed fields."""
    out = []
    for p in parts:
        if isinstance(p, bytes):
            out.append(b"B" + len(p).to_bytes(4, "big") + p)
        elif isinstance(p, bool):
            out.append(b"b" + (b"\x01" if p else b"\x00"))
        elif isinstance(p, int):
            out.append(b"I" + p.to_bytes(8, "big", signed=True))
        elif isinstance(p, str):
            raw = p.encode()
            out.append(b"S" + len(raw).to_bytes(4, "big") + raw)
        elif isinstance(p, (tuple, list)):
            inner = enc(*p)
            out.append(b"L" + len(inner).to_bytes(4, "big") + inner)
        elif p is None:
            out.append(b"N")
        else:
            raise TypeError(f"cannot encode {type(p)}")
    return b"".join(out)


@dataclass
class Msg:
    tag = "MSG"

    def size_units(self) -> int:
        return 1


# -- committee configuration ------------------------------------------------

@dataclass
class Config(Msg):
    tag = "CONFIG"
    round_no: int
    committee: int
    pk: bytes
    address: str
    vrf_hash: bytes
    vrf_proof: bytes


@dataclass
class MemList(Msg):
    tag = "MEM_LIST"
    round_no: int
    committee: int
    entries: tuple[tuple[bytes, str], ...]

    def size_units(self) -> int:
        return max(1, len(self.entries))


@dataclass
class Member(Msg):
    tag = "MEMBER"
    round_no: int
    committee: int
    pk: bytes
    address: str
    vrf_hash: bytes
    vrf_proof: bytes


# -- consensus (propose / echo / confirm) ------------------------------------

@dataclass
class Propose(Msg):
    tag = "PROPOSE"
    initiator: int
    round_no: int
    seq: int
    scope: str                  # "committee:<k>" or "referee"
    purpose: str                # phase bucket key, e.g. "intra", "table"
    digest: bytes
    payload: object
    payload_bytes: bytes = b""
    sig: Optional[Signature] = None
    payload_units: int = 1

    def signing_bytes(self) -> bytes:
        return enc("PROPOSE", self.initiator, self.round_no, self.seq,
                   self.scope, self.purpose, self.digest)

    def size_units(self) -> int:
        return max(1, self.payload_units)


@dataclass
class Echo(Msg):
    tag = "ECHO"
    initiator: int
    round_no: int
    seq: int
    digest: bytes
    voter: int
    purpose: str = "intra"
    sig: Optional[Signature] = None
    relay: Optional[Propose] = None

    def signing_bytes(self) -> bytes:
        return enc("ECHO", self.initiator, self.round_no, self.seq,
                   self.digest, self.voter)

    def size_units(self) -> int:
        return 1 + (self.relay.size_units() if self.relay else 0)


@dataclass
class Confirm(Msg):
    tag = "CONFIRM"
    initiator: int
    round_no: int
    seq: int
    digest: bytes
    voter: int
    purpose: str = "intra"
    sig: Optional[Signature] = None
    echo_list: tuple[Echo, ...] = ()

    def signing_bytes(self) -> bytes:
        return enc("CONFIRM", self.initiator, self.round_no, self.seq,
                   self.digest, self.voter)

    def size_units(self) -> int:
        return 1 + len(self.echo_list)


# -- semi-commitments ---------------------------------------------------------

@dataclass
class SemiCommit(Msg):
    """Leader's commitment of its closed member list.

    Sent to referee members with the list itself, and to the partial set with
    the sortition proofs attached.
    """
    tag = "SEMI_COM"
    round_no: int
    committee: int
    digest: bytes
    member_list: tuple[tuple[bytes, str], ...]
    proofs: Optional[tuple[tuple[bytes, bytes, bytes], ...]] = None  # (pk, hash, proof)
    sig: Optional[Signature] = None

    def signing_bytes(self) -> bytes:
        return enc("SEMI_COM", self.round_no, self.committee, self.digest,
                   [(pk, addr) for pk, addr in self.member_list])

    def size_units(self) -> int:
        return max(1, len(self.member_list))


@dataclass
class CommitTable(Msg):
    """Referee-certified table of per-committee commitments."""
    tag = "COM_TABLE"
    round_no: int
    entries: tuple[tuple[int, bytes], ...]      # (committee, digest)
    originals: tuple[SemiCommit, ...]           # leader-signed sources
    cert: object = None
    sender: int = -1

    def size_units(self) -> int:
        return max(1, len(self.entries))


# -- transaction consensus ----------------------------------------------------

@dataclass
class TxList(Msg):
    tag = "TX_LIST"
    round_no: int
    committee: int
    txs: tuple[Transaction, ...]
    sig: Optional[Signature] = None

    def signing_bytes(self) -> bytes:
        return enc("TX_LIST", self.round_no, self.committee,
                   [t.tx_id for t in self.txs])

    def size_units(self) -> int:
        return max(1, len(self.txs))


@dataclass
class Vote(Msg):
    tag = "VOTE"
    round_no: int
    committee: int
    voter: int
    context: str                    # "intra" or "xdec:<from_committee>:<coord>"
    entries: tuple[int, ...]        # +1 / -1 / 0 per listed tx
    sig: Optional[Signature] = None

    def signing_bytes(self) -> bytes:
        return enc("VOTE", self.round_no, self.committee, self.voter,
                   self.context, list(self.entries))

    def size_units(self) -> int:
        return max(1, len(self.entries))


@dataclass
class IntraReport(Msg):
    """Leader -> referee: certified intra-shard decision."""
    tag = "INTRA"
    round_no: int
    committee: int
    decision: object                # ledger.TxDecision
    sig: Optional[Signature] = None

    def signing_bytes(self) -> bytes:
        dec = self.decision
        return enc("INTRA", self.round_no, self.committee,
                   sorted(dec.accepted_ids))


@dataclass
class CrossForward(Msg):
    """Input-side leader forwards a certified cross-shard list."""
    tag = "XSHARD_FWD"
    round_no: int
    from_committee: int
    to_committee: int
    txs: tuple[Transaction, ...]
    cert: object                    # consensus result within the source committee
    member_list: tuple[tuple[bytes, str], ...]
    sig: Optional[Signature] = None

    def signing_bytes(self) -> bytes:
        cert_digest = getattr(self.cert, "digest", b"") if self.cert is not None else b""
        cert_confirms = [
            (c.voter, c.sig.bytes if c.sig else b"")
            for c in getattr(self.cert, "confirms", ())
        ]
        return enc("XSHARD_FWD", self.round_no, self.from_committee,
                   self.to_committee, [t.tx_id for t in self.txs],
                   cert_digest, cert_confirms,
                   [(pk, addr) for pk, addr in self.member_list])

    def size_units(self) -> int:
        return max(1, len(self.txs) + len(self.member_list))


@dataclass
class CrossResult(Msg):
    """Output-side verdict returned to the input-side leader."""
    tag = "XSHARD_RES"
    round_no: int
    from_committee: int
    to_committee: int
    decision: object
    sig: Optional[Signature] = None

    def signing_bytes(self) -> bytes:
        return enc("XSHARD_RES", self.round_no, self.from_committee,
                   self.to_committee, sorted(self.decision.accepted_ids))


@dataclass
class CrossReport(Msg):
    """Either side -> referee: certified cross-shard decision."""
    tag = "XINTER"
    round_no: int
    from_committee: int
    to_committee: int
    decision: object
    sig: Optional[Signature] = None

    def signing_bytes(self) -> bytes:
        return enc("XINTER", self.round_no, self.from_committee,
                   self.to_committee, sorted(self.decision.accepted_ids))


# -- reputation ----------------------------------------------------------------

@dataclass
class ScoreReport(Msg):
    """Leader -> referee: certified (score list, vote list) for the round."""
    tag = "SCORES"
    round_no: int
    committee: int
    scores: tuple[tuple[int, float], ...]
    cert: object = None
    sig: Optional[Signature] = None

    def signing_bytes(self) -> bytes:
        return enc("SCORES", self.round_no, self.committee,
                   [(n, str(s)) for n, s in self.scores])

    def size_units(self) -> int:
        return max(1, len(self.scores))


# -- recovery ------------------------------------------------------------------

@dataclass
class WitnessGossip(Msg):
    tag = "WITNESS"
    round_no: int
    committee: int
    witness: object


@dataclass
class Impeach(Msg):
    tag = "IMPEACH"
    round_no: int
    committee: int
    accused: int
    accuser: int
    witness: object
    sig: Optional[Signature] = None

    def signing_bytes(self) -> bytes:
        return enc("IMPEACH", self.round_no, self.committee,
                   self.accused, self.accuser)


@dataclass
class Approve(Msg):
    tag = "APPROVE"
    round_no: int
    committee: int
    accused: int
    accuser: int
    voter: int
    sig: Optional[Signature] = None

    def signing_bytes(self) -> bytes:
        return enc("APPROVE", self.round_no, self.committee,
                   self.accused, self.accuser, self.voter)


@dataclass
class Accusation(Msg):
    """Partial member -> referee: witness plus committee approval cert."""
    tag = "ACCUSE"
    round_no: int
    committee: int
    accused: int
    accuser: int
    witness: object
    approvals: tuple[Approve, ...]
    sig: Optional[Signature] = None

    def signing_bytes(self) -> bytes:
        return enc("ACCUSE", self.round_no, self.committee,
                   self.accused, self.accuser)

    def size_units(self) -> int:
        return 1 + len(self.approvals)


@dataclass
class NewLeader(Msg):
    tag = "NEW"
    round_no: int
    committee: int
    successor: int
    sender: int
    cert: object = None
    sig: Optional[Signature] = None

    def signing_bytes(self) -> bytes:
        return enc("NEW", self.round_no, self.committee, self.successor,
                   self.sender)


# -- participation / beacon / block ---------------------------------------------

@dataclass
class PowTicket(Msg):
    tag = "TICKET"
    round_no: int                    # the round being registered for
    pk: bytes
    node: int
    nonce: int


@dataclass
class BeaconCommit(Msg):
    tag = "BEACON_C"
    round_no: int
    member: int
    digest: bytes


@dataclass
class BeaconReveal(Msg):
    tag = "BEACON_R"
    round_no: int
    member: int
    value: bytes


@dataclass
class BlockAnnounce(Msg):
    tag = "BLOCK"
    block: object

    def size_units(self) -> int:
        return max(1, len(self.block.txs))


@dataclass
class FinalReport(Msg):
    """Leader -> referee: certified end-of-round shard snapshot."""
    tag = "FINAL"
    round_no: int
    committee: int
    utxo_digest: bytes
    remaining: tuple[Transaction, ...]
    cert: object = None
    sig: Optional[Signature] = None

    def signing_bytes(self) -> bytes:
        return enc("FINAL", self.round_no, self.committee, self.utxo_digest,
                   [t.tx_id for t in self.remaining])

    def size_units(self) -> int:
        return 1 + len(self.remaining)


@dataclass
class ShardHandoff(Msg):
    """Referee -> next round's partial set: shard snapshot tagged by committee."""
    tag = "HANDOFF"
    round_no: int
    committee: int
    utxo_digest: bytes
    remaining: tuple[Transaction, ...]

    def size_units(self) -> int:
        return 1 + len(self.remaining)


# -- phase accounting -----------------------------------------------------------

PHASES = (
    "config",
    "commitment",
    "commitment_validation",
    "intra",
    "inter",
    "reputation",
    "selection",
    "blockgen",
    "recovery",
)

_TAG_PHASE = {
    "CONFIG": "config",
    "MEM_LIST": "config",
    "MEMBER": "config",
    "SEMI_COM": "commitment",
    "COM_TABLE": "commitment",
    "TX_LIST": "intra",
    "VOTE": "intra",
    "INTRA": "intra",
    "XSHARD_FWD": "inter",
    "XSHARD_RES": "inter",
    "XINTER": "inter",
    "SCORES": "reputation",
    "WITNESS": "recovery",
    "IMPEACH": "recovery",
    "APPROVE": "recovery",
    "ACCUSE": "recovery",
    "NEW": "recovery",
    "TICKET": "selection",
    "BEACON_C": "selection",
    "BEACON_R": "selection",
    "BLOCK": "blockgen",
    "FINAL": "blockgen",
    "HANDOFF": "blockgen",
}

_PURPOSE_PHASE = {
    "table": "commitment_validation",
    "intra": "intra",
    "xleg": "inter",
    "xdec": "inter",
    "scores": "reputation",
    "beacon": "selection",
    "block": "blockgen",
    "final": "blockgen",
    "evict": "recovery",
    "accuse": "recovery",
}


def phase_of(msg: Msg) -> str:
    if isinstance(msg, (Propose, Echo, Confirm)):
        return _PURPOSE_PHASE.get(msg.purpose.split(":")[0], "intra")
    return _TAG_PHASE.get(msg.tag, "config")
