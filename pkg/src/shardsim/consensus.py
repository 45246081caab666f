"""Inside-committee consensus state machine and misbehaviour witnesses.

One instance is keyed by (initiator, round, seq).  The initiator broadcasts a
signed PROPOSE carrying the payload and its digest; members echo the digest to
everyone while relaying the original PROPOSE; once a member has seen matching
echoes from a strict majority of the full roster *and* holds the initiator's
PROPOSE, it confirms back to the initiator, who completes with a certificate
of more than half the roster.  Silent nodes count against the quorum.

Members remember the first signed proposal per key: a second initiator-signed
proposal with the same key but a different digest yields an equivocation
witness, the raw material of the leader-recovery procedure.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

from .crypto import SimCrypto, sha256
from .messages import Confirm, Config, CrossForward, Echo, Propose, SemiCommit, enc

PkResolver = Callable[[int], bytes]


class DuplicateSeqError(Exception):
    pass


@dataclass
class ConsensusResult:
    initiator: int
    round_no: int
    seq: int
    scope: str
    purpose: str
    digest: bytes
    payload: object
    payload_bytes: bytes
    confirms: tuple[Confirm, ...]


def majority_threshold(roster_size: int) -> int:
    """Smallest count v with v > roster_size / 2."""
    return roster_size // 2 + 1


def verify_result(
    result: ConsensusResult,
    roster: tuple[int, ...],
    crypto: SimCrypto,
    pk_of: PkResolver,
) -> bool:
    """Check a transferred certificate: distinct roster voters above the
    majority threshold, all confirm signatures valid over the same digest."""
    if sha256(result.payload_bytes) != result.digest:
        return False
    voters = set()
    roster_set = set(roster)
    for c in result.confirms:
        if c.digest != result.digest or c.voter in voters or c.voter not in roster_set:
            return False
        if c.initiator != result.initiator or c.seq != result.seq or c.round_no != result.round_no:
            return False
        if c.sig is None or not crypto.verify(pk_of(c.voter), c.signing_bytes(), c.sig):
            return False
        voters.add(c.voter)
    return len(voters) >= majority_threshold(len(roster))


class InitiatorInstance:
    def __init__(
        self,
        node: int,
        round_no: int,
        seq: int,
        scope: str,
        purpose: str,
        payload: object,
        payload_bytes: bytes,
        roster: tuple[int, ...],
        crypto: SimCrypto,
        secret_key: bytes,
        pk_of: PkResolver,
        payload_units: int = 1,
    ):
        self.node = node
        self.round_no = round_no
        self.seq = seq
        self.scope = scope
        self.purpose = purpose
        self.payload = payload
        self.payload_bytes = payload_bytes
        self.digest = sha256(payload_bytes)
        self.roster = roster
        self.crypto = crypto
        self.pk_of = pk_of
        self._confirms: dict[int, Confirm] = {}
        self.result: Optional[ConsensusResult] = None
        prop = Propose(
            initiator=node,
            round_no=round_no,
            seq=seq,
            scope=scope,
            purpose=purpose,
            digest=self.digest,
            payload=payload,
            payload_bytes=payload_bytes,
            payload_units=payload_units,
        )
        prop.sig = crypto.sign(secret_key, prop.signing_bytes())
        self.proposal = prop

    def on_confirm(self, msg: Confirm) -> Optional[ConsensusResult]:
        if self.result is not None:
            return None
        if msg.digest != self.digest or msg.voter not in self.roster:
            return None
        if msg.round_no != self.round_no or msg.seq != self.seq or msg.initiator != self.node:
            return None
        if msg.sig is None or not self.crypto.verify(
            self.pk_of(msg.voter), msg.signing_bytes(), msg.sig
        ):
            return None
        self._confirms.setdefault(msg.voter, msg)
        if len(self._confirms) >= majority_threshold(len(self.roster)):
            self.result = ConsensusResult(
                initiator=self.node,
                round_no=self.round_no,
                seq=self.seq,
                scope=self.scope,
                purpose=self.purpose,
                digest=self.digest,
                payload=self.payload,
                payload_bytes=self.payload_bytes,
                confirms=tuple(self._confirms[v] for v in sorted(self._confirms)),
            )
        return self.result


class MemberInstance:
    """Member-side state for one (initiator, round, seq) instance.

    ``on_propose``/``on_echo`` return (echo to broadcast, confirm for the
    initiator, witness) — any of which may be None.
    """

    def __init__(
        self,
        node: int,
        initiator: int,
        round_no: int,
        seq: int,
        scope: str,
        purpose: str,
        roster: tuple[int, ...],
        crypto: SimCrypto,
        secret_key: bytes,
        pk_of: PkResolver,
        gate: Optional[Callable[[Propose], bool]] = None,
    ):
        self.node = node
        self.initiator = initiator
        self.round_no = round_no
        self.seq = seq
        self.scope = scope
        self.purpose = purpose
        self.roster = roster
        self.crypto = crypto
        self.secret_key = secret_key
        self.pk_of = pk_of
        self.gate = gate
        self.first_signed: Optional[Propose] = None   # equivocation reference
        self.valid_by_digest: dict[bytes, Propose] = {}
        self.echo_voters: dict[bytes, dict[int, Echo]] = {}
        self.backed_digest: Optional[bytes] = None
        self.echoed = False
        self.confirmed = False
        self.aborted = False

    def _sig_ok(self, prop: Propose) -> bool:
        return prop.sig is not None and self.crypto.verify(
            self.pk_of(prop.initiator), prop.signing_bytes(), prop.sig
        )

    def _register(self, prop: Propose) -> Optional["Witness"]:
        """Track any signed proposal; detect equivocation; keep payload-valid
        ones for echo/confirm eligibility."""
        if prop.initiator != self.initiator or prop.round_no != self.round_no or prop.seq != self.seq:
            return None
        if not self._sig_ok(prop):
            return None
        if self.first_signed is None:
            self.first_signed = prop
        elif prop.digest != self.first_signed.digest:
            return make_equivocation_witness(self.first_signed, prop)
        if sha256(prop.payload_bytes) == prop.digest:
            self.valid_by_digest.setdefault(prop.digest, prop)
        return None

    def _progress(self) -> tuple[Optional[Echo], Optional[Confirm]]:
        echo = None
        if not self.echoed and self.backed_digest is None:
            for digest, prop in self.valid_by_digest.items():
                if self.gate is not None and not self.gate(prop):
                    continue
                self.backed_digest = digest
                self.echoed = True
                echo = Echo(
                    initiator=self.initiator,
                    round_no=self.round_no,
                    seq=self.seq,
                    digest=digest,
                    voter=self.node,
                    purpose=self.purpose,
                    relay=prop,
                )
                echo.sig = self.crypto.sign(self.secret_key, echo.signing_bytes())
                self._count_echo(echo)
                break
        return echo, self._maybe_confirm()

    def on_propose(self, prop: Propose) -> tuple[Optional[Echo], Optional[Confirm], Optional["Witness"]]:
        if self.aborted:
            return None, None, None
        witness = self._register(prop)
        if witness is not None:
            self.aborted = True
            return None, None, witness
        echo, confirm = self._progress()
        return echo, confirm, None

    def _count_echo(self, echo: Echo) -> None:
        self.echo_voters.setdefault(echo.digest, {}).setdefault(echo.voter, echo)

    def on_echo(self, echo: Echo) -> tuple[Optional[Echo], Optional[Confirm], Optional["Witness"]]:
        if self.aborted or echo.round_no != self.round_no or echo.seq != self.seq:
            return None, None, None
        if echo.initiator != self.initiator or echo.voter not in self.roster:
            return None, None, None
        if echo.sig is None or not self.crypto.verify(
            self.pk_of(echo.voter), echo.signing_bytes(), echo.sig
        ):
            return None, None, None
        if echo.relay is not None:
            witness = self._register(echo.relay)
            if witness is not None:
                self.aborted = True
                return None, None, witness
        self._count_echo(echo)
        out_echo, confirm = self._progress()
        return out_echo, confirm, None

    def _maybe_confirm(self) -> Optional[Confirm]:
        if self.confirmed or self.backed_digest is None:
            return None
        if self.backed_digest not in self.valid_by_digest:
            return None
        voters = self.echo_voters.get(self.backed_digest, {})
        if len(voters) < majority_threshold(len(self.roster)):
            return None
        self.confirmed = True
        confirm = Confirm(
            initiator=self.initiator,
            round_no=self.round_no,
            seq=self.seq,
            digest=self.backed_digest,
            voter=self.node,
            purpose=self.purpose,
            echo_list=tuple(voters[v] for v in sorted(voters)),
        )
        confirm.sig = self.crypto.sign(self.secret_key, confirm.signing_bytes())
        return confirm


# -- witnesses ----------------------------------------------------------------

WITNESS_KINDS = (
    "equivocation",          # two conflicting signed proposals, same key
    "commit_equivocation",   # two conflicting signed member-list commitments
    "commit_mismatch",       # commitment digest does not hash its own list
    "unregistered_member",   # committed list names an unknown public key
    "missing_member",        # committed list omits a proven committee member
    "invalid_member_proof",  # committed list entry lacks a valid sortition proof
    "cert_mismatch",         # forwarded cross-shard list contradicts its certificate
)


@dataclass
class Witness:
    kind: str
    accused: int
    m_l: object
    m_0: object = None

    def key(self) -> tuple:
        return (self.kind, self.accused)


@dataclass
class WitnessContext:
    """Everything a judge needs to verify a witness objectively."""
    crypto: SimCrypto
    pk_of: PkResolver
    registered: frozenset = frozenset()
    commitment_table: Optional[dict[int, bytes]] = None
    member_list_hash: Optional[Callable[[tuple], bytes]] = None
    sortition_check: Optional[Callable[[Config], bool]] = None
    roster_ids_of_pks: Optional[Callable[[tuple], tuple[int, ...]]] = None


def make_equivocation_witness(a: Propose, b: Propose) -> Witness:
    return Witness(kind="equivocation", accused=a.initiator, m_l=a, m_0=b)


def detect_equivocation(
    a: Propose, b: Propose, crypto: SimCrypto, pk_of: PkResolver
) -> Optional[Witness]:
    if a.initiator != b.initiator or a.round_no != b.round_no or a.seq != b.seq:
        return None
    if a.digest == b.digest:
        return None
    pk = pk_of(a.initiator)
    for msg in (a, b):
        if msg.sig is None or not crypto.verify(pk, msg.signing_bytes(), msg.sig):
            return None
    return make_equivocation_witness(a, b)


def cross_leg_digest(round_no: int, from_committee: int, to_committee: int, tx_ids) -> bytes:
    return sha256(enc("XLEG", round_no, from_committee, to_committee, list(tx_ids)))


def _commit_sig_ok(msg: SemiCommit, accused: int, ctx: WitnessContext) -> bool:
    return msg.sig is not None and ctx.crypto.verify(
        ctx.pk_of(accused), msg.signing_bytes(), msg.sig
    )


def verify_witness(w: Witness, ctx: WitnessContext) -> bool:
    """True iff the pair (m_l, m_0) proves a protocol violation by ``accused``.

    Every accepted witness hinges on a message signed by the accused, so a
    leader that followed the rules can never be convicted by this check.
    """
    if w.kind == "equivocation":
        a, b = w.m_l, w.m_0
        if not isinstance(a, Propose) or not isinstance(b, Propose):
            return False
        if a.initiator != w.accused:
            return False
        return detect_equivocation(a, b, ctx.crypto, ctx.pk_of) is not None

    if w.kind == "commit_equivocation":
        a, b = w.m_l, w.m_0
        if not isinstance(a, SemiCommit) or not isinstance(b, SemiCommit):
            return False
        if (a.round_no, a.committee) != (b.round_no, b.committee) or a.digest == b.digest:
            return False
        return _commit_sig_ok(a, w.accused, ctx) and _commit_sig_ok(b, w.accused, ctx)

    if w.kind == "commit_mismatch":
        m = w.m_l
        if not isinstance(m, SemiCommit) or not _commit_sig_ok(m, w.accused, ctx):
            return False
        if ctx.member_list_hash is None:
            return False
        return ctx.member_list_hash(m.member_list) != m.digest

    if w.kind == "unregistered_member":
        m = w.m_l
        if not isinstance(m, SemiCommit) or not _commit_sig_ok(m, w.accused, ctx):
            return False
        return any(pk not in ctx.registered for pk, _ in m.member_list)

    if w.kind == "missing_member":
        m, cfg = w.m_l, w.m_0
        if not isinstance(m, SemiCommit) or not isinstance(cfg, Config):
            return False
        if not _commit_sig_ok(m, w.accused, ctx):
            return False
        if ctx.sortition_check is None or not ctx.sortition_check(cfg):
            return False
        if cfg.committee != m.committee or cfg.round_no != m.round_no:
            return False
        return all(pk != cfg.pk for pk, _ in m.member_list)

    if w.kind == "invalid_member_proof":
        m = w.m_l
        if not isinstance(m, SemiCommit) or not _commit_sig_ok(m, w.accused, ctx):
            return False
        if m.proofs is None or ctx.sortition_check is None:
            return False
        proof_by_pk = {pk: (h, p) for pk, h, p in m.proofs}
        flagged_pk = w.m_0
        if not any(pk == flagged_pk for pk, _ in m.member_list):
            return False
        entry = proof_by_pk.get(flagged_pk)
        if entry is None:
            return True
        cfg = Config(m.round_no, m.committee, flagged_pk, "", entry[0], entry[1])
        return not ctx.sortition_check(cfg)

    if w.kind == "cert_mismatch":
        fwd = w.m_l
        if not isinstance(fwd, CrossForward):
            return False
        if fwd.sig is None or not ctx.crypto.verify(
            ctx.pk_of(w.accused), fwd.signing_bytes(), fwd.sig
        ):
            return False
        cert = fwd.cert
        if not isinstance(cert, ConsensusResult):
            return True  # signed forward with no usable certificate
        if ctx.commitment_table is not None and ctx.member_list_hash is not None:
            table_digest = ctx.commitment_table.get(fwd.from_committee)
            if table_digest is not None and ctx.member_list_hash(fwd.member_list) != table_digest:
                return True
        if ctx.roster_ids_of_pks is not None:
            roster = ctx.roster_ids_of_pks(fwd.member_list)
            if not verify_result(cert, roster, ctx.crypto, ctx.pk_of):
                return True
        expected = cross_leg_digest(
            fwd.round_no, fwd.from_committee, fwd.to_committee,
            [t.tx_id for t in fwd.txs],
        )
        return cert.digest != expected

    return False
