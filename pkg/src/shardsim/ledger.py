"""UTXO ledger: transactions, the validity predicate, shard state and blocks.

Amounts are integer units so value conservation is exact.  A UTXO lives in
the shard derived from its owner key (digest mod committee count); a
transaction's inputs must share one shard while outputs may land anywhere,
which makes the tx cross-shard whenever an output shard differs from the
input shard.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

from .crypto import SimCrypto, Signature, digest_int, sha256


def owner_shard(owner_pk: bytes, committees: int) -> int:
    return digest_int(sha256(b"SHARD/" + owner_pk)) % committees


def _enc_bytes(b: bytes) -> bytes:
    return len(b).to_bytes(4, "big") + b


@dataclass(frozen=True)
class Utxo:
    utxo_id: bytes
    owner: bytes
    amount: int
    shard: int


@dataclass(frozen=True)
class TxOutput:
    owner: bytes
    amount: int


@dataclass(frozen=True)
class Transaction:
    inputs: tuple[bytes, ...]          # utxo ids, all in one shard
    outputs: tuple[TxOutput, ...]
    signatures: tuple[Signature, ...]  # one per input, by the input's owner
    tx_id: bytes = b""

    @staticmethod
    def body_bytes(inputs: Iterable[bytes], outputs: Iterable[TxOutput]) -> bytes:
        parts = [b"TX/"]
        for i in inputs:
            parts.append(_enc_bytes(i))
        parts.append(b"/OUT/")
        for o in outputs:
            parts.append(_enc_bytes(o.owner) + o.amount.to_bytes(8, "big"))
        return b"".join(parts)

    def body(self) -> bytes:
        return Transaction.body_bytes(self.inputs, self.outputs)


def make_transaction(
    crypto: SimCrypto,
    inputs: list[Utxo],
    outputs: list[TxOutput],
    secret_keys: dict[bytes, bytes],
) -> Transaction:
    """Build and sign a transaction spending ``inputs`` (owner sks supplied)."""
    body = Transaction.body_bytes([u.utxo_id for u in inputs], outputs)
    sigs = tuple(crypto.sign(secret_keys[u.owner], body) for u in inputs)
    return Transaction(
        inputs=tuple(u.utxo_id for u in inputs),
        outputs=tuple(outputs),
        signatures=sigs,
        tx_id=sha256(body),
    )


def output_utxos(tx: Transaction, committees: int) -> list[Utxo]:
    out = []
    for idx, o in enumerate(tx.outputs):
        uid = sha256(b"UTXO/" + tx.tx_id + idx.to_bytes(4, "big"))
        out.append(Utxo(uid, o.owner, o.amount, owner_shard(o.owner, committees)))
    return out


def tx_fee(tx: Transaction, utxo_state: dict[bytes, Utxo]) -> int:
    total_in = sum(utxo_state[i].amount for i in tx.inputs)
    return total_in - sum(o.amount for o in tx.outputs)


def validate(tx: Transaction, utxo_state: dict[bytes, Utxo], crypto: SimCrypto) -> bool:
    """Validity predicate: inputs exist and are unspent, no duplicate inputs,
    owner signatures verify, and inputs cover outputs."""
    if len(set(tx.inputs)) != len(tx.inputs) or not tx.inputs:
        return False
    if len(tx.signatures) != len(tx.inputs):
        return False
    if any(o.amount < 0 for o in tx.outputs):
        return False
    total_in = 0
    body = tx.body()
    for inp, sig in zip(tx.inputs, tx.signatures):
        u = utxo_state.get(inp)
        if u is None:
            return False
        if not crypto.verify(u.owner, body, sig):
            return False
        total_in += u.amount
    return total_in >= sum(o.amount for o in tx.outputs)


def input_shard(tx: Transaction, utxo_state: dict[bytes, Utxo]) -> Optional[int]:
    shards = {utxo_state[i].shard for i in tx.inputs if i in utxo_state}
    return next(iter(shards)) if len(shards) == 1 else None


def output_shards(tx: Transaction, committees: int) -> set[int]:
    return {owner_shard(o.owner, committees) for o in tx.outputs}


@dataclass
class TxDecision:
    """A committee's certified verdict on a transaction list."""
    committee: int
    round_no: int
    txs: tuple[Transaction, ...]
    accepted_ids: frozenset[bytes]
    cert: object = None            # consensus result over (decision, votes)
    coordinator: int = -1

    def accepted_txs(self) -> list[Transaction]:
        return [t for t in self.txs if t.tx_id in self.accepted_ids]


@dataclass
class Block:
    round_no: int
    txs: tuple[Transaction, ...]            # packed, conflict-free
    fees: int
    next_randomness: bytes
    participants: tuple[int, ...]           # node ids registered for next round
    reputations: tuple[tuple[int, float], ...]
    next_leaders: tuple[int, ...]
    next_partial_sets: tuple[tuple[int, ...], ...]
    next_referee: tuple[int, ...]
    source_committees: tuple[int, ...] = ()


class ShardState:
    """UTXO set of one shard; mutated only by block application."""

    def __init__(self, shard: int):
        self.shard = shard
        self.utxos: dict[bytes, Utxo] = {}

    def total_value(self) -> int:
        return sum(u.amount for u in self.utxos.values())

    def add(self, utxo: Utxo) -> None:
        self.utxos[utxo.utxo_id] = utxo

    def remove(self, utxo_id: bytes) -> None:
        self.utxos.pop(utxo_id, None)


def assemble_block_txs(
    decisions: list[TxDecision],
    utxo_global: dict[bytes, Utxo],
    crypto: SimCrypto,
    tx_cap: Optional[int] = None,
) -> tuple[list[Transaction], list[tuple[int, Transaction]]]:
    """Referee-side packing: re-validate accepted txs against the global view,
    drop duplicates and input conflicts (lower committee id wins, then list
    order), honour the optional package cap.  Returns (packed, leftovers) where
    leftovers carry the committee that certified them."""
    packed: list[Transaction] = []
    leftovers: list[tuple[int, Transaction]] = []
    seen_ids: set[bytes] = set()
    spent: set[bytes] = set()
    for dec in sorted(decisions, key=lambda d: (d.committee, d.coordinator)):
        for tx in dec.accepted_txs():
            if tx.tx_id in seen_ids:
                continue
            seen_ids.add(tx.tx_id)
            if tx_cap is not None and len(packed) >= tx_cap:
                leftovers.append((dec.committee, tx))
                continue
            if any(i in spent for i in tx.inputs) or not validate(tx, utxo_global, crypto):
                leftovers.append((dec.committee, tx))
                continue
            spent.update(tx.inputs)
            packed.append(tx)
    return packed, leftovers


def apply_block_to_shard(state: ShardState, block: Block, committees: int) -> None:
    for tx in block.txs:
        for inp in tx.inputs:
            state.remove(inp)
        for u in output_utxos(tx, committees):
            if u.shard == state.shard:
                state.add(u)


def apply_block_global(utxo_global: dict[bytes, Utxo], block: Block, committees: int) -> None:
    for tx in block.txs:
        for inp in tx.inputs:
            utxo_global.pop(inp, None)
        for u in output_utxos(tx, committees):
            utxo_global[u.utxo_id] = u


def utxo_set_digest(utxos: dict[bytes, Utxo]) -> bytes:
    acc = sha256(b"UTXOSET/")
    for uid in sorted(utxos):
        u = utxos[uid]
        acc = sha256(acc + _enc_bytes(uid) + _enc_bytes(u.owner) + u.amount.to_bytes(8, "big"))
    return acc
