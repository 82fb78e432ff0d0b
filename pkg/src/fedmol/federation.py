"""Deterministic in-process federation runtime.

The runtime moves opaque payloads between a server state and per-client
computations.  The interface shape enforces data minimization: a client round
sees only its own shard plus the broadcast server state, and the server sees
only the returned RoundMessages.  Results are independent of client execution
order (messages are folded in ascending client id, client randomness is
derived from (seed, client, round)).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from .util import derive_seed


class ProtocolError(RuntimeError):
    """A protocol-level aggregation failure (surfaced, never swallowed)."""


@dataclass(frozen=True)
class FederationConfig:
    n_clients: int
    rounds: int
    seed: int = 0

    def __post_init__(self):
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if self.n_clients < 1:
            raise ValueError("n_clients must be >= 1")


@dataclass(frozen=True)
class RoundMessage:
    client_id: int
    payload: Any


@dataclass
class ProtocolResult:
    server_state: Any
    client_outputs: list
    message_log: tuple[tuple[int, int], ...]  # (round, client_id) per message received


class FederatedProtocol:
    """Hooks a protocol plugs into the runtime.

    ``run_client``/``finalize_client`` execute with access to one client's
    private input only; ``init_server``/``aggregate`` execute server-side on
    messages alone.
    """

    def init_server(self, cfg: FederationConfig) -> Any:
        raise NotImplementedError

    def run_client(self, client_input, state, round_index: int, rng: np.random.Generator):
        raise NotImplementedError

    def aggregate(self, state, messages: list[RoundMessage], round_index: int):
        raise NotImplementedError

    def finalize_client(self, client_input, state):
        return None

    def done(self, state) -> bool:
        return False


def _client_id(client_input, index: int) -> int:
    return getattr(client_input, "client_id", index)


def run_federation(
    client_inputs: Sequence,
    protocol: FederatedProtocol,
    cfg: FederationConfig,
    parallel: bool = False,
) -> ProtocolResult:
    """Run the round loop: broadcast state, collect one message per client, aggregate.

    Stops early once protocol.done(state) holds.  With parallel=True client
    rounds run on a thread pool; the per-client derived seeds and the sorted
    fold make the result identical to the serial schedule.
    """
    if len(client_inputs) != cfg.n_clients:
        raise ValueError(f"expected {cfg.n_clients} client inputs, got {len(client_inputs)}")
    ids = [_client_id(ci, i) for i, ci in enumerate(client_inputs)]
    if sorted(ids) != list(range(cfg.n_clients)):
        raise ValueError(f"client ids must be exactly 0..{cfg.n_clients - 1}, got {sorted(ids)}")
    by_id = {cid: ci for cid, ci in zip(ids, client_inputs)}

    state = protocol.init_server(cfg)
    log: list[tuple[int, int]] = []
    for round_index in range(cfg.rounds):
        if protocol.done(state):
            break

        def one_client(cid: int) -> RoundMessage:
            rng = np.random.default_rng(derive_seed(cfg.seed, "client", cid, round_index))
            return RoundMessage(cid, protocol.run_client(by_id[cid], state, round_index, rng))

        if parallel:
            with ThreadPoolExecutor(max_workers=cfg.n_clients) as pool:
                messages = list(pool.map(one_client, range(cfg.n_clients)))
        else:
            messages = [one_client(cid) for cid in range(cfg.n_clients)]
        messages.sort(key=lambda m: m.client_id)
        log.extend((round_index, m.client_id) for m in messages)
        state = protocol.aggregate(state, messages, round_index)

    outputs = [protocol.finalize_client(by_id[cid], state) for cid in range(cfg.n_clients)]
    return ProtocolResult(server_state=state, client_outputs=outputs, message_log=tuple(log))
