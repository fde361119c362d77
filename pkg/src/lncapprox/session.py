"""One broadcast session over independent erasure channels.

Each slot the scheme picks a coding vector from the sender's (perfect)
view of receiver state, every receiver independently loses it with its own
erasure probability, and survivors try to decode.  Slot indices count every
transmission, including the ones a given receiver lost.
"""

from __future__ import annotations

import enum
import math
import random
from dataclasses import dataclass
from typing import NamedTuple, Protocol, Sequence

from .gf import EliminationState, GaloisField
from .sfm import ChannelSpec, Sfm


class SessionError(ValueError):
    pass


class SchemeContractError(SessionError):
    """A scheme emitted an all-zero, wrong-length or out-of-field vector."""


class MemoryMode(enum.Enum):
    FULL = "full"
    MEMORYLESS = "memoryless"


class FeedbackView(NamedTuple):
    slot: int  # transmissions already sent
    k: int
    residual: tuple[frozenset, ...]  # wanted and not yet decoded, per receiver
    known: tuple[frozenset, ...]  # side information plus decoded, per receiver

    def incomplete(self) -> list[int]:
        return [n for n, r in enumerate(self.residual) if r]

    def still_wanted(self) -> frozenset:
        return frozenset().union(*self.residual)


class Scheme(Protocol):
    binary_only: bool
    uses_feedback: bool  # False: next_vector is passed None instead of a view

    def next_vector(self, view: FeedbackView, rng: random.Random) -> Sequence[int]: ...


class FullMemoryDecoder:
    def __init__(self, field: GaloisField, k: int, wants: frozenset, side_info: frozenset | None = None):
        self.wants = wants
        if side_info is None:
            side_info = frozenset(range(k)) - wants
        self.state = EliminationState(field, k, side_info)
        # receive(v) -> (innovative, newly decoded packets)
        self.receive = self.state.insert

    @property
    def known(self) -> frozenset:
        return frozenset(self.state.decoded)

    @property
    def residual(self) -> frozenset:
        return self.wants - self.state.decoded


class MemorylessDecoder:
    """Keeps only decoded packets; a coded packet is used now or never."""

    def __init__(self, field: GaloisField, k: int, wants: frozenset, side_info: frozenset | None = None):
        self.wants = wants
        self.known_set = set(range(k)) - wants if side_info is None else set(side_info)
        self.k = k

    @property
    def known(self) -> frozenset:
        return frozenset(self.known_set)

    @property
    def residual(self) -> frozenset:
        return self.wants - self.known_set

    def receive(self, v) -> tuple[bool, set]:
        if len(v) != self.k:
            raise SessionError("vector length mismatch")
        unknown = [k for k, x in enumerate(v) if x and k not in self.known_set]
        if len(unknown) != 1:
            return False, set()
        self.known_set.add(unknown[0])
        return True, {unknown[0]}


class TransmissionRecord(NamedTuple):
    slot: int
    vector: tuple
    erased: tuple[bool, ...]
    decoded_events: frozenset  # (receiver, packet) pairs
    useful: tuple  # per receiver: True/False if processed, None if erased or already complete


@dataclass
class SessionResult:
    u: dict  # (receiver, packet) -> decode slot
    U_n: tuple  # completion slot per receiver; 0 if it wanted nothing, None if unfinished
    U: int
    completed: bool
    slots_used: int


_NO_EVENTS: frozenset = frozenset()


def default_max_slots(k: int, channel: ChannelSpec) -> int:
    worst = max(channel.erasure_probs, default=0.0)
    return math.ceil(50 * k / (1.0 - worst))


class Session:
    def __init__(
        self,
        sfm: Sfm,
        channel: ChannelSpec,
        field: GaloisField,
        scheme: Scheme,
        memory_mode: MemoryMode = MemoryMode.FULL,
        seed: int | str = 0,
        rng: random.Random | None = None,
        keep_log: bool = True,
    ):
        """``rng``, when given, is re-seeded with ``seed`` and owned by the session.

        With ``keep_log=False`` the event log stays empty; results are unchanged.
        """
        if len(channel) != sfm.n_receivers:
            raise SessionError(
                f"channel has {len(channel)} erasure probabilities for {sfm.n_receivers} receivers"
            )
        if getattr(scheme, "binary_only", False) and field.q != 2:
            raise SessionError(f"{type(scheme).__name__} sends XORs and needs GF(2), got GF({field.q})")
        self.sfm = sfm
        self.channel = channel
        self.field = field
        self.scheme = scheme
        self.memory_mode = memory_mode if type(memory_mode) is MemoryMode else MemoryMode(memory_mode)
        if rng is None:
            rng = random.Random(seed)
        else:
            rng.seed(seed)
        self.rng = rng
        dec = FullMemoryDecoder if self.memory_mode is MemoryMode.FULL else MemorylessDecoder
        k = sfm.k_packets
        self.decoders = [dec(field, k, sfm.want_set(n), sfm.side_info(n)) for n in range(sfm.n_receivers)]
        self.keep_log = keep_log
        self.event_log: list[TransmissionRecord] = []
        self.u: dict = {}
        self.completion: list = [None if w else 0 for w in sfm.w]
        self._pending = self.completion.count(None)
        self._view: FeedbackView | None = None
        self._k = sfm.k_packets
        self._q = field.q
        self._probs = channel.erasure_probs
        self._slot = 0
        self._lanes = [(n, p, d.receive) for n, p, d in zip(range(len(self.decoders)), channel.erasure_probs, self.decoders)]
        self._left = list(sfm.w)  # wanted packets still undecoded; decoders only report wanted ones
        self._uses_feedback = getattr(scheme, "uses_feedback", True)

    @property
    def slot_counter(self) -> int:
        return self._slot

    def done(self) -> bool:
        return self._pending == 0

    def feedback_view(self) -> FeedbackView:
        # Receiver knowledge only changes on decode events; reuse the sets otherwise.
        view = self._view
        if view is None:
            view = self._view = FeedbackView(
                slot=self._slot,
                k=self._k,
                residual=tuple(d.residual for d in self.decoders),
                known=tuple(d.known for d in self.decoders),
            )
        elif view.slot != self._slot:
            view = self._view = FeedbackView(self._slot, view.k, view.residual, view.known)
        return view

    def _validate(self, v) -> tuple:
        if type(v) is not tuple:
            v = tuple(v)
        if len(v) != self._k:
            raise SchemeContractError(f"scheme emitted length {len(v)}, expected {self._k}")
        if min(v) < 0 or max(v) >= self._q:
            raise SchemeContractError(f"coefficient outside GF({self._q})")
        if not any(v):
            raise SchemeContractError("scheme emitted the all-zero vector")
        return v

    def _advance(self):
        """Send one slot; return (vector, erased, events, useful) as raw lists."""
        if not self._pending:
            raise SessionError("all receivers already complete")
        v = self.scheme.next_vector(self.feedback_view() if self._uses_feedback else None, self.rng)
        if type(v) is not tuple or len(v) != self._k or min(v) < 0 or max(v) >= self._q or not any(v):
            v = self._validate(v)
        slot = self._slot = self._slot + 1
        rnd = self.rng.random
        completion = self.completion
        left = self._left
        events = _NO_EVENTS
        erased = []
        useful = []
        # one erasure draw per receiver, in receiver order, finished or not
        for n, p, receive in self._lanes:
            lost = p > 0.0 and rnd() < p
            erased.append(lost)
            if lost or completion[n] is not None:
                useful.append(None)
                continue
            innovative, new = receive(v)
            useful.append(innovative)
            if new:
                if events is _NO_EVENTS:
                    events = set()
                for k in new:
                    self.u[(n, k)] = slot
                    events.add((n, k))
                self._view = None
                left[n] -= len(new)
                if not left[n]:
                    completion[n] = slot
                    self._pending -= 1
        return v, erased, events, useful

    def step(self) -> TransmissionRecord:
        v, erased, events, useful = self._advance()
        rec = TransmissionRecord(self._slot, v, tuple(erased), frozenset(events), tuple(useful))
        if self.keep_log:
            self.event_log.append(rec)
        return rec

    def run(self, max_slots: int | None = None) -> SessionResult:
        if max_slots is None:
            max_slots = default_max_slots(self.sfm.k_packets, self.channel)
        if max_slots < 1:
            raise SessionError("max_slots must be >= 1")
        step = self.step if self.keep_log else self._advance
        while self._pending and self._slot < max_slots:
            step()
        return self.result()

    def result(self) -> SessionResult:
        finished = [c for c in self.completion if c is not None]
        return SessionResult(
            u=dict(self.u),
            U_n=tuple(self.completion),
            U=max(finished, default=0),
            completed=self.done(),
            slots_used=self.slot_counter,
        )


def new_session(sfm, channel, field, scheme, memory_mode=MemoryMode.FULL, seed=0) -> Session:
    return Session(sfm, channel, field, scheme, memory_mode, seed)
