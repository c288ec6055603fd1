"""In-process broadcast bus with two delivery modes.

reliable: lossless, ordered, bounded queue. Overflow is a loud fault on the
subscription, never a silent drop — the recorder depends on that.

latest: a depth-1 mailbox. Each publish replaces whatever is pending, so a
consumer always picks up the newest item and never works through a backlog.

publish() is plain synchronous bookkeeping: it never blocks and never waits
on a consumer, however stalled. recv() blocks only its own consumer. The
WebSocket endpoints in server.py are a transport layer over this same bus.
"""

from __future__ import annotations

import asyncio
from collections import deque
from typing import Any, Callable, Optional

RELIABLE = "reliable"
LATEST = "latest"

DEFAULT_CAPACITY = 256


class NonMonotonicSeq(ValueError):
    pass


class Closed(Exception):
    """Bus shut down; raised by recv after remaining items are drained."""


class Overflow(Exception):
    """Reliable subscription overran its capacity. Carries the drop tally."""

    def __init__(self, dropped: int):
        super().__init__(f"subscription overflowed, {dropped} frame(s) dropped")
        self.dropped = dropped


class Subscription:
    def __init__(self, bus: "Bus", mode: str, capacity: int):
        if mode not in (RELIABLE, LATEST):
            raise ValueError(f"mode must be {RELIABLE!r} or {LATEST!r}")
        if mode == RELIABLE and capacity < 1:
            raise ValueError("capacity must be >= 1")
        self._bus = bus
        self.mode = mode
        self.capacity = capacity
        self.delivered_count = 0
        self.dropped_count = 0
        self._queue: deque = deque()
        self._slot: Optional[Any] = None
        self._has_pending = False
        self._overflowed = False
        self._closed = False
        self._wakeup = asyncio.Event()

    @property
    def pending(self) -> int:
        """Items queued but not yet recv'd (0 or 1 in latest mode)."""
        if self.mode == LATEST:
            return 1 if self._has_pending else 0
        return len(self._queue)

    def _offer(self, item: Any) -> None:
        if self.mode == LATEST:
            if self._has_pending:
                self.dropped_count += 1
            self._slot = item
            self._has_pending = True
        else:
            if self._overflowed:
                self.dropped_count += 1
                return
            if len(self._queue) >= self.capacity:
                self._overflowed = True
                self.dropped_count += 1
            else:
                self._queue.append(item)
        self._wakeup.set()

    def _close(self) -> None:
        self._closed = True
        self._wakeup.set()

    async def recv(self) -> Any:
        """Next item for this subscription.

        latest: the most recent pending item, clearing the slot.
        reliable: the next undelivered item in publish order.
        Blocks while empty; after shutdown drains what is pending, then raises
        Closed. A faulted reliable subscription raises Overflow once drained.
        """
        while True:
            if self.mode == LATEST and self._has_pending:
                item, self._slot, self._has_pending = self._slot, None, False
                self.delivered_count += 1
                return item
            if self.mode == RELIABLE and self._queue:
                self.delivered_count += 1
                return self._queue.popleft()
            if self.mode == RELIABLE and self._overflowed:
                raise Overflow(self.dropped_count)
            if self._closed:
                raise Closed
            self._wakeup.clear()
            await self._wakeup.wait()


class Bus:
    """Single-publisher fan-out. Items must carry a strictly increasing key
    (frames: seq; results: frame_seq)."""

    def __init__(self, key: Callable[[Any], int] = lambda item: item.seq):
        self._key = key
        self._subs: list[Subscription] = []
        self._last_key: Optional[int] = None
        self._last_item: Optional[Any] = None
        self.published_count = 0
        self.closed = False

    def publish(self, item: Any) -> None:
        if self.closed:
            raise Closed
        key = self._key(item)
        if self._last_key is not None and key <= self._last_key:
            raise NonMonotonicSeq(f"key {key} after {self._last_key}")
        self._last_key = key
        self._last_item = item
        self.published_count += 1
        for sub in self._subs:
            sub._offer(item)

    def subscribe(self, mode: str = LATEST, capacity: int = DEFAULT_CAPACITY,
                  snapshot: bool = False) -> Subscription:
        """New subscription, receiving from the next publish on (no history).

        snapshot=True additionally seeds a latest-mode mailbox with the most
        recently published item, so late joiners see state immediately.
        """
        sub = Subscription(self, mode, capacity)
        if snapshot and mode == LATEST and self._last_item is not None:
            sub._offer(self._last_item)
        self._subs.append(sub)
        return sub

    def unsubscribe(self, sub: Subscription) -> None:
        try:
            self._subs.remove(sub)
        except ValueError:
            pass
        sub._close()

    def close(self) -> None:
        """Idempotent. Subscribers drain whatever is queued, then see Closed."""
        self.closed = True
        for sub in self._subs:
            sub._close()
