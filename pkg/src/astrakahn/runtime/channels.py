"""Bounded FIFO channels and the producer-side links feeding them."""
from __future__ import annotations

from collections import deque

from ..errors import RuntimeFault
from ..messages import END, is_end


class Channel:
    """A consumer's input queue.

    Several producers may feed one channel; the end mark is enqueued once,
    after every producer has sent its own.
    """

    def __init__(self, name, capacity, depressurised=False):
        self.name = name
        self.nominal = capacity  # None means unbounded
        self.depressurised = depressurised
        self.capacity = None if depressurised else capacity
        self.queue = deque()
        self.producers = 0
        self.ends = 0
        self.closed = False
        self.injected = False
        self.demand = 0
        self.blocks = 0
        self.peak = 0
        self.back_pressured = False
        self.transfer = []  # channels receiving this one's back pressure
        self.consumer = None
        self.producer_nodes = []

    def __repr__(self):
        return f"Channel({self.name}, {len(self.queue)}/{self.capacity})"

    def full(self) -> bool:
        if self.back_pressured:
            return True
        return self.capacity is not None and len(self.queue) >= self.capacity

    def pressured(self) -> bool:
        """Would block if it were pressurised."""
        return self.nominal is not None and len(self.queue) >= self.nominal

    def offer(self, msg) -> bool:
        """Enqueue msg; False when the channel is blocked."""
        if self.injected:
            if is_end(msg):
                return True
            raise RuntimeFault(f"message on {self.name} after its stream was closed at quiescence")
        if self.closed:
            raise RuntimeFault(f"offer on {self.name} after the end of its stream")
        if self.full():
            self.blocks += 1
            return False
        if is_end(msg):
            self.ends += 1
            if self.ends < self.producers:
                return True
            self.closed = True
        self.queue.append(msg)
        self.peak = max(self.peak, len(self.queue))
        return True

    def head(self):
        return self.queue[0] if self.queue else None

    def take(self):
        if not self.queue:
            self.demand += 1
            return None
        return self.queue.popleft()

    def replace_head(self, msg):
        self.queue[0] = msg

    def push_front(self, msg):
        self.queue.appendleft(msg)

    def inject_end(self):
        """Close the stream on behalf of every producer that has not ended it."""
        self.ends = self.producers
        self.closed = True
        self.injected = True
        self.queue.append(END)

    def finished(self) -> bool:
        return self.closed and not self.queue


class Link:
    """One producer port's connection to one channel, with its outbox."""

    def __init__(self, channel: Channel, node=None):
        self.channel = channel
        self.pending = deque()
        self.ended = False
        channel.producers += 1
        if node is not None:
            channel.producer_nodes.append(node)

    def push(self, msg):
        if self.ended:
            raise RuntimeFault(f"send on {self.channel.name} after the end of the stream")
        if is_end(msg):
            self.ended = True
        self.pending.append(msg)

    def flush(self) -> int:
        moved = 0
        while self.pending and self.channel.offer(self.pending[0]):
            self.pending.popleft()
            moved += 1
        return moved

    def idle(self) -> bool:
        return not self.pending

    def clear(self) -> bool:
        return not self.pending and not self.channel.full()

