from __future__ import annotations

from typing import Sequence

import pytest

from src.event_core import EventStream


def make_stream(
    events: Sequence[tuple[int, int, int, int]], width: int = 8, height: int = 8
) -> EventStream:
    """Stream from (t, x, y, p) tuples."""

    if not events:
        return EventStream.empty(width, height)
    t, x, y, p = zip(*events)
    return EventStream.from_arrays(width, height, t, x, y, p)


@pytest.fixture
def small_stream() -> EventStream:
    return make_stream(
        [
            (0, 1, 1, 1),
            (100, 2, 1, -1),
            (100, 3, 4, 1),
            (250, 1, 1, 1),
            (900, 7, 7, -1),
        ]
    )
