"""Event bus for progress reporting.

Long experiments emit progress events; the CLI subscribes to drive its
progress bar without the numerical code knowing about the terminal.

Usage:
    from rbcc.events import event_bus, SWEEP_POINT_DONE

    unsub = event_bus.subscribe(SWEEP_POINT_DONE, lambda **d: print(d["index"]))
    event_bus.emit(SWEEP_POINT_DONE, index=1, total=9, experiment="sweep-pump")
    unsub()
"""

from collections import defaultdict
from collections.abc import Callable
from typing import Any

import structlog

logger = structlog.get_logger(__name__)

# ---------------------------------------------------------------------------
# Event type constants
# ---------------------------------------------------------------------------

SWEEP_POINT_DONE = "sweep.point_done"
BER_POINT_DONE = "ber.point_done"
EXPERIMENT_STARTED = "experiment.started"
RUN_COMPLETE = "run.complete"

Handler = Callable[..., None]


class EventBus:
    """Simple publish/subscribe event bus.

    Handlers are called in registration order. A failing handler is logged
    and never interrupts the emitting computation.
    """

    def __init__(self) -> None:
        self._handlers: dict[str, list[Handler]] = defaultdict(list)

    def subscribe(self, event_type: str, handler: Handler) -> Callable[[], None]:
        """Subscribe a handler to an event type.

        Returns a callable that unsubscribes the handler when invoked.
        """
        self._handlers[event_type].append(handler)

        def unsubscribe() -> None:
            try:
                self._handlers[event_type].remove(handler)
            except ValueError:
                pass

        return unsubscribe

    def emit(self, event_type: str, **data: Any) -> None:
        """Emit an event synchronously."""
        for handler in list(self._handlers.get(event_type, [])):
            try:
                handler(**data)
            except Exception as e:
                logger.warning(
                    "event_handler_error",
                    event_type=event_type,
                    error=str(e),
                )

    def has_subscribers(self, event_type: str) -> bool:
        """Check if an event type has any subscribers."""
        return bool(self._handlers.get(event_type))

    def clear(self, event_type: str | None = None) -> None:
        """Clear handlers for an event type, or all handlers if None."""
        if event_type is None:
            self._handlers.clear()
        else:
            self._handlers.pop(event_type, None)


event_bus = EventBus()
