"""rbcc - transient simulator for resonant beam charging and communication.

Integrates the four-level laser rate equations in equivalent-circuit form,
models the pump, photovoltaic and photodiode transducers, and runs the
relaxation, pump-sweep, frequency-response, power-splitting and BER
experiments.
"""

from rbcc.version import __version__

__all__ = [
    "__version__",
    "analysis",
    "cli",
    "comms",
    "config",
    "errors",
    "events",
    "laser",
    "ode",
    "output",
    "params",
    "transducers",
]
