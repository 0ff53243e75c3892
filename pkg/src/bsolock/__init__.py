"""Beyond-RWA two-level dynamics, phase teleportation and clock frequency locking."""

__version__ = "0.1.0"
