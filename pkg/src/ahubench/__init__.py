"""Air-handling-unit control benchmark: zone physics, baseline controllers and PPO."""

__version__ = "0.1.0"
