"""Fast Byzantine consensus: a two-step engine, a deterministic simulator,
scripted adversaries, and a trace checker."""

__version__ = "0.1.0"
