"""Deterministic virtual-world announcer engine.

Pipeline stages: seeded agent simulation (`world`), importance-scored event
election (`events`), shot-language composition (`psl`, `composition`), camera
direction (`director`), live quality adaptation (`adapt`), and the headless /
streaming front ends (`engine`, `server`, `cli`).
"""

__version__ = "0.1.0"
