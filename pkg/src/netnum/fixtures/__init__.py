"""Shipped topology fixtures.

``geant.txt`` (23 nodes, 74 directed links) and ``rf1221.txt`` (104 nodes,
302 directed links) are synthetic stand-ins for the identically sized
research topologies: random connected graphs with both directions per edge
and seeded capacities uniform in [10, 100]. Each file records its generator
call in its header comment.
"""

from importlib import resources

NAMES = ("geant", "rf1221")


def path(name: str) -> str:
    """Filesystem path of a shipped fixture ('geant' or 'rf1221')."""
    if name not in NAMES:
        raise ValueError(f"unknown fixture {name!r}; available: {NAMES}")
    return str(resources.files(__package__).joinpath(f"{name}.txt"))


def text(name: str) -> str:
    """Contents of a shipped fixture file."""
    with open(path(name), encoding="utf-8") as fh:
        return fh.read()
