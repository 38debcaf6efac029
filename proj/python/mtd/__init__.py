"""Moving-target-defense server game with heuristic and learned policies."""

from ._mtd import *  # noqa: F401,F403
from ._mtd import __version__  # noqa: F401
