"""Graph-search kernel selection.

The compiled kernel is preferred when importable; set LOOPYCUTS_KERNEL=py
to force the pure-Python fallback (or =c to require the extension).
Both expose the same two functions and produce identical results.
"""

from __future__ import annotations

import os

from . import pygraph

_choice = os.environ.get("LOOPYCUTS_KERNEL", "auto").lower()

if _choice == "py":
    impl = pygraph
    KERNEL = "python"
else:
    try:
        from . import _cgraph as impl  # type: ignore[no-redef]

        KERNEL = "cython"
    except ImportError:
        if _choice == "c":
            raise
        impl = pygraph
        KERNEL = "python"

dijkstra = impl.dijkstra
shortest_cycle = impl.shortest_cycle
