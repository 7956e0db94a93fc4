"""Backend selection for the hot inner loops.

The compiled extension is used when it was built; otherwise the pure-numpy
fallback takes over.  Setting the environment variable ``MFLD_PURE_PYTHON``
forces the fallback (useful for debugging and for the backend benchmark).
Both backends implement the same contract and are exercised against each
other in the test suite.
"""

import os

from . import fallback

compiled = None
if not os.environ.get("MFLD_PURE_PYTHON"):
    try:
        from . import _core as compiled  # type: ignore[no-redef]
    except ImportError:
        compiled = None

impl = compiled if compiled is not None else fallback
BACKEND = "compiled" if compiled is not None else "python"

halve_walk = impl.halve_walk
halve_walk_batch = impl.halve_walk_batch
