"""Backend selection: compiled extension if available, numpy fallback otherwise.

Set EDITSIM_PURE_PYTHON=1 in the environment to force the fallback (used by
the backend-equivalence tests and the benchmark).
"""

from __future__ import annotations

import os

if os.environ.get("EDITSIM_PURE_PYTHON", "") not in ("", "0"):
    from editsim import _pykernels as impl
else:
    try:
        from editsim import _ckernels as impl  # type: ignore[no-redef]
    except ImportError:
        from editsim import _pykernels as impl  # type: ignore[no-redef]

BACKEND_NAME: str = impl.BACKEND_NAME

lev_distance = impl.lev_distance
lev_script_counts = impl.lev_script_counts
weighted_distance = impl.weighted_distance
forward_log = impl.forward_log
backward_log = impl.backward_log
em_pair_counts = impl.em_pair_counts
solve_kernel = impl.solve_kernel


def backend_name() -> str:
    """Name of the numeric backend in use ("compiled" or "python")."""
    return BACKEND_NAME
