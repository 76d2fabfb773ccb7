"""Hot numeric kernels with a compiled core and a pure-Python fallback.

Three loops dominate a simulated experiment: dead-reckoning accumulation,
the filter's per-event predict/update sequence, and the per-fix
Gauss-Newton position solve.  Both backends implement them with identical
arithmetic, operation for operation, so results agree to rounding noise.

Set MECALOC_PURE_PYTHON=1 to force the fallback even when the compiled
extension is available (used by the parity tests and the benchmark).
"""

import os

from . import _reference

if os.environ.get("MECALOC_PURE_PYTHON", "") not in ("", "0"):
    _impl = _reference
    BACKEND = "python"
else:
    try:
        from . import _speedups as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = _reference
        BACKEND = "python"

accumulate_poses = _impl.accumulate_poses
run_filter_events = _impl.run_filter_events
gauss_newton_solve = _impl.gauss_newton_solve

# run_filter_events status codes
STATUS_OK = 0
STATUS_OUT_OF_ORDER = 1
STATUS_NOT_POSITIVE_DEFINITE = 2

# event kinds in the packed stream
KIND_TWIST = 0
KIND_FIX = 1
