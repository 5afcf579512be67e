"""Simulation kernel selection.

The compiled core (flexcap._sim_cy) is preferred when built; the pure
Python kernels are the fallback. Both implement the same algorithms with
identical floating-point operation order, so results are bit-identical.

Set FLEXCAP_BACKEND=py to force the pure kernels, FLEXCAP_BACKEND=cy to
require the compiled ones (import fails if they are missing).
"""

import os

_requested = os.environ.get("FLEXCAP_BACKEND", "").strip().lower()

if _requested in ("py", "python", "pure"):
    from . import _sim_py as _impl

    BACKEND = "python"
elif _requested in ("", "cy", "cython", "compiled"):
    try:
        from . import _sim_cy as _impl

        BACKEND = "compiled"
    except ImportError:
        if _requested:
            raise ImportError(
                "FLEXCAP_BACKEND requested the compiled core but "
                "flexcap._sim_cy is not built"
            ) from None
        from . import _sim_py as _impl

        BACKEND = "python"
else:
    raise ImportError(
        f"FLEXCAP_BACKEND must be 'py' or 'cy', got {_requested!r}"
    )

op_simulate = _impl.op_simulate
lpf_simulate = _impl.lpf_simulate
pop_simulate = _impl.pop_simulate
