"""Hot inner loops: compiled extension with a pure-NumPy fallback.

Two kernels dominate the package runtime: the damped phase-mixture sums
behind the coverage transform, and the per-slot queue/interference update of
the spatial simulator.  Both exist twice with identical call signatures and
semantics: `_ckern` (Cython) and `pykern` (NumPy).  The compiled module is
preferred when importable; set SIRMETA_BACKEND=python to force the fallback
(used by the benchmark and the cross-backend tests).
"""

import os

from . import pykern

_forced = os.environ.get("SIRMETA_BACKEND", "").strip().lower()

if _forced in ("py", "python"):
    _impl = pykern
    BACKEND = "python"
elif _forced in ("c", "cy", "cython"):
    from . import _ckern as _impl  # noqa: F401  (raises if not built)

    BACKEND = "cython"
else:
    try:
        from . import _ckern as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = pykern
        BACKEND = "python"

transform_sums = _impl.transform_sums
slot_chunk = _impl.slot_chunk
