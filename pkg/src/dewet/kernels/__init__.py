"""Kernel backend selection.

The compiled extension is used when it imports; set ``DEWET_PURE_PYTHON=1``
to force the numpy fallback.
"""

import logging
import os

from . import _pykernels

log = logging.getLogger(__name__)

_compiled = None
if os.environ.get("DEWET_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _compiled
    except ImportError as exc:  # extension not built
        log.debug("compiled kernels unavailable: %s", exc)
        _compiled = None

backend = _compiled if _compiled is not None else _pykernels
BACKEND_NAME = "cython" if _compiled is not None else "numpy"

p1_gradients = backend.p1_gradients
assemble_elasticity = backend.assemble_elasticity
csr_matvec = backend.csr_matvec
pcg = backend.pcg
element_forces = backend.element_forces


def backends():
    """All importable backends by name (used by tests and the benchmark)."""
    out = {"numpy": _pykernels}
    if _compiled is not None:
        out["cython"] = _compiled
    else:
        try:
            from . import _ckernels

            out["cython"] = _ckernels
        except ImportError:
            pass
    return out
