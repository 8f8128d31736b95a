"""Select the compiled or pure-numpy kernel backend at import time.

The environment variable PLMIRELAX_BACKEND forces a choice: "compiled"
errors out if the extension is missing, "pure" skips it. By default the
compiled extension is used when present and the numpy fallback otherwise.
"""

from __future__ import annotations

import os

from . import _purekernels
from .errors import ConfigError

_requested = os.environ.get("PLMIRELAX_BACKEND", "").strip().lower()
if _requested not in ("", "pure", "compiled"):
    raise ConfigError(
        f"PLMIRELAX_BACKEND must be 'pure' or 'compiled', got {_requested!r}"
    )

if _requested == "pure":
    _impl = _purekernels
    BACKEND = "pure"
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        if _requested == "compiled":
            raise ConfigError(
                "PLMIRELAX_BACKEND=compiled but the extension is not built"
            ) from None
        _impl = _purekernels
        BACKEND = "pure"

barrier_terms = _impl.barrier_terms
group_logdet = _impl.group_logdet
group_terms = _impl.group_terms
jacobi_eigh = _impl.jacobi_eigh
max_eigvals = _impl.max_eigvals
