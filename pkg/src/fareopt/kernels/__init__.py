"""Backend selection for the hot numerical kernels.

``FAREOPT_BACKEND`` picks the implementation at import time:

* ``numba``: jitted kernels (error if numba is not importable),
* ``numpy``: pure-numpy reference kernels,
* ``auto`` or unset: numba when available, numpy otherwise.

Both backends implement the same math; see ``_numpy`` for the conventions.
``benchmarks/bench_kernels.py`` compares their speed.
"""

from __future__ import annotations

import os

_requested = os.environ.get("FAREOPT_BACKEND", "auto").strip().lower() or "auto"

if _requested == "numpy":
    from . import _numpy as _impl
elif _requested == "numba":
    from . import _numba as _impl
elif _requested == "auto":
    try:
        from . import _numba as _impl
    except ImportError:
        from . import _numpy as _impl
else:
    raise RuntimeError(
        f"FAREOPT_BACKEND={_requested!r} is not one of 'numba', 'numpy', 'auto'"
    )

BACKEND = _impl.BACKEND_NAME

dominated_mask = _impl.dominated_mask
choice_prob_matrix = _impl.choice_prob_matrix
shares_for_group = _impl.shares_for_group
shares_frozen = _impl.shares_frozen
info_gain_scores = _impl.info_gain_scores
mh_chain = _impl.mh_chain
build_attributes = _impl.build_attributes
equilibrium_loop = _impl.equilibrium_loop

__all__ = [
    "BACKEND",
    "dominated_mask",
    "choice_prob_matrix",
    "shares_for_group",
    "shares_frozen",
    "info_gain_scores",
    "mh_chain",
    "build_attributes",
    "equilibrium_loop",
]
