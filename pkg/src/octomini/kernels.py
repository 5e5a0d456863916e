"""Backend selection for the hot kernels.

The compiled extension (octomini._kernels._core) is preferred; the numpy
reference implementation is the fallback.  OCTOMINI_BACKEND=python or
=compiled forces a choice (the latter raises if the extension is missing).
"""

import os
import warnings

from ._kernels import reference as _reference

_choice = os.environ.get("OCTOMINI_BACKEND", "auto").lower()

_compiled = None
if _choice in ("auto", "compiled"):
    try:
        from ._kernels import _core as _compiled  # type: ignore[attr-defined]

        if not hasattr(_compiled, "reconstruct"):  # placeholder build
            _compiled = None
    except ImportError:
        _compiled = None
    if _compiled is None and _choice == "compiled":
        raise ImportError("OCTOMINI_BACKEND=compiled but the extension is not built")
    if _compiled is None:
        warnings.warn(
            "octomini compiled kernels unavailable; using the slow python backend",
            RuntimeWarning,
            stacklevel=2,
        )

backend = _compiled if _compiled is not None else _reference
BACKEND_NAME = backend.BACKEND_NAME

primitives = backend.primitives
reconstruct = backend.reconstruct
fluxes = backend.fluxes
build_interactions = backend.build_interactions
m2l_apply = backend.m2l_apply
direct_traversal_eval = backend.direct_traversal_eval
direct_sum_pairs = backend.direct_sum_pairs


def get_backend(name):
    """Explicit backend module by name ('python' or 'compiled')."""
    if name == "python":
        return _reference
    if name == "compiled":
        if _compiled is None:
            raise ImportError("compiled kernels are not built")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")
