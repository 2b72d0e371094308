"""Backend selection for the numerical inner loops.

The compiled Cython extension is used when it imports; otherwise the pure
numpy/scipy fallback. Set ``VOLATIL_BACKEND=python`` to force the fallback.
"""

import os

from . import _fallback

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None


def get_backend(name: str):
    if name == "python":
        return _fallback
    if name == "compiled":
        if _compiled is None:
            raise ImportError("compiled kernels are not built; run `pip install -e .`")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


def available_backends():
    return ["compiled", "python"] if _compiled is not None else ["python"]


if os.environ.get("VOLATIL_BACKEND", "").lower() == "python" or _compiled is None:
    BACKEND = "python"
else:
    BACKEND = "compiled"

_impl = get_backend(BACKEND)
sample_indicators = _impl.sample_indicators
tridiag_sample = _impl.tridiag_sample
garch_variance = _impl.garch_variance
