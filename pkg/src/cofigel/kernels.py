"""Kernel backend selection.

The rating-matrix kernels exist twice: a Cython extension (cofigel._core)
for speed and a NumPy module (cofigel._core_py) that always works. The
compiled one is preferred when importable; set COFIGEL_PURE_PYTHON=1 to
force the fallback (used by the equivalence tests and the benchmark).
"""

import os

from . import _core_py

if os.environ.get("COFIGEL_PURE_PYTHON", "") not in ("", "0"):
    _impl = _core_py
else:
    try:
        from . import _core as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _core_py

IMPLEMENTATION = _impl.__name__.rsplit(".", 1)[-1].lstrip("_")

RANK_DECIMALS = _core_py.RANK_DECIMALS

base_derive = _impl.base_derive
label_derive = _impl.label_derive
gain_vector = _impl.gain_vector
gain_best = _impl.gain_best
