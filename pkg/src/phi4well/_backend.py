"""Select the compiled sampling core when available, NumPy otherwise.

Set PHI4_FORCE_NUMPY=1 to skip the extension (used by the benchmark and by
tests that exercise the fallback deliberately).  Both backends expose the
same functions; per-backend determinism is guaranteed, cross-backend bit
identity is not (the NumPy core draws in lockstep ensembles).
"""
from __future__ import annotations

import os

from . import _core_py

_impl = _core_py
_name = "numpy"

if not os.environ.get("PHI4_FORCE_NUMPY"):
    try:
        from . import _core as _compiled

        _impl = _compiled
        _name = "cython"
    except ImportError:
        pass


def backend_name() -> str:
    return _name


chain_paths = _impl.chain_paths
chain_hit_zero = _impl.chain_hit_zero
chain_first_transition = _impl.chain_first_transition
em_paths = _impl.em_paths
em_occupation = _impl.em_occupation
em_hit_zero = _impl.em_hit_zero
chain_path_reference = _core_py.chain_path_reference
