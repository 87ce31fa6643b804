"""Backend selection for the batched rollout-cost kernel.

The compiled extension is preferred; the numpy fallback is used when it is not
built or when ``SCPMPPI_PURE_PYTHON`` is set to a non-empty value other than 0.
"""

import os

from . import _pykernels

BACKEND = "python"
_force_python = os.environ.get("SCPMPPI_PURE_PYTHON", "") not in ("", "0")

if not _force_python:
    try:
        from . import _ckernels as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels
else:
    _impl = _pykernels

rollout_costs = _impl.rollout_costs
python_rollout_costs = _pykernels.rollout_costs


def compiled_rollout_costs():
    """The compiled kernel, or ``None`` when the extension is not importable."""
    try:
        from . import _ckernels
    except ImportError:
        return None
    return _ckernels.rollout_costs
