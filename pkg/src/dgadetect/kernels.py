"""Kernel backend selection.

The compiled extension is used when importable; set
``DGADETECT_PURE_PYTHON=1`` to force the numpy implementation.
"""

import os

from . import _pykernels as python_backend

compiled_backend = None
if not os.environ.get("DGADETECT_PURE_PYTHON"):
    try:
        from . import _ckernels as compiled_backend
    except ImportError:
        compiled_backend = None

active = compiled_backend if compiled_backend is not None else python_backend
BACKEND = active.BACKEND

lstm_forward = active.lstm_forward
lstm_backward = active.lstm_backward
split_scores = active.split_scores
forest_votes = active.forest_votes
