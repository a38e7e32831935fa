"""Sequential recurrence kernels for the language model.

The gated-cell recurrence is the one part of the model that cannot be
expressed as a single BLAS call, and it sits inside every likelihood score
the pipeline computes, so it gets a compiled implementation. Selection
happens once at import: the Cython extension if it built, otherwise the
numpy fallback. Set ``KINJECT_PURE_PYTHON=1`` to force the fallback.

Both backends implement the identical update, so results agree to float
rounding; ``tests/test_kernels.py`` checks the parity.
"""

import os

from . import gru_numpy

BACKEND = "numpy"
gru_forward = gru_numpy.gru_forward
gru_backward = gru_numpy.gru_backward

if not os.environ.get("KINJECT_PURE_PYTHON"):
    try:
        from . import gru_cython

        gru_forward = gru_cython.gru_forward
        gru_backward = gru_cython.gru_backward
        BACKEND = "cython"
    except ImportError:
        pass

__all__ = ["BACKEND", "gru_forward", "gru_backward", "gru_numpy"]
