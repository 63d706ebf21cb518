"""Size caps for dense evaluation.

Dense matrices, tensors, and Khatri-Rao widths are guarded by caps so a
mistyped experiment cannot silently allocate hundreds of gigabytes.  The
entry-count caps can be overridden at runtime with the environment
variable ``MAXNORM_DENSE_CAP`` (a single integer, applied to matrix,
tensor, and verification caps alike).
"""

from __future__ import annotations

import os

MATRIX_DENSE_CAP = 4096**2
TENSOR_DENSE_CAP = 256**3
DENSE_CHECK_CAP = 2**24

KHATRI_RAO_WIDTH_CAP = 2**20
CP_WIDTH_CAP = 2**16
# middle cores of an exact CP->TT conversion hold width**2 * n entries
CP_TO_TT_CORE_CAP = 2**24


def _env_cap() -> int | None:
    raw = os.environ.get("MAXNORM_DENSE_CAP")
    if raw is None:
        return None
    value = int(raw)
    if value <= 0:
        raise ValueError(f"MAXNORM_DENSE_CAP must be positive, got {raw!r}")
    return value


def matrix_dense_cap() -> int:
    return _env_cap() or MATRIX_DENSE_CAP


def tensor_dense_cap() -> int:
    return _env_cap() or TENSOR_DENSE_CAP


def dense_check_cap() -> int:
    return _env_cap() or DENSE_CHECK_CAP


class DenseCapExceeded(RuntimeError):
    """Requested dense object is larger than the configured cap."""
