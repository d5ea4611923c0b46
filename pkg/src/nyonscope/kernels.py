"""Backend selection for the cipher kernels.

The compiled extension is used when importable; ``NYONSCOPE_PURE_PYTHON=1``
forces the fallback (the test-suite runs both).
"""

import os

from nyonscope import _pykernels

if os.environ.get("NYONSCOPE_PURE_PYTHON") == "1":
    _impl = _pykernels
else:
    try:
        from nyonscope import _kernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        _impl = _pykernels

BACKEND = "compiled" if _impl is not _pykernels else "python"

xts_decrypt = _impl.xts_decrypt
af_merge = _impl.af_merge
aes_encrypt_block = _impl.aes_encrypt_block
aes_decrypt_block = _impl.aes_decrypt_block


def backends():
    """All importable kernel modules keyed by backend name."""
    out = {"python": _pykernels}
    try:
        from nyonscope import _kernels
    except ImportError:
        pass
    else:
        out["compiled"] = _kernels
    return out
