"""Keep glibc from returning large temporaries to the OS after every update.

Each training update allocates and frees batch-sized arrays; with the default
mmap threshold every one of them is a fresh mapping and page-faults on first
touch, which costs more than the arithmetic.
"""

import ctypes
import ctypes.util

_M_TRIM_THRESHOLD = -1
_M_TOP_PAD = -2
_M_MMAP_THRESHOLD = -3
_done = False


def tune_allocator() -> bool:
    global _done
    if _done:
        return True
    try:
        libc = ctypes.CDLL(ctypes.util.find_library("c") or "libc.so.6")
        mallopt = libc.mallopt
    except (OSError, AttributeError):
        return False
    ok = (mallopt(_M_MMAP_THRESHOLD, 256 << 20)
          and mallopt(_M_TRIM_THRESHOLD, 512 << 20)
          and mallopt(_M_TOP_PAD, 64 << 20))
    _done = bool(ok)
    return _done
