"""Allocator tuning for long runs on large lattices.

Every stencil and matrix product allocates a field-sized temporary.  glibc
hands blocks above its mmap threshold back to the kernel on free, so each
step pays for faulting the same pages in again.  Raising the threshold and
disabling heap trimming lets the temporaries be reused.
"""

import ctypes
import ctypes.util

_M_TRIM_THRESHOLD = -1
_M_MMAP_THRESHOLD = -3


def keep_freed_memory(threshold: int = 1 << 30) -> bool:
    """Ask glibc to keep freed blocks below ``threshold`` bytes; False if unavailable."""
    name = ctypes.util.find_library("c")
    if not name:
        return False
    try:
        libc = ctypes.CDLL(name)
        mallopt = libc.mallopt
    except (OSError, AttributeError):
        return False
    ok = mallopt(_M_MMAP_THRESHOLD, int(threshold)) == 1
    return ok and mallopt(_M_TRIM_THRESHOLD, 2**31 - 1) == 1
