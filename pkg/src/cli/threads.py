"""
BLAS thread pinning; must run before numpy is first imported.
"""
import os
from typing import Optional, Sequence

THREAD_VARIABLES = ["OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"]


def requested_threads(argv: Sequence[str]) -> Optional[int]:
    """Value of ``--threads N`` or ``--threads=N`` in argv, else DIALOOP_THREADS."""
    for i, arg in enumerate(argv):
        if arg == "--threads" and i + 1 < len(argv):
            value = argv[i + 1]
        elif arg.startswith("--threads="):
            value = arg.split("=", 1)[1]
        else:
            continue
        try:
            return max(1, int(value))
        except ValueError:
            return None
    env = os.getenv("DIALOOP_THREADS")
    return max(1, int(env)) if env and env.isdigit() else None


def pin_threads(argv: Sequence[str], default: int = 1) -> int:
    threads = requested_threads(argv) or default
    for name in THREAD_VARIABLES:
        os.environ[name] = str(threads)
    return threads
