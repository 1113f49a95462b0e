"""Kernel backend selection.

The compiled extension is preferred when it imported cleanly; the
pure-Python fallback is always available.  Set ``QUBOFOLIO_KERNELS`` to
``python`` or ``native`` to force a backend (forcing ``native`` raises
if the extension is missing).  Both backends draw from the same RNG and
evaluate in the same order, so results are bit-identical either way;
see ``benchmarks/bench_kernels.py`` for the speed comparison.
"""

from __future__ import annotations

import os

from . import pyfallback

_forced = os.environ.get("QUBOFOLIO_KERNELS", "").strip().lower()

native = None
if _forced != "python":
    try:
        from . import _native as native  # type: ignore[no-redef]
    except ImportError:
        native = None
        if _forced == "native":
            raise ImportError(
                "QUBOFOLIO_KERNELS=native but the compiled extension is not "
                "built; run `pip install -e . --no-build-isolation` or "
                "`python setup.py build_ext --inplace`"
            )

active = native if native is not None else pyfallback
BACKEND = active.BACKEND_NAME

sa_custom_cqns = active.sa_custom_cqns
sa_custom_qubo = active.sa_custom_qubo
sa_geometric = active.sa_geometric
tabu_run = active.tabu_run
cqns_direct = active.cqns_direct
qubo_direct = active.qubo_direct


def backends() -> dict:
    """Importable backends by name (at least the fallback)."""
    found = {"python": pyfallback}
    if native is not None:
        found["native"] = native
    return found
