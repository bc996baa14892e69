"""Backend selection: the compiled core when it is built, else the reference core.

Set ``WARPSHARE_BACKEND=python`` to force the reference core.
"""

from __future__ import annotations

import os

from . import _pycore

try:
    from . import _ccore
except ImportError:  # extension not built
    _ccore = None

_forced = os.environ.get("WARPSHARE_BACKEND", "").strip().lower()
BACKEND = "cython" if _ccore is not None and _forced != "python" else "python"


def available_backends() -> list[str]:
    return ["python"] + (["cython"] if _ccore is not None else [])


def simulate(prog, trace=None, backend: str | None = None):
    name = backend or BACKEND
    if name == "cython":
        if _ccore is None:
            raise RuntimeError("compiled core is not built")
        return _ccore.simulate(prog, trace)
    if name == "python":
        return _pycore.simulate(prog, trace)
    raise ValueError(f"unknown backend {name!r}")
