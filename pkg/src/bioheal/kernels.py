"""Backend selection for the per-firing kernels.

The compiled module is used when it was built; otherwise the pure-Python
mirror is loaded.  ``use_backend`` swaps at runtime (benchmarks, tests).
Callers must look kernels up through this module, not bind them at import.
"""
from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

BACKEND = ""
comb_eval = vote3 = apply_stuck = fire_pair = None


def available_backends():
    return ["python"] + (["cython"] if _ckernels is not None else [])


def use_backend(name):
    global BACKEND, comb_eval, vote3, apply_stuck, fire_pair
    if name == "cython":
        if _ckernels is None:
            raise RuntimeError("compiled kernels are not built")
        mod = _ckernels
    elif name == "python":
        mod = _pykernels
    else:
        raise ValueError(f"unknown backend {name!r}")
    comb_eval = mod.comb_eval
    vote3 = mod.vote3
    apply_stuck = mod.apply_stuck
    fire_pair = mod.fire_pair
    BACKEND = name


use_backend("cython" if _ckernels is not None else "python")
