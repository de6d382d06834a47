"""Hot loop of the search baselines: batched exact evaluation of fixture subsets.

The compiled extension ``_kernels`` is used when it was built; otherwise the
numpy implementation in ``_fallback`` takes over.  Set the environment
variable ``FIXTURE_SDP_KERNEL=python`` to force the fallback.
"""

import os

from . import _fallback

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

_BACKENDS = {"python": _fallback}
if _compiled is not None:
    _BACKENDS["cython"] = _compiled


def available():
    return sorted(_BACKENDS)


def get_backend(name=None):
    if name is None:
        name = os.environ.get("FIXTURE_SDP_KERNEL") or ("cython" if _compiled else "python")
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} not available (have {available()})") from None


def evaluate_subsets(G, c, Bt, ut, wt, subsets):
    return get_backend().evaluate_subsets(G, c, Bt, ut, wt, subsets)


BACKEND = get_backend().NAME
