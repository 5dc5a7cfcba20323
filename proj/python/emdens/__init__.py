"""Deep sparse autoencoder embedding and density-outlier cluster-number
estimation for multiplex images."""

try:
    from ._emdens import *  # noqa: F401,F403
    from ._emdens import __doc__ as _core_doc  # noqa: F401
except ImportError:  # extension built out-of-package (plain CMake build tree)
    from _emdens import *  # noqa: F401,F403
