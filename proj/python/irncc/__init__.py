"""NCC filter learning, fixed-point MAD-NCC scoring and IR small-target benchmarking.

Patches and frames are 2-D numpy arrays; everything else mirrors the C++ library.
"""

from ._irncc import *  # noqa: F401,F403
from ._irncc import __doc__  # noqa: F401
