"""Hot loops of the simulator.

The compiled extension is used when it imports; setting ``KINWAVE_PURE_PYTHON=1``
forces the numpy implementation.
"""

import os

from . import _step_py

BACKEND = "python"
kinetic_step = _step_py.kinetic_step
linear_step = _step_py.linear_step

if os.environ.get("KINWAVE_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _step

        kinetic_step = _step.kinetic_step
        linear_step = _step.linear_step
        BACKEND = "compiled"
    except ImportError:
        pass
