"""Named experiment settings for the command line.

Each preset lists its settings and, under ``source``, whether a value is the
published experiment's (``"published"``) or a default of this package
(``"default"``) because the original does not state it.
"""

from __future__ import annotations

from .errors import ConfigError
from .tuning import METHODS

_BOTH = (True, False)

PRESETS = {
    "fig1": {
        "command": "simulate",
        "cells": [(m, mis) for m in ("loocv", "safebayes") for mis in _BOTH],
        "n_grid": (100, 1000, 5000),
        "reps": 1000,
        "source": {"cells": "published", "n_grid": "published", "reps": "published"},
    },
    "fig2": {
        "command": "simulate",
        "cells": [("bcv", True), ("bcv-vi", True)],
        "n_grid": (100, 1000, 5000),
        "reps": 1000,
        "source": {"cells": "published", "n_grid": "published", "reps": "published"},
    },
    "fig3": {
        "command": "simulate",
        "cells": [("bcv", False), ("bcv-vi", False), ("train-test", False), ("train-test", True)],
        "n_grid": (100, 1000, 5000),
        "reps": 1000,
        "source": {"cells": "published", "n_grid": "published", "reps": "published"},
    },
    "table2": {
        "command": "simulate",
        "cells": [(m, mis) for m in ("bcv", "bcv-vi", "train-test") for mis in _BOTH],
        "n_grid": (100, 500, 1000, 5000),
        "reps": 1000,
        "source": {"cells": "published", "n_grid": "default", "reps": "published"},
    },
    "table5": {
        "command": "simulate",
        "cells": [(m, mis) for m in METHODS for mis in _BOTH],
        "n_grid": (100, 1000, 5000),
        "reps": 1000,
        "source": {"cells": "published", "grids": "published", "n_grid": "published",
                   "reps": "published"},
    },
    "fig4": {
        "command": "figure4",
        "n_grid": (200, 500, 1000, 2000),
        "reps": 100,
        "schedules": ("0.5n^-3/4", "0.5n^-1/2", "0.5n^-1/4"),
        "source": {"schedules": "published", "beta_star": "published", "reps": "published",
                   "n_grid": "default", "sampler": "default"},
    },
    "fig5": {
        "command": "figure4",
        "linear": True,
        "n_grid": (100, 1000, 10_000, 100_000),
        "reps": 100,
        "schedules": ("0.5n^-3/4", "0.5n^-1/2", "0.5n^-1/4"),
        "source": {"schedules": "published", "n_grid": "default", "reps": "default"},
    },
}


def get_preset(name: str, command: str) -> dict:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; expected one of {sorted(PRESETS)}")
    p = PRESETS[name]
    if p["command"] != command:
        raise ConfigError(f"preset {name!r} belongs to the {p['command']!r} command")
    return {k: v for k, v in p.items() if k not in ("command",)}
