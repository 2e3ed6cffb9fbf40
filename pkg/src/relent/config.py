"""Default tolerances and run-time knobs."""
from __future__ import annotations

import os
from dataclasses import dataclass, fields, replace


@dataclass(frozen=True)
class Tolerances:
    ambiguity_distance: float = 1e-9
    ambiguity_separation: float = 1e-3
    newton_step: float = 1e-14
    newton_max_iter: int = 60
    unit_vector: float = 1e-10
    quadrature_rel: float = 1e-3
    divergence_rel: float = 1e-10
    band_cells: int = 4
    padding_rel: float = 1e-8

    def updated(self, overrides: dict | None) -> "Tolerances":
        if not overrides:
            return self
        known = {f.name for f in fields(self)}
        return replace(self, **{k: v for k, v in overrides.items() if k in known})


DEFAULT = Tolerances()


def thread_cap() -> int:
    """Worker cap from the RELENT_THREADS environment variable (default 1)."""
    try:
        return max(1, int(os.environ.get("RELENT_THREADS", "1")))
    except ValueError:
        return 1
