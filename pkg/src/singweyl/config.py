"""Numerical tolerances shared by every module.

All knobs live in one frozen dataclass so a run can embed the exact values it
used. Overrides come from a JSON object whose keys are field names.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path


@dataclass(frozen=True)
class Tolerances:
    # ODE integration (DOP853)
    ode_rtol: float = 1e-11
    ode_atol: float = 1e-13
    # Frobenius start
    series_terms: int = 40
    series_tail: float = 1e-12
    series_cancellation: float = 1e4
    jet_cap: int = 6
    # quadrature grid
    gl_nodes: int = 16
    panel_kappa: float = 2.0
    deep_levels: int = 90
    # root finding
    root_tol: float = 1e-12
    root_maxiter: int = 60
    # Weyl function
    pole_exclusion: float = 1e-4
    contour_points: int = 32
    # L2 ladder classification
    ladder_levels: int = 40
    l2_divergent_s: float = 0.1
    l2_stable_rel: float = 1e-6
    # tail-model based series tests
    moment_margin: float = 0.25
    tail_explicit_terms: int = 20000
    # potential validation
    weighted_l1_ceiling: float = 1e6

    def to_dict(self) -> dict:
        return asdict(self)

    def updated(self, **overrides) -> "Tolerances":
        known = {f.name for f in fields(self)}
        unknown = set(overrides) - known
        if unknown:
            raise KeyError(f"unknown tolerance keys: {sorted(unknown)}")
        return replace(self, **overrides)


DEFAULT = Tolerances()


def load_tolerances(path: str | Path | None) -> Tolerances:
    """Read a JSON override file; ``None`` gives the defaults."""
    if path is None:
        return DEFAULT
    data = json.loads(Path(path).read_text())
    if not isinstance(data, dict):
        raise ValueError("tolerance file must hold a JSON object")
    return DEFAULT.updated(**data)
