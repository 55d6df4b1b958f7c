"""Built-in run configurations.

``fig4``: a perfect reflector buried under 120 um of quartz (no front-surface
reflection). ``fig5``: equal reflections from both faces of a 145 um quartz
plate. Both use constant quartz indices with the retardance held at its
centre-frequency value, a 1.5 mm BBO crystal pumped at 400 nm, a balanced
beam splitter and the optical axis along the horizontal.
"""

from __future__ import annotations

import copy

from psqoct.errors import ConfigError
from psqoct.io import RunConfig

_BBO_SOURCE = {
    "type": "spdc",
    "pump_wavelength_nm": 400.0,
    "crystal_length_mm": 1.5,
    "crystal": "bbo",
    "grid_points": 4096,
    "lobes": 3,
}

_HALF = 0.5**0.5

PRESETS: dict[str, dict] = {
    "fig4": {
        "preset": "fig4",
        "source": _BBO_SOURCE,
        "sample": {
            "interfaces": [{"r": [0.0, 0.0]}, {"r": [1.0, 0.0]}],
            "layers": [{"d_um": 120.0, "alpha_deg": 0.0, "material": "quartz", "frozen_retardance": True}],
        },
        "grid": {"start_um": 100.0, "stop_um": 300.0, "points": 1000},
        "beam_splitter": {"reflectance": 0.5},
        "null": {"ctau_um": 185.0604},
        "seed": 0,
    },
    "fig5": {
        "preset": "fig5",
        "source": _BBO_SOURCE,
        "sample": {
            "interfaces": [{"r": [_HALF, 0.0]}, {"r": [_HALF, 0.0]}],
            "layers": [{"d_um": 145.0, "alpha_deg": 0.0, "material": "quartz", "frozen_retardance": True}],
        },
        "grid": {"start_um": -60.0, "stop_um": 290.0, "points": 1000},
        "beam_splitter": {"reflectance": 0.5},
        "null": {"ctau_um": 223.61465},
        "seed": 0,
    },
}

DESCRIPTIONS = {
    "fig4": "reflector under 120 um quartz, r0 = 0, |r1|^2 = 1",
    "fig5": "145 um quartz plate, |r0|^2 = |r1|^2",
}


def preset_dict(name: str) -> dict:
    try:
        return copy.deepcopy(PRESETS[name])
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; available: {sorted(PRESETS)}") from None


def preset(name: str) -> RunConfig:
    return RunConfig.from_dict(preset_dict(name))
