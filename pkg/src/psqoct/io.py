"""Configuration and result files.

Lengths in files are micrometres and angles degrees; everything is converted
to SI on load. Interferograms are a CSV with header ``ctau_um,R_H,R_V,R_T``
plus a JSON sidecar holding the constants and conventions needed to read it.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from psqoct.errors import ConfigError
from psqoct.interferometer import BeamSplitter, Interferogram
from psqoct.materials import ConstantIndex, material
from psqoct.sample import Layer, LayeredSample
from psqoct.spdc import SampledSpectrum, TwinPhotonSource, gaussian_spectrum, spectrum, with_solved_cut_angle

CSV_HEADER = ("ctau_um", "R_H", "R_V", "R_T")
SIDECAR_FORMAT = "psqoct-interferogram/1"
UM = 1e-6


# --- generic helpers ------------------------------------------------------------


def read_json(path: str | Path) -> Any:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None


def write_json(path: str | Path, data: Any) -> None:
    text = json.dumps(data, indent=2, sort_keys=True, allow_nan=False)
    Path(path).write_text(text + "\n", encoding="utf-8")


def _number(data: Mapping, key: str, default: Any = None, where: str = "") -> float:
    if key not in data:
        if default is None:
            raise ConfigError(f"{where or 'config'}: missing '{key}'")
        return float(default)
    value = data[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where or 'config'}: '{key}' must be a number, got {value!r}")
    if not np.isfinite(value):
        raise ConfigError(f"{where or 'config'}: '{key}' must be finite")
    return float(value)


def _check_keys(data: Mapping, allowed: set[str], where: str) -> None:
    if not isinstance(data, Mapping):
        raise ConfigError(f"{where} must be a JSON object")
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")


# --- samples --------------------------------------------------------------------

_LAYER_KEYS = {"d_um", "alpha_deg", "material", "n_o", "n_e", "gvd_s2_per_m", "frozen_retardance"}


def sample_from_dict(data: Mapping, omega0: float) -> LayeredSample:
    """Build a sample from ``{"interfaces": [{"r": [re, im]}], "layers": [...]}``.

    Layers take ``d_um``, ``alpha_deg`` and either ``material`` (a name from
    the materials table) or explicit constant ``n_o``/``n_e``. Optional
    ``gvd_s2_per_m`` injects extra group-velocity dispersion and
    ``frozen_retardance`` evaluates the retardance at the centre frequency.
    """
    _check_keys(data, {"interfaces", "layers"}, "sample")
    interfaces = data.get("interfaces", [])
    layers = data.get("layers", [])
    if not isinstance(interfaces, list) or not isinstance(layers, list):
        raise ConfigError("sample: 'interfaces' and 'layers' must be lists")
    refl = []
    for k, item in enumerate(interfaces):
        _check_keys(item, {"r"}, f"sample.interfaces[{k}]")
        r = item.get("r")
        if isinstance(r, (int, float)) and not isinstance(r, bool):
            r = [r, 0.0]
        if not (isinstance(r, list) and len(r) == 2 and all(isinstance(v, (int, float)) for v in r)):
            raise ConfigError(f"sample.interfaces[{k}]: 'r' must be [re, im]")
        refl.append(complex(r[0], r[1]))
    built = []
    for k, item in enumerate(layers):
        where = f"sample.layers[{k}]"
        _check_keys(item, _LAYER_KEYS, where)
        if "material" in item:
            if "n_o" in item or "n_e" in item:
                raise ConfigError(f"{where}: give either 'material' or 'n_o'/'n_e', not both")
            n_o, n_e = material(str(item["material"]))
        else:
            n_o = ConstantIndex(_number(item, "n_o", where=where))
            n_e = ConstantIndex(_number(item, "n_e", where=where))
        frozen = item.get("frozen_retardance", False)
        if not isinstance(frozen, bool):
            raise ConfigError(f"{where}: 'frozen_retardance' must be true or false")
        gvd = _number(item, "gvd_s2_per_m", 0.0, where)
        built.append(
            Layer(
                thickness=_number(item, "d_um", where=where) * UM,
                axis_angle=np.deg2rad(_number(item, "alpha_deg", 0.0, where)),
                n_o=n_o,
                n_e=n_e,
                extra_gvd=gvd,
                reference_omega=omega0 if (frozen or gvd) else None,
                freeze_retardance=frozen,
            )
        )
    return LayeredSample.build(refl, built)


# --- sources --------------------------------------------------------------------

_SOURCE_KEYS = {
    "type", "pump_wavelength_nm", "crystal_length_mm", "crystal", "grid_points", "lobes",
    "span_rad_per_s", "center_wavelength_nm", "fwhm_rad_per_s",
}


@dataclass(frozen=True)
class SourceInfo:
    spectrum: SampledSpectrum
    metadata: dict = field(default_factory=dict)


def source_from_dict(data: Mapping) -> SourceInfo:
    """SPDC (default) or Gaussian source; returns a normalized spectrum."""
    _check_keys(data, _SOURCE_KEYS, "source")
    kind = data.get("type", "spdc")
    points = int(_number(data, "grid_points", 4096, "source"))
    if kind == "gaussian":
        from psqoct.materials import wavelength_to_omega

        omega0 = float(wavelength_to_omega(_number(data, "center_wavelength_nm", where="source") * 1e-9))
        fwhm = _number(data, "fwhm_rad_per_s", where="source")
        span = data.get("span_rad_per_s")
        spec = gaussian_spectrum(omega0, fwhm, points, None if span is None else float(span))
        meta = {"type": "gaussian", "omega0": omega0, "fwhm_rad_per_s": fwhm}
        return SourceInfo(spec.normalized(), meta)
    if kind != "spdc":
        raise ConfigError(f"source: unknown type {kind!r} (spdc or gaussian)")
    n_o, n_e = material(str(data.get("crystal", "bbo")))
    span = data.get("span_rad_per_s")
    src = TwinPhotonSource(
        pump_wavelength=_number(data, "pump_wavelength_nm", 400, "source") * 1e-9,
        crystal_length=_number(data, "crystal_length_mm", 1.5, "source") * 1e-3,
        n_o=n_o,
        n_e=n_e,
        grid_points=points,
        lobes=int(_number(data, "lobes", 3, "source")),
        span=None if span is None else float(span),
    )
    src = with_solved_cut_angle(src)
    spec = spectrum(src)
    meta = {
        "type": "spdc",
        "omega0": src.omega0,
        "cut_angle_deg": float(np.rad2deg(src.cut_angle)),
        "crystal": str(data.get("crystal", "bbo")),
        "crystal_length_m": src.crystal_length,
        "pump_wavelength_m": src.pump_wavelength,
    }
    return SourceInfo(spec.normalized(), meta)


# --- run configuration ------------------------------------------------------------

_RUN_KEYS = {"preset", "source", "sample", "grid", "beam_splitter", "null", "seed"}


@dataclass(frozen=True)
class RunConfig:
    """Everything a CLI run needs, still in file units."""

    source: dict
    sample: dict
    grid: dict
    beam_splitter: dict = field(default_factory=dict)
    null: dict = field(default_factory=dict)
    preset: str | None = None
    seed: int = 0

    @classmethod
    def from_dict(cls, data: Mapping, base_dir: str | Path | None = None) -> "RunConfig":
        _check_keys(data, _RUN_KEYS, "config")
        sample = data.get("sample", {"interfaces": [], "layers": []})
        if isinstance(sample, str):
            path = Path(sample)
            if base_dir is not None and not path.is_absolute():
                path = Path(base_dir) / path
            sample = read_json(path)
        grid = data.get("grid")
        if grid is None:
            raise ConfigError("config: missing 'grid'")
        _check_keys(grid, {"start_um", "stop_um", "points"}, "grid")
        start, stop = _number(grid, "start_um", where="grid"), _number(grid, "stop_um", where="grid")
        points = grid.get("points")
        if isinstance(points, bool) or not isinstance(points, int) or points < 2:
            raise ConfigError("grid: 'points' must be an integer >= 2")
        if not stop > start:
            raise ConfigError("grid: 'stop_um' must exceed 'start_um'")
        bs = data.get("beam_splitter", {})
        _check_keys(bs, {"reflectance"}, "beam_splitter")
        null = data.get("null", {})
        _check_keys(null, {"ctau_um", "delta_deg", "coarse_step_deg"}, "null")
        seed = data.get("seed", 0)
        if isinstance(seed, bool) or not isinstance(seed, int):
            raise ConfigError("config: 'seed' must be an integer")
        return cls(
            source=dict(data.get("source", {})),
            sample=dict(sample),
            grid=dict(grid),
            beam_splitter=dict(bs),
            null=dict(null),
            preset=data.get("preset"),
            seed=seed,
        )

    def to_dict(self) -> dict:
        return {
            "preset": self.preset,
            "source": self.source,
            "sample": self.sample,
            "grid": self.grid,
            "beam_splitter": self.beam_splitter,
            "null": self.null,
            "seed": self.seed,
        }

    def positions(self) -> np.ndarray:
        g = self.grid
        return np.linspace(float(g["start_um"]), float(g["stop_um"]), int(g["points"])) * UM

    def splitter(self) -> BeamSplitter:
        return BeamSplitter(_number(self.beam_splitter, "reflectance", 0.5, "beam_splitter"))


def load_config(path: str | Path) -> RunConfig:
    return RunConfig.from_dict(read_json(path), Path(path).parent)


# --- interferogram files -----------------------------------------------------------


def write_interferogram(prefix: str | Path, ig: Interferogram, sidecar: Mapping) -> tuple[Path, Path]:
    """Write ``<prefix>.csv`` and ``<prefix>.json``; floats use ``repr`` so reruns are byte-identical."""
    prefix = Path(prefix)
    csv_path = prefix.with_name(prefix.name + ".csv")
    json_path = prefix.with_name(prefix.name + ".json")
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(CSV_HEADER) + "\n")
        for row in zip(ig.positions / UM, ig.R_H, ig.R_V, ig.R_T):
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    meta = dict(sidecar)
    meta.update(
        format=SIDECAR_FORMAT,
        lambda0_H=ig.lambda0_H,
        lambda0_V=ig.lambda0_V,
        visibility=ig.visibility,
        clipped=ig.clipped,
        points=int(ig.positions.size),
    )
    write_json(json_path, meta)
    return csv_path, json_path


def read_interferogram(csv_path: str | Path, sidecar_path: str | Path | None = None) -> tuple[Interferogram, dict]:
    """Load an interferogram; the sidecar defaults to the CSV path with ``.json``.

    Raises ConfigError on a wrong header, ragged or non-numeric rows, or a
    row count that disagrees with the sidecar.
    """
    csv_path = Path(csv_path)
    if sidecar_path is None:
        guess = csv_path.with_suffix(".json")
        sidecar_path = guess if guess.exists() else None
    meta = read_json(sidecar_path) if sidecar_path is not None else {}
    try:
        with open(csv_path, encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except FileNotFoundError:
        raise ConfigError(f"file not found: {csv_path}") from None
    if not rows or tuple(rows[0]) != CSV_HEADER:
        raise ConfigError(f"{csv_path}: header must be {','.join(CSV_HEADER)}")
    data = []
    for n, row in enumerate(rows[1:], start=2):
        if len(row) != len(CSV_HEADER):
            raise ConfigError(f"{csv_path}:{n}: expected {len(CSV_HEADER)} columns, got {len(row)}")
        try:
            data.append([float(v) for v in row])
        except ValueError:
            raise ConfigError(f"{csv_path}:{n}: non-numeric value") from None
    if len(data) < 3:
        raise ConfigError(f"{csv_path}: need at least 3 rows, got {len(data)}")
    if "points" in meta and int(meta["points"]) != len(data):
        raise ConfigError(f"{csv_path}: {len(data)} rows but the sidecar declares {meta['points']} (truncated?)")
    arr = np.array(data)
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{csv_path}: non-finite values")
    if np.any(np.diff(arr[:, 0]) <= 0):
        raise ConfigError(f"{csv_path}: ctau_um must be strictly increasing")
    ig = Interferogram(
        positions=arr[:, 0] * UM,
        R_H=arr[:, 1],
        R_V=arr[:, 2],
        R_T=arr[:, 3],
        lambda0_H=float(meta.get("lambda0_H", 1.0)),
        lambda0_V=float(meta.get("lambda0_V", 1.0)),
        visibility=float(meta.get("visibility", 1.0)),
        clipped=int(meta.get("clipped", 0)),
    )
    return ig, meta
