"""Focused-ion-beam fabrication support: RGB dose-rate pixel maps for
hemispherical milling and circle-arc fitting of measured surface profiles.

Depth-to-color encoding is linear with a required calibration constant
(depth removed per RGB unit); values overflow blue -> green -> red, so
the encodable depth ceiling is 765 calibration quanta.
"""
from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass

import numpy as np

CHANNEL_CAP = 255
MAX_UNITS = 3 * CHANNEL_CAP


class FabError(ValueError):
    """Invalid fabrication parameters or degenerate geometry."""


@dataclass(frozen=True)
class DoseMap:
    """Square RGB dose-rate map, radially symmetric about its center."""

    pitch_nm: float
    calibration_nm_per_unit: float
    pixels: np.ndarray  # (h, w, 3) uint8

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def depth_nm(self) -> np.ndarray:
        """Decode the map back to a depth field in nm."""
        units = self.pixels.astype(np.int64).sum(axis=2)
        return units * self.calibration_nm_per_unit


@dataclass(frozen=True)
class SurfaceProfile:
    """Measured height profile along one axis: x in um, z in nm."""

    x_um: tuple[float, ...]
    z_nm: tuple[float, ...]

    def __post_init__(self):
        x = np.asarray(self.x_um, dtype=float)
        z = np.asarray(self.z_nm, dtype=float)
        if x.size != z.size:
            raise FabError("x and z must have equal length")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(z))):
            raise FabError("profile samples must be finite")
        if np.any(np.diff(x) <= 0):
            raise FabError("x must be strictly increasing")
        object.__setattr__(self, "x_um", tuple(float(v) for v in x))
        object.__setattr__(self, "z_nm", tuple(float(v) for v in z))


def hemisphere_depth_nm(r_nm: np.ndarray, radius_nm: float, aperture_nm: float) -> np.ndarray:
    """Target milling depth d(r) for a concave spherical cap.

    d(r) = sqrt(R^2 - r^2) - sqrt(R^2 - (a/2)^2) inside the aperture,
    zero outside, so the rim mills to zero depth.
    """
    rim = math.sqrt(radius_nm ** 2 - (aperture_nm / 2.0) ** 2)
    inside = r_nm <= aperture_nm / 2.0
    depth = np.zeros_like(r_nm, dtype=float)
    depth[inside] = np.sqrt(radius_nm ** 2 - r_nm[inside] ** 2) - rim
    return depth


def encode_depth_units(units: np.ndarray) -> np.ndarray:
    """Spread integer dose units across the RGB channels, blue filling
    first, then green, then red; returned in (R, G, B) storage order."""
    if np.any(units < 0) or np.any(units > MAX_UNITS):
        raise FabError(f"dose units must lie in [0, {MAX_UNITS}]")
    blue = np.minimum(units, CHANNEL_CAP)
    green = np.minimum(units - blue, CHANNEL_CAP)
    red = units - blue - green
    return np.stack([red, green, blue], axis=-1).astype(np.uint8)


def hemisphere_dose_map(
    radius_um: float,
    aperture_um: float,
    pitch_nm: float,
    calibration_nm_per_unit: float,
    *,
    min_pixels_across: int = 50,
) -> DoseMap:
    """RGB dose map milling a concave hemisphere cap of the given radius.

    The aperture must fit the sphere (aperture <= 2 radius) and be
    resolved by at least ``min_pixels_across`` pixels. Raises when the
    center depth exceeds the encodable range, naming the calibration
    that would fit.
    """
    if radius_um <= 0 or aperture_um <= 0 or pitch_nm <= 0:
        raise FabError("radius, aperture, and pitch must be positive")
    if aperture_um > 2.0 * radius_um:
        raise FabError(f"aperture {aperture_um} um exceeds sphere diameter {2 * radius_um} um")
    if calibration_nm_per_unit <= 0:
        raise FabError("calibration must be positive (depth per RGB unit)")
    radius_nm = radius_um * 1e3
    aperture_nm = aperture_um * 1e3
    across = aperture_nm / pitch_nm
    if across < min_pixels_across:
        raise FabError(
            f"pitch {pitch_nm} nm resolves the aperture by only {across:.0f} px; "
            f"need >= {min_pixels_across}")

    center_depth = hemisphere_depth_nm(np.array([0.0]), radius_nm, aperture_nm)[0]
    max_units = int(round(center_depth / calibration_nm_per_unit))
    if max_units > MAX_UNITS:
        needed = center_depth / MAX_UNITS
        raise FabError(
            f"center depth {center_depth:.1f} nm needs {max_units} units; "
            f"calibration must be >= {needed:.4f} nm/unit")

    half = int(math.ceil(aperture_nm / 2.0 / pitch_nm))
    coords = (np.arange(2 * half + 1) - half) * pitch_nm
    xx, yy = np.meshgrid(coords, coords)
    r = np.hypot(xx, yy)
    depth = hemisphere_depth_nm(r, radius_nm, aperture_nm)
    units = np.round(depth / calibration_nm_per_unit).astype(np.int64)
    return DoseMap(pitch_nm=pitch_nm, calibration_nm_per_unit=calibration_nm_per_unit,
                   pixels=encode_depth_units(units))


# ---------------------------------------------------------------------------
# BMP output
# ---------------------------------------------------------------------------

def write_bmp(path, dose_map: DoseMap, metadata: dict | None = None) -> None:
    """Write the map as an uncompressed 24-bit bottom-up BMP (BGR order,
    rows padded to 4 bytes), plus a JSON sidecar with the calibration.

    Extra ``metadata`` entries are merged into the sidecar (the BMP body
    stays bit-exact)."""
    px = dose_map.pixels
    h, w = px.shape[:2]
    row_bytes = w * 3
    pad = (4 - row_bytes % 4) % 4
    image_size = (row_bytes + pad) * h
    header = struct.pack(
        "<2sIHHI", b"BM", 14 + 40 + image_size, 0, 0, 14 + 40)
    info = struct.pack(
        "<IiiHHIIiiII", 40, w, h, 1, 24, 0, image_size, 2835, 2835, 0, 0)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(info)
        zero = b"\x00" * pad
        for row in px[::-1]:  # bottom-up
            # stored (R, G, B) per pixel; BMP wants B, G, R
            fh.write(row[:, ::-1].tobytes())
            fh.write(zero)
    sidecar = {
        "format": "bmp24",
        "width_px": w,
        "height_px": h,
        "pitch_nm": dose_map.pitch_nm,
        "calibration_nm_per_unit": dose_map.calibration_nm_per_unit,
        "channel_fill_order": "blue,green,red",
    }
    sidecar.update(metadata or {})
    with open(str(path) + ".json", "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_bmp(path) -> np.ndarray:
    """Read back a 24-bit BMP written by :func:`write_bmp` as (h, w, 3) RGB."""
    with open(path, "rb") as fh:
        data = fh.read()
    magic, _size, _r1, _r2, offset = struct.unpack_from("<2sIHHI", data, 0)
    if magic != b"BM":
        raise FabError("not a BMP file")
    hdr_size, w, h, _planes, bpp = struct.unpack_from("<IiiHH", data, 14)[:5]
    if bpp != 24 or hdr_size != 40:
        raise FabError("only the uncompressed 24-bit layout is supported")
    row_bytes = w * 3
    pad = (4 - row_bytes % 4) % 4
    rows = []
    pos = offset
    for _ in range(abs(h)):
        row = np.frombuffer(data, dtype=np.uint8, count=row_bytes, offset=pos).reshape(w, 3)
        rows.append(row[:, ::-1])  # BGR -> RGB
        pos += row_bytes + pad
    img = np.stack(rows[::-1] if h > 0 else rows)
    return img


# ---------------------------------------------------------------------------
# profile fitting
# ---------------------------------------------------------------------------

def fit_hemisphere_profile(
    profile: SurfaceProfile,
    *,
    edge_exclusion_fraction: float = 0.10,
) -> dict[str, float]:
    """Least-squares circle-arc fit of a surface profile.

    Fits (x - x0)^2 + (z - z0)^2 = R^2 by the algebraic (Kasa) least
    squares, after dropping the outermost ``edge_exclusion_fraction`` of
    the lateral extent on each side (milled shapes deviate at the rim).
    Returns radius_um, center_offset_um, center_height_nm, rms_nm.
    """
    x_um = np.asarray(profile.x_um, dtype=float)
    z_nm = np.asarray(profile.z_nm, dtype=float)
    if x_um.size < 10:
        raise FabError("need at least 10 profile points spanning the curved region")

    span = x_um[-1] - x_um[0]
    keep = ((x_um >= x_um[0] + edge_exclusion_fraction * span)
            & (x_um <= x_um[-1] - edge_exclusion_fraction * span))
    x = x_um[keep] * 1e3  # nm
    z = z_nm[keep]
    if x.size < 10:
        raise FabError("edge exclusion left fewer than 10 points")

    # Kasa fit: x^2 + z^2 = 2 x x0 + 2 z z0 + (R^2 - x0^2 - z0^2)
    design = np.column_stack([2.0 * x, 2.0 * z, np.ones_like(x)])
    target = x ** 2 + z ** 2
    try:
        coef, _res, rank, _sv = np.linalg.lstsq(design, target, rcond=None)
    except np.linalg.LinAlgError as exc:
        raise FabError(f"degenerate circle fit: {exc}") from exc
    if rank < 3:
        raise FabError("degenerate circle fit: points are collinear")
    x0, z0, c = coef
    r_sq = c + x0 ** 2 + z0 ** 2
    if r_sq <= 0:
        raise FabError("degenerate circle fit: non-positive squared radius")
    radius_nm = math.sqrt(r_sq)
    residuals = np.hypot(x - x0, z - z0) - radius_nm
    return {
        "radius_um": radius_nm / 1e3,
        "center_offset_um": x0 / 1e3,
        "center_height_nm": float(z0),
        "rms_nm": float(np.sqrt(np.mean(residuals ** 2))),
        "n_points": int(x.size),
    }


def synthetic_hemisphere_profile(
    radius_um: float,
    aperture_um: float,
    n_points: int = 201,
    roughness_nm: float = 0.0,
    center_offset_um: float = 0.0,
    rng: np.random.Generator | None = None,
) -> SurfaceProfile:
    """Ideal concave cross-section plus optional Gaussian roughness."""
    radius_nm = radius_um * 1e3
    aperture_nm = aperture_um * 1e3
    x_nm = np.linspace(-aperture_nm / 2.0, aperture_nm / 2.0, n_points)
    z = -hemisphere_depth_nm(np.abs(x_nm), radius_nm, aperture_nm)
    if roughness_nm > 0:
        rng = rng or np.random.default_rng()
        z = z + rng.normal(0.0, roughness_nm, size=z.shape)
    x_um = x_nm / 1e3 + center_offset_um
    return SurfaceProfile(tuple(x_um), tuple(z))


def read_profile_csv(path) -> SurfaceProfile:
    """Two-column CSV (x_um, z_nm); header and comment lines are skipped."""
    xs, zs = [], []
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            try:
                xs.append(float(parts[0]))
                zs.append(float(parts[1]))
            except (ValueError, IndexError):
                continue
    return SurfaceProfile(tuple(xs), tuple(zs))
