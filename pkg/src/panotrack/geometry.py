"""Equirectangular camera model and wrap-aware image-space math.

Coordinate conventions
----------------------
Image frame:
    x = column in pixels, increasing rightwards, cyclic modulo the image
    width (column 0 and column W describe the same viewing direction).
    y = row in pixels, increasing downwards, in [0, H].

Angles (degrees at every public interface):
    theta = azimuth in (-180, 180]. Column 0 maps to +180, the image
    center column to 0, i.e. theta decreases linearly with x.
    phi = elevation in [-90, 90], positive above the horizon. Row 0 maps
    to +90 (zenith) and row H to -90 (nadir) for a 180 degree vertical
    field of view.

World frame:
    Origin at the camera's foot point on the ground, z up. The camera
    sensor sits at (0, 0, mount_height). x points towards theta = 0,
    y towards theta = 90. Ranges ("rho") are horizontal ground distances
    from the camera axis.

The camera is assumed orthogonal to the ground at a fixed mount height;
there is no lens-distortion model beyond the ideal equirectangular
mapping.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, fields
from typing import NamedTuple

from .exceptions import AboveHorizonError, ConfigError, GeometryError


class ImagePoint(NamedTuple):
    x: float
    y: float


class PolarDirection(NamedTuple):
    theta: float
    phi: float


class WorldPoint(NamedTuple):
    x: float
    y: float
    z: float


@dataclass(frozen=True)
class CameraModel:
    """Intrinsics/extrinsics of an equirectangular panoramic camera.

    Attributes:
        image_width: panorama width in pixels.
        image_height: panorama height in pixels.
        fov_h: horizontal field of view in degrees, in (0, 360].
        fov_v: vertical field of view in degrees, in (0, 180].
        mount_height: camera height above the ground in meters.
        ankle_height: assumed height of a person's ankle joints above the
            ground in meters; used when intersecting ankle rays with the
            ankle plane instead of the ground plane.
    """

    image_width: int = 1920
    image_height: int = 960
    fov_h: float = 360.0
    fov_v: float = 180.0
    mount_height: float = 1.2
    ankle_height: float = 0.10

    def __post_init__(self) -> None:
        if self.image_width <= 0 or self.image_height <= 0:
            raise ConfigError("image dimensions must be positive")
        if not 0.0 < self.fov_h <= 360.0:
            raise ConfigError(f"fov_h must be in (0, 360], got {self.fov_h}")
        if not 0.0 < self.fov_v <= 180.0:
            raise ConfigError(f"fov_v must be in (0, 180], got {self.fov_v}")
        if not self.mount_height > self.ankle_height >= 0.0:
            raise ConfigError(
                "mount_height must exceed ankle_height and ankle_height be >= 0, "
                f"got {self.mount_height} and {self.ankle_height}"
            )

    @property
    def deg_per_px_x(self) -> float:
        return self.fov_h / self.image_width

    @property
    def deg_per_px_y(self) -> float:
        return self.fov_v / self.image_height

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, d: dict) -> "CameraModel":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown camera fields: {sorted(unknown)}")
        return cls(**d)

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_json(cls, s: str) -> "CameraModel":
        return cls.from_dict(json.loads(s))


def wrap_degrees(theta: float) -> float:
    """Normalize an angle in degrees to (-180, 180]."""
    return 180.0 - (180.0 - theta) % 360.0


def signed_wrap_diff(a: float, b: float, width: float) -> float:
    """Signed cyclic difference a - b reduced to (-width/2, width/2]."""
    half = 0.5 * width
    return half - (half - (a - b)) % width


def cyclic_interval_overlap(
    a_start: float, a_len: float, b_start: float, b_len: float, period: float
) -> float:
    """Overlap length of two cyclic intervals [start, start+len) on a circle.

    Interval lengths must not exceed the period. Handles intervals that
    cross the seam by testing the three relevant shifted copies.
    """
    a0 = a_start % period
    b0 = b_start % period
    total = 0.0
    for k in (-1.0, 0.0, 1.0):
        lo = max(a0, b0 + k * period)
        hi = min(a0 + a_len, b0 + k * period + b_len)
        if hi > lo:
            total += hi - lo
    return total


def image_to_polar(p: ImagePoint, cam: CameraModel) -> PolarDirection:
    """Map an image point to its viewing direction.

    theta = 180 - (fov_h / W) * x, normalized to (-180, 180];
    phi = 90 - (fov_v / H) * y. x is treated cyclically; y must lie in
    [0, H].
    """
    if not (math.isfinite(p.x) and math.isfinite(p.y)):
        raise GeometryError(f"non-finite image point {p}")
    if not 0.0 <= p.y <= cam.image_height:
        raise GeometryError(
            f"row {p.y} outside [0, {cam.image_height}]"
        )
    theta = wrap_degrees(180.0 - cam.deg_per_px_x * p.x)
    phi = 90.0 - cam.deg_per_px_y * p.y
    return PolarDirection(theta, phi)


def ground_range(phi: float, cam: CameraModel) -> float:
    """Horizontal distance to the point where a ray at elevation phi,
    cast from the sensor, meets the ankle plane z = ankle_height.

    Only below-horizon directions are valid. Computed from the
    depression angle so the result is positive: rho = (h - k) *
    tan(90 + phi), which equals (h - k) / tan(-phi).
    """
    if phi >= 0.0:
        raise AboveHorizonError(
            f"elevation {phi} deg is at or above the horizon; "
            "a ground intersection requires phi < 0"
        )
    if phi < -90.0:
        raise GeometryError(f"elevation {phi} deg below nadir")
    return (cam.mount_height - cam.ankle_height) * math.tan(
        math.radians(90.0 + phi)
    )


def estimate_height(phi_neck: float, rho: float, cam: CameraModel) -> float:
    """Neck height above the ground for a neck seen at elevation
    phi_neck at horizontal range rho: h_n = h + rho * tan(phi_neck)."""
    if rho <= 0.0:
        raise GeometryError(f"range must be positive, got {rho}")
    return cam.mount_height + rho * math.tan(math.radians(phi_neck))


def localize(ankle_mid: ImagePoint, neck: ImagePoint, cam: CameraModel) -> WorldPoint:
    """3D position of a person from the ankle-midpoint and neck pixels.

    The ankle ray fixes azimuth and ground range; the neck ray, assumed
    vertically above the ankle midpoint (same range), fixes the person
    height. Raises AboveHorizonError when the ankle point is not below
    the horizon.
    """
    pol_a = image_to_polar(ankle_mid, cam)
    pol_n = image_to_polar(neck, cam)
    rho = ground_range(pol_a.phi, cam)
    if rho <= 0.0:
        raise GeometryError("ankle at nadir; azimuth undefined")
    h_n = estimate_height(pol_n.phi, rho, cam)
    t = math.radians(pol_a.theta)
    return WorldPoint(rho * math.cos(t), rho * math.sin(t), h_n)


def world_to_image(w: WorldPoint, cam: CameraModel) -> ImagePoint:
    """Project a world point into the panorama (inverse of the polar
    mapping). Singular on the vertical camera axis."""
    rho = math.hypot(w.x, w.y)
    if rho == 0.0:
        raise GeometryError("point on the camera axis has no azimuth")
    theta = math.degrees(math.atan2(w.y, w.x))
    phi = math.degrees(math.atan2(w.z - cam.mount_height, rho))
    x = ((180.0 - theta) / cam.deg_per_px_x) % cam.image_width
    y = (90.0 - phi) / cam.deg_per_px_y
    return ImagePoint(x, y)


def wrap_distance(p1: ImagePoint, p2: ImagePoint, image_width: float) -> float:
    """Distance between two image points with the horizontal component
    measured around the panorama seam (shorter way around)."""
    dx = abs(p1.x - p2.x) % image_width
    dx = min(dx, image_width - dx)
    return math.hypot(dx, p1.y - p2.y)


def localization_sensitivity(
    distance: float, pixel_error: float, cam: CameraModel
) -> float:
    """Ground-range error caused by misreading the ankle row by
    pixel_error pixels (towards the horizon) for a person at the given
    distance. Returns math.inf when the perturbed row reaches or
    crosses the horizon.
    """
    if distance <= 0.0:
        raise GeometryError(f"distance must be positive, got {distance}")
    if pixel_error < 0.0:
        raise GeometryError(f"pixel error must be >= 0, got {pixel_error}")
    ankle = world_to_image(WorldPoint(distance, 0.0, cam.ankle_height), cam)
    row = ankle.y - pixel_error
    phi = 90.0 - cam.deg_per_px_y * row
    if phi >= 0.0:
        return math.inf
    return abs(ground_range(phi, cam) - distance)
