"""Magnification and sampling arithmetic for the two-stage relay imaging system."""

from dataclasses import dataclass


@dataclass(frozen=True)
class OpticsSpec:
    """Focal lengths in mm, sensor pixel size in micrometres.

    screen_to_sensor_ratio is the display diagonal over the sensor
    diagonal and only feeds the reported digital magnification;
    fov_diameter_um is a measured constant, not derived.
    """

    f_objective: float = 30.0
    f_tube: float = 40.0
    f_internal: float = 5.43
    f_relay: float = 2.87
    pixel_size: float = 0.8
    screen_to_sensor_ratio: float = 18.0
    fov_diameter_um: float = 800.0

    def __post_init__(self):
        for name in ("f_objective", "f_tube", "f_internal", "f_relay"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.pixel_size <= 0:
            raise ValueError("pixel_size must be positive")


def optical_magnification(spec: OpticsSpec = OpticsSpec()) -> float:
    """Product of the two stage ratios (tube/objective) * (internal/relay)."""
    return (spec.f_tube / spec.f_objective) * (spec.f_internal / spec.f_relay)


def object_pixel_pitch(spec: OpticsSpec = OpticsSpec()) -> float:
    """Sample-plane size of one sensor pixel, in micrometres per pixel."""
    return spec.pixel_size / optical_magnification(spec)


def digital_magnification(spec: OpticsSpec = OpticsSpec()) -> float:
    """On-screen magnification; informational, affects no computation."""
    return spec.screen_to_sensor_ratio


def spec_report(spec: OpticsSpec = OpticsSpec()) -> dict:
    return {
        "optical_magnification": optical_magnification(spec),
        "digital_magnification": digital_magnification(spec),
        "object_pixel_pitch_um": object_pixel_pitch(spec),
        "fov_diameter_um": spec.fov_diameter_um,
    }
