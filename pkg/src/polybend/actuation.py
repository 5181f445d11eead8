"""Simulated tension-sensing actuation unit.

Mirrors the observable behavior of a motorized pulley module with a
torque cell after the gearbox: cable tension is the measured torque
divided by the pulley radius, the cell saturates at its rated range, and
readings carry configurable Gaussian noise plus a calibration gain and
offset per module.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ActuationUnitSim:
    """One tension-sensing pulley module (per-cable)."""

    pulley_radius: float = 10.0          # mm (20 mm diameter pulley)
    torque_cell_range: float = 700.0     # N*mm (0.7 N*m rated)
    torque_noise_sigma: float = 0.0      # N*mm, applied when simulating readings
    sample_rate: float = 1000.0          # Hz
    calibration_gain: float = 1.0
    calibration_offset: float = 0.0      # N*mm

    def __post_init__(self):
        if not (self.pulley_radius > 0.0):
            raise ValueError(f"pulley_radius must be positive, got {self.pulley_radius}")
        if not (self.torque_cell_range > 0.0):
            raise ValueError("torque_cell_range must be positive")
        if not (self.sample_rate > 0.0):
            raise ValueError("sample_rate must be positive")


@dataclass(frozen=True)
class TorqueReading:
    """Raw cell output in N*mm with a saturation flag."""

    torque: float
    saturated: bool


def tension_from_torque(torque_reading, unit: ActuationUnitSim):
    """Cable tension (N) from a torque-cell reading (N*mm).

    Applies the module calibration, then divides by the pulley radius.
    Readings beyond the rated range are rejected.
    """
    if abs(torque_reading) > unit.torque_cell_range * (1 + 1e-9):
        raise ValueError(
            f"torque reading {torque_reading} N*mm exceeds the "
            f"{unit.torque_cell_range} N*mm cell range")
    corrected = unit.calibration_gain * torque_reading + unit.calibration_offset
    return corrected / unit.pulley_radius


def torque_from_tension(tension, unit: ActuationUnitSim, rng=None) -> TorqueReading:
    """Simulate the torque-cell reading for a true cable tension (N).

    Adds Gaussian noise when the unit specifies it (and an rng is given),
    then clips at the cell range with the saturation flag set.
    """
    torque = tension * unit.pulley_radius
    if rng is not None and unit.torque_noise_sigma > 0.0:
        torque = torque + rng.normal(0.0, unit.torque_noise_sigma)
    torque = (torque - unit.calibration_offset) / unit.calibration_gain
    saturated = abs(torque) > unit.torque_cell_range
    if saturated:
        torque = float(np.clip(torque, -unit.torque_cell_range,
                               unit.torque_cell_range))
    return TorqueReading(torque=float(torque), saturated=bool(saturated))


def measure_tension(tension, unit: ActuationUnitSim, rng=None):
    """Round trip through the simulated cell: (tension reading, saturated)."""
    reading = torque_from_tension(tension, unit, rng)
    return tension_from_torque(reading.torque, unit), reading.saturated


def chirp_profile(magnitude, f_start, f_end, duration):
    """Linear-frequency sine sweep as a callable of time.

    The instantaneous frequency runs from f_start at t=0 to f_end at
    t=duration; the value at t=0 is exactly zero.
    """
    if not (f_start < f_end):
        raise ValueError(f"need f_start < f_end, got {f_start}, {f_end}")
    if not (magnitude > 0.0 and duration > 0.0):
        raise ValueError("magnitude and duration must be positive")
    rate = (f_end - f_start) / duration

    def profile(t):
        phase = 2.0 * np.pi * (f_start * t + 0.5 * rate * t * t)
        return magnitude * np.sin(phase)

    return profile
