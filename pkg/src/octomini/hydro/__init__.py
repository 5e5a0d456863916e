from .eos import (
    EosConfig,
    conserved_from_primitive,
    dual_energy_sync,
    internal_energy,
    pressure,
    sound_speed,
)
from .flux import PrimitiveState, face_flux, kt_flux, physical_flux
from .reconstruct import HydroMode, QuadraturePointSet, reconstruct
from .sources import gravity_sources, rotating_frame_sources
from .step import SSP_RK3_STAGES, FloorConfig, HydroStepper, SerialExecutor

__all__ = [
    "EosConfig",
    "conserved_from_primitive",
    "dual_energy_sync",
    "internal_energy",
    "pressure",
    "sound_speed",
    "PrimitiveState",
    "face_flux",
    "kt_flux",
    "physical_flux",
    "HydroMode",
    "QuadraturePointSet",
    "reconstruct",
    "gravity_sources",
    "rotating_frame_sources",
    "SSP_RK3_STAGES",
    "FloorConfig",
    "HydroStepper",
    "SerialExecutor",
]
