from src.models.exceptions import (
    ConfigError,
    DomainError,
    EmptyInputError,
    InvalidGeometryError,
    ProtocolError,
    SchemaError,
    SpotSprayError,
    UndefinedStatisticError,
)
from src.models.schemas import (
    CameraConfig,
    DetectionRecord,
    DetectorProfile,
    FieldSpec,
    LatencyProfile,
    NozzleMode,
    NozzleState,
    PassLog,
    Provenance,
    ReportBundle,
    RowLayout,
    RunoffEvent,
    RunoffSample,
    SamplingPlan,
    SpeciesClass,
    SprayEvent,
    StatResult,
    Strip,
    TileGrid,
    Treatment,
    TreatmentStats,
    TrialLayout,
    TrialSummary,
    VehicleState,
    WeedInstance,
)

__all__ = [
    "CameraConfig",
    "ConfigError",
    "DetectionRecord",
    "DetectorProfile",
    "DomainError",
    "EmptyInputError",
    "FieldSpec",
    "InvalidGeometryError",
    "LatencyProfile",
    "NozzleMode",
    "NozzleState",
    "PassLog",
    "ProtocolError",
    "Provenance",
    "ReportBundle",
    "RowLayout",
    "RunoffEvent",
    "RunoffSample",
    "SamplingPlan",
    "SchemaError",
    "SpeciesClass",
    "SpotSprayError",
    "SprayEvent",
    "StatResult",
    "Strip",
    "TileGrid",
    "Treatment",
    "TreatmentStats",
    "TrialLayout",
    "TrialSummary",
    "UndefinedStatisticError",
    "VehicleState",
    "WeedInstance",
]
