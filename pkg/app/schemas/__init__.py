from app.schemas.report import (
    ClipCorrection,
    ComparisonSummary,
    MetricReport,
    ReidReport,
    RunReport,
    ScoreDelta,
    SequenceRunResult,
    SequenceScore,
)
from app.schemas.run_config import (
    ClipAggregation,
    EvalConfig,
    EvalProtocol,
    EvalSetting,
    FusionConfig,
    KalmanParams,
    PipelineMode,
    ReidConfig,
    RunConfig,
    SequenceInputs,
    TrackerClientConfig,
)
from app.schemas.synth import SwitchEvent, SynthSpec, SynthSuiteSpec, TrajectoryKind

__all__ = [
    # Run config schemas
    "ClipAggregation", "EvalConfig", "EvalProtocol", "EvalSetting", "FusionConfig",
    "KalmanParams", "PipelineMode", "ReidConfig", "RunConfig", "SequenceInputs",
    "TrackerClientConfig",
    # Report schemas
    "ClipCorrection", "ComparisonSummary", "MetricReport", "ReidReport", "RunReport",
    "ScoreDelta", "SequenceRunResult", "SequenceScore",
    # Synth schemas
    "SwitchEvent", "SynthSpec", "SynthSuiteSpec", "TrajectoryKind",
]
