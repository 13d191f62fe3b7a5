from .profile import (
    EDGE_ONLY,
    LatencyBreakdown,
    LatencyProfile,
    PartitionCost,
    PartitionReport,
    StageProfile,
    emit_report,
    end_to_end_latency,
    parse_report_csv,
    sweep_partitions,
)
from .workflows import (
    FlRunResult,
    VideoRunResult,
    default_profile,
    evaluation_fabric,
    fl_manifest,
    register_fabric,
    run_federated_learning,
    run_video_pipeline,
    trace_pipeline,
    video_manifest,
)

__all__ = [
    "EDGE_ONLY",
    "LatencyBreakdown",
    "LatencyProfile",
    "PartitionCost",
    "PartitionReport",
    "StageProfile",
    "emit_report",
    "end_to_end_latency",
    "parse_report_csv",
    "sweep_partitions",
    "FlRunResult",
    "VideoRunResult",
    "default_profile",
    "evaluation_fabric",
    "fl_manifest",
    "register_fabric",
    "run_federated_learning",
    "run_video_pipeline",
    "trace_pipeline",
    "video_manifest",
]
