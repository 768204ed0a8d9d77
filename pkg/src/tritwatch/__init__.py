"""Crowd anomaly detection from group-count time series.

Group counts extracted from video frames (or imported from CSV) are
encoded into trinary temporal patterns; a sliding histogram of those
patterns drives an alarm whenever its quiet bin collapses.  The
package also ships two group-counting front ends, an alarm-matching
evaluation harness with grid-search and leave-one-out tuning, and a
synthetic scenario generator for verification.
"""

from .clustering import dbscan_cluster_count
from .counting import (
    BlobGroupCounter,
    CounterConfig,
    Frame,
    OpticalFlowGroupCounter,
    build_count_series,
    count_groups_blob,
    count_groups_cof,
    estimate_background,
    flow_to_points,
)
from .descriptor import (
    AlarmEvent,
    CountSeries,
    DescriptorParams,
    InsufficientDataError,
    PatternHistogram,
    StreamingDetector,
    TritAnomalyDetector,
    detect_alarms,
    encode_trits,
    histogram_stream,
    pattern_codes,
    quiet_code,
    select_frames,
    trits_to_decimal,
    window_histogram,
)
from .evaluation import (
    EvalReport,
    GridSearchTuner,
    GridSpec,
    LabelEvent,
    LeaveOneOutTuner,
    MatchConfig,
    compute_metrics,
    grid_search_supervised,
    leave_one_out,
    match_alarms,
)
from .flow import FlowField, dense_optical_flow
from .synth import (
    BlobSceneSpec,
    BlobSpec,
    CountEvent,
    ScenarioSpec,
    generate_blob_frames,
    generate_count_series,
)

__version__ = "0.1.0"

__all__ = [
    "AlarmEvent",
    "BlobGroupCounter",
    "BlobSceneSpec",
    "BlobSpec",
    "CountEvent",
    "CountSeries",
    "CounterConfig",
    "DescriptorParams",
    "EvalReport",
    "FlowField",
    "Frame",
    "GridSearchTuner",
    "GridSpec",
    "InsufficientDataError",
    "LabelEvent",
    "LeaveOneOutTuner",
    "MatchConfig",
    "OpticalFlowGroupCounter",
    "PatternHistogram",
    "ScenarioSpec",
    "StreamingDetector",
    "TritAnomalyDetector",
    "build_count_series",
    "compute_metrics",
    "count_groups_blob",
    "count_groups_cof",
    "dbscan_cluster_count",
    "dense_optical_flow",
    "detect_alarms",
    "encode_trits",
    "estimate_background",
    "flow_to_points",
    "generate_blob_frames",
    "generate_count_series",
    "grid_search_supervised",
    "histogram_stream",
    "leave_one_out",
    "match_alarms",
    "pattern_codes",
    "quiet_code",
    "select_frames",
    "trits_to_decimal",
    "window_histogram",
]
