"""Co-creative Taiko chart editor with an adaptive ML partner."""

from .chart import (
    Chart,
    ChartError,
    FRAME_MS,
    FrameCollisionError,
    FrameSequence,
    Note,
    NoteKind,
    TimingGrid,
    chart_from_frame_sequence,
    chart_to_frame_sequence,
    frame_count_for,
    quantize_to_frame,
    snap_to_tick,
)
from .patterns import PatternSet, extract_patterns, note_accuracy, overall_pattern_score
from .chartio import ChartParseError, load_chart, parse_chart, save_chart, serialize_chart
from .osu import OsuParseError, OsuTaikoBeatmap, parse_osu, parse_osu_beatmap
from .features import (
    BAND_COUNT,
    FeatureError,
    FeatureFormatError,
    FeatureMatrix,
    extract_features,
    load_features,
    save_features,
)
from .model import (
    ModelConfig,
    ModelError,
    ModelFormatError,
    ModelParams,
    TrainConfig,
    TrainingError,
    TrainingInstance,
    forward,
    init_model,
    load_model,
    save_model,
    train,
)
from .regions import AlignmentError, make_training_instances, predict_region
from .adaptation import (
    AdaptationState,
    RetrainError,
    RetrainEvent,
    StrategyKind,
    add_instances,
    reset,
    should_retrain,
)
from .calibration import (
    CalibrationResult,
    Combo,
    GridSpec,
    grid_search,
    pretrain,
    select_winner,
    simulate_designer,
)
from .session import (
    SessionError,
    SessionLog,
    SessionManager,
    SessionStats,
    SongInfo,
    StudyConfig,
    compute_log_statistics,
)

__version__ = "0.1.0"
