"""avcsal: audio-visual-consistency gated saliency toolkit.

Fixation-prediction metrics, a from-scratch mel frontend, binary
consistency gating over pluggable fusion schemes, desk-scale stand-in
models, synthetic benchmark generation, and a CLI tying them together.
"""

from .audio import (
    AudioClip,
    MelConfig,
    MelFilterbank,
    MelSpectrogram,
    Spectrogram,
    build_mel_filterbank,
    compute_mel,
    frame_align,
    mel_spectrogram,
    read_wav,
    resample_linear,
    stft_magnitude,
    write_wav,
)
from .datasets import (
    REFERENCE_SET_STATS,
    AvcLabelTrack,
    DatasetManifest,
    Instance,
    ReferenceStats,
    SyntheticClip,
    ValidationReport,
    VideoEntry,
    Violation,
    check_reference_counts,
    iterate_instances,
    load_avc_labels,
    load_manifest,
    load_manifest_bundle,
    reference_bundle,
    repeat_labels,
    save_manifest,
    save_manifest_bundle,
    scenario_sequence,
    synthesize_clip,
    synthesize_dataset,
    validate_manifest,
)
from .errors import AvcsalError
from .experiment import (
    AblationRow,
    AblationTable,
    ClipData,
    ExperimentConfig,
    GateExperimentResult,
    SynthSpec,
    ablation_text,
    accuracy_sweep,
    audio_motion_covariance,
    degrade_labels,
    make_decoder,
    pool_reports,
    prepare_clip,
    prepare_synthetic_clip,
    run_gate_experiment,
)
from .fusion import (
    BilinearTransform,
    FeatureTensor,
    FeatureVector,
    GateDecision,
    PipelineResult,
    binarize_score,
    fuse_bilinear,
    fuse_concat,
    fuse_spatial_align,
    gate_output,
    regate,
    run_gated_pipeline,
)
from .metrics import (
    FixationSet,
    FrameMetrics,
    MetricReport,
    auc_judd,
    cc,
    evaluate_sequence,
    fixation_density,
    normalize_density,
    nss,
    s_auc,
    sim,
)
from .models import (
    AvcClassifier,
    AvcFeature,
    LossConfig,
    TrainResult,
    avc_score,
    combined_loss,
    cross_entropy_loss,
    extract_avc_features,
    kl_loss,
    predict_avc,
    predict_visual_saliency,
    train_avc_classifier,
)

__version__ = "0.1.0"
