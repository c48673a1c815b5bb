"""voiceaudit: decide from black-box transcriptions alone whether a speaker's
voice data was used to train a speech-to-text model.

The pipeline queries a transcription source with a user's audios, extracts
per-record features from (reference, hypothesis, duration), aggregates them
into one statistical vector per user, and classifies that vector with an
auditor trained on shadow-run outputs. A seeded simulator stands in for real
speech models so the whole chain runs at desk scale.
"""

from .align import AlignmentResult, WerReport, char_align, corpus_wer, overfitting_gap, word_align
from .aggregate import (
    FeatureSet,
    Label,
    StatVector,
    UserFeatureVector,
    label_users,
    read_vectors_csv,
    stats7,
    user_vector,
    write_vectors_csv,
)
from .classify import (
    ALGORITHMS,
    AuditorModel,
    TrainConfig,
    TrainingTable,
    load_model,
    predict,
    save_model,
    table_from_vectors,
    train,
)
from .corpus import (
    AudioRecord,
    AudioSignal,
    Dataset,
    EmbeddingTable,
    TranscriptionTable,
    load_embeddings,
    load_manifest,
    load_transcripts,
    read_wav,
    save_manifest,
    save_transcripts,
    split_dataset,
)
from .features import (
    MfccConfig,
    RecordFeatures,
    SimilarityProvider,
    char_edit_provider,
    embedding_provider,
    mfcc,
    record_features,
    similarity_char,
    similarity_embedding,
    user_mfcc_means,
)
from .simulate import (
    ErrorModel,
    ShadowRun,
    SpeakerProfile,
    bundled_wordlist,
    generate_corpus,
    load_wordlist,
    simulate_shadow_run,
    simulate_transcription,
    speaker_profile,
    synthetic_embeddings,
)
from .workflow import (
    AuditVerdict,
    ExperimentConfig,
    Metrics,
    MetricsSummary,
    ScenarioQuery,
    audit_user,
    balance_and_sample,
    build_member_scenarios,
    build_training_table,
    build_user_vectors,
    evaluate,
    member_scenario_rates,
    repeated_trials,
    run_trial,
    sweep_training_size,
)

__version__ = "0.1.0"
