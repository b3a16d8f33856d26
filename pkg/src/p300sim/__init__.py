"""Offline P300-speller decoding and typing-speed simulation toolkit."""

from .lm import (
    ALPHABET,
    SPACE,
    LayeredLM,
    build_lm,
    load_corpus,
    load_lm,
    normalize_text,
    p_char,
    p_next,
    p_word_completion,
    save_lm,
)
from .flashboard import (
    Flashboard,
    HighlightGroup,
    ScanSchedule,
    alphabetical_board,
    layout_diagonal,
    layout_sequential,
    map_virtual,
    place_suggestions,
    schedule_round,
)
from .wordpred import (
    Suggestion,
    SuggesterHandle,
    dijkstra_complete,
    layered_suggest,
    oracle_char_dist,
    oracle_word_suggest,
)
from .swlda import (
    ClassifierWeights,
    EpochFeatures,
    GaussianParams,
    extract_features,
    fit_gaussians,
    score,
    split_ascv,
    split_wscv,
    swlda_train,
)
from .signal_sim import SamplerState, ScorePools, build_pools, sample_score
from .decoder import DecoderConfig, Posterior, check_stop, init_prior, likelihood, update
from .harness import (
    SimConfig,
    SimResult,
    SubjectModel,
    compute_itr,
    compute_retry_rate,
    run_batch,
    simulate_passage,
)

__version__ = "0.1.0"
