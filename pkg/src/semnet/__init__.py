"""Lexical-graph semantic measures and conversation dynamics.

The package builds a single directed acyclic graph from the WordNet noun
database (meanings linked by hypernymy, words linked to their senses) and
derives everything else from graph queries: information content formulas,
similarity measures, the RG-65 correlation study, and moving-window
divergence/convergence analysis of noun streams.
"""

from .errors import (
    CycleDetected,
    DegenerateInput,
    Disconnected,
    EmptyDataset,
    InsufficientData,
    MalformedLine,
    MissingRoot,
    NoMatchingRecords,
    NotInLexicon,
    SelfPair,
    SemnetError,
    StreamTooShort,
    TaggerProtocolError,
    TaggerUnavailable,
)
from .graph import (
    adjacent_meanings,
    commonness,
    depth,
    hyponyms_of_word,
    index,
    lcs,
    leaves,
    subsumers,
    subvertices,
    via_lcs_distance,
    word_distance,
)
from .measures import (
    DEFAULT_IC,
    DEFAULT_SIM,
    IC_IDS,
    IC_SIM_FAMILIES,
    PATH_SIM_IDS,
    SUBSUMER_SIM_IDS,
    MeasureConfig,
    SimSpec,
    abstraction,
    all_measure_ids,
    clamp_diagnostics,
    information_content,
    mean_ic,
    mean_pairwise_similarity,
    parse_ic_id,
    parse_sim_id,
    polysemy,
    similarity,
)
from .wordnet import (
    ROOT_ID,
    GraphStats,
    LexicalGraph,
    graph_stats,
    load_exceptions,
    load_noun_database,
    meaning_id,
    parse_serialized,
    serialize_graph,
)

__all__ = [name for name in dir() if not name.startswith("_")]
