"""Query-by-humming retrieval over multiresolution histograms with progressive filtering."""

from .cascade import CascadeConfig, CascadeResult, PrunePolicy, Stage, StageReport, full_scan, prune, run_cascade, thresholds
from .evaluation import EvalReport, GroundTruth, evaluate, moa, mrr, synth_queries, top_x
from .histogram import BinSpec, CumulativeHistogram, Histogram, NormalizedHistogram, bin_count, build_histogram, cumulative, normalize
from .index_file import load_index, save_index
from .mrh import Index, IndexParams, MultiResHistogram, build_index, build_mrh
from .signal import Corpus, MusicSignal, Segment, load_wav, save_wav, split_dyadic, synth_corpus
from .similarity import LevelScore, MatchMode, euclidean, l1_distance, match_level, mrhd

__version__ = "0.1.0"
