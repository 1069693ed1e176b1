from .similarity import OfflineEmbedder, SimilarityReport, cosine, embed, propagation_report, similarity_pairs
from .stats import UTestResult, mann_whitney_u, stars
from .tables import DeltaSharpeTables, delta_sharpe_tables, fmt_value, sharpe_groups
from .text import LogOddsResult, TokenCorpus, log_odds, log_odds_csv, tokenize, top_k

__all__ = [
    "DeltaSharpeTables", "LogOddsResult", "OfflineEmbedder", "SimilarityReport", "TokenCorpus", "UTestResult",
    "cosine", "delta_sharpe_tables", "embed", "fmt_value", "log_odds", "log_odds_csv", "mann_whitney_u",
    "propagation_report", "sharpe_groups", "similarity_pairs", "stars", "tokenize", "top_k",
]
