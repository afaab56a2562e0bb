"""Bayesian order MCMC for linear Gaussian DAGs with equal error variances."""

from .dataset import (DataError, DataMatrix, DegenerateDesignError, ParseError, RssBounds,
                      load_matrix, rss, rss_bounds)
from .evaluate import (ExactPosterior, MetricReport, exact_posterior, gelman_rubin,
                       metrics, total_variation)
from .graph import (ADJACENT, SHUFFLE, TRANSPOSITION, Dag, Move, Ordering, apply_move,
                    potential_parents, sample_move)
from .mcmc import (ChainConfig, ChainOutput, MultiChainError, mean_pip, run_chain,
                   run_multichain)
from .score import DECOMPOSABLE, NONDECOMPOSABLE, Hyperparams, ScoreState, phi, phi_decomposable
from .selection import (SelectionCache, map_dag, nodewise_fb, rb_matrix, score_dag,
                        update_after_move)
from .simulate import GroundTruth, SimConfig, gen_data, preset, sample_truth, simulate
from .topdown import TopDownResult, itd, std

__all__ = [
    "ADJACENT", "DECOMPOSABLE", "NONDECOMPOSABLE", "SHUFFLE", "TRANSPOSITION",
    "ChainConfig", "ChainOutput", "Dag", "DataError", "DataMatrix", "DegenerateDesignError",
    "ExactPosterior", "GroundTruth", "Hyperparams", "MetricReport", "Move", "MultiChainError",
    "Ordering", "ParseError", "RssBounds", "ScoreState", "SelectionCache", "SimConfig",
    "TopDownResult", "apply_move", "exact_posterior", "gelman_rubin", "gen_data", "itd",
    "load_matrix", "map_dag", "mean_pip", "metrics", "nodewise_fb", "phi", "phi_decomposable",
    "potential_parents", "preset", "rb_matrix", "rss", "rss_bounds", "run_chain",
    "run_multichain", "sample_move", "sample_truth", "score_dag", "simulate", "std",
    "total_variation", "update_after_move",
]

__version__ = "0.1.0"
