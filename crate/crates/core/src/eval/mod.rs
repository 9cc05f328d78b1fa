//! Rank correlation, evaluation reports, ablations and embedding projection.

mod ablation;
mod kendall;
mod pca;
mod report;

pub use ablation::{
    ablation_grid, ablation_mixer_orders, ablation_tsv, cell_config, run_cell, spread, AblationRow, DecoderVariant,
};
pub use kendall::{
    kendall_tau, kendall_tau_scores, pair_counts, pair_counts_brute_force, PairCounts, TauMode,
};
pub use pca::{pca_project_2d, pca_text, principal_directions};
pub use report::{
    evaluate, evaluate_scores, rank_graph, ranking_text, run_seed, DatasetSummary, EvalReport, EvalRow,
    RankingResult,
};
