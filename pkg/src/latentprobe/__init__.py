"""latentprobe: disentangled VAEs for tabular data, plus the probes that
measure how cleanly their latent dimensions separate.

The library trains small fully-connected VAEs under one of six objectives,
then quantifies latent structure three ways: output variance under latent
traversals, block-sparse regression of posterior means onto features, and
a pairwise separation index over the resulting association matrices.
Multiple seeded runs are aligned greedily by correlation so results can be
aggregated despite latent permutation. The `latentprobe` command wraps the
same machinery behind `generate`, `run`, `report`, and `compare`.
"""

from .align import (AlignmentMapping, InformativeSplit, MatchInfo, aggregate_aligned,
                    apply_mapping, greedy_align, split_informative)
from .assoc import AssociationMatrix, parse_csv_text
from .config import (DatasetSource, ExperimentConfig, config_from_dict, config_to_dict,
                     load_config, override_config, save_config)
from .datagen import (PRESETS, FactorGroundTruth, Standardization, TabularDataset,
                      gen_fa, gen_preset, load_csv, load_dataset_dir, preset,
                      write_dataset)
from .dbsr import (DbsrResult, DirtyModelProblem, DirtySolution, dbsr_ls,
                   dirty_objective, dirty_solve, project_l1_ball, prox_l1,
                   prox_linf_row)
from .errors import (BundleError, ConfigError, DataError, LatentprobeError,
                     TrainingDivergence)
from .metrics import (FdrReport, KlSummary, LsdiReport, ScoreReport, higgins_score,
                      informative_fdr, kl_summary, lsdi)
from .pipeline import RunBundle, load_bundle, load_run_model, run_experiment
from .report import compare_text, heatmap_svg, render_report, summary_text
from .traversal import (TraversalSpec, cvae_quality_traversal, fvh_lt_aggregate,
                        fvh_lt_run, traverse_dimension)
from .vae import (CvaeSpec, ObjectiveSpec, PosteriorStats, TrainedVae, decode,
                  encode, gaussian_kl_per_dim, load_checkpoint, objective_value,
                  posterior_stats, save_checkpoint, tc_discriminator_loss,
                  train_vae)

__version__ = "0.1.0"

__all__ = [
    "AlignmentMapping", "AssociationMatrix", "BundleError", "ConfigError",
    "CvaeSpec", "DataError", "DatasetSource", "DbsrResult", "DirtyModelProblem",
    "DirtySolution", "ExperimentConfig", "FactorGroundTruth", "FdrReport",
    "InformativeSplit", "KlSummary", "LatentprobeError", "LsdiReport",
    "MatchInfo", "ObjectiveSpec", "PRESETS", "PosteriorStats", "RunBundle",
    "ScoreReport", "Standardization", "TabularDataset", "TrainedVae",
    "TrainingDivergence", "TraversalSpec", "aggregate_aligned", "apply_mapping",
    "compare_text", "config_from_dict", "config_to_dict", "cvae_quality_traversal",
    "dbsr_ls", "decode", "dirty_objective", "dirty_solve", "encode",
    "fvh_lt_aggregate", "fvh_lt_run", "gaussian_kl_per_dim", "gen_fa",
    "gen_preset", "greedy_align", "heatmap_svg", "higgins_score",
    "informative_fdr", "kl_summary", "load_bundle", "load_checkpoint",
    "load_config", "load_csv", "load_dataset_dir", "load_run_model", "lsdi",
    "objective_value", "override_config", "parse_csv_text", "posterior_stats",
    "preset", "project_l1_ball", "prox_l1", "prox_linf_row", "render_report",
    "run_experiment", "save_checkpoint", "save_config", "split_informative",
    "summary_text", "tc_discriminator_loss", "train_vae", "traverse_dimension",
    "write_dataset",
]
