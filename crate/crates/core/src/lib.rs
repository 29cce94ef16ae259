//! Synthetic workbench for worst-group robustness of regularized multitask
//! linear models.
//!
//! Data comes from [`synthgen`], the model and its constraint projections from
//! [`linmodel`], losses from [`objectives`], and training from [`optim`] and
//! [`baselines`]. [`evalsel`] scores checkpoints per group, [`oracle`] holds
//! closed-form references, and [`experiment`] runs seeded grids and writes
//! artifacts.
//!
//! Runnable walkthroughs live in `examples/`:
//!
//! | example | shows |
//! |---|---|
//! | `generate_data` | sampling the four-group dataset and its file formats |
//! | `bayes_weight` | closed-form vs. sampled Bayes-optimal denoising weight |
//! | `projection` | L1-ball projection and Frobenius normalisation |
//! | `gradient_check` | analytic gradients against central differences |
//! | `end_vs_regmtl` | end-task-only vs. regularized multitask worst-group accuracy |
//! | `aux_log_ratio` | where a reconstruction-only featurizer puts its mass |
//! | `baselines` | ERM, JTT, groupDRO and RegMTL on one dataset |
//! | `pareto_sweep` | a small sweep and its Pareto front |
//! | `bounds` | worst-group error and core-mass bounds |

pub mod baselines;
pub mod error;
pub mod evalsel;
pub mod experiment;
pub mod linmodel;
pub mod objectives;
pub mod optim;
pub mod oracle;
pub mod seeding;
pub mod synthgen;

pub use error::{Error, Result};
pub use evalsel::{evaluate, GroupMetrics, SelectionStrategy};
pub use linmodel::{InitConfig, ModelParams};
pub use objectives::LossWeights;
pub use optim::{OptimConfig, Projection, TrainTrace};
pub use synthgen::{AuxDataset, GroupDataSpec, LabeledDataset};
