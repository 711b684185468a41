//! Domain-adaptation trainers: gradient reversal (DANN), MMD penalty (DDC)
//! and a source-only baseline.
//!
//! DDC's objective is class cross-entropy plus `alpha * MMD²` between source
//! and target features of the shared extractor; no adversarial confusion
//! term is involved.

pub mod mmd;
pub mod moons;
pub mod schedule;
pub mod steps;
pub mod trainer;

pub use mmd::{compute_mmd, mmd_squared, mmd_squared_with_grad, MmdGrad, MmdKernel};
pub use moons::{moons_domains, rotate_points, two_moons};
pub use schedule::{lambda_schedule, LambdaSchedule};
pub use steps::{dann_step, ddc_step, source_only_step, StepLosses};
pub use trainer::{accuracy, no_hook, train, train_source_only, EpochHook, EpochRecord, Method, TrainConfig, TrainHistory};
