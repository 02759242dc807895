//! FedAvg simulation: client datasets, local update rules (plain and DP-SGD),
//! the server round loop with wiretaps and an adversary hook, and the
//! eavesdropped message logs.

mod config;
mod dataset;
mod local;
mod log;
mod server;

pub use config::{ClientWeighting, DefenseConfig, FlConfig, Participation};
pub use dataset::ClientDataset;
pub use local::{clip_gradient, dp_batch_gradient, local_update, local_update_dpsgd, local_update_fedavg};
pub use log::{MessageEntry, MessageLog, Phase};
pub use server::{aggregate, run_training, AdversaryHook, FederatedTrainer, TrainingOutcome};
