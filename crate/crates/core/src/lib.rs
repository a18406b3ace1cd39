//! Critically sampled matrix-vector simulation of OSTF, OTFS, OSTF-U and OFDM
//! signaling over doubly dispersive multipath channels, with linear MMSE
//! reception and Monte Carlo link-level evaluation.

pub mod channel;
pub mod cli;
pub mod dft;
pub mod grid;
pub mod modulation;
pub mod montecarlo;
pub mod receiver;

pub use channel::{draw_channel, sample_channel, spreading_function, ChannelRealization, Path, SampledChannel};
pub use grid::{design_grid, ofdm_grid, GridDesign};
pub use modulation::{ModulationBasis, Scheme};
pub use receiver::{CsiMode, LinkMetrics, ReceiverState};
pub use montecarlo::{run_campaign, run_trial, AggregateResult, ScenarioConfig, System, TrialResult};
