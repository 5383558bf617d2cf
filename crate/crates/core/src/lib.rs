//! Link-level simulation of full-duplex mmWave transceivers with hybrid
//! beamforming.
//!
//! The crate synthesizes the near/far-field self-interference channel
//! between a transceiver's own arrays, designs beamforming-cancellation
//! precoders and combiners under analog-hardware constraints, applies
//! staged analog/digital cancellation models, and reports saturation,
//! power-level, and spectral-efficiency outcomes. The `fdxsim` binary
//! drives batch scenarios from sectioned `key = value` configs and writes
//! deterministic CSV reports.

pub mod array;
pub mod beamforming;
pub mod cancellation;
pub mod channel;
pub mod error;
pub mod link;
pub mod report;
pub mod rng;
pub mod scenario;
pub mod select;
pub mod util;

pub use array::{array_factor, far_field_distance, far_field_response, near_field_response, ArrayGeometry, ArrayKind};
pub use beamforming::{
    design_half_duplex, dft_codebook, codebook_isolation_map, refine_codebook, to_hybrid,
    BeamformerRole, Codebook, HybridBeamformer, PhaseQuantizer, PhaseResolution,
};
pub use cancellation::{
    analog_sic_apply, digital_sic_apply, effective_si_channel, rx_bfc_project,
    tx_bfc_regularized, tx_bfc_zero_forcing, AnalogSicConfig, BfcConfig, BfcStrategy,
    DigitalSicConfig, RankRule, RxBfcMode,
};
pub use channel::{
    assemble_si_channel, far_field_channel, near_field_channel, side_by_side, user_channel,
    ClusteredChannelParams, RigidTransform, SelfInterferenceChannel, UserChannel,
};
pub use error::{Error, Result};
pub use link::{
    levels_report, rate_region_sweep, saturation_powers, spectral_efficiency, DuplexLink,
    LinkBudget, PowerLevelsReport, RatePoint, SicMode, SweepResult,
};
pub use report::{build_link, build_si, run, Subcommand};
pub use scenario::{parse_scenario, Scenario};
pub use select::{select_rx_user, CandidateSet, Selection, SelectionContext, SelectionPolicy, UserScore};
pub use util::{CMat, CVec, C64};
