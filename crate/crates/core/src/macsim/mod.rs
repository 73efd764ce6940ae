//! Monte-Carlo simulation of the Gaussian MAC and the two-user Gaussian
//! interference channel with exhaustive ML decoding.

pub mod codebook;
pub mod ic;
pub mod mac;
pub mod rng;
pub mod stats;

pub use codebook::{generate_codebook, Codebook, CodebookKind, GaussianMacConfig, DEFAULT_CAP};
pub use ic::{
    choose_anchors, ic_multicast_decoders, identity_ks_test, simulate_ic, AnchorChoice, IcConfig,
    IcSimReport, MulticastDecoders,
};
pub use mac::{
    measure_error_profile, message_size_for_rate, phase_transition_scan, scan_csv,
    simulate_mac_error, MlDecoder, ScanOptions, ScanRow,
};
pub use stats::{KsResult, SimResult};
