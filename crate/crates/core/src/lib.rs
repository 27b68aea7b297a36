//! Transmit power of cache-aided delivery over a degraded Gaussian broadcast
//! channel.
//!
//! Users `1..=K` are ordered from weakest to strongest channel. Each caches
//! `M` files' worth of a library of `N` files of rate `R`, then requests one
//! file. The crate evaluates the power needed by centralized and
//! decentralized coded-caching schemes with superposition-coded delivery,
//! averaged over demands and for the worst demand, together with lower bounds
//! for uncoded placement. A bit-exact simulator checks that the centralized
//! XOR delivery lets every user decode.

pub mod bounds;
pub mod combinatorics;
pub mod delivery;
pub mod error;
pub mod model;
pub mod power;
pub mod runspec;
pub mod schemes;
pub mod sweep;

pub use bounds::{gaps, lower_bound_average, lower_bound_peak, BoundPoint};
pub use combinatorics::{enumerate_classes, ClassWeight, UserSet};
pub use delivery::{verify_delivery, CodedPacket, DeliveryReport, SubfileId};
pub use error::{Error, Result};
pub use model::{leader_set, validate_config, DemandClass, DemandVector, SystemConfig};
pub use power::{average_power, class_power, min_power, peak_power, PeakMethod, PowerResult, TradeoffPoint};
pub use runspec::{parse_spec, RunSpec};
pub use schemes::{RateVector, Scheme};
pub use sweep::{run_sweep, run_verify};
