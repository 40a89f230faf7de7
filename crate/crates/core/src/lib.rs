//! Wi-Fi / unlicensed-LTE coexistence library.
//!
//! Propagation and energy-detection analytics, the 802.11 DCF and LTE
//! listen-before-talk state machines, the pseudo-beacon codec used to relay
//! LTE cell information to Wi-Fi networks, channel selection and adaptive
//! ED thresholding, and a deterministic discrete-event simulator tying them
//! together.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coordination;
pub mod error;
pub mod mac_lte;
pub mod mac_wifi;
pub mod node;
pub mod presets;
pub mod propagation;
pub mod relay;
pub mod report;
pub mod sensing;
pub mod sim;

pub use error::{Error, Result};
pub use node::{Node, Role, Tech};
pub use propagation::{Building, Position, PropagationModel};
pub use relay::{Beacon, CellInfo, MacSpec, NodeType, ScanEntry, ScanSource};
pub use sim::{Metrics, SimConfig};
