//! Procedural brain phantoms and closed-form MR scan simulation.

mod anatomy;
pub mod io;
mod protocol;
mod scan;
mod tissue;

pub use anatomy::{brain_tissue_fractions, generate_phantom, TissueLabelMap, MIN_PHANTOM_DIM};
pub use protocol::{load_protocols, AcquisitionProtocol, ProtocolFile};
pub use scan::{signal, simulate_scan, ScanImage, ScannerId};
pub use tissue::{RelaxationEntry, TissueId, BRAIN_TISSUES};
