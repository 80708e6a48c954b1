//! Interface coupling: extraction operators, penalty terms and the global
//! semi-discrete system `dE/dt = A_E H − ΣE`, `dH/dt = A_H E`.

mod extraction;
mod penalties;
mod sat;
mod system;

pub use extraction::{build_extraction_ops, selection_matrix, ExtractionOps, SideExtraction};
pub use penalties::{default_penalties, SatConfig, SidePenalties};
pub use sat::{assemble_embedded_sats, assemble_outer_sats, SatBlock, SatTarget};
pub use system::{assemble_global_system, GlobalLayout, GlobalSystem, SatBlockInfo, SystemInputs};
