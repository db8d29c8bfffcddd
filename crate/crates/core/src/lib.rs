//! Sampling-and-prediction toolkit for bilevel network design with many
//! followers, instantiated on the maximum-accessibility cycling network
//! design problem.

pub mod embed;
pub mod harness;
pub mod lpcore;
pub mod netcore;
pub mod optimize;
pub mod predict;
pub mod routing;
pub mod sampler;
pub mod util;

pub use netcore::{generate_synthetic, load_instance, save_instance, GridParams, Network};
pub use routing::{Budget, Design, ImpedanceSpec};
