mod common;
mod reference;
mod solve;
mod sweep;
mod verify;

pub use common::{Manifest, RunReport};
pub use reference::cmd_reference;
pub use solve::cmd_solve;
pub use sweep::cmd_sweep;
pub use verify::cmd_verify;
