pub mod asymptotics;
pub mod characteristics;
pub mod defaults;
pub mod error;
pub mod numeric;
pub mod oracle;
pub mod profile;
pub mod shock;

pub use error::{Error, Result};
