//! Test support: naive reference implementations, random inputs and shared
//! property checks.

pub mod gen;
pub mod oracle;
pub mod props;
