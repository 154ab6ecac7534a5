//! Doc-test harness for the guide: each chapter of `book/src` is compiled as
//! the docs of one module, so `cargo test` runs every snippet.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/grids.md")]
pub mod grids {}
#[doc = include_str!("../../../book/src/operator.md")]
pub mod operator {}
#[doc = include_str!("../../../book/src/eigenproblem.md")]
pub mod eigenproblem {}
#[doc = include_str!("../../../book/src/rearrangement.md")]
pub mod rearrangement {}
#[doc = include_str!("../../../book/src/optimization.md")]
pub mod optimization {}
#[doc = include_str!("../../../book/src/polarization.md")]
pub mod polarization {}
#[doc = include_str!("../../../book/src/symmetry.md")]
pub mod symmetry {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
