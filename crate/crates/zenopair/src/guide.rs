//! Narrative guide, mirrored from the book in `book/` so the snippets run as
//! doc-tests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/hamiltonian.md")]
pub mod hamiltonian {}

#[doc = include_str!("../../../book/src/spectrum.md")]
pub mod spectrum {}

#[doc = include_str!("../../../book/src/dynamics.md")]
pub mod dynamics {}

#[doc = include_str!("../../../book/src/transport.md")]
pub mod transport {}

#[doc = include_str!("../../../book/src/experiment.md")]
pub mod experiment {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
