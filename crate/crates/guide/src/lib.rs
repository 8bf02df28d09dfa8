//! The `book/` chapters, compiled so that every Rust listing runs as a
//! doctest.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/graphs.md")]
pub mod graphs {}

#[doc = include_str!("../../../book/src/weights.md")]
pub mod weights {}

#[doc = include_str!("../../../book/src/edge_lookup.md")]
pub mod edge_lookup {}

#[doc = include_str!("../../../book/src/wire_format.md")]
pub mod wire_format {}

#[doc = include_str!("../../../book/src/transport.md")]
pub mod transport {}

#[doc = include_str!("../../../book/src/engine.md")]
pub mod engine {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
