//! The narrative guide. Chapters live in `book/` (rendered with mdbook);
//! including them here compiles every code block as a doctest, so the
//! book and the library cannot drift apart.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/tensor-group.md")]
pub mod tensor_group {}

#[doc = include_str!("../../../book/src/signatures.md")]
pub mod signatures {}

#[doc = include_str!("../../../book/src/lifts.md")]
pub mod lifts {}

#[doc = include_str!("../../../book/src/rde.md")]
pub mod rde_solving {}

#[doc = include_str!("../../../book/src/averaging.md")]
pub mod averaging_scheme {}

#[doc = include_str!("../../../book/src/chain-rule.md")]
pub mod chain_rule {}

#[doc = include_str!("../../../book/src/moment-ratios.md")]
pub mod moment_ratios {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
