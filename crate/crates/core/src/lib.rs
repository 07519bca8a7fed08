//! Text-to-SQL with hardness prompts, plus Spider-style exact-match and
//! execution scoring.
//!
//! The guide under `book/` walks through each module; its code blocks run
//! as doc-tests of this crate.

pub mod catalog;
pub mod eval;
pub mod generate;
pub mod hardness;
pub mod http;
pub mod pipeline;
pub mod prompt;
pub mod refine;
pub mod sql;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/overview.md")]
    mod overview {}
    #[doc = include_str!("../../../book/src/parsing.md")]
    mod parsing {}
    #[doc = include_str!("../../../book/src/hardness.md")]
    mod hardness {}
    #[doc = include_str!("../../../book/src/refinement.md")]
    mod refinement {}
    #[doc = include_str!("../../../book/src/prompts.md")]
    mod prompts {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/pipeline.md")]
    mod pipeline {}
    #[doc = include_str!("../../../book/src/endpoints.md")]
    mod endpoints {}
}
