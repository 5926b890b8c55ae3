//! Question answering over a knowledge base with s-expression logical forms.
//!
//! The crate covers the whole non-neural path from question to answer:
//!
//! * [`kb`]: an indexed in-memory triple store with schema catalog and alias table.
//! * [`sexpr`]: the logical-form language (parser, canonical printer, validation).
//! * [`exec`]: set-semantics evaluation, SPARQL compilation and a subset evaluator.
//! * [`enumerate`]: two-hop neighbourhood enumeration of candidate logical forms.
//! * [`retrieve`]: entity linking, schema retrieval and candidate ranking.
//! * [`decode`]: grammar- and trie-constrained beam search over a token scorer.
//! * [`pipeline`]: end-to-end prediction with execution validation, and metrics.
//!
//! Learned components are behind two traits, [`retrieve::Scorer`] for
//! question/candidate pairs and [`decode::TokenScorer`] for next-token
//! distributions, with deterministic baselines and a line protocol for
//! external processes.

pub mod decode;
pub mod enumerate;
pub mod exec;
pub mod fixtures;
pub mod kb;
pub mod pipeline;
pub mod retrieve;
pub mod sexpr;
pub mod text;
