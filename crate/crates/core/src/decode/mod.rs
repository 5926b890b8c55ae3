//! Constrained beam search over a pluggable next-token scorer.
//!
//! [`Vocabulary`] fixes the token set, [`Grammar`] turns a partial token
//! sequence into the set of tokens that keep it a well-formed logical form
//! over the catalog, and [`beam_search`] combines both with any
//! [`TokenScorer`].

mod beam;
mod external;
mod grammar;
mod scorers;
mod trie;
mod vocab;

use thiserror::Error;

use crate::retrieve::ScorerError;

pub use beam::{beam_search, sequence_nll, BeamConfig, Hypothesis};
pub use external::ExternalTokenScorer;
pub use grammar::{Category, Grammar, GrammarState};
pub use scorers::{
    corpus_forms, DecodeContext, NgramScorer, OracleMixtureScorer, OracleTarget, OracleTargets, TokenScorer,
    UniformScorer,
};
pub use trie::TokenTrie;
pub use vocab::{
    literal_pieces, schema_pieces, TokenId, VocabBuilder, Vocabulary, BOS, COMMA, ELFS, ENTITIES, EOS, LPAREN,
    NUMBER_TAGS, RPAREN, SCHEMA, SEMI, SPACE, UNK,
};

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error("`{0}` cannot be tokenized: names must be non-empty without whitespace or parentheses")]
    Untokenizable(String),
    #[error("token `{token}` of `{item}` is not in the vocabulary")]
    UnknownToken { token: String, item: String },
    #[error("constrained decoding needs a grammar")]
    MissingGrammar,
    #[error("invalid decoder data: {0}")]
    Data(String),
    #[error(transparent)]
    Scorer(#[from] ScorerError),
}
