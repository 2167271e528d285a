//! Test-only oracles. Nothing here calls into the crates it checks.

pub mod filter_oracle;
pub mod rule_corpus;
