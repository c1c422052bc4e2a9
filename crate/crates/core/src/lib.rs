//! Core library for measuring the value consistency of question-answering agents.
//!
//! The pipeline: generate or load a corpus of value-laden questions
//! ([`dataset`], [`genpipeline`]), survey an agent over paraphrases, use
//! cases, and languages ([`client`]), map free-text answers back onto the
//! answer options with judge models ([`judge`]), and score how far the
//! resulting stance distributions drift apart ([`divergence`], [`measures`]).
//! A deterministic synthetic respondent ([`simulator`]) provides a
//! ground-truth harness for the whole stack, and [`steering`] checks how
//! far explicit value instructions move an agent on portrait-style items.

pub mod client;
pub mod dataset;
pub mod divergence;
pub mod genpipeline;
pub mod judge;
pub mod measures;
pub mod report;
pub mod simulator;
pub mod steering;
