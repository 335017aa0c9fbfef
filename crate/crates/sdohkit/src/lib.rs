//! # sdohkit
//!
//! A desk-scale workbench for extracting social determinants of health
//! (SDoH) from clinical notes and auditing the extraction end to end:
//! note filtering, section and sentence segmentation, two multilabel
//! classification tasks over six SDoH categories, synthetic-sentence
//! generation with demographic-injection pairing, pluggable classifier
//! backends, and a full evaluation suite (F1/macro-F1, agreement,
//! ablation, bias statistics, patient-level Z-code comparison).
//!
//! Every major capability has a runnable example under `examples/`; see
//! the README for the tour. The `sdohkit` binary exposes the same
//! pipeline as subcommands.

pub mod bias;
pub mod classify;
pub mod cli;
pub mod corpus;
pub mod demo;
pub mod evalkit;
pub mod report;
pub mod schema;
pub mod segment;
pub mod synthgen;

pub use corpus::{
    count_tokens, filter_notes, load_notes, split_dataset, AuthorRole, FilterPolicy, Note,
    NoteCollection, Split, SplitAssignment,
};
pub use schema::{
    is_adverse, map_zcode, parse_label_token, project, Annotation, AnnotationPair, Attribute,
    Category, LabelSet, Task, ZCodeMap,
};
pub use segment::{
    attach_sections, sectionize, segment_note, segment_sentences, AbbreviationLexicon,
    HeaderLexicon, Section, SentenceSpan,
};
