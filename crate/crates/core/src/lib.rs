//! Topic-specific sentence dataset construction: Wikipedia link traversal
//! with Normalized Google Distance, keyword and naive Bayes classifiers, a
//! dual-query active learner, evaluation utilities and an event-sourced
//! labeling session store.

pub mod active;
pub mod corpus;
pub mod eval;
pub mod guidelines;
pub mod keywords;
pub mod label;
pub mod link_index;
pub mod nb;
pub mod ngd;
pub mod session;
pub mod text;

pub use label::Label;
