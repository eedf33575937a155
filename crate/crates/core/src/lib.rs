//! Converts annotated transactional dialogs into reading-comprehension task
//! datasets over slot states, and trains a multi-hop end-to-end memory
//! network to answer them, with exact from-scratch gradients.

pub mod corpus;
pub mod eval;
pub mod matrix;
pub mod model;
pub mod parallel;
pub mod training;
pub mod taskgen;
