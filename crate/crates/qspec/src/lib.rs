//! Quantitative specification theory over structured labels.
//!
//! The crate provides three behavioral specification formalisms over a common
//! universe of labeled transition systems — disjunctive modal transition
//! systems ([`model::Dmts`]), acceptance automata ([`model::Aa`]) and the
//! modal nu-calculus in normal form ([`model::NuExpr`]) — together with
//!
//! * a structured-label algebra (refinement preorder, partial conjunction,
//!   partial synchronization, label distances, residuals) in [`labels`],
//! * structural translations between the formalisms and embeddings of plain
//!   transition systems in [`model`],
//! * Boolean modal refinement, fixed-point model checking and desk-scale
//!   thorough-refinement oracles in [`refine`],
//! * the compositional operators disjunction, conjunction, structural
//!   composition and quotient in [`ops`],
//! * refinement distances over recursively specified trace metrics
//!   (discrete, point-wise, discounting) in [`quant`], and
//! * a text/JSON front end and command-line driver in [`cli`].
//!
//! Systems are immutable after construction and every operation is a pure
//! function, so values can be shared freely across threads.

pub mod cli;
pub mod labels;
pub mod model;
pub mod ops;
pub mod quant;
pub mod refine;

/// Errors shared across the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A label does not belong to the label structure it was used with, or
    /// two labels of incompatible kinds were combined.
    #[error("label kind mismatch: {0}")]
    KindMismatch(String),
    /// Two systems were combined that do not live over the same structure,
    /// or over different formalisms where one was required.
    #[error("structure mismatch: {0}")]
    StructureMismatch(String),
    /// A well-formedness check failed; the message names the offender.
    #[error("invalid {what}: {message}")]
    Invalid { what: String, message: String },
    /// The requested operation is not supported for the given combination
    /// of label kind, synchronization operator or system shape.
    #[error("unsupported: {0}")]
    Capability(String),
    /// A configurable resource budget was exceeded.
    #[error("budget exceeded: {0}")]
    Budget(String),
    /// A parse error in the textual or JSON specification format.
    #[error("parse error at {line}:{col}: {message}")]
    Parse { line: usize, col: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(what: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Invalid { what: what.into(), message: message.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
