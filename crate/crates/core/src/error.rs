//! Error type shared across the crate.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub type Result<T> = core::result::Result<T, CoreError>;

#[derive(Debug, Clone, PartialEq)]
pub enum CoreError {
    /// Operand shapes are incompatible for a tensor operation.
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    /// A token, label or action id lies outside its vocabulary.
    IdOutOfRange {
        what: &'static str,
        id: usize,
        size: usize,
    },
    /// An operation received an empty input it cannot handle.
    EmptyInput(&'static str),
    /// Pop on an empty stack.
    StackUnderflow,
    /// A transition was applied in a state where it is not legal.
    IllegalTransition { step: usize, detail: &'static str },
    /// No action is legal in a non-terminal state (internal invariant).
    NoLegalAction { step: usize },
    /// Gold supervision does not match the sentence it annotates.
    Supervision {
        detail: &'static str,
        expected: usize,
        found: usize,
    },
    /// The dependency tree cannot be linearized by arc-standard transitions.
    NonProjective,
    /// Malformed parse-file content.
    Parse { line: usize, message: String },
    /// A value that must be finite is NaN or infinite.
    NonFinite { context: String },
    /// Invalid configuration value.
    Config(String),
    /// Malformed or incompatible checkpoint bytes.
    Checkpoint(String),
    /// Two line-aligned inputs differ in length.
    Misaligned {
        what: &'static str,
        left: usize,
        right: usize,
    },
    /// A parameter slot name was registered twice.
    DuplicateParameter(String),
    /// A parameter slot name is missing from the store.
    UnknownParameter(String),
}

impl fmt::Display for CoreError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoreError::ShapeMismatch { op, left, right } => {
                write!(f, "shape mismatch in {op}: {left:?} vs {right:?}")
            }
            CoreError::IdOutOfRange { what, id, size } => {
                write!(f, "{what} id {id} out of range (size {size})")
            }
            CoreError::EmptyInput(what) => write!(f, "empty input to {what}"),
            CoreError::StackUnderflow => write!(f, "pop on empty stack"),
            CoreError::IllegalTransition { step, detail } => {
                write!(f, "illegal transition at step {step}: {detail}")
            }
            CoreError::NoLegalAction { step } => {
                write!(f, "no legal action in non-terminal state at step {step}")
            }
            CoreError::Supervision {
                detail,
                expected,
                found,
            } => write!(
                f,
                "supervision mismatch: {detail} (expected {expected}, found {found})"
            ),
            CoreError::NonProjective => write!(f, "non-projective dependency tree"),
            CoreError::Parse { line, message } => {
                write!(f, "parse error at line {line}: {message}")
            }
            CoreError::NonFinite { context } => write!(f, "non-finite value in {context}"),
            CoreError::Config(msg) => write!(f, "invalid configuration: {msg}"),
            CoreError::Checkpoint(msg) => write!(f, "checkpoint error: {msg}"),
            CoreError::Misaligned { what, left, right } => {
                write!(f, "misaligned {what}: {left} lines vs {right} lines")
            }
            CoreError::DuplicateParameter(name) => {
                write!(f, "parameter slot registered twice: {name}")
            }
            CoreError::UnknownParameter(name) => write!(f, "unknown parameter slot: {name}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for CoreError {}
