use std::fmt;

use thiserror::Error;

/// One problem found while validating a presheaf, morphism, shape or diagram.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationIssue {
    /// Where the problem sits, e.g. `op s, element e` or `edge d, sort V`.
    pub location: String,
    pub message: String,
}

/// An ordered list of validation issues. Empty means valid.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, location: impl Into<String>, message: impl Into<String>) {
        self.issues.push(ValidationIssue {
            location: location.into(),
            message: message.into(),
        });
    }

    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn len(&self) -> usize {
        self.issues.len()
    }

    pub fn extend(&mut self, other: ValidationReport) {
        self.issues.extend(other.issues);
    }

    pub fn into_result(self) -> Result<(), ValidationReport> {
        if self.is_empty() {
            Ok(())
        } else {
            Err(self)
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (n, issue) in self.issues.iter().enumerate() {
            if n > 0 {
                writeln!(f)?;
            }
            write!(f, "{}: {}", issue.location, issue.message)?;
        }
        Ok(())
    }
}

impl std::error::Error for ValidationReport {}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input:\n{0}")]
    Invalid(#[from] ValidationReport),
    #[error("presheaves live over different base signatures")]
    SignatureMismatch,
    #[error("morphisms do not share a codomain")]
    CodomainMismatch,
    #[error("morphisms are not composable")]
    NotComposable,
    #[error("relation is not compatible with op {op}: {left} ~ {right} but their images differ")]
    IncompatibleRelation { op: String, left: String, right: String },
    #[error("shape has a directed cycle")]
    DirectedCycle,
    #[error("cycle enumeration exceeded the cap of {cap} cycles")]
    CycleOverflow { cap: usize },
    #[error("path endpoints do not match")]
    EndpointMismatch,
    #[error("cocone is not commutative: {0}")]
    NotCommutative(String),
    #[error("transformation is not cartesian: {0}")]
    NotCartesian(String),
    #[error("typing does not target the cocone apex")]
    ApexMismatch,
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("path enumeration budget of {0} steps exhausted")]
    BudgetExhausted(u64),
    #[error("{0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
