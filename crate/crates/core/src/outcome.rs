use serde::{Deserialize, Serialize};

use crate::group::OpCounter;

/// Result of an evaluation together with what it cost.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Evaluation<T> {
    pub transcript: T,
    pub ops: OpCounter,
}

/// A verifier's decision. Malformed input is a rejection with a reason,
/// never an error.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub accept: bool,
    pub ops: OpCounter,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

impl Verdict {
    pub fn accept(ops: OpCounter) -> Self {
        Verdict {
            accept: true,
            ops,
            reason: None,
        }
    }

    pub fn reject(ops: OpCounter, reason: impl Into<String>) -> Self {
        Verdict {
            accept: false,
            ops,
            reason: Some(reason.into()),
        }
    }

    pub(crate) fn decide(accept: bool, ops: OpCounter, reason: &str) -> Self {
        if accept {
            Self::accept(ops)
        } else {
            Self::reject(ops, reason)
        }
    }
}
