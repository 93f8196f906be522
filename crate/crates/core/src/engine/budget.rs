//! Message size accounting against the logarithmic per-message budget.
//!
//! A message is a 2-bit tag followed by fixed-width fields, each
//! `ceil(log2(max(n, horizon) + 1))` bits wide. The budget admits one
//! `(round, uid)` descriptor.

use thiserror::Error;

use crate::dyngraph::Round;
use crate::protocol::Message;

const TAG_BITS: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("message needs {bits} bits but the budget is {budget}")]
pub struct BudgetViolation {
    pub bits: u32,
    pub budget: u32,
}

/// Bits per field: enough for any round below the horizon and any UID.
pub fn field_width(n: usize, horizon: Round) -> u32 {
    let max = (n as u64).max(horizon);
    u64::BITS - max.leading_zeros()
}

pub fn budget_bits(n: usize, horizon: Round) -> u32 {
    2 * field_width(n, horizon) + TAG_BITS
}

/// Size of a tagged payload made of `fields`; any field wider than the
/// slot width is a violation even if the total would fit.
pub fn payload_bits(fields: &[u64], n: usize, horizon: Round) -> Result<u32, BudgetViolation> {
    let width = field_width(n, horizon);
    let budget = budget_bits(n, horizon);
    let mut bits = TAG_BITS;
    let mut overflow = false;
    for &f in fields {
        let need = u64::BITS - f.leading_zeros();
        overflow |= need > width;
        bits += need.max(width);
    }
    if overflow || bits > budget {
        Err(BudgetViolation { bits, budget })
    } else {
        Ok(bits)
    }
}

pub fn check_message_budget(m: &Message, n: usize, horizon: Round) -> Result<u32, BudgetViolation> {
    match m {
        Message::Queue(q) => payload_bits(&[q.init_round, q.origin as u64], n, horizon),
        Message::Cancel(t) => payload_bits(&[*t as u64], n, horizon),
        Message::Terminate | Message::Empty => payload_bits(&[], n, horizon),
    }
}
