//! Exhaustive search over every protocol of a black-box task.

use serde::{Deserialize, Serialize};

use crate::envs::BlackBox;
use crate::error::{Error, Result};

/// Largest search space the oracle will enumerate.
pub const MAX_SEARCH_SPACE: u128 = 1 << 24;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub protocol: Vec<usize>,
    pub fidelity: f64,
    pub evaluated: u64,
}

/// Number of protocols, `|A|^N`, or `None` on overflow.
pub fn search_space_size(actions: usize, horizon: usize) -> Option<u128> {
    let horizon = u32::try_from(horizon).ok()?;
    (actions as u128).checked_pow(horizon)
}

/// Evaluates every protocol in lexicographic order and keeps the first one
/// reaching the maximum fidelity.
pub fn exhaustive_search<E: BlackBox + ?Sized>(env: &E) -> Result<OracleResult> {
    let actions = env.action_space().total_actions();
    let horizon = env.horizon();
    let size = search_space_size(actions, horizon);
    match size {
        Some(s) if s <= MAX_SEARCH_SPACE => {}
        _ => {
            return Err(Error::SearchSpaceError {
                actions,
                horizon,
                limit: MAX_SEARCH_SPACE as u64,
            })
        }
    }
    if actions == 0 || horizon == 0 {
        return Err(Error::EmptySetError("protocol search space"));
    }

    let mut protocol = vec![0usize; horizon];
    let mut best = OracleResult {
        protocol: protocol.clone(),
        fidelity: f64::NEG_INFINITY,
        evaluated: 0,
    };
    loop {
        let f = env.evaluate(&protocol)?;
        best.evaluated += 1;
        if f > best.fidelity {
            best.fidelity = f;
            best.protocol.copy_from_slice(&protocol);
        }
        // Odometer increment, last position fastest.
        let mut i = horizon;
        loop {
            if i == 0 {
                return Ok(best);
            }
            i -= 1;
            protocol[i] += 1;
            if protocol[i] < actions {
                break;
            }
            protocol[i] = 0;
        }
    }
}
