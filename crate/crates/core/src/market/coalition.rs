use std::fmt;

use serde::{Deserialize, Serialize};

use super::MarketError;
use crate::scenario::Scenario;

pub const TSO: &str = "TSO";

/// Player list: the TSO first, then DSO ids in sorted order. Player `i`
/// is bit `i` of a [`Coalition`] mask.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Players {
    pub ids: Vec<String>,
}

impl Players {
    pub fn from_scenario(s: &Scenario) -> Players {
        let mut ids = vec![TSO.to_string()];
        ids.extend(s.sorted_dsos().iter().map(|d| d.id.clone()));
        Players { ids }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn index(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|p| p == id)
    }

    pub fn grand(&self) -> Coalition {
        Coalition((1u32 << self.len()) - 1)
    }

    pub fn singleton(&self, id: &str) -> Result<Coalition, MarketError> {
        self.index(id)
            .map(|i| Coalition(1 << i))
            .ok_or_else(|| MarketError::UnknownMember(id.to_string()))
    }

    /// Parses a comma separated member list such as `TSO,dso2`.
    pub fn parse(&self, text: &str) -> Result<Coalition, MarketError> {
        let mut mask = 0u32;
        for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let i = if part.eq_ignore_ascii_case(TSO) {
                0
            } else {
                self.index(part)
                    .ok_or_else(|| MarketError::UnknownMember(part.to_string()))?
            };
            mask |= 1 << i;
        }
        if mask == 0 {
            return Err(MarketError::EmptyCoalition);
        }
        Ok(Coalition(mask))
    }

    pub fn members(&self, c: Coalition) -> Vec<&str> {
        c.indices().map(|i| self.ids[i].as_str()).collect()
    }

    pub fn label(&self, c: Coalition) -> String {
        self.members(c).join("+")
    }
}

/// Bitmask over [`Players`]; the TSO is bit 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Coalition(pub u32);

impl Coalition {
    pub fn contains(self, i: usize) -> bool {
        self.0 >> i & 1 == 1
    }

    pub fn has_tso(self) -> bool {
        self.contains(0)
    }

    pub fn size(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn with(self, i: usize) -> Coalition {
        Coalition(self.0 | 1 << i)
    }

    pub fn without(self, i: usize) -> Coalition {
        Coalition(self.0 & !(1 << i))
    }

    pub fn is_subset_of(self, other: Coalition) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn indices(self) -> impl Iterator<Item = usize> {
        (0..32).filter(move |&i| self.contains(i))
    }
}

impl fmt::Display for Coalition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        let v: Vec<String> = self.indices().map(|i| i.to_string()).collect();
        write!(f, "{}}}", v.join(","))
    }
}
