use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{ScenarioError, TransmissionNetwork};

/// DC power transfer distribution factors against the slack node.
/// `x[l][n]` is the flow on line `l` (from → to) per MW injected at node `n`
/// and withdrawn at the slack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GsfMatrix {
    pub nodes: Vec<String>,
    pub lines: Vec<(String, String)>,
    pub x: Vec<Vec<f64>>,
}

impl GsfMatrix {
    /// Line flows for a nodal injection vector (ordered as `nodes`).
    pub fn flows(&self, injections: &[f64]) -> Vec<f64> {
        self.x
            .iter()
            .map(|row| row.iter().zip(injections).map(|(a, p)| a * p).sum())
            .collect()
    }
}

pub fn compute_gsf(t: &TransmissionNetwork) -> Result<GsfMatrix, ScenarioError> {
    let idx = t.node_index();
    let n = t.nodes.len();
    let slack = idx
        .get(t.slack_node())
        .copied()
        .ok_or(ScenarioError::SingularSusceptance)?;
    // reduced index: every node except the slack
    let red: Vec<Option<usize>> = (0..n)
        .map(|i| match i.cmp(&slack) {
            std::cmp::Ordering::Less => Some(i),
            std::cmp::Ordering::Equal => None,
            std::cmp::Ordering::Greater => Some(i - 1),
        })
        .collect();
    let m = n - 1;
    let mut b = DMatrix::<f64>::zeros(m, m);
    let mut ends = Vec::with_capacity(t.lines.len());
    for l in &t.lines {
        let (i, j) = (idx[l.from.as_str()], idx[l.to.as_str()]);
        ends.push((i, j));
        let y = 1.0 / l.x;
        if let Some(a) = red[i] {
            b[(a, a)] += y;
        }
        if let Some(c) = red[j] {
            b[(c, c)] += y;
        }
        if let (Some(a), Some(c)) = (red[i], red[j]) {
            b[(a, c)] -= y;
            b[(c, a)] -= y;
        }
    }
    let binv = if m > 0 {
        let inv = b
            .clone()
            .lu()
            .try_inverse()
            .ok_or(ScenarioError::SingularSusceptance)?;
        // a disconnected graph may still produce a numerically "invertible" matrix
        let err = (&b * &inv - DMatrix::<f64>::identity(m, m)).abs().max();
        if !(err < 1e-6) {
            return Err(ScenarioError::SingularSusceptance);
        }
        inv
    } else {
        b
    };
    let theta = |node: usize, inj: usize| -> f64 {
        match (red[node], red[inj]) {
            (Some(a), Some(c)) => binv[(a, c)],
            _ => 0.0,
        }
    };
    let x = t
        .lines
        .iter()
        .zip(&ends)
        .map(|(l, &(i, j))| (0..n).map(|k| (theta(i, k) - theta(j, k)) / l.x).collect())
        .collect();
    Ok(GsfMatrix {
        nodes: t.nodes.clone(),
        lines: t.lines.iter().map(|l| (l.from.clone(), l.to.clone())).collect(),
        x,
    })
}
