use std::collections::VecDeque;

use thiserror::Error;

use super::{LevelSurface, SingularLocus};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ComponentError {
    #[error("resolution too coarse: initial point {point:?} lies in no crossing cell")]
    ResolutionTooCoarse { point: Vec<f64> },
    #[error("every crossing cell at the initial set meets the singular locus")]
    InitialSetSingular,
}

/// Crossing cells reachable from the initial set without passing through
/// the singular locus.
#[derive(Clone, Debug, PartialEq)]
pub struct Component {
    /// Ordinals of member cells, ascending.
    pub members: Vec<usize>,
    /// Membership flag per crossing ordinal.
    pub contains: Vec<bool>,
    /// Ordinals of the cells that hold initial points.
    pub gamma_cells: Vec<usize>,
    /// Number of crossing cells removed as singular.
    pub removed: usize,
}

impl Component {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

pub fn split_component<T: Scalar>(
    surface: &LevelSurface<T>,
    sigma: &SingularLocus<T>,
    gamma: &[Vec<T>],
) -> Result<Component, ComponentError> {
    let mut removed: Vec<bool> = sigma.fu_sign_change.clone();
    removed.resize(surface.len(), false);
    for p in &sigma.points {
        for k in surface.crossing_cells_at(&p.point) {
            removed[k] = true;
        }
    }

    let mut starts = Vec::new();
    for p in gamma {
        let cells = surface.crossing_cells_at(p);
        if cells.is_empty() {
            return Err(ComponentError::ResolutionTooCoarse {
                point: p.iter().map(|v| v.to_f64_lossy()).collect(),
            });
        }
        starts.extend(cells.into_iter().filter(|&k| !removed[k]));
    }
    starts.sort_unstable();
    starts.dedup();
    if starts.is_empty() {
        return Err(ComponentError::InitialSetSingular);
    }

    let mut contains = vec![false; surface.len()];
    let mut queue: VecDeque<usize> = starts.iter().copied().collect();
    for &s in &starts {
        contains[s] = true;
    }
    while let Some(k) = queue.pop_front() {
        for &m in surface.neighbors(k) {
            if !removed[m] && !contains[m] {
                contains[m] = true;
                queue.push_back(m);
            }
        }
    }
    Ok(Component {
        members: (0..surface.len()).filter(|&k| contains[k]).collect(),
        contains,
        gamma_cells: starts,
        removed: removed.iter().filter(|r| **r).count(),
    })
}
