//! Prior-weighted UCB child selection.

use crate::scalar::Real;

/// `mean + c * prior * sqrt(ln(parent_visits) / visits)`; unvisited children
/// score `+inf`.
pub fn pucb_score<T: Real>(mean: T, prior: T, visits: u64, parent_visits: u64, c: T) -> T {
    if visits == 0 {
        return T::infinity();
    }
    let ln_n = T::of(parent_visits.max(1) as f64).ln();
    mean + c * prior * (ln_n / T::of(visits as f64)).sqrt()
}

/// Statistics of one child as seen by the selection rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChildStats<T> {
    pub mean: T,
    pub prior: T,
    pub visits: u64,
}

/// Index of the highest-scoring child; the first unvisited child wins
/// outright, and ties go to the lowest index.
pub fn pucb_argmax<T: Real>(children: &[ChildStats<T>], parent_visits: u64, c: T) -> Option<usize> {
    if let Some(i) = children.iter().position(|ch| ch.visits == 0) {
        return Some(i);
    }
    let mut best: Option<(usize, T)> = None;
    for (i, ch) in children.iter().enumerate() {
        let s = pucb_score(ch.mean, ch.prior, ch.visits, parent_visits, c);
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((i, s));
        }
    }
    best.map(|(i, _)| i)
}
