use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    MinLoss,
    MaxScore,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult<P> {
    pub best: P,
    pub best_index: usize,
    pub best_score: f64,
    /// Score of every grid point in grid order.
    pub scores: Vec<f64>,
}

/// Evaluates every grid point and keeps the best by `criterion`; the first
/// point wins ties. NaN scores never win.
pub fn sweep<P, F>(grid: &[P], criterion: Criterion, mut evaluate: F) -> Result<SweepResult<P>>
where
    P: Clone,
    F: FnMut(&P) -> Result<f64>,
{
    if grid.is_empty() {
        return Err(Error::Config("hyperparameter grid is empty".into()));
    }
    let mut scores = Vec::with_capacity(grid.len());
    let mut best: Option<usize> = None;
    for (i, p) in grid.iter().enumerate() {
        let s = evaluate(p)?;
        scores.push(s);
        if s.is_nan() {
            continue;
        }
        let better = match best {
            None => true,
            Some(b) => match criterion {
                Criterion::MinLoss => s < scores[b],
                Criterion::MaxScore => s > scores[b],
            },
        };
        if better {
            best = Some(i);
        }
    }
    let best_index = best.ok_or_else(|| Error::Numeric("every grid point scored NaN".into()))?;
    Ok(SweepResult {
        best: grid[best_index].clone(),
        best_index,
        best_score: scores[best_index],
        scores,
    })
}
