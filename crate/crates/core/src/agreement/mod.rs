//! Inter-annotator agreement: mean pairwise percent agreement, Fleiss' kappa
//! and Randolph's free-marginal kappa over an items × categories count table.
//!
//! Every statistic is first formed as an exact integer ratio and divided once,
//! so identical rationals give identical floats and the ordering between the
//! two kappas is never disturbed by rounding.

mod levels;
mod matrix;
mod table;

use serde::{Deserialize, Serialize};

pub use levels::{per_level_agreement, AgreementLevel, LevelOutcome, LevelReport};
pub use matrix::{binary_labels, binary_projection, build_matrix, BuiltMatrix, ExcludedItem, Labels, MatrixPolicy, RatingMatrix};
pub use table::render_table;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AgreementError {
    #[error("no items to rate")]
    NoItems,
    #[error("need at least 2 categories, have {0}")]
    TooFewCategories(usize),
    #[error("need at least 2 raters per item, have {0}")]
    TooFewRaters(u32),
    #[error("row {row} sums to {sum}, expected {expected}")]
    RowSum { row: usize, sum: u32, expected: u32 },
    #[error("row {row} has {got} cells, expected {expected}")]
    RowWidth { row: usize, got: usize, expected: usize },
    #[error("items without the modal rater count ({modal}): {items:?}")]
    IncompleteItems { modal: u32, items: Vec<String> },
    #[error(transparent)]
    Scheme(#[from] crate::scheme::SchemeError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub items: usize,
    pub raters: u32,
    pub categories: Vec<String>,
    pub percent: f64,
    /// `None` when every rating falls in one category.
    pub fleiss_kappa: Option<f64>,
    pub randolph_kappa: f64,
    /// Share of all ratings per category, aligned with `categories`.
    pub marginals: Vec<f64>,
}

fn gcd(mut a: i128, mut b: i128) -> i128 {
    (a, b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// num / den after cancelling common factors.
fn ratio(num: i128, den: i128) -> f64 {
    let g = gcd(num, den).max(1);
    (num / g) as f64 / (den / g) as f64
}

/// Integer building blocks shared by the three statistics.
struct Sums {
    /// Σ_i Σ_j n_ij (n_ij − 1)
    agreeing_pairs: i128,
    /// N · n · (n − 1)
    all_pairs: i128,
    /// Σ_j (column total)²
    col_sq: i128,
    /// (N · n)²
    total_sq: i128,
    k: i128,
}

impl Sums {
    fn of(m: &RatingMatrix) -> Sums {
        let n = m.raters() as i128;
        let big_n = m.items().len() as i128;
        let agreeing_pairs = m.rows().iter().flatten().map(|&c| c as i128 * (c as i128 - 1)).sum();
        let col_sq = m.column_totals().iter().map(|&c| c as i128 * c as i128).sum();
        Sums {
            agreeing_pairs,
            all_pairs: big_n * n * (n - 1),
            col_sq,
            total_sq: (big_n * n) * (big_n * n),
            k: m.categories().len() as i128,
        }
    }
}

/// Mean over items of the share of agreeing rater pairs.
pub fn percent_agreement(m: &RatingMatrix) -> f64 {
    let s = Sums::of(m);
    ratio(s.agreeing_pairs, s.all_pairs)
}

/// Fleiss' kappa with chance agreement Σ p_j². `None` when that chance term
/// is 1, i.e. all ratings share a single category.
pub fn fleiss_kappa(m: &RatingMatrix) -> Option<f64> {
    let s = Sums::of(m);
    if s.col_sq == s.total_sq {
        return None;
    }
    // (P − Pe) / (1 − Pe) with P = a/b and Pe = c/t.
    let num = s.agreeing_pairs * s.total_sq - s.col_sq * s.all_pairs;
    let den = s.all_pairs * (s.total_sq - s.col_sq);
    Some(ratio(num, den))
}

/// Randolph's free-marginal kappa with chance agreement 1/k.
pub fn randolph_kappa(m: &RatingMatrix) -> f64 {
    let s = Sums::of(m);
    ratio(s.k * s.agreeing_pairs - s.all_pairs, s.all_pairs * (s.k - 1))
}

pub fn agreement_report(m: &RatingMatrix) -> AgreementReport {
    let total = (m.items().len() as u64 * m.raters() as u64) as f64;
    AgreementReport {
        items: m.items().len(),
        raters: m.raters(),
        categories: m.categories().to_vec(),
        percent: percent_agreement(m),
        fleiss_kappa: fleiss_kappa(m),
        randolph_kappa: randolph_kappa(m),
        marginals: m.column_totals().iter().map(|&c| c as f64 / total).collect(),
    }
}
