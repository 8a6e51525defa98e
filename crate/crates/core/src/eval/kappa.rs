//! Fleiss kappa with linear disagreement weights over ordinal categories.

use serde::{Deserialize, Serialize};

use super::EvalError;

/// Items by raters; each cell is an index into `categories`. Items may have
/// different rater counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingsMatrix {
    pub categories: Vec<String>,
    pub ratings: Vec<Vec<usize>>,
}

impl RatingsMatrix {
    pub fn new(categories: Vec<String>, ratings: Vec<Vec<usize>>) -> Result<Self, EvalError> {
        let m = Self {
            categories,
            ratings,
        };
        m.check()?;
        Ok(m)
    }

    /// Ordinal categories named `1..=c`, the four-point fidelity scale by default.
    pub fn numbered(c: usize, ratings: Vec<Vec<usize>>) -> Result<Self, EvalError> {
        Self::new((1..=c).map(|i| i.to_string()).collect(), ratings)
    }

    fn check(&self) -> Result<(), EvalError> {
        let c = self.categories.len();
        if c < 2 {
            return Err(EvalError::TooFewCategories);
        }
        for (item, row) in self.ratings.iter().enumerate() {
            if row.len() < 2 {
                return Err(EvalError::TooFewRaters {
                    item,
                    raters: row.len(),
                });
            }
            if let Some(&value) = row.iter().find(|&&v| v >= c) {
                return Err(EvalError::BadCategory {
                    item,
                    value,
                    categories: c,
                });
            }
        }
        Ok(())
    }

    /// `w_jk = 1 - |j-k|/(C-1)`.
    pub fn weight(&self, j: usize, k: usize) -> f64 {
        1.0 - j.abs_diff(k) as f64 / (self.categories.len() - 1) as f64
    }

    /// Parses CSV with a header row; the first column names the item and
    /// every further cell is a category label.
    pub fn from_csv(text: &str, categories: Vec<String>) -> Result<Self, EvalError> {
        let mut ratings = Vec::new();
        for (n, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .skip(1)
                .map(|cell| {
                    let cell = cell.trim();
                    categories.iter().position(|c| c == cell).ok_or_else(|| EvalError::Ratings {
                        line: n + 1,
                        message: format!("unknown category {cell:?}"),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            ratings.push(row);
        }
        Self::new(categories, ratings)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KappaBand {
    Poor,
    Slight,
    Fair,
    Moderate,
    Substantial,
    AlmostPerfect,
}

impl KappaBand {
    /// Conventional interpretation ranges: below 0 poor, then steps of 0.2.
    pub fn of(kappa: f64) -> Self {
        match kappa {
            k if k < 0.0 => KappaBand::Poor,
            k if k <= 0.20 => KappaBand::Slight,
            k if k <= 0.40 => KappaBand::Fair,
            k if k <= 0.60 => KappaBand::Moderate,
            k if k <= 0.80 => KappaBand::Substantial,
            _ => KappaBand::AlmostPerfect,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            KappaBand::Poor => "poor",
            KappaBand::Slight => "slight",
            KappaBand::Fair => "fair",
            KappaBand::Moderate => "moderate",
            KappaBand::Substantial => "substantial",
            KappaBand::AlmostPerfect => "almost_perfect",
        }
    }
}

fn finish(po: f64, pe: f64) -> Result<(f64, KappaBand), EvalError> {
    if 1.0 - pe < 1e-12 {
        return Err(EvalError::UndefinedKappa);
    }
    let k = if po >= 1.0 { 1.0 } else { (po - pe) / (1.0 - pe) };
    Ok((k, KappaBand::of(k)))
}

/// Weighted kappa from per-item category counts.
pub fn fleiss_kappa(m: &RatingsMatrix) -> Result<(f64, KappaBand), EvalError> {
    m.check()?;
    let c = m.categories.len();
    let mut totals = vec![0.0; c];
    let mut po = 0.0;
    let mut n_all = 0.0;
    for row in &m.ratings {
        let mut counts = vec![0.0; c];
        for &r in row {
            counts[r] += 1.0;
        }
        let n = row.len() as f64;
        let mut agree = 0.0;
        for j in 0..c {
            for k in 0..c {
                agree += m.weight(j, k) * counts[j] * counts[k];
            }
            totals[j] += counts[j];
        }
        po += (agree - n) / (n * (n - 1.0));
        n_all += n;
    }
    if m.ratings.is_empty() {
        return Err(EvalError::UndefinedKappa);
    }
    po /= m.ratings.len() as f64;
    let p: Vec<f64> = totals.iter().map(|t| t / n_all).collect();
    let mut pe = 0.0;
    for j in 0..c {
        for k in 0..c {
            pe += m.weight(j, k) * p[j] * p[k];
        }
    }
    finish(po, pe)
}

/// Direct summation over rater pairs and rating pairs; an independent check
/// of [`fleiss_kappa`].
pub fn brute_force_kappa(m: &RatingsMatrix) -> Result<(f64, KappaBand), EvalError> {
    m.check()?;
    if m.ratings.is_empty() {
        return Err(EvalError::UndefinedKappa);
    }
    let mut po = 0.0;
    for row in &m.ratings {
        let mut sum = 0.0;
        let mut pairs = 0.0;
        for (r, &a) in row.iter().enumerate() {
            for (s, &b) in row.iter().enumerate() {
                if r != s {
                    sum += m.weight(a, b);
                    pairs += 1.0;
                }
            }
        }
        po += sum / pairs;
    }
    po /= m.ratings.len() as f64;
    let all: Vec<usize> = m.ratings.iter().flatten().copied().collect();
    let mut pe = 0.0;
    for &a in &all {
        for &b in &all {
            pe += m.weight(a, b);
        }
    }
    pe /= (all.len() * all.len()) as f64;
    finish(po, pe)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unanimous_is_one() {
        let m = RatingsMatrix::numbered(4, vec![vec![0, 0, 0], vec![3, 3, 3], vec![1, 1, 1]]).unwrap();
        assert_eq!(fleiss_kappa(&m).unwrap(), (1.0, KappaBand::AlmostPerfect));
    }

    #[test]
    fn single_category_is_undefined() {
        let m = RatingsMatrix::numbered(4, vec![vec![2, 2], vec![2, 2]]).unwrap();
        assert_eq!(fleiss_kappa(&m), Err(EvalError::UndefinedKappa));
    }

    #[test]
    fn bands() {
        assert_eq!(KappaBand::of(0.68), KappaBand::Substantial);
        assert_eq!(KappaBand::of(0.61), KappaBand::Substantial);
        assert_eq!(KappaBand::of(0.80), KappaBand::Substantial);
        assert_eq!(KappaBand::of(0.5), KappaBand::Moderate);
        assert_eq!(KappaBand::of(-0.1), KappaBand::Poor);
    }

    #[test]
    fn hand_worked_two_raters() {
        // Two items, two raters, three categories: (0,1) and (2,2).
        // Po = (0.5 + 1)/2 = 0.75; p = (1/4, 1/4, 1/2);
        // Pe = sum w p p = 0.0625+0.0625+0.25 + 2*(0.5*0.0625 + 0*0.125 + 0.5*0.125) = 0.5625
        let m = RatingsMatrix::numbered(3, vec![vec![0, 1], vec![2, 2]]).unwrap();
        let (k, _) = fleiss_kappa(&m).unwrap();
        assert!((k - (0.75 - 0.5625) / (1.0 - 0.5625)).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            RatingsMatrix::numbered(4, vec![vec![1]]),
            Err(EvalError::TooFewRaters { .. })
        ));
        assert!(matches!(
            RatingsMatrix::numbered(4, vec![vec![1, 4]]),
            Err(EvalError::BadCategory { .. })
        ));
        assert!(matches!(
            RatingsMatrix::numbered(1, vec![]),
            Err(EvalError::TooFewCategories)
        ));
    }

    #[test]
    fn csv_labels() {
        let m = RatingsMatrix::from_csv("item,a,b\nx,1,2\ny,4,4\n", ["1", "2", "3", "4"].map(String::from).to_vec()).unwrap();
        assert_eq!(m.ratings, vec![vec![0, 1], vec![3, 3]]);
    }
}
