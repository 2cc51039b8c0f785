//! Small statistics helpers for comparing runs.

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Exact one-sided Wilcoxon signed-rank test of `x > y` on paired samples.
/// Zero differences are dropped; tied magnitudes get average ranks. Returns
/// the p-value `P(W⁺ ≥ observed)` under the null, or 1 when every pair is
/// tied.
pub fn wilcoxon_greater(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len(), "paired samples differ in length");
    let mut diffs: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).filter(|d| *d != 0.0).collect();
    let n = diffs.len();
    if n == 0 {
        return 1.0;
    }
    diffs.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    // doubled ranks stay integral under averaging
    let mut ranks2 = vec![0u64; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && diffs[j + 1].abs() == diffs[i].abs() {
            j += 1;
        }
        let r2 = (i + 1 + j + 1) as u64;
        for r in &mut ranks2[i..=j] {
            *r = r2;
        }
        i = j + 1;
    }
    let observed: u64 = diffs.iter().zip(&ranks2).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
    let total: u64 = ranks2.iter().sum();
    // counts[w] = number of sign assignments with doubled W⁺ = w
    let mut counts = vec![0f64; total as usize + 1];
    counts[0] = 1.0;
    for r in &ranks2 {
        for w in (*r as usize..=total as usize).rev() {
            counts[w] += counts[w - *r as usize];
        }
    }
    let tail: f64 = counts[observed as usize..].iter().sum();
    tail / 2f64.powi(n as i32)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_positive_ten_pairs() {
        let x: Vec<f64> = (1..=10).map(|i| i as f64 + 0.5).collect();
        let y: Vec<f64> = (1..=10).map(|i| i as f64).collect();
        assert!((wilcoxon_greater(&x, &y) - 1.0 / 1024.0).abs() < 1e-15);
        assert!((wilcoxon_greater(&y, &x) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn small_case_by_enumeration() {
        // differences +1, -2, +3 give W⁺ = 4; the positive-rank subsets of
        // {1, 2, 3} summing to at least 4 are {1,3}, {2,3}, {1,2,3}
        let p = wilcoxon_greater(&[1.0, 0.0, 3.0], &[0.0, 2.0, 0.0]);
        assert!((p - 3.0 / 8.0).abs() < 1e-15);
    }

    #[test]
    fn ties_and_zeros() {
        assert_eq!(wilcoxon_greater(&[1.0, 2.0], &[1.0, 2.0]), 1.0);
        // |d| = 1, 1 tie with ranks 1.5 each; W⁺ = 3 (doubled 6) only when both positive
        let p = wilcoxon_greater(&[2.0, 3.0, 5.0], &[1.0, 2.0, 5.0]);
        assert!((p - 0.25).abs() < 1e-15);
    }

    #[test]
    fn moments() {
        assert_eq!(mean(&[1.0, 2.0, 3.0]), 2.0);
        assert!((std_dev(&[1.0, 3.0]) - 1.0).abs() < 1e-15);
        assert_eq!(std_dev(&[]), 0.0);
    }
}
