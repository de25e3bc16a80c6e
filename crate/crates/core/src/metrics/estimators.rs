//! Rank, histogram and regression estimators shared by the metrics.

use crate::error::{Error, Result};

/// Ranks starting at 0; tied values share the average of their positions.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let order = sorted_order(x);
    let mut ranks = vec![0.0; x.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && x[order[end]] == x[order[start]] {
            end += 1;
        }
        let r = (start + end - 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = r;
        }
        start = end;
    }
    ranks
}

fn sorted_order(x: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(a.cmp(&b)));
    order
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Spearman {
    pub rho: f64,
    /// One of the inputs has constant ranks; `rho` is then 0.
    pub degenerate: bool,
}

/// Pearson correlation of average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<Spearman> {
    if x.len() != y.len() {
        return Err(Error::dim(format!("{} vs {} values", x.len(), y.len())));
    }
    if x.len() < 3 {
        return Err(Error::contract("Spearman correlation needs at least 3 values"));
    }
    Ok(match pearson(&average_ranks(x), &average_ranks(y)) {
        Some(rho) => Spearman {
            rho,
            degenerate: false,
        },
        None => Spearman {
            rho: 0.0,
            degenerate: true,
        },
    })
}

/// Equal-occupancy bins by rank; tied values always share a bin.
pub fn quantile_bins(x: &[f64], bins: usize) -> Vec<usize> {
    let n = x.len();
    let order = sorted_order(x);
    let mut labels = vec![0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && x[order[end]] == x[order[start]] {
            end += 1;
        }
        let bin = start * bins / n;
        for &i in &order[start..end] {
            labels[i] = bin;
        }
        start = end;
    }
    labels
}

/// Plug-in entropy (nats) of bin labels.
pub fn entropy_of_labels(labels: &[usize], bins: usize) -> f64 {
    let mut counts = vec![0usize; bins];
    for &l in labels {
        counts[l] += 1;
    }
    let n = labels.len() as f64;
    -counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            p * p.ln()
        })
        .sum::<f64>()
}

/// Plug-in mutual information (nats) of two label sequences.
pub fn mutual_information_of_labels(x: &[usize], y: &[usize], bins: usize) -> f64 {
    let n = x.len();
    let mut joint = vec![0usize; bins * bins];
    let mut px = vec![0usize; bins];
    let mut py = vec![0usize; bins];
    for (&a, &b) in x.iter().zip(y) {
        joint[a * bins + b] += 1;
        px[a] += 1;
        py[b] += 1;
    }
    let nf = n as f64;
    let mut mi = 0.0;
    for a in 0..bins {
        for b in 0..bins {
            let c = joint[a * bins + b];
            if c > 0 {
                let c = c as f64;
                mi += c / nf * (c * nf / (px[a] as f64 * py[b] as f64)).ln();
            }
        }
    }
    mi.max(0.0)
}

/// Binned entropy of `x` under quantile binning.
pub fn binned_entropy(x: &[f64], bins: usize) -> f64 {
    entropy_of_labels(&quantile_bins(x, bins), bins)
}

/// Plug-in mutual information on a `bins × bins` quantile-binned histogram.
pub fn mutual_information(x: &[f64], y: &[f64], bins: usize) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::dim(format!("{} vs {} values", x.len(), y.len())));
    }
    if bins == 0 || x.is_empty() {
        return Err(Error::contract("mutual information needs data and at least one bin"));
    }
    Ok(mutual_information_of_labels(
        &quantile_bins(x, bins),
        &quantile_bins(y, bins),
        bins,
    ))
}

/// Least-squares line `y ≈ slope·x + intercept`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
}

impl LinearFit {
    pub fn fit(x: &[f64], y: &[f64]) -> LinearFit {
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let (mut sxy, mut sxx) = (0.0, 0.0);
        for (a, b) in x.iter().zip(y) {
            sxy += (a - mx) * (b - my);
            sxx += (a - mx) * (a - mx);
        }
        let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
        LinearFit {
            slope,
            intercept: my - slope * mx,
        }
    }

    /// Coefficient of determination on `(x, y)`; 0 when `y` is constant.
    pub fn r2(&self, x: &[f64], y: &[f64]) -> f64 {
        let n = y.len() as f64;
        let my = y.iter().sum::<f64>() / n;
        let (mut ss_res, mut ss_tot) = (0.0, 0.0);
        for (a, b) in x.iter().zip(y) {
            let e = b - (self.slope * a + self.intercept);
            ss_res += e * e;
            ss_tot += (b - my) * (b - my);
        }
        if ss_tot == 0.0 {
            0.0
        } else {
            1.0 - ss_res / ss_tot
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numgrad::SeededRng;
    use proptest::prelude::*;

    #[test]
    fn ranks_with_ties() {
        assert_eq!(average_ranks(&[10.0, 30.0, 20.0]), vec![0.0, 2.0, 1.0]);
        assert_eq!(average_ranks(&[1.0, 1.0, 2.0, 1.0]), vec![1.0, 1.0, 3.0, 1.0]);
    }

    #[test]
    fn spearman_fixtures() {
        let x = [1.0, 2.0, 3.0];
        assert_eq!(spearman(&x, &[10.0, 20.0, 30.0]).unwrap().rho, 1.0);
        assert_eq!(spearman(&x, &[30.0, 20.0, 10.0]).unwrap().rho, -1.0);
        assert_eq!(spearman(&x, &[1.0, 8.0, 27.0]).unwrap().rho, 1.0);
        let flat = spearman(&x, &[5.0, 5.0, 5.0]).unwrap();
        assert!(flat.degenerate);
        assert_eq!(flat.rho, 0.0);
        assert!(spearman(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        // Textbook example with ties: rho = 1 - 6Σd²/(n(n²-1)) does not apply
        // with ties, so compare against Pearson on hand ranks.
        let a = [1.0, 2.0, 2.0, 3.0];
        let b = [1.0, 3.0, 2.0, 4.0];
        let ra = [0.0, 1.5, 1.5, 3.0];
        let rb = [0.0, 2.0, 1.0, 3.0];
        let expected = pearson(&ra, &rb).unwrap();
        assert!((spearman(&a, &b).unwrap().rho - expected).abs() < 1e-15);
    }

    #[test]
    fn mi_of_identity_is_log_bins() {
        let mut rng = SeededRng::new(1);
        let x: Vec<f64> = (0..10_000).map(|_| rng.standard_normal()).collect();
        let mi = mutual_information(&x, &x, 20).unwrap();
        assert!((mi - 20f64.ln()).abs() < 0.05 * 20f64.ln());
        assert_eq!(mi, binned_entropy(&x, 20));
    }

    #[test]
    fn mi_of_independent_is_small() {
        let mut rng = SeededRng::new(2);
        let x: Vec<f64> = (0..10_000).map(|_| rng.standard_normal()).collect();
        let y: Vec<f64> = (0..10_000).map(|_| rng.uniform()).collect();
        let mi = mutual_information(&x, &y, 20).unwrap();
        assert!(mi <= 0.05, "{mi}");
        assert!((mi - mutual_information(&y, &x, 20).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn quantile_bins_keep_ties_together() {
        let x = [0.0, 0.0, 0.0, 0.0, 1.0, 2.0, 3.0, 4.0];
        let b = quantile_bins(&x, 4);
        assert!(b[..4].iter().all(|&l| l == 0));
        assert_eq!(&b[4..], &[2, 2, 3, 3]);
        assert_eq!(binned_entropy(&[3.0; 50], 20), 0.0);
    }

    #[test]
    fn linear_fit_recovers_line() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v - 2.0).collect();
        let f = LinearFit::fit(&x, &y);
        assert!((f.slope - 3.0).abs() < 1e-12 && (f.intercept + 2.0).abs() < 1e-12);
        assert!((f.r2(&x, &y) - 1.0).abs() < 1e-12);
        assert_eq!(LinearFit::fit(&[1.0; 4], &[1.0, 2.0, 3.0, 4.0]).slope, 0.0);
        assert_eq!(f.r2(&x, &[2.0; 10]), 0.0);
    }

    proptest! {
        #[test]
        fn spearman_rank_invariance(
            x in proptest::collection::vec(-100.0f64..100.0, 3..60),
            y in proptest::collection::vec(-100.0f64..100.0, 60),
        ) {
            let y = &y[..x.len()];
            let base = spearman(&x, y).unwrap().rho;
            let warped: Vec<f64> = x.iter().map(|v| v.powi(3) + v).collect();
            prop_assert!((spearman(&warped, y).unwrap().rho - base).abs() < 1e-12);
            let flipped: Vec<f64> = x.iter().map(|v| -v).collect();
            prop_assert!((spearman(&flipped, y).unwrap().rho + base).abs() < 1e-12);
            prop_assert!(base.abs() <= 1.0);
        }

        #[test]
        fn mi_nonnegative_and_bounded(
            x in proptest::collection::vec(-10.0f64..10.0, 20..200),
            seed in 0u64..100,
        ) {
            let mut rng = SeededRng::new(seed);
            let y: Vec<f64> = x.iter().map(|v| v + rng.standard_normal()).collect();
            let mi = mutual_information(&x, &y, 8).unwrap();
            prop_assert!(mi >= 0.0);
            prop_assert!(mi <= binned_entropy(&x, 8).min(binned_entropy(&y, 8)) + 1e-12);
        }
    }
}
