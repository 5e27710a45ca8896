//! Chi-square tests, permutation ranks and small summary helpers.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::overlay::{Layer, PeerId};

/// Minimum expected count per cell; sparser cells are merged.
pub const MIN_EXPECTED: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

impl ChiSquare {
    fn from_statistic(statistic: f64, dof: usize) -> Self {
        if dof == 0 {
            // a single category carries no information
            return ChiSquare { statistic: 0.0, dof, p_value: 1.0 };
        }
        let dist = ChiSquared::new(dof as f64).expect("positive degrees of freedom");
        ChiSquare { statistic, dof, p_value: dist.sf(statistic) }
    }
}

// Greedy left-to-right grouping of cells so every group's expected mass
// reaches MIN_EXPECTED; a short tail joins the last group.
fn group_cells(expected: &[f64]) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut current = Vec::new();
    let mut mass = 0.0;
    for (i, &e) in expected.iter().enumerate() {
        current.push(i);
        mass += e;
        if mass >= MIN_EXPECTED {
            groups.push(std::mem::take(&mut current));
            mass = 0.0;
        }
    }
    if !current.is_empty() {
        match groups.last_mut() {
            Some(last) => last.extend(current),
            None => groups.push(current),
        }
    }
    groups
}

/// Goodness of fit of `observed` counts against category probabilities.
pub fn goodness_of_fit(observed: &[u64], probs: &[f64]) -> ChiSquare {
    assert_eq!(observed.len(), probs.len(), "one probability per category");
    let n: u64 = observed.iter().sum();
    let expected: Vec<f64> = probs.iter().map(|p| p * n as f64).collect();
    let groups = group_cells(&expected);
    let mut stat = 0.0;
    for g in &groups {
        let o: f64 = g.iter().map(|&i| observed[i] as f64).sum();
        let e: f64 = g.iter().map(|&i| expected[i]).sum();
        if e > 0.0 {
            stat += (o - e).powi(2) / e;
        }
    }
    ChiSquare::from_statistic(stat, groups.len().saturating_sub(1))
}

/// Goodness of fit against the uniform distribution.
pub fn uniformity(observed: &[u64]) -> ChiSquare {
    let k = observed.len();
    goodness_of_fit(observed, &vec![1.0 / k as f64; k])
}

/// Two-sample homogeneity test on counts over the same categories.
pub fn homogeneity(a: &[u64], b: &[u64]) -> ChiSquare {
    assert_eq!(a.len(), b.len(), "samples must share categories");
    let (na, nb) = (a.iter().sum::<u64>() as f64, b.iter().sum::<u64>() as f64);
    let n = na + nb;
    // group on the smaller row's expected counts so both rows clear the floor
    let scale = na.min(nb) / n;
    let expected: Vec<f64> = a.iter().zip(b).map(|(&x, &y)| (x + y) as f64 * scale).collect();
    let groups = group_cells(&expected);
    let mut stat = 0.0;
    for g in &groups {
        let oa: f64 = g.iter().map(|&i| a[i] as f64).sum();
        let ob: f64 = g.iter().map(|&i| b[i] as f64).sum();
        let col = oa + ob;
        for (o, row) in [(oa, na), (ob, nb)] {
            let e = row * col / n;
            if e > 0.0 {
                stat += (o - e).powi(2) / e;
            }
        }
    }
    ChiSquare::from_statistic(stat, groups.len().saturating_sub(1))
}

/// Independence test on an `r x c` contingency table. Rows and columns with
/// expected cells below the floor are merged with their neighbours.
pub fn independence(table: &[Vec<u64>]) -> ChiSquare {
    let mut t: Vec<Vec<f64>> = table.iter().map(|r| r.iter().map(|&x| x as f64).collect()).collect();
    loop {
        let n: f64 = t.iter().flatten().sum();
        let rows: Vec<f64> = t.iter().map(|r| r.iter().sum()).collect();
        let cols: Vec<f64> = (0..t[0].len()).map(|j| t.iter().map(|r| r[j]).sum()).collect();
        let (rmin, ri) = argmin(&rows);
        let (cmin, ci) = argmin(&cols);
        let min_expected = rmin * cmin / n;
        if min_expected >= MIN_EXPECTED || (t.len() < 2 && cols.len() < 2) {
            let mut stat = 0.0;
            for (i, r) in t.iter().enumerate() {
                for (j, &o) in r.iter().enumerate() {
                    let e = rows[i] * cols[j] / n;
                    if e > 0.0 {
                        stat += (o - e).powi(2) / e;
                    }
                }
            }
            let dof = t.len().saturating_sub(1) * cols.len().saturating_sub(1);
            return ChiSquare::from_statistic(stat, dof);
        }
        if (rmin <= cmin && t.len() > 1) || cols.len() < 2 {
            let other = if ri + 1 < t.len() { ri + 1 } else { ri - 1 };
            let gone = t.remove(ri);
            let other = if other > ri { other - 1 } else { other };
            for (x, y) in t[other].iter_mut().zip(gone) {
                *x += y;
            }
        } else {
            let other = if ci + 1 < cols.len() { ci + 1 } else { ci - 1 };
            for r in &mut t {
                let gone = r.remove(ci);
                let other = if other > ci { other - 1 } else { other };
                r[other] += gone;
            }
        }
    }
}

fn argmin(v: &[f64]) -> (f64, usize) {
    v.iter().enumerate().fold((f64::INFINITY, 0), |(m, mi), (i, &x)| if x < m { (x, i) } else { (m, mi) })
}

pub fn factorial(n: usize) -> u64 {
    (1..=n as u64).product()
}

/// Rank of a permutation of `0..n` in lexicographic order.
pub fn lehmer_rank(perm: &[usize]) -> u64 {
    let n = perm.len();
    let mut rank = 0u64;
    for i in 0..n {
        let smaller_after = perm[i + 1..].iter().filter(|&&x| x < perm[i]).count() as u64;
        rank += smaller_after * factorial(n - 1 - i);
    }
    rank
}

/// Code in `0..(N-1)!` of a Hamiltonian cycle: the lexicographic rank of
/// the successor order read from the source, with peers relabelled by
/// their rank among `peers`. `None` if the layer is not a single cycle.
pub fn cycle_code(layer: &Layer, peers: &[PeerId]) -> Option<u64> {
    let order = layer.canonical_order()?;
    let mut others: Vec<PeerId> = peers.iter().copied().filter(|p| !p.is_source()).collect();
    others.sort();
    let perm = order.iter().map(|p| others.binary_search(p).ok()).collect::<Option<Vec<_>>>()?;
    Some(lehmer_rank(&perm))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares of `ys` on `xs`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> LinearFit {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    LinearFit { slope, intercept, r_squared }
}

/// Mean and standard error from integer sums of `x` and `x^2`.
pub fn mean_and_se(sum: u128, sum_sq: u128, n: u64) -> (f64, f64) {
    let nf = n as f64;
    let mean = sum as f64 / nf;
    let var = if n > 1 { ((sum_sq as f64) - nf * mean * mean).max(0.0) / (nf - 1.0) } else { 0.0 };
    (mean, (var / nf).sqrt())
}
