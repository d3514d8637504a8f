//! Paired Wilcoxon signed-rank test with the exact null distribution.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Pairs left after dropping zero differences.
    pub n: usize,
    pub w_plus: f64,
    pub w_minus: f64,
    /// `P(W+ >= observed)`: evidence that `a` exceeds `b`.
    pub p_greater: f64,
    /// `P(W+ <= observed)`.
    pub p_less: f64,
    pub p_two_sided: f64,
}

/// Average ranks of `|d|`, ties sharing their mean rank.
pub(crate) fn midranks(abs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..abs.len()).collect();
    order.sort_by(|&i, &j| abs[i].total_cmp(&abs[j]));
    let mut ranks = vec![0.0; abs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && abs[order[j + 1]] == abs[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Exact test on paired samples. Zero differences are dropped; when none
/// remain every p-value is 1.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    if a.len() != b.len() {
        return Err(Error::Config(format!(
            "paired samples differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    let n = d.len();
    if n == 0 {
        return Ok(WilcoxonResult {
            n: 0,
            w_plus: 0.0,
            w_minus: 0.0,
            p_greater: 1.0,
            p_less: 1.0,
            p_two_sided: 1.0,
        });
    }
    let abs: Vec<f64> = d.iter().map(|x| x.abs()).collect();
    let ranks = midranks(&abs);
    let w_plus: f64 = d.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
    let total = (n * (n + 1)) as f64 / 2.0;

    // Midranks are multiples of 1/2, so doubled ranks index the distribution.
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let max: usize = doubled.iter().sum();
    let mut dist = vec![0.0f64; max + 1];
    dist[0] = 1.0;
    let mut reach = 0;
    for &r in &doubled {
        for s in (0..=reach).rev() {
            let p = dist[s];
            if p != 0.0 {
                dist[s + r] += 0.5 * p;
                dist[s] = 0.5 * p;
            }
        }
        reach += r;
    }
    let obs = (2.0 * w_plus).round() as usize;
    let p_greater: f64 = dist[obs..].iter().sum::<f64>().min(1.0);
    let p_less: f64 = dist[..=obs].iter().sum::<f64>().min(1.0);
    Ok(WilcoxonResult {
        n,
        w_plus,
        w_minus: total - w_plus,
        p_greater,
        p_less,
        p_two_sided: (2.0 * p_greater.min(p_less)).min(1.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    /// Enumerates all `2^n` sign assignments of the midranks.
    fn brute_force(a: &[f64], b: &[f64]) -> (f64, f64) {
        let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
        let ranks = midranks(&d.iter().map(|x| x.abs()).collect::<Vec<_>>());
        let w: f64 = d.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
        let n = d.len();
        let (mut ge, mut le) = (0u64, 0u64);
        for mask in 0u64..(1 << n) {
            let s: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
            if s >= w - 1e-9 {
                ge += 1;
            }
            if s <= w + 1e-9 {
                le += 1;
            }
        }
        let total = (1u64 << n) as f64;
        (ge as f64 / total, le as f64 / total)
    }

    #[test]
    fn identical_samples() {
        let a = [0.5; 11];
        let r = wilcoxon_signed_rank(&a, &a).unwrap();
        assert_eq!((r.n, r.p_two_sided), (0, 1.0));
    }

    #[test]
    fn all_greater_is_one_over_2048() {
        let a: Vec<f64> = (0..11).map(|i| 0.5 + 0.01 * i as f64).collect();
        let b: Vec<f64> = a.iter().map(|x| x - 0.1 - 0.001 * x).collect();
        let r = wilcoxon_signed_rank(&a, &b).unwrap();
        assert_eq!(r.p_greater, 1.0 / 2048.0);
        assert!((r.p_greater - 0.000488).abs() < 1e-6);
        assert_eq!(r.w_plus, 66.0);
    }

    #[test]
    fn matches_enumeration_with_ties() {
        let mut rng = crate::seed::rng(99);
        for _ in 0..50 {
            // coarse grid so that ties and zeros occur
            let a: Vec<f64> = (0..11).map(|_| rng.gen_range(0..8) as f64 / 8.0).collect();
            let b: Vec<f64> = (0..11).map(|_| rng.gen_range(0..8) as f64 / 8.0).collect();
            let r = wilcoxon_signed_rank(&a, &b).unwrap();
            let (ge, le) = brute_force(&a, &b);
            assert!((r.p_greater - ge).abs() < 1e-12);
            assert!((r.p_less - le).abs() < 1e-12);
        }
    }

    #[test]
    fn length_mismatch_is_an_error() {
        assert!(wilcoxon_signed_rank(&[1.0], &[1.0, 2.0]).is_err());
    }
}
