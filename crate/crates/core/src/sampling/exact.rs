//! Exact tail probabilities for small instances: full subset enumeration and
//! a subset-sum counting table for integer populations.

use super::{EventEvaluator, Method, Outcome, Statistic, TailEstimate};
use crate::error::{Error, Result};
use crate::population::{Design, Population};

/// Largest `C(N, n)` the enumeration oracle accepts.
pub const MAX_ENUM_SUBSETS: u128 = 10_000_000;

/// Exact count of qualifying subsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExactCount {
    pub hits: u128,
    pub total: u128,
    pub undefined: u128,
}

impl ExactCount {
    pub fn probability(&self) -> f64 {
        self.hits as f64 / self.total as f64
    }

    pub fn estimate(&self, method: Method) -> TailEstimate {
        TailEstimate {
            undefined: self.undefined as u64,
            ..TailEstimate::exact(self.probability(), method)
        }
    }
}

pub(crate) fn binomial(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// Calls `f` with the values of every `n`-subset, in lexicographic index order.
pub fn for_each_subset<F: FnMut(&[f64])>(values: &[f64], n: usize, mut f: F) -> Result<u128> {
    let big_n = values.len();
    let total = binomial(big_n as u64, n as u64).unwrap_or(u128::MAX);
    if total > MAX_ENUM_SUBSETS {
        return Err(Error::TooLarge(format!(
            "C({big_n}, {n}) = {total} exceeds {MAX_ENUM_SUBSETS} subsets"
        )));
    }
    if n == 0 || n > big_n {
        return Err(Error::InvalidParameter(format!("n = {n} out of range for N = {big_n}")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    let mut buf: Vec<f64> = idx.iter().map(|&i| values[i]).collect();
    loop {
        f(&buf);
        // Advance to the next combination.
        let mut i = n;
        loop {
            if i == 0 {
                return Ok(total);
            }
            i -= 1;
            if idx[i] < big_n - n + i {
                break;
            }
        }
        idx[i] += 1;
        buf[i] = values[idx[i]];
        for j in i + 1..n {
            idx[j] = idx[j - 1] + 1;
            buf[j] = values[idx[j]];
        }
    }
}

/// Exact `P(event)` by enumerating all `C(N, n)` subsets.
pub fn exact_tail_enum(pop: &Population, n: usize, stat: Statistic) -> Result<ExactCount> {
    let d = Design::new(pop.len(), n)?;
    let eval = EventEvaluator::new(pop, &d, stat)?;
    let mut hits = 0u128;
    let mut undefined = 0u128;
    let total = for_each_subset(pop.values(), n, |s| match eval.eval(s) {
        Outcome::Hit => hits += 1,
        Outcome::Miss => {}
        Outcome::Undefined => undefined += 1,
    })?;
    Ok(ExactCount {
        hits,
        total,
        undefined,
    })
}

/// Exact `P(S_n >= threshold)` for an integer-valued population, counting
/// `j`-subsets by exact sum one unit at a time.
pub fn exact_tail_dp(pop: &Population, n: usize, threshold: i64) -> Result<ExactCount> {
    if !pop.is_integer_valued() {
        return Err(Error::InvalidParameter("population must be integer valued".into()));
    }
    let big_n = pop.len();
    Design::new(big_n, n)?;
    let min = pop.values().iter().copied().fold(f64::INFINITY, f64::min) as i64;
    // Values shifted to start at 0 keep every partial sum nonnegative.
    let shifted: Vec<usize> = pop.values().iter().map(|&v| (v as i64 - min) as usize).collect();
    let mut sorted = shifted.clone();
    sorted.sort_unstable();
    let max_sum: usize = sorted[big_n - n..].iter().sum();
    let work = big_n as u128 * n as u128 * (max_sum as u128 + 1);
    if work > 1_000_000_000 {
        return Err(Error::TooLarge(format!("DP table work {work} exceeds 1e9")));
    }
    let width = max_sum + 1;
    let mut count = vec![0u128; (n + 1) * width];
    count[0] = 1;
    let overflow = || Error::TooLarge("subset count overflows u128".into());
    for (k, &v) in shifted.iter().enumerate() {
        // Descending j so each unit is used at most once.
        for j in (1..=n.min(k + 1)).rev() {
            let (lower, upper) = count.split_at_mut(j * width);
            let prev = &lower[(j - 1) * width..];
            let cur = &mut upper[..width];
            for s in (v..width).rev() {
                let add = prev[s - v];
                if add != 0 {
                    cur[s] = cur[s].checked_add(add).ok_or_else(overflow)?;
                }
            }
        }
    }
    let row = &count[n * width..];
    let cut = threshold - n as i64 * min;
    let start = cut.max(0) as usize;
    let hits = if start >= width {
        0
    } else {
        row[start..].iter().try_fold(0u128, |acc, &c| acc.checked_add(c)).ok_or_else(overflow)?
    };
    let total = row.iter().try_fold(0u128, |acc, &c| acc.checked_add(c)).ok_or_else(overflow)?;
    Ok(ExactCount {
        hits,
        total,
        undefined: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear(big_n: usize) -> Population {
        Population::power_family(big_n, 1.0).unwrap()
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(30, 10), Some(30_045_015));
        assert_eq!(binomial(12, 6), Some(924));
        assert_eq!(binomial(3, 5), Some(0));
    }

    #[test]
    fn enumeration_small_listing() {
        // {1,2},{1,3},{1,4},{2,3},{2,4},{3,4}: sums 3,4,5,5,6,7, two reach 6.
        let c = exact_tail_enum(&linear(4), 2, Statistic::Sum { threshold: 6.0 }).unwrap();
        assert_eq!((c.hits, c.total), (2, 6));
        let c = exact_tail_enum(&linear(4), 2, Statistic::Sum { threshold: 3.0 }).unwrap();
        assert_eq!(c.probability(), 1.0);
        let c = exact_tail_enum(&linear(4), 2, Statistic::Sum { threshold: 7.5 }).unwrap();
        assert_eq!(c.probability(), 0.0);
    }

    #[test]
    fn enumeration_visits_every_subset_once() {
        let values: Vec<f64> = (0..7).map(|i| (1u32 << i) as f64).collect();
        let mut seen = std::collections::HashSet::new();
        let total = for_each_subset(&values, 3, |s| {
            assert!(seen.insert(s.iter().sum::<f64>() as u32));
        })
        .unwrap();
        assert_eq!(total, 35);
        assert_eq!(seen.len(), 35);
    }

    #[test]
    fn enumeration_guard() {
        let pop = linear(40);
        assert!(matches!(
            exact_tail_enum(&pop, 20, Statistic::Sum { threshold: 0.0 }),
            Err(Error::TooLarge(_))
        ));
    }

    #[test]
    fn dp_matches_enumeration_n12() {
        let pop = linear(12);
        for th in 10..=60 {
            let dp = exact_tail_dp(&pop, 5, th).unwrap();
            let en = exact_tail_enum(&pop, 5, Statistic::Sum { threshold: th as f64 }).unwrap();
            assert_eq!((dp.hits, dp.total), (en.hits, en.total), "threshold {th}");
        }
    }

    #[test]
    fn dp_with_negative_values() {
        let pop = Population::new(vec![-3.0, -1.0, 0.0, 2.0, 5.0, 5.0, 7.0]).unwrap();
        for th in -10..=20 {
            let dp = exact_tail_dp(&pop, 3, th).unwrap();
            let en = exact_tail_enum(&pop, 3, Statistic::Sum { threshold: th as f64 }).unwrap();
            assert_eq!(dp, en, "threshold {th}");
        }
    }

    #[test]
    fn dp_boundaries_and_errors() {
        let pop = linear(30);
        assert_eq!(exact_tail_dp(&pop, 10, 55).unwrap().probability(), 1.0);
        assert_eq!(exact_tail_dp(&pop, 10, 256).unwrap().hits, 0);
        let frac = Population::new(vec![0.5, 1.0, 2.0]).unwrap();
        assert!(exact_tail_dp(&frac, 1, 1).is_err());
    }

    #[test]
    fn dp_regression_n30() {
        let c = exact_tail_dp(&linear(30), 10, 160).unwrap();
        assert_eq!(c.total, 30_045_015);
        assert_eq!(c.hits, DP_N30_T160_HITS);
    }

    // P(S_10 >= 160) for a_k = k, N = 30, frozen from the first DP run and
    // confirmed by an independent Python subset-sum count.
    const DP_N30_T160_HITS: u128 = 12_705_716;
}
