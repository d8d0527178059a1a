use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default ceiling on `N` for [`ordered_compositions`]; there are `2^(N-1)`
/// of them.
pub const COMPOSITION_LIMIT: usize = 20;

/// An ordered partition `(n_1, .., n_k)` of `N = n_1 + .. + n_k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Composition {
    parts: Vec<usize>,
}

impl Composition {
    pub fn new(parts: Vec<usize>) -> Result<Self> {
        if parts.is_empty() || parts.contains(&0) {
            return Err(Error::invalid(
                "composition parts must be positive and nonempty",
            ));
        }
        Ok(Self { parts })
    }

    pub fn parts(&self) -> &[usize] {
        &self.parts
    }

    pub fn total(&self) -> usize {
        self.parts.iter().sum()
    }

    /// Number of parts.
    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    /// Consecutive index ranges `0..n_1, n_1..n_1+n_2, ..`.
    pub fn blocks(&self) -> impl Iterator<Item = std::ops::Range<usize>> + '_ {
        self.parts.iter().scan(0, |start, &p| {
            let r = *start..*start + p;
            *start += p;
            Some(r)
        })
    }
}

/// All compositions of `n` in lexicographic order, up to
/// [`COMPOSITION_LIMIT`].
pub fn ordered_compositions(n: usize) -> Result<Vec<Composition>> {
    ordered_compositions_with_limit(n, COMPOSITION_LIMIT)
}

pub fn ordered_compositions_with_limit(n: usize, limit: usize) -> Result<Vec<Composition>> {
    if n == 0 {
        return Err(Error::invalid("compositions need N >= 1"));
    }
    if n > limit {
        return Err(Error::Capacity {
            what: format!("compositions of {n}"),
            limit,
        });
    }
    let mut out = Vec::with_capacity(1 << (n - 1));
    let mut prefix = Vec::with_capacity(n);
    extend(n, &mut prefix, &mut out);
    Ok(out)
}

fn extend(rest: usize, prefix: &mut Vec<usize>, out: &mut Vec<Composition>) {
    if rest == 0 {
        out.push(Composition {
            parts: prefix.clone(),
        });
        return;
    }
    for first in 1..=rest {
        prefix.push(first);
        extend(rest - first, prefix, out);
        prefix.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parts(n: usize) -> Vec<Vec<usize>> {
        ordered_compositions(n)
            .unwrap()
            .into_iter()
            .map(|c| c.parts)
            .collect()
    }

    fn binomial(n: usize, k: usize) -> usize {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    #[test]
    fn small_cases() {
        assert_eq!(parts(1), vec![vec![1]]);
        assert_eq!(
            parts(3),
            vec![vec![1, 1, 1], vec![1, 2], vec![2, 1], vec![3]]
        );
        let len2 = ordered_compositions(5)
            .unwrap()
            .into_iter()
            .filter(|c| c.len() == 2)
            .count();
        assert_eq!(len2, 4);
    }

    #[test]
    fn counts_and_order() {
        for n in 1..=12 {
            let all = ordered_compositions(n).unwrap();
            assert_eq!(all.len(), 1 << (n - 1));
            assert!(all.windows(2).all(|w| w[0].parts < w[1].parts));
            assert!(all.iter().all(|c| c.total() == n));
            for m in 1..=n {
                let count = all.iter().filter(|c| c.len() == m).count();
                assert_eq!(count, binomial(n - 1, m - 1), "n={n} m={m}");
            }
        }
    }

    #[test]
    fn limits() {
        assert!(matches!(
            ordered_compositions(21),
            Err(Error::Capacity { limit: 20, .. })
        ));
        assert!(ordered_compositions(0).is_err());
        assert!(matches!(
            ordered_compositions_with_limit(5, 4),
            Err(Error::Capacity { .. })
        ));
    }

    #[test]
    fn blocks_follow_parts() {
        let c = Composition::new(vec![2, 1, 3]).unwrap();
        assert_eq!(c.blocks().collect::<Vec<_>>(), vec![0..2, 2..3, 3..6]);
        assert!(Composition::new(vec![1, 0]).is_err());
    }
}
