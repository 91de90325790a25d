//! k-nearest neighbours under Euclidean distance. Equal distances rank the
//! earlier training row first.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Knn {
    pub k: usize,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<u8>,
}

impl Knn {
    pub fn fit(k: usize, x: &[Vec<f64>], y: &[u8]) -> Result<Self> {
        if k == 0 || k > x.len() {
            return Err(Error::config(format!("k = {k} needs 1..={} training rows", x.len())));
        }
        Ok(Knn {
            k,
            x: x.to_vec(),
            y: y.to_vec(),
        })
    }

    /// Indices of the `k` nearest training rows, nearest first.
    pub fn neighbours(&self, q: &[f64]) -> Vec<usize> {
        let mut d: Vec<(f64, usize)> = self
            .x
            .iter()
            .enumerate()
            .map(|(i, r)| (r.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum(), i))
            .collect();
        let by = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < d.len() {
            d.select_nth_unstable_by(self.k - 1, by);
            d.truncate(self.k);
        }
        d.sort_by(by);
        d.into_iter().map(|(_, i)| i).collect()
    }

    /// Vote fractions `[p0, p1]`.
    pub fn probabilities(&self, q: &[f64]) -> [f64; 2] {
        let ones = self.neighbours(q).iter().filter(|&&i| self.y[i] == 1).count();
        let k = self.k as f64;
        [(self.k - ones) as f64 / k, ones as f64 / k]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_first_with_index_ties() {
        let x = vec![vec![0.0], vec![2.0], vec![-2.0], vec![5.0]];
        let m = Knn::fit(3, &x, &[0, 1, 1, 0]).unwrap();
        assert_eq!(m.neighbours(&[0.9]), vec![0, 1, 2]);
        assert_eq!(m.neighbours(&[0.0]), vec![0, 1, 2]);
        assert_eq!(m.probabilities(&[0.0]), [1.0 / 3.0, 2.0 / 3.0]);
        assert!(Knn::fit(5, &x, &[0, 1, 1, 0]).is_err());
    }
}
