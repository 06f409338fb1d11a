use serde::{Deserialize, Serialize};

use super::encode::Dense;
use crate::scalar::Scalar;

/// Euclidean k-nearest-neighbour vote. Distance ties go to the lower
/// training index; vote ties go to the nearest neighbour's class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Knn<T> {
    pub k: usize,
    pub train: Dense<T>,
    pub classes: Vec<usize>,
}

impl<T: Scalar> Knn<T> {
    pub fn fit(train: Dense<T>, classes: Vec<usize>, k: usize) -> Knn<T> {
        Knn { k, train, classes }
    }

    pub fn predict_row(&self, row: &[T]) -> usize {
        let mut d: Vec<(T, usize)> = (0..self.train.n_rows)
            .map(|i| {
                let dist = self.train.row(i).iter().zip(row).map(|(&a, &b)| (a - b) * (a - b)).sum::<T>();
                (dist, i)
            })
            .collect();
        let k = self.k.min(d.len());
        let cmp = |a: &(T, usize), b: &(T, usize)| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal).then(a.1.cmp(&b.1));
        if k < d.len() {
            d.select_nth_unstable_by(k - 1, cmp);
            d.truncate(k);
        }
        d.sort_by(cmp);
        let ones = d.iter().filter(|&&(_, i)| self.classes[i] == 1).count();
        match (2 * ones).cmp(&k) {
            std::cmp::Ordering::Greater => 1,
            std::cmp::Ordering::Less => 0,
            std::cmp::Ordering::Equal => self.classes[d[0].1],
        }
    }

    pub fn predict(&self, x: &Dense<T>) -> Vec<usize> {
        (0..x.n_rows).map(|i| self.predict_row(x.row(i))).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_nn_returns_own_label() {
        let x = Dense::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 3.0], vec![2.0, 2.0]]);
        let classes = vec![0, 1, 1, 0];
        let m = Knn::fit(x.clone(), classes.clone(), 1);
        assert_eq!(m.predict(&x), classes);
    }

    #[test]
    fn vote_tie_goes_to_nearest() {
        let x = Dense::from_rows(&[vec![0.0], vec![1.0]]);
        let m = Knn::fit(x, vec![1, 0], 2);
        assert_eq!(m.predict_row(&[0.1]), 1);
        assert_eq!(m.predict_row(&[0.9]), 0);
    }
}
