//! Pairwise relation model with exact antisymmetry.

use super::{Instance, Mlp, PerceptionError, TrainBatch};

/// Wraps a two-class network fed with concatenated pairs. The relation
/// probability averages both orientations, `(P(a,b) + 1 - P(b,a)) / 2`, so
/// `p(a,b) + p(b,a) = 1` holds exactly and `p(a,a) = 0.5`.
#[derive(Clone, Debug)]
pub struct PairModel {
    pub net: Mlp,
}

impl PairModel {
    /// A network for items of `dim` features with the given hidden widths.
    pub fn new(dim: usize, hidden: &[usize], seed: u64) -> PairModel {
        let mut dims = vec![2 * dim];
        dims.extend_from_slice(hidden);
        dims.push(2);
        PairModel {
            net: Mlp::new(&dims, seed),
        }
    }

    pub fn item_dim(&self) -> usize {
        self.net.input_dim() / 2
    }

    fn check(&self, x: &[f64]) -> Result<(), PerceptionError> {
        if x.len() != self.item_dim() {
            return Err(PerceptionError::DimensionMismatch {
                expected: self.item_dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    fn concat(a: &[f64], b: &[f64]) -> Instance {
        a.iter().chain(b).copied().collect()
    }

    /// Probability that the relation holds from `a` to `b`.
    pub fn predict_pair(&self, a: &[f64], b: &[f64]) -> Result<f64, PerceptionError> {
        self.check(a)?;
        self.check(b)?;
        let ab = self.net.predict(&Self::concat(a, b))?.probs;
        let ba = self.net.predict(&Self::concat(b, a))?.probs;
        Ok(0.5 * (ab[1] + ba[0]))
    }

    /// `p[i][j]` for every ordered pair; the diagonal is 0.5.
    pub fn pair_matrix(&self, items: &[Instance]) -> Result<Vec<Vec<f64>>, PerceptionError> {
        let n = items.len();
        let mut p = vec![vec![0.5; n]; n];
        for i in 0..n {
            for j in i + 1..n {
                let v = self.predict_pair(&items[i], &items[j])?;
                p[i][j] = v;
                p[j][i] = 1.0 - v;
            }
        }
        Ok(p)
    }

    /// Training rows for labeled pairs `(a, b, holds)`, one per orientation.
    pub fn batch(pairs: &[(&[f64], &[f64], bool)]) -> TrainBatch {
        let mut batch = TrainBatch::default();
        for &(a, b, holds) in pairs {
            batch.instances.push(Self::concat(a, b));
            batch.labels.push(holds as usize);
            batch.instances.push(Self::concat(b, a));
            batch.labels.push(!holds as usize);
        }
        batch
    }

    pub fn fit_pairs(
        &mut self,
        pairs: &[(&[f64], &[f64], bool)],
        epochs: usize,
        lr: f64,
    ) -> Result<f64, PerceptionError> {
        for (a, b, _) in pairs {
            self.check(a)?;
            self.check(b)?;
        }
        self.net.fit(&Self::batch(pairs), epochs, lr)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn antisymmetric_and_self_half() {
        let m = PairModel::new(3, &[5], 2);
        let a = [0.1, 0.4, 0.9];
        let b = [0.3, 0.2, 0.7];
        let pab = m.predict_pair(&a, &b).unwrap();
        let pba = m.predict_pair(&b, &a).unwrap();
        assert!((pab + pba - 1.0).abs() < 1e-12);
        assert!((m.predict_pair(&a, &a).unwrap() - 0.5).abs() < 1e-12);
    }
}
