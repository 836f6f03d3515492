//! k-nearest-neighbour baseline over concatenated feature sequences.

use crate::dataset::FeatureGrid;
use crate::error::{Error, Result};
use crate::sdr::Sdr;

/// Concatenates the features at `order[..prefix_len]` into one binary vector.
pub fn concat_prefix(grid: &FeatureGrid, order: &[usize], prefix_len: usize) -> Result<Sdr> {
    if prefix_len > order.len() {
        return Err(Error::InvalidConfig(format!(
            "prefix of {prefix_len} exceeds sequence length {}",
            order.len()
        )));
    }
    let dim = grid.features.first().map_or(0, Sdr::dimension);
    let mut bits = Vec::new();
    for (slot, &pos) in order[..prefix_len].iter().enumerate() {
        let f = grid.features.get(pos).ok_or(Error::InvalidPosition {
            position: pos,
            side: (grid.features.len() as f64).sqrt() as usize,
        })?;
        if f.dimension() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: f.dimension() });
        }
        bits.extend(f.active().iter().map(|&i| (slot * dim) as u32 + i));
    }
    Ok(Sdr::from_sorted_unchecked(prefix_len * dim, bits))
}

pub fn hamming(a: &Sdr, b: &Sdr) -> Result<usize> {
    Ok(a.cardinality() + b.cardinality() - 2 * a.overlap(b)?)
}

#[derive(Debug, Clone)]
pub struct KnnClassifier {
    k: usize,
    prefix_len: usize,
    train: Vec<(Sdr, usize)>,
}

impl KnnClassifier {
    /// Each training example is a grid paired with its traversal order.
    pub fn fit(train: &[(&FeatureGrid, &[usize])], k: usize, prefix_len: usize) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        if k == 0 {
            return Err(Error::InvalidConfig("k must be positive".into()));
        }
        let train = train
            .iter()
            .map(|(g, o)| Ok((concat_prefix(g, o, prefix_len)?, g.label())))
            .collect::<Result<_>>()?;
        Ok(Self { k, prefix_len, train })
    }

    pub fn prefix_len(&self) -> usize {
        self.prefix_len
    }

    /// Majority vote among the `k` nearest training vectors. Distance ties
    /// keep training order; vote ties go to the smaller mean distance, then
    /// the lowest class id.
    pub fn predict(&self, grid: &FeatureGrid, order: &[usize]) -> Result<usize> {
        let q = concat_prefix(grid, order, self.prefix_len)?;
        let mut dists = self
            .train
            .iter()
            .map(|(v, y)| Ok((hamming(&q, v)?, *y)))
            .collect::<Result<Vec<_>>>()?;
        dists.sort_by_key(|&(d, _)| d);
        dists.truncate(self.k);

        let mut tally: Vec<(usize, usize, usize)> = Vec::new(); // (class, votes, distance sum)
        for (d, y) in dists {
            match tally.iter_mut().find(|t| t.0 == y) {
                Some(t) => {
                    t.1 += 1;
                    t.2 += d;
                }
                None => tally.push((y, 1, d)),
            }
        }
        tally
            .into_iter()
            .min_by(|a, b| {
                b.1.cmp(&a.1)
                    .then_with(|| (a.2 * b.1).cmp(&(b.2 * a.1)))
                    .then_with(|| a.0.cmp(&b.0))
            })
            .map(|t| t.0)
            .ok_or(Error::EmptyTrainingSet)
    }
}

pub fn knn_classify(
    train: &[(&FeatureGrid, &[usize])],
    test: (&FeatureGrid, &[usize]),
    k: usize,
    prefix_len: usize,
) -> Result<usize> {
    KnnClassifier::fit(train, k, prefix_len)?.predict(test.0, test.1)
}
