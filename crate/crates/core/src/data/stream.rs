use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::augment::{strong_augment, weak_augment, AugmentContext};
use crate::data::synth::SplitDataset;
use crate::error::{Error, Result};
use crate::Mat;

/// Endless index stream over `0..n` that reshuffles with an epoch-indexed
/// seed whenever the pool is exhausted.
#[derive(Debug, Clone)]
pub struct ShuffleCycler {
    n: usize,
    seed: u64,
    epoch: u64,
    pos: usize,
    order: Vec<usize>,
}

impl ShuffleCycler {
    pub fn new(n: usize, seed: u64) -> Self {
        let mut c = ShuffleCycler {
            n,
            seed,
            epoch: 0,
            pos: 0,
            order: Vec::new(),
        };
        c.reshuffle();
        c
    }

    fn reshuffle(&mut self) {
        let mut rng = ChaCha8Rng::seed_from_u64(super::mix_seed(self.seed, self.epoch));
        self.order = (0..self.n).collect();
        self.order.shuffle(&mut rng);
        self.pos = 0;
    }

    pub fn next_index(&mut self) -> usize {
        if self.pos == self.n {
            self.epoch += 1;
            self.reshuffle();
        }
        let i = self.order[self.pos];
        self.pos += 1;
        i
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }
}

/// One training minibatch: `B` labeled samples with one-hot targets plus
/// `mu*B` unlabeled samples carried as (raw, weak view, strong view).
/// There is deliberately no label field on the unlabeled side.
#[derive(Debug, Clone)]
pub struct BatchPair {
    pub x_raw: Mat,
    pub x_weak: Mat,
    pub x_strong: Mat,
    pub labels_onehot: Mat,
    pub labels: Vec<usize>,
    pub u_raw: Mat,
    pub u_weak: Mat,
    pub u_strong: Mat,
    /// Indices into the unlabeled pool, for eval-only tracing.
    pub u_indices: Vec<usize>,
}

/// Minibatch sampler: labeled and unlabeled pools cycle independently with
/// per-epoch shuffles; augmentation views use per-sample derived seeds.
pub struct BatchStream<'a> {
    ds: &'a SplitDataset,
    b: usize,
    mu: usize,
    seed: u64,
    ctx: AugmentContext,
    labeled: ShuffleCycler,
    unlabeled: ShuffleCycler,
    sample_counter: u64,
}

impl<'a> BatchStream<'a> {
    pub fn new(ds: &'a SplitDataset, b: usize, mu: usize, seed: u64) -> Result<Self> {
        if b < 1 || mu < 1 {
            return Err(Error::InvalidConfig(format!("need B >= 1 and mu >= 1 (got {b}, {mu})")));
        }
        Ok(BatchStream {
            ds,
            b,
            mu,
            seed,
            ctx: AugmentContext::from_header(ds.header()),
            labeled: ShuffleCycler::new(ds.labeled().0.rows(), super::mix_seed(seed, 0x1ab)),
            unlabeled: ShuffleCycler::new(ds.unlabeled_inputs().rows(), super::mix_seed(seed, 0x01a)),
            sample_counter: 0,
        })
    }

    fn view_rng(&mut self, salt: u64) -> ChaCha8Rng {
        self.sample_counter += 1;
        ChaCha8Rng::seed_from_u64(super::mix_seed(
            self.seed,
            0x5EED_0000u64 + (salt << 40) + self.sample_counter,
        ))
    }

    pub fn next_batch(&mut self) -> Result<BatchPair> {
        let classes = self.ds.header().classes;
        let (lx, ly) = self.ds.labeled();
        let ux = self.ds.unlabeled_inputs();

        let l_idx: Vec<usize> = (0..self.b).map(|_| self.labeled.next_index()).collect();
        let u_idx: Vec<usize> = (0..self.b * self.mu)
            .map(|_| self.unlabeled.next_index())
            .collect();

        let mut x_weak_rows = Vec::with_capacity(self.b);
        let mut x_strong_rows = Vec::with_capacity(self.b);
        let mut labels = Vec::with_capacity(self.b);
        for &i in &l_idx {
            let mut rng = self.view_rng(1);
            x_weak_rows.push(weak_augment(lx.row(i), &self.ctx, &mut rng));
            let mut rng = self.view_rng(2);
            x_strong_rows.push(strong_augment(lx.row(i), &self.ctx, &mut rng));
            labels.push(ly[i]);
        }

        let mut u_weak_rows = Vec::with_capacity(u_idx.len());
        let mut u_strong_rows = Vec::with_capacity(u_idx.len());
        for &i in &u_idx {
            let mut rng = self.view_rng(3);
            u_weak_rows.push(weak_augment(ux.row(i), &self.ctx, &mut rng));
            let mut rng = self.view_rng(4);
            u_strong_rows.push(strong_augment(ux.row(i), &self.ctx, &mut rng));
        }

        let mut onehot = Mat::zeros(self.b, classes);
        for (r, &y) in labels.iter().enumerate() {
            onehot.set(r, y, 1.0);
        }

        Ok(BatchPair {
            x_raw: lx.select_rows(&l_idx),
            x_weak: Mat::from_rows(&x_weak_rows)?,
            x_strong: Mat::from_rows(&x_strong_rows)?,
            labels_onehot: onehot,
            labels,
            u_raw: ux.select_rows(&u_idx),
            u_weak: Mat::from_rows(&u_weak_rows)?,
            u_strong: Mat::from_rows(&u_strong_rows)?,
            u_indices: u_idx,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synthesize;
    use crate::data::task::TaskSpec;

    fn dataset() -> SplitDataset {
        let t = TaskSpec::gaussian_ring(3, 2.0, 1.0, 7).unwrap();
        synthesize(&t, &[40, 20, 10], &[50, 40, 30], 10, 11).unwrap()
    }

    #[test]
    fn batch_sizes_match_spec() {
        let ds = dataset();
        let mut s = BatchStream::new(&ds, 32, 2, 0).unwrap();
        let batch = s.next_batch().unwrap();
        assert_eq!(batch.x_weak.rows(), 32);
        assert_eq!(batch.u_weak.rows(), 64);
        assert_eq!(batch.u_strong.rows(), 64);
    }

    #[test]
    fn deterministic_given_seed() {
        let ds = dataset();
        let mut a = BatchStream::new(&ds, 8, 2, 5).unwrap();
        let mut b = BatchStream::new(&ds, 8, 2, 5).unwrap();
        for _ in 0..5 {
            let ba = a.next_batch().unwrap();
            let bb = b.next_batch().unwrap();
            assert_eq!(ba.x_weak.data(), bb.x_weak.data());
            assert_eq!(ba.u_strong.data(), bb.u_strong.data());
            assert_eq!(ba.u_indices, bb.u_indices);
        }
    }

    #[test]
    fn cycler_covers_pool_once_per_epoch() {
        let mut c = ShuffleCycler::new(10, 3);
        let mut seen: Vec<usize> = (0..10).map(|_| c.next_index()).collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..10).collect::<Vec<_>>());
        assert_eq!(c.epoch(), 0);
        c.next_index();
        assert_eq!(c.epoch(), 1);
    }
}
