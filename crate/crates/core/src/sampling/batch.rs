use rand::seq::SliceRandom;

use super::pairs::{PairKind, PatchPair};
use crate::seeds;
use crate::{MraiError, Result};

/// One mini-batch of pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub index: usize,
    pub pairs: Vec<PatchPair>,
    /// Set when the requested batch size exceeded the dataset and the whole
    /// dataset was returned as a single batch.
    pub fallback: bool,
}

impl Batch {
    pub fn kind_histogram(&self) -> [usize; 6] {
        let mut h = [0; 6];
        for p in &self.pairs {
            h[p.kind.index()] += 1;
        }
        h
    }
}

/// One epoch of stratified, well-mixed batches.
///
/// Every batch holds each pair kind within one pair of the kind's share of
/// the dataset, scaled to the batch length.
pub struct BatchIterator {
    batches: std::vec::IntoIter<Batch>,
}

impl BatchIterator {
    pub fn new(pairs: &[PatchPair], batch_size: usize, epoch_seed: u64) -> Result<Self> {
        if batch_size < 6 {
            return Err(MraiError::InvalidArgument(format!("batch_size {batch_size} < 6")));
        }
        if pairs.is_empty() {
            return Err(MraiError::InvalidArgument("empty pair dataset".into()));
        }
        let mut rng = seeds::rng(epoch_seed);
        let mut by_kind: [Vec<PatchPair>; 6] = Default::default();
        for p in pairs {
            by_kind[p.kind.index()].push(*p);
        }
        for list in &mut by_kind {
            list.shuffle(&mut rng);
        }

        let n = pairs.len();
        let fallback = batch_size > n;
        let n_batches = n.div_ceil(batch_size);
        let full = n_batches - 1;
        let last_len = n - full * batch_size;
        let counts = quotas(&by_kind.each_ref().map(Vec::len), batch_size, full, last_len);

        let mut cursor = [0usize; 6];
        let mut batches = Vec::with_capacity(n_batches);
        for (index, row) in counts.iter().enumerate() {
            let mut batch = Vec::with_capacity(row.iter().sum());
            for kind in PairKind::ALL {
                let k = kind.index();
                batch.extend_from_slice(&by_kind[k][cursor[k]..cursor[k] + row[k]]);
                cursor[k] += row[k];
            }
            batch.shuffle(&mut rng);
            batches.push(Batch {
                index,
                pairs: batch,
                fallback,
            });
        }
        debug_assert!(cursor.iter().zip(&by_kind).all(|(c, l)| *c == l.len()));
        Ok(Self {
            batches: batches.into_iter(),
        })
    }
}

impl Iterator for BatchIterator {
    type Item = Batch;

    fn next(&mut self) -> Option<Batch> {
        self.batches.next()
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        self.batches.size_hint()
    }
}

impl ExactSizeIterator for BatchIterator {}

/// Per-batch kind counts: `full` batches of `size` followed by one of `last`.
fn quotas(kind_counts: &[usize; 6], size: usize, full: usize, last: usize) -> Vec<[usize; 6]> {
    let n: usize = kind_counts.iter().sum();
    let base_full = kind_counts.map(|c| c * size / n);
    let base_last = kind_counts.map(|c| c * last / n);
    let spare: [usize; 6] = std::array::from_fn(|k| kind_counts[k] - full * base_full[k] - base_last[k]);

    // Last batch: top up with the kinds holding the largest remainders.
    let short_last = last - base_last.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..6).collect();
    order.sort_by(|&a, &b| ((kind_counts[b] * last) % n).cmp(&((kind_counts[a] * last) % n)).then(a.cmp(&b)));
    let mut last_row = base_last;
    let mut extra = spare;
    for &k in order.iter().filter(|&&k| spare[k] > 0).take(short_last) {
        last_row[k] += 1;
        extra[k] -= 1;
    }

    // Full batches: deal the remaining spares round-robin.
    let mut rows = vec![base_full; full];
    let mut slot = 0;
    for (k, &e) in extra.iter().enumerate() {
        for _ in 0..e {
            rows[slot % full][k] += 1;
            slot += 1;
        }
    }
    rows.push(last_row);
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dataset(counts: [usize; 6]) -> Vec<PatchPair> {
        let mut out = Vec::new();
        for (k, &c) in counts.iter().enumerate() {
            let kind = PairKind::ALL[k];
            for i in 0..c {
                out.push(PatchPair {
                    a: out.len(),
                    b: i,
                    y: u8::from(kind.is_similar()),
                    kind,
                });
            }
        }
        out
    }

    fn max_deviation(pairs: &[PatchPair], batches: &[Batch]) -> f64 {
        let mut hist = [0usize; 6];
        for p in pairs {
            hist[p.kind.index()] += 1;
        }
        let n = pairs.len() as f64;
        let mut worst: f64 = 0.0;
        for b in batches {
            let h = b.kind_histogram();
            for k in 0..6 {
                let expect = hist[k] as f64 / n * b.pairs.len() as f64;
                worst = worst.max((h[k] as f64 - expect).abs());
            }
        }
        worst
    }

    #[test]
    fn exact_divisibility() {
        let pairs = dataset([100; 6]);
        let batches: Vec<Batch> = BatchIterator::new(&pairs, 60, 3).unwrap().collect();
        assert_eq!(batches.len(), 10);
        for b in &batches {
            assert_eq!(b.kind_histogram(), [10; 6]);
            assert!(!b.fallback);
        }
    }

    #[test]
    fn uneven_kinds_stay_within_one() {
        let pairs = dataset([696, 420, 24, 830, 700, 114]);
        assert_eq!(pairs.len(), 2784);
        let batches: Vec<Batch> = BatchIterator::new(&pairs, 64, 11).unwrap().collect();
        assert_eq!(batches.len(), 44);
        assert!(max_deviation(&pairs, &batches) <= 1.0);
        let mut seen: Vec<usize> = batches.iter().flat_map(|b| b.pairs.iter().map(|p| p.a)).collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..2784).collect::<Vec<_>>());
    }

    #[test]
    fn deterministic_per_epoch_seed() {
        let pairs = dataset([7, 13, 2, 40, 9, 1]);
        let a: Vec<Batch> = BatchIterator::new(&pairs, 8, 5).unwrap().collect();
        let b: Vec<Batch> = BatchIterator::new(&pairs, 8, 5).unwrap().collect();
        let c: Vec<Batch> = BatchIterator::new(&pairs, 8, 6).unwrap().collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn fallback_and_errors() {
        let pairs = dataset([1, 2, 0, 3, 0, 1]);
        let batches: Vec<Batch> = BatchIterator::new(&pairs, 64, 0).unwrap().collect();
        assert_eq!(batches.len(), 1);
        assert!(batches[0].fallback);
        assert_eq!(batches[0].pairs.len(), 7);
        assert!(BatchIterator::new(&pairs, 5, 0).is_err());
        assert!(BatchIterator::new(&[], 6, 0).is_err());
    }

    proptest::proptest! {
        #[test]
        fn deviation_bound_holds(counts in proptest::array::uniform6(0usize..200), size in 6usize..100, seed in 0u64..1000) {
            proptest::prop_assume!(counts.iter().sum::<usize>() > 0);
            let pairs = dataset(counts);
            let batches: Vec<Batch> = BatchIterator::new(&pairs, size, seed).unwrap().collect();
            proptest::prop_assert!(max_deviation(&pairs, &batches) <= 1.0 + 1e-12);
            let total: usize = batches.iter().map(|b| b.pairs.len()).sum();
            proptest::prop_assert_eq!(total, pairs.len());
            for b in &batches[..batches.len() - 1] {
                proptest::prop_assert_eq!(b.pairs.len(), size.min(pairs.len()));
            }
        }
    }
}
