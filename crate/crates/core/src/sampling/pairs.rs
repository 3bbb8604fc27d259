use std::io::{Read, Write};

use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::patch::Patch;
use crate::phantom::{TissueId, BRAIN_TISSUES};
use crate::seeds;
use crate::{MraiError, Result};

/// Which of the six pair families a pair belongs to. `S` is the source
/// scanner, `T` the target scanner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PairKind {
    #[serde(rename = "SS-same")]
    SsSame,
    #[serde(rename = "ST-same")]
    StSame,
    #[serde(rename = "TT-same")]
    TtSame,
    #[serde(rename = "SS-diff")]
    SsDiff,
    #[serde(rename = "ST-diff")]
    StDiff,
    #[serde(rename = "TT-diff")]
    TtDiff,
}

impl PairKind {
    pub const ALL: [PairKind; 6] = [
        PairKind::SsSame,
        PairKind::StSame,
        PairKind::TtSame,
        PairKind::SsDiff,
        PairKind::StDiff,
        PairKind::TtDiff,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            PairKind::SsSame => "SS-same",
            PairKind::StSame => "ST-same",
            PairKind::TtSame => "TT-same",
            PairKind::SsDiff => "SS-diff",
            PairKind::StDiff => "ST-diff",
            PairKind::TtDiff => "TT-diff",
        }
    }

    pub fn is_similar(self) -> bool {
        matches!(self, PairKind::SsSame | PairKind::StSame | PairKind::TtSame)
    }

    /// The kind implied by the two domains and whether the classes agree.
    pub fn classify(domain_a: u8, domain_b: u8, same: bool) -> Self {
        match (domain_a.min(domain_b), domain_a.max(domain_b), same) {
            (0, 0, true) => PairKind::SsSame,
            (0, 0, false) => PairKind::SsDiff,
            (1, 1, true) => PairKind::TtSame,
            (1, 1, false) => PairKind::TtDiff,
            (_, _, true) => PairKind::StSame,
            (_, _, false) => PairKind::StDiff,
        }
    }
}

/// Indices of two pool items plus the similarity label (`y = 1` iff same class).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchPair {
    pub a: usize,
    pub b: usize,
    pub y: u8,
    pub kind: PairKind,
}

/// Number of pair combinations for per-class source counts `N_k` and target
/// counts `M_k`, exactly as the formula is written:
///
/// `C = sum_k (N_k + M_k)^2 + sum_{k<l} (N_k N_l + N_k M_l + M_k M_l)`
pub fn count_pairs(counts: &[(u64, u64)]) -> u64 {
    let same: u64 = counts.iter().map(|&(n, m)| (n + m) * (n + m)).sum();
    let mut cross = 0u64;
    for k in 0..counts.len() {
        for l in k + 1..counts.len() {
            let ((nk, mk), (nl, ml)) = (counts[k], counts[l]);
            cross += nk * nl + nk * ml + mk * ml;
        }
    }
    same + cross
}

struct Block {
    a: Vec<usize>,
    b: Vec<usize>,
    /// `a == b` and self-pairs are skipped.
    skip_diagonal: bool,
}

impl Block {
    fn len(&self) -> u64 {
        let (na, nb) = (self.a.len() as u64, self.b.len() as u64);
        if self.skip_diagonal {
            na * na.saturating_sub(1)
        } else {
            na * nb
        }
    }

    fn decode(&self, rank: u64) -> (usize, usize) {
        if self.skip_diagonal {
            let n1 = self.a.len() as u64 - 1;
            let i = rank / n1;
            let j = rank % n1;
            let j = if j >= i { j + 1 } else { j };
            (self.a[i as usize], self.a[j as usize])
        } else {
            let nb = self.b.len() as u64;
            (self.a[(rank / nb) as usize], self.b[(rank % nb) as usize])
        }
    }
}

/// The full pair enumeration over items labelled `(class, domain)`, held as
/// per-kind blocks so pairs can be decoded by rank without materialising
/// the whole set.
///
/// Same-class pairs are ordered pairs of distinct items (both orientations,
/// no self-pairs). Cross-class pairs for classes `k < l` are `(S_k, S_l)`,
/// `(S_k, T_l)` and `(T_k, T_l)`, one orientation each. The total therefore
/// equals [`count_pairs`] minus the `sum_k (N_k + M_k)` self-pairs.
pub struct PairPlan {
    blocks: [Vec<Block>; 6],
}

impl PairPlan {
    pub fn new(items: &[(usize, u8)]) -> Result<Self> {
        let n_classes = items.iter().map(|&(c, _)| c + 1).max().unwrap_or(0);
        let mut by: Vec<[Vec<usize>; 2]> = vec![[Vec::new(), Vec::new()]; n_classes];
        for (i, &(c, d)) in items.iter().enumerate() {
            if d > 1 {
                return Err(MraiError::InvalidArgument(format!("domain {d} not in {{0, 1}}")));
            }
            by[c][usize::from(d)].push(i);
        }
        let mut blocks: [Vec<Block>; 6] = Default::default();
        let push = |blocks: &mut [Vec<Block>; 6], kind: PairKind, a: &Vec<usize>, b: &Vec<usize>, diag: bool| {
            blocks[kind.index()].push(Block {
                a: a.clone(),
                b: b.clone(),
                skip_diagonal: diag,
            })
        };
        for [s, t] in &by {
            push(&mut blocks, PairKind::SsSame, s, s, true);
            push(&mut blocks, PairKind::StSame, s, t, false);
            push(&mut blocks, PairKind::StSame, t, s, false);
            push(&mut blocks, PairKind::TtSame, t, t, true);
        }
        for k in 0..n_classes {
            for l in k + 1..n_classes {
                let ([sk, tk], [sl, tl]) = (&by[k], &by[l]);
                push(&mut blocks, PairKind::SsDiff, sk, sl, false);
                push(&mut blocks, PairKind::StDiff, sk, tl, false);
                push(&mut blocks, PairKind::TtDiff, tk, tl, false);
            }
        }
        Ok(Self { blocks })
    }

    pub fn kind_count(&self, kind: PairKind) -> u64 {
        self.blocks[kind.index()].iter().map(Block::len).sum()
    }

    pub fn total(&self) -> u64 {
        PairKind::ALL.iter().map(|&k| self.kind_count(k)).sum()
    }

    pub fn decode(&self, kind: PairKind, mut rank: u64) -> (usize, usize) {
        for block in &self.blocks[kind.index()] {
            let len = block.len();
            if rank < len {
                return block.decode(rank);
            }
            rank -= len;
        }
        panic!("rank out of range for {}", kind.name());
    }
}

/// Largest-remainder apportionment of `budget` over `weights`.
pub(crate) fn apportion(weights: &[u64], budget: u64) -> Vec<u64> {
    let total: u64 = weights.iter().sum();
    if total == 0 {
        return vec![0; weights.len()];
    }
    let budget = budget.min(total);
    let mut alloc: Vec<u64> = weights
        .iter()
        .map(|&w| ((u128::from(w) * u128::from(budget)) / u128::from(total)) as u64)
        .collect();
    let mut rem: Vec<(u128, usize)> = weights
        .iter()
        .enumerate()
        .map(|(i, &w)| ((u128::from(w) * u128::from(budget)) % u128::from(total), i))
        .collect();
    rem.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let short = budget - alloc.iter().sum::<u64>();
    for &(_, i) in rem.iter().take(short as usize) {
        alloc[i] += 1;
    }
    alloc
}

/// Enumerate all pairs, or a kind-stratified subsample when the enumeration
/// exceeds `max_pairs`. Output is grouped by kind, ranks ascending.
pub fn enumerate_pairs(items: &[(usize, u8)], max_pairs: usize, pair_seed: u64) -> Result<Vec<PatchPair>> {
    let plan = PairPlan::new(items)?;
    let counts: Vec<u64> = PairKind::ALL.iter().map(|&k| plan.kind_count(k)).collect();
    let total: u64 = counts.iter().sum();
    let quotas = if total > max_pairs as u64 {
        apportion(&counts, max_pairs as u64)
    } else {
        counts.clone()
    };
    let mut rng = seeds::rng(pair_seed);
    let mut pairs = Vec::with_capacity(quotas.iter().sum::<u64>() as usize);
    for (kind, (&n, &q)) in PairKind::ALL.iter().zip(counts.iter().zip(&quotas)) {
        let ranks: Vec<u64> = if q == n {
            (0..n).collect()
        } else {
            let mut r: Vec<u64> = index::sample(&mut rng, n as usize, q as usize)
                .into_iter()
                .map(|i| i as u64)
                .collect();
            r.sort_unstable();
            r
        };
        for rank in ranks {
            let (a, b) = plan.decode(*kind, rank);
            pairs.push(PatchPair {
                a,
                b,
                y: u8::from(kind.is_similar()),
                kind: *kind,
            });
        }
    }
    Ok(pairs)
}

/// Patches plus the similarity-labelled pairs drawn from them.
#[derive(Debug, Clone)]
pub struct PairDataset {
    /// Source patches first, then target patches.
    pub patches: Vec<Patch>,
    pub pairs: Vec<PatchPair>,
    /// Source patches per tissue, in [`BRAIN_TISSUES`] order.
    pub source_counts: [usize; 3],
    pub target_counts: [usize; 3],
    /// Size of the full enumeration before any subsampling.
    pub enumerated: u64,
}

impl PairDataset {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Tissues contributing at least one patch.
    pub fn class_set(&self) -> Vec<TissueId> {
        BRAIN_TISSUES
            .iter()
            .enumerate()
            .filter(|(i, _)| self.source_counts[*i] + self.target_counts[*i] > 0)
            .map(|(_, t)| *t)
            .collect()
    }

    pub fn kinds(&self) -> Vec<PairKind> {
        self.pairs.iter().map(|p| p.kind).collect()
    }

    pub fn kind_histogram(&self) -> [usize; 6] {
        let mut h = [0; 6];
        for p in &self.pairs {
            h[p.kind.index()] += 1;
        }
        h
    }

    /// Network inputs for every patch in the pool.
    pub fn inputs(&self) -> Vec<Vec<f64>> {
        self.patches.iter().map(Patch::input_vector).collect()
    }

    pub fn records(&self) -> Vec<PairRecord> {
        self.pairs
            .iter()
            .map(|p| {
                let (a, b) = (&self.patches[p.a], &self.patches[p.b]);
                PairRecord {
                    a_x: a.center.0,
                    a_y: a.center.1,
                    a_scanner: a.scanner_id,
                    a_tissue: a.tissue.name().to_string(),
                    a_subject: a.subject_seed,
                    b_x: b.center.0,
                    b_y: b.center.1,
                    b_scanner: b.scanner_id,
                    b_tissue: b.tissue.name().to_string(),
                    b_subject: b.subject_seed,
                    y: p.y,
                    kind: p.kind,
                }
            })
            .collect()
    }
}

/// Build the pair dataset from source (scanner 0) and target (scanner 1)
/// patches.
pub fn build_pairs(source: &[Patch], target: &[Patch], max_pairs: usize, pair_seed: u64) -> Result<PairDataset> {
    if source.is_empty() && target.is_empty() {
        return Err(MraiError::InvalidArgument("no patches to pair".into()));
    }
    if max_pairs == 0 {
        return Err(MraiError::InvalidArgument("max_pairs must be >= 1".into()));
    }
    let mut source_counts = [0usize; 3];
    let mut target_counts = [0usize; 3];
    let mut items = Vec::with_capacity(source.len() + target.len());
    for (domain, list, counts) in [(0u8, source, &mut source_counts), (1u8, target, &mut target_counts)] {
        for p in list {
            if p.scanner_id != domain {
                return Err(MraiError::InvalidArgument(format!(
                    "patch at {:?} has scanner id {} in the {} list",
                    p.center,
                    p.scanner_id,
                    if domain == 0 { "source" } else { "target" }
                )));
            }
            let class = p.tissue.class_index().ok_or_else(|| {
                MraiError::InvalidArgument(format!("{} patches cannot be paired", p.tissue))
            })?;
            counts[class] += 1;
            items.push((class, domain));
        }
    }
    let enumerated = PairPlan::new(&items)?.total();
    let pairs = enumerate_pairs(&items, max_pairs, pair_seed)?;
    let patches = source.iter().chain(target).cloned().collect();
    Ok(PairDataset {
        patches,
        pairs,
        source_counts,
        target_counts,
        enumerated,
    })
}

/// One row of the audit export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub a_x: usize,
    pub a_y: usize,
    pub a_scanner: u8,
    pub a_tissue: String,
    pub a_subject: u64,
    pub b_x: usize,
    pub b_y: usize,
    pub b_scanner: u8,
    pub b_tissue: String,
    pub b_subject: u64,
    pub y: u8,
    pub kind: PairKind,
}

pub fn write_pair_records<W: Write>(writer: W, records: &[PairRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_pair_records<R: Read>(reader: R) -> Result<Vec<PairRecord>> {
    let mut r = csv::Reader::from_reader(reader);
    r.deserialize().map(|row| row.map_err(MraiError::from)).collect()
}
