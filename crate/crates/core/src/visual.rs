//! Visual-word descriptors, Jaccard dissimilarity and compact inverted files.
//!
//! Objects and queries carry bags of visual words reduced to sets. The
//! dissimilarity between two sets is the Jaccard distance; tree nodes keep the
//! union of their descendants' words, which yields a cheap lower bound on the
//! distance to any descendant.

use crate::error::{Error, Result};

/// Sorted, duplicate-free set of visual-word ids.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct VisualDescriptor(Vec<u32>);

impl VisualDescriptor {
    pub fn new(words: impl IntoIterator<Item = u32>) -> Self {
        let mut words: Vec<u32> = words.into_iter().collect();
        words.sort_unstable();
        words.dedup();
        VisualDescriptor(words)
    }

    /// Wraps an already sorted, deduplicated vector.
    pub(crate) fn from_sorted(words: Vec<u32>) -> Self {
        debug_assert!(words.windows(2).all(|w| w[0] < w[1]));
        VisualDescriptor(words)
    }

    pub fn words(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, word: u32) -> bool {
        self.0.binary_search(&word).is_ok()
    }

    /// Size of the intersection with `other`.
    pub fn intersection_len(&self, other: &VisualDescriptor) -> usize {
        intersection_len(&self.0, &other.0)
    }

    pub fn union(&self, other: &VisualDescriptor) -> VisualDescriptor {
        let (a, b) = (&self.0, &other.0);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(b[j]);
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    out.push(a[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        VisualDescriptor(out)
    }
}

impl FromIterator<u32> for VisualDescriptor {
    fn from_iter<T: IntoIterator<Item = u32>>(iter: T) -> Self {
        VisualDescriptor::new(iter)
    }
}

fn intersection_len(a: &[u32], b: &[u32]) -> usize {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    // Probe the larger side when the sizes are lopsided.
    if small.len() * 16 < large.len() {
        return small
            .iter()
            .filter(|w| large.binary_search(w).is_ok())
            .count();
    }
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < small.len() && j < large.len() {
        match small[i].cmp(&large[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Jaccard distance from set cardinalities.
///
/// Every scoring path (index search, brute force, client-side rescoring)
/// goes through this function so equal inputs give bit-identical scores.
#[inline]
pub fn jaccard_distance(shared: usize, len_a: usize, len_b: usize) -> f64 {
    let union = len_a + len_b - shared;
    if union == 0 {
        return 0.0;
    }
    1.0 - shared as f64 / union as f64
}

/// `1 - |a ∩ b| / |a ∪ b|`; 0 for identical sets, 1 for disjoint ones.
pub fn visual_distance(query: &VisualDescriptor, other: &VisualDescriptor) -> Result<f64> {
    if query.is_empty() {
        return Err(Error::EmptyQueryDescriptor);
    }
    let shared = query.intersection_len(other);
    Ok(jaccard_distance(shared, query.len(), other.len()))
}

/// Lower bound of [`visual_distance`] over every descriptor that is a subset
/// of `aggregate`, from the shared-word count alone.
#[inline]
pub fn visual_lower_bound(shared: usize, query_len: usize) -> f64 {
    1.0 - shared as f64 / query_len as f64
}

/// `1 - |q ∩ agg| / |q|`.
///
/// The best descendant conceivable under `agg` is `q ∩ agg` itself, whose
/// union with `q` is `q`, so no subset of `agg` can score lower.
pub fn min_visual_distance(query: &VisualDescriptor, aggregate: &VisualDescriptor) -> Result<f64> {
    if query.is_empty() {
        return Err(Error::EmptyQueryDescriptor);
    }
    Ok(visual_lower_bound(
        query.intersection_len(aggregate),
        query.len(),
    ))
}

/// Union of all descriptors.
pub fn aggregate_words<'a>(children: impl IntoIterator<Item = &'a VisualDescriptor>) -> VisualDescriptor {
    let mut words: Vec<u32> = children
        .into_iter()
        .flat_map(|d| d.words().iter().copied())
        .collect();
    words.sort_unstable();
    words.dedup();
    VisualDescriptor(words)
}

/// Word → sorted target-id lists, stored as CSR arrays.
///
/// Targets are edge ids at leaves, child tree-node ids at internal nodes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InvertedFile {
    words: Vec<u32>,
    offsets: Vec<u32>,
    targets: Vec<u32>,
}

impl InvertedFile {
    /// Builds from `(word, target)` pairs in any order; duplicates collapse.
    pub fn from_pairs(mut pairs: Vec<(u32, u32)>) -> Self {
        pairs.sort_unstable();
        pairs.dedup();
        let mut words = Vec::new();
        let mut offsets = vec![0u32];
        let mut targets = Vec::with_capacity(pairs.len());
        for (word, target) in pairs {
            if words.last() != Some(&word) {
                if !words.is_empty() {
                    offsets.push(targets.len() as u32);
                }
                words.push(word);
            }
            targets.push(target);
        }
        if !words.is_empty() {
            offsets.push(targets.len() as u32);
        }
        InvertedFile {
            words,
            offsets,
            targets,
        }
    }

    pub(crate) fn from_raw(words: Vec<u32>, offsets: Vec<u32>, targets: Vec<u32>) -> Result<Self> {
        let ok = offsets.len() == words.len() + 1
            && offsets.first() == Some(&0)
            && offsets.last().copied() == Some(targets.len() as u32)
            && offsets.windows(2).all(|w| w[0] < w[1])
            && words.windows(2).all(|w| w[0] < w[1]);
        if !ok {
            return Err(Error::Corrupt("inverted file layout".into()));
        }
        Ok(InvertedFile {
            words,
            offsets,
            targets,
        })
    }

    pub(crate) fn raw_parts(&self) -> (&[u32], &[u32], &[u32]) {
        (&self.words, &self.offsets, &self.targets)
    }

    /// The aggregated word set of everything beneath this file.
    pub fn words(&self) -> &[u32] {
        &self.words
    }

    pub fn descriptor(&self) -> VisualDescriptor {
        VisualDescriptor::from_sorted(self.words.clone())
    }

    pub fn postings(&self, word: u32) -> &[u32] {
        match self.words.binary_search(&word) {
            Ok(i) => &self.targets[self.offsets[i] as usize..self.offsets[i + 1] as usize],
            Err(_) => &[],
        }
    }

    pub fn contains(&self, word: u32) -> bool {
        self.words.binary_search(&word).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &[u32])> + '_ {
        self.words.iter().enumerate().map(move |(i, &w)| {
            (
                w,
                &self.targets[self.offsets[i] as usize..self.offsets[i + 1] as usize],
            )
        })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}
