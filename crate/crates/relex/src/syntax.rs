//! Dependency trees, head selection, syntactic distance, and candidate-pair
//! pruning.
//!
//! Trees are per-sentence; cross-sentence pairs get the
//! [`CROSS_SENTENCE_SENTINEL`] distance rather than an error so document-level
//! pipelines can prune them uniformly.

use std::collections::HashMap;
use std::ops::Range;

use crate::corpus::{Document, EntityChunk};
use crate::error::{Error, Result};
use crate::pipeline::CandidatePair;

/// Distance reported for pairs in different sentences.
pub const CROSS_SENTENCE_SENTINEL: usize = 1000;

/// One head pointer per sentence token; `None` marks the root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DependencyTree {
    heads: Vec<Option<usize>>,
    labels: Option<Vec<String>>,
}

impl DependencyTree {
    /// Validates single-rootedness, in-bounds heads, and acyclicity.
    pub fn new(heads: Vec<Option<usize>>, labels: Option<Vec<String>>) -> Result<Self> {
        let n = heads.len();
        if n == 0 {
            return Err(Error::InvalidTree("empty tree".into()));
        }
        let roots = heads.iter().filter(|h| h.is_none()).count();
        if roots != 1 {
            return Err(Error::InvalidTree(format!("expected exactly one root, found {roots}")));
        }
        for (i, h) in heads.iter().enumerate() {
            if let Some(h) = h {
                if *h >= n {
                    return Err(Error::InvalidTree(format!("head {h} of token {i} out of bounds")));
                }
            }
        }
        if let Some(ref labels) = labels {
            if labels.len() != n {
                return Err(Error::InvalidTree("label list length differs from head list".into()));
            }
        }
        // Acyclicity: every node must reach the root in at most n steps.
        for start in 0..n {
            let mut cur = start;
            let mut steps = 0;
            while let Some(h) = heads[cur] {
                cur = h;
                steps += 1;
                if steps > n {
                    return Err(Error::InvalidTree(format!("cycle involving token {start}")));
                }
            }
        }
        Ok(DependencyTree { heads, labels })
    }

    /// Build from signed head indices where `-1` marks the root.
    pub fn from_signed_heads(heads: &[i64]) -> Result<Self> {
        let converted = heads
            .iter()
            .map(|&h| {
                if h < -1 {
                    Err(Error::InvalidTree(format!("invalid head {h}")))
                } else if h == -1 {
                    Ok(None)
                } else {
                    Ok(Some(h as usize))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        DependencyTree::new(converted, None)
    }

    pub fn len(&self) -> usize {
        self.heads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heads.is_empty()
    }

    pub fn head_of(&self, token: usize) -> Option<usize> {
        self.heads[token]
    }

    pub fn root(&self) -> usize {
        self.heads
            .iter()
            .position(|h| h.is_none())
            .expect("validated tree has a root")
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }
}

/// The unique path between two tokens of a tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepPath {
    nodes: Vec<usize>,
}

impl DepPath {
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    /// Edge count; zero for a path from a token to itself.
    pub fn len(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Nodes strictly between the two endpoints.
    pub fn interior(&self) -> &[usize] {
        if self.nodes.len() <= 2 {
            &[]
        } else {
            &self.nodes[1..self.nodes.len() - 1]
        }
    }
}

/// Deterministic fallback parse: token 0 is the root and every other token
/// attaches to its left neighbor.
pub fn chain_fallback_tree(sentence_len: usize) -> Result<DependencyTree> {
    if sentence_len == 0 {
        return Err(Error::invalid("chain fallback requires sentence_len >= 1"));
    }
    let mut heads = Vec::with_capacity(sentence_len);
    heads.push(None);
    for i in 1..sentence_len {
        heads.push(Some(i - 1));
    }
    DependencyTree::new(heads, None)
}

fn check_range(tree: &DependencyTree, range: &Range<usize>) -> Result<()> {
    if range.is_empty() || range.end > tree.len() {
        return Err(Error::invalid(format!(
            "token range {range:?} invalid for tree of {} nodes",
            tree.len()
        )));
    }
    Ok(())
}

/// Syntactic head of a token span: the last token whose head lies outside the
/// span. When every head is internal (the span contains the root and all its
/// covered structure), the root itself is returned.
pub fn head_token(tree: &DependencyTree, range: Range<usize>) -> Result<usize> {
    check_range(tree, &range)?;
    let mut head = None;
    for i in range.clone() {
        if let Some(h) = tree.head_of(i) {
            if !range.contains(&h) {
                head = Some(i);
            }
        }
    }
    Ok(head.unwrap_or_else(|| tree.root()))
}

/// The unique tree path from `i` to `j`, found by splicing the two
/// root-directed ancestor chains at their lowest common ancestor.
pub fn dependency_path(tree: &DependencyTree, i: usize, j: usize) -> Result<DepPath> {
    if i >= tree.len() || j >= tree.len() {
        return Err(Error::invalid(format!(
            "token index out of bounds: {i}, {j} vs {} nodes",
            tree.len()
        )));
    }
    let mut up_from_i = vec![i];
    let mut cur = i;
    while let Some(h) = tree.head_of(cur) {
        up_from_i.push(h);
        cur = h;
    }
    let position: HashMap<usize, usize> =
        up_from_i.iter().enumerate().map(|(k, &n)| (n, k)).collect();

    let mut up_from_j = Vec::new();
    let mut cur = j;
    let lca_index = loop {
        if let Some(&k) = position.get(&cur) {
            break k;
        }
        up_from_j.push(cur);
        cur = tree.head_of(cur).expect("paths to the root must meet");
    };

    let mut nodes = up_from_i[..=lca_index].to_vec();
    nodes.extend(up_from_j.into_iter().rev());
    Ok(DepPath { nodes })
}

/// Number of edges between two tokens of a tree.
pub fn tree_distance(tree: &DependencyTree, i: usize, j: usize) -> Result<usize> {
    Ok(dependency_path(tree, i, j)?.len())
}

/// Resolved per-sentence trees for one document, with the bookkeeping needed
/// to map document-level chunk ranges onto sentence-local token indices.
#[derive(Debug, Clone)]
pub struct SentenceTrees {
    trees: Vec<DependencyTree>,
    sentence_starts: Vec<usize>,
}

impl SentenceTrees {
    /// Use the document's stored trees where present, chain fallbacks elsewhere.
    pub fn for_document(doc: &Document) -> Result<Self> {
        let mut trees = Vec::with_capacity(doc.sentences.len());
        let mut sentence_starts = Vec::with_capacity(doc.sentences.len());
        for sentence in &doc.sentences {
            let len = sentence.token_range.len();
            let tree = match doc.trees.get(sentence.index).and_then(|t| t.as_ref()) {
                Some(tree) => {
                    if tree.len() != len {
                        return Err(Error::InvalidTree(format!(
                            "tree for sentence {} has {} nodes, sentence has {len} tokens",
                            sentence.index,
                            tree.len()
                        )));
                    }
                    tree.clone()
                }
                None => chain_fallback_tree(len)?,
            };
            trees.push(tree);
            sentence_starts.push(sentence.token_range.start);
        }
        Ok(SentenceTrees { trees, sentence_starts })
    }

    pub fn tree(&self, sentence_index: usize) -> &DependencyTree {
        &self.trees[sentence_index]
    }

    /// Convert a chunk's document-level token range to sentence-local indices.
    pub fn local_range(&self, chunk: &EntityChunk) -> Range<usize> {
        let start = self.sentence_starts[chunk.sentence_index];
        (chunk.token_range.start - start)..(chunk.token_range.end - start)
    }

    /// Sentence-local head token of a chunk.
    pub fn chunk_head(&self, chunk: &EntityChunk) -> Result<usize> {
        head_token(self.tree(chunk.sentence_index), self.local_range(chunk))
    }
}

/// Edge count between the head tokens of two chunks; the sentinel for
/// cross-sentence pairs.
pub fn syntactic_distance(
    trees: &SentenceTrees,
    a: &EntityChunk,
    b: &EntityChunk,
) -> Result<usize> {
    if a.sentence_index != b.sentence_index {
        return Ok(CROSS_SENTENCE_SENTINEL);
    }
    let tree = trees.tree(a.sentence_index);
    let ha = head_token(tree, trees.local_range(a))?;
    let hb = head_token(tree, trees.local_range(b))?;
    tree_distance(tree, ha, hb)
}

/// Keep only pairs within `max_dist`, preserving order.
pub fn prune_pairs(
    pairs: Vec<CandidatePair>,
    trees: &SentenceTrees,
    max_dist: usize,
) -> Result<Vec<CandidatePair>> {
    let mut kept = Vec::with_capacity(pairs.len());
    for pair in pairs {
        if syntactic_distance(trees, &pair.chunk1, &pair.chunk2)? <= max_dist {
            kept.push(pair);
        }
    }
    Ok(kept)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;

    fn chunk(range: Range<usize>, sentence: usize) -> EntityChunk {
        EntityChunk {
            entity_type: "X".into(),
            token_range: range,
            text: String::new(),
            sentence_index: sentence,
        }
    }

    #[test]
    fn chain_fallback_shapes() {
        let t = chain_fallback_tree(1).unwrap();
        assert_eq!(t.head_of(0), None);
        let t = chain_fallback_tree(3).unwrap();
        assert_eq!(t.head_of(0), None);
        assert_eq!(t.head_of(1), Some(0));
        assert_eq!(t.head_of(2), Some(1));
        assert!(chain_fallback_tree(0).is_err());
    }

    #[test]
    fn tree_validation_rejects_bad_structures() {
        assert!(DependencyTree::from_signed_heads(&[]).is_err());
        // two roots
        assert!(DependencyTree::from_signed_heads(&[-1, -1]).is_err());
        // no root (cycle)
        assert!(DependencyTree::from_signed_heads(&[1, 0]).is_err());
        // out of bounds
        assert!(DependencyTree::from_signed_heads(&[-1, 5]).is_err());
        assert!(DependencyTree::from_signed_heads(&[-1, 0, 1]).is_ok());
    }

    #[test]
    fn head_token_single_token_chunk() {
        let t = chain_fallback_tree(3).unwrap();
        assert_eq!(head_token(&t, 2..3).unwrap(), 2);
    }

    #[test]
    fn head_token_prefers_last_external_head() {
        // Chain heads [-1, 0, 1]; chunk {1, 2}: token 1's head (0) is outside.
        let t = chain_fallback_tree(3).unwrap();
        assert_eq!(head_token(&t, 1..3).unwrap(), 1);
    }

    #[test]
    fn head_token_whole_sentence_returns_root() {
        let t = DependencyTree::from_signed_heads(&[1, -1, 1]).unwrap();
        assert_eq!(head_token(&t, 0..3).unwrap(), 1);
    }

    #[test]
    fn dependency_path_basics() {
        let t = chain_fallback_tree(3).unwrap();
        let p = dependency_path(&t, 1, 1).unwrap();
        assert_eq!(p.nodes(), &[1]);
        assert_eq!(p.len(), 0);

        let p = dependency_path(&t, 0, 2).unwrap();
        assert_eq!(p.nodes(), &[0, 1, 2]);
        assert_eq!(p.len(), 2);

        let rev = dependency_path(&t, 2, 0).unwrap();
        let mut nodes = rev.nodes().to_vec();
        nodes.reverse();
        assert_eq!(nodes, p.nodes());
        assert_eq!(rev.len(), p.len());
    }

    #[test]
    fn dependency_path_through_lca() {
        // 0 <- 1 -> 2, root 1: path 0..2 goes through the root.
        let t = DependencyTree::from_signed_heads(&[1, -1, 1]).unwrap();
        let p = dependency_path(&t, 0, 2).unwrap();
        assert_eq!(p.nodes(), &[0, 1, 2]);
        assert_eq!(p.interior(), &[1]);
    }

    #[test]
    fn dependency_path_rejects_bad_indices() {
        let t = chain_fallback_tree(2).unwrap();
        assert!(dependency_path(&t, 0, 5).is_err());
    }

    fn doc_with_sentences(text: &str) -> Document {
        Document::from_text("d", text)
    }

    #[test]
    fn syntactic_distance_same_chunk_is_zero() {
        let doc = doc_with_sentences("a b c d");
        let trees = SentenceTrees::for_document(&doc).unwrap();
        let c = chunk(1..2, 0);
        assert_eq!(syntactic_distance(&trees, &c, &c).unwrap(), 0);
    }

    #[test]
    fn syntactic_distance_on_chain() {
        let doc = doc_with_sentences("a b c d");
        let trees = SentenceTrees::for_document(&doc).unwrap();
        let a = chunk(0..1, 0);
        let b = chunk(3..4, 0);
        assert_eq!(syntactic_distance(&trees, &a, &b).unwrap(), 3);
        assert_eq!(syntactic_distance(&trees, &b, &a).unwrap(), 3);
    }

    #[test]
    fn cross_sentence_distance_is_the_sentinel() {
        let doc = doc_with_sentences("a b. c d");
        let trees = SentenceTrees::for_document(&doc).unwrap();
        let a = chunk(0..1, 0);
        let b = chunk(3..4, 1);
        assert_eq!(syntactic_distance(&trees, &a, &b).unwrap(), CROSS_SENTENCE_SENTINEL);
    }

    #[test]
    fn stored_trees_override_the_fallback() {
        let mut doc = doc_with_sentences("a b c");
        // Star tree rooted at token 2: distance(0, 1) becomes 2, not 1.
        doc.trees = vec![Some(DependencyTree::from_signed_heads(&[2, 2, -1]).unwrap())];
        let trees = SentenceTrees::for_document(&doc).unwrap();
        let a = chunk(0..1, 0);
        let b = chunk(1..2, 0);
        assert_eq!(syntactic_distance(&trees, &a, &b).unwrap(), 2);
    }

    mod pruning {
        use super::*;
        use crate::pipeline::CandidatePair;

        fn pair(doc: &Document, a: Range<usize>, b: Range<usize>) -> CandidatePair {
            CandidatePair {
                chunk1: chunk(a, 0),
                chunk2: chunk(b, 0),
                doc_id: doc.id.clone(),
                same_sentence: true,
            }
        }

        #[test]
        fn prune_keeps_pairs_within_threshold() {
            let doc = doc_with_sentences("a b c d e f");
            let trees = SentenceTrees::for_document(&doc).unwrap();
            // Chain distances: 1, 4, 2.
            let pairs = vec![
                pair(&doc, 0..1, 1..2),
                pair(&doc, 0..1, 4..5),
                pair(&doc, 2..3, 4..5),
            ];
            let kept = prune_pairs(pairs.clone(), &trees, 2).unwrap();
            assert_eq!(kept.len(), 2);
            assert_eq!(kept[0], pairs[0]);
            assert_eq!(kept[1], pairs[2]);
        }

        #[test]
        fn sentinel_threshold_keeps_everything() {
            let doc = doc_with_sentences("a b c d e f");
            let trees = SentenceTrees::for_document(&doc).unwrap();
            let pairs = vec![pair(&doc, 0..1, 5..6), pair(&doc, 0..1, 1..2)];
            let kept = prune_pairs(pairs.clone(), &trees, CROSS_SENTENCE_SENTINEL).unwrap();
            assert_eq!(kept, pairs);
        }

        #[test]
        fn zero_threshold_keeps_only_shared_heads() {
            let doc = doc_with_sentences("a b c");
            let trees = SentenceTrees::for_document(&doc).unwrap();
            // Chunks {0,1} and {1,2} on a chain share head token... check:
            // heads [-1,0,1]: {0,1} -> root 0 is internal, token 1 head 0 internal
            // => root 0; {1,2} -> token 1 head 0 external => 1. Distance 1.
            let p01 = pair(&doc, 0..2, 1..3);
            let same = pair(&doc, 1..2, 1..2);
            let kept = prune_pairs(vec![p01, same.clone()], &trees, 0).unwrap();
            assert_eq!(kept, vec![same]);
        }
    }

    mod bfs_oracle {
        use super::*;
        use rand::{Rng, SeedableRng};
        use rand_chacha::ChaCha8Rng;
        use std::collections::VecDeque;

        /// Independent distance oracle: breadth-first search over the
        /// undirected edge set.
        pub fn bfs_distance(tree: &DependencyTree, i: usize, j: usize) -> usize {
            let n = tree.len();
            let mut adj = vec![Vec::new(); n];
            for t in 0..n {
                if let Some(h) = tree.head_of(t) {
                    adj[t].push(h);
                    adj[h].push(t);
                }
            }
            let mut dist = vec![usize::MAX; n];
            let mut q = VecDeque::new();
            dist[i] = 0;
            q.push_back(i);
            while let Some(u) = q.pop_front() {
                for &v in &adj[u] {
                    if dist[v] == usize::MAX {
                        dist[v] = dist[u] + 1;
                        q.push_back(v);
                    }
                }
            }
            dist[j]
        }

        /// Random tree over `n` nodes with an arbitrary root position.
        pub fn random_tree(rng: &mut ChaCha8Rng, n: usize) -> DependencyTree {
            // Random attachment to an earlier node, then relabel by a random
            // permutation so the root is not always token 0.
            let mut perm: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                let j = rng.random_range(0..=i);
                perm.swap(i, j);
            }
            let mut heads = vec![None; n];
            for i in 1..n {
                let parent = rng.random_range(0..i);
                heads[perm[i]] = Some(perm[parent]);
            }
            DependencyTree::new(heads, None).unwrap()
        }

        #[test]
        fn tree_distance_matches_bfs_on_random_trees() {
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            for _ in 0..200 {
                let n = rng.random_range(1..=20);
                let tree = random_tree(&mut rng, n);
                let i = rng.random_range(0..n);
                let j = rng.random_range(0..n);
                assert_eq!(
                    tree_distance(&tree, i, j).unwrap(),
                    bfs_distance(&tree, i, j),
                    "tree={tree:?} i={i} j={j}"
                );
            }
        }

        #[test]
        fn distance_is_symmetric() {
            let mut rng = ChaCha8Rng::seed_from_u64(8);
            for _ in 0..100 {
                let n = rng.random_range(2..=20);
                let tree = random_tree(&mut rng, n);
                let i = rng.random_range(0..n);
                let j = rng.random_range(0..n);
                assert_eq!(
                    tree_distance(&tree, i, j).unwrap(),
                    tree_distance(&tree, j, i).unwrap()
                );
            }
        }
    }
}
