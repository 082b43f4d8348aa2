//! Treebank preprocessing: label decoration stripping, rare-word
//! replacement, binarization with unary-chain collapsing, and the inverse
//! transform used at evaluation time.
//!
//! Binarization scheme: unary nonterminal chains `A -> B -> ... -> Z` are
//! collapsed into a single node labeled `A|B|...|Z` (the preterminal-to-word
//! edge is never collapsed), and nodes with more than two children are
//! right-binarized with `@A` continuation symbols, where `A` is the
//! (possibly collapsed) parent label. No horizontal markovization.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use thiserror::Error;

use crate::tree::{BinTree, Tree, TreeError};

/// Marker written as the first line of preprocessed treebank files so that
/// double preprocessing can be rejected.
pub const PREPROCESSED_MARKER: &str = "%% lpcfg preprocessed v1";

/// How rare words are replaced.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RareMode {
    /// `_RARE_<POS>`
    Pos,
    /// `_RARE_<POS>+<morph>`
    PosMorph,
}

impl RareMode {
    pub fn as_str(self) -> &'static str {
        match self {
            RareMode::Pos => "pos",
            RareMode::PosMorph => "pos+morph",
        }
    }
}

/// Per-corpus preprocessing and evaluation settings, loadable from a
/// `key=value` text file.
#[derive(Clone, Debug, PartialEq)]
pub struct Profile {
    /// Label decoration delimiters; a label is truncated at the first
    /// occurrence of any of these (labels that start with a delimiter are
    /// kept whole, so reserved tokens like `-LRB-` survive).
    pub delimiters: Vec<String>,
    /// Words with training count strictly below this are replaced.
    pub rare_threshold: u32,
    pub rare_mode: RareMode,
    /// Append the morphology value to preterminal labels (`VB` -> `VB+Fin`).
    pub fine_tags: bool,
    /// Which `key=value` field of the sidecar morph column supplies the fine
    /// tag value; `None` uses the whole morph string.
    pub fine_feature: Option<String>,
    /// Labels deleted from bracket scoring.
    pub delete_labels: BTreeSet<String>,
    /// POS tags whose tokens are removed from bracket index space.
    pub punct_pos: BTreeSet<String>,
}

impl Default for Profile {
    fn default() -> Self {
        Profile {
            delimiters: vec!["-".into(), "=".into(), "##".into()],
            rare_threshold: crate::presets::RARE_THRESHOLD,
            rare_mode: RareMode::Pos,
            fine_tags: false,
            fine_feature: None,
            delete_labels: ["TOP", "ROOT", "VROOT"].iter().map(|s| s.to_string()).collect(),
            punct_pos: BTreeSet::new(),
        }
    }
}

impl Profile {
    pub fn parse(text: &str) -> Result<Profile, TreebankError> {
        let mut p = Profile::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| TreebankError::Profile { line: i + 1, message: "expected key=value".into() })?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "delimiters" => {
                    p.delimiters = value.split(',').map(|s| s.to_string()).filter(|s| !s.is_empty()).collect()
                }
                "rare_threshold" => {
                    p.rare_threshold = value.parse().map_err(|_| TreebankError::Profile {
                        line: i + 1,
                        message: format!("bad rare_threshold `{value}`"),
                    })?
                }
                "rare_mode" => {
                    p.rare_mode = match value {
                        "pos" => RareMode::Pos,
                        "pos+morph" => RareMode::PosMorph,
                        _ => {
                            return Err(TreebankError::Profile {
                                line: i + 1,
                                message: format!("rare_mode must be pos or pos+morph, got `{value}`"),
                            })
                        }
                    }
                }
                "fine_tags" => {
                    p.fine_tags = value.parse().map_err(|_| TreebankError::Profile {
                        line: i + 1,
                        message: format!("bad fine_tags `{value}`"),
                    })?
                }
                "fine_feature" => p.fine_feature = Some(value.to_string()),
                "delete_labels" => {
                    p.delete_labels = value.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
                }
                "punct_pos" => {
                    p.punct_pos = value.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
                }
                _ => {
                    return Err(TreebankError::Profile { line: i + 1, message: format!("unknown key `{key}`") })
                }
            }
        }
        if p.rare_threshold < 1 {
            return Err(TreebankError::Profile { line: 0, message: "rare_threshold must be >= 1".into() });
        }
        Ok(p)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("delimiters={}\n", self.delimiters.join(",")));
        s.push_str(&format!("rare_threshold={}\n", self.rare_threshold));
        s.push_str(&format!("rare_mode={}\n", self.rare_mode.as_str()));
        s.push_str(&format!("fine_tags={}\n", self.fine_tags));
        if let Some(f) = &self.fine_feature {
            s.push_str(&format!("fine_feature={f}\n"));
        }
        s.push_str(&format!("delete_labels={}\n", self.delete_labels.iter().cloned().collect::<Vec<_>>().join(",")));
        s.push_str(&format!("punct_pos={}\n", self.punct_pos.iter().cloned().collect::<Vec<_>>().join(",")));
        s
    }

    /// Value used for fine tags and morph signatures: the configured feature
    /// extracted from a `key=val|key=val` morph string, or the whole string.
    pub fn morph_value<'a>(&self, morph: &'a str) -> Option<&'a str> {
        if morph.is_empty() {
            return None;
        }
        match &self.fine_feature {
            None => Some(morph),
            Some(feature) => morph
                .split('|')
                .find_map(|kv| kv.strip_prefix(feature.as_str()).and_then(|r| r.strip_prefix('='))),
        }
    }
}

/// Training-set word counts plus the rare-word policy.
#[derive(Clone, Debug)]
pub struct Vocab {
    counts: BTreeMap<String, u64>,
    pub threshold: u32,
    pub mode: RareMode,
}

impl Vocab {
    pub fn build(trees: &[Tree], threshold: u32, mode: RareMode) -> Vocab {
        assert!(threshold >= 1, "rare threshold must be >= 1");
        let mut counts = BTreeMap::new();
        for t in trees {
            for w in t.words() {
                *counts.entry(w.to_string()).or_insert(0) += 1;
            }
        }
        Vocab { counts, threshold, mode }
    }

    pub fn count(&self, word: &str) -> u64 {
        self.counts.get(word).copied().unwrap_or(0)
    }

    pub fn is_rare(&self, word: &str) -> bool {
        self.count(word) < self.threshold as u64
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.counts.iter().map(|(w, c)| (w.as_str(), *c))
    }
}

/// Truncates a label at the first delimiter occurrence. Labels that start
/// with a delimiter are kept whole.
fn strip_label(label: &str, delimiters: &[String]) -> String {
    for d in delimiters {
        if label.starts_with(d.as_str()) {
            return label.to_string();
        }
    }
    let cut = delimiters
        .iter()
        .filter_map(|d| label.find(d.as_str()))
        .min();
    match cut {
        Some(i) => label[..i].to_string(),
        None => label.to_string(),
    }
}

/// Drops functional decorations from every nonterminal label. With
/// `profile.fine_tags`, the morphology value for each token (from `morphs`,
/// aligned with the leaves) is re-appended to its preterminal label with `+`.
pub fn strip_decorations(
    tree: &Tree,
    profile: &Profile,
    morphs: Option<&[String]>,
) -> Result<Tree, TreebankError> {
    if profile.fine_tags && morphs.is_none() {
        return Err(TreebankError::MissingMorphology { token: "<fine tags need a morphology sidecar>".into() });
    }
    if let Some(m) = morphs {
        let n = tree.yield_len();
        if m.len() != n {
            return Err(TreebankError::Misaligned { expected: n, got: m.len() });
        }
    }
    let mut leaf = 0usize;
    Ok(strip_walk(tree, profile, morphs, &mut leaf))
}

fn strip_walk(tree: &Tree, profile: &Profile, morphs: Option<&[String]>, leaf: &mut usize) -> Tree {
    match tree {
        Tree::Leaf { word } => {
            *leaf += 1;
            Tree::leaf(word.clone())
        }
        Tree::Node { label, children } => {
            let mut new_label = strip_label(label, &profile.delimiters);
            if profile.fine_tags && tree.is_preterminal() {
                if let Some(morphs) = morphs {
                    if let Some(v) = profile.morph_value(&morphs[*leaf]) {
                        new_label = format!("{new_label}+{v}");
                    }
                }
            }
            let children = children
                .iter()
                .map(|c| strip_walk(c, profile, morphs, leaf))
                .collect();
            Tree::node(new_label, children)
        }
    }
}

/// Replaces every leaf whose word falls under the vocab threshold by its
/// rare signature: `_RARE_<POS>` or `_RARE_<POS>+<morph>`. Case of frequent
/// words is preserved untouched. `morphs` gives per-sentence, per-token
/// morph strings and is required in `PosMorph` mode.
pub fn replace_rare(
    trees: &[Tree],
    vocab: &Vocab,
    profile: &Profile,
    morphs: Option<&[Vec<String>]>,
) -> Result<Vec<Tree>, TreebankError> {
    if vocab.mode == RareMode::PosMorph && morphs.is_none() {
        return Err(TreebankError::MissingMorphology { token: "<pos+morph mode needs a morphology sidecar>".into() });
    }
    trees
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let sent_morphs = morphs.map(|m| m[i].as_slice());
            let mut leaf = 0usize;
            rare_walk(t, vocab, profile, sent_morphs, &mut leaf)
        })
        .collect()
}

pub fn rare_signature(tag: &str, morph: Option<&str>) -> String {
    match morph {
        Some(m) => format!("_RARE_{tag}+{m}"),
        None => format!("_RARE_{tag}"),
    }
}

fn rare_walk(
    tree: &Tree,
    vocab: &Vocab,
    profile: &Profile,
    morphs: Option<&[String]>,
    leaf: &mut usize,
) -> Result<Tree, TreebankError> {
    match tree {
        Tree::Leaf { word } => {
            *leaf += 1;
            Ok(Tree::leaf(word.clone()))
        }
        Tree::Node { label, children } => {
            if tree.is_preterminal() {
                let word = match &children[0] {
                    Tree::Leaf { word } => word,
                    _ => unreachable!("preterminal child is a leaf"),
                };
                let idx = *leaf;
                *leaf += 1;
                let new_word = if vocab.is_rare(word) {
                    match vocab.mode {
                        RareMode::Pos => rare_signature(label, None),
                        RareMode::PosMorph => {
                            let morph = morphs
                                .and_then(|m| m.get(idx))
                                .and_then(|m| profile.morph_value(m))
                                .ok_or_else(|| TreebankError::MissingMorphology { token: word.clone() })?;
                            rare_signature(label, Some(morph))
                        }
                    }
                } else {
                    word.clone()
                };
                Ok(Tree::preterminal(label.clone(), new_word))
            } else {
                let children = children
                    .iter()
                    .map(|c| rare_walk(c, vocab, profile, morphs, leaf))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(Tree::node(label.clone(), children))
            }
        }
    }
}

/// Binarizes a raw tree: collapse unary nonterminal chains into `|`-joined
/// labels, then right-binarize wider nodes with `@`-prefixed continuation
/// symbols.
pub fn binarize(tree: &Tree) -> Result<BinTree, TreebankError> {
    tree.validate_raw()?;
    check_reserved(tree)?;
    bin_walk(tree)
}

fn check_reserved(tree: &Tree) -> Result<(), TreebankError> {
    if let Tree::Node { label, children } = tree {
        if label.contains('|') || label.starts_with('@') {
            return Err(TreebankError::ReservedLabel { label: label.clone() });
        }
        for c in children {
            check_reserved(c)?;
        }
    }
    Ok(())
}

fn bin_walk(tree: &Tree) -> Result<BinTree, TreebankError> {
    // Collapse the unary nonterminal chain starting here.
    let mut labels: Vec<&str> = Vec::new();
    let mut cur = tree;
    loop {
        match cur {
            Tree::Node { label, children } => {
                labels.push(label);
                if children.len() == 1 && !children[0].is_leaf() {
                    cur = &children[0];
                } else {
                    break;
                }
            }
            Tree::Leaf { .. } => unreachable!("validated raw tree"),
        }
    }
    let label = labels.join("|");
    let children = match cur {
        Tree::Node { children, .. } => children,
        Tree::Leaf { .. } => unreachable!(),
    };
    match children.as_slice() {
        [Tree::Leaf { word }] => Ok(BinTree::preterminal(label, word.clone())),
        kids => {
            let mut parts = kids.iter().map(bin_walk).collect::<Result<Vec<_>, _>>()?;
            let continuation = format!("@{label}");
            let mut right = parts.pop().expect(">= 2 children");
            while parts.len() > 1 {
                let left = parts.pop().unwrap();
                right = BinTree::binary(continuation.clone(), left, right);
            }
            Ok(BinTree::binary(label, parts.pop().unwrap(), right))
        }
    }
}

/// Inverts [`binarize`]: splices out `@` continuation nodes and expands
/// `|`-collapsed labels back into unary chains.
pub fn debinarize(tree: &BinTree) -> Result<Tree, TreebankError> {
    if tree.label().starts_with('@') {
        return Err(TreebankError::ContinuationRoot { label: tree.label().to_string() });
    }
    debin_walk(tree)
}

fn debin_walk(tree: &BinTree) -> Result<Tree, TreebankError> {
    match tree {
        BinTree::Preterminal { label, word, .. } => {
            expand_chain(label, vec![Tree::leaf(word.clone())])
        }
        BinTree::Binary { label, left, right, .. } => {
            let mut children = Vec::new();
            splice(left, &mut children)?;
            splice(right, &mut children)?;
            expand_chain(label, children)
        }
    }
}

fn splice(tree: &BinTree, out: &mut Vec<Tree>) -> Result<(), TreebankError> {
    match tree {
        BinTree::Binary { label, left, right, .. } if label.starts_with('@') => {
            if label.len() == 1 {
                return Err(TreebankError::MalformedSynthetic { label: label.clone() });
            }
            splice(left, out)?;
            splice(right, out)
        }
        BinTree::Preterminal { label, .. } if label.starts_with('@') => {
            Err(TreebankError::MalformedSynthetic { label: label.clone() })
        }
        other => {
            out.push(debin_walk(other)?);
            Ok(())
        }
    }
}

fn expand_chain(label: &str, children: Vec<Tree>) -> Result<Tree, TreebankError> {
    let parts: Vec<&str> = label.split('|').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(TreebankError::MalformedSynthetic { label: label.to_string() });
    }
    let mut node = Tree::node(*parts.last().unwrap(), children);
    for part in parts.iter().rev().skip(1) {
        node = Tree::node(*part, vec![node]);
    }
    Ok(node)
}

/// Corpus statistics over a binarized treebank, in the usual report schema:
/// sentence count, token count, lexicon size, nonterminal count (including
/// synthetic and collapsed labels).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CorpusStats {
    pub sentences: usize,
    pub tokens: usize,
    pub lexicon: usize,
    pub nonterminals: usize,
}

pub fn corpus_stats(trees: &[BinTree]) -> CorpusStats {
    let mut words = BTreeSet::new();
    let mut labels = BTreeSet::new();
    let mut tokens = 0usize;
    for t in trees {
        let mut stack = vec![t];
        while let Some(node) = stack.pop() {
            labels.insert(node.label().to_string());
            match node {
                BinTree::Binary { left, right, .. } => {
                    stack.push(right);
                    stack.push(left);
                }
                BinTree::Preterminal { word, .. } => {
                    tokens += 1;
                    words.insert(word.clone());
                }
            }
        }
    }
    CorpusStats { sentences: trees.len(), tokens, lexicon: words.len(), nonterminals: labels.len() }
}

/// One token row of a morphology sidecar.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SidecarToken {
    pub word: String,
    pub pos: String,
    pub morph: String,
}

/// Parses the sidecar TSV: `word<TAB>POS<TAB>morph`, one token per line,
/// blank line between sentences.
pub fn parse_sidecar(text: &str) -> Result<Vec<Vec<SidecarToken>>, TreebankError> {
    let mut sentences = Vec::new();
    let mut current: Vec<SidecarToken> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            if !current.is_empty() {
                sentences.push(std::mem::take(&mut current));
            }
            continue;
        }
        let mut cols = line.split('\t');
        let word = cols.next().unwrap_or_default();
        let pos = cols
            .next()
            .ok_or(TreebankError::Sidecar { line: i + 1, message: "expected word<TAB>POS<TAB>morph".into() })?;
        let morph = cols.next().unwrap_or_default();
        current.push(SidecarToken { word: word.into(), pos: pos.into(), morph: morph.into() });
    }
    if !current.is_empty() {
        sentences.push(current);
    }
    Ok(sentences)
}

/// Checks sentence/token alignment between trees and a sidecar.
pub fn validate_alignment(trees: &[Tree], sidecar: &[Vec<SidecarToken>]) -> Result<(), TreebankError> {
    if trees.len() != sidecar.len() {
        return Err(TreebankError::Misaligned { expected: trees.len(), got: sidecar.len() });
    }
    for (i, (t, s)) in trees.iter().zip(sidecar).enumerate() {
        let words = t.words();
        if words.len() != s.len() {
            return Err(TreebankError::SentenceMisaligned { sentence: i + 1, expected: words.len(), got: s.len() });
        }
        for (w, tok) in words.iter().zip(s) {
            if *w != tok.word {
                return Err(TreebankError::WordMismatch {
                    sentence: i + 1,
                    tree_word: w.to_string(),
                    sidecar_word: tok.word.clone(),
                });
            }
        }
    }
    Ok(())
}

#[derive(Debug, Error)]
pub enum TreebankError {
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error("profile line {line}: {message}")]
    Profile { line: usize, message: String },
    #[error("sidecar line {line}: {message}")]
    Sidecar { line: usize, message: String },
    #[error("missing morphology annotation for token `{token}`")]
    MissingMorphology { token: String },
    #[error("label `{label}` uses characters reserved for binarization ('|', leading '@')")]
    ReservedLabel { label: String },
    #[error("malformed synthetic label `{label}`")]
    MalformedSynthetic { label: String },
    #[error("continuation label `{label}` cannot stand at the root")]
    ContinuationRoot { label: String },
    #[error("expected {expected} sentences/tokens, got {got}")]
    Misaligned { expected: usize, got: usize },
    #[error("sentence {sentence}: expected {expected} tokens, got {got}")]
    SentenceMisaligned { sentence: usize, expected: usize, got: usize },
    #[error("sentence {sentence}: tree word `{tree_word}` does not match sidecar word `{sidecar_word}`")]
    WordMismatch { sentence: usize, tree_word: String, sidecar_word: String },
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::{parse_tree, to_bin_tree};
    use proptest::prelude::*;

    fn bin(s: &str) -> BinTree {
        binarize(&parse_tree(s).unwrap()).unwrap()
    }

    #[test]
    fn unary_chain_collapses_into_preterminal() {
        assert_eq!(bin("(NP (NN dog))"), BinTree::preterminal("NP|NN", "dog"));
    }

    #[test]
    fn already_binary_tree_unchanged() {
        let t = bin("(S (A a) (B b))");
        assert_eq!(
            t,
            BinTree::binary("S", BinTree::preterminal("A", "a"), BinTree::preterminal("B", "b"))
        );
    }

    #[test]
    fn ternary_node_right_binarizes() {
        let t = bin("(S (A a) (B b) (C c))");
        let expected = BinTree::binary(
            "S",
            BinTree::preterminal("A", "a"),
            BinTree::binary("@S", BinTree::preterminal("B", "b"), BinTree::preterminal("C", "c")),
        );
        assert_eq!(t, expected);
        assert_eq!(debinarize(&t).unwrap(), parse_tree("(S (A a) (B b) (C c))").unwrap());
    }

    #[test]
    fn long_unary_chain_and_wide_node() {
        let raw = parse_tree("(S (X (Y (A a) (B b) (C c) (D d))))").unwrap();
        let b = binarize(&raw).unwrap();
        // No unary nonterminal edges and max arity 2, by type; invert exactly.
        assert_eq!(debinarize(&b).unwrap(), raw);
        assert_eq!(b.label(), "S|X|Y");
    }

    #[test]
    fn debinarize_examples() {
        assert_eq!(
            debinarize(&BinTree::preterminal("NP|NN", "dog")).unwrap(),
            parse_tree("(NP (NN dog))").unwrap()
        );
    }

    #[test]
    fn malformed_synthetic_label_rejected() {
        let t = BinTree::binary(
            "S",
            BinTree::preterminal("A", "a"),
            BinTree::binary("@", BinTree::preterminal("B", "b"), BinTree::preterminal("C", "c")),
        );
        assert!(matches!(debinarize(&t), Err(TreebankError::MalformedSynthetic { .. })));
    }

    #[test]
    fn reserved_labels_rejected_up_front() {
        let t = parse_tree("(S (A|B a))").unwrap();
        assert!(matches!(binarize(&t), Err(TreebankError::ReservedLabel { .. })));
    }

    #[test]
    fn strip_decorations_examples() {
        let p = Profile::default();
        let t = parse_tree("(NP-SBJ (NN-1 dog))").unwrap();
        let s = strip_decorations(&t, &p, None).unwrap();
        assert_eq!(s, parse_tree("(NP (NN dog))").unwrap());
        // No delimiter: identity.
        let t = parse_tree("(NP (NN dog))").unwrap();
        assert_eq!(strip_decorations(&t, &p, None).unwrap(), t);
        // Leading delimiter is protected.
        let t = parse_tree("(S (-LRB- -lrb-))").unwrap();
        assert_eq!(strip_decorations(&t, &p, None).unwrap(), t);
    }

    #[test]
    fn fine_tags_append_morph_feature() {
        let mut p = Profile::default();
        p.fine_tags = true;
        p.fine_feature = Some("AZP".into());
        let t = parse_tree("(S (VB runs) (NN dog))").unwrap();
        let morphs = vec!["AZP=Fin|NUM=S".to_string(), "".to_string()];
        let s = strip_decorations(&t, &p, Some(&morphs)).unwrap();
        assert_eq!(s, parse_tree("(S (VB+Fin runs) (NN dog))").unwrap());
        // Without a sidecar, fine tags are a configuration error.
        assert!(strip_decorations(&t, &p, None).is_err());
    }

    #[test]
    fn rare_threshold_is_strictly_less_than() {
        let profile = Profile::default();
        let mut trees: Vec<Tree> = Vec::new();
        for _ in 0..19 {
            trees.push(parse_tree("(S (NN dog) (VB ran))").unwrap());
        }
        trees.push(parse_tree("(S (NN cat) (VB ran))").unwrap());
        // dog: 19, cat: 1, ran: 20
        let vocab = Vocab::build(&trees, 20, RareMode::Pos);
        let out = replace_rare(&trees, &vocab, &profile, None).unwrap();
        assert_eq!(out[0].words(), vec!["_RARE_NN", "ran"]);
        assert_eq!(out[19].words(), vec!["_RARE_NN", "ran"]);

        // Idempotent: replacing again (same vocab) is a fixed point.
        let again = replace_rare(&out, &vocab, &profile, None).unwrap();
        assert_eq!(again, out);
    }

    #[test]
    fn rare_pos_morph_signature() {
        let mut profile = Profile::default();
        profile.rare_mode = RareMode::PosMorph;
        let trees = vec![parse_tree("(S (VB runs) (NN dog))").unwrap()];
        let vocab = Vocab::build(&trees, 20, RareMode::PosMorph);
        let morphs = vec![vec!["Pres".to_string(), "Sg".to_string()]];
        let out = replace_rare(&trees, &vocab, &profile, Some(&morphs)).unwrap();
        assert_eq!(out[0].words(), vec!["_RARE_VB+Pres", "_RARE_NN+Sg"]);
        // Missing sidecar in pos+morph mode is a configuration error.
        assert!(replace_rare(&trees, &vocab, &profile, None).is_err());
    }

    #[test]
    fn corpus_stats_counts() {
        let trees = vec![bin("(S (A a) (B b))"), bin("(S (A a) (B b))")];
        let stats = corpus_stats(&trees);
        assert_eq!(
            stats,
            CorpusStats { sentences: 2, tokens: 4, lexicon: 2, nonterminals: 3 }
        );
        assert_eq!(corpus_stats(&[]), CorpusStats::default());
    }

    #[test]
    fn corpus_stats_matches_naive_recount() {
        let trees: Vec<BinTree> = ["(S (A x) (B y))", "(S (S (A x) (A z)) (C w))", "(T (A x) (B q))"]
            .iter()
            .map(|s| bin(s))
            .collect();
        let stats = corpus_stats(&trees);
        // Second pass, different traversal.
        let mut words = std::collections::HashSet::new();
        let mut labels = std::collections::HashSet::new();
        let mut tokens = 0;
        fn visit(t: &BinTree, words: &mut std::collections::HashSet<String>, labels: &mut std::collections::HashSet<String>, tokens: &mut usize) {
            labels.insert(t.label().to_string());
            match t {
                BinTree::Binary { left, right, .. } => {
                    visit(left, words, labels, tokens);
                    visit(right, words, labels, tokens);
                }
                BinTree::Preterminal { word, .. } => {
                    words.insert(word.clone());
                    *tokens += 1;
                }
            }
        }
        for t in &trees {
            visit(t, &mut words, &mut labels, &mut tokens);
        }
        assert_eq!(stats.tokens, tokens);
        assert_eq!(stats.lexicon, words.len());
        assert_eq!(stats.nonterminals, labels.len());
    }

    #[test]
    fn sidecar_parsing_and_alignment() {
        let text = "the\tD\t_\ndog\tNN\tNUM=Sg\n\nran\tVB\tAZP=Fin\n";
        let side = parse_sidecar(text).unwrap();
        assert_eq!(side.len(), 2);
        assert_eq!(side[0][1].morph, "NUM=Sg");
        let trees =
            vec![parse_tree("(S (D the) (NN dog))").unwrap(), parse_tree("(S (VB ran))").unwrap()];
        validate_alignment(&trees, &side).unwrap();
        let bad = vec![parse_tree("(S (D a) (NN dog))").unwrap(), parse_tree("(S (VB ran))").unwrap()];
        assert!(validate_alignment(&bad, &side).is_err());
    }

    fn arb_raw_tree() -> impl Strategy<Value = Tree> {
        let label = prop::sample::select(vec!["S", "NP", "VP", "PP", "X"]);
        let word = prop::sample::select(vec!["a", "b", "cc", "Dog"]);
        let pre = (label.clone(), word).prop_map(|(l, w)| Tree::preterminal(l, w));
        pre.prop_recursive(5, 40, 4, move |inner| {
            (prop::sample::select(vec!["S", "NP", "VP", "Q"]), prop::collection::vec(inner, 1..5))
                .prop_map(|(l, cs)| Tree::node(l, cs))
        })
    }

    proptest! {
        #[test]
        fn binarize_round_trip(t in arb_raw_tree()) {
            let b = binarize(&t).unwrap();
            prop_assert_eq!(debinarize(&b).unwrap(), t);
        }

        #[test]
        fn binarized_form_is_convertible(t in arb_raw_tree()) {
            // BinTree -> Tree -> BinTree via the structural converter.
            let b = binarize(&t).unwrap();
            let as_tree = b.to_tree();
            prop_assert_eq!(to_bin_tree(&as_tree).unwrap(), b);
        }
    }
}
