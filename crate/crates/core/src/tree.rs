//! Skeletal parse trees and the bracketed one-tree-per-line text format.

use std::fmt;

use thiserror::Error;

/// A skeletal parse tree: internal nodes carry nonterminal labels, leaves
/// carry words. Raw treebank trees, debinarized parser output, and PARSEVAL
/// inputs all use this shape.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Tree {
    Node { label: String, children: Vec<Tree> },
    Leaf { word: String },
}

impl Tree {
    pub fn node(label: impl Into<String>, children: Vec<Tree>) -> Self {
        Tree::Node { label: label.into(), children }
    }

    pub fn leaf(word: impl Into<String>) -> Self {
        Tree::Leaf { word: word.into() }
    }

    /// Preterminal node: a label over a single word leaf.
    pub fn preterminal(label: impl Into<String>, word: impl Into<String>) -> Self {
        Tree::node(label, vec![Tree::leaf(word)])
    }

    pub fn label(&self) -> Option<&str> {
        match self {
            Tree::Node { label, .. } => Some(label),
            Tree::Leaf { .. } => None,
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, Tree::Leaf { .. })
    }

    /// A node whose single child is a word leaf.
    pub fn is_preterminal(&self) -> bool {
        match self {
            Tree::Node { children, .. } => children.len() == 1 && children[0].is_leaf(),
            Tree::Leaf { .. } => false,
        }
    }

    /// Words at the leaves, left to right.
    pub fn words(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_words(&mut out);
        out
    }

    fn collect_words<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Tree::Leaf { word } => out.push(word),
            Tree::Node { children, .. } => {
                for c in children {
                    c.collect_words(out);
                }
            }
        }
    }

    /// Preterminal labels, left to right (the POS sequence).
    pub fn pos_tags(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_tags(&mut out);
        out
    }

    fn collect_tags<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Tree::Leaf { .. } => {}
            Tree::Node { label, children } => {
                if self.is_preterminal() {
                    out.push(label);
                } else {
                    for c in children {
                        c.collect_tags(out);
                    }
                }
            }
        }
    }

    pub fn yield_len(&self) -> usize {
        match self {
            Tree::Leaf { .. } => 1,
            Tree::Node { children, .. } => children.iter().map(Tree::yield_len).sum(),
        }
    }

    /// Bracketed rendering, `(S (NP (D the)) ...)`. Inverse of
    /// [`parse_bracketed`] up to whitespace.
    pub fn render(&self) -> String {
        let mut s = String::new();
        self.render_into(&mut s);
        s
    }

    fn render_into(&self, out: &mut String) {
        match self {
            Tree::Leaf { word } => out.push_str(word),
            Tree::Node { label, children } => {
                out.push('(');
                out.push_str(label);
                for c in children {
                    out.push(' ');
                    c.render_into(out);
                }
                out.push(')');
            }
        }
    }

    /// Checks the raw-form invariants: every node has either a word or at
    /// least one child, and any node with a leaf child is a preterminal with
    /// exactly that one child.
    pub fn validate_raw(&self) -> Result<(), TreeError> {
        match self {
            Tree::Leaf { .. } => Err(TreeError::BareWordRoot),
            Tree::Node { .. } => self.validate_raw_node(),
        }
    }

    fn validate_raw_node(&self) -> Result<(), TreeError> {
        if let Tree::Node { label, children } = self {
            if children.is_empty() {
                return Err(TreeError::EmptyNode { label: label.clone() });
            }
            let leaves = children.iter().filter(|c| c.is_leaf()).count();
            if leaves > 0 && children.len() != 1 {
                return Err(TreeError::MixedChildren { label: label.clone() });
            }
            for c in children {
                if let Tree::Node { .. } = c {
                    c.validate_raw_node()?;
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for Tree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// A fully binarized tree: every internal node has exactly two children, and
/// preterminals emit exactly one word. Labels may be synthetic (`@A`
/// right-binarization continuations) or collapsed unary chains (`A|B`).
///
/// The annotation parameter carries per-node latent states once clustering
/// has assigned them; plain trees use `()`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum BinTree<A = ()> {
    Binary { label: String, ann: A, left: Box<BinTree<A>>, right: Box<BinTree<A>> },
    Preterminal { label: String, ann: A, word: String },
}

/// A binarized tree where every node carries a latent-state id.
pub type AnnotatedTree = BinTree<u32>;

impl BinTree<()> {
    pub fn binary(label: impl Into<String>, left: BinTree, right: BinTree) -> Self {
        BinTree::Binary { label: label.into(), ann: (), left: Box::new(left), right: Box::new(right) }
    }

    pub fn preterminal(label: impl Into<String>, word: impl Into<String>) -> Self {
        BinTree::Preterminal { label: label.into(), ann: (), word: word.into() }
    }

    /// Attaches one latent state per node, in pre-order. `states` must have
    /// exactly [`BinTree::node_count`] entries.
    pub fn annotate(&self, states: &[u32]) -> AnnotatedTree {
        let mut next = 0usize;
        let out = self.annotate_walk(states, &mut next);
        debug_assert_eq!(next, states.len());
        out
    }

    fn annotate_walk(&self, states: &[u32], next: &mut usize) -> AnnotatedTree {
        let ann = states[*next];
        *next += 1;
        match self {
            BinTree::Binary { label, left, right, .. } => BinTree::Binary {
                label: label.clone(),
                ann,
                left: Box::new(left.annotate_walk(states, next)),
                right: Box::new(right.annotate_walk(states, next)),
            },
            BinTree::Preterminal { label, word, .. } => {
                BinTree::Preterminal { label: label.clone(), ann, word: word.clone() }
            }
        }
    }
}

impl<A> BinTree<A> {
    pub fn label(&self) -> &str {
        match self {
            BinTree::Binary { label, .. } => label,
            BinTree::Preterminal { label, .. } => label,
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            BinTree::Binary { left, right, .. } => 1 + left.node_count() + right.node_count(),
            BinTree::Preterminal { .. } => 1,
        }
    }

    pub fn yield_len(&self) -> usize {
        match self {
            BinTree::Binary { left, right, .. } => left.yield_len() + right.yield_len(),
            BinTree::Preterminal { .. } => 1,
        }
    }

    pub fn words(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_words(&mut out);
        out
    }

    fn collect_words<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            BinTree::Binary { left, right, .. } => {
                left.collect_words(out);
                right.collect_words(out);
            }
            BinTree::Preterminal { word, .. } => out.push(word),
        }
    }

    /// Structural conversion to the general tree shape (labels untouched; no
    /// continuation splicing or chain expansion — see
    /// [`treebank::debinarize`](crate::treebank::debinarize) for the inverse
    /// of binarization).
    pub fn to_tree(&self) -> Tree {
        match self {
            BinTree::Binary { label, left, right, .. } => {
                Tree::node(label.clone(), vec![left.to_tree(), right.to_tree()])
            }
            BinTree::Preterminal { label, word, .. } => Tree::preterminal(label.clone(), word.clone()),
        }
    }

    /// Drops annotations.
    pub fn skeleton(&self) -> BinTree<()> {
        match self {
            BinTree::Binary { label, left, right, .. } => {
                BinTree::binary(label.clone(), left.skeleton(), right.skeleton())
            }
            BinTree::Preterminal { label, word, .. } => BinTree::preterminal(label.clone(), word.clone()),
        }
    }
}

impl<A> fmt::Display for BinTree<A> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_tree().render())
    }
}

/// Converts a general tree already in binarized shape. Fails if any node has
/// a child count other than two, or a preterminal shape violation.
pub fn to_bin_tree(tree: &Tree) -> Result<BinTree, TreeError> {
    match tree {
        Tree::Leaf { .. } => Err(TreeError::BareWordRoot),
        Tree::Node { label, children } => match children.as_slice() {
            [Tree::Leaf { word }] => Ok(BinTree::preterminal(label.clone(), word.clone())),
            [l, r] => Ok(BinTree::binary(label.clone(), to_bin_tree(l)?, to_bin_tree(r)?)),
            _ => Err(TreeError::NotBinary { label: label.clone(), arity: children.len() }),
        },
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TreeError {
    #[error("node `{label}` has no children and no word")]
    EmptyNode { label: String },
    #[error("node `{label}` mixes word leaves with constituents")]
    MixedChildren { label: String },
    #[error("a bare word cannot stand as a tree")]
    BareWordRoot,
    #[error("node `{label}` has {arity} children; binarized trees need exactly 2")]
    NotBinary { label: String, arity: usize },
}

/// Parse error with 1-based line/column position.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("line {line}, column {col}: unexpected ')'")]
    UnexpectedClose { line: usize, col: usize },
    #[error("line {line}, column {col}: empty constituent `()`")]
    EmptyConstituent { line: usize, col: usize },
    #[error("unbalanced '(' opened at line {line}, column {col}: reached end of input")]
    Unclosed { line: usize, col: usize },
    #[error("line {line}, column {col}: bare token `{token}` outside any constituent")]
    TopLevelToken { line: usize, col: usize, token: String },
    #[error("line {line}, column {col}: constituent with multiple children but no label")]
    UnlabeledConstituent { line: usize, col: usize },
    #[error("line {line}, column {col}: constituent `{label}` has a label but no children")]
    ChildlessConstituent { line: usize, col: usize, label: String },
}

#[derive(Debug)]
enum SexpNode {
    Atom { text: String, line: usize, col: usize },
    List { items: Vec<SexpNode>, line: usize, col: usize },
}

struct Scanner<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    col: usize,
}

impl<'a> Scanner<'a> {
    fn new(text: &'a str) -> Self {
        Scanner { chars: text.chars().peekable(), line: 1, col: 1 }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn skip_ws(&mut self) {
        while matches!(self.chars.peek(), Some(c) if c.is_whitespace()) {
            self.bump();
        }
    }

    fn parse_all(&mut self) -> Result<Vec<SexpNode>, ParseError> {
        let mut out = Vec::new();
        loop {
            self.skip_ws();
            let (line, col) = (self.line, self.col);
            match self.chars.peek() {
                None => return Ok(out),
                Some('(') => {
                    self.bump();
                    out.push(self.parse_list(line, col)?);
                }
                Some(')') => return Err(ParseError::UnexpectedClose { line, col }),
                Some(_) => {
                    let token = self.parse_atom();
                    return Err(ParseError::TopLevelToken { line, col, token });
                }
            }
        }
    }

    fn parse_list(&mut self, open_line: usize, open_col: usize) -> Result<SexpNode, ParseError> {
        let mut items = Vec::new();
        loop {
            self.skip_ws();
            let (line, col) = (self.line, self.col);
            match self.chars.peek() {
                None => return Err(ParseError::Unclosed { line: open_line, col: open_col }),
                Some(')') => {
                    self.bump();
                    if items.is_empty() {
                        return Err(ParseError::EmptyConstituent { line: open_line, col: open_col });
                    }
                    return Ok(SexpNode::List { items, line: open_line, col: open_col });
                }
                Some('(') => {
                    self.bump();
                    items.push(self.parse_list(line, col)?);
                }
                Some(_) => {
                    let text = self.parse_atom();
                    items.push(SexpNode::Atom { text, line, col });
                }
            }
        }
    }

    fn parse_atom(&mut self) -> String {
        let mut s = String::new();
        while let Some(&c) = self.chars.peek() {
            if c.is_whitespace() || c == '(' || c == ')' {
                break;
            }
            s.push(c);
            self.bump();
        }
        s
    }
}

fn sexp_to_tree(node: &SexpNode, top_level: bool) -> Result<Tree, ParseError> {
    match node {
        SexpNode::Atom { text, .. } => Ok(Tree::leaf(text.clone())),
        SexpNode::List { items, line, col } => match items.as_slice() {
            [SexpNode::Atom { text, .. }] => {
                Err(ParseError::ChildlessConstituent { line: *line, col: *col, label: text.clone() })
            }
            [SexpNode::Atom { text, .. }, rest @ ..] => {
                let children = rest
                    .iter()
                    .map(|c| sexp_to_tree(c, false))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(Tree::node(text.clone(), children))
            }
            // An unlabeled pair around a single tree is the conventional
            // outermost wrapper; it is only stripped at the top level.
            [inner @ SexpNode::List { .. }] if top_level => sexp_to_tree(inner, false),
            _ => Err(ParseError::UnlabeledConstituent { line: *line, col: *col }),
        },
    }
}

/// Parses a stream of bracketed trees. Each top-level expression yields one
/// tree; an optional unlabeled wrapper pair `((S ...))` is stripped.
pub fn parse_bracketed(text: &str) -> Result<Vec<Tree>, ParseError> {
    let nodes = Scanner::new(text).parse_all()?;
    nodes.iter().map(|n| sexp_to_tree(n, true)).collect()
}

/// Parses exactly one tree.
pub fn parse_tree(text: &str) -> Result<Tree, ParseError> {
    let mut trees = parse_bracketed(text)?;
    match trees.len() {
        1 => Ok(trees.pop().unwrap()),
        _ => Err(ParseError::TopLevelToken {
            line: 1,
            col: 1,
            token: format!("expected exactly one tree, found {}", trees.len()),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parse_simple_tree() {
        let t = parse_tree("(S (NP (D the) (N mouse)) (VP (V ran)))").unwrap();
        assert_eq!(t.label(), Some("S"));
        assert_eq!(t.words(), vec!["the", "mouse", "ran"]);
        assert_eq!(t.pos_tags(), vec!["D", "N", "V"]);
        // Direct read-back: D, N, V are the preterminals.
        fn count_preterminals(t: &Tree) -> usize {
            match t {
                Tree::Node { children, .. } if t.is_preterminal() => {
                    debug_assert_eq!(children.len(), 1);
                    1
                }
                Tree::Node { children, .. } => children.iter().map(count_preterminals).sum(),
                Tree::Leaf { .. } => 0,
            }
        }
        assert_eq!(count_preterminals(&t), 3);
        t.validate_raw().unwrap();
    }

    #[test]
    fn wrapper_is_stripped_only_at_top_level() {
        let t = parse_tree("((S (A a) (B b)))").unwrap();
        assert_eq!(t.label(), Some("S"));
        let err = parse_tree("(S ((A a) (B b)))").unwrap_err();
        assert!(matches!(err, ParseError::UnlabeledConstituent { .. }));
    }

    #[test]
    fn unbalanced_input_reports_position() {
        let err = parse_bracketed("(S (NP x)").unwrap_err();
        assert_eq!(err, ParseError::Unclosed { line: 1, col: 1 });
        let err = parse_bracketed("(S x))").unwrap_err();
        assert!(matches!(err, ParseError::UnexpectedClose { line: 1, col: 6 }));
    }

    #[test]
    fn empty_constituent_rejected() {
        let err = parse_bracketed("(S () (A a))").unwrap_err();
        assert!(matches!(err, ParseError::EmptyConstituent { .. }));
    }

    #[test]
    fn multiple_trees_per_stream() {
        let trees = parse_bracketed("(S (A a))\n(S (B b))\n").unwrap();
        assert_eq!(trees.len(), 2);
    }

    #[test]
    fn bin_tree_annotation_preorder() {
        let t = BinTree::binary(
            "S",
            BinTree::preterminal("A", "a"),
            BinTree::preterminal("B", "b"),
        );
        let ann = t.annotate(&[0, 1, 2]);
        match &ann {
            BinTree::Binary { ann, left, right, .. } => {
                assert_eq!(*ann, 0);
                assert!(matches!(**left, BinTree::Preterminal { ann: 1, .. }));
                assert!(matches!(**right, BinTree::Preterminal { ann: 2, .. }));
            }
            _ => panic!("expected binary root"),
        }
        assert_eq!(ann.skeleton(), t);
    }

    // Random raw trees: alternating node/leaf recursion with plain labels.
    fn arb_tree() -> impl Strategy<Value = Tree> {
        let label = prop::sample::select(vec!["S", "NP", "VP", "X", "Y-1", "Z=2"]);
        let word = prop::sample::select(vec!["a", "bb", "Mice", "x1", ".,;"]);
        let leaf = word.prop_map(Tree::leaf);
        let pre = (label.clone(), leaf).prop_map(|(l, w)| Tree::node(l, vec![w]));
        pre.prop_recursive(4, 24, 3, move |inner| {
            (
                prop::sample::select(vec!["S", "NP", "VP", "X"]),
                prop::collection::vec(inner, 1..4),
            )
                .prop_map(|(l, cs)| Tree::node(l, cs))
        })
    }

    proptest! {
        #[test]
        fn render_parse_round_trip(t in arb_tree()) {
            let text = t.render();
            let back = parse_tree(&text).unwrap();
            prop_assert_eq!(back, t);
        }

        #[test]
        fn parse_normalizes_whitespace(t in arb_tree()) {
            let text = t.render().replace(' ', "\n  ");
            let back = parse_tree(&text).unwrap();
            prop_assert_eq!(back.render(), t.render());
        }
    }
}
