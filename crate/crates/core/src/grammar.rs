//! Grammar representations: a latentless PCFG and the latent-variable PCFG
//! with per-(nonterminal, state) probability tables, plus the versioned text
//! format.
//!
//! Probabilities are stored in linear space; the parser converts to log
//! space when it builds its rule indices. Rule storage is sparse at the
//! skeleton level (absent skeletons mean probability zero) with dense latent
//! blocks per skeleton.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use thiserror::Error;

use crate::tree::{AnnotatedTree, BinTree};

/// Dense nonterminal id.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NtId(pub u32);

/// Dense word id.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WordId(pub u32);

impl NtId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl WordId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Nonterminal and word interning with the interminal/preterminal partition.
///
/// Construction from a corpus is canonical: symbols and words are sorted
/// lexicographically before ids are assigned, so two scans of the same
/// corpus produce identical tables.
#[derive(Clone, Debug)]
pub struct SymbolTable {
    names: Vec<String>,
    preterminal: Vec<bool>,
    by_name: HashMap<String, NtId>,
    words: Vec<String>,
    word_by_name: HashMap<String, WordId>,
}

impl PartialEq for SymbolTable {
    fn eq(&self, other: &Self) -> bool {
        self.names == other.names && self.preterminal == other.preterminal && self.words == other.words
    }
}

impl SymbolTable {
    pub fn from_parts(entries: Vec<(String, bool)>, words: Vec<String>) -> Result<SymbolTable, GrammarError> {
        let mut by_name = HashMap::new();
        let mut names = Vec::with_capacity(entries.len());
        let mut preterminal = Vec::with_capacity(entries.len());
        for (i, (name, pre)) in entries.into_iter().enumerate() {
            if by_name.insert(name.clone(), NtId(i as u32)).is_some() {
                return Err(GrammarError::DuplicateSymbol { name });
            }
            names.push(name);
            preterminal.push(pre);
        }
        let mut word_by_name = HashMap::new();
        for (i, w) in words.iter().enumerate() {
            if word_by_name.insert(w.clone(), WordId(i as u32)).is_some() {
                return Err(GrammarError::DuplicateSymbol { name: w.clone() });
            }
        }
        Ok(SymbolTable { names, preterminal, by_name, words, word_by_name })
    }

    /// Scans a binarized corpus. A label is preterminal iff it occurs as a
    /// preterminal node; occurring on both sides of the partition is an
    /// error.
    pub fn from_corpus(trees: &[BinTree]) -> Result<SymbolTable, GrammarError> {
        let mut kinds: BTreeMap<&str, (bool, bool)> = BTreeMap::new();
        let mut words: std::collections::BTreeSet<&str> = Default::default();
        for t in trees {
            let mut stack = vec![t];
            while let Some(node) = stack.pop() {
                match node {
                    BinTree::Binary { label, left, right, .. } => {
                        kinds.entry(label).or_default().0 = true;
                        stack.push(right);
                        stack.push(left);
                    }
                    BinTree::Preterminal { label, word, .. } => {
                        kinds.entry(label).or_default().1 = true;
                        words.insert(word);
                    }
                }
            }
        }
        let mut entries = Vec::with_capacity(kinds.len());
        for (name, (inter, pre)) in kinds {
            if inter && pre {
                return Err(GrammarError::MixedSymbol { name: name.to_string() });
            }
            entries.push((name.to_string(), pre));
        }
        let words = words.into_iter().map(String::from).collect();
        SymbolTable::from_parts(entries, words)
    }

    pub fn nt(&self, name: &str) -> Option<NtId> {
        self.by_name.get(name).copied()
    }

    pub fn nt_name(&self, id: NtId) -> &str {
        &self.names[id.index()]
    }

    pub fn is_preterminal(&self, id: NtId) -> bool {
        self.preterminal[id.index()]
    }

    pub fn nt_count(&self) -> usize {
        self.names.len()
    }

    pub fn nt_ids(&self) -> impl Iterator<Item = NtId> {
        (0..self.names.len() as u32).map(NtId)
    }

    pub fn nt_names(&self) -> impl Iterator<Item = &str> {
        self.names.iter().map(String::as_str)
    }

    pub fn word(&self, text: &str) -> Option<WordId> {
        self.word_by_name.get(text).copied()
    }

    pub fn word_name(&self, id: WordId) -> &str {
        &self.words[id.index()]
    }

    pub fn word_count(&self) -> usize {
        self.words.len()
    }

    /// Words starting with the rare-signature prefix, ascending by id.
    pub fn rare_signature_words(&self) -> Vec<WordId> {
        (0..self.words.len() as u32)
            .map(WordId)
            .filter(|w| self.words[w.index()].starts_with("_RARE_"))
            .collect()
    }
}

/// The function mapping each nonterminal to its latent-state count.
///
/// Ordered map so that assignments order, hash, and serialize
/// deterministically; the full vector doubles as a memoization key in the
/// optimizer.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct StateAssignment {
    counts: BTreeMap<String, u32>,
}

impl StateAssignment {
    pub fn uniform<I, S>(names: I, m: u32) -> StateAssignment
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        assert!(m >= 1, "latent-state counts must be >= 1");
        StateAssignment { counts: names.into_iter().map(|n| (n.into(), m)).collect() }
    }

    pub fn get(&self, name: &str) -> Option<u32> {
        self.counts.get(name).copied()
    }

    pub fn set(&mut self, name: impl Into<String>, m: u32) {
        assert!(m >= 1, "latent-state counts must be >= 1");
        self.counts.insert(name.into(), m);
    }

    /// Copy with one nonterminal's count replaced.
    pub fn with(&self, name: &str, m: u32) -> StateAssignment {
        let mut out = self.clone();
        out.set(name.to_string(), m);
        out
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u32)> {
        self.counts.iter().map(|(n, m)| (n.as_str(), *m))
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// `nonterminal<TAB>m` lines, sorted by nonterminal.
    pub fn to_tsv(&self) -> String {
        let mut s = String::new();
        for (n, m) in &self.counts {
            s.push_str(&format!("{n}\t{m}\n"));
        }
        s
    }

    pub fn from_tsv(text: &str) -> Result<StateAssignment, GrammarError> {
        let mut counts = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (name, m) = line
                .split_once('\t')
                .ok_or(GrammarError::Format { line: i + 1, message: "expected nonterminal<TAB>m".into() })?;
            let m: u32 = m.trim().parse().map_err(|_| GrammarError::Format {
                line: i + 1,
                message: format!("bad state count `{m}`"),
            })?;
            if m < 1 {
                return Err(GrammarError::Format { line: i + 1, message: "state count must be >= 1".into() });
            }
            counts.insert(name.to_string(), m);
        }
        Ok(StateAssignment { counts })
    }
}

impl FromIterator<(String, u32)> for StateAssignment {
    fn from_iter<T: IntoIterator<Item = (String, u32)>>(iter: T) -> Self {
        StateAssignment { counts: iter.into_iter().collect() }
    }
}

/// A latentless PCFG estimated by frequency counts; used as the pruning
/// grammar and as the degenerate one-state baseline.
#[derive(Clone, Debug, PartialEq)]
pub struct Pcfg {
    pub symbols: SymbolTable,
    pub binary: BTreeMap<(NtId, NtId, NtId), f64>,
    pub lexical: BTreeMap<(NtId, WordId), f64>,
    pub root: BTreeMap<NtId, f64>,
}

/// Maximum-likelihood PCFG: rule probability = rule count / LHS count, root
/// probability = root-label count / sentence count.
pub fn mle_pcfg(trees: &[BinTree]) -> Result<Pcfg, GrammarError> {
    if trees.is_empty() {
        return Err(GrammarError::EmptyCorpus);
    }
    let symbols = SymbolTable::from_corpus(trees)?;
    let mut lhs: Vec<u64> = vec![0; symbols.nt_count()];
    let mut binary: BTreeMap<(NtId, NtId, NtId), u64> = BTreeMap::new();
    let mut lexical: BTreeMap<(NtId, WordId), u64> = BTreeMap::new();
    let mut root: BTreeMap<NtId, u64> = BTreeMap::new();
    for t in trees {
        let root_id = symbols.nt(t.label()).expect("corpus symbol");
        *root.entry(root_id).or_insert(0) += 1;
        let mut stack = vec![t];
        while let Some(node) = stack.pop() {
            let a = symbols.nt(node.label()).expect("corpus symbol");
            lhs[a.index()] += 1;
            match node {
                BinTree::Binary { left, right, .. } => {
                    let b = symbols.nt(left.label()).expect("corpus symbol");
                    let c = symbols.nt(right.label()).expect("corpus symbol");
                    *binary.entry((a, b, c)).or_insert(0) += 1;
                    stack.push(right);
                    stack.push(left);
                }
                BinTree::Preterminal { word, .. } => {
                    let w = symbols.word(word).expect("corpus word");
                    *lexical.entry((a, w)).or_insert(0) += 1;
                }
            }
        }
    }
    let n = trees.len() as f64;
    Ok(Pcfg {
        binary: binary
            .into_iter()
            .map(|((a, b, c), k)| ((a, b, c), k as f64 / lhs[a.index()] as f64))
            .collect(),
        lexical: lexical
            .into_iter()
            .map(|((a, w), k)| ((a, w), k as f64 / lhs[a.index()] as f64))
            .collect(),
        root: root.into_iter().map(|(a, k)| (a, k as f64 / n)).collect(),
        symbols,
    })
}

/// Dense latent block for one binary rule skeleton, shape
/// `m_a x m_b x m_c`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct RuleBlock {
    pub m_a: usize,
    pub m_b: usize,
    pub m_c: usize,
    pub p: Vec<f64>,
}

impl RuleBlock {
    pub fn zeros(m_a: usize, m_b: usize, m_c: usize) -> RuleBlock {
        RuleBlock { m_a, m_b, m_c, p: vec![0.0; m_a * m_b * m_c] }
    }

    #[inline]
    pub fn idx(&self, h1: usize, h2: usize, h3: usize) -> usize {
        (h1 * self.m_b + h2) * self.m_c + h3
    }

    #[inline]
    pub fn get(&self, h1: usize, h2: usize, h3: usize) -> f64 {
        self.p[self.idx(h1, h2, h3)]
    }
}

/// Latent-variable PCFG. `state_counts[a]` is the realized number of latent
/// states for nonterminal `a`.
#[derive(Clone, Debug, PartialEq)]
pub struct Lpcfg {
    pub symbols: SymbolTable,
    pub state_counts: Vec<u32>,
    pub binary: BTreeMap<(NtId, NtId, NtId), RuleBlock>,
    pub lexical: BTreeMap<(NtId, WordId), Vec<f64>>,
    pub root: BTreeMap<NtId, Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ViolationKind {
    /// Conditional rule mass of an (a, h) block is off.
    RuleMass,
    /// Total root mass is off.
    RootMass,
    /// A probability is not finite or outside [0, 1].
    Range,
}

/// One normalization defect, naming the offending block.
#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub symbol: String,
    pub state: Option<u32>,
    pub kind: ViolationKind,
    pub mass: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.kind, self.state) {
            (ViolationKind::RuleMass, Some(h)) => {
                write!(f, "({}, {}): rule mass {:.12} != 1", self.symbol, h, self.mass)
            }
            (ViolationKind::RootMass, _) => write!(f, "root mass {:.12} != 1", self.mass),
            (ViolationKind::Range, _) => {
                write!(f, "{}: probability {} out of range", self.symbol, self.mass)
            }
            _ => write!(f, "{}: mass {:.12}", self.symbol, self.mass),
        }
    }
}

impl Lpcfg {
    /// Lifts a latentless PCFG into the one-state latent form.
    pub fn from_pcfg(pcfg: &Pcfg) -> Lpcfg {
        Lpcfg {
            symbols: pcfg.symbols.clone(),
            state_counts: vec![1; pcfg.symbols.nt_count()],
            binary: pcfg
                .binary
                .iter()
                .map(|(&k, &p)| (k, RuleBlock { m_a: 1, m_b: 1, m_c: 1, p: vec![p] }))
                .collect(),
            lexical: pcfg.lexical.iter().map(|(&k, &p)| (k, vec![p])).collect(),
            root: pcfg.root.iter().map(|(&k, &p)| (k, vec![p])).collect(),
        }
    }

    /// Projects back to a latentless PCFG; only valid when every
    /// nonterminal has exactly one state.
    pub fn to_pcfg(&self) -> Result<Pcfg, GrammarError> {
        if self.state_counts.iter().any(|&m| m != 1) {
            return Err(GrammarError::NotLatentless);
        }
        Ok(Pcfg {
            symbols: self.symbols.clone(),
            binary: self.binary.iter().map(|(&k, b)| (k, b.p[0])).collect(),
            lexical: self.lexical.iter().map(|(&k, p)| (k, p[0])).collect(),
            root: self.root.iter().map(|(&k, p)| (k, p[0])).collect(),
        })
    }

    pub fn state_count(&self, a: NtId) -> usize {
        self.state_counts[a.index()] as usize
    }

    /// The realized state assignment, keyed by nonterminal name.
    pub fn assignment(&self) -> StateAssignment {
        self.symbols
            .nt_ids()
            .map(|a| (self.symbols.nt_name(a).to_string(), self.state_counts[a.index()]))
            .collect()
    }

    /// Checks normalization and range invariants. Empty iff, for every
    /// (a, h), the conditional rule mass is 1 within `tol`, the root mass is
    /// 1 within `tol`, and every probability is finite in [0, 1].
    pub fn validate(&self, tol: f64) -> Vec<Violation> {
        let mut out = Vec::new();
        let nt_count = self.symbols.nt_count();
        let mut mass: Vec<Vec<f64>> =
            (0..nt_count).map(|a| vec![0.0; self.state_counts[a] as usize]).collect();
        let mut range_flagged: Vec<bool> = vec![false; nt_count];
        let mut check_range = |a: NtId, p: f64, out: &mut Vec<Violation>, flagged: &mut Vec<bool>| {
            if (!p.is_finite() || !(0.0..=1.0).contains(&p)) && !flagged[a.index()] {
                flagged[a.index()] = true;
                out.push(Violation {
                    symbol: self.symbols.nt_name(a).to_string(),
                    state: None,
                    kind: ViolationKind::Range,
                    mass: p,
                });
            }
        };
        for (&(a, _, _), block) in &self.binary {
            for h1 in 0..block.m_a {
                for i in 0..block.m_b * block.m_c {
                    let p = block.p[h1 * block.m_b * block.m_c + i];
                    check_range(a, p, &mut out, &mut range_flagged);
                    mass[a.index()][h1] += p;
                }
            }
        }
        for (&(a, _), probs) in &self.lexical {
            for (h, &p) in probs.iter().enumerate() {
                check_range(a, p, &mut out, &mut range_flagged);
                mass[a.index()][h] += p;
            }
        }
        for a in self.symbols.nt_ids() {
            for (h, &m) in mass[a.index()].iter().enumerate() {
                if (m - 1.0).abs() > tol {
                    out.push(Violation {
                        symbol: self.symbols.nt_name(a).to_string(),
                        state: Some(h as u32),
                        kind: ViolationKind::RuleMass,
                        mass: m,
                    });
                }
            }
        }
        let root_mass: f64 = self.root.values().flat_map(|v| v.iter()).sum();
        for (&a, probs) in &self.root {
            for &p in probs {
                check_range(a, p, &mut out, &mut range_flagged);
            }
        }
        if (root_mass - 1.0).abs() > tol {
            out.push(Violation { symbol: "<root>".into(), state: None, kind: ViolationKind::RootMass, mass: root_mass });
        }
        out
    }

    /// Versioned text serialization; probabilities carry 17 significant
    /// digits so the round trip is lossless.
    pub fn serialize(&self) -> String {
        let mut s = String::from("LPCFG v1\n");
        for a in self.symbols.nt_ids() {
            s.push_str(&format!(
                "NT {} {} {} {}\n",
                a.0,
                self.symbols.nt_name(a),
                if self.symbols.is_preterminal(a) { "P" } else { "I" },
                self.state_counts[a.index()]
            ));
        }
        for (&a, probs) in &self.root {
            for (h, &p) in probs.iter().enumerate() {
                s.push_str(&format!("ROOT {} {} {:.16e}\n", a.0, h, p));
            }
        }
        for (&(a, b, c), block) in &self.binary {
            for h1 in 0..block.m_a {
                for h2 in 0..block.m_b {
                    for h3 in 0..block.m_c {
                        s.push_str(&format!(
                            "BIN {} {} {} {} {} {} {:.16e}\n",
                            a.0,
                            h1,
                            b.0,
                            h2,
                            c.0,
                            h3,
                            block.get(h1, h2, h3)
                        ));
                    }
                }
            }
        }
        for (&(a, w), probs) in &self.lexical {
            for (h, &p) in probs.iter().enumerate() {
                s.push_str(&format!("LEX {} {} {} {:.16e}\n", a.0, h, self.symbols.word_name(w), p));
            }
        }
        s
    }

    pub fn deserialize(text: &str) -> Result<Lpcfg, GrammarError> {
        let mut lines = text.lines().enumerate();
        let header = lines.next().map(|(_, l)| l.trim()).unwrap_or("");
        if header != "LPCFG v1" {
            return Err(GrammarError::Version { found: header.to_string() });
        }

        struct RawNt {
            name: String,
            preterminal: bool,
            m: u32,
        }
        let mut nts: BTreeMap<u32, RawNt> = BTreeMap::new();
        let mut roots: Vec<(u32, u32, f64)> = Vec::new();
        let mut bins: Vec<(u32, u32, u32, u32, u32, u32, f64)> = Vec::new();
        let mut lexes: Vec<(u32, u32, String, f64)> = Vec::new();

        let fmt_err = |line: usize, message: &str| GrammarError::Format { line: line + 1, message: message.into() };
        for (i, line) in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let tag = it.next().unwrap();
            let mut next = |what: &str| -> Result<&str, GrammarError> {
                it.next().ok_or_else(|| fmt_err(i, &format!("truncated {tag} line: missing {what}")))
            };
            match tag {
                "NT" => {
                    let id: u32 = next("id")?.parse().map_err(|_| fmt_err(i, "bad NT id"))?;
                    let name = next("name")?.to_string();
                    let kind = next("kind")?;
                    let m: u32 = next("state count")?.parse().map_err(|_| fmt_err(i, "bad state count"))?;
                    let preterminal = match kind {
                        "I" => false,
                        "P" => true,
                        _ => return Err(fmt_err(i, "NT kind must be I or P")),
                    };
                    if m < 1 {
                        return Err(fmt_err(i, "state count must be >= 1"));
                    }
                    if nts.insert(id, RawNt { name, preterminal, m }).is_some() {
                        return Err(fmt_err(i, "duplicate NT id"));
                    }
                }
                "ROOT" => {
                    let a = next("a")?.parse().map_err(|_| fmt_err(i, "bad id"))?;
                    let h = next("h")?.parse().map_err(|_| fmt_err(i, "bad state"))?;
                    let p = next("prob")?.parse().map_err(|_| fmt_err(i, "bad probability"))?;
                    roots.push((a, h, p));
                }
                "BIN" => {
                    let a = next("a")?.parse().map_err(|_| fmt_err(i, "bad id"))?;
                    let h1 = next("h1")?.parse().map_err(|_| fmt_err(i, "bad state"))?;
                    let b = next("b")?.parse().map_err(|_| fmt_err(i, "bad id"))?;
                    let h2 = next("h2")?.parse().map_err(|_| fmt_err(i, "bad state"))?;
                    let c = next("c")?.parse().map_err(|_| fmt_err(i, "bad id"))?;
                    let h3 = next("h3")?.parse().map_err(|_| fmt_err(i, "bad state"))?;
                    let p = next("prob")?.parse().map_err(|_| fmt_err(i, "bad probability"))?;
                    bins.push((a, h1, b, h2, c, h3, p));
                }
                "LEX" => {
                    let a = next("a")?.parse().map_err(|_| fmt_err(i, "bad id"))?;
                    let h = next("h")?.parse().map_err(|_| fmt_err(i, "bad state"))?;
                    let word = next("word")?.to_string();
                    let p = next("prob")?.parse().map_err(|_| fmt_err(i, "bad probability"))?;
                    lexes.push((a, h, word, p));
                }
                _ => return Err(fmt_err(i, &format!("unknown record `{tag}`"))),
            }
        }

        if roots.is_empty() && bins.is_empty() && lexes.is_empty() {
            return Err(GrammarError::NoRules);
        }
        // Ids must be contiguous from 0.
        for (k, id) in nts.keys().enumerate() {
            if *id != k as u32 {
                return Err(GrammarError::Format { line: 0, message: format!("NT ids not contiguous at {id}") });
            }
        }
        let entries: Vec<(String, bool)> = nts.values().map(|r| (r.name.clone(), r.preterminal)).collect();
        let mut words: Vec<String> = lexes.iter().map(|(_, _, w, _)| w.clone()).collect();
        words.sort();
        words.dedup();
        let symbols = SymbolTable::from_parts(entries, words)?;
        let state_counts: Vec<u32> = nts.values().map(|r| r.m).collect();

        let check_nt = |id: u32| -> Result<NtId, GrammarError> {
            if (id as usize) < state_counts.len() {
                Ok(NtId(id))
            } else {
                Err(GrammarError::Format { line: 0, message: format!("undeclared nonterminal id {id}") })
            }
        };
        let check_state = |id: NtId, h: u32| -> Result<usize, GrammarError> {
            if h < state_counts[id.index()] {
                Ok(h as usize)
            } else {
                Err(GrammarError::Format {
                    line: 0,
                    message: format!("state {h} out of range for nonterminal id {}", id.0),
                })
            }
        };

        let mut grammar = Lpcfg {
            symbols,
            state_counts: state_counts.clone(),
            binary: BTreeMap::new(),
            lexical: BTreeMap::new(),
            root: BTreeMap::new(),
        };
        for (a, h, p) in roots {
            let a = check_nt(a)?;
            let h = check_state(a, h)?;
            let entry = grammar
                .root
                .entry(a)
                .or_insert_with(|| vec![0.0; grammar.state_counts[a.index()] as usize]);
            entry[h] = p;
        }
        for (a, h1, b, h2, c, h3, p) in bins {
            let (a, b, c) = (check_nt(a)?, check_nt(b)?, check_nt(c)?);
            if grammar.symbols.is_preterminal(a) {
                return Err(GrammarError::PreterminalBinary { name: grammar.symbols.nt_name(a).to_string() });
            }
            let (h1, h2, h3) = (check_state(a, h1)?, check_state(b, h2)?, check_state(c, h3)?);
            let (m_a, m_b, m_c) = (
                grammar.state_counts[a.index()] as usize,
                grammar.state_counts[b.index()] as usize,
                grammar.state_counts[c.index()] as usize,
            );
            let block = grammar.binary.entry((a, b, c)).or_insert_with(|| RuleBlock::zeros(m_a, m_b, m_c));
            let idx = block.idx(h1, h2, h3);
            block.p[idx] = p;
        }
        for (a, h, word, p) in lexes {
            let a = check_nt(a)?;
            if !grammar.symbols.is_preterminal(a) {
                return Err(GrammarError::InterminalLexical { name: grammar.symbols.nt_name(a).to_string() });
            }
            let h = check_state(a, h)?;
            let w = grammar.symbols.word(&word).expect("interned above");
            let entry = grammar
                .lexical
                .entry((a, w))
                .or_insert_with(|| vec![0.0; grammar.state_counts[a.index()] as usize]);
            entry[h] = p;
        }

        // Normalization on load, restricted to blocks the file actually
        // populates (a declared nonterminal with no rules is legal in
        // degenerate files; validate() is the strict check).
        let violations = grammar.validate(LOAD_TOL);
        let mut has_rules: Vec<bool> = vec![false; grammar.symbols.nt_count()];
        for &(a, _, _) in grammar.binary.keys() {
            has_rules[a.index()] = true;
        }
        for &(a, _) in grammar.lexical.keys() {
            has_rules[a.index()] = true;
        }
        for v in violations {
            let relevant = match v.kind {
                ViolationKind::RootMass => true,
                _ => grammar.symbols.nt(&v.symbol).map(|a| has_rules[a.index()]).unwrap_or(false),
            };
            if relevant {
                return Err(GrammarError::Normalization { violation: v.to_string() });
            }
        }
        Ok(grammar)
    }
}

const LOAD_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum GrammarError {
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("symbol `{name}` occurs both as interminal and preterminal")]
    MixedSymbol { name: String },
    #[error("duplicate symbol `{name}`")]
    DuplicateSymbol { name: String },
    #[error("unsupported grammar format version: `{found}` (expected `LPCFG v1`)")]
    Version { found: String },
    #[error("grammar line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("grammar has no rules")]
    NoRules,
    #[error("preterminal `{name}` carries a binary rule")]
    PreterminalBinary { name: String },
    #[error("interminal `{name}` carries a lexical rule")]
    InterminalLexical { name: String },
    #[error("normalization failure on load: {violation}")]
    Normalization { violation: String },
    #[error("grammar is not latentless (some nonterminal has more than one state)")]
    NotLatentless,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::parse_tree;
    use crate::treebank::binarize;

    fn corpus(texts: &[&str]) -> Vec<BinTree> {
        texts.iter().map(|s| binarize(&parse_tree(s).unwrap()).unwrap()).collect()
    }

    #[test]
    fn mle_pcfg_fractions() {
        let trees = corpus(&[
            "(S (A a) (B b))",
            "(S (A a) (B b))",
            "(S (A a) (B b))",
            "(S (C c) (D d))",
        ]);
        let g = mle_pcfg(&trees).unwrap();
        let s = g.symbols.nt("S").unwrap();
        let a = g.symbols.nt("A").unwrap();
        let b = g.symbols.nt("B").unwrap();
        let c = g.symbols.nt("C").unwrap();
        let d = g.symbols.nt("D").unwrap();
        assert_eq!(g.binary[&(s, a, b)], 0.75);
        assert_eq!(g.binary[&(s, c, d)], 0.25);
        assert_eq!(g.root[&s], 1.0);
        let wa = g.symbols.word("a").unwrap();
        assert_eq!(g.lexical[&(a, wa)], 1.0);
    }

    #[test]
    fn mle_pcfg_single_tree_is_degenerate() {
        let trees = corpus(&["(S (A a) (B b))"]);
        let g = mle_pcfg(&trees).unwrap();
        assert!(g.binary.values().all(|&p| p == 1.0));
        assert!(g.lexical.values().all(|&p| p == 1.0));
        assert!(mle_pcfg(&[]).is_err());
    }

    #[test]
    fn mle_normalization_invariant() {
        let trees = corpus(&[
            "(S (A a) (B b))",
            "(S (S (A a) (B b)) (B c))",
            "(T (A a) (A a))",
            "(S (A d) (B b))",
        ]);
        let g = mle_pcfg(&trees).unwrap();
        let lifted = Lpcfg::from_pcfg(&g);
        assert!(lifted.validate(1e-9).is_empty());
    }

    #[test]
    fn mixed_symbol_detected() {
        let trees = corpus(&["(S (X (A a) (B b)) (X x))"]);
        assert!(matches!(SymbolTable::from_corpus(&trees), Err(GrammarError::MixedSymbol { .. })));
    }

    #[test]
    fn validate_flags_injected_fault() {
        let trees = corpus(&["(S (A a) (B b))", "(S (A a) (B c))"]);
        let mut g = Lpcfg::from_pcfg(&mle_pcfg(&trees).unwrap());
        assert!(g.validate(1e-9).is_empty());
        // Double one lexical probability: exactly one block must be flagged.
        let key = *g.lexical.keys().next().unwrap();
        g.lexical.get_mut(&key).unwrap()[0] *= 2.0;
        let violations = g.validate(1e-9);
        assert_eq!(violations.len(), 1);
        assert_eq!(violations[0].kind, ViolationKind::RuleMass);
        assert_eq!(violations[0].symbol, g.symbols.nt_name(key.0));
    }

    #[test]
    fn serialize_round_trip_is_field_identical() {
        let trees = corpus(&[
            "(S (A a) (B b))",
            "(S (S (A a) (B b)) (B c))",
            "(S (A d) (B b))",
        ]);
        let g = Lpcfg::from_pcfg(&mle_pcfg(&trees).unwrap());
        let text = g.serialize();
        let g2 = Lpcfg::deserialize(&text).unwrap();
        assert_eq!(g, g2);
        assert!(g2.validate(1e-9).is_empty());
        // Serialization is deterministic.
        assert_eq!(text, g2.serialize());
    }

    #[test]
    fn deserialize_errors() {
        assert!(matches!(Lpcfg::deserialize("LPCFG v0\n"), Err(GrammarError::Version { .. })));
        assert!(matches!(
            Lpcfg::deserialize("LPCFG v1\nNT 0 S I 1\n"),
            Err(GrammarError::NoRules)
        ));
        // Truncated BIN line.
        let err = Lpcfg::deserialize("LPCFG v1\nNT 0 S I 1\nBIN 0 0 0\n").unwrap_err();
        assert!(matches!(err, GrammarError::Format { .. }));
        // Bad normalization of a populated block.
        let text = "LPCFG v1\nNT 0 S I 1\nNT 1 A P 1\nROOT 0 0 1.0\nBIN 0 0 1 0 1 0 0.5\nLEX 1 0 x 1.0\n";
        assert!(matches!(Lpcfg::deserialize(text), Err(GrammarError::Normalization { .. })));
    }

    #[test]
    fn header_and_single_root_line_parses() {
        let g = Lpcfg::deserialize("LPCFG v1\nNT 0 S I 1\nROOT 0 0 1.0\n").unwrap();
        assert_eq!(g.symbols.nt_count(), 1);
        assert_eq!(g.root.len(), 1);
    }

    #[test]
    fn state_assignment_tsv_round_trip() {
        let f: StateAssignment =
            [("S".to_string(), 4u32), ("NP".to_string(), 2)].into_iter().collect();
        let text = f.to_tsv();
        assert_eq!(text, "NP\t2\nS\t4\n");
        assert_eq!(StateAssignment::from_tsv(&text).unwrap(), f);
    }
}
