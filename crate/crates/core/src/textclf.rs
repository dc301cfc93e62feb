//! Multi-label theme classifier: tokenization, TF-IDF features and one
//! independent logistic head per theme, trained by full-batch gradient
//! descent from zero.
//!
//! Everything here is deterministic. Training has no random state, and the
//! same corpus and [`TrainConfig`] always produce bit-identical parameters.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::theme::{Theme, ThemeSet};

pub const MODEL_HEADER: &str = "policylens-model v1";
pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TextClfError {
    #[error("cannot fit a vocabulary on an empty corpus")]
    EmptyCorpus,
    #[error("no term reaches min_df = {min_df}")]
    EmptyVocabulary { min_df: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("{texts} texts but {labels} label sets")]
    LengthMismatch { texts: usize, labels: usize },
    #[error("theme {theme} has {positives} positive and {negatives} negative training examples; both must be >= 1")]
    DegenerateTheme {
        theme: Theme,
        positives: usize,
        negatives: usize,
    },
    #[error("loss became non-finite for theme {theme} at epoch {epoch}; learning rate too large?")]
    NonFiniteLoss { theme: Theme, epoch: usize },
    #[error("vector has dimension {got}, model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("model file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unsupported model format {found:?} (expected {MODEL_HEADER:?})")]
    Version { found: String },
}

pub type Result<T> = std::result::Result<T, TextClfError>;

/// Lowercased maximal runs of alphanumeric characters, dropping
/// single-character tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.chars().nth(1).is_some())
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    terms: Vec<String>,
    index: HashMap<String, usize>,
    df: Vec<u32>,
    idf: Vec<f64>,
    n_docs: usize,
}

/// Smoothed inverse document frequency, always ≥ 1.
pub fn smoothed_idf(n_docs: usize, df: u32) -> f64 {
    ((1.0 + n_docs as f64) / (1.0 + df as f64)).ln() + 1.0
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn df(&self, i: usize) -> u32 {
        self.df[i]
    }

    pub fn idf(&self, i: usize) -> f64 {
        self.idf[i]
    }

    fn from_parts(terms: Vec<String>, df: Vec<u32>, idf: Vec<f64>, n_docs: usize) -> Vocabulary {
        let index = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocabulary {
            terms,
            index,
            df,
            idf,
            n_docs,
        }
    }
}

/// Build a vocabulary from tokenized documents.
///
/// Terms with df < `min_df` are dropped; if more than `max_terms` remain the
/// highest-df terms are kept (ties broken lexicographically). Retained terms
/// are indexed in lexicographic order.
pub fn fit_vocabulary<D: AsRef<[String]>>(corpus: &[D], min_df: usize, max_terms: usize) -> Result<Vocabulary> {
    if corpus.is_empty() {
        return Err(TextClfError::EmptyCorpus);
    }
    if min_df == 0 {
        return Err(TextClfError::InvalidConfig("min_df must be >= 1".into()));
    }
    let mut df: BTreeMap<&str, u32> = BTreeMap::new();
    for doc in corpus {
        let unique: HashSet<&str> = doc.as_ref().iter().map(String::as_str).collect();
        for t in unique {
            *df.entry(t).or_insert(0) += 1;
        }
    }
    let mut kept: Vec<(&str, u32)> = df
        .into_iter()
        .filter(|&(_, d)| d as usize >= min_df)
        .collect();
    if kept.len() > max_terms {
        kept.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        kept.truncate(max_terms);
        kept.sort_by(|a, b| a.0.cmp(b.0));
    }
    if kept.is_empty() {
        return Err(TextClfError::EmptyVocabulary { min_df });
    }
    let n_docs = corpus.len();
    let terms = kept.iter().map(|(t, _)| t.to_string()).collect();
    let dfs: Vec<u32> = kept.iter().map(|(_, d)| *d).collect();
    let idf = dfs.iter().map(|&d| smoothed_idf(n_docs, d)).collect();
    Ok(Vocabulary::from_parts(terms, dfs, idf, n_docs))
}

/// Sparse feature vector with strictly increasing indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVector {
    dim: usize,
    entries: Vec<(usize, f64)>,
}

impl SparseVector {
    /// Entries are sorted by index; duplicate indices are summed.
    pub fn new(dim: usize, mut entries: Vec<(usize, f64)>) -> SparseVector {
        entries.sort_by_key(|e| e.0);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
        for (i, v) in entries {
            assert!(i < dim, "index {i} out of range for dimension {dim}");
            match merged.last_mut() {
                Some(last) if last.0 == i => last.1 += v,
                _ => merged.push((i, v)),
            }
        }
        SparseVector { dim, entries: merged }
    }

    pub fn zero(dim: usize) -> SparseVector {
        SparseVector {
            dim,
            entries: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|(_, v)| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.entries.iter().map(|&(i, v)| v * dense[i]).sum()
    }
}

/// Raw term counts times idf, L2-normalized. Out-of-vocabulary tokens are
/// ignored; a document with no known tokens maps to the zero vector.
pub fn vectorize<S: AsRef<str>>(tokens: &[S], vocab: &Vocabulary) -> SparseVector {
    let mut tf: BTreeMap<usize, u32> = BTreeMap::new();
    for t in tokens {
        if let Some(i) = vocab.index_of(t.as_ref()) {
            *tf.entry(i).or_insert(0) += 1;
        }
    }
    let mut entries: Vec<(usize, f64)> = tf
        .into_iter()
        .map(|(i, c)| (i, c as f64 * vocab.idf[i]))
        .collect();
    let norm = entries.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        entries.iter_mut().for_each(|e| e.1 /= norm);
    }
    SparseVector {
        dim: vocab.len(),
        entries,
    }
}

/// Weights and bias of one binary logistic head.
#[derive(Debug, Clone, PartialEq)]
pub struct Head {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl Head {
    pub fn zeros(dim: usize) -> Head {
        Head {
            weights: vec![0.0; dim],
            bias: 0.0,
        }
    }

    pub fn logit(&self, x: &SparseVector) -> f64 {
        x.dot(&self.weights) + self.bias
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^z) without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Mean binary cross-entropy plus (λ/2)‖w‖², and its exact gradient. The
/// bias is not regularized. The gradient is returned in the shape of a
/// [`Head`].
pub fn loss_and_gradient(head: &Head, data: &[SparseVector], targets: &[bool], l2: f64) -> (f64, Head) {
    assert_eq!(data.len(), targets.len(), "data/target length mismatch");
    let dim = head.weights.len();
    let mut grad = Head::zeros(dim);
    let mut loss = 0.0;
    for (x, &y) in data.iter().zip(targets) {
        let z = head.logit(x);
        let yf = if y { 1.0 } else { 0.0 };
        loss += softplus(z) - yf * z;
        let g = sigmoid(z) - yf;
        for &(i, v) in x.entries() {
            grad.weights[i] += g * v;
        }
        grad.bias += g;
    }
    if !data.is_empty() {
        let n = data.len() as f64;
        loss /= n;
        grad.weights.iter_mut().for_each(|g| *g /= n);
        grad.bias /= n;
    }
    let mut wsq = 0.0;
    for (g, w) in grad.weights.iter_mut().zip(&head.weights) {
        *g += l2 * w;
        wsq += w * w;
    }
    (loss + 0.5 * l2 * wsq, grad)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub min_df: usize,
    pub max_terms: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub tol: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            min_df: 2,
            max_terms: 20_000,
            epochs: 500,
            learning_rate: 0.5,
            l2: 1e-4,
            tol: 1e-8,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(TextClfError::InvalidConfig("learning rate must be positive".into()));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(TextClfError::InvalidConfig("l2 must be non-negative".into()));
        }
        if !(self.tol >= 0.0) {
            return Err(TextClfError::InvalidConfig("tol must be non-negative".into()));
        }
        if self.max_terms == 0 {
            return Err(TextClfError::InvalidConfig("max_terms must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadTrace {
    pub head: Head,
    /// Loss before the first step followed by the loss after every epoch.
    pub losses: Vec<f64>,
}

impl HeadTrace {
    pub fn epochs_run(&self) -> usize {
        self.losses.len() - 1
    }

    pub fn final_loss(&self) -> f64 {
        *self.losses.last().expect("trace has the initial loss")
    }
}

/// Full-batch gradient descent on one head from the zero vector. Stops after
/// `config.epochs` steps or once the loss changes by less than `config.tol`.
pub fn train_head(
    theme: Theme,
    data: &[SparseVector],
    targets: &[bool],
    dim: usize,
    config: &TrainConfig,
) -> Result<HeadTrace> {
    let mut head = Head::zeros(dim);
    let (mut loss, mut grad) = loss_and_gradient(&head, data, targets, config.l2);
    let mut losses = vec![loss];
    for epoch in 1..=config.epochs {
        for (w, g) in head.weights.iter_mut().zip(&grad.weights) {
            *w -= config.learning_rate * g;
        }
        head.bias -= config.learning_rate * grad.bias;
        let (next, next_grad) = loss_and_gradient(&head, data, targets, config.l2);
        if !next.is_finite() {
            return Err(TextClfError::NonFiniteLoss { theme, epoch });
        }
        losses.push(next);
        let change = (loss - next).abs();
        loss = next;
        grad = next_grad;
        if change < config.tol {
            break;
        }
    }
    Ok(HeadTrace { head, losses })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingMeta {
    pub config: TrainConfig,
    pub epochs_run: [usize; 4],
    pub final_loss: [f64; 4],
}

/// Vocabulary plus one logistic head per theme.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiLabelModel {
    pub vocab: Vocabulary,
    pub heads: [Head; 4],
    pub meta: TrainingMeta,
}

/// Independent per-theme probabilities (not normalized across themes).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThemeScores(pub [f64; 4]);

impl ThemeScores {
    pub fn get(&self, theme: Theme) -> f64 {
        self.0[theme.index()]
    }
}

/// Fit the vocabulary on `texts`, then train the four heads.
pub fn train<S: AsRef<str>>(texts: &[S], labels: &[ThemeSet], config: &TrainConfig) -> Result<MultiLabelModel> {
    if texts.len() != labels.len() {
        return Err(TextClfError::LengthMismatch {
            texts: texts.len(),
            labels: labels.len(),
        });
    }
    config.validate()?;
    for theme in Theme::ALL {
        let positives = labels.iter().filter(|l| l.contains(theme)).count();
        let negatives = labels.len() - positives;
        if positives == 0 || negatives == 0 {
            return Err(TextClfError::DegenerateTheme {
                theme,
                positives,
                negatives,
            });
        }
    }
    let tokens: Vec<Vec<String>> = texts.iter().map(|t| tokenize(t.as_ref())).collect();
    let vocab = fit_vocabulary(&tokens, config.min_df, config.max_terms)?;
    let vectors: Vec<SparseVector> = tokens.iter().map(|t| vectorize(t, &vocab)).collect();

    let mut heads: [Head; 4] = std::array::from_fn(|_| Head::zeros(0));
    let mut epochs_run = [0; 4];
    let mut final_loss = [0.0; 4];
    for theme in Theme::ALL {
        let targets: Vec<bool> = labels.iter().map(|l| l.contains(theme)).collect();
        let trace = train_head(theme, &vectors, &targets, vocab.len(), config)?;
        let k = theme.index();
        epochs_run[k] = trace.epochs_run();
        final_loss[k] = trace.final_loss();
        heads[k] = trace.head;
    }
    Ok(MultiLabelModel {
        vocab,
        heads,
        meta: TrainingMeta {
            config: config.clone(),
            epochs_run,
            final_loss,
        },
    })
}

/// Seeded held-out split, stratified by label-set signature: within each
/// group of identically labeled documents, `round(len · test_fraction)` go to
/// the test side. Returns sorted (train, test) indices.
pub fn holdout_split(labels: &[ThemeSet], test_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut groups: BTreeMap<u8, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        groups.entry(l.bits()).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for mut members in groups.into_values() {
        members.shuffle(&mut rng);
        let n_test = (members.len() as f64 * test_fraction).round() as usize;
        test.extend_from_slice(&members[..n_test]);
        train.extend_from_slice(&members[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

pub fn predict_scores(model: &MultiLabelModel, x: &SparseVector) -> Result<ThemeScores> {
    if x.dim() != model.vocab.len() {
        return Err(TextClfError::DimensionMismatch {
            expected: model.vocab.len(),
            got: x.dim(),
        });
    }
    Ok(ThemeScores(std::array::from_fn(|k| sigmoid(model.heads[k].logit(x)))))
}

/// Themes whose score is at or above `threshold`.
pub fn predict_labels(scores: &ThemeScores, threshold: f64) -> ThemeSet {
    Theme::ALL
        .into_iter()
        .filter(|t| scores.get(*t) >= threshold)
        .collect()
}

impl MultiLabelModel {
    pub fn score_text(&self, text: &str) -> ThemeScores {
        let x = vectorize(&tokenize(text), &self.vocab);
        predict_scores(self, &x).expect("vectorized with the model's own vocabulary")
    }

    /// Serialize to the versioned flat text format. Floats are written in
    /// shortest round-trip form, so `from_text(to_text())` is bit-exact.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let c = &self.meta.config;
        writeln!(s, "{MODEL_HEADER}").unwrap();
        writeln!(
            s,
            "train\tmin_df={}\tmax_terms={}\tepochs={}\tlr={:?}\tl2={:?}\ttol={:?}",
            c.min_df, c.max_terms, c.epochs, c.learning_rate, c.l2, c.tol
        )
        .unwrap();
        writeln!(s, "vocab\t{}\t{}", self.vocab.len(), self.vocab.n_docs).unwrap();
        for (i, term) in self.vocab.terms.iter().enumerate() {
            writeln!(s, "{term}\t{i}\t{}\t{:?}", self.vocab.df[i], self.vocab.idf[i]).unwrap();
        }
        for theme in Theme::ALL {
            let k = theme.index();
            let h = &self.heads[k];
            writeln!(
                s,
                "head\t{}\t{:?}\t{}\t{:?}",
                theme.slug(),
                h.bias,
                self.meta.epochs_run[k],
                self.meta.final_loss[k]
            )
            .unwrap();
            for w in &h.weights {
                writeln!(s, "{w:?}").unwrap();
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<MultiLabelModel> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let perr = |line: usize, message: String| TextClfError::Parse { line, message };
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| perr(0, format!("unexpected end of file, expected {what}")))
        };

        let (_, header) = next("header")?;
        if header != MODEL_HEADER {
            return Err(TextClfError::Version {
                found: header.to_string(),
            });
        }

        let (ln, train_line) = next("train line")?;
        let fields: Vec<&str> = train_line.split('\t').collect();
        if fields.first() != Some(&"train") || fields.len() != 7 {
            return Err(perr(ln, "malformed train line".into()));
        }
        let kv = |i: usize, key: &str| -> Result<&str> {
            fields[i]
                .strip_prefix(key)
                .and_then(|r| r.strip_prefix('='))
                .ok_or_else(|| perr(ln, format!("expected {key}=...")))
        };
        let config = TrainConfig {
            min_df: parse_num(kv(1, "min_df")?, ln)?,
            max_terms: parse_num(kv(2, "max_terms")?, ln)?,
            epochs: parse_num(kv(3, "epochs")?, ln)?,
            learning_rate: parse_num(kv(4, "lr")?, ln)?,
            l2: parse_num(kv(5, "l2")?, ln)?,
            tol: parse_num(kv(6, "tol")?, ln)?,
        };

        let (ln, vocab_line) = next("vocab line")?;
        let fields: Vec<&str> = vocab_line.split('\t').collect();
        if fields.len() != 3 || fields[0] != "vocab" {
            return Err(perr(ln, "malformed vocab line".into()));
        }
        let v: usize = parse_num(fields[1], ln)?;
        let n_docs: usize = parse_num(fields[2], ln)?;
        let mut terms = Vec::with_capacity(v);
        let mut df = Vec::with_capacity(v);
        let mut idf = Vec::with_capacity(v);
        for expected in 0..v {
            let (ln, line) = next("vocabulary entry")?;
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 4 {
                return Err(perr(ln, "vocabulary entry needs 4 fields".into()));
            }
            let idx: usize = parse_num(f[1], ln)?;
            if idx != expected {
                return Err(perr(ln, format!("vocabulary index {idx}, expected {expected}")));
            }
            terms.push(f[0].to_string());
            df.push(parse_num(f[2], ln)?);
            let w: f64 = parse_num(f[3], ln)?;
            if !w.is_finite() {
                return Err(perr(ln, "non-finite idf".into()));
            }
            idf.push(w);
        }
        let vocab = Vocabulary::from_parts(terms, df, idf, n_docs);
        if vocab.index.len() != v {
            return Err(perr(ln, "duplicate vocabulary term".into()));
        }

        let mut heads: [Option<Head>; 4] = Default::default();
        let mut epochs_run = [0; 4];
        let mut final_loss = [0.0; 4];
        for _ in 0..4 {
            let (ln, line) = next("head line")?;
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 5 || f[0] != "head" {
                return Err(perr(ln, "malformed head line".into()));
            }
            let theme = Theme::from_slug(f[1]).ok_or_else(|| perr(ln, format!("unknown head {:?}", f[1])))?;
            let k = theme.index();
            if heads[k].is_some() {
                return Err(perr(ln, format!("head {} repeated", f[1])));
            }
            let bias: f64 = parse_num(f[2], ln)?;
            epochs_run[k] = parse_num(f[3], ln)?;
            final_loss[k] = parse_num(f[4], ln)?;
            let mut weights = Vec::with_capacity(v);
            for _ in 0..v {
                let (ln, line) = next("weight")?;
                let w: f64 = parse_num(line, ln)?;
                if !w.is_finite() {
                    return Err(perr(ln, "non-finite weight".into()));
                }
                weights.push(w);
            }
            if !bias.is_finite() {
                return Err(perr(ln, "non-finite bias".into()));
            }
            heads[k] = Some(Head { weights, bias });
        }
        if let Some((ln, _)) = lines.next() {
            return Err(perr(ln, "trailing content after last head".into()));
        }
        let heads = heads.map(|h| h.expect("four distinct heads read"));
        Ok(MultiLabelModel {
            vocab,
            heads,
            meta: TrainingMeta {
                config,
                epochs_run,
                final_loss,
            },
        })
    }
}

fn parse_num<T: std::str::FromStr>(s: &str, line: usize) -> Result<T> {
    s.trim().parse().map_err(|_| TextClfError::Parse {
        line,
        message: format!("cannot parse {s:?} as a number"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn toks(words: &[&str]) -> Vec<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    #[test]
    fn tokenize_rules() {
        assert_eq!(tokenize("Climate-Change ACT 2021"), toks(&["climate", "change", "act", "2021"]));
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("CO2 y reducción"), toks(&["co2", "reducción"]));
        assert_eq!(tokenize("  a, b; ÉTÉ!"), toks(&["été"]));
    }

    #[test]
    fn idf_values() {
        assert_eq!(smoothed_idf(4, 4), 1.0);
        // hand value: ln(5/2) + 1
        assert_abs_diff_eq!(smoothed_idf(4, 1), 1.916290731874155, epsilon = 1e-12);
    }

    #[test]
    fn vocabulary_filters_and_caps() {
        let corpus = vec![
            toks(&["aa", "bb", "cc"]),
            toks(&["aa", "bb"]),
            toks(&["aa", "dd"]),
            toks(&["aa", "bb", "dd"]),
        ];
        let v = fit_vocabulary(&corpus, 2, 100).unwrap();
        assert_eq!(v.terms(), ["aa", "bb", "dd"]);
        assert_eq!(v.idf(v.index_of("aa").unwrap()), 1.0);
        assert_eq!(v.index_of("cc"), None);

        let v = fit_vocabulary(&corpus, 1, 2).unwrap();
        assert_eq!(v.terms(), ["aa", "bb"]);
        // dd ties with nothing at df=2 except... bb df=3 wins, then tie-break is lexical
        let v = fit_vocabulary(&corpus, 1, 3).unwrap();
        assert_eq!(v.terms(), ["aa", "bb", "dd"]);

        assert!(matches!(
            fit_vocabulary(&corpus, 5, 100),
            Err(TextClfError::EmptyVocabulary { min_df: 5 })
        ));
        let empty: Vec<Vec<String>> = vec![];
        assert!(matches!(fit_vocabulary(&empty, 1, 10), Err(TextClfError::EmptyCorpus)));
    }

    #[test]
    fn vectorize_examples() {
        let vocab = Vocabulary::from_parts(toks(&["aa", "bb"]), vec![1, 1], vec![1.0, 2.0], 4);
        let x = vectorize(&toks(&["aa", "aa", "bb"]), &vocab);
        assert_eq!(x.entries().len(), 2);
        assert_abs_diff_eq!(x.entries()[0].1, 0.7071067811865475, epsilon = 1e-12);
        assert_abs_diff_eq!(x.entries()[1].1, 0.7071067811865475, epsilon = 1e-12);

        let single = vectorize(&toks(&["bb", "zz"]), &vocab);
        assert_eq!(single.entries(), &[(1, 1.0)]);

        let oov = vectorize(&toks(&["zz", "yy"]), &vocab);
        assert!(oov.entries().is_empty());
        assert_eq!(oov.dim(), 2);
    }

    #[test]
    fn loss_at_zero_is_ln2() {
        let data = vec![SparseVector::new(2, vec![(0, 0.6), (1, 0.8)]), SparseVector::zero(2)];
        let (loss, _) = loss_and_gradient(&Head::zeros(2), &data, &[true, false], 0.3);
        assert_abs_diff_eq!(loss, std::f64::consts::LN_2, epsilon = 1e-15);
    }

    #[test]
    fn single_doc_gradient() {
        let data = vec![SparseVector::new(1, vec![(0, 1.0)])];
        let (_, g) = loss_and_gradient(&Head::zeros(1), &data, &[true], 0.0);
        assert_eq!(g.weights, vec![-0.5]);
        assert_eq!(g.bias, -0.5);
    }

    #[test]
    fn extreme_logits_stay_finite() {
        let data = vec![SparseVector::new(1, vec![(0, 1.0)])];
        let head = Head {
            weights: vec![1000.0],
            bias: 0.0,
        };
        let (loss, g) = loss_and_gradient(&head, &data, &[false], 0.0);
        assert_abs_diff_eq!(loss, 1000.0, epsilon = 1e-9);
        assert!(g.weights[0].is_finite());
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert_eq!(sigmoid(1000.0), 1.0);
    }

    fn toy_model(w: f64, b: f64) -> MultiLabelModel {
        let vocab = Vocabulary::from_parts(toks(&["xx"]), vec![1], vec![1.0], 1);
        MultiLabelModel {
            vocab,
            heads: std::array::from_fn(|_| Head {
                weights: vec![w],
                bias: b,
            }),
            meta: TrainingMeta {
                config: TrainConfig::default(),
                epochs_run: [0; 4],
                final_loss: [0.0; 4],
            },
        }
    }

    #[test]
    fn scores_and_labels() {
        let zero = toy_model(0.0, 0.0);
        let x = SparseVector::new(1, vec![(0, 1.0)]);
        assert_eq!(predict_scores(&zero, &x).unwrap().0, [0.5; 4]);

        let m = toy_model(2.0, -1.0);
        let s = predict_scores(&m, &x).unwrap();
        assert_abs_diff_eq!(s.0[0], 0.7310585786300049, epsilon = 1e-12);
        let s0 = predict_scores(&m, &SparseVector::zero(1)).unwrap();
        assert_abs_diff_eq!(s0.0[2], sigmoid(-1.0), epsilon = 0.0);

        assert!(matches!(
            predict_scores(&m, &SparseVector::zero(3)),
            Err(TextClfError::DimensionMismatch { expected: 1, got: 3 })
        ));
    }

    #[test]
    fn threshold_is_inclusive() {
        let labels = predict_labels(&ThemeScores([0.6, 0.4, 0.5, 0.9]), 0.5);
        let expected: ThemeSet = [Theme::Mitigation, Theme::DisasterRiskManagement, Theme::LossAndDamage]
            .into_iter()
            .collect();
        assert_eq!(labels, expected);
        assert!(predict_labels(&ThemeScores([0.49; 4]), 0.5).is_empty());
        assert_eq!(predict_labels(&ThemeScores([1.0; 4]), 0.5), ThemeSet::FULL);
    }

    fn tiny_corpus() -> (Vec<&'static str>, Vec<ThemeSet>) {
        let m = ThemeSet::EMPTY.with(Theme::Mitigation);
        let a = ThemeSet::EMPTY.with(Theme::Adaptation);
        let d = ThemeSet::EMPTY.with(Theme::DisasterRiskManagement);
        let l = ThemeSet::EMPTY.with(Theme::LossAndDamage);
        (
            vec![
                "emission cuts policy",
                "emission trading policy",
                "adaptation water plan",
                "adaptation coastal plan",
                "flood warning plan",
                "flood response policy",
                "loss damage fund",
                "loss damage insurance fund",
            ],
            vec![m, m, a, a, d, d, l, l],
        )
    }

    #[test]
    fn zero_epochs_gives_zero_model() {
        let (texts, labels) = tiny_corpus();
        let cfg = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        let model = train(&texts, &labels, &cfg).unwrap();
        for h in &model.heads {
            assert!(h.weights.iter().all(|&w| w == 0.0));
            assert_eq!(h.bias, 0.0);
        }
        assert_eq!(model.meta.epochs_run, [0; 4]);
        assert_eq!(model.score_text("anything").0, [0.5; 4]);
    }

    #[test]
    fn degenerate_theme_named() {
        let (texts, mut labels) = tiny_corpus();
        labels[6] = ThemeSet::EMPTY.with(Theme::Mitigation);
        labels[7] = ThemeSet::EMPTY.with(Theme::Mitigation);
        match train(&texts, &labels, &TrainConfig::default()) {
            Err(TextClfError::DegenerateTheme { theme, positives, .. }) => {
                assert_eq!(theme, Theme::LossAndDamage);
                assert_eq!(positives, 0);
            }
            other => panic!("unexpected {other:?}"),
        }
        let all: Vec<ThemeSet> = vec![ThemeSet::FULL; texts.len()];
        assert!(matches!(
            train(&texts, &all, &TrainConfig::default()),
            Err(TextClfError::DegenerateTheme { negatives: 0, .. })
        ));
    }

    #[test]
    fn huge_learning_rate_reports_non_finite_loss() {
        let (texts, labels) = tiny_corpus();
        let cfg = TrainConfig {
            learning_rate: 1e308,
            min_df: 1,
            ..TrainConfig::default()
        };
        assert!(matches!(
            train(&texts, &labels, &cfg),
            Err(TextClfError::NonFiniteLoss { .. })
        ));
    }

    #[test]
    fn model_text_round_trip_is_bit_exact() {
        let (texts, labels) = tiny_corpus();
        let cfg = TrainConfig {
            min_df: 1,
            epochs: 50,
            ..TrainConfig::default()
        };
        let model = train(&texts, &labels, &cfg).unwrap();
        let text = model.to_text();
        let back = MultiLabelModel::from_text(&text).unwrap();
        assert_eq!(back, model);
        for (a, b) in back.heads.iter().zip(&model.heads) {
            for (x, y) in a.weights.iter().zip(&b.weights) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn split_is_stratified_and_seeded() {
        let m = ThemeSet::EMPTY.with(Theme::Mitigation);
        let a = ThemeSet::EMPTY.with(Theme::Adaptation);
        let labels: Vec<ThemeSet> = (0..50).map(|i| if i % 5 == 0 { a } else { m }).collect();
        let (train, test) = holdout_split(&labels, 0.2, 9);
        assert_eq!(test.len(), 10);
        assert_eq!(test.iter().filter(|&&i| labels[i] == a).count(), 2);
        assert_eq!(train.len() + test.len(), 50);
        assert_eq!(holdout_split(&labels, 0.2, 9), (train, test));
        assert_ne!(holdout_split(&labels, 0.2, 10).1, holdout_split(&labels, 0.2, 9).1);
    }

    #[test]
    fn model_parse_errors() {
        assert!(matches!(
            MultiLabelModel::from_text("policylens-model v2\n"),
            Err(TextClfError::Version { .. })
        ));
        let (texts, labels) = tiny_corpus();
        let cfg = TrainConfig {
            min_df: 1,
            epochs: 1,
            ..TrainConfig::default()
        };
        let text = train(&texts, &labels, &cfg).unwrap().to_text();
        let truncated: String = text.lines().take(10).map(|l| format!("{l}\n")).collect();
        assert!(matches!(
            MultiLabelModel::from_text(&truncated),
            Err(TextClfError::Parse { .. })
        ));
        let extra = format!("{text}junk\n");
        assert!(matches!(
            MultiLabelModel::from_text(&extra),
            Err(TextClfError::Parse { .. })
        ));
    }
}
