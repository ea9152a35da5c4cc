//! Preprocessing of flattened sequences: whitespace normalization inside
//! string literals, document-frequency vocabularies and out-of-vocabulary
//! replacement.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, Write};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::ast::{split_item, TokenSequence, SEPARATOR};
use crate::error::TokensError;

pub const DEFAULT_OOV: &str = "<OOV>";

const HEADER_PREFIX: &str = "# cctree-vocabulary";

/// Replaces every whitespace character inside the token part of
/// `string_literal` items with `_`. Other items are unchanged.
pub fn normalize_sequence(seq: &TokenSequence) -> TokenSequence {
    let items = seq
        .iter()
        .map(|item| match split_item(item) {
            ("string_literal", Some(tok)) if tok.chars().any(char::is_whitespace) => {
                let mut out = String::with_capacity(item.len());
                out.push_str("string_literal");
                out.push(SEPARATOR);
                out.extend(tok.chars().map(|c| if c.is_whitespace() { '_' } else { c }));
                out
            }
            _ => item.clone(),
        })
        .collect();
    TokenSequence::from_items(items)
}

/// Minimum document frequency for `fraction` of `corpus_size` sequences:
/// `ceil(fraction * corpus_size)`, at least 1.
///
/// Products within rounding error of an integer are taken as that integer,
/// so that decimal fractions such as 0.01 behave as written.
pub fn df_threshold(fraction: f64, corpus_size: u64) -> u64 {
    let exact = fraction * corpus_size as f64;
    let nearest = exact.round();
    let t = if (exact - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest
    } else {
        exact.ceil()
    };
    (t as u64).max(1)
}

/// Per-term document frequencies over a (partial) corpus. Shards can be
/// counted independently and merged.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DocumentFrequencies {
    counts: HashMap<String, u64>,
    corpus_size: u64,
}

impl DocumentFrequencies {
    pub fn new() -> Self {
        Self::default()
    }

    /// Counts each distinct item of `seq` once.
    pub fn add(&mut self, seq: &TokenSequence) {
        self.corpus_size += 1;
        let distinct: HashSet<&str> = seq.iter().map(String::as_str).collect();
        for term in distinct {
            *self.counts.entry(term.to_owned()).or_insert(0) += 1;
        }
    }

    pub fn merge(mut self, other: DocumentFrequencies) -> Self {
        self.corpus_size += other.corpus_size;
        for (term, df) in other.counts {
            *self.counts.entry(term).or_insert(0) += df;
        }
        self
    }

    pub fn corpus_size(&self) -> u64 {
        self.corpus_size
    }

    pub fn get(&self, term: &str) -> u64 {
        self.counts.get(term).copied().unwrap_or(0)
    }

    pub fn into_vocabulary(self, min_df_fraction: f64) -> Result<Vocabulary, TokensError> {
        check_fraction(min_df_fraction)?;
        if self.corpus_size == 0 {
            return Err(TokensError::EmptyCorpus);
        }
        let threshold = df_threshold(min_df_fraction, self.corpus_size);
        let terms = self
            .counts
            .into_iter()
            .filter(|(_, df)| *df >= threshold)
            .collect();
        Ok(Vocabulary {
            terms,
            corpus_size: self.corpus_size,
            min_df_fraction,
        })
    }
}

fn check_fraction(f: f64) -> Result<(), TokensError> {
    if f > 0.0 && f <= 1.0 {
        Ok(())
    } else {
        Err(TokensError::InvalidFraction(f))
    }
}

/// Terms retained by a document-frequency threshold, with their frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    terms: BTreeMap<String, u64>,
    corpus_size: u64,
    min_df_fraction: f64,
}

impl Vocabulary {
    pub fn contains(&self, term: &str) -> bool {
        self.terms.contains_key(term)
    }

    pub fn document_frequency(&self, term: &str) -> Option<u64> {
        self.terms.get(term).copied()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn corpus_size(&self) -> u64 {
        self.corpus_size
    }

    pub fn min_df_fraction(&self) -> f64 {
        self.min_df_fraction
    }

    pub fn threshold(&self) -> u64 {
        df_threshold(self.min_df_fraction, self.corpus_size)
    }

    /// Retained terms in sorted order.
    pub fn terms(&self) -> impl Iterator<Item = (&str, u64)> {
        self.terms.iter().map(|(t, df)| (t.as_str(), *df))
    }

    /// Header line, then one `term<TAB>df` line per term in sorted order.
    /// Tabs, newlines and backslashes inside terms are escaped.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "{HEADER_PREFIX} corpus_size={} min_df_fraction={}",
            self.corpus_size, self.min_df_fraction
        )?;
        for (term, df) in &self.terms {
            writeln!(w, "{}\t{}", escape_field(term), df)?;
        }
        Ok(())
    }

    pub fn to_tsv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_tsv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("vocabulary is valid UTF-8")
    }

    pub fn read_tsv<R: BufRead>(r: R) -> Result<Self, TokensError> {
        let mut lines = r.lines();
        let header = lines.next().transpose()?.ok_or(TokensError::Format {
            line: 1,
            reason: "missing header".into(),
        })?;
        let (corpus_size, min_df_fraction) = parse_header(&header)?;
        let mut terms = BTreeMap::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            let lineno = i + 2;
            let bad = |reason: &str| TokensError::Format {
                line: lineno,
                reason: reason.to_owned(),
            };
            let (term, df) = line.rsplit_once('\t').ok_or_else(|| bad("expected term<TAB>df"))?;
            let df: u64 = df.parse().map_err(|_| bad("invalid document frequency"))?;
            if df == 0 || df > corpus_size {
                return Err(bad("document frequency out of range"));
            }
            let term = unescape_field(term).ok_or_else(|| bad("invalid escape"))?;
            if terms.insert(term, df).is_some() {
                return Err(bad("duplicate term"));
            }
        }
        Ok(Vocabulary {
            terms,
            corpus_size,
            min_df_fraction,
        })
    }

    /// First 16 bytes of the SHA-256 of the TSV serialization.
    pub fn fingerprint(&self) -> [u8; 16] {
        let digest = Sha256::digest(self.to_tsv_string().as_bytes());
        let mut out = [0u8; 16];
        out.copy_from_slice(&digest[..16]);
        out
    }
}

fn parse_header(header: &str) -> Result<(u64, f64), TokensError> {
    let bad = |reason: &str| TokensError::Format {
        line: 1,
        reason: reason.to_owned(),
    };
    let rest = header
        .strip_prefix(HEADER_PREFIX)
        .ok_or_else(|| bad("not a vocabulary file"))?;
    let mut corpus_size = None;
    let mut fraction = None;
    for field in rest.split_whitespace() {
        match field.split_once('=') {
            Some(("corpus_size", v)) => corpus_size = v.parse().ok(),
            Some(("min_df_fraction", v)) => fraction = v.parse().ok(),
            _ => return Err(bad("unknown header field")),
        }
    }
    let corpus_size = corpus_size.ok_or_else(|| bad("missing corpus_size"))?;
    let fraction = fraction.ok_or_else(|| bad("missing min_df_fraction"))?;
    check_fraction(fraction).map_err(|_| bad("min_df_fraction out of range"))?;
    Ok((corpus_size, fraction))
}

fn escape_field(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

fn unescape_field(s: &str) -> Option<String> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        out.push(match chars.next()? {
            '\\' => '\\',
            't' => '\t',
            'n' => '\n',
            'r' => '\r',
            _ => return None,
        });
    }
    Some(out)
}

/// Vocabulary of the terms present in at least `min_df_fraction` of the
/// sequences of `corpus`.
pub fn build_vocabulary<'a, I>(corpus: I, min_df_fraction: f64) -> Result<Vocabulary, TokensError>
where
    I: IntoIterator<Item = &'a TokenSequence>,
{
    check_fraction(min_df_fraction)?;
    let mut df = DocumentFrequencies::new();
    for seq in corpus {
        df.add(seq);
    }
    df.into_vocabulary(min_df_fraction)
}

/// Same result as [`build_vocabulary`], counting shards in parallel.
pub fn build_vocabulary_parallel(
    corpus: &[TokenSequence],
    min_df_fraction: f64,
) -> Result<Vocabulary, TokensError> {
    check_fraction(min_df_fraction)?;
    corpus
        .par_iter()
        .fold(DocumentFrequencies::new, |mut df, seq| {
            df.add(seq);
            df
        })
        .reduce(DocumentFrequencies::new, DocumentFrequencies::merge)
        .into_vocabulary(min_df_fraction)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OovPolicy {
    pub oov_symbol: String,
}

impl Default for OovPolicy {
    fn default() -> Self {
        OovPolicy {
            oov_symbol: DEFAULT_OOV.to_owned(),
        }
    }
}

/// Replaces every item not retained by `vocab` with the OOV symbol.
pub fn apply_oov(seq: &TokenSequence, vocab: &Vocabulary, policy: &OovPolicy) -> TokenSequence {
    let items = seq
        .iter()
        .map(|item| {
            if vocab.contains(item) {
                item.clone()
            } else {
                policy.oov_symbol.clone()
            }
        })
        .collect();
    TokenSequence::from_items(items)
}

/// Normalization followed by OOV replacement.
pub fn preprocess(seq: &TokenSequence, vocab: &Vocabulary, policy: &OovPolicy) -> TokenSequence {
    apply_oov(&normalize_sequence(seq), vocab, policy)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(items: &[&str]) -> TokenSequence {
        TokenSequence::new(items.iter().map(|s| s.to_string()).collect()).unwrap()
    }

    #[test]
    fn normalize_string_literal_whitespace() {
        assert_eq!(
            normalize_sequence(&seq(&["string_literal|Hello, World!"])).items(),
            ["string_literal|Hello,_World!"]
        );
        assert_eq!(
            normalize_sequence(&seq(&["string_literal|a\tb c"])).items(),
            ["string_literal|a_b_c"]
        );
        assert_eq!(normalize_sequence(&seq(&["identifier|msg"])).items(), ["identifier|msg"]);
        // Only string literals are touched.
        assert_eq!(
            normalize_sequence(&seq(&["character_literal| "])).items(),
            ["character_literal| "]
        );
    }

    #[test]
    fn threshold_arithmetic() {
        assert_eq!(df_threshold(0.2, 10), 2);
        assert_eq!(df_threshold(0.01, 2_000_000), 20_000);
        assert_eq!(df_threshold(0.01, 150), 2);
        assert_eq!(df_threshold(0.001, 10), 1);
        assert_eq!(df_threshold(1.0, 7), 7);
        assert_eq!(df_threshold(0.1, 3), 1);
        assert_eq!(df_threshold(0.3, 10), 3);
        assert_eq!(df_threshold(0.7, 10), 7);
    }

    #[test]
    fn rare_term_excluded() {
        let mut corpus: Vec<_> = (0..9).map(|_| seq(&["common"])).collect();
        corpus.push(seq(&["common", "rare"]));
        let vocab = build_vocabulary(&corpus, 0.2).unwrap();
        assert_eq!(vocab.threshold(), 2);
        assert!(vocab.contains("common"));
        assert!(!vocab.contains("rare"));
        assert_eq!(vocab.document_frequency("common"), Some(10));
    }

    #[test]
    fn presence_not_occurrences() {
        let corpus = vec![seq(&["a", "a", "a", "a"]), seq(&["b"]), seq(&["b"])];
        let vocab = build_vocabulary(&corpus, 0.5).unwrap();
        assert!(!vocab.contains("a"));
        assert!(vocab.contains("b"));
    }

    #[test]
    fn fraction_one_keeps_ubiquitous_terms() {
        let corpus = vec![seq(&["a", "b"]), seq(&["a", "c"]), seq(&["c", "a"])];
        let vocab = build_vocabulary(&corpus, 1.0).unwrap();
        assert_eq!(vocab.terms().map(|(t, _)| t).collect::<Vec<_>>(), ["a"]);
    }

    #[test]
    fn errors() {
        let empty: Vec<TokenSequence> = Vec::new();
        assert!(matches!(build_vocabulary(&empty, 0.1), Err(TokensError::EmptyCorpus)));
        let corpus = vec![seq(&["a"])];
        assert!(matches!(build_vocabulary(&corpus, 0.0), Err(TokensError::InvalidFraction(_))));
        assert!(matches!(build_vocabulary(&corpus, 1.5), Err(TokensError::InvalidFraction(_))));
    }

    #[test]
    fn oov_replacement() {
        let corpus = vec![seq(&["a", "b"]), seq(&["a", "b"]), seq(&["a", "c"])];
        let vocab = build_vocabulary(&corpus, 0.5).unwrap();
        let policy = OovPolicy::default();
        assert_eq!(apply_oov(&seq(&["a", "b"]), &vocab, &policy).items(), ["a", "b"]);
        assert_eq!(
            apply_oov(&seq(&["x", "c"]), &vocab, &policy).items(),
            ["<OOV>", "<OOV>"]
        );
        let mixed = seq(&["a", "c", "b", "z"]);
        let out = apply_oov(&mixed, &vocab, &policy);
        // Independent membership scan against the document frequencies.
        for (orig, got) in mixed.iter().zip(out.iter()) {
            let df = corpus.iter().filter(|s| s.items().contains(orig)).count();
            if df >= 2 {
                assert_eq!(got, orig);
            } else {
                assert_eq!(got, "<OOV>");
            }
        }
    }

    #[test]
    fn tsv_round_trip_is_exact() {
        let corpus = vec![
            seq(&["string_literal|a\tb", "x"]),
            seq(&["x", r"string_literal|back\\slash"]),
        ];
        let vocab = build_vocabulary(&corpus, 0.3).unwrap();
        let text = vocab.to_tsv_string();
        assert!(text.starts_with("# cctree-vocabulary corpus_size=2 min_df_fraction=0.3\n"));
        let back = Vocabulary::read_tsv(text.as_bytes()).unwrap();
        assert_eq!(back, vocab);
        assert_eq!(back.to_tsv_string(), text);
        assert_eq!(back.fingerprint(), vocab.fingerprint());
    }

    #[test]
    fn tsv_rejects_garbage() {
        assert!(Vocabulary::read_tsv("nonsense\n".as_bytes()).is_err());
        let text = "# cctree-vocabulary corpus_size=2 min_df_fraction=0.5\na\t3\n";
        assert!(Vocabulary::read_tsv(text.as_bytes()).is_err());
    }

    #[test]
    fn parallel_matches_sequential() {
        let corpus: Vec<_> = (0..200)
            .map(|i| seq(&[&format!("t{}", i % 7), &format!("u{}", i % 13), "c"]))
            .collect();
        assert_eq!(
            build_vocabulary_parallel(&corpus, 0.1).unwrap(),
            build_vocabulary(&corpus, 0.1).unwrap()
        );
    }
}
