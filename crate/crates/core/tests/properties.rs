use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use cctree::ast::{export_tree, flatten, import_tree, split_item, TokenSequence};
use cctree::change::{
    build_change_tree, change_trees, flatten_change_tree, path_difference, root_paths, RankMode, RootPathSet,
};
use cctree::embed::{train, EmbedConfig, EmbeddingModel};
use cctree::eval::{f1, stratified_folds, upsample};
use cctree::features::{parse_record, represent_parsed, Representation};
use cctree::java::{parse_methods, parse_source};
use cctree::synth::{random_ast, single_edit_corpus};
use cctree::tokens::{apply_oov, build_vocabulary, build_vocabulary_parallel, normalize_sequence, OovPolicy, Vocabulary};

const MODES: [RankMode; 2] = [RankMode::None, RankMode::Positional];

fn ast_from(seed: u64, max_nodes: usize) -> cctree::ast::Ast {
    random_ast(&mut ChaCha8Rng::seed_from_u64(seed), max_nodes)
}

fn items() -> impl Strategy<Value = String> {
    prop_oneof![
        Just("block".to_owned()),
        Just("identifier|x".to_owned()),
        Just("identifier|y".to_owned()),
        Just("string_literal|a b".to_owned()),
        Just("string_literal|a\tb".to_owned()),
        Just("string_literal|a_b".to_owned()),
        "[a-z]{1,3}".prop_map(|k| format!("identifier|{k}")),
    ]
}

fn sequence() -> impl Strategy<Value = TokenSequence> {
    prop::collection::vec(items(), 0..12).prop_map(|v| TokenSequence::new(v).unwrap())
}

fn corpus() -> impl Strategy<Value = Vec<TokenSequence>> {
    prop::collection::vec(sequence(), 1..20)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn flatten_has_one_item_per_node(seed: u64, max in 1usize..200) {
        let ast = ast_from(seed, max);
        let flat = flatten(&ast);
        prop_assert_eq!(flat.len(), ast.node_count());
        prop_assert_eq!(flatten(&ast_from(seed, max)), flat);
    }

    #[test]
    fn import_inverts_export(seed: u64, max in 1usize..120) {
        let ast = ast_from(seed, max);
        let back = import_tree(&export_tree(&ast)).unwrap();
        prop_assert_eq!(&back, &ast);
        prop_assert_eq!(flatten(&back), flatten(&ast));
    }

    #[test]
    fn identity_change_is_empty(seed: u64, max in 1usize..200) {
        let ast = ast_from(seed, max);
        for mode in MODES {
            let (pre, post) = change_trees(&ast, &ast, mode).unwrap();
            prop_assert!(pre.is_empty() && post.is_empty());
        }
    }

    #[test]
    fn change_tree_enumerates_back_to_its_paths(seed: u64, max in 1usize..200, keep in 0u32..=100) {
        let ast = ast_from(seed, max);
        for mode in MODES {
            let all = root_paths(&ast, mode);
            let mut subset = RootPathSet::new(mode);
            for (i, path) in all.iter().enumerate() {
                if (i as u64).wrapping_mul(2654435761).wrapping_add(seed) % 100 < u64::from(keep) {
                    subset.insert(path.clone());
                }
            }
            let tree = build_change_tree(&subset).unwrap();
            let rebuilt = tree.root_paths();
            prop_assert_eq!(rebuilt.encodings(), subset.encodings());
            prop_assert_eq!(tree.is_empty(), subset.is_empty());
        }
    }

    #[test]
    fn change_tree_paths_are_contained_and_smaller(a: u64, b: u64, max in 1usize..150) {
        let pre = ast_from(a, max);
        let post = ast_from(b, max);
        for mode in MODES {
            let (pre_tree, post_tree) = change_trees(&pre, &post, mode).unwrap();
            let pre_paths = root_paths(&pre, mode);
            let post_paths = root_paths(&post, mode);
            for path in pre_tree.root_paths().iter() {
                prop_assert!(pre_paths.contains(path));
                prop_assert!(!post_paths.contains(path));
            }
            for path in post_tree.root_paths().iter() {
                prop_assert!(post_paths.contains(path));
                prop_assert!(!pre_paths.contains(path));
            }
            let rebuilt = pre_tree.root_paths();
            let difference = path_difference(&pre_paths, &post_paths).unwrap();
            prop_assert_eq!(rebuilt.encodings(), difference.encodings());
            prop_assert!(flatten_change_tree(&pre_tree).len() <= flatten(&pre).len());
            prop_assert!(flatten_change_tree(&post_tree).len() <= flatten(&post).len());
        }
    }

    #[test]
    fn normalize_and_oov_preserve_length(seqs in corpus(), frac in 0.0f64..=1.0) {
        let normalized: Vec<_> = seqs.iter().map(normalize_sequence).collect();
        let vocab = build_vocabulary(&normalized, frac).unwrap();
        let policy = OovPolicy::default();
        for (raw, norm) in seqs.iter().zip(&normalized) {
            prop_assert_eq!(raw.len(), norm.len());
            prop_assert_eq!(&normalize_sequence(norm), norm);
            for item in norm.iter() {
                if let ("string_literal", Some(tok)) = split_item(item) {
                    prop_assert!(!tok.chars().any(char::is_whitespace));
                }
            }
            let once = apply_oov(norm, &vocab, &policy);
            prop_assert_eq!(once.len(), norm.len());
            prop_assert_eq!(apply_oov(&once, &vocab, &policy), once.clone());
            for (before, after) in norm.iter().zip(once.iter()) {
                let kept = vocab.contains(before);
                prop_assert_eq!(after == before, kept || before == &policy.oov_symbol);
            }
        }
    }

    #[test]
    fn vocabulary_ignores_corpus_order_and_sharding(seqs in corpus(), frac in 0.0f64..=1.0, rot: usize) {
        let vocab = build_vocabulary(&seqs, frac).unwrap();
        let mut shuffled = seqs.clone();
        shuffled.reverse();
        let len = shuffled.len();
        shuffled.rotate_left(rot % len);
        prop_assert_eq!(&build_vocabulary(&shuffled, frac).unwrap(), &vocab);
        prop_assert_eq!(&build_vocabulary_parallel(&shuffled, frac).unwrap(), &vocab);
        prop_assert_eq!(build_vocabulary(&shuffled, frac).unwrap().fingerprint(), vocab.fingerprint());

        // Independent document-frequency count.
        let mut df: BTreeMap<&str, u64> = BTreeMap::new();
        for seq in &seqs {
            let mut seen: Vec<&str> = seq.iter().map(String::as_str).collect();
            seen.sort_unstable();
            seen.dedup();
            for term in seen {
                *df.entry(term).or_default() += 1;
            }
        }
        let threshold = vocab.threshold();
        let expected: Vec<(&str, u64)> = df.into_iter().filter(|&(_, n)| n >= threshold).collect();
        prop_assert_eq!(vocab.terms().collect::<Vec<_>>(), expected);
    }

    #[test]
    fn vocabulary_tsv_round_trips(seqs in corpus(), frac in 0.0f64..=1.0) {
        let vocab = build_vocabulary(&seqs, frac).unwrap();
        let back = Vocabulary::read_tsv(vocab.to_tsv_string().as_bytes()).unwrap();
        prop_assert_eq!(back.to_tsv_string(), vocab.to_tsv_string());
        prop_assert_eq!(back.fingerprint(), vocab.fingerprint());
        prop_assert_eq!(back, vocab);
    }

    #[test]
    fn f1_is_scale_invariant(tp in 0u64..1000, fp in 0u64..1000, fn_ in 0u64..1000, c in 1u64..50) {
        let (base, degenerate) = f1(tp, fp, fn_);
        let (scaled, scaled_degenerate) = f1(c * tp, c * fp, c * fn_);
        prop_assert!((base - scaled).abs() < 1e-12);
        prop_assert_eq!(degenerate, scaled_degenerate);
        prop_assert!((0.0..=1.0).contains(&base));
    }

    #[test]
    fn folds_partition_and_stratify(labels in prop::collection::vec(any::<bool>(), 20..300), k in 2usize..8, seed: u64) {
        let pos = labels.iter().filter(|&&l| l).count();
        let neg = labels.len() - pos;
        prop_assume!(pos >= k && neg >= k);
        let splits = stratified_folds(&labels, k, seed).unwrap();
        prop_assert_eq!(splits.len(), k);
        let mut seen = vec![0usize; labels.len()];
        for split in &splits {
            for &i in &split.test {
                seen[i] += 1;
            }
            prop_assert_eq!(split.train.len() + split.test.len(), labels.len());
            prop_assert!(split.train.iter().all(|i| !split.test.contains(i)));
        }
        prop_assert!(seen.iter().all(|&n| n == 1));
        let sizes: Vec<usize> = splits.iter().map(|s| s.test.len()).collect();
        let pos_counts: Vec<usize> = splits.iter().map(|s| s.test.iter().filter(|&&i| labels[i]).count()).collect();
        let spread = |v: &[usize]| v.iter().max().unwrap() - v.iter().min().unwrap();
        prop_assert!(spread(&sizes) <= 1);
        prop_assert!(spread(&pos_counts) <= 1);
        prop_assert_eq!(&stratified_folds(&labels, k, seed).unwrap(), &splits);
    }

    #[test]
    fn upsampling_balances_exactly(labels in prop::collection::vec(any::<bool>(), 1..200), seed: u64) {
        let indices: Vec<usize> = (0..labels.len()).collect();
        let out = upsample(&indices, &labels, seed);
        let pos = out.iter().filter(|&&i| labels[i]).count();
        let neg = out.len() - pos;
        prop_assert_eq!(&out[..indices.len()], &indices[..]);
        if labels.iter().any(|&l| l) && labels.iter().any(|&l| !l) {
            prop_assert_eq!(pos, neg);
        } else {
            prop_assert_eq!(out.len(), indices.len());
        }
    }
}

fn small_config(seed: u64, dim: usize) -> EmbedConfig {
    EmbedConfig {
        dim,
        epochs: 2,
        negative_samples: 2,
        learning_rate: 0.05,
        seed,
        infer_epochs: 3,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn models_round_trip_and_embed_at_fixed_width(seqs in corpus(), seed: u64, dim in 1usize..12, probe in sequence()) {
        prop_assume!(seqs.iter().any(|s| !s.is_empty()));
        let config = small_config(seed, dim);
        let model = train(&seqs, &config, None).unwrap();
        let bytes = model.to_bytes();
        prop_assert_eq!(&train(&seqs, &config, None).unwrap().to_bytes(), &bytes);
        let back = EmbeddingModel::from_bytes(&bytes).unwrap();
        prop_assert_eq!(&back, &model);
        let v = model.embed(&probe);
        prop_assert_eq!(v.len(), dim);
        prop_assert_eq!(&back.embed(&probe), &v);
        prop_assert!(model.embed(&TokenSequence::empty()).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn representations_have_fixed_width(seed: u64) {
        let records = single_edit_corpus(6, seed);
        let parsed: Vec<_> = records.iter().map(|r| parse_record(r).unwrap()).collect();
        let seqs: Vec<_> = parsed.iter().filter_map(|p| p.pre_ast()).map(flatten).collect();
        let a = train(&seqs, &small_config(seed, 5), None).unwrap();
        let b = train(&seqs, &small_config(seed ^ 1, 7), None).unwrap();
        for p in &parsed {
            let m0 = represent_parsed(p, Representation::Metrics, None, RankMode::None).unwrap();
            let m1 = represent_parsed(p, Representation::Metrics, Some(&a), RankMode::None).unwrap();
            prop_assert_eq!(&m0.values, &m1.values);
            prop_assert_eq!(m0.values.len(), 20);
            for mode in [Representation::Simple, Representation::ChangeTree] {
                prop_assert_eq!(represent_parsed(p, mode, Some(&a), RankMode::None).unwrap().values.len(), 10);
                prop_assert_eq!(represent_parsed(p, mode, Some(&b), RankMode::None).unwrap().values.len(), 14);
            }
        }
    }
}

/// Straight-line Java whose identifiers and integer literals are known by
/// construction.
#[derive(Debug, Clone)]
enum Stmt {
    Assign(usize, usize, u32),
    Call(usize, usize),
    Guard(usize, u32, usize),
}

fn stmt() -> impl Strategy<Value = Stmt> {
    prop_oneof![
        (0usize..4, 0usize..4, 0u32..100).prop_map(|(a, b, n)| Stmt::Assign(a, b, n)),
        (0usize..3, 0usize..4).prop_map(|(f, a)| Stmt::Call(f, a)),
        (0usize..4, 0u32..100, 0usize..4).prop_map(|(a, n, b)| Stmt::Guard(a, n, b)),
    ]
}

fn render(methods: &[Vec<Stmt>]) -> (String, BTreeMap<String, usize>) {
    let mut tokens: BTreeMap<String, usize> = BTreeMap::new();
    let mut note = |t: String| *tokens.entry(t).or_default() += 1;
    let mut src = String::from("class K {\n");
    note("K".into());
    for (m, body) in methods.iter().enumerate() {
        src.push_str(&format!("  void m{m}(int v0) {{\n    int v1 = 0, v2 = 1, v3 = 2;\n"));
        for t in [format!("m{m}"), "v0".into(), "v1".into(), "0".into(), "v2".into(), "1".into(), "v3".into(), "2".into()] {
            note(t);
        }
        for s in body {
            match *s {
                Stmt::Assign(a, b, n) => {
                    src.push_str(&format!("    v{a} = v{b} + {n};\n"));
                    [format!("v{a}"), format!("v{b}"), n.to_string()].into_iter().for_each(&mut note);
                }
                Stmt::Call(f, a) => {
                    src.push_str(&format!("    f{f}(v{a});\n"));
                    [format!("f{f}"), format!("v{a}")].into_iter().for_each(&mut note);
                }
                Stmt::Guard(a, n, b) => {
                    src.push_str(&format!("    if (v{a} > {n}) {{ return; }} else {{ v{b}++; }}\n"));
                    [format!("v{a}"), n.to_string(), format!("v{b}")].into_iter().for_each(&mut note);
                }
            }
        }
        src.push_str("  }\n");
    }
    src.push_str("}\n");
    (src, tokens)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn parser_keeps_every_identifier_and_literal(methods in prop::collection::vec(prop::collection::vec(stmt(), 0..8), 1..4)) {
        let (src, expected) = render(&methods);
        let ast = parse_source(&src).unwrap();
        prop_assert_eq!(&parse_source(&src).unwrap(), &ast);
        let mut found: BTreeMap<String, usize> = BTreeMap::new();
        for item in flatten(&ast).iter() {
            if let ("identifier" | "decimal_integer_literal", Some(tok)) = split_item(item) {
                *found.entry(tok.to_owned()).or_default() += 1;
            }
        }
        prop_assert_eq!(found, expected);

        let units = parse_methods(&src).unwrap();
        prop_assert_eq!(units.len(), methods.len());
        for (m, unit) in units.iter().enumerate() {
            let header = format!("void m{m}(");
            prop_assert!(unit.source_text.starts_with(&header));
        }
    }
}

#[test]
fn rank_mode_decides_whether_shifted_statements_match() {
    let pre = parse_source("void f() { a(); b(); }").unwrap();
    let post = parse_source("void f() { x(); a(); b(); }").unwrap();
    let (pre_none, post_none) = change_trees(&pre, &post, RankMode::None).unwrap();
    assert!(pre_none.is_empty());
    let post_items = flatten_change_tree(&post_none);
    assert!(post_items.iter().any(|i| i == "identifier|x"));
    assert!(!post_items.iter().any(|i| i == "identifier|a" || i == "identifier|b"));

    let (pre_pos, post_pos) = change_trees(&pre, &post, RankMode::Positional).unwrap();
    assert!(!pre_pos.is_empty());
    assert!(post_pos.node_count() > post_none.node_count());
}
