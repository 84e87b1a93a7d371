//! Cross-module integration: label generation feeding fine-tuning through
//! files, vocabulary mismatches surviving the trip, and the evaluation
//! tasks reading their dataset formats off disk.

use ndarray::Array2;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use ranktune::{
    accumulate, detect_format, eval_analogy, eval_completion, eval_similarity, finalize, finetune,
    load_embedding, save_embedding, AnalogyDataset, CompletionDataset, Embedding, EvalReport,
    RankingLabelSet, SimilarityDataset, TextFormat, ThresholdSpec, TrainConfig, Vocabulary,
};

fn embedding_from(words: &[String], rows: &[Vec<f64>]) -> Embedding {
    let vocab = Vocabulary::from_words(words.iter().cloned()).unwrap();
    let dim = rows[0].len();
    let flat: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
    Embedding::from_parts(
        vocab,
        Array2::from_shape_vec((rows.len(), dim), flat).unwrap(),
    )
    .unwrap()
    .normalize_rows()
    .unwrap()
}

fn noisy_pair(seed: u64, n: usize, dim: usize, noise: f64) -> (Embedding, Embedding) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let words: Vec<String> = (0..n).map(|i| format!("w{i:02}")).collect();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            (0..dim)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();
    let clean = embedding_from(&words, &rows);
    let noisy_rows: Vec<Vec<f64>> = (0..n)
        .map(|v| {
            clean
                .row(v)
                .iter()
                .map(|&x| x + noise * rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();
    (clean, embedding_from(&words, &noisy_rows))
}

#[test]
fn labels_guide_finetune_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let (clean, noisy) = noisy_pair(1, 30, 8, 0.2);

    // Generate labels, write them, and read them back before training —
    // the same path the CLI takes.
    let labels = finalize(accumulate(&[clean, noisy.clone()], 5).unwrap(), 0, 200);
    let label_path = dir.path().join("labels.tsv");
    labels.save(&label_path).unwrap();
    let loaded = RankingLabelSet::load(&label_path).unwrap();

    let mut cfg = TrainConfig::new(0.05);
    cfg.threshold = ThresholdSpec::Explicit(0.6);
    let (tuned, state) = finetune(noisy, &loaded, &cfg).unwrap();
    assert!(tuned.is_normalized());
    assert!(state.epochs_run >= 1);
    assert!(
        state.j_rank.last().unwrap() <= state.j_rank.first().unwrap(),
        "training must not end worse than it started: {:?}",
        state.j_rank
    );

    // The tuned matrix survives both text formats at write precision.
    for format in [TextFormat::GloveText, TextFormat::Word2vecText] {
        let path = dir.path().join(format!("tuned-{format}.vec"));
        save_embedding(&tuned, &path, format).unwrap();
        assert_eq!(detect_format(&path).unwrap(), format);
        let reloaded = load_embedding(&path, None).unwrap();
        assert_eq!(reloaded.len(), tuned.len());
        assert_eq!(reloaded.dim(), tuned.dim());
        for v in 0..tuned.len() {
            assert_eq!(reloaded.vocab().word(v), tuned.vocab().word(v));
            for (a, b) in reloaded.row(v).iter().zip(tuned.row(v).iter()) {
                assert!((a - b).abs() <= 1e-6, "row {v}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn vocabulary_mismatch_survives_the_file_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (clean, noisy) = noisy_pair(2, 20, 6, 0.2);
    let labels = finalize(accumulate(&[clean, noisy], 4).unwrap(), 0, 200);
    let label_path = dir.path().join("labels.tsv");
    labels.save(&label_path).unwrap();
    let loaded = RankingLabelSet::load(&label_path).unwrap();

    // A smaller embedding misses some labeled words and neighbors; the
    // trainer drops them, recompacts ranks, and reports the counts.
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let words: Vec<String> = (0..12).map(|i| format!("w{i:02}")).collect();
    let rows: Vec<Vec<f64>> = (0..12)
        .map(|_| {
            (0..6)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();
    let small = embedding_from(&words, &rows);

    let mut cfg = TrainConfig::new(0.05);
    cfg.threshold = ThresholdSpec::Explicit(0.6);
    cfg.max_epochs = 3;
    let (tuned, state) = finetune(small, &loaded, &cfg).unwrap();
    assert!(tuned.is_normalized());
    assert!(
        state.words_skipped > 0,
        "labels for words outside the vocabulary must be counted"
    );
    assert!(
        state.entries_skipped > 0,
        "out-of-vocabulary neighbors must be counted"
    );
}

/// Geometry built so every evaluation task has an exactly known outcome.
fn eval_fixture() -> Embedding {
    let words: Vec<String> = ["man", "woman", "king", "queen", "royal", "dog", "cat"]
        .iter()
        .map(|w| w.to_string())
        .collect();
    let rows = vec![
        vec![1.0, 0.0, 0.0, 0.0],  // man
        vec![0.0, 1.0, 0.0, 0.0],  // woman
        vec![0.8, 0.0, 0.6, 0.0],  // king
        vec![-0.2, 1.0, 0.6, 0.0], // queen = woman − man + king exactly
        vec![0.3, 0.5, 0.6, 0.0],  // royal: closest to king and queen
        vec![0.0, 0.0, 0.0, 1.0],  // dog
        vec![0.05, 0.0, 0.0, 1.0], // cat: near dog, far from the rest
    ];
    embedding_from(&words, &rows)
}

#[test]
fn evaluation_tasks_read_their_formats() {
    let dir = tempfile::tempdir().unwrap();
    let e = eval_fixture();

    // Similarity: gold scores ordered exactly like the cosines → rho = 1;
    // the pair with an unknown token is skipped, not fatal.
    let sim_path = dir.path().join("sim.tsv");
    let mut gold: Vec<(&str, &str, f64)> = vec![
        ("dog", "cat", 0.0),
        ("king", "queen", 0.0),
        ("man", "dog", 0.0),
        ("man", "king", 0.0),
    ];
    for (a, b, score) in &mut gold {
        *score = ranktune::cosine(&e, a, b).unwrap() * 10.0;
    }
    let mut body: String = gold
        .iter()
        .map(|(a, b, s)| format!("{a}\t{b}\t{s}\n"))
        .collect();
    body.push_str("man\tunicorn\t5.0\n");
    std::fs::write(&sim_path, body).unwrap();
    let sim = SimilarityDataset::load(&sim_path).unwrap();
    let outcome = eval_similarity(&e, &sim).unwrap();
    assert!((outcome.value - 1.0).abs() <= 1e-12);
    assert_eq!((outcome.evaluated, outcome.skipped), (4, 1));

    // Analogy: man:woman :: king:queen holds exactly by construction; the
    // item with an unknown word is skipped; section headers are ignored.
    let ana_path = dir.path().join("analogy.txt");
    std::fs::write(
        &ana_path,
        ": gram9-royalty\nman woman king queen\nman woman duke duchess\n",
    )
    .unwrap();
    let ana = AnalogyDataset::load(&ana_path).unwrap();
    let outcome = eval_analogy(&e, &ana).unwrap();
    assert_eq!(outcome.value, 1.0);
    assert_eq!((outcome.evaluated, outcome.skipped), (1, 1));

    // Completion: "royal" has the highest mean cosine to {king, queen};
    // the second item's unknown candidate skips it.
    let comp_path = dir.path().join("completion.jsonl");
    let line1 = serde_json::json!({
        "context": ["king", "queen"],
        "candidates": ["dog", "cat", "royal", "man", "woman"],
        "answer": 2,
    });
    let line2 = serde_json::json!({
        "context": ["dog"],
        "candidates": ["unicorn", "cat", "royal", "man", "woman"],
        "answer": 1,
    });
    std::fs::write(&comp_path, format!("{line1}\n{line2}\n")).unwrap();
    let comp = CompletionDataset::load(&comp_path).unwrap();
    let outcome = eval_completion(&e, &comp).unwrap();
    assert_eq!(outcome.value, 1.0);
    assert_eq!((outcome.evaluated, outcome.skipped), (1, 1));

    // The report renders every task and serializes cleanly.
    let mut report = EvalReport::default();
    report.push(
        "similarity",
        "spearman",
        &eval_similarity(&e, &sim).unwrap(),
    );
    report.push("analogy", "accuracy", &eval_analogy(&e, &ana).unwrap());
    report.push(
        "completion",
        "accuracy",
        &eval_completion(&e, &comp).unwrap(),
    );
    let table = report.text_table();
    assert!(table.contains("similarity") && table.contains("1.0000"));
    let json = serde_json::to_value(&report).unwrap();
    assert_eq!(json["tasks"].as_array().unwrap().len(), 3);
}

#[test]
fn word2vec_header_is_inferred_and_preserved() {
    let dir = tempfile::tempdir().unwrap();
    let (clean, _) = noisy_pair(3, 5, 4, 0.1);
    let path = dir.path().join("w2v.vec");
    save_embedding(&clean, &path, TextFormat::Word2vecText).unwrap();

    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("5 4\n"), "header line missing: {text}");
    assert_eq!(detect_format(&path).unwrap(), TextFormat::Word2vecText);

    let reloaded = load_embedding(&path, None).unwrap();
    assert_eq!(reloaded.len(), 5);
    assert_eq!(reloaded.dim(), 4);
}
