//! Acceptance checks. Prints one PASS/FAIL line per criterion, with the
//! individual measurements indented below it, and exits non-zero if any
//! criterion fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use common::{brute_analogy, brute_cosine, brute_counts, brute_frequencies, brute_spearman, dense_ppmi, rng, rows_of};
use ppmi_lowrank::eval::AnalogySolver;
use ppmi_lowrank::factorize::NmfFactors;
use ppmi_lowrank::{
    approximation_error, build_vocabulary, compute_ppmi, count_cooccurrences, eval_analogy, eval_similarity,
    gaussian_nonneg_prob, load_embeddings, negativity_check, nmf, nmf_embeddings, pivoted_qr, pivoted_qr_full,
    tokenize_file, truncated_svd, AnalogyDataset, AnalogyMetric, DMatrix, EmbeddingMethod, SimilarityDataset,
    SparseMatrix, Task, TokenizedCorpus, TokenizerConfig, Vocabulary,
};
use ppmi_lowrank_cli::pipeline::{ranking, RANKING_FILE};
use ppmi_lowrank_cli::report::AnovaReport;
use ppmi_lowrank_cli::stages::load_ppmi;
use ppmi_lowrank_cli::{run_anova, run_pipeline, ExperimentConfig};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

struct Criterion {
    id: u32,
    title: &'static str,
    started: Instant,
    limit: Option<Duration>,
    lines: Vec<String>,
    ok: bool,
}

impl Criterion {
    fn new(id: u32, title: &'static str, limit: Option<Duration>) -> Self {
        Self {
            id,
            title,
            started: Instant::now(),
            limit,
            lines: Vec::new(),
            ok: true,
        }
    }

    fn check(&mut self, ok: bool, what: String) {
        self.ok &= ok;
        self.lines.push(format!("{} {what}", if ok { "ok  " } else { "FAIL" }));
    }

    fn note(&mut self, what: String) {
        self.lines.push(format!("info {what}"));
    }

    fn within(&mut self, name: &str, got: f64, want: f64, tol: f64) {
        self.check((got - want).abs() <= tol, format!("{name} = {got:.8} (want {want} +/- {tol:e})"));
    }

    fn relative(&mut self, name: &str, got: f64, want: f64, rel: f64) {
        let r = (got - want).abs() / want.abs();
        self.check(r <= rel, format!("{name} = {got:.4} (want {want} within {:.0}%, off {:.2}%)", rel * 100.0, r * 100.0));
    }

    fn finish(mut self, extra: Duration) -> bool {
        let elapsed = self.started.elapsed() + extra;
        if let Some(limit) = self.limit {
            self.check(elapsed <= limit, format!("runtime {:.2} s (limit {} s)", elapsed.as_secs_f64(), limit.as_secs()));
        }
        let status = if self.ok { "PASS" } else { "FAIL" };
        println!("{status} criterion {}: {} [{:.2} s]", self.id, self.title, elapsed.as_secs_f64());
        for l in &self.lines {
            println!("       {l}");
        }
        self.ok
    }
}

fn anova_report(task: Task, out: &Path) -> AnovaReport {
    run_anova(&fixture("table1.csv"), task, out).expect("ANOVA on the bundled table").report
}

fn row_of<'a>(rep: &'a AnovaReport, source: &str) -> &'a ppmi_lowrank::stats::AnovaRow {
    rep.anova
        .overall
        .row(source)
        .or_else(|| rep.anova.effects.row(source))
        .unwrap_or_else(|| panic!("no {source} row"))
}

fn criterion_1(out: &Path) -> bool {
    let mut c = Criterion::new(1, "ANOVA regression (similarity)", Some(Duration::from_secs(1)));
    let rep = anova_report(Task::Similarity, out);
    c.within("Model SS", row_of(&rep, "Model").ss, 0.37055017, 2e-5);
    c.within("Error SS", row_of(&rep, "Error").ss, 0.01426728, 2e-5);
    c.within("R-Square", rep.anova.overall.r_squared.unwrap_or(f64::NAN), 0.962925, 1e-3);
    for (source, want) in [("Model", 29.68), ("Factorization", 66.23), ("Dimension", 0.06), ("Interaction", 3.01)] {
        c.relative(&format!("F({source})"), row_of(&rep, source).f.unwrap_or(f64::NAN), want, 0.01);
    }
    let p = |s: &str| row_of(&rep, s).p.unwrap_or(f64::NAN);
    c.check(p("Model") < 1e-4, format!("p(Model) = {:.3e} (want < 0.0001)", p("Model")));
    c.check(p("Factorization") < 1e-4, format!("p(Factorization) = {:.3e} (want < 0.0001)", p("Factorization")));
    c.within("p(Dimension)", p("Dimension"), 0.8088, 0.01);
    c.within("p(Interaction)", p("Interaction"), 0.0945, 0.005);
    c.finish(Duration::ZERO)
}

fn criterion_2(out: &Path) -> bool {
    let mut c = Criterion::new(2, "ANOVA regression (analogy)", Some(Duration::from_secs(1)));
    let rep = anova_report(Task::Analogy, out);
    c.within("Model SS", row_of(&rep, "Model").ss, 0.30745304, 2e-5);
    for (source, want) in [("Model", 424.61), ("Factorization", 978.52), ("Dimension", 1.34), ("Interaction", 11.78)] {
        c.relative(&format!("F({source})"), row_of(&rep, source).f.unwrap_or(f64::NAN), want, 0.01);
    }
    c.within("p(Interaction)", row_of(&rep, "Interaction").p.unwrap_or(f64::NAN), 0.0026, 0.0005);
    c.finish(Duration::ZERO)
}

fn criterion_3(out: &Path) -> bool {
    let mut c = Criterion::new(3, "Shapiro-Wilk on fixture residuals", Some(Duration::from_secs(1)));
    for (task, want) in [(Task::Similarity, 0.7923), (Task::Analogy, 0.112)] {
        match anova_report(task, out).shapiro_wilk {
            Some(sw) => {
                c.note(format!("{} W = {:.5}", task.as_str(), sw.w));
                c.within(&format!("p({})", task.as_str()), sw.p_value, want, 0.05);
            }
            None => c.check(false, format!("no Shapiro-Wilk result for {}", task.as_str())),
        }
    }
    c.finish(Duration::ZERO)
}

fn criterion_4() -> bool {
    let mut c = Criterion::new(4, "Gaussian non-negativity probabilities", None);
    let p1 = gaussian_nonneg_prob(4.5, 1.0, 500).unwrap_or(f64::NAN);
    let p3 = gaussian_nonneg_prob(4.5, 3.0, 500).unwrap_or(f64::NAN);
    c.check((0.9980..=0.9986).contains(&p1), format!("P(4.5, 1, 500) = {p1:.6} (want [0.9980, 0.9986])"));
    c.check((0.08..=0.12).contains(&p3), format!("P(4.5, 3, 500) = {p3:.6} (want [0.08, 0.12])"));
    c.finish(Duration::ZERO)
}

fn criterion_5() -> bool {
    let mut c = Criterion::new(5, "Eckart-Young property suite", Some(Duration::from_secs(30)));
    let (mut optimal, mut identity, mut total) = (0, 0, 0);
    let mut worst_identity = 0.0f64;
    for seed in 0..50 {
        let a = common::random_sparse_nonneg(&mut rng(1000 + seed), 50, 50, 0.1);
        let norm_sq = a.frobenius_norm_sq();
        for d in [5, 10] {
            total += 1;
            let (svd, qr, nm) = match (truncated_svd(&a, d), pivoted_qr(&a, d), nmf(&a, d, 200, 1e-4)) {
                (Ok(s), Ok(q), Ok(n)) => (s, q, n),
                other => {
                    c.check(false, format!("seed {seed}, d = {d}: factorization failed: {other:?}"));
                    continue;
                }
            };
            let kept: f64 = svd.s.iter().map(|s| s * s).sum();
            let e_svd = approximation_error(&a, &svd.into()).unwrap();
            let e_qr = approximation_error(&a, &qr.into()).unwrap();
            let e_nmf = approximation_error(&a, &nm.into()).unwrap();
            if e_svd <= e_qr + 1e-9 && e_svd <= e_nmf + 1e-9 {
                optimal += 1;
            } else {
                c.note(format!("seed {seed}, d = {d}: svd {e_svd} qr {e_qr} nmf {e_nmf}"));
            }
            let rel = (e_svd * e_svd + kept - norm_sq).abs() / norm_sq;
            worst_identity = worst_identity.max(rel);
            identity += usize::from(rel <= 1e-6);
        }
    }
    c.check(optimal == total, format!("SVD error <= QR and NMF errors in {optimal}/{total} cases"));
    c.check(
        identity == total,
        format!("residual identity within 1e-6 in {identity}/{total} cases (worst {worst_identity:.2e})"),
    );
    c.finish(Duration::ZERO)
}

/// PPMI of the fixture corpus at minimum count 20 and window 2.
fn fixture_ppmi(corpus: &TokenizedCorpus) -> (Vocabulary, SparseMatrix) {
    let v = build_vocabulary(corpus, 20).unwrap();
    let a = compute_ppmi(&count_cooccurrences(corpus, &v, 2).unwrap()).unwrap();
    (v, a)
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    common::max_abs(m)
}

fn criterion_6(fixture_nmf: &NmfFactors, a: &SparseMatrix) -> bool {
    let mut c = Criterion::new(6, "Factorization invariants", None);

    let mut worst = 0.0f64;
    let mut g = rng(6);
    for (m, n) in [(40, 40), (60, 30), (30, 30), (80, 50)] {
        let dense = common::gaussian_matrix(&mut g, m, n);
        let s = SparseMatrix::from_dense(&dense).unwrap();
        let f = pivoted_qr(&s, n).unwrap();
        let ap = DMatrix::from_fn(m, n, |i, k| dense[(i, f.perm[k])]);
        worst = worst.max(max_abs(&(ap - f.reconstruct_permuted())) / dense.norm());
    }
    c.check(worst <= 1e-8, format!("QR full-rank reconstruction max-norm / ||A||_F = {worst:.2e} (want <= 1e-8)"));

    let f = pivoted_qr_full(a).unwrap();
    let diag: Vec<f64> = (0..f.r.nrows().min(f.r.ncols())).map(|i| f.r[(i, i)].abs()).collect();
    let monotone = diag.windows(2).all(|w| w[0] >= w[1]);
    c.check(monotone, format!("pivot diagonal |R_ii| non-increasing on the fixture PPMI ({} pivots)", diag.len()));

    let t = &fixture_nmf.objective_trace;
    let rises = t.windows(2).filter(|w| w[1] > w[0] + 1e-10 * w[0]).count();
    c.check(
        rises == 0,
        format!("NMF objective trace non-increasing over {} iterations (d = 250, {rises} rises)", t.len() - 1),
    );

    let mut worst = 0.0f64;
    for seed in 0..3 {
        let mut g = rng(500 + seed);
        let w0 = common::uniform_matrix(&mut g, 30, 3);
        let h0 = common::uniform_matrix(&mut g, 3, 25);
        let a = SparseMatrix::from_dense(&(&w0 * &h0)).unwrap();
        let f = nmf(&a, 3, 200_000, 0.0).unwrap();
        worst = worst.max(f.final_objective() / a.frobenius_norm_sq());
    }
    c.check(worst <= 1e-6, format!("NMF exact-rank recovery residual / ||A||^2 = {worst:.2e} (want <= 1e-6)"));
    c.finish(Duration::ZERO)
}

fn read_similarity(path: &Path) -> Vec<(String, String, f64)> {
    let text = std::fs::read_to_string(path).unwrap();
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].trim().to_lowercase(), f[1].trim().to_lowercase(), f[2].trim().parse().unwrap())
        })
        .collect()
}

fn read_analogy(path: &Path) -> Vec<[String; 4]> {
    let text = std::fs::read_to_string(path).unwrap();
    text.lines()
        .filter(|l| !l.starts_with(':') && !l.trim().is_empty())
        .map(|l| {
            let w: Vec<String> = l.split_whitespace().map(str::to_lowercase).collect();
            [w[0].clone(), w[1].clone(), w[2].clone(), w[3].clone()]
        })
        .collect()
}

fn criterion_7(corpus: &TokenizedCorpus, work: &Path) -> bool {
    let mut c = Criterion::new(7, "Pipeline oracle equivalence", Some(Duration::from_secs(120)));
    let cfg = ExperimentConfig {
        corpus_path: fixture("corpus.txt"),
        splits: 1,
        window: 2,
        min_count: 20,
        dimensions: vec![50],
        output_dir: work.join("oracle"),
        similarity_path: Some(fixture("similarity.csv")),
        analogy_path: Some(fixture("analogy.txt")),
        cache: false,
        ..ExperimentConfig::default()
    };
    let out = match run_pipeline(&cfg) {
        Ok(o) => o,
        Err(e) => {
            c.check(false, format!("pipeline failed: {e:#}"));
            return c.finish(Duration::ZERO);
        }
    };
    c.check(out.missing() == 0, format!("{} cells, {} missing outputs", out.cells.len(), out.missing()));

    // vocabulary and PPMI against direct enumeration
    let (vocab, ppmi) = load_ppmi(out.cells[0].ppmi_dir.as_ref().unwrap()).unwrap();
    let sentences: Vec<Vec<String>> = corpus.sentences().map(|s| s.to_vec()).collect();
    let mut kept: Vec<(String, u64)> = brute_frequencies(&sentences).into_iter().filter(|&(_, n)| n >= 20).collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let words: Vec<&str> = kept.iter().map(|(w, _)| w.as_str()).collect();
    c.check(vocab.words() == words.as_slice(), format!("vocabulary of {} words matches word counts", words.len()));
    let index: BTreeMap<&str, usize> = words.iter().enumerate().map(|(i, w)| (*w, i)).collect();
    let counts = brute_counts(&sentences, |w| index.get(w).copied(), 2);
    let n = words.len();
    let mut dense = DMatrix::zeros(n, n);
    for ((i, j), k) in counts {
        dense[(i, j)] = k as f64;
    }
    let oracle = dense_ppmi(&dense);
    let mut dev = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            dev = dev.max((ppmi.get(i, j) - oracle[(i, j)]).abs());
        }
    }
    let positive = oracle.iter().filter(|&&v| v > 0.0).count();
    c.check(dev <= 1e-10, format!("PPMI max deviation from dense oracle {dev:.2e} (want <= 1e-10)"));
    c.check(ppmi.nnz() == positive, format!("stored entries {} = positive oracle entries {positive}", ppmi.nnz()));

    // evaluation against brute-force scans of the saved vectors
    let sim_pairs = read_similarity(&fixture("similarity.csv"));
    let questions = read_analogy(&fixture("analogy.txt"));
    let sim_ds = SimilarityDataset::load(fixture("similarity.csv"), true).unwrap();
    let ana_ds = AnalogyDataset::load(fixture("analogy.txt"), true).unwrap();
    for cell in &out.cells {
        let name = cell.method.as_str();
        let Some(path) = &cell.embeddings else {
            c.check(false, format!("{name}: no embeddings"));
            continue;
        };
        let e = load_embeddings(path).unwrap();
        let rows = rows_of(e.vectors());
        let idx = |w: &str| e.vocab().index_of(w);

        let (mut model, mut human) = (Vec::new(), Vec::new());
        for (a, b, s) in &sim_pairs {
            if let (Some(i), Some(j)) = (idx(a), idx(b)) {
                model.push(brute_cosine(&rows[i], &rows[j]));
                human.push(*s);
            }
        }
        let rho = brute_spearman(&model, &human);
        let sim = eval_similarity(&e, &sim_ds).unwrap();
        c.check(
            sim.n_used == model.len()
                && sim.n_skipped_oov == sim_pairs.len() - model.len()
                && (sim.score - rho).abs() <= 1e-12,
            format!("{name}: similarity rho {:.6} vs oracle {rho:.6}, used {}/{}", sim.score, sim.n_used, sim_pairs.len()),
        );

        let solver = AnalogySolver::new(&e, AnalogyMetric::Euclidean);
        let (mut used, mut correct, mut mismatched) = (0, 0, 0);
        for q in &questions {
            let (Some(a), Some(b), Some(cc), Some(d)) = (idx(&q[0]), idx(&q[1]), idx(&q[2]), idx(&q[3])) else {
                continue;
            };
            used += 1;
            let want = brute_analogy(&rows, a, b, cc);
            correct += usize::from(want == d);
            mismatched += usize::from(solver.solve_indices(a, b, cc) != Some(want));
        }
        let rep = eval_analogy(&e, &ana_ds).unwrap();
        c.check(
            mismatched == 0
                && rep.overall.n_used == used
                && rep.overall.n_skipped_oov == questions.len() - used
                && rep.correct == correct,
            format!(
                "{name}: analogy {}/{} correct vs oracle {correct}/{used}, {mismatched} argmin mismatches",
                rep.correct, rep.overall.n_used
            ),
        );

        if let Some(s) = &cell.scores {
            c.check(
                s.similarity.score == sim.score && s.analogy.correct == rep.correct,
                format!("{name}: recorded pipeline scores agree with re-evaluation of the saved vectors"),
            );
        }
    }
    c.finish(Duration::ZERO)
}

fn criterion_8(e_nmf: &NmfFactors, vocab: &Vocabulary, nmf_time: Duration) -> bool {
    let mut c = Criterion::new(8, "NMF negativity on analogy triplets", Some(Duration::from_secs(600)));
    let e = nmf_embeddings(e_nmf, std::sync::Arc::new(vocab.clone())).unwrap();
    let ds = AnalogyDataset::load(fixture("analogy.txt"), true).unwrap();
    let r = negativity_check(&e, &ds);
    c.note(format!("d = {}, vocabulary {}, sparsity {:.3}", e.d(), e.len(), e.sparsity()));
    c.check(
        r.fraction >= 0.99,
        format!("negative fraction {:.4} over {} triplets ({} skipped) (want >= 0.99)", r.fraction, r.n_used, r.n_skipped_oov),
    );
    c.finish(nmf_time)
}

fn criterion_9(work: &Path) -> bool {
    let mut c = Criterion::new(9, "Method ranking smoke run (not gated)", None);
    let cfg = ExperimentConfig {
        corpus_path: fixture("corpus.txt"),
        splits: 2,
        window: 2,
        min_count: 20,
        dimensions: vec![50, 100],
        output_dir: work.join("ranking"),
        similarity_path: Some(fixture("similarity.csv")),
        analogy_path: Some(fixture("analogy.txt")),
        cache: false,
        ..ExperimentConfig::default()
    };
    match run_pipeline(&cfg) {
        Ok(out) => {
            for task in Task::ALL {
                let r = ranking(&out.rows, task);
                let order: Vec<String> = r.methods.iter().map(|m| format!("{}={:.4}", m.method, m.mean)).collect();
                let best = r.methods.first().map(|m| m.method.as_str());
                c.note(format!(
                    "{}: {} (svd best: {})",
                    task.as_str(),
                    order.join(" > "),
                    best == Some(EmbeddingMethod::Svd.as_str())
                ));
            }
            c.check(cfg.output_dir.join(RANKING_FILE).exists(), format!("ranking recorded in {RANKING_FILE}"));
        }
        Err(e) => c.check(false, format!("smoke run failed: {e:#}")),
    }
    c.finish(Duration::ZERO)
}

fn main() {
    let work = tempfile::tempdir().expect("temporary directory");
    let anova_dir = work.path().join("anova");
    let corpus = tokenize_file(fixture("corpus.txt"), &TokenizerConfig::default()).expect("fixture corpus");

    let mut passed = vec![
        criterion_1(&anova_dir),
        criterion_2(&anova_dir),
        criterion_3(&anova_dir),
        criterion_4(),
        criterion_5(),
    ];

    let (vocab, a) = fixture_ppmi(&corpus);
    let started = Instant::now();
    let fixture_nmf = nmf(&a, 250, 200, 1e-4).expect("NMF on the fixture PPMI");
    let nmf_time = started.elapsed();

    passed.push(criterion_6(&fixture_nmf, &a));
    passed.push(criterion_7(&corpus, work.path()));
    passed.push(criterion_8(&fixture_nmf, &vocab, nmf_time));
    passed.push(criterion_9(work.path()));

    let failed = passed.iter().filter(|&&p| !p).count();
    println!("acceptance: {} passed, {failed} failed", passed.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
