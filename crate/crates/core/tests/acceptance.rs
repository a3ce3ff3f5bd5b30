//! One line per acceptance criterion. Exits non-zero if any fails.

use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use focused_feedback::annotation::{demo_spec, EvaluationSession};
use focused_feedback::aspect::Aspect;
use focused_feedback::backend::{search, Blocklist, Embedder, FixtureSearch, HashEmbedder, LlmClient, MockChat, MockScript, SearchHit};
use focused_feedback::config::RunConfig;
use focused_feedback::dataset::{self, Classifiers, MatchParams};
use focused_feedback::investigator::{chunk_document, reassemble, top_k_indices, Corpus, FixtureFetcher, Investigator, RetrievalParams};
use focused_feedback::metrics::{bleu4, kappa, rouge_l, DominanceTable, Smoothing};
use focused_feedback::plan::{parse_plan, parse_plan_lenient, validate_plan, RuleId};
use focused_feedback::reranker::{
    featurize_corpus, fit, loss_and_gradient, ranking_loss, recall_at_1, synthetic_corpus, Featurizer, FeaturizedQuadruple,
    LinearModel, NativeScorer, RandomScorer, TrainParams, N_FEATURES,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Outcome);

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn cents(x: f64) -> i64 {
    (x * 100.0).round() as i64
}

fn table_arithmetic() -> Outcome {
    let expected: [(&str, [i64; 4]); 3] = [
        ("specificity_cells.json", [17050, 9725, 12625, 11550]),
        ("reading_comprehension_cells.json", [14350, 8875, 10400, 11875]),
        ("helpfulness_cells.json", [17175, 9250, 12750, 12125]),
    ];
    let mut mismatches = Vec::new();
    for (file, totals) in expected {
        let v: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(root().join("fixtures/eval").join(file)).unwrap()).unwrap();
        let systems: Vec<String> = serde_json::from_value(v["systems"].clone()).unwrap();
        let cells: Vec<Vec<f64>> = serde_json::from_value(v["cells"].clone()).unwrap();
        let t = DominanceTable::from_cells(systems.clone(), cells).map_err(|e| e.to_string())?;
        for (i, want) in totals.iter().enumerate() {
            let got = cents(t.totals[i]);
            if got != *want {
                mismatches.push(format!("{file} {}: {:.2} != {:.2}", systems[i], got as f64 / 100.0, *want as f64 / 100.0));
            }
        }
    }
    if mismatches.is_empty() {
        Ok("12/12 totals".into())
    } else {
        Err(format!("{}/12 totals match; {}", 12 - mismatches.len(), mismatches.join("; ")))
    }
}

fn session_combinatorics() -> Outcome {
    let annotators: Vec<String> = (0..11).map(|i| format!("a{i}")).collect();
    let refs: Vec<&str> = annotators.iter().map(|s| s.as_str()).collect();
    let s = EvaluationSession::create(demo_spec("acc", 100, &["p", "q", "r", "s"], &refs, 0.1, 1)).map_err(|e| e.to_string())?;
    check(s.tasks.len() == 1980, || format!("{} comparison tasks", s.tasks.len()))?;
    check(s.agreement_task_count() == 180, || format!("{} agreement tasks", s.agreement_task_count()))?;
    Ok("1980 comparisons, 180 agreement".into())
}

fn random_corpus(rng: &mut ChaCha8Rng) -> Vec<FeaturizedQuadruple> {
    let n = rng.random_range(1..6);
    let mut v = || std::array::from_fn::<f64, N_FEATURES, _>(|_| rng.random_range(-1.0..1.0));
    (0..n).map(|_| FeaturizedQuadruple { positive: v(), negatives: vec![v(), v(), v()] }).collect()
}

fn loss_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let closed = 3.0 * 2.0 * std::f64::consts::LN_2;
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let data = random_corpus(&mut rng);
        for q in &data {
            let l = ranking_loss(&LinearModel::zeros(), std::slice::from_ref(q));
            check(l == closed, || format!("uninformative loss {l} != {closed}"))?;
        }
        let w: [f64; N_FEATURES] = std::array::from_fn(|_| rng.random_range(-2.0..2.0));
        let model = LinearModel::with_weights(w, rng.random_range(-1.0..1.0));
        let (_, grad, bias_grad) = loss_and_gradient(&model, &data);
        check(bias_grad == 0.0, || "bias gradient is not zero".into())?;
        let h = 1e-5;
        for k in 0..N_FEATURES {
            let (mut up, mut down) = (w, w);
            up[k] += h;
            down[k] -= h;
            let fd = (ranking_loss(&LinearModel::with_weights(up, model.bias), &data)
                - ranking_loss(&LinearModel::with_weights(down, model.bias), &data))
                / (2.0 * h);
            worst = worst.max((fd - grad[k]).abs());
        }
    }
    check(worst < 1e-6, || format!("max |fd - analytic| = {worst:.2e}"))?;
    Ok(format!("6 ln 2 exact; max gradient error {worst:.1e}"))
}

fn reranker_behaviour() -> Outcome {
    let fz = Featurizer::default();
    let mut all = synthetic_corpus(250, 7);
    let test = all.split_off(200);
    let (model, _) = fit(&fz, &all, &TrainParams::default()).map_err(|e| e.to_string())?;
    let trained = recall_at_1(&NativeScorer { model, featurizer: fz.clone() }, &test).map_err(|e| e.to_string())?;
    check(trained >= 0.95, || format!("trained recall@1 {trained:.3} < 0.95"))?;
    let balanced = synthetic_corpus(1000, 99);
    let random = recall_at_1(&RandomScorer { seed: 3 }, &balanced).map_err(|e| e.to_string())?;
    check((random - 0.25).abs() <= 0.05, || format!("random recall@1 {random:.3} outside 0.25 +/- 0.05"))?;
    let untrained = featurize_corpus(&fz, &balanced).iter().map(|q| q.credit(&LinearModel::zeros())).sum::<f64>() / 1000.0;
    check((untrained - 0.25).abs() <= 0.05, || format!("untrained recall@1 {untrained:.3}"))?;
    Ok(format!("trained {trained:.3}, random {random:.3}, untrained {untrained:.3}"))
}

fn metric_oracles() -> Outcome {
    let rows: Vec<serde_json::Value> =
        serde_json::from_str(&std::fs::read_to_string(root().join("fixtures/metrics/reference_scores.json")).unwrap()).unwrap();
    check(rows.len() == 20, || format!("{} reference pairs", rows.len()))?;
    let mut worst = 0.0f64;
    for r in &rows {
        let split = |s: &serde_json::Value| s.as_str().unwrap().split_whitespace().map(String::from).collect::<Vec<_>>();
        let c = split(&r["candidate"]);
        let refs: Vec<Vec<String>> = r["references"].as_array().unwrap().iter().map(split).collect();
        let pairs = [
            (bleu4(&c, &refs, Smoothing::None).unwrap(), r["bleu4"].as_f64().unwrap()),
            (bleu4(&c, &refs, Smoothing::Epsilon(1e-9)).unwrap(), r["bleu4_smoothed"].as_f64().unwrap()),
            (rouge_l(&c, &refs[0]), r["rouge_l"].as_f64().unwrap()),
        ];
        for (got, want) in pairs {
            worst = worst.max((got - want).abs());
        }
        check(rouge_l(&c, &c) == 1.0 && (bleu4(&c, &[&c], Smoothing::None).unwrap() - 1.0).abs() < 1e-12 || c.len() < 4, || {
            "identity does not score 1".into()
        })?;
    }
    check(worst < 1e-6, || format!("max deviation from reference {worst:.2e}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut kappa_worst = 0.0f64;
    let mut tables = 0;
    while tables < 100 {
        let k = rng.random_range(2..5usize);
        let mut counts = vec![vec![0usize; k]; k];
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for _ in 0..rng.random_range(10..80) {
            let (x, y) = (rng.random_range(0..k), rng.random_range(0..k));
            counts[x][y] += 1;
            a.push(x);
            b.push(y);
        }
        let n = a.len() as f64;
        let po = (0..k).map(|i| counts[i][i] as f64).sum::<f64>() / n;
        let pe = (0..k)
            .map(|i| counts[i].iter().sum::<usize>() as f64 * (0..k).map(|j| counts[j][i]).sum::<usize>() as f64)
            .sum::<f64>()
            / (n * n);
        if pe == 1.0 {
            continue;
        }
        let got = kappa(&a, &b).map_err(|e| e.to_string())?;
        kappa_worst = kappa_worst.max((got - (po - pe) / (1.0 - pe)).abs());
        tables += 1;
    }
    check(kappa_worst < 1e-12, || format!("kappa deviation {kappa_worst:.2e}"))?;
    Ok(format!("text max dev {worst:.1e}; kappa max dev {kappa_worst:.1e}"))
}

fn end_to_end() -> Outcome {
    let dir = root().join("fixtures/run_example");
    let run = || -> Result<_, String> {
        let config = RunConfig::load(&dir.join("config.toml")).map_err(|e| e.to_string())?;
        let pipeline = config.build_pipeline().map_err(|e| e.to_string())?;
        let paragraph = std::fs::read_to_string(dir.join("paragraph.txt")).unwrap();
        let paper = Corpus::load_dir(&dir.join("paper")).map_err(|e| e.to_string())?;
        pipeline.run_review(paragraph.trim(), &paper).map_err(|e| e.to_string())
    };
    let (a, b) = (run()?, run()?);
    check(a.to_json() == b.to_json(), || "run results differ".into())?;
    check(a.review.label == Aspect::Substance, || format!("label {}", a.review.label))?;
    Ok(format!("{} bytes identical, label Substance", a.to_json().len()))
}

fn plan_validation() -> Outcome {
    let text = std::fs::read_to_string(root().join("fixtures/run_example/plan.txt")).unwrap();
    let plan = parse_plan(&text).map_err(|e| e.to_string())?;
    let report = validate_plan(&plan);
    check(report.is_valid() && report.violations.is_empty(), || format!("fixture plan: {:?}", report.rules()))?;

    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    let renumber = |ls: Vec<String>| -> String {
        ls.iter()
            .enumerate()
            .map(|(i, l)| format!("{}. {}", i + 1, l.split_once(". ").map(|x| x.1).unwrap_or(l)))
            .collect::<Vec<_>>()
            .join("\n")
    };
    let owned: Vec<String> = lines.iter().map(|s| s.to_string()).collect();
    let web_at = owned.iter().position(|l| l.contains("Google")).ok_or("fixture plan has no web step")?;
    let mut terminal = owned.clone();
    *terminal.last_mut().unwrap() = "7. Reviewer: Write the review now.".into();
    let mut reordered = owned.clone();
    let web = reordered.remove(web_at);
    reordered.insert(0, web);
    let mut undefined = owned.clone();
    undefined[1] = "2. Investigator: Ponder the dataset deeply.".into();
    let cases = [(renumber(terminal), RuleId::R2b), (renumber(reordered), RuleId::R2a), (renumber(undefined), RuleId::R1)];
    for (plan_text, want) in cases {
        let plan = parse_plan_lenient(&plan_text);
        let mut rules = validate_plan(&plan).rules();
        rules.dedup();
        check(rules == vec![want], || format!("expected [{want}], got {rules:?}"))?;
    }
    Ok("clean fixture plan; R2b, R2a, R1 mutations".into())
}

fn dataset_pipeline() -> Outcome {
    let dir = root().join("fixtures/dataset");
    let run = || -> Result<(Vec<u8>, dataset::StageReport), String> {
        let papers = dataset::load_papers(&dir.join("papers.json")).map_err(|e| e.to_string())?;
        let reviews = dataset::load_reviews(&dir.join("reviews.jsonl")).map_err(|e| e.to_string())?;
        let (points, report) =
            dataset::compile(&papers, &reviews, &Classifiers::rule_based(), &MatchParams::default()).map_err(|e| e.to_string())?;
        let mut buf = Vec::new();
        dataset::write_datapoints(&mut buf, &points).unwrap();
        Ok((buf, report))
    };
    let (a, report) = run()?;
    let (b, _) = run()?;
    let stages = (report.extracted, report.after_purpose, report.after_aspect);
    check(stages == (10, 5, 4), || format!("stages {stages:?}"))?;
    check(a == b, || "rerun differs".into())?;
    Ok("10 -> 5 -> 4, rerun identical".into())
}

fn investigator_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..1000 {
        let len = rng.random_range(1..400usize);
        let chunk = rng.random_range(1..60usize);
        let overlap = rng.random_range(0..chunk);
        let text: String = (0..len).map(|_| char::from(b'a' + rng.random_range(0..26u8))).collect();
        let chunks = chunk_document("d", &text, chunk, overlap).map_err(|e| e.to_string())?;
        let step = chunk - overlap;
        check(chunks.len() == len.div_ceil(step), || format!("len {len} chunk {chunk} overlap {overlap}: {} chunks", chunks.len()))?;
        for (n, c) in chunks.iter().enumerate() {
            check(c.start == n * step && c.text.chars().count() == chunk.min(len - c.start), || format!("chunk {n} of {len}/{chunk}/{overlap}"))?;
        }
        check(reassemble(&chunks) == text, || "reassembly differs".into())?;
    }

    let embedder = HashEmbedder::default();
    for trial in 0..100 {
        let n = rng.random_range(1..=100usize);
        let words = ["loss", "graph", "noise", "layer", "token", "batch", "error", "scale"];
        let mut chunks = chunk_document(
            "d",
            &(0..n * 8).map(|_| words[rng.random_range(0..words.len())]).collect::<Vec<_>>().join(" "),
            40,
            0,
        )
        .unwrap();
        chunks.truncate(n);
        for c in &mut chunks {
            c.embedding = Some(embedder.embed(&c.text).unwrap());
        }
        let q = embedder.embed(words[trial % words.len()]).unwrap();
        let mut brute: Vec<(usize, f64)> =
            chunks.iter().enumerate().map(|(i, c)| (i, focused_feedback::backend::cosine(&q, c.embedding.as_ref().unwrap()))).collect();
        brute.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        brute.truncate(5);
        check(top_k_indices(&q, &chunks, 5) == brute, || format!("top-5 differs on trial {trial}"))?;
    }

    let blocklist = Blocklist::default();
    let hosts = ["openreview.net", "www.openreview.net", "peerj.com", "f1000research.com", "arxiv.org", "example.org", "notopenreview.net"];
    for _ in 0..500 {
        let hits: Vec<SearchHit> = (0..rng.random_range(0..8))
            .map(|i| SearchHit::new(&format!("https://{}/p/{i}", hosts[rng.random_range(0..hosts.len())]), "", ""))
            .collect();
        let out = search(&FixtureSearch::new(hits), "any question?", &blocklist).map_err(|e| e.to_string())?;
        check(out.iter().all(|h| blocklist.allows(&h.url)), || format!("blocked host in {out:?}"))?;
    }
    let fetcher = FixtureFetcher::default()
        .with_page("https://openreview.net/forum?id=9", "Reviewer 2 says the kernel result is wrong.")
        .with_page("https://example.org/kernels", "Kernel theorems hold for wide networks.");
    let search_backend = FixtureSearch::new(vec![
        SearchHit::new("https://openreview.net/forum?id=9", "", ""),
        SearchHit::new("https://example.org/kernels", "", ""),
    ]);
    let llm = LlmClient::new(Arc::new(MockChat::new(MockScript::new("They hold for wide networks."))));
    let inv = Investigator::new(llm, Arc::new(HashEmbedder::default()))
        .with_params(RetrievalParams::default())
        .with_web(Arc::new(search_backend), Arc::new(fetcher));
    let pair = inv.answer_from_web("Do kernel theorems hold?").map_err(|e| e.to_string())?;
    check(pair.evidence.iter().all(|e| !e.doc_id.contains("openreview")), || format!("{:?}", pair.evidence))?;
    check(pair.url.as_deref() == Some("https://example.org/kernels"), || format!("url {:?}", pair.url))?;
    Ok("1000 chunkings, 100 top-5 instances, blocklist holds".into())
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("table-arithmetic", Duration::from_secs(1), table_arithmetic),
        ("session-combinatorics", Duration::from_secs(1), session_combinatorics),
        ("loss-correctness", Duration::from_secs(10), loss_correctness),
        ("reranker-behaviour", Duration::from_secs(60), reranker_behaviour),
        ("metric-oracles", Duration::from_secs(10), metric_oracles),
        ("end-to-end-determinism", Duration::from_secs(5), end_to_end),
        ("plan-validation", Duration::from_secs(1), plan_validation),
        ("dataset-pipeline", Duration::from_secs(5), dataset_pipeline),
        ("investigator-properties", Duration::from_secs(30), investigator_properties),
    ];
    let mut failed = 0;
    for (name, budget, f) in criteria {
        let start = Instant::now();
        let outcome = f();
        let elapsed = start.elapsed();
        let (status, detail) = match outcome {
            Ok(d) if elapsed <= budget => ("PASS", d),
            Ok(d) => ("FAIL", format!("{d}; over time budget")),
            Err(e) => ("FAIL", e),
        };
        if status == "FAIL" {
            failed += 1;
        }
        println!("{status} {name:<24} {:>8.3}s / {:>3}s  {detail}", elapsed.as_secs_f64(), budget.as_secs());
    }
    println!("{} of 9 criteria pass", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
