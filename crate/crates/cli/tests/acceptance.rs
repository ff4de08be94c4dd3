//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any failure.

use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use divr_core::diversity::{
    calibrate_weights_scored, combined_diversity, compute_sub_scores, DiversityReport, DiversityScorer,
    DiversityWeights,
};
use divr_core::eval::{pearson, scatter_svg};
use divr_core::gateway::{
    DecodeMode, DecodeStrategy, EndpointConfig, Gateway, MockTransport, DEFAULT_DELIMITER, ZERO_THINK_PREFIX,
};
use divr_core::lexicon::FunctionWordLexicon;
use divr_core::pipeline::{filter_sft_dataset, self_consistency_filter, ReasoningTrace, SftExample};
use divr_core::reward::{
    accuracy_reward, group_advantages, shaped_reward, GroundTruth, MergeMode, RewardWeights, DEFAULT_SIGMA_FLOOR,
};
use divr_core::stats::{least_squares, mean, population_std};
use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

type Check = fn();

fn main() {
    std::panic::set_hook(Box::new(|info| {
        let _ = writeln!(std::io::stderr(), "    {info}");
    }));
    let criteria: [(&str, Check); 11] = [
        ("default weights and all-ones combined score", weights),
        ("sub-score bounds and invariances over 500 sequences", metric_properties),
        ("shaped reward coefficients and breakdown invariant", reward_shaping),
        ("group advantage examples and standardization", advantages),
        ("self-consistency vs brute-force majority oracle", self_consistency),
        ("divergent and convergent accuracy merging", accuracy_merging),
        ("budget-forced decoding against scripted mock", budget_forcing),
        ("pipeline build determinism and percentile filter", pipeline_determinism),
        ("weight calibration on 60 noisy synthetic ratings", calibration),
        ("pearson extremes and scatter fit slope", correlation),
        ("HTTP scoring service contract", service_contract),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let ok = catch_unwind(AssertUnwindSafe(check)).is_ok();
        failed += usize::from(!ok);
        let verdict = if ok { "PASS" } else { "FAIL" };
        println!("criterion {:>2}: {verdict}  {name} ({:.2?})", i + 1, start.elapsed());
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn weights() {
    let start = Instant::now();
    let w = DiversityWeights::default();
    assert_eq!([w.lex, w.ent, w.pat, w.bi], [0.15; 4]);
    assert_eq!([w.len, w.adj, w.yule, w.func], [0.10; 4]);
    assert!(close(w.to_array().iter().sum::<f64>(), 1.0, 1e-15));
    let ones = DiversityReport::from_sub_scores([1.0; 8], 1);
    assert_eq!(combined_diversity(&ones, &w).unwrap(), 1.0);
    assert!(start.elapsed() < Duration::from_secs(1));
}

const VOCAB: [&str; 16] = [
    "the", "a", "cat", "dog", "of", "and", "ran", "sat", "is", "it", "we", "you", "blue", "fast", "green", "slow",
];

fn metric_properties() {
    let start = Instant::now();
    let lex = FunctionWordLexicon::builtin();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..500 {
        let sentences: Vec<Vec<&str>> = (0..rng.random_range(1..6))
            .map(|_| (0..rng.random_range(1..9)).map(|_| VOCAB[rng.random_range(0..VOCAB.len())]).collect())
            .collect();
        let join = |ss: &[Vec<&str>]| ss.iter().map(|s| format!("{} .", s.join(" "))).collect::<Vec<_>>().join(" ");
        let text = join(&sentences);
        let r = compute_sub_scores(&text, &lex).unwrap();
        assert!(r.sub_scores().iter().all(|s| (0.0..=1.0).contains(s)), "{r:?}");

        let doubled = compute_sub_scores(&format!("{text} {text}"), &lex).unwrap();
        assert!(close(doubled.d_lex, r.d_lex / 2.0, 1e-9));

        let mut tokens: Vec<&str> = text.split(' ').collect();
        tokens.shuffle(&mut rng);
        let p = compute_sub_scores(&tokens.join(" "), &lex).unwrap();
        assert!(close(p.d_ent, r.d_ent, 1e-9) && close(p.d_lex, r.d_lex, 1e-9) && close(p.d_yule, r.d_yule, 1e-9));

        let mut reversed = sentences.clone();
        reversed.reverse();
        let rev = compute_sub_scores(&join(&reversed), &lex).unwrap();
        assert!(close(rev.d_adj, r.d_adj, 1e-9));
    }
    assert!(start.elapsed() < Duration::from_secs(10));
}

fn reward_shaping() {
    let w = RewardWeights::default();
    assert_eq!(shaped_reward(1.0, 0.0, w).unwrap().r_total, 0.9);
    assert_eq!(shaped_reward(0.0, 1.0, w).unwrap().r_total, 0.1);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..1000 {
        let (acc, div): (f64, f64) = (rng.random(), rng.random());
        let b = shaped_reward(acc, div, w).unwrap();
        assert!(close(b.r_total, b.alpha_acc * b.r_acc + b.alpha_div * b.r_div, 1e-9));
        assert!(close(b.r_total, 0.9 * acc + 0.1 * div, 1e-9));
    }
}

fn advantages() {
    let f = DEFAULT_SIGMA_FLOOR;
    assert_eq!(group_advantages(&[1.0; 4], f).unwrap(), vec![0.0; 4]);
    assert_eq!(group_advantages(&[0.0, 1.0], f).unwrap(), vec![-1.0, 1.0]);
    let a = group_advantages(&[2.0, 4.0, 6.0], f).unwrap();
    for (x, y) in a.iter().zip([-1.2247, 0.0, 1.2247]) {
        assert!(close(*x, y, 1e-4));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut checked = 0;
    while checked < 1000 {
        let group: Vec<f64> = (0..rng.random_range(2..16)).map(|_| rng.random::<f64>()).collect();
        if population_std(&group) <= f {
            continue;
        }
        checked += 1;
        let a = group_advantages(&group, f).unwrap();
        assert!(mean(&a).abs() < 1e-9);
        assert!(close(population_std(&a), 1.0, 1e-9));
        let (shift, scale) = (rng.random_range(-5.0..5.0), rng.random_range(0.1..10.0));
        let moved: Vec<f64> = group.iter().map(|r| r * scale + shift).collect();
        let b = group_advantages(&moved, f).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| close(*x, *y, 1e-6)));
    }
}

fn self_consistency() {
    let start = Instant::now();
    let alphabet = ["A", "B", "C"];
    for len in 1..=7u32 {
        for code in 0..3usize.pow(len) {
            let answers: Vec<&str> = (0..len).map(|i| alphabet[code / 3usize.pow(i) % 3]).collect();
            let paths: Vec<ReasoningTrace> = answers
                .iter()
                .enumerate()
                .map(|(i, a)| ReasoningTrace {
                    role: "r".into(),
                    think_text: "t".into(),
                    answer: a.to_string(),
                    sample_index: i as u64,
                    temperature: 1.0,
                })
                .collect();
            // oracle: highest count, ties to the answer seen first
            let mut best: Option<(&str, usize)> = None;
            for a in &answers {
                let n = answers.iter().filter(|b| *b == a).count();
                if best.is_none_or(|(_, m)| n > m) {
                    best = Some((a, n));
                }
            }
            let want = best.unwrap().0;
            let got = self_consistency_filter(&paths).unwrap();
            assert_eq!(got.answer, want, "{answers:?}");
        }
    }
    assert!(start.elapsed() < Duration::from_secs(5));
}

fn answers(pairs: &[(&str, &str)]) -> IndexMap<String, String> {
    pairs.iter().map(|(r, a)| (r.to_string(), a.to_string())).collect()
}

fn accuracy_merging() {
    let truth = GroundTruth::divergent([("r1", "A"), ("r2", "B")]);
    assert_eq!(accuracy_reward(&answers(&[("r1", "A"), ("r2", "C")]), &truth).unwrap(), 0.5);
    let conv = GroundTruth::convergent("A");
    assert_eq!(accuracy_reward(&answers(&[("r1", "A"), ("r2", "A"), ("r3", "B")]), &conv).unwrap(), 1.0);
    // tie goes to the earliest role's answer
    let tie = answers(&[("r1", "A"), ("r2", "B")]);
    assert_eq!(accuracy_reward(&tie, &GroundTruth::convergent("B")).unwrap(), 0.0);
    assert_eq!(accuracy_reward(&tie, &GroundTruth::convergent("A")).unwrap(), 1.0);
    for n in 1..=6usize {
        let roles: Vec<String> = (0..n).map(|i| format!("r{i}")).collect();
        let truth = GroundTruth::divergent(roles.iter().map(|r| (r.clone(), "Yes")));
        assert_eq!(truth.mode, MergeMode::Divergent);
        for mask in 0..(1u32 << n) {
            let given: IndexMap<String, String> = roles
                .iter()
                .enumerate()
                .map(|(i, r)| (r.clone(), if mask >> i & 1 == 1 { "Yes" } else { "No" }.to_string()))
                .collect();
            let want = mask.count_ones() as f64 / n as f64;
            assert!(close(accuracy_reward(&given, &truth).unwrap(), want, 1e-12));
        }
    }
}

fn scripted(responses: &[&str]) -> (Gateway, Arc<MockTransport>) {
    let mock = Arc::new(MockTransport::scripted(responses.iter().copied()));
    let cfg = EndpointConfig {
        retry_base_delay_ms: 0,
        ..EndpointConfig::default()
    };
    (Gateway::new(cfg, mock.clone()).unwrap(), mock)
}

fn budget_forcing() {
    let segment = "first I consider the options</think>\n**A. yes**";
    let (gw, _) = scripted(&[segment]);
    let forced = gw.budget_forced_complete("Q?", &[], &DecodeStrategy::more_think(3)).unwrap();
    assert_eq!(forced.injected_continuations, 3);
    assert_eq!(forced.text.matches(DEFAULT_DELIMITER).count(), 1);

    let (gw, mock) = scripted(&["**A. yes**"]);
    let zero = gw.complete("Q?", &DecodeStrategy::new(DecodeMode::ZeroThink)).unwrap();
    assert_eq!(mock.requests()[0].prefill(), Some(ZERO_THINK_PREFIX));
    assert!(zero.text.starts_with("<think></think>"));

    let (gw1, _) = scripted(&[segment]);
    let (gw2, _) = scripted(&[segment]);
    let w0 = gw1.budget_forced_complete("Q?", &[], &DecodeStrategy::more_think(0)).unwrap();
    let regular = gw2.complete("Q?", &DecodeStrategy::new(DecodeMode::RegularThink)).unwrap();
    assert_eq!(w0.text.as_bytes(), regular.text.as_bytes());
}

fn pipeline_determinism() {
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/records20.jsonl");
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_divr"))
            .args(["pipeline", "build", "--seed", "11", "--samples-per-role", "3", "--orderings", "2"])
            .arg("--dataset")
            .arg(&fixture)
            .arg("--out")
            .arg(&out)
            .env("DIVR_BASE_URL", "mock://synthetic")
            .env_remove("DIVR_CACHE_DIR")
            .output()
            .unwrap();
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        std::fs::read(out).unwrap()
    };
    let (a, b) = (run("a.jsonl"), run("b.jsonl"));
    assert!(!a.is_empty());
    assert_eq!(a, b);

    let examples: Vec<SftExample> = (1..=10)
        .map(|n| SftExample {
            instruction: "i".into(),
            input: "q".into(),
            output: format!("<think></think> role: r {}", "w ".repeat(n)),
            ordering: vec!["r".into()],
            merge_mode: MergeMode::Convergent,
        })
        .collect();
    assert_eq!(filter_sft_dataset(examples, 10.0, 10.0, DEFAULT_DELIMITER).len(), 8);
}

fn calibration() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let noise = Normal::new(0.0, 0.02).unwrap();
    let w = DiversityWeights::default();
    let samples: Vec<(DiversityReport, f64)> = (0..60)
        .map(|_| {
            let report = DiversityReport::from_sub_scores(std::array::from_fn(|_| rng.random()), 1);
            let c = combined_diversity(&report, &w).unwrap() + noise.sample(&mut rng);
            // affine map onto the [1, 10] rating scale
            (report, (1.0 + 9.0 * c).clamp(1.0, 10.0))
        })
        .collect();
    let fit = calibrate_weights_scored(&samples).unwrap();
    fit.weights.validate().unwrap();
    let combined: Vec<f64> = samples.iter().map(|(r, _)| combined_diversity(r, &fit.weights).unwrap()).collect();
    let ratings: Vec<f64> = samples.iter().map(|(_, y)| *y).collect();
    assert!(pearson(&combined, &ratings).unwrap() >= 0.95);
    assert!(start.elapsed() < Duration::from_secs(60));
}

fn correlation() {
    let xs: Vec<f64> = (0..20).map(|i| i as f64 * 0.37 - 2.0).collect();
    let up: Vec<f64> = xs.iter().map(|x| 3.0 * x + 1.0).collect();
    let down: Vec<f64> = xs.iter().map(|x| -0.5 * x + 4.0).collect();
    assert!(close(pearson(&xs, &up).unwrap(), 1.0, 1e-12));
    assert!(close(pearson(&xs, &down).unwrap(), -1.0, 1e-12));

    let points: Vec<(f64, f64)> = [(0.1, 0.3), (0.2, 0.2), (0.4, 0.8), (0.7, 0.6), (0.9, 1.0)].to_vec();
    let (px, py): (Vec<f64>, Vec<f64>) = points.iter().copied().unzip();
    // closed form: sum((x - mx)(y - my)) / sum((x - mx)^2)
    let (mx, my) = (mean(&px), mean(&py));
    let sxy: f64 = px.iter().zip(&py).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = px.iter().map(|x| (x - mx).powi(2)).sum();
    let svg = scatter_svg(&points);
    let slope: f64 = attribute(&svg, "data-slope").parse().unwrap();
    assert!(close(slope, sxy / sxx, 1e-6));
    assert!(close(least_squares(&px, &py).unwrap().slope, sxy / sxx, 1e-12));
}

fn attribute<'a>(svg: &'a str, name: &str) -> &'a str {
    let key = format!("{name}=\"");
    let start = svg.find(&key).expect("attribute present") + key.len();
    let len = svg[start..].find('"').unwrap();
    &svg[start..start + len]
}

fn service_contract() {
    let rt = tokio_runtime();
    let listener = rt.block_on(tokio::net::TcpListener::bind("127.0.0.1:0")).unwrap();
    let addr = listener.local_addr().unwrap();
    rt.spawn(async move {
        axum::serve(listener, divr::server::router(DiversityScorer::default())).await.unwrap();
    });
    let url = format!("http://{addr}/v1/score");
    let body = serde_json::json!({
        "completions": [
            "<think>a a a a a a a a</think> **A. x**",
            "<think>First the context, then each option in turn. Why? Because order matters!</think> **A. x**"
        ],
        "ground_truth": {"mode": "convergent", "scalar_answer": "A"},
        "answer_format": {"pattern_kind": "bold_letter", "alphabet": ["A", "B", "C"]}
    })
    .to_string();

    let agent: ureq::Agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
    let post = |payload: &str| {
        let mut resp = agent
            .post(&url)
            .header("content-type", "application/json")
            .send(payload)
            .unwrap();
        (resp.status().as_u16(), resp.body_mut().read_to_string().unwrap())
    };

    let (status, text) = post(&body);
    assert_eq!(status, 200, "{text}");
    let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
    let totals: Vec<f64> =
        parsed["breakdowns"].as_array().unwrap().iter().map(|b| b["total"].as_f64().unwrap()).collect();
    assert_ne!(totals[0], totals[1]);
    assert!(parsed["advantages"].as_array().unwrap().iter().all(|a| a.as_f64().unwrap() != 0.0));

    assert_eq!(post("{not json").0, 400);

    let bodies: Vec<String> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..64).map(|_| s.spawn(|| post(&body))).collect();
        handles.into_iter().map(|h| h.join().unwrap()).map(|(st, b)| {
            assert_eq!(st, 200);
            b
        }).collect()
    });
    assert!(bodies.iter().all(|b| *b == bodies[0]));
    assert_eq!(bodies[0], text);
}

fn tokio_runtime() -> tokio::runtime::Runtime {
    tokio::runtime::Builder::new_multi_thread().enable_all().build().unwrap()
}
