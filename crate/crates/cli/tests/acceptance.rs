//! Acceptance criteria, run sequentially so the timings mean something.
//! Prints one PASS/FAIL line per criterion and exits nonzero on any failure.

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use rand::Rng;

use simdr_core::decode::decode_heatmap;
use simdr_core::loss::{entropy, loss};
use simdr_core::metrics::DEFAULT_KEYPOINT_CONSTANT;
use simdr_core::rng::sub_rng;
use simdr_core::toy::{gen_dataset, CompareRow, Head, TargetParams, ToyModel};
use simdr_core::{
    audit_roundtrip, average_precision, cross_entropy, encode_heatmap, grad_check, kl_divergence, oks, pckh, softmax,
    HeatmapConfig, ImageDims, Keypoint, LossKind, MatchResult, PeakMode, Pose, SamplingRange, Scheme,
};

const SEED: u64 = 20_240_601;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn dims(h: u32, w: u32) -> ImageDims {
    ImageDims::new(w, h).unwrap()
}

fn simdr(args: &[&str], out_dir: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_simdr"));
    cmd.args(args);
    match out_dir {
        Some(d) => cmd.env("SIMDR_OUTPUT_DIR", d),
        None => cmd.env_remove("SIMDR_OUTPUT_DIR"),
    };
    cmd.output().expect("spawning simdr")
}

fn stdout_ok(args: &[&str]) -> String {
    let out = simdr(args, None);
    assert!(
        out.status.success(),
        "simdr {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// 1: audited max error never exceeds the bound, sits within 2% of it, and
/// the mean sits within 2% of half the bound.
fn quantization_bounds() -> Verdict {
    let grid = [dims(64, 64), dims(128, 128), dims(256, 192)];
    let mut schemes: Vec<Scheme> = (1..=4).map(|k| Scheme::SimDR { k }).collect();
    schemes.extend([1, 2, 4].map(|lambda| Scheme::Heatmap { lambda }));
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut worst_max = 0.0f64;
    let mut worst_mean = 0.0f64;
    for d in grid {
        for &s in &schemes {
            let st = audit_roundtrip(s, d, 100_000, SEED, SamplingRange::Interior).unwrap();
            let b = s.bound();
            let max_gap = (b - st.max_err) / b;
            let mean_gap = (st.mean_err - b / 2.0).abs() / (b / 2.0);
            worst_max = worst_max.max(max_gap);
            worst_mean = worst_mean.max(mean_gap);
            if st.max_err > b || max_gap > 0.02 || mean_gap > 0.02 {
                failures.push(format!(
                    "{} {} {d}: max {} mean {} bound {b}",
                    s.name(),
                    s.param(),
                    st.max_err,
                    st.mean_err
                ));
            }
        }
    }
    let elapsed = start.elapsed();
    let n = grid.len() * schemes.len();
    let timely = elapsed < Duration::from_secs(30);
    verdict(
        failures.is_empty() && timely,
        format!(
            "{n} audits x 1e5 in {:.2}s (limit 30s, 1 thread); worst max gap {:.4}%, worst mean gap {:.4}%{}",
            elapsed.as_secs_f64(),
            worst_max * 100.0,
            worst_mean * 100.0,
            if failures.is_empty() {
                String::new()
            } else {
                format!("; violations: {}", failures.join("; "))
            }
        ),
    )
}

/// 2: the 1D head beats the heatmap head on the 16x16 toy experiment.
fn low_resolution_gap() -> Verdict {
    let start = Instant::now();
    let csv = stdout_ok(&["compare", "--dims", "16x16", "--k", "2", "--lambda", "4", "--seed", "1"]);
    let elapsed = start.elapsed();
    let rows: Vec<CompareRow> = csv::Reader::from_reader(csv.as_bytes())
        .deserialize()
        .collect::<Result<_, _>>()
        .unwrap();
    let err = |decode: &str| rows.iter().find(|r| r.decode == decode).unwrap().mean_px_error;
    let (s, plain, shift) = (err("argmax"), err("plain"), err("shift"));
    verdict(
        s <= 0.5 * plain && s <= 0.8 * shift && elapsed < Duration::from_secs(120),
        format!(
            "simdr {s:.4}px vs heatmap plain {plain:.4}px (ratio {:.3} <= 0.5), shift {shift:.4}px (ratio {:.3} <= 0.8), {:.1}s (limit 120s)",
            s / plain,
            s / shift,
            elapsed.as_secs_f64()
        ),
    )
}

fn random_distribution(rng: &mut impl Rng, n: usize, zeros: bool) -> Vec<f64> {
    let mut t: Vec<f64> = (0..n)
        .map(|_| {
            if zeros && rng.gen_bool(0.3) {
                0.0
            } else {
                rng.gen_range(0.01..1.0)
            }
        })
        .collect();
    let s: f64 = t.iter().sum();
    if s == 0.0 {
        t[0] = 1.0;
        return t;
    }
    t.iter_mut().for_each(|v| *v /= s);
    t
}

/// Central differences over every weight and bias of a 4x4 toy model.
fn model_grad_error(
    model: &ToyModel,
    batch: &[(&simdr_core::Grid, &simdr_core::toy::SampleTargets)],
    kind: LossKind,
) -> f64 {
    const H: f64 = 1e-5;
    let (_, grad) = model.batch_gradient(batch, kind).unwrap();
    let mut worst = 0.0f64;
    let mut probe = model.clone();
    for i in 0..model.weights().len() {
        let w0 = model.weights()[i];
        probe.weights_mut()[i] = w0 + H;
        let up = probe.batch_loss(batch, kind).unwrap();
        probe.weights_mut()[i] = w0 - H;
        let down = probe.batch_loss(batch, kind).unwrap();
        probe.weights_mut()[i] = w0;
        let fd = (up - down) / (2.0 * H);
        worst = worst.max((fd - grad.weights[i]).abs() / grad.weights[i].abs().max(1.0));
    }
    for i in 0..model.biases().len() {
        let b0 = model.biases()[i];
        probe.biases_mut()[i] = b0 + H;
        let up = probe.batch_loss(batch, kind).unwrap();
        probe.biases_mut()[i] = b0 - H;
        let down = probe.batch_loss(batch, kind).unwrap();
        probe.biases_mut()[i] = b0;
        let fd = (up - down) / (2.0 * H);
        worst = worst.max((fd - grad.biases[i]).abs() / grad.biases[i].abs().max(1.0));
    }
    worst
}

/// 3: analytic gradients against central finite differences, h = 1e-5.
fn gradient_suite() -> Verdict {
    let mut rng = sub_rng(SEED, "acceptance/gradients");
    let mut worst = [0.0f64; 3];
    for i in 0..100 {
        let n = rng.gen_range(2..64);
        let logits: Vec<f64> = (0..n).map(|_| rng.gen_range(-4.0..4.0)).collect();
        let target = random_distribution(&mut rng, n, i % 2 == 0);
        worst[0] = worst[0].max(grad_check(LossKind::CrossEntropy, &logits, &target, 1e-5).unwrap());
        worst[1] = worst[1].max(grad_check(LossKind::KlDivergence, &logits, &target, 1e-5).unwrap());
        let t: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        worst[2] = worst[2].max(grad_check(LossKind::Mse, &logits, &t, 1e-5).unwrap());
    }

    let d = dims(4, 4);
    let heads = [
        (Head::SimDR { k: 2 }, LossKind::CrossEntropy),
        (Head::SimDR { k: 1 }, LossKind::KlDivergence),
        (Head::Heatmap { lambda: 2, sigma: 1.0 }, LossKind::Mse),
    ];
    let mut worst_model = 0.0f64;
    for i in 0..100 {
        let (head, kind) = heads[i % heads.len()];
        let n_kp = 1 + i % 2;
        let mut model = ToyModel::zeros(d, n_kp, head).unwrap();
        model
            .weights_mut()
            .iter_mut()
            .for_each(|w| *w = rng.gen_range(-0.5..0.5));
        model
            .biases_mut()
            .iter_mut()
            .for_each(|b| *b = rng.gen_range(-0.5..0.5));
        let data = gen_dataset(3, d, n_kp, 1.0, 0.1, SEED + i as u64).unwrap();
        let targets: Vec<_> = data
            .samples()
            .iter()
            .map(|s| model.targets(s, kind, &TargetParams::default()).unwrap())
            .collect();
        let batch: Vec<_> = data
            .samples()
            .iter()
            .zip(&targets)
            .map(|(s, t)| (&s.image, t))
            .collect();
        worst_model = worst_model.max(model_grad_error(&model, &batch, kind));
    }
    verdict(
        worst.iter().all(|w| *w <= 1e-6) && worst_model <= 1e-5,
        format!(
            "worst relative error: CE {:.2e}, KL {:.2e}, MSE {:.2e} (limit 1e-6); 4x4 model {:.2e} (limit 1e-5); 100 instances each",
            worst[0], worst[1], worst[2], worst_model
        ),
    )
}

/// 4: closed-form identities between the losses.
fn loss_identities() -> Verdict {
    let mut rng = sub_rng(SEED, "acceptance/identities");
    let (mut kl_self, mut ce_uniform, mut kl_ce, mut grad_gap) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for i in 0..100 {
        let n = rng.gen_range(2..64);
        let logits: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let p = softmax(&logits);
        kl_self = kl_self.max(kl_divergence(&logits, &p).unwrap().value.abs());

        let target = random_distribution(&mut rng, n, i % 2 == 0);
        let c = rng.gen_range(-3.0..3.0);
        let flat = cross_entropy(&vec![c; n], &target).unwrap().value;
        ce_uniform = ce_uniform.max((flat - (n as f64).ln()).abs());

        let positive = random_distribution(&mut rng, n, false);
        let ce = cross_entropy(&logits, &positive).unwrap();
        let kl = kl_divergence(&logits, &positive).unwrap();
        kl_ce = kl_ce.max((kl.value - (ce.value - entropy(&positive))).abs());
        for (a, b) in ce.grad.iter().zip(&kl.grad) {
            grad_gap = grad_gap.max((a - b).abs());
        }
        let ce = loss(LossKind::CrossEntropy, &logits, &target).unwrap();
        let kl = loss(LossKind::KlDivergence, &logits, &target).unwrap();
        for (a, b) in ce.grad.iter().zip(&kl.grad) {
            grad_gap = grad_gap.max((a - b).abs());
        }
    }
    verdict(
        kl_self <= 1e-12 && ce_uniform <= 1e-12 && kl_ce <= 1e-9 && grad_gap <= 1e-12,
        format!(
            "|KL(p||p)| {kl_self:.1e} (1e-12), |CE_uniform - ln N| {ce_uniform:.1e} (1e-12), |KL - (CE - H)| {kl_ce:.1e} (1e-9), grad gap {grad_gap:.1e} (1e-12)"
        ),
    )
}

/// 5: metric values at known points.
fn metric_sanity() -> Verdict {
    let mut checks = Vec::new();
    let kps = vec![
        Keypoint::new(10.0, 12.5),
        Keypoint::new(3.0, 40.0),
        Keypoint::invisible(0.0, 0.0),
    ];
    let gt = Pose::uniform(kps.clone(), 64.0, DEFAULT_KEYPOINT_CONSTANT).unwrap();
    let perfect = oks(&gt, &gt).unwrap();
    checks.push(("OKS(perfect) = 1", perfect == 1.0, perfect));

    let ap = average_precision(&MatchResult::new(vec![1.0; 50])).unwrap();
    checks.push(("AP(perfect) = 1", ap.ap == 1.0, ap.ap));
    checks.push(("AR(perfect) = 1", ap.ar == 1.0, ap.ar));

    let p = pckh(&[0.0; 50], &[64.0; 50], 0.1).unwrap();
    checks.push(("PCKh@0.1(perfect) = 1", p == 1.0, p));

    let (s, j) = (37.5, 0.079);
    let d = s * j * (2.0 * 2f64.ln()).sqrt();
    let g = Pose::uniform(vec![Keypoint::new(5.0, 5.0)], s, j).unwrap();
    let pr = Pose::uniform(vec![Keypoint::new(5.0 + d * 0.6, 5.0 + d * 0.8)], s, j).unwrap();
    let half = oks(&pr, &g).unwrap();
    checks.push(("OKS half-life = 0.5", (half - 0.5).abs() <= 1e-9, half));

    let constant = average_precision(&MatchResult::new(vec![0.7; 20])).unwrap().ap;
    checks.push(("AP(OKS 0.7) = 0.5", (constant - 0.5).abs() <= 1e-12, constant));

    let pass = checks.iter().all(|c| c.1);
    let detail = checks
        .iter()
        .map(|(name, ok, v)| format!("{name}: {v}{}", if *ok { "" } else { " (FAILED)" }))
        .collect::<Vec<_>>()
        .join(", ");
    verdict(pass, detail)
}

/// 6: the quarter-cell shift lowers the mean error of ideal heatmaps.
fn shifted_decode() -> Verdict {
    let d = dims(64, 64);
    let cfg = HeatmapConfig::new(4, 2.0, d, PeakMode::Normalized).unwrap();
    let mut rng = sub_rng(SEED, "acceptance/shift");
    let (mut plain, mut shift) = (0.0, 0.0);
    let n = 10_000;
    for _ in 0..n {
        let kp = Keypoint::new(rng.gen_range(0.0..64.0), rng.gen_range(0.0..64.0));
        let t = encode_heatmap(&kp, &cfg).unwrap();
        let a = decode_heatmap(&t, false).unwrap();
        let b = decode_heatmap(&t, true).unwrap();
        plain += (a.x - kp.x).abs() + (a.y - kp.y).abs();
        shift += (b.x - kp.x).abs() + (b.y - kp.y).abs();
    }
    let (plain, shift) = (plain / (2 * n) as f64, shift / (2 * n) as f64);
    verdict(
        shift < plain,
        format!("mean per-axis error over 1e4 keypoints (lambda 4, sigma 2): shift {shift:.4}px < plain {plain:.4}px"),
    )
}

fn parse_elements(csv_text: &str) -> (u64, u64) {
    let mut r = csv::Reader::from_reader(csv_text.as_bytes());
    let headers = r.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let (m, s, h) = (col("metric"), col("simdr"), col("heatmap"));
    let row = r
        .records()
        .map(|r| r.unwrap())
        .find(|r| &r[m] == "elements")
        .expect("elements row");
    (row[s].parse().unwrap(), row[h].parse().unwrap())
}

/// 7: element counts reported by `bounds`.
fn cost_reporting() -> Verdict {
    let headline = parse_elements(&stdout_ok(&[
        "bounds", "--k", "2", "--lambda", "4", "--dims", "256x192",
    ]));
    let mut detail = format!("256x192 k2 lambda4: {} vs {}", headline.0, headline.1);
    let mut pass = headline == (896, 3072);
    let configs = [
        ("64x64", "1", "1"),
        ("128x128", "2", "4"),
        ("128x128", "3", "4"),
        ("256x192", "3", "4"),
        ("256x192", "4", "4"),
    ];
    for (d, k, l) in configs {
        let (s, h) = parse_elements(&stdout_ok(&["bounds", "--k", k, "--lambda", l, "--dims", d]));
        pass &= s < h;
        detail.push_str(&format!("; {d} k{k} lambda{l}: {s} < {h}"));
    }
    verdict(pass, detail)
}

fn same_bytes(a: &Path, b: &Path) -> bool {
    fs::read(a).unwrap() == fs::read(b).unwrap()
}

/// 8: every command, run twice with identical flags, writes identical bytes.
fn determinism() -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let mut results = Vec::new();
    let mut twice = |name: &str, args: &[&str], files: &[&str]| {
        let mut outputs = Vec::new();
        for run in ["a", "b"] {
            let run_dir = dir.join(run);
            fs::create_dir_all(&run_dir).unwrap();
            let out = simdr(args, Some(&run_dir));
            assert!(
                out.status.success(),
                "simdr {args:?}: {}",
                String::from_utf8_lossy(&out.stderr)
            );
            outputs.push(out.stdout);
        }
        let files_match = files
            .iter()
            .all(|f| same_bytes(&dir.join("a").join(f), &dir.join("b").join(f)));
        results.push((name.to_string(), outputs[0] == outputs[1] && files_match));
    };

    twice("bounds", &["bounds", "--out", "bounds.csv"], &["bounds.csv"]);
    twice(
        "audit",
        &[
            "audit",
            "--scheme",
            "heatmap",
            "--lambda",
            "1,2,4",
            "--dims",
            "64x64,256x192",
            "--n",
            "20000",
            "--format",
            "json",
        ],
        &[],
    );
    twice(
        "audit-simdr",
        &[
            "audit",
            "--scheme",
            "simdr",
            "--k",
            "1,2,3,4",
            "--n",
            "20000",
            "--out",
            "audit.csv",
        ],
        &["audit.csv"],
    );

    // Inputs are read as given; outputs land under each run directory.
    let data = dir.join("a").join("data.bin");
    let data = data.to_str().unwrap();
    twice(
        "gen",
        &["gen", "--out", "data.bin", "--n", "400", "--seed", "3"],
        &["data.bin"],
    );
    for head in ["simdr", "heatmap"] {
        let model = format!("{head}.bin");
        let curve = format!("{head}_curve.csv");
        twice(
            &format!("train ({head})"),
            &[
                "train",
                "--data",
                data,
                "--head",
                head,
                "--epochs",
                "3",
                "--out",
                &model,
                "--curve-out",
                &curve,
            ],
            &[model.as_str(), curve.as_str()],
        );
        let model_path = dir.join("a").join(&model);
        twice(
            &format!("eval ({head})"),
            &[
                "eval",
                "--data",
                data,
                "--model",
                model_path.to_str().unwrap(),
                "--out",
                "metrics.json",
                "--format",
                "json",
            ],
            &["metrics.json"],
        );
    }
    let small = ["--n-train", "400", "--n-test", "100", "--epochs", "3"];
    let mut args = vec!["compare", "--out", "compare.csv"];
    args.extend(small);
    twice("compare", &args, &["compare.csv"]);
    let mut args = vec!["sweep-k", "--k", "1,2,3"];
    args.extend(small);
    twice("sweep-k", &args, &[]);

    let pass = results.iter().all(|r| r.1);
    let detail = results
        .iter()
        .map(|(n, ok)| format!("{n} {}", if *ok { "identical" } else { "DIFFERS" }))
        .collect::<Vec<_>>()
        .join(", ");
    verdict(pass, detail)
}

type Criterion = (u32, &'static str, fn() -> Verdict);

fn main() {
    // Criterion 1 is timed on a single core.
    std::env::set_var("RAYON_NUM_THREADS", "1");

    let criteria: [Criterion; 8] = [
        (1, "quantization bounds", quantization_bounds),
        (2, "low-resolution toy comparison", low_resolution_gap),
        (3, "gradient suite", gradient_suite),
        (4, "loss identities", loss_identities),
        (5, "metric sanity", metric_sanity),
        (6, "shifted heatmap decode", shifted_decode),
        (7, "cost reporting", cost_reporting),
        (8, "CLI determinism", determinism),
    ];
    let mut failed = 0;
    for (id, name, check) in criteria {
        let v = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            verdict(false, format!("panicked: {msg}"))
        });
        if !v.pass {
            failed += 1;
        }
        println!(
            "criterion {id} [{}] {name}: {}",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
    }

    // Informational: smaller inputs where the 1D encoding is not cheaper.
    let crossover: Vec<String> = [
        (dims(64, 64), 2u32),
        (dims(64, 64), 3),
        (dims(64, 64), 4),
        (dims(128, 128), 4),
    ]
    .iter()
    .map(|&(d, k)| {
        let c = simdr_core::representation_cost(d, k, 4).unwrap();
        format!("{d} k{k}: {} vs {}", c.simdr_elements, c.heatmap_elements)
    })
    .collect();
    println!(
        "note: 1D encoding not strictly cheaper at lambda 4 for {}",
        crossover.join("; ")
    );

    println!("acceptance: {} passed, {failed} failed", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
