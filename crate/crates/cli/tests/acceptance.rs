//! Acceptance gate. Runs each criterion in turn, prints one PASS/FAIL line
//! per criterion and exits non-zero if any failed.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use subscan_core::scan::{candidate_alphas_all, priority_order};
use subscan_core::{
    beat_tie_counts, berk_jones, evaluate_detection, exhaustive_scan, null_auc_sd, priority,
    pvalue_range, representation, scan, synthesize, ActivationMatrix, AlphaPolicy,
    BackgroundActivations, BerkJones, NetworkLayout, PValueRange, RangeSource, RangeVector,
    ScanConfig, ScanStatistic, SortedBackground, SubsetStats, SynthSpec,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, limit: Duration, detail: String) -> Outcome {
    check(
        elapsed < limit,
        format!("{detail}; {elapsed:.2?} (limit {limit:?})"),
    )
}

fn worked_pvalue_ranges() -> Outcome {
    let start = Instant::now();
    let column = [-1.0f32, -1.0, 0.2, 0.75];
    let background =
        BackgroundActivations::new(ActivationMatrix::new(4, 1, column.to_vec()).unwrap()).unwrap();
    let expected = [(0.8f32, 0.0, 0.2), (0.1, 0.4, 0.6), (-1.0, 0.4, 1.0)];
    let mut got = Vec::new();
    for &(a, _, _) in &expected {
        let (beat, tie) = beat_tie_counts(&column, a, 0.0).map_err(|e| e.to_string())?;
        let direct = pvalue_range(beat, tie, 4).map_err(|e| e.to_string())?;
        let via_source = background
            .ranges_for_input(&[a], 0.0)
            .map_err(|e| e.to_string())?;
        got.push((direct, via_source.as_slice()[0]));
    }
    let elapsed = start.elapsed();
    let exact = expected
        .iter()
        .zip(&got)
        .all(|(&(_, lo, hi), (d, s))| d.p_min() == lo && d.p_max() == hi && d == s);
    let shown: Vec<_> = got.iter().map(|(d, _)| (d.p_min(), d.p_max())).collect();
    if !exact {
        return Err(format!("ranges {shown:?}"));
    }
    within(
        elapsed,
        Duration::from_millis(1),
        format!("ranges {shown:?} bit-exact"),
    )
}

fn worked_priorities() -> Outcome {
    let r = PValueRange::new(0.12, 0.32).unwrap();
    let (a, b) = (priority(&r, 0.2), priority(&r, 0.3));
    check(
        (a - 0.4).abs() <= 1e-15 && (b - 0.9).abs() <= 1e-15,
        format!("priority {a} at 0.2, {b} at 0.3 (tolerance 1e-15)"),
    )
}

fn worked_score() -> Outcome {
    // mpmath, 30 digits: 0.594933272433122248359...
    const REFERENCE: f64 = 0.594_933_272_433_122_2;
    let w = PValueRange::new(0.06, 0.26).unwrap();
    let y = PValueRange::new(0.12, 0.32).unwrap();
    let n_alpha = priority(&w, 0.2) + priority(&y, 0.2);
    let phi = berk_jones(&SubsetStats::new(0.2, 1.1, 2).unwrap());
    check(
        (phi - REFERENCE).abs() <= 1e-12 && (n_alpha - 1.1).abs() <= 1e-15,
        format!("N_alpha {n_alpha}, score {phi:.16} vs {REFERENCE:.16}"),
    )
}

fn random_instance(rng: &mut ChaCha8Rng, j: usize, b: usize) -> RangeVector {
    let levels = rng.random_range(2..10);
    (0..j)
        .map(|_| {
            let column: Vec<f32> = (0..b).map(|_| rng.random_range(0..levels) as f32).collect();
            let a = rng.random_range(0..=levels) as f32;
            let (beat, tie) = beat_tie_counts(&column, a, 0.0).unwrap();
            pvalue_range(beat, tie, b).unwrap()
        })
        .collect()
}

fn ltss_exactness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4242);
    let mut worst = 0.0f64;
    let mut cases = 0;
    for case in 0..220 {
        let j = rng.random_range(2..=15);
        let b = rng.random_range(3..=20);
        let ranges = random_instance(&mut rng, j, b);
        let layout = NetworkLayout::single("all", j).unwrap();
        for alpha_max in [0.3, 1.0] {
            for policy in [AlphaPolicy::RangeEndpoints, AlphaPolicy::UniformGrid(10)] {
                let cfg = ScanConfig::default()
                    .with_alpha_max(alpha_max)
                    .with_policy(policy);
                let fast = scan(&ranges, &cfg, &layout).map_err(|e| e.to_string())?;
                let slow = exhaustive_scan(&ranges, &cfg).map_err(|e| e.to_string())?;
                let diff = (fast.score - slow.score).abs();
                worst = worst.max(diff);
                if diff > 1e-9 {
                    return Err(format!(
                        "case {case} (J={j}, B={b}, {cfg:?}): scan {} vs oracle {}",
                        fast.score, slow.score
                    ));
                }
                cases += 1;
            }
        }
    }
    within(
        start.elapsed(),
        Duration::from_secs(60),
        format!("{cases} scan/oracle comparisons, max |diff| {worst:e}"),
    )
}

fn prefix_per_alpha() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut checked = 0;
    for case in 0..300 {
        let j = rng.random_range(2..=12);
        let b = rng.random_range(3..=20);
        let ranges = random_instance(&mut rng, j, b);
        let alphas = candidate_alphas_all(&ranges, &ScanConfig::default());
        let alpha = alphas[rng.random_range(0..alphas.len())];
        let prio: Vec<f64> = ranges.iter().map(|r| priority(r, alpha)).collect();
        let score = |mask: u32| {
            let members = (0..j).filter(|&i| mask >> i & 1 == 1);
            let n_alpha: f64 = members.clone().map(|i| prio[i]).sum();
            BerkJones.score(alpha, n_alpha, members.count())
        };
        let (mut best, mut best_mask) = (f64::NEG_INFINITY, 0u32);
        for mask in 1..(1u32 << j) {
            let s = score(mask);
            if s > best {
                best = s;
                best_mask = mask;
            }
        }
        let nodes: Vec<usize> = (0..j).collect();
        let order = priority_order(&ranges, &nodes, alpha);
        let best_prefix = (1..=j)
            .map(|k| score(order[..k].iter().fold(0, |m, &i| m | 1 << i)))
            .fold(f64::NEG_INFINITY, f64::max);
        if best_prefix < best - 1e-9 {
            return Err(format!(
                "case {case} alpha {alpha}: prefix {best_prefix} < best {best}"
            ));
        }
        if best > 0.0 {
            let inside = (0..j).filter(|&i| best_mask >> i & 1 == 1).map(|i| prio[i]);
            let outside = (0..j).filter(|&i| best_mask >> i & 1 == 0).map(|i| prio[i]);
            let min_in = inside.fold(f64::INFINITY, f64::min);
            let max_out = outside.fold(f64::NEG_INFINITY, f64::max);
            if min_in < max_out {
                return Err(format!(
                    "case {case} alpha {alpha}: optimum leaves out priority {max_out} but keeps {min_in}"
                ));
            }
        }
        checked += 1;
    }
    Ok(format!(
        "{checked} instances, enumerated optimum is a priority prefix"
    ))
}

fn expectation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut lines = Vec::new();
    let mut ok = true;
    for alpha in [0.05, 0.2, 0.5] {
        for discrete in [None, Some(4u32)] {
            let n = 100_000;
            let samples: Vec<f64> = (0..n)
                .map(|_| {
                    let b = rng.random_range(3..40);
                    let mut draw = || match discrete {
                        Some(levels) => rng.random_range(0..levels) as f32,
                        None => rng.random::<f32>(),
                    };
                    let column: Vec<f32> = (0..b).map(|_| draw()).collect();
                    let a = draw();
                    let (beat, tie) = beat_tie_counts(&column, a, 0.0).unwrap();
                    priority(&pvalue_range(beat, tie, b).unwrap(), alpha)
                })
                .collect();
            let mean = samples.iter().sum::<f64>() / n as f64;
            let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let se = (var / n as f64).sqrt();
            let z = (mean - alpha) / se;
            ok &= z.abs() <= 3.0;
            let kind = if discrete.is_some() {
                "ties"
            } else {
                "continuous"
            };
            lines.push(format!("alpha {alpha} {kind}: z {z:+.2}"));
        }
    }
    check(ok, lines.join(", "))
}

fn null_calibration() -> Outcome {
    let spec = SynthSpec {
        n_nodes: 1000,
        n_background: 500,
        n_clean_eval: 50,
        n_anomalous_eval: 50,
        affected_fraction: 0.05,
        shift: 0.0,
        seed: 101,
    };
    let data = synthesize(&spec).map_err(|e| e.to_string())?;
    let layout = NetworkLayout::single("all", spec.n_nodes).unwrap();
    let source = SortedBackground::new(&data.background);
    let report = evaluate_detection(
        &source,
        &data.clean,
        &data.anomalous,
        &ScanConfig::default(),
        &layout,
    )
    .map_err(|e| e.to_string())?;
    let sd = null_auc_sd(50, 50);
    check(
        (report.scan_auc - 0.5).abs() <= 3.0 * sd,
        format!(
            "scan AUC {:.4} within 0.5 +/- {:.4}; all-nodes AUC {:.4}",
            report.scan_auc,
            3.0 * sd,
            report.all_nodes_auc
        ),
    )
}

fn sparse_dominance() -> Outcome {
    let start = Instant::now();
    let layout = NetworkLayout::single("all", 1000).unwrap();
    let (mut scan_sum, mut all_sum) = (0.0, 0.0);
    let seeds = 20;
    for seed in 0..seeds {
        let data = synthesize(&SynthSpec {
            n_nodes: 1000,
            n_background: 500,
            n_clean_eval: 50,
            n_anomalous_eval: 50,
            affected_fraction: 0.05,
            shift: 2.0,
            seed,
        })
        .map_err(|e| e.to_string())?;
        let source = SortedBackground::new(&data.background);
        let report = evaluate_detection(
            &source,
            &data.clean,
            &data.anomalous,
            &ScanConfig::default(),
            &layout,
        )
        .map_err(|e| e.to_string())?;
        scan_sum += report.scan_auc;
        all_sum += report.all_nodes_auc;
    }
    let (scan_mean, all_mean) = (scan_sum / seeds as f64, all_sum / seeds as f64);
    let detail =
        format!("{seeds} seeds: mean scan AUC {scan_mean:.4}, mean all-nodes AUC {all_mean:.4}");
    if scan_mean < all_mean {
        return Err(detail);
    }
    within(start.elapsed(), Duration::from_secs(300), detail)
}

fn representation_identity() -> Outcome {
    let layout = NetworkLayout::cifar_cnn();
    let total = layout.total_nodes();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let size = rng.random_range(1..=2000);
        let subset = index::sample(&mut rng, total, size).into_vec();
        let report = representation(&subset, &layout).map_err(|e| e.to_string())?;
        worst = worst.max((report.weighted_mean() - 1.0).abs());
    }
    let pool1 = layout.columns_of("Pool1").unwrap();
    let mut subset: Vec<usize> = pool1.clone().take(30).collect();
    subset.extend(layout.columns_of("Conv1").unwrap().take(70));
    let report = representation(&subset, &layout).map_err(|e| e.to_string())?;
    let rep = report
        .layers
        .iter()
        .find(|l| l.layer == "Pool1")
        .unwrap()
        .rep;
    let expected = 0.3 * total as f64 / pool1.len() as f64;
    check(
        worst <= 1e-12 && (rep - expected).abs() <= 1e-12 && (rep - 4.0333).abs() < 5e-5,
        format!("max |weighted mean - 1| {worst:e} over 500 subsets; Pool1 30/100 rep {rep:.6}"),
    )
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_subscan"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!(
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        ))
    }
}

fn determinism() -> Outcome {
    let dir = tempfile::TempDir::new().map_err(|e| e.to_string())?;
    let d = dir.path();
    let path = |name: &str| d.join(name).to_str().unwrap().to_owned();
    run_cli(&[
        "synth",
        "--nodes",
        "10000",
        "--background",
        "200",
        "--clean",
        "8",
        "--anom",
        "8",
        "--seed",
        "4",
        "--out-dir",
        &path(""),
    ])?;
    let mut sizes = Vec::new();
    for input in ["clean.acts", "anom.acts"] {
        let mut outputs = Vec::new();
        for threads in ["1", "8"] {
            let out = path(&format!("{input}.{threads}.jsonl"));
            run_cli(&[
                "--threads",
                threads,
                "scan",
                "--background",
                &path("bg.acts"),
                "--layout",
                &path("layout.json"),
                "--input",
                &path(input),
                "--out",
                &out,
            ])?;
            outputs.push(std::fs::read(Path::new(&out)).map_err(|e| e.to_string())?);
        }
        if outputs[0] != outputs[1] {
            return Err(format!(
                "{input}: --threads 1 and --threads 8 outputs differ"
            ));
        }
        sizes.push(outputs[0].len());
    }
    Ok(format!(
        "10000 nodes, 16 rows, byte-identical JSONL ({sizes:?} bytes)"
    ))
}

fn scale_smoke() -> Outcome {
    let layout = NetworkLayout::cifar_cnn();
    let data = synthesize(&SynthSpec {
        n_nodes: layout.total_nodes(),
        n_background: 9000,
        n_clean_eval: 1,
        n_anomalous_eval: 1,
        affected_fraction: 0.05,
        shift: 2.0,
        seed: 8,
    })
    .map_err(|e| e.to_string())?;
    let start = Instant::now();
    let ranges = data
        .background
        .ranges_for_input(data.anomalous.row(0), 0.0)
        .map_err(|e| e.to_string())?;
    let result = scan(&ranges, &ScanConfig::default(), &layout).map_err(|e| e.to_string())?;
    within(
        start.elapsed(),
        Duration::from_secs(60),
        format!(
            "|B| 9000, J {}: subset of {} nodes, score {:.2}",
            layout.total_nodes(),
            result.n,
            result.score
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("worked p-value ranges", worked_pvalue_ranges),
        ("worked priorities", worked_priorities),
        ("worked score", worked_score),
        ("LTSS exactness", ltss_exactness),
        ("prefix per alpha", prefix_per_alpha),
        ("expectation property", expectation),
        ("null calibration", null_calibration),
        ("sparse-signal dominance", sparse_dominance),
        ("representation identity", representation_identity),
        ("determinism across threads", determinism),
        ("scale smoke", scale_smoke),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
