//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits nonzero if any fails.

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use piggyback_core::planner::{self, Rate};
use piggyback_core::store::{self, Manifest};
use piggyback_core::{CodeParams, Grouping, Masked, PiggybackCode, Strategy, Stripe};
use rand::{rngs::StdRng, RngCore, SeedableRng};

fn random_message(code: &PiggybackCode, rng: &mut StdRng) -> Vec<u8> {
    let mut v = vec![0u8; code.stripe_data_len()];
    rng.fill_bytes(&mut v);
    v
}

/// Repairs every node of one random stripe, asserting bit-exact rows, and
/// returns measured traffic per node.
fn measure_all(code: &PiggybackCode, stripe: &Stripe) -> Vec<usize> {
    (0..stripe.nodes())
        .map(|n| {
            let (row, report) = code.repair(n, &Masked::new(stripe, [n])).expect("repair");
            assert_eq!(row, stripe.row(n), "node {} not restored", n + 1);
            assert_eq!(report.per_node[n], 0);
            report.downloaded_cells
        })
        .collect()
}

fn grid() -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    for k in 4..=12 {
        for r in 2..=6 {
            for t in 1..=(r - 1).min(k) {
                out.push((k, r, t));
            }
        }
    }
    out
}

fn groupings(k: usize, t: usize) -> Vec<Grouping> {
    let equal = Grouping::equal(k, t).unwrap();
    let mut reversed = equal.sizes().to_vec();
    reversed.reverse();
    let mut out = vec![equal.clone()];
    if reversed != equal.sizes() {
        out.push(Grouping::new(reversed).unwrap());
    }
    out
}

fn criterion_1() {
    let params = CodeParams::new(6, 5).unwrap();
    let grouping = Grouping::new(vec![2, 2, 2]).unwrap();
    let code = PiggybackCode::new(params, &grouping, Strategy::Baseline, 64).unwrap();
    let mut rng = StdRng::seed_from_u64(1);
    let stripe = code.encode_stripe(&random_message(&code, &mut rng)).unwrap();
    let measured = measure_all(&code, &stripe);
    assert_eq!(&measured[..6], &[14, 14, 18, 18, 22, 22]);
    let avg = Rate::new(measured[..6].iter().sum::<usize>() as u64, 6);
    assert_eq!(avg, Rate::from(18));
    assert_eq!(avg / 30, Rate::new(3, 5));
    let report = planner::average_bandwidth(6, 5, &grouping).unwrap();
    assert_eq!(report.gamma_systematic, Rate::new(3, 5));
}

fn criterion_2() {
    let params = CodeParams::new(6, 5).unwrap();
    let grouping = Grouping::equal(6, 3).unwrap();
    for strategy in [Strategy::Baseline, Strategy::Even] {
        let code = PiggybackCode::new(params, &grouping, strategy, 16).unwrap();
        let mut rng = StdRng::seed_from_u64(2);
        let msg = random_message(&code, &mut rng);
        let stripe = code.encode_stripe(&msg).unwrap();
        let mut subsets = 0;
        for mask in 0u32..1 << 11 {
            if mask.count_ones() != 6 {
                continue;
            }
            let alive: Vec<usize> = (0..11).filter(|i| mask & (1 << i) != 0).collect();
            let dead: Vec<usize> = (0..11).filter(|i| mask & (1 << i) == 0).collect();
            let decoded = code.decode_stripe(&Masked::new(&stripe, dead), &alive).unwrap();
            assert_eq!(decoded, msg, "subset {alive:?}");
            subsets += 1;
        }
        assert_eq!(subsets, 462);
    }
}

fn criterion_3() {
    let mut rng = StdRng::seed_from_u64(3);
    for (k, r, t) in grid() {
        let params = CodeParams::new(k, r).unwrap();
        for grouping in groupings(k, t) {
            for strategy in [Strategy::Baseline, Strategy::Even] {
                let code = PiggybackCode::new(params, &grouping, strategy, 8).unwrap();
                let stripe = code.encode_stripe(&random_message(&code, &mut rng)).unwrap();
                let measured = measure_all(&code, &stripe);
                assert!(measured[k..].iter().all(|&c| c == k * r));
                if strategy == Strategy::Baseline {
                    for (i, &cells) in measured[..k].iter().enumerate() {
                        let g = grouping.group_of(i).unwrap();
                        let l = g + 1;
                        assert_eq!(cells, k * l + (r - l) * grouping.size(g), "k={k} r={r} {grouping} node {i}");
                    }
                }
            }
        }
    }
}

fn criterion_4() {
    let mut rng = StdRng::seed_from_u64(4);
    let mut measured_gamma = |k: usize, r: usize, t: usize| -> Rate {
        let params = CodeParams::new(k, r).unwrap();
        let code = PiggybackCode::new(params, &Grouping::equal(k, t).unwrap(), Strategy::Baseline, 1).unwrap();
        let stripe = code.encode_stripe(&random_message(&code, &mut rng)).unwrap();
        let total: usize = (0..k)
            .map(|n| {
                let (row, rep) = code.repair(n, &Masked::new(&stripe, [n])).unwrap();
                assert_eq!(row, stripe.row(n));
                rep.downloaded_cells
            })
            .sum();
        Rate::new(total as u64, (k * k * r) as u64)
    };
    for (k, r, t) in grid().into_iter().filter(|&(k, _, t)| k % t == 0) {
        assert_eq!(planner::equal_group_rate(k, r, t).unwrap(), measured_gamma(k, r, t), "k={k} r={r} t={t}");
    }
    let gamma = measured_gamma(130, 13, 5);
    assert_eq!(gamma, Rate::new(5, 13));
    // sqrt(2r - 1) / r with 2r - 1 = 25
    assert_eq!(planner::equal_group_rate(130, 13, 5).unwrap(), gamma);
}

/// Compositions of `k` as subsets of the `k - 1` cut points.
fn min_by_cut_masks(k: usize, r: usize) -> u64 {
    let mut best = u64::MAX;
    for mask in 0u32..1 << (k - 1) {
        let t = mask.count_ones() as usize + 1;
        if t > r - 1 {
            continue;
        }
        let mut sizes = Vec::with_capacity(t);
        let mut run = 1;
        for cut in 0..k - 1 {
            if mask & (1 << cut) != 0 {
                sizes.push(run);
                run = 1;
            } else {
                run += 1;
            }
        }
        sizes.push(run);
        let total: u64 = sizes
            .iter()
            .enumerate()
            .map(|(g, &s)| (s * (k * (g + 1) + (r - g - 1) * s)) as u64)
            .sum();
        best = best.min(total);
    }
    best
}

fn criterion_5() {
    for k in 1..=14 {
        for r in 2..=7 {
            let (grouping, total) = planner::brute_force_optimum(k, r).unwrap();
            assert_eq!(planner::total_traffic(k, r, grouping.sizes()), total);
            let heuristic = planner::default_grouping(k, r).unwrap();
            assert!(total <= planner::total_traffic(k, r, heuristic.sizes()), "k={k} r={r}");
            assert_eq!(total, min_by_cut_masks(k, r), "k={k} r={r}");
        }
    }
}

fn criterion_6() {
    let mut rng = StdRng::seed_from_u64(6);
    for (k, r, t) in grid() {
        let params = CodeParams::new(k, r).unwrap();
        for grouping in groupings(k, t) {
            let mut per_strategy = Vec::new();
            for strategy in [Strategy::Baseline, Strategy::Even] {
                let code = PiggybackCode::new(params, &grouping, strategy, 4).unwrap();
                let stripe = code.encode_stripe(&random_message(&code, &mut rng)).unwrap();
                per_strategy.push(measure_all(&code, &stripe));
            }
            for (n, (even, base)) in per_strategy[1].iter().zip(&per_strategy[0]).enumerate() {
                assert!(even <= base, "k={k} r={r} {grouping} node {}", n + 1);
            }
        }
    }
    let params = CodeParams::new(6, 5).unwrap();
    let grouping = Grouping::equal(6, 3).unwrap();
    let mut averages = Vec::new();
    for strategy in [Strategy::Baseline, Strategy::Even] {
        let code = PiggybackCode::new(params, &grouping, strategy, 4).unwrap();
        let stripe = code.encode_stripe(&random_message(&code, &mut rng)).unwrap();
        let m = measure_all(&code, &stripe);
        averages.push(Rate::new(m[..6].iter().sum::<usize>() as u64, 6));
    }
    assert_eq!(averages, [Rate::from(18), Rate::from(17)]);
}

fn criterion_7() {
    let cmp = planner::compare_codes(6, 5, 256).unwrap();
    assert_eq!(cmp.row("MSR").unwrap().gamma, Rate::new(1, 3));
    assert_eq!(cmp.row("RSR").unwrap().gamma, Rate::new(4, 7));
    assert_eq!(cmp.row("New").unwrap().gamma, Rate::new(3, 5));
    assert_eq!(cmp.row("MDS").unwrap().gamma, Rate::from(1));

    let csv = planner::sweep_csv(&planner::rate_sweep(2, 50));
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let (ci, cg, cb, cu) = (col("r"), col("gamma_new"), col("sqrt_bound"), col("upper_envelope"));
    let mut rows = 0;
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        let r: usize = f[ci].parse().unwrap();
        let (num, den) = f[cg].split_once('/').unwrap_or((f[cg], "1"));
        let gamma = num.parse::<f64>().unwrap() / den.parse::<f64>().unwrap();
        let bound = ((2 * r - 1) as f64).sqrt() / r as f64;
        assert!((f[cb].parse::<f64>().unwrap() - bound).abs() < 1e-6);
        assert!(bound <= gamma + 1e-12, "r={r}");
        assert!(gamma <= f[cu].parse::<f64>().unwrap() + 1e-6, "r={r}");
        rows += 1;
    }
    assert_eq!(rows, 49);
}

fn criterion_8() {
    let dir = tempfile::tempdir().unwrap();
    let mut data = vec![0u8; 1 << 20];
    StdRng::seed_from_u64(8).fill_bytes(&mut data);
    let params = CodeParams::new(6, 5).unwrap();
    let grouping = Grouping::equal(6, 3).unwrap();
    for strategy in [Strategy::Baseline, Strategy::Even] {
        let root = dir.path().join(strategy.to_string());
        let manifest = store::ingest(&data, params, &grouping, strategy, 4096, &root).unwrap();
        let originals: Vec<Vec<u8>> = (0..11).map(|n| fs::read(store::shard_path(&root, n)).unwrap()).collect();
        let plan = manifest.code().unwrap().plan().clone();
        for node in 0..11 {
            fs::remove_dir_all(store::node_dir(&root, node)).unwrap();
            let outcome = store::repair_node_dir(&root, node).unwrap();
            let predicted = planner::predicted_node_traffic(&plan, node) as usize;
            assert!(outcome.per_stripe.iter().all(|&c| c == predicted));
            assert_eq!(outcome.traffic.downloaded_cells, predicted * manifest.stripes as usize);
            if strategy == Strategy::Baseline && node < 6 {
                let l = node / 2 + 1;
                assert_eq!(predicted, 6 * l + (5 - l) * 2);
            }
            for (n, original) in originals.iter().enumerate() {
                assert_eq!(&fs::read(store::shard_path(&root, n)).unwrap(), original, "shard {}", n + 1);
            }
        }
        assert_eq!(Manifest::read(&root).unwrap(), manifest);
        assert_eq!(store::reassemble(&root).unwrap().data, data);
        // planner rate equals measured aggregate / (stripes * k * r)
        let total: u64 = (0..6).map(|n| planner::predicted_node_traffic(&plan, n)).sum();
        assert_eq!(planner::plan_bandwidth(&plan).total_systematic, total);
    }
}

fn main() {
    let criteria: [(&str, Duration, fn()); 8] = [
        ("1 table reproduction (11,6) baseline", Duration::from_secs(1), criterion_1),
        ("2 MDS preservation, 462 subsets", Duration::from_secs(10), criterion_2),
        ("3 repair correctness grid", Duration::from_secs(60), criterion_3),
        ("4 equal-split rate consistency", Duration::from_secs(5), criterion_4),
        ("5 optimizer oracle", Duration::from_secs(30), criterion_5),
        ("6 even-placement dominance", Duration::from_secs(60), criterion_6),
        ("7 comparison spot values and sweep", Duration::from_secs(5), criterion_7),
        ("8 storage round-trip 1 MiB", Duration::from_secs(30), criterion_8),
    ];
    let mut failed = 0;
    for (name, limit, run) in criteria {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(run));
        let elapsed = start.elapsed();
        let verdict = match outcome {
            Ok(()) if elapsed <= limit => "PASS".to_string(),
            Ok(()) => format!("FAIL (took {elapsed:.2?}, limit {limit:?})"),
            Err(_) => "FAIL".to_string(),
        };
        if verdict != "PASS" {
            failed += 1;
        }
        println!("criterion {name}: {verdict} [{elapsed:.2?}]");
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
