use piggyback_core::planner;
use piggyback_core::{CodeParams, Grouping, Masked, PiggybackCode, Strategy as Placement};
use proptest::prelude::*;
use rand::{rngs::StdRng, RngCore, SeedableRng};

fn code_strategy() -> impl Strategy<Value = (usize, usize, Vec<usize>, bool)> {
    (2usize..=7, 1usize..=12, any::<bool>()).prop_flat_map(|(r, k, even)| {
        let max_t = (r - 1).min(k);
        (1..=max_t).prop_flat_map(move |t| {
            proptest::sample::subsequence((1..k).collect::<Vec<_>>(), t - 1).prop_map(move |cuts| {
                let mut bounds = vec![0];
                bounds.extend(cuts);
                bounds.push(k);
                (r, k, bounds.windows(2).map(|w| w[1] - w[0]).collect(), even)
            })
        })
    })
}

fn build(r: usize, k: usize, sizes: Vec<usize>, even: bool, b: usize) -> PiggybackCode {
    let strategy = if even { Placement::Even } else { Placement::Baseline };
    PiggybackCode::new(CodeParams::new(k, r).unwrap(), &Grouping::new(sizes).unwrap(), strategy, b).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn every_node_repairs_to_its_row((r, k, sizes, even) in code_strategy(), seed: u64) {
        let code = build(r, k, sizes, even, 3);
        let mut msg = vec![0u8; code.stripe_data_len()];
        StdRng::seed_from_u64(seed).fill_bytes(&mut msg);
        let stripe = code.encode_stripe(&msg).unwrap();
        for n in 0..k + r {
            let (row, report) = code.repair(n, &Masked::new(&stripe, [n])).unwrap();
            prop_assert_eq!(&row[..], stripe.row(n));
            prop_assert_eq!(report.downloaded_cells as u64, planner::predicted_node_traffic(code.plan(), n));
            prop_assert_eq!(report.downloaded_cells, report.per_node.iter().sum::<usize>());
        }
    }

    #[test]
    fn any_k_nodes_decode((r, k, sizes, even) in code_strategy(), seed: u64, pick: u64) {
        let code = build(r, k, sizes, even, 2);
        let mut rng = StdRng::seed_from_u64(seed);
        let mut msg = vec![0u8; code.stripe_data_len()];
        rng.fill_bytes(&mut msg);
        let stripe = code.encode_stripe(&msg).unwrap();
        // pick k distinct nodes pseudo-randomly
        let mut nodes: Vec<usize> = (0..k + r).collect();
        let mut state = pick;
        for i in (1..nodes.len()).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            nodes.swap(i, (state >> 33) as usize % (i + 1));
        }
        let (alive, dead) = nodes.split_at(k);
        let decoded = code.decode_stripe(&Masked::new(&stripe, dead.to_vec()), alive).unwrap();
        prop_assert_eq!(decoded, msg);
    }

    #[test]
    fn stripe_encoding_is_linear((r, k, sizes, even) in code_strategy(), seed: u64) {
        let code = build(r, k, sizes, even, 2);
        let mut rng = StdRng::seed_from_u64(seed);
        let mut a = vec![0u8; code.stripe_data_len()];
        let mut b = vec![0u8; code.stripe_data_len()];
        rng.fill_bytes(&mut a);
        rng.fill_bytes(&mut b);
        let sum: Vec<u8> = a.iter().zip(&b).map(|(x, y)| x ^ y).collect();
        let ea = code.encode_stripe(&a).unwrap();
        let eb = code.encode_stripe(&b).unwrap();
        let es = code.encode_stripe(&sum).unwrap();
        let xor: Vec<u8> = ea.as_bytes().iter().zip(eb.as_bytes()).map(|(x, y)| x ^ y).collect();
        prop_assert_eq!(es.as_bytes(), &xor[..]);
    }

    #[test]
    fn baseline_total_is_the_objective((r, k, sizes, _even) in code_strategy()) {
        let grouping = Grouping::new(sizes.clone()).unwrap();
        let report = planner::average_bandwidth(k, r, &grouping).unwrap();
        prop_assert_eq!(report.total_systematic, planner::total_traffic(k, r, &sizes));
        let even = build(r, k, sizes, true, 1);
        let even_report = planner::plan_bandwidth(even.plan());
        for (a, b) in even_report.per_node.iter().zip(&report.per_node) {
            prop_assert!(a <= b);
        }
        // piggyback-phase traffic summed over nodes is the sum of squared entry sizes
        let squares: usize = even.plan().entries().values().map(|v| v.len() * v.len()).sum();
        let mds: usize = (0..k).map(|i| (grouping.group_of(i).unwrap() + 1) * k).sum();
        prop_assert_eq!(even_report.total_systematic as usize, mds + squares);
    }
}
