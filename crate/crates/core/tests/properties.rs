mod common;

use common::*;
use lotto_audit::cluster::{feature_vector, kmeans, KMeansConfig};
use lotto_audit::ingest::{aggregate_players, aggregate_players_by, read_profiles, write_profiles, PlayerIdentity};
use lotto_audit::montecarlo::{nearest_rank, simulate_player, summarize, QuantilePair, SeedSpec, SimOptions};
use lotto_audit::prizes::{ModelConstants, Resolver};
use lotto_audit::screen::{entropy, entropy_of_counts, screen_profile};
use lotto_audit::{Cents, Execution};
use proptest::prelude::*;

const GAMES: [&str; 4] = ["Pick 4 Day", "$5 Scratch-Off", "$20 Scratch-Off", "Power Ball"];

fn records() -> impl Strategy<Value = Vec<lotto_audit::ingest::ClaimRecord>> {
    prop::collection::vec((0usize..6, 0usize..4, 601i64..20_000, 0usize..9), 0..60).prop_map(|rows| {
        rows.into_iter()
            .map(|(p, g, amount, s)| claim(&format!("Player {p}"), GAMES[g], amount, &format!("Store {s}")))
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn profiles_ignore_row_order(rows in records(), seed in any::<u64>()) {
        let mut shuffled = rows.clone();
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        rand::seq::SliceRandom::shuffle(shuffled.as_mut_slice(), &mut rng);
        let a = aggregate_players(&rows);
        let b = aggregate_players_by(&shuffled, PlayerIdentity::Name, Execution::Sequential);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn profiles_conserve_rows_and_money(rows in records()) {
        let profiles = aggregate_players(&rows);
        let wins: usize = profiles.values().map(|p| p.win_count()).sum();
        prop_assert_eq!(wins, rows.len());
        let total: Cents = profiles.values().map(|p| p.total_reported_winnings).sum();
        prop_assert_eq!(total, rows.iter().map(|r| r.prize_amount).sum::<Cents>());
        for p in profiles.values() {
            prop_assert_eq!(p.store_counts.values().map(|&c| c as usize).sum::<usize>(), p.win_count());
        }
    }

    #[test]
    fn profiles_round_trip_through_jsonl(rows in records()) {
        let profiles = aggregate_players(&rows);
        let mut buf = Vec::new();
        write_profiles(&mut buf, &profiles).unwrap();
        prop_assert_eq!(read_profiles(buf.as_slice()).unwrap(), profiles);
    }

    #[test]
    fn per_win_gains_add_up(rows in records()) {
        let c = ModelConstants::default();
        for p in aggregate_players(&rows).values() {
            let r = screen_profile(p, &c);
            prop_assert_eq!(r.per_win_gains.len(), p.win_count());
            prop_assert_eq!(r.per_win_gains.iter().copied().sum::<Cents>(), r.mean_net_gain);
        }
    }

    #[test]
    fn entropy_stays_in_bounds(counts in prop::collection::vec(0u32..50, 0..30)) {
        let h = entropy_of_counts(counts.iter().copied());
        let n = counts.iter().filter(|&&c| c > 0).count().max(1);
        prop_assert!(h >= 0.0 && h <= (n as f64).ln());
        let uniform = vec![3u32; n];
        prop_assert!((entropy_of_counts(uniform) - (n as f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn features_are_sorted_shares(rows in records()) {
        for p in aggregate_players(&rows).values() {
            let v = feature_vector(p).v;
            prop_assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(v[..5].windows(2).all(|w| w[0] >= w[1]));
            prop_assert!(v.iter().all(|x| (0.0..=1.0).contains(x)));
            if p.store_count() <= 5 {
                prop_assert_eq!(v[5], 0.0);
            }
            if p.store_count() == 1 {
                prop_assert_eq!(entropy(p), 0.0);
            }
        }
    }

    #[test]
    fn nearest_rank_is_a_valid_index(q in 0.0f64..=1.0, n in 1usize..100_000) {
        let r = nearest_rank(q, n);
        prop_assert!(r >= 1 && r <= n);
        prop_assert!(r as f64 >= q * n as f64 - 1e-6);
    }

    #[test]
    fn summary_interval_brackets_the_median(totals in prop::collection::vec(-100_000i64..100_000, 1..300)) {
        let cents: Vec<Cents> = totals.iter().map(|&t| Cents(t)).collect();
        let s = summarize(&cents, QuantilePair { lower_pct: 10.0, upper_pct: 90.0 }, "p", 1).unwrap();
        let mut sorted = totals.clone();
        sorted.sort();
        let median = sorted[(sorted.len() - 1) / 2];
        prop_assert!(s.lower.0 <= median && median <= s.upper.0);
        prop_assert!(sorted.contains(&s.lower.0) && sorted.contains(&s.upper.0));
        prop_assert_eq!(s.replicates, totals.len());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn kmeans_never_beats_the_exhaustive_optimum(
        pts in prop::collection::vec(prop::array::uniform6(0.0f64..1.0), 4..9),
        k in 1usize..4,
    ) {
        let k = k.min(pts.len());
        let fit = kmeans(&pts, &KMeansConfig::new(k, 10), &SeedSpec::new(1), Execution::Sequential).unwrap();
        let oracle = brute_force_inertia(&pts, k);
        prop_assert!(fit.inertia >= oracle - 1e-9);
        prop_assert!(fit.inertia_trace.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
        let again = kmeans(&pts, &KMeansConfig::new(k, 10), &SeedSpec::new(1), Execution::Parallel).unwrap();
        prop_assert_eq!(fit, again);
    }
}

#[test]
fn simulation_is_independent_of_execution_mode() {
    let registry = shipped_registry();
    let mapping = shipped_mapping();
    let c = ModelConstants { replicates: 3_000, ..ModelConstants::default() };
    let resolver = Resolver::new(&registry, &mapping, c.big_prize_threshold);
    let wins =
        (0..12).map(|i| claim("mixed", GAMES[i % GAMES.len()], 700 + 100 * i as i64, &format!("Store {i}"))).collect();
    let p = lotto_audit::ingest::PlayerProfile::from_wins("mixed", wins);
    let seeds = SeedSpec::new(99);
    let seq = SimOptions { exec: Execution::Sequential, ..SimOptions::default() };
    let a = simulate_player(&p, &resolver, &c, &seeds, &seq).unwrap();
    let b = simulate_player(&p, &resolver, &c, &seeds, &SimOptions::default()).unwrap();
    assert_eq!(a, b);
    let other = simulate_player(&p, &resolver, &c, &SeedSpec::new(100), &seq).unwrap();
    assert_ne!(a, other);
}
