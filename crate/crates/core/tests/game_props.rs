use forrelation_core::crypto::{towf_eval, towf_gen, towf_inv, Decoder};
use forrelation_core::exec::{Sequential, TrialExecutor};
use forrelation_core::games::{
    run_pk_game, run_prf_game, run_towf_invert_game, BiasedMatch, CoinAdversary, GameConfig, RandomInverter,
};
use forrelation_core::oracle::{sample_trapdoor_world, ScaleProfile};
use forrelation_core::rng::rng_from_seed;
use forrelation_core::stats::null_sigma;
use forrelation_core::BitString;
use proptest::prelude::*;
use rand::seq::SliceRandom;

/// Runs trials in a scrambled order and puts results back in index order.
struct Scrambled(u64);

impl TrialExecutor for Scrambled {
    fn map<T: Send, F: Fn(u64) -> T + Sync + Send>(&self, trials: u64, f: F) -> Vec<T> {
        let mut order: Vec<u64> = (0..trials).collect();
        order.shuffle(&mut rng_from_seed(self.0));
        let mut out: Vec<(u64, T)> = order.into_iter().map(|t| (t, f(t))).collect();
        out.sort_by_key(|(t, _)| *t);
        out.into_iter().map(|(_, v)| v).collect()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn estimates_do_not_depend_on_trial_order(seed in any::<u64>(), order in any::<u64>()) {
        let cfg = GameConfig::new(ScaleProfile::desk(2, 4).unwrap(), 40, seed).uncapped();
        let adv = BiasedMatch { on_match: 0.8, otherwise: 0.3 };
        let a = run_prf_game(&cfg, &adv, &Sequential).unwrap();
        let b = run_prf_game(&cfg, &adv, &Scrambled(order)).unwrap();
        prop_assert_eq!(a, b);
        let c = run_pk_game(&cfg, &CoinAdversary, &Sequential).unwrap();
        let d = run_pk_game(&cfg, &CoinAdversary, &Scrambled(order)).unwrap();
        prop_assert_eq!(c, d);
    }

    #[test]
    fn trapdoor_interface_arity(seed in any::<u64>(), n in 1u32..=2) {
        let p = ScaleProfile::desk(n, 5).unwrap();
        let w = sample_trapdoor_world(&p, seed).unwrap();
        let mut q = Decoder::new(&w, rng_from_seed(seed ^ 3));
        let keys = towf_gen(&mut q, seed).unwrap();
        prop_assert_eq!(keys.td.len(), n as usize);
        prop_assert_eq!(keys.pk.len(), 3 * n as usize);
        prop_assert_eq!(keys.pk.to_u64().unwrap(), w.g(keys.td.to_u64().unwrap()));
        let x = BitString::from_u64(seed % (1 << n), n as usize);
        let y = towf_eval(&mut q, &keys.pk, &x).unwrap();
        prop_assert_eq!(y.len(), 6 * n as usize);
        let back = towf_inv(&mut q, &keys.td, &y).unwrap().expect("y has a preimage");
        prop_assert_eq!(back.len(), n as usize);
        prop_assert_eq!(w.f(keys.pk.to_u64().unwrap(), back.to_u64().unwrap()), y.to_u64().unwrap());
        prop_assert!(towf_eval(&mut q, &x, &x).is_err());
    }
}

#[test]
fn random_guess_inversion_matches_preimage_count() {
    let n = 2u32;
    let p = ScaleProfile::desk(n, 3).unwrap();
    let cfg = GameConfig::new(p, 6000, 31);
    let r = run_towf_invert_game(&cfg, &RandomInverter, false, &Sequential).unwrap();
    let measured = r.row("success_gen_pk").unwrap().estimate.value;
    // per world: E_{td,x} |F^{-1}(F(G(td), x))| / 2^n
    let mut expected = 0.0;
    for t in 0..cfg.trials {
        let w = sample_trapdoor_world(&p, cfg.world_seed(t)).unwrap();
        let mut hits = 0u64;
        for td in 0..1u64 << n {
            let pk = w.g(td);
            for x in 0..1u64 << n {
                let y = w.f(pk, x);
                hits += (0..1u64 << n).filter(|&g| w.f(pk, g) == y).count() as u64;
            }
        }
        expected += hits as f64 / (1u64 << (3 * n)) as f64;
    }
    expected /= cfg.trials as f64;
    let z = (measured - expected) / null_sigma(expected, cfg.trials);
    assert!(z.abs() <= 3.0, "measured {measured}, expected {expected}");
}
