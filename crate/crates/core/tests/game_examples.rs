use forrelation_core::crypto::towf_eval;
use forrelation_core::exec::Sequential;
use forrelation_core::games::{
    fake_pk_adversary_wrap, run_pk_game, run_prf_game, ConstantAdversary, DecodeAndCompare, GameConfig, Inverter,
    OracleHandle, TrivialInverter,
};
use forrelation_core::oracle::ScaleProfile;
use forrelation_core::stats::null_sigma;
use forrelation_core::{BitString, Result};
use rand::RngCore;

/// Tries every `x` through `Eval`; as good as reading the plaintext, up to
/// decode error.
struct Exhaustive;

impl Inverter for Exhaustive {
    fn name(&self) -> String {
        "exhaustive".to_string()
    }
    fn invert(&self, o: &mut OracleHandle<'_>, pk: &BitString, y: &BitString, _: &mut dyn RngCore) -> Result<BitString> {
        let n = o.profile().n as usize;
        for x in 0..1u64 << n {
            let x = BitString::from_u64(x, n);
            if &towf_eval(o, pk, &x)? == y {
                return Ok(x);
            }
        }
        Ok(BitString::zeros(n))
    }
}

fn within(est: f64, target: f64, trials: u64) -> bool {
    let s = null_sigma(target, trials);
    (est - target).abs() <= 3.0 * s.max(1.0 / trials as f64)
}

#[test]
fn decode_and_compare_separates_at_n3() {
    let cfg = GameConfig::new(ScaleProfile::desk(3, 5).unwrap(), 400, 61).uncapped();
    let r = run_prf_game(&cfg, &DecodeAndCompare, &Sequential).unwrap();
    let adv = r.row("advantage").unwrap().estimate;
    // a random h matches none of the 8 rows with probability (255/256)^8;
    // the extra 0.01 covers decode errors
    let expected = (255f64 / 256.0).powi(8);
    assert!(adv.value >= 0.9 - 3.0 * (0.1 * 0.9 / 400f64).sqrt(), "advantage {}", adv.value);
    assert!((adv.value - expected).abs() <= 3.0 * (expected * (1.0 - expected) / 400.0).sqrt() + 0.01);
}

#[test]
fn constant_adversary_has_no_advantage() {
    let cfg = GameConfig::new(ScaleProfile::desk(2, 4).unwrap(), 200, 62);
    let r = run_prf_game(&cfg, &ConstantAdversary(true), &Sequential).unwrap();
    assert_eq!(r.row("advantage").unwrap().estimate.value, 0.0);
}

#[test]
fn fake_pk_with_trivial_inverter_matches_trivial_rate() {
    let trials = 3000;
    let cfg = GameConfig::new(ScaleProfile::desk(2, 5).unwrap(), trials, 63).uncapped();
    let d = fake_pk_adversary_wrap(TrivialInverter);
    let r = run_pk_game(&cfg, &d, &Sequential).unwrap();
    // F(pk, 0) = F(pk, x) iff x = 0, up to collisions of order 2^{-10}
    for row in ["pr_gen_pk", "pr_uniform_pk"] {
        let v = r.row(row).unwrap().estimate.value;
        assert!(within(v, 0.25, trials), "{row}: {v}");
    }
    assert_eq!(d.inverter_calls(), 2 * trials);
}

#[test]
fn fake_pk_with_full_inverter_accepts_in_both_modes() {
    let trials = 1000;
    let cfg = GameConfig::new(ScaleProfile::desk(2, 6).unwrap(), trials, 64).uncapped();
    let r = run_pk_game(&cfg, &fake_pk_adversary_wrap(Exhaustive), &Sequential).unwrap();
    // y = F(pk, x) always has a preimage, whichever way pk was drawn
    for row in ["pr_gen_pk", "pr_uniform_pk"] {
        let v = r.row(row).unwrap().estimate.value;
        assert!(v >= 0.99, "{row}: {v}");
    }
}
