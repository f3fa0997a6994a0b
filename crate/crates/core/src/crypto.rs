//! Constructions evaluated by decoding Forrelation blocks: the PRF, the
//! injective one-way function, the trapdoor triple, public-key encryption,
//! key exchange and semi-honest oblivious transfer.
//!
//! Every construction sees the world only through [`QuantumAccess`]. Each
//! takes its classical coins as a `u64` seed; measurement randomness comes
//! from the access object, so rerunning with the same coins tests
//! pseudodeterminism.

use alloc::vec::Vec;

use rand::{Rng, RngCore};

use crate::bits::BitString;
use crate::oracle::{decode_bit, BlockId, EncodedOracle, ScaleProfile, WorldKind};
use crate::rng::{derive_seed, rng_from_seed};
use crate::{Error, Result};

/// Decoding access to a world.
pub trait QuantumAccess {
    fn profile(&self) -> &ScaleProfile;
    fn kind(&self) -> WorldKind;
    /// Pattern bit of a block via the amplified forrelation test.
    fn decode(&mut self, id: BlockId) -> Result<bool>;
}

/// Decodes straight from a world with its own measurement stream.
pub struct Decoder<'w, R> {
    world: &'w dyn EncodedOracle,
    rng: R,
    decodes: u64,
}

impl<'w, R: RngCore> Decoder<'w, R> {
    pub fn new(world: &'w dyn EncodedOracle, rng: R) -> Self {
        Self { world, rng, decodes: 0 }
    }

    pub fn decodes(&self) -> u64 {
        self.decodes
    }
}

impl<R: RngCore> QuantumAccess for Decoder<'_, R> {
    fn profile(&self) -> &ScaleProfile {
        self.world.profile()
    }

    fn kind(&self) -> WorldKind {
        self.world.kind()
    }

    fn decode(&mut self, id: BlockId) -> Result<bool> {
        self.decodes += 1;
        let reps = self.world.profile().reps;
        decode_bit(self.world, id, reps, &mut self.rng)
    }
}

/// Error budget of decoding `bits` blocks: a union bound over the
/// profile's nominal per-block error.
pub fn decode_budget(profile: &ScaleProfile, bits: usize) -> f64 {
    (bits as f64 * profile.nominal_decode_error()).min(1.0)
}

fn require(q: &dyn QuantumAccess, kind: WorldKind) -> Result<()> {
    if q.kind() != kind {
        return Err(Error::InvalidParameter("construction needs a different world kind"));
    }
    Ok(())
}

fn check_len(s: &BitString, len: usize) -> Result<u64> {
    if s.len() != len {
        return Err(Error::LengthMismatch { expected: len, got: s.len() });
    }
    Ok(s.to_u64().expect("lengths are at most 64"))
}

fn decode_word(q: &mut dyn QuantumAccess, width: u32, id: impl Fn(u32) -> BlockId) -> Result<BitString> {
    let mut out = BitString::new();
    for bit in 0..width {
        out.push(q.decode(id(bit))?);
    }
    Ok(out)
}

/// `G(k, x)`: decodes block `(k, x)`.
pub fn prf_eval(q: &mut dyn QuantumAccess, k: &BitString, x: &BitString) -> Result<bool> {
    require(q, WorldKind::Prf)?;
    let n = q.profile().n as usize;
    let k = check_len(k, n)?;
    let x = check_len(x, n)?;
    q.decode(BlockId::Prf { k, x })
}

/// How `owf_eval` maps output position `i` in `1..=3n` to a PRF input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OwfIndexing {
    /// Input `i`; needs `3n < 2^n`, i.e. `n >= 4`.
    Strict,
    /// Input `i mod 2^n`, so small `n` repeats inputs.
    Wrap,
}

/// `g(k) = f_k(1) ... f_k(3n)`.
pub fn owf_eval(q: &mut dyn QuantumAccess, k: &BitString, indexing: OwfIndexing) -> Result<BitString> {
    require(q, WorldKind::Prf)?;
    let n = q.profile().n;
    if indexing == OwfIndexing::Strict && (3 * n as u64) >= 1u64 << n {
        return Err(Error::ProfileInfeasible { needed: 3 * n as usize + 1, available: 1 << n });
    }
    let kv = check_len(k, n as usize)?;
    let mut out = BitString::new();
    for i in 1..=3 * n as u64 {
        let x = i % (1u64 << n);
        out.push(q.decode(BlockId::Prf { k: kv, x })?);
    }
    Ok(out)
}

/// `(pk, td)` with `pk = G(td)` up to decode error.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrapdoorKeys {
    pub pk: BitString,
    pub td: BitString,
}

/// Uniform `td`, then `pk` decoded from `G(td)`.
pub fn towf_gen(q: &mut dyn QuantumAccess, coins: u64) -> Result<TrapdoorKeys> {
    require(q, WorldKind::Trapdoor)?;
    let n = q.profile().n;
    let td_v = rng_from_seed(coins).random_range(0..1u64 << n);
    let pk = decode_word(q, 3 * n, |bit| BlockId::G { td: td_v, bit })?;
    Ok(TrapdoorKeys { pk, td: BitString::from_u64(td_v, n as usize) })
}

/// `F(pk, x)`, `6n` bits.
pub fn towf_eval(q: &mut dyn QuantumAccess, pk: &BitString, x: &BitString) -> Result<BitString> {
    require(q, WorldKind::Trapdoor)?;
    let n = q.profile().n;
    let pk = check_len(pk, 3 * n as usize)?;
    let x = check_len(x, n as usize)?;
    decode_word(q, 6 * n, |bit| BlockId::F { pk, x, bit })
}

/// `I(td, y)`: `n` bits, or `None` for "no preimage".
pub fn towf_inv(q: &mut dyn QuantumAccess, td: &BitString, y: &BitString) -> Result<Option<BitString>> {
    require(q, WorldKind::Trapdoor)?;
    let n = q.profile().n;
    let td = check_len(td, n as usize)?;
    let y = check_len(y, 6 * n as usize)?;
    let word = decode_word(q, n + 1, |bit| BlockId::I { td, y, bit })?;
    if word.get(n as usize) {
        Ok(None)
    } else {
        Ok(Some(word.slice(0, n as usize)))
    }
}

/// `(Eval(pk, x), r, x.r xor m)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ciphertext {
    pub y: BitString,
    pub r: BitString,
    pub c: bool,
}

impl Ciphertext {
    pub fn to_bits(&self) -> BitString {
        let mut b = BitString::concat(&[&self.y, &self.r]);
        b.push(self.c);
        b
    }

    pub fn from_bits(bits: &BitString, n: usize) -> Result<Self> {
        if bits.len() != 7 * n + 1 {
            return Err(Error::LengthMismatch { expected: 7 * n + 1, got: bits.len() });
        }
        Ok(Self { y: bits.slice(0, 6 * n), r: bits.slice(6 * n, 7 * n), c: bits.get(7 * n) })
    }
}

pub fn pke_gen(q: &mut dyn QuantumAccess, coins: u64) -> Result<TrapdoorKeys> {
    towf_gen(q, coins)
}

pub fn pke_enc(q: &mut dyn QuantumAccess, pk: &BitString, m: bool, coins: u64) -> Result<Ciphertext> {
    let n = q.profile().n as usize;
    let mut rng = rng_from_seed(coins);
    let x = BitString::random(n, &mut rng);
    let r = BitString::random(n, &mut rng);
    pke_enc_with(q, pk, m, &x, &r)
}

/// Encryption with explicit `x` and mask `r`.
pub fn pke_enc_with(
    q: &mut dyn QuantumAccess,
    pk: &BitString,
    m: bool,
    x: &BitString,
    r: &BitString,
) -> Result<Ciphertext> {
    check_len(r, q.profile().n as usize)?;
    let y = towf_eval(q, pk, x)?;
    Ok(Ciphertext { y, r: r.clone(), c: x.dot(r) ^ m })
}

/// `Inv(td, y).r xor c`; "no preimage" is treated as `x = 0`.
pub fn pke_dec(q: &mut dyn QuantumAccess, td: &BitString, ct: &Ciphertext) -> Result<bool> {
    let n = q.profile().n as usize;
    check_len(&ct.r, n)?;
    let x = towf_inv(q, td, &ct.y)?.unwrap_or_else(|| BitString::zeros(n));
    Ok(x.dot(&ct.r) ^ ct.c)
}

/// Decode-error budget of one encrypt-then-decrypt: `3n + 6n + (n+1)`
/// blocks.
pub fn pke_budget(profile: &ScaleProfile) -> f64 {
    decode_budget(profile, 10 * profile.n as usize + 1)
}

/// Alice publishes `pk`; Bob encrypts `n` random bits; both keep them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyExchange {
    pub pk: BitString,
    pub ciphertexts: Vec<Ciphertext>,
    pub alice_key: BitString,
    pub bob_key: BitString,
}

impl KeyExchange {
    pub fn agree(&self) -> bool {
        self.alice_key == self.bob_key
    }

    /// What an eavesdropper sees.
    pub fn transcript(&self) -> Vec<BitString> {
        let mut t = Vec::with_capacity(1 + self.ciphertexts.len());
        t.push(self.pk.clone());
        t.extend(self.ciphertexts.iter().map(Ciphertext::to_bits));
        t
    }
}

pub fn key_exchange(q: &mut dyn QuantumAccess, coins: u64) -> Result<KeyExchange> {
    let n = q.profile().n as usize;
    let keys = pke_gen(q, derive_seed(coins, 0))?;
    let mut bob = rng_from_seed(derive_seed(coins, 1));
    let bob_key = BitString::random(n, &mut bob);
    let mut ciphertexts = Vec::with_capacity(n);
    let mut alice_key = BitString::new();
    for (i, m) in bob_key.iter().enumerate() {
        let ct = pke_enc(q, &keys.pk, m, derive_seed(coins, 2 + i as u64))?;
        alice_key.push(pke_dec(q, &keys.td, &ct)?);
        ciphertexts.push(ct);
    }
    Ok(KeyExchange { pk: keys.pk, ciphertexts, alice_key, bob_key })
}

/// Receiver state kept between its two moves.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OtReceiverState {
    pub choice: bool,
    pub td: BitString,
}

/// Receiver's first message `pk_0 || pk_1`: the key for its choice comes
/// from `Gen`, the other is uniform.
pub fn ot_receiver_message(q: &mut dyn QuantumAccess, choice: bool, coins: u64) -> Result<(BitString, OtReceiverState)> {
    let lambda = 3 * q.profile().n as usize;
    let keys = towf_gen(q, derive_seed(coins, 0))?;
    let fake = BitString::random(lambda, &mut rng_from_seed(derive_seed(coins, 1)));
    let msg = if choice { BitString::concat(&[&fake, &keys.pk]) } else { BitString::concat(&[&keys.pk, &fake]) };
    Ok((msg, OtReceiverState { choice, td: keys.td }))
}

/// Sender's reply `Enc(pk_0, x_0) || Enc(pk_1, x_1)`.
pub fn ot_sender_message(q: &mut dyn QuantumAccess, x0: bool, x1: bool, msg: &BitString, coins: u64) -> Result<BitString> {
    let lambda = 3 * q.profile().n as usize;
    if msg.len() != 2 * lambda {
        return Err(Error::Protocol(alloc::format!("expected {} key bits, got {}", 2 * lambda, msg.len())));
    }
    let c0 = pke_enc(q, &msg.slice(0, lambda), x0, derive_seed(coins, 0))?;
    let c1 = pke_enc(q, &msg.slice(lambda, 2 * lambda), x1, derive_seed(coins, 1))?;
    Ok(BitString::concat(&[&c0.to_bits(), &c1.to_bits()]))
}

/// Receiver decrypts the ciphertext for its choice.
pub fn ot_receiver_output(q: &mut dyn QuantumAccess, state: &OtReceiverState, msg: &BitString) -> Result<bool> {
    let n = q.profile().n as usize;
    let ct_len = 7 * n + 1;
    if msg.len() != 2 * ct_len {
        return Err(Error::Protocol(alloc::format!("expected {} ciphertext bits, got {}", 2 * ct_len, msg.len())));
    }
    let part = if state.choice { msg.slice(ct_len, 2 * ct_len) } else { msg.slice(0, ct_len) };
    pke_dec(q, &state.td, &Ciphertext::from_bits(&part, n)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Receiver,
    Sender,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OtTranscript {
    pub choice: bool,
    pub receiver_coins: u64,
    pub x0: bool,
    pub x1: bool,
    pub sender_coins: u64,
    pub messages: Vec<(Role, BitString)>,
    pub output: bool,
}

impl OtTranscript {
    /// The sender's view: its inputs, coins and the receiver's message.
    pub fn sender_view(&self) -> (bool, bool, u64, &BitString) {
        (self.x0, self.x1, self.sender_coins, &self.messages[0].1)
    }
}

pub fn ot_run(q: &mut dyn QuantumAccess, x0: bool, x1: bool, choice: bool, seed: u64) -> Result<OtTranscript> {
    let receiver_coins = derive_seed(seed, 0);
    let sender_coins = derive_seed(seed, 1);
    let (m1, state) = ot_receiver_message(q, choice, receiver_coins)?;
    let m2 = ot_sender_message(q, x0, x1, &m1, sender_coins)?;
    let output = ot_receiver_output(q, &state, &m2)?;
    Ok(OtTranscript {
        choice,
        receiver_coins,
        x0,
        x1,
        sender_coins,
        messages: alloc::vec![(Role::Receiver, m1), (Role::Sender, m2)],
        output,
    })
}
