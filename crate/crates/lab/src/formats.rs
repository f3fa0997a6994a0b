//! Binary formats: truth tables, instances, world snapshots, transcripts.
//!
//! All integers are little-endian. Bit vectors are packed eight to a byte,
//! bit `i` in byte `i / 8` at position `i % 8`.

use std::collections::BTreeMap;

use forrelation_core::crypto::Role;
use forrelation_core::forrelation::{ForrelatedSampler, ForrelationInstance, Provenance};
use forrelation_core::oracle::{
    EncodedOracle, OracleWorld, PrfOracleWorld, ScaleProfile, TrapdoorOracleWorld, TrapdoorParts, WorldKind,
};
use forrelation_core::{BitString, TruthTable};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const SNAPSHOT_MAGIC: &[u8; 8] = b"FORRWLD\0";
pub const SNAPSHOT_VERSION: u16 = 1;

/// Worlds up to this many encoded bits get their regions written out.
pub const MATERIALIZE_LIMIT: u128 = 1 << 24;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("unexpected end of data")]
    Truncated,
    #[error("bad magic")]
    BadMagic,
    #[error("unsupported version {0}")]
    Version(u16),
    #[error("malformed field: {0}")]
    Malformed(&'static str),
    #[error("stored regions disagree with the regenerated encoding at bit {0}")]
    RegionMismatch(u64),
    #[error(transparent)]
    Core(#[from] forrelation_core::Error),
}

pub type Result<T> = std::result::Result<T, FormatError>;

pub fn pack_bits(bits: impl IntoIterator<Item = bool>, out: &mut Vec<u8>) {
    let mut byte = 0u8;
    let mut k = 0;
    for b in bits {
        byte |= (b as u8) << k;
        k += 1;
        if k == 8 {
            out.push(byte);
            byte = 0;
            k = 0;
        }
    }
    if k > 0 {
        out.push(byte);
    }
}

fn unpack_bits(bytes: &[u8], len: usize) -> Vec<bool> {
    (0..len).map(|i| bytes[i / 8] >> (i % 8) & 1 == 1).collect()
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(data: &'a [u8]) -> Self {
        Self { data, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).ok_or(FormatError::Truncated)?;
        let s = self.data.get(self.pos..end).ok_or(FormatError::Truncated)?;
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(self.u64()?))
    }

    fn bits(&mut self, len: usize) -> Result<Vec<bool>> {
        let bytes = self.take(len.div_ceil(8))?;
        Ok(unpack_bits(bytes, len))
    }

    fn words(&mut self, max: usize) -> Result<Vec<u64>> {
        let len = self.u64()? as usize;
        if len > max {
            return Err(FormatError::Malformed("word list too long"));
        }
        (0..len).map(|_| self.u64()).collect()
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.data.len() {
            return Err(FormatError::Malformed("trailing bytes"));
        }
        Ok(())
    }
}

/// `ell` as one byte, then the packed table.
pub fn encode_truth_table(t: &TruthTable, out: &mut Vec<u8>) {
    out.push(t.ell() as u8);
    pack_bits(t.iter(), out);
}

fn read_truth_table(r: &mut Reader<'_>) -> Result<TruthTable> {
    let ell = r.u8()? as u32;
    if ell > forrelation_core::bits::MAX_TABLE_ELL {
        return Err(FormatError::Malformed("table exponent"));
    }
    let bits = r.bits(1usize << ell)?;
    Ok(TruthTable::from_fn(ell, |i| bits[i])?)
}

pub fn decode_truth_table(bytes: &[u8]) -> Result<TruthTable> {
    let mut r = Reader::new(bytes);
    let t = read_truth_table(&mut r)?;
    r.finish()?;
    Ok(t)
}

/// `f`, then `g`, then the provenance tag.
pub fn encode_instance(inst: &ForrelationInstance) -> Vec<u8> {
    let mut out = Vec::new();
    encode_truth_table(inst.f(), &mut out);
    encode_truth_table(inst.g(), &mut out);
    out.push(inst.provenance().tag());
    out
}

pub fn decode_instance(bytes: &[u8]) -> Result<ForrelationInstance> {
    let mut r = Reader::new(bytes);
    let f = read_truth_table(&mut r)?;
    let g = read_truth_table(&mut r)?;
    let p = Provenance::from_tag(r.u8()?).ok_or(FormatError::Malformed("provenance tag"))?;
    r.finish()?;
    Ok(ForrelationInstance::new(f, g, p)?)
}

fn write_profile(p: &ScaleProfile, out: &mut Vec<u8>) {
    out.extend(p.n.to_le_bytes());
    out.extend(p.ell.to_le_bytes());
    let (tag, eps) = match p.sampler {
        ForrelatedSampler::Exact => (0u8, 0.0),
        ForrelatedSampler::Gaussian { eps: None } => (1, 0.0),
        ForrelatedSampler::Gaussian { eps: Some(e) } => (2, e),
    };
    out.push(tag);
    out.extend(eps.to_bits().to_le_bytes());
    out.push(p.paper_exact as u8);
    out.extend(p.reps.to_le_bytes());
    out.extend(p.threshold.to_bits().to_le_bytes());
}

fn read_profile(r: &mut Reader<'_>) -> Result<ScaleProfile> {
    let n = r.u32()?;
    let ell = r.u32()?;
    let tag = r.u8()?;
    let eps = r.f64()?;
    let sampler = match tag {
        0 => ForrelatedSampler::Exact,
        1 => ForrelatedSampler::Gaussian { eps: None },
        2 => ForrelatedSampler::Gaussian { eps: Some(eps) },
        _ => return Err(FormatError::Malformed("sampler tag")),
    };
    let paper_exact = match r.u8()? {
        0 => false,
        1 => true,
        _ => return Err(FormatError::Malformed("paper_exact flag")),
    };
    let reps = r.u32()?;
    let threshold = r.f64()?;
    let mut p = ScaleProfile::custom(n, ell, sampler, reps)?.with_threshold(threshold)?;
    p.paper_exact = paper_exact;
    Ok(p)
}

/// Every bit of `A`, block by block in address order.
pub fn region_bits(world: &OracleWorld) -> impl Iterator<Item = bool> + '_ {
    world.all_blocks().into_iter().flat_map(move |id| {
        let b = world.block(id).expect("listed block exists");
        (0..b.block_len()).map(move |y| b.bit(y))
    })
}

/// Serializes a world. Regions are included when the encoding has at most
/// [`MATERIALIZE_LIMIT`] bits or when `force_regions` is set.
pub fn encode_world(world: &OracleWorld, force_regions: bool) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend(SNAPSHOT_MAGIC);
    out.extend(SNAPSHOT_VERSION.to_le_bytes());
    out.push(match world.kind() {
        WorldKind::Prf => 0,
        WorldKind::Trapdoor => 1,
    });
    write_profile(world.profile(), &mut out);
    out.extend(world.seed().to_le_bytes());
    let words = |v: &[u64], out: &mut Vec<u8>| {
        out.extend((v.len() as u64).to_le_bytes());
        for w in v {
            out.extend(w.to_le_bytes());
        }
    };
    match world {
        OracleWorld::Prf(w) => {
            encode_truth_table(w.table(), &mut out);
            words(w.row_seeds(), &mut out);
        }
        OracleWorld::Trapdoor(w) => {
            let p = w.parts();
            words(&p.g, &mut out);
            words(&p.f, &mut out);
            words(&p.g_seeds, &mut out);
            words(&p.i_seeds, &mut out);
            out.extend((p.f_seed_overrides.len() as u64).to_le_bytes());
            for (k, v) in &p.f_seed_overrides {
                out.extend(k.to_le_bytes());
                out.extend(v.to_le_bytes());
            }
        }
    }
    let total = encoded_bits(world);
    if force_regions || total <= MATERIALIZE_LIMIT {
        out.push(1);
        out.extend((total as u64).to_le_bytes());
        pack_bits(region_bits(world), &mut out);
    } else {
        out.push(0);
    }
    out
}

pub fn encoded_bits(world: &OracleWorld) -> u128 {
    match world {
        OracleWorld::Prf(w) => w.encoded_bits() as u128,
        OracleWorld::Trapdoor(w) => w.encoded_bits(),
    }
}

/// Parses a snapshot and, if regions are present, checks them bit for bit
/// against the encoding regenerated from the stored seeds.
pub fn decode_world(bytes: &[u8]) -> Result<OracleWorld> {
    let mut r = Reader::new(bytes);
    if r.take(8)? != SNAPSHOT_MAGIC {
        return Err(FormatError::BadMagic);
    }
    let version = r.u16()?;
    if version != SNAPSHOT_VERSION {
        return Err(FormatError::Version(version));
    }
    let kind = r.u8()?;
    let profile = read_profile(&mut r)?;
    let seed = r.u64()?;
    let cap = 1usize << 26;
    let world = match kind {
        0 => {
            let table = read_truth_table(&mut r)?;
            let seeds = r.words(cap)?;
            OracleWorld::Prf(PrfOracleWorld::from_parts(profile, seed, table, seeds)?)
        }
        1 => {
            let g = r.words(cap)?;
            let f = r.words(cap)?;
            let g_seeds = r.words(cap)?;
            let i_seeds = r.words(cap)?;
            let count = r.u64()? as usize;
            if count > cap {
                return Err(FormatError::Malformed("override list too long"));
            }
            let mut f_seed_overrides = BTreeMap::new();
            for _ in 0..count {
                let k = r.u64()?;
                f_seed_overrides.insert(k, r.u64()?);
            }
            let parts = TrapdoorParts { g, f, g_seeds, i_seeds, f_seed_overrides };
            OracleWorld::Trapdoor(TrapdoorOracleWorld::from_parts(profile, seed, parts)?)
        }
        _ => return Err(FormatError::Malformed("world kind")),
    };
    match r.u8()? {
        0 => {}
        1 => {
            let total = r.u64()?;
            if total as u128 != encoded_bits(&world) {
                return Err(FormatError::Malformed("region length"));
            }
            let bytes = r.take((total as usize).div_ceil(8))?;
            for (i, b) in region_bits(&world).enumerate() {
                if (bytes[i / 8] >> (i % 8) & 1 == 1) != b {
                    return Err(FormatError::RegionMismatch(i as u64));
                }
            }
        }
        _ => return Err(FormatError::Malformed("region flag")),
    }
    r.finish()?;
    Ok(world)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Message count, then per message a role byte, the bit length and the
/// packed bits.
pub fn encode_transcript(messages: &[(Role, BitString)]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend((messages.len() as u32).to_le_bytes());
    for (role, bits) in messages {
        out.push(match role {
            Role::Receiver => 0,
            Role::Sender => 1,
        });
        out.extend((bits.len() as u32).to_le_bytes());
        pack_bits(bits.iter(), &mut out);
    }
    out
}

pub fn decode_transcript(bytes: &[u8]) -> Result<Vec<(Role, BitString)>> {
    let mut r = Reader::new(bytes);
    let count = r.u32()?;
    let mut out = Vec::new();
    for _ in 0..count {
        let role = match r.u8()? {
            0 => Role::Receiver,
            1 => Role::Sender,
            _ => return Err(FormatError::Malformed("role")),
        };
        let len = r.u32()? as usize;
        out.push((role, BitString::from_bits(r.bits(len)?)));
    }
    r.finish()?;
    Ok(out)
}

/// MSB-first hex of a bit string, zero-padded on the right to whole digits.
pub fn bits_to_hex(bits: &BitString) -> String {
    let mut s = String::with_capacity(bits.len().div_ceil(4));
    for chunk in bits.as_slice().chunks(4) {
        let mut v = 0u8;
        for (i, &b) in chunk.iter().enumerate() {
            v |= (b as u8) << (3 - i);
        }
        s.push(char::from_digit(v as u32, 16).unwrap());
    }
    s
}

/// Parses `0101` as bits or `0x5:4` as hex with an explicit bit length.
pub fn parse_bits(s: &str) -> Option<BitString> {
    if let Some(rest) = s.strip_prefix("0x") {
        let (digits, len) = match rest.split_once(':') {
            Some((d, l)) => (d, l.parse::<usize>().ok()?),
            None => (rest, rest.len() * 4),
        };
        if len > digits.len() * 4 {
            return None;
        }
        let mut bits = Vec::with_capacity(digits.len() * 4);
        for c in digits.chars() {
            let v = c.to_digit(16)?;
            bits.extend((0..4).rev().map(|i| v >> i & 1 == 1));
        }
        bits.truncate(len);
        return Some(BitString::from_bits(bits));
    }
    BitString::parse_binary(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use forrelation_core::oracle::{sample_prf_world, sample_trapdoor_world};

    #[test]
    fn table_layout_is_little_endian_packed() {
        let t = TruthTable::from_fn(4, |i| i == 0 || i == 9).unwrap();
        let mut out = Vec::new();
        encode_truth_table(&t, &mut out);
        assert_eq!(out, vec![4, 0b0000_0001, 0b0000_0010]);
        assert_eq!(decode_truth_table(&out).unwrap(), t);
    }

    #[test]
    fn snapshot_round_trips_and_detects_tampering() {
        let p = ScaleProfile::desk(2, 4).unwrap();
        let w = OracleWorld::Prf(sample_prf_world(&p, 11).unwrap());
        let mut bytes = encode_world(&w, false);
        assert_eq!(decode_world(&bytes).unwrap(), w);
        let last = bytes.len() - 1;
        bytes[last] ^= 0x80;
        assert!(matches!(decode_world(&bytes), Err(FormatError::RegionMismatch(_))));
    }

    #[test]
    fn trapdoor_snapshot_round_trips() {
        let p = ScaleProfile::desk(1, 3).unwrap();
        let w = OracleWorld::Trapdoor(sample_trapdoor_world(&p, 5).unwrap());
        assert_eq!(decode_world(&encode_world(&w, false)).unwrap(), w);
    }

    #[test]
    fn hex_parsing() {
        assert_eq!(parse_bits("0xa:3").unwrap(), BitString::parse_binary("101").unwrap());
        assert_eq!(bits_to_hex(&BitString::parse_binary("10111").unwrap()), "b8");
        assert!(parse_bits("0x1:9").is_none());
    }
}
