//! Counter-based random streams (Philox4x32-10).
//!
//! Every draw is a pure function of `(master seed, domain, coordinates)`, so
//! results do not depend on how work is scheduled across threads.

use rand_core::{impls, RngCore};
use serde::{Deserialize, Serialize};

const M0: u32 = 0xD251_1F53;
const M1: u32 = 0xCD9E_8D57;
const W0: u32 = 0x9E37_79B9;
const W1: u32 = 0xBB67_AE85;

#[inline]
fn mulhilo(a: u32, b: u32) -> (u32, u32) {
    let p = u64::from(a) * u64::from(b);
    (p as u32, (p >> 32) as u32)
}

/// One Philox4x32 block with 10 rounds.
pub fn philox4x32(ctr: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let mut c = ctr;
    let mut k = key;
    for round in 0..10 {
        if round > 0 {
            k[0] = k[0].wrapping_add(W0);
            k[1] = k[1].wrapping_add(W1);
        }
        let (lo0, hi0) = mulhilo(M0, c[0]);
        let (lo1, hi1) = mulhilo(M1, c[2]);
        c = [hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0];
    }
    c
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent families of streams derived from one master seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Domain {
    Entries,
    Profile,
    StartVector,
}

impl Domain {
    fn tag(self) -> u64 {
        match self {
            Domain::Entries => 0x656e_7472_6965_7300,
            Domain::Profile => 0x7072_6f66_696c_6500,
            Domain::StartVector => 0x7374_6172_7476_6300,
        }
    }

    fn key(self, master: u64) -> [u32; 2] {
        let k = splitmix64(master ^ self.tag());
        [k as u32, (k >> 32) as u32]
    }
}

/// Master seed plus stream coordinates `(trial, s, i, j)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub trial: u32,
    pub kraus: u32,
    pub row: u32,
    pub col: u32,
}

impl SeedSpec {
    pub fn new(master_seed: u64) -> Self {
        Self {
            master_seed,
            ..Self::default()
        }
    }

    pub fn with_trial(self, trial: u32) -> Self {
        Self { trial, ..self }
    }

    pub fn with_kraus(self, kraus: u32) -> Self {
        Self { kraus, ..self }
    }

    pub fn at(self, row: u32, col: u32) -> Self {
        Self { row, col, ..self }
    }

    /// The 128 random bits attached to these coordinates in `domain`.
    pub fn block(&self, domain: Domain) -> [u32; 4] {
        philox4x32([self.trial, self.kraus, self.row, self.col], domain.key(self.master_seed))
    }

    /// A sequential stream for `(trial, kraus)`; row/col are ignored and the
    /// stream walks the remaining 64 counter bits.
    pub fn stream(&self, domain: Domain) -> PhiloxStream {
        PhiloxStream::new(domain.key(self.master_seed), self.trial, self.kraus)
    }
}

/// Uniform in the open interval (0, 1) from 64 bits.
#[inline]
pub fn unit_open(hi: u32, lo: u32) -> f64 {
    // 52 bits keep `bits + 0.5` exact, so the result never rounds to 1.
    let bits = ((u64::from(hi) << 32) | u64::from(lo)) >> 12;
    (bits as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

/// Two independent standard normals by Box-Muller from one block.
#[inline]
pub fn gaussian_pair(block: [u32; 4]) -> (f64, f64) {
    let u1 = unit_open(block[0], block[1]);
    let u2 = unit_open(block[2], block[3]);
    let r = (-2.0 * u1.ln()).sqrt();
    let t = std::f64::consts::TAU * u2;
    (r * t.cos(), r * t.sin())
}

/// Sequential Philox stream; implements `RngCore` for use with `rand`.
#[derive(Clone, Debug)]
pub struct PhiloxStream {
    key: [u32; 2],
    hi: [u32; 2],
    block: u64,
    buf: [u32; 4],
    pos: usize,
}

impl PhiloxStream {
    fn new(key: [u32; 2], a: u32, b: u32) -> Self {
        Self {
            key,
            hi: [a, b],
            block: 0,
            buf: [0; 4],
            pos: 4,
        }
    }

    fn refill(&mut self) {
        let ctr = [self.hi[0], self.hi[1], self.block as u32, (self.block >> 32) as u32];
        self.buf = philox4x32(ctr, self.key);
        self.block = self.block.wrapping_add(1);
        self.pos = 0;
    }

    /// Standard normal draw.
    pub fn next_gaussian(&mut self) -> f64 {
        let w = [self.next_u32(), self.next_u32(), self.next_u32(), self.next_u32()];
        gaussian_pair(w).0
    }
}

impl RngCore for PhiloxStream {
    fn next_u32(&mut self) -> u32 {
        if self.pos == 4 {
            self.refill();
        }
        let v = self.buf[self.pos];
        self.pos += 1;
        v
    }

    fn next_u64(&mut self) -> u64 {
        impls::next_u64_via_u32(self)
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        impls::fill_bytes_via_next(self, dest)
    }
}
