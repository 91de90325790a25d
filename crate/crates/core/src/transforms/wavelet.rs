//! The ordered wavelet registry.
//!
//! Codes are dense and fixed: Haar (0), Daubechies 2-10 (1-9), Symlets 2-8
//! (10-16), Coiflets 1-5 (17-21). Labels store these codes, so the order is
//! part of the dataset format.

use std::fmt::Write as _;
use std::sync::OnceLock;

use sha2::{Digest, Sha256};

use super::filters::*;
use crate::error::{Error, Result};

pub const WAVELET_COUNT: usize = 22;

/// An orthogonal wavelet and its four filters.
#[derive(Debug, Clone, PartialEq)]
pub struct Wavelet {
    pub code: usize,
    pub name: &'static str,
    pub dec_lo: Vec<f64>,
    pub dec_hi: Vec<f64>,
    pub rec_lo: Vec<f64>,
    pub rec_hi: Vec<f64>,
}

impl Wavelet {
    fn from_lowpass(code: usize, name: &'static str, lo: &[f64]) -> Self {
        let f = lo.len();
        let rec_lo: Vec<f64> = lo.iter().rev().copied().collect();
        let dec_hi = (0..f)
            .map(|k| if k % 2 == 0 { -lo[f - 1 - k] } else { lo[f - 1 - k] })
            .collect();
        let rec_hi = (0..f)
            .map(|k| if k % 2 == 0 { lo[k] } else { -lo[k] })
            .collect();
        Wavelet {
            code,
            name,
            dec_lo: lo.to_vec(),
            dec_hi,
            rec_lo,
            rec_hi,
        }
    }

    pub fn filter_length(&self) -> usize {
        self.dec_lo.len()
    }
}

const TABLE: [(&str, &[f64]); WAVELET_COUNT] = [
    ("haar", &HAAR),
    ("db2", &DB2),
    ("db3", &DB3),
    ("db4", &DB4),
    ("db5", &DB5),
    ("db6", &DB6),
    ("db7", &DB7),
    ("db8", &DB8),
    ("db9", &DB9),
    ("db10", &DB10),
    ("sym2", &SYM2),
    ("sym3", &SYM3),
    ("sym4", &SYM4),
    ("sym5", &SYM5),
    ("sym6", &SYM6),
    ("sym7", &SYM7),
    ("sym8", &SYM8),
    ("coif1", &COIF1),
    ("coif2", &COIF2),
    ("coif3", &COIF3),
    ("coif4", &COIF4),
    ("coif5", &COIF5),
];

pub fn registry() -> &'static [Wavelet] {
    static REGISTRY: OnceLock<Vec<Wavelet>> = OnceLock::new();
    REGISTRY.get_or_init(|| {
        TABLE
            .iter()
            .enumerate()
            .map(|(code, (name, lo))| Wavelet::from_lowpass(code, name, lo))
            .collect()
    })
}

pub fn wavelet(code: usize) -> Result<&'static Wavelet> {
    registry().get(code).ok_or(Error::UnknownWavelet(code))
}

pub fn wavelet_by_name(name: &str) -> Option<&'static Wavelet> {
    registry().iter().find(|w| w.name == name)
}

/// `code,name,filter_length` listing of the registry.
pub fn registry_csv() -> String {
    let mut out = String::from("code,name,filter_length\n");
    for w in registry() {
        let _ = writeln!(out, "{},{},{}", w.code, w.name, w.filter_length());
    }
    out
}

/// SHA-256 over names and exact coefficient bits, recorded in dataset
/// metadata so labels can be tied to the filter tables that produced them.
pub fn registry_hash() -> String {
    let mut hasher = Sha256::new();
    for w in registry() {
        hasher.update(w.name.as_bytes());
        for c in &w.dec_lo {
            hasher.update(c.to_le_bytes());
        }
    }
    hasher
        .finalize()
        .iter()
        .fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}
