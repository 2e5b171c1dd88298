//! Measurement record formats.
//!
//! Text form (one item per line, whitespace separated, floats in Rust's
//! shortest round-trip exponent notation):
//!
//! ```text
//! cpr-measurements 1
//! n <N>
//! l <L>
//! mode <fourier|gaussian|bernoulli>
//! noise_variance <σ²>
//! seed <u64>
//! sampling <l_1> ... <l_L>        (empty for dense modes)
//! b1 <b_{1,1}> ... <b_{1,L}>
//! b2 ...
//! b3 ...
//! b4 ...
//! ```
//!
//! Binary form, all integers and floats little-endian:
//!
//! ```text
//! offset  size      field
//! 0       4         magic "CPRM"
//! 4       2         version (u16) = 1
//! 6       1         mode (0 fourier, 1 gaussian, 2 bernoulli)
//! 7       1         reserved, 0
//! 8       8         N (u64)
//! 16      8         L (u64)
//! 24      8         noise variance (f64)
//! 32      8         seed (u64)
//! 40      8         |𝓛| (u64), 0 or L
//! 48      8·|𝓛|     sampling indices, 1-based, ascending (u64)
//! ...     8·4·L     b_{s,l} in row-major (s, l) order (f64)
//! ```

use crate::dft::SamplingSet;
use crate::error::{CprError, Result};
use crate::measurement::IntensityMeasurements;
use crate::operator::SensingMode;

const TEXT_MAGIC: &str = "cpr-measurements";
const BINARY_MAGIC: &[u8; 4] = b"CPRM";
const VERSION: u16 = 1;

fn bad(msg: impl Into<String>) -> CprError {
    CprError::Format(msg.into())
}

pub fn to_text(m: &IntensityMeasurements) -> String {
    let mut out = String::new();
    out.push_str(&format!("{TEXT_MAGIC} {VERSION}\n"));
    out.push_str(&format!("n {}\n", m.n));
    out.push_str(&format!("l {}\n", m.l()));
    out.push_str(&format!("mode {}\n", m.mode));
    out.push_str(&format!("noise_variance {:e}\n", m.noise_variance));
    out.push_str(&format!("seed {}\n", m.seed));
    out.push_str("sampling");
    if let Some(set) = &m.sampling {
        for i in set.indices() {
            out.push_str(&format!(" {i}"));
        }
    }
    out.push('\n');
    for s in 1..=4 {
        out.push_str(&format!("b{s}"));
        for l in 1..=m.l() {
            out.push_str(&format!(" {:e}", m.get(s, l)));
        }
        out.push('\n');
    }
    out
}

fn field<'a>(lines: &mut impl Iterator<Item = &'a str>, key: &str) -> Result<Vec<&'a str>> {
    let line = lines.next().ok_or_else(|| bad(format!("missing '{key}' line")))?;
    let mut parts = line.split_whitespace();
    match parts.next() {
        Some(k) if k == key => Ok(parts.collect()),
        Some(k) => Err(bad(format!("expected '{key}', found '{k}'"))),
        None => Err(bad(format!("expected '{key}', found an empty line"))),
    }
}

fn single<T: std::str::FromStr>(parts: &[&str], key: &str) -> Result<T> {
    match parts {
        [v] => v.parse().map_err(|_| bad(format!("cannot parse {key} value '{v}'"))),
        _ => Err(bad(format!("'{key}' takes exactly one value"))),
    }
}

pub fn from_text(text: &str) -> Result<IntensityMeasurements> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
    let version: u16 = single(&field(&mut lines, TEXT_MAGIC)?, TEXT_MAGIC)?;
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let n: usize = single(&field(&mut lines, "n")?, "n")?;
    let l: usize = single(&field(&mut lines, "l")?, "l")?;
    let mode: SensingMode = single::<String>(&field(&mut lines, "mode")?, "mode")?
        .parse()
        .map_err(|e: CprError| bad(e.to_string()))?;
    let noise_variance: f64 = single(&field(&mut lines, "noise_variance")?, "noise_variance")?;
    let seed: u64 = single(&field(&mut lines, "seed")?, "seed")?;
    let indices = field(&mut lines, "sampling")?
        .iter()
        .map(|v| v.parse::<usize>().map_err(|_| bad(format!("bad sampling index '{v}'"))))
        .collect::<Result<Vec<_>>>()?;
    let mut values = Vec::with_capacity(4 * l);
    for s in 1..=4 {
        let key = format!("b{s}");
        let row = field(&mut lines, &key)?;
        if row.len() != l {
            return Err(bad(format!("{key} has {} values, expected {l}", row.len())));
        }
        for v in row {
            values.push(v.parse::<f64>().map_err(|_| bad(format!("bad value '{v}' in {key}")))?);
        }
    }
    if lines.next().is_some() {
        return Err(bad("trailing content after b4"));
    }
    build(n, mode, indices, noise_variance, seed, values)
}

fn build(
    n: usize,
    mode: SensingMode,
    indices: Vec<usize>,
    noise_variance: f64,
    seed: u64,
    values: Vec<f64>,
) -> Result<IntensityMeasurements> {
    let sampling = if indices.is_empty() {
        None
    } else {
        Some(SamplingSet::new(indices, n).map_err(|e| bad(e.to_string()))?)
    };
    IntensityMeasurements::new(n, mode, sampling, noise_variance, seed, values)
        .map_err(|e| bad(e.to_string()))
}

pub fn to_binary(m: &IntensityMeasurements) -> Vec<u8> {
    let set_len = m.sampling.as_ref().map_or(0, SamplingSet::len);
    let mut out = Vec::with_capacity(48 + 8 * set_len + 8 * m.count());
    out.extend_from_slice(BINARY_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(m.mode.code());
    out.push(0);
    out.extend_from_slice(&(m.n as u64).to_le_bytes());
    out.extend_from_slice(&(m.l() as u64).to_le_bytes());
    out.extend_from_slice(&m.noise_variance.to_le_bytes());
    out.extend_from_slice(&m.seed.to_le_bytes());
    out.extend_from_slice(&(set_len as u64).to_le_bytes());
    if let Some(set) = &m.sampling {
        for &i in set.indices() {
            out.extend_from_slice(&(i as u64).to_le_bytes());
        }
    }
    for v in m.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| bad("record is truncated"))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| bad("length does not fit in usize"))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn from_binary(bytes: &[u8]) -> Result<IntensityMeasurements> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != BINARY_MAGIC {
        return Err(bad("missing CPRM magic"));
    }
    let version = u16::from_le_bytes(r.take(2)?.try_into().unwrap());
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let mode = SensingMode::from_code(r.take(1)?[0])?;
    r.take(1)?;
    let n = r.usize()?;
    let l = r.usize()?;
    let noise_variance = r.f64()?;
    let seed = r.u64()?;
    let set_len = r.usize()?;
    // Bound allocations by what the buffer can actually hold.
    let remaining = (bytes.len() - r.pos) / 8;
    if set_len > remaining || l > remaining / 4 {
        return Err(bad("record is truncated"));
    }
    let indices = (0..set_len).map(|_| r.usize()).collect::<Result<Vec<_>>>()?;
    let values = (0..4 * l).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    if r.pos != bytes.len() {
        return Err(bad("trailing bytes after values"));
    }
    build(n, mode, indices, noise_variance, seed, values)
}
