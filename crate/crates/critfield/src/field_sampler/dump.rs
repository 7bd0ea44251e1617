//! Plain-text sample dumps.
//!
//! ```text
//! # critfield field sample
//! m 2
//! hbar 0.0625
//! seed 7 3            (or `seed none`)
//! truncation_bias 1.2e-9
//! terms 2
//! k_1 k_2 amplitude a b
//! 0 0 0.0625 -0.31 0
//! 1 -2 0.088 1.02 0.44
//! ```
//!
//! Floats are written in shortest round-trip form, so reading a dump reproduces the sample exactly.

use std::fmt::Write as _;
use std::path::Path;

use super::FieldSample;
use crate::error::{Error, Result};

const HEADER: &str = "# critfield field sample";

pub fn format_sample(s: &FieldSample) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{HEADER}");
    let _ = writeln!(out, "m {}", s.m);
    let _ = writeln!(out, "hbar {:?}", s.hbar);
    match s.seed {
        Some((seed, stream)) => {
            let _ = writeln!(out, "seed {seed} {stream}");
        }
        None => out.push_str("seed none\n"),
    }
    let _ = writeln!(out, "truncation_bias {:?}", s.truncation_bias);
    let _ = writeln!(out, "terms {}", s.len());
    let cols: Vec<String> = (1..=s.m).map(|j| format!("k_{j}")).collect();
    let _ = writeln!(out, "{} amplitude a b", cols.join(" "));
    for i in 0..s.len() {
        for c in s.freq(i) {
            let _ = write!(out, "{c} ");
        }
        let _ = writeln!(out, "{:?} {:?} {:?}", s.amp[i], s.a[i], s.b[i]);
    }
    out
}

pub fn parse_sample(text: &str) -> Result<FieldSample> {
    let bad = |msg: &str| Error::Config(format!("sample dump: {msg}"));
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    if lines.next().map(str::trim) != Some(HEADER) {
        return Err(bad("missing header"));
    }
    let mut field = |name: &str| -> Result<Vec<String>> {
        let line = lines.next().ok_or_else(|| bad("truncated"))?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some(name) {
            return Err(bad(&format!("expected `{name}`")));
        }
        Ok(parts.map(String::from).collect())
    };
    let num = |v: &str| v.parse::<f64>().map_err(|_| bad(&format!("bad number `{v}`")));
    let m: usize = field("m")?.first().and_then(|v| v.parse().ok()).ok_or_else(|| bad("bad m"))?;
    let hbar = num(field("hbar")?.first().ok_or_else(|| bad("bad hbar"))?)?;
    let seed_parts = field("seed")?;
    let seed = match seed_parts.as_slice() {
        [n] if n == "none" => None,
        [a, b] => Some((
            a.parse().map_err(|_| bad("bad seed"))?,
            b.parse().map_err(|_| bad("bad stream"))?,
        )),
        _ => return Err(bad("bad seed line")),
    };
    let bias = num(field("truncation_bias")?.first().ok_or_else(|| bad("bad truncation_bias"))?)?;
    let n: usize = field("terms")?.first().and_then(|v| v.parse().ok()).ok_or_else(|| bad("bad terms"))?;
    lines.next().ok_or_else(|| bad("missing column line"))?;
    let (mut k, mut amp, mut a, mut b) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for _ in 0..n {
        let line = lines.next().ok_or_else(|| bad("too few terms"))?;
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != m + 3 {
            return Err(bad("wrong column count"));
        }
        for p in &parts[..m] {
            k.push(p.parse::<i32>().map_err(|_| bad("bad frequency"))?);
        }
        amp.push(num(parts[m])?);
        a.push(num(parts[m + 1])?);
        b.push(num(parts[m + 2])?);
    }
    Ok(FieldSample::assemble(m, hbar, k, amp, a, b, seed, bias))
}

pub fn write_sample(s: &FieldSample, path: &Path) -> Result<()> {
    std::fs::write(path, format_sample(s)).map_err(|e| Error::io(path, e))
}

pub fn read_sample(path: &Path) -> Result<FieldSample> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_sample(&text)
}
