//! Named concept classes used by tests, experiments and the command line.
//!
//! Specs are written `name:size` or `name(size)`; the closure wrapper takes a
//! nested spec, e.g. `negation-closure(thresholds:3)`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::ConceptClass;

/// Largest `k` for parities and conjunctions over `{0,1}^k`.
pub const MAX_CUBE_DIM: usize = 4;

fn line_domain(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{i}")).collect()
}

fn cube_domain(k: usize) -> Vec<String> {
    (0..1usize << k).map(|x| bits(x, k)).collect()
}

/// `x` as `k` bits, most significant first.
fn bits(x: usize, k: usize) -> String {
    (0..k).rev().map(|b| if x >> b & 1 == 1 { '1' } else { '0' }).collect()
}

fn check_size(name: &str, n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidInput(format!("{name} needs a positive size")));
    }
    Ok(())
}

fn check_cube(name: &str, k: usize) -> Result<()> {
    check_size(name, k)?;
    if k > MAX_CUBE_DIM {
        return Err(Error::InvalidInput(format!("{name} supports k ≤ {MAX_CUBE_DIM}, got {k}")));
    }
    Ok(())
}

/// `t_k(x) = +1` iff `x ≤ k`, for `k = 0..=n` over `{1..n}`.
pub fn thresholds(n: usize) -> Result<ConceptClass> {
    check_size("thresholds", n)?;
    let concepts = (0..=n)
        .map(|k| (format!("t{k}"), (1..=n).map(|x| if x <= k { 1 } else { -1 }).collect()))
        .collect();
    ConceptClass::new(line_domain(n), concepts)
}

/// Point functions: `+1` at a single point of `{1..n}`.
pub fn points(n: usize) -> Result<ConceptClass> {
    check_size("points", n)?;
    let concepts = (1..=n)
        .map(|p| (format!("p{p}"), (1..=n).map(|x| if x == p { 1 } else { -1 }).collect()))
        .collect();
    ConceptClass::new(line_domain(n), concepts)
}

/// All `2^k` parities `χ_S(x) = (−1)^{⟨S,x⟩}` over `{0,1}^k`.
pub fn parities(k: usize) -> Result<ConceptClass> {
    check_cube("parities", k)?;
    let concepts = (0..1usize << k)
        .map(|s| {
            let values = (0..1usize << k).map(|x| if (s & x).count_ones() % 2 == 0 { 1 } else { -1 }).collect();
            (format!("chi_{}", bits(s, k)), values)
        })
        .collect();
    ConceptClass::new(cube_domain(k), concepts)
}

/// All `3^k` conjunctions of literals over `{0,1}^k`, the empty one included.
pub fn conjunctions(k: usize) -> Result<ConceptClass> {
    check_cube("conjunctions", k)?;
    let mut concepts = Vec::new();
    let total = 3usize.pow(k as u32);
    for code in 0..total {
        // Digit per variable: 0 absent, 1 positive, 2 negated.
        let mut digits = Vec::with_capacity(k);
        let mut c = code;
        for _ in 0..k {
            digits.push(c % 3);
            c /= 3;
        }
        let name: Vec<String> = digits
            .iter()
            .enumerate()
            .filter(|(_, d)| **d != 0)
            .map(|(i, d)| if *d == 1 { format!("x{}", i + 1) } else { format!("!x{}", i + 1) })
            .collect();
        let name = if name.is_empty() { String::from("true") } else { name.join("&") };
        let values = (0..1usize << k)
            .map(|x| {
                let ok = digits.iter().enumerate().all(|(i, d)| {
                    let bit = x >> (k - 1 - i) & 1;
                    match d {
                        1 => bit == 1,
                        2 => bit == 0,
                        _ => true,
                    }
                });
                if ok {
                    1
                } else {
                    -1
                }
            })
            .collect();
        concepts.push((name, values));
    }
    ConceptClass::new(cube_domain(k), concepts)
}

/// Builds a class from its spec string.
pub fn parse(spec: &str) -> Result<ConceptClass> {
    let spec = spec.trim();
    if let Some(inner) = spec.strip_prefix("negation-closure(").and_then(|s| s.strip_suffix(')')) {
        return Ok(parse(inner)?.negation_closure());
    }
    let (name, size) = if let Some((n, s)) = spec.split_once(':') {
        (n, s)
    } else if let Some((n, s)) = spec.strip_suffix(')').and_then(|s| s.split_once('(')) {
        (n, s)
    } else {
        return Err(Error::InvalidInput(format!("class spec {spec:?} is not of the form name:size")));
    };
    let size: usize = size
        .trim()
        .parse()
        .map_err(|_| Error::InvalidInput(format!("class size {size:?} is not a nonnegative integer")))?;
    match name.trim() {
        "thresholds" => thresholds(size),
        "points" => points(size),
        "parities" => parities(size),
        "conjunctions" => conjunctions(size),
        other => Err(Error::InvalidInput(format!(
            "unknown class {other:?}; expected thresholds, points, parities, conjunctions or negation-closure(...)"
        ))),
    }
}

/// Every zoo class whose concept count and domain size are both at most `limit`.
pub fn small_classes(limit: usize) -> Vec<(String, ConceptClass)> {
    let mut base: Vec<String> = Vec::new();
    for n in 1..=limit {
        base.push(format!("thresholds:{n}"));
        base.push(format!("points:{n}"));
    }
    for k in 1..=MAX_CUBE_DIM {
        base.push(format!("parities:{k}"));
        base.push(format!("conjunctions:{k}"));
    }
    let mut specs = base.clone();
    specs.extend(base.iter().map(|s| format!("negation-closure({s})")));
    specs
        .into_iter()
        .filter_map(|s| parse(&s).ok().map(|c| (s, c)))
        .filter(|(_, c)| c.len() <= limit && c.domain_size() <= limit)
        .collect()
}
