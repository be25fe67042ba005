//! Closed-form estimates for random click logs and their Monte-Carlo
//! counterparts.
//!
//! The random model draws `|D|` pairs `(x, t)` independently and uniformly
//! from `|X| × |T|`.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::seed;
use crate::unionfind::UnionFind;

fn check_sizes(pairs: &[(&'static str, f64)]) -> Result<()> {
    for &(name, v) in pairs {
        if !(v >= 1.0) || !v.is_finite() {
            return Err(Error::OutOfRange {
                name,
                value: v,
                range: "[1, inf)",
            });
        }
    }
    Ok(())
}

/// `ln(2 - e^-u)` evaluated without cancellation for small `u`.
fn ln_two_minus_exp(u: f64) -> f64 {
    (-(-u).exp_m1()).ln_1p()
}

/// `f = |X||T|·ln(2 - exp(-|D|/(|X||T|)))`.
pub fn identifiability_exponent(dsize: f64, xsize: f64, tsize: f64) -> Result<f64> {
    check_sizes(&[("|D|", dsize), ("|X|", xsize), ("|T|", tsize)])?;
    let cells = xsize * tsize;
    Ok(cells * ln_two_minus_exp(dsize / cells))
}

/// Estimated probability that a random log of `dsize` pairs yields a
/// connected graph: `1 - |T|·exp(-|D| + f)`, clamped to `[0, 1]`.
pub fn identifiability_probability(dsize: f64, xsize: f64, tsize: f64) -> Result<f64> {
    let f = identifiability_exponent(dsize, xsize, tsize)?;
    let log_miss = tsize.ln() - dsize + f;
    Ok((1.0 - log_miss.exp()).clamp(0.0, 1.0))
}

/// Estimated probability that two fixed bias factors share no feature:
/// `exp(-|D|/|T|)·(2 - exp(-|D|/(|X||T|)))^|X|`.
pub fn disconnection_probability(dsize: f64, xsize: f64, tsize: f64) -> Result<f64> {
    check_sizes(&[("|X|", xsize), ("|T|", tsize)])?;
    if !(dsize >= 0.0) || !dsize.is_finite() {
        return Err(Error::OutOfRange {
            name: "|D|",
            value: dsize,
            range: "[0, inf)",
        });
    }
    let log_p = -dsize / tsize + xsize * ln_two_minus_exp(dsize / (xsize * tsize));
    Ok(log_p.exp().clamp(0.0, 1.0))
}

/// Upper bound on relevance-ratio error after merging bias factors with
/// observations `o_t1` and `o_t2` into one parameter `o_merged`.
pub fn merging_error_bound(o_t1: f64, o_t2: f64, o_merged: f64) -> Result<f64> {
    if o_merged == 0.0 || !o_merged.is_finite() {
        return Err(Error::NonPositive("merged observation", o_merged));
    }
    Ok((o_t1 - o_t2).abs() / o_merged.abs())
}

/// Whether one random log connects every bias factor it touches.
fn random_log_connected<R: Rng>(rng: &mut R, dsize: usize, xsize: usize, tsize: usize) -> bool {
    let mut uf = UnionFind::new(tsize);
    let mut anchor = vec![usize::MAX; xsize];
    let mut present = vec![false; tsize];
    for _ in 0..dsize {
        let x = rng.random_range(0..xsize);
        let t = rng.random_range(0..tsize);
        present[t] = true;
        if anchor[x] == usize::MAX {
            anchor[x] = t;
        } else {
            uf.union(anchor[x], t);
        }
    }
    let mut root = None;
    for t in (0..tsize).filter(|&t| present[t]) {
        let r = uf.find(t);
        match root {
            None => root = Some(r),
            Some(r0) if r0 != r => return false,
            _ => {}
        }
    }
    true
}

/// Fraction of `trials` random logs whose graph is connected. Graph nodes are
/// the bias factors that occur in the log.
pub fn connected_frequency(dsize: usize, xsize: usize, tsize: usize, trials: usize, seed: u64) -> Result<f64> {
    check_sizes(&[("|X|", xsize as f64), ("|T|", tsize as f64), ("trials", trials as f64)])?;
    let hits = (0..trials)
        .into_par_iter()
        .filter(|&i| {
            let mut rng = seed::child_rng(seed, &[i as u64]);
            random_log_connected(&mut rng, dsize, xsize, tsize)
        })
        .count();
    Ok(hits as f64 / trials as f64)
}

/// Fraction of `trials` random logs in which bias factors `0` and `1` share no
/// feature.
pub fn disconnection_frequency(dsize: usize, xsize: usize, tsize: usize, trials: usize, seed: u64) -> Result<f64> {
    check_sizes(&[("|X|", xsize as f64), ("trials", trials as f64)])?;
    if tsize < 2 {
        return Err(Error::OutOfRange {
            name: "|T|",
            value: tsize as f64,
            range: "[2, inf)",
        });
    }
    let hits = (0..trials)
        .into_par_iter()
        .filter(|&i| {
            let mut rng = seed::child_rng(seed, &[i as u64]);
            let mut seen = vec![0u8; xsize];
            for _ in 0..dsize {
                let x = rng.random_range(0..xsize);
                let t = rng.random_range(0..tsize);
                if t < 2 {
                    seen[x] |= 1 << t;
                }
            }
            !seen.contains(&3)
        })
        .count();
    Ok(hits as f64 / trials as f64)
}
