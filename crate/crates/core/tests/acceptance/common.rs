use std::io::Write;

use cmi_core::CensoredRecord;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Prints one line past libtest's output capture.
pub fn report(criterion: usize, passed: bool, summary: &str) {
    let mut out = std::io::stdout().lock();
    let status = if passed { "PASS" } else { "FAIL" };
    let _ = writeln!(out, "criterion {criterion:>2} [{status}] {summary}");
    let _ = out.flush();
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Random right-censored data: exponential X with log-rate linear in
/// standard normal covariates, independent exponential censoring. `scale`
/// stretches the time axis. At least one event is guaranteed.
pub fn random_records(rng: &mut ChaCha8Rng, n: usize, p: usize, censor_rate: f64, scale: f64) -> Vec<CensoredRecord> {
    let censor = Exp::new(censor_rate).unwrap();
    let mut out: Vec<CensoredRecord> = (0..n)
        .map(|_| {
            let z: Vec<f64> = (0..p).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let eta: f64 = z.iter().enumerate().map(|(j, v)| v * (0.5 - 0.2 * j as f64)).sum();
            let x = Exp::new(eta.exp()).unwrap().sample(rng) * scale;
            let c = censor.sample(rng) * scale;
            let y = 1.0 + 0.5 * x + rng.sample::<f64, _>(StandardNormal);
            CensoredRecord::new(y, x.min(c), x <= c, z)
        })
        .collect();
    if out.iter().all(|r| !r.delta) {
        out[0].delta = true;
    }
    out
}

/// Cox log partial likelihood with Breslow ties, by direct enumeration.
pub fn brute_loglik(records: &[CensoredRecord], lambda: &[f64]) -> f64 {
    let eta = |r: &CensoredRecord| r.z.iter().zip(lambda).map(|(a, b)| a * b).sum::<f64>();
    let mut ll = 0.0;
    for r in records.iter().filter(|r| r.delta) {
        let risk: f64 = records.iter().filter(|s| s.w >= r.w).map(|s| eta(s).exp()).sum();
        ll += eta(r) - risk.ln();
    }
    ll
}

/// Nelson-Aalen based survival `exp(-sum d_i / n_i)` at each distinct time.
pub fn fleming_harrington(records: &[CensoredRecord]) -> Vec<(f64, f64)> {
    let mut times: Vec<f64> = records.iter().map(|r| r.w).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let mut h = 0.0;
    times
        .into_iter()
        .map(|t| {
            let d = records.iter().filter(|r| r.w == t && r.delta).count() as f64;
            let n = records.iter().filter(|r| r.w >= t).count() as f64;
            h += d / n;
            (t, (-h).exp())
        })
        .collect()
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x
}
