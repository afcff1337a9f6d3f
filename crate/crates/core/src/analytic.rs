//! Closed-form contention, utilization and wire-crossing models.
//!
//! Everything in here is a pure function of its arguments. Utilization
//! formulas model an `n`-master, `k`-slave-port interconnect where each
//! slave port fans out to `r` memory banks (speed-up `r`); crossing
//! formulas count planar wire intersections of the flat crossbar and the
//! 2-ary multistage building block.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AnalyticError {
    #[error("request count q={q} out of range 0..={n}")]
    RequestCountOutOfRange { q: u32, n: u32 },
    #[error("parameter {name} must be >= 1, got {value}")]
    NonPositive { name: &'static str, value: u32 },
    #[error("request probability must lie in [0,1], got {0}")]
    BadProbability(f64),
    #[error("{name}={value} must be a power of two >= {min}")]
    NotPowerOfTwo {
        name: &'static str,
        value: u32,
        min: u32,
    },
    #[error("block port count g={0} must be even and >= 2")]
    OddBlockPorts(u32),
}

/// Parameters of the contention model: `n` masters, `k` slave ports,
/// speed-up `r` (banks per slave port) and per-cycle request probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContentionParams {
    pub masters: u32,
    pub slave_ports: u32,
    pub speedup: u32,
    pub request_prob: f64,
}

impl ContentionParams {
    pub fn new(
        masters: u32,
        slave_ports: u32,
        speedup: u32,
        request_prob: f64,
    ) -> Result<Self, AnalyticError> {
        for (name, value) in [
            ("masters", masters),
            ("slave_ports", slave_ports),
            ("speedup", speedup),
        ] {
            if value == 0 {
                return Err(AnalyticError::NonPositive { name, value });
            }
        }
        if !(0.0..=1.0).contains(&request_prob) || request_prob.is_nan() {
            return Err(AnalyticError::BadProbability(request_prob));
        }
        Ok(Self {
            masters,
            slave_ports,
            speedup,
            request_prob,
        })
    }

    /// Same parameters at a different speed-up.
    pub fn with_speedup(self, speedup: u32) -> Self {
        Self { speedup, ..self }
    }
}

/// ln C(n, q), exact enough for n up to a few thousand.
fn ln_binomial(n: u32, q: u32) -> f64 {
    let q = q.min(n - q.min(n));
    let mut acc = 0.0f64;
    for i in 1..=q {
        acc += ((n - q + i) as f64).ln() - (i as f64).ln();
    }
    acc
}

/// Probability of exactly `q` simultaneous requests at one slave port:
/// Binomial(n, p_a/k) at q.
pub fn prob_requests(p: &ContentionParams, q: u32) -> Result<f64, AnalyticError> {
    let n = p.masters;
    if q > n {
        return Err(AnalyticError::RequestCountOutOfRange { q, n });
    }
    let pp = p.request_prob / p.slave_ports as f64;
    // Degenerate endpoints avoid ln(0).
    if pp == 0.0 {
        return Ok(if q == 0 { 1.0 } else { 0.0 });
    }
    if pp == 1.0 {
        return Ok(if q == n { 1.0 } else { 0.0 });
    }
    let ln_pmf =
        ln_binomial(n, q) + q as f64 * pp.ln() + (n - q) as f64 * (1.0 - pp).ln_1p_stable();
    Ok(ln_pmf.exp())
}

// (1 - pp).ln() computed as ln_1p(-pp) for small pp.
trait Ln1pStable {
    fn ln_1p_stable(self) -> f64;
}
impl Ln1pStable for f64 {
    fn ln_1p_stable(self) -> f64 {
        // self is already 1 - pp; recover pp to use ln_1p.
        (self - 1.0).ln_1p()
    }
}

/// Expected number of requests served at a slave port with speed-up `r`
/// when `q` requests are kept: f_r(q) = r (1 - ((r-1)/r)^q).
///
/// Uses the 0^0 = 1 convention so f_1(0) = 0.
pub fn speedup_utilization(r: u32, q: u32) -> f64 {
    debug_assert!(r >= 1);
    let base = (r - 1) as f64 / r as f64;
    r as f64 * (1.0 - pow_convention(base, q))
}

/// x^q with the 0^0 = 1 convention.
fn pow_convention(x: f64, q: u32) -> f64 {
    if q == 0 {
        1.0
    } else {
        x.powi(q as i32)
    }
}

/// F(r, q) = (1 - ((r-1)/r)^r) - (1 - ((r-1)/r)^q), nonnegative for q < r.
pub fn correction_term(r: u32, q: u32) -> f64 {
    debug_assert!(r >= 1 && q < r);
    let base = (r - 1) as f64 / r as f64;
    (1.0 - pow_convention(base, r)) - (1.0 - pow_convention(base, q))
}

const IDENTITY_TOL: f64 = 1e-12;

/// Expected utilization of a slave port, E(k, n, r).
///
/// Evaluated through two algebraically equal routes (the direct sum over
/// f_r(q) P{q} and the closed form with the F correction) which are
/// required to agree to 1e-12.
pub fn expected_slave_utilization(p: &ContentionParams) -> Result<f64, AnalyticError> {
    let r = p.speedup;
    // Route 1: direct truncated expectation.
    let mut direct = 0.0;
    let mut cum = 0.0;
    for q in 0..r.min(p.masters) {
        let pq = prob_requests(p, q)?;
        direct += speedup_utilization(r, q) * pq;
        cum += pq;
    }
    direct += speedup_utilization(r, r) * (1.0 - cum);

    // Route 2: closed form.
    let base = (r - 1) as f64 / r as f64;
    let mut corr = 0.0;
    for q in 0..r.min(p.masters) {
        corr += correction_term(r, q) * prob_requests(p, q)?;
    }
    let closed = r as f64 * ((1.0 - pow_convention(base, r)) - corr);

    assert!(
        (direct - closed).abs() <= IDENTITY_TOL * (1.0 + direct.abs()),
        "slave utilization routes disagree: direct={direct} closed={closed}"
    );
    Ok(closed)
}

/// Per-bank utilization seen from a single interconnect network:
/// E_B(n, r) = E(k, n, r) / r.
pub fn bank_utilization_single(p: &ContentionParams) -> Result<f64, AnalyticError> {
    Ok(expected_slave_utilization(p)? / p.speedup as f64)
}

/// Bank utilization with `r` speed-up networks sharing the banks:
/// U_B(n, r) = 1 - (1 - E_B)^r.
pub fn bank_utilization_dsmc(p: &ContentionParams) -> Result<f64, AnalyticError> {
    let eb = bank_utilization_single(p)?;
    Ok(1.0 - (1.0 - eb).powi(p.speedup as i32))
}

/// Bank utilization of the fully connected topology:
/// U_flat = 1 - (1 - p_a/(k r))^n.
pub fn bank_utilization_flat(p: &ContentionParams) -> f64 {
    let pp = p.request_prob / (p.slave_ports as f64 * p.speedup as f64);
    -((-pp).ln_1p() * p.masters as f64).exp_m1()
}

/// Aggregated utilization per master port, E(k, n, r) * k / n, swept over
/// the given speed-up values.
pub fn port_utilization_curve(
    p: &ContentionParams,
    speedups: impl IntoIterator<Item = u32>,
) -> Result<Vec<(u32, f64)>, AnalyticError> {
    let scale = p.slave_ports as f64 / p.masters as f64;
    speedups
        .into_iter()
        .map(|r| {
            let e = expected_slave_utilization(&p.with_speedup(r))?;
            Ok((r, e * scale))
        })
        .collect()
}

fn require_power_of_two(name: &'static str, n: u32, min: u32) -> Result<(), AnalyticError> {
    if n < min || !n.is_power_of_two() {
        return Err(AnalyticError::NotPowerOfTwo {
            name,
            value: n,
            min,
        });
    }
    Ok(())
}

/// Wire crossings of the flat n-to-k crossbar on the canonical two-column
/// embedding: C(n,2) * C(k,2).
pub fn crossings_flat(n: u64, k: u64) -> u64 {
    (n * (n - 1) / 2) * (k * (k - 1) / 2)
}

/// Per-block crossing counts of one stage of the 2-ary network, split by
/// type: A (left/right exchange), B (master-side self), C (slave-side self),
/// where each of the two crossbars in the block has `g` ports.
pub fn stage_block_crossings(g: u32) -> Result<(u64, u64, u64), AnalyticError> {
    if g < 2 || g % 2 != 0 {
        return Err(AnalyticError::OddBlockPorts(g));
    }
    let g = g as u64;
    let type_a = g * g / 4;
    let type_b = g * (g - 2) / 4;
    Ok((type_a, type_b, type_b))
}

/// Total crossings of a 2-ary multistage network without speed-up:
/// n * sum_{i=1}^{log2 n - 1} (3*2^i - 4)/8.
pub fn crossings_2ary(n: u32) -> Result<u64, AnalyticError> {
    require_power_of_two("n", n, 4)?;
    let stages = n.trailing_zeros();
    let mut total = 0u64;
    for i in 1..stages {
        total += n as u64 * (3 * (1u64 << i) - 4) / 8;
    }
    Ok(total)
}

/// Crossing count of a speed-up-doubled building block:
/// n * sum_{i=1}^{log2 n - 1} (3*2^i - 4)/2 - 3n/4.
pub fn crossings_2ary_speedup(n: u32) -> Result<f64, AnalyticError> {
    require_power_of_two("n", n, 4)?;
    let stages = n.trailing_zeros();
    let mut sum = 0.0;
    for i in 1..stages {
        sum += (3.0 * (1u64 << i) as f64 - 4.0) / 2.0;
    }
    Ok(n as f64 * sum - 3.0 * n as f64 / 4.0)
}

/// Wire crossings between the two building blocks of the two-block
/// configuration: 2*[2n + 4*sum_{i=1}^{n/8-1}(n - 8i)] + n/2.
pub fn crossings_between_blocks(n: u32) -> Result<f64, AnalyticError> {
    require_power_of_two("n", n, 8)?;
    let mut sum = 0.0;
    for i in 1..=(n / 8).saturating_sub(1) {
        sum += (n - 8 * i) as f64;
    }
    Ok(2.0 * (2.0 * n as f64 + 4.0 * sum) + n as f64 / 2.0)
}

/// Crossing reduction ratio of a two-block configuration of size n versus
/// the flat 2n-by-2n crossbar:
/// R = n (2n-1)^2 / [sum_{i=1}^{log2 n - 1}(3*2^i - 4) + 8*sum_{i=1}^{n/8-1}(1 - 8i/n) + 3].
pub fn crossing_reduction_ratio(n: u32) -> Result<f64, AnalyticError> {
    require_power_of_two("n", n, 8)?;
    let stages = n.trailing_zeros();
    let mut denom = 3.0;
    for i in 1..stages {
        denom += (3 * (1u64 << i) - 4) as f64;
    }
    for i in 1..=(n / 8).saturating_sub(1) {
        denom += 8.0 * (1.0 - 8.0 * i as f64 / n as f64);
    }
    let nf = n as f64;
    Ok(nf * (2.0 * nf - 1.0).powi(2) / denom)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(n: u32, k: u32, r: u32, pa: f64) -> ContentionParams {
        ContentionParams::new(n, k, r, pa).unwrap()
    }

    #[test]
    fn prob_requests_examples() {
        assert_eq!(prob_requests(&params(1, 1, 1, 1.0), 1).unwrap(), 1.0);
        assert!((prob_requests(&params(2, 2, 1, 1.0), 1).unwrap() - 0.5).abs() < 1e-15);
        // (15/16)^16
        let expect = (15.0f64 / 16.0).powi(16);
        assert!((prob_requests(&params(16, 16, 1, 1.0), 0).unwrap() - expect).abs() < 1e-14);
    }

    #[test]
    fn prob_requests_rejects_out_of_range() {
        assert_eq!(
            prob_requests(&params(4, 4, 1, 1.0), 5),
            Err(AnalyticError::RequestCountOutOfRange { q: 5, n: 4 })
        );
    }

    #[test]
    fn prob_requests_sums_to_one() {
        for (n, k, pa) in [(16, 16, 1.0), (64, 8, 0.3), (1024, 32, 0.9), (7, 3, 0.5)] {
            let p = params(n, k, 1, pa);
            let total: f64 = (0..=n).map(|q| prob_requests(&p, q).unwrap()).sum();
            assert!((total - 1.0).abs() < 1e-12, "n={n} k={k} pa={pa}: {total}");
        }
    }

    #[test]
    fn speedup_utilization_examples() {
        assert_eq!(speedup_utilization(1, 1), 1.0);
        assert!((speedup_utilization(2, 2) - 1.5).abs() < 1e-15);
        assert_eq!(speedup_utilization(4, 0), 0.0);
        assert_eq!(speedup_utilization(1, 0), 0.0); // 0^0 = 1 convention
    }

    #[test]
    fn speedup_utilization_monotone_and_bounded() {
        for r in 1..=16u32 {
            let mut prev = 0.0;
            for q in 0..=64u32 {
                let f = speedup_utilization(r, q);
                assert!(f >= prev - 1e-12);
                assert!(f <= (q.min(r) as f64) + 1e-12);
                prev = f;
            }
        }
    }

    #[test]
    fn correction_term_examples() {
        assert_eq!(correction_term(1, 0), 1.0);
        assert!((correction_term(2, 1) - 0.25).abs() < 1e-15);
        assert!((correction_term(2, 0) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn slave_utilization_trivial_and_reduction_to_flat() {
        assert!((expected_slave_utilization(&params(1, 1, 1, 1.0)).unwrap() - 1.0).abs() < 1e-15);
        // At r=1 the slave utilization reduces to the flat formula.
        let p = params(16, 16, 1, 1.0);
        let expect = 1.0 - (15.0f64 / 16.0).powi(16);
        assert!((expected_slave_utilization(&p).unwrap() - expect).abs() < 1e-14);
    }

    #[test]
    fn dsmc_identity_with_single() {
        for n in [4u32, 8, 16, 32, 64] {
            for r in 1..=8u32 {
                for pa in [0.25, 0.5, 1.0] {
                    let p = params(n, n, r, pa);
                    let eb = bank_utilization_single(&p).unwrap();
                    let ub = bank_utilization_dsmc(&p).unwrap();
                    assert!(
                        (ub - (1.0 - (1.0 - eb).powi(r as i32))).abs() < 1e-12,
                        "n={n} r={r} pa={pa}"
                    );
                    assert!((0.0..=1.0).contains(&eb));
                    assert!((0.0..=1.0).contains(&ub));
                }
            }
        }
    }

    #[test]
    fn single_equals_flat_at_r1() {
        for n in [2u32, 8, 16, 64] {
            for pa in [0.1, 0.6, 1.0] {
                let p = params(n, n, 1, pa);
                let a = bank_utilization_single(&p).unwrap();
                let b = bank_utilization_flat(&p);
                assert!((a - b).abs() < 1e-12, "n={n} pa={pa}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn flat_monotonicity() {
        // Nondecreasing in p_a, nonincreasing in r.
        let mut prev = 0.0;
        for i in 0..=10 {
            let u = bank_utilization_flat(&params(16, 16, 2, i as f64 / 10.0));
            assert!(u >= prev - 1e-15);
            prev = u;
        }
        let mut prev = 1.0;
        for r in 1..=16 {
            let u = bank_utilization_flat(&params(16, 16, r, 1.0));
            assert!(u <= prev + 1e-15);
            prev = u;
        }
    }

    #[test]
    fn flat_asymptote() {
        let u = bank_utilization_flat(&params(1_000_000, 1_000_000, 1, 1.0));
        assert!((u - 0.6321).abs() < 1e-3);
    }

    #[test]
    fn crossings_flat_examples() {
        assert_eq!(crossings_flat(2, 2), 1);
        assert_eq!(crossings_flat(4, 4), 36);
        assert_eq!(crossings_flat(16, 16), 14400);
        assert_eq!(crossings_flat(32, 32), 246016);
    }

    #[test]
    fn stage_block_crossing_examples() {
        assert_eq!(stage_block_crossings(2).unwrap(), (1, 0, 0));
        assert_eq!(stage_block_crossings(4).unwrap(), (4, 2, 2));
        assert_eq!(stage_block_crossings(8).unwrap(), (16, 12, 12));
        assert!(stage_block_crossings(3).is_err());
    }

    #[test]
    fn crossings_2ary_examples_and_stage_sum() {
        assert_eq!(crossings_2ary(4).unwrap(), 1);
        assert_eq!(crossings_2ary(8).unwrap(), 10);
        assert_eq!(crossings_2ary(16).unwrap(), 60);
        for n in [4u32, 8, 16, 32, 64] {
            // Stage i has n/2^(i+1) blocks of two 2^i-port crossbars.
            let stages = n.trailing_zeros();
            let mut total = 0u64;
            for i in 1..stages {
                let g = 1u32 << i;
                let (a, b, c) = stage_block_crossings(g).unwrap();
                total += (a + b + c) * (n as u64 / (1u64 << (i + 1)));
            }
            assert_eq!(crossings_2ary(n).unwrap(), total, "n={n}");
        }
    }

    #[test]
    fn speedup_crossings_examples() {
        assert_eq!(crossings_2ary_speedup(4).unwrap(), 1.0);
        assert_eq!(crossings_2ary_speedup(8).unwrap(), 34.0);
        assert_eq!(crossings_2ary_speedup(16).unwrap(), 228.0);
    }

    #[test]
    fn between_block_examples() {
        assert_eq!(crossings_between_blocks(8).unwrap(), 36.0);
        assert_eq!(crossings_between_blocks(16).unwrap(), 136.0);
        assert_eq!(crossings_between_blocks(32).unwrap(), 528.0);
    }

    #[test]
    fn reduction_ratio_forms_agree() {
        // R must equal flat(2n,2n) / (2*block + between), the unreduced form.
        for n in [8u32, 16, 32, 64] {
            let r = crossing_reduction_ratio(n).unwrap();
            let flat = crossings_flat(2 * n as u64, 2 * n as u64) as f64;
            let alt = flat
                / (2.0 * crossings_2ary_speedup(n).unwrap() + crossings_between_blocks(n).unwrap());
            assert!((r - alt).abs() / alt < 1e-9, "n={n}: {r} vs {alt}");
        }
    }

    #[test]
    fn reduction_ratio_at_16_ports() {
        assert!((crossing_reduction_ratio(16).unwrap() - 415.6).abs() < 0.1);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(ContentionParams::new(0, 1, 1, 1.0).is_err());
        assert!(ContentionParams::new(1, 1, 1, 1.5).is_err());
        assert!(crossings_2ary(6).is_err());
        assert!(crossings_between_blocks(4).is_err());
    }
}
