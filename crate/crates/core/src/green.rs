//! Green's function of `H_v − E` at certified energies, from unstable/stable solutions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::cocycle::{CocycleError, PotentialSource, RENORM_THRESHOLD};
use crate::lattice::{Interval, Sequence};
use crate::scalar::Real;
use crate::uhdetect::UHCertificate;

/// Minimum distance between `u(0)` and `s(0)` for the Wronskian normalization.
pub const MIN_DIRECTION_GAP: f64 = 1e-8;
/// Seed of the random test vectors drawn by [`verify_inverse`].
pub const VERIFY_SEED: u64 = 0x5eed;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GreenError {
    #[error("u(0) and s(0) are {distance:e} apart; Wronskian normalization impossible")]
    DegenerateDirections { distance: f64 },
    #[error("certificate window [{cert_lo}, {cert_hi}] does not cover [{lo}, {hi}] with margin {margin}")]
    WindowNotCovered { lo: i64, hi: i64, cert_lo: i64, cert_hi: i64, margin: i64 },
    #[error("certificate energy {cert} does not match requested energy {energy}")]
    EnergyMismatch { energy: f64, cert: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Cocycle(#[from] CocycleError),
}

/// A solution stored as `sign(n)·exp(log_abs(n))`, so that exponentially large and
/// small values coexist on long windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct LogSequence<T: Real> {
    pub first: i64,
    pub log_abs: Vec<T>,
    pub sign: Vec<i8>,
}

impl<T: Real> LogSequence<T> {
    pub fn support(&self) -> Interval {
        Interval::new(self.first, self.first + self.log_abs.len() as i64 - 1)
    }

    fn idx(&self, n: i64) -> usize {
        debug_assert!(self.support().contains(n), "site {n} outside {:?}", self.support());
        (n - self.first) as usize
    }

    pub fn log_abs_at(&self, n: i64) -> T {
        self.log_abs[self.idx(n)]
    }

    pub fn sign_at(&self, n: i64) -> i8 {
        self.sign[self.idx(n)]
    }

    /// The value itself (may overflow far from the decaying end).
    pub fn value(&self, n: i64) -> T {
        let i = self.idx(n);
        T::int(self.sign[i] as i64) * self.log_abs[i].exp()
    }

    fn shift_log(&mut self, by: T, flip: bool) {
        for (l, s) in self.log_abs.iter_mut().zip(self.sign.iter_mut()) {
            *l = *l + by;
            if flip {
                *s = -*s;
            }
        }
    }
}

/// `a(m)·b(n)` for log-stored sequences.
fn mul_at<T: Real>(a: &LogSequence<T>, m: i64, b: &LogSequence<T>, n: i64) -> T {
    let s = a.sign_at(m) as i64 * b.sign_at(n) as i64;
    if s == 0 {
        return T::zero();
    }
    T::int(s) * (a.log_abs_at(m) + b.log_abs_at(n)).exp()
}

/// Runs the three-term recurrence from the pair `(x_start, x_{start∓1}) = init` across `range`.
fn grow<T: Real, S: PotentialSource<T> + ?Sized>(
    src: &S,
    energy: T,
    init: [T; 2],
    range: Interval,
    forward: bool,
) -> Result<LogSequence<T>, CocycleError> {
    let len = range.len();
    let mut log_abs = vec![T::zero(); len];
    let mut sign = vec![0i8; len];
    let threshold = T::lit(RENORM_THRESHOLD);
    let mut record = |n: i64, x: T, scale: T| {
        let i = (n - range.lo) as usize;
        log_abs[i] = x.abs().ln() + scale;
        sign[i] = if x > T::zero() {
            1
        } else if x < T::zero() {
            -1
        } else {
            0
        };
    };
    let (mut cur, mut prev) = (init[0], init[1]);
    let mut scale = T::zero();
    if forward {
        // cur = x_n, prev = x_{n−1}; start at n = lo + 1.
        let mut n = range.lo + 1;
        record(n - 1, prev, scale);
        record(n, cur, scale);
        while n < range.hi {
            let next = (energy - src.sample(n)?) * cur - prev;
            prev = cur;
            cur = next;
            n += 1;
            let big = cur.abs().max(prev.abs());
            if big > threshold {
                cur = cur / big;
                prev = prev / big;
                scale = scale + big.ln();
            }
            record(n, cur, scale);
        }
    } else {
        // cur = x_n, prev = x_{n+1} (the later site); start at n = hi − 1.
        let mut n = range.hi - 1;
        record(n + 1, init[0], scale);
        record(n, init[1], scale);
        cur = init[1];
        prev = init[0];
        while n > range.lo {
            let next = (energy - src.sample(n)?) * cur - prev;
            prev = cur;
            cur = next;
            n -= 1;
            let big = cur.abs().max(prev.abs());
            if big > threshold {
                cur = cur / big;
                prev = prev / big;
                scale = scale + big.ln();
            }
            record(n, cur, scale);
        }
    }
    Ok(LogSequence { first: range.lo, log_abs, sign })
}

/// Kernel `G(p,q) = u^u(min(p,q))·u^s(max(p,q))` of `(H_v − E)⁻¹` on a window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct GreenKernel<T: Real> {
    pub energy: T,
    pub window: Interval,
    /// Site `a` where `det[[u^s(a), u^u(a)], [u^s(a−1), u^u(a−1)]] = 1` is imposed.
    pub anchor: i64,
    /// Stored on `[window.lo − 1, window.hi]`.
    pub u_unstable: LogSequence<T>,
    pub u_stable: LogSequence<T>,
    /// The imposed normalization (1).
    pub wronskian: T,
    /// `max_n |W(n) − 1|` over the window.
    pub wronskian_drift: T,
    pub decay_rate: T,
    pub decay_const: T,
    /// Largest deviation (log10 units) of the decay envelope from the fitted line.
    pub fit_max_residual: T,
}

impl<T: Real> GreenKernel<T> {
    pub fn g(&self, p: i64, q: i64) -> T {
        let (lo, hi) = if p <= q { (p, q) } else { (q, p) };
        mul_at(&self.u_unstable, lo, &self.u_stable, hi)
    }

    fn log_abs_g(&self, p: i64, q: i64) -> T {
        let (lo, hi) = if p <= q { (p, q) } else { (q, p) };
        if self.u_unstable.sign_at(lo) == 0 || self.u_stable.sign_at(hi) == 0 {
            return T::neg_infinity();
        }
        self.u_unstable.log_abs_at(lo) + self.u_stable.log_abs_at(hi)
    }

    /// `det[[u^s(n), u^u(n)], [u^s(n−1), u^u(n−1)]]`.
    pub fn wronskian_at(&self, n: i64) -> T {
        mul_at(&self.u_stable, n, &self.u_unstable, n - 1) - mul_at(&self.u_unstable, n, &self.u_stable, n - 1)
    }

    /// CSV with a `# {json}` header line, then `p,q,G` rows for `|p − q| ≤ radius`.
    pub fn to_csv(&self, radius: i64) -> String {
        let header = json!({
            "energy": self.energy.to_f64_lossy(),
            "decay_rate": self.decay_rate.to_f64_lossy(),
            "decay_const": self.decay_const.to_f64_lossy(),
            "wronskian_drift": self.wronskian_drift.to_f64_lossy(),
            "window": [self.window.lo, self.window.hi],
            "radius": radius,
        });
        let mut out = format!("# {header}\np,q,G\n");
        for p in self.window.iter() {
            let q_lo = (p - radius).max(self.window.lo);
            let q_hi = (p + radius).min(self.window.hi);
            for q in q_lo..=q_hi {
                out.push_str(&format!("{p},{q},{}\n", self.g(p, q)));
            }
        }
        out
    }
}

/// Builds the kernel on `window` from the certificate's sections.
///
/// `u^u` is shot forward from the left edge along `u(window.lo)` and `u^s` backward
/// from the right edge along `s(window.hi)`; both therefore grow in the direction of
/// integration. The pair is scaled once so that the Wronskian at the anchor (site 0
/// when inside the window) equals 1; elsewhere it is only monitored.
pub fn build_kernel<T: Real, S: PotentialSource<T> + ?Sized>(
    src: &S,
    energy: T,
    cert: &UHCertificate<T>,
    window: Interval,
) -> Result<GreenKernel<T>, GreenError> {
    if window.len() < 3 {
        return Err(GreenError::InvalidArgument("window must have at least 3 sites".into()));
    }
    let margin = cert.depth;
    if !cert.window.expand(-margin).contains_interval(&window) {
        return Err(GreenError::WindowNotCovered {
            lo: window.lo,
            hi: window.hi,
            cert_lo: cert.window.lo,
            cert_hi: cert.window.hi,
            margin,
        });
    }
    let tol = T::tol(1e-12) * energy.abs().max(T::one());
    if (cert.energy - energy).abs() > tol {
        return Err(GreenError::EnergyMismatch { energy: energy.to_f64_lossy(), cert: cert.energy.to_f64_lossy() });
    }
    let anchor = if window.contains(0) && window.contains(-1) { 0 } else { window.lo + 1 };
    let at_anchor = cert.sections_at(anchor).expect("anchor inside the certificate window");
    let distance = at_anchor.u.distance(&at_anchor.s);
    if !(distance >= T::lit(MIN_DIRECTION_GAP)) {
        return Err(GreenError::DegenerateDirections { distance: distance.to_f64_lossy() });
    }

    let stored = Interval::new(window.lo - 1, window.hi);
    let u_dir = cert.sections_at(window.lo).expect("window covered").u.unit();
    let s_dir = cert.sections_at(window.hi).expect("window covered").s.unit();
    // Projective points are (x_n, x_{n−1}) pairs.
    let mut uu = grow(src, energy, u_dir, stored, true)?;
    let us = grow(src, energy, s_dir, stored, false)?;

    let w0 = mul_at(&us, anchor, &uu, anchor - 1) - mul_at(&uu, anchor, &us, anchor - 1);
    if !(w0.abs() > T::zero()) || !w0.is_finite() {
        return Err(GreenError::DegenerateDirections { distance: distance.to_f64_lossy() });
    }
    uu.shift_log(-w0.abs().ln(), w0 < T::zero());

    let mut kernel = GreenKernel {
        energy,
        window,
        anchor,
        u_unstable: uu,
        u_stable: us,
        wronskian: T::one(),
        wronskian_drift: T::zero(),
        decay_rate: T::zero(),
        decay_const: T::zero(),
        fit_max_residual: T::zero(),
    };
    kernel.wronskian_drift = window
        .iter()
        .fold(T::zero(), |m, n| m.max((kernel.wronskian_at(n) - T::one()).abs()));
    fit_decay(&mut kernel);
    Ok(kernel)
}

/// Least-squares fit of `log max_{|p−q|=d} |G(p,q)|` against `d` over the middle half,
/// then the smallest `C` with `|G(p,q)| ≤ C ρ^{|p−q|}` on the whole window.
fn fit_decay<T: Real>(kernel: &mut GreenKernel<T>) {
    let mid = kernel.window.middle_fraction(1, 2);
    let span = mid.len();
    let mut envelope = vec![T::neg_infinity(); span];
    for p in mid.iter() {
        for q in p..=mid.hi {
            let d = (q - p) as usize;
            envelope[d] = envelope[d].max(kernel.log_abs_g(p, q));
        }
    }
    let points: Vec<(T, T)> = envelope
        .iter()
        .enumerate()
        .filter(|(_, y)| y.is_finite())
        .map(|(d, &y)| (T::int(d as i64), y))
        .collect();
    let slope = if points.len() >= 2 {
        let n = T::int(points.len() as i64);
        let mx = points.iter().fold(T::zero(), |a, p| a + p.0) / n;
        let my = points.iter().fold(T::zero(), |a, p| a + p.1) / n;
        let sxy = points.iter().fold(T::zero(), |a, p| a + (p.0 - mx) * (p.1 - my));
        let sxx = points.iter().fold(T::zero(), |a, p| a + (p.0 - mx) * (p.0 - mx));
        let slope = sxy / sxx;
        let intercept = my - slope * mx;
        kernel.fit_max_residual = points
            .iter()
            .fold(T::zero(), |m, p| m.max((p.1 - intercept - slope * p.0).abs()))
            / T::LN_10();
        slope
    } else {
        T::zero()
    };
    kernel.decay_rate = slope.exp();
    let log_rate = slope;
    let mut log_c = T::neg_infinity();
    for p in kernel.window.iter() {
        for q in p..=kernel.window.hi {
            log_c = log_c.max(kernel.log_abs_g(p, q) - T::int(q - p) * log_rate);
        }
    }
    kernel.decay_const = log_c.exp();
}

/// `(Su)_n = Σ_p G(p,n) u_p` for `n` in the window.
pub fn apply<T: Real>(kernel: &GreenKernel<T>, u: &Sequence<T>) -> Result<Sequence<T>, GreenError> {
    let inner = kernel.window.expand(-1);
    let support = u.support();
    if !support.is_empty() && !inner.contains_interval(&support) {
        return Err(GreenError::InvalidArgument(format!(
            "vector support [{}, {}] must lie inside the window interior [{}, {}]",
            support.lo, support.hi, inner.lo, inner.hi
        )));
    }
    let values = kernel
        .window
        .iter()
        .map(|n| {
            support
                .iter()
                .fold(T::zero(), |acc, p| {
                    let x = u.get(p);
                    if x == T::zero() {
                        acc
                    } else {
                        acc + kernel.g(p, n) * x
                    }
                })
        })
        .collect();
    Ok(Sequence::new(kernel.window.lo, values))
}

/// Max over `trials` random unit vectors on the middle third of `‖(H_v − E)Su − u‖`
/// restricted to the middle third.
pub fn verify_inverse<T: Real, S: PotentialSource<T> + ?Sized>(
    src: &S,
    energy: T,
    kernel: &GreenKernel<T>,
    trials: usize,
) -> Result<T, GreenError> {
    verify_inverse_seeded(src, energy, kernel, trials, VERIFY_SEED)
}

pub fn verify_inverse_seeded<T: Real, S: PotentialSource<T> + ?Sized>(
    src: &S,
    energy: T,
    kernel: &GreenKernel<T>,
    trials: usize,
    seed: u64,
) -> Result<T, GreenError> {
    let third = kernel.window.middle_fraction(1, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = T::zero();
    for _ in 0..trials {
        let raw: Vec<T> = third.iter().map(|_| T::lit(rng.gen_range(-1.0..1.0))).collect();
        let u = Sequence::new(third.lo, raw);
        let u = u.scaled(u.norm().recip());
        let su = apply(kernel, &u)?;
        let mut r = T::zero();
        for n in third.iter() {
            let h = su.get(n + 1) + su.get(n - 1) + (src.sample(n)? - energy) * su.get(n);
            r = r.hypot(h - u.get(n));
        }
        worst = worst.max(r);
    }
    Ok(worst)
}

/// Schur bound `max_n Σ_p |G(p,n)|` on the window.
pub fn operator_norm_bound<T: Real>(kernel: &GreenKernel<T>) -> T {
    kernel.window.iter().fold(T::zero(), |m, n| {
        m.max(kernel.window.iter().fold(T::zero(), |acc, p| acc + kernel.g(p, n).abs()))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cocycle::{Descriptor, FnPotential};
    use crate::uhdetect::certify;

    fn constant(a: f64) -> FnPotential<f64, impl Fn(i64) -> f64 + Send + Sync> {
        FnPotential::new(move |_| a, a.abs(), Descriptor::new("constant", json!({ "a": a })))
    }

    fn kernel_for(energy: f64, half: i64, depth: i64) -> GreenKernel<f64> {
        let src = constant(0.0);
        let cert = certify(&src, energy, Interval::symmetric(half + depth), depth).unwrap().unwrap();
        build_kernel(&src, energy, &cert, Interval::symmetric(half)).unwrap()
    }

    #[test]
    fn free_kernel_at_three() {
        let k = kernel_for(3.0, 60, 32);
        let expect = -0.447_213_595_499_957_9;
        for n in -30..=30 {
            assert!((k.g(n, n) - expect).abs() < 1e-10, "n={n} {}", k.g(n, n));
        }
        let z = 0.381_966_011_250_105_15;
        assert!(((k.decay_rate - z) / z).abs() < 1e-6, "{}", k.decay_rate);
        assert!(k.wronskian_drift < 1e-10);
        assert_eq!(k.wronskian, 1.0);
        assert!(k.fit_max_residual < 0.5);
        assert!((k.g(3, 7) - expect * z.powi(4)).abs() < 1e-12);
        assert!((operator_norm_bound(&k) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn free_kernel_at_ten() {
        let k = kernel_for(10.0, 40, 16);
        assert!((k.g(0, 0).abs() - 0.102_062_072_615_965_75).abs() < 1e-10);
        let bound = operator_norm_bound(&k);
        assert!((bound - 0.125).abs() < 0.0125, "{bound}");
    }

    #[test]
    fn apply_examples() {
        let k = kernel_for(3.0, 30, 16);
        let zero = apply(&k, &Sequence::new(-3, vec![0.0; 7])).unwrap();
        assert!(zero.values.iter().all(|&x| x == 0.0));
        let d = apply(&k, &Sequence::delta(0)).unwrap();
        assert!((d.get(0) + 0.447_213_595_499_957_9).abs() < 1e-10);
        let u = Sequence::new(-4, vec![0.5, -1.0, 2.0, 0.0, 0.25]);
        let w = Sequence::new(-2, vec![1.5, 0.5, -0.5, 1.0]);
        let lhs = apply(&k, &u.combine(2.0, &w, -3.0)).unwrap();
        let rhs = apply(&k, &u).unwrap().combine(2.0, &apply(&k, &w).unwrap(), -3.0);
        for n in k.window.iter() {
            assert!((lhs.get(n) - rhs.get(n)).abs() < 1e-10);
        }
        assert!(apply(&k, &Sequence::delta(30)).is_err());
    }

    #[test]
    fn inverse_identity() {
        let src = constant(0.0);
        let k = kernel_for(3.0, 60, 32);
        assert!(verify_inverse(&src, 3.0, &k, 20).unwrap() <= 1e-8);
        // A kernel built for E′ used at E: (H − E)S′ = I + (E′ − E)S′.
        let r = verify_inverse(&src, 3.2, &k, 5).unwrap();
        assert!(r >= 0.2 / 2.0, "{r}");
    }

    #[test]
    fn symmetry_and_decay_bound() {
        let k = kernel_for(2.6, 50, 32);
        for p in k.window.iter().step_by(7) {
            for q in k.window.iter().step_by(5) {
                assert_eq!(k.g(p, q), k.g(q, p));
                let bound = k.decay_const * k.decay_rate.powi((p - q).abs() as i32);
                assert!(k.g(p, q).abs() <= bound * (1.0 + 1e-12));
            }
        }
        assert!(k.decay_rate < 1.0);
    }

    #[test]
    fn build_errors() {
        let src = constant(0.0);
        let cert = certify(&src, 3.0, Interval::symmetric(40), 16).unwrap().unwrap();
        assert!(matches!(
            build_kernel(&src, 3.0, &cert, Interval::symmetric(30)),
            Err(GreenError::WindowNotCovered { .. })
        ));
        assert!(matches!(
            build_kernel(&src, 3.1, &cert, Interval::symmetric(10)),
            Err(GreenError::EnergyMismatch { .. })
        ));
        let mut squashed = cert.clone();
        for p in squashed.sections.iter_mut() {
            p.s = p.u;
        }
        assert!(matches!(
            build_kernel(&src, 3.0, &squashed, Interval::symmetric(10)),
            Err(GreenError::DegenerateDirections { .. })
        ));
    }

    #[test]
    fn csv_export() {
        let k = kernel_for(3.0, 5, 16);
        let csv = k.to_csv(1);
        let mut lines = csv.lines();
        let header: serde_json::Value = serde_json::from_str(lines.next().unwrap().trim_start_matches("# ")).unwrap();
        assert_eq!(header["energy"], 3.0);
        assert!(header["wronskian_drift"].as_f64().unwrap() < 1e-10);
        assert_eq!(lines.next(), Some("p,q,G"));
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), 11 + 2 * 10);
        let first: Vec<&str> = rows[0].split(',').collect();
        assert_eq!((first[0], first[1]), ("-5", "-5"));
        assert_eq!(first[2].parse::<f64>().unwrap(), k.g(-5, -5));
    }
}
