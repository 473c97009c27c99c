//! One-dimensional quadrature: adaptive Gauss-Kronrod on finite intervals,
//! a rational map for semi-infinite ranges and a panel method for
//! oscillatory semi-infinite integrals.

use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the truncation point of a semi-infinite oscillatory integral is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KMaxPolicy {
    /// Smallest `k` whose analytic majorant tail is below `abs_tol / 10`.
    Majorant,
    /// Hard cutoff; the majorant tail beyond it is added to the error bound.
    Fixed(f64),
}

/// Adaptive 21-point Gauss-Kronrod applied on every panel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PanelRule {
    pub max_subdivisions: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub k_max_policy: KMaxPolicy,
    pub panel_rule: PanelRule,
    /// Split oscillatory integrals at the zeros of the oscillating factor and
    /// extrapolate the panel sums. When false the range is mapped to `[0, 1]`
    /// and integrated adaptively (slow, only for cross-checks).
    pub oscillation_splitting: bool,
    pub max_panels: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            abs_tol: 1e-11,
            rel_tol: 1e-10,
            k_max_policy: KMaxPolicy::Majorant,
            panel_rule: PanelRule {
                max_subdivisions: 200,
            },
            oscillation_splitting: true,
            max_panels: 5000,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(Error::invalid("quadrature tolerances must be positive"));
        }
        if let KMaxPolicy::Fixed(k) = self.k_max_policy {
            if !(k.is_finite() && k > 0.0) {
                return Err(Error::invalid("fixed k_max must be positive"));
            }
        }
        if self.panel_rule.max_subdivisions == 0 || self.max_panels == 0 {
            return Err(Error::invalid(
                "subdivision and panel limits must be positive",
            ));
        }
        Ok(())
    }

    fn tolerance(&self, value: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * value.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_292_457_000,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// 10-point Gauss weights for XGK[1], XGK[3], ..., XGK[9]
#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Single Gauss-Kronrod 21 application with the QUADPACK error heuristic.
pub fn gk21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut resk = fc * WGK[10];
    let mut resg = 0.0;
    let mut resabs = resk.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        resk += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            resg += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = resk * 0.5;
    let mut resasc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        resasc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let result = resk * half;
    let resabs = resabs * half.abs();
    let resasc = resasc * half.abs();
    let mut err = ((resk - resg) * half).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * resabs);
    }
    (result, err)
}

#[derive(PartialEq)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive bisection with GK21 on `[a, b]`.
///
/// Returns the best estimate even when the subdivision limit is hit; callers
/// compare `error` against their tolerance.
pub fn adaptive<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_subdivisions: usize,
) -> QuadResult {
    if a == b {
        return QuadResult {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        };
    }
    let (v, e) = gk21(f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Segment {
        a,
        b,
        value: v,
        error: e,
    });
    let mut total = v;
    let mut total_err = e;
    let mut evaluations = 21;
    let mut splits = 0;
    while total_err > abs_tol.max(rel_tol * total.abs()) && splits < max_subdivisions {
        let worst = match heap.pop() {
            Some(s) => s,
            None => break,
        };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a.min(worst.b) || mid >= worst.a.max(worst.b) {
            heap.push(worst);
            break;
        }
        let (v1, e1) = gk21(f, worst.a, mid);
        let (v2, e2) = gk21(f, mid, worst.b);
        evaluations += 42;
        splits += 1;
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Segment {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
    }
    // re-sum to shed accumulated rounding from the running updates
    let (value, error) = heap
        .iter()
        .fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error));
    QuadResult {
        value,
        error,
        evaluations,
    }
}

/// `int_a^inf f(k) dk` through `k = a + scale (1 - u) / u`.
pub fn semi_infinite<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    scale: f64,
    cfg: &QuadratureConfig,
) -> QuadResult {
    let g = |u: f64| {
        if u <= 0.0 {
            return 0.0;
        }
        let k = a + scale * (1.0 - u) / u;
        let v = f(k) * scale / (u * u);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    adaptive(
        &g,
        0.0,
        1.0,
        cfg.abs_tol,
        cfg.rel_tol,
        cfg.panel_rule.max_subdivisions,
    )
}

/// Majorant `coef * k^power * exp(-eps k^2 - tau k)` of an integrand's
/// modulus, valid for every `k` above the integration start.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Envelope {
    pub coef: f64,
    pub power: f64,
    pub eps: f64,
    pub tau: f64,
}

impl Envelope {
    pub fn at(&self, k: f64) -> f64 {
        self.coef * k.powf(self.power) * (-self.eps * k * k - self.tau * k).exp()
    }

    /// Upper bound of `int_K^inf` of the majorant; infinite when no bound applies.
    pub fn tail(&self, k: f64) -> f64 {
        let m = self.at(k);
        if m == 0.0 {
            return 0.0;
        }
        let mut best = f64::INFINITY;
        // log-concave part: eps k^2 + tau k - max(power, 0) ln k
        let rate = 2.0 * self.eps * k + self.tau - self.power.max(0.0) / k;
        if rate > 0.0 && self.power >= 0.0 {
            best = best.min(m / rate);
        }
        if self.power < 0.0 {
            let exp_rate = 2.0 * self.eps * k + self.tau;
            if exp_rate > 0.0 {
                best = best.min(m / exp_rate);
            }
            if self.power < -1.0 {
                best = best.min(m * k / (-self.power - 1.0));
            }
        }
        best
    }

    /// Smallest doubling point beyond `start` whose tail is below `target`.
    pub fn truncation_point(&self, start: f64, target: f64) -> Option<f64> {
        let mut k = start.max(1.0);
        for _ in 0..200 {
            if self.tail(k) <= target {
                return Some(k);
            }
            k *= 1.5;
            if k > 1e12 {
                break;
            }
        }
        None
    }
}

/// Wynn epsilon algorithm on a growing sequence of partial sums, kept as a
/// single counter-diagonal so each new term costs O(n).
#[derive(Debug, Default, Clone)]
pub struct WynnEpsilon {
    diag: Vec<f64>,
}

impl WynnEpsilon {
    pub fn new() -> Self {
        Self::default()
    }

    /// Push the next partial sum and return the current extrapolated limit.
    pub fn push(&mut self, s: f64) -> f64 {
        self.diag.push(s);
        let n = self.diag.len() - 1;
        if n == 0 {
            return s;
        }
        let mut aux2 = 0.0;
        for j in (1..=n).rev() {
            let aux1 = aux2;
            aux2 = self.diag[j - 1];
            let diff = self.diag[j] - aux2;
            self.diag[j - 1] = if diff == 0.0 {
                f64::MAX
            } else {
                aux1 + 1.0 / diff
            };
        }
        let est = if n.is_multiple_of(2) {
            self.diag[0]
        } else {
            self.diag[1]
        };
        if est.is_finite() && est.abs() < 1e300 {
            est
        } else {
            s
        }
    }
}

/// `int_start^inf f(k) dk` for an integrand oscillating with zeros at
/// `zero(n)`, n = 1, 2, ... (increasing).
///
/// Panels run between consecutive zeros. The loop stops once the majorant
/// tail beyond the current panel end is below tolerance, or once the Wynn
/// extrapolation of the panel partial sums has settled.
pub fn oscillatory<F, Z>(
    f: &F,
    start: f64,
    zero: Z,
    envelope: Envelope,
    cfg: &QuadratureConfig,
    what: &str,
) -> Result<QuadResult>
where
    F: Fn(f64) -> f64,
    Z: Fn(usize) -> f64,
{
    if !cfg.oscillation_splitting {
        let scale = 1.0 / (envelope.tau + envelope.eps.sqrt()).clamp(1e-3, 1.0);
        let res = semi_infinite(f, start, scale, cfg);
        return check(res, cfg, what);
    }

    let (k_stop, extra_tail) = match cfg.k_max_policy {
        KMaxPolicy::Majorant => (
            envelope
                .truncation_point(start, 0.1 * cfg.abs_tol)
                .unwrap_or(f64::INFINITY),
            0.0,
        ),
        KMaxPolicy::Fixed(k) => (k, envelope.tail(k.max(start))),
    };

    let panel_tol = 0.01 * cfg.abs_tol;
    let mut n = 1;
    while zero(n) <= start {
        n += 1;
    }
    let mut lo = start;
    let mut sum = 0.0;
    let mut quad_err = 0.0;
    let mut evaluations = 0;
    let mut wynn = WynnEpsilon::new();
    let mut history: Vec<f64> = Vec::new();
    let mut panels = 0;
    loop {
        let hi = zero(n).min(k_stop);
        if hi > lo {
            let r = adaptive(f, lo, hi, panel_tol, 1e-13, cfg.panel_rule.max_subdivisions);
            sum += r.value;
            quad_err += r.error;
            evaluations += r.evaluations;
            panels += 1;
        }
        if hi >= k_stop {
            let error = quad_err + extra_tail + 0.1 * cfg.abs_tol;
            return check(
                QuadResult {
                    value: sum,
                    error,
                    evaluations,
                },
                cfg,
                what,
            );
        }
        let tail = envelope.tail(hi);
        if tail <= 0.1 * cfg.tolerance(sum) {
            return check(
                QuadResult {
                    value: sum,
                    error: quad_err + tail,
                    evaluations,
                },
                cfg,
                what,
            );
        }
        let est = wynn.push(sum);
        history.push(est);
        let m = history.len();
        if m >= 6 {
            let d1 = (history[m - 1] - history[m - 2]).abs();
            let d2 = (history[m - 2] - history[m - 3]).abs();
            let err = d1 + d2;
            if err <= cfg.tolerance(est) {
                return Ok(QuadResult {
                    value: est,
                    error: err + quad_err,
                    evaluations,
                });
            }
        }
        if panels >= cfg.max_panels {
            let err = if m >= 2 {
                (history[m - 1] - history[m - 2]).abs()
            } else {
                f64::INFINITY
            };
            return Err(Error::Quadrature {
                what: what.to_string(),
                estimate: est,
                error: err,
            });
        }
        lo = hi;
        n += 1;
    }
}

fn check(res: QuadResult, cfg: &QuadratureConfig, what: &str) -> Result<QuadResult> {
    // allow a modest slack: the GK error heuristic is conservative
    if res.value.is_finite() && res.error <= 10.0 * cfg.tolerance(res.value) {
        Ok(res)
    } else {
        Err(Error::Quadrature {
            what: what.to_string(),
            estimate: res.value,
            error: res.error,
        })
    }
}

/// Non-oscillatory `int_start^inf f`, with the map scale taken from the envelope.
pub fn monotone_tail<F: Fn(f64) -> f64>(
    f: &F,
    start: f64,
    envelope: Envelope,
    cfg: &QuadratureConfig,
    what: &str,
) -> Result<QuadResult> {
    // decay length of the majorant
    let mut scale = f64::INFINITY;
    if envelope.tau > 0.0 {
        scale = scale.min(1.0 / envelope.tau);
    }
    if envelope.eps > 0.0 {
        scale = scale.min(1.0 / envelope.eps.sqrt());
    }
    if !scale.is_finite() {
        scale = start.max(1.0);
    }
    let scale = scale.clamp(1e-3, 1e6);
    // split at a few decay lengths so the map sees a smooth remainder
    let split = start + scale;
    let head = adaptive(
        f,
        start,
        split,
        0.5 * cfg.abs_tol,
        cfg.rel_tol,
        cfg.panel_rule.max_subdivisions,
    );
    let tail = semi_infinite(f, split, scale, cfg);
    check(
        QuadResult {
            value: head.value + tail.value,
            error: head.error + tail.error,
            evaluations: head.evaluations + tail.evaluations,
        },
        cfg,
        what,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn gk21_is_exact_for_polynomials() {
        let (v, e) = gk21(&|x: f64| x.powi(5) - 3.0 * x * x + 1.0, -1.0, 2.0);
        let exact = (64.0 - 1.0) / 6.0 - (8.0 + 1.0) + 3.0;
        assert!((v - exact).abs() < 1e-13);
        assert!(e < 1e-12);
    }

    #[test]
    fn adaptive_handles_endpoint_singularity() {
        let r = adaptive(&|x: f64| 1.0 / x.sqrt(), 0.0, 1.0, 1e-12, 1e-12, 500);
        assert!((r.value - 2.0).abs() < 1e-10, "{}", r.value);
    }

    #[test]
    fn semi_infinite_algebraic_and_exponential() {
        let cfg = QuadratureConfig::default();
        let r = semi_infinite(&|k: f64| 1.0 / (k * k), 1.0, 1.0, &cfg);
        assert!((r.value - 1.0).abs() < 1e-11);
        let r = semi_infinite(&|k: f64| (-3.0 * k).exp(), 0.0, 0.3, &cfg);
        assert!((r.value - 1.0 / 3.0).abs() < 1e-11);
    }

    #[test]
    fn wynn_accelerates_alternating_series() {
        // ln 2 = 1 - 1/2 + 1/3 - ...
        let mut w = WynnEpsilon::new();
        let mut s = 0.0;
        let mut est = 0.0;
        for k in 1..=20 {
            s += if k % 2 == 1 { 1.0 } else { -1.0 } / k as f64;
            est = w.push(s);
        }
        assert!((est - 2f64.ln()).abs() < 1e-12, "{est}");
    }

    #[test]
    fn oscillatory_sine_over_k() {
        // int_1^inf sin(k)/k dk = pi/2 - Si(1)
        let cfg = QuadratureConfig::default();
        let env = Envelope {
            coef: 1.0,
            power: -1.0,
            eps: 0.0,
            tau: 0.0,
        };
        let r = oscillatory(
            &|k: f64| k.sin() / k,
            1.0,
            |n| n as f64 * PI,
            env,
            &cfg,
            "t",
        )
        .unwrap();
        let want = PI / 2.0 - crate::special::sine_integral(1.0);
        assert!((r.value - want).abs() < 1e-10, "{} vs {}", r.value, want);
    }

    #[test]
    fn oscillatory_damped_closed_form() {
        // int_lam^inf e^{-k tau} sin(k r) dk
        let cfg = QuadratureConfig::default();
        for &(tau, r) in &[(1e-3, 10.0), (0.5, 0.01), (2.0, 3.0), (1e-2, 1e-3)] {
            let lam = 1.0;
            let env = Envelope {
                coef: 1.0,
                power: 0.0,
                eps: 0.0,
                tau,
            };
            let got = oscillatory(
                &|k: f64| (-k * tau).exp() * (k * r).sin(),
                lam,
                |n| n as f64 * PI / r,
                env,
                &cfg,
                "t",
            )
            .unwrap()
            .value;
            let want = (-lam * tau).exp() * (tau * (lam * r).sin() + r * (lam * r).cos())
                / (tau * tau + r * r);
            assert!(
                (got - want).abs() < 1e-9 * want.abs().max(1.0),
                "tau={tau} r={r}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn envelope_tail_bounds_are_upper_bounds() {
        let envs = [
            Envelope {
                coef: 2.0,
                power: -2.0,
                eps: 0.0,
                tau: 0.0,
            },
            Envelope {
                coef: 1.0,
                power: 1.0,
                eps: 0.3,
                tau: 0.0,
            },
            Envelope {
                coef: 1.0,
                power: -0.5,
                eps: 0.0,
                tau: 0.7,
            },
            Envelope {
                coef: 1.0,
                power: 2.0,
                eps: 0.01,
                tau: 0.1,
            },
        ];
        let cfg = QuadratureConfig::default();
        for env in envs {
            for &k in &[2.0, 5.0, 30.0] {
                let exact = semi_infinite(&|x| env.at(x), k, 1.0, &cfg).value;
                let bound = env.tail(k);
                assert!(
                    bound >= exact * (1.0 - 1e-9),
                    "{env:?} at {k}: {bound} < {exact}"
                );
            }
        }
    }

    #[test]
    fn nonconvergence_is_reported() {
        let cfg = QuadratureConfig {
            max_panels: 5,
            ..Default::default()
        };
        let env = Envelope {
            coef: 1.0,
            power: 0.5,
            eps: 0.0,
            tau: 0.0,
        };
        // growing amplitude: no limit
        let r = oscillatory(
            &|k: f64| k.sqrt() * k.sin(),
            0.5,
            |n| n as f64 * PI,
            env,
            &cfg,
            "grow",
        );
        assert!(matches!(r, Err(Error::Quadrature { .. })));
    }
}
