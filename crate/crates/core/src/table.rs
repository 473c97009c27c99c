//! Tabulated kernels for the Monte Carlo inner loops.
//!
//! Values are stored on a tensor grid in the coordinates `u = ln r + r / s_r`
//! and `v = ln tau + tau / s_tau`: logarithmic near the origin, linear where
//! the kernels oscillate in `r` or decay exponentially in `tau`. Lookups use
//! four-point Lagrange interpolation in each direction. Below the smallest
//! radius node the table switches to the analytic small-`r` law of the
//! kernel; outside the hull it falls back to direct quadrature.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{self, KernelId};
use crate::params::{Model, ModelParams};
use crate::quad::QuadratureConfig;

pub const TABLE_FORMAT_VERSION: u32 = 1;

/// Monotone map `x -> ln x + x / scale` used for both grid axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogLinMap {
    pub scale: f64,
}

impl LogLinMap {
    #[inline]
    pub fn forward(&self, x: f64) -> f64 {
        x.ln() + x / self.scale
    }

    pub fn inverse(&self, u: f64) -> f64 {
        // Newton on ln x + x/s = u, started from whichever term dominates
        let mut x = if u < 1.0 {
            u.exp()
        } else {
            (u * self.scale).min(u.exp())
        };
        for _ in 0..100 {
            let g = x.ln() + x / self.scale - u;
            let step = g / (1.0 / x + 1.0 / self.scale);
            let next = (x - step).max(0.1 * x);
            if (next - x).abs() <= 1e-16 * x {
                return next;
            }
            x = next;
        }
        x
    }
}

/// Grid extent, resolution and validation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TableSpec {
    pub n_r: usize,
    pub n_tau: usize,
    pub r_lo: f64,
    pub r_hi: f64,
    pub tau_lo: f64,
    pub tau_hi: f64,
    /// Linear length scale of the radius axis; `None` uses `1 / lambda` (or 1).
    pub r_scale: Option<f64>,
    pub tau_scale: Option<f64>,
    pub validation_probes: usize,
    pub validation_seed: u64,
    /// Largest acceptable measured interpolation error (relative, see `floor`).
    pub max_rel_error: f64,
    /// Errors are measured relative to `max(|direct|, floor * row_max)`, where
    /// `row_max` is the largest `|value|` over radii at the probe's time gap.
    pub floor: f64,
}

impl Default for TableSpec {
    fn default() -> Self {
        TableSpec {
            n_r: 256,
            n_tau: 256,
            r_lo: 1e-5,
            r_hi: 20.0,
            tau_lo: 1e-3,
            tau_hi: 4.0,
            r_scale: None,
            tau_scale: None,
            validation_probes: 1000,
            validation_seed: 0x7ab1e,
            max_rel_error: 1e-4,
            floor: 1e-3,
        }
    }
}

impl TableSpec {
    /// A grid covering every `(|B_t - B_s|, |t - s|)` pair a path on a grid of
    /// span `span` with step `dt` in `d` dimensions reaches with overwhelming
    /// probability: radii up to `excursions` standard deviations of the
    /// increment over the whole span.
    pub fn covering(span: f64, dt: f64, d: usize, excursions: f64) -> Self {
        TableSpec {
            r_lo: 1e-3 * dt.min(1.0),
            r_hi: excursions * (span * d as f64).sqrt() + 1.0,
            tau_lo: dt * (1.0 - 1e-9),
            tau_hi: span * (1.0 + 1e-9),
            ..TableSpec::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.n_r >= 4
            && self.n_tau >= 4
            && self.r_lo > 0.0
            && self.r_hi > self.r_lo
            && self.tau_lo > 0.0
            && self.tau_hi > self.tau_lo
            && self.max_rel_error > 0.0
            && self.floor >= 0.0
            && self.r_scale.is_none_or(|s| s > 0.0)
            && self.tau_scale.is_none_or(|s| s > 0.0)
            && [self.r_lo, self.r_hi, self.tau_lo, self.tau_hi]
                .iter()
                .all(|x| x.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid table spec {self:?}")))
        }
    }
}

/// One validation probe of a table.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub r: f64,
    pub tau: f64,
    pub direct: f64,
    pub interp: f64,
    pub error: f64,
}

/// How a kernel behaves between `r = 0` and the first radius node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmallR {
    /// `f(0) + (f(r_lo) - f(0)) (r / r_lo)^2`.
    Even,
    /// `f(r_lo) r / r_lo` (radial derivatives, which vanish at the origin).
    Linear,
    /// Singular at the origin; evaluate directly.
    Direct,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelTable {
    pub format_version: u32,
    pub kernel_id: KernelId,
    pub params: ModelParams,
    pub quad: QuadratureConfig,
    pub spec: TableSpec,
    pub r_map: LogLinMap,
    pub tau_map: LogLinMap,
    pub r_nodes: Vec<f64>,
    pub tau_nodes: Vec<f64>,
    /// `values` holds only the radial profile at `t = 0`; the time
    /// dependence is the exact factor `e^{-|t|}` (polaron kernel).
    pub time_factorized: bool,
    /// Row-major in `tau`: `values[j * n_r + i]` is the kernel at `(r_i, tau_j)`.
    pub values: Vec<f64>,
    /// Kernel at `r = 0` per `tau` node (even kernels only; a single entry
    /// at `t = 0` when time-factorized).
    pub zero_column: Vec<f64>,
    pub small_r: SmallR,
    /// `K(0, 0)` when finite.
    pub diagonal: Option<f64>,
    pub interp_error_bound: f64,
    u0: f64,
    du: f64,
    v0: f64,
    dv: f64,
}

/// Four-point Lagrange stencil on a uniform grid.
#[inline]
fn stencil(x: f64, x0: f64, h: f64, n: usize) -> (usize, [f64; 4]) {
    let pos = (x - x0) / h;
    let nearest = pos.round();
    if (pos - nearest).abs() < 1e-9 && nearest >= 0.0 && nearest <= (n - 1) as f64 {
        let k = nearest as usize;
        let base = k.saturating_sub(1).min(n - 4);
        let mut w = [0.0; 4];
        w[k - base] = 1.0;
        return (base, w);
    }
    let base = (pos.floor() as isize - 1).clamp(0, n as isize - 4) as usize;
    let s = pos - base as f64;
    let (s1, s2, s3) = (s - 1.0, s - 2.0, s - 3.0);
    (
        base,
        [
            -s1 * s2 * s3 / 6.0,
            s * s2 * s3 / 2.0,
            -s * s1 * s3 / 2.0,
            s * s1 * s2 / 6.0,
        ],
    )
}

fn default_scale(params: &ModelParams) -> f64 {
    if params.lambda > 0.0 {
        1.0 / params.lambda
    } else {
        1.0
    }
}

impl KernelTable {
    /// Tabulate `kernel_id` on the grid of `spec` and measure the
    /// interpolation error on random probes.
    pub fn build(
        params: &ModelParams,
        kernel_id: KernelId,
        spec: &TableSpec,
        quad: &QuadratureConfig,
    ) -> Result<Self> {
        spec.validate()?;
        quad.validate()?;
        params.validate()?;
        let expected = if kernel_id == KernelId::PolaronW {
            Model::Polaron
        } else {
            Model::Nelson
        };
        if params.model != expected {
            return Err(Error::invalid(format!(
                "kernel {kernel_id:?} needs model {expected:?}"
            )));
        }
        let r_map = LogLinMap {
            scale: spec.r_scale.unwrap_or_else(|| default_scale(params)),
        };
        let tau_map = LogLinMap {
            scale: spec.tau_scale.unwrap_or_else(|| default_scale(params)),
        };
        let u0 = r_map.forward(spec.r_lo);
        let du = (r_map.forward(spec.r_hi) - u0) / (spec.n_r - 1) as f64;
        let v0 = tau_map.forward(spec.tau_lo);
        let dv = (tau_map.forward(spec.tau_hi) - v0) / (spec.n_tau - 1) as f64;
        let mut r_nodes: Vec<f64> = (0..spec.n_r)
            .map(|i| r_map.inverse(u0 + i as f64 * du))
            .collect();
        let mut tau_nodes: Vec<f64> = (0..spec.n_tau)
            .map(|j| tau_map.inverse(v0 + j as f64 * dv))
            .collect();
        r_nodes[0] = spec.r_lo;
        tau_nodes[0] = spec.tau_lo;
        *r_nodes.last_mut().unwrap() = spec.r_hi;
        *tau_nodes.last_mut().unwrap() = spec.tau_hi;

        let small_r = match kernel_id {
            KernelId::RhoDr => SmallR::Linear,
            KernelId::PolaronW if params.eps == 0.0 => SmallR::Direct,
            _ => SmallR::Even,
        };

        let time_factorized = kernel_id == KernelId::PolaronW;
        let values: Vec<f64> = if time_factorized {
            r_nodes
                .par_iter()
                .map(|&r| kernels::polaron_w(r, 0.0, params, quad))
                .collect::<Result<_>>()?
        } else {
            let n_r = spec.n_r;
            (0..spec.n_r * spec.n_tau)
                .into_par_iter()
                .map(|idx| {
                    kernels::evaluate(
                        kernel_id,
                        r_nodes[idx % n_r],
                        tau_nodes[idx / n_r],
                        params,
                        quad,
                    )
                })
                .collect::<Result<_>>()?
        };
        let zero_column = match (small_r, time_factorized) {
            (SmallR::Even, true) => vec![kernels::polaron_w(0.0, 0.0, params, quad)?],
            (SmallR::Even, false) => tau_nodes
                .par_iter()
                .map(|&tau| kernels::evaluate(kernel_id, 0.0, tau, params, quad))
                .collect::<Result<_>>()?,
            _ => Vec::new(),
        };
        let diagonal = match kernels::evaluate(kernel_id, 0.0, 0.0, params, quad) {
            Ok(v) => Some(v),
            Err(Error::Divergence(_)) => None,
            Err(e) => return Err(e),
        };

        let mut table = KernelTable {
            format_version: TABLE_FORMAT_VERSION,
            kernel_id,
            params: params.clone(),
            quad: *quad,
            spec: spec.clone(),
            r_map,
            tau_map,
            r_nodes,
            tau_nodes,
            time_factorized,
            values,
            zero_column,
            small_r,
            diagonal,
            interp_error_bound: f64::NAN,
            u0,
            du,
            v0,
            dv,
        };
        let measured = table.measure_error(spec.validation_probes, spec.validation_seed)?;
        table.interp_error_bound = measured;
        if measured > spec.max_rel_error {
            return Err(Error::TableValidation {
                measured,
                requested: spec.max_rel_error,
            });
        }
        Ok(table)
    }

    /// Maximum of `|interp - direct| / max(|direct|, floor * row_max)` over `n` random
    /// probes, uniform in the mapped coordinates of the hull.
    pub fn measure_error(&self, n: usize, seed: u64) -> Result<f64> {
        Ok(self.worst_probe(n, seed)?.error)
    }

    /// The probe attaining [`KernelTable::measure_error`].
    pub fn worst_probe(&self, n: usize, seed: u64) -> Result<Probe> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u_hi = self.u0 + self.du * (self.spec.n_r - 1) as f64;
        let v_hi = self.v0 + self.dv * (self.spec.n_tau - 1) as f64;
        let probes: Vec<(f64, f64)> = (0..n)
            .map(|_| {
                let u = rng.random_range(self.u0..u_hi);
                let v = rng.random_range(self.v0..v_hi);
                (
                    self.r_map.inverse(u).clamp(self.spec.r_lo, self.spec.r_hi),
                    self.tau_map
                        .inverse(v)
                        .clamp(self.spec.tau_lo, self.spec.tau_hi),
                )
            })
            .collect();
        let n_r = self.spec.n_r;
        let abs_max = |vals: &[f64]| vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let row_max: Vec<f64> = self.values.chunks(n_r).map(abs_max).collect();
        let results: Vec<Probe> = probes
            .par_iter()
            .map(|&(r, tau)| {
                let direct = self.direct(r, tau)?;
                let scale = match self.tau_weights(tau) {
                    TauWeights::Factor(f) => f * row_max[0],
                    TauWeights::Stencil(jb, _) => {
                        row_max[jb..jb + 4].iter().copied().fold(0.0, f64::max)
                    }
                };
                let interp = self.interpolate(r, tau);
                Ok(Probe {
                    r,
                    tau,
                    direct,
                    interp,
                    error: (interp - direct).abs() / direct.abs().max(self.spec.floor * scale),
                })
            })
            .collect::<Result<_>>()?;
        Ok(results.into_iter().fold(
            Probe::default(),
            |a, b| if b.error > a.error { b } else { a },
        ))
    }

    /// Direct quadrature of the tabulated kernel.
    pub fn direct(&self, r: f64, t: f64) -> Result<f64> {
        kernels::evaluate(self.kernel_id, r, t, &self.params, &self.quad)
    }

    pub fn n_r(&self) -> usize {
        self.spec.n_r
    }

    pub fn n_tau(&self) -> usize {
        self.spec.n_tau
    }

    /// True for kernels stored as `e^{-|t|}` times a radial profile.
    pub fn is_time_factorized(&self) -> bool {
        self.time_factorized
    }

    /// Table value at node `(r_i, tau_j)`.
    pub fn node(&self, i: usize, j: usize) -> f64 {
        if self.time_factorized {
            (-self.tau_nodes[j]).exp() * self.values[i]
        } else {
            self.values[j * self.spec.n_r + i]
        }
    }

    fn tau_in_range(&self, tau: f64) -> bool {
        if self.time_factorized {
            tau.is_finite()
        } else {
            tau >= self.spec.tau_lo && tau <= self.spec.tau_hi
        }
    }

    /// True when `(r, |t|)` is served by the table (no fallback).
    pub fn in_hull(&self, r: f64, t: f64) -> bool {
        let r_ok = r <= self.spec.r_hi && (r >= self.spec.r_lo || self.small_r != SmallR::Direct);
        r_ok && r >= 0.0 && self.tau_in_range(t.abs())
    }

    /// Kernel value at `(r, t)`: the cached diagonal at the origin, the
    /// interpolant inside the hull and direct quadrature elsewhere.
    pub fn eval(&self, r: f64, t: f64) -> Result<f64> {
        if r == 0.0 && t == 0.0 {
            if let Some(d) = self.diagonal {
                return Ok(d);
            }
        }
        if self.in_hull(r, t) {
            Ok(self.interpolate(r, t.abs()))
        } else {
            self.direct(r, t)
        }
    }

    fn tau_weights(&self, tau: f64) -> TauWeights {
        if self.time_factorized {
            TauWeights::Factor((-tau).exp())
        } else {
            let (jb, w) = stencil(self.tau_map.forward(tau), self.v0, self.dv, self.spec.n_tau);
            TauWeights::Stencil(jb, w)
        }
    }

    #[inline]
    fn row(&self, tw: &TauWeights, i: usize) -> f64 {
        match *tw {
            TauWeights::Factor(f) => f * self.values[i],
            TauWeights::Stencil(jb, w) => {
                let n_r = self.spec.n_r;
                (0..4).map(|b| w[b] * self.values[(jb + b) * n_r + i]).sum()
            }
        }
    }

    fn zero_value(&self, tw: &TauWeights) -> f64 {
        match *tw {
            TauWeights::Factor(f) => f * self.zero_column[0],
            TauWeights::Stencil(jb, w) => (0..4).map(|b| w[b] * self.zero_column[jb + b]).sum(),
        }
    }

    /// Interpolant inside the hull (no range checks).
    fn interpolate(&self, r: f64, tau: f64) -> f64 {
        let tw = self.tau_weights(tau);
        if r < self.spec.r_lo {
            let at_lo = self.row(&tw, 0);
            let x = r / self.spec.r_lo;
            return match self.small_r {
                SmallR::Even => {
                    let f0 = self.zero_value(&tw);
                    f0 + (at_lo - f0) * x * x
                }
                SmallR::Linear => at_lo * x,
                SmallR::Direct => {
                    unreachable!("singular kernels are evaluated directly below r_lo")
                }
            };
        }
        let (ib, wr) = stencil(self.r_map.forward(r), self.u0, self.du, self.spec.n_r);
        let mut acc = 0.0;
        for (a, &w) in wr.iter().enumerate() {
            if w != 0.0 {
                acc += w * self.row(&tw, ib + a);
            }
        }
        acc
    }

    /// The table restricted to one time gap, for inner loops where the gap
    /// takes only a few distinct values.
    pub fn slice(&self, t: f64) -> RadialSlice {
        let tau = t.abs();
        let in_range = self.tau_in_range(tau);
        let (values, zero) = if in_range {
            let tw = self.tau_weights(tau);
            let vals: Vec<f64> = (0..self.spec.n_r).map(|i| self.row(&tw, i)).collect();
            let zero = if self.small_r == SmallR::Even {
                self.zero_value(&tw)
            } else {
                0.0
            };
            (vals, zero)
        } else {
            (Vec::new(), 0.0)
        };
        RadialSlice {
            source: SliceSource {
                kernel_id: self.kernel_id,
                params: self.params.clone(),
                quad: self.quad,
                diagonal: self.diagonal,
            },
            tau,
            in_range,
            values,
            zero,
            small_r: self.small_r,
            r_lo: self.spec.r_lo,
            r_hi: self.spec.r_hi,
            r_map: self.r_map,
            u0: self.u0,
            du: self.du,
        }
    }
}

enum TauWeights {
    Stencil(usize, [f64; 4]),
    Factor(f64),
}

#[derive(Debug, Clone)]
struct SliceSource {
    kernel_id: KernelId,
    params: ModelParams,
    quad: QuadratureConfig,
    diagonal: Option<f64>,
}

impl SliceSource {
    fn eval(&self, r: f64, tau: f64) -> Result<f64> {
        if r == 0.0 && tau == 0.0 {
            if let Some(d) = self.diagonal {
                return Ok(d);
            }
        }
        kernels::evaluate(self.kernel_id, r, tau, &self.params, &self.quad)
    }
}

/// A kernel at one fixed time gap, either interpolated from a table or
/// evaluated by direct quadrature.
#[derive(Debug, Clone)]
pub struct RadialSlice {
    source: SliceSource,
    tau: f64,
    in_range: bool,
    values: Vec<f64>,
    zero: f64,
    small_r: SmallR,
    r_lo: f64,
    r_hi: f64,
    r_map: LogLinMap,
    u0: f64,
    du: f64,
}

impl RadialSlice {
    /// A slice that always evaluates the kernel by quadrature.
    pub fn direct(
        kernel_id: KernelId,
        params: &ModelParams,
        quad: &QuadratureConfig,
        t: f64,
    ) -> Self {
        let diagonal = match kernels::evaluate(kernel_id, 0.0, 0.0, params, quad) {
            Ok(v) if t == 0.0 => Some(v),
            _ => None,
        };
        RadialSlice {
            source: SliceSource {
                kernel_id,
                params: params.clone(),
                quad: *quad,
                diagonal,
            },
            tau: t.abs(),
            in_range: false,
            values: Vec::new(),
            zero: 0.0,
            small_r: SmallR::Direct,
            r_lo: 0.0,
            r_hi: 0.0,
            r_map: LogLinMap { scale: 1.0 },
            u0: 0.0,
            du: 1.0,
        }
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Same contract as [`KernelTable::eval`] at this slice's time gap.
    #[inline]
    pub fn eval(&self, r: f64) -> Result<f64> {
        if !self.in_range || r > self.r_hi {
            return self.source.eval(r, self.tau);
        }
        if r < self.r_lo {
            let x = r / self.r_lo;
            return match self.small_r {
                SmallR::Even => Ok(self.zero + (self.values[0] - self.zero) * x * x),
                SmallR::Linear => Ok(self.values[0] * x),
                SmallR::Direct => self.source.eval(r, self.tau),
            };
        }
        let (ib, w) = stencil(self.r_map.forward(r), self.u0, self.du, self.values.len());
        let v = &self.values[ib..ib + 4];
        Ok(w[0] * v[0] + w[1] * v[1] + w[2] * v[2] + w[3] * v[3])
    }
}
