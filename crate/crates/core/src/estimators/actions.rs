//! Discretized actions of a single path.
//!
//! All time integrals use trapezoid weights on the path grid. With
//! `M = 2 n_half` steps and the window `tau` rounded to `m_tau` steps, the
//! renormalized action is
//!
//! * off-diagonal: `2 dt^2 sum_i w_i sum_{j = c(i)..M} v_j W(B_j - B_i, (j - i) dt)`,
//!   `c(i) = min(i + m_tau, M)`, `v` the trapezoid weights of `[c(i), M]`;
//! * stochastic: `2 sum_{j < M} (dt sum_{i in [j - m_tau, j)} u_i grad rho(B_j - B_i, (j - i) dt)) . (B_{j+1} - B_j)`,
//!   left-endpoint (Itô) evaluation, `u` the trapezoid weights of the window
//!   with the `i = j` node dropped;
//! * boundary: `-2 dt sum_{i < M} w_i rho(B_{c(i)} - B_i, (c(i) - i) dt)`.

use serde::{Deserialize, Serialize};

use super::{trapezoid_weight, NelsonKernels};
use crate::error::{Error, Result};
use crate::paths::BrownianPath;

/// The renormalized action `S_eps - 4 T rho_eps(0, 0)` of one path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenormalizedAction {
    pub off_diagonal: f64,
    pub stochastic: f64,
    pub boundary: f64,
    /// Window length actually used (`m_tau dt`).
    pub tau: f64,
    pub m_tau: usize,
    pub total: f64,
}

fn check_path(path: &BrownianPath, kernels: &NelsonKernels) -> Result<()> {
    if path.grid != kernels.grid || path.d != kernels.params.d {
        return Err(Error::invalid(
            "path grid or dimension does not match the prepared kernels",
        ));
    }
    Ok(())
}

/// `S_eps = int int W_eps(B_t - B_s, t - s) ds dt` over `[-T, T]^2` as a
/// trapezoid double sum. The diagonal `W_eps(0, 0)` is included when finite;
/// with `eps = 0` (two dimensions only) the `i = j` terms are left out.
pub fn action_direct(path: &BrownianPath, kernels: &NelsonKernels) -> Result<f64> {
    check_path(path, kernels)?;
    let w = kernels
        .w
        .as_ref()
        .ok_or_else(|| Error::invalid("kernels were prepared without W"))?;
    let n = path.n_nodes();
    let dt = path.grid.dt();
    let diag = if kernels.params.eps > 0.0 {
        Some(w.at(0).eval(0.0)?)
    } else {
        None
    };
    let mut sum = 0.0;
    for i in 0..n {
        let wi = trapezoid_weight(i, n);
        let mut row = 0.0;
        for j in i + 1..n {
            row += trapezoid_weight(j, n) * w.at(j - i).eval(path.distance(i, j))?;
        }
        sum += 2.0 * wi * row;
        if let Some(d) = diag {
            sum += wi * wi * d;
        }
    }
    Ok(dt * dt * sum)
}

/// Direct action split into the two half-lines: returns `(S_--, S_++, S_-+)`
/// with `S = S_-- + S_++ + 2 S_-+`.
pub(crate) fn action_direct_halves(
    path: &BrownianPath,
    kernels: &NelsonKernels,
) -> Result<(f64, f64, f64)> {
    check_path(path, kernels)?;
    let w = kernels
        .w
        .as_ref()
        .ok_or_else(|| Error::invalid("kernels were prepared without W"))?;
    let n = path.n_nodes();
    let z = path.grid.zero_index();
    let dt = path.grid.dt();
    let diag = if kernels.params.eps > 0.0 {
        Some(w.at(0).eval(0.0)?)
    } else {
        None
    };
    // a: trapezoid weights of [-T, 0], b: of [0, T]
    let a = |i: usize| {
        if i > z {
            0.0
        } else {
            trapezoid_weight(i, z + 1)
        }
    };
    let b = |i: usize| {
        if i < z {
            0.0
        } else {
            trapezoid_weight(i - z, n - z)
        }
    };
    let (mut s_aa, mut s_bb, mut s_ab) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let (ai, bi) = (a(i), b(i));
        for j in i + 1..n {
            let k = w.at(j - i).eval(path.distance(i, j))?;
            let (aj, bj) = (a(j), b(j));
            s_aa += 2.0 * ai * aj * k;
            s_bb += 2.0 * bi * bj * k;
            s_ab += (ai * bj + bi * aj) * k;
        }
        if let Some(d) = diag {
            s_aa += ai * ai * d;
            s_bb += bi * bi * d;
            s_ab += ai * bi * d;
        }
    }
    let h = dt * dt;
    Ok((h * s_aa, h * s_bb, h * s_ab))
}

/// Renormalized action with window `tau in (0, 2T]` (rounded to a whole
/// number of steps, at least one).
pub fn action_renormalized(
    path: &BrownianPath,
    kernels: &NelsonKernels,
    tau: f64,
) -> Result<RenormalizedAction> {
    check_path(path, kernels)?;
    let span = path.grid.span();
    if !(tau > 0.0 && tau <= span * (1.0 + 1e-12)) {
        return Err(Error::domain(format!(
            "window tau must lie in (0, 2T], got {tau}"
        )));
    }
    let missing = || Error::invalid("kernels were prepared without rho");
    let rho = kernels.rho.as_ref().ok_or_else(missing)?;
    let rho_dr = kernels.rho_dr.as_ref().ok_or_else(missing)?;
    let n = path.n_nodes();
    let m = n - 1;
    let d = path.d;
    let dt = path.grid.dt();
    let m_tau = ((tau / dt).round() as usize).clamp(1, m);
    let clamp = |i: usize| (i + m_tau).min(m);

    let mut stochastic = 0.0;
    let mut inner = [0.0f64; 3];
    for j in 0..m {
        let lo = j.saturating_sub(m_tau);
        if lo == j {
            continue;
        }
        inner[..d].fill(0.0);
        let bj = path.point(j);
        for i in lo..j {
            let r = path.distance(i, j);
            if r == 0.0 {
                continue;
            }
            let u = if i == lo { 0.5 } else { 1.0 };
            let c = u * rho_dr.at(j - i).eval(r)? / r;
            let bi = path.point(i);
            for k in 0..d {
                inner[k] += c * (bj[k] - bi[k]);
            }
        }
        let next = path.point(j + 1);
        let mut dot = 0.0;
        for k in 0..d {
            dot += inner[k] * (next[k] - bj[k]);
        }
        stochastic += dot;
    }
    let stochastic = 2.0 * dt * stochastic;

    let mut boundary = 0.0;
    for i in 0..m {
        let c = clamp(i);
        boundary += trapezoid_weight(i, n) * rho.at(c - i).eval(path.distance(i, c))?;
    }
    let boundary = -2.0 * dt * boundary;

    let mut off_diagonal = 0.0;
    if m_tau < m {
        let w = kernels
            .w
            .as_ref()
            .ok_or_else(|| Error::invalid("a window tau < 2T needs W in the prepared kernels"))?;
        for i in 0..n {
            let c = clamp(i);
            if c == m {
                continue;
            }
            let mut row = 0.0;
            for j in c..=m {
                let v = if j == c || j == m { 0.5 } else { 1.0 };
                row += v * w.at(j - i).eval(path.distance(i, j))?;
            }
            off_diagonal += trapezoid_weight(i, n) * row;
        }
    }
    let off_diagonal = 2.0 * dt * dt * off_diagonal;

    Ok(RenormalizedAction {
        off_diagonal,
        stochastic,
        boundary,
        tau: m_tau as f64 * dt,
        m_tau,
        total: off_diagonal + stochastic + boundary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::KernelSettings;
    use crate::paths::{sample_path, PathSeed, TimeGrid};
    use crate::ModelParams;

    fn coarse_settings() -> KernelSettings {
        KernelSettings {
            n_r: 128,
            n_tau: 64,
            validation_probes: 200,
            max_table_error: 1e-2,
            ..KernelSettings::default()
        }
    }

    #[test]
    fn direct_action_is_time_reversal_symmetric_and_g_free() {
        let g = TimeGrid::two_sided(1.0, 16).unwrap();
        let p = ModelParams::nelson(3, 0.5, 1.0, 0.5, 1.0);
        let k = NelsonKernels::build(&p, &g, true, false, &coarse_settings()).unwrap();
        let k2 = NelsonKernels::build(&p.with_g(3.0), &g, true, false, &coarse_settings()).unwrap();
        let path = sample_path(&g, 3, PathSeed::new(2, 0)).unwrap();
        let s = action_direct(&path, &k).unwrap();
        let s_rev = action_direct(&path.time_reversed(), &k).unwrap();
        assert!((s - s_rev).abs() < 1e-12 * s.abs());
        assert_eq!(s, action_direct(&path, &k2).unwrap());
        let (aa, bb, ab) = action_direct_halves(&path, &k).unwrap();
        assert!((aa + bb + 2.0 * ab - s).abs() < 1e-12 * s.abs());
    }

    #[test]
    fn zero_path_has_no_stochastic_term_and_window_identities() {
        let g = TimeGrid::two_sided(1.0, 8).unwrap();
        let p = ModelParams::nelson(3, 0.5, 1.0, 0.5, 1.0);
        let k = NelsonKernels::build(&p, &g, true, true, &coarse_settings()).unwrap();
        let z = crate::paths::BrownianPath::zero(&g, 3).unwrap();
        let a = action_renormalized(&z, &k, 2.0).unwrap();
        assert_eq!(a.stochastic, 0.0);
        assert_eq!(a.off_diagonal, 0.0);
        assert_eq!(a.m_tau, 16);
        assert_eq!(a.total, a.off_diagonal + a.stochastic + a.boundary);
        let half = action_renormalized(&z, &k, 0.5).unwrap();
        assert_eq!(half.m_tau, 4);
        assert!(half.off_diagonal > 0.0);
        assert!(action_renormalized(&z, &k, 0.0).is_err());
        assert!(action_renormalized(&z, &k, 2.5).is_err());
    }

    #[test]
    fn unregularized_three_dim_direct_action_is_rejected() {
        let g = TimeGrid::two_sided(1.0, 8).unwrap();
        let p = ModelParams::nelson(3, 0.5, 1.0, 0.0, 1.0);
        assert!(matches!(
            NelsonKernels::build(&p, &g, true, false, &coarse_settings()),
            Err(Error::Divergence(_))
        ));
        let k = NelsonKernels::build(&p, &g, false, true, &KernelSettings::default()).unwrap();
        assert!(k.table_error().unwrap() <= 1e-3);
    }
}
