//! Independent finite-difference ground truth for variations of the energy.
//!
//! The oracle never reuses the closed-form variational machinery: it builds
//! the perturbed surface explicitly and differences `total_energy` along the
//! deformation path. For straight paths `X + tW` the jets of the perturbed
//! surface are the jets of `X` plus `t` times the jets of `W` (exact, since
//! jets add linearly); for rigid rotation orbits every stored jet is rotated
//! exactly. Spatial discretization error therefore never enters the oracle —
//! its error budget is purely the `t`-differencing, which it estimates itself.

use crate::catalog::{PathKind, VariationField};
use crate::energy::{model_phase_gradient, EnergyError, EnergyModel, PointCtx};
use crate::geometry::{GeometryError, SurfaceField, SYM_WEIGHT};
use crate::grid::Field;
use crate::jet::dot3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("oracle configuration invalid: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Finite-difference scheme parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    /// Step sizes for the parameter `t`, strictly decreasing.
    pub t_steps: Vec<f64>,
    /// Extrapolate the step sequence to `t → 0`.
    pub richardson: bool,
    /// Central-difference order: 2 or 4.
    pub order: u32,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { t_steps: vec![1e-3, 5e-4, 2.5e-4], richardson: true, order: 2 }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<(), OracleError> {
        if self.t_steps.is_empty() {
            return Err(OracleError::InvalidConfig("need at least one t step".into()));
        }
        if self.t_steps.iter().any(|&t| !(t > 0.0)) {
            return Err(OracleError::InvalidConfig("t steps must be positive".into()));
        }
        if self.t_steps.windows(2).any(|w| w[1] >= w[0]) {
            return Err(OracleError::InvalidConfig("t steps must be strictly decreasing".into()));
        }
        if self.order != 2 && self.order != 4 {
            return Err(OracleError::InvalidConfig(format!(
                "central-difference order must be 2 or 4, got {}",
                self.order
            )));
        }
        Ok(())
    }
}

/// A finite-difference value together with the oracle's own accuracy estimate.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FdResult {
    pub value: f64,
    pub error_estimate: f64,
}

/// Central-difference derivative of a scalar function of one parameter, with
/// optional Richardson extrapolation across the configured step sequence.
/// `degree` is 1 for the first derivative, 2 for the second.
pub fn fd_derivative<E>(
    cfg: &OracleConfig,
    degree: u32,
    mut f: impl FnMut(f64) -> Result<f64, E>,
) -> Result<FdResult, E> {
    assert!(degree == 1 || degree == 2, "only first and second derivatives");
    let f0 = if degree == 2 || cfg.order == 4 { Some(f(0.0)?) } else { None };
    let mut raw = Vec::with_capacity(cfg.t_steps.len());
    for &t in &cfg.t_steps {
        let d = match (degree, cfg.order) {
            (1, 2) => (f(t)? - f(-t)?) / (2.0 * t),
            (1, 4) => (-f(2.0 * t)? + 8.0 * f(t)? - 8.0 * f(-t)? + f(-2.0 * t)?) / (12.0 * t),
            (2, 2) => (f(t)? - 2.0 * f0.unwrap() + f(-t)?) / (t * t),
            (2, 4) => {
                (-f(2.0 * t)? + 16.0 * f(t)? - 30.0 * f0.unwrap() + 16.0 * f(-t)?
                    - f(-2.0 * t)?)
                    / (12.0 * t * t)
            }
            _ => unreachable!(),
        };
        raw.push((t, d));
    }
    // The leading truncation error of both central schemes scales as t^order.
    let p = cfg.order as f64;
    let seq = if cfg.richardson && raw.len() >= 2 {
        let mut extrapolated = Vec::with_capacity(raw.len() - 1);
        for w in raw.windows(2) {
            let (t0, d0) = w[0];
            let (t1, d1) = w[1];
            let rp = (t0 / t1).powf(p);
            extrapolated.push((t1, (rp * d1 - d0) / (rp - 1.0)));
        }
        extrapolated
    } else {
        raw
    };
    let value = seq.last().unwrap().1;
    let error_estimate = if seq.len() >= 2 {
        (value - seq[seq.len() - 2].1).abs()
    } else {
        // Single-step fallback: assume the scheme's nominal truncation order.
        value.abs() * seq[0].0.powf(p) + f64::EPSILON
    };
    Ok(FdResult { value, error_estimate })
}

fn rotate_vec(v: [f64; 3], axis: [f64; 3], angle: f64) -> [f64; 3] {
    let norm = dot3(&axis, &axis).sqrt();
    if norm == 0.0 {
        return v;
    }
    let k = axis.map(|x| x / norm);
    let theta = angle * norm;
    let (s, c) = theta.sin_cos();
    let kxv = [
        k[1] * v[2] - k[2] * v[1],
        k[2] * v[0] - k[0] * v[2],
        k[0] * v[1] - k[1] * v[0],
    ];
    let kv = dot3(&k, &v);
    let mut out = [0.0; 3];
    for mu in 0..3 {
        out[mu] = v[mu] * c + kxv[mu] * s + k[mu] * kv * (1.0 - c);
    }
    out
}

/// The surface at parameter `t` along the variation's deformation path.
///
/// Straight paths add `t·W` to the order-2 jets and drop the higher jets
/// (the variation field does not carry them); rotation orbits rotate every
/// stored jet exactly, preserving full jet order.
pub fn perturbed_surface(sf: &SurfaceField, w: &VariationField, t: f64) -> SurfaceField {
    match w.path {
        PathKind::Straight => {
            let grid = sf.grid;
            let mut x = sf.x.clone();
            let mut dx = sf.dx.clone();
            let mut ddx = sf.ddx.clone();
            for k in 0..grid.len() {
                for mu in 0..3 {
                    x.data[k][mu] += t * w.w.data[k][mu];
                    for a in 0..2 {
                        dx.data[k][a][mu] += t * w.dw.data[k][a][mu];
                    }
                    for s in 0..3 {
                        ddx.data[k][s][mu] += t * w.ddw.data[k][s][mu];
                    }
                }
            }
            SurfaceField {
                grid,
                x,
                dx,
                ddx,
                d3x: None,
                d4x: None,
                encloses_volume: sf.encloses_volume,
            }
        }
        PathKind::RotationOrbit { axis } => {
            let rot3 = |v: [f64; 3]| rotate_vec(v, axis, t);
            SurfaceField {
                grid: sf.grid,
                x: sf.x.map(rot3),
                dx: sf.dx.map(|d| [rot3(d[0]), rot3(d[1])]),
                ddx: sf.ddx.map(|d| [rot3(d[0]), rot3(d[1]), rot3(d[2])]),
                d3x: sf.d3x.as_ref().map(|f| {
                    f.map(|d| [rot3(d[0]), rot3(d[1]), rot3(d[2]), rot3(d[3])])
                }),
                d4x: sf.d4x.as_ref().map(|f| {
                    f.map(|d| [rot3(d[0]), rot3(d[1]), rot3(d[2]), rot3(d[3]), rot3(d[4])])
                }),
                encloses_volume: sf.encloses_volume,
            }
        }
    }
}

/// `d/dt F[path(t)]` at `t = 0` by central differences.
pub fn fd_first_variation(
    model: &EnergyModel,
    sf: &SurfaceField,
    w: &VariationField,
    cfg: &OracleConfig,
) -> Result<FdResult, OracleError> {
    cfg.validate()?;
    fd_derivative(cfg, 1, |t| {
        crate::energy::total_energy(model, &perturbed_surface(sf, w, t)).map_err(OracleError::from)
    })
}

/// `d²/dt² F[path(t)]` at `t = 0` by central second differences.
pub fn fd_second_variation(
    model: &EnergyModel,
    sf: &SurfaceField,
    w: &VariationField,
    cfg: &OracleConfig,
) -> Result<FdResult, OracleError> {
    cfg.validate()?;
    fd_derivative(cfg, 2, |t| {
        crate::energy::total_energy(model, &perturbed_surface(sf, w, t)).map_err(OracleError::from)
    })
}

/// The exact first variation in its pre-integration-by-parts form,
/// `∫ [∂𝓕/∂X·W + ∂𝓕/∂X_a·∂_aW + ∂𝓕/∂X_ab·(∇_a∇_bW)]`.
///
/// The second-derivative gradient contracts the *covariant* Hessian of `W`:
/// the phase-space conjugate of the embedding is its covariant second
/// derivative, and the connection variation drops out of the first variation
/// because that conjugate is normal to the surface for every catalog term.
pub fn first_variation_pre_ibp(
    model: &EnergyModel,
    sf: &SurfaceField,
    w: &VariationField,
) -> Result<f64, OracleError> {
    let grid = sf.grid;
    let mut acc = 0.0;
    for i in 0..grid.n1 {
        for j in 0..grid.n2 {
            let ctx = PointCtx::<f64>::new(sf, i, j)?;
            let g = model_phase_gradient(model, &ctx)?;
            let k = grid.idx(i, j);
            let mut dens = dot3(&g.df_dx, &w.w.data[k]);
            for a in 0..2 {
                dens += dot3(&g.df_dxa[a], &w.dw.data[k][a]);
            }
            for s in 0..3 {
                dens += SYM_WEIGHT[s] * dot3(&g.df_dxab[s], &w.w_cov.data[k][s]);
            }
            acc += grid.weight(i, j) * dens;
        }
    }
    Ok(acc)
}

/// Integral of `field · W` over the surface, for pairing force densities with
/// variation fields (the post-integration-by-parts first variation).
pub fn pair_with_variation(
    sf: &SurfaceField,
    field: &Field<[f64; 3]>,
    w: &VariationField,
) -> f64 {
    let grid = sf.grid;
    let mut acc = 0.0;
    for i in 0..grid.n1 {
        for j in 0..grid.n2 {
            let k = grid.idx(i, j);
            acc += grid.weight(i, j) * dot3(&field.data[k], &w.w.data[k]);
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{make_surface, make_variation, ScalarProfile, SurfaceDef, VariationDef};
    use crate::energy::{canham_helfrich, BackgroundField, EnergyTerm};
    use crate::geometry::compute_geometry;
    use std::f64::consts::PI;

    fn torus() -> SurfaceField {
        let def = SurfaceDef::Torus { minor: 1.0, major: 3.0 };
        make_surface(&def, def.default_grid(48, 48).unwrap()).unwrap()
    }

    #[test]
    fn fd_derivative_matches_exponential() {
        let cfg = OracleConfig::default();
        let d1 = fd_derivative(&cfg, 1, |t| Ok::<_, OracleError>((2.0 * t).exp())).unwrap();
        assert!((d1.value - 2.0).abs() < 1e-9, "{}", d1.value);
        assert!((d1.value - 2.0).abs() <= 10.0 * d1.error_estimate + 1e-12);
        let d2 = fd_derivative(&cfg, 2, |t| Ok::<_, OracleError>((2.0 * t).exp())).unwrap();
        assert!((d2.value - 4.0).abs() < 1e-6, "{}", d2.value);
    }

    #[test]
    fn fourth_order_scheme_is_sharper_on_coarse_steps() {
        let coarse = OracleConfig { t_steps: vec![0.2, 0.1], richardson: false, order: 2 };
        let quartic = OracleConfig { t_steps: vec![0.2, 0.1], richardson: false, order: 4 };
        let f = |t: f64| Ok::<_, OracleError>(t.sin());
        let e2 = (fd_derivative(&coarse, 1, f).unwrap().value - 1.0).abs();
        let e4 = (fd_derivative(&quartic, 1, f).unwrap().value - 1.0).abs();
        assert!(e4 < e2 / 50.0, "order-4 {e4} vs order-2 {e2}");
    }

    #[test]
    fn config_validation_rejects_bad_steps() {
        let bad = OracleConfig { t_steps: vec![1e-3, 1e-3], ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = OracleConfig { t_steps: vec![], ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = OracleConfig { order: 3, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn translation_leaves_every_model_invariant() {
        let sf = torus();
        let geo = compute_geometry(&sf).unwrap();
        let w = make_variation(
            &VariationDef::Translation { direction: [0.3, -1.0, 0.7] },
            &sf,
            &geo,
        )
        .unwrap();
        let mut model = canham_helfrich(1.0, -0.5, 0.3, 0.8);
        model.push(EnergyTerm::Volume { pressure: 0.4 });
        // Truncation vanishes along the exact symmetry, so large steps keep
        // the roundoff floor ε·|F|/t^degree of the second difference low.
        let cfg = OracleConfig { t_steps: vec![1e-2, 5e-3, 2.5e-3], ..Default::default() };
        let d1 = fd_first_variation(&model, &sf, &w, &cfg).unwrap();
        let d2 = fd_second_variation(&model, &sf, &w, &cfg).unwrap();
        assert!(d1.value.abs() < 2e-8, "{}", d1.value);
        assert!(d2.value.abs() < 1e-6, "{}", d2.value);
    }

    #[test]
    fn rotation_orbit_leaves_rotation_invariant_models_invariant() {
        let sf = torus();
        let geo = compute_geometry(&sf).unwrap();
        let w =
            make_variation(&VariationDef::Rotation { axis: [0.4, 1.0, -0.2] }, &sf, &geo).unwrap();
        assert!(matches!(w.path, PathKind::RotationOrbit { .. }));
        let mut model = canham_helfrich(1.2, -0.4, 0.5, 0.9);
        model.push(EnergyTerm::Volume { pressure: 0.3 });
        // Larger steps are fine here: the truncation term vanishes along an
        // exact symmetry orbit, only roundoff remains.
        let cfg = OracleConfig { t_steps: vec![1e-2, 5e-3, 2.5e-3], ..Default::default() };
        let d1 = fd_first_variation(&model, &sf, &w, &cfg).unwrap();
        let d2 = fd_second_variation(&model, &sf, &w, &cfg).unwrap();
        assert!(d1.value.abs() < 1e-8, "{}", d1.value);
        assert!(d2.value.abs() < 1e-4, "{}", d2.value);
    }

    #[test]
    fn rotated_surface_has_identical_curvature_fields() {
        let sf = torus();
        let geo = compute_geometry(&sf).unwrap();
        let w =
            make_variation(&VariationDef::Rotation { axis: [0.0, 1.0, 0.3] }, &sf, &geo).unwrap();
        let rotated = perturbed_surface(&sf, &w, 0.7);
        assert!(rotated.has_jets());
        let g0 = compute_geometry(&sf).unwrap();
        let g1 = compute_geometry(&rotated).unwrap();
        for k in [(0usize, 0usize), (10, 31), (25, 7)] {
            let p0 = g0.at(k.0, k.1);
            let p1 = g1.at(k.0, k.1);
            assert!((p0.k - p1.k).abs() < 1e-13);
            assert!((p0.r - p1.r).abs() < 1e-13);
            assert!((p0.sqrt_g - p1.sqrt_g).abs() < 1e-13);
        }
    }

    #[test]
    fn uniform_normal_inflation_of_torus_matches_total_mean_curvature() {
        // d(Area)/dt along X + t n equals ∮K dA = 4π²c on the (a, c) torus.
        let sf = torus();
        let geo = compute_geometry(&sf).unwrap();
        let w = make_variation(
            &VariationDef::Normal { profile: ScalarProfile::Constant(1.0) },
            &sf,
            &geo,
        )
        .unwrap();
        let sigma = 1.3;
        let model = [EnergyTerm::Soap { sigma: ScalarProfile::Constant(sigma) }];
        let cfg = OracleConfig::default();
        let exact = sigma * 4.0 * PI * PI * 3.0;
        let fd = fd_first_variation(&model, &sf, &w, &cfg).unwrap();
        assert!(
            (fd.value - exact).abs() < (10.0 * fd.error_estimate).max(1e-9) + 1e-7 * exact.abs(),
            "fd {} vs exact {}",
            fd.value,
            exact
        );
        let pre = first_variation_pre_ibp(&model, &sf, &w).unwrap();
        assert!((pre - exact).abs() < 1e-9 * exact.abs(), "pre-ibp {pre} vs {exact}");
    }

    #[test]
    fn pre_ibp_matches_fd_for_general_model_and_variation() {
        let sf = torus();
        let geo = compute_geometry(&sf).unwrap();
        let w = make_variation(
            &VariationDef::RandomSmooth { seed: 7, amplitude: 1.0, max_mode: 3 },
            &sf,
            &geo,
        )
        .unwrap();
        let mut model = canham_helfrich(0.9, -0.3, 0.4, 1.1);
        model.push(EnergyTerm::Volume { pressure: 0.6 });
        model.push(EnergyTerm::Magnetic {
            alpha: 0.5,
            field: BackgroundField::Linear {
                value: [0.2, 0.4, -0.7],
                gradient: [[0.05, 0.01, 0.0], [0.0, -0.03, 0.02], [0.01, 0.0, 0.04]],
            },
        });
        model.push(EnergyTerm::PhaseField {
            lambda: 0.8,
            beta_phi: 0.25,
            potential: vec![0.0, 0.1, 0.3],
            phi: Some(ScalarProfile::Fourier {
                base: 0.3,
                amplitude: 0.4,
                mode1: 1,
                mode2: 2,
                phase1: 0.2,
                phase2: 0.0,
            }),
        });
        let cfg = OracleConfig::default();
        let fd = fd_first_variation(&model, &sf, &w, &cfg).unwrap();
        let pre = first_variation_pre_ibp(&model, &sf, &w).unwrap();
        let tol = (10.0 * fd.error_estimate).max(1e-9);
        assert!(
            (fd.value - pre).abs() < tol + 1e-7 * fd.value.abs(),
            "fd {} vs pre-ibp {} (tol {tol})",
            fd.value,
            pre
        );
    }
}
