//! Energy functionals: densitized terms, their pointwise values, and their
//! exact phase-space gradients `∂𝓕/∂X`, `∂𝓕/∂X_a`, `∂𝓕/∂X_ab`.
//!
//! Every density carries the area element `√g`. Gradients are *holonomic*
//! partials of the density with respect to the embedding jet at fixed
//! parameters; position-dependent moduli therefore enter the formulas purely
//! pointwise and the expressions below hold verbatim for constant and field
//! moduli alike (modulus gradients surface later, through the divergence of
//! the stress).
//!
//! All kernels are generic over the scalar ring, so the same code produces
//! plain values and exact parameter derivatives of every gradient component.

use crate::catalog::{QuadratureSphere, ScalarProfile};
use crate::geometry::{
    point_geometry, sym2, GeometryError, JetSource, PointGeometry, PointJets, SurfaceField,
};
use crate::grid::{Field, GridSpec};
use crate::jet::{dot3, Scalar};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EnergyError {
    #[error("term requires the field '{0}' which was not provided")]
    MissingField(&'static str),
    #[error("volume-coupled term requires a closed, volume-enclosing surface")]
    NotClosedSurface,
    #[error("term '{0}' is not supported on the grid-free quadrature sphere")]
    UnsupportedOnQuadrature(&'static str),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Background vector field for the external-field coupling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackgroundField {
    Constant { value: [f64; 3] },
    /// `B(x) = value + gradient · x` with `gradient[μ][ν] = ∂B^μ/∂x^ν`.
    Linear { value: [f64; 3], gradient: [[f64; 3]; 3] },
}

impl BackgroundField {
    fn eval<T: Scalar>(&self, x: &[T; 3]) -> [T; 3] {
        match self {
            BackgroundField::Constant { value } => value.map(T::constant),
            BackgroundField::Linear { value, gradient } => {
                let mut out = value.map(T::constant);
                for mu in 0..3 {
                    for nu in 0..3 {
                        out[mu] = out[mu] + x[nu].scale(gradient[mu][nu]);
                    }
                }
                out
            }
        }
    }

    /// `(Gᵀ n)_μ = Σ_ν n_ν ∂B^ν/∂x^μ`.
    fn gradient_transpose_apply<T: Scalar>(&self, n: &[T; 3]) -> [T; 3] {
        match self {
            BackgroundField::Constant { .. } => [T::zero(); 3],
            BackgroundField::Linear { gradient, .. } => {
                let mut out = [T::zero(); 3];
                for mu in 0..3 {
                    for nu in 0..3 {
                        out[mu] = out[mu] + n[nu].scale(gradient[nu][mu]);
                    }
                }
                out
            }
        }
    }
}

/// One term of an energy model. A model is a list of terms; moduli may be
/// constants or parameter-dependent profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnergyTerm {
    /// Surface tension: density `σ √g`.
    Soap { sigma: ScalarProfile },
    /// Squared-mean-curvature elasticity: density `κ √g K²`.
    Bending { kappa: ScalarProfile },
    /// Linear mean-curvature term: density `β √g K`.
    Mean { beta: ScalarProfile },
    /// Gaussian-curvature elasticity: density `κ̄ √g ℛ`.
    Gaussian { kappa_bar: ScalarProfile },
    /// Pressure–volume coupling `−P · Vol`: density `−(P/3) √g n·X`.
    Volume { pressure: f64 },
    /// Scalar-field coupling `√g [λ/2 (∇φ)² + V(φ) + β_φ φ K]` with a fixed
    /// parameter profile `φ` and polynomial potential `V`.
    PhaseField {
        lambda: f64,
        beta_phi: f64,
        #[serde(default)]
        potential: Vec<f64>,
        phi: Option<ScalarProfile>,
    },
    /// External-field coupling: density `−α √g (n·B(x))²`.
    Magnetic { alpha: f64, field: BackgroundField },
}

/// An energy model: the sum of its terms.
pub type EnergyModel = [EnergyTerm];

/// The Canham–Helfrich composite with constant moduli:
/// bending, Gaussian, linear mean-curvature, and tension terms.
pub fn canham_helfrich(kappa: f64, kappa_bar: f64, beta: f64, sigma: f64) -> Vec<EnergyTerm> {
    vec![
        EnergyTerm::Bending { kappa: ScalarProfile::Constant(kappa) },
        EnergyTerm::Gaussian { kappa_bar: ScalarProfile::Constant(kappa_bar) },
        EnergyTerm::Mean { beta: ScalarProfile::Constant(beta) },
        EnergyTerm::Soap { sigma: ScalarProfile::Constant(sigma) },
    ]
}

/// Expand the spontaneous-curvature energy `κ (K − K₀)²` into catalog terms:
/// `κ K² − 2κK₀ K + κK₀²`. Terms with zero coefficient are dropped.
pub fn expand_spontaneous_curvature(kappa: f64, k0: f64) -> Vec<EnergyTerm> {
    let mut out = Vec::new();
    if kappa != 0.0 {
        out.push(EnergyTerm::Bending { kappa: ScalarProfile::Constant(kappa) });
    }
    let beta = -2.0 * kappa * k0;
    if beta != 0.0 {
        out.push(EnergyTerm::Mean { beta: ScalarProfile::Constant(beta) });
    }
    let sigma = kappa * k0 * k0;
    if sigma != 0.0 {
        out.push(EnergyTerm::Soap { sigma: ScalarProfile::Constant(sigma) });
    }
    out
}

/// Evaluate a polynomial `Σ c_k x^k` in the scalar ring (Horner).
pub fn poly_eval<T: Scalar>(coeffs: &[f64], x: T) -> T {
    let mut acc = T::zero();
    for &c in coeffs.iter().rev() {
        acc = acc * x + T::constant(c);
    }
    acc
}

/// Coefficients of the derivative polynomial.
pub fn poly_derivative(coeffs: &[f64]) -> Vec<f64> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, &c)| k as f64 * c)
        .collect()
}

// ---------------------------------------------------------------------------
// Pointwise evaluation context
// ---------------------------------------------------------------------------

/// Everything a pointwise energy kernel needs at one node.
#[derive(Debug, Clone)]
pub struct PointCtx<T> {
    pub grid: GridSpec,
    pub u: f64,
    pub v: f64,
    pub pj: PointJets<T>,
    pub pg: PointGeometry<T>,
}

impl<T: JetSource> PointCtx<T> {
    pub fn new(sf: &SurfaceField, i: usize, j: usize) -> Result<Self, GeometryError> {
        let pj = T::point_jets(sf, i, j)?;
        let pg = point_geometry(&pj);
        let (u, v) = sf.grid.coord(i, j);
        Ok(Self { grid: sf.grid, u, v, pj, pg })
    }

    /// Raised tangent `t^a = g^{ab} X_b`.
    pub fn t_up(&self, a: usize) -> [T; 3] {
        let mut out = [T::zero(); 3];
        for b in 0..2 {
            let g = self.pg.ginv[sym2(a, b)];
            for mu in 0..3 {
                out[mu] = out[mu] + g * self.pj.dx[b][mu];
            }
        }
        out
    }
}

/// The phase-space gradient of one density at one point.
#[derive(Debug, Clone, Copy)]
pub struct PhaseGradientPoint<T> {
    /// `∂𝓕/∂X^μ`.
    pub df_dx: [T; 3],
    /// `∂𝓕/∂X^μ_a`, indexed `[a][μ]`.
    pub df_dxa: [[T; 3]; 2],
    /// `∂𝓕/∂X^μ_ab`, indexed `[sym2(a,b)][μ]`; symmetric in `(a, b)` by
    /// construction.
    pub df_dxab: [[T; 3]; 3],
}

impl<T: Scalar> PhaseGradientPoint<T> {
    pub fn zero() -> Self {
        Self {
            df_dx: [T::zero(); 3],
            df_dxa: [[T::zero(); 3]; 2],
            df_dxab: [[T::zero(); 3]; 3],
        }
    }

    pub fn add_assign(&mut self, o: &Self) {
        for mu in 0..3 {
            self.df_dx[mu] = self.df_dx[mu] + o.df_dx[mu];
            for a in 0..2 {
                self.df_dxa[a][mu] = self.df_dxa[a][mu] + o.df_dxa[a][mu];
            }
            for s in 0..3 {
                self.df_dxab[s][mu] = self.df_dxab[s][mu] + o.df_dxab[s][mu];
            }
        }
    }
}

fn phase_field_parts<T: JetSource>(
    lambda: f64,
    beta_phi: f64,
    potential: &[f64],
    phi: &Option<ScalarProfile>,
    ctx: &PointCtx<T>,
) -> Result<(T, T, [T; 2], T), EnergyError> {
    let profile = phi.as_ref().ok_or(EnergyError::MissingField("phi"))?;
    let pj = profile.eval::<T>(&ctx.grid, ctx.u, ctx.v);
    let vpot = poly_eval(potential, pj.val);
    // (∇φ)² = g^{ab} φ_a φ_b
    let mut grad2 = T::zero();
    for a in 0..2 {
        for b in 0..2 {
            grad2 = grad2 + ctx.pg.ginv[sym2(a, b)] * pj.d[a] * pj.d[b];
        }
    }
    let density_over_sqrt_g =
        grad2.scale(0.5 * lambda) + vpot + (pj.val * ctx.pg.k).scale(beta_phi);
    Ok((pj.val, density_over_sqrt_g, pj.d, grad2))
}

/// Density of a single term at a point (includes `√g`).
pub fn term_density<T: JetSource>(term: &EnergyTerm, ctx: &PointCtx<T>) -> Result<T, EnergyError> {
    let pg = &ctx.pg;
    let val = match term {
        EnergyTerm::Soap { sigma } => {
            sigma.eval::<T>(&ctx.grid, ctx.u, ctx.v).val * pg.sqrt_g
        }
        EnergyTerm::Bending { kappa } => {
            kappa.eval::<T>(&ctx.grid, ctx.u, ctx.v).val * pg.sqrt_g * pg.k * pg.k
        }
        EnergyTerm::Mean { beta } => {
            beta.eval::<T>(&ctx.grid, ctx.u, ctx.v).val * pg.sqrt_g * pg.k
        }
        EnergyTerm::Gaussian { kappa_bar } => {
            kappa_bar.eval::<T>(&ctx.grid, ctx.u, ctx.v).val * pg.sqrt_g * pg.r
        }
        EnergyTerm::Volume { pressure } => {
            (pg.sqrt_g * dot3(&pg.n, &ctx.pj.x)).scale(-pressure / 3.0)
        }
        EnergyTerm::PhaseField { lambda, beta_phi, potential, phi } => {
            let (_, dens, _, _) = phase_field_parts(*lambda, *beta_phi, potential, phi, ctx)?;
            dens * pg.sqrt_g
        }
        EnergyTerm::Magnetic { alpha, field } => {
            let b = field.eval::<T>(&ctx.pj.x);
            let nb = dot3(&pg.n, &b);
            (pg.sqrt_g * nb * nb).scale(-alpha)
        }
    };
    Ok(val)
}

/// Phase-space gradient of a single term at a point.
pub fn term_phase_gradient<T: JetSource>(
    term: &EnergyTerm,
    ctx: &PointCtx<T>,
) -> Result<PhaseGradientPoint<T>, EnergyError> {
    let pg = &ctx.pg;
    let sg = pg.sqrt_g;
    let mut out = PhaseGradientPoint::zero();
    match term {
        EnergyTerm::Soap { sigma } => {
            let s = sigma.eval::<T>(&ctx.grid, ctx.u, ctx.v).val;
            for a in 0..2 {
                let t = ctx.t_up(a);
                for mu in 0..3 {
                    out.df_dxa[a][mu] = s * sg * t[mu];
                }
            }
        }
        EnergyTerm::Bending { kappa } => {
            let kp = kappa.eval::<T>(&ctx.grid, ctx.u, ctx.v).val;
            // ∂𝓕/∂X_a = κ√g K (K g^{ab} − 4 K^{ab}) X_b
            for a in 0..2 {
                for b in 0..2 {
                    let s = sym2(a, b);
                    let c = kp * sg * pg.k * (pg.k * pg.ginv[s] - pg.kup[s].scale(4.0));
                    for mu in 0..3 {
                        out.df_dxa[a][mu] = out.df_dxa[a][mu] + c * ctx.pj.dx[b][mu];
                    }
                }
            }
            // ∂𝓕/∂X_ab = −2κ√g K g^{ab} n
            for s in 0..3 {
                let c = (kp * sg * pg.k * pg.ginv[s]).scale(-2.0);
                for mu in 0..3 {
                    out.df_dxab[s][mu] = c * pg.n[mu];
                }
            }
        }
        EnergyTerm::Mean { beta } => {
            let bt = beta.eval::<T>(&ctx.grid, ctx.u, ctx.v).val;
            // ∂𝓕/∂X_a = β√g (K g^{ab} − 2 K^{ab}) X_b
            for a in 0..2 {
                for b in 0..2 {
                    let s = sym2(a, b);
                    let c = bt * sg * (pg.k * pg.ginv[s] - pg.kup[s].scale(2.0));
                    for mu in 0..3 {
                        out.df_dxa[a][mu] = out.df_dxa[a][mu] + c * ctx.pj.dx[b][mu];
                    }
                }
            }
            // ∂𝓕/∂X_ab = −β√g g^{ab} n
            for s in 0..3 {
                let c = -(bt * sg * pg.ginv[s]);
                for mu in 0..3 {
                    out.df_dxab[s][mu] = c * pg.n[mu];
                }
            }
        }
        EnergyTerm::Gaussian { kappa_bar } => {
            let kb = kappa_bar.eval::<T>(&ctx.grid, ctx.u, ctx.v).val;
            // ∂𝓕/∂X_a = −κ̄√g ℛ g^{ab} X_b
            for a in 0..2 {
                for b in 0..2 {
                    let c = -(kb * sg * pg.r * pg.ginv[sym2(a, b)]);
                    for mu in 0..3 {
                        out.df_dxa[a][mu] = out.df_dxa[a][mu] + c * ctx.pj.dx[b][mu];
                    }
                }
            }
            // ∂𝓕/∂X_ab = 2κ̄√g (K^{ab} − K g^{ab}) n
            for s in 0..3 {
                let c = (kb * sg * (pg.kup[s] - pg.k * pg.ginv[s])).scale(2.0);
                for mu in 0..3 {
                    out.df_dxab[s][mu] = c * pg.n[mu];
                }
            }
        }
        EnergyTerm::Volume { pressure } => {
            let p3 = -pressure / 3.0;
            let nx = dot3(&pg.n, &ctx.pj.x);
            for mu in 0..3 {
                out.df_dx[mu] = (sg * pg.n[mu]).scale(p3);
            }
            for a in 0..2 {
                let t = ctx.t_up(a);
                let tx = dot3(&t, &ctx.pj.x);
                for mu in 0..3 {
                    out.df_dxa[a][mu] = (sg * (nx * t[mu] - tx * pg.n[mu])).scale(p3);
                }
            }
        }
        EnergyTerm::PhaseField { lambda, beta_phi, potential, phi } => {
            let (phi_v, dens, dphi, _) =
                phase_field_parts(*lambda, *beta_phi, potential, phi, ctx)?;
            // ∇^a φ = g^{ab} φ_b
            let mut gphi_up = [T::zero(); 2];
            for a in 0..2 {
                for b in 0..2 {
                    gphi_up[a] = gphi_up[a] + ctx.pg.ginv[sym2(a, b)] * dphi[b];
                }
            }
            // ∂𝓕/∂X_a = √g[−λ ∇^aφ ∇^bφ + (λ/2(∇φ)² + V) g^{ab}
            //            + β_φ φ (K g^{ab} − 2K^{ab})] X_b
            // Note: dens already holds λ/2(∇φ)² + V + β_φ φ K, so regroup:
            // braces^{ab} = −λ∇^aφ∇^bφ + dens·g^{ab} − 2β_φ φ K^{ab}.
            for a in 0..2 {
                for b in 0..2 {
                    let s = sym2(a, b);
                    let braces = dens * pg.ginv[s]
                        - (gphi_up[a] * gphi_up[b]).scale(*lambda)
                        - (phi_v * pg.kup[s]).scale(2.0 * beta_phi);
                    for mu in 0..3 {
                        out.df_dxa[a][mu] = out.df_dxa[a][mu] + sg * braces * ctx.pj.dx[b][mu];
                    }
                }
            }
            // ∂𝓕/∂X_ab = −β_φ φ √g g^{ab} n
            for s in 0..3 {
                let c = -(phi_v * sg * pg.ginv[s]).scale(*beta_phi);
                for mu in 0..3 {
                    out.df_dxab[s][mu] = c * pg.n[mu];
                }
            }
        }
        EnergyTerm::Magnetic { alpha, field } => {
            let b = field.eval::<T>(&ctx.pj.x);
            let nb = dot3(&pg.n, &b);
            // ∂𝓕/∂X = −2α√g (n·B) ∂(n·B)/∂x = −2α√g (n·B) (Gᵀ n)
            let gtn = field.gradient_transpose_apply::<T>(&pg.n);
            for mu in 0..3 {
                out.df_dx[mu] = (sg * nb * gtn[mu]).scale(-2.0 * alpha);
            }
            // ∂𝓕/∂X_a = −α√g (n·B) g^{ab} [(n·B) X_b − 2 (X_b·B) n]
            for a in 0..2 {
                for bidx in 0..2 {
                    let g = pg.ginv[sym2(a, bidx)];
                    let xb_b = dot3(&ctx.pj.dx[bidx], &b);
                    for mu in 0..3 {
                        let bracket = nb * ctx.pj.dx[bidx][mu] - (xb_b * pg.n[mu]).scale(2.0);
                        out.df_dxa[a][mu] =
                            out.df_dxa[a][mu] + (sg * nb * g * bracket).scale(-alpha);
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Phase-space gradient of a whole model at a point.
pub fn model_phase_gradient<T: JetSource>(
    model: &EnergyModel,
    ctx: &PointCtx<T>,
) -> Result<PhaseGradientPoint<T>, EnergyError> {
    let mut out = PhaseGradientPoint::zero();
    for term in model {
        out.add_assign(&term_phase_gradient(term, ctx)?);
    }
    Ok(out)
}

fn model_requires_closed(model: &EnergyModel) -> bool {
    model.iter().any(|t| matches!(t, EnergyTerm::Volume { .. }))
}

fn ensure_volume_ok(model: &EnergyModel, sf: &SurfaceField) -> Result<(), EnergyError> {
    if model_requires_closed(model) && !(sf.grid.closed() && sf.encloses_volume) {
        return Err(EnergyError::NotClosedSurface);
    }
    Ok(())
}

/// Densitized energy of the model at every node (includes `√g`).
pub fn energy_density(model: &EnergyModel, sf: &SurfaceField) -> Result<Field<f64>, EnergyError> {
    ensure_volume_ok(model, sf)?;
    let grid = sf.grid;
    let mut out = Field::new(&grid, 0.0);
    for i in 0..grid.n1 {
        for j in 0..grid.n2 {
            let ctx = PointCtx::<f64>::new(sf, i, j)?;
            let mut acc = 0.0;
            for term in model {
                acc += term_density(term, &ctx)?;
            }
            out.set(i, j, acc);
        }
    }
    Ok(out)
}

/// Total energy of the model on a surface.
pub fn total_energy(model: &EnergyModel, sf: &SurfaceField) -> Result<f64, EnergyError> {
    let dens = energy_density(model, sf)?;
    Ok(crate::grid::integrate(&sf.grid, &dens))
}

/// Enclosed volume `∮ (1/3) √g n·X dξ` of a closed surface.
pub fn volume_functional(sf: &SurfaceField) -> Result<f64, EnergyError> {
    if !(sf.grid.closed() && sf.encloses_volume) {
        return Err(EnergyError::NotClosedSurface);
    }
    let grid = sf.grid;
    let mut acc = 0.0;
    for i in 0..grid.n1 {
        for j in 0..grid.n2 {
            let ctx = PointCtx::<f64>::new(sf, i, j)?;
            acc += grid.weight(i, j) * ctx.pg.sqrt_g * dot3(&ctx.pg.n, &ctx.pj.x) / 3.0;
        }
    }
    Ok(acc)
}

/// The phase-space gradient of the model as per-node fields.
#[derive(Debug, Clone)]
pub struct PhaseGradient {
    pub df_dx: Field<[f64; 3]>,
    pub df_dxa: Field<[[f64; 3]; 2]>,
    pub df_dxab: Field<[[f64; 3]; 3]>,
}

pub fn phase_gradient(model: &EnergyModel, sf: &SurfaceField) -> Result<PhaseGradient, EnergyError> {
    ensure_volume_ok(model, sf)?;
    let grid = sf.grid;
    let mut df_dx = Field::new(&grid, [0.0; 3]);
    let mut df_dxa = Field::new(&grid, [[0.0; 3]; 2]);
    let mut df_dxab = Field::new(&grid, [[0.0; 3]; 3]);
    for i in 0..grid.n1 {
        for j in 0..grid.n2 {
            let ctx = PointCtx::<f64>::new(sf, i, j)?;
            let g = model_phase_gradient(model, &ctx)?;
            df_dx.set(i, j, g.df_dx);
            df_dxa.set(i, j, g.df_dxa);
            df_dxab.set(i, j, g.df_dxab);
        }
    }
    Ok(PhaseGradient { df_dx, df_dxa, df_dxab })
}

/// Total energy of a constant-modulus model on the grid-free quadrature
/// sphere (used by closed-surface acceptance checks that need quadrature
/// accuracy beyond any grid).
pub fn quadrature_sphere_energy(
    model: &EnergyModel,
    q: &QuadratureSphere,
) -> Result<f64, EnergyError> {
    let r = q.radius;
    let mut total = 0.0;
    for term in model {
        total += match term {
            EnergyTerm::Soap { sigma } => {
                let s = sigma
                    .as_constant()
                    .ok_or(EnergyError::UnsupportedOnQuadrature("field tension"))?;
                s * q.area()
            }
            EnergyTerm::Bending { kappa } => {
                let k = kappa
                    .as_constant()
                    .ok_or(EnergyError::UnsupportedOnQuadrature("field rigidity"))?;
                k * q.total_mean_curvature_sq()
            }
            EnergyTerm::Mean { beta } => {
                let b = beta
                    .as_constant()
                    .ok_or(EnergyError::UnsupportedOnQuadrature("field modulus"))?;
                b * (2.0 / r) * q.area()
            }
            EnergyTerm::Gaussian { kappa_bar } => {
                let kb = kappa_bar
                    .as_constant()
                    .ok_or(EnergyError::UnsupportedOnQuadrature("field modulus"))?;
                kb * q.total_scalar_curvature()
            }
            EnergyTerm::Volume { pressure } => -pressure * q.volume(),
            EnergyTerm::PhaseField { lambda: _, beta_phi, potential, phi } => {
                let profile = phi.as_ref().ok_or(EnergyError::MissingField("phi"))?;
                let c = profile
                    .as_constant()
                    .ok_or(EnergyError::UnsupportedOnQuadrature("non-constant phi"))?;
                let v = poly_eval(potential, c);
                (v + beta_phi * c * 2.0 / r) * q.area()
            }
            EnergyTerm::Magnetic { alpha, field } => match field {
                BackgroundField::Constant { value } => {
                    // Rotation invariance of the closed-sphere integral lets
                    // the polar axis align with B: ∮(n·B)² dA = |B|² ∮ s² dA.
                    let b2 = dot3(value, value);
                    -alpha * b2 * q.integrate_axisymmetric(|s| s * s)
                }
                BackgroundField::Linear { .. } => {
                    return Err(EnergyError::UnsupportedOnQuadrature("non-uniform field"))
                }
            },
        };
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{make_surface, quadrature_sphere, SurfaceDef};
    use crate::jet::Jet2;
    use std::f64::consts::PI;

    fn torus() -> SurfaceField {
        let def = SurfaceDef::Torus { minor: 1.0, major: 3.0 };
        make_surface(&def, def.default_grid(24, 24).unwrap()).unwrap()
    }

    fn all_terms() -> Vec<EnergyTerm> {
        vec![
            EnergyTerm::Soap { sigma: ScalarProfile::Constant(0.8) },
            EnergyTerm::Bending { kappa: ScalarProfile::Constant(1.3) },
            EnergyTerm::Mean {
                beta: ScalarProfile::Fourier {
                    base: 0.5,
                    amplitude: 0.2,
                    mode1: 1,
                    mode2: 2,
                    phase1: 0.1,
                    phase2: 0.0,
                },
            },
            EnergyTerm::Gaussian { kappa_bar: ScalarProfile::Constant(-0.4) },
            EnergyTerm::Volume { pressure: 0.7 },
            EnergyTerm::PhaseField {
                lambda: 0.9,
                beta_phi: 0.3,
                potential: vec![0.1, 0.0, 0.25],
                phi: Some(ScalarProfile::Fourier {
                    base: 0.2,
                    amplitude: 0.5,
                    mode1: 2,
                    mode2: 1,
                    phase1: 0.0,
                    phase2: 0.4,
                }),
            },
            EnergyTerm::Magnetic {
                alpha: 0.6,
                field: BackgroundField::Linear {
                    value: [0.3, -0.2, 1.0],
                    gradient: [[0.1, 0.0, 0.05], [0.0, -0.1, 0.0], [0.02, 0.0, 0.0]],
                },
            },
        ]
    }

    #[test]
    fn quadrature_sphere_bending_energy_is_sixteen_pi_kappa() {
        for r in [0.5, 1.0, 2.0] {
            let q = quadrature_sphere(r, 32).unwrap();
            let model = [EnergyTerm::Bending { kappa: ScalarProfile::Constant(1.0) }];
            let e = quadrature_sphere_energy(&model, &q).unwrap();
            assert!((e - 16.0 * PI).abs() < 1e-11, "R={r}: {e}");
        }
    }

    #[test]
    fn torus_gaussian_energy_vanishes() {
        let sf = torus();
        let model = [EnergyTerm::Gaussian { kappa_bar: ScalarProfile::Constant(1.0) }];
        let e = total_energy(&model, &sf).unwrap();
        assert!(e.abs() < 1e-11, "∮ℛ dA = {e}");
    }

    #[test]
    fn soap_density_is_tension_times_area_element() {
        let sf = torus();
        let geo = crate::geometry::compute_geometry(&sf).unwrap();
        let model = [EnergyTerm::Soap { sigma: ScalarProfile::Constant(2.0) }];
        let dens = energy_density(&model, &sf).unwrap();
        for i in 0..sf.grid.n1 {
            for j in 0..sf.grid.n2 {
                assert!((dens.at(i, j) - 2.0 * geo.at(i, j).sqrt_g).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn spontaneous_curvature_expansion_matches_pointwise() {
        let sf = torus();
        let (kappa, k0) = (1.7, 0.6);
        let expansion = expand_spontaneous_curvature(kappa, k0);
        assert_eq!(expansion.len(), 3);
        let dens = energy_density(&expansion, &sf).unwrap();
        let geo = crate::geometry::compute_geometry(&sf).unwrap();
        for i in 0..sf.grid.n1 {
            for j in 0..sf.grid.n2 {
                let pg = geo.at(i, j);
                let direct = kappa * pg.sqrt_g * (pg.k - k0) * (pg.k - k0);
                assert!((dens.at(i, j) - direct).abs() < 1e-12);
            }
        }
        // Zero-coefficient terms are dropped.
        assert_eq!(expand_spontaneous_curvature(1.0, 0.0).len(), 1);
    }

    #[test]
    fn torus_volume_matches_closed_form() {
        let sf = torus();
        let v = volume_functional(&sf).unwrap();
        let exact = 2.0 * PI * PI * 1.0 * 1.0 * 3.0;
        assert!((v - exact).abs() < 1e-9, "volume {v} vs {exact}");
    }

    #[test]
    fn open_surfaces_reject_volume_coupling() {
        let def = SurfaceDef::Sphere { radius: 1.0 };
        let sf = make_surface(&def, def.default_grid(16, 16).unwrap()).unwrap();
        assert!(matches!(volume_functional(&sf), Err(EnergyError::NotClosedSurface)));
        let model = [EnergyTerm::Volume { pressure: 1.0 }];
        assert!(matches!(
            total_energy(&model, &sf),
            Err(EnergyError::NotClosedSurface)
        ));
    }

    #[test]
    fn phase_field_requires_phi() {
        let sf = torus();
        let model = [EnergyTerm::PhaseField {
            lambda: 1.0,
            beta_phi: 0.5,
            potential: vec![],
            phi: None,
        }];
        assert!(matches!(
            total_energy(&model, &sf),
            Err(EnergyError::MissingField("phi"))
        ));
    }

    #[test]
    fn constant_phase_field_reduces_to_mean_plus_soap() {
        let sf = torus();
        let c = 0.7;
        let (lambda, beta_phi) = (2.0, 0.9);
        let pot = vec![0.3, -0.1, 0.2];
        let pf = [EnergyTerm::PhaseField {
            lambda,
            beta_phi,
            potential: pot.clone(),
            phi: Some(ScalarProfile::Constant(c)),
        }];
        let equivalent = [
            EnergyTerm::Soap { sigma: ScalarProfile::Constant(poly_eval(&pot, c)) },
            EnergyTerm::Mean { beta: ScalarProfile::Constant(beta_phi * c) },
        ];
        let d1 = energy_density(&pf, &sf).unwrap();
        let d2 = energy_density(&equivalent, &sf).unwrap();
        for k in 0..sf.grid.len() {
            assert!((d1.data[k] - d2.data[k]).abs() < 1e-13);
        }
    }

    #[test]
    fn jet_evaluation_agrees_with_value_evaluation() {
        let sf = torus();
        let model = all_terms();
        for (i, j) in [(3, 5), (10, 17), (20, 2)] {
            let cf = PointCtx::<f64>::new(&sf, i, j).unwrap();
            let cj = PointCtx::<Jet2>::new(&sf, i, j).unwrap();
            for term in &model {
                let df = term_density(term, &cf).unwrap();
                let dj = term_density(term, &cj).unwrap();
                assert!(
                    (df - dj.value()).abs() < 1e-12 * (1.0 + df.abs()),
                    "density mismatch for {term:?}"
                );
                let gf = term_phase_gradient(term, &cf).unwrap();
                let gj = term_phase_gradient(term, &cj).unwrap();
                for mu in 0..3 {
                    assert!((gf.df_dx[mu] - gj.df_dx[mu].value()).abs() < 1e-12);
                    for a in 0..2 {
                        assert!((gf.df_dxa[a][mu] - gj.df_dxa[a][mu].value()).abs() < 1e-12);
                    }
                    for s in 0..3 {
                        assert!((gf.df_dxab[s][mu] - gj.df_dxab[s][mu].value()).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn magnetic_energy_on_quadrature_sphere_matches_closed_form() {
        let q = quadrature_sphere(1.5, 32).unwrap();
        let b = [0.4, -0.3, 0.8];
        let alpha = 0.7;
        let model = [EnergyTerm::Magnetic {
            alpha,
            field: BackgroundField::Constant { value: b },
        }];
        let e = quadrature_sphere_energy(&model, &q).unwrap();
        // ∮ (n·B)² dA = |B|² · 4πR²/3 by symmetry.
        let b2 = b.iter().map(|x| x * x).sum::<f64>();
        let exact = -alpha * b2 * 4.0 * PI * 1.5 * 1.5 / 3.0;
        assert!((e - exact).abs() < 1e-11, "{e} vs {exact}");
    }
}
