//! Reference surfaces, scalar profiles, variation fields, and the grid-free
//! quadrature sphere.
//!
//! Surfaces are declared by parameters and realized on a grid through the
//! analytic-jet builder, so every catalog surface carries exact parametric
//! derivatives through fourth order. Variation fields carry the displacement
//! `W`, its plain partials, and its covariant second derivative
//! `∇_a∇_b W = ∂_a∂_b W − Γ^c_{ab} ∂_c W`.

use crate::geometry::{
    build_from_analytic, point_geometry, AnalyticSurface, GeometryError, GeometryField,
    SurfaceField,
};
use crate::grid::{Field, GridSpec};
use crate::jet::{cross3, Jet2, Jet4, Scalar};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("grid incompatible with surface: {0}")]
    IncompatibleGrid(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Tolerance for matching a grid's coordinate ranges against the canonical
/// parameter domain of a surface.
const RANGE_TOL: f64 = 1e-12;

// ---------------------------------------------------------------------------
// Surfaces
// ---------------------------------------------------------------------------

/// Parametric reference surfaces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SurfaceDef {
    /// Sphere band `θ ∈ (0, π)` (clamped), `φ ∈ [0, 2π)` (periodic); the
    /// default band keeps well away from the polar coordinate degeneracy.
    Sphere { radius: f64 },
    /// Grid-free closed sphere integrated by Gauss–Legendre quadrature in
    /// `cos θ`; use [`quadrature_sphere`], not [`make_surface`].
    SphereQuadrature { radius: f64 },
    /// Cylinder of radius `r`, closed into a period `L` along its axis, so
    /// both axes are periodic.
    Cylinder { radius: f64, length: f64 },
    /// Round torus, minor radius `a`, major radius `c`, `0 < a < c`.
    Torus { minor: f64, major: f64 },
    /// Graph `z = A cos(k1 u) cos(k2 v)` over a clamped planar patch.
    MongePatch { amplitude: f64, k1: f64, k2: f64 },
    /// Torus with radial ripple `ρ = a + ε cos(mθ) cos(kφ)`, `|ε| < a/4`.
    PerturbedTorus {
        minor: f64,
        major: f64,
        amplitude: f64,
        mode_theta: u32,
        mode_phi: u32,
    },
}

impl SurfaceDef {
    pub fn validate(&self) -> Result<(), CatalogError> {
        let bad = |msg: String| Err(CatalogError::InvalidParameter(msg));
        match *self {
            SurfaceDef::Sphere { radius } | SurfaceDef::SphereQuadrature { radius } => {
                if !(radius > 0.0) {
                    return bad(format!("sphere radius must be positive, got {radius}"));
                }
            }
            SurfaceDef::Cylinder { radius, length } => {
                if !(radius > 0.0) || !(length > 0.0) {
                    return bad(format!(
                        "cylinder radius and length must be positive, got r={radius}, L={length}"
                    ));
                }
            }
            SurfaceDef::Torus { minor, major } => {
                if !(minor > 0.0 && minor < major) {
                    return bad(format!(
                        "torus radii must satisfy 0 < minor < major, got a={minor}, c={major}"
                    ));
                }
            }
            SurfaceDef::MongePatch { amplitude, k1, k2 } => {
                if !amplitude.is_finite() || !k1.is_finite() || !k2.is_finite() {
                    return bad("Monge patch parameters must be finite".into());
                }
            }
            SurfaceDef::PerturbedTorus { minor, major, amplitude, .. } => {
                if !(minor > 0.0 && minor < major) {
                    return bad(format!(
                        "torus radii must satisfy 0 < minor < major, got a={minor}, c={major}"
                    ));
                }
                if !(amplitude.abs() < minor / 4.0) {
                    return bad(format!(
                        "ripple amplitude must satisfy |ε| < a/4, got ε={amplitude}, a={minor}"
                    ));
                }
            }
        }
        Ok(())
    }

    /// The canonical grid for this surface at the requested resolution.
    pub fn default_grid(&self, n1: usize, n2: usize) -> Result<GridSpec, CatalogError> {
        let g = match *self {
            SurfaceDef::Sphere { .. } => {
                GridSpec::new(n1, n2, (0.3, PI - 0.3), (0.0, TAU), false, true)
            }
            SurfaceDef::SphereQuadrature { .. } => {
                return Err(CatalogError::InvalidParameter(
                    "the quadrature sphere is grid-free; use quadrature_sphere()".into(),
                ))
            }
            SurfaceDef::Cylinder { length, .. } => {
                GridSpec::new(n1, n2, (0.0, TAU), (0.0, length), true, true)
            }
            SurfaceDef::Torus { .. } | SurfaceDef::PerturbedTorus { .. } => {
                GridSpec::new(n1, n2, (0.0, TAU), (0.0, TAU), true, true)
            }
            SurfaceDef::MongePatch { .. } => {
                GridSpec::new(n1, n2, (-1.0, 1.0), (-1.0, 1.0), false, false)
            }
        };
        Ok(g.map_err(GeometryError::from)?)
    }

    /// Whether the realized discrete surface closes around a volume.
    pub fn encloses_volume(&self) -> bool {
        matches!(
            self,
            SurfaceDef::Torus { .. } | SurfaceDef::PerturbedTorus { .. }
        )
    }

    fn check_grid(&self, grid: &GridSpec) -> Result<(), CatalogError> {
        let near = |x: f64, y: f64| (x - y).abs() < RANGE_TOL;
        let fail = |msg: String| Err(CatalogError::IncompatibleGrid(msg));
        match *self {
            SurfaceDef::Sphere { .. } => {
                if grid.periodic1 || !grid.periodic2 {
                    return fail("sphere band needs clamped θ, periodic φ".into());
                }
                if !(grid.a1 > 0.0 && grid.b1 < PI) {
                    return fail(format!(
                        "θ band [{}, {}] must avoid the poles (0, π)",
                        grid.a1, grid.b1
                    ));
                }
                if !near(grid.a2, 0.0) || !near(grid.b2, TAU) {
                    return fail("φ axis must cover [0, 2π)".into());
                }
            }
            SurfaceDef::SphereQuadrature { .. } => {
                return fail("the quadrature sphere is grid-free".into());
            }
            SurfaceDef::Cylinder { length, .. } => {
                if !grid.closed() {
                    return fail("cylinder needs both axes periodic".into());
                }
                if !near(grid.a1, 0.0) || !near(grid.b1, TAU) {
                    return fail("angular axis must cover [0, 2π)".into());
                }
                if !near(grid.b2 - grid.a2, length) {
                    return fail(format!(
                        "axial range {} does not match the period {length}",
                        grid.b2 - grid.a2
                    ));
                }
            }
            SurfaceDef::Torus { .. } | SurfaceDef::PerturbedTorus { .. } => {
                if !grid.closed() {
                    return fail("torus needs both axes periodic".into());
                }
                for (a, b) in [(grid.a1, grid.b1), (grid.a2, grid.b2)] {
                    if !near(a, 0.0) || !near(b, TAU) {
                        return fail("both axes must cover [0, 2π)".into());
                    }
                }
            }
            SurfaceDef::MongePatch { .. } => {
                if grid.periodic1 || grid.periodic2 {
                    return fail("Monge patch needs clamped axes".into());
                }
            }
        }
        Ok(())
    }
}

impl AnalyticSurface for SurfaceDef {
    fn eval(&self, u: f64, v: f64) -> [Jet4; 3] {
        let t = Jet4::var_u(u);
        let p = Jet4::var_v(v);
        match *self {
            SurfaceDef::Sphere { radius } | SurfaceDef::SphereQuadrature { radius } => [
                (t.sin() * p.cos()).scale(radius),
                (t.sin() * p.sin()).scale(radius),
                t.cos().scale(radius),
            ],
            SurfaceDef::Cylinder { radius, .. } => {
                [t.cos().scale(radius), t.sin().scale(radius), p]
            }
            // Traversed with θ reversed in z so that X_1 × X_2 points outward.
            SurfaceDef::Torus { minor, major } => {
                let rad = t.cos().scale(minor) + Jet4::constant(major);
                [rad * p.cos(), rad * p.sin(), -t.sin().scale(minor)]
            }
            SurfaceDef::MongePatch { amplitude, k1, k2 } => [
                t,
                p,
                (t.scale(k1).cos() * p.scale(k2).cos()).scale(amplitude),
            ],
            SurfaceDef::PerturbedTorus {
                minor,
                major,
                amplitude,
                mode_theta,
                mode_phi,
            } => {
                let rho = Jet4::constant(minor)
                    + (t.scale(mode_theta as f64).cos() * p.scale(mode_phi as f64).cos())
                        .scale(amplitude);
                let rad = rho * t.cos() + Jet4::constant(major);
                [rad * p.cos(), rad * p.sin(), -(rho * t.sin())]
            }
        }
    }
}

/// Realize a catalog surface on a grid.
pub fn make_surface(def: &SurfaceDef, grid: GridSpec) -> Result<SurfaceField, CatalogError> {
    def.validate()?;
    def.check_grid(&grid)?;
    let mut sf = build_from_analytic(def, grid)?;
    sf.encloses_volume = def.encloses_volume();
    Ok(sf)
}

// ---------------------------------------------------------------------------
// Scalar profiles
// ---------------------------------------------------------------------------

/// A scalar function of the surface parameters: either a constant or a
/// single-product Fourier profile
/// `base + amplitude · cos(m1 ω1 (u−a1) + φ1) · cos(m2 ω2 (v−a2) + φ2)`,
/// with `ω_i = 2π / (domain length)` so periodic axes stay periodic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScalarProfile {
    Constant(f64),
    Fourier {
        base: f64,
        amplitude: f64,
        #[serde(default)]
        mode1: u32,
        #[serde(default)]
        mode2: u32,
        #[serde(default)]
        phase1: f64,
        #[serde(default)]
        phase2: f64,
    },
}

/// A scalar profile value with its explicit first and second parameter
/// derivatives, each expressed in the ambient scalar ring.
#[derive(Debug, Clone, Copy)]
pub struct ProfileJet<T> {
    pub val: T,
    /// `∂_a` of the profile.
    pub d: [T; 2],
    /// `∂_a ∂_b` in symmetric-pair storage.
    pub dd: [T; 3],
}

impl<T: Scalar> ProfileJet<T> {
    pub fn constant(x: f64) -> Self {
        Self {
            val: T::constant(x),
            d: [T::zero(); 2],
            dd: [T::zero(); 3],
        }
    }
}

impl ScalarProfile {
    pub fn is_constant(&self) -> bool {
        matches!(self, ScalarProfile::Constant(_))
    }

    /// The constant value, if this profile is constant.
    pub fn as_constant(&self) -> Option<f64> {
        match *self {
            ScalarProfile::Constant(c) => Some(c),
            _ => None,
        }
    }

    /// Evaluate the profile and its parameter derivatives at `(u, v)` in the
    /// scalar ring `T`; with `T = Jet2` the entries carry exact derivatives
    /// of the derivatives.
    pub fn eval<T: Scalar>(&self, grid: &GridSpec, u: f64, v: f64) -> ProfileJet<T> {
        match *self {
            ScalarProfile::Constant(c) => ProfileJet::constant(c),
            ScalarProfile::Fourier {
                base,
                amplitude,
                mode1,
                mode2,
                phase1,
                phase2,
            } => {
                let w1 = mode1 as f64 * TAU / (grid.b1 - grid.a1);
                let w2 = mode2 as f64 * TAU / (grid.b2 - grid.a2);
                let arg1 = T::var_u(u).scale(w1) + T::constant(phase1 - w1 * grid.a1);
                let arg2 = T::var_v(v).scale(w2) + T::constant(phase2 - w2 * grid.a2);
                let (s1, c1) = (arg1.sin(), arg1.cos());
                let (s2, c2) = (arg2.sin(), arg2.cos());
                let a = amplitude;
                ProfileJet {
                    val: T::constant(base) + (c1 * c2).scale(a),
                    d: [(s1 * c2).scale(-a * w1), (c1 * s2).scale(-a * w2)],
                    dd: [
                        (c1 * c2).scale(-a * w1 * w1),
                        (s1 * s2).scale(a * w1 * w2),
                        (c1 * c2).scale(-a * w2 * w2),
                    ],
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Variations
// ---------------------------------------------------------------------------

/// Families of surface variations `W`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VariationDef {
    /// Rigid translation along a constant direction.
    Translation { direction: [f64; 3] },
    /// Rigid rotation generator `W = b × X` about the origin.
    Rotation { axis: [f64; 3] },
    /// Normal displacement `W = φ(ξ) n` with a band-limited profile.
    Normal { profile: ScalarProfile },
    /// Reproducible band-limited random displacement (at most 4 Fourier
    /// modes per axis and component).
    RandomSmooth {
        seed: u64,
        amplitude: f64,
        max_mode: u32,
    },
}

/// How the variation extends to a finite deformation path; rigid rotations
/// follow their one-parameter orbit, everything else moves on straight lines
/// `X + tW`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PathKind {
    Straight,
    RotationOrbit { axis: [f64; 3] },
}

/// A variation field: displacement, plain partials, and covariant second
/// derivative.
#[derive(Debug, Clone)]
pub struct VariationField {
    pub grid: GridSpec,
    pub w: Field<[f64; 3]>,
    /// `∂_a W`.
    pub dw: Field<[[f64; 3]; 2]>,
    /// `∂_a ∂_b W` in symmetric-pair storage.
    pub ddw: Field<[[f64; 3]; 3]>,
    /// `∇_a ∇_b W = ∂_a∂_b W − Γ^c_{ab} ∂_c W`.
    pub w_cov: Field<[[f64; 3]; 3]>,
    pub path: PathKind,
}

fn covariant_hessian(
    geo: &GeometryField,
    dw: &Field<[[f64; 3]; 2]>,
    ddw: &Field<[[f64; 3]; 3]>,
) -> Field<[[f64; 3]; 3]> {
    Field::from_fn(&geo.grid, |i, j| {
        let pg = geo.at(i, j);
        let dwij = dw.at(i, j);
        let mut out = ddw.at(i, j);
        for s in 0..3 {
            for c in 0..2 {
                let gam = pg.gamma[c][s];
                for mu in 0..3 {
                    out[s][mu] -= gam * dwij[c][mu];
                }
            }
        }
        out
    })
}

/// Build a variation field over a realized surface.
pub fn make_variation(
    def: &VariationDef,
    sf: &SurfaceField,
    geo: &GeometryField,
) -> Result<VariationField, CatalogError> {
    let grid = sf.grid;
    match def {
        VariationDef::Translation { direction } => {
            let w = Field::new(&grid, *direction);
            let dw = Field::new(&grid, [[0.0; 3]; 2]);
            let ddw = Field::new(&grid, [[0.0; 3]; 3]);
            let w_cov = Field::new(&grid, [[0.0; 3]; 3]);
            Ok(VariationField { grid, w, dw, ddw, w_cov, path: PathKind::Straight })
        }
        VariationDef::Rotation { axis } => {
            let b = *axis;
            let w = Field::from_fn(&grid, |i, j| cross3(&b, &sf.x.at(i, j)));
            let dw = Field::from_fn(&grid, |i, j| {
                let dx = sf.dx.at(i, j);
                [cross3(&b, &dx[0]), cross3(&b, &dx[1])]
            });
            let ddw = Field::from_fn(&grid, |i, j| {
                let dd = sf.ddx.at(i, j);
                [cross3(&b, &dd[0]), cross3(&b, &dd[1]), cross3(&b, &dd[2])]
            });
            let w_cov = covariant_hessian(geo, &dw, &ddw);
            Ok(VariationField { grid, w, dw, ddw, w_cov, path: PathKind::RotationOrbit { axis: b } })
        }
        VariationDef::Normal { profile } => {
            if !sf.has_jets() {
                return Err(CatalogError::Geometry(GeometryError::MissingJets));
            }
            let mut w = Field::new(&grid, [0.0; 3]);
            let mut dw = Field::new(&grid, [[0.0; 3]; 2]);
            let mut ddw = Field::new(&grid, [[0.0; 3]; 3]);
            for i in 0..grid.n1 {
                for j in 0..grid.n2 {
                    let pj = sf.point_jets_jet2(i, j)?;
                    let pg = point_geometry(&pj);
                    let (u, v) = grid.coord(i, j);
                    let phi = profile.eval::<Jet2>(&grid, u, v).val;
                    let mut wv = [0.0; 3];
                    let mut dwv = [[0.0; 3]; 2];
                    let mut ddwv = [[0.0; 3]; 3];
                    for mu in 0..3 {
                        let comp = phi * pg.n[mu];
                        wv[mu] = comp.value();
                        dwv[0][mu] = comp.d(1, 0);
                        dwv[1][mu] = comp.d(0, 1);
                        ddwv[0][mu] = comp.d(2, 0);
                        ddwv[1][mu] = comp.d(1, 1);
                        ddwv[2][mu] = comp.d(0, 2);
                    }
                    w.set(i, j, wv);
                    dw.set(i, j, dwv);
                    ddw.set(i, j, ddwv);
                }
            }
            let w_cov = covariant_hessian(geo, &dw, &ddw);
            Ok(VariationField { grid, w, dw, ddw, w_cov, path: PathKind::Straight })
        }
        VariationDef::RandomSmooth { seed, amplitude, max_mode } => {
            if *max_mode > 4 {
                return Err(CatalogError::InvalidParameter(format!(
                    "random variations are band-limited to 4 modes per axis, got {max_mode}"
                )));
            }
            let m = *max_mode as usize;
            // Reproducible coefficient table: for each component and mode
            // pair, four products cos/sin × cos/sin.
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut coef = vec![[[0.0f64; 4]; 3]; (m + 1) * (m + 1)];
            for entry in coef.iter_mut() {
                for comp in entry.iter_mut() {
                    for c in comp.iter_mut() {
                        *c = rng.gen_range(-1.0..1.0);
                    }
                }
            }

            let w1 = TAU / (grid.b1 - grid.a1);
            let w2 = TAU / (grid.b2 - grid.a2);
            let eval = |i: usize, j: usize| -> [Jet2; 3] {
                let (u, v) = grid.coord(i, j);
                let mut out = [Jet2::constant(0.0); 3];
                for p in 0..=m {
                    for q in 0..=m {
                        // Mode weight keeps the field smooth as modes grow.
                        let wgt = amplitude / (1.0 + (p * p + q * q) as f64);
                        let arg1 = Jet2::var_u(u).scale(p as f64 * w1);
                        let arg2 = Jet2::var_v(v).scale(q as f64 * w2);
                        let (su, cu) = (arg1.sin(), arg1.cos());
                        let (sv, cv) = (arg2.sin(), arg2.cos());
                        let basis = [cu * cv, cu * sv, su * cv, su * sv];
                        let cf = &coef[p * (m + 1) + q];
                        for mu in 0..3 {
                            for (b, &cb) in basis.iter().enumerate() {
                                out[mu] = out[mu] + cb.scale(cf[mu][b] * wgt);
                            }
                        }
                    }
                }
                out
            };

            let mut w = Field::new(&grid, [0.0; 3]);
            let mut dw = Field::new(&grid, [[0.0; 3]; 2]);
            let mut ddw = Field::new(&grid, [[0.0; 3]; 3]);
            for i in 0..grid.n1 {
                for j in 0..grid.n2 {
                    let jet = eval(i, j);
                    let mut wv = [0.0; 3];
                    let mut dwv = [[0.0; 3]; 2];
                    let mut ddwv = [[0.0; 3]; 3];
                    for mu in 0..3 {
                        wv[mu] = jet[mu].value();
                        dwv[0][mu] = jet[mu].d(1, 0);
                        dwv[1][mu] = jet[mu].d(0, 1);
                        ddwv[0][mu] = jet[mu].d(2, 0);
                        ddwv[1][mu] = jet[mu].d(1, 1);
                        ddwv[2][mu] = jet[mu].d(0, 2);
                    }
                    w.set(i, j, wv);
                    dw.set(i, j, dwv);
                    ddw.set(i, j, ddwv);
                }
            }
            let w_cov = covariant_hessian(geo, &dw, &ddw);
            Ok(VariationField { grid, w, dw, ddw, w_cov, path: PathKind::Straight })
        }
    }
}

/// The second derivative of the rigid-rotation orbit `R(t) X` at `t = 0`,
/// `Ẍ = b × (b × X)`, packaged as a (straight-path) variation field. The
/// second variation along the orbit needs the first-variation integrand
/// evaluated on this field.
pub fn rigid_orbit_acceleration(
    sf: &SurfaceField,
    geo: &GeometryField,
    axis: [f64; 3],
) -> VariationField {
    let grid = sf.grid;
    let b = axis;
    let dbl = |v: &[f64; 3]| cross3(&b, &cross3(&b, v));
    let w = Field::from_fn(&grid, |i, j| dbl(&sf.x.at(i, j)));
    let dw = Field::from_fn(&grid, |i, j| {
        let dx = sf.dx.at(i, j);
        [dbl(&dx[0]), dbl(&dx[1])]
    });
    let ddw = Field::from_fn(&grid, |i, j| {
        let dd = sf.ddx.at(i, j);
        [dbl(&dd[0]), dbl(&dd[1]), dbl(&dd[2])]
    });
    let w_cov = covariant_hessian(geo, &dw, &ddw);
    VariationField { grid, w, dw, ddw, w_cov, path: PathKind::Straight }
}

// ---------------------------------------------------------------------------
// Quadrature sphere
// ---------------------------------------------------------------------------

/// A grid-free closed sphere: axisymmetric integrands are integrated exactly
/// (to quadrature precision) by Gauss–Legendre nodes in `s = cos θ`.
#[derive(Debug, Clone)]
pub struct QuadratureSphere {
    pub radius: f64,
    /// `(s_k, w_k)` Gauss–Legendre nodes and weights on `[−1, 1]`.
    nodes: Vec<(f64, f64)>,
}

/// Gauss–Legendre nodes/weights on `[−1, 1]` by Newton iteration on the
/// Legendre polynomial.
fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        // Standard initial guess for the i-th root.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            // Evaluate P_n and P_n' by the three-term recurrence.
            let (mut p0, mut p1) = (1.0f64, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (mut p0, mut p1) = (1.0f64, x);
        for k in 2..=n {
            let kf = k as f64;
            let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
            p0 = p1;
            p1 = p2;
        }
        let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    out
}

/// Build a quadrature sphere with `n` polar nodes.
pub fn quadrature_sphere(radius: f64, n: usize) -> Result<QuadratureSphere, CatalogError> {
    if !(radius > 0.0) {
        return Err(CatalogError::InvalidParameter(format!(
            "sphere radius must be positive, got {radius}"
        )));
    }
    if n < 4 {
        return Err(CatalogError::InvalidParameter(
            "quadrature sphere needs at least 4 polar nodes".into(),
        ));
    }
    Ok(QuadratureSphere { radius, nodes: gauss_legendre(n) })
}

impl QuadratureSphere {
    /// `∮ f(cos θ) dA` over the full closed sphere.
    pub fn integrate_axisymmetric(&self, f: impl Fn(f64) -> f64) -> f64 {
        let r2 = self.radius * self.radius;
        let mut acc = 0.0;
        for &(s, w) in &self.nodes {
            acc += w * f(s);
        }
        TAU * r2 * acc
    }

    pub fn area(&self) -> f64 {
        self.integrate_axisymmetric(|_| 1.0)
    }

    /// Enclosed volume `∮ (1/3) n·X dA`.
    pub fn volume(&self) -> f64 {
        self.integrate_axisymmetric(|_| self.radius / 3.0)
    }

    /// `∮ K² dA` with `K = 2/R`.
    pub fn total_mean_curvature_sq(&self) -> f64 {
        let k = 2.0 / self.radius;
        self.integrate_axisymmetric(|_| k * k)
    }

    /// `∮ ℛ dA` with `ℛ = 2/R²`.
    pub fn total_scalar_curvature(&self) -> f64 {
        let r = 2.0 / (self.radius * self.radius);
        self.integrate_axisymmetric(|_| r)
    }
}
