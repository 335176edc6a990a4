//! Second variation (energy Hessian) of curvature-polynomial densities
//! `√g f(K)` — the tension, quadratic-bending, and linear-mean-curvature
//! terms, with moduli allowed to vary over the parameter domain.
//!
//! Two independent assemblies are provided:
//!
//! 1. [`second_variation`] contracts precomputed phase-space Hessian blocks
//!    (conjugate to `W_a` and the covariant `∇_a∇_bW`) plus the connection
//!    coupling induced by `δΓ`;
//! 2. [`second_variation_expanded`] evaluates a fully expanded scalar form
//!    written in the invariants of `τ_ab = X_a·W_b`, `φ_a = n·W_a`, and
//!    `A_ab = n·∇_a∇_bW`.
//!
//! Both equal `d²/dt² F[X + tW]` at `t = 0`. For a rigid-rotation variation
//! the deformation follows the rotation orbit instead of the straight line,
//! which adds the first-variation integrand evaluated on the orbit
//! acceleration `b × (b × X)`.
//!
//! The topological (Gaussian) term, the pressure–volume coupling, and the
//! external-field couplings are outside this family and are refused. Note the
//! topological term contributes nothing to any closed-surface variation
//! anyway.

use crate::catalog::{
    rigid_orbit_acceleration, PathKind, QuadratureSphere, ScalarProfile, VariationField,
};
use crate::energy::{EnergyError, EnergyModel, EnergyTerm};
use crate::geometry::{
    compute_geometry, sym2, GeometryError, SurfaceField, SYM_WEIGHT,
};
use crate::grid::Field;
use crate::jet::dot3;
use crate::oracle::{fd_second_variation, first_variation_pre_ibp, FdResult, OracleConfig, OracleError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SecondVariationError {
    #[error("no second-variation support for {0}")]
    UnsupportedTerm(&'static str),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// The density coefficients `(f, f', f'')` of the model at one point, as a
/// polynomial family in the total curvature `K`.
fn coefficients(
    model: &EnergyModel,
    grid: &crate::grid::GridSpec,
    u: f64,
    v: f64,
    k: f64,
) -> Result<(f64, f64, f64), SecondVariationError> {
    let (mut f, mut fp, mut fpp) = (0.0, 0.0, 0.0);
    for term in model {
        match term {
            EnergyTerm::Soap { sigma } => {
                f += sigma.eval::<f64>(grid, u, v).val;
            }
            EnergyTerm::Bending { kappa } => {
                let kp = kappa.eval::<f64>(grid, u, v).val;
                f += kp * k * k;
                fp += 2.0 * kp * k;
                fpp += 2.0 * kp;
            }
            EnergyTerm::Mean { beta } => {
                let b = beta.eval::<f64>(grid, u, v).val;
                f += b * k;
                fp += b;
            }
            EnergyTerm::Gaussian { .. } => {
                return Err(SecondVariationError::UnsupportedTerm("the topological term"))
            }
            EnergyTerm::Volume { .. } => {
                return Err(SecondVariationError::UnsupportedTerm(
                    "the pressure–volume coupling",
                ))
            }
            EnergyTerm::PhaseField { .. } => {
                return Err(SecondVariationError::UnsupportedTerm(
                    "the scalar-field coupling",
                ))
            }
            EnergyTerm::Magnetic { .. } => {
                return Err(SecondVariationError::UnsupportedTerm(
                    "the external-field coupling",
                ))
            }
        }
    }
    Ok((f, fp, fpp))
}

/// Per-node phase-space Hessian blocks of `√g f(K)`, together with the point
/// geometry the quadratic form needs.
///
/// Contraction slots: `u` legs pair with `W_a` (plain first derivatives) and
/// `w` legs pair with the covariant `∇_a∇_bW` in symmetric-pair storage.
/// `h_aa` carries the curvature-augmented convention in which the assembled
/// form needs the explicit `−m^{ab}K_ab |φ|²` counter-term; `h_wu` includes
/// the bending-momentum coupling `f'g^{ab} t^c ⊗ n` while its transpose
/// `h_uw` does not — that coupling enters the assembly once more explicitly,
/// and the imbalance between `h_wu` and `h_uw` is a real feature of the
/// mixed curvature derivatives, not a bug.
#[derive(Debug, Clone, Copy)]
pub struct PointHessian {
    /// `[a][c][μ][ν]`, pairs `W_a^μ W_c^ν`.
    pub h_aa: [[[[f64; 3]; 3]; 2]; 2],
    /// `[s][c][μ][ν]`, pairs `(∇∇W)_s^μ W_c^ν`.
    pub h_wu: [[[[f64; 3]; 3]; 2]; 3],
    /// `[a][s][μ][ν]`, pairs `W_a^μ (∇∇W)_s^ν`.
    pub h_uw: [[[[f64; 3]; 3]; 3]; 2],
    /// `[s][t][μ][ν]`, pairs `(∇∇W)_s^μ (∇∇W)_t^ν`.
    pub h_top: [[[[f64; 3]; 3]; 3]; 3],
    /// Bending momentum scalar `m^{ab} = √g f' g^{ab}`.
    pub m: [f64; 3],
    // Geometry snapshot used by the assembly and the connection coupling.
    pub sqrt_g: f64,
    pub n: [f64; 3],
    pub dx: [[f64; 3]; 2],
    pub ginv: [f64; 3],
    pub kab: [f64; 3],
}

/// Assemble the Hessian blocks of the model at every node.
pub fn hessian_blocks(
    model: &EnergyModel,
    sf: &SurfaceField,
) -> Result<Field<PointHessian>, SecondVariationError> {
    let grid = sf.grid;
    let geo = compute_geometry(sf)?;
    let zero = PointHessian {
        h_aa: [[[[0.0; 3]; 3]; 2]; 2],
        h_wu: [[[[0.0; 3]; 3]; 2]; 3],
        h_uw: [[[[0.0; 3]; 3]; 3]; 2],
        h_top: [[[[0.0; 3]; 3]; 3]; 3],
        m: [0.0; 3],
        sqrt_g: 0.0,
        n: [0.0; 3],
        dx: [[0.0; 3]; 2],
        ginv: [0.0; 3],
        kab: [0.0; 3],
    };
    let mut out = Field::new(&grid, zero);
    for i in 0..grid.n1 {
        for j in 0..grid.n2 {
            let pg = geo.at(i, j);
            let pj = sf.point_jets_f64(i, j);
            let (u, v) = grid.coord(i, j);
            let (f, fp, fpp) = coefficients(model, &grid, u, v, pg.k)?;
            let sg = pg.sqrt_g;
            let gi = pg.ginv;
            let ku = pg.kup;
            let n = pg.n;
            let dx = pj.dx;
            // Raised tangents t^a_μ = g^{ab}X_μ,b and their curvature images
            // (Kt)^a_μ = K^{ab}X_μ,b.
            let mut t = [[0.0; 3]; 2];
            let mut kt = [[0.0; 3]; 2];
            for a in 0..2 {
                for b in 0..2 {
                    for mu in 0..3 {
                        t[a][mu] += gi[sym2(a, b)] * dx[b][mu];
                        kt[a][mu] += ku[sym2(a, b)] * dx[b][mu];
                    }
                }
            }
            // S_μν = K^{ef} X_μ,e X_ν,f.
            let mut s_mat = [[0.0; 3]; 3];
            for e in 0..2 {
                for ff in 0..2 {
                    for mu in 0..3 {
                        for nu in 0..3 {
                            s_mat[mu][nu] += ku[sym2(e, ff)] * dx[e][mu] * dx[ff][nu];
                        }
                    }
                }
            }

            let mut ph = zero;
            ph.sqrt_g = sg;
            ph.n = n;
            ph.dx = dx;
            ph.ginv = gi;
            ph.kab = pg.kab;
            for s in 0..3 {
                ph.m[s] = sg * fp * gi[s];
            }

            for a in 0..2 {
                for c in 0..2 {
                    let gac = gi[sym2(a, c)];
                    let kac = ku[sym2(a, c)];
                    for mu in 0..3 {
                        for nu in 0..3 {
                            ph.h_aa[a][c][mu][nu] = sg
                                * (f * (t[a][mu] * t[c][nu] - t[c][mu] * t[a][nu])
                                    + (f * gac - 2.0 * fp * kac) * n[mu] * n[nu]
                                    - 2.0 * fp
                                        * (t[a][mu] * kt[c][nu] + kt[a][mu] * t[c][nu])
                                    + 4.0 * fpp * kt[a][mu] * kt[c][nu]
                                    + 2.0 * fp
                                        * (kt[c][mu] * t[a][nu]
                                            + kt[a][nu] * t[c][mu]
                                            + gac * s_mat[mu][nu]));
                        }
                    }
                }
            }

            for a in 0..2 {
                for b in a..2 {
                    let s = sym2(a, b);
                    let gab = gi[s];
                    for c in 0..2 {
                        // Coefficient of X_·,e in the n ⊗ X leg:
                        // −f'g^{ab}g^{ce} + 2f''g^{ab}K^{ce} + f'(g^{ac}g^{be} + g^{bc}g^{ae}).
                        let mut leg = [0.0; 3]; // over μ or ν of the tangent factor
                        for e in 0..2 {
                            let coef = -fp * gab * gi[sym2(c, e)]
                                + 2.0 * fpp * gab * ku[sym2(c, e)]
                                + fp * (gi[sym2(a, c)] * gi[sym2(b, e)]
                                    + gi[sym2(b, c)] * gi[sym2(a, e)]);
                            for x in 0..3 {
                                leg[x] += coef * dx[e][x];
                            }
                        }
                        for mu in 0..3 {
                            for nu in 0..3 {
                                ph.h_wu[s][c][mu][nu] =
                                    sg * (leg[nu] * n[mu] + fp * gab * t[c][mu] * n[nu]);
                                ph.h_uw[c][s][nu][mu] = sg * leg[nu] * n[mu];
                            }
                        }
                    }
                    for cc in 0..2 {
                        for dd in cc..2 {
                            let tt = sym2(cc, dd);
                            for mu in 0..3 {
                                for nu in 0..3 {
                                    ph.h_top[s][tt][mu][nu] =
                                        sg * fpp * gab * gi[tt] * n[mu] * n[nu];
                                }
                            }
                        }
                    }
                }
            }
            out.set(i, j, ph);
        }
    }
    Ok(out)
}

/// The quadratic form of one node: contract the blocks with `(W_a, ∇∇W)` and
/// add the connection coupling `2m^{ab}δΓ^c_{ab}(n·W_c)` that the covariant
/// second derivative does not see.
pub fn point_quadratic(ph: &PointHessian, dw: &[[f64; 3]; 2], w_cov: &[[f64; 3]; 3]) -> f64 {
    let mut q = 0.0;
    for a in 0..2 {
        for c in 0..2 {
            for mu in 0..3 {
                for nu in 0..3 {
                    q += dw[a][mu] * ph.h_aa[a][c][mu][nu] * dw[c][nu];
                }
            }
        }
    }
    for s in 0..3 {
        let ws = SYM_WEIGHT[s];
        for c in 0..2 {
            for mu in 0..3 {
                for nu in 0..3 {
                    q += ws * w_cov[s][mu] * ph.h_wu[s][c][mu][nu] * dw[c][nu];
                    q += ws * dw[c][nu] * ph.h_uw[c][s][nu][mu] * w_cov[s][mu];
                }
            }
        }
        for t2 in 0..3 {
            let wt = SYM_WEIGHT[t2];
            for mu in 0..3 {
                for nu in 0..3 {
                    q += ws * wt * w_cov[s][mu] * ph.h_top[s][t2][mu][nu] * w_cov[t2][nu];
                }
            }
        }
    }
    // Connection coupling: φ_c = n·W_c, raised-tangent pairing with ∇∇W.
    let phi = [dot3(&ph.n, &dw[0]), dot3(&ph.n, &dw[1])];
    let mut phi2 = 0.0;
    for c in 0..2 {
        for e in 0..2 {
            phi2 += ph.ginv[sym2(c, e)] * phi[c] * phi[e];
        }
    }
    for s in 0..3 {
        let mut inner = 0.0;
        for c in 0..2 {
            for e in 0..2 {
                inner += ph.ginv[sym2(c, e)] * dot3(&ph.dx[e], &w_cov[s]) * phi[c];
            }
        }
        q += SYM_WEIGHT[s] * ph.m[s] * inner;
        q -= SYM_WEIGHT[s] * ph.m[s] * ph.kab[s] * phi2;
    }
    q
}

fn orbit_correction(
    model: &EnergyModel,
    sf: &SurfaceField,
    w: &VariationField,
) -> Result<f64, SecondVariationError> {
    match w.path {
        PathKind::Straight => Ok(0.0),
        PathKind::RotationOrbit { axis } => {
            let geo = compute_geometry(sf)?;
            let acc = rigid_orbit_acceleration(sf, &geo, axis);
            Ok(first_variation_pre_ibp(model, sf, &acc)?)
        }
    }
}

/// Second variation `d²/dt² F` along the variation's deformation path,
/// assembled from the Hessian blocks.
pub fn second_variation(
    model: &EnergyModel,
    sf: &SurfaceField,
    w: &VariationField,
) -> Result<f64, SecondVariationError> {
    let blocks = hessian_blocks(model, sf)?;
    let grid = sf.grid;
    let mut acc = 0.0;
    for i in 0..grid.n1 {
        for j in 0..grid.n2 {
            let k = grid.idx(i, j);
            acc += grid.weight(i, j)
                * point_quadratic(&blocks.data[k], &w.dw.data[k], &w.w_cov.data[k]);
        }
    }
    Ok(acc + orbit_correction(model, sf, w)?)
}

/// Second variation from the fully expanded scalar form — an implementation
/// independent of the Hessian blocks.
///
/// With `τ_ab = X_a·W_b`, `φ_a = n·W_a`, `A_ab = n·∇_a∇_bW`, and the
/// first-variation scalars `δ√g/√g = trτ`, `δK = −2K^{ab}τ_ab − trA`:
///
/// ```text
/// δ²𝓕/√g = f [ (trτ)² − tr(g⁻¹τᵀg⁻¹τᵀ) + |φ|² ]
///        + f′[ −4(trτ)(Kτ) + 2T₁ + 2T₂ + 2T₃ − 2K^{ab}φ_aφ_b − K|φ|²
///              − 2(trA)(trτ) + 4τ·A + 2νφ ]
///        + f″[ δK ]²
/// ```
pub fn second_variation_expanded(
    model: &EnergyModel,
    sf: &SurfaceField,
    w: &VariationField,
) -> Result<f64, SecondVariationError> {
    let grid = sf.grid;
    let geo = compute_geometry(sf)?;
    let mut acc = 0.0;
    for i in 0..grid.n1 {
        for j in 0..grid.n2 {
            let kidx = grid.idx(i, j);
            let pg = geo.at(i, j);
            let pj = sf.point_jets_f64(i, j);
            let (u, v) = grid.coord(i, j);
            let (f, fp, fpp) = coefficients(model, &grid, u, v, pg.k)?;
            let dw = &w.dw.data[kidx];
            let w_cov = &w.w_cov.data[kidx];
            let gi = |a: usize, b: usize| pg.ginv[sym2(a, b)];
            let ku = |a: usize, b: usize| pg.kup[sym2(a, b)];
            // τ[a][b] = X_a · W_b — not symmetric.
            let mut tau = [[0.0; 2]; 2];
            for a in 0..2 {
                for b in 0..2 {
                    tau[a][b] = dot3(&pj.dx[a], &dw[b]);
                }
            }
            let (mut trtau, mut ktau) = (0.0, 0.0);
            for a in 0..2 {
                for b in 0..2 {
                    trtau += gi(a, b) * tau[a][b];
                    ktau += ku(a, b) * tau[a][b];
                }
            }
            // tr(g⁻¹τᵀ g⁻¹τᵀ) and the three curvature-weighted squares.
            let (mut trcross, mut t1, mut t2, mut t3) = (0.0, 0.0, 0.0, 0.0);
            for c in 0..2 {
                for d in 0..2 {
                    for a in 0..2 {
                        for e in 0..2 {
                            trcross += gi(c, d) * tau[d][a] * gi(a, e) * tau[e][c];
                            t1 += ku(c, d) * tau[d][a] * gi(a, e) * tau[e][c];
                            t2 += ku(a, d) * gi(c, e) * tau[e][a] * tau[d][c];
                            t3 += gi(a, c) * ku(e, d) * tau[d][a] * tau[e][c];
                        }
                    }
                }
            }
            let phi = [dot3(&pg.n, &dw[0]), dot3(&pg.n, &dw[1])];
            let (mut phi2, mut kphiphi) = (0.0, 0.0);
            for a in 0..2 {
                for b in 0..2 {
                    phi2 += gi(a, b) * phi[a] * phi[b];
                    kphiphi += ku(a, b) * phi[a] * phi[b];
                }
            }
            let aa = [
                dot3(&pg.n, &w_cov[0]),
                dot3(&pg.n, &w_cov[1]),
                dot3(&pg.n, &w_cov[2]),
            ];
            let (mut tra, mut taua, mut nuphi) = (0.0, 0.0, 0.0);
            for s in 0..3 {
                tra += SYM_WEIGHT[s] * pg.ginv[s] * aa[s];
            }
            // τ·A = g^{ca}g^{db} τ_{ba} A_{cd}.
            for c in 0..2 {
                for a in 0..2 {
                    for d in 0..2 {
                        for b in 0..2 {
                            taua += gi(c, a) * gi(d, b) * tau[b][a] * aa[sym2(c, d)];
                        }
                    }
                }
            }
            // νφ = g^{ab} g^{ce} (X_e·∇_a∇_bW) φ_c.
            for s in 0..3 {
                let mut inner = 0.0;
                for c in 0..2 {
                    for e in 0..2 {
                        inner += gi(c, e) * dot3(&pj.dx[e], &w_cov[s]) * phi[c];
                    }
                }
                nuphi += SYM_WEIGHT[s] * pg.ginv[s] * inner;
            }
            let dk = -2.0 * ktau - tra;
            let dens = pg.sqrt_g
                * (f * (trtau * trtau - trcross + phi2)
                    + fp * (-4.0 * trtau * ktau + 2.0 * t1 + 2.0 * t2 + 2.0 * t3
                        - 2.0 * kphiphi
                        - pg.k * phi2
                        - 2.0 * tra * trtau
                        + 4.0 * taua
                        + 2.0 * nuphi)
                    + fpp * dk * dk);
            acc += grid.weight(i, j) * dens;
        }
    }
    Ok(acc + orbit_correction(model, sf, w)?)
}

/// First variation of the Levi-Civita connection,
/// `δΓ^c_{ab} = g^{ce}[X_e·∇_a∇_bW − K_ab(n·W_e)]`, indexed `[c][sym2(a,b)]`.
/// Rigid motions leave the connection invariant, so both rows vanish for
/// translations and rotations.
pub fn connection_variation(
    sf: &SurfaceField,
    w: &VariationField,
) -> Result<Field<[[f64; 3]; 2]>, SecondVariationError> {
    let grid = sf.grid;
    let geo = compute_geometry(sf)?;
    let mut out = Field::new(&grid, [[0.0; 3]; 2]);
    for i in 0..grid.n1 {
        for j in 0..grid.n2 {
            let k = grid.idx(i, j);
            let pg = geo.at(i, j);
            let pj = sf.point_jets_f64(i, j);
            let mut dg = [[0.0; 3]; 2];
            for c in 0..2 {
                for s in 0..3 {
                    for e in 0..2 {
                        dg[c][s] += pg.ginv[sym2(c, e)]
                            * (dot3(&pj.dx[e], &w.w_cov.data[k][s])
                                - pg.kab[s] * dot3(&pg.n, &w.dw.data[k][e]));
                    }
                }
            }
            out.set(i, j, dg);
        }
    }
    Ok(out)
}

/// Second variation of the tension energy under a pure normal variation
/// `W = φn`, in its reduced scalar form `∫√g σ [(∇φ)² + ℛφ²]`.
pub fn soap_normal_second_variation(
    sigma: &ScalarProfile,
    sf: &SurfaceField,
    phi: &ScalarProfile,
) -> Result<f64, SecondVariationError> {
    let grid = sf.grid;
    let geo = compute_geometry(sf)?;
    let mut acc = 0.0;
    for i in 0..grid.n1 {
        for j in 0..grid.n2 {
            let pg = geo.at(i, j);
            let (u, v) = grid.coord(i, j);
            let s = sigma.eval::<f64>(&grid, u, v).val;
            let p = phi.eval::<f64>(&grid, u, v);
            let mut grad2 = 0.0;
            for a in 0..2 {
                for b in 0..2 {
                    grad2 += pg.ginv[sym2(a, b)] * p.d[a] * p.d[b];
                }
            }
            acc += grid.weight(i, j) * s * pg.sqrt_g * (grad2 + pg.r * p.val * p.val);
        }
    }
    Ok(acc)
}

/// The same reduced form on the grid-free sphere with a uniform amplitude:
/// the gradient term drops and `∮ℛ dA` carries the whole answer.
pub fn soap_normal_second_variation_quadrature(
    sigma: f64,
    q: &QuadratureSphere,
    phi: f64,
) -> f64 {
    sigma * phi * phi * q.total_scalar_curvature()
}

/// Pointwise Legendre–Hadamard value: the principal (highest-derivative)
/// part of the second-variation density, `√g f″ (g^{ab} n·∇_a∇_bW)²`. A
/// well-posed bending model keeps this non-negative for every variation.
pub fn legendre_hadamard(
    model: &EnergyModel,
    sf: &SurfaceField,
    w: &VariationField,
) -> Result<Field<f64>, SecondVariationError> {
    let grid = sf.grid;
    let geo = compute_geometry(sf)?;
    let mut out = Field::new(&grid, 0.0);
    for i in 0..grid.n1 {
        for j in 0..grid.n2 {
            let k = grid.idx(i, j);
            let pg = geo.at(i, j);
            let (u, v) = grid.coord(i, j);
            let (_, _, fpp) = coefficients(model, &grid, u, v, pg.k)?;
            let mut tra = 0.0;
            for s in 0..3 {
                tra += SYM_WEIGHT[s] * pg.ginv[s] * dot3(&pg.n, &w.w_cov.data[k][s]);
            }
            out.set(i, j, pg.sqrt_g * fpp * tra * tra);
        }
    }
    Ok(out)
}

/// Compare the block-assembled second variation against the independent
/// finite-difference oracle along the same deformation path.
#[derive(Debug, Clone, Copy)]
pub struct SecondVariationMatch {
    pub analytic: f64,
    pub oracle: FdResult,
    pub rel_gap: f64,
}

pub fn oracle_second_variation_match(
    model: &EnergyModel,
    sf: &SurfaceField,
    w: &VariationField,
    cfg: &OracleConfig,
) -> Result<SecondVariationMatch, SecondVariationError> {
    let analytic = second_variation(model, sf, w)?;
    let oracle = fd_second_variation(model, sf, w, cfg)?;
    let scale = analytic.abs().max(oracle.value.abs()).max(1e-30);
    Ok(SecondVariationMatch {
        analytic,
        oracle,
        rel_gap: (analytic - oracle.value).abs() / scale,
    })
}
