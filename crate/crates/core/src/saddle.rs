//! The coupled mixed problem: assembly of `[[K, Bᵀ], [B, 0]]`, its solution,
//! the Lagrangian and post-processing (energy, equilibrium, multiplier
//! resultants), plus MatrixMarket export.

use crate::beam::{
    assemble_beam, assemble_beam_full, beam_load_vector, beam_load_vector_full, beam_norm_gram,
    BeamLoads, BeamState,
};
use crate::coupling::{assemble_b, q_norm_gram, ConstraintBlock, DofLayout, MultiplierState};
use crate::error::{Error, Result};
use crate::geometry::{BeamModel, InterfaceSurface, Mesh, Vec3};
use crate::linalg::kkt::{kkt_dense, kkt_sparse};
use crate::linalg::{CsrMatrix, KktSolver, Method, PivotStats, TripletBuilder, DENSE_LIMIT};
use crate::matrix_market::{self, Symmetry};
use crate::solid::{
    assemble_solid_with, solid_load_vector, u_norm_gram, SolidLoads, SolidMaterial,
};
use nalgebra::{DMatrix, Matrix6};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Relative distance allowed between the beam tip and the interface centroid.
pub const TIP_TOL: f64 = 1e-8;

/// Everything needed to assemble the coupled system.
#[derive(Clone, Debug)]
pub struct CoupledModel {
    pub mesh: Mesh,
    pub material: SolidMaterial,
    pub beam: BeamModel,
    pub surface: InterfaceSurface,
    pub solid_loads: SolidLoads,
    pub beam_loads: BeamLoads,
    /// `L` in the solid and beam norms.
    pub length_scale: f64,
}

impl CoupledModel {
    /// Checks that the beam tip sits at the interface centroid.
    pub fn new(
        mesh: Mesh,
        material: SolidMaterial,
        beam: BeamModel,
        surface: InterfaceSurface,
        solid_loads: SolidLoads,
        beam_loads: BeamLoads,
        length_scale: f64,
    ) -> Result<Self> {
        material.validate()?;
        let gap = (beam.tip_point() - surface.centroid).norm();
        if gap > TIP_TOL * beam.length {
            return Err(Error::InvalidConfiguration(format!(
                "beam tip {:?} is {gap:e} away from the interface centroid {:?}",
                beam.tip_point().as_slice(),
                surface.centroid.as_slice()
            )));
        }
        if !(length_scale > 0.0) || !length_scale.is_finite() {
            return Err(Error::InvalidArgument {
                name: "characteristic_length",
                reason: format!("must be positive, got {length_scale}"),
            });
        }
        Ok(CoupledModel {
            mesh,
            material,
            beam,
            surface,
            solid_loads,
            beam_loads,
            length_scale,
        })
    }

    pub fn layout(&self) -> DofLayout {
        DofLayout::new(self.mesh.num_nodes(), self.beam.n_elements)
    }
}

/// Assembled blocks of the mixed system.
#[derive(Clone, Debug)]
pub struct SaddleSystem {
    pub model: CoupledModel,
    pub layout: DofLayout,
    /// `K_B ⊕ K_b`
    pub k: CsrMatrix,
    pub constraints: ConstraintBlock,
    pub f: Vec<f64>,
    /// `G_U ⊕ G_{W×R}`
    pub g_v: CsrMatrix,
    pub g_q: Matrix6<f64>,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct AssemblyOptions {
    /// Compute solid element matrices on the rayon pool.
    pub parallel: bool,
}

pub fn assemble_system(model: &CoupledModel) -> Result<SaddleSystem> {
    assemble_system_with(model, AssemblyOptions::default())
}

pub fn assemble_system_with(
    model: &CoupledModel,
    options: AssemblyOptions,
) -> Result<SaddleSystem> {
    let layout = model.layout();
    let kb = assemble_solid_with(&model.mesh, &model.material, options.parallel)?;
    let kbeam = assemble_beam(&model.beam)?;
    let k = kb.direct_sum(&kbeam);
    let constraints = assemble_b(&model.surface, &layout)?;
    let mut f = solid_load_vector(&model.mesh, &model.solid_loads, Some(&model.surface))?;
    f.extend(beam_load_vector(&model.beam, &model.beam_loads));
    let g_v = u_norm_gram(&model.mesh, model.length_scale)?
        .direct_sum(&beam_norm_gram(&model.beam, model.length_scale)?);
    let g_q = q_norm_gram(model.length_scale)?;
    if k.nrows() != layout.n_primal()
        || f.len() != layout.n_primal()
        || g_v.nrows() != layout.n_primal()
    {
        return Err(Error::DimensionMismatch {
            expected: layout.n_primal(),
            found: k.nrows(),
        });
    }
    Ok(SaddleSystem {
        model: model.clone(),
        layout,
        k,
        constraints,
        f,
        g_v,
        g_q,
    })
}

impl SaddleSystem {
    /// Number of primal unknowns `N`.
    pub fn n(&self) -> usize {
        self.layout.n_primal()
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.constraints.b
    }

    /// Rows of `B` selected by index (0..3 rotation, 3..6 displacement).
    pub fn b_rows(&self, rows: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), self.n(), |r, j| {
            self.constraints.b[(rows[r], j)]
        })
    }

    pub fn kkt_dense(&self) -> DMatrix<f64> {
        kkt_dense(&self.k, self.b())
    }

    /// Block-diagonal norm Gram `diag(G_V, G_Q)` matching the KKT layout.
    pub fn kkt_gram_dense(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut g = DMatrix::zeros(n + 6, n + 6);
        g.view_mut((0, 0), (n, n)).copy_from(&self.g_v.to_dense());
        g.view_mut((n, n), (6, 6)).copy_from(&self.g_q);
        g
    }

    pub fn kkt_sparse(&self) -> CsrMatrix {
        kkt_sparse(&self.k, self.b())
    }

    /// Right-hand side `(f, 0)`.
    pub fn rhs(&self) -> Vec<f64> {
        let mut r = self.f.clone();
        r.extend([0.0; 6]);
        r
    }

    pub fn solver(&self, dense_limit: usize) -> KktSolver {
        KktSolver::new(&self.k, self.b(), dense_limit)
    }

    /// Solid part of a primal vector.
    pub fn solid_part<'a>(&self, x: &'a [f64]) -> &'a [f64] {
        &x[..self.layout.n_solid()]
    }

    pub fn beam_part<'a>(&self, x: &'a [f64]) -> &'a [f64] {
        &x[self.layout.n_solid()..self.layout.n_primal()]
    }
}

/// `½ xᵀ K x − fᵀ x + qᵀ B x`
pub fn lagrangian_value(
    system: &SaddleSystem,
    x: &[f64],
    multipliers: &MultiplierState,
) -> Result<f64> {
    if x.len() != system.n() {
        return Err(Error::DimensionMismatch {
            expected: system.n(),
            found: x.len(),
        });
    }
    let q = multipliers.to_array();
    let bx = system.constraints.apply(x);
    let fx: f64 = system.f.iter().zip(x).map(|(a, b)| a * b).sum();
    Ok(0.5 * system.k.quad_form(x, x) - fx + q.iter().zip(&bx).map(|(a, b)| a * b).sum::<f64>())
}

/// Gradient of the Lagrangian: `(Kx + Bᵀq − f, Bx)`.
pub fn lagrangian_gradient(
    system: &SaddleSystem,
    x: &[f64],
    multipliers: &MultiplierState,
) -> Vec<f64> {
    let q = multipliers.to_array();
    let kx = system.k.mul_vec(x);
    let btq = system.constraints.apply_transpose(&q);
    let mut g: Vec<f64> = (0..system.n())
        .map(|j| kx[j] + btq[j] - system.f[j])
        .collect();
    g.extend(system.constraints.apply(x));
    g
}

/// One named pass/fail check with its measured value and tolerance.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            value,
            tolerance,
            passed: value <= tolerance,
        }
    }

    pub fn positive(name: impl Into<String>, value: f64) -> Self {
        Check {
            name: name.into(),
            value,
            tolerance: 0.0,
            passed: value > 0.0 && value.is_finite(),
        }
    }
}

/// Solution of the mixed problem with diagnostics.
#[derive(Clone, Debug)]
pub struct SolveReport {
    pub u: Vec<f64>,
    pub beam: BeamState,
    pub multipliers: MultiplierState,
    /// `B x`
    pub constraint_residual: [f64; 6],
    /// Euclidean norm of the full KKT residual.
    pub kkt_residual: f64,
    /// `a(x, x)`
    pub energy: f64,
    /// `f(x)`
    pub work: f64,
    /// `|a(x, x) − f(x)|`
    pub energy_gap: f64,
    pub primal_norm: f64,
    pub load_norm: f64,
    pub method: Method,
    pub pivots: PivotStats,
    /// Support reaction on the beam at the clamp: force, and moment about the clamp point.
    pub clamp_force: Vec3,
    pub clamp_moment: Vec3,
    /// Relative imbalance of all applied loads plus the clamp reaction.
    pub equilibrium_force_defect: f64,
    pub equilibrium_moment_defect: f64,
    /// Resultant force and moment (about `x_G`) that the beam exerts on the
    /// solid, summed from solid internal forces at the Σ nodes.
    pub interface_force: Vec3,
    pub interface_moment: Vec3,
    /// Mismatch of the resultants with `−|Σ| μ` and `−J λ`, relative to
    /// `|F| diam(Σ) + |M|`.
    pub multiplier_force_defect: f64,
    pub multiplier_moment_defect: f64,
}

fn rel(defect: f64, scale: f64) -> f64 {
    if defect == 0.0 {
        0.0
    } else {
        defect / scale.max(f64::MIN_POSITIVE)
    }
}

pub fn solve(system: &SaddleSystem) -> Result<SolveReport> {
    solve_with(system, DENSE_LIMIT)
}

/// Factorize and solve; `dense_limit` bounds the system size that goes
/// through the dense factorization.
pub fn solve_with(system: &SaddleSystem, dense_limit: usize) -> Result<SolveReport> {
    let solver = system.solver(dense_limit);
    let zero_pivots = solver.zero_pivots();
    if zero_pivots > 0 {
        return Err(Error::Singular { zero_pivots });
    }
    let (x, q) = solver.solve(&system.f, &[0.0; 6]);
    Ok(report(system, &solver, x, &q))
}

fn report(system: &SaddleSystem, solver: &KktSolver, x: Vec<f64>, q: &[f64]) -> SolveReport {
    let model = &system.model;
    let layout = &system.layout;
    let multipliers = MultiplierState::from_slice(q);
    let (r1, r2) = solver.residual(&x, q, &system.f, &[0.0; 6]);
    let kkt_residual = r1.iter().chain(&r2).map(|v| v * v).sum::<f64>().sqrt();
    let energy = system.k.quad_form(&x, &x);
    let work: f64 = system.f.iter().zip(&x).map(|(a, b)| a * b).sum();
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();

    let u = system.solid_part(&x).to_vec();
    let beam_x = system.beam_part(&x);
    let beam = BeamState::from_reduced(&model.beam, beam_x).expect("layout matches beam");

    // clamp reactions from the unreduced beam stiffness
    let kfull = assemble_beam_full(&model.beam).expect("beam validated at assembly");
    let mut xfull = vec![0.0; 6];
    xfull.extend_from_slice(beam_x);
    let ffull = beam_load_vector_full(&model.beam, &model.beam_loads);
    let kx = kfull.mul_vec(&xfull);
    let clamp_force = Vec3::new(kx[0] - ffull[0], kx[1] - ffull[1], kx[2] - ffull[2]);
    let clamp_moment = Vec3::new(kx[3] - ffull[3], kx[4] - ffull[4], kx[5] - ffull[5]);

    // global balance about the clamp point
    let p = model.beam.clamp_point();
    let mut force = clamp_force;
    let mut moment = clamp_moment;
    let mut load_force_scale = clamp_force.norm();
    let mut load_moment_scale = clamp_moment.norm();
    let fsolid = &system.f[..layout.n_solid()];
    for (n, xn) in model.mesh.nodes.iter().enumerate() {
        let fa = Vec3::new(fsolid[3 * n], fsolid[3 * n + 1], fsolid[3 * n + 2]);
        let m = (xn - p).cross(&fa);
        force += fa;
        moment += m;
        load_force_scale += fa.norm();
        load_moment_scale += m.norm();
    }
    for i in 0..model.beam.num_nodes() {
        let fw = Vec3::new(ffull[6 * i], ffull[6 * i + 1], ffull[6 * i + 2]);
        let ft = Vec3::new(ffull[6 * i + 3], ffull[6 * i + 4], ffull[6 * i + 5]);
        let m = (model.beam.node_position(i) - p).cross(&fw) + ft;
        force += fw;
        moment += m;
        load_force_scale += fw.norm();
        load_moment_scale += m.norm();
    }

    // interface resultants from solid internal forces at Σ nodes
    let ku = system.k.mul_vec(&x);
    let mut interface_force = Vec3::zeros();
    let mut interface_moment = Vec3::zeros();
    for &n in &model.surface.nodes {
        let r = Vec3::new(
            ku[3 * n] - fsolid[3 * n],
            ku[3 * n + 1] - fsolid[3 * n + 1],
            ku[3 * n + 2] - fsolid[3 * n + 2],
        );
        interface_force += r;
        interface_moment += (model.mesh.nodes[n] - model.surface.centroid).cross(&r);
    }
    let predicted_force = -multipliers.mu * model.surface.area;
    let predicted_moment = -(model.surface.j * multipliers.lambda);
    // a force and a moment are compared on the common scale |F| diam + |M|,
    // floored by the applied loads so a block that carries nothing still has a scale
    let diam = model.surface.diameter();
    let moment_scale = interface_force
        .norm()
        .max(predicted_force.norm())
        .max(load_force_scale)
        * diam
        + interface_moment
            .norm()
            .max(predicted_moment.norm())
            .max(load_moment_scale);
    let force_scale = moment_scale / diam;

    SolveReport {
        u,
        beam,
        multipliers,
        constraint_residual: system.constraints.apply(&x),
        kkt_residual,
        energy,
        work,
        energy_gap: (energy - work).abs(),
        primal_norm: norm(&x),
        load_norm: norm(&system.f),
        method: solver.method(),
        pivots: solver.stats(),
        clamp_force,
        clamp_moment,
        equilibrium_force_defect: rel(force.norm(), load_force_scale),
        equilibrium_moment_defect: rel(moment.norm(), load_moment_scale),
        interface_force,
        interface_moment,
        multiplier_force_defect: rel((interface_force - predicted_force).norm(), force_scale),
        multiplier_moment_defect: rel((interface_moment - predicted_moment).norm(), moment_scale),
    }
}

impl SolveReport {
    pub fn tip_displacement(&self) -> Vec3 {
        self.beam.tip_displacement()
    }

    pub fn tip_rotation(&self) -> Vec3 {
        self.beam.tip_rotation()
    }

    pub fn constraint_residual_norm(&self) -> f64 {
        self.constraint_residual
            .iter()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// The solve invariants with their tolerances.
    pub fn checks(&self) -> Vec<Check> {
        vec![
            Check::at_most("zero_pivots", self.pivots.zero as f64, 0.0),
            Check::at_most(
                "constraint_residual",
                self.constraint_residual_norm(),
                1e-9 * (1.0 + self.primal_norm),
            ),
            Check::at_most(
                "energy_gap",
                self.energy_gap,
                1e-8 * (1.0 + self.work.abs()),
            ),
            Check::at_most("kkt_residual", self.kkt_residual, 1e-9 * self.load_norm),
            Check::at_most("equilibrium_force", self.equilibrium_force_defect, 1e-8),
            Check::at_most("equilibrium_moment", self.equilibrium_moment_defect, 1e-8),
            Check::at_most("multiplier_force", self.multiplier_force_defect, 1e-8),
            Check::at_most("multiplier_moment", self.multiplier_moment_defect, 1e-8),
            Check {
                name: "multipliers_finite".into(),
                value: 0.0,
                tolerance: 0.0,
                passed: self.multipliers.is_finite(),
            },
        ]
    }

    /// Flat `key = value` record; vectors are space separated.
    pub fn to_key_value(&self) -> String {
        let v3 = |v: &Vec3| format!("{:e} {:e} {:e}", v.x, v.y, v.z);
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("method", self.method.as_str().into());
        put("n_solid_dofs", self.u.len().to_string());
        put("n_beam_nodes", self.beam.w.len().to_string());
        put("lambda", v3(&self.multipliers.lambda));
        put("mu", v3(&self.multipliers.mu));
        put("tip_displacement", v3(&self.tip_displacement()));
        put("tip_rotation", v3(&self.tip_rotation()));
        put(
            "constraint_residual",
            self.constraint_residual
                .iter()
                .map(|v| format!("{v:e}"))
                .collect::<Vec<_>>()
                .join(" "),
        );
        put("kkt_residual", format!("{:e}", self.kkt_residual));
        put("energy", format!("{:e}", self.energy));
        put("work", format!("{:e}", self.work));
        put("energy_gap", format!("{:e}", self.energy_gap));
        put("pivots_positive", self.pivots.positive.to_string());
        put("pivots_negative", self.pivots.negative.to_string());
        put("pivots_zero", self.pivots.zero.to_string());
        put("pivots_two_by_two", self.pivots.two_by_two.to_string());
        put("min_abs_pivot", format!("{:e}", self.pivots.min_abs_pivot));
        put("clamp_force", v3(&self.clamp_force));
        put("clamp_moment", v3(&self.clamp_moment));
        put(
            "equilibrium_force_defect",
            format!("{:e}", self.equilibrium_force_defect),
        );
        put(
            "equilibrium_moment_defect",
            format!("{:e}", self.equilibrium_moment_defect),
        );
        put("interface_force", v3(&self.interface_force));
        put("interface_moment", v3(&self.interface_moment));
        put(
            "multiplier_force_defect",
            format!("{:e}", self.multiplier_force_defect),
        );
        put(
            "multiplier_moment_defect",
            format!("{:e}", self.multiplier_moment_defect),
        );
        s
    }
}

/// Parse a `key = value` record (blank lines and `#` comments ignored).
pub fn parse_key_value(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for line in text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
    {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("expected `key = value`, got `{line}`")))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

/// Paths written by [`export_system`].
#[derive(Clone, Debug)]
pub struct ExportedFiles {
    pub kkt: PathBuf,
    pub rhs: PathBuf,
    pub gram_v: Option<PathBuf>,
    pub gram_q: Option<PathBuf>,
}

/// Write `kkt.mtx` (symmetric, `N + 6`), `rhs.mtx` and optionally the Gram
/// matrices into `dir`, using `prefix` for the file names.
pub fn export_system(
    system: &SaddleSystem,
    dir: &Path,
    prefix: &str,
    include_gram: bool,
) -> Result<ExportedFiles> {
    std::fs::create_dir_all(dir)?;
    let kkt = dir.join(format!("{prefix}kkt.mtx"));
    let rhs = dir.join(format!("{prefix}rhs.mtx"));
    matrix_market::write(&kkt, &system.kkt_sparse(), Symmetry::Symmetric)?;
    matrix_market::write_vector(&rhs, &system.rhs())?;
    let (mut gram_v, mut gram_q) = (None, None);
    if include_gram {
        let gv = dir.join(format!("{prefix}gram_v.mtx"));
        let gq = dir.join(format!("{prefix}gram_q.mtx"));
        matrix_market::write(&gv, &system.g_v, Symmetry::Symmetric)?;
        let mut t = TripletBuilder::new(6, 6);
        for i in 0..6 {
            t.push(i, i, system.g_q[(i, i)]);
        }
        matrix_market::write(&gq, &t.build(), Symmetry::Symmetric)?;
        gram_v = Some(gv);
        gram_q = Some(gq);
    }
    Ok(ExportedFiles {
        kkt,
        rhs,
        gram_v,
        gram_q,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beam::BeamSection;
    use crate::coupling::constraint_block;
    use crate::geometry::{build_beam, build_block_mesh, extract_interface};
    use crate::linalg::{count_near_zero, symmetric_eigenvalues, KernelBasis, SymmetricSolver};
    use crate::solid::Traction;
    use rand::{Rng, SeedableRng};

    pub(crate) fn model(divs: usize, beam_elements: usize, loaded: bool) -> CoupledModel {
        let mesh = build_block_mesh([1.0; 3], [divs; 3]).unwrap();
        let surface = extract_interface(&mesh, "-z").unwrap();
        let section = BeamSection::rectangle(10.0, 4.0, 0.3, 0.2);
        let beam = build_beam(
            2.0,
            beam_elements,
            surface.centroid - Vec3::z() * 2.0,
            Vec3::z(),
            section,
        )
        .unwrap();
        let (solid_loads, beam_loads) = if loaded {
            (
                SolidLoads {
                    body_force: [0.1, -0.2, 0.05],
                    tractions: vec![Traction {
                        face_set: "+x".into(),
                        traction: [0.0, 0.3, -0.1],
                    }],
                },
                BeamLoads {
                    distributed_force: [0.02, 0.0, -0.01],
                    distributed_moment: [0.0, 0.01, 0.0],
                    tip_force: [0.05, 0.0, 0.0],
                    tip_moment: [0.0, 0.0, 0.02],
                },
            )
        } else {
            Default::default()
        };
        CoupledModel::new(
            mesh,
            SolidMaterial::new(1.0, 1.0).unwrap(),
            beam,
            surface,
            solid_loads,
            beam_loads,
            2.0,
        )
        .unwrap()
    }

    #[test]
    fn block_structure_and_sizes() {
        let sys = assemble_system(&model(2, 3, false)).unwrap();
        assert_eq!(sys.n(), 27 * 3 + 18);
        assert_eq!(sys.kkt_dense().nrows(), sys.n() + 6);
        assert!(sys.f.iter().all(|v| *v == 0.0));
        let ns = sys.layout.n_solid();
        for (i, j, _) in sys.k.iter() {
            assert_eq!(i < ns, j < ns, "cross term at ({i}, {j})");
        }
        assert!(sys.k.symmetry_defect() < 1e-12);
    }

    #[test]
    fn tip_away_from_centroid_is_rejected() {
        let m = model(1, 2, false);
        let beam = build_beam(
            2.0,
            2,
            Vec3::new(0.1, 0.5, -2.0),
            Vec3::z(),
            m.beam.section.clone(),
        )
        .unwrap();
        let r = CoupledModel::new(
            m.mesh,
            m.material,
            beam,
            m.surface,
            m.solid_loads,
            m.beam_loads,
            2.0,
        );
        assert!(matches!(r, Err(Error::InvalidConfiguration(_))));
    }

    #[test]
    fn zero_loads_give_zero_solution() {
        let sys = assemble_system(&model(2, 2, false)).unwrap();
        let rep = solve(&sys).unwrap();
        assert!(rep.u.iter().all(|v| *v == 0.0));
        assert_eq!(rep.multipliers, MultiplierState::default());
        assert!(rep.checks().iter().all(|c| c.passed), "{:?}", rep.checks());
    }

    #[test]
    fn solid_alone_has_six_zero_pivots_and_coupled_has_none() {
        let sys = assemble_system(&model(2, 2, false)).unwrap();
        let kb = sys
            .k
            .submatrix(&(0..sys.layout.n_solid()).collect::<Vec<_>>());
        assert_eq!(SymmetricSolver::new(&kb, usize::MAX).stats().zero, 6);
        let solver = sys.solver(usize::MAX);
        assert_eq!(solver.zero_pivots(), 0);
        // eigenvalue oracle on the KKT matrix
        let ev = symmetric_eigenvalues(&sys.kkt_dense());
        assert_eq!(count_near_zero(&ev, 1e-8), 0);
        assert_eq!(ev.iter().filter(|v| **v < 0.0).count(), 6);
    }

    #[test]
    fn loaded_solve_passes_all_checks_on_both_paths() {
        let sys = assemble_system(&model(2, 4, true)).unwrap();
        let dense = solve_with(&sys, usize::MAX).unwrap();
        let sparse = solve_with(&sys, 0).unwrap();
        assert_eq!(dense.method, Method::Dense);
        assert_eq!(sparse.method, Method::Sparse);
        for rep in [&dense, &sparse] {
            for c in rep.checks() {
                assert!(c.passed, "{c:?}");
            }
        }
        for (a, b) in dense.u.iter().zip(&sparse.u) {
            assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()));
        }
        assert!((dense.multipliers.mu - sparse.multipliers.mu).norm() < 1e-9);
    }

    #[test]
    fn lagrangian_at_solution() {
        let sys = assemble_system(&model(2, 3, true)).unwrap();
        let zero = vec![0.0; sys.n()];
        assert_eq!(
            lagrangian_value(&sys, &zero, &MultiplierState::default()).unwrap(),
            0.0
        );
        assert!(lagrangian_value(&sys, &zero[1..], &MultiplierState::default()).is_err());

        let rep = solve(&sys).unwrap();
        let mut x = rep.u.clone();
        for i in 1..rep.beam.w.len() {
            x.extend(rep.beam.w[i].iter());
            x.extend(rep.beam.theta[i].iter());
        }
        let grad = lagrangian_gradient(&sys, &x, &rep.multipliers);
        let fnorm = sys.f.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(grad.iter().map(|v| v * v).sum::<f64>().sqrt() <= 1e-9 * fnorm);

        // the energy increases along kernel directions of B
        let energy = |y: &[f64]| {
            0.5 * sys.k.quad_form(y, y) - sys.f.iter().zip(y).map(|(a, b)| a * b).sum::<f64>()
        };
        let z = KernelBasis::new(sys.b()).basis();
        let mut rng = rand::rngs::StdRng::seed_from_u64(5);
        let e0 = energy(&x);
        for _ in 0..5 {
            let c = nalgebra::DVector::from_fn(z.ncols(), |_, _| rng.random_range(-1.0..1.0));
            let d = &z * c;
            let y: Vec<f64> = x.iter().zip(d.iter()).map(|(a, b)| a + 1e-3 * b).collect();
            assert!(energy(&y) > e0);
        }
    }

    #[test]
    fn degenerate_constraints_are_singular() {
        let mut sys = assemble_system(&model(1, 2, true)).unwrap();
        let mut b = sys.constraints.b.clone();
        b.row_mut(3).fill(0.0);
        sys.constraints = constraint_block(b, sys.layout);
        assert!(matches!(solve(&sys), Err(Error::Singular { .. })));
    }

    #[test]
    fn key_value_round_trip() {
        let sys = assemble_system(&model(1, 2, true)).unwrap();
        let rep = solve(&sys).unwrap();
        let kv = parse_key_value(&rep.to_key_value()).unwrap();
        assert_eq!(kv["method"], "dense-ldlt");
        let mu: Vec<f64> = kv["mu"]
            .split_whitespace()
            .map(|t| t.parse().unwrap())
            .collect();
        assert_eq!(mu, rep.multipliers.mu.as_slice());
        assert!(parse_key_value("no separator").is_err());
    }

    #[test]
    fn export_round_trip() {
        let sys = assemble_system(&model(1, 2, true)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = export_system(&sys, dir.path(), "", true).unwrap();
        let kkt = matrix_market::read(&files.kkt).unwrap();
        assert_eq!(kkt.symmetry, Symmetry::Symmetric);
        assert_eq!((kkt.nrows, kkt.ncols), (sys.n() + 6, sys.n() + 6));
        let back = kkt.to_csr();
        let orig = sys.kkt_sparse();
        assert_eq!(back.nnz(), orig.nnz());
        for (i, j, v) in orig.iter() {
            assert_eq!(back.get(i, j).to_bits(), v.to_bits());
        }
        let rhs = matrix_market::read(&files.rhs).unwrap().to_csr();
        for (i, v) in sys.rhs().iter().enumerate() {
            assert_eq!(rhs.get(i, 0).to_bits(), v.to_bits());
        }
        let gv = matrix_market::read(files.gram_v.as_ref().unwrap())
            .unwrap()
            .to_csr();
        assert_eq!(gv.nnz(), sys.g_v.nnz());
    }
}
