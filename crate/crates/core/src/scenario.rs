//! Scenario driver: builds the coupled model for each refinement level, runs
//! the requested stages, evaluates the invariant checks and writes reports.

use crate::analysis::{
    append_csv, stability_report, witness_infsup_bound, InfSupOperator, StabilityOptions,
    StabilityReport, CENSUS_DENSE_LIMIT,
};
use crate::config::{config_error, ScenarioConfig};
use crate::coupling::{skew_average_check, MultiplierState};
use crate::error::{Error, Result};
use crate::geometry::{build_beam, build_block_mesh_at, interface_from_faces, FaceRef, Vec3};
use crate::matrix_market;
use crate::saddle::{
    assemble_system_with, export_system, solve_with, AssemblyOptions, Check, CoupledModel,
    SaddleSystem, SolveReport,
};
use rand::{Rng, SeedableRng};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Command-line overrides; `Some` wins over the config file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub solve: Option<bool>,
    pub stability: Option<bool>,
    pub export: Option<bool>,
    pub levels: Option<usize>,
    pub out: Option<PathBuf>,
    pub parallel: Option<bool>,
}

impl ScenarioConfig {
    pub fn with_overrides(mut self, o: &Overrides) -> Result<Self> {
        let a = &mut self.analysis;
        a.solve = o.solve.unwrap_or(a.solve);
        a.stability = o.stability.unwrap_or(a.stability);
        a.export = o.export.unwrap_or(a.export);
        a.parallel = o.parallel.unwrap_or(a.parallel);
        if let Some(l) = o.levels {
            if l == 0 {
                return Err(config_error("levels", "must be at least 1"));
            }
            a.refinement_levels = l;
        }
        if let Some(out) = &o.out {
            self.output.directory = out.to_string_lossy().into_owned();
        }
        Ok(self)
    }
}

/// Whether an error means the scenario itself is invalid (as opposed to a
/// failed numerical check or an I/O problem).
pub fn is_config_error(e: &Error) -> bool {
    matches!(
        e,
        Error::Config { .. }
            | Error::InvalidArgument { .. }
            | Error::InvalidConfiguration(_)
            | Error::UnknownFaceSet(_)
            | Error::DegenerateInterface(_)
            | Error::DegenerateFace { .. }
            | Error::RankDeficient { .. }
            | Error::Parse(_)
    )
}

/// Coupled model of refinement `level` (divisions and beam elements × 2^level).
pub fn build_model(config: &ScenarioConfig, level: usize) -> Result<CoupledModel> {
    let factor = 1usize << level;
    let s = &config.solid;
    let mesh = build_block_mesh_at(
        Vec3::from(s.origin),
        s.dimensions,
        s.divisions.map(|d| d * factor),
    )?;
    let material = s.material.to_material()?;

    let iface = &config.interface;
    let candidates = mesh
        .face_set(&iface.face_set)
        .map_err(|e| config_error("interface.face_set", e.to_string()))?;
    let faces: Vec<FaceRef> = candidates
        .iter()
        .copied()
        .filter(|&f| match &iface.region {
            None => true,
            Some(r) => {
                let c: Vec3 = mesh
                    .face_nodes(f)
                    .iter()
                    .map(|&n| mesh.nodes[n])
                    .sum::<Vec3>()
                    / 4.0;
                (0..3).all(|i| c[i] >= r.min[i] && c[i] <= r.max[i])
            }
        })
        .collect();
    let surface = interface_from_faces(&mesh, &iface.face_set, &faces).map_err(|e| match e {
        Error::DegenerateInterface(_) | Error::DegenerateFace { .. } => {
            config_error("interface", e.to_string())
        }
        other => other,
    })?;

    let b = &config.beam;
    let direction = b
        .axis_direction
        .map(Vec3::from)
        .unwrap_or(-surface.normal)
        .normalize();
    if direction.cross(&surface.normal).norm() > 1e-8 {
        return Err(config_error(
            "beam.axis_direction",
            "must be normal to the interface so that the section axes align with its tangents",
        ));
    }
    let origin = b
        .axis_origin
        .map(Vec3::from)
        .unwrap_or(surface.centroid - direction * b.length);
    let section = b.section.to_section()?;
    let beam = build_beam(b.length, b.elements * factor, origin, direction, section)?;
    CoupledModel::new(
        mesh,
        material,
        beam,
        surface,
        config.loads.solid.clone(),
        config.loads.beam.clone(),
        config.length_scale(),
    )
    .map_err(|e| match e {
        Error::InvalidConfiguration(msg) => config_error("beam.axis_origin", msg),
        other => other,
    })
}

/// Results of one refinement level.
#[derive(Clone, Debug)]
pub struct LevelResult {
    pub level: usize,
    pub n: usize,
    pub solve: Option<SolveReport>,
    pub stability: Option<StabilityReport>,
    pub checks: Vec<Check>,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub levels: Vec<LevelResult>,
    /// Checks spanning several levels (drift of the stability constants).
    pub global_checks: Vec<Check>,
    pub output_dir: PathBuf,
}

impl RunOutcome {
    /// `(level, check)` for every failed check; global checks have no level.
    pub fn failures(&self) -> Vec<(Option<usize>, &Check)> {
        self.levels
            .iter()
            .flat_map(|l| l.checks.iter().map(move |c| (Some(l.level), c)))
            .chain(self.global_checks.iter().map(|c| (None, c)))
            .filter(|(_, c)| !c.passed)
            .collect()
    }

    pub fn passed(&self) -> bool {
        self.failures().is_empty()
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            1
        }
    }
}

/// `max / min − 1` of a positive sequence.
pub fn drift(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if min > 0.0 {
        max / min - 1.0
    } else {
        f64::INFINITY
    }
}

fn solve_checks(system: &SaddleSystem, rep: &SolveReport) -> Vec<Check> {
    let mut checks = rep.checks();
    let s = &system.model.surface;
    if s.is_planar {
        let d = skew_average_check(s, &rep.u, &rep.tip_rotation()).unwrap_or(f64::INFINITY);
        checks.push(Check::at_most(
            "skew_average",
            d,
            1e-9 * (1.0 + rep.primal_norm),
        ));
    }
    checks
}

fn stability_checks(
    system: &SaddleSystem,
    rep: &StabilityReport,
    options: &StabilityOptions,
    level: usize,
) -> Result<Vec<Check>> {
    let mut checks = vec![
        Check::positive("alpha", rep.alpha),
        Check::positive("beta", rep.beta),
        Check::at_most("rigid_constrained", rep.rigid_constrained as f64, 0.0),
        Check {
            name: "rigid_unconstrained".into(),
            value: rep.rigid_unconstrained as f64,
            tolerance: 6.0,
            passed: rep.rigid_unconstrained == 6,
        },
    ];
    // witness ratios never exceed the exact supremum, which never falls below β‖q‖
    let op = InfSupOperator::for_system(system, options.dense_limit)?;
    let mut rng = rand::rngs::StdRng::seed_from_u64(level as u64);
    let mut slack = f64::INFINITY;
    let mut beta_slack = f64::INFINITY;
    for _ in 0..20 {
        let q: [f64; 6] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let w = witness_infsup_bound(system, &MultiplierState::from_slice(&q));
        let sup = op.sup(&q);
        slack = slack.min(sup - w.ratio);
        beta_slack = beta_slack.min(sup - rep.beta * op.q_norm(&q));
    }
    checks.push(Check {
        name: "witness_below_sup".into(),
        value: slack,
        tolerance: -1e-10,
        passed: slack >= -1e-10,
    });
    checks.push(Check {
        name: "beta_below_sup".into(),
        value: beta_slack,
        tolerance: -1e-10,
        passed: beta_slack >= -1e-10,
    });
    Ok(checks)
}

/// Run every requested stage for every level and write the artifacts into
/// the configured output directory.
pub fn run(config: &ScenarioConfig) -> Result<RunOutcome> {
    let a = &config.analysis;
    let out = PathBuf::from(&config.output.directory);
    std::fs::create_dir_all(&out)?;
    let csv = out.join("stability.csv");
    if csv.exists() {
        std::fs::remove_file(&csv)?;
    }
    let options = StabilityOptions {
        dense_limit: a.dense_limit,
        census_dense_limit: a.dense_limit.min(CENSUS_DENSE_LIMIT),
        ..Default::default()
    };

    let mut levels = Vec::new();
    for level in 0..a.refinement_levels {
        let model = build_model(config, level)?;
        let system = assemble_system_with(
            &model,
            AssemblyOptions {
                parallel: a.parallel,
            },
        )?;
        let mut result = LevelResult {
            level,
            n: system.n(),
            solve: None,
            stability: None,
            checks: vec![],
        };
        log::info!("level {level}: N = {}", system.n());

        if a.solve {
            match solve_with(&system, a.dense_limit) {
                Ok(rep) => {
                    result.checks.extend(solve_checks(&system, &rep));
                    std::fs::write(
                        out.join(format!("solve_level{level}.txt")),
                        rep.to_key_value(),
                    )?;
                    result.solve = Some(rep);
                }
                Err(Error::Singular { zero_pivots }) => {
                    result
                        .checks
                        .push(Check::at_most("zero_pivots", zero_pivots as f64, 0.0));
                }
                Err(e) => return Err(e),
            }
        }
        if a.stability {
            let rep = stability_report(&system, level, &options)?;
            result
                .checks
                .extend(stability_checks(&system, &rep, &options, level)?);
            append_csv(&csv, std::slice::from_ref(&rep))?;
            result.stability = Some(rep);
        }
        if a.export {
            let dir = out.join("export");
            let files = export_system(&system, &dir, &format!("level{level}_"), true)?;
            result.checks.push(export_check(&files.kkt, system.n() + 6));
        }
        levels.push(result);
    }

    let mut global_checks = Vec::new();
    let stab: Vec<&StabilityReport> = levels.iter().filter_map(|l| l.stability.as_ref()).collect();
    if stab.len() >= 2 {
        let alphas: Vec<f64> = stab.iter().map(|r| r.alpha).collect();
        let betas: Vec<f64> = stab.iter().map(|r| r.beta).collect();
        global_checks.push(Check::at_most("alpha_drift", drift(&alphas), 0.25));
        global_checks.push(Check::at_most("beta_drift", drift(&betas), 0.10));
    }
    let outcome = RunOutcome {
        levels,
        global_checks,
        output_dir: out.clone(),
    };
    write_check_files(&outcome, &out)?;
    Ok(outcome)
}

fn export_check(path: &Path, dim: usize) -> Check {
    let ok = matrix_market::read(path)
        .map(|m| m.nrows == dim && m.ncols == dim)
        .unwrap_or(false);
    Check {
        name: "export_reparse".into(),
        value: if ok { 0.0 } else { 1.0 },
        tolerance: 0.0,
        passed: ok,
    }
}

fn write_check_files(outcome: &RunOutcome, out: &Path) -> Result<()> {
    let mut all = String::from("level,check,value,tolerance,status\n");
    let rows = outcome
        .levels
        .iter()
        .flat_map(|l| l.checks.iter().map(move |c| (l.level.to_string(), c)))
        .chain(outcome.global_checks.iter().map(|c| ("all".to_string(), c)));
    for (level, c) in rows {
        let status = if c.passed { "pass" } else { "FAIL" };
        let _ = writeln!(
            all,
            "{level},{},{:e},{:e},{status}",
            c.name, c.value, c.tolerance
        );
    }
    std::fs::write(out.join("checks.csv"), all)?;
    let mut failures = String::new();
    for (level, c) in outcome.failures() {
        let level = level.map_or("all".to_string(), |l| l.to_string());
        let _ = writeln!(
            failures,
            "level={level} check={} value={:e} tolerance={:e}",
            c.name, c.value, c.tolerance
        );
    }
    std::fs::write(out.join("failures.txt"), failures)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{parse_config_str, Region};

    fn config(dir: &Path) -> ScenarioConfig {
        let text = format!(
            r#"{{
            "solid": {{"dimensions": [1, 1, 1], "divisions": [1, 1, 1],
                      "material": {{"young_modulus": 100.0, "poisson_ratio": 0.3}}}},
            "beam": {{"length": 2.0, "elements": 2,
                     "section": {{"young_modulus": 100.0, "shear_modulus": 40.0, "width": 0.2, "height": 0.1}}}},
            "interface": {{"face_set": "-z"}},
            "loads": {{"beam": {{"tip_force": [0.0, 1.0, 0.0]}}, "solid": {{"body_force": [0.0, 0.0, -1.0]}}}},
            "output": {{"directory": "{}"}}
        }}"#,
            dir.display()
        );
        parse_config_str(&text).unwrap()
    }

    #[test]
    fn default_beam_placement_meets_centroid() {
        let dir = tempfile::tempdir().unwrap();
        let m = build_model(&config(dir.path()), 1).unwrap();
        assert_eq!(m.beam.n_elements, 4);
        assert_eq!(m.mesh.num_elements(), 8);
        assert!((m.beam.tip_point() - Vec3::new(0.5, 0.5, 0.0)).norm() < 1e-14);
        assert!((m.beam.axis_direction - Vec3::z()).norm() < 1e-14);
    }

    #[test]
    fn empty_region_is_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = config(dir.path());
        c.interface.region = Some(Region {
            min: [5.0; 3],
            max: [6.0; 3],
        });
        let e = build_model(&c, 0).unwrap_err();
        assert!(is_config_error(&e));
        assert!(matches!(e, Error::Config { ref key, .. } if key == "interface"));
    }

    #[test]
    fn misplaced_beam_is_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = config(dir.path());
        c.beam.axis_origin = Some([0.0, 0.0, -2.0]);
        assert!(
            matches!(build_model(&c, 0), Err(Error::Config { ref key, .. }) if key == "beam.axis_origin")
        );
        let mut c = config(dir.path());
        c.beam.axis_direction = Some([1.0, 0.0, 1.0]);
        assert!(
            matches!(build_model(&c, 0), Err(Error::Config { ref key, .. }) if key == "beam.axis_direction")
        );
    }

    #[test]
    fn run_writes_reports() {
        let dir = tempfile::tempdir().unwrap();
        let c = config(dir.path())
            .with_overrides(&Overrides {
                levels: Some(2),
                export: Some(true),
                ..Default::default()
            })
            .unwrap();
        let outcome = run(&c).unwrap();
        let csv = std::fs::read_to_string(dir.path().join("stability.csv")).unwrap();
        assert_eq!(csv.lines().count(), 3);
        assert!(dir.path().join("solve_level1.txt").exists());
        assert!(dir.path().join("export/level0_kkt.mtx").exists());
        let failures = std::fs::read_to_string(dir.path().join("failures.txt")).unwrap();
        assert_eq!(failures.is_empty(), outcome.passed());
        for l in &outcome.levels {
            for ch in &l.checks {
                assert!(ch.passed || ch.name.ends_with("drift"), "{ch:?}");
            }
        }
    }

    #[test]
    fn drift_definition() {
        assert!((drift(&[1.0, 1.1, 1.05]) - 0.1).abs() < 1e-12);
        assert_eq!(drift(&[0.0, 1.0]), f64::INFINITY);
    }
}
