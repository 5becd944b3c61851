//! Coupled equilibrium of a 3D linear-elastic solid and a shear-deformable
//! beam joined at an interface surface by average-displacement and
//! average-rotation constraints, with numerical well-posedness diagnostics.
//!
//! The pipeline is: [`geometry`] builds the mesh, the beam and the interface
//! Σ; [`solid`], [`beam`] and [`coupling`] produce the stiffness, load and
//! constraint blocks; [`saddle`] assembles and solves the mixed system; and
//! [`analysis`] certifies kernel ellipticity and the inf-sup condition.
//!
//! ```
//! use beamlink::prelude::*;
//!
//! let mesh = build_block_mesh([1.0; 3], [2, 2, 2]).unwrap();
//! let surface = extract_interface(&mesh, "-z").unwrap();
//! let section = BeamSection::rectangle(100.0, 40.0, 0.2, 0.1);
//! let beam = build_beam(2.0, 4, surface.centroid - Vec3::z() * 2.0, Vec3::z(), section).unwrap();
//! let loads = BeamLoads { tip_force: [0.0, 1e-3, 0.0], ..Default::default() };
//! let model = CoupledModel::new(
//!     mesh,
//!     SolidMaterial::from_young_poisson(100.0, 0.3).unwrap(),
//!     beam,
//!     surface,
//!     SolidLoads::default(),
//!     loads,
//!     2.0,
//! )
//! .unwrap();
//! let system = assemble_system(&model).unwrap();
//! let report = solve(&system).unwrap();
//! assert!(report.checks().iter().all(|c| c.passed));
//! ```

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod beam;
pub mod config;
pub mod coupling;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod matrix_market;
pub mod saddle;
pub mod scenario;
pub mod solid;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/geometry.md")]
    mod geometry {}
    #[doc = include_str!("../../../book/src/solid.md")]
    mod solid {}
    #[doc = include_str!("../../../book/src/beam.md")]
    mod beam {}
    #[doc = include_str!("../../../book/src/coupling.md")]
    mod coupling {}
    #[doc = include_str!("../../../book/src/saddle.md")]
    mod saddle {}
    #[doc = include_str!("../../../book/src/analysis.md")]
    mod analysis {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}

/// The commonly used types and functions.
pub mod prelude {
    pub use crate::analysis::{
        compute_m, inf_sup_constant, kernel_ellipticity, rigid_mode_census, rigid_mode_census_in,
        stability_report, witness_infsup_bound, InfSupOperator, StabilityOptions, StabilityReport,
    };
    pub use crate::beam::{
        assemble_beam, beam_load_vector, beam_norm_gram, BeamLoads, BeamSection, BeamState,
    };
    pub use crate::config::{parse_config, parse_config_str, ScenarioConfig};
    pub use crate::coupling::{
        assemble_b, q_norm_gram, skew_average_check, ConstraintBlock, DofLayout, MultiplierState,
    };
    pub use crate::error::{Error, Result};
    pub use crate::geometry::{
        build_beam, build_block_mesh, extract_interface, BeamModel, InterfaceSurface, Mat3, Mesh,
        Vec3,
    };
    pub use crate::saddle::{
        assemble_system, lagrangian_value, solve, CoupledModel, SaddleSystem, SolveReport,
    };
    pub use crate::solid::{
        assemble_solid, solid_load_vector, u_norm_gram, SolidLoads, SolidMaterial, Traction,
    };
}
