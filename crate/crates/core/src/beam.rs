//! Shear-deformable (Timoshenko) 3D beam: strain measures, section
//! constitution, two-node elements, loads and the `W × R` norm.
//!
//! Nodal unknowns are the centroid displacement `w` and the incremental
//! rotation vector `θ`, stored per node as `[w₁ w₂ w₃ θ₁ θ₂ θ₃]`. The clamped
//! node (`s = 0`) is eliminated from the reduced vectors, so free node `i ≥ 1`
//! starts at offset `6 (i − 1)`.
//!
//! The element interpolates `w` and `θ` linearly and evaluates the shear /
//! axial strain at the element midpoint. The transverse shear stiffnesses are
//! replaced by the residual-bending-flexibility values
//!
//! ```text
//! 1 / GA₁* = 1 / (G A₁) + h² / (12 E I₂)
//! 1 / GA₂* = 1 / (G A₂) + h² / (12 E I₁)
//! ```
//!
//! which makes the two-node stiffness coincide with the exact one for a
//! prismatic element: nodal values are exact for any nodal loading, and the
//! element cannot lock in the thin limit.

use crate::error::{invalid, Error, Result};
use crate::geometry::{BeamModel, Mat3, Vec3};
use crate::linalg::{CsrMatrix, TripletBuilder};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Section stiffness data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeamSection {
    /// Young's modulus.
    pub e: f64,
    /// Shear modulus.
    pub g: f64,
    pub area: f64,
    /// Shear-reduced areas along the two principal directions.
    pub a1: f64,
    pub a2: f64,
    /// Principal moments of inertia (about `e1` and `e2`).
    pub i1: f64,
    pub i2: f64,
    /// Torsional inertia.
    pub it: f64,
}

impl BeamSection {
    /// Solid rectangle, `width` along the first principal direction and
    /// `height` along the second; shear factor 5/6, Saint-Venant torsion
    /// constant from the usual series approximation.
    pub fn rectangle(e: f64, g: f64, width: f64, height: f64) -> Self {
        let area = width * height;
        let (long, short) = if width >= height {
            (width, height)
        } else {
            (height, width)
        };
        let r = short / long;
        let it = long * short.powi(3) * (1.0 / 3.0 - 0.21 * r * (1.0 - r.powi(4) / 12.0));
        BeamSection {
            e,
            g,
            area,
            a1: 5.0 / 6.0 * area,
            a2: 5.0 / 6.0 * area,
            i1: width * height.powi(3) / 12.0,
            i2: height * width.powi(3) / 12.0,
            it,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("section.e", self.e),
            ("section.g", self.g),
            ("section.area", self.area),
            ("section.a1", self.a1),
            ("section.a2", self.a2),
            ("section.i1", self.i1),
            ("section.i2", self.i2),
            ("section.it", self.it),
        ];
        for (name, v) in fields {
            if !(v > 0.0) || !v.is_finite() {
                return Err(invalid(name, format!("must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// `diag(GA₁, GA₂, EA)`
    pub fn c_gamma(&self) -> Vec3 {
        Vec3::new(self.g * self.a1, self.g * self.a2, self.e * self.area)
    }

    /// `diag(EI₁, EI₂, GI_t)`
    pub fn c_omega(&self) -> Vec3 {
        Vec3::new(self.e * self.i1, self.e * self.i2, self.g * self.it)
    }

    /// Shear/axial stiffness used by an element of length `h`.
    pub fn c_gamma_element(&self, h: f64) -> Vec3 {
        let c = self.c_gamma();
        let b = self.c_omega();
        Vec3::new(
            1.0 / (1.0 / c.x + h * h / (12.0 * b.y)),
            1.0 / (1.0 / c.y + h * h / (12.0 * b.x)),
            c.z,
        )
    }
}

/// Distributed and tip loads on the beam.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BeamLoads {
    pub distributed_force: [f64; 3],
    pub distributed_moment: [f64; 3],
    pub tip_force: [f64; 3],
    pub tip_moment: [f64; 3],
}

/// Nodal beam fields including the clamped node.
#[derive(Clone, Debug, PartialEq)]
pub struct BeamState {
    pub w: Vec<Vec3>,
    pub theta: Vec<Vec3>,
}

impl BeamState {
    /// Expand a reduced (clamp-eliminated) vector.
    pub fn from_reduced(beam: &BeamModel, x: &[f64]) -> Result<Self> {
        let n = beam.n_elements;
        if x.len() != 6 * n {
            return Err(Error::DimensionMismatch {
                expected: 6 * n,
                found: x.len(),
            });
        }
        let mut w = vec![Vec3::zeros()];
        let mut theta = vec![Vec3::zeros()];
        for i in 0..n {
            w.push(Vec3::from_column_slice(&x[6 * i..6 * i + 3]));
            theta.push(Vec3::from_column_slice(&x[6 * i + 3..6 * i + 6]));
        }
        Ok(BeamState { w, theta })
    }

    pub fn tip_displacement(&self) -> Vec3 {
        *self.w.last().unwrap()
    }

    pub fn tip_rotation(&self) -> Vec3 {
        *self.theta.last().unwrap()
    }
}

/// Linearized strain measures `Γ = Λᵀ(w′ − θ × r′)`, `Ω = Λᵀ θ′`.
///
/// `Γ` holds the two shear strains and the axial strain, `Ω` the two
/// curvatures and the twist. Both vanish for `w = ω × (r − p)`, `θ = ω`.
pub fn beam_strains(
    dw: &Vec3,
    theta: &Vec3,
    dtheta: &Vec3,
    tangent: &Vec3,
    rotation: &Mat3,
) -> (Vec3, Vec3) {
    let gamma = rotation.transpose() * (dw - theta.cross(tangent));
    let omega = rotation.transpose() * dtheta;
    (gamma, omega)
}

/// Element stiffness in the order `[w_a, θ_a, w_b, θ_b]`.
pub fn beam_element_stiffness(
    h: f64,
    tangent: &Vec3,
    rotation: &Mat3,
    section: &BeamSection,
) -> Result<DMatrix<f64>> {
    if !(h > 0.0) {
        return Err(invalid(
            "element length",
            format!("must be positive, got {h}"),
        ));
    }
    // strain-displacement operators by evaluating the (linear) strain map on unit vectors
    let mut b_gamma = DMatrix::zeros(3, 12);
    let mut b_omega = DMatrix::zeros(3, 12);
    for c in 0..12 {
        let mut d = [0.0; 12];
        d[c] = 1.0;
        let wa = Vec3::new(d[0], d[1], d[2]);
        let ta = Vec3::new(d[3], d[4], d[5]);
        let wb = Vec3::new(d[6], d[7], d[8]);
        let tb = Vec3::new(d[9], d[10], d[11]);
        let (g, o) = beam_strains(
            &((wb - wa) / h),
            &((ta + tb) * 0.5),
            &((tb - ta) / h),
            tangent,
            rotation,
        );
        b_gamma.column_mut(c).copy_from(&g);
        b_omega.column_mut(c).copy_from(&o);
    }
    let cg = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(
        section.c_gamma_element(h).as_slice(),
    ));
    let co = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(
        section.c_omega().as_slice(),
    ));
    let k = (b_gamma.transpose() * cg * &b_gamma + b_omega.transpose() * co * &b_omega) * h;
    Ok((&k + k.transpose()) * 0.5)
}

fn element_dofs_full(e: usize) -> [usize; 12] {
    std::array::from_fn(|i| 6 * e + i)
}

/// Stiffness including the clamped node's DOFs (`6 (n + 1)` unknowns).
pub fn assemble_beam_full(beam: &BeamModel) -> Result<CsrMatrix> {
    let n = beam.n_elements;
    let ke = beam_element_stiffness(
        beam.element_length(),
        &beam.axis_direction,
        &beam.rotation,
        &beam.section,
    )?;
    let mut t = TripletBuilder::new(6 * (n + 1), 6 * (n + 1));
    for e in 0..n {
        t.add_block(&element_dofs_full(e), &ke);
    }
    Ok(t.build())
}

fn free_dofs(beam: &BeamModel) -> Vec<usize> {
    (6..6 * (beam.n_elements + 1)).collect()
}

/// Stiffness with the clamped DOFs eliminated.
pub fn assemble_beam(beam: &BeamModel) -> Result<CsrMatrix> {
    Ok(assemble_beam_full(beam)?.submatrix(&free_dofs(beam)))
}

/// Consistent nodal loads including the clamped node.
pub fn beam_load_vector_full(beam: &BeamModel, loads: &BeamLoads) -> Vec<f64> {
    let n = beam.n_elements;
    let h = beam.element_length();
    let mut f = vec![0.0; 6 * (n + 1)];
    for e in 0..n {
        for node in [e, e + 1] {
            for i in 0..3 {
                f[6 * node + i] += 0.5 * h * loads.distributed_force[i];
                f[6 * node + 3 + i] += 0.5 * h * loads.distributed_moment[i];
            }
        }
    }
    for i in 0..3 {
        f[6 * n + i] += loads.tip_force[i];
        f[6 * n + 3 + i] += loads.tip_moment[i];
    }
    f
}

pub fn beam_load_vector(beam: &BeamModel, loads: &BeamLoads) -> Vec<f64> {
    beam_load_vector_full(beam, loads)[6..].to_vec()
}

/// Gram matrix of `‖w‖²_W + L² ‖θ‖²_R` on the reduced unknowns, with
/// `‖v‖²_W = ‖v‖²_{L²} + L² ‖v′‖²_{L²}` (same for `R`).
pub fn beam_norm_gram(beam: &BeamModel, length_scale: f64) -> Result<CsrMatrix> {
    if !(length_scale > 0.0) {
        return Err(invalid(
            "characteristic_length",
            format!("must be positive, got {length_scale}"),
        ));
    }
    let n = beam.n_elements;
    let h = beam.element_length();
    let l2 = length_scale * length_scale;
    // 2-node mass and gradient matrices
    let mass = [[h / 3.0, h / 6.0], [h / 6.0, h / 3.0]];
    let grad = [[1.0 / h, -1.0 / h], [-1.0 / h, 1.0 / h]];
    let mut t = TripletBuilder::new(6 * (n + 1), 6 * (n + 1));
    for e in 0..n {
        let nodes = [e, e + 1];
        for (a, &na) in nodes.iter().enumerate() {
            for (b, &nb) in nodes.iter().enumerate() {
                let base = mass[a][b] + l2 * grad[a][b];
                for i in 0..3 {
                    t.push(6 * na + i, 6 * nb + i, base);
                    t.push(6 * na + 3 + i, 6 * nb + 3 + i, l2 * base);
                }
            }
        }
    }
    Ok(t.build().submatrix(&free_dofs(beam)))
}
