//! Structured hexahedral meshes, straight beam discretizations and the
//! differential geometry of the coupled interface surface.

use crate::beam::BeamSection;
use crate::error::{invalid, Error, Result};
use nalgebra::{Matrix2, Matrix3, Vector3};
use std::collections::{BTreeMap, HashMap};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Natural coordinates of the eight hexahedron nodes.
pub const HEX_NODES: [[f64; 3]; 8] = [
    [-1.0, -1.0, -1.0],
    [1.0, -1.0, -1.0],
    [1.0, 1.0, -1.0],
    [-1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0],
    [1.0, -1.0, 1.0],
    [1.0, 1.0, 1.0],
    [-1.0, 1.0, 1.0],
];

/// Local faces of the hexahedron. Each list is ordered so that with face
/// coordinates `(s, t)` at nodes `(-,-), (+,-), (+,+), (-,+)` the product
/// `∂x/∂s × ∂x/∂t` points out of the element.
pub const HEX_FACES: [[usize; 4]; 6] = [
    [0, 4, 7, 3], // -x
    [1, 2, 6, 5], // +x
    [0, 1, 5, 4], // -y
    [3, 7, 6, 2], // +y
    [0, 3, 2, 1], // -z
    [4, 5, 6, 7], // +z
];

pub const FACE_NAMES: [&str; 6] = ["-x", "+x", "-y", "+y", "-z", "+z"];

const QUAD_NODES: [[f64; 2]; 4] = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];

/// Two-point Gauss–Legendre abscissae on [-1, 1] (unit weights).
pub const GAUSS2: [f64; 2] = [-0.577_350_269_189_625_8, 0.577_350_269_189_625_8];

pub fn hex_shape(xi: [f64; 3]) -> [f64; 8] {
    let mut n = [0.0; 8];
    for (a, c) in HEX_NODES.iter().enumerate() {
        n[a] = 0.125 * (1.0 + c[0] * xi[0]) * (1.0 + c[1] * xi[1]) * (1.0 + c[2] * xi[2]);
    }
    n
}

pub fn hex_shape_derivatives(xi: [f64; 3]) -> [[f64; 3]; 8] {
    let mut d = [[0.0; 3]; 8];
    for (a, c) in HEX_NODES.iter().enumerate() {
        let f = [1.0 + c[0] * xi[0], 1.0 + c[1] * xi[1], 1.0 + c[2] * xi[2]];
        d[a] = [
            0.125 * c[0] * f[1] * f[2],
            0.125 * f[0] * c[1] * f[2],
            0.125 * f[0] * f[1] * c[2],
        ];
    }
    d
}

pub fn quad_shape(st: [f64; 2]) -> [f64; 4] {
    let mut n = [0.0; 4];
    for (a, c) in QUAD_NODES.iter().enumerate() {
        n[a] = 0.25 * (1.0 + c[0] * st[0]) * (1.0 + c[1] * st[1]);
    }
    n
}

pub fn quad_shape_derivatives(st: [f64; 2]) -> [[f64; 2]; 4] {
    let mut d = [[0.0; 2]; 4];
    for (a, c) in QUAD_NODES.iter().enumerate() {
        d[a] = [
            0.25 * c[0] * (1.0 + c[1] * st[1]),
            0.25 * (1.0 + c[0] * st[0]) * c[1],
        ];
    }
    d
}

/// One quadrature point of a hexahedron mapped to physical space.
#[derive(Clone, Debug)]
pub struct HexPoint {
    pub point: Vec3,
    pub shape: [f64; 8],
    /// Physical gradients of the shape functions.
    pub grad: [Vec3; 8],
    /// Jacobian determinant times the Gauss weight.
    pub dv: f64,
}

/// 2×2×2 Gauss rule on a hexahedron with the given nodal coordinates.
pub fn hex_quadrature(coords: &[Vec3; 8], element: usize) -> Result<Vec<HexPoint>> {
    let mut out = Vec::with_capacity(8);
    for &z in &GAUSS2 {
        for &y in &GAUSS2 {
            for &x in &GAUSS2 {
                let xi = [x, y, z];
                let shape = hex_shape(xi);
                let dn = hex_shape_derivatives(xi);
                // jac[(i, k)] = ∂x_i / ∂ξ_k
                let mut jac = Mat3::zeros();
                let mut point = Vec3::zeros();
                for a in 0..8 {
                    point += coords[a] * shape[a];
                    for k in 0..3 {
                        jac.column_mut(k).axpy(dn[a][k], &coords[a], 1.0);
                    }
                }
                let det = jac.determinant();
                if !(det > 0.0) {
                    return Err(Error::InvertedElement { element, det });
                }
                let inv_t = jac.try_inverse().expect("positive determinant").transpose();
                let mut grad = [Vec3::zeros(); 8];
                for a in 0..8 {
                    grad[a] = inv_t * Vec3::new(dn[a][0], dn[a][1], dn[a][2]);
                }
                out.push(HexPoint {
                    point,
                    shape,
                    grad,
                    dv: det,
                });
            }
        }
    }
    Ok(out)
}

/// A face of the mesh boundary, identified by element and local face index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FaceRef {
    pub element: usize,
    pub face: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    pub nodes: Vec<Vec3>,
    pub elements: Vec<[usize; 8]>,
    pub face_sets: BTreeMap<String, Vec<FaceRef>>,
}

impl Mesh {
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn element_coords(&self, e: usize) -> [Vec3; 8] {
        self.elements[e].map(|n| self.nodes[n])
    }

    pub fn face_nodes(&self, f: FaceRef) -> [usize; 4] {
        let conn = &self.elements[f.element];
        HEX_FACES[f.face].map(|a| conn[a])
    }

    pub fn face_set(&self, name: &str) -> Result<&[FaceRef]> {
        self.face_sets
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::UnknownFaceSet(name.to_string()))
    }

    /// Rigidly translated copy.
    pub fn translated(&self, shift: Vec3) -> Mesh {
        Mesh {
            nodes: self.nodes.iter().map(|x| x + shift).collect(),
            ..self.clone()
        }
    }

    pub fn volume(&self) -> Result<f64> {
        let mut v = 0.0;
        for e in 0..self.num_elements() {
            v += hex_quadrature(&self.element_coords(e), e)?
                .iter()
                .map(|q| q.dv)
                .sum::<f64>();
        }
        Ok(v)
    }

    /// Checks connectivity bounds, element orientation and that every face
    /// in a face set is a boundary face.
    pub fn validate(&self) -> Result<()> {
        let n = self.nodes.len();
        for (e, conn) in self.elements.iter().enumerate() {
            if let Some(&bad) = conn.iter().find(|&&i| i >= n) {
                return Err(Error::InvalidConfiguration(format!(
                    "element {e} references node {bad} of {n}"
                )));
            }
            hex_quadrature(&self.element_coords(e), e)?;
        }
        let mut count: HashMap<[usize; 4], usize> = HashMap::new();
        for e in 0..self.elements.len() {
            for f in 0..6 {
                let mut key = self.face_nodes(FaceRef {
                    element: e,
                    face: f,
                });
                key.sort_unstable();
                *count.entry(key).or_default() += 1;
            }
        }
        for (name, faces) in &self.face_sets {
            for &f in faces {
                if f.element >= self.elements.len() || f.face >= 6 {
                    return Err(Error::InvalidConfiguration(format!(
                        "face set `{name}` has invalid face {f:?}"
                    )));
                }
                let mut key = self.face_nodes(f);
                key.sort_unstable();
                if count[&key] != 1 {
                    return Err(Error::InvalidConfiguration(format!(
                        "face set `{name}` contains interior face {f:?}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Structured hex8 mesh of the box `[0, lx] × [0, ly] × [0, lz]`.
pub fn build_block_mesh(dimensions: [f64; 3], divisions: [usize; 3]) -> Result<Mesh> {
    build_block_mesh_at(Vec3::zeros(), dimensions, divisions)
}

/// Structured hex8 mesh of an axis-aligned box with the given lower corner.
///
/// Face sets are named by outward normal: `-x`, `+x`, `-y`, `+y`, `-z`, `+z`.
pub fn build_block_mesh_at(
    origin: Vec3,
    dimensions: [f64; 3],
    divisions: [usize; 3],
) -> Result<Mesh> {
    if dimensions.iter().any(|d| !(*d > 0.0) || !d.is_finite()) {
        return Err(invalid(
            "dimensions",
            format!("must be positive, got {dimensions:?}"),
        ));
    }
    if divisions.contains(&0) {
        return Err(invalid(
            "divisions",
            format!("must be positive, got {divisions:?}"),
        ));
    }
    let [nx, ny, nz] = divisions;
    let node = |i: usize, j: usize, k: usize| i + (nx + 1) * (j + (ny + 1) * k);

    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1) * (nz + 1));
    for k in 0..=nz {
        for j in 0..=ny {
            for i in 0..=nx {
                nodes.push(
                    origin
                        + Vec3::new(
                            dimensions[0] * i as f64 / nx as f64,
                            dimensions[1] * j as f64 / ny as f64,
                            dimensions[2] * k as f64 / nz as f64,
                        ),
                );
            }
        }
    }

    let mut elements = Vec::with_capacity(nx * ny * nz);
    let mut face_sets: BTreeMap<String, Vec<FaceRef>> = FACE_NAMES
        .iter()
        .map(|n| (n.to_string(), Vec::new()))
        .collect();
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let e = elements.len();
                elements.push([
                    node(i, j, k),
                    node(i + 1, j, k),
                    node(i + 1, j + 1, k),
                    node(i, j + 1, k),
                    node(i, j, k + 1),
                    node(i + 1, j, k + 1),
                    node(i + 1, j + 1, k + 1),
                    node(i, j + 1, k + 1),
                ]);
                let on = [
                    i == 0,
                    i + 1 == nx,
                    j == 0,
                    j + 1 == ny,
                    k == 0,
                    k + 1 == nz,
                ];
                for (face, &b) in on.iter().enumerate() {
                    if b {
                        face_sets
                            .get_mut(FACE_NAMES[face])
                            .unwrap()
                            .push(FaceRef { element: e, face });
                    }
                }
            }
        }
    }
    Ok(Mesh {
        nodes,
        elements,
        face_sets,
    })
}

/// Geometric data at one quadrature point of an interface face.
#[derive(Clone, Debug)]
pub struct SurfacePoint {
    pub point: Vec3,
    /// Covariant tangents `T_α = ∂x/∂ξ^α`.
    pub tangents: [Vec3; 2],
    /// Dual tangents `T^α` with `T^α · T_β = δ^α_β`.
    pub duals: [Vec3; 2],
    /// Area element times quadrature weight.
    pub da: f64,
    pub shape: [f64; 4],
    /// `∂N_a/∂ξ^α`
    pub dshape: [[f64; 2]; 4],
}

#[derive(Clone, Debug)]
pub struct InterfaceFace {
    pub face: FaceRef,
    pub nodes: [usize; 4],
    pub points: Vec<SurfacePoint>,
}

/// The coupled face set Σ together with its area, centroid and `J` tensor.
#[derive(Clone, Debug)]
pub struct InterfaceSurface {
    pub name: String,
    pub faces: Vec<InterfaceFace>,
    pub area: f64,
    pub centroid: Vec3,
    /// `∫_Σ (2I − T^α ⊗ T_α) dA`
    pub j: Mat3,
    pub is_planar: bool,
    /// Mean outward unit normal.
    pub normal: Vec3,
    /// Distinct solid nodes touched by Σ, ascending.
    pub nodes: Vec<usize>,
}

const PLANARITY_TOL: f64 = 1e-8;

impl InterfaceSurface {
    pub fn points(&self) -> impl Iterator<Item = (&InterfaceFace, &SurfacePoint)> {
        self.faces
            .iter()
            .flat_map(|f| f.points.iter().map(move |p| (f, p)))
    }

    /// Largest `|T^α · T_β − δ^α_β|` over all quadrature points.
    pub fn duality_defect(&self) -> f64 {
        self.points()
            .flat_map(|(_, p)| {
                (0..2).flat_map(move |a| {
                    (0..2).map(move |b| {
                        let delta = if a == b { 1.0 } else { 0.0 };
                        (p.duals[a].dot(&p.tangents[b]) - delta).abs()
                    })
                })
            })
            .fold(0.0, f64::max)
    }

    pub fn diameter(&self) -> f64 {
        let mut d = 0.0_f64;
        for (_, p) in self.points() {
            for (_, q) in self.points() {
                d = d.max((p.point - q.point).norm());
            }
        }
        d
    }
}

/// Interface surface built from a named face set of the mesh.
pub fn extract_interface(mesh: &Mesh, face_set: &str) -> Result<InterfaceSurface> {
    let faces = mesh.face_set(face_set)?.to_vec();
    interface_from_faces(mesh, face_set, &faces)
}

/// Interface surface built from an explicit list of boundary faces.
pub fn interface_from_faces(
    mesh: &Mesh,
    name: &str,
    faces: &[FaceRef],
) -> Result<InterfaceSurface> {
    if faces.is_empty() {
        return Err(Error::DegenerateInterface(name.to_string()));
    }
    let mut out_faces = Vec::with_capacity(faces.len());
    let mut area = 0.0;
    let mut first_moment = Vec3::zeros();
    let mut j = Mat3::zeros();
    let mut normals = Vec::new();
    let mut nodes = Vec::new();

    for &f in faces {
        let fnodes = mesh.face_nodes(f);
        nodes.extend_from_slice(&fnodes);
        let x = fnodes.map(|n| mesh.nodes[n]);
        let mut points = Vec::with_capacity(4);
        for &t in &GAUSS2 {
            for &s in &GAUSS2 {
                let st = [s, t];
                let shape = quad_shape(st);
                let dshape = quad_shape_derivatives(st);
                let mut point = Vec3::zeros();
                let mut tangents = [Vec3::zeros(); 2];
                for a in 0..4 {
                    point += x[a] * shape[a];
                    tangents[0] += x[a] * dshape[a][0];
                    tangents[1] += x[a] * dshape[a][1];
                }
                let g = Matrix2::new(
                    tangents[0].dot(&tangents[0]),
                    tangents[0].dot(&tangents[1]),
                    tangents[1].dot(&tangents[0]),
                    tangents[1].dot(&tangents[1]),
                );
                let det = g.determinant();
                let scale = g[(0, 0)].max(g[(1, 1)]);
                if !(det > 1e-14 * scale * scale) {
                    return Err(Error::DegenerateFace {
                        element: f.element,
                        face: f.face,
                        det,
                    });
                }
                let gi = g.try_inverse().expect("nonsingular metric");
                let duals = [
                    tangents[0] * gi[(0, 0)] + tangents[1] * gi[(0, 1)],
                    tangents[0] * gi[(1, 0)] + tangents[1] * gi[(1, 1)],
                ];
                let n = tangents[0].cross(&tangents[1]);
                let da = n.norm();
                normals.push(n / da);
                area += da;
                first_moment += point * da;
                j += (Mat3::identity() * 2.0
                    - duals[0] * tangents[0].transpose()
                    - duals[1] * tangents[1].transpose())
                    * da;
                points.push(SurfacePoint {
                    point,
                    tangents,
                    duals,
                    da,
                    shape,
                    dshape,
                });
            }
        }
        out_faces.push(InterfaceFace {
            face: f,
            nodes: fnodes,
            points,
        });
    }
    if !(area > 0.0) {
        return Err(Error::DegenerateInterface(name.to_string()));
    }
    nodes.sort_unstable();
    nodes.dedup();

    let n0 = normals[0];
    let is_planar = normals
        .iter()
        .all(|n| n.cross(&n0).norm() < PLANARITY_TOL && n.dot(&n0) > 0.0);
    if !is_planar {
        log::warn!("interface `{name}` is not planar; the rotation constraint is only verified for planar surfaces");
    }
    let mean_normal: Vec3 = normals.iter().sum();
    Ok(InterfaceSurface {
        name: name.to_string(),
        faces: out_faces,
        area,
        centroid: first_moment / area,
        j: (j + j.transpose()) * 0.5,
        is_planar,
        normal: mean_normal.normalize(),
        nodes,
    })
}

/// Straight, prismatic, clamped-free beam discretized by equal two-node elements.
#[derive(Clone, Debug, PartialEq)]
pub struct BeamModel {
    pub length: f64,
    pub n_elements: usize,
    pub axis_origin: Vec3,
    pub axis_direction: Vec3,
    pub section: BeamSection,
    /// Constant section rotation `Λ`: maps `e3` to the axis, `e1`, `e2` to the
    /// principal directions.
    pub rotation: Mat3,
}

impl BeamModel {
    pub fn num_nodes(&self) -> usize {
        self.n_elements + 1
    }

    pub fn element_length(&self) -> f64 {
        self.length / self.n_elements as f64
    }

    pub fn arclengths(&self) -> Vec<f64> {
        (0..=self.n_elements)
            .map(|i| self.length * i as f64 / self.n_elements as f64)
            .collect()
    }

    pub fn node_position(&self, i: usize) -> Vec3 {
        self.axis_origin + self.axis_direction * (self.length * i as f64 / self.n_elements as f64)
    }

    pub fn clamp_point(&self) -> Vec3 {
        self.axis_origin
    }

    pub fn tip_point(&self) -> Vec3 {
        self.axis_origin + self.axis_direction * self.length
    }
}

/// Section frame for a straight axis: the first principal direction is the
/// projection of `e1` (or `e2` when the axis is nearly parallel to `e1`).
pub fn section_frame(direction: &Vec3) -> Mat3 {
    let d = direction.normalize();
    let seed = if d.x.abs() < 0.9 {
        Vec3::x()
    } else {
        Vec3::y()
    };
    let e1 = (seed - d * seed.dot(&d)).normalize();
    let e2 = d.cross(&e1);
    Mat3::from_columns(&[e1, e2, d])
}

pub fn build_beam(
    length: f64,
    n_elements: usize,
    axis_origin: Vec3,
    axis_direction: Vec3,
    section: BeamSection,
) -> Result<BeamModel> {
    if !(length > 0.0) || !length.is_finite() {
        return Err(invalid("length", format!("must be positive, got {length}")));
    }
    if n_elements == 0 {
        return Err(invalid("elements", "must be at least 1"));
    }
    let norm = axis_direction.norm();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(invalid("axis_direction", "must be a nonzero vector"));
    }
    section.validate()?;
    let axis_direction = axis_direction / norm;
    Ok(BeamModel {
        length,
        n_elements,
        axis_origin,
        axis_direction,
        section,
        rotation: section_frame(&axis_direction),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    #[test]
    fn unit_block_counts() {
        let m = build_block_mesh([1.0; 3], [1, 1, 1]).unwrap();
        assert_eq!(m.num_nodes(), 8);
        assert_eq!(m.num_elements(), 1);
        for name in FACE_NAMES {
            assert_eq!(m.face_set(name).unwrap().len(), 1);
        }
        m.validate().unwrap();

        let m = build_block_mesh([1.0, 1.0, 2.0], [2, 2, 4]).unwrap();
        assert_eq!(m.num_nodes(), 45);
        assert_eq!(m.num_elements(), 16);
        m.validate().unwrap();
    }

    #[test]
    fn rejects_non_positive_input() {
        assert!(build_block_mesh([1.0, 0.0, 1.0], [1, 1, 1]).is_err());
        assert!(build_block_mesh([1.0, 1.0, 1.0], [1, 0, 1]).is_err());
        assert!(build_block_mesh([1.0, -2.0, 1.0], [1, 1, 1]).is_err());
    }

    #[test]
    fn face_orientation_is_outward() {
        let m = build_block_mesh([1.0, 2.0, 3.0], [2, 1, 3]).unwrap();
        let expected = [
            -Vec3::x(),
            Vec3::x(),
            -Vec3::y(),
            Vec3::y(),
            -Vec3::z(),
            Vec3::z(),
        ];
        for (name, n) in FACE_NAMES.iter().zip(expected) {
            let s = extract_interface(&m, name).unwrap();
            assert!((s.normal - n).norm() < 1e-14, "{name}");
            assert!(s.is_planar);
        }
    }

    #[test]
    fn unit_square_interface() {
        for div in [1, 2, 5] {
            let m = build_block_mesh([1.0; 3], [div, div, 1]).unwrap();
            let s = extract_interface(&m, "+z").unwrap();
            assert!((s.area - 1.0).abs() < 1e-12);
            assert!((s.centroid - Vec3::new(0.5, 0.5, 1.0)).norm() < 1e-12);
            let expected = Mat3::from_diagonal(&Vec3::new(1.0, 1.0, 2.0));
            assert!((s.j - expected).amax() < 1e-12);
            assert!(s.duality_defect() < 1e-12);
        }
    }

    #[test]
    fn rectangle_interface_scales_with_area() {
        let m = build_block_mesh([1.0, 2.0, 0.5], [2, 3, 1]).unwrap();
        let s = extract_interface(&m, "-z").unwrap();
        assert!((s.area - 2.0).abs() < 1e-12);
        assert!((s.j - Mat3::from_diagonal(&Vec3::new(2.0, 2.0, 4.0))).amax() < 1e-12);
    }

    #[test]
    fn missing_face_set_is_an_error() {
        let m = build_block_mesh([1.0; 3], [1, 1, 1]).unwrap();
        assert!(matches!(
            extract_interface(&m, "top"),
            Err(Error::UnknownFaceSet(_))
        ));
        assert!(matches!(
            interface_from_faces(&m, "empty", &[]),
            Err(Error::DegenerateInterface(_))
        ));
    }

    #[test]
    fn collapsed_face_is_degenerate() {
        let mut m = build_block_mesh([1.0; 3], [1, 1, 1]).unwrap();
        // squash the +z face onto a line
        for n in [4, 7] {
            m.nodes[n].y = 0.0;
        }
        for n in [5, 6] {
            m.nodes[n].y = 0.0;
        }
        assert!(matches!(
            extract_interface(&m, "+z"),
            Err(Error::DegenerateFace { .. })
        ));
    }

    #[test]
    fn inverted_element_is_reported() {
        let mut m = build_block_mesh([1.0; 3], [1, 1, 1]).unwrap();
        m.nodes.iter_mut().for_each(|x| x.z = -x.z);
        assert!(matches!(m.validate(), Err(Error::InvertedElement { .. })));
    }

    #[test]
    fn beam_nodes() {
        let sec = BeamSection::rectangle(1.0, 0.4, 0.1, 0.2);
        let b = build_beam(1.0, 1, Vec3::zeros(), Vec3::z(), sec.clone()).unwrap();
        assert_eq!(b.arclengths(), vec![0.0, 1.0]);
        let b = build_beam(2.0, 4, Vec3::zeros(), Vec3::new(0.0, 0.0, 3.0), sec.clone()).unwrap();
        assert_eq!(b.arclengths(), vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        assert!((b.axis_direction.norm() - 1.0).abs() < 1e-12);
        assert!((b.tip_point() - Vec3::new(0.0, 0.0, 2.0)).norm() < 1e-15);
        assert!(build_beam(0.0, 1, Vec3::zeros(), Vec3::z(), sec.clone()).is_err());
        assert!(build_beam(1.0, 0, Vec3::zeros(), Vec3::z(), sec).is_err());
    }

    #[test]
    fn section_frame_is_proper_orthogonal() {
        for d in [Vec3::z(), Vec3::x(), -Vec3::y(), Vec3::new(1.0, 2.0, -0.5)] {
            let r = section_frame(&d);
            assert!((r.transpose() * r - Mat3::identity()).amax() < 1e-14);
            assert!((r.determinant() - 1.0).abs() < 1e-14);
            assert!((r * Vec3::z() - d.normalize()).norm() < 1e-14);
        }
        assert_eq!(section_frame(&Vec3::z()), Mat3::identity());
    }
}
