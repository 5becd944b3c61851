//! Randomized and refinement-sequence properties of the discretization.

use beamlink::analysis::{
    compute_m, inf_sup_constant, kernel_ellipticity, witness_infsup_bound, InfSupOperator,
    StabilityOptions,
};
use beamlink::beam::{
    assemble_beam, beam_element_stiffness, beam_load_vector, beam_norm_gram, BeamLoads,
    BeamSection, BeamState,
};
use beamlink::coupling::{
    assemble_b, rotation_average, rotation_constraint_rows, DofLayout, MultiplierState,
};
use beamlink::geometry::{
    build_beam, build_block_mesh_at, extract_interface, section_frame, BeamModel, InterfaceSurface,
    Mat3, Mesh, Vec3, FACE_NAMES,
};
use beamlink::linalg::{
    generalized_eigenvalues, symmetric_eigenvalues, CsrMatrix, KernelBasis, SymmetricSolver,
    TripletBuilder,
};
use beamlink::matrix_market::{self, Symmetry};
use beamlink::saddle::{assemble_system, solve, CoupledModel, SaddleSystem};
use beamlink::scenario::drift;
use beamlink::solid::{
    assemble_solid, mass_gram, solid_element_stiffness, u_norm_gram, SolidLoads, SolidMaterial,
    Traction,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn vec3(range: f64) -> impl Strategy<Value = Vec3> {
    prop::array::uniform3(-range..range).prop_map(Vec3::from)
}

fn dims() -> impl Strategy<Value = [f64; 3]> {
    prop::array::uniform3(0.4..2.0_f64)
}

fn divisions() -> impl Strategy<Value = [usize; 3]> {
    prop::array::uniform3(1..4_usize)
}

/// Moves the nodes lying on face set `name` inside its plane by up to
/// `fraction` of the smallest element size.
fn shear_face_nodes(
    mesh: &mut Mesh,
    name: &str,
    dims: [f64; 3],
    divs: [usize; 3],
    fraction: f64,
    seed: u64,
) {
    let axis = FACE_NAMES.iter().position(|n| *n == name).unwrap() / 2;
    let h = (0..3)
        .map(|i| dims[i] / divs[i] as f64)
        .fold(f64::INFINITY, f64::min);
    let nodes: std::collections::BTreeSet<usize> = mesh
        .face_set(name)
        .unwrap()
        .iter()
        .flat_map(|&f| mesh.face_nodes(f))
        .collect();
    let mut state = seed
        .wrapping_mul(6364136223846793005)
        .wrapping_add(1442695040888963407);
    let mut next = || {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    };
    for n in nodes {
        for i in 0..3 {
            if i != axis {
                mesh.nodes[n][i] += fraction * h * next();
            }
        }
    }
}

/// `∫_Σ (2I − P_tangent) dA` and `|Σ|` by a 16×16 midpoint rule on each
/// bilinear face, with the tangent projector built from the inverse metric.
fn brute_force_j(mesh: &Mesh, surface: &InterfaceSurface) -> (Mat3, f64) {
    const K: usize = 16;
    let corners = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];
    let mut j = Mat3::zeros();
    let mut area = 0.0;
    for face in &surface.faces {
        let x = face.nodes.map(|n| mesh.nodes[n]);
        for a in 0..K {
            for b in 0..K {
                let s = -1.0 + (2.0 * a as f64 + 1.0) / K as f64;
                let t = -1.0 + (2.0 * b as f64 + 1.0) / K as f64;
                let mut t1 = Vec3::zeros();
                let mut t2 = Vec3::zeros();
                for (c, xc) in corners.iter().zip(&x) {
                    t1 += xc * (0.25 * c[0] * (1.0 + c[1] * t));
                    t2 += xc * (0.25 * c[1] * (1.0 + c[0] * s));
                }
                let g = nalgebra::Matrix2::new(t1.dot(&t1), t1.dot(&t2), t2.dot(&t1), t2.dot(&t2));
                let gi = g.try_inverse().unwrap();
                let tan = [t1, t2];
                let mut proj = Mat3::zeros();
                for p in 0..2 {
                    for q in 0..2 {
                        proj += tan[p] * tan[q].transpose() * gi[(p, q)];
                    }
                }
                let da = t1.cross(&t2).norm() * (2.0 / K as f64).powi(2);
                j += (Mat3::identity() * 2.0 - proj) * da;
                area += da;
            }
        }
    }
    (j, area)
}

fn dense_sym_defect(a: &DMatrix<f64>) -> f64 {
    (a - a.transpose()).amax() / a.amax().max(f64::MIN_POSITIVE)
}

fn coupled(
    divs: usize,
    elements: usize,
    shift: Vec3,
    loads: SolidLoads,
    beam_loads: BeamLoads,
) -> SaddleSystem {
    let mesh = build_block_mesh_at(shift, [1.0, 0.8, 1.2], [divs, divs, divs]).unwrap();
    let surface = extract_interface(&mesh, "-z").unwrap();
    let section = BeamSection::rectangle(100.0, 40.0, 0.2, 0.1);
    let beam = build_beam(
        1.5,
        elements,
        surface.centroid - Vec3::z() * 1.5,
        Vec3::z(),
        section,
    )
    .unwrap();
    let material = SolidMaterial::from_young_poisson(100.0, 0.3).unwrap();
    let model = CoupledModel::new(mesh, material, beam, surface, loads, beam_loads, 1.5).unwrap();
    assemble_system(&model).unwrap()
}

fn cantilever(
    section: BeamSection,
    length: f64,
    elements: usize,
    dir: Vec3,
    loads: &BeamLoads,
) -> (BeamModel, BeamState) {
    let beam = build_beam(length, elements, Vec3::new(0.2, -0.1, 0.3), dir, section).unwrap();
    let k = assemble_beam(&beam).unwrap();
    let x = SymmetricSolver::new(&k, usize::MAX).solve(&beam_load_vector(&beam, loads));
    let state = BeamState::from_reduced(&beam, &x).unwrap();
    (beam, state)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn interface_geometry_matches_brute_force(
        d in dims(), n in divisions(), origin in vec3(1.0), face in 0..6_usize, seed in any::<u64>()
    ) {
        let name = FACE_NAMES[face];
        let mut mesh = build_block_mesh_at(origin, d, n).unwrap();
        shear_face_nodes(&mut mesh, name, d, n, 0.2, seed);
        let s = extract_interface(&mesh, name).unwrap();
        prop_assert!(s.duality_defect() < 1e-10);
        prop_assert!(s.is_planar);
        let (j, area) = brute_force_j(&mesh, &s);
        prop_assert!((s.j - j).amax() <= 1e-8 * j.amax());
        prop_assert!((s.area - area).abs() <= 1e-10 * area);
        // planar: J = |Σ| (I + n ⊗ n)
        let planar = (Mat3::identity() + s.normal * s.normal.transpose()) * s.area;
        prop_assert!((s.j - planar).amax() <= 1e-10 * s.area);
        prop_assert!((s.j - s.j.transpose()).amax() <= 1e-14 * s.area);
        prop_assert!(s.j.symmetric_eigenvalues().min() > 0.0);
    }

    #[test]
    fn area_and_centroid_do_not_change_under_refinement(d in dims(), n in divisions(), origin in vec3(1.0), face in 0..6_usize) {
        let name = FACE_NAMES[face];
        let coarse = extract_interface(&build_block_mesh_at(origin, d, n).unwrap(), name).unwrap();
        let fine = extract_interface(&build_block_mesh_at(origin, d, n.map(|k| 2 * k)).unwrap(), name).unwrap();
        prop_assert!((coarse.area - fine.area).abs() <= 1e-12 * coarse.area);
        prop_assert!((coarse.centroid - fine.centroid).norm() <= 1e-12 * (1.0 + coarse.centroid.norm()));
    }

    #[test]
    fn distorted_hex_has_exactly_six_rigid_modes(
        jitter in prop::array::uniform8(vec3(0.15)), c in vec3(1.0), w in vec3(1.0), e in 1.0..300.0_f64, nu in 0.0..0.45_f64
    ) {
        let unit = [[0., 0., 0.], [1., 0., 0.], [1., 1., 0.], [0., 1., 0.], [0., 0., 1.], [1., 0., 1.], [1., 1., 1.], [0., 1., 1.]];
        let coords: [Vec3; 8] = std::array::from_fn(|i| Vec3::from(unit[i]) + jitter[i]);
        let k = solid_element_stiffness(&coords, 0, &SolidMaterial::from_young_poisson(e, nu).unwrap()).unwrap();
        prop_assert!(dense_sym_defect(&k) < 1e-12);
        let center = Vec3::new(0.3, 0.7, -0.2);
        let v = DVector::from_iterator(24, coords.iter().flat_map(|x| {
            let u = c + w.cross(&(x - center));
            [u.x, u.y, u.z]
        }));
        prop_assert!((&k * &v).amax() <= 1e-10 * k.amax() * v.amax());
        let ev = symmetric_eigenvalues(&k);
        let top = ev[23];
        prop_assert_eq!(ev.iter().filter(|l| l.abs() < 1e-10 * top).count(), 6);
        prop_assert!(ev[0] > -1e-10 * top);
    }

    #[test]
    fn beam_element_rigid_motions_carry_no_energy(
        dir in vec3(1.0).prop_filter("nonzero", |d| d.norm() > 0.1), c in vec3(1.0), w in vec3(1.0), p in vec3(2.0), h in 0.05..2.0_f64
    ) {
        let d = dir.normalize();
        let section = BeamSection::rectangle(210.0, 80.0, 0.12, 0.07);
        let k = beam_element_stiffness(h, &d, &section_frame(&d), &section).unwrap();
        let r0 = Vec3::new(0.4, -0.3, 0.2);
        let mut v = DVector::zeros(12);
        for (node, r) in [r0, r0 + d * h].iter().enumerate() {
            let u = c + w.cross(&(r - p));
            v.fixed_rows_mut::<3>(6 * node).copy_from(&u);
            v.fixed_rows_mut::<3>(6 * node + 3).copy_from(&w);
        }
        prop_assert!((&k * &v).amax() <= 1e-10 * k.amax() * v.amax());
    }

    #[test]
    fn timoshenko_tip_values_are_exact(
        e in 10.0..500.0_f64, ratio in 0.2..0.5_f64, width in 0.02..0.3_f64, height in 0.02..0.3_f64,
        length in 0.5..5.0_f64, elements in 1..12_usize, dir in vec3(1.0).prop_filter("nonzero", |d| d.norm() > 0.1),
        p in 0.001..1.0_f64
    ) {
        let section = BeamSection::rectangle(e, e * ratio, width, height);
        let frame = section_frame(&dir.normalize());
        let (e1, e2) = (frame.column(0).into_owned(), frame.column(1).into_owned());
        let loads = BeamLoads { tip_force: (e2 * p).into(), ..Default::default() };
        let (_, tip) = cantilever(section.clone(), length, elements, dir, &loads);
        let exact = p * length.powi(3) / (3.0 * section.e * section.i1) + p * length / (section.g * section.a2);
        prop_assert!((tip.tip_displacement().dot(&e2) - exact).abs() <= 1e-9 * exact);
        let loads = BeamLoads { tip_moment: (e2 * p).into(), ..Default::default() };
        let (_, tip) = cantilever(section.clone(), length, elements, dir, &loads);
        let exact = p * length / (section.e * section.i2);
        prop_assert!((tip.tip_rotation().dot(&e2) - exact).abs() <= 1e-9 * exact);
        // bending about e2 carries the tip towards +e1 (w′ = θ × r′)
        let along = tip.tip_displacement().dot(&e1);
        let expected = p * length * length / (2.0 * section.e * section.i2);
        prop_assert!((along - expected).abs() <= 1e-9 * expected.abs());
    }

    #[test]
    fn rigid_pairs_satisfy_both_constraints(
        d in dims(), n in divisions(), origin in vec3(1.0), face in 0..6_usize, c in vec3(1.0), w in vec3(1.0)
    ) {
        let mesh = build_block_mesh_at(origin, d, n).unwrap();
        let s = extract_interface(&mesh, FACE_NAMES[face]).unwrap();
        let layout = DofLayout::new(mesh.num_nodes(), 3);
        let b = assemble_b(&s, &layout).unwrap();
        prop_assert_eq!(b.rank(), 6);
        let mut x = beamlink::solid::rigid_motion(&mesh, &c, &w, &s.centroid);
        x.resize(layout.n_primal(), 0.0);
        x[layout.tip_w()..layout.tip_w() + 3].copy_from_slice(c.as_slice());
        x[layout.tip_theta()..layout.tip_theta() + 3].copy_from_slice(w.as_slice());
        let scale = c.norm() + w.norm() * s.diameter();
        for r in b.apply(&x) {
            prop_assert!(r.abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn rotation_rows_measure_the_average_rotation_gap(
        d in dims(), n in divisions(), face in 0..6_usize, u in prop::collection::vec(-1.0..1.0_f64, 192), theta in vec3(1.0)
    ) {
        let mesh = build_block_mesh_at(Vec3::new(0.1, 0.2, -0.3), d, n).unwrap();
        let s = extract_interface(&mesh, FACE_NAMES[face]).unwrap();
        let layout = DofLayout::new(mesh.num_nodes(), 2);
        let rows = rotation_constraint_rows(&s, &layout).unwrap();
        let mut x: Vec<f64> = u.iter().copied().cycle().take(3 * mesh.num_nodes()).collect();
        let hat = rotation_average(&s, &x).unwrap();
        x.resize(layout.n_primal(), 0.0);
        x[layout.tip_theta()..layout.tip_theta() + 3].copy_from_slice(theta.as_slice());
        let residual = &rows * DVector::from_column_slice(&x);
        let expected = s.j * (hat - theta);
        prop_assert!((Vec3::from_column_slice(residual.as_slice()) - expected).norm() <= 1e-12 * (1.0 + (s.j * hat).norm() + (s.j * theta).norm()));
    }

    #[test]
    fn matrix_market_round_trip_is_bit_exact(entries in prop::collection::vec((0..9_usize, 0..9_usize, -1e6..1e6_f64), 1..40)) {
        let mut t = TripletBuilder::new(9, 9);
        for &(i, j, v) in &entries {
            t.push(i, j, v);
            if i != j {
                t.push(j, i, v);
            }
        }
        let a = t.build();
        for sym in [Symmetry::Symmetric, Symmetry::General] {
            let back = matrix_market::parse(&matrix_market::to_string(&a, sym)).unwrap().to_csr();
            prop_assert_eq!(back.to_dense(), a.to_dense());
        }
    }

    #[test]
    fn inertia_tensor_is_symmetric_and_translation_free(d in dims(), n in divisions(), origin in vec3(2.0), shift in vec3(3.0), x_g in vec3(1.0)) {
        let mesh = build_block_mesh_at(origin, d, n).unwrap();
        let m = compute_m(&mesh, &x_g).unwrap();
        prop_assert!((m - m.transpose()).amax() <= 1e-14 * m.amax());
        let ev = m.symmetric_eigenvalues();
        for i in 0..3 {
            prop_assert!(ev[i] <= ev[(i + 1) % 3] + ev[(i + 2) % 3] + 1e-12 * m.amax());
        }
        let moved = compute_m(&mesh.translated(shift), &(x_g + shift)).unwrap();
        prop_assert!((moved - m).amax() <= 1e-10 * m.amax());
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 8, ..ProptestConfig::default() })]

    #[test]
    fn solves_pass_every_check_and_minimize_on_the_kernel(
        body in vec3(1.0), traction in vec3(1.0), tip in vec3(0.05), moment in vec3(0.05), dist in vec3(0.02), seed in any::<u64>()
    ) {
        let loads = SolidLoads {
            body_force: body.into(),
            tractions: vec![Traction { face_set: "+y".into(), traction: traction.into() }],
        };
        let beam_loads = BeamLoads { distributed_force: dist.into(), tip_force: tip.into(), tip_moment: moment.into(), ..Default::default() };
        let sys = coupled(2, 3, Vec3::new(0.3, -0.2, 0.5), loads, beam_loads);
        let rep = solve(&sys).unwrap();
        for c in rep.checks() {
            prop_assert!(c.passed, "{} = {:e} (tolerance {:e})", c.name, c.value, c.tolerance);
        }
        let x: Vec<f64> = rep.u.iter().copied().chain(rep_beam(&sys, &rep)).collect();
        let energy = |y: &[f64]| 0.5 * sys.k.quad_form(y, y) - y.iter().zip(&sys.f).map(|(a, b)| a * b).sum::<f64>();
        let z = KernelBasis::new(sys.b()).basis();
        let mut state = seed | 1;
        for _ in 0..5 {
            let coeffs = DVector::from_fn(z.ncols(), |_, _| {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                (state % 2001) as f64 / 1000.0 - 1.0
            });
            let dir = &z * coeffs;
            let step: Vec<f64> = x.iter().zip(dir.iter()).map(|(a, b)| a + 1e-3 * b).collect();
            prop_assert!(energy(&step) > energy(&x));
            let bx = sys.constraints.apply(&step);
            prop_assert!(bx.iter().all(|v| v.abs() <= 1e-9 * (1.0 + rep.primal_norm)));
        }
    }

    #[test]
    fn witness_ratio_never_exceeds_the_supremum(q in prop::array::uniform6(-1.0..1.0_f64)) {
        let sys = coupled(2, 2, Vec3::zeros(), SolidLoads::default(), BeamLoads::default());
        let op = InfSupOperator::for_system(&sys, usize::MAX).unwrap();
        let w = witness_infsup_bound(&sys, &MultiplierState::from_slice(&q));
        prop_assert!(w.ratio <= op.sup(&q) + 1e-10);
        prop_assert!(op.beta().unwrap() * op.q_norm(&q) <= op.sup(&q) + 1e-10);
        prop_assert!((w.numerator - w.predicted).abs() <= 1e-10 * (1.0 + w.predicted.abs()));
    }

    #[test]
    fn stability_constants_ignore_rigid_translation(shift in vec3(5.0)) {
        let opts = StabilityOptions::default();
        let base = coupled(1, 2, Vec3::zeros(), SolidLoads::default(), BeamLoads::default());
        let moved = coupled(1, 2, shift, SolidLoads::default(), BeamLoads::default());
        let (a0, a1) = (kernel_ellipticity(&base, &opts).unwrap(), kernel_ellipticity(&moved, &opts).unwrap());
        let (b0, b1) = (inf_sup_constant(&base, &opts).unwrap(), inf_sup_constant(&moved, &opts).unwrap());
        prop_assert!((a0 - a1).abs() <= 1e-8 * a0);
        prop_assert!((b0 - b1).abs() <= 1e-8 * b0);
    }
}

fn rep_beam(sys: &SaddleSystem, rep: &beamlink::saddle::SolveReport) -> Vec<f64> {
    // reduced beam vector: drop the clamped node
    let mut v = Vec::with_capacity(sys.layout.n_beam());
    for i in 1..rep.beam.w.len() {
        v.extend(rep.beam.w[i].iter());
        v.extend(rep.beam.theta[i].iter());
    }
    v
}

fn generalized_extremes(k: &CsrMatrix, g: &CsrMatrix) -> (f64, f64) {
    let ev = generalized_eigenvalues(&k.to_dense(), &g.to_dense()).unwrap();
    (ev[0], ev[ev.len() - 1])
}

#[test]
fn solid_continuity_and_garding_constants_settle() {
    let material = SolidMaterial::from_young_poisson(100.0, 0.3).unwrap();
    let mut upper = Vec::new();
    let mut lower = Vec::new();
    for n in [1, 2, 4] {
        let mesh = build_block_mesh_at(Vec3::zeros(), [1.0, 0.8, 1.2], [n, n, n]).unwrap();
        let k = assemble_solid(&mesh, &material).unwrap();
        let g = u_norm_gram(&mesh, 1.0).unwrap();
        let (_, c) = generalized_extremes(&k, &g);
        let (garding, _) = generalized_extremes(&k.add(&mass_gram(&mesh).unwrap()), &g);
        upper.push(c);
        lower.push(garding);

        // Cauchy–Schwarz in the energy norm caps the sampled bilinear ratios by C
        let mut seed = 0x9e37_79b9_u64 + n as u64;
        let mut next = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
            (seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for _ in 0..10 {
            let v: Vec<f64> = (0..k.nrows()).map(|_| next()).collect();
            let w: Vec<f64> = (0..k.nrows()).map(|_| next()).collect();
            let ratio =
                k.quad_form(&v, &w).abs() / (g.quad_form(&v, &v) * g.quad_form(&w, &w)).sqrt();
            assert!(ratio <= c * (1.0 + 1e-12));
        }
    }
    assert!(drift(&upper) < 0.25, "continuity constants {upper:?}");
    let floor = lower.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(
        floor > 0.0 && drift(&lower) < 0.25,
        "Gårding constants {lower:?}"
    );
}

#[test]
fn beam_coercivity_and_continuity_settle() {
    let section = BeamSection::rectangle(100.0, 40.0, 0.2, 0.1);
    let mut lows = Vec::new();
    let mut highs = Vec::new();
    for elements in [4, 8, 16] {
        let beam = build_beam(
            2.0,
            elements,
            Vec3::zeros(),
            Vec3::new(0.0, 1.0, 1.0),
            section.clone(),
        )
        .unwrap();
        let (lo, hi) = generalized_extremes(
            &assemble_beam(&beam).unwrap(),
            &beam_norm_gram(&beam, 2.0).unwrap(),
        );
        lows.push(lo);
        highs.push(hi);
    }
    assert!(
        lows.iter().all(|l| *l > 0.0) && drift(&lows) < 0.25,
        "coercivity {lows:?}"
    );
    assert!(drift(&highs) < 0.25, "continuity {highs:?}");
}

#[test]
fn slender_beam_does_not_lock() {
    let length: f64 = 1.0;
    let depth = length / 100.0;
    let section = BeamSection::rectangle(2.0e5, 8.0e4, depth, depth);
    let dir = Vec3::new(1.0, 0.0, 0.0);
    let e2 = section_frame(&dir).column(1).into_owned();
    let p = 1e-6;
    let loads = BeamLoads {
        tip_force: (e2 * p).into(),
        ..Default::default()
    };
    let (_, tip) = cantilever(section.clone(), length, 16, dir, &loads);
    let exact =
        p * length.powi(3) / (3.0 * section.e * section.i1) + p * length / (section.g * section.a2);
    let err = (tip.tip_displacement().dot(&e2) - exact).abs() / exact;
    assert!(err < 0.01, "relative tip error {err:e}");
}

#[test]
fn constraint_block_keeps_full_rank_under_refinement() {
    for n in [1, 2, 4, 8] {
        let mesh = build_block_mesh_at(Vec3::zeros(), [1.3, 0.7, 1.0], [n, n, 1]).unwrap();
        let s = extract_interface(&mesh, "+z").unwrap();
        let b = assemble_b(&s, &DofLayout::new(mesh.num_nodes(), 1)).unwrap();
        assert_eq!(b.rank(), 6, "divisions {n}");
    }
}

#[test]
fn stiffness_is_symmetric_and_has_no_solid_beam_coupling() {
    let sys = coupled(
        2,
        3,
        Vec3::zeros(),
        SolidLoads::default(),
        BeamLoads::default(),
    );
    assert!(sys.k.symmetry_defect() <= 1e-12 * sys.k.max_abs());
    let ns = sys.layout.n_solid();
    for (i, j, v) in sys.k.iter() {
        assert!(v == 0.0 || (i < ns) == (j < ns), "cross entry ({i}, {j})");
    }
    let gq = sys.g_q;
    assert!(gq.symmetric_eigenvalues().min() > 0.0);
    assert!(
        generalized_extremes(
            &sys.g_v,
            &CsrMatrix::from_dense(&DMatrix::identity(sys.n(), sys.n()))
        )
        .0 > 0.0
    );
}
