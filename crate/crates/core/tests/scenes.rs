//! Segmentation, classification, anchors and initialization on rendered
//! scenes with known geometry.

use std::f64::consts::PI;

use keytrace_core::anchors::{build_mst, detect_1d_anchors, detect_2d_anchors, rasterize_mask, skeletonize, AnchorParams};
use keytrace_core::camera::lift_depth_masked;
use keytrace_core::classify::{classify_report, classify_with_seeds, ClassifyParams};
use keytrace_core::init::{build_1d_topology, init_grid_2d, initialize, warm_start_1d, InitParams};
use keytrace_core::metrics::edge_rmse;
use keytrace_core::segmentation::{segment_frame, SegmentationParams, SegmentedFrame};
use keytrace_core::synth::{default_camera, gen_sequence, Motion, SynthConfig, SynthSequence};
use keytrace_core::{
    lift_depth, project_point, AnchorRole, AnchorSlot, BinaryMask, DepthFrame, Mat3, NnIndex, ObjectClass, Pixel,
    Point3, PointCloud, Rigid,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn still(base: SynthConfig) -> SynthConfig {
    SynthConfig { motion: Motion::Static, frames: 2, ..base }
}

fn render(cfg: &SynthConfig) -> SynthSequence {
    gen_sequence(cfg, &default_camera()).unwrap()
}

fn segment(seq: &SynthSequence, t: usize) -> SegmentedFrame {
    segment_frame(&seq.frames[t], &seq.reference, &seq.camera, &seq.exclusions[t], &SegmentationParams::default(), t)
        .unwrap()
}

fn straight_rope() -> SynthConfig {
    still(SynthConfig { bend: 0.0, lift: 0.0, curl: 0.0, yaw: 0.0, noise_sigma: 0.0, ..SynthConfig::rope() })
}

fn bits(p: Point3) -> [u64; 3] {
    p.to_array().map(f64::to_bits)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn lifted_pixels_project_back_to_their_centers(seed in any::<u64>()) {
        let cam = default_camera();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let depth: Vec<f32> = (0..cam.pixel_count())
            .map(|_| if rng.random_bool(0.2) { rng.random_range(0.3f32..3.0) } else { 0.0 })
            .collect();
        let frame = DepthFrame::new(cam.width, cam.height, depth, 0.0).unwrap();
        let cloud = lift_depth(&frame, &cam).unwrap();
        prop_assert_eq!(cloud.len(), frame.valid_count());
        for (p, px) in cloud.points.iter().zip(cloud.pixel_index.as_ref().unwrap()) {
            let (u, v) = project_point(*p, &cam).unwrap();
            prop_assert!((u - px.col as f64).abs() < 0.5 && (v - px.row as f64).abs() < 0.5);
        }
    }
}

#[test]
fn noiseless_scene_cloud_is_the_rope_and_nothing_else() {
    let seq = render(&still(SynthConfig { noise_sigma: 0.0, ..SynthConfig::rope() }));
    let seg = segment(&seq, 1);
    let truth = NnIndex::build(&seq.truth.object_points[1]).unwrap();
    assert!(!seq.truth.arm_points[1].is_empty());
    for p in &seg.cloud.points {
        assert!(truth.nearest(*p).distance < 1e-5, "{p:?} is not on the rope");
    }
    let ours = NnIndex::build(&seg.cloud.points).unwrap();
    let covered = seq.truth.object_points[1].iter().filter(|q| ours.nearest(**q).distance < 1e-5).count();
    assert!(covered as f64 >= 0.95 * seq.truth.object_points[1].len() as f64);
}

#[test]
fn segmented_points_are_lifted_pixels_of_the_current_frame() {
    for base in [SynthConfig::rope(), SynthConfig::bdlo(), SynthConfig::cloth()] {
        let seq = render(&SynthConfig { frames: 4, ..base });
        for t in 0..4 {
            let all = lift_depth_masked(&seq.frames[t], &seq.camera, None, 1).unwrap();
            let members: std::collections::HashSet<[u64; 3]> = all.points.iter().map(|p| bits(*p)).collect();
            let seg = segment(&seq, t);
            assert!(seg.cloud.points.iter().all(|p| members.contains(&bits(*p))));
        }
    }
}

fn tube_around(curve: impl Fn(f64) -> Point3, n: usize, radius: f64, rng: &mut ChaCha8Rng) -> Vec<Point3> {
    (0..n)
        .map(|_| {
            let s: f64 = rng.random();
            let c = curve(s);
            let jitter = Point3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            c + jitter * radius
        })
        .collect()
}

fn helix(rng: &mut ChaCha8Rng) -> PointCloud {
    let curve = |s: f64| {
        let a = s * 4.0 * PI;
        Point3::new(0.1 * a.cos(), 0.1 * a.sin(), 0.3 * s)
    };
    PointCloud::new(tube_around(curve, 6000, 0.002, rng))
}

fn flat_sheet(rng: &mut ChaCha8Rng, side: f64, n: usize) -> PointCloud {
    PointCloud::new((0..n).map(|_| Point3::new(rng.random_range(0.0..side), rng.random_range(0.0..side), 0.0)).collect())
}

#[test]
fn helix_is_curve_like_and_sheet_is_surface_like() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let params = ClassifyParams::default();
    assert_eq!(classify_report(&helix(&mut rng), &params).unwrap().class, ObjectClass::OneDim);
    assert_eq!(classify_report(&flat_sheet(&mut rng, 0.3, 6000), &params).unwrap().class, ObjectClass::TwoDim);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn classification_ignores_rigid_motion_and_duplicates(seed in any::<u64>(), angle in -PI..PI, axis in (-1.0f64..1.0, -1.0f64..1.0, 0.1f64..1.0), shift in (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cloud = if seed % 2 == 0 { helix(&mut rng) } else { flat_sheet(&mut rng, 0.2, 3000) };
        let params = ClassifyParams::default();
        let seeds: Vec<Point3> = (0..32).map(|_| cloud.points[rng.random_range(0..cloud.len())]).collect();
        let base = classify_with_seeds(&cloud, &seeds, &params).unwrap();

        let axis = Point3::new(axis.0, axis.1, axis.2);
        let t = Rigid::new(Mat3::from_axis_angle(axis.normalized().unwrap(), angle), Point3::new(shift.0, shift.1, shift.2));
        let moved = PointCloud::new(cloud.points.iter().map(|p| t.apply(*p)).collect());
        let moved_seeds: Vec<Point3> = seeds.iter().map(|p| t.apply(*p)).collect();
        let r = classify_with_seeds(&moved, &moved_seeds, &params).unwrap();
        prop_assert_eq!(r.class, base.class);
        prop_assert!((r.median_ratio21 - base.median_ratio21).abs() < 1e-9);
        prop_assert!((r.median_ratio32 - base.median_ratio32).abs() < 1e-9);

        let mut doubled = cloud.points.clone();
        doubled.extend_from_slice(&cloud.points);
        let d = classify_with_seeds(&PointCloud::new(doubled), &seeds, &params).unwrap();
        prop_assert_eq!(d.class, base.class);
        prop_assert!((d.median_ratio21 - base.median_ratio21).abs() < 1e-9);
    }
}

#[test]
fn projected_rope_mask_is_one_piece() {
    for base in [SynthConfig::rope(), SynthConfig::bdlo()] {
        let seq = render(&still(base));
        let seg = segment(&seq, 1);
        let mask = rasterize_mask(&seg.cloud, &seq.camera, AnchorParams::default().dilation_px).unwrap();
        assert_eq!(mask.components().1.len(), 1);
    }
}

#[test]
fn plus_sign_thins_to_one_four_way_center() {
    let mut m = BinaryMask::new(15, 15);
    for i in 1..14 {
        for w in 6..9 {
            m.set(Pixel::new(i, w), true);
            m.set(Pixel::new(w, i), true);
        }
    }
    let s = skeletonize(&m);
    let graph = build_mst(&s.pixels());
    let fours: Vec<Pixel> = (0..graph.nodes.len()).filter(|&i| graph.degree[i] == 4).map(|i| graph.nodes[i]).collect();
    assert_eq!(fours, vec![Pixel::new(7, 7)]);
    assert!(graph.degree.iter().all(|&d| d <= 2 || d == 4));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn thinning_is_idempotent_and_shrinks(data in prop::collection::vec(prop::bool::weighted(0.6), 24 * 20)) {
        let m = BinaryMask::from_data(24, 20, data);
        let s = skeletonize(&m);
        prop_assert_eq!(skeletonize(&s), s.clone());
        prop_assert!(s.pixels().iter().all(|p| m.get(*p)));
    }
}

fn rope_ends(seq: &SynthSequence) -> [Point3; 2] {
    let k = &seq.truth.keypoints[1].positions;
    [k[0], *k.last().unwrap()]
}

#[test]
fn straight_rope_anchors_are_its_two_ends() {
    let seq = render(&straight_rope());
    let seg = segment(&seq, 1);
    let det = detect_1d_anchors(&seg.cloud, &seq.camera, &AnchorParams::default()).unwrap();
    assert_eq!(det.count(AnchorRole::Leaf), 2);
    assert_eq!(det.count(AnchorRole::Junction), 0);
    for end in rope_ends(&seq) {
        let d = det.positions.iter().map(|p| p.distance(end)).fold(f64::INFINITY, f64::min);
        assert!(d < 0.010, "end missed by {d}");
    }
}

#[test]
fn u_shaped_rope_has_two_leaves() {
    let seq = render(&still(SynthConfig { bend: 0.0, lift: 0.0, curl: PI / 2.0, noise_sigma: 0.0, ..SynthConfig::rope() }));
    let seg = segment(&seq, 1);
    let det = detect_1d_anchors(&seg.cloud, &seq.camera, &AnchorParams::default()).unwrap();
    assert_eq!(det.count(AnchorRole::Leaf), 2);
    assert_eq!(det.count(AnchorRole::Junction), 0);
}

fn cloth_corners(seq: &SynthSequence) -> Vec<Point3> {
    let (rows, cols) = seq.config.grid_shape;
    let k = &seq.truth.keypoints[1].positions;
    vec![k[0], k[cols - 1], k[(rows - 1) * cols], k[rows * cols - 1]]
}

fn nearest_dist(set: &[Point3], q: Point3) -> f64 {
    set.iter().map(|p| p.distance(q)).fold(f64::INFINITY, f64::min)
}

#[test]
fn square_sheet_contour_anchors_find_corners_then_sides() {
    let seq = render(&still(SynthConfig { noise_sigma: 0.0, ..SynthConfig::cloth() }));
    let seg = segment(&seq, 1);
    let corners = cloth_corners(&seq);
    let four = detect_2d_anchors(&seg.cloud, &seq.camera, &AnchorParams::default()).unwrap();
    assert_eq!(four.len(), 4);
    for c in &corners {
        assert!(nearest_dist(&four.positions, *c) < 0.015);
    }
    let eight = detect_2d_anchors(&seg.cloud, &seq.camera, &AnchorParams { num_contour_anchors: 8, ..Default::default() })
        .unwrap();
    assert_eq!(eight.len(), 8);
    for c in &corners {
        assert!(nearest_dist(&eight.positions, *c) < 0.015);
    }
    // The other four sit on the sides, one per side.
    let mids: Vec<Point3> = [(0, 1), (0, 2), (1, 3), (2, 3)].iter().map(|&(a, b)| corners[a].lerp(corners[b], 0.5)).collect();
    let extra: Vec<Point3> = eight.positions.iter().copied().filter(|p| nearest_dist(&corners, *p) >= 0.015).collect();
    assert_eq!(extra.len(), 4);
    for m in &mids {
        assert!(nearest_dist(&extra, *m) < 0.3 / 2.0 * 0.75);
    }
}

#[test]
fn sheet_anchors_rotate_with_the_sheet() {
    let base = still(SynthConfig { noise_sigma: 0.0, ..SynthConfig::cloth() });
    let a = render(&base);
    for theta in [0.4, 1.1, -0.7] {
        let b = render(&SynthConfig { yaw: base.yaw + theta, ..base.clone() });
        let da = detect_2d_anchors(&segment(&a, 1).cloud, &a.camera, &AnchorParams::default()).unwrap();
        let db = detect_2d_anchors(&segment(&b, 1).cloud, &b.camera, &AnchorParams::default()).unwrap();
        // Rotation about the vertical axis through the sheet center.
        let center = a.truth.keypoints[1].positions.iter().fold(Point3::ORIGIN, |s, p| s + *p)
            * (1.0 / a.truth.keypoints[1].len() as f64);
        let rot = Mat3::rotation_z(theta);
        for p in &da.positions {
            let q = rot.apply(*p - center) + center;
            assert!(nearest_dist(&db.positions, q) < 0.015, "theta {theta}: {q:?}");
        }
    }
}

#[test]
fn anchors_lie_on_the_cloud() {
    let params = InitParams::default();
    for base in [SynthConfig::rope(), SynthConfig::bdlo(), SynthConfig::cloth()] {
        let seq = render(&SynthConfig { frames: 3, ..base });
        for t in 0..3 {
            let seg = segment(&seq, t);
            let det = match seq.config.object_class() {
                ObjectClass::OneDim => detect_1d_anchors(&seg.cloud, &seq.camera, &params.anchors),
                ObjectClass::TwoDim => detect_2d_anchors(&seg.cloud, &seq.camera, &params.anchors),
            }
            .unwrap();
            let index = NnIndex::build(&seg.cloud.points).unwrap();
            assert!(det.positions.iter().all(|p| index.nearest(*p).distance <= 0.010));
        }
    }
}

#[test]
fn warm_start_spreads_points_along_the_rope() {
    let seq = render(&straight_rope());
    let seg = segment(&seq, 1);
    let x = warm_start_1d(&seg.cloud, &rope_ends(&seq), 5).unwrap();
    let length = seq.config.size;
    for i in 0..5 {
        for j in i + 1..5 {
            assert!(x[i].distance(x[j]) >= length / 8.0);
        }
    }
}

/// Branch lists that form a tree: the first branch is a fresh path, each
/// later one starts at an existing keypoint and continues through new ones.
fn random_tree() -> impl Strategy<Value = (Vec<Vec<usize>>, usize)> {
    prop::collection::vec((any::<prop::sample::Index>(), 1usize..6), 1..6).prop_map(|spec| {
        let mut next = 0;
        let mut branches = Vec::new();
        for (k, (start, len)) in spec.into_iter().enumerate() {
            let mut b = Vec::new();
            if k > 0 {
                b.push(start.index(next));
            }
            for _ in 0..len + usize::from(k == 0) {
                b.push(next);
                next += 1;
            }
            branches.push(b);
        }
        (branches, next)
    })
}

proptest! {
    #[test]
    fn branch_lists_give_connected_trees((branches, n) in random_tree()) {
        let t = build_1d_topology(&branches, n, vec![AnchorSlot { index: 0, role: AnchorRole::Leaf }]).unwrap();
        prop_assert_eq!(t.edges.len(), n - 1);
        prop_assert_eq!(t.connected_components(), 1);
    }
}

#[test]
fn y_branches_give_thirteen_nodes_and_twelve_edges() {
    let branches = vec![vec![0, 3, 4, 5, 6, 1], vec![0, 7, 8, 9, 10, 2], vec![0, 11, 12]];
    let t = build_1d_topology(&branches, 13, vec![]).unwrap();
    assert_eq!(t.edges.len(), 12);
    assert_eq!(t.degrees()[0], 3);
    assert_eq!(t.degrees().iter().filter(|&&d| d == 1).count(), 3);
}

fn corner_detection(corners: [Point3; 4]) -> keytrace_core::anchors::AnchorDetection {
    keytrace_core::anchors::AnchorDetection {
        positions: corners.to_vec(),
        roles: vec![AnchorRole::Contour; 4],
        ..Default::default()
    }
}

/// Index maps of the eight symmetries of a square grid.
fn square_symmetries(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for flip in [false, true] {
        for turns in 0..4 {
            out.push(
                (0..n * n)
                    .map(|i| {
                        let (mut r, mut c) = (i / n, i % n);
                        if flip {
                            std::mem::swap(&mut r, &mut c);
                        }
                        for _ in 0..turns {
                            (r, c) = (c, n - 1 - r);
                        }
                        r * n + c
                    })
                    .collect(),
            );
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn grid_init_commutes_with_rigid_motion(angle in -PI..PI, tilt in -0.5f64..0.5, shift in (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0), jitter in prop::collection::vec(-0.02f64..0.02, 12)) {
        let s = 0.3;
        let base = [Point3::new(0.0, 0.0, 0.0), Point3::new(s, 0.0, 0.0), Point3::new(0.0, s, 0.0), Point3::new(s, s, 0.0)];
        let corners: [Point3; 4] = core::array::from_fn(|k| base[k] + Point3::new(jitter[3 * k], jitter[3 * k + 1], jitter[3 * k + 2]));
        let (x, topo) = init_grid_2d(&corner_detection(corners), (6, 6)).unwrap();

        let shift = Point3::new(shift.0, shift.1, shift.2);
        let translate = Rigid::new(Mat3::IDENTITY, shift);
        let (xt, _) = init_grid_2d(&corner_detection(corners.map(|p| translate.apply(p))), (6, 6)).unwrap();
        for (a, b) in x.positions.iter().zip(&xt.positions) {
            prop_assert!(translate.apply(*a).distance(*b) < 1e-9);
        }

        // A rotation may change which corner is canonical, so indices agree
        // up to a symmetry of the square grid.
        let rot = Rigid::new(Mat3::rotation_z(angle).mul_mat(&Mat3::rotation_x(tilt)), shift);
        let (xr, topo_r) = init_grid_2d(&corner_detection(corners.map(|p| rot.apply(p))), (6, 6)).unwrap();
        prop_assert!(topo.same_graph(&topo_r));
        let fits = square_symmetries(6).into_iter().any(|m| {
            (0..36).all(|i| rot.apply(x.positions[i]).distance(xr.positions[m[i]]) < 1e-9)
        });
        prop_assert!(fits);
    }
}

#[test]
fn rope_initialization_is_even_and_exact() {
    for base in [SynthConfig::rope(), SynthConfig::bdlo()] {
        let seq = render(&SynthConfig { frames: 2, ..base });
        let seg = segment(&seq, 0);
        let init = initialize(&seg, &seq.camera, &InitParams::default()).unwrap();
        assert_eq!(init.class, ObjectClass::OneDim);
        assert!(edge_rmse(&init.keypoints.positions, &init.topology) < 5.0);
        let members: std::collections::HashSet<[u64; 3]> = seg.cloud.points.iter().map(|p| bits(*p)).collect();
        let anchor_ids = init.topology.anchor_indices();
        for (slot, p) in init.topology.anchors.iter().zip(&init.anchor_positions) {
            assert_eq!(init.keypoints.positions[slot.index], *p);
        }
        for (i, p) in init.keypoints.positions.iter().enumerate() {
            if !anchor_ids.contains(&i) {
                assert!(members.contains(&bits(*p)), "keypoint {i} is off the cloud");
            }
        }
    }
}

#[test]
fn cloth_grid_lands_on_the_true_grid() {
    let seq = render(&still(SynthConfig::cloth()));
    let seg = segment(&seq, 0);
    let init = initialize(&seg, &seq.camera, &InitParams::default()).unwrap();
    assert_eq!(init.class, ObjectClass::TwoDim);
    let truth = &seq.truth.keypoints[0].positions;
    let worst = square_symmetries(8)
        .into_iter()
        .map(|m| (0..64).map(|i| init.keypoints.positions[i].distance(truth[m[i]])).fold(0.0, f64::max))
        .fold(f64::INFINITY, f64::min);
    assert!(worst < 0.010, "worst keypoint {worst}");
}
