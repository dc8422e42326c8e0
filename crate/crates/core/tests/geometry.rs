use num_complex::Complex64;
use polyscat::geometry::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn unit_square() -> Polygon {
    Polygon::square(Point2::default(), 1.0).unwrap()
}

fn square_params() -> AdmissibleParams {
    AdmissibleParams::new(0.5, 2.0, PI / 4.0, 3.0 * PI / 4.0, 2.0, 0.1, 0.1, PI / 3.0).unwrap()
}

/// Brute-force Hausdorff distance from dense boundary samples of both polygons
/// (distance to a convex set is convex, so boundary samples reach the supremum).
fn brute_hausdorff(a: &Polygon, b: &Polygon, per_edge: usize) -> f64 {
    fn samples(p: &Polygon, per_edge: usize) -> Vec<Point2> {
        let mut pts = Vec::new();
        for i in 0..p.len() {
            let (u, v) = p.edge(i);
            for j in 0..per_edge {
                pts.push(u + (v - u) * (j as f64 / per_edge as f64));
            }
        }
        pts
    }
    fn inside(p: &Polygon, x: Point2) -> bool {
        (0..p.len()).all(|i| {
            let (u, v) = p.edge(i);
            (v - u).cross(x - u) >= 0.0
        })
    }
    let directed = |a: &Polygon, b: &Polygon| {
        let bs = samples(b, per_edge);
        samples(a, per_edge)
            .into_iter()
            .map(|x| {
                if inside(b, x) {
                    0.0
                } else {
                    bs.iter().map(|y| x.dist(*y)).fold(f64::INFINITY, f64::min)
                }
            })
            .fold(0.0, f64::max)
    };
    directed(a, b).max(directed(b, a))
}

#[test]
fn unit_square_is_admissible() {
    let report = validate_admissible(&unit_square(), &square_params()).unwrap();
    assert!(report.passed(), "{report:?}");
    for item in 1..=7u8 {
        assert_eq!(report.status(item), Some(CheckStatus::Pass), "item {item}");
    }
    assert!(report.items.iter().any(|c| c.status == CheckStatus::Untested));
}

#[test]
fn sharp_triangle_fails_angle_bracket() {
    let tri = Polygon::new(vec![
        Point2::new(0.0, 0.0),
        Point2::new(1.0, 0.0),
        Point2::from_polar(1.0, 0.01),
    ])
    .unwrap();
    let params = AdmissibleParams::new(0.001, 2.0, PI / 6.0, 3.0 * PI / 4.0, 2.0, 0.1, 0.005, PI / 3.0).unwrap();
    let report = validate_admissible(&tri, &params).unwrap();
    assert_eq!(report.status(4), Some(CheckStatus::Fail));
}

#[test]
fn large_square_fails_containment() {
    let sq = Polygon::square(Point2::default(), 10.0).unwrap();
    let params = AdmissibleParams::new(0.5, 20.0, PI / 4.0, 3.0 * PI / 4.0, 2.0, 0.5, 0.1, PI / 3.0).unwrap();
    let report = validate_admissible(&sq, &params).unwrap();
    assert_eq!(report.status(1), Some(CheckStatus::Fail));
}

#[test]
fn hausdorff_of_translated_square() {
    let sq = unit_square();
    let moved = sq.translated(Point2::new(0.125, 0.0)).unwrap();
    let oracle = brute_hausdorff(&sq, &moved, 800);
    assert!((oracle - 0.125).abs() < 2e-3, "oracle {oracle}");
    assert!((hausdorff_distance(&sq, &moved) - 0.125).abs() < 1e-15);
}

#[test]
fn hausdorff_of_scaled_square() {
    let sq = unit_square();
    let big = sq.scaled_about(Point2::default(), 1.2).unwrap();
    let oracle = brute_hausdorff(&sq, &big, 800);
    let expected = 0.1 * 2f64.sqrt();
    assert!((oracle - expected).abs() < 2e-3, "oracle {oracle}");
    assert!((hausdorff_distance(&sq, &big) - expected).abs() < 1e-15);
}

#[test]
fn equilateral_corner_and_round_trip() {
    let tri = Polygon::regular(3, Point2::new(0.3, -0.2), 1.0, 0.4).unwrap();
    let f = corner_frame(&tri, 1, 0.2).unwrap();
    assert!((f.theta0 - PI / 3.0).abs() < 1e-14);
    for v in tri.vertices() {
        let back = f.to_global(f.to_local(*v));
        assert!(back.dist(*v) < 1e-14);
    }
    // incident edges land on the sector rays
    let next = f.to_local(tri.vertex(2));
    let prev = f.to_local(tri.vertex(0));
    assert!(next.y.abs() < 1e-14 && next.x > 0.0);
    assert!((prev.angle() - f.theta0).abs() < 1e-14);
}

#[test]
fn square_corner_normals() {
    let f = corner_frame(&unit_square(), 2, 0.1).unwrap();
    let n1 = f.normal_plus();
    let n2 = f.normal_minus();
    assert!((n1.x + 1.0).abs() < 1e-15 && n1.y.abs() < 1e-15);
    assert_eq!(n2, Point2::new(0.0, -1.0));
    // the exterior normals map onto outward normals of the two polygon edges
    let sq = unit_square();
    let g_minus = f.vec_to_global(n2);
    let g_plus = f.vec_to_global(n1);
    assert!(g_minus.dist(sq.edge_normal(f.edge_minus(4))) < 1e-15);
    assert!(g_plus.dist(sq.edge_normal(f.edge_plus(4))) < 1e-15);
}

#[test]
fn eroded_exterior_single_square_connected() {
    let grid = eroded_exterior(&[unit_square()], 0.05, Rect::centered_square(2.0), 0.05 / 8.0).unwrap();
    assert!(!grid.is_empty());
    assert!(grid.is_connected());
}

#[test]
fn eroded_exterior_empty_when_erosion_exceeds_margin() {
    let big = Polygon::square(Point2::default(), 3.6).unwrap();
    let grid = eroded_exterior(&[big], 0.25, Rect::centered_square(2.0), 0.05).unwrap();
    assert!(grid.is_empty());
}

#[test]
fn eroded_exterior_two_squares_connected() {
    let a = Polygon::square(Point2::new(-1.0, 0.0), 0.8).unwrap();
    let b = Polygon::square(Point2::new(1.0, 0.0), 0.8).unwrap();
    let grid = eroded_exterior(&[a, b], 0.05, Rect::centered_square(2.5), 0.01).unwrap();
    assert!(grid.is_connected());
}

#[test]
fn eroded_exterior_splits_across_a_wall() {
    // a slab spanning the box from bottom to top separates left from right
    let wall = Polygon::new(vec![
        Point2::new(-0.1, -1.0),
        Point2::new(0.1, -1.0),
        Point2::new(0.1, 1.0),
        Point2::new(-0.1, 1.0),
    ])
    .unwrap();
    let bbox = Rect::new(Point2::new(-1.0, -1.0), Point2::new(1.0, 1.0)).unwrap();
    let grid = eroded_exterior(&[wall], 0.1, bbox, 0.02).unwrap();
    assert!(!grid.is_empty());
    assert_eq!(grid.components().1, 2);
}

#[test]
fn polygon_file_round_trip_is_bit_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let poly = random_convex_polygon(&mut rng, 6, Point2::new(0.1, -0.3), 0.9);
    let imp = ImpedanceParam::sampled(
        (0..6).map(|e| vec![Complex64::new(1.0 + e as f64 / 3.0, 0.1), Complex64::new(0.7, 1.0 / 3.0)]).collect(),
        3.0,
        40.0,
        1.0,
    )
    .unwrap();
    let file = PolygonFile { polygon: poly, impedance: Some(imp) };
    let text = file.to_text();
    let back = PolygonFile::parse(&text).unwrap();
    assert_eq!(back, file);
    assert_eq!(back.to_text(), text);
    let constant = PolygonFile { polygon: unit_square(), impedance: Some(ImpedanceParam::constant(Complex64::new(1.0, 0.5))) };
    assert_eq!(PolygonFile::parse(&constant.to_text()).unwrap(), constant);
}

#[test]
fn polygon_file_rejects_unknown_keys() {
    let text = "vertices = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]\ncolour = 3\n";
    assert!(matches!(PolygonFile::parse(text), Err(GeometryError::Parse(_))));
}

#[test]
fn impedance_admissibility() {
    let sq = unit_square();
    assert!(ImpedanceParam::constant(Complex64::new(1.0, 0.0)).validate(&sq).passed());
    assert!(!ImpedanceParam::constant(Complex64::new(-1.0, 0.0)).validate(&sq).passed());
    let steep = ImpedanceParam::sampled(vec![vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]; 4], 1.0, 0.5, 1.0).unwrap();
    // the jump from 1 back to 0 at every vertex breaks continuity
    assert!(!steep.validate(&sq).passed());
}

fn poly_strategy() -> impl Strategy<Value = Polygon> {
    (any::<u64>(), 3usize..8, -0.5f64..0.5, -0.5f64..0.5, 0.3f64..1.2).prop_map(|(seed, n, cx, cy, r)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        random_convex_polygon(&mut rng, n, Point2::new(cx, cy), r)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hausdorff_is_a_metric(a in poly_strategy(), b in poly_strategy(), c in poly_strategy()) {
        let ab = hausdorff_distance(&a, &b);
        prop_assert!(ab >= 0.0);
        prop_assert_eq!(ab, hausdorff_distance(&b, &a));
        prop_assert!(ab <= hausdorff_distance(&a, &c) + hausdorff_distance(&c, &b) + 1e-12);
        prop_assert_eq!(hausdorff_distance(&a, &a), 0.0);
    }

    #[test]
    fn hausdorff_of_translation_is_shift_length(a in poly_strategy(), vx in -0.3f64..0.3, vy in -0.3f64..0.3) {
        let v = Point2::new(vx, vy);
        let moved = a.translated(v).unwrap();
        prop_assert!((hausdorff_distance(&a, &moved) - v.norm()).abs() < 1e-12);
    }

    #[test]
    fn corner_frame_is_an_isometry(a in poly_strategy(), idx in 0usize..8, s in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0), 6)) {
        let i = idx % a.len();
        let h = 0.5 * a.edge_length(i).min(a.edge_length(i + a.len() - 1));
        let f = corner_frame(&a, i, h).unwrap();
        let per = a.perimeter();
        let pts: Vec<Point2> = s.iter().map(|&(u, _)| a.point_at_arclength(u * per).2).collect();
        for p in &pts {
            for q in &pts {
                let d0 = p.dist(*q);
                let d1 = f.to_local(*p).dist(f.to_local(*q));
                prop_assert!((d0 - d1).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn widening_brackets_never_breaks_a_pass(a in poly_strategy(), widen in 0.0f64..0.4) {
        let lengths = a.edge_lengths();
        let angles = a.interior_angles();
        let lmin = lengths.iter().cloned().fold(f64::INFINITY, f64::min);
        let lmax = lengths.iter().cloned().fold(0.0, f64::max);
        let amin = angles.iter().cloned().fold(f64::INFINITY, f64::min);
        let amax = angles.iter().cloned().fold(0.0, f64::max);
        let tight = AdmissibleParams::new(lmin, lmax, amin, amax, 2.0, 0.2, 0.05, PI / 6.0).unwrap();
        let wide = AdmissibleParams::new(lmin * (1.0 - widen), lmax * (1.0 + widen), amin * (1.0 - widen), (amax * (1.0 + widen)).min(2.0 * PI - 1e-3), 2.0, 0.2, 0.05, PI / 6.0).unwrap();
        let r_tight = validate_admissible(&a, &tight).unwrap();
        let r_wide = validate_admissible(&a, &wide).unwrap();
        for item in [3u8, 4] {
            if r_tight.status(item) == Some(CheckStatus::Pass) {
                prop_assert_eq!(r_wide.status(item), Some(CheckStatus::Pass));
            }
        }
    }
}
