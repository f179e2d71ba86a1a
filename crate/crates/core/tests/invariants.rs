//! Randomized invariants over structured families of two-branch interval
//! systems. Each family is built so admissibility holds by construction
//! (branch images strictly inside the box, away from the cut), which lets
//! every generated case carry an exact algebraic oracle for its limit
//! cycles: certification must find precisely those.

use proptest::prelude::*;
use pwcert_core::atoms::{initial_atoms, refine_atoms, AtomOptions};
use pwcert_core::certify::{certify, eps_star, CertifyOptions, CertifyOutcome};
use pwcert_core::geometry::{point, Metric, Point};
use pwcert_core::map::{is_epsilon_perturbation, PiecewiseMap};
use pwcert_core::orbit::{iterate_orbit, BranchPolicy};
use pwcert_core::samples::two_branch_1d;

const TOL: f64 = 1e-9;

/// Raw knobs for a two-branch system on [0, 1]: the cut, both slopes, and
/// two unit parameters placing the branch images.
#[derive(Debug, Clone, Copy)]
struct Params {
    cut: f64,
    a1: f64,
    a2: f64,
    u1: f64,
    u2: f64,
}

fn params() -> impl Strategy<Value = Params> {
    (
        0.35..0.65f64,
        0.1..0.4f64,
        0.1..0.4f64,
        0.0..1.0f64,
        0.0..1.0f64,
    )
        .prop_map(|(cut, a1, a2, u1, u2)| Params { cut, a1, a2, u1, u2 })
}

/// Both branches map into their own piece, at least 0.01 away from the cut
/// and the outer walls: exactly two attracting fixed points.
fn sink_map(p: Params) -> PiecewiseMap {
    let l1 = p.a1 * p.cut;
    let lo1 = 0.02 + p.u1 * (p.cut - 0.03 - l1 - 0.02);
    let b1 = lo1;
    let l2 = p.a2 * (1.0 - p.cut);
    let lo2 = p.cut + 0.01 + p.u2 * (0.98 - l2 - p.cut - 0.01);
    let b2 = lo2 - p.a2 * p.cut;
    two_branch_1d(p.a1, b1, p.a2, b2, p.cut).expect("sink family is admissible")
}

/// Each branch maps into the *other* piece: exactly one period-2 cycle.
fn swap_map(p: Params) -> PiecewiseMap {
    let l1 = p.a1 * p.cut;
    let lo1 = p.cut + 0.01 + p.u1 * (0.98 - l1 - p.cut - 0.01);
    let b1 = lo1;
    let l2 = p.a2 * (1.0 - p.cut);
    let lo2 = 0.02 + p.u2 * (p.cut - 0.03 - l2 - 0.02);
    let b2 = lo2 - p.a2 * p.cut;
    two_branch_1d(p.a1, b1, p.a2, b2, p.cut).expect("swap family is admissible")
}

fn certified(map: &PiecewiseMap) -> pwcert_core::Certificate {
    match certify(map, &CertifyOptions::default()).expect("certification runs") {
        CertifyOutcome::Certified(c) => *c,
        CertifyOutcome::Inconclusive(i) => panic!("family member failed to certify: {i}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sink_family_certifies_its_two_algebraic_fixed_points(p in params()) {
        let map = sink_map(p);
        prop_assert!(map.validate().is_valid());
        let cert = certified(&map);
        prop_assert_eq!(cert.k0, 1, "images avoid the cut by construction");
        prop_assert!(cert.separation >= 0.0099);
        prop_assert_eq!(cert.cycles.len(), 2);
        let l1 = p.a1 * p.cut;
        let lo1 = 0.02 + p.u1 * (p.cut - 0.03 - l1 - 0.02);
        let l2 = p.a2 * (1.0 - p.cut);
        let lo2 = p.cut + 0.01 + p.u2 * (0.98 - l2 - p.cut - 0.01);
        let fp1 = lo1 / (1.0 - p.a1);
        let fp2 = (lo2 - p.a2 * p.cut) / (1.0 - p.a2);
        let mut expect = [(1u32, fp1), (2u32, fp2)];
        expect.sort_by(|a, b| a.1.total_cmp(&b.1));
        for (cycle, (piece, fp)) in cert.cycles.iter().zip(expect) {
            prop_assert_eq!(cycle.period, 1);
            prop_assert_eq!(cycle.pieces.clone(), vec![piece]);
            prop_assert!((cycle.points[0][0] - fp).abs() <= TOL);
        }
        prop_assert!(cert.eps_persist > 0.0);
        prop_assert!(cert.eps_persist <= (1.0 - cert.lambda) / 2.0);
    }

    #[test]
    fn swap_family_certifies_its_unique_two_cycle(p in params()) {
        let map = swap_map(p);
        prop_assert!(map.validate().is_valid());
        let cert = certified(&map);
        prop_assert_eq!(cert.cycles.len(), 1);
        let cycle = &cert.cycles[0];
        prop_assert_eq!(cycle.period, 2, "no branch fixes its own piece");
        prop_assert_eq!(cycle.pieces.clone(), vec![1, 2]);
        let l1 = p.a1 * p.cut;
        let lo1 = p.cut + 0.01 + p.u1 * (0.98 - l1 - p.cut - 0.01);
        let b1 = lo1;
        let l2 = p.a2 * (1.0 - p.cut);
        let lo2 = 0.02 + p.u2 * (p.cut - 0.03 - l2 - 0.02);
        let b2 = lo2 - p.a2 * p.cut;
        // Fixed point of branch2 ∘ branch1 on the left piece, and its image.
        let x_left = (p.a2 * b1 + b2) / (1.0 - p.a1 * p.a2);
        let x_right = p.a1 * x_left + b1;
        prop_assert!((cycle.points[0][0] - x_left).abs() <= TOL);
        prop_assert!((cycle.points[1][0] - x_right).abs() <= TOL);
    }

    #[test]
    fn atoms_nest_along_suffixes_and_obey_the_diameter_law(p in params(), swap in any::<bool>()) {
        let map = if swap { swap_map(p) } else { sink_map(p) };
        let metric = map.metric().clone();
        let diam = map.ambient().diameter(&metric);
        let opts = AtomOptions::default();
        let mut prev = initial_atoms(&map, &opts).unwrap();
        for k in 1..=8usize {
            let set = if k == 1 {
                prev.clone()
            } else {
                refine_atoms(&map, &prev, &opts).unwrap()
            };
            let bound = map.lambda().powi(k as i32) * diam + 1e-12;
            prop_assert!(
                set.max_diameter(&metric).unwrap() <= bound,
                "generation {} atoms too large", k
            );
            if k > 1 {
                for atom in set.atoms() {
                    let suffix = &atom.word()[1..];
                    let parent = prev.find(suffix);
                    prop_assert!(parent.is_some(), "suffix {:?} not alive", suffix);
                    let child = atom.cover().bounding_box().unwrap();
                    let outer = parent.unwrap().cover().bounding_box().unwrap();
                    for i in 0..child.dim() {
                        prop_assert!(outer.lo()[i] - 1e-12 <= child.lo()[i]);
                        prop_assert!(child.hi()[i] <= outer.hi()[i] + 1e-12);
                    }
                }
                prev = set;
            }
        }
    }

    #[test]
    fn orbit_points_stay_inside_the_atom_of_their_word(
        p in params(),
        swap in any::<bool>(),
        start in 0.0..1.0f64,
        depth in 1..=10usize,
    ) {
        let map = if swap { swap_map(p) } else { sink_map(p) };
        let orbit = iterate_orbit(&map, &point(&[start]), depth, BranchPolicy::LowestId).unwrap();
        prop_assert_eq!(orbit.branches.len(), depth);
        let opts = AtomOptions::default();
        let mut set = initial_atoms(&map, &opts).unwrap();
        for _ in 1..depth {
            set = refine_atoms(&map, &set, &opts).unwrap();
        }
        let atom = set.find(&orbit.branches);
        prop_assert!(atom.is_some(), "word {:?} has no alive atom", orbit.branches);
        let last = orbit.last();
        prop_assert!(
            atom.unwrap().cover().contains_point_slack(last.coords(), 1e-12),
            "point {:?} escaped its enclosure", last
        );
    }

    #[test]
    fn perturbation_reports_are_symmetric(p in params(), q in params(), eps in 0.01..0.5f64) {
        let f = sink_map(p);
        let g = sink_map(q);
        let fg = is_epsilon_perturbation(&f, &g, eps, 8).unwrap();
        let gf = is_epsilon_perturbation(&g, &f, eps, 8).unwrap();
        prop_assert_eq!(fg, gf);
    }

    #[test]
    fn admissible_drift_bound_grows_with_epsilon(
        lambda in 0.05..0.9f64,
        e1 in 0.001..0.04f64,
        grow in 1.01..2.0f64,
    ) {
        let e2 = e1 * grow;
        prop_assume!(lambda + e2 < 1.0);
        let d1 = eps_star(e1, lambda).unwrap();
        let d2 = eps_star(e2, lambda).unwrap();
        prop_assert!(d1 > 2.0 * e1, "bound must dominate the raw perturbation");
        prop_assert!(d2 > d1);
    }

    #[test]
    fn metric_axioms_hold(
        px in -100.0..100.0f64, py in -100.0..100.0f64,
        qx in -100.0..100.0f64, qy in -100.0..100.0f64,
        rx in -100.0..100.0f64, ry in -100.0..100.0f64,
        w1 in 0.1..10.0f64, w2 in 0.1..10.0f64,
    ) {
        let (p, q, r) = (point(&[px, py]), point(&[qx, qy]), point(&[rx, ry]));
        for metric in [Metric::Linf, Metric::weighted_linf(vec![w1, w2]).unwrap()] {
            let d = |a: &Point, b: &Point| metric.distance(a, b).unwrap();
            prop_assert_eq!(d(&p, &p), 0.0);
            prop_assert_eq!(d(&p, &q), d(&q, &p));
            let slack = 1e-9 * (1.0 + d(&p, &q) + d(&q, &r));
            prop_assert!(d(&p, &r) <= d(&p, &q) + d(&q, &r) + slack);
            if d(&p, &q) > 0.0 {
                prop_assert!(p.coords() != q.coords());
            }
        }
    }
}
