//! The release gate: eight end-to-end checks, one per shipping requirement,
//! each asserting exact frozen values or stated tolerances. A build that
//! fails any of these must not ship.
//!
//! Frozen constants were computed independently (exact rational arithmetic
//! and a separate float model) before the library existed; they are not
//! regression snapshots of the code under test.

use pwcert_core::atoms::{initial_atoms, refine_atoms, AtomOptions};
use pwcert_core::certify::{
    certify, eps_star, match_cycles, CertifyOptions, CertifyOutcome, InconclusiveReason,
};
use pwcert_core::genericity::repair;
use pwcert_core::geometry::{point, Point};
use pwcert_core::io::certificate_report;
use pwcert_core::map::{is_epsilon_perturbation, PiecewiseMap};
use pwcert_core::orbit::{iterate_orbit, BranchPolicy};
use pwcert_core::partition::PieceId;
use pwcert_core::samples;
use pwcert_core::Certificate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

/// Tolerance for values the design pins down exactly (up to f64 rounding).
const EXACT: f64 = 1e-12;
/// Tolerance for reported cycle points.
const CYCLE_TOL: f64 = 1e-9;

fn certified(map: &PiecewiseMap) -> Certificate {
    match certify(map, &CertifyOptions::default()).expect("certification runs") {
        CertifyOutcome::Certified(c) => *c,
        CertifyOutcome::Inconclusive(i) => panic!("expected a certificate, got: {i}"),
    }
}

fn sorted_periods(cert: &Certificate) -> Vec<usize> {
    let mut p: Vec<usize> = cert.cycles.iter().map(|c| c.period).collect();
    p.sort_unstable();
    p
}

fn is_rotation(word: &[PieceId], cycle: &[PieceId]) -> bool {
    word.len() == cycle.len()
        && (0..cycle.len())
            .any(|r| (0..word.len()).all(|i| word[i] == cycle[(i + r) % cycle.len()]))
}

#[test]
fn acceptance_1_double_sink_certifies_both_fixed_points_quickly() {
    let map = samples::double_sink();
    let clock = Instant::now();
    let cert = certified(&map);
    let elapsed = clock.elapsed();

    assert_eq!(cert.k0, 1);
    assert!((cert.separation - 0.15).abs() <= EXACT);
    assert_eq!(cert.separation, 0.15000000000000002);
    assert_eq!(cert.cycles.len(), 2);
    for (cycle, fp) in cert.cycles.iter().zip([0.2, 0.8]) {
        assert_eq!(cycle.period, 1);
        assert!(
            (cycle.points[0][0] - fp).abs() <= CYCLE_TOL,
            "fixed point {} off target {fp}",
            cycle.points[0][0]
        );
    }
    assert!(
        elapsed.as_secs_f64() < 1.0,
        "certification took {elapsed:?}, budget is 1 s"
    );
    println!("acceptance 1/8 (two attracting fixed points, exact gap 0.15, < 1 s): PASS");
}

#[test]
fn acceptance_2_swap_cycle_certifies_one_least_period_two_cycle() {
    let cert = certified(&samples::swap_cycle());

    assert_eq!(cert.k0, 2);
    assert!((cert.separation - 0.075).abs() <= EXACT);
    assert_eq!(cert.separation, 0.07500000000000001);
    assert_eq!(cert.cycles.len(), 1);
    let cycle = &cert.cycles[0];
    assert_eq!(cycle.period, 2, "period 1 must be rejected as non-minimal");
    assert_eq!(cycle.pieces, vec![1, 2]);
    assert!((cycle.points[0][0] - 0.4).abs() <= CYCLE_TOL);
    assert!((cycle.points[1][0] - 0.8).abs() <= CYCLE_TOL);
    assert!(
        (cycle.points[0][0] - cycle.points[1][0]).abs() > 0.1,
        "the two phases are genuinely distinct points"
    );
    println!("acceptance 2/8 (unique period-2 cycle {{0.4, 0.8}}, exact gap 0.075): PASS");
}

#[test]
fn acceptance_3_grazing_map_is_inconclusive_at_every_depth_and_repairable() {
    let map = samples::boundary_graze();
    for k_max in 1..=64usize {
        let opts = CertifyOptions {
            k_max,
            ..CertifyOptions::default()
        };
        let inc = match certify(&map, &opts).expect("certification runs") {
            CertifyOutcome::Inconclusive(i) => i,
            CertifyOutcome::Certified(_) => {
                panic!("grazing fixture must not certify at k_max {k_max}")
            }
        };
        assert_eq!(inc.reason, InconclusiveReason::NoSeparation);
        assert_eq!(
            inc.separation, 0.0,
            "smallest distance seen must be exactly zero at k_max {k_max}"
        );
    }

    let rep = repair(&map, 0.04, &CertifyOptions::default()).expect("repair succeeds");
    assert!(rep.moved);
    let report =
        is_epsilon_perturbation(&map, &rep.map, 0.04, 8).expect("comparable systems");
    assert!(
        report.verdict,
        "repaired map must stay a 0.04-perturbation: {report:?}"
    );
    let cert = certified(&rep.map);
    assert_eq!(cert.cycles.len(), 1, "exactly one limit cycle after repair");
    assert_eq!(cert.cycles[0].period, 1);
    assert!((cert.cycles[0].points[0][0] - 0.6).abs() <= CYCLE_TOL);
    println!("acceptance 3/8 (inconclusive at every depth up to 64, repaired at 0.04 to the 0.6 sink): PASS");
}

#[test]
fn acceptance_4_cycles_persist_under_random_small_perturbations() {
    // (slope1, offset1, slope2, offset2, cut) of the two 1D fixtures.
    let fixtures: [(&str, [f64; 5]); 2] = [
        ("double_sink", [0.5, 0.1, 0.5, 0.4, 0.5]),
        ("swap_cycle", [0.5, 0.6, 0.5, 0.0, 0.5]),
    ];
    let frozen_drift = [0.10515236040208412, 0.051229455654983214];
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_cafe);

    for ((name, [a1, b1, a2, b2, cut]), drift) in fixtures.into_iter().zip(frozen_drift) {
        let original = samples::two_branch_1d(a1, b1, a2, b2, cut).unwrap();
        let cert = certified(&original);
        let eps = cert.eps_persist / 2.0;
        let bound = eps_star(eps, cert.lambda).unwrap();
        assert!(
            (bound - drift).abs() <= EXACT,
            "{name}: drift bound {bound} drifted from frozen {drift}"
        );

        for trial in 0..20 {
            // Strictly below eps/2 in every jittered quantity, so every
            // comparison gap stays strictly below eps.
            let mut jitter = || (rng.gen::<f64>() - 0.5) * 0.99 * eps;
            let perturbed =
                samples::two_branch_1d(a1, b1 + jitter(), a2, b2 + jitter(), cut + jitter())
                    .expect("small jitters keep the family well-formed");
            assert!(perturbed.validate().is_valid());
            let gaps = is_epsilon_perturbation(&original, &perturbed, eps, 8).unwrap();
            assert!(gaps.verdict, "{name} trial {trial}: jitter exceeded eps");

            let re = certified(&perturbed);
            assert_eq!(
                re.cycles.len(),
                cert.cycles.len(),
                "{name} trial {trial}: cycle count changed"
            );
            assert_eq!(
                sorted_periods(&re),
                sorted_periods(&cert),
                "{name} trial {trial}: periods changed"
            );
            let matching = match_cycles(&cert.cycles, &re.cycles, &cert.metric).unwrap();
            assert!(matching.unmatched_left.is_empty());
            assert!(matching.unmatched_right.is_empty());
            assert!(
                matching.max_distance <= bound,
                "{name} trial {trial}: cycle drifted {} > {bound}",
                matching.max_distance
            );
        }
    }
    println!("acceptance 4/8 (2 maps x 20 perturbations at half the persistence radius, zero failures): PASS");
}

#[test]
fn acceptance_5_simulated_orbits_land_on_certified_cycles() {
    let clock = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x0b17_5eed);

    // 10^4 random starts per 1D fixture.
    let one_dim = [samples::double_sink(), samples::swap_cycle()];
    let mut starts: Vec<(PiecewiseMap, Vec<Point>)> = one_dim
        .into_iter()
        .map(|map| {
            let s = (0..10_000).map(|_| point(&[rng.gen::<f64>()])).collect();
            (map, s)
        })
        .collect();
    // 256^2 grid starts in the two-piece planar fixture.
    let grid: Vec<Point> = (0..256 * 256)
        .map(|n| {
            let (i, j) = (n % 256, n / 256);
            point(&[(i as f64 + 0.5) / 256.0, (j as f64 + 0.5) / 256.0])
        })
        .collect();
    starts.push((samples::half_split_2d(), grid));

    for (map, origins) in &starts {
        let cert = certified(map);
        let period = cert.cycles.iter().map(|c| c.period).max().unwrap();
        let budget = cert.k0 + cert.k_work + 50 * period;
        let tol = eps_star(cert.eps_persist / 2.0, cert.lambda).unwrap() + 1e-9;

        for start in origins {
            let orbit = iterate_orbit(map, start, budget, BranchPolicy::LowestId).unwrap();
            let last = orbit.last();
            let (mut best, mut nearest) = (f64::INFINITY, 0usize);
            for (c, cycle) in cert.cycles.iter().enumerate() {
                for q in &cycle.points {
                    let d = cert.metric.distance(last, q).unwrap();
                    if d < best {
                        (best, nearest) = (d, c);
                    }
                }
            }
            assert!(
                best <= tol,
                "orbit from {:?} still {best} from every cycle after {budget} steps",
                start.coords()
            );
            let cycle = &cert.cycles[nearest];
            let tail = &orbit.branches[orbit.branches.len() - cycle.period..];
            assert!(
                is_rotation(tail, &cycle.pieces),
                "late itinerary {tail:?} is not a rotation of {:?}",
                cycle.pieces
            );
        }
    }

    let elapsed = clock.elapsed();
    assert!(
        elapsed.as_secs_f64() < 60.0,
        "oracle sweep took {elapsed:?}, budget is 60 s"
    );
    println!("acceptance 5/8 (30k simulated orbits all land on certified cycles in time): PASS");
}

#[test]
fn acceptance_6_orbit_points_lie_in_the_enclosure_of_their_word() {
    let fixtures = [
        samples::double_sink(),
        samples::swap_cycle(),
        samples::boundary_graze(),
        samples::plugin_double_sink(),
        samples::half_split_2d(),
        samples::four_corners_2d(),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(0xa70a_50da);
    let mut violations = 0usize;

    for map in &fixtures {
        let opts = AtomOptions::default();
        let mut generations = vec![initial_atoms(map, &opts).unwrap()];
        for _ in 1..12 {
            let next = refine_atoms(map, generations.last().unwrap(), &opts).unwrap();
            generations.push(next);
        }
        let ambient = map.ambient();
        for _ in 0..1_000 {
            let start = point(
                &(0..map.dim())
                    .map(|a| {
                        ambient.lo()[a] + rng.gen::<f64>() * (ambient.hi()[a] - ambient.lo()[a])
                    })
                    .collect::<Vec<_>>(),
            );
            let depth = rng.gen_range(1..=12usize);
            let orbit = iterate_orbit(map, &start, depth, BranchPolicy::LowestId).unwrap();
            let atom = generations[depth - 1]
                .find(&orbit.branches)
                .unwrap_or_else(|| panic!("word {:?} has no alive atom", orbit.branches));
            if !atom
                .cover()
                .contains_point_slack(orbit.last().coords(), 1e-12)
            {
                violations += 1;
            }
        }
    }
    assert_eq!(violations, 0, "orbit points escaped their enclosures");
    println!("acceptance 6/8 (6000 random orbit/depth enclosure checks, zero violations): PASS");
}

#[test]
fn acceptance_7_atom_diameters_shrink_geometrically() {
    let fixtures = [
        ("double_sink", samples::double_sink(), false),
        ("swap_cycle", samples::swap_cycle(), false),
        ("boundary_graze", samples::boundary_graze(), false),
        ("plugin_double_sink", samples::plugin_double_sink(), true),
        ("half_split_2d", samples::half_split_2d(), false),
        ("four_corners_2d", samples::four_corners_2d(), false),
    ];
    for (name, map, meshed) in fixtures {
        let metric = map.metric().clone();
        let diam = map.ambient().diameter(&metric);
        let lambda = map.lambda();
        // Meshed (opaque-branch) enclosures pad each cell by its Lipschitz
        // ball; accumulated over generations that adds at most
        // cap * lambda / (1 - lambda) with the default cell cap of 1/128
        // of the largest side. Exact affine enclosures get rounding slack.
        let slack = if meshed {
            let side = (0..map.dim())
                .map(|a| map.ambient().side(a))
                .fold(0.0f64, f64::max);
            (side / 128.0) * lambda / (1.0 - lambda) + 1e-9
        } else {
            1e-12
        };
        let opts = AtomOptions::default();
        let mut set = initial_atoms(&map, &opts).unwrap();
        for k in 1..=12usize {
            if k > 1 {
                set = refine_atoms(&map, &set, &opts).unwrap();
            }
            let measured = set.max_diameter(&metric).unwrap();
            let bound = lambda.powi(k as i32) * diam + slack;
            assert!(
                measured <= bound,
                "{name}: generation {k} diameter {measured} exceeds {bound}"
            );
        }
    }
    println!("acceptance 7/8 (atom diameters below rate^k x box diameter through generation 12): PASS");
}

#[test]
fn acceptance_8_certificates_are_bytewise_thread_count_independent() {
    let maps = [samples::double_sink(), samples::four_corners_2d()];
    for map in &maps {
        let mut reference: Option<String> = None;
        for threads in [1usize, 2, 8] {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            for _run in 0..2 {
                let cert = pool.install(|| certified(map));
                let text = certificate_report(&cert).unwrap();
                match &reference {
                    None => reference = Some(text),
                    Some(first) => assert_eq!(
                        first.as_bytes(),
                        text.as_bytes(),
                        "certificate changed with {threads} threads"
                    ),
                }
            }
        }
    }
    println!("acceptance 8/8 (repeated runs on 1/2/8 threads, byte-identical certificates): PASS");
}
