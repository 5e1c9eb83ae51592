//! Acceptance gate. Run with `cargo test --test acceptance -- --nocapture`
//! to see one PASS/FAIL line per criterion.

mod common;

use common::*;
use nilsteer::cfs::cfs_equations;
use nilsteer::free_lie::{witt_dimension, FreeNilpotentLieAlgebra};
use nilsteer::poly::Poly;
use nilsteer::rational::{q, Q};
use nilsteer::sim::{commutator_ratio_test, integrate_flow, leaf_confinement_test, steer, SteerOptions};
use nilsteer::synth::{schedule_log, synth_order3_m2, ControlSchedule};
use nilsteer::systems::{
    chained4, constant_plane, heisenberg, scalar_saturated, unicycle, unicycle_nilpotent,
};
use nilsteer::vfield::{lie_bracket, lie_bracket_at, nilpotency_check};
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn alg(m: usize, k: usize) -> FreeNilpotentLieAlgebra {
    FreeNilpotentLieAlgebra::build(m, k).unwrap()
}

fn hall_basis_golden() -> Outcome {
    let start = Instant::now();
    let a = alg(2, 3);
    let dump = a.dump();
    let elapsed = start.elapsed().as_secs_f64();
    ensure(dump == include_str!("golden/basis_m2_k3.txt"), format!("basis differs:\n{dump}"))?;
    ensure(a.expression(3) == "[X1,[X1,X2]]", "B4 is not [B1,B3]")?;
    ensure(elapsed < 1.0, format!("took {elapsed:.3}s"))?;
    Ok(format!("5 elements in {:.1} ms", elapsed * 1e3))
}

fn cfs_golden() -> Outcome {
    let eqs = cfs_equations(&alg(2, 3));
    let t = |c: Q, a: u16, b: u16| Poly::monomial(5, vec![a, b, 0, 0, 0], c);
    let (one, z) = (q(1, 1), Poly::zero(5));
    // rows h1'..h5', columns v1..v4 (v5 set to zero)
    let want = [
        [t(one.clone(), 0, 0), z.clone(), z.clone(), z.clone()],
        [z.clone(), t(one.clone(), 0, 0), z.clone(), z.clone()],
        [z.clone(), t(one.clone(), 1, 0), t(one.clone(), 0, 0), z.clone()],
        [z.clone(), t(q(1, 2), 2, 0), t(one.clone(), 1, 0), t(one.clone(), 0, 0)],
        [z.clone(), t(one.clone(), 1, 1), t(one.clone(), 0, 1), z.clone()],
    ];
    for (j, row) in want.iter().enumerate() {
        for (l, w) in row.iter().enumerate() {
            ensure(eqs.coefficient(j, l) == w, format!("h{}' coefficient of v{}", j + 1, l + 1))?;
        }
    }
    Ok("h1'..h5' agree exactly".into())
}

fn heisenberg_steering() -> Outcome {
    let start = Instant::now();
    let sys = heisenberg();
    let mut worst: f64 = 0.0;
    for z in [0.25f64, 1.0, 4.0, -0.25, -1.0, -4.0] {
        let plan = steer(&sys, &[0.0; 3], &[0.0, 0.0, z], &SteerOptions::default()).map_err(|e| e.to_string())?;
        let s = &plan.schedule;
        let leg = z.abs().sqrt();
        ensure(s.len() == 4, format!("z={z}: {} pieces", s.len()))?;
        ensure(s.pieces.iter().all(|p| (p.duration - leg).abs() < 1e-15), format!("z={z}: leg times"))?;
        let legs: Vec<Vec<f64>> = s.pieces.iter().map(|p| p.u.clone()).collect();
        let expected = if z > 0.0 {
            [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]]
        } else {
            [[0.0, 1.0], [1.0, 0.0], [0.0, -1.0], [-1.0, 0.0]]
        };
        ensure(legs == expected, format!("z={z}: legs {legs:?}"))?;
        // replay independently with step 1e-3 of the total duration
        let traj = integrate_flow(&sys, &[0.0; 3], s, Some(1e-3 * s.total_duration()), None)
            .map_err(|e| e.to_string())?;
        let err = dist(traj.endpoint(), &[0.0, 0.0, z]);
        ensure(err < 1e-8 && plan.endpoint_error < 1e-8, format!("z={z}: error {err:.3e}"))?;
        worst = worst.max(err);
    }
    let elapsed = start.elapsed().as_secs_f64();
    ensure(elapsed < 5.0, format!("took {elapsed:.2}s"))?;
    Ok(format!("worst error {worst:.1e}, {elapsed:.2}s"))
}

fn side_effect_identity() -> Outcome {
    let a = alg(2, 3);
    for (gamma, root) in [(q(1, 1), q(1, 1)), (q(4, 1), q(2, 1)), (q(9, 4), q(3, 2))] {
        let (one, zero) = (q(1, 1), Q::zero());
        let mut s = ControlSchedule::<Q>::empty(2);
        for u in [[one.clone(), zero.clone()], [zero.clone(), one.clone()], [-one.clone(), zero.clone()], [zero.clone(), -one.clone()]] {
            s.push(root.clone(), u.to_vec());
        }
        let hat = &gamma * &root / q(2, 1);
        let want = a.series(vec![zero.clone(), zero.clone(), gamma.clone(), hat.clone(), hat]).unwrap();
        let got = schedule_log(&a, &s).map_err(|e| e.to_string())?;
        ensure(got == want, format!("gamma={gamma}: {:?}", got.coeffs()))?;
    }
    Ok("gamma in {1, 4, 9/4} exact".into())
}

fn rand_q(rng: &mut ChaCha8Rng, nonzero: bool) -> Q {
    loop {
        let v = q(rng.gen_range(-12..=12), rng.gen_range(1..=5));
        if !nonzero || !v.is_zero() {
            return v;
        }
    }
}

fn order3_synthesis() -> Outcome {
    let a = alg(2, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let trials = 100;
    for _ in 0..trials {
        // gamma = r^2 > 0 with rational cube roots for the compensation terms
        let r = q(rng.gen_range(1..=5), rng.gen_range(1..=3));
        let gamma = &r * &r;
        let g = &gamma * &r / q(2, 1);
        let (rho, sigma) = (rand_q(&mut rng, true), rand_q(&mut rng, true));
        let h = vec![
            rand_q(&mut rng, true),
            rand_q(&mut rng, true),
            gamma.clone(),
            &rho * &rho * &rho + &g,
            &sigma * &sigma * &sigma + &g,
        ];
        let syn = synth_order3_m2(&a, &h).map_err(|e| e.to_string())?;
        let exact = syn.exact_schedule.ok_or("no exact schedule")?;
        ensure(syn.schedule.len() <= 26, format!("{} pieces", syn.schedule.len()))?;
        let got = schedule_log(&a, &exact).map_err(|e| e.to_string())?;
        ensure(got == a.hall_product_log(&h).unwrap(), format!("log mismatch for {h:?}"))?;
    }
    let plan = steer(&chained4(), &[0.0; 4], &[0.0, 0.0, 0.0, 1.0], &SteerOptions::default())
        .map_err(|e| e.to_string())?;
    ensure(plan.endpoint_error < 1e-6, format!("chained4 error {:.3e}", plan.endpoint_error))?;
    Ok(format!(
        "{trials} targets exact; chained4 -> (0,0,0,1) in {} pieces, error {:.1e}",
        plan.schedule.len(),
        plan.endpoint_error
    ))
}

fn ratio_test() -> Outcome {
    let ts = [0.4, 0.2, 0.1, 0.05];
    let fmt = |r: &[(f64, f64)]| r.iter().map(|(_, v)| format!("{v:.2e}")).collect::<Vec<_>>().join(" ");
    let y = unicycle_nilpotent();
    let ry = commutator_ratio_test(y.field(0), y.field(1), &[0.0; 3], &ts).map_err(|e| e.to_string())?;
    ensure(ry.windows(2).all(|w| w[1].1 < w[0].1), format!("Y ratios not decreasing: {}", fmt(&ry)))?;
    ensure(ry[3].1 < 0.5 * ry[0].1, format!("Y last ratio too large: {}", fmt(&ry)))?;
    let h = heisenberg();
    let rh = commutator_ratio_test(h.field(0), h.field(1), &[0.2, -0.1, 0.3], &ts).map_err(|e| e.to_string())?;
    ensure(rh.iter().all(|(_, v)| *v < 1e-9), format!("Heisenberg ratios {}", fmt(&rh)))?;
    let x = unicycle();
    let rx = commutator_ratio_test(x.field(0), x.field(1), &[0.0; 3], &ts).map_err(|e| e.to_string())?;
    ensure(rx.windows(2).all(|w| w[1].1 < w[0].1), format!("X ratios not decreasing: {}", fmt(&rx)))?;
    Ok(format!("Y: {} | X: {} | Heisenberg max {:.1e}", fmt(&ry), fmt(&rx),
        rh.iter().map(|r| r.1).fold(0.0, f64::max)))
}

fn property_suites() -> Outcome {
    // Jacobi and antisymmetry
    for m in 1..=3 {
        for k in 1..=3 {
            let a = alg(m, k);
            ensure(a.s() as u64 == witt_dimension(m, k), format!("dimension m={m} k={k}"))?;
            let units: Vec<_> = (0..a.s()).map(|i| a.unit(i)).collect();
            for x in &units {
                for y in &units {
                    let xy = a.bracket(x, y).unwrap();
                    ensure(xy.add(&a.bracket(y, x).unwrap()).is_zero(), format!("antisymmetry m={m} k={k}"))?;
                    for z in &units {
                        let j = a.bracket(x, &a.bracket(y, z).unwrap()).unwrap()
                            .add(&a.bracket(y, &a.bracket(z, x).unwrap()).unwrap())
                            .add(&a.bracket(z, &xy).unwrap());
                        ensure(j.is_zero(), format!("Jacobi m={m} k={k}"))?;
                    }
                }
            }
        }
    }
    let witt = [[1, 1, 1, 1], [2, 3, 5, 8], [3, 6, 14, 32], [4, 10, 30, 90]];
    for m in 1..=4 {
        for k in 1..=4 {
            ensure(witt_dimension(m, k) == witt[m - 1][k - 1], format!("Witt m={m} k={k}"))?;
        }
    }
    // BCH against 3x3 unipotent matrices
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let a2 = alg(2, 2);
    let bch_trials = 128;
    for _ in 0..bch_trials {
        let x: Vec<Q> = (0..3).map(|_| rand_q(&mut rng, false)).collect();
        let y: Vec<Q> = (0..3).map(|_| rand_q(&mut rng, false)).collect();
        let z = a2.bch(&a2.series(x.clone()).unwrap(), &a2.series(y.clone()).unwrap()).unwrap();
        let prod = mat_mul(&mat_exp(&heis_matrix(&x)), &mat_exp(&heis_matrix(&y)));
        ensure(mat_log(&prod) == heis_matrix(z.coeffs()), format!("BCH {x:?} {y:?}"))?;
    }
    // symbolic vs pointwise brackets
    let mut worst_bracket: f64 = 0.0;
    for sys in [heisenberg(), chained4()] {
        let sym = lie_bracket(sys.field(0), sys.field(1)).unwrap();
        for _ in 0..100 {
            let p: Vec<f64> = (0..sys.n()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let d = dist(&sym.evaluate(&p).unwrap(), &lie_bracket_at(sys.field(0), sys.field(1), &p).unwrap());
            worst_bracket = worst_bracket.max(d);
        }
    }
    ensure(worst_bracket < 1e-12, format!("bracket disagreement {worst_bracket:.3e}"))?;
    // P(h) unipotent with accurate inverse
    let mut worst_inv: f64 = 0.0;
    for (m, k) in [(2, 2), (2, 3), (3, 3)] {
        let eqs = cfs_equations(&alg(m, k));
        let s = eqs.s();
        let id = nalgebra::DMatrix::<f64>::identity(s, s);
        for _ in 0..100 {
            let h: Vec<f64> = (0..s).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let p = eqs.table().matrix(&h);
            for i in 0..s {
                ensure(p[(i, i)] == 1.0 && (0..i).all(|j| p[(i, j)] == 0.0), format!("P(h) not unipotent m={m} k={k}"))?;
            }
            worst_inv = worst_inv.max((&p * eqs.p_inverse(&h) - &id).abs().max());
        }
    }
    ensure(worst_inv < 1e-12, format!("inverse residual {worst_inv:.3e}"))?;
    Ok(format!(
        "BCH {bch_trials} exact, bracket gap {worst_bracket:.1e}, P(h) inverse residual {worst_inv:.1e}"
    ))
}

fn negative_controls() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let pts: Vec<Vec<f64>> = (0..20).map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    for k in [2, 3] {
        let r = nilpotency_check(&unicycle(), &alg(2, k), &pts, 1e-8).map_err(|e| e.to_string())?;
        ensure(!r.nilpotent, format!("raw unicycle passed nilpotency at order {k}"))?;
    }
    let plane = leaf_confinement_test(&constant_plane(), &[2], &[0.1, 0.2, 0.3], 200, &mut rng)
        .map_err(|e| e.to_string())?;
    ensure(plane.max_deviation < 1e-9, format!("plane deviation {:.3e}", plane.max_deviation))?;
    let heis = leaf_confinement_test(&heisenberg(), &[2], &[0.1, 0.2, 0.3], 200, &mut rng)
        .map_err(|e| e.to_string())?;
    ensure(heis.max_deviation > 0.1, format!("Heisenberg escape only {:.3e}", heis.max_deviation))?;
    let sat = scalar_saturated(1.0);
    let mut min_excess = f64::INFINITY;
    for _ in 0..100 {
        let mut cuts: Vec<f64> = (0..rng.gen_range(0..6)).map(|_| rng.gen_range(0.0..1.0)).collect();
        cuts.extend([0.0, 1.0]);
        cuts.sort_by(f64::total_cmp);
        let mut s = ControlSchedule::empty(1);
        for w in cuts.windows(2) {
            s.push(w[1] - w[0], vec![rng.gen_range(-1.5..1.5)]);
        }
        let traj = integrate_flow(&sat, &[2.0], &s, Some(1e-3), None).map_err(|e| e.to_string())?;
        for (t, x) in traj.times.iter().zip(&traj.states).skip(1) {
            ensure(x[0] > 2.0, format!("x({t}) = {}", x[0]))?;
            min_excess = min_excess.min(x[0] - 2.0);
        }
    }
    Ok(format!(
        "plane deviation {:.1e}, Heisenberg escape {:.2}, saturated min x-2 {:.1e}",
        plane.max_deviation, heis.max_deviation, min_excess
    ))
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 8] = [
        ("hall basis golden", hall_basis_golden),
        ("hall coordinate equations golden", cfs_golden),
        ("heisenberg steering", heisenberg_steering),
        ("commutator side-effect identity", side_effect_identity),
        ("26-piece synthesis", order3_synthesis),
        ("commutator ratio test", ratio_test),
        ("property suites", property_suites),
        ("negative controls", negative_controls),
    ];
    let start = Instant::now();
    let mut failed = Vec::new();
    for (name, f) in criteria {
        match f() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                println!("FAIL {name}: {why}");
                failed.push(name);
            }
        }
    }
    println!("total {:.2}s", start.elapsed().as_secs_f64());
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
