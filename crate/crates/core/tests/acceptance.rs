//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

mod common;

use std::time::Instant;

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use symvol::control::disc::{disc_flow, disc_propagate, DiscControl, DiscState};
use symvol::control::heisenberg::{heisenberg_summary, HeisenbergControl};
use symvol::control::{constant_signal, Signal};
use symvol::hamiltonian::{CoupledOscillators, HarmonicOscillator};
use symvol::integrator::Method;
use symvol::invariants::{collapse_angle, pair_expansion_factor, subdet_table};
use symvol::surfaces::{density_map, mapped_area_factor, shadow_area_factor};
use symvol::{
    compute_skeleton, io, poincare_cartan_sum, propagate, skeleton_volume_ratio, verify_pairing, wirtinger_check,
    IntegratorSettings, PhaseState, SampleSpec, SurfaceParam, Trajectory, VectorSet2k,
};

use common::*;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn coupled_run(samples: usize) -> Trajectory {
    let sys = CoupledOscillators::new(0.25);
    let x0 = PhaseState::new(vec![0.3, 1.0, -0.2, 0.5], 0.0).unwrap();
    propagate(
        &sys,
        &x0,
        (0.0, 10.0),
        &IntegratorSettings::adaptive(1e-10, 1e-12),
        &SampleSpec::Uniform(samples),
    )
    .unwrap()
}

fn pendulum_run() -> Trajectory {
    let sys = symvol::hamiltonian::Pendulum;
    let x0 = PhaseState::new(vec![0.5, 1.0], 0.0).unwrap();
    propagate(&sys, &x0, (0.0, 10.0), &IntegratorSettings::adaptive(1e-11, 1e-13), &SampleSpec::Uniform(10)).unwrap()
}

fn criterion_1() -> Outcome {
    let traj = coupled_run(100);
    let mut worst: f64 = 0.0;
    for s in &traj.samples {
        let table = subdet_table(&s.stm).map_err(|e| e.to_string())?;
        for (lib, oracle) in table.column_sums().iter().zip(column_sums(&s.stm)) {
            ensure((lib - oracle).abs() < 1e-12, || format!("column sum {lib} vs oracle {oracle}"))?;
            worst = worst.max((oracle - 1.0).abs());
        }
        for (lib, oracle) in table.row_sums().iter().zip(row_sums(&s.stm)) {
            ensure((lib - oracle).abs() < 1e-12, || format!("row sum {lib} vs oracle {oracle}"))?;
            worst = worst.max((oracle - 1.0).abs());
        }
    }
    ensure(traj.samples.len() == 101, || "expected t0 plus 100 samples".into())?;
    ensure(worst <= 1e-8, || format!("max |sum − 1| = {worst:e}"))?;
    Ok(format!("max |sum − 1| = {worst:.2e} over {} samples", traj.samples.len()))
}

fn criterion_2() -> Outcome {
    let x0 = PhaseState::new(vec![1.0, 0.0], 0.0).unwrap();
    let traj = propagate(
        &HarmonicOscillator,
        &x0,
        (0.0, 20.0),
        &IntegratorSettings::default(),
        &SampleSpec::Uniform(200),
    )
    .map_err(|e| e.to_string())?;
    let worst = traj
        .samples
        .iter()
        .map(|s| (&s.stm - rotation(s.t)).amax())
        .fold(0.0, f64::max);
    ensure(worst <= 1e-9, || format!("max entry deviation {worst:e}"))?;
    Ok(format!("max entry deviation {worst:.2e}"))
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 3;
    let mut min_margin = f64::INFINITY;
    for i in 0..10_000 {
        let k = 1 + i % 3;
        let v = DMatrix::from_fn(2 * n, 2 * k, |_, _| StandardNormal.sample(&mut rng));
        let bound = projection_sum(&v).abs();
        let vol = gram_volume(&v);
        ensure(bound <= vol + 1e-12, || format!("oracle bound {bound} > volume {vol}"))?;
        let check = wirtinger_check(&VectorSet2k::new(v).map_err(|e| e.to_string())?);
        ensure(check.holds, || format!("library reports violation {check:?}"))?;
        ensure((check.bound - bound).abs() <= 1e-10 * (1.0 + bound), || "bound mismatch".into())?;
        ensure((check.volume - vol).abs() <= 1e-10 * (1.0 + vol), || "volume mismatch".into())?;
        min_margin = min_margin.min(vol - bound);
    }
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let k = 1 + i % 3;
        let v = DMatrix::from_fn(2 * n, 2 * k, |_, _| StandardNormal.sample(&mut rng));
        let phi = shear_symplectic(&mut rng, n, 0.7, 2);
        let before = projection_sum(&v);
        let lib = poincare_cartan_sum(&VectorSet2k::new(&phi * &v).map_err(|e| e.to_string())?);
        ensure((projection_sum(&(&phi * &v)) - lib).abs() <= 1e-9 * (1.0 + lib.abs()), || {
            "library signed sum disagrees with oracle".into()
        })?;
        worst = worst.max((lib - before).abs());
    }
    ensure(worst <= 1e-8, || format!("signed sum changed by {worst:e}"))?;
    Ok(format!("min volume − bound {min_margin:.2e}; max signed-sum change {worst:.2e}"))
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut min_factor = f64::INFINITY;
    let mut full_dev: f64 = 0.0;
    for i in 0..10_000 {
        let n = 1 + i % 4;
        let phi = shear_symplectic(&mut rng, n, 0.6, 2);
        for k in 1..=n {
            for subset in (0..n).combinations(k) {
                let lib = pair_expansion_factor(&phi, &subset).map_err(|e| e.to_string())?;
                let oracle = gram_volume(&(&phi * plane_stack(&subset, n)));
                ensure((lib - oracle).abs() <= 1e-9 * oracle, || format!("factor {lib} vs oracle {oracle}"))?;
                ensure(lib >= 1.0 - 1e-10, || format!("expansion factor {lib} < 1 for {subset:?}"))?;
                min_factor = min_factor.min(lib);
                if k == n {
                    full_dev = full_dev.max((lib - 1.0).abs());
                }
            }
        }
    }
    ensure(full_dev <= 1e-8, || format!("full-stack factor off by {full_dev:e}"))?;
    Ok(format!("min factor {min_factor:.12}; full-stack max |ν − 1| {full_dev:.2e}"))
}

fn collapse_residual(phi: &DMatrix<f64>) -> Result<f64, String> {
    let n = phi.nrows() / 2;
    let mut worst: f64 = 0.0;
    for k in 1..n {
        for split in (0..n).combinations(k) {
            let rest: Vec<usize> = (0..n).filter(|p| !split.contains(p)).collect();
            let ca = collapse_angle(phi, &split).map_err(|e| e.to_string())?;
            let a = phi * plane_stack(&split, n);
            let b = phi * plane_stack(&rest, n);
            let sin_beta = principal_sine_product(&a, &b);
            let nu_s = gram_volume(&a);
            let nu_c = gram_volume(&b);
            ensure((ca.nu_s - nu_s).abs() <= 1e-9 * nu_s, || "ν_S disagrees with oracle".into())?;
            ensure((ca.nu_sc - nu_c).abs() <= 1e-9 * nu_c, || "ν_S' disagrees with oracle".into())?;
            ensure((ca.beta.sin() - sin_beta).abs() <= 1e-8, || {
                format!("sin β {} vs principal angles {sin_beta}", ca.beta.sin())
            })?;
            worst = worst.max((nu_s * nu_c * sin_beta - 1.0).abs());
        }
    }
    Ok(worst)
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for i in 0..1_000 {
        let n = 2 + i % 3;
        let phi = shear_symplectic(&mut rng, n, 0.5, 2);
        worst = worst.max(collapse_residual(&phi)?);
    }
    let traj = coupled_run(20);
    for s in &traj.samples[1..] {
        worst = worst.max(collapse_residual(&s.stm)?);
    }
    ensure(worst <= 1e-8, || format!("|ν·ν'·sin β − 1| = {worst:e}"))?;
    Ok(format!("max |ν·ν'·sin β − 1| = {worst:.2e}"))
}

fn skeleton_checks(phi: &DMatrix<f64>) -> Result<f64, String> {
    let n = phi.nrows() / 2;
    let sk = compute_skeleton(phi).map_err(|e| e.to_string())?;
    let report = verify_pairing(&sk);
    let j = j_matrix(n);
    let mut worst: f64 = 0.0;

    let mut spectrum: Vec<f64> = (phi.transpose() * phi).symmetric_eigen().eigenvalues.iter().copied().collect();
    spectrum.sort_by(|a, b| b.total_cmp(a));
    for i in 0..n {
        let r = (spectrum[i] * spectrum[2 * n - 1 - i] - 1.0).abs();
        ensure(r <= 1e-8, || format!("spectrum reciprocity {r:e}"))?;
        worst = worst.max(r);
    }
    for (lib, oracle) in sk.spectrum.iter().zip(&spectrum) {
        ensure((lib - oracle).abs() <= 1e-8 * oracle.max(1.0), || "spectrum mismatch".into())?;
    }
    ensure(report.spectrum_reciprocity <= 1e-8, || "library reciprocity report".into())?;

    for i in 0..n {
        let r = (&sk.eta[i] - &j * &sk.xi[i]).amax();
        ensure(r <= 1e-8, || format!("η − Jξ = {r:e}"))?;
        worst = worst.max(r);
    }

    let t_res = sympl_defect(&sk.t);
    ensure(t_res <= 1e-8, || format!("T not symplectic: {t_res:e}"))?;
    worst = worst.max(t_res);

    let images = phi * &sk.t;
    let gram = images.transpose() * &images;
    for a in 0..2 * n {
        for b in 0..2 * n {
            if a != b {
                let off = gram[(a, b)].abs() / (gram[(a, a)] * gram[(b, b)]).sqrt();
                ensure(off <= 1e-8, || format!("image Gram off-diagonal {off:e}"))?;
            }
        }
    }
    for i in 0..n {
        let lam = sk.lambda[i];
        let nx = images.column(2 * i).norm();
        let ne = images.column(2 * i + 1).norm();
        let r = ((nx - lam.sqrt()) / lam.sqrt()).abs().max((ne * lam.sqrt() - 1.0).abs());
        ensure(r <= 1e-8, || format!("image norms off by {r:e}"))?;
    }

    for k in 1..=n {
        for subset in (0..n).combinations(k) {
            let cols: Vec<DVector<f64>> = subset.iter().flat_map(|&i| [sk.xi[i].clone(), sk.eta[i].clone()]).collect();
            let l = DMatrix::from_columns(&cols);
            let oracle = gram_volume(&(phi * &l)) / gram_volume(&l);
            let lib = skeleton_volume_ratio(&sk, &subset).map_err(|e| e.to_string())?;
            let r = (oracle - 1.0).abs().max((lib - 1.0).abs());
            ensure(r <= 1e-8, || format!("skeleton volume ratio off by {r:e} on {subset:?}"))?;
            worst = worst.max(r);
        }
    }
    Ok(worst)
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for i in 0..1_000 {
        let n = 1 + i % 4;
        let phi = shear_symplectic(&mut rng, n, 0.5, 2);
        worst = worst.max(skeleton_checks(&phi)?);
    }
    for s in coupled_run(10).samples[1..].iter().chain(&pendulum_run().samples[1..]) {
        worst = worst.max(skeleton_checks(&s.stm)?);
    }

    // Squeeze along p₁ then mix pairs 1 and 2: the plane split {1}|{2}
    // expands, the skeleton planes do not.
    let squeeze = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 0.5, 1.0, 1.0]));
    let (s, c) = std::f64::consts::FRAC_PI_4.sin_cos();
    let mut rot = DMatrix::identity(4, 4);
    for (a, b) in [(0, 2), (1, 3)] {
        rot[(a, a)] = c;
        rot[(a, b)] = -s;
        rot[(b, a)] = s;
        rot[(b, b)] = c;
    }
    let fixture = squeeze * rot;
    let nu = gram_volume(&(&fixture * plane_stack(&[0], 2)));
    ensure(nu >= 1.2, || format!("fixture split factor {nu} < 1.2"))?;
    worst = worst.max(skeleton_checks(&fixture)?);
    Ok(format!("worst residual {worst:.2e}; fixture split ν = {nu:.4} with unit skeleton ratios"))
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let modes = rng.random_range(1..=3);
        let ctrl = HeisenbergControl::random(&mut rng, modes, 1.0);
        let summary = heisenberg_summary(&ctrl).map_err(|e| e.to_string())?;
        let [mu, nu, alpha] = heisenberg_endpoint(&*ctrl.u, &*ctrl.v, 4000);
        ensure((summary.mu1 - mu).abs().max((summary.nu1 - nu).abs()).max((summary.alpha1 - alpha).abs()) <= 1e-9, || {
            "endpoint disagrees with test-side RK4".into()
        })?;
        let closed = heisenberg_cost_expanded(mu, nu, alpha);
        let d = (summary.f_quadrature - closed).abs();
        ensure(d <= 1e-6, || format!("quadrature {} vs closed form {closed}", summary.f_quadrature))?;
        worst = worst.max(d);
    }

    let bloch = heisenberg_summary(&HeisenbergControl::bloch()).map_err(|e| e.to_string())?;
    ensure(bloch.mu1.abs() <= 1e-9 && bloch.nu1.abs() <= 1e-9, || {
        format!("Bloch μ(1) = {:e}, ν(1) = {:e}", bloch.mu1, bloch.nu1)
    })?;
    ensure((bloch.alpha1 - 1.0).abs() <= 1e-9, || format!("Bloch α(1) = {}", bloch.alpha1))?;
    ensure((bloch.f_closed - 8.0 / 3.0).abs() <= 1e-6, || format!("Bloch f = {}", bloch.f_closed))?;
    ensure((heisenberg_cost_expanded(0.0, 0.0, 1.0) - 8.0 / 3.0).abs() <= 1e-12, || "oracle at α = 1".into())?;

    let zero = heisenberg_summary(&HeisenbergControl::zero()).map_err(|e| e.to_string())?;
    ensure((zero.f_closed - 20.0 / 3.0).abs() <= 1e-9, || format!("zero-control f = {}", zero.f_closed))?;
    ensure((zero.f_quadrature - 20.0 / 3.0).abs() <= 1e-6, || "zero-control quadrature".into())?;
    Ok(format!(
        "max |quadrature − closed| {worst:.2e}; Bloch f = {:.9} (integrated α(1) = {:.6}, f = {:.6})",
        bloch.f_closed, bloch.alpha1_integrated, bloch.f_quadrature
    ))
}

fn signal(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Signal {
    std::sync::Arc::new(f)
}

fn criterion_8() -> Outcome {
    let q0 = DiscState::new(0.1, -0.2, 0.3, 1.1, 0.0).map_err(|e| e.to_string())?;
    let spec = SampleSpec::Uniform(100);
    let compliant = [
        DiscControl::compliant(constant_signal(1.0), constant_signal(0.2)),
        DiscControl::compliant(signal(|t| t.sin()), signal(|t| (2.0 * t).cos())),
        DiscControl::compliant(signal(|t| 0.5 + 0.3 * t), constant_signal(-0.4)),
    ];
    let mut worst_area: f64 = 0.0;
    for ctrl in &compliant {
        let traj = disc_propagate(ctrl, &q0, (0.0, 2.0), &spec).map_err(|e| e.to_string())?;
        for s in &traj.samples {
            let k = &s.integrals;
            worst_area = worst_area.max((k.a * k.d - k.b * k.c).abs());
        }
    }
    ensure(worst_area <= 1e-9, || format!("max |AD − BC| = {worst_area:e}"))?;

    let generic = [
        DiscControl::open_loop(constant_signal(1.0), constant_signal(0.3), constant_signal(0.5)),
        DiscControl::open_loop(signal(|t| t.cos()), signal(|t| 0.2 * t), signal(|t| (3.0 * t).sin())),
    ];
    let mut worst_mismatch: f64 = 0.0;
    for ctrl in &generic {
        let traj = disc_propagate(ctrl, &q0, (0.0, 2.0), &spec).map_err(|e| e.to_string())?;
        for s in &traj.samples {
            worst_mismatch = worst_mismatch.max((s.integrals.stm() - &s.phi_direct).amax());
        }
        // Central differences of the flow as a coarse third opinion.
        let end = traj.samples.last().unwrap();
        let h = 1e-5;
        for j in 0..5 {
            let mut plus = q0.to_array();
            let mut minus = q0.to_array();
            plus[j] += h;
            minus[j] -= h;
            let fp = disc_flow(ctrl, &DiscState::from_slice(&plus), (0.0, 2.0)).map_err(|e| e.to_string())?;
            let fm = disc_flow(ctrl, &DiscState::from_slice(&minus), (0.0, 2.0)).map_err(|e| e.to_string())?;
            for i in 0..5 {
                let fd = (fp.to_array()[i] - fm.to_array()[i]) / (2.0 * h);
                ensure((fd - end.phi_direct[(i, j)]).abs() <= 1e-5, || {
                    format!("finite difference Φ[{i},{j}] = {fd} vs {}", end.phi_direct[(i, j)])
                })?;
            }
        }
    }
    ensure(worst_mismatch <= 1e-8, || format!("assembled vs co-integrated {worst_mismatch:e}"))?;
    Ok(format!("max |AD − BC| {worst_area:.2e}; assembled vs co-integrated {worst_mismatch:.2e}"))
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst_sum: f64 = 0.0;
    let mut worst_prob: f64 = 0.0;
    for i in 0..100 {
        let n = 2 + i % 2;
        let pair = i % n;
        let phi = shear_symplectic(&mut rng, n, 0.6, 2);
        let anchor = vec![0.0; 2 * n];
        let lamina = SurfaceParam::lamina(pair, [(-1.0, 1.0), (-0.5, 0.5)], [8, 8], &anchor).map_err(|e| e.to_string())?;
        let oracle: f64 = (0..n).map(|t| subdet(&phi, t, pair)).sum();
        for u in lamina.grid().cell_centers() {
            let mut sum = 0.0;
            for t in 0..n {
                sum += shadow_area_factor(&lamina, &phi, t, &u).map_err(|e| e.to_string())?;
            }
            worst_sum = worst_sum.max((sum - 1.0).abs()).max((sum - oracle).abs());
            let area = mapped_area_factor(&lamina, &phi, &u).map_err(|e| e.to_string())?;
            let oracle_area = gram_volume(&(&phi * plane_stack(&[pair], n)));
            ensure((area - oracle_area).abs() <= 1e-9 * oracle_area, || "area factor vs oracle".into())?;
            ensure(area >= sum.abs() - 1e-12, || format!("area {area} < |shadow sum| {}", sum.abs()))?;
        }
        let image_anchor = vec![0.0; 2 * n];
        for t in 0..n {
            match density_map(&lamina, &phi, &image_anchor, t) {
                Ok(map) => {
                    let total: f64 = map.cells.iter().map(|c| c.prob).sum();
                    worst_prob = worst_prob.max((total - 1.0).abs());
                }
                Err(symvol::Error::AllCaustic(_)) => {}
                Err(e) => return Err(e.to_string()),
            }
        }
    }
    ensure(worst_sum <= 1e-9, || format!("shadow sum off by {worst_sum:e}"))?;
    ensure(worst_prob <= 1e-6, || format!("probabilities off by {worst_prob:e}"))?;
    Ok(format!("max |Σ shadows − 1| {worst_sum:.2e}; max |Σ prob − 1| {worst_prob:.2e}"))
}

fn fixed_step_csv() -> Result<Vec<u8>, String> {
    let sys = CoupledOscillators::new(0.25);
    let x0 = PhaseState::new(vec![0.3, 1.0, -0.2, 0.5], 0.0).unwrap();
    let settings = IntegratorSettings {
        method: Method::ClassicalRk4,
        fixed_step: 1e-2,
        ..IntegratorSettings::default()
    };
    let traj = propagate(&sys, &x0, (0.0, 5.0), &settings, &SampleSpec::Uniform(50)).map_err(|e| e.to_string())?;
    let mut buf = Vec::new();
    io::write_trajectory_csv(&traj, &mut buf).map_err(|e| e.to_string())?;
    Ok(buf)
}

fn criterion_10() -> Outcome {
    let a = fixed_step_csv()?;
    let b = fixed_step_csv()?;
    ensure(a == b, || "fixed-step CSV output differs between runs".into())?;
    Ok(format!("{} identical bytes", a.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("column and row sums", criterion_1),
        ("harmonic oscillator golden STM", criterion_2),
        ("Wirtinger bound and signed-sum invariance", criterion_3),
        ("plane-stack expansion", criterion_4),
        ("collapse identity", criterion_5),
        ("eigenskeleton", criterion_6),
        ("Heisenberg case study", criterion_7),
        ("rolling disc", criterion_8),
        ("surface machinery", criterion_9),
        ("determinism", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} ({secs:.2} s)", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why} ({secs:.2} s)", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criterion/criteria failed");
        std::process::exit(1);
    }
}
