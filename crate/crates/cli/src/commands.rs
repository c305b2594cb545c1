use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use symvol::control::disc::{disc_propagate, DiscControl, DiscState};
use symvol::control::heisenberg::{heisenberg_summary, surface_snapshots, HeisenbergControl};
use symvol::invariants::{all_splits, invariant_record, split_label, InvariantRecord};
use symvol::io;
use symvol::phase::{projection_stack, random_symplectic};
use symvol::surfaces::{density_map, density_map_per_node, surface_report, SurfaceReport};
use symvol::{
    compute_skeleton, poincare_cartan_sum, verify_pairing, wirtinger_check, Hamiltonian,
    IntegratorSettings, SampleSpec, Stm, SurfaceParam, Trajectory, VectorSet2k,
};

use crate::config::{
    self, DiscConfig, DiscControlConfig, HeisenbergConfig, HeisenbergControlConfig, InvariantsConfig,
    PropagateConfig, SkeletonConfig, StmSource, SurfaceConfig,
};
use crate::{Cli, CliError, ExampleName, Format};

fn require_config<T: serde::de::DeserializeOwned>(cli: &Cli) -> Result<T, CliError> {
    match &cli.config {
        Some(p) => config::load(p),
        None => Err(CliError::Config("this command needs --config".into())),
    }
}

fn settings(cli: &Cli, base: IntegratorSettings) -> IntegratorSettings {
    match cli.tol_override {
        Some(tol) => IntegratorSettings {
            rel_tol: tol,
            abs_tol: tol * 1e-2,
            ..base
        },
        None => base,
    }
}

fn create(cli: &Cli, name: &str) -> Result<(BufWriter<File>, PathBuf), CliError> {
    let path = cli.out.join(name);
    let f = File::create(&path)?;
    Ok((BufWriter::new(f), path))
}

fn write_json_file<T: Serialize>(cli: &Cli, name: &str, value: &T) -> Result<PathBuf, CliError> {
    let (w, path) = create(cli, name)?;
    io::write_json(value, w)?;
    Ok(path)
}

fn announce(path: &Path) {
    println!("wrote {}", path.display());
}

fn run_propagation(cli: &Cli, cfg: &PropagateConfig) -> Result<(Box<dyn Hamiltonian>, Trajectory), CliError> {
    let sys = cfg.build_system()?;
    let x0 = cfg.initial()?;
    let traj = symvol::propagate(
        sys.as_ref(),
        &x0,
        (cfg.t_span[0], cfg.t_span[1]),
        &settings(cli, cfg.integrator),
        &cfg.sample_spec(),
    )?;
    Ok((sys, traj))
}

pub fn propagate(cli: &Cli) -> Result<(), CliError> {
    let cfg: PropagateConfig = require_config(cli)?;
    let (sys, traj) = run_propagation(cli, &cfg)?;
    let path = match cli.format {
        Format::Csv => {
            let (w, path) = create(cli, "trajectory.csv")?;
            io::write_trajectory_csv(&traj, w)?;
            path
        }
        Format::Json => write_json_file(cli, "trajectory.json", &traj)?,
    };
    announce(&path);
    println!(
        "system {}: {} samples, {} steps ({} rejected)",
        traj.system,
        traj.samples.len(),
        traj.stats.steps,
        traj.stats.rejected
    );
    println!("max symplecticity residual: {:e}", traj.max_residual);
    println!("max energy drift: {:e}", traj.max_energy_drift);
    let analytic = traj
        .samples
        .iter()
        .filter_map(|s| sys.analytic_stm(s.t - traj.samples[0].t, &cfg.initial_state).map(|a| (a - &s.stm).amax()))
        .reduce(f64::max);
    if let Some(dev) = analytic {
        println!("max deviation from analytic STM: {dev:e}");
    }
    Ok(())
}


/// STMs resolved from a source, with the trajectory when one was run.
struct Resolved {
    stms: Vec<Stm>,
    run: Option<(Box<dyn Hamiltonian>, Trajectory, PropagateConfig)>,
}

fn resolve(cli: &Cli, src: &StmSource) -> Result<Resolved, CliError> {
    let single = |m: DMatrix<f64>| -> Result<Resolved, CliError> {
        Ok(Resolved {
            stms: vec![Stm::new(m, 0.0, 0.0)?],
            run: None,
        })
    };
    match src {
        StmSource::Propagate(cfg) => {
            let (sys, traj) = run_propagation(cli, cfg)?;
            let stms = (0..traj.samples.len()).map(|i| traj.stm_at(i)).collect();
            Ok(Resolved {
                stms,
                run: Some((sys, traj, (**cfg).clone())),
            })
        }
        StmSource::File { path } => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            let stms = if path.extension().is_some_and(|e| e == "csv") {
                let table = io::read_trajectory_csv(&text)?;
                (0..table.rows.len()).map(|i| table.stm(i)).collect()
            } else {
                vec![io::parse_stm_json(&text)?]
            };
            Ok(Resolved { stms, run: None })
        }
        StmSource::Fixture { name, n_pairs } => single(name.matrix(*n_pairs)?),
        StmSource::Matrix { matrix } => single(config::matrix_config(matrix)?),
        StmSource::Random { n_pairs, scale } => {
            if *n_pairs == 0 {
                return Err(CliError::Config("`n_pairs` must be positive".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
            single(random_symplectic(&mut rng, *n_pairs, *scale))
        }
    }
}

fn zero_based(pairs: &[usize], n: usize, what: &str) -> Result<Vec<usize>, CliError> {
    pairs
        .iter()
        .map(|&p| {
            if p == 0 || p > n {
                Err(CliError::Config(format!("{what} pair {p} is outside 1..={n}")))
            } else {
                Ok(p - 1)
            }
        })
        .collect()
}

#[derive(Debug, Serialize)]
struct Violation {
    t: f64,
    check: String,
    value: f64,
    tolerance: f64,
}

#[derive(Debug, Serialize)]
struct InvariantReport {
    tolerance: f64,
    samples: usize,
    max_column_sum_deviation: f64,
    max_row_sum_deviation: f64,
    max_sympl_residual: f64,
    max_collapse_residual: f64,
    min_plane_expansion: f64,
    /// Smallest `volume − bound` over the split stacks.
    min_wirtinger_margin: f64,
    /// Largest `|Poincaré–Cartan sum − 1|` over the split stacks.
    max_poincare_cartan_deviation: f64,
    records: Vec<InvariantRecord>,
    violations: Vec<Violation>,
}

pub fn invariants(cli: &Cli) -> Result<(), CliError> {
    let cfg: InvariantsConfig = require_config(cli)?;
    if !(cfg.tolerance > 0.0) {
        return Err(CliError::Config("`tolerance` must be positive".into()));
    }
    let resolved = resolve(cli, &cfg.stm)?;
    let n = resolved.stms[0].n_pairs();
    let splits = match &cfg.splits {
        Some(s) => s
            .iter()
            .map(|set| zero_based(set, n, "split"))
            .collect::<Result<Vec<_>, _>>()?,
        None => all_splits(n),
    };
    let tol = cfg.tolerance;
    let mut report = InvariantReport {
        tolerance: tol,
        samples: resolved.stms.len(),
        max_column_sum_deviation: 0.0,
        max_row_sum_deviation: 0.0,
        max_sympl_residual: 0.0,
        max_collapse_residual: 0.0,
        min_plane_expansion: f64::INFINITY,
        min_wirtinger_margin: f64::INFINITY,
        max_poincare_cartan_deviation: 0.0,
        records: Vec::new(),
        violations: Vec::new(),
    };
    for stm in &resolved.stms {
        let phi = &stm.matrix;
        let t = stm.t1;
        let rec = invariant_record(t, phi, &splits)?;
        let mut flag = |check: String, value: f64, bad: bool| {
            if bad {
                report.violations.push(Violation {
                    t,
                    check,
                    value,
                    tolerance: tol,
                });
            }
        };
        for (j, s) in rec.column_sums.iter().enumerate() {
            let d = (s - 1.0).abs();
            report.max_column_sum_deviation = report.max_column_sum_deviation.max(d);
            flag(format!("column_sum[{}]", j + 1), *s, !(d <= tol));
        }
        for (i, s) in rec.row_sums.iter().enumerate() {
            let d = (s - 1.0).abs();
            report.max_row_sum_deviation = report.max_row_sum_deviation.max(d);
            flag(format!("row_sum[{}]", i + 1), *s, !(d <= tol));
        }
        report.max_sympl_residual = report.max_sympl_residual.max(rec.sympl_residual);
        flag("sympl_residual".into(), rec.sympl_residual, !(rec.sympl_residual <= tol));
        for (label, r) in &rec.collapse_residual_by_split {
            report.max_collapse_residual = report.max_collapse_residual.max(*r);
            flag(format!("collapse_identity[{label}]"), *r, !(*r <= tol));
        }
        report.min_plane_expansion = report.min_plane_expansion.min(rec.min_plane_expansion);
        flag(
            "min_plane_expansion".into(),
            rec.min_plane_expansion,
            !(rec.min_plane_expansion >= 1.0 - tol),
        );
        let mut stacks: Vec<Vec<usize>> = Vec::new();
        for s in &splits {
            stacks.push(s.clone());
            stacks.push((0..n).filter(|p| !s.contains(p)).collect());
        }
        stacks.push((0..n).collect());
        for stack in stacks {
            let label = split_label(&stack, &[]);
            let label = label.trim_end_matches('|');
            let vs = VectorSet2k::new(phi * projection_stack(&stack, n)?)?;
            let w = wirtinger_check(&vs);
            report.min_wirtinger_margin = report.min_wirtinger_margin.min(w.margin());
            flag(format!("wirtinger[{label}]"), w.margin(), !w.holds);
            let d = (poincare_cartan_sum(&vs) - 1.0).abs();
            report.max_poincare_cartan_deviation = report.max_poincare_cartan_deviation.max(d);
            flag(format!("poincare_cartan[{label}]"), d, !(d <= tol));
        }
        report.records.push(rec);
    }

    let json = write_json_file(cli, "invariants.json", &report)?;
    announce(&json);
    if cli.format == Format::Csv {
        let (w, path) = create(cli, "invariants.csv")?;
        io::write_invariants_csv(&report.records, w)?;
        announce(&path);
    }
    println!(
        "{} sample(s): max |column sum - 1| {:e}, max |row sum - 1| {:e}, max residual {:e}",
        report.samples, report.max_column_sum_deviation, report.max_row_sum_deviation, report.max_sympl_residual
    );
    if let Some(last) = report.records.last() {
        for (label, [a, b]) in &last.nu_by_split {
            println!(
                "split {label}: nu = ({a:.6}, {b:.6}), beta = {:.6}",
                last.beta_by_split[label]
            );
        }
    }
    if report.violations.is_empty() {
        println!("all invariants within {tol:e}");
        Ok(())
    } else {
        for v in report.violations.iter().take(20) {
            println!("VIOLATION t = {}: {} = {:e}", v.t, v.check, v.value);
        }
        Err(CliError::Violation(format!(
            "{} check(s) exceeded tolerance {tol:e}",
            report.violations.len()
        )))
    }
}

fn pick(stms: &[Stm], sample: Option<usize>) -> Result<&Stm, CliError> {
    match sample {
        None => Ok(stms.last().expect("sources yield at least one STM")),
        Some(i) => stms
            .get(i)
            .ok_or_else(|| CliError::Config(format!("sample {i} out of range (have {})", stms.len()))),
    }
}

pub fn skeleton(cli: &Cli) -> Result<(), CliError> {
    let cfg: SkeletonConfig = require_config(cli)?;
    let resolved = resolve(cli, &cfg.stm)?;
    let stm = pick(&resolved.stms, cfg.sample)?;
    let sk = compute_skeleton(&stm.matrix)?;
    let report = verify_pairing(&sk);
    let export = io::SkeletonExport::new(&sk, report.clone(), stm.t0, stm.t1);
    let path = write_json_file(cli, "skeleton.json", &export)?;
    announce(&path);
    let lambdas: Vec<String> = sk.lambda.iter().map(|l| format!("{l:.12}")).collect();
    println!("lambda: [{}]", lambdas.join(", "));
    let spectrum: Vec<String> = sk.spectrum.iter().map(|l| format!("{l:.12e}")).collect();
    println!("spectrum: [{}]", spectrum.join(", "));
    println!("max pairing residual: {:e}", report.worst());
    Ok(())
}

#[derive(Debug, Serialize)]
struct SurfaceOutput {
    pair: usize,
    cells: [usize; 2],
    report: SurfaceReport,
    /// Caustic cell count per target plane (1-based keys); `null` means
    /// every cell was caustic.
    caustics_by_target: BTreeMap<usize, Option<usize>>,
    /// Same, for the per-node STM maps when requested.
    per_node_caustics_by_target: Option<BTreeMap<usize, Option<usize>>>,
}

pub fn surface(cli: &Cli) -> Result<(), CliError> {
    let cfg: SurfaceConfig = require_config(cli)?;
    let resolved = resolve(cli, &cfg.stm)?;
    let stm = resolved.stms.last().expect("at least one STM");
    let phi = &stm.matrix;
    let n = stm.n_pairs();
    let pair = zero_based(&[cfg.pair], n, "lamina")?[0];
    let start = resolved.run.as_ref().map(|(_, traj, _)| traj.samples[0].state.clone());
    let anchor = match (&cfg.anchor, &start) {
        (Some(a), _) => a.clone(),
        (None, Some(s)) => s.clone(),
        (None, None) => vec![0.0; 2 * n],
    };
    if anchor.len() != 2 * n {
        return Err(CliError::Config(format!("`anchor` must have {} entries", 2 * n)));
    }
    let image_anchor = match &resolved.run {
        Some((_, traj, _)) if cfg.anchor.is_none() => traj.last().state.clone(),
        _ => (phi * DVector::from_column_slice(&anchor)).as_slice().to_vec(),
    };
    let bounds = [(cfg.bounds[0][0], cfg.bounds[0][1]), (cfg.bounds[1][0], cfg.bounds[1][1])];
    let lamina = SurfaceParam::lamina(pair, bounds, cfg.cells, &anchor)?;
    let targets = match &cfg.targets {
        Some(t) => zero_based(t, n, "target")?,
        None => (0..n).collect(),
    };
    let ext = match cli.format {
        Format::Csv => "csv",
        Format::Json => "json",
    };

    let mut caustics = BTreeMap::new();
    let mut first_map = None;
    for &target in &targets {
        match density_map(&lamina, phi, &image_anchor, target) {
            Ok(map) => {
                let path = write_density(cli, &format!("density_{}.{ext}", target + 1), &map)?;
                announce(&path);
                caustics.insert(target + 1, Some(map.caustic_count()));
                first_map.get_or_insert(map);
            }
            Err(symvol::Error::AllCaustic(_)) => {
                println!("target plane {}: every cell is caustic", target + 1);
                caustics.insert(target + 1, None);
            }
            Err(e) => return Err(e.into()),
        }
    }

    let per_node = if cfg.per_node {
        let Some((sys, _, pc)) = &resolved.run else {
            return Err(CliError::Config("`per_node` needs a `propagate` STM source".into()));
        };
        let span = (pc.t_span[0], pc.t_span[1]);
        let st = settings(cli, pc.integrator);
        let mut out = BTreeMap::new();
        for &target in &targets {
            match density_map_per_node(&lamina, sys.as_ref(), span, &st, target) {
                Ok(map) => {
                    let path = write_density(cli, &format!("density_{}_per_node.{ext}", target + 1), &map)?;
                    announce(&path);
                    out.insert(target + 1, Some(map.caustic_count()));
                }
                Err(symvol::Error::AllCaustic(_)) => {
                    out.insert(target + 1, None);
                }
                Err(e) => return Err(e.into()),
            }
        }
        Some(out)
    } else {
        None
    };

    let report = surface_report(&lamina, phi, first_map.as_ref())?;
    println!(
        "area {:.12}, mapped area {:.12}, expansion in [{:.12}, {:.12}]",
        report.area, report.mapped_area, report.min_expansion, report.max_expansion
    );
    println!(
        "signed invariant {:.12}, unsigned invariant {:.12}",
        report.signed_invariant, report.unsigned_invariant
    );
    let out = SurfaceOutput {
        pair: cfg.pair,
        cells: cfg.cells,
        report,
        caustics_by_target: caustics,
        per_node_caustics_by_target: per_node,
    };
    announce(&write_json_file(cli, "surface.json", &out)?);
    Ok(())
}

fn write_density(cli: &Cli, name: &str, map: &symvol::DensityMap) -> Result<PathBuf, CliError> {
    if name.ends_with(".json") {
        return write_json_file(cli, name, map);
    }
    let (w, path) = create(cli, name)?;
    io::write_density_csv(map, w)?;
    Ok(path)
}

pub fn example(cli: &Cli, name: ExampleName) -> Result<(), CliError> {
    match name {
        ExampleName::Heisenberg => heisenberg(cli),
        ExampleName::Disc => disc(cli),
    }
}

fn optional_config<T: serde::de::DeserializeOwned + Default>(cli: &Cli) -> Result<T, CliError> {
    match &cli.config {
        Some(p) => config::load(p),
        None => Ok(T::default()),
    }
}

fn heisenberg(cli: &Cli) -> Result<(), CliError> {
    let cfg: HeisenbergConfig = optional_config(cli)?;
    let ctrl = match &cfg.control {
        HeisenbergControlConfig::Zero => HeisenbergControl::zero(),
        HeisenbergControlConfig::Bloch => HeisenbergControl::bloch(),
        HeisenbergControlConfig::Circle { turns, clockwise } => HeisenbergControl::circle(*turns, *clockwise)?,
        HeisenbergControlConfig::Constant { u, v } => HeisenbergControl::constant(*u, *v),
        HeisenbergControlConfig::Signals { u, v } => HeisenbergControl::new("signals", u.build()?, v.build()?),
        HeisenbergControlConfig::Random { modes, scale } => {
            let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
            HeisenbergControl::random(&mut rng, *modes, *scale)
        }
    };
    let mut times = cfg.snapshot_times.clone();
    if times.iter().any(|t| !(0.0..=1.0).contains(t)) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(CliError::Config("`snapshot_times` must be nondecreasing within [0, 1]".into()));
    }
    times.dedup();
    let summary = heisenberg_summary(&ctrl)?;
    announce(&write_json_file(cli, "heisenberg_summary.json", &summary)?);
    let points = surface_snapshots(&ctrl, &times, cfg.resolution)?;
    let path = match cli.format {
        Format::Csv => {
            let (w, path) = create(cli, "heisenberg_surface.csv")?;
            io::write_snapshots_csv(&points, w)?;
            path
        }
        Format::Json => write_json_file(cli, "heisenberg_surface.json", &points)?,
    };
    announce(&path);
    println!(
        "control {}: mu(1) = {:.3e}, nu(1) = {:.3e}, alpha(1) = {:.12}",
        summary.control, summary.mu1, summary.nu1, summary.alpha1
    );
    println!("f_closed = {:.12}, f_quadrature = {:.12}", summary.f_closed, summary.f_quadrature);
    if summary.alpha_consistency_residual > 1e-9 {
        println!(
            "note: integrated alpha(1) = {:.12} differs from the stated path by {:.3e}",
            summary.alpha1_integrated, summary.alpha_consistency_residual
        );
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct DiscSummary {
    control: String,
    #[serde(rename = "AD_minus_BC_max")]
    ad_minus_bc_max: f64,
    #[serde(rename = "AB_max")]
    ab_max: f64,
    assembled_mismatch: f64,
    final_state: DiscState,
    steps: usize,
}

fn disc(cli: &Cli) -> Result<(), CliError> {
    let cfg: DiscConfig = optional_config(cli)?;
    let ctrl = match &cfg.control {
        DiscControlConfig::Zero => DiscControl::zero(),
        DiscControlConfig::Compliant { u, v } => DiscControl::compliant(u.build()?, v.build()?),
        DiscControlConfig::OpenLoop { u, v, w } => DiscControl::open_loop(u.build()?, v.build()?, w.build()?),
    };
    let s = cfg.initial_state;
    let q0 = DiscState::new(s.x, s.y, s.phi, s.theta, s.psi).map_err(|e| match e {
        symvol::Error::ThetaSingularity { .. } => CliError::Config(format!("initial_state: {e}")),
        other => other.into(),
    })?;
    let traj = disc_propagate(&ctrl, &q0, (cfg.t_span[0], cfg.t_span[1]), &SampleSpec::Uniform(cfg.samples))?;
    let summary = DiscSummary {
        control: traj.control.clone(),
        ad_minus_bc_max: traj.ad_minus_bc_max,
        ab_max: traj.ab_max,
        assembled_mismatch: traj.assembled_mismatch,
        final_state: traj.samples.last().expect("disc trajectory has samples").state,
        steps: traj.stats.steps,
    };
    announce(&write_json_file(cli, "disc_summary.json", &summary)?);
    let path = match cli.format {
        Format::Csv => {
            let (w, path) = create(cli, "disc_trajectory.csv")?;
            io::write_disc_csv(&traj, w)?;
            path
        }
        Format::Json => write_json_file(cli, "disc_trajectory.json", &traj)?,
    };
    announce(&path);
    println!(
        "control {}: max |AD - BC| = {:e}, max |A|,|B| = {:e}, assembled vs direct STM = {:e}",
        summary.control, summary.ad_minus_bc_max, summary.ab_max, summary.assembled_mismatch
    );
    Ok(())
}
