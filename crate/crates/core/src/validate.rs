//! Acceptance suite. Every criterion writes its data into the output
//! directory and returns a pass/fail verdict with the measured numbers.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::dsmc::{
    reduce_ou_reservoirs, replica_rng, run_dsmc, run_replica, DsmcConfig, Estimate, InitialLaw,
    Mixture, OuReservoir, ParticleEnsemble, ReservoirSpec,
};
use crate::entropy::{bgk_ness, ledger, ledger_series, thermal_trajectory, DensityGrid, JumpReservoir};
use crate::error::{Error, Result};
use crate::evolve::{self, richardson, RunOptions};
use crate::io::{real, write_csv, write_json, write_real_csv};
use crate::kernel::{make_kernel, AngularKernel, KernelKind};
use crate::metrics::{gtw_distance, moments, radial_w2, SpeedLaw};
use crate::runner::ledger_rows;
use crate::spectral::{charfn_maxwellian, charfn_mixture, phi_map, RadialCharFn, RadialDensity, RadialGrid};
use crate::stats::ols;
use crate::steady::{a_priori_bound, solve_ness, NessSolver, DISTANCE_NOISE_FLOOR};

const T1: f64 = 0.2;
const T2: f64 = 7.0 / 15.0;
const GAMMA: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Criterion {
    pub id: u32,
    pub name: String,
    pub passed: bool,
    pub measured: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub criteria: Vec<Criterion>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.criteria.iter().all(|c| c.passed)
    }

    pub fn table(&self) -> String {
        let mut s = String::from(" id  result  criterion\n");
        for c in &self.criteria {
            s.push_str(&format!(
                "{:>3}  {:<6}  {}\n",
                c.id,
                if c.passed { "PASS" } else { "FAIL" },
                c.name
            ));
        }
        s
    }
}

/// Scale and seed of the stochastic parts.
#[derive(Debug, Clone, Copy)]
pub struct SuiteSettings {
    pub seed: u64,
    pub particles: usize,
    pub replicas: usize,
}

impl SuiteSettings {
    pub fn from_config(cfg: &RunConfig) -> Self {
        Self {
            seed: cfg.seed,
            particles: cfg.validate.dsmc_particles,
            replicas: cfg.validate.dsmc_replicas,
        }
    }
}

fn iso() -> Result<AngularKernel> {
    make_kernel(KernelKind::Isotropic, 64)
}

fn mixture_r() -> Result<RadialCharFn> {
    charfn_mixture(RadialGrid::default(), &[0.5, 0.5], &[T1, T2])
}

fn verdict(id: u32, name: &str, passed: bool, measured: Value) -> Criterion {
    Criterion {
        id,
        name: name.to_string(),
        passed,
        measured,
    }
}

pub fn maxwellian_fixed_point(_: &SuiteSettings, _: &Path) -> Result<Criterion> {
    let m = charfn_maxwellian(RadialGrid::default(), 1.0 / 3.0)?;
    let rep = solve_ness(&m, &iso()?, GAMMA, 1e-8, 50)?;
    let sup = rep.phi_inf.sup_distance(&m)?;
    Ok(verdict(
        1,
        "Maxwellian reservoir is the fixed point after one iteration",
        rep.iterations == 1 && rep.residual <= 1e-8 && sup <= 1e-8,
        json!({ "iterations": rep.iterations, "residual": rep.residual, "sup_distance": sup }),
    ))
}

/// Mixture of three Maxwellians with random weights and temperatures,
/// rescaled to unit energy.
fn random_unit_energy_law<R: Rng>(rng: &mut R, grid: RadialGrid) -> Result<RadialCharFn> {
    let mut w: Vec<f64> = (0..3).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    let t: Vec<f64> = (0..3).map(|_| rng.random_range(0.1..1.0)).collect();
    let energy: f64 = 3.0 * w.iter().zip(&t).map(|(a, b)| a * b).sum::<f64>();
    let t: Vec<f64> = t.iter().map(|x| x / energy).collect();
    charfn_mixture(grid, &w, &t)
}

pub fn contraction_certificate(s: &SuiteSettings, out: &Path) -> Result<Criterion> {
    let grid = RadialGrid::default();
    let r = mixture_r()?;
    let mut rng = replica_rng(s.seed, 1002);
    let cases = [
        (iso()?, 0.5, "isotropic"),
        (make_kernel(KernelKind::Linear { a: 0.5 }, 64)?, 0.6, "linear a=0.5"),
    ];
    let mut rows = Vec::new();
    let mut passed = true;
    let mut measured = BTreeMap::new();
    for (ci, (k, gamma, label)) in cases.iter().enumerate() {
        let lambda = k.contraction_factor(*gamma)?;
        passed &= (lambda - 0.75).abs() < 1e-12;
        let mut worst = 0.0f64;
        for p in 0..20 {
            let f = random_unit_energy_law(&mut rng, grid)?;
            let g = random_unit_energy_law(&mut rng, grid)?;
            let before = gtw_distance(&f, &g)?;
            let after = gtw_distance(&phi_map(&f, &r, k, *gamma)?, &phi_map(&g, &r, k, *gamma)?)?;
            let ratio = after / before;
            worst = worst.max(ratio);
            rows.push(vec![ci.to_string(), p.to_string(), real(before), real(after), real(ratio)]);
        }
        passed &= worst <= 0.75 + 1e-6;
        measured.insert(label.to_string(), json!({ "lambda": lambda, "max_ratio": worst }));
    }
    write_csv(out.join("c02_ratios.csv"), &["case", "pair", "d_before", "d_after", "ratio"], &rows)?;
    Ok(verdict(
        2,
        "GTW contraction of the fixed-point map by at most 0.75 over 20 random pairs",
        passed,
        json!(measured),
    ))
}

pub fn geometric_convergence(_: &SuiteSettings, out: &Path) -> Result<Criterion> {
    let r = mixture_r()?;
    let k = iso()?;
    let proxy = solve_ness(&r, &k, GAMMA, 1e-13, 1000)?;
    let rep = NessSolver::new(&r, &k, GAMMA).tol(1e-8).keep_iterates(true).solve()?;
    let lambda = rep.lambda_used;
    let d1 = rep.history[0];
    let mut passed = true;
    let mut max_ratio = 0.0f64;
    let mut rows = Vec::new();
    for (n, f) in rep.iterates.iter().enumerate().skip(1) {
        let d = rep.history[n - 1];
        let ratio = if n >= 2 { d / rep.history[n - 2] } else { f64::NAN };
        if n >= 2 && d > DISTANCE_NOISE_FLOOR && rep.history[n - 2] > DISTANCE_NOISE_FLOOR {
            max_ratio = max_ratio.max(ratio);
            passed &= ratio <= lambda;
        }
        let to_proxy = gtw_distance(f, &proxy.phi_inf)?;
        let bound = a_priori_bound(lambda, d1, n)?;
        passed &= to_proxy <= bound + proxy.certified_error;
        rows.push(vec![n as f64, d, ratio, to_proxy, bound]);
    }
    write_real_csv(
        out.join("c03_iterations.csv"),
        &["n", "d_n", "ratio", "d_to_limit", "a_priori_bound"],
        &rows,
    )?;
    Ok(verdict(
        3,
        "successive ratios at most lambda and distances within the a-priori bound",
        passed,
        json!({ "iterations": rep.iterations, "lambda": lambda, "max_ratio": max_ratio, "limit_error": proxy.certified_error }),
    ))
}

pub fn ness_moments(s: &SuiteSettings, out: &Path) -> Result<Criterion> {
    let r = mixture_r()?;
    let rep = solve_ness(&r, &iso()?, GAMMA, 1e-10, 500)?;
    let spectral = moments(&rep.phi_inf)?;
    let cfg = DsmcConfig {
        n_particles: s.particles,
        replicas: s.replicas,
        seed: s.seed,
        t_end: 60.0,
        record_every: 1.0,
        ..DsmcConfig::default()
    };
    let run = run_dsmc(&cfg)?;
    let rows: Vec<Vec<f64>> = run
        .replicas
        .iter()
        .map(|r| vec![r.replica as f64, *r.m2.last().unwrap(), *r.m4.last().unwrap()])
        .collect();
    write_real_csv(out.join("c04_terminal_moments.csv"), &["replica", "m2", "m4"], &rows)?;
    let (m2, m4) = (run.summary.terminal_m2, run.summary.terminal_m4);
    let passed = (spectral.m2 - 1.0).abs() <= 1e-5 && m2.agrees_with(1.0, 3.0) && m4.agrees_with(spectral.m4, 3.0);
    Ok(verdict(
        4,
        "steady-state moments: spectral m2 = 1, particle m2 and m4 agree within 3 SE",
        passed,
        json!({ "spectral": spectral, "dsmc_m2": m2, "dsmc_m4": m4 }),
    ))
}

pub fn exponential_rate(_: &SuiteSettings, out: &Path) -> Result<Criterion> {
    let r = mixture_r()?;
    let k = iso()?;
    let ness = solve_ness(&r, &k, GAMMA, 1e-13, 1000)?;
    let traj = evolve::run(&r, &r, &k, GAMMA, &RunOptions::default(), &ness.phi_inf)?;
    let rows: Vec<Vec<f64>> = traj.gtw_series().into_iter().map(|(t, d)| vec![t, d]).collect();
    write_real_csv(out.join("c05_gtw.csv"), &["t", "gtw_to_ness"], &rows)?;
    let lambda1 = k.gtw_decay_rate(GAMMA)?;
    let fit = traj.gtw_fit().ok_or_else(|| Error::domain("no samples in the fit window"))?;
    let rate = -fit.slope;
    Ok(verdict(
        5,
        "GTW distance to the steady state decays at least at rate lambda1 = 0.25",
        rate >= 0.98 * lambda1,
        json!({ "fitted_rate": rate, "slope_se": fit.slope_se, "points": fit.points, "lambda1": lambda1 }),
    ))
}

pub fn moment_relaxation(s: &SuiteSettings, out: &Path) -> Result<Criterion> {
    let r = mixture_r()?;
    let k = iso()?;
    let rate = k.moment_decay_rate(GAMMA)?;
    let hot = charfn_maxwellian(RadialGrid::default(), 0.5)?;
    let traj = |dt: f64| {
        let opts = RunOptions {
            dt,
            t_end: 10.0,
            record_every: 0.5,
            snapshot_every: None,
        };
        evolve::run(&hot, &r, &k, GAMMA, &opts, &r)
    };
    let (coarse, fine) = (traj(0.02)?, traj(0.01)?);
    let extrapolated = richardson(&coarse.m2_series(), &fine.m2_series());
    let mut worst = 0.0f64;
    let mut rows = Vec::new();
    for (t, y) in &extrapolated {
        let exact = 0.5 * (-rate * t).exp();
        let rel = (y - exact).abs() / exact;
        worst = worst.max(rel);
        rows.push(vec![*t, *y, exact, rel]);
    }
    write_real_csv(
        out.join("c06_energy.csv"),
        &["t", "m2_deviation_extrapolated", "exact", "relative_error"],
        &rows,
    )?;

    let cfg = DsmcConfig {
        n_particles: s.particles,
        replicas: s.replicas,
        seed: s.seed.wrapping_add(6),
        t_end: 10.0,
        record_every: 0.5,
        initial: InitialLaw {
            shift: [1.0, 0.0, 0.0],
            ..InitialLaw::default()
        },
        ..DsmcConfig::default()
    };
    let run = run_dsmc(&cfg)?;
    let mut rows = Vec::new();
    for (i, t) in run.replicas[0].times.iter().enumerate() {
        let v1: Vec<f64> = run.replicas.iter().map(|r| r.mean_velocity[i][0]).collect();
        let e = Estimate::of(&v1);
        rows.push(vec![*t, e.mean, e.se]);
    }
    write_real_csv(out.join("c06_mean_velocity.csv"), &["t", "v1_mean", "v1_se"], &rows)?;
    let v1_rate = run.summary.fitted_rate_v1.ok_or_else(|| Error::domain("mean velocity fit failed"))?;
    let passed = worst <= 1e-4 && (v1_rate.mean - rate).abs() <= 0.05 * rate;
    Ok(verdict(
        6,
        "energy deviation follows 0.5 exp(-0.25 t); particle mean velocity decays at 0.25",
        passed,
        json!({ "max_relative_error": worst, "dsmc_v1_rate": v1_rate, "theory_rate": rate }),
    ))
}

pub fn ou_reservoirs(s: &SuiteSettings, out: &Path) -> Result<Criterion> {
    let res = vec![
        OuReservoir {
            eta: 1.0,
            temperature: 0.2,
        },
        OuReservoir {
            eta: 1.0,
            temperature: 0.6,
        },
    ];
    let (eta, t) = reduce_ou_reservoirs(&res)?;
    let reduced_ok = eta == 2.0 && (t - 0.4).abs() < 1e-15;
    let spec = ReservoirSpec::Ou {
        reservoirs: res,
        collisions: true,
    };
    let base = DsmcConfig {
        n_particles: s.particles,
        replicas: s.replicas,
        seed: s.seed.wrapping_add(7),
        dt: 0.01,
        t_end: 1.0,
        record_every: 0.25,
        reservoir: spec,
        initial: InitialLaw::maxwellian(0.1),
        snapshot_times: vec![0.0, 0.25, 0.5, 0.75, 1.0],
        ..DsmcConfig::default()
    };

    // Energy gap: per replica, g(t) - e^{-2ηt} g(0) must vanish in mean.
    let run = run_dsmc(&base)?;
    let mut gap_ok = true;
    let mut rows = Vec::new();
    for (i, time) in run.replicas[0].times.iter().enumerate() {
        let resid: Vec<f64> = run
            .replicas
            .iter()
            .map(|r| (3.0 * t - r.m2[i]) - (-2.0 * eta * time).exp() * (3.0 * t - r.m2[0]))
            .collect();
        let e = Estimate::of(&resid);
        gap_ok &= i == 0 || e.agrees_with(0.0, 3.0);
        rows.push(vec![*time, e.mean, e.se]);
    }
    write_real_csv(out.join("c07_energy_gap.csv"), &["t", "residual_mean", "residual_se"], &rows)?;

    // Coupled pair: same seed, different initial temperature.
    let other = DsmcConfig {
        initial: InitialLaw::maxwellian(1.0),
        ..base.clone()
    };
    let mut rates = Vec::new();
    let mut rows = Vec::new();
    for rep in 0..s.replicas {
        let a = run_replica(&base, rep)?;
        let b = run_replica(&other, rep)?;
        let (mut ts, mut logs) = (Vec::new(), Vec::new());
        for (sa, sb) in a.snapshots.iter().zip(&b.snapshots) {
            let w = radial_w2(SpeedLaw::Samples(&sa.speeds), SpeedLaw::Samples(&sb.speeds))?;
            ts.push(sa.t);
            logs.push(w.ln());
            rows.push(vec![rep as f64, sa.t, w]);
        }
        let fit = ols(&ts, &logs).ok_or_else(|| Error::domain("W2 fit failed"))?;
        rates.push(-fit.slope);
    }
    write_real_csv(out.join("c07_w2.csv"), &["replica", "t", "w2"], &rows)?;
    let w2_rate = Estimate::of(&rates);
    let w2_ok = w2_rate.mean >= eta - 3.0 * w2_rate.se;
    Ok(verdict(
        7,
        "thermostat energy gap decays as exp(-2 eta t); coupled W2 contracts at rate eta; reduction (2, 0.4)",
        reduced_ok && gap_ok && w2_ok,
        json!({ "reduced": [eta, t], "energy_gap_ok": gap_ok, "w2_rate": w2_rate, "eta": eta }),
    ))
}

pub fn w2_sanity(s: &SuiteSettings, _: &Path) -> Result<Criterion> {
    let (ta, tb) = (0.2, 0.6);
    let n = 1_000_000;
    let a = ParticleEnsemble::sample(n, &Mixture::maxwellian(ta), replica_rng(s.seed, 1008))?.speeds();
    let b = ParticleEnsemble::sample(n, &Mixture::maxwellian(tb), replica_rng(s.seed, 1009))?.speeds();
    let exact = 3f64.sqrt() * (ta.sqrt() - tb.sqrt()).abs();
    let sampled = radial_w2(SpeedLaw::Samples(&a), SpeedLaw::Samples(&b))?;
    let da = RadialDensity::maxwellian(ta, 8.0 * tb.sqrt(), 4097)?;
    let db = RadialDensity::maxwellian(tb, 8.0 * tb.sqrt(), 4097)?;
    let density = radial_w2(SpeedLaw::Density(&da), SpeedLaw::Density(&db))?;
    let passed = (sampled - exact).abs() <= 0.01 * exact && (density - exact).abs() <= 0.01 * exact;
    Ok(verdict(
        8,
        "radial W2 between Maxwellians equals sqrt(3)|sqrt(T) - sqrt(T')|",
        passed,
        json!({ "exact": exact, "samples": sampled, "densities": density }),
    ))
}

fn two_jump_reservoirs() -> Vec<JumpReservoir> {
    vec![
        JumpReservoir {
            eta: 1.0,
            temperature: 0.2,
        },
        JumpReservoir {
            eta: 1.0,
            temperature: 0.6,
        },
    ]
}

pub fn entropy_at_ness(_: &SuiteSettings, out: &Path) -> Result<Criterion> {
    let res = two_jump_reservoirs();
    let ness = bgk_ness(&iso()?, &res, RadialGrid::default(), 1e-12, 200)?;
    let dens = DensityGrid::for_run(&res, 1.2, 2049);
    let f = dens.density(&ness.phi)?;
    let l = ledger(&f, &f, 0.05, &res)?;
    write_json(out.join("c09_ledger.json"), &l)?;
    let flux_sum: f64 = l.j_alpha.iter().sum();
    let hot_cold = (res[0].beta() - res[1].beta()) * l.j_alpha[0];
    let passed = flux_sum.abs() <= 1e-6
        && (l.sigma_total - hot_cold).abs() <= 1e-6
        && l.sigma_total > 0.0
        && (l.j_alpha[0] - 0.3).abs() <= 1e-6
        && l.sigma_alpha.iter().all(|&x| x >= 0.0)
        && l.sigma_b_residual >= -1e-4;
    Ok(verdict(
        9,
        "steady-state entropy ledger: balanced fluxes, heat flows hot to cold, all terms nonnegative",
        passed,
        json!({ "flux_sum": flux_sum, "sigma_total": l.sigma_total, "hot_cold": hot_cold, "j1": l.j_alpha[0], "sigma_alpha": l.sigma_alpha, "sigma_b_residual": l.sigma_b_residual }),
    ))
}

pub fn non_monotone_entropy(_: &SuiteSettings, out: &Path) -> Result<Criterion> {
    let res = two_jump_reservoirs();
    let t0 = 1.0;
    let phi0 = charfn_maxwellian(RadialGrid::default(), t0)?;
    let traj = thermal_trajectory(&phi0, &iso()?, &res, 0.02, 2.0, 0.1)?;
    let rows = ledger_series(&traj, &res, DensityGrid::for_run(&res, 3.0 * t0, 2049))?;
    let (header, data) = ledger_rows(&rows);
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_real_csv(out.join("c10_ledger.csv"), &header, &data)?;
    let first_negative = rows.iter().find(|r| r.ledger.s_dot < 0.0).map(|r| r.t);
    let min_total = rows.iter().map(|r| r.ledger.sigma_total).fold(f64::INFINITY, f64::min);
    Ok(verdict(
        10,
        "entropy decreases at some time along a run from a hot Maxwellian",
        first_negative.is_some(),
        json!({ "initial_temperature": t0, "first_negative_s_dot_at": first_negative, "min_sigma_total": min_total }),
    ))
}

type CriterionFn = fn(&SuiteSettings, &Path) -> Result<Criterion>;

/// Criteria 1 to 10, in order.
pub const CRITERIA: [CriterionFn; 10] = [
    maxwellian_fixed_point,
    contraction_certificate,
    geometric_convergence,
    ness_moments,
    exponential_rate,
    moment_relaxation,
    ou_reservoirs,
    w2_sanity,
    entropy_at_ness,
    non_monotone_entropy,
];

/// Run criteria 1 to 10 into `out`, one callback per finished criterion.
pub fn run_criteria<F: FnMut(&Criterion)>(s: &SuiteSettings, out: &Path, mut each: F) -> Result<Vec<Criterion>> {
    fs::create_dir_all(out)?;
    let mut all = Vec::new();
    for c in CRITERIA {
        let result = c(s, out)?;
        each(&result);
        all.push(result);
    }
    write_json(out.join("criteria.json"), &all)?;
    Ok(all)
}

/// Files directly inside `dir` with their contents, sorted by name.
pub fn snapshot_dir(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>> {
    let mut files = BTreeMap::new();
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        if entry.file_type()?.is_file() {
            files.insert(entry.file_name().to_string_lossy().into_owned(), fs::read(entry.path())?);
        }
    }
    Ok(files)
}

/// Criterion 11: a second run with the same seed writes byte-identical
/// files.
pub fn determinism(s: &SuiteSettings, first: &Path, rerun: &Path) -> Result<Criterion> {
    run_criteria(s, rerun, |_| {})?;
    let a = snapshot_dir(first)?;
    let b = snapshot_dir(rerun)?;
    let differing: Vec<&String> = a
        .iter()
        .filter(|(name, bytes)| b.get(*name) != Some(bytes))
        .map(|(name, _)| name)
        .chain(b.keys().filter(|name| !a.contains_key(*name)))
        .collect();
    Ok(verdict(
        11,
        "repeated suite with a fixed seed writes byte-identical files",
        differing.is_empty(),
        json!({ "files_compared": a.len(), "differing": differing }),
    ))
}

/// The full suite: criteria 1 to 10 into `out/criteria`, and, if enabled,
/// the determinism rerun into `out/rerun`. Writes `out/validate.json`.
pub fn run_suite(cfg: &RunConfig, out: &Path) -> Result<SuiteReport> {
    let s = SuiteSettings::from_config(cfg);
    let first = out.join("criteria");
    let mut criteria = run_criteria(&s, &first, |c| {
        println!("{:>3}  {:<6}  {}", c.id, if c.passed { "PASS" } else { "FAIL" }, c.name);
    })?;
    if cfg.validate.check_determinism {
        let c = determinism(&s, &first, &out.join("rerun"))?;
        println!("{:>3}  {:<6}  {}", c.id, if c.passed { "PASS" } else { "FAIL" }, c.name);
        criteria.push(c);
    }
    let report = SuiteReport { seed: s.seed, criteria };
    write_json(out.join("validate.json"), &report)?;
    Ok(report)
}
