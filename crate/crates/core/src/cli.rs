//! Command-line front end.
//!
//! Exit codes: 0 success, 1 validation or input error, 2 numerical failure.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::bootstrap::BootstrapScheme;
use crate::derivative::{structural_deriv_ch, DerivEstimator, DerivKind, DirectionFn, QuadDirection};
use crate::error::{at_path, Error, Result};
use crate::inference::{ChTestOptions, ChTestSession, KappaRule, TestOutcome};
use crate::io::{load_panel, save_panel};
use crate::moments::{fit_quadratic_moments, theta_direct, QuadMomentModel, SphereVec, Weight};
use crate::montecarlo::{emit_table, run_design, write_manifest, write_table, McConfig};
use crate::rng::stream_rng;
use crate::simulate::{simulate_ch_panel, DesignSpec, PanelData};
use crate::sphereopt::{grid_oracle_refined, minimize_on_sphere, IdentifiedSetEstimate, DEFAULT_STARTS, DEFAULT_TOL};

#[derive(Debug, Parser)]
#[command(name = "soboot", version, about = "Second-order bootstrap inference and the modified J-test for common CH features")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a panel from a design and write it as CSV.
    Simulate {
        /// Preset design name (D1..D5).
        #[arg(long, conflicts_with = "spec_file")]
        design: Option<String>,
        /// JSON file holding a design specification.
        #[arg(long)]
        spec_file: Option<PathBuf>,
        /// Number of aligned rows.
        #[arg(long = "t", short = 't')]
        t: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the common-feature test on a panel file.
    Test {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "T^-1/3")]
        kappa_rule: String,
        #[arg(long, default_value = "structural_ch")]
        estimator: String,
        #[arg(long, default_value_t = 200)]
        b: usize,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value = "iid")]
        scheme: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Grid resolution behind the identified-set estimate.
        #[arg(long)]
        set_resolution: Option<usize>,
    },
    /// Run a Monte Carlo study and write the rejection-rate table.
    Mc {
        /// key=value configuration file.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        design: Option<String>,
        #[arg(long)]
        sample_sizes: Option<String>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        b: Option<usize>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        kappa_rules: Option<String>,
        #[arg(long)]
        est_kinds: Option<String>,
        #[arg(long)]
        base_seed: Option<u64>,
        /// CSV output path; the table goes to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run manifest path; defaults to `<out>.manifest.json`.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Cross-check fast routines against brute-force oracles.
    Oracle {
        #[arg(long, value_enum)]
        check: OracleCheck,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Dimension for the sphere check (2 or 3).
        #[arg(long, default_value_t = 2)]
        k: usize,
        /// Perturb the fast path so every trial fails (self-test of the checker).
        #[arg(long, hide = true)]
        corrupt: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OracleCheck {
    Sphere,
    Representation,
    Derivative,
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Numerical(_) => 2,
        _ => 1,
    }
}

pub fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Simulate {
            design,
            spec_file,
            t,
            seed,
            out,
        } => cmd_simulate(design, spec_file, t, seed, out),
        Command::Test {
            data,
            kappa_rule,
            estimator,
            b,
            alpha,
            scheme,
            seed,
            set_resolution,
        } => {
            let rule: KappaRule = kappa_rule.parse()?;
            let kind: DerivKind = estimator.parse()?;
            let scheme: BootstrapScheme = scheme.parse()?;
            cmd_test(&data, rule, kind, b, alpha, scheme, seed, set_resolution)
        }
        Command::Mc {
            config,
            workers,
            design,
            sample_sizes,
            reps,
            b,
            alpha,
            kappa_rules,
            est_kinds,
            base_seed,
            out,
            manifest,
        } => {
            let mut cfg = McConfig::new(DesignSpec::preset("D1")?, vec![1000]);
            if let Some(p) = &config {
                cfg.apply_kv_text(&std::fs::read_to_string(p).map_err(at_path(p))?)?;
            }
            let overrides = [
                ("design", design),
                ("sample_sizes", sample_sizes),
                ("reps", reps.map(|v| v.to_string())),
                ("b", b.map(|v| v.to_string())),
                ("alpha", alpha.map(|v| v.to_string())),
                ("kappa_rules", kappa_rules),
                ("est_kinds", est_kinds),
                ("base_seed", base_seed.map(|v| v.to_string())),
                ("workers", workers.map(|v| v.to_string())),
            ];
            for (key, value) in overrides {
                if let Some(v) = value {
                    cfg.set(key, &v)?;
                }
            }
            cmd_mc(&cfg, out, manifest)
        }
        Command::Oracle {
            check,
            trials,
            seed,
            k,
            corrupt,
        } => {
            let report = match check {
                OracleCheck::Sphere => check_sphere(trials, seed, k, corrupt)?,
                OracleCheck::Representation => check_representation(trials, seed, corrupt)?,
                OracleCheck::Derivative => check_derivative(trials, seed, corrupt)?,
            };
            for line in &report.failures {
                println!("FAIL {line}");
            }
            println!(
                "oracle check={:?} trials={} seed={} passed={} failed={} max_err={:e}",
                check,
                trials,
                seed,
                trials - report.failures.len(),
                report.failures.len(),
                report.max_err
            );
            Ok(if report.failures.is_empty() { 0 } else { 1 })
        }
    }
}

fn cmd_simulate(
    design: Option<String>,
    spec_file: Option<PathBuf>,
    t: usize,
    seed: u64,
    out: PathBuf,
) -> Result<i32> {
    let d = match (design, spec_file) {
        (Some(name), None) => DesignSpec::preset(&name)?,
        (None, Some(path)) => {
            let text = std::fs::read_to_string(&path).map_err(at_path(&path))?;
            let d: DesignSpec = serde_json::from_str(&text)
                .map_err(|e| Error::Parse(format!("spec file {}: {e}", path.display())))?;
            d.validate()?;
            d
        }
        _ => return Err(Error::Validation("give exactly one of --design or --spec-file".into())),
    };
    let panel = simulate_ch_panel(&d, t, &mut stream_rng(seed, 0))?;
    let comments = vec![
        format!("design={}", d.name),
        format!("spec={}", serde_json::to_string(&d)?),
        format!("T={t}"),
        format!("seed={seed}"),
    ];
    for c in &comments {
        println!("{c}");
    }
    save_panel(&panel, &comments, &out)?;
    println!("wrote {} rows to {}", panel.rows(), out.display());
    Ok(0)
}

fn print_outcome(o: &TestOutcome) {
    println!("statistic      {}", o.statistic);
    println!("critical value {}", o.crit_value);
    println!("decision       {}", if o.reject { "reject" } else { "do not reject" });
    if let Some(g) = &o.minimizer {
        let c: Vec<String> = g.coords().iter().map(|v| format!("{v:.6}")).collect();
        println!("minimizer      ({})", c.join(", "));
    }
    println!("tuning         {}", serde_json::to_string(&o.tuning).unwrap_or_default());
    println!("{}", o.result_line());
}

#[allow(clippy::too_many_arguments)]
fn cmd_test(
    data: &std::path::Path,
    rule: KappaRule,
    kind: DerivKind,
    b: usize,
    alpha: f64,
    scheme: BootstrapScheme,
    seed: u64,
    set_resolution: Option<usize>,
) -> Result<i32> {
    let panel = load_panel(data)?;
    println!("data={}", data.display());
    println!("kappa_rule={rule}");
    println!("estimator={kind}");
    println!("b={b}");
    println!("alpha={alpha}");
    println!("scheme={scheme}");
    println!("seed={seed}");
    if let Some(r) = set_resolution {
        println!("set_resolution={r}");
    }
    let mut starts = DEFAULT_STARTS;
    for attempt in 0..3 {
        let opts = ChTestOptions {
            n_starts: starts,
            set_resolution,
            ..Default::default()
        };
        let session = ChTestSession::new(&panel, b, scheme, &mut stream_rng(seed, 0), opts)?;
        let outcome = session.outcome(rule, kind, alpha)?;
        if outcome.tuning.converged {
            print_outcome(&outcome);
            return Ok(0);
        }
        if attempt == 2 {
            print_outcome(&outcome);
            return Err(Error::Numerical(format!(
                "sphere minimization did not converge with {starts} starts"
            )));
        }
        starts *= 4;
    }
    unreachable!()
}

fn cmd_mc(cfg: &McConfig, out: Option<PathBuf>, manifest: Option<PathBuf>) -> Result<i32> {
    cfg.validate()?;
    let table = run_design(cfg)?;
    match &out {
        Some(path) => {
            for line in cfg.to_kv_lines() {
                println!("# {line}");
            }
            emit_table(&table, Some(cfg), path)?;
            let mpath = manifest.unwrap_or_else(|| {
                let mut p = path.clone().into_os_string();
                p.push(".manifest.json");
                PathBuf::from(p)
            });
            write_manifest(cfg, Some(path), &mpath)?;
            println!("wrote {} rows to {}", table.rows.len(), path.display());
        }
        None => {
            write_table(&table, &cfg.to_kv_lines(), std::io::stdout().lock())?;
            if let Some(m) = manifest {
                write_manifest(cfg, None, &m)?;
            }
        }
    }
    Ok(0)
}

/// Outcome of an oracle cross-check.
#[derive(Debug, Clone, Default)]
pub struct OracleReport {
    pub failures: Vec<String>,
    pub max_err: f64,
}

fn random_model<R: Rng>(k: usize, m: usize, rng: &mut R) -> QuadMomentModel {
    let mut d = vec![0.0; m * k * k];
    for j in 0..m {
        for a in 0..k {
            for b in a..k {
                let v: f64 = rng.sample(StandardNormal);
                d[j * k * k + a * k + b] = v;
                d[j * k * k + b * k + a] = v;
            }
        }
    }
    QuadMomentModel::from_deltas(k, m, d, 100, Weight::Identity).expect("valid random model")
}

fn random_unit<R: Rng>(k: usize, rng: &mut R) -> SphereVec {
    let v: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
    SphereVec::normalize(v).expect("nonzero draw")
}

fn fmt_vec(v: &[f64]) -> String {
    let c: Vec<String> = v.iter().map(|x| format!("{x:.8}")).collect();
    format!("({})", c.join(", "))
}

/// Base grid resolution of the sphere oracle.
pub fn oracle_resolution(k: usize) -> usize {
    if k == 2 {
        100_000
    } else {
        200_000
    }
}

/// `minimize_on_sphere` against the zoom-refined grid oracle, relative value
/// error `≤ 1e-6`.
pub fn check_sphere(trials: usize, seed: u64, k: usize, corrupt: bool) -> Result<OracleReport> {
    if !(k == 2 || k == 3) {
        return Err(Error::Validation(format!("sphere check supports k in {{2, 3}}, got {k}")));
    }
    let mut report = OracleReport::default();
    let mut rng = stream_rng(seed, 0);
    for trial in 0..trials {
        let model = random_model(k, k, &mut rng);
        let mut fast = minimize_on_sphere(&model, DEFAULT_STARTS, DEFAULT_TOL);
        if corrupt {
            fast.value += 1e-3 * (1.0 + fast.value);
        }
        let grid = grid_oracle_refined(&model, oracle_resolution(k), 8)?;
        let err = (fast.value - grid.value).abs() / grid.value.abs().max(1e-12);
        report.max_err = report.max_err.max(err);
        if err > 1e-6 {
            report.failures.push(format!(
                "trial {trial}: value {} vs grid {} at gamma {} (rel err {err:e})",
                fast.value,
                grid.value,
                fmt_vec(fast.minimizer.coords())
            ));
        }
    }
    Ok(report)
}

/// Quadratic representation against direct summation, `≤ 1e-10`.
pub fn check_representation(trials: usize, seed: u64, corrupt: bool) -> Result<OracleReport> {
    let mut report = OracleReport::default();
    let mut rng = stream_rng(seed, 1);
    for trial in 0..trials {
        let k = 2 + trial % 3;
        let t = 50;
        let z: Vec<f64> = (0..t * k).map(|_| rng.sample::<f64, _>(StandardNormal).powi(2)).collect();
        let y: Vec<f64> = (0..t * k).map(|_| rng.sample(StandardNormal)).collect();
        let panel = PanelData::new(z, k, y, k)?;
        let mut model = fit_quadratic_moments(&panel, None)?;
        if corrupt {
            let bump = vec![1e-3; model.g_mat().len()];
            model = model.perturbed(&bump, 1.0)?;
        }
        for _ in 0..100 {
            let g = random_unit(k, &mut rng);
            let fast = model.eval_theta(&g)?;
            let direct = theta_direct(&panel, g.coords());
            let err = fast
                .iter()
                .zip(&direct)
                .map(|(a, b)| (a - b).abs() / b.abs().max(1.0))
                .fold(0.0, f64::max);
            report.max_err = report.max_err.max(err);
            if err > 1e-10 {
                report.failures.push(format!(
                    "trial {trial}: theta mismatch {err:e} at gamma {}",
                    fmt_vec(g.coords())
                ));
                break;
            }
        }
    }
    Ok(report)
}

/// Brute-force value of the structural estimator for `k = 2`.
///
/// `v = √s (cos a, sin a)` is scanned on `n_ang` half-circle angles times
/// `n_rad + 1` equally spaced levels of `s ∈ [0, r²]` for every `γ`; the best
/// cells are then zoomed with successively finer `(a, s)` grids. Only
/// function values are used.
pub fn brute_force_structural<D: DirectionFn + ?Sized>(
    model: &QuadMomentModel,
    gammas: &[SphereVec],
    radius: f64,
    h: &D,
    n_ang: usize,
    n_rad: usize,
) -> f64 {
    let m = model.m();
    let s_max = radius * radius;
    let mut q = vec![0.0; m];
    let mut r = vec![0.0; m];
    let value = |hg: &[f64], a: f64, s: f64, q: &mut [f64], r: &mut [f64]| -> f64 {
        model.theta_into(&[a.cos(), a.sin()], q);
        for j in 0..m {
            r[j] = hg[j] + s * q[j];
        }
        model.weight().quad(r)
    };
    let da = std::f64::consts::PI / n_ang as f64;
    let ds = s_max / n_rad as f64;
    // (value, gamma, angle, s) of the coarse local minima in angle, best 8 per gamma
    let mut cells: Vec<(f64, usize, f64, f64)> = Vec::new();
    let hs: Vec<Vec<f64>> = gammas.iter().map(|g| h.eval(g)).collect();
    for (gi, hg) in hs.iter().enumerate() {
        let profile: Vec<(f64, f64)> = (0..n_ang)
            .map(|ia| {
                let a = da * ia as f64;
                (0..=n_rad)
                    .map(|ir| {
                        let s = ds * ir as f64;
                        (value(hg, a, s, &mut q, &mut r), s)
                    })
                    .fold((f64::INFINITY, 0.0), |b, c| if c.0 < b.0 { c } else { b })
            })
            .collect();
        let mut local: Vec<(f64, usize, f64, f64)> = (0..n_ang)
            .filter(|&ia| {
                let v = profile[ia].0;
                v <= profile[(ia + n_ang - 1) % n_ang].0 && v <= profile[(ia + 1) % n_ang].0
            })
            .map(|ia| (profile[ia].0, gi, da * ia as f64, profile[ia].1))
            .collect();
        local.sort_by(|x, y| x.0.total_cmp(&y.0));
        cells.extend(local.into_iter().take(8));
    }
    let mut overall = f64::INFINITY;
    for (mut fv, gi, mut a, mut s) in cells {
        let (mut wa, mut ws) = (2.0 * da, 2.0 * ds);
        let mut rounds = 0;
        while (wa > 1e-13 || ws > 1e-15 * s_max) && rounds < 10_000 {
            rounds += 1;
            let (mut ba, mut bs) = (a, s);
            for i in -5..=5 {
                for j in -5..=5 {
                    let aa = a + wa * i as f64 / 5.0;
                    let ss = (s + ws * j as f64 / 5.0).clamp(0.0, s_max);
                    let v = value(&hs[gi], aa, ss, &mut q, &mut r);
                    if v < fv {
                        fv = v;
                        ba = aa;
                        bs = ss;
                    }
                }
            }
            if ba == a && bs == s {
                wa *= 0.4;
                ws *= 0.4;
            }
            a = ba;
            s = bs;
        }
        overall = overall.min(fv);
    }
    overall
}

/// Structural estimator against the `(γ, v)` grid on `k = 2` toys, relative
/// error `≤ 1e-4` with the denominator floored at `1e-3 ‖h(γ)‖²`.
pub fn check_derivative(trials: usize, seed: u64, corrupt: bool) -> Result<OracleReport> {
    let mut report = OracleReport::default();
    let mut rng = stream_rng(seed, 2);
    for trial in 0..trials {
        let model = random_model(2, 2, &mut rng);
        let gammas: Vec<SphereVec> = (0..3).map(|_| random_unit(2, &mut rng)).collect();
        let set = IdentifiedSetEstimate::from_points(&gammas, 0.01, 0.0)?;
        let hc: Vec<f64> = (0..8).map(|_| rng.sample(StandardNormal)).collect();
        let h = QuadDirection::new(2, 2, hc)?;
        let radius = 0.3 + 1.7 * rng.random::<f64>();
        let est = DerivEstimator::structural(0.1)?.with_radius(radius)?;
        let mut fast = structural_deriv_ch(&model, &set, &est, &h, 4)?;
        if corrupt {
            fast = fast * 1.01 + 1e-3;
        }
        let brute = brute_force_structural(&model, &gammas, radius, &h, 720, 400);
        let floor = gammas.iter().map(|g| model.weight().quad(&h.eval(g))).fold(f64::INFINITY, f64::min);
        let err = (fast - brute).abs() / brute.max(1e-3 * floor).max(1e-300);
        report.max_err = report.max_err.max(err);
        if err > 1e-4 {
            report.failures.push(format!(
                "trial {trial}: structural {fast} vs grid {brute} (rel err {err:e}) at gamma {}",
                fmt_vec(gammas[0].coords())
            ));
        }
    }
    Ok(report)
}
