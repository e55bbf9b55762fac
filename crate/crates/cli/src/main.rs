use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use hamforge::delta::{
    delta_expr, envelope_exponent, fit_lower_envelope, octave_correlation, strength_sweep, verify_delta, write_strength_csv, FLOAT_TOL,
};
use hamforge::filter::{self, nearest_neighbour_expr, resource_estimate, FilterExpr};
use hamforge::io::{read_expr, read_profile, write_convergence_csv, write_json};
use hamforge::lp::{self, build_basis, compile, BasisOptions, CompileOutcome, CostModel, CouplingProfile};
use hamforge::pulse::{flatten, materialize, realized_filter};
use hamforge::sim::{
    adiabatic_run, build_hamiltonian, expm_hermitian, filtered_propagator, heisenberg_convergence, operator_norm,
    trotter_error_report, verify_power_law, AdiabaticConfig, HeisenbergTarget, TrotterConfig, TrotterMode, TrotterSystem,
};
use hamforge::{Error, Precision};

const EXIT_INPUT: u8 = 2;
const EXIT_VERIFY: u8 = 3;
const EXIT_INFEASIBLE: u8 = 4;
const EXIT_BOUND: u8 = 5;

/// Pulse-sequence filters for translation-invariant spin chains.
#[derive(Parser)]
#[command(name = "hamforge", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate filter expressions.
    #[command(subcommand)]
    Filter(FilterCmd),
    /// Build (and optionally verify) a Kronecker-delta recipe.
    Delta(DeltaArgs),
    /// Sweep s(Q) and fit its lower envelope.
    Strength(StrengthArgs),
    /// Compile a target coupling profile into filter durations.
    Compile(CompileArgs),
    /// Export materialized schedules.
    #[command(subcommand)]
    Schedule(ScheduleCmd),
    /// Small-N simulator checks.
    #[command(subcommand)]
    Sim(SimCmd),
}

#[derive(Subcommand)]
enum FilterCmd {
    /// Print f(d) for d = 1..n-1.
    Eval {
        expr: PathBuf,
        #[arg(long)]
        n: usize,
        /// Print the unnormalized sums instead of duration-normalized values.
        #[arg(long)]
        raw: bool,
        #[arg(long)]
        csv: bool,
    },
    /// Pulse layers, spin flips and segment count of the materialized schedule.
    Resources {
        expr: PathBuf,
        #[arg(long)]
        n: usize,
    },
}

#[derive(Args)]
struct DeltaArgs {
    #[arg(long)]
    d: usize,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = -1, allow_negative_numbers = true)]
    sign: i8,
    #[arg(long)]
    verify: bool,
    /// Write the recipe here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StrengthArgs {
    #[arg(long)]
    n: u64,
    #[arg(long)]
    qmin: u64,
    #[arg(long)]
    qmax: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, default_value_t = 2)]
    bins_per_octave: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum CostArg {
    Unit,
    Layers,
}

#[derive(Args)]
struct CompileArgs {
    #[arg(long)]
    target: PathBuf,
    #[arg(long)]
    native: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Extra concatenation levels of primitive products.
    #[arg(long, default_value_t = 1)]
    depth: usize,
    #[arg(long)]
    deltas: bool,
    /// Include power-law programs with up to this many levels.
    #[arg(long)]
    power_law: Option<usize>,
    #[arg(long, default_value_t = 4096)]
    max_size: usize,
    #[arg(long, value_enum, default_value_t = CostArg::Unit)]
    cost: CostArg,
    #[arg(long)]
    lambda_only: bool,
}

#[derive(Subcommand)]
enum ScheduleCmd {
    /// Write the flip list of a filter as CSV (time,qubit) or JSON.
    Export {
        expr: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Subcommand)]
enum SimCmd {
    /// Filtered propagator against exp(-i H_eff T).
    Verify {
        #[arg(long)]
        n: usize,
        /// Defaults to the nearest-neighbour filter.
        #[arg(long)]
        filter: Option<PathBuf>,
        /// Defaults to all-to-all unit Ising couplings.
        #[arg(long)]
        native: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Second-order splitting error against the bound.
    Trotter {
        #[arg(long, default_value = "both")]
        mode: String,
        #[arg(long, value_delimiter = ',', default_value = "4,8,16,32")]
        r: Vec<usize>,
        #[arg(long, default_value_t = 4)]
        n: usize,
        #[arg(long, default_value_t = 0.7)]
        b: f64,
        #[arg(long, default_value_t = 1e-3)]
        delta: f64,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long, default_value_t = 20)]
        states: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        filter: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Stroboscopically filtered adiabatic ramp.
    Adiabatic {
        #[arg(long, default_value_t = 4)]
        n: usize,
        #[arg(long, value_delimiter = ',', default_value = "2,4,8,16,32")]
        steps: Vec<usize>,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        omega: f64,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Power-law increment program on a 1/d^n chain.
    Powerlaw {
        #[arg(long, default_value_t = 8)]
        n: usize,
        #[arg(long, default_value_t = 12)]
        levels: usize,
        #[arg(long, default_value_t = 1)]
        exponent: u32,
    },
    /// Three-qubit XYZ target through global-rotation sandwiches.
    Heisenberg {
        #[arg(long, value_delimiter = ',', default_value = "4,8,16,32")]
        r: Vec<usize>,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure { code: EXIT_INPUT, message: e.to_string() }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        // A closed downstream pipe is a normal way to stop reading output.
        let code = if e.kind() == io::ErrorKind::BrokenPipe { 0 } else { EXIT_INPUT };
        Failure { code, message: e.to_string() }
    }
}

fn fail<T>(code: u8, message: impl Into<String>) -> Result<T, Failure> {
    Err(Failure { code, message: message.into() })
}

type Outcome = Result<(), Failure>;

fn load_expr(path: &Path) -> Result<FilterExpr, Failure> {
    read_expr(path).map_err(|e| Failure { code: EXIT_INPUT, message: format!("{}: {e}", path.display()) })
}

fn load_profile(path: &Path) -> Result<CouplingProfile, Failure> {
    read_profile(path).map_err(|e| Failure { code: EXIT_INPUT, message: format!("{}: {e}", path.display()) })
}

fn emit_json<T: Serialize>(value: &T, out: Option<&Path>) -> Outcome {
    match out {
        Some(p) => write_json(p, value)?,
        None => {
            let mut so = io::stdout().lock();
            serde_json::to_writer_pretty(&mut so, value).map_err(io::Error::from)?;
            writeln!(so)?;
        }
    }
    Ok(())
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn filter_cmd(cmd: FilterCmd) -> Outcome {
    match cmd {
        FilterCmd::Eval { expr, n, raw, csv } => {
            if n < 2 {
                return fail(EXIT_INPUT, "--n must be at least 2");
            }
            let e = load_expr(&expr)?;
            let values: Vec<f64> = match Precision::from_env()? {
                Precision::Rational => {
                    let v = if raw { filter::filter_vector(&e, n - 1)? } else { filter::normalized_filter_vector(&e, n - 1)? };
                    v.to_f64()
                }
                Precision::Float64 => {
                    let scale = if raw { 1.0 } else { e.duration_f64() };
                    filter::filter_vector_f64(&e, n - 1)?.into_iter().map(|x| x / scale).collect()
                }
            };
            let mut so = io::stdout().lock();
            if csv {
                writeln!(so, "d,f")?;
            }
            for (i, v) in values.iter().enumerate() {
                if csv {
                    writeln!(so, "{},{v:?}", i + 1)?;
                } else {
                    writeln!(so, "{}: {v:?}", i + 1)?;
                }
            }
        }
        FilterCmd::Resources { expr, n } => {
            let e = load_expr(&expr)?;
            emit_json(&resource_estimate(&e, n)?, None)?;
        }
    }
    Ok(())
}

fn delta_cmd(a: DeltaArgs) -> Outcome {
    let recipe = delta_expr(a.d, a.n, a.sign)?;
    emit_json(&recipe, a.out.as_deref())?;
    if let Some(note) = &recipe.adjustment {
        eprintln!("note: {note}");
    }
    if a.verify {
        let precision = Precision::from_env()?;
        let rep = verify_delta(&recipe, a.n, FLOAT_TOL, precision)?;
        eprintln!(
            "off-target max {:e}, on-target {}, concatenations {} (closed form {}{})",
            rep.max_off_target,
            rep.on_target,
            rep.concatenations,
            rep.predicted_concatenations,
            rep.alternative_prediction.map(|b| format!(" or {b}")).unwrap_or_default()
        );
        if !rep.count_matches {
            eprintln!("warning: concatenation count differs from the closed form");
        }
        if !rep.passed {
            return fail(EXIT_VERIFY, format!("verification failed: nonzero off-target entries {:?}", rep.offending));
        }
    }
    Ok(())
}

fn strength_cmd(a: StrengthArgs) -> Outcome {
    if a.qmin <= a.n / 2 {
        eprintln!("warning: qmin = {} <= n/2, outside the Q > N/2 regime", a.qmin);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.jobs.unwrap_or(0))
        .build()
        .map_err(|e| Failure { code: EXIT_INPUT, message: e.to_string() })?;
    pool.install(|| -> Outcome {
        let samples = strength_sweep(a.n, a.qmin, a.qmax)?;
        if let Some(p) = &a.out {
            write_strength_csv(&samples, BufWriter::new(File::create(p)?))?;
        }
        let fit = fit_lower_envelope(&samples, a.bins_per_octave, false)?;
        let fit_norm = fit_lower_envelope(&samples, a.bins_per_octave, true)?;
        let mut so = io::stdout().lock();
        writeln!(so, "samples: {}", samples.len())?;
        writeln!(so, "min s(Q): {:e}", samples.iter().map(|s| s.s_raw).fold(f64::INFINITY, f64::min))?;
        writeln!(so, "envelope slope (requested range): {:.4}", fit.slope)?;
        writeln!(so, "envelope slope, normalized factors: {:.4}", fit_norm.slope)?;
        if let Some(c) = octave_correlation(&samples) {
            writeln!(so, "octave correlation: {c:.4}")?;
        }
        let full_lo = 64.min(a.n - 1);
        if (a.qmin, a.qmax) != (full_lo, a.n - 1) && a.n > 65 {
            let all = strength_sweep(a.n, full_lo, a.n - 1)?;
            writeln!(so, "envelope slope (Q in [{full_lo}, {}]): {:.4}", a.n - 1, fit_lower_envelope(&all, a.bins_per_octave, false)?.slope)?;
        }
        writeln!(so, "reference -log2(6): {:.4}", envelope_exponent())?;
        Ok(())
    })
}

fn compile_cmd(a: CompileArgs) -> Outcome {
    let target = load_profile(&a.target)?;
    let native = load_profile(&a.native)?;
    if target.n != native.n {
        return fail(EXIT_INPUT, format!("target has n = {}, native has n = {}", target.n, native.n));
    }
    if target.b != native.b {
        eprintln!("warning: Z pulses leave the field unchanged; target b = {} is ignored", target.b);
    }
    // Every axis sees the same filter, so the per-axis ratios must agree.
    let mut ratio: Vec<Option<f64>> = vec![None; native.dimension()];
    for axis in [lp::Axis::X, lp::Axis::Y, lp::Axis::Z] {
        let r = lp::target_ratio(target.axis(axis), native.axis(axis))?;
        for (d, (slot, (&value, &nat))) in ratio.iter_mut().zip(r.iter().zip(native.axis(axis))).enumerate() {
            if nat == 0.0 {
                continue;
            }
            match slot {
                Some(prev) if (*prev - value).abs() > 1e-12 * prev.abs().max(1.0) => {
                    return fail(EXIT_INPUT, format!("axes need different filters at d = {}: {prev} vs {value}", d + 1));
                }
                _ => *slot = Some(value),
            }
        }
    }
    let ratio: Vec<f64> = ratio.into_iter().map(|r| r.unwrap_or(0.0)).collect();
    let opts = BasisOptions {
        max_concat_depth: a.depth,
        include_delta_basis: a.deltas,
        power_law_levels: a.power_law,
        max_size: a.max_size,
        cost: match a.cost {
            CostArg::Unit => CostModel::Unit,
            CostArg::Layers => CostModel::PulseLayers,
        },
        lambda_only: a.lambda_only,
    };
    let basis = build_basis(native.n, &opts)?;
    if basis.truncated {
        eprintln!("warning: basis truncated at {} entries", basis.len());
    }
    match compile(&ratio, &basis)? {
        CompileOutcome::Program(p) => {
            eprintln!("objective {}, {} terms, residual {:e}", p.objective, p.nonzero_terms(), p.residual_inf_norm);
            emit_json(&p, a.out.as_deref())
        }
        CompileOutcome::Infeasible(cert) => {
            #[derive(Serialize)]
            struct Infeasible<'a> {
                status: &'static str,
                certificate: &'a lp::FarkasCertificate,
            }
            emit_json(&Infeasible { status: "infeasible", certificate: &cert }, a.out.as_deref())?;
            fail(EXIT_INFEASIBLE, format!("target is outside the cone of the basis (b.y = {:e})", cert.b_dot_y))
        }
    }
}

fn schedule_cmd(cmd: ScheduleCmd) -> Outcome {
    let ScheduleCmd::Export { expr, n, t, out, json } = cmd;
    let e = load_expr(&expr)?;
    let flat = flatten(&materialize(&e, n)?, t)?;
    if json {
        emit_json(&flat, out.as_deref())
    } else {
        flat.write_csv(output(out.as_deref())?)?;
        Ok(())
    }
}

#[derive(Serialize)]
struct VerifyReport {
    n: usize,
    filter: Vec<f64>,
    error: f64,
    tol: f64,
    passed: bool,
}

fn sim_cmd(cmd: SimCmd) -> Outcome {
    match cmd {
        SimCmd::Verify { n, filter, native, t, tol } => {
            let e = match filter {
                Some(p) => load_expr(&p)?,
                None => nearest_neighbour_expr(n),
            };
            let native = match native {
                Some(p) => load_profile(&p)?,
                None => CouplingProfile::ising(vec![1.0; n.saturating_sub(1)]),
            };
            if native.n != n {
                return fail(EXIT_INPUT, format!("native profile has n = {}, expected {n}", native.n));
            }
            let schedule = materialize(&e, n)?;
            let f = realized_filter(&schedule)?.to_f64();
            let h = build_hamiltonian(&native)?;
            let h_eff = build_hamiltonian(&native.filtered(&f))?;
            let u = filtered_propagator(&schedule, &h, t)?;
            let error = operator_norm(&(&u.matrix - &expm_hermitian(&h_eff, t).matrix));
            let rep = VerifyReport { n, filter: f, error, tol, passed: error <= tol };
            emit_json(&rep, None)?;
            if !rep.passed {
                return fail(EXIT_BOUND, format!("filtered evolution deviates by {error:e}"));
            }
        }
        SimCmd::Trotter { mode, r, n, b, delta, t, states, seed, filter, csv } => {
            let mode: TrotterMode = mode.parse()?;
            let mut native = CouplingProfile::ising(vec![1.0; n.saturating_sub(1)]);
            native.b = b;
            let filter = match filter {
                Some(p) => load_expr(&p)?,
                None => nearest_neighbour_expr(n),
            };
            let config = TrotterConfig { mode, r_values: r, delta, t, trace_states: states, seed };
            let rep = trotter_error_report(&config, &TrotterSystem { native, filter })?;
            if let Some(p) = csv {
                let rows: Vec<_> = rep.rows.iter().map(|x| (x.r, x.measured_error, x.bound)).collect();
                write_convergence_csv(File::create(p)?, "r", &rows)?;
            }
            emit_json(&rep, None)?;
            if !(rep.bounds_hold && rep.trace_checks_hold) {
                return fail(EXIT_BOUND, "Trotter bound or trace-distance check violated");
            }
        }
        SimCmd::Adiabatic { n, steps, tau, omega, csv } => {
            if n < 2 {
                return fail(EXIT_INPUT, "--n must be at least 2");
            }
            let config = AdiabaticConfig { steps, tau, omega, ..AdiabaticConfig::all_to_all_nearest_neighbour(n) };
            let rep = adiabatic_run(&config)?;
            for w in &rep.warnings {
                eprintln!("warning: {w}");
            }
            if let Some(p) = csv {
                let rows: Vec<_> = rep.steps.iter().map(|s| (s.r, s.infidelity, s.predicted)).collect();
                write_convergence_csv(File::create(p)?, "R", &rows)?;
            }
            emit_json(&rep, None)?;
            let last = rep.steps.last().expect("at least one step count");
            if !(0.5..=2.0).contains(&last.ratio) {
                return fail(EXIT_BOUND, format!("infidelity at R = {} is {:.3}x the prediction", last.r, last.ratio));
            }
        }
        SimCmd::Powerlaw { n, levels, exponent } => {
            let rep = verify_power_law(exponent, levels, n)?;
            emit_json(&rep, None)?;
            if !rep.all_within {
                return fail(EXIT_BOUND, "extracted profile outside the geometric-tail bound");
            }
        }
        SimCmd::Heisenberg { r, t } => {
            let rep = heisenberg_convergence(&HeisenbergTarget::xyz_demo(), t, &r)?;
            emit_json(&rep, None)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Filter(c) => filter_cmd(c),
        Command::Delta(a) => delta_cmd(a),
        Command::Strength(a) => strength_cmd(a),
        Command::Compile(a) => compile_cmd(a),
        Command::Schedule(c) => schedule_cmd(c),
        Command::Sim(c) => sim_cmd(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) if f.code == 0 => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
