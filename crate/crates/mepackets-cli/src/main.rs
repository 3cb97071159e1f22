//! Command-line driver: configures experiments, runs the library modules,
//! and emits CSV/JSON artifacts plus pass/fail verification reports.

mod output;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use mepackets::grid::{gaussian_packet, PositionGrid};
use mepackets::joint_meas::{outcome_statistics, AncillaSpec, CellGrid, ObjectOnGrid};
use mepackets::me_classical::{
    classical_entropy, evolve_quadratic, moment_taylor_derivatives, monte_carlo_oracle,
    MEPacketParams, PolynomialPotential,
};
use mepackets::me_quantum::{
    evolve_matrix, ln_quantum_partition_function, quantum_entropy, quantum_multipliers,
    QuantumMEPacket,
};
use mepackets::registration::{
    epr_end_state, hbt_register, nonideal_end_state, reduce_fixed_array, reduce_flexible,
    release_end_state, screen_reduce, simulate_tracks, singlet, straightness_fraction, BCLModel,
    DetectorSpec, EndState, EprDetectors, HbtAmplitudes, ScreenSpec, Signal, SignalMode,
    TrackConfig,
};
use mepackets::rigid_rod::{
    energy_relative_variance, gibbs_at_lambda, length_statistics, solve_lambda, ChainSpec,
};
use num_complex::Complex64;
use output::{fmt, out_path, write_csv, write_json, RunStamp};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "mepackets", version, about = "Maximum-entropy packet simulations")]
struct Cli {
    /// Output directory for artifacts (default: $MEPACKETS_OUT_DIR or ".")
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// JSON config file; command-line flags override its values
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for all stochastic steps
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classical ME packet: closed-form or Monte Carlo trajectory plus a
    /// moment-derivative summary
    MeClassical(MeClassicalArgs),
    /// Quantum ME packet: truncated-matrix trajectory plus packet summary
    MeQuantum(MeQuantumArgs),
    /// Classical vs quantum moment trajectories with a max-deviation column
    Compare(CompareArgs),
    /// Rigid-rod length statistics over an N scan
    Rod(RodArgs),
    /// Joint position-momentum measurement outcome table
    Jointmeas(JointmeasArgs),
    /// Detector registration end states and sampled signal frequencies
    Register(RegisterArgs),
    /// Layered-detector particle tracks
    Tracks(TracksArgs),
    /// Run the verification suite; exit 0 only if every criterion passes
    Verify(VerifyArgs),
}

/// Optional per-command sections of the JSON config file.
#[derive(Deserialize, Default)]
struct FileConfig {
    seed: Option<u64>,
    out_dir: Option<PathBuf>,
    #[serde(rename = "me-classical")]
    me_classical: Option<MeClassicalArgs>,
    #[serde(rename = "me-quantum")]
    me_quantum: Option<MeQuantumArgs>,
    compare: Option<CompareArgs>,
    rod: Option<RodArgs>,
    jointmeas: Option<JointmeasArgs>,
    register: Option<RegisterArgs>,
    tracks: Option<TracksArgs>,
    verify: Option<VerifyArgs>,
}

macro_rules! merge {
    ($flags:expr, $file:expr, $($field:ident),+ $(,)?) => {
        $( if $flags.$field.is_none() { $flags.$field = $file.$field.clone(); } )+
    };
}

fn pick<T: Clone>(v: &Option<T>, default: T) -> T {
    v.clone().unwrap_or(default)
}

#[derive(Args, Deserialize, Default, Clone)]
#[serde(deny_unknown_fields)]
struct MeClassicalArgs {
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    dq: Option<f64>,
    #[arg(long)]
    dp: Option<f64>,
    #[arg(long)]
    v1: Option<f64>,
    #[arg(long)]
    v2: Option<f64>,
    #[arg(long)]
    v3: Option<f64>,
    #[arg(long)]
    v4: Option<f64>,
    #[arg(long)]
    mass: Option<f64>,
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    /// Ensemble size for the Monte Carlo trajectory of non-quadratic
    /// potentials
    #[arg(long)]
    mc_samples: Option<usize>,
}

#[derive(Args, Deserialize, Default, Clone)]
#[serde(deny_unknown_fields)]
struct MeQuantumArgs {
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    dq: Option<f64>,
    #[arg(long)]
    dp: Option<f64>,
    /// Fuzziness nu = 2 dQ dP / hbar; sets hbar
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    v1: Option<f64>,
    #[arg(long)]
    v2: Option<f64>,
    #[arg(long)]
    mass: Option<f64>,
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long)]
    tail_tol: Option<f64>,
}

#[derive(Args, Deserialize, Default, Clone)]
#[serde(deny_unknown_fields)]
struct CompareArgs {
    /// "harmonic" or "free"
    #[arg(long)]
    potential: Option<String>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    dq: Option<f64>,
    #[arg(long)]
    dp: Option<f64>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    mass: Option<f64>,
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long)]
    tail_tol: Option<f64>,
}

#[derive(Args, Deserialize, Default, Clone)]
#[serde(deny_unknown_fields)]
struct RodArgs {
    /// Geometric scan "start:end:xFACTOR", e.g. 100:12800:x2
    #[arg(long)]
    n_scan: Option<String>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Target internal energy; solves for lambda per N
    #[arg(long)]
    energy: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    xi: Option<f64>,
    #[arg(long)]
    hbar: Option<f64>,
}

#[derive(Args, Deserialize, Default, Clone)]
#[serde(deny_unknown_fields)]
struct JointmeasArgs {
    /// Gaussian ancilla width sigma (exclusive with anc_dq/anc_dp)
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    anc_dq: Option<f64>,
    #[arg(long)]
    anc_dp: Option<f64>,
    #[arg(long)]
    q0: Option<f64>,
    #[arg(long)]
    p0: Option<f64>,
    /// Object Gaussian width parameter s (dQ = s / sqrt(2))
    #[arg(long)]
    object_width: Option<f64>,
    #[arg(long)]
    hbar: Option<f64>,
    #[arg(long)]
    na: Option<usize>,
    #[arg(long)]
    nb: Option<usize>,
    /// Cell-grid half-extent in combined widths
    #[arg(long)]
    span: Option<f64>,
    #[arg(long)]
    grid_n: Option<usize>,
    /// Sampling-box half-extent in combined widths
    #[arg(long)]
    box_span: Option<f64>,
    #[arg(long)]
    tail_tol: Option<f64>,
}

#[derive(Args, Deserialize, Default, Clone)]
#[serde(deny_unknown_fields)]
struct RegisterArgs {
    /// flexible | fixed | release | nonideal | screen | epr | hbt
    #[arg(long)]
    model: Option<String>,
    /// Object amplitudes over the two eigenvectors (real)
    #[arg(long)]
    c0: Option<f64>,
    #[arg(long)]
    c1: Option<f64>,
    #[arg(long)]
    eta0: Option<f64>,
    #[arg(long)]
    eta1: Option<f64>,
    /// HBT amplitudes (real)
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    draws: Option<usize>,
}

#[derive(Args, Deserialize, Default, Clone)]
#[serde(deny_unknown_fields)]
struct TracksArgs {
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    cell_width: Option<f64>,
    #[arg(long)]
    cells: Option<usize>,
    #[arg(long)]
    drift_time: Option<f64>,
    /// Initial packet center
    #[arg(long)]
    x0: Option<f64>,
    /// Initial Gaussian width parameter
    #[arg(long)]
    packet_width: Option<f64>,
    #[arg(long)]
    mass: Option<f64>,
    #[arg(long)]
    hbar: Option<f64>,
    #[arg(long)]
    n_tracks: Option<usize>,
    #[arg(long)]
    grid_n: Option<usize>,
    #[arg(long)]
    grid_box: Option<f64>,
    #[arg(long)]
    escape_tol: Option<f64>,
}

#[derive(Args, Deserialize, Default, Clone)]
#[serde(deny_unknown_fields)]
struct VerifyArgs {
    /// "all" or a criterion id 1..=9
    #[arg(long)]
    suite: Option<String>,
}

fn main() {
    let code = match run() {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            classify_error(&err)
        }
    };
    std::process::exit(code);
}

/// Exit 2 on configuration problems, 3 on numerical diagnostics.
fn classify_error(err: &anyhow::Error) -> i32 {
    if let Some(lib) = err.downcast_ref::<mepackets::Error>() {
        return match lib {
            mepackets::Error::Numerical(_) => 3,
            _ => 2,
        };
    }
    2
}

fn run() -> Result<i32> {
    let mut cli = Cli::parse();
    let file: FileConfig = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            serde_json::from_str(&text).context("parsing config file")?
        }
        None => FileConfig::default(),
    };
    let seed = cli.seed.or(file.seed).unwrap_or(42);
    let out_dir = cli
        .out_dir
        .clone()
        .or(file.out_dir.clone())
        .or_else(|| std::env::var_os("MEPACKETS_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;

    match &mut cli.command {
        Command::MeClassical(args) => {
            if let Some(f) = &file.me_classical {
                merge!(args, f, q, p, dq, dp, v1, v2, v3, v4, mass, t_max, steps, mc_samples);
            }
            cmd_me_classical(args, &out_dir, seed)
        }
        Command::MeQuantum(args) => {
            if let Some(f) = &file.me_quantum {
                merge!(args, f, q, p, dq, dp, nu, v1, v2, mass, t_max, steps, levels, tail_tol);
            }
            cmd_me_quantum(args, &out_dir, seed)
        }
        Command::Compare(args) => {
            if let Some(f) = &file.compare {
                merge!(args, f, potential, q, p, dq, dp, nu, mass, t_max, steps, levels, tail_tol);
            }
            cmd_compare(args, &out_dir, seed)
        }
        Command::Rod(args) => {
            if let Some(f) = &file.rod {
                merge!(args, f, n_scan, lambda, energy, mu, kappa, xi, hbar);
            }
            cmd_rod(args, &out_dir, seed)
        }
        Command::Jointmeas(args) => {
            if let Some(f) = &file.jointmeas {
                merge!(
                    args, f, sigma, anc_dq, anc_dp, q0, p0, object_width, hbar, na, nb, span,
                    grid_n, box_span, tail_tol
                );
            }
            cmd_jointmeas(args, &out_dir, seed)
        }
        Command::Register(args) => {
            if let Some(f) = &file.register {
                merge!(args, f, model, c0, c1, eta0, eta1, a, b, c, draws);
            }
            cmd_register(args, &out_dir, seed)
        }
        Command::Tracks(args) => {
            if let Some(f) = &file.tracks {
                merge!(
                    args, f, layers, cell_width, cells, drift_time, x0, packet_width, mass, hbar,
                    n_tracks, grid_n, grid_box, escape_tol
                );
            }
            cmd_tracks(args, &out_dir, seed)
        }
        Command::Verify(args) => {
            if let Some(f) = &file.verify {
                merge!(args, f, suite);
            }
            cmd_verify(args, &out_dir, seed)
        }
    }
}

#[derive(Serialize)]
struct PacketEcho {
    q: f64,
    p: f64,
    dq: f64,
    dp: f64,
}

fn cmd_me_classical(args: &MeClassicalArgs, out_dir: &std::path::Path, seed: u64) -> Result<i32> {
    #[derive(Serialize)]
    struct Effective<'a> {
        cmd: &'a str,
        q: f64,
        p: f64,
        dq: f64,
        dp: f64,
        coeffs: [f64; 6],
        mass: f64,
        t_max: f64,
        steps: usize,
        mc_samples: usize,
    }
    let eff = Effective {
        cmd: "me-classical",
        q: pick(&args.q, 0.0),
        p: pick(&args.p, 0.0),
        dq: pick(&args.dq, 1.0),
        dp: pick(&args.dp, 1.0),
        coeffs: [
            0.0,
            pick(&args.v1, 0.0),
            pick(&args.v2, 0.0),
            pick(&args.v3, 0.0),
            pick(&args.v4, 0.0),
            0.0,
        ],
        mass: pick(&args.mass, 1.0),
        t_max: pick(&args.t_max, 10.0),
        steps: pick(&args.steps, 100),
        mc_samples: pick(&args.mc_samples, 200_000),
    };
    let stamp = RunStamp::new(seed, &eff)?;
    let pkt = MEPacketParams::new(eff.q, eff.p, eff.dq, eff.dp)?;
    let vpot = PolynomialPotential::new(eff.coeffs, eff.mass)?;
    let ts: Vec<f64> = (0..=eff.steps)
        .map(|i| eff.t_max * i as f64 / eff.steps as f64)
        .collect();

    let csv = out_path(out_dir, "me_classical.csv");
    if vpot.is_at_most_quadratic() {
        let mut rows = Vec::with_capacity(ts.len());
        for &t in &ts {
            let e = evolve_quadratic(&pkt, &vpot, t)?.params;
            rows.push(vec![fmt(t), fmt(e.q), fmt(e.p), fmt(e.dq), fmt(e.dp)]);
        }
        write_csv(&csv, &stamp, &["t", "q", "p", "dq", "dp"], rows.into_iter())?;
    } else {
        let mut rows = Vec::with_capacity(ts.len());
        for &t in &ts {
            let m = monte_carlo_oracle(&pkt, &vpot, t, eff.mc_samples, seed)?;
            rows.push(vec![
                fmt(t),
                fmt(m.q_mean),
                fmt(m.p_mean),
                fmt(m.dq),
                fmt(m.dp),
                fmt(m.q_se),
                fmt(m.p_se),
                fmt(m.dq_se),
                fmt(m.dp_se),
            ]);
        }
        write_csv(
            &csv,
            &stamp,
            &["t", "q", "p", "dq", "dp", "q_se", "p_se", "dq_se", "dp_se"],
            rows.into_iter(),
        )?;
    }

    #[derive(Serialize)]
    struct Summary {
        packet: PacketEcho,
        entropy: f64,
        dp_derivatives: [f64; 4],
        dq_derivatives: [f64; 4],
    }
    let d = moment_taylor_derivatives(&pkt, &vpot)?;
    write_json(
        &out_path(out_dir, "me_classical.json"),
        &Summary {
            packet: PacketEcho {
                q: eff.q,
                p: eff.p,
                dq: eff.dq,
                dp: eff.dp,
            },
            entropy: classical_entropy(&pkt),
            dp_derivatives: d.dp,
            dq_derivatives: d.dq,
        },
    )?;
    println!("wrote {}", csv.display());
    Ok(0)
}

fn cmd_me_quantum(args: &MeQuantumArgs, out_dir: &std::path::Path, seed: u64) -> Result<i32> {
    #[derive(Serialize)]
    struct Effective<'a> {
        cmd: &'a str,
        q: f64,
        p: f64,
        dq: f64,
        dp: f64,
        nu: f64,
        v1: f64,
        v2: f64,
        mass: f64,
        t_max: f64,
        steps: usize,
        levels: usize,
        tail_tol: f64,
    }
    let eff = Effective {
        cmd: "me-quantum",
        q: pick(&args.q, 1.0),
        p: pick(&args.p, 0.0),
        dq: pick(&args.dq, 0.5),
        dp: pick(&args.dp, 1.0),
        nu: pick(&args.nu, 2.0),
        v1: pick(&args.v1, 0.0),
        v2: pick(&args.v2, 1.0),
        mass: pick(&args.mass, 1.0),
        t_max: pick(&args.t_max, 10.0),
        steps: pick(&args.steps, 100),
        levels: pick(&args.levels, 128),
        tail_tol: pick(&args.tail_tol, mepackets::me_quantum::DEFAULT_TAIL_TOL),
    };
    let stamp = RunStamp::new(seed, &eff)?;
    let pkt = QuantumMEPacket::with_nu(eff.q, eff.p, eff.dq, eff.dp, eff.nu)?;
    let vpot = PolynomialPotential::new([0.0, eff.v1, eff.v2, 0.0, 0.0, 0.0], eff.mass)?;
    let ts: Vec<f64> = (0..=eff.steps)
        .map(|i| eff.t_max * i as f64 / eff.steps as f64)
        .collect();
    // grow the basis when the packet's eigenvalue tail needs more levels;
    // width mismatch along the trajectory spreads the top kept eigenstate
    // over roughly twice its index, hence the factor
    let required = mepackets::me_quantum::required_levels(pkt.nu(), eff.tail_tol)?;
    let levels = eff.levels.max(2 * required + 32);
    let moments = evolve_matrix(&pkt, &vpot, &ts, levels, eff.tail_tol, 1e-6)?;
    let csv = out_path(out_dir, "me_quantum.csv");
    write_csv(
        &csv,
        &stamp,
        &["t", "q", "p", "dq", "dp", "edge_occupation"],
        moments.iter().map(|m| {
            vec![
                fmt(m.t),
                fmt(m.q_mean),
                fmt(m.p_mean),
                fmt(m.dq),
                fmt(m.dp),
                fmt(m.edge_occupation),
            ]
        }),
    )?;

    #[derive(Serialize)]
    struct Summary {
        nu: f64,
        hbar: f64,
        entropy: f64,
        multipliers: Option<[f64; 4]>,
        ln_partition_function: Option<f64>,
    }
    let multipliers = quantum_multipliers(&pkt).ok();
    write_json(
        &out_path(out_dir, "me_quantum.json"),
        &Summary {
            nu: pkt.nu(),
            hbar: pkt.hbar,
            entropy: quantum_entropy(pkt.nu())?,
            ln_partition_function: multipliers
                .as_ref()
                .map(|m| ln_quantum_partition_function(m, pkt.hbar))
                .transpose()?,
            multipliers: multipliers.map(|m| [m.l1, m.l2, m.l3, m.l4]),
        },
    )?;
    println!("wrote {}", csv.display());
    Ok(0)
}

fn cmd_compare(args: &CompareArgs, out_dir: &std::path::Path, seed: u64) -> Result<i32> {
    #[derive(Serialize)]
    struct Effective<'a> {
        cmd: &'a str,
        potential: String,
        q: f64,
        p: f64,
        dq: f64,
        dp: f64,
        nu: f64,
        mass: f64,
        t_max: f64,
        steps: usize,
        levels: usize,
        tail_tol: f64,
    }
    let eff = Effective {
        cmd: "compare",
        potential: pick(&args.potential, "harmonic".to_string()),
        q: pick(&args.q, 1.0),
        p: pick(&args.p, 0.0),
        dq: pick(&args.dq, 0.5),
        dp: pick(&args.dp, 1.0),
        nu: pick(&args.nu, 10.0),
        mass: pick(&args.mass, 1.0),
        t_max: pick(&args.t_max, 10.0),
        steps: pick(&args.steps, 100),
        levels: pick(&args.levels, 128),
        tail_tol: pick(&args.tail_tol, mepackets::me_quantum::DEFAULT_TAIL_TOL),
    };
    let vpot = match eff.potential.as_str() {
        "harmonic" => PolynomialPotential::harmonic(1.0, eff.mass),
        "free" => PolynomialPotential::free(eff.mass),
        other => bail!("unknown potential {other:?}: use harmonic or free"),
    };
    let stamp = RunStamp::new(seed, &eff)?;
    let pkt = QuantumMEPacket::with_nu(eff.q, eff.p, eff.dq, eff.dp, eff.nu)?;
    let ts: Vec<f64> = (0..=eff.steps)
        .map(|i| eff.t_max * i as f64 / eff.steps as f64)
        .collect();
    let required = mepackets::me_quantum::required_levels(pkt.nu(), eff.tail_tol)?;
    let levels = eff.levels.max(2 * required + 32);
    let quantum = evolve_matrix(&pkt, &vpot, &ts, levels, eff.tail_tol, 1e-6)?;
    let csv = out_path(out_dir, "compare.csv");
    let mut rows = Vec::with_capacity(quantum.len());
    for m in &quantum {
        let cl = evolve_quadratic(&pkt.params, &vpot, m.t)?.params;
        let delta = (m.q_mean - cl.q)
            .abs()
            .max((m.p_mean - cl.p).abs())
            .max((m.dq - cl.dq).abs())
            .max((m.dp - cl.dp).abs());
        rows.push(vec![
            fmt(m.t),
            fmt(cl.q),
            fmt(cl.p),
            fmt(cl.dq),
            fmt(cl.dp),
            fmt(m.q_mean),
            fmt(m.p_mean),
            fmt(m.dq),
            fmt(m.dp),
            fmt(delta),
        ]);
    }
    write_csv(
        &csv,
        &stamp,
        &[
            "t", "q_cl", "p_cl", "dq_cl", "dp_cl", "q_qm", "p_qm", "dq_qm", "dp_qm",
            "max_abs_delta",
        ],
        rows.into_iter(),
    )?;
    println!("wrote {}", csv.display());
    Ok(0)
}

fn parse_n_scan(scan: &str) -> Result<Vec<usize>> {
    let parts: Vec<&str> = scan.split(':').collect();
    if parts.len() != 3 || !parts[2].starts_with('x') {
        bail!("n-scan must look like start:end:xFACTOR, e.g. 100:12800:x2");
    }
    let start: usize = parts[0].parse().context("bad scan start")?;
    let end: usize = parts[1].parse().context("bad scan end")?;
    let factor: usize = parts[2][1..].parse().context("bad scan factor")?;
    if start < 2 || end < start || factor < 2 {
        bail!("n-scan needs start >= 2, end >= start, factor >= 2");
    }
    let mut out = Vec::new();
    let mut n = start;
    while n <= end {
        out.push(n);
        n *= factor;
    }
    Ok(out)
}

fn cmd_rod(args: &RodArgs, out_dir: &std::path::Path, seed: u64) -> Result<i32> {
    #[derive(Serialize)]
    struct Effective<'a> {
        cmd: &'a str,
        n_scan: String,
        lambda: Option<f64>,
        energy: Option<f64>,
        mu: f64,
        kappa: f64,
        xi: f64,
        hbar: f64,
    }
    if args.lambda.is_some() && args.energy.is_some() {
        bail!("give either --lambda or --energy, not both");
    }
    let eff = Effective {
        cmd: "rod",
        n_scan: pick(&args.n_scan, "100:12800:x2".to_string()),
        lambda: args.lambda,
        energy: args.energy,
        mu: pick(&args.mu, 1.0),
        kappa: pick(&args.kappa, 1.0),
        xi: pick(&args.xi, 1.0),
        hbar: pick(&args.hbar, 1.0),
    };
    let stamp = RunStamp::new(seed, &eff)?;
    let ns = parse_n_scan(&eff.n_scan)?;
    let mut rows = Vec::with_capacity(ns.len());
    for &n in &ns {
        let spec = ChainSpec::new(n, eff.mu, eff.kappa, eff.xi, eff.hbar)?;
        let gibbs = match (eff.lambda, eff.energy) {
            (Some(l), _) => gibbs_at_lambda(&spec, l)?,
            (None, Some(e)) => solve_lambda(&spec, e)?,
            (None, None) => gibbs_at_lambda(&spec, 0.1)?,
        };
        let stats = length_statistics(&spec, &gibbs);
        rows.push(vec![
            n.to_string(),
            fmt(stats.mean),
            fmt(stats.variance.sqrt() / stats.mean),
            fmt(stats.sqrt_n_relative),
            fmt(gibbs.lambda),
            fmt(gibbs.energy),
            fmt(energy_relative_variance(&spec, &gibbs)),
            fmt(stats.asymptotic_constant),
        ]);
    }
    let csv = out_path(out_dir, "rod.csv");
    write_csv(
        &csv,
        &stamp,
        &[
            "n",
            "mean_l",
            "dl_over_l",
            "sqrtn_dl_over_l",
            "lambda",
            "energy",
            "energy_rel_variance",
            "asymptotic_constant",
        ],
        rows.into_iter(),
    )?;
    println!("wrote {}", csv.display());
    Ok(0)
}

fn cmd_jointmeas(args: &JointmeasArgs, out_dir: &std::path::Path, seed: u64) -> Result<i32> {
    #[derive(Serialize)]
    struct Effective<'a> {
        cmd: &'a str,
        sigma: Option<f64>,
        anc_dq: Option<f64>,
        anc_dp: Option<f64>,
        q0: f64,
        p0: f64,
        object_width: f64,
        hbar: f64,
        na: usize,
        nb: usize,
        span: f64,
        grid_n: usize,
        box_span: f64,
        tail_tol: f64,
    }
    let eff = Effective {
        cmd: "jointmeas",
        sigma: args.sigma,
        anc_dq: args.anc_dq,
        anc_dp: args.anc_dp,
        q0: pick(&args.q0, 0.3),
        p0: pick(&args.p0, -0.5),
        object_width: pick(&args.object_width, 1.0),
        hbar: pick(&args.hbar, 1.0),
        na: pick(&args.na, 32),
        nb: pick(&args.nb, 32),
        span: pick(&args.span, 4.0),
        grid_n: pick(&args.grid_n, 1024),
        box_span: pick(&args.box_span, 8.0),
        tail_tol: pick(&args.tail_tol, mepackets::me_quantum::DEFAULT_TAIL_TOL),
    };
    let stamp = RunStamp::new(seed, &eff)?;
    let anc = match (eff.sigma, eff.anc_dq, eff.anc_dp) {
        (_, Some(dq), Some(dp)) => AncillaSpec::me_packet(dq, dp, eff.hbar)?,
        (sigma, None, None) => AncillaSpec::gaussian(sigma.unwrap_or(1.0), eff.hbar)?,
        _ => bail!("give both --anc-dq and --anc-dp for an ME-packet ancilla"),
    };
    let (wq, wp) = anc.widths();
    let s = eff.object_width;
    let (dq_s, dp_s) = (s / 2.0_f64.sqrt(), eff.hbar / (s * 2.0_f64.sqrt()));
    let combined_q = (dq_s * dq_s + wq * wq).sqrt();
    let combined_p = (dp_s * dp_s + wp * wp).sqrt();
    // position box sized to hold the object and every shifted ancilla
    let l_box = eff.box_span * combined_q + eff.q0.abs() + 6.0 * s;
    let grid = PositionGrid::new(eff.grid_n, l_box)?;
    let object = ObjectOnGrid::gaussian(&grid, eff.q0, eff.p0, s, eff.hbar)?;
    let cells = CellGrid::new(
        (0..=eff.na)
            .map(|i| {
                eff.q0 - eff.span * combined_q
                    + 2.0 * eff.span * combined_q * i as f64 / eff.na as f64
            })
            .collect(),
        (0..=eff.nb)
            .map(|i| {
                eff.p0 - eff.span * combined_p
                    + 2.0 * eff.span * combined_p * i as f64 / eff.nb as f64
            })
            .collect(),
    )?;
    let stats = outcome_statistics(&grid, &object, &cells, &anc, eff.tail_tol)?;
    let csv = out_path(out_dir, "jointmeas.csv");
    let mut rows = Vec::with_capacity(eff.na * eff.nb);
    for (k, row) in stats.p.iter().enumerate() {
        for (l, &p) in row.iter().enumerate() {
            rows.push(vec![
                k.to_string(),
                l.to_string(),
                fmt(cells.a_center(k)),
                fmt(cells.b_center(l)),
                fmt(p),
            ]);
        }
    }
    write_csv(&csv, &stamp, &["k", "l", "a", "b", "p"], rows.into_iter())?;

    #[derive(Serialize)]
    struct Summary {
        coverage: f64,
        mean_a: f64,
        mean_b: f64,
        var_a: f64,
        var_b: f64,
        predicted_var_a: f64,
        predicted_var_b: f64,
        cell_size_warning: bool,
    }
    write_json(
        &out_path(out_dir, "jointmeas.json"),
        &Summary {
            coverage: stats.coverage,
            mean_a: stats.mean_a,
            mean_b: stats.mean_b,
            var_a: stats.var_a,
            var_b: stats.var_b,
            predicted_var_a: combined_q * combined_q,
            predicted_var_b: combined_p * combined_p,
            cell_size_warning: stats.cell_size_warning,
        },
    )?;
    println!("wrote {}", csv.display());
    Ok(0)
}

#[derive(Serialize)]
struct BranchReport {
    weight: f64,
    signal: String,
    separation_status: Option<String>,
    trace: f64,
    sampled_frequency: f64,
}

fn end_state_report(end: &EndState, draws: usize, seed: u64) -> Vec<BranchReport> {
    let freqs = end.sampled_frequencies(draws, seed);
    end.components
        .iter()
        .zip(freqs)
        .map(|(c, f)| BranchReport {
            weight: c.weight,
            signal: match &c.signal {
                Signal::None => "none".to_string(),
                Signal::Fired(arms) => format!("{arms:?}"),
            },
            separation_status: c.separation_status.clone(),
            trace: mepackets::qcore::trace(c.state.matrix()).re,
            sampled_frequency: f,
        })
        .collect()
}

fn cmd_register(args: &RegisterArgs, out_dir: &std::path::Path, seed: u64) -> Result<i32> {
    #[derive(Serialize)]
    struct Effective<'a> {
        cmd: &'a str,
        model: String,
        c0: f64,
        c1: f64,
        eta0: f64,
        eta1: f64,
        a: f64,
        b: f64,
        c: f64,
        draws: usize,
    }
    let eff = Effective {
        cmd: "register",
        model: pick(&args.model, "nonideal".to_string()),
        c0: pick(&args.c0, 0.6),
        c1: pick(&args.c1, 0.8),
        eta0: pick(&args.eta0, 0.8),
        eta1: pick(&args.eta1, 0.55),
        a: pick(&args.a, 0.5),
        b: pick(&args.b, 0.5),
        c: pick(&args.c, std::f64::consts::FRAC_1_SQRT_2),
        draws: pick(&args.draws, 100_000),
    };
    let stamp = RunStamp::new(seed, &eff)?;

    let unit = |i: usize| {
        let mut v = mepackets::qcore::CVector::zeros(2);
        v[i] = Complex64::from(1.0);
        v
    };
    let model = BCLModel::nondegenerate(vec![1.0, -1.0], vec![unit(0), unit(1)])?;
    let norm = (eff.c0 * eff.c0 + eff.c1 * eff.c1).sqrt();
    if norm < 1e-12 {
        bail!("object amplitudes are all zero");
    }
    let mut phi = mepackets::qcore::CVector::zeros(2);
    phi[0] = Complex64::from(eff.c0 / norm);
    phi[1] = Complex64::from(eff.c1 / norm);

    let (end, hbt_c) = match eff.model.as_str() {
        "flexible" => {
            let det =
                DetectorSpec::ideal_lookalike(&model, SignalMode::Flexible, true, vec![1.0; 2])?;
            (reduce_flexible(&model, &det, &phi)?, None)
        }
        "fixed" => {
            let det =
                DetectorSpec::ideal_lookalike(&model, SignalMode::FixedArray, true, vec![1.0; 2])?;
            (reduce_fixed_array(&model, &det, &phi)?, None)
        }
        "release" => {
            let det = DetectorSpec::ideal_lookalike(
                &model,
                SignalMode::FixedArray,
                false,
                vec![1.0; 2],
            )?;
            (release_end_state(&model, &det, &phi)?, None)
        }
        "nonideal" => {
            let det = DetectorSpec::ideal_lookalike(
                &model,
                SignalMode::Flexible,
                true,
                vec![eff.eta0, eff.eta1],
            )?;
            (nonideal_end_state(&model, &det, &phi)?, None)
        }
        "screen" => {
            // c0 through, c1 swallowed; two-level screen space
            let mut through = mepackets::qcore::CVector::zeros(2);
            through[0] = Complex64::from(1.0);
            let level = |i: usize| {
                let mut m = mepackets::qcore::CMatrix::zeros(2, 2);
                m[(i, i)] = Complex64::from(1.0);
                m
            };
            let spec = ScreenSpec::new(
                phi[0],
                phi[1],
                through,
                level(0),
                level(1),
            )?;
            (screen_reduce(&spec)?, None)
        }
        "epr" => (epr_end_state(&singlet(), &EprDetectors::default())?, None),
        "hbt" => {
            let norm = (eff.a * eff.a + eff.b * eff.b + eff.c * eff.c).sqrt();
            let amp = HbtAmplitudes::new(
                Complex64::from(eff.a / norm),
                Complex64::from(eff.b / norm),
                Complex64::from(eff.c / norm),
            )?;
            hbt_register(&amp)?
        }
        other => bail!("unknown model {other:?}"),
    };

    #[derive(Serialize)]
    struct Report {
        model: String,
        branches: Vec<BranchReport>,
        hbt_correlation: Option<f64>,
        config_hash: String,
    }
    let report = Report {
        model: eff.model.clone(),
        branches: end_state_report(&end, eff.draws, seed),
        hbt_correlation: hbt_c,
        config_hash: stamp.config_hash.clone(),
    };
    let path = out_path(out_dir, "register.json");
    write_json(&path, &report)?;
    println!("wrote {}", path.display());
    Ok(0)
}

fn cmd_tracks(args: &TracksArgs, out_dir: &std::path::Path, seed: u64) -> Result<i32> {
    #[derive(Serialize)]
    struct Effective<'a> {
        cmd: &'a str,
        layers: usize,
        cell_width: f64,
        cells: usize,
        drift_time: f64,
        x0: f64,
        packet_width: f64,
        mass: f64,
        hbar: f64,
        n_tracks: usize,
        grid_n: usize,
        grid_box: f64,
        escape_tol: f64,
    }
    let eff = Effective {
        cmd: "tracks",
        layers: pick(&args.layers, 10),
        cell_width: pick(&args.cell_width, 1.0),
        cells: pick(&args.cells, 48),
        drift_time: pick(&args.drift_time, 0.01),
        x0: pick(&args.x0, 0.5),
        packet_width: pick(&args.packet_width, 0.3),
        mass: pick(&args.mass, 1.0),
        hbar: pick(&args.hbar, 1.0),
        n_tracks: pick(&args.n_tracks, 10_000),
        grid_n: pick(&args.grid_n, 1024),
        grid_box: pick(&args.grid_box, 24.0),
        escape_tol: pick(&args.escape_tol, 1e-6),
    };
    let stamp = RunStamp::new(seed, &eff)?;
    let grid = PositionGrid::new(eff.grid_n, eff.grid_box)?;
    let cfg = TrackConfig {
        n_layers: eff.layers,
        cell_width: eff.cell_width,
        n_cells: eff.cells,
        mass: eff.mass,
        hbar: eff.hbar,
        drift_time: eff.drift_time,
        escape_tol: eff.escape_tol,
    };
    let psi = grid.sample(gaussian_packet(eff.x0, 0.0, eff.packet_width, eff.hbar));
    let tracks = simulate_tracks(&grid, &cfg, &psi, eff.n_tracks, seed)?;
    let csv = out_path(out_dir, "tracks.csv");
    write_csv(
        &csv,
        &stamp,
        &["track", "layer", "cell"],
        tracks.iter().enumerate().flat_map(|(i, t)| {
            t.iter()
                .enumerate()
                .map(move |(layer, &cell)| vec![i.to_string(), layer.to_string(), cell.to_string()])
                .collect::<Vec<_>>()
        }),
    )?;

    #[derive(Serialize)]
    struct Summary {
        n_tracks: usize,
        straight_within_two_cells: f64,
    }
    write_json(
        &out_path(out_dir, "tracks.json"),
        &Summary {
            n_tracks: eff.n_tracks,
            straight_within_two_cells: straightness_fraction(&tracks, 2),
        },
    )?;
    println!("wrote {}", csv.display());
    Ok(0)
}

fn cmd_verify(args: &VerifyArgs, out_dir: &std::path::Path, seed: u64) -> Result<i32> {
    let suite = pick(&args.suite, "all".to_string());
    let reports = match suite.as_str() {
        "all" => mepackets::verify::run_all(seed),
        id => {
            let id: usize = id
                .parse()
                .with_context(|| format!("suite must be \"all\" or a criterion id, got {id:?}"))?;
            match mepackets::verify::run_criterion(id, seed) {
                Some(report) => vec![report],
                None => bail!("criterion ids run from 1 to 9, got {id}"),
            }
        }
    };
    for r in &reports {
        let status = if r.passed { "PASS" } else { "FAIL" };
        println!(
            "[{status}] criterion {}: {} ({:.2} s)",
            r.id, r.name, r.runtime_seconds
        );
        for c in &r.checks {
            let mark = if c.passed { "ok" } else { "FAILED" };
            println!("    [{mark}] {} -- {}", c.name, c.detail);
        }
    }
    #[derive(Serialize)]
    struct VerifyReport<'a> {
        seed: u64,
        all_passed: bool,
        criteria: &'a [mepackets::verify::CriterionReport],
    }
    let all_passed = reports.iter().all(|r| r.passed);
    write_json(
        &out_path(out_dir, "verify.json"),
        &VerifyReport {
            seed,
            all_passed,
            criteria: &reports,
        },
    )?;
    Ok(if all_passed { 0 } else { 1 })
}
