use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use fisher_mala::dataset::load_matrix_csv;
use fisher_mala::diagnostics::ess;
use fisher_mala::harness::{run_experiment, write_results, ExperimentConfig, FailureKind};
use fisher_mala::targets::GaussianTarget;
use fisher_mala::theory::{
    diagonal_grid_search, esjd_objective, jump_covariance, jump_covariance_mc,
    optimal_preconditioner, random_trace_constrained_spd, EsjdProblem,
};

#[derive(Parser)]
#[command(
    name = "fisher-mala",
    version,
    about = "Fisher-information adaptive MALA benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a TOML config (or a previous run.json).
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        replicates: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Numerically check the ESJD results for the optimal preconditioner.
    VerifyTheory {
        #[arg(long, default_value_t = 10)]
        dim: usize,
        #[arg(long, default_value_t = 1_000_000)]
        mc_samples: usize,
    },
    /// Per-coordinate ESS of a stored chain (CSV, one draw per row).
    Ess {
        #[arg(long)]
        chain: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run {
            config,
            replicates,
            seed,
            out,
        } => run(&config, replicates, seed, out),
        Command::VerifyTheory { dim, mc_samples } => verify_theory(dim, mc_samples),
        Command::Ess { chain } => ess_command(&chain),
    };
    ExitCode::from(code as u8)
}

fn run(path: &Path, replicates: Option<usize>, seed: Option<u64>, out: Option<PathBuf>) -> i32 {
    let mut config = match ExperimentConfig::load(path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return FailureKind::Config.exit_code();
        }
    };
    if let Some(n) = replicates {
        config.protocol.replicates = n;
    }
    if let Some(s) = seed {
        config.protocol.base_seed = s;
    }
    if let Some(dir) = out {
        config.protocol.output = dir;
    }
    let base_dir = path.parent().unwrap_or(Path::new("."));
    let result = match run_experiment(&config, base_dir) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            if e.kind == FailureKind::Numerical {
                eprintln!(
                    "diagnostics: sampler={} target={} seed={} burn_in={} collect={}",
                    config.sampler.label(),
                    config.target.label(),
                    config.protocol.base_seed,
                    config.protocol.burn_in,
                    config.protocol.collect
                );
            }
            return e.exit_code();
        }
    };
    if let Err(e) = write_results(&result, &config.protocol.output) {
        eprintln!(
            "error: cannot write {}: {e}",
            config.protocol.output.display()
        );
        return e.exit_code();
    }
    let s = &result.summary;
    println!(
        "{} on {} ({} replicates): max ESS {}, median ESS {}, min ESS {}",
        result.sampler, result.target, s.replicates, s.max, s.median, s.min
    );
    println!("results written to {}", config.protocol.output.display());
    0
}

fn report(ok: bool, name: &str, detail: String) -> bool {
    println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    ok
}

fn verify_theory(dim: usize, mc_samples: usize) -> i32 {
    if dim == 0 {
        eprintln!("error: --dim must be positive");
        return 2;
    }
    let mut rng = ChaCha20Rng::seed_from_u64(0);
    let mut all = true;

    // identity Fisher: J(I) = 1.25 d at δ = 1
    let eye = DMatrix::identity(dim, dim);
    let p = EsjdProblem::new(eye.clone(), 1.0, dim as f64).expect("valid problem");
    let j = esjd_objective(&p, &eye).expect("SPD");
    all &= report(
        (j - 1.25 * dim as f64).abs() < 1e-9,
        "identity objective",
        format!("J(I) = {j}"),
    );

    // stationary point k I⁻¹ has the requested trace
    let fisher = random_trace_constrained_spd(dim, dim as f64, &mut rng) + &eye;
    let p = EsjdProblem::new(fisher.clone(), 0.5, 3.0).expect("valid problem");
    let a_star = optimal_preconditioner(&p);
    let inv = fisher.clone().try_inverse().expect("invertible");
    let k = a_star.trace() / inv.trace();
    all &= report(
        (a_star.trace() - 3.0).abs() < 1e-9 && (&a_star - &inv * k).amax() < 1e-9,
        "stationary point is proportional to the inverse Fisher",
        format!("tr(A*) = {:.12}", a_star.trace()),
    );

    // where the stationary point sits on the trace-constrained set
    let diag = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 4.0]));
    let p2 = EsjdProblem::new(diag, 1.0, 1.25).expect("valid problem");
    let g = diagonal_grid_search(&p2, 1e-3).expect("grid");
    let near = |a: (f64, f64)| (a.0 - 1.0).abs() <= 1e-3 && (a.1 - 0.25).abs() <= 1e-3;
    report(
        near(g.argmin),
        "stationary point minimizes J (grid)",
        format!(
            "argmin = ({:.3}, {:.3}), J = {:.6}",
            g.argmin.0, g.argmin.1, g.min
        ),
    );
    all &= report(
        near(g.argmax),
        "stationary point maximizes J (grid)",
        format!(
            "argmax = ({:.3}, {:.3}), J = {:.6}",
            g.argmax.0, g.argmax.1, g.max
        ),
    );
    let j_star = esjd_objective(&p, &a_star).expect("SPD");
    let beaten = (0..1000)
        .filter(|_| {
            let a = random_trace_constrained_spd(dim, 3.0, &mut rng);
            esjd_objective(&p, &a).expect("SPD") > j_star + 1e-12
        })
        .count();
    all &= report(
        beaten == 0,
        "stationary point dominates random trace-constrained A",
        format!("{beaten}/1000 random candidates have larger J"),
    );

    // Monte Carlo jump covariance, standard normal, A = I, δ = 0.5
    if mc_samples >= 10_000 {
        let target = GaussianTarget::standard_normal(dim).expect("valid target");
        let m = jump_covariance_mc(&target, &eye, 0.5, mc_samples, &mut rng).expect("MC");
        let expected = jump_covariance(&eye, &eye, 0.5);
        let z = (&m.second_moment - &expected)
            .zip_map(&m.standard_error, |diff, se| (diff / se).abs())
            .max();
        let outside = (&m.second_moment - &expected)
            .zip_map(&m.standard_error, |diff, se| (diff / se).abs())
            .iter()
            .filter(|&&v| v > 3.0)
            .count();
        all &= report(
            z < 4.0,
            "jump second moment matches (δ²/4)AIA + δA",
            format!(
                "max |z| = {z:.2}, {outside}/{} entries beyond 3 SE, {mc_samples} samples",
                dim * dim
            ),
        );
        let mz = m
            .mean
            .zip_map(&m.mean_standard_error, |v, se| (v / se).abs())
            .max();
        report(mz < 4.0, "jump mean is zero", format!("max |z| = {mz:.2}"));
    } else {
        eprintln!("skipping Monte Carlo check: --mc-samples must be at least 10000");
    }
    i32::from(!all)
}

fn ess_command(path: &Path) -> i32 {
    let chain = match load_matrix_csv(path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 3;
        }
    };
    match ess(&chain) {
        Ok(r) => {
            println!("max_ess,median_ess,min_ess");
            println!("{},{},{}", r.max, r.median, r.min);
            println!();
            println!("coordinate,ess");
            for (j, v) in r.per_dim.iter().enumerate() {
                println!("{j},{v}");
            }
            for j in &r.degenerate {
                eprintln!("warning: coordinate {j} has zero variance");
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}
