use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;

use edmtools::completion::{complete_edm, Method, NoisyObservation, SolverOptions};
use edmtools::embedding::classical_mds;
use edmtools::harness::{self, EchoRoomSpec, ExperimentSpec, JitterOn, Scenario};
use edmtools::io::{read_matrix_csv, read_times_json, save_matrix_csv, save_points_csv};
use edmtools::unfolding::{solve_mdu, UnfoldingInstance};
use edmtools::unlabeled::{reconstruct_room, turnpike_recover, DistanceMultiset, EchoSet, RoomOptions};
use edmtools::{DistanceMatrix, ObservationMask};

#[derive(Parser)]
#[command(name = "edm", version, about = "Euclidean distance matrix toolbox")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Embed a distance matrix with classical MDS.
    Mds {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        out: PathBuf,
        /// Input holds plain distances; they are squared before use.
        #[arg(long)]
        plain: bool,
    },
    /// Complete and denoise a partially observed distance matrix.
    Complete {
        #[arg(long, value_enum)]
        method: MethodArg,
        #[arg(long)]
        dim: usize,
        /// SDR penalty weight (default: square root of the missing pair count).
        #[arg(long)]
        lambda: Option<f64>,
        /// 0/1 mask; defaults to observing every entry.
        #[arg(long)]
        mask: Option<PathBuf>,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        points: Option<PathBuf>,
        #[arg(long)]
        plain: bool,
    },
    /// Recover microphones and sources from their cross-distances.
    Unfold {
        #[arg(long)]
        cross: PathBuf,
        #[arg(long)]
        dim: usize,
        #[arg(long, value_enum, default_value = "sdr")]
        method: MethodArg,
        #[arg(long, default_value = "microphones.csv")]
        mics_out: PathBuf,
        #[arg(long, default_value = "sources.csv")]
        sources_out: PathBuf,
        #[arg(long)]
        plain: bool,
    },
    /// Group unlabeled echoes into image sources.
    EchoSort {
        #[arg(long)]
        mics: PathBuf,
        #[arg(long)]
        times: PathBuf,
        #[arg(long, default_value_t = 343.0)]
        speed: f64,
        /// Seconds, or `auto` for array diameter over speed.
        #[arg(long, default_value = "auto")]
        window: String,
        #[arg(long, default_value_t = 1e-3)]
        tau: f64,
        /// Expected timing jitter in seconds; widens the automatic window.
        #[arg(long, default_value_t = 0.0)]
        jitter: f64,
        /// Write image sources here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Points on a line from their unlabeled distances.
    Turnpike {
        #[arg(long)]
        distances: PathBuf,
    },
    /// Monte Carlo comparison of the completion methods.
    Bench {
        #[arg(long, value_enum)]
        scenario: ScenarioArg,
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override where jitter is added.
        #[arg(long, value_enum)]
        jitter_on: Option<JitterArg>,
    },
    /// Classical MDS of the Swiss train travel times.
    SwissDemo {
        #[arg(long, default_value = "swiss.csv")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Rank,
    Optspace,
    Sstress,
    Sdr,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Rank => Method::Rank,
            MethodArg::Optspace => Method::OptSpace,
            MethodArg::Sstress => Method::SStress,
            MethodArg::Sdr => Method::Sdr,
        }
    }
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum ScenarioArg {
    RandomDeletion,
    Mdu,
    EchoRooms,
}

#[derive(Clone, Copy, ValueEnum)]
enum JitterArg {
    Squared,
    Sqrt,
}

fn read_squared(path: &Path, plain: bool) -> Result<DMatrix<f64>> {
    let m = read_matrix_csv(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(if plain { m.map(|v| v * v) } else { m })
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Mds { input, dim, out, plain } => {
            let d = DistanceMatrix::new(read_squared(&input, plain)?)?;
            save_points_csv(&classical_mds(&d, dim)?, &out)?;
        }
        Command::Complete {
            method,
            dim,
            lambda,
            mask,
            input,
            out,
            points,
            plain,
        } => {
            let d = read_squared(&input, plain)?;
            let mask = match mask {
                Some(p) => ObservationMask::from_matrix(&read_matrix_csv(&p)?)?,
                None => ObservationMask::full(d.nrows()),
            };
            let obs = NoisyObservation::new(d, mask)?;
            if obs.clamped() > 0 {
                eprintln!("warning: clamped {} negative entries to zero", obs.clamped());
            }
            let mut opts = SolverOptions::default();
            opts.sdr.lambda = lambda;
            let res = complete_edm(&obs, dim, method.into(), &opts)?;
            save_matrix_csv(res.edm.as_matrix(), &out)?;
            if let Some(p) = points {
                let x = match res.points {
                    Some(x) => x,
                    None => classical_mds(&res.edm, dim)?,
                };
                save_points_csv(&x, &p)?;
            }
            eprintln!("iterations: {}", res.iterations);
            if !res.converged {
                eprintln!("warning: stopped at the iteration limit");
                return Ok(ExitCode::from(2));
            }
        }
        Command::Unfold {
            cross,
            dim,
            method,
            mics_out,
            sources_out,
            plain,
        } => {
            let inst = UnfoldingInstance::new(read_squared(&cross, plain)?)?;
            let sol = solve_mdu(&inst, dim, method.into(), &SolverOptions::default())?;
            save_points_csv(&sol.microphones, &mics_out)?;
            save_points_csv(&sol.sources, &sources_out)?;
        }
        Command::EchoSort {
            mics,
            times,
            speed,
            window,
            tau,
            jitter,
            out,
        } => {
            let mics = edmtools::io::read_points_csv(&mics)?;
            let echoes = EchoSet::new(read_times_json(&times)?, speed)?;
            let window = match window.as_str() {
                "auto" => None,
                w => Some(w.parse::<f64>().context("--window must be a number or 'auto'")?),
            };
            let opts = RoomOptions {
                window,
                expected_jitter: jitter,
                tau,
                ..RoomOptions::default()
            };
            let found = reconstruct_room(&mics, &echoes, &opts)?;
            let mut text = String::from("x,y,z,score");
            for i in 0..mics.len() {
                text.push_str(&format!(",echo{i}"));
            }
            text.push('\n');
            for f in &found {
                let p = &f.position;
                text.push_str(&format!("{},{},{},{}", p[0], p[1], p[2], f.score));
                for e in &f.echo_indices {
                    text.push_str(&format!(",{e}"));
                }
                text.push('\n');
            }
            match out {
                Some(p) => std::fs::write(p, text)?,
                None => print!("{text}"),
            }
        }
        Command::Turnpike { distances } => {
            let m = read_matrix_csv(&distances)?;
            let ms = DistanceMultiset::new(m.iter().copied().collect())?;
            let sols = turnpike_recover(&ms)?;
            if sols.is_empty() {
                eprintln!("no configuration matches these distances");
            }
            for s in sols {
                let row: Vec<String> = s.iter().map(|v| format!("{v}")).collect();
                println!("{}", row.join(","));
            }
        }
        Command::Bench {
            scenario,
            spec,
            out,
            jitter_on,
        } => {
            let text = std::fs::read_to_string(&spec).with_context(|| format!("reading {}", spec.display()))?;
            if scenario == ScenarioArg::EchoRooms {
                let spec = EchoRoomSpec::from_json(&text)?;
                let res = harness::run_echo_rooms(&spec)?;
                harness::write_echo_csv(&res, std::fs::File::create(&out)?)?;
                return Ok(ExitCode::SUCCESS);
            }
            let mut spec = ExperimentSpec::from_json(&text)?;
            let wanted = match scenario {
                ScenarioArg::RandomDeletion => Scenario::RandomDeletion,
                _ => Scenario::Mdu,
            };
            if spec.scenario != wanted {
                bail!("--scenario does not match the scenario in the spec file");
            }
            if let Some(j) = jitter_on {
                spec.jitter_on = match j {
                    JitterArg::Squared => JitterOn::Squared,
                    JitterArg::Sqrt => JitterOn::Sqrt,
                };
            }
            let res = match wanted {
                Scenario::RandomDeletion => harness::run_random_deletion(&spec)?,
                Scenario::Mdu => harness::run_mdu(&spec)?,
            };
            harness::emit_csv(&res, &out)?;
        }
        Command::SwissDemo { out } => {
            let report = harness::swiss_demo()?;
            save_points_csv(&report.points, &out)?;
            println!("{}", report.energy_fraction);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
