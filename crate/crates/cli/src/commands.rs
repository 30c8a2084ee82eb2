use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use geokernel::certificate::WitnessCertificate;
use geokernel::embed::{embedding_for, space_witness, verify_isometry};
use geokernel::pointset::{PointSet, RunReport};
use geokernel::spectral::pd_verdict;
use geokernel::stein::probe;
use geokernel::theta::{bound_rhs, leading_term, partial_theta, PartialThetaQuery};
use geokernel::witness::{circle_certificate, circle_spectrum, lambda_profile, w_half};
use geokernel::{gram, jacobi_eigenvalues, metric, validate_point, verify_certificate, KernelParam, Point, Verdict};
use serde_json::json;

use crate::{Command, WitnessCommand};

const EXIT_NOT_PSD: u8 = 2;
const EXIT_EXHAUSTED: u8 = 3;

fn emit(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())?;
    if !text.ends_with('\n') {
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

fn emit_json<T: serde::Serialize>(value: &T) -> Result<()> {
    emit(&serde_json::to_string_pretty(value)?)
}

fn emit_certificate(cert: &WitnessCertificate, output: Option<&Path>) -> Result<()> {
    let text = cert.to_json_pretty() + "\n";
    match output {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => emit(&text),
    }
}

fn load_points(path: &Path, space: Option<geokernel::SpaceDescriptor>) -> Result<PointSet> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("{}: malformed JSON", path.display()))?;
    let set = if value.is_object() {
        let set = PointSet::from_json(&text).with_context(|| path.display().to_string())?;
        if let Some(s) = space {
            if s != set.space {
                bail!("{}: file space {} differs from --space {s}", path.display(), set.space);
            }
        }
        set
    } else {
        let Some(space) = space else {
            bail!("{}: a bare point array needs --space", path.display());
        };
        let points: Vec<Point> =
            serde_json::from_value(value).with_context(|| format!("{}: points", path.display()))?;
        for (i, p) in points.iter().enumerate() {
            validate_point(&space, p).with_context(|| format!("{}: points[{i}]", path.display()))?;
        }
        PointSet { space, points }
    };
    Ok(set)
}

pub fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::PdCheck { space, lambda, points } => {
            let set = load_points(&points, space)?;
            let k = gram(&set.space, &set.points, KernelParam::new(lambda)?)?;
            let report = jacobi_eigenvalues(&k.entries)?;
            let verdict = pd_verdict(&report, k.max_abs());
            emit_json(&RunReport::new(
                "pd-check",
                json!({ "space": set.space.to_string(), "lambda": lambda, "points": points.display().to_string(), "count": set.points.len() }),
                json!({ "verdict": verdict.verdict, "min_eigenvalue": verdict.min_eigenvalue, "tolerance": verdict.tolerance, "eigenvalues": report.values_f64() }),
                0,
            ))?;
            Ok(if verdict.verdict == Verdict::NotPsd { ExitCode::from(EXIT_NOT_PSD) } else { ExitCode::SUCCESS })
        }
        Command::CircleSpectrum { lambda, n, precision } => {
            let p = precision.resolve()?;
            let w = circle_spectrum(lambda, n, p)?;
            let mut csv = String::from("j,w_j\n");
            for (j, x) in w.iter().enumerate() {
                writeln!(csv, "{j},{}", x.to_decimal(p.digits()))?;
            }
            emit(&csv)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Witness(WitnessCommand::Circle { lambda, max_n, precision, output }) => {
            let p = precision.resolve()?;
            match circle_certificate(1.0, lambda, max_n, p)? {
                Some(cert) => {
                    emit_certificate(&cert, output.as_deref())?;
                    Ok(ExitCode::SUCCESS)
                }
                None => {
                    eprintln!("no witness with N <= {max_n} at lambda = {lambda}");
                    Ok(ExitCode::from(EXIT_EXHAUSTED))
                }
            }
        }
        Command::Witness(WitnessCommand::Space { target, lambda, max_n, output }) => match space_witness(&target, lambda, max_n)? {
            Some(cert) => {
                emit_certificate(&cert, output.as_deref())?;
                Ok(ExitCode::SUCCESS)
            }
            None => {
                eprintln!("no witness with N <= {max_n} at lambda = {lambda} for {target}");
                Ok(ExitCode::from(EXIT_EXHAUSTED))
            }
        },
        Command::LambdaProfile { n_list, precision } => {
            let rows = lambda_profile(&n_list, precision.resolve()?)?;
            let mut csv = String::from("N,lambda_crit\n");
            for r in rows {
                writeln!(csv, "{},{}", r.n, r.lambda_crit)?;
            }
            emit(&csv)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Theta { mu, r, n, precision } => {
            let p = precision.resolve()?;
            let mut csv = String::from("mu,r,N,value,truncation_bound,precision\n");
            for &m in &mu {
                for &rr in &r {
                    for &nn in &n {
                        let res = partial_theta(PartialThetaQuery { mu: m, r: rr, n: nn, precision: p })?;
                        writeln!(
                            csv,
                            "{m},{rr},{nn},{},{},{}",
                            res.value.to_decimal(p.digits()),
                            res.truncation_bound.to_decimal(6),
                            p.digits()
                        )?;
                    }
                }
            }
            emit(&csv)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::BoundCheck { mu, n_list, precision } => {
            let p = precision.resolve()?;
            let mut csv = String::from("mu,N,w_half,bound_rhs,leading_term,w_le_bound\n");
            for &m in &mu {
                for &nn in &n_list {
                    let w = w_half(m, nn, p)?;
                    let b = bound_rhs(m, nn, p)?;
                    let holds = w <= &b + &p.epsilon_shifted(5);
                    writeln!(
                        csv,
                        "{m},{nn},{},{},{},{holds}",
                        w.to_decimal(p.digits()),
                        b.to_decimal(p.digits()),
                        leading_term(m, nn)
                    )?;
                }
            }
            emit(&csv)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::SteinScan { dim, lambda, trials, points, seed } => {
            let report = probe(dim, lambda, trials, points, seed)?;
            let ok = report.witness.is_some() || report.in_set;
            emit_json(&RunReport::new(
                "stein-scan",
                json!({ "dim": dim, "lambda": lambda, "trials": trials, "points": points }),
                report,
                seed,
            ))?;
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(EXIT_EXHAUSTED) })
        }
        Command::EmbedVerify { target, pairs, seed } => {
            let map = embedding_for(&target)?;
            let dev = verify_isometry(&map, pairs, seed)?;
            emit(&format!("{} pairs={pairs} seed={seed} max_deviation={dev:e}", map.label()))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::VerifyCertificate { file } => {
            let text = std::fs::read_to_string(&file).with_context(|| format!("reading {}", file.display()))?;
            let cert = WitnessCertificate::from_json(&text)?;
            verify_certificate(&cert).with_context(|| format!("{}: verification failed", file.display()))?;
            emit(&format!(
                "ok: {} points on {}, lambda = {}, quad_form = {}",
                cert.order(),
                cert.space,
                cert.lambda,
                serde_json::to_string(&cert.quad_form)?
            ))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::SamplePoints { space, count, seed } => {
            let points = metric::sample_points(&space, seed, count)?;
            emit(&PointSet { space, points }.to_json_pretty())?;
            Ok(ExitCode::SUCCESS)
        }
    }
}
