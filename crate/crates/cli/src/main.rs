mod config;

use std::fmt::Write as _;
use std::path::Path;
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;
use serde::Serialize;
use serde_json::{json, Value};

use idconc::certificate::fmt_float;
use idconc::verification::{exit_code, verify_bound};
use idconc::{pipeline, BoundCertificate, TailEstimate, VERSION};

use config::{cfg_err, parse_list, Cli, Command, Format, ReportArgs, RunArgs, SweepArgs};

/// CSV with the resolved config in leading `#` comment lines.
fn embed_csv<C: Serialize>(cfg: &C, body: &str) -> String {
    let cfg = serde_json::to_string(cfg).expect("config serializes");
    format!("# idconc {VERSION}\n# config {cfg}\n{body}")
}

fn embed_json<C: Serialize, T: Serialize>(cfg: &C, key: &str, value: &T) -> String {
    let mut out = json!({ "idconc_version": VERSION, "config": cfg });
    out[key] = serde_json::to_value(value).expect("artifact serializes");
    let mut s = serde_json::to_string_pretty(&out).expect("artifact serializes");
    s.push('\n');
    s
}

fn write_file(dir: &Path, name: &str, contents: &str) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("--out: cannot create {}", dir.display()))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).with_context(|| format!("--out: cannot write {}", path.display()))
}

fn emit(out: Option<&Path>, name: &str, contents: &str) -> anyhow::Result<()> {
    match out {
        Some(dir) => write_file(dir, name, contents),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

fn ext(f: Format) -> &'static str {
    match f {
        Format::Csv => "csv",
        Format::Json => "json",
    }
}

fn bound(args: &RunArgs) -> anyhow::Result<u8> {
    let c = &args.common;
    let cfg = c.resolved("bound", vec![args.d], vec![args.p], vec![args.eps])?;
    let (spec, req) = c.request(args.d, args.p, args.eps)?;
    let cert = pipeline::bound(&spec, &req, &c.monte_carlo()?)?;
    let body = match c.format {
        Format::Csv => embed_csv(&cfg, &cert.to_csv()),
        Format::Json => embed_json(&cfg, "certificate", &cert),
    };
    emit(c.out.as_deref(), &format!("certificate.{}", ext(c.format)), &body)?;
    Ok(0)
}

fn verify(args: &RunArgs) -> anyhow::Result<u8> {
    let c = &args.common;
    let cfg = c.resolved("verify", vec![args.d], vec![args.p], vec![args.eps])?;
    let (spec, req) = c.request(args.d, args.p, args.eps)?;
    let out = pipeline::verify(&spec, &req, &c.monte_carlo()?)?;
    let report = match c.format {
        Format::Csv => embed_csv(&cfg, &out.report.to_csv()),
        Format::Json => embed_json(&cfg, "report", &out.report),
    };
    match c.out.as_deref() {
        Some(dir) => {
            write_file(dir, "certificate.json", &embed_json(&cfg, "certificate", &out.certificate))?;
            write_file(dir, "tail.json", &embed_json(&cfg, "tail", &out.tail))?;
            write_file(dir, &format!("report.{}", ext(c.format)), &report)?;
            write_file(dir, "report.txt", &out.report.to_text())?;
            print!("{}", out.report.to_text());
        }
        None => print!("{report}"),
    }
    Ok(exit_code(&[out.report.verdict]) as u8)
}

fn sweep(args: &SweepArgs) -> anyhow::Result<u8> {
    let c = &args.common;
    let ds: Vec<usize> = parse_list("d", &args.d)?;
    let ps: Vec<f64> = parse_list("p", &args.p)?;
    let eps: Vec<f64> = parse_list("eps", &args.eps)?;
    let cfg = c.resolved("sweep", ds.clone(), ps.clone(), eps.clone())?;
    let mc = c.monte_carlo()?;

    let mut rows = Vec::new();
    for &d in &ds {
        for &p in &ps {
            for &e in &eps {
                let (spec, req) = c.request(d, p, e)?;
                let cert = pipeline::bound(&spec, &req, &mc)
                    .with_context(|| format!("sweep point d = {d}, p = {p}, eps = {e}"))?;
                rows.push((d, p, e, cert));
            }
        }
    }
    let body = match c.format {
        Format::Csv => {
            let mut s = String::from("d,p,eps,x,bound,neg_log_bound\n");
            for (d, p, e, cert) in &rows {
                for i in 0..cert.x_grid.len() {
                    let _ = writeln!(
                        s,
                        "{d},{},{},{},{},{}",
                        fmt_float(*p),
                        fmt_float(*e),
                        fmt_float(cert.x_grid[i]),
                        fmt_float(cert.bound[i]),
                        fmt_float(cert.neg_log_bound[i])
                    );
                }
            }
            embed_csv(&cfg, &s)
        }
        Format::Json => {
            let pts: Vec<Value> = rows
                .iter()
                .map(|(d, p, e, cert)| json!({ "d": d, "p": p, "eps": e, "certificate": cert }))
                .collect();
            embed_json(&cfg, "sweep", &pts)
        }
    };
    emit(c.out.as_deref(), &format!("sweep.{}", ext(c.format)), &body)?;
    Ok(0)
}

/// Artifact stored either bare or wrapped under `key` by this tool.
fn read_artifact<T: serde::de::DeserializeOwned>(path: &Path, key: &str, flag: &str) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| cfg_err(format!("--{flag}: cannot read {}: {e}", path.display())))?;
    let mut v: Value = serde_json::from_str(&text).map_err(|e| cfg_err(format!("--{flag}: invalid JSON: {e}")))?;
    if let Some(inner) = v.get_mut(key) {
        v = inner.take();
    }
    Ok(serde_json::from_value(v).map_err(|e| cfg_err(format!("--{flag}: not a {key}: {e}")))?)
}

fn report(args: &ReportArgs) -> anyhow::Result<u8> {
    let cert: BoundCertificate = read_artifact(&args.certificate, "certificate", "certificate")?;
    let tail: TailEstimate = read_artifact(&args.tail, "tail", "tail")?;
    let rep = verify_bound(&cert, &tail, args.confidence)?;
    let cfg = json!({
        "command": "report",
        "certificate": args.certificate,
        "tail": args.tail,
        "confidence": args.confidence,
        "format": args.format,
    });
    let body = match args.format {
        Format::Csv => embed_csv(&cfg, &rep.to_csv()),
        Format::Json => embed_json(&cfg, "report", &rep),
    };
    emit(args.out.as_deref(), &format!("report.{}", ext(args.format)), &body)?;
    if args.out.is_some() {
        print!("{}", rep.to_text());
    }
    Ok(exit_code(&[rep.verdict]) as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Bound(a) => bound(a),
        Command::Verify(a) => verify(a),
        Command::Sweep(a) => sweep(a),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("idconc: {e:#}");
            ExitCode::from(2)
        }
    }
}
