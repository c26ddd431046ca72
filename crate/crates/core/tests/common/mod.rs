#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

pub fn config(name: &str) -> PathBuf {
    configs_dir().join(name)
}

pub fn shipped_configs() -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(configs_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "cfg"))
        .collect();
    v.sort();
    v
}

pub fn sumhess(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sumhess")).args(args).output().unwrap()
}

/// A CLI invocation writing files into a directory, identified by the
/// files it is expected to produce.
pub struct Run {
    pub name: &'static str,
    pub args: Vec<String>,
    pub outputs: Vec<&'static str>,
}

pub fn determinism_runs() -> Vec<Run> {
    let cfg = |n: &str| config(n).to_string_lossy().into_owned();
    let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    vec![
        Run {
            name: "verify",
            args: s(&["verify", "--n", "3", "--k", "2", "--alpha", "0.5", "--count", "200", "--spectral-count", "20", "--seed", "3", "--out", "{dir}/verify.csv"]),
            outputs: vec!["verify.csv"],
        },
        Run {
            name: "sample",
            args: s(&["sample", "--n", "4", "--k", "2", "--alpha", "2", "--count", "50", "--seed", "9", "--out", "{dir}/sample.csv"]),
            outputs: vec!["sample.csv"],
        },
        Run {
            name: "solve",
            args: vec![
                "solve".into(),
                cfg("linear3d.cfg"),
                "--field".into(),
                "{dir}/solved.field".into(),
                "--trace".into(),
                "{dir}/trace.csv".into(),
            ],
            outputs: vec!["solved.field", "trace.csv"],
        },
        Run {
            name: "estimate",
            args: s(&["estimate", "{dir}/solved.field", "--beta", "1,2", "--out", "{dir}/estimate.csv"]),
            outputs: vec!["estimate.csv"],
        },
        Run {
            name: "report",
            args: vec![
                "report".into(),
                cfg("zero_k3.cfg"),
                cfg("disc_unit.cfg"),
                "--out".into(),
                "{dir}/report.csv".into(),
            ],
            outputs: vec!["report.csv"],
        },
    ]
}

/// Runs every determinism command in two fresh directories and returns,
/// per command, whether all outputs were produced and bitwise equal.
pub fn check_determinism() -> Vec<(&'static str, Result<(), String>)> {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut out = Vec::new();
    for run in determinism_runs() {
        let mut texts = Vec::new();
        let mut failure = None;
        for d in &dirs {
            let dir = d.path().to_string_lossy().into_owned();
            let args: Vec<String> = run.args.iter().map(|a| a.replace("{dir}", &dir)).collect();
            let args: Vec<&str> = args.iter().map(String::as_str).collect();
            let o = sumhess(&args);
            if !o.status.success() {
                failure = Some(format!("exit {:?}: {}", o.status.code(), String::from_utf8_lossy(&o.stderr)));
                break;
            }
            let files: Vec<Vec<u8>> = run.outputs.iter().map(|f| std::fs::read(d.path().join(f)).unwrap_or_default()).collect();
            texts.push(files);
        }
        let result = match failure {
            Some(f) => Err(f),
            None if texts[0].iter().any(|t| t.is_empty()) => Err("missing output".into()),
            None if texts[0] != texts[1] => Err("outputs differ".into()),
            None => Ok(()),
        };
        out.push((run.name, result));
    }
    out
}
