#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

pub fn mmcm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mmcm"))
        .args(args)
        .env_remove("MMCM_WORKERS")
        .output()
        .expect("binary runs")
}

pub fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Writes `spec` next to `out` and runs `mmcm synth`; returns the manifest path.
pub fn synth(out: &Path, spec: Value) -> PathBuf {
    let spec_path = out.with_extension("spec.json");
    fs::write(&spec_path, spec.to_string()).unwrap();
    let o = mmcm(&["synth", "--spec", p(&spec_path), "--out", p(out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    out.join("manifest.json")
}

pub fn spec(w: u32, h: u32, n: usize, rho: f64, c: f64, depth: &str, dataset: &str) -> Value {
    json!({
        "width": w,
        "height": h,
        "n_models": n,
        "target_pair_agreement": rho,
        "confidence_value": c,
        "depth_pattern": depth,
        "seed": 42,
        "dataset_id": dataset,
    })
}

fn prefix_paths(v: &mut Value, prefix: &str) {
    match v {
        Value::Object(map) => {
            for (k, x) in map.iter_mut() {
                if matches!(k.as_str(), "labels" | "confidence" | "depth") {
                    if let Value::String(s) = x {
                        *s = format!("{prefix}/{s}");
                    }
                } else {
                    prefix_paths(x, prefix);
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(|x| prefix_paths(x, prefix)),
        _ => {}
    }
}

/// Combines manifests of sibling corpus directories under `root` into
/// `root/manifest.json`.
pub fn merge(root: &Path, parts: &[&str]) -> PathBuf {
    let mut merged: Option<Value> = None;
    for part in parts {
        let text = fs::read_to_string(root.join(part).join("manifest.json")).unwrap();
        let mut m: Value = serde_json::from_str(&text).unwrap();
        prefix_paths(&mut m, part);
        match &mut merged {
            None => merged = Some(m),
            Some(acc) => {
                let ds = m["datasets"].as_array().unwrap().clone();
                acc["datasets"].as_array_mut().unwrap().extend(ds);
            }
        }
    }
    let path = root.join("manifest.json");
    fs::write(&path, merged.unwrap().to_string()).unwrap();
    path
}

pub fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

pub fn find(dir: &Path, prefix: &str) -> PathBuf {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.file_name().unwrap().to_str().unwrap().starts_with(prefix))
        .unwrap_or_else(|| panic!("no {prefix}* in {}", dir.display()))
}
