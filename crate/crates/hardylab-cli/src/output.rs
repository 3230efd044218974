//! Plain-text result persistence: a JSON summary with 17-significant-digit
//! floats, comma-separated tables for fields, fluxes and time series, and an
//! atomically written run manifest.

use crate::config::RunConfig;
use hardylab::{BoundaryField, Field, Grid};
use sha2::{Digest, Sha256};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Ordered JSON value; f64 rendered with 17 significant digits.
#[derive(Debug, Clone)]
pub enum Json {
    Num(f64),
    Int(i64),
    Str(String),
    Bool(bool),
    List(Vec<Json>),
    Obj(Vec<(String, Json)>),
}

pub fn fmt_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        // JSON has no literals for these; stringify
        format!("\"{x}\"")
    }
}

impl Json {
    fn render_into(&self, out: &mut String, indent: usize) {
        let pad = "  ".repeat(indent);
        match self {
            Json::Num(x) => out.push_str(&fmt_float(*x)),
            Json::Int(i) => out.push_str(&i.to_string()),
            Json::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
            Json::Str(s) => {
                out.push('"');
                for c in s.chars() {
                    match c {
                        '"' => out.push_str("\\\""),
                        '\\' => out.push_str("\\\\"),
                        '\n' => out.push_str("\\n"),
                        c => out.push(c),
                    }
                }
                out.push('"');
            }
            Json::List(items) => {
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    item.render_into(out, indent);
                }
                out.push(']');
            }
            Json::Obj(pairs) => {
                out.push_str("{\n");
                for (i, (k, v)) in pairs.iter().enumerate() {
                    out.push_str(&pad);
                    out.push_str("  \"");
                    out.push_str(k);
                    out.push_str("\": ");
                    v.render_into(out, indent + 1);
                    if i + 1 < pairs.len() {
                        out.push(',');
                    }
                    out.push('\n');
                }
                out.push_str(&pad);
                out.push('}');
            }
        }
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        self.render_into(&mut s, 0);
        s.push('\n');
        s
    }
}

/// Collects files to write and timing entries for the manifest.
pub struct RunOutput {
    pub dir: PathBuf,
    pub summary: Vec<(String, Json)>,
    pub timings: Vec<(String, f64)>,
    files: Vec<(String, String)>,
}

impl RunOutput {
    pub fn new(dir: &Path) -> RunOutput {
        RunOutput {
            dir: dir.to_path_buf(),
            summary: Vec::new(),
            timings: Vec::new(),
            files: Vec::new(),
        }
    }

    pub fn put(&mut self, key: &str, value: Json) {
        self.summary.push((key.to_string(), value));
    }

    pub fn timing(&mut self, op: &str, seconds: f64) {
        self.timings.push((op.to_string(), seconds));
    }

    /// Field table `r,theta,value`.
    pub fn field_csv(&mut self, name: &str, grid: &Grid, field: &Field) {
        let mut s = String::from("r,theta,value\n");
        for idx in 0..field.len() {
            let (r, t) = grid.node_polar(idx);
            s.push_str(&format!(
                "{},{},{}\n",
                fmt_float(r),
                fmt_float(t),
                fmt_float(field.values[idx])
            ));
        }
        self.files.push((format!("{name}.csv"), s));
    }

    /// Flux table `t,face_id,value` for a sequence of boundary fields.
    pub fn flux_csv(&mut self, name: &str, times: &[f64], fluxes: &[BoundaryField]) {
        let mut s = String::from("t,face_id,value\n");
        for (t, bf) in times.iter().zip(fluxes) {
            for (fid, v) in bf.values.iter().enumerate() {
                s.push_str(&format!("{},{fid},{}\n", fmt_float(*t), fmt_float(*v)));
            }
        }
        self.files.push((format!("{name}.csv"), s));
    }

    /// Control table `t,face_id,value` for per-step face samples.
    pub fn control_csv(&mut self, name: &str, times: &[f64], rows: &[Vec<f64>], faces: &[usize]) {
        let mut s = String::from("t,face_id,value\n");
        for (t, row) in times.iter().zip(rows) {
            for (f, v) in faces.iter().zip(row) {
                s.push_str(&format!("{},{f},{}\n", fmt_float(*t), fmt_float(*v)));
            }
        }
        self.files.push((format!("{name}.csv"), s));
    }

    /// Time-series table `t,energy,mass`.
    pub fn series_csv(&mut self, name: &str, times: &[f64], energy: &[f64], mass: &[f64]) {
        let mut s = String::from("t,energy,mass\n");
        for i in 0..times.len() {
            s.push_str(&format!(
                "{},{},{}\n",
                fmt_float(times[i]),
                fmt_float(energy[i]),
                fmt_float(mass[i])
            ));
        }
        self.files.push((format!("{name}.csv"), s));
    }

    pub fn table_csv(&mut self, name: &str, header: &str, rows: &[Vec<f64>]) {
        let mut s = format!("{header}\n");
        for row in rows {
            let cells: Vec<String> = row.iter().map(|v| fmt_float(*v)).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        self.files.push((format!("{name}.csv"), s));
    }

    /// Write everything. The summary goes first, the manifest last and
    /// atomically; any I/O failure leaves an `INCOMPLETE` marker behind.
    pub fn finish(self, config: &RunConfig, wall_seconds: f64) -> std::io::Result<()> {
        match self.try_finish(config, wall_seconds) {
            Ok(()) => Ok(()),
            Err(e) => {
                let _ = fs::write(
                    self.dir.join("INCOMPLETE"),
                    format!("output aborted: {e}\n"),
                );
                Err(e)
            }
        }
    }

    fn try_finish(&self, config: &RunConfig, wall_seconds: f64) -> std::io::Result<()> {
        fs::create_dir_all(&self.dir)?;
        let summary = Json::Obj(self.summary.clone()).render();
        fs::write(self.dir.join("summary.json"), &summary)?;
        for (name, contents) in &self.files {
            fs::write(self.dir.join(name), contents)?;
        }

        let mut hasher = Sha256::new();
        hasher.update(config.canonical_string().as_bytes());
        let hash = hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect::<String>();

        let manifest = Json::Obj(vec![
            ("artifact_version".into(), Json::Str(env!("CARGO_PKG_VERSION").into())),
            ("command".into(), Json::Str(config.command.to_string())),
            (
                "config".into(),
                Json::Obj(vec![
                    ("dimension".into(), Json::Int(config.dimension as i64)),
                    ("nr".into(), Json::Int(config.n_r as i64)),
                    ("ntheta".into(), Json::Int(config.n_theta as i64)),
                    ("radius".into(), Json::Num(config.radius)),
                    ("lambda".into(), Json::Num(config.lambda)),
                    ("alpha".into(), Json::Num(config.alpha)),
                    ("T".into(), Json::Num(config.t_final)),
                    ("dt".into(), Json::Num(config.dt)),
                    ("tol".into(), Json::Num(config.tol)),
                    ("max_iter".into(), Json::Int(config.max_iter as i64)),
                    ("seed".into(), Json::Int(config.seed as i64)),
                    ("k".into(), Json::Int(config.k as i64)),
                    ("modes".into(), Json::Int(config.modes as i64)),
                    ("random".into(), Json::Int(config.random as i64)),
                    ("power".into(), Json::Int(config.power as i64)),
                    ("mode_index".into(), Json::Int(config.mode_index as i64)),
                    (
                        "epsilons".into(),
                        Json::List(config.epsilons.iter().map(|&e| Json::Num(e)).collect()),
                    ),
                    (
                        "resolutions".into(),
                        Json::List(
                            config
                                .resolutions
                                .iter()
                                .map(|&r| Json::Int(r as i64))
                                .collect(),
                        ),
                    ),
                    ("exploratory".into(), Json::Bool(config.exploratory)),
                ]),
            ),
            (
                "flag_overrides".into(),
                Json::List(config.overrides.iter().map(|s| Json::Str(s.clone())).collect()),
            ),
            ("input_hash".into(), Json::Str(hash)),
            ("wall_clock_seconds".into(), Json::Num(wall_seconds)),
            (
                "timings".into(),
                Json::Obj(
                    self.timings
                        .iter()
                        .map(|(k, v)| (k.clone(), Json::Num(*v)))
                        .collect(),
                ),
            ),
            (
                "summary_keys".into(),
                Json::List(
                    self.summary
                        .iter()
                        .map(|(k, _)| Json::Str(k.clone()))
                        .collect(),
                ),
            ),
        ])
        .render();

        // manifest written atomically at run end
        let tmp = self.dir.join("manifest.json.tmp");
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(manifest.as_bytes())?;
            f.sync_all()?;
        }
        fs::rename(&tmp, self.dir.join("manifest.json"))?;
        Ok(())
    }
}
