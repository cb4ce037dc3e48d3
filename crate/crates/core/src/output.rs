//! CSV and manifest emission for a study.
//!
//! Every number is written with 9 significant digits, every time in
//! microseconds with 4 decimals. `manifest.json` lists each written file
//! with its SHA-256 and is written last.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::balance::{InfoLevel, StreamOutput};
use crate::cbit::{CbitReport, Normalization};
use crate::error::{Error, Result};
use crate::model::GridSpec;
use crate::pipeline::{Study, StudyAnalysis, VariationAnalysis};
use crate::solver::{SimulationRecord, Snapshot};

/// How far the orchestration goes. Each stage writes the outputs of the
/// stages before it as well.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Simulate,
    Diff,
    Balance,
    Cbit,
}

impl Stage {
    pub fn label(self) -> &'static str {
        match self {
            Stage::Simulate => "simulate",
            Stage::Diff => "diff",
            Stage::Balance => "balance",
            Stage::Cbit => "cbit-report",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
    pub description: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub run: String,
    pub stage: String,
    pub normalization: String,
    /// SHA-256 of the resolved configuration text.
    pub config_sha256: String,
    pub n_cells: usize,
    pub dx: f64,
    pub dt: f64,
    pub n_steps: usize,
    pub variations: Vec<String>,
    pub files: Vec<ManifestEntry>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Manifest> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn entry(&self, path: &str) -> Option<&ManifestEntry> {
        self.files.iter().find(|f| f.path == path)
    }

    /// Read a listed file, refusing it if its checksum no longer matches.
    pub fn read(&self, dir: &Path, path: &str) -> Result<Vec<u8>> {
        let entry = self
            .entry(path)
            .ok_or_else(|| Error::MissingData(format!("{path} is not in the manifest")))?;
        let full = dir.join(path);
        let bytes = fs::read(&full).map_err(|e| Error::io(&full, e))?;
        if sha256_hex(&bytes) != entry.sha256 {
            return Err(Error::InvalidAnalysis(format!("{path}: checksum mismatch")));
        }
        Ok(bytes)
    }

    /// Paths whose contents differ from the recorded checksum.
    pub fn check(&self, dir: &Path) -> Result<Vec<String>> {
        let mut bad = Vec::new();
        for f in &self.files {
            let full = dir.join(&f.path);
            let bytes = fs::read(&full).map_err(|e| Error::io(&full, e))?;
            if sha256_hex(&bytes) != f.sha256 {
                bad.push(f.path.clone());
            }
        }
        Ok(bad)
    }
}

/// Writes files into one directory and records them.
#[derive(Debug)]
pub struct OutputWriter {
    dir: PathBuf,
    files: Vec<ManifestEntry>,
}

impl OutputWriter {
    pub fn create(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(OutputWriter { dir, files: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn files(&self) -> &[ManifestEntry] {
        &self.files
    }

    pub fn write(&mut self, name: &str, contents: &str, description: &str) -> Result<()> {
        if self.files.iter().any(|f| f.path == name) {
            return Err(Error::InvalidAnalysis(format!("output {name} written twice")));
        }
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        self.files.push(ManifestEntry {
            path: name.to_owned(),
            bytes: contents.len() as u64,
            sha256: sha256_hex(contents.as_bytes()),
            description: description.to_owned(),
        });
        Ok(())
    }

    /// Finish with the manifest; nothing may be written afterwards.
    pub fn finish(self, mut manifest: Manifest) -> Result<Manifest> {
        manifest.files = self.files;
        let text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| Error::InvalidAnalysis(format!("manifest serialisation: {e}")))?;
        let path = self.dir.join(MANIFEST_FILE);
        fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
        Ok(manifest)
    }
}

/// Time in microseconds as used in file names and time columns.
pub fn time_tag(t: f64) -> String {
    format!("{:.4}", t * 1e6)
}

/// Columns of equal length as CSV.
pub fn csv_columns(header: &[&str], time: Option<&[f64]>, columns: &[&[f64]]) -> String {
    let rows = time.map(|t| t.len()).or_else(|| columns.first().map(|c| c.len())).unwrap_or(0);
    let mut s = header.join(",");
    s.push('\n');
    for i in 0..rows {
        let mut first = true;
        if let Some(t) = time {
            let _ = write!(s, "{:.4}", t[i] * 1e6);
            first = false;
        }
        for c in columns {
            if !first {
                s.push(',');
            }
            first = false;
            let _ = write!(s, "{:.8e}", c[i]);
        }
        s.push('\n');
    }
    s
}

fn node_csv(grid: &GridSpec, column: &str, v: &[f64]) -> String {
    let mut s = format!("node,x_m,{column}\n");
    for (i, x) in v.iter().enumerate() {
        let _ = writeln!(s, "{i},{:.8e},{x:.8e}", grid.node_x(i));
    }
    s
}

fn cell_csv(grid: &GridSpec, header: &str, columns: &[&[f64]]) -> String {
    let mut s = format!("cell,x_m,{header}\n");
    let n = columns.first().map(|c| c.len()).unwrap_or(0);
    for j in 0..n {
        let _ = write!(s, "{j},{:.8e}", grid.cell_center(j));
        for c in columns {
            let _ = write!(s, ",{:.8e}", c[j]);
        }
        s.push('\n');
    }
    s
}

fn write_snapshot(w: &mut OutputWriter, grid: &GridSpec, prefix: &str, snap: &Snapshot, what: &str) -> Result<()> {
    let view = snap.view();
    let tag = time_tag(grid.level_time(snap.level));
    let stress: Vec<f64> = (0..snap.stress.len()).map(|j| view.colocated_stress(j)).collect();
    w.write(
        &format!("{prefix}_v_{tag}us.csv"),
        &node_csv(grid, "v", &snap.v),
        &format!("{what} particle velocity at {tag} us"),
    )?;
    w.write(
        &format!("{prefix}_t_{tag}us.csv"),
        &cell_csv(grid, "stress", &[&stress]),
        &format!("{what} stress at {tag} us"),
    )
}

fn write_base(w: &mut OutputWriter, base: &SimulationRecord) -> Result<()> {
    let grid = base.grid;
    let time = base.level_times();
    w.write(
        "base_sensors.csv",
        &csv_columns(&["time_us", "v_left", "v_right"], Some(&time), &[&base.sensor_left, &base.sensor_right]),
        "base run particle velocity at both sensors",
    )?;
    if let Some(e) = &base.energy {
        w.write(
            "base_energy.csv",
            &csv_columns(
                &["time_us", "kinetic", "potential", "total"],
                Some(&e.time),
                &[&e.kinetic, &e.potential, &e.total],
            ),
            "base run energy per unit area",
        )?;
    }
    for snap in &base.snapshots {
        write_snapshot(w, &grid, "base", snap, "base run")?;
    }
    for p in &base.probes {
        w.write(
            &format!("base_probe_{}.csv", p.cell),
            &csv_columns(&["time_us", "v", "stress"], Some(&time), &[&p.v, &p.stress]),
            &format!("base run probe at cell {}", p.cell),
        )?;
    }
    Ok(())
}

fn write_diff(w: &mut OutputWriter, grid: &GridSpec, va: &VariationAnalysis) -> Result<()> {
    let name = &va.prepared.name;
    let o = &va.output;
    let scale = 1.0 / (2.0 * va.prepared.spec.delta);
    let dl: Vec<f64> = o.sensors.diff_left.iter().map(|x| x * scale).collect();
    let dr: Vec<f64> = o.sensors.diff_right.iter().map(|x| x * scale).collect();
    w.write(
        &format!("{name}_diff_sensors.csv"),
        &csv_columns(
            &["time_us", "dv_dp_left", "dv_dp_right", "max_abs_difference"],
            Some(&o.trace.time),
            &[&dl, &dr, &o.max_difference],
        ),
        &format!("{name}: differential velocity at both sensors"),
    )?;
    for snap in &o.diff_snapshots {
        write_snapshot(w, grid, &format!("{name}_diff"), snap, &format!("{name} differential field"))?;
    }
    Ok(())
}

const INFO_COLUMNS: &str = "i_kin,i_pot,i_density,q_f,q_v0,q_v,q_t0,q_t,net_source";

fn info_csv(grid: &GridSpec, info: &InfoLevel) -> String {
    let density: Vec<f64> = (0..info.i_kin.len()).map(|j| info.density(j)).collect();
    cell_csv(
        grid,
        INFO_COLUMNS,
        &[
            &info.i_kin,
            &info.i_pot,
            &density,
            &info.q_f,
            &info.q_v0,
            &info.q_v,
            &info.q_t0,
            &info.q_t,
            &info.net_source,
        ],
    )
}

fn write_balance(w: &mut OutputWriter, grid: &GridSpec, va: &VariationAnalysis) -> Result<()> {
    let name = &va.prepared.name;
    let t = &va.output.trace;
    let mut header = vec![
        "time_us",
        "i_kin",
        "i_pot",
        "i_total",
        "source_total",
        "q_f",
        "q_v0",
        "q_v",
        "q_t0",
        "q_t",
    ];
    let mut columns: Vec<&[f64]> = vec![
        &t.i_kin,
        &t.i_pot,
        &t.i_total,
        &t.source_total,
        &t.q_f,
        &t.q_v0,
        &t.q_v,
        &t.q_t0,
        &t.q_t,
    ];
    let labels: Vec<(String, String)> = t
        .boundaries
        .iter()
        .map(|b| (format!("source_{}", b.label), format!("cumulative_{}", b.label)))
        .collect();
    let cumulative: Vec<Vec<f64>> = t.boundaries.iter().map(|b| b.cumulative(grid.dt)).collect();
    for ((b, (s, c)), cum) in t.boundaries.iter().zip(&labels).zip(&cumulative) {
        header.push(s);
        header.push(c);
        columns.push(&b.source);
        columns.push(cum);
    }
    w.write(
        &format!("{name}_balance.csv"),
        &csv_columns(&header, Some(&t.time), &columns),
        &format!("{name}: integrated information, sources and boundary source traces"),
    )?;
    for (level, info) in &va.output.info_snapshots {
        let tag = time_tag(grid.level_time(*level));
        w.write(
            &format!("{name}_info_{tag}us.csv"),
            &info_csv(grid, info),
            &format!("{name}: information density and sources at {tag} us"),
        )?;
        w.write(
            &format!("{name}_flux_{tag}us.csv"),
            &node_csv(grid, "i_flux", &info.i_flux),
            &format!("{name}: information flux at {tag} us"),
        )?;
    }
    Ok(())
}

/// Per-variation summary of the balance analysis.
pub fn balance_summary(grid: &GridSpec, analysis: &StudyAnalysis) -> String {
    let mut s = String::from(
        "variation,case,e_f,normalized_residual,max_residual,density_min,density_max,source_left,source_right\n",
    );
    for va in &analysis.variations {
        let o: &StreamOutput = &va.output;
        let integral = |label: &str| o.trace.boundary(label).map(|b| b.integral(grid.dt)).unwrap_or(0.0);
        let _ = writeln!(
            s,
            "{},{:?},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e}",
            va.prepared.name,
            va.context.case(),
            va.e_f,
            o.residual.normalized(),
            o.residual.max_residual,
            o.density_min,
            o.density_max,
            integral("left"),
            integral("right"),
        );
    }
    s
}

/// Result of one orchestrated invocation.
#[derive(Debug)]
pub struct RunOutputs {
    pub manifest: Manifest,
    pub analysis: Option<StudyAnalysis>,
    pub report: Option<CbitReport>,
}

/// Run a study up to `stage` and write its outputs into `dir`.
pub fn run_stage(study: &Study, stage: Stage, normalization: Normalization, dir: &Path) -> Result<RunOutputs> {
    let grid = study.grid();
    let config_text = study.config.to_toml()?;
    let mut w = OutputWriter::create(dir)?;
    w.write("config_resolved.toml", &config_text, "resolved configuration")?;

    let (base, analysis) = if stage == Stage::Simulate {
        (study.run_base()?, None)
    } else {
        let a = study.analyze()?;
        (a.base.clone(), Some(a))
    };
    write_base(&mut w, &base)?;

    let mut report = None;
    if let Some(a) = &analysis {
        for va in &a.variations {
            write_diff(&mut w, &grid, va)?;
        }
        if stage >= Stage::Balance {
            for va in &a.variations {
                write_balance(&mut w, &grid, va)?;
            }
            w.write("balance_summary.csv", &balance_summary(&grid, a), "balance residuals and source integrals")?;
        }
        if stage >= Stage::Cbit {
            for va in &a.variations {
                let ex = study.example_series(va, normalization)?;
                w.write(
                    &format!("{}_sensor_info.csv", va.prepared.name),
                    &csv_columns(
                        &["time_us", "info_left_cbits_per_m", "info_right_cbits_per_m"],
                        Some(&ex.left.time),
                        &[&ex.left.series, &ex.right.series],
                    ),
                    &format!("{}: uncalibrated information density at both sensors", va.prepared.name),
                )?;
            }
            let r = study.cbit_report(a, normalization)?;
            w.write("cbit_report.csv", &r.to_csv(), "Cbit report")?;
            w.write("cbit_report.txt", &r.to_table(), "Cbit report as a table")?;
            report = Some(r);
        }
    }

    let manifest = w.finish(Manifest {
        run: study.config.name.clone(),
        stage: stage.label().to_owned(),
        normalization: normalization.label().to_owned(),
        config_sha256: sha256_hex(config_text.as_bytes()),
        n_cells: grid.n_cells,
        dx: grid.dx,
        dt: grid.dt,
        n_steps: grid.n_steps,
        variations: study.config.variations.iter().map(|v| v.name.clone()).collect(),
        files: Vec::new(),
    })?;
    Ok(RunOutputs {
        manifest,
        analysis,
        report,
    })
}
