//! CSV and JSON artifacts.

use crate::grid::{Grid1D, Grid2D};
use crate::potential::{HypothesisReport, Point, Potential, PotentialKind};
use crate::profile1d::{Cluster, HeteroclinicAtlas, Profile, StartSummary, Sublevel};
use crate::strip2d::{Field, SliceMetrics};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const PROFILE_HEADER: &str = "x,q1,q2";
pub const FIELD_HEADER: &str = "x,y,u1,u2";
pub const METRICS_HEADER: &str = "y,V,kinetic,E,dist_minus,dist_plus";

#[derive(Debug, Error)]
pub enum FileError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{path}, line {line}: {message}")]
    Format { path: PathBuf, line: usize, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> FileError + '_ {
    move |source| FileError::Io { path: path.to_path_buf(), source }
}

pub fn write_text(path: &Path, text: &str) -> Result<(), FileError> {
    fs::write(path, text).map_err(io_err(path))
}

pub fn read_text(path: &Path) -> Result<String, FileError> {
    fs::read_to_string(path).map_err(io_err(path))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), FileError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|source| FileError::Json { path: path.to_path_buf(), source })?;
    s.push('\n');
    write_text(path, &s)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, FileError> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|source| FileError::Json { path: path.to_path_buf(), source })
}

pub fn profile_csv(q: &Profile) -> String {
    let g = q.grid();
    let mut s = String::with_capacity(64 * g.n());
    s.push_str(PROFILE_HEADER);
    s.push('\n');
    for (i, p) in q.full().iter().enumerate() {
        let _ = writeln!(s, "{:?},{:?},{:?}", g.x(i), p[0], p[1]);
    }
    s
}

/// Full grid, row-major in `y` then `x`.
pub fn field_csv(u: &Field) -> String {
    let g = u.grid();
    let gx = g.grid_x;
    let full = u.full_rows();
    let nx = gx.n();
    let mut s = String::with_capacity(80 * full.len());
    s.push_str(FIELD_HEADER);
    s.push('\n');
    for j in 0..g.ny() {
        let y = g.y(j);
        for i in 0..nx {
            let p = full[j * nx + i];
            let _ = writeln!(s, "{:?},{:?},{:?},{:?}", gx.x(i), y, p[0], p[1]);
        }
    }
    s
}

pub fn metrics_csv(m: &SliceMetrics) -> String {
    let mut s = String::with_capacity(120 * m.len());
    s.push_str(METRICS_HEADER);
    s.push('\n');
    for j in 0..m.len() {
        let _ = writeln!(
            s,
            "{:?},{:?},{:?},{:?},{:?},{:?}",
            m.y[j], m.v[j], m.kinetic[j], m.energy[j], m.dist_minus[j], m.dist_plus[j]
        );
    }
    s
}

fn parse_rows(path: &Path, text: &str, header: &str, width: usize) -> Result<Vec<Vec<f64>>, FileError> {
    let fmt = |line: usize, message: String| FileError::Format { path: path.to_path_buf(), line, message };
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == header => {}
        other => return Err(fmt(1, format!("expected header `{header}`, got `{}`", other.unwrap_or("")))),
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let row: Vec<f64> = l
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| fmt(i + 2, e.to_string()))?;
            if row.len() != width {
                return Err(fmt(i + 2, format!("expected {width} columns, got {}", row.len())));
            }
            Ok(row)
        })
        .collect()
}

pub fn read_profile_csv(path: &Path, grid: Grid1D) -> Result<Profile, FileError> {
    let rows = parse_rows(path, &read_text(path)?, PROFILE_HEADER, 3)?;
    let full: Vec<Point> = rows.iter().map(|r| [r[1], r[2]]).collect();
    Profile::from_full(grid, &full).map_err(|e| FileError::Format { path: path.to_path_buf(), line: 0, message: e.to_string() })
}

/// Keeps the `x ≥ 0` half of each row.
pub fn read_field_csv(path: &Path, grid: Grid2D) -> Result<Field, FileError> {
    let rows = parse_rows(path, &read_text(path)?, FIELD_HEADER, 4)?;
    let nx = grid.grid_x.n();
    let fmt = |message: String| FileError::Format { path: path.to_path_buf(), line: 0, message };
    if rows.len() != nx * grid.ny() {
        return Err(fmt(format!("expected {}×{} rows, got {}", grid.ny(), nx, rows.len())));
    }
    let c = grid.grid_x.center();
    let values: Vec<Point> = rows
        .chunks(nx)
        .flat_map(|r| r[c..].iter().map(|v| [v[2], v[3]]))
        .collect();
    Field::new(grid, values).map_err(|e| fmt(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialRecord {
    pub kind: PotentialKind,
    pub params: Vec<f64>,
    pub label: String,
}

impl PotentialRecord {
    pub fn of(pot: &Potential) -> Self {
        Self { kind: pot.kind(), params: pot.params(), label: pot.label() }
    }

    pub fn build(&self) -> Result<Potential, String> {
        match (self.kind, self.params.as_slice()) {
            (PotentialKind::GinzburgLandau, []) => Ok(Potential::GinzburgLandau),
            (PotentialKind::Channel, [d, e]) => Potential::channel(*d, *e).map_err(|e| e.to_string()),
            (kind, p) => Err(format!("cannot rebuild potential {kind:?} with parameters {p:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterEntry {
    pub index: usize,
    pub label: Sublevel,
    pub action: f64,
    pub residual: f64,
    pub members: Vec<usize>,
    pub spread: f64,
    pub file: String,
}

/// Contents of `atlas.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtlasFile {
    pub potential: PotentialRecord,
    pub lx: f64,
    pub n: usize,
    pub m: f64,
    pub m_star: f64,
    pub d0: f64,
    pub star_holds: bool,
    pub lambda0: f64,
    pub measured_gap: Option<f64>,
    pub cluster_count: usize,
    pub clusters: Vec<ClusterEntry>,
    pub nu_measured: Vec<(f64, Option<f64>)>,
    pub starts: Vec<StartSummary>,
}

pub fn minimizer_file(k: usize) -> String {
    format!("minimizer_{k}.csv")
}

/// Writes `atlas.json`, `hypothesis.json` and one `minimizer_k.csv` per cluster.
pub fn write_atlas(dir: &Path, atlas: &HeteroclinicAtlas, hyp: &HypothesisReport, pot: &Potential) -> Result<AtlasFile, FileError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut clusters = Vec::new();
    for (k, c) in atlas.clusters.iter().enumerate() {
        let file = minimizer_file(k);
        write_text(&dir.join(&file), &profile_csv(&c.representative))?;
        clusters.push(ClusterEntry {
            index: k,
            label: c.label,
            action: c.action,
            residual: c.residual,
            members: c.members.clone(),
            spread: c.spread,
            file,
        });
    }
    let doc = AtlasFile {
        potential: PotentialRecord::of(pot),
        lx: atlas.grid.half_length(),
        n: atlas.grid.n(),
        m: atlas.m,
        m_star: atlas.m_star,
        d0: atlas.d0,
        star_holds: atlas.star_holds,
        lambda0: atlas.lambda0,
        measured_gap: atlas.measured_gap,
        cluster_count: atlas.clusters.len(),
        clusters,
        nu_measured: atlas.nu_measured.clone(),
        starts: atlas.starts.clone(),
    };
    write_json(&dir.join("atlas.json"), &doc)?;
    write_json(&dir.join("hypothesis.json"), hyp)?;
    Ok(doc)
}

/// Inverse of [`write_atlas`].
pub fn read_atlas(dir: &Path) -> Result<(Potential, HypothesisReport, HeteroclinicAtlas), FileError> {
    let path = dir.join("atlas.json");
    let doc: AtlasFile = read_json(&path)?;
    let hyp: HypothesisReport = read_json(&dir.join("hypothesis.json"))?;
    let pot = doc
        .potential
        .build()
        .map_err(|message| FileError::Format { path: path.clone(), line: 0, message })?;
    let grid = Grid1D::new(doc.lx, doc.n).map_err(|e| FileError::Format { path: path.clone(), line: 0, message: e.to_string() })?;
    let clusters = doc
        .clusters
        .iter()
        .map(|c| {
            Ok(Cluster {
                label: c.label,
                representative: read_profile_csv(&dir.join(&c.file), grid)?,
                action: c.action,
                residual: c.residual,
                members: c.members.clone(),
                spread: c.spread,
            })
        })
        .collect::<Result<Vec<_>, FileError>>()?;
    let atlas = HeteroclinicAtlas {
        grid,
        m: doc.m,
        m_star: doc.m_star,
        d0: doc.d0,
        star_holds: doc.star_holds,
        lambda0: doc.lambda0,
        measured_gap: doc.measured_gap,
        clusters,
        nu_measured: doc.nu_measured,
        starts: doc.starts,
    };
    Ok((pot, hyp, atlas))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid2D;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn profile_csv_round_trips_exactly(vals in proptest::collection::vec(-10.0f64..10.0, 130)) {
            let g = Grid1D::new(3.0, 129).unwrap();
            let q = Profile::from_fn(g, |x| {
                let i = ((x + 3.0) / g.h()).round() as usize;
                [vals[i].tanh() * x.signum(), vals[i + 1] * 1e-7]
            });
            let tmp = tempfile::tempdir().unwrap();
            let path = tmp.path().join("q.csv");
            write_text(&path, &profile_csv(&q)).unwrap();
            let back = read_profile_csv(&path, g).unwrap();
            prop_assert_eq!(back.half(), q.half());
        }
    }

    #[test]
    fn field_csv_round_trips_and_keeps_header() {
        let gx = Grid1D::new(2.0, 129).unwrap();
        let g = Grid2D::new(gx, 1.0, 65).unwrap();
        let q = Profile::from_fn(gx, |x| [x.tanh(), 0.1 / (1.0 + x * x)]);
        let u = Field::constant(g, &q).unwrap();
        let text = field_csv(&u);
        assert_eq!(text.lines().next(), Some(FIELD_HEADER));
        assert_eq!(text.lines().count(), 1 + 129 * 65);
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("f.csv");
        write_text(&path, &text).unwrap();
        assert_eq!(read_field_csv(&path, g).unwrap(), u);
        write_text(&path, "x,y,u\n").unwrap();
        assert!(matches!(read_field_csv(&path, g), Err(FileError::Format { line: 1, .. })));
    }
}
