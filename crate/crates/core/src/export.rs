//! Plain-text artifact writers.
//!
//! Every CSV starts with `#`-prefixed comment lines (the run header), then a
//! single header row, then data. Floats are written with Rust's shortest
//! round-trip formatting, so re-running a config reproduces files byte for
//! byte. Basin maps are plain greymaps (`P2`, maxval 2) with a JSON sidecar
//! for the geometry.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::Serialize;

use crate::basins::{ActionSeries, BasinMap};
use crate::classical::Trajectory;
use crate::error::Result;
use crate::fock::{DensityMatrix, HusimiField};

/// One written file as listed in the run manifest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Artifact {
    pub file: String,
    pub kind: &'static str,
    pub schema: Vec<String>,
    pub description: String,
}

/// Collects artifacts under one output directory.
#[derive(Debug)]
pub struct ArtifactWriter {
    dir: PathBuf,
    header: Vec<String>,
    artifacts: Vec<Artifact>,
}

/// A CSV cell; integers and booleans stay unformatted.
#[derive(Debug, Clone, Copy)]
pub enum Cell {
    F(f64),
    I(i64),
    U(usize),
    B(bool),
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            Cell::F(x) => write!(f, "{x}"),
            Cell::I(x) => write!(f, "{x}"),
            Cell::U(x) => write!(f, "{x}"),
            Cell::B(x) => write!(f, "{}", x as u8),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::F(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::U(x)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::B(x)
    }
}

impl ArtifactWriter {
    /// `header` lines are written (prefixed with `# `) at the top of every CSV.
    pub fn new(dir: impl Into<PathBuf>, header: Vec<String>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self {
            dir,
            header,
            artifacts: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn artifacts(&self) -> &[Artifact] {
        &self.artifacts
    }

    fn record(&mut self, file: &str, kind: &'static str, schema: &[&str], description: &str) {
        self.artifacts.push(Artifact {
            file: file.to_string(),
            kind,
            schema: schema.iter().map(|s| s.to_string()).collect(),
            description: description.to_string(),
        });
    }

    fn create(&self, file: &str) -> Result<BufWriter<fs::File>> {
        Ok(BufWriter::new(fs::File::create(self.dir.join(file))?))
    }

    /// Generic numeric table.
    pub fn csv<I, R>(&mut self, file: &str, columns: &[&str], rows: I, description: &str) -> Result<()>
    where
        I: IntoIterator<Item = R>,
        R: AsRef<[Cell]>,
    {
        let mut w = self.create(file)?;
        for line in &self.header {
            writeln!(w, "# {line}")?;
        }
        writeln!(w, "{}", columns.join(","))?;
        for row in rows {
            let row = row.as_ref();
            debug_assert_eq!(row.len(), columns.len());
            let mut first = true;
            for c in row {
                if !first {
                    w.write_all(b",")?;
                }
                write!(w, "{c}")?;
                first = false;
            }
            w.write_all(b"\n")?;
        }
        w.flush()?;
        self.record(file, "csv", columns, description);
        Ok(())
    }

    /// JSON document (sidecars, summaries).
    pub fn json<T: Serialize>(&mut self, file: &str, value: &T, description: &str) -> Result<()> {
        let text = serde_json::to_string_pretty(value).map_err(|e| crate::Error::Io(e.to_string()))?;
        fs::write(self.dir.join(file), text + "\n")?;
        self.record(file, "json", &[], description);
        Ok(())
    }

    /// Trajectory as `t, re, im, abs2`; `time_unit` divides the times.
    pub fn trajectory(&mut self, file: &str, tr: &Trajectory, time_unit: f64) -> Result<()> {
        let rows = tr
            .times
            .iter()
            .zip(&tr.points)
            .map(|(t, a)| [Cell::F(t / time_unit), Cell::F(a.re), Cell::F(a.im), Cell::F(a.norm_sqr())]);
        self.csv(file, &["t", "re", "im", "abs2"], rows, "classical trajectory (t in units of T)")
    }

    /// Ensemble action as `t, I, stderr`, or `t, I` for noise-free series
    /// (which carry no standard errors).
    pub fn action_series(&mut self, file: &str, s: &ActionSeries, time_unit: f64, description: &str) -> Result<()> {
        if s.stderr.is_empty() {
            let rows = s
                .times
                .iter()
                .zip(&s.values)
                .map(|(t, v)| [Cell::F(t / time_unit), Cell::F(*v)]);
            return self.csv(file, &["t", "I"], rows, description);
        }
        let rows = s
            .times
            .iter()
            .zip(&s.values)
            .zip(&s.stderr)
            .map(|((t, v), e)| [Cell::F(t / time_unit), Cell::F(*v), Cell::F(*e)]);
        self.csv(file, &["t", "I", "stderr"], rows, description)
    }

    /// Basin map: greymap `<stem>.pgm`, geometry `<stem>.json`, and pixel
    /// centres `<stem>_pixels.csv`. Greymap rows run from Im = max down to
    /// Im = min so that the image is upright.
    pub fn basin_map(&mut self, stem: &str, map: &BasinMap, roots: &[Complex64]) -> Result<()> {
        let res = map.grid.resolution;
        let pgm = format!("{stem}.pgm");
        {
            let mut w = self.create(&pgm)?;
            writeln!(w, "P2")?;
            writeln!(w, "# 0=inner 1=outer 2=unresolved")?;
            writeln!(w, "{res} {res}")?;
            writeln!(w, "2")?;
            for row in (0..res).rev() {
                let line: Vec<String> = (0..res)
                    .map(|col| (map.label(row, col) as u8).to_string())
                    .collect();
                writeln!(w, "{}", line.join(" "))?;
            }
            w.flush()?;
        }
        self.record(&pgm, "pgm", &["label"], "basin labels, 0=inner 1=outer 2=unresolved, top row is Im = im_max");

        #[derive(Serialize)]
        struct Sidecar<'a> {
            re_min: f64,
            re_max: f64,
            im_min: f64,
            im_max: f64,
            resolution: usize,
            pixel: &'static str,
            row_order: &'static str,
            labels: [&'static str; 3],
            roots: Vec<[f64; 2]>,
            fractions: &'a crate::basins::BasinFractions,
        }
        let b = map.grid.bounds;
        let side = Sidecar {
            re_min: b.re_min,
            re_max: b.re_max,
            im_min: b.im_min,
            im_max: b.im_max,
            resolution: res,
            pixel: "centre",
            row_order: "first row is im_max",
            labels: ["inner", "outer", "unresolved"],
            roots: roots.iter().map(|z| [z.re, z.im]).collect(),
            fractions: &map.fractions,
        };
        self.json(&format!("{stem}.json"), &side, "basin grid geometry")?;

        let rows = (0..res).flat_map(|row| {
            (0..res).map(move |col| {
                let z = map.grid.pixel_center(row, col);
                [Cell::F(z.re), Cell::F(z.im), Cell::U(map.label(row, col) as usize)]
            })
        });
        self.csv(&format!("{stem}_pixels.csv"), &["re", "im", "label"], rows, "basin label per pixel centre")
    }

    /// Density matrix as `n, m, re, im` plus a `|ρ_nm|` grid (row n, column m).
    pub fn density_matrix(&mut self, stem: &str, rho: &DensityMatrix) -> Result<()> {
        let dim = rho.dim();
        let rows = (0..dim).flat_map(|n| {
            (0..dim).map(move |m| {
                let z = rho.0[[n, m]];
                [Cell::U(n), Cell::U(m), Cell::F(z.re), Cell::F(z.im)]
            })
        });
        self.csv(&format!("{stem}.csv"), &["n", "m", "re", "im"], rows, "density matrix elements")?;

        let file = format!("{stem}_abs.csv");
        let mut w = self.create(&file)?;
        for line in &self.header {
            writeln!(w, "# {line}")?;
        }
        let cols: Vec<String> = (0..dim).map(|m| format!("m{m}")).collect();
        writeln!(w, "{}", cols.join(","))?;
        for n in 0..dim {
            let line: Vec<String> = (0..dim).map(|m| rho.0[[n, m]].norm().to_string()).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        w.flush()?;
        self.record(&file, "csv-grid", &["|rho_nm|"], "magnitude grid, row n, column m");
        Ok(())
    }

    /// Husimi grid (row = Im index from im_min, column = Re index) plus a
    /// bounds sidecar.
    pub fn husimi(&mut self, stem: &str, q: &HusimiField) -> Result<()> {
        let res = q.grid.resolution;
        let file = format!("{stem}.csv");
        let mut w = self.create(&file)?;
        for line in &self.header {
            writeln!(w, "# {line}")?;
        }
        let cols: Vec<String> = (0..res).map(|c| format!("c{c}")).collect();
        writeln!(w, "{}", cols.join(","))?;
        for row in 0..res {
            let line: Vec<String> = (0..res).map(|c| q.value(row, c).to_string()).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        w.flush()?;
        self.record(&file, "csv-grid", &["Q"], "Husimi function, first row is im_min");

        #[derive(Serialize)]
        struct Sidecar {
            re_min: f64,
            re_max: f64,
            im_min: f64,
            im_max: f64,
            resolution: usize,
            nodes: &'static str,
            row_order: &'static str,
        }
        let g = &q.grid;
        let side = Sidecar {
            re_min: g.re_min,
            re_max: g.re_max,
            im_min: g.im_min,
            im_max: g.im_max,
            resolution: res,
            nodes: "include bounds",
            row_order: "first row is im_min",
        };
        self.json(&format!("{stem}.json"), &side, "Husimi grid geometry")
    }
}

/// Reads the numeric body of a CSV written by [`ArtifactWriter::csv`],
/// skipping comments; returns the header columns and rows.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<String> = lines
        .next()
        .map(|h| h.split(',').map(str::to_string).collect())
        .unwrap_or_default();
    let mut rows = Vec::new();
    for (i, l) in lines.enumerate() {
        let row = l
            .split(',')
            .map(|x| {
                x.trim().parse::<f64>().map_err(|e| {
                    crate::Error::Io(format!("{}: row {}: {e}", path.display(), i + 1))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}
