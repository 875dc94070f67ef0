//! Tablet file parsing and conversion to SI pen-tip trajectories.
//!
//! The pipeline here is: parse device files into [`RawSignature`] (integer
//! device units, raw timestamps), convert to meters/seconds with [`to_si`],
//! drop pen-up travel with [`strip_penups`], optionally [`resample_uniform`],
//! and finally validate a uniform time axis with [`TrajectorySI::from_points`].

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub const INCH_M: f64 = 0.0254;

/// Tolerance for "these timestamps are uniform" decisions, scaled by
/// `max(1, |t|)`.
pub const UNIFORM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignatureFormat {
    /// First line holds the sample count, then `x y t status` per line
    /// (whitespace separated, extra trailing columns tolerated).
    SvcCountHeader,
    /// Header row naming at least `x,y,t`; optional `pen` and `pressure`
    /// columns.
    CsvColumns,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    Genuine,
    Skilled,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Genuine => "genuine",
            Label::Skilled => "skilled",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignatureMeta {
    pub user_id: String,
    pub label: Label,
    /// Device resolution in dots per inch.
    pub dpi: f64,
    /// Device sampling rate in Hz; also the index-to-seconds divisor for
    /// integer time columns.
    pub nominal_rate: f64,
}

impl SignatureMeta {
    pub fn new(user_id: impl Into<String>, label: Label, dpi: f64, nominal_rate: f64) -> Result<Self> {
        if !(dpi.is_finite() && dpi > 0.0) {
            return Err(Error::contract(format!("dpi must be positive and finite, got {dpi}")));
        }
        if !(nominal_rate.is_finite() && nominal_rate > 0.0) {
            return Err(Error::contract(format!(
                "nominal rate must be positive and finite, got {nominal_rate}"
            )));
        }
        Ok(SignatureMeta {
            user_id: user_id.into(),
            label,
            dpi,
            nominal_rate,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawSample {
    /// Horizontal position in device dots.
    pub x_dots: f64,
    /// Vertical position in device dots.
    pub y_dots: f64,
    /// Timestamp as written in the file (seconds or integer sample index).
    pub t: f64,
    pub pen_down: bool,
    pub pressure: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawSignature {
    pub samples: Vec<RawSample>,
    pub meta: SignatureMeta,
}

impl RawSignature {
    pub fn new(samples: Vec<RawSample>, meta: SignatureMeta) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptySignature("no samples".into()));
        }
        for (k, w) in samples.windows(2).enumerate() {
            if w[1].t < w[0].t {
                return Err(Error::contract(format!(
                    "timestamps decrease at sample {} ({} -> {})",
                    k + 1,
                    w[0].t,
                    w[1].t
                )));
            }
        }
        let down = samples.iter().filter(|s| s.pen_down).count();
        if down < 2 {
            return Err(Error::EmptySignature(format!(
                "{down} pen-down sample(s); at least 2 required"
            )));
        }
        Ok(RawSignature { samples, meta })
    }

    pub fn pen_states(&self) -> Vec<bool> {
        self.samples.iter().map(|s| s.pen_down).collect()
    }
}

fn parse_num(field: &str, line: usize, what: &str) -> Result<f64> {
    field.parse::<f64>().map_err(|_| Error::Parse {
        line,
        message: format!("cannot parse {what} from {field:?}"),
    })
}

fn parse_pen(field: &str, line: usize) -> Result<bool> {
    match field {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(Error::Parse {
            line,
            message: format!("pen status must be 0 or 1, got {other:?}"),
        }),
    }
}

/// Parses one signature file. `line` numbers in errors are 1-based.
pub fn parse_signature(text: &str, format: SignatureFormat, meta: SignatureMeta) -> Result<RawSignature> {
    let samples = match format {
        SignatureFormat::SvcCountHeader => parse_svc(text)?,
        SignatureFormat::CsvColumns => parse_csv(text)?,
    };
    RawSignature::new(samples, meta)
}

fn parse_svc(text: &str) -> Result<Vec<RawSample>> {
    let mut lines = text.lines().enumerate();
    let (header_idx, header) = lines
        .next()
        .ok_or(Error::EmptySignature("file is empty".into()))?;
    let count: usize = header.trim().parse().map_err(|_| Error::Parse {
        line: header_idx + 1,
        message: format!("expected sample count, got {:?}", header.trim()),
    })?;

    let mut samples = Vec::with_capacity(count);
    for (idx, line) in lines {
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if samples.len() == count {
            return Err(Error::Parse {
                line: lineno,
                message: format!("more than the declared {count} samples"),
            });
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() < 4 {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected at least 4 columns (x y t status), got {}", fields.len()),
            });
        }
        // Column 5 is pressure in files we write ourselves; 7-column devices
        // put azimuth/altitude first and pressure seventh.
        let pressure = if fields.len() >= 7 {
            parse_num(fields[6], lineno, "pressure")?
        } else if fields.len() >= 5 {
            parse_num(fields[4], lineno, "pressure")?
        } else {
            0.0
        };
        samples.push(RawSample {
            x_dots: parse_num(fields[0], lineno, "x")?,
            y_dots: parse_num(fields[1], lineno, "y")?,
            t: parse_num(fields[2], lineno, "t")?,
            pen_down: parse_pen(fields[3], lineno)?,
            pressure,
        });
    }
    if samples.len() != count {
        return Err(Error::Parse {
            line: text.lines().count() + 1,
            message: format!("declared {count} samples, found {}", samples.len()),
        });
    }
    Ok(samples)
}

fn parse_csv(text: &str) -> Result<Vec<RawSample>> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or(Error::EmptySignature("file is empty".into()))?;
    let names: Vec<String> = header.split(',').map(|s| s.trim().to_lowercase()).collect();
    let col = |name: &str| names.iter().position(|n| n == name);
    let (xi, yi, ti) = match (col("x"), col("y"), col("t")) {
        (Some(x), Some(y), Some(t)) => (x, y, t),
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: format!("header must name x, y and t columns, got {header:?}"),
            })
        }
    };
    let pi = col("pen");
    let pri = col("pressure");

    let mut samples = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(|s| s.trim()).collect();
        let need = [Some(xi), Some(yi), Some(ti), pi, pri]
            .into_iter()
            .flatten()
            .max()
            .unwrap();
        if fields.len() <= need {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected at least {} columns, got {}", need + 1, fields.len()),
            });
        }
        samples.push(RawSample {
            x_dots: parse_num(fields[xi], lineno, "x")?,
            y_dots: parse_num(fields[yi], lineno, "y")?,
            t: parse_num(fields[ti], lineno, "t")?,
            pen_down: match pi {
                Some(p) => parse_pen(fields[p], lineno)?,
                None => true,
            },
            pressure: match pri {
                Some(p) => parse_num(fields[p], lineno, "pressure")?,
                None => 0.0,
            },
        });
    }
    Ok(samples)
}

/// Writes a signature back out in the requested format. Numbers use Rust's
/// shortest round-trip float formatting, so parse -> serialize -> parse is
/// lossless.
pub fn serialize_signature(sig: &RawSignature, format: SignatureFormat) -> String {
    let mut out = String::new();
    match format {
        SignatureFormat::SvcCountHeader => {
            out.push_str(&format!("{}\n", sig.samples.len()));
            for s in &sig.samples {
                out.push_str(&format!(
                    "{} {} {} {} {}\n",
                    s.x_dots,
                    s.y_dots,
                    s.t,
                    if s.pen_down { 1 } else { 0 },
                    s.pressure
                ));
            }
        }
        SignatureFormat::CsvColumns => {
            out.push_str("x,y,t,pen,pressure\n");
            for s in &sig.samples {
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    s.x_dots,
                    s.y_dots,
                    s.t,
                    if s.pen_down { 1 } else { 0 },
                    s.pressure
                ));
            }
        }
    }
    out
}

/// Pen-tip trajectory in meters/seconds. The time axis may still be
/// non-uniform at this stage.
#[derive(Debug, Clone, PartialEq)]
pub struct SiTrajectory {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub t: Vec<f64>,
}

impl SiTrajectory {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// Converts device units to SI: `x_m = x_dots * 0.0254 / dpi`.
///
/// If every timestamp in the file is integral the column is treated as a
/// sample index and divided by the nominal rate; otherwise it is taken as
/// seconds.
pub fn to_si(sig: &RawSignature) -> SiTrajectory {
    let factor = INCH_M / sig.meta.dpi;
    let index_time = sig.samples.iter().all(|s| s.t.fract() == 0.0);
    let x = sig.samples.iter().map(|s| s.x_dots * factor).collect();
    let y = sig.samples.iter().map(|s| s.y_dots * factor).collect();
    let t = sig
        .samples
        .iter()
        .map(|s| if index_time { s.t / sig.meta.nominal_rate } else { s.t })
        .collect();
    SiTrajectory { x, y, t }
}

/// Drops pen-up samples and closes the time gaps they leave: each retained
/// segment keeps its internal spacing and starts one step after the previous
/// segment ends. The join step is the median spacing between adjacent
/// retained samples (for uniformly sampled input this is exactly its dt).
pub fn strip_penups(traj: &SiTrajectory, pen_down: &[bool]) -> Result<SiTrajectory> {
    if pen_down.len() != traj.len() {
        return Err(Error::contract(format!(
            "pen state length {} does not match trajectory length {}",
            pen_down.len(),
            traj.len()
        )));
    }
    let kept: Vec<usize> = (0..traj.len()).filter(|&i| pen_down[i]).collect();
    if kept.len() < 2 {
        return Err(Error::EmptySignature(format!(
            "{} pen-down sample(s) after stripping; at least 2 required",
            kept.len()
        )));
    }
    if kept.len() == traj.len() {
        return Ok(traj.clone());
    }

    let mut adjacent_steps: Vec<f64> = kept
        .windows(2)
        .filter(|w| w[1] == w[0] + 1)
        .map(|w| traj.t[w[1]] - traj.t[w[0]])
        .collect();
    if adjacent_steps.is_empty() {
        adjacent_steps = traj.t.windows(2).map(|w| w[1] - w[0]).collect();
    }
    adjacent_steps.sort_by(|a, b| a.total_cmp(b));
    let join_dt = adjacent_steps[adjacent_steps.len() / 2];

    let mut x = Vec::with_capacity(kept.len());
    let mut y = Vec::with_capacity(kept.len());
    let mut t = Vec::with_capacity(kept.len());
    for (j, &i) in kept.iter().enumerate() {
        x.push(traj.x[i]);
        y.push(traj.y[i]);
        if j == 0 {
            t.push(traj.t[i]);
        } else {
            let prev = kept[j - 1];
            let step = if i == prev + 1 { traj.t[i] - traj.t[prev] } else { join_dt };
            t.push(t[j - 1] + step);
        }
    }
    Ok(SiTrajectory { x, y, t })
}

/// Linearly interpolates onto the uniform grid `t[0] + k/rate`, keeping grid
/// points up to the last one not past `t[end]`. Input that is already uniform
/// at the target rate is returned unchanged.
pub fn resample_uniform(traj: &SiTrajectory, rate: f64) -> Result<SiTrajectory> {
    if !(rate.is_finite() && rate > 0.0) {
        return Err(Error::contract(format!("resample rate must be positive, got {rate}")));
    }
    if traj.len() < 2 {
        return Err(Error::contract(format!(
            "resampling needs at least 2 samples, got {}",
            traj.len()
        )));
    }
    for (k, w) in traj.t.windows(2).enumerate() {
        if w[1] <= w[0] {
            return Err(Error::contract(format!(
                "timestamps must strictly increase; samples {} and {} have t = {} and {}",
                k,
                k + 1,
                w[0],
                w[1]
            )));
        }
    }

    let dt = 1.0 / rate;
    let uniform_at_rate = traj
        .t
        .windows(2)
        .all(|w| ((w[1] - w[0]) - dt).abs() <= UNIFORM_TOL * w[1].abs().max(1.0));
    if uniform_at_rate {
        return Ok(traj.clone());
    }

    let t0 = traj.t[0];
    let span = traj.t[traj.len() - 1] - t0;
    let steps = (span * rate + 1e-9).floor() as usize;
    let mut x = Vec::with_capacity(steps + 1);
    let mut y = Vec::with_capacity(steps + 1);
    let mut t = Vec::with_capacity(steps + 1);
    let mut seg = 0usize;
    for k in 0..=steps {
        let tk = t0 + k as f64 * dt;
        while seg + 2 < traj.len() && traj.t[seg + 1] < tk {
            seg += 1;
        }
        let (ta, tb) = (traj.t[seg], traj.t[seg + 1]);
        let w = ((tk - ta) / (tb - ta)).clamp(0.0, 1.0);
        x.push(traj.x[seg] + w * (traj.x[seg + 1] - traj.x[seg]));
        y.push(traj.y[seg] + w * (traj.y[seg + 1] - traj.y[seg]));
        t.push(tk);
    }
    Ok(SiTrajectory { x, y, t })
}

/// Pen-tip trajectory with a validated uniform time axis.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySI {
    x: Vec<f64>,
    y: Vec<f64>,
    t: Vec<f64>,
    dt: f64,
}

impl TrajectorySI {
    pub fn from_points(traj: SiTrajectory) -> Result<Self> {
        if traj.len() < 2 {
            return Err(Error::contract(format!(
                "uniform trajectory needs at least 2 samples, got {}",
                traj.len()
            )));
        }
        if traj.x.len() != traj.y.len() || traj.x.len() != traj.t.len() {
            return Err(Error::contract("x, y and t must have equal lengths".to_string()));
        }
        for (k, v) in traj.x.iter().chain(&traj.y).chain(&traj.t).enumerate() {
            if !v.is_finite() {
                return Err(Error::contract(format!("non-finite value in trajectory (flat index {k})")));
            }
        }
        let dt = traj.t[1] - traj.t[0];
        if dt <= 0.0 {
            return Err(Error::contract(format!("time step must be positive, got {dt}")));
        }
        for w in traj.t.windows(2) {
            if ((w[1] - w[0]) - dt).abs() > UNIFORM_TOL * w[1].abs().max(1.0) {
                return Err(Error::contract(format!(
                    "non-uniform time axis: step {} differs from dt {}",
                    w[1] - w[0],
                    dt
                )));
            }
        }
        Ok(TrajectorySI {
            x: traj.x,
            y: traj.y,
            t: traj.t,
            dt,
        })
    }

    /// Builds a uniform trajectory directly from samples and a step.
    pub fn from_uniform(x: Vec<f64>, y: Vec<f64>, t0: f64, dt: f64) -> Result<Self> {
        let t = (0..x.len()).map(|k| t0 + k as f64 * dt).collect();
        Self::from_points(SiTrajectory { x, y, t })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn t(&self) -> &[f64] {
        &self.t
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Same trajectory rigidly translated by `(dx, dy)`.
    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        TrajectorySI {
            x: self.x.iter().map(|v| v + dx).collect(),
            y: self.y.iter().map(|v| v + dy).collect(),
            t: self.t.clone(),
            dt: self.dt,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub user_id: String,
    pub label: Label,
    /// Path as written in the manifest.
    pub rel_path: String,
    /// Path resolved against the manifest's directory.
    pub path: PathBuf,
}

/// Reads a tab-separated `user_id<TAB>label<TAB>relative_path` manifest.
/// Blank lines are skipped; entry order is preserved.
pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut entries = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: idx + 1,
                message: format!("expected 3 tab-separated fields, got {}", fields.len()),
            });
        }
        let label = match fields[1] {
            "genuine" => Label::Genuine,
            "skilled" => Label::Skilled,
            other => {
                return Err(Error::Parse {
                    line: idx + 1,
                    message: format!("label must be genuine or skilled, got {other:?}"),
                })
            }
        };
        entries.push(ManifestEntry {
            user_id: fields[0].to_string(),
            label,
            rel_path: fields[2].to_string(),
            path: base.join(fields[2]),
        });
    }
    Ok(entries)
}
