//! Feature construction on top of joint and torque trajectories.
//!
//! Time-series feature sets stack raw channels with their first and second
//! finite-difference derivatives, then z-score each channel. Histogram
//! features bin each channel on bin edges fitted to a user's reference set.

use crate::error::{Error, Result};
use crate::robot2d::{JointTrajectory2d, TorqueTrajectory2d};
use crate::robot3d::{JointTrajectory3d, TorqueTrajectory3d};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RobotKind {
    TwoD,
    ThreeD,
}

impl RobotKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RobotKind::TwoD => "2d",
            RobotKind::ThreeD => "3d",
        }
    }

    pub fn joints(self) -> usize {
        match self {
            RobotKind::TwoD => 2,
            RobotKind::ThreeD => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureSet {
    /// Joint angles and their derivatives.
    F1,
    /// Joint torques and their derivatives.
    F2,
    /// F1 stacked on top of F2.
    F3,
}

impl FeatureSet {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureSet::F1 => "f1",
            FeatureSet::F2 => "f2",
            FeatureSet::F3 => "f3",
        }
    }
}

/// Channel-major feature matrix: `channels[c][k]` is channel `c` at sample `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    labels: Vec<String>,
    channels: Vec<Vec<f64>>,
    robot: RobotKind,
    set: FeatureSet,
}

impl FeatureMatrix {
    pub fn new(labels: Vec<String>, channels: Vec<Vec<f64>>, robot: RobotKind, set: FeatureSet) -> Result<Self> {
        if labels.len() != channels.len() {
            return Err(Error::contract(format!(
                "{} labels for {} channels",
                labels.len(),
                channels.len()
            )));
        }
        if channels.is_empty() {
            return Err(Error::contract("feature matrix needs at least one channel".to_string()));
        }
        let t = channels[0].len();
        if t == 0 {
            return Err(Error::contract("feature matrix needs at least one sample".to_string()));
        }
        for (c, ch) in channels.iter().enumerate() {
            if ch.len() != t {
                return Err(Error::contract(format!(
                    "channel {c} has {} samples, expected {t}",
                    ch.len()
                )));
            }
            if let Some(k) = ch.iter().position(|v| !v.is_finite()) {
                return Err(Error::contract(format!("non-finite value in channel {c} at sample {k}")));
            }
        }
        Ok(FeatureMatrix {
            labels,
            channels,
            robot,
            set,
        })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    /// Number of time samples.
    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn robot(&self) -> RobotKind {
        self.robot
    }

    pub fn set(&self) -> FeatureSet {
        self.set
    }

    /// Column `k` as a vector (one value per channel).
    pub fn column(&self, k: usize) -> Vec<f64> {
        self.channels.iter().map(|c| c[k]).collect()
    }
}

/// First- or second-order time derivative by finite differences: central
/// differences on interior samples, one-sided first-order at both ends.
/// Order 2 applies the same scheme twice.
pub fn differentiate(series: &[f64], dt: f64, order: u32) -> Result<Vec<f64>> {
    if series.len() < 3 {
        return Err(Error::contract(format!(
            "differentiation needs at least 3 samples, got {}",
            series.len()
        )));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::contract(format!("dt must be positive, got {dt}")));
    }
    match order {
        1 => Ok(diff_once(series, dt)),
        2 => Ok(diff_once(&diff_once(series, dt), dt)),
        other => Err(Error::contract(format!("derivative order must be 1 or 2, got {other}"))),
    }
}

fn diff_once(s: &[f64], dt: f64) -> Vec<f64> {
    let n = s.len();
    let mut out = Vec::with_capacity(n);
    out.push((s[1] - s[0]) / dt);
    for k in 1..n - 1 {
        out.push((s[k + 1] - s[k - 1]) / (2.0 * dt));
    }
    out.push((s[n - 1] - s[n - 2]) / dt);
    out
}

/// Per-channel z-score normalization with the population standard deviation.
/// Constant channels map to all zeros.
pub fn zscore(m: &FeatureMatrix) -> FeatureMatrix {
    let channels = m.channels.iter().map(|c| zscore_channel(c)).collect();
    FeatureMatrix {
        labels: m.labels.clone(),
        channels,
        robot: m.robot,
        set: m.set,
    }
}

fn zscore_channel(c: &[f64]) -> Vec<f64> {
    let n = c.len() as f64;
    let mean = c.iter().sum::<f64>() / n;
    let var = c.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    if std == 0.0 {
        vec![0.0; c.len()]
    } else {
        c.iter().map(|v| (v - mean) / std).collect()
    }
}

fn labels_with_derivatives(prefix: &str, joints: usize) -> Vec<String> {
    let mut labels = Vec::with_capacity(3 * joints);
    for d in ["", "d", "dd"] {
        for j in 1..=joints {
            labels.push(format!("{d}{prefix}{j}"));
        }
    }
    labels
}

/// Channel labels of a feature set, in stacking order.
pub fn expected_labels(robot: RobotKind, set: FeatureSet) -> Vec<String> {
    let n = robot.joints();
    match set {
        FeatureSet::F1 => labels_with_derivatives("q", n),
        FeatureSet::F2 => labels_with_derivatives("tau", n),
        FeatureSet::F3 => {
            let mut l = labels_with_derivatives("q", n);
            l.extend(labels_with_derivatives("tau", n));
            l
        }
    }
}

struct RawChannels<'a> {
    q: Vec<&'a [f64]>,
    dq: Vec<&'a [f64]>,
    ddq: Vec<&'a [f64]>,
    tau: Vec<&'a [f64]>,
    dt: f64,
}

fn assemble(robot: RobotKind, set: FeatureSet, raw: RawChannels<'_>) -> Result<FeatureMatrix> {
    let t = raw.q[0].len();
    if raw.tau[0].len() != t {
        return Err(Error::contract(format!(
            "joint trajectory has {t} samples but torque trajectory has {}",
            raw.tau[0].len()
        )));
    }

    let mut channels: Vec<Vec<f64>> = Vec::new();
    if matches!(set, FeatureSet::F1 | FeatureSet::F3) {
        for q in &raw.q {
            channels.push(q.to_vec());
        }
        for dq in &raw.dq {
            channels.push(dq.to_vec());
        }
        for ddq in &raw.ddq {
            channels.push(ddq.to_vec());
        }
    }
    if matches!(set, FeatureSet::F2 | FeatureSet::F3) {
        for tau in &raw.tau {
            channels.push(tau.to_vec());
        }
        for tau in &raw.tau {
            channels.push(differentiate(tau, raw.dt, 1)?);
        }
        for tau in &raw.tau {
            channels.push(differentiate(tau, raw.dt, 2)?);
        }
    }
    let m = FeatureMatrix::new(expected_labels(robot, set), channels, robot, set)?;
    Ok(zscore(&m))
}

pub fn build_feature_set_2d(
    jt: &JointTrajectory2d,
    tt: &TorqueTrajectory2d,
    set: FeatureSet,
) -> Result<FeatureMatrix> {
    assemble(
        RobotKind::TwoD,
        set,
        RawChannels {
            q: vec![&jt.q1, &jt.q2],
            dq: vec![&jt.dq1, &jt.dq2],
            ddq: vec![&jt.ddq1, &jt.ddq2],
            tau: vec![&tt.tau1, &tt.tau2],
            dt: jt.dt,
        },
    )
}

pub fn build_feature_set_3d(
    jt: &JointTrajectory3d,
    tt: &TorqueTrajectory3d,
    set: FeatureSet,
) -> Result<FeatureMatrix> {
    assemble(
        RobotKind::ThreeD,
        set,
        RawChannels {
            q: jt.q.iter().map(|v| v.as_slice()).collect(),
            dq: jt.dq.iter().map(|v| v.as_slice()).collect(),
            ddq: jt.ddq.iter().map(|v| v.as_slice()).collect(),
            tau: tt.tau.iter().map(|v| v.as_slice()).collect(),
            dt: jt.dt,
        },
    )
}

/// Per-channel equal-width bin edges, fitted over a reference set.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramLayout {
    bins: usize,
    /// Per-channel `(min, max)` over the fitting data.
    ranges: Vec<(f64, f64)>,
    labels: Vec<String>,
}

impl HistogramLayout {
    /// Fits bin ranges per channel over all samples of all reference
    /// matrices. At least 2 bins and one reference are required.
    pub fn fit(refs: &[&FeatureMatrix], bins: usize) -> Result<Self> {
        if bins < 2 {
            return Err(Error::contract(format!("need at least 2 bins, got {bins}")));
        }
        let first = refs
            .first()
            .ok_or_else(|| Error::contract("histogram layout needs at least one reference".to_string()))?;
        for m in refs {
            if m.labels() != first.labels() {
                return Err(Error::contract("references have mismatched channel labels".to_string()));
            }
        }
        let ranges = (0..first.n_channels())
            .map(|c| {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for m in refs {
                    for &v in &m.channels()[c] {
                        lo = lo.min(v);
                        hi = hi.max(v);
                    }
                }
                (lo, hi)
            })
            .collect();
        Ok(HistogramLayout {
            bins,
            ranges,
            labels: first.labels().to_vec(),
        })
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn ranges(&self) -> &[(f64, f64)] {
        &self.ranges
    }

    fn bin_of(&self, channel: usize, v: f64) -> usize {
        let (lo, hi) = self.ranges[channel];
        if !(hi > lo) {
            // Degenerate channel range: all mass in bin 0.
            return 0;
        }
        let idx = ((v - lo) / (hi - lo) * self.bins as f64).floor();
        (idx.max(0.0) as usize).min(self.bins - 1)
    }
}

/// Absolute counts and relative frequencies per (channel, bin).
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramFeature {
    layout: HistogramLayout,
    absolute: Vec<Vec<u64>>,
    relative: Vec<Vec<f64>>,
    samples: usize,
}

impl HistogramFeature {
    pub fn layout(&self) -> &HistogramLayout {
        &self.layout
    }

    pub fn absolute(&self) -> &[Vec<u64>] {
        &self.absolute
    }

    pub fn relative(&self) -> &[Vec<f64>] {
        &self.relative
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    /// Flat `[absolute / T || relative]` vector over all channels, the form
    /// consumed by the Manhattan matcher.
    pub fn flat_vector(&self) -> Vec<f64> {
        let t = self.samples as f64;
        let mut v = Vec::with_capacity(2 * self.layout.bins * self.absolute.len());
        for ch in &self.absolute {
            v.extend(ch.iter().map(|&c| c as f64 / t));
        }
        for ch in &self.relative {
            v.extend_from_slice(ch);
        }
        v
    }
}

/// Bins every channel of `m` with the given layout. Out-of-range values are
/// clamped into the first or last bin.
pub fn histogram_features(m: &FeatureMatrix, layout: &HistogramLayout) -> Result<HistogramFeature> {
    if m.labels() != layout.labels.as_slice() {
        return Err(Error::contract(
            "feature matrix channels do not match histogram layout".to_string(),
        ));
    }
    let t = m.len();
    let mut absolute = vec![vec![0u64; layout.bins]; m.n_channels()];
    for (c, ch) in m.channels().iter().enumerate() {
        for &v in ch {
            absolute[c][layout.bin_of(c, v)] += 1;
        }
    }
    let relative = absolute
        .iter()
        .map(|ch| ch.iter().map(|&c| c as f64 / t as f64).collect())
        .collect();
    Ok(HistogramFeature {
        layout: layout.clone(),
        absolute,
        relative,
        samples: t,
    })
}

/// 17 significant digits: enough for a lossless f64 round trip.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Serializes a feature matrix as CSV: header row of channel labels, one row
/// per time sample, values at 17 significant digits.
pub fn feature_csv(m: &FeatureMatrix) -> String {
    let mut out = String::new();
    out.push_str(&m.labels().join(","));
    out.push('\n');
    for k in 0..m.len() {
        let row: Vec<String> = m.channels().iter().map(|c| format_float(c[k])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Parses a matrix written by [`feature_csv`]. Robot and feature set are
/// recovered from the channel labels.
pub fn parse_feature_csv(text: &str) -> Result<FeatureMatrix> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "empty feature CSV".to_string(),
    })?;
    let labels: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();

    let (robot, set) = infer_kind(&labels).ok_or(Error::Parse {
        line: 1,
        message: format!("unrecognized channel labels {labels:?}"),
    })?;

    let mut channels: Vec<Vec<f64>> = vec![Vec::new(); labels.len()];
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != labels.len() {
            return Err(Error::Parse {
                line: idx + 1,
                message: format!("expected {} values, got {}", labels.len(), fields.len()),
            });
        }
        for (c, f) in fields.iter().enumerate() {
            channels[c].push(f.trim().parse::<f64>().map_err(|_| Error::Parse {
                line: idx + 1,
                message: format!("cannot parse float from {f:?}"),
            })?);
        }
    }
    FeatureMatrix::new(labels, channels, robot, set)
}

fn infer_kind(labels: &[String]) -> Option<(RobotKind, FeatureSet)> {
    for robot in [RobotKind::TwoD, RobotKind::ThreeD] {
        for set in [FeatureSet::F1, FeatureSet::F2, FeatureSet::F3] {
            if expected_labels(robot, set) == labels {
                return Some((robot, set));
            }
        }
    }
    None
}
