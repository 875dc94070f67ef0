//! End-to-end wiring: configuration, file loading, feature extraction, trial
//! scoring and report serialization.
//!
//! Everything downstream of parsing is deterministic for a fixed
//! configuration, and the configuration itself is condensed into a
//! fingerprint so score batches from different setups cannot be merged.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::eval::{run_protocol, EvalReport, Trial, TrialPlan, Truth};
use crate::features::{
    build_feature_set_2d, build_feature_set_3d, format_float, histogram_features, FeatureMatrix,
    FeatureSet, HistogramLayout, RobotKind,
};
use crate::ingest::{
    parse_signature, resample_uniform, strip_penups, to_si, Label, ManifestEntry, SignatureFormat,
    SignatureMeta, TrajectorySI,
};
use crate::matchers::{dtw_score, manhattan_score, ReferenceSet, ScoreNorm};
use crate::robot2d::{Arm2d, GravityMode, JointTrajectory2d, TorqueTrajectory2d};
use crate::robot3d::{Arm3d, JointTrajectory3d, TorqueTrajectory3d};

/// Which matcher turns features into scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verifier {
    /// Elastic trajectory matcher.
    Dtw,
    /// Histogram matcher with Manhattan distance.
    Manhattan,
}

impl Verifier {
    pub fn as_str(self) -> &'static str {
        match self {
            Verifier::Dtw => "dtw",
            Verifier::Manhattan => "manhattan",
        }
    }
}

/// How input files are interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormatChoice {
    /// `.csv` extension selects the CSV reader, anything else the
    /// count-header reader.
    Auto,
    Svc,
    Csv,
}

impl FormatChoice {
    pub fn as_str(self) -> &'static str {
        match self {
            FormatChoice::Auto => "auto",
            FormatChoice::Svc => "svc",
            FormatChoice::Csv => "csv",
        }
    }

    fn resolve(self, path: &Path) -> SignatureFormat {
        match self {
            FormatChoice::Svc => SignatureFormat::SvcCountHeader,
            FormatChoice::Csv => SignatureFormat::CsvColumns,
            FormatChoice::Auto => {
                let is_csv = path
                    .extension()
                    .map(|e| e.eq_ignore_ascii_case("csv"))
                    .unwrap_or(false);
                if is_csv {
                    SignatureFormat::CsvColumns
                } else {
                    SignatureFormat::SvcCountHeader
                }
            }
        }
    }
}

/// Every knob that changes scores.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub robot: RobotKind,
    pub feature_set: FeatureSet,
    pub verifier: Verifier,
    /// Orientation of the planar arm's writing plane. The spatial arm always
    /// writes on a horizontal plane and ignores this.
    pub gravity: GravityMode,
    /// References enrolled per user.
    pub refs: usize,
    /// Optional resampling rate applied after pen-up removal. Without it,
    /// inputs must already be uniformly sampled.
    pub resample_hz: Option<f64>,
    /// Histogram bins per channel for the Manhattan verifier.
    pub bins: usize,
    /// Device resolution of the input files.
    pub dpi: f64,
    /// Device sampling rate; also converts integer time columns to seconds.
    pub rate: f64,
    pub format: FormatChoice,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            robot: RobotKind::TwoD,
            feature_set: FeatureSet::F1,
            verifier: Verifier::Dtw,
            gravity: GravityMode::Vertical,
            refs: 5,
            resample_hz: None,
            bins: 16,
            dpi: 2540.0,
            rate: 100.0,
            format: FormatChoice::Auto,
        }
    }
}

impl PipelineConfig {
    /// Canonical one-line rendering of the scoring-relevant fields.
    fn canonical(&self) -> String {
        format!(
            "robot={};features={};verifier={};gravity={};refs={};resample={};bins={};dpi={};rate={};format={}",
            self.robot.as_str(),
            self.feature_set.as_str(),
            self.verifier.as_str(),
            self.gravity.as_str(),
            self.refs,
            self.resample_hz.map(format_float).unwrap_or_else(|| "none".to_string()),
            self.bins,
            format_float(self.dpi),
            format_float(self.rate),
            self.format.as_str(),
        )
    }

    /// FNV-1a 64-bit hash of the canonical configuration line.
    pub fn fingerprint(&self) -> u64 {
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        for b in self.canonical().bytes() {
            hash ^= b as u64;
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        }
        hash
    }
}

/// Parses, converts to SI, removes pen-up samples and (optionally) resamples
/// one signature file into a uniformly sampled planar trajectory.
pub fn load_signature(path: &Path, config: &PipelineConfig) -> Result<TrajectorySI> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let format = config.format.resolve(path);
    let meta = SignatureMeta::new("", Label::Genuine, config.dpi, config.rate)?;
    let raw = parse_signature(&text, format, meta)?;
    let pen = raw.pen_states();
    let si = to_si(&raw);
    let stripped = strip_penups(&si, &pen)?;
    let uniform = match config.resample_hz {
        Some(hz) => resample_uniform(&stripped, hz)?,
        None => stripped,
    };
    TrajectorySI::from_points(uniform)
}

/// Joint, torque and feature trajectories of one signature.
#[derive(Debug, Clone)]
pub enum Extraction {
    TwoD {
        joints: JointTrajectory2d,
        torques: TorqueTrajectory2d,
        features: FeatureMatrix,
    },
    ThreeD {
        joints: JointTrajectory3d,
        torques: TorqueTrajectory3d,
        features: FeatureMatrix,
    },
}

impl Extraction {
    pub fn features(&self) -> &FeatureMatrix {
        match self {
            Extraction::TwoD { features, .. } => features,
            Extraction::ThreeD { features, .. } => features,
        }
    }

    /// Joint angles as CSV, one column per joint.
    pub fn joint_csv(&self) -> String {
        match self {
            Extraction::TwoD { joints, .. } => {
                columns_csv(&["q1", "q2"], &[&joints.q1, &joints.q2])
            }
            Extraction::ThreeD { joints, .. } => columns_csv(
                &["q1", "q2", "q3"],
                &[&joints.q[0], &joints.q[1], &joints.q[2]],
            ),
        }
    }

    /// Joint torques as CSV, one column per joint.
    pub fn torque_csv(&self) -> String {
        match self {
            Extraction::TwoD { torques, .. } => {
                columns_csv(&["tau1", "tau2"], &[&torques.tau1, &torques.tau2])
            }
            Extraction::ThreeD { torques, .. } => columns_csv(
                &["tau1", "tau2", "tau3"],
                &[&torques.tau[0], &torques.tau[1], &torques.tau[2]],
            ),
        }
    }
}

fn columns_csv(labels: &[&str], columns: &[&Vec<f64>]) -> String {
    let mut out = String::new();
    out.push_str(&labels.join(","));
    out.push('\n');
    for k in 0..columns[0].len() {
        let row: Vec<String> = columns.iter().map(|c| format_float(c[k])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Runs the mechanical pipeline on one planar trajectory: place it in the
/// arm's workspace, invert the kinematics, compute torques and assemble the
/// configured feature set.
pub fn extract(traj: &TrajectorySI, config: &PipelineConfig) -> Result<Extraction> {
    match config.robot {
        RobotKind::TwoD => {
            let arm = Arm2d::default().with_gravity(config.gravity);
            let placed = arm.place(traj)?;
            let joints = arm.ik_trajectory(&placed)?;
            let torques = arm.inverse_dynamics(&joints)?;
            let features = build_feature_set_2d(&joints, &torques, config.feature_set)?;
            Ok(Extraction::TwoD {
                joints,
                torques,
                features,
            })
        }
        RobotKind::ThreeD => {
            let arm = Arm3d::default();
            let placed = arm.place(traj)?;
            let joints = arm.ik_trajectory(&placed)?;
            let torques = arm.inverse_dynamics(&joints)?;
            let features = build_feature_set_3d(&joints, &torques, config.feature_set)?;
            Ok(Extraction::ThreeD {
                joints,
                torques,
                features,
            })
        }
    }
}

/// Loads and extracts one file.
pub fn extract_file(path: &Path, config: &PipelineConfig) -> Result<Extraction> {
    let traj = load_signature(path, config)?;
    extract(&traj, config)
}

/// Scores a question against reference features under the configured
/// verifier.
pub fn score_question(
    refs: &[FeatureMatrix],
    question: &FeatureMatrix,
    config: &PipelineConfig,
) -> Result<f64> {
    match config.verifier {
        Verifier::Dtw => {
            let set = ReferenceSet::new(refs.to_vec())?;
            Ok(dtw_score(question, &set, ScoreNorm::MeanReferenceSpread)?.value())
        }
        Verifier::Manhattan => {
            let ref_views: Vec<&FeatureMatrix> = refs.iter().collect();
            let layout = HistogramLayout::fit(&ref_views, config.bins)?;
            let ref_hists: Vec<_> = refs
                .iter()
                .map(|m| histogram_features(m, &layout))
                .collect::<Result<_>>()?;
            let q = histogram_features(question, &layout)?;
            Ok(manhattan_score(&q, &ref_hists)?.value())
        }
    }
}

/// Extracts every file the plan touches (in parallel, each file once) and
/// scores all trials. Output order matches the plan regardless of thread
/// scheduling.
pub fn score_plan(plan: &TrialPlan, config: &PipelineConfig) -> Result<Vec<Trial>> {
    let mut paths: Vec<&PathBuf> = plan
        .references
        .values()
        .flatten()
        .map(|e| &e.path)
        .chain(plan.trials.iter().map(|t| &t.question.path))
        .collect();
    paths.sort();
    paths.dedup();

    let features: HashMap<&PathBuf, FeatureMatrix> = paths
        .par_iter()
        .map(|&p| extract_file(p, config).map(|e| (p, e.features().clone())))
        .collect::<Result<_>>()?;

    let scorer = |refs: &[ManifestEntry], question: &ManifestEntry| -> Result<f64> {
        let ref_features: Vec<FeatureMatrix> = refs
            .iter()
            .map(|e| features[&e.path].clone())
            .collect();
        score_question(&ref_features, &features[&question.path], config)
    };
    run_protocol(plan, &scorer)
}

/// `user_id,question_path,label,score` rows for every trial.
pub fn scores_csv(trials: &[Trial]) -> String {
    let mut out = String::from("user_id,question_path,label,score\n");
    for t in trials {
        let label = match t.truth {
            Truth::Genuine => "genuine",
            Truth::Impostor => "impostor",
        };
        out.push_str(&format!(
            "{},{},{},{}\n",
            t.target_user,
            t.question_rel_path,
            label,
            format_float(t.score)
        ));
    }
    out
}

/// `threshold,far_percent,frr_percent` rows of the full sweep.
pub fn det_csv(report: &EvalReport) -> String {
    let mut out = String::from("threshold,far_percent,frr_percent\n");
    for p in &report.det {
        out.push_str(&format!(
            "{},{},{}\n",
            format_float(p.threshold),
            format_float(p.far_percent),
            format_float(p.frr_percent)
        ));
    }
    out
}

/// Human-readable summary of one evaluation run.
pub fn report_txt(report: &EvalReport, config: &PipelineConfig) -> String {
    format!(
        "eer_percent: {}\nn_genuine_trials: {}\nn_impostor_trials: {}\nconfig_fingerprint: {:016x}\nconfig: {}\n",
        format_float(report.eer_percent),
        report.n_genuine,
        report.n_impostor,
        config.fingerprint(),
        config.canonical(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::DetPoint;
    use approx::assert_abs_diff_eq;

    fn loop_traj(n: usize, scale: f64, fy: f64) -> TrajectorySI {
        let dt = 0.01;
        let (mut x, mut y) = (Vec::new(), Vec::new());
        for k in 0..n {
            let t = k as f64 * dt;
            x.push(scale * (2.0 * std::f64::consts::PI * t).cos());
            y.push(scale * (2.0 * std::f64::consts::PI * fy * t).sin());
        }
        TrajectorySI::from_uniform(x, y, 0.0, dt).unwrap()
    }

    fn small_loop(n: usize, scale: f64) -> TrajectorySI {
        loop_traj(n, scale, 1.3)
    }

    #[test]
    fn fingerprint_tracks_scoring_fields_only() {
        let base = PipelineConfig::default();
        assert_eq!(base.fingerprint(), PipelineConfig::default().fingerprint());
        let mut other = PipelineConfig::default();
        other.robot = RobotKind::ThreeD;
        assert_ne!(base.fingerprint(), other.fingerprint());
        let mut rebinned = PipelineConfig::default();
        rebinned.bins = 8;
        assert_ne!(base.fingerprint(), rebinned.fingerprint());
    }

    #[test]
    fn extraction_produces_consistent_lengths() {
        let traj = small_loop(120, 0.008);
        for robot in [RobotKind::TwoD, RobotKind::ThreeD] {
            for set in [FeatureSet::F1, FeatureSet::F2, FeatureSet::F3] {
                let config = PipelineConfig {
                    robot,
                    feature_set: set,
                    ..PipelineConfig::default()
                };
                let ex = extract(&traj, &config).unwrap();
                assert_eq!(ex.features().len(), traj.len());
                let expected = crate::features::expected_labels(robot, set);
                assert_eq!(ex.features().labels(), expected.as_slice());
            }
        }
    }

    #[test]
    fn joint_and_torque_csv_have_matching_shape() {
        let traj = small_loop(50, 0.005);
        let ex = extract(&traj, &PipelineConfig::default()).unwrap();
        let q = ex.joint_csv();
        let tau = ex.torque_csv();
        assert!(q.starts_with("q1,q2\n"));
        assert!(tau.starts_with("tau1,tau2\n"));
        assert_eq!(q.lines().count(), 51);
        assert_eq!(tau.lines().count(), 51);
    }

    #[test]
    fn both_verifiers_score_self_lower_than_stranger() {
        let a1 = loop_traj(80, 0.006, 1.28);
        let a2 = loop_traj(80, 0.006, 1.30);
        let a3 = loop_traj(80, 0.006, 1.32);
        let b = loop_traj(80, 0.006, 2.60);
        for verifier in [Verifier::Dtw, Verifier::Manhattan] {
            let config = PipelineConfig {
                verifier,
                ..PipelineConfig::default()
            };
            let refs: Vec<FeatureMatrix> = [&a1, &a2, &a3]
                .iter()
                .map(|t| extract(t, &config).unwrap().features().clone())
                .collect();
            let own = extract(&a2, &config).unwrap().features().clone();
            let strange = extract(&b, &config).unwrap().features().clone();
            let s_own = score_question(&refs, &own, &config).unwrap();
            let s_strange = score_question(&refs, &strange, &config).unwrap();
            assert!(
                s_own < s_strange,
                "{}: own {s_own} should be below stranger {s_strange}",
                verifier.as_str()
            );
        }
    }

    #[test]
    fn report_text_is_complete() {
        let report = EvalReport {
            eer_percent: 12.5,
            det: vec![DetPoint {
                threshold: f64::NEG_INFINITY,
                far_percent: 0.0,
                frr_percent: 100.0,
            }],
            n_genuine: 4,
            n_impostor: 6,
        };
        let config = PipelineConfig::default();
        let text = report_txt(&report, &config);
        assert!(text.contains("eer_percent: 1.2500000000000000e1"));
        assert!(text.contains("n_genuine_trials: 4"));
        assert!(text.contains("n_impostor_trials: 6"));
        assert!(text.contains(&format!("{:016x}", config.fingerprint())));
    }

    #[test]
    fn det_csv_round_trips_through_parse() {
        let report = EvalReport {
            eer_percent: 0.0,
            det: vec![
                DetPoint {
                    threshold: f64::NEG_INFINITY,
                    far_percent: 0.0,
                    frr_percent: 100.0,
                },
                DetPoint {
                    threshold: 0.5,
                    far_percent: 50.0,
                    frr_percent: 0.0,
                },
            ],
            n_genuine: 1,
            n_impostor: 2,
        };
        let text = det_csv(&report);
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "threshold,far_percent,frr_percent");
        let first: Vec<f64> = lines
            .next()
            .unwrap()
            .split(',')
            .map(|f| f.parse().unwrap())
            .collect();
        assert_eq!(first[0], f64::NEG_INFINITY);
        assert_abs_diff_eq!(first[2], 100.0, epsilon = 0.0);
    }
}
