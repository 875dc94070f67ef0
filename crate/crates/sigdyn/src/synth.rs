//! Deterministic synthetic signature corpus.
//!
//! Each user is a fixed set of harmonics per axis (their "template");
//! genuine repetitions re-draw small multiplicative amplitude jitters, phase
//! offsets and a smooth time warp. Inter-user differences are large compared
//! to that jitter, which is exactly what a verification benchmark needs.
//! Everything derives from one seed, so corpora are reproducible bit for
//! bit.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};

use crate::error::{Error, Result};
use crate::ingest::TrajectorySI;

const DT: f64 = 0.01;
const INCH_M: f64 = 0.0254;
/// Templates scale to at most 9.2 mm per axis and jitter multipliers are
/// clamped to 8%, so every sample stays inside a plus/minus 1 cm box.
const TARGET_MAX: f64 = 0.0092;
const JITTER_CLAMP: f64 = 0.08;

#[derive(Debug, Clone, Copy)]
struct Harmonic {
    amp: f64,
    freq: f64,
    phase: f64,
}

#[derive(Debug, Clone)]
struct Template {
    n: usize,
    x: [Harmonic; 3],
    y: [Harmonic; 3],
}

/// splitmix64 finalizer over seed and stream indices, so each (user, rep)
/// pair gets an independent generator no matter in which order signatures
/// are drawn.
fn mix(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed
        ^ a.wrapping_mul(0x9e37_79b9_7f4a_7c15)
        ^ b.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn draw_axis(rng: &mut ChaCha8Rng) -> [Harmonic; 3] {
    let bands = [(0.8, 1.6), (2.0, 3.5), (4.0, 6.0)];
    let amps = [(3.0, 6.0), (1.0, 2.5), (0.3, 1.0)];
    let mut out = [Harmonic {
        amp: 0.0,
        freq: 0.0,
        phase: 0.0,
    }; 3];
    for h in 0..3 {
        out[h] = Harmonic {
            amp: rng.gen_range(amps[h].0..amps[h].1) * 1e-3,
            freq: rng.gen_range(bands[h].0..bands[h].1),
            phase: rng.gen_range(0.0..std::f64::consts::TAU),
        };
    }
    // Normalize so the worst-case sum of amplitudes hits the target extent;
    // any phase alignment then stays inside the box.
    let total: f64 = out.iter().map(|h| h.amp).sum();
    let scale = TARGET_MAX / total;
    for h in &mut out {
        h.amp *= scale;
    }
    out
}

fn template(seed: u64, user: usize) -> Template {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, user as u64, 0));
    Template {
        n: rng.gen_range(120..=200),
        x: draw_axis(&mut rng),
        y: draw_axis(&mut rng),
    }
}

fn clamp_mult(v: f64) -> f64 {
    v.clamp(1.0 - JITTER_CLAMP, 1.0 + JITTER_CLAMP)
}

/// One genuine signature: repetition `rep` of `user` under `seed`, uniformly
/// sampled at 100 Hz inside a 2 cm by 2 cm box.
pub fn synth_signature(seed: u64, user: usize, rep: usize) -> TrajectorySI {
    let tpl = template(seed, user);
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, user as u64, rep as u64 + 1));
    let amp_noise = LogNormal::new(0.0, 0.03).expect("valid lognormal");
    let phase_noise = Normal::new(0.0, 0.03).expect("valid normal");

    let mut jittered_x = tpl.x;
    let mut jittered_y = tpl.y;
    for h in jittered_x.iter_mut().chain(jittered_y.iter_mut()) {
        h.amp *= clamp_mult(amp_noise.sample(&mut rng));
        h.phase += phase_noise.sample(&mut rng);
    }
    let duration = tpl.n as f64 * DT;
    let warp_amp = rng.gen_range(0.0..0.04);
    let warp_phase = rng.gen_range(0.0..std::f64::consts::TAU);

    let eval = |harmonics: &[Harmonic; 3], t: f64| -> f64 {
        harmonics
            .iter()
            .map(|h| h.amp * (std::f64::consts::TAU * h.freq * t + h.phase).sin())
            .sum()
    };
    let mut x = Vec::with_capacity(tpl.n);
    let mut y = Vec::with_capacity(tpl.n);
    for k in 0..tpl.n {
        let t = k as f64 * DT;
        let warped = t
            + warp_amp * duration / std::f64::consts::TAU
                * (std::f64::consts::TAU * t / duration + warp_phase).sin();
        x.push(eval(&jittered_x, warped));
        y.push(eval(&jittered_y, warped));
    }
    TrajectorySI::from_uniform(x, y, 0.0, DT).expect("n >= 2 uniform samples")
}

/// Renders a trajectory as a count-header device file: integer dot
/// coordinates at the given resolution, sample-index time column, pen always
/// down.
pub fn svc_text(traj: &TrajectorySI, dpi: f64) -> String {
    let mut out = format!("{}\n", traj.len());
    for k in 0..traj.len() {
        let xd = (traj.x()[k] / INCH_M * dpi).round() as i64;
        let yd = (traj.y()[k] / INCH_M * dpi).round() as i64;
        out.push_str(&format!("{xd} {yd} {k} 1\n"));
    }
    out
}

#[derive(Debug, Clone, Copy)]
pub struct SynthConfig {
    pub users: usize,
    pub genuine_per_user: usize,
    pub seed: u64,
}

/// Writes a complete corpus under `dir` (one directory per user, one
/// count-header file per signature) plus a tab-separated manifest, and
/// returns the manifest path.
pub fn generate_corpus(dir: &Path, cfg: &SynthConfig) -> Result<PathBuf> {
    let mut manifest = String::new();
    for u in 0..cfg.users {
        let user = format!("u{u:02}");
        let user_dir = dir.join(&user);
        std::fs::create_dir_all(&user_dir).map_err(|e| Error::io(&user_dir, e))?;
        for r in 0..cfg.genuine_per_user {
            let rel = format!("{user}/g{r:02}.svc");
            let path = dir.join(&rel);
            let traj = synth_signature(cfg.seed, u, r);
            std::fs::write(&path, svc_text(&traj, 2540.0)).map_err(|e| Error::io(&path, e))?;
            manifest.push_str(&format!("{user}\tgenuine\t{rel}\n"));
        }
    }
    let manifest_path = dir.join("manifest.tsv");
    std::fs::write(&manifest_path, manifest).map_err(|e| Error::io(&manifest_path, e))?;
    Ok(manifest_path)
}
