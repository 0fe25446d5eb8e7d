//! Synthetic subjects with known stages.
//!
//! Stages follow a Markov chain over epochs. The heart beats as an AR(1)
//! RR process around a stage-dependent mean, modulated by respiratory sinus
//! arrhythmia at the current breathing phase; the ECG is a train of narrow
//! Gaussian QRS complexes with a small T wave. Breathing is a sinusoid whose
//! rate and amplitude wander slowly, plus baseline drift and white noise.
//!
//! A `separability` scalar scales every stage's departure from the
//! across-stage average, so one knob moves between indistinguishable stages
//! (0) and the default gaps (1) or beyond.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signal_io::{AnyHypnogram, Hypnogram, SignalTrace, SixStage, Stage, SubjectRecord};
use crate::signal_io::{DEFAULT_ECG_RATE_HZ, DEFAULT_RESP_RATE_HZ};

pub const MIN_SYNTH_EPOCHS: usize = 20;
const EPOCH_S: f64 = 30.0;
const QRS_SIGMA_S: f64 = 0.01;
const T_WAVE_DELAY_S: f64 = 0.25;
const T_WAVE_SIGMA_S: f64 = 0.04;
const T_WAVE_AMPLITUDE: f64 = 0.2;
/// Seconds between the random knots of the slow rate/amplitude wander.
const WANDER_KNOT_S: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("need at least {MIN_SYNTH_EPOCHS} epochs, got {0}")]
    TooFewEpochs(usize),
}

/// Cardiorespiratory parameters of one stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageProfile {
    pub rr_mean_s: f64,
    /// Stationary SD of the AR(1) RR component.
    pub rr_sd_s: f64,
    pub rr_ar_coef: f64,
    /// Peak RR swing from respiratory sinus arrhythmia.
    pub rsa_depth_s: f64,
    pub breath_rate_per_min: f64,
    /// Relative SD of the slowly wandering breathing rate.
    pub breath_rate_jitter: f64,
    /// Relative SD of the slowly wandering breathing amplitude.
    pub breath_amp_variability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthProfile {
    pub separability: f64,
    /// Wake, Light, Deep, REM.
    pub stages: [StageProfile; 4],
    /// Row-stochastic epoch-to-epoch transition matrix.
    pub transition: [[f64; 4]; 4],
    pub ecg_noise_sd: f64,
    pub breath_amplitude: f64,
    pub breath_noise_sd: f64,
    pub drift_amplitude: f64,
    pub ecg_rate_hz: f64,
    pub resp_rate_hz: f64,
}

impl Default for SynthProfile {
    fn default() -> Self {
        let stage =
            |rr_mean_s, rr_sd_s, rsa_depth_s, breath_rate_per_min, breath_rate_jitter, breath_amp_variability| {
                StageProfile {
                    rr_mean_s,
                    rr_sd_s,
                    rr_ar_coef: 0.95,
                    rsa_depth_s,
                    breath_rate_per_min,
                    breath_rate_jitter,
                    breath_amp_variability,
                }
            };
        Self {
            separability: 1.0,
            stages: [
                stage(0.70, 0.060, 0.015, 20.0, 0.20, 0.35),
                stage(0.98, 0.019, 0.041, 13.5, 0.04, 0.08),
                stage(1.00, 0.015, 0.045, 13.0, 0.03, 0.05),
                stage(0.84, 0.045, 0.015, 17.0, 0.18, 0.30),
            ],
            transition: [
                [0.75, 0.20, 0.00, 0.05],
                [0.04, 0.76, 0.10, 0.10],
                [0.00, 0.18, 0.82, 0.00],
                [0.04, 0.12, 0.00, 0.84],
            ],
            ecg_noise_sd: 0.02,
            breath_amplitude: 1.0,
            breath_noise_sd: 0.05,
            drift_amplitude: 0.5,
            ecg_rate_hz: DEFAULT_ECG_RATE_HZ,
            resp_rate_hz: DEFAULT_RESP_RATE_HZ,
        }
    }
}

impl SynthProfile {
    /// Well-separated stages with light measurement noise.
    pub fn easy() -> Self {
        Self {
            separability: 1.0,
            ..Self::default()
        }
    }

    /// No measurement noise, drift or wander; RR jitter kept at zero.
    pub fn noiseless() -> Self {
        let mut p = Self {
            ecg_noise_sd: 0.0,
            breath_noise_sd: 0.0,
            drift_amplitude: 0.0,
            ..Self::default()
        };
        for s in &mut p.stages {
            s.rr_sd_s = 0.0;
            s.rsa_depth_s = 0.0;
            s.breath_rate_jitter = 0.0;
            s.breath_amp_variability = 0.0;
        }
        p
    }

    /// Stage parameters after applying `separability`.
    pub fn effective_stages(&self) -> [StageProfile; 4] {
        let s = self.separability;
        let avg = |f: fn(&StageProfile) -> f64| self.stages.iter().map(f).sum::<f64>() / 4.0;
        let centers = StageProfile {
            rr_mean_s: avg(|p| p.rr_mean_s),
            rr_sd_s: avg(|p| p.rr_sd_s),
            rr_ar_coef: avg(|p| p.rr_ar_coef),
            rsa_depth_s: avg(|p| p.rsa_depth_s),
            breath_rate_per_min: avg(|p| p.breath_rate_per_min),
            breath_rate_jitter: avg(|p| p.breath_rate_jitter),
            breath_amp_variability: avg(|p| p.breath_amp_variability),
        };
        let mix = |c: f64, v: f64| c + s * (v - c);
        self.stages.map(|p| StageProfile {
            rr_mean_s: mix(centers.rr_mean_s, p.rr_mean_s),
            rr_sd_s: mix(centers.rr_sd_s, p.rr_sd_s).max(0.0),
            rr_ar_coef: mix(centers.rr_ar_coef, p.rr_ar_coef),
            rsa_depth_s: mix(centers.rsa_depth_s, p.rsa_depth_s).max(0.0),
            breath_rate_per_min: mix(centers.breath_rate_per_min, p.breath_rate_per_min),
            breath_rate_jitter: mix(centers.breath_rate_jitter, p.breath_rate_jitter).max(0.0),
            breath_amp_variability: mix(centers.breath_amp_variability, p.breath_amp_variability).max(0.0),
        })
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidProfile(m));
        if !(self.separability >= 0.0) {
            return bad(format!("separability {} must be non-negative", self.separability));
        }
        for (k, p) in self.effective_stages().iter().enumerate() {
            let name = Stage::ALL[k];
            if !(0.5..=1.5).contains(&p.rr_mean_s) {
                return bad(format!("{name}: RR mean {} s outside [0.5, 1.5]", p.rr_mean_s));
            }
            if !(8.0..=25.0).contains(&p.breath_rate_per_min) {
                return bad(format!(
                    "{name}: breathing rate {} /min outside [8, 25]",
                    p.breath_rate_per_min
                ));
            }
            if !(0.0..1.0).contains(&p.rr_ar_coef) {
                return bad(format!("{name}: AR coefficient {} outside [0, 1)", p.rr_ar_coef));
            }
        }
        for (k, row) in self.transition.iter().enumerate() {
            if row.iter().any(|v| !(*v >= 0.0)) || (row.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return bad(format!("transition row {k} is not a probability vector"));
            }
        }
        let positive = [self.ecg_rate_hz, self.resp_rate_hz, self.breath_amplitude];
        let non_negative = [self.ecg_noise_sd, self.breath_noise_sd, self.drift_amplitude];
        if positive.iter().any(|v| !(*v > 0.0)) || non_negative.iter().any(|v| !(*v >= 0.0)) {
            return bad("rates and amplitudes must be positive, noise levels non-negative".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticSubject {
    /// Signals plus a six-class hypnogram and AHI, as a scored study would
    /// provide them.
    pub record: SubjectRecord,
    pub truth: Hypnogram<Stage>,
    /// Planted beat times.
    pub beat_times_s: Vec<f64>,
}

fn sample_stages(rng: &mut ChaCha8Rng, transition: &[[f64; 4]; 4], n: usize) -> Vec<Stage> {
    let mut stages = Vec::with_capacity(n);
    let mut current = 0usize;
    for _ in 0..n {
        stages.push(Stage::ALL[current]);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let row = &transition[current];
        current = (0..4)
            .find(|&k| {
                acc += row[k];
                u < acc
            })
            .unwrap_or(current);
    }
    stages
}

/// Piecewise-linear standard-normal wander with knots every `knot_s`.
struct Wander {
    knots: Vec<f64>,
    knot_s: f64,
}

impl Wander {
    fn new(rng: &mut ChaCha8Rng, duration_s: f64, knot_s: f64) -> Self {
        let n = (duration_s / knot_s).ceil() as usize + 2;
        Self {
            knots: (0..n).map(|_| StandardNormal.sample(rng)).collect(),
            knot_s,
        }
    }

    fn at(&self, t: f64) -> f64 {
        let x = (t / self.knot_s).max(0.0);
        let i = (x.floor() as usize).min(self.knots.len() - 2);
        let f = x - i as f64;
        self.knots[i] + f * (self.knots[i + 1] - self.knots[i])
    }
}

struct Breathing {
    /// Phase in cycles at each respiration sample.
    phase: Vec<f64>,
    amplitude: Vec<f64>,
}

fn synth_breathing(
    rng: &mut ChaCha8Rng,
    stages: &[Stage],
    params: &[StageProfile; 4],
    profile: &SynthProfile,
    n_samples: usize,
) -> Breathing {
    let rate = profile.resp_rate_hz;
    let duration = n_samples as f64 / rate;
    let rate_wander = Wander::new(rng, duration, WANDER_KNOT_S);
    let amp_wander = Wander::new(rng, duration, WANDER_KNOT_S);
    let mut phase = Vec::with_capacity(n_samples);
    let mut amplitude = Vec::with_capacity(n_samples);
    let mut ph = rng.random::<f64>();
    for i in 0..n_samples {
        let t = i as f64 / rate;
        let e = ((t / EPOCH_S) as usize).min(stages.len() - 1);
        let p = &params[stages[e].index()];
        let f = p.breath_rate_per_min / 60.0 * (1.0 + p.breath_rate_jitter * rate_wander.at(t)).max(0.3);
        phase.push(ph);
        ph += f / rate;
        amplitude.push(profile.breath_amplitude * (1.0 + p.breath_amp_variability * amp_wander.at(t)).max(0.1));
    }
    Breathing { phase, amplitude }
}

fn interp(x: &[f64], rate: f64, t: f64) -> f64 {
    let pos = (t * rate).clamp(0.0, (x.len() - 1) as f64);
    let i = (pos.floor() as usize).min(x.len() - 2);
    let f = pos - i as f64;
    x[i] + f * (x[i + 1] - x[i])
}

fn gaussian_bump(samples: &mut [f64], rate: f64, center_s: f64, sigma_s: f64, amplitude: f64) {
    let reach = 5.0 * sigma_s;
    let lo = ((center_s - reach) * rate).floor().max(0.0) as usize;
    let hi = (((center_s + reach) * rate).ceil() as usize).min(samples.len());
    for (i, s) in samples.iter_mut().enumerate().take(hi).skip(lo) {
        let d = (i as f64 / rate - center_s) / sigma_s;
        *s += amplitude * (-0.5 * d * d).exp();
    }
}

/// One synthetic subject-night of `n_epochs` 30 s epochs.
pub fn generate_subject(
    seed: u64,
    profile: &SynthProfile,
    n_epochs: usize,
    subject_id: &str,
) -> Result<SyntheticSubject, SynthError> {
    profile.validate()?;
    if n_epochs < MIN_SYNTH_EPOCHS {
        return Err(SynthError::TooFewEpochs(n_epochs));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = profile.effective_stages();
    let stages = sample_stages(&mut rng, &profile.transition, n_epochs);
    let duration = n_epochs as f64 * EPOCH_S;

    let n_resp = (duration * profile.resp_rate_hz).round() as usize;
    let breathing = synth_breathing(&mut rng, &stages, &params, profile, n_resp);

    // beats: AR(1) + RSA around the stage mean
    let mut beats = Vec::new();
    let mut t = rng.random_range(0.1..0.6);
    let mut ar = 0.0;
    while t < duration {
        beats.push(t);
        let e = ((t / EPOCH_S) as usize).min(n_epochs - 1);
        let p = &params[stages[e].index()];
        let innovation_sd = p.rr_sd_s * (1.0 - p.rr_ar_coef * p.rr_ar_coef).sqrt();
        let eps: f64 = StandardNormal.sample(&mut rng);
        ar = p.rr_ar_coef * ar + innovation_sd * eps;
        let resp_phase = interp(&breathing.phase, profile.resp_rate_hz, t);
        let rsa = p.rsa_depth_s * (2.0 * std::f64::consts::PI * resp_phase).sin();
        t += (p.rr_mean_s + ar + rsa).clamp(0.4, 1.8);
    }

    let n_ecg = (duration * profile.ecg_rate_hz).round() as usize;
    let mut ecg = vec![0.0; n_ecg];
    for &b in &beats {
        gaussian_bump(&mut ecg, profile.ecg_rate_hz, b, QRS_SIGMA_S, 1.0);
        gaussian_bump(
            &mut ecg,
            profile.ecg_rate_hz,
            b + T_WAVE_DELAY_S,
            T_WAVE_SIGMA_S,
            T_WAVE_AMPLITUDE,
        );
    }
    if profile.ecg_noise_sd > 0.0 {
        let noise = Normal::new(0.0, profile.ecg_noise_sd).expect("finite SD");
        for v in &mut ecg {
            *v += noise.sample(&mut rng);
        }
    }

    let drift_phase = rng.random::<f64>() * std::f64::consts::TAU;
    let mut make_resp = |gain: f64, lag_cycles: f64| -> Vec<f64> {
        let noise = Normal::new(0.0, profile.breath_noise_sd.max(f64::MIN_POSITIVE)).expect("finite SD");
        (0..n_resp)
            .map(|i| {
                let tt = i as f64 / profile.resp_rate_hz;
                let wave = breathing.amplitude[i] * (std::f64::consts::TAU * (breathing.phase[i] - lag_cycles)).sin();
                let drift = profile.drift_amplitude * (0.6 + (std::f64::consts::TAU * 0.004 * tt + drift_phase).sin());
                let n = if profile.breath_noise_sd > 0.0 {
                    noise.sample(&mut rng)
                } else {
                    0.0
                };
                gain * wave + drift + n
            })
            .collect()
    };
    let chest = make_resp(1.0, 0.0);
    let abdomen = make_resp(0.7, 0.05);

    let six: Vec<SixStage> = stages
        .iter()
        .map(|s| match s {
            Stage::Wake => SixStage::Wake,
            Stage::Light => {
                if rng.random::<f64>() < 0.1 {
                    SixStage::S1
                } else {
                    SixStage::S2
                }
            }
            Stage::Deep => {
                if rng.random::<f64>() < 0.3 {
                    SixStage::S4
                } else {
                    SixStage::S3
                }
            }
            Stage::Rem => SixStage::Rem,
        })
        .collect();
    let ahi = rng.random_range(0.0..4.5);

    let record = SubjectRecord {
        subject_id: subject_id.to_string(),
        ecg: SignalTrace::new("ECG", profile.ecg_rate_hz, ecg),
        breath_chest: SignalTrace::new("THOR RES", profile.resp_rate_hz, chest),
        breath_abdomen: Some(SignalTrace::new("ABDO RES", profile.resp_rate_hz, abdomen)),
        hypnogram: Some(AnyHypnogram::Six(Hypnogram::new(EPOCH_S, six))),
        ahi: Some(ahi),
    };
    Ok(SyntheticSubject {
        record,
        truth: Hypnogram::new(EPOCH_S, stages),
        beat_times_s: beats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::detect_r_peaks;

    #[test]
    fn same_seed_same_subject() {
        let p = SynthProfile::default();
        let a = generate_subject(3, &p, 20, "a").unwrap();
        let b = generate_subject(3, &p, 20, "a").unwrap();
        assert_eq!(a.record.ecg, b.record.ecg);
        assert_eq!(a.record.breath_chest, b.record.breath_chest);
        assert_eq!(a.truth, b.truth);
        let c = generate_subject(4, &p, 20, "a").unwrap();
        assert_ne!(a.record.ecg, c.record.ecg);
    }

    #[test]
    fn lengths_match_the_grid() {
        let s = generate_subject(1, &SynthProfile::default(), 40, "x").unwrap();
        assert_eq!(s.truth.len(), 40);
        assert_eq!(s.record.hypnogram.as_ref().unwrap().len(), 40);
        assert!((s.record.ecg.duration_s() - 1200.0).abs() < 1e-9);
        assert!((s.record.breath_chest.duration_s() - 1200.0).abs() < 1e-9);
    }

    #[test]
    fn noiseless_beats_are_recovered() {
        let mut p = SynthProfile::noiseless();
        p.transition = [[1.0, 0.0, 0.0, 0.0]; 4];
        let s = generate_subject(9, &p, 20, "n").unwrap();
        let peaks = detect_r_peaks(&s.record.ecg).unwrap();
        assert_eq!(peaks.len(), s.beat_times_s.len());
        for (p, t) in peaks.iter().zip(&s.beat_times_s) {
            let planted = (t * 200.0).round() as i64;
            assert!((*p as i64 - planted).abs() <= 1, "{p} vs {planted}");
        }
    }

    #[test]
    fn deep_sleep_has_smaller_f3_than_wake() {
        use crate::epoching::{build_epoch_grid, EpochedRr};
        use crate::features_rr::novel_f3;
        use crate::preprocess::extract_rr;

        let p = SynthProfile::default();
        let (mut trials, mut wins) = (0, 0);
        for seed in 0..100 {
            let s = generate_subject(seed, &p, 120, "t").unwrap();
            let rr = extract_rr(&s.record.ecg).unwrap();
            let grid = build_epoch_grid(s.record.span_s(), 30.0).unwrap();
            let epoched = EpochedRr::new(&rr, &grid);
            let f3_of = |stage: Stage| {
                let epochs: Vec<&[f64]> = (0..grid.n_epochs)
                    .filter(|&e| s.truth.labels[e] == stage)
                    .map(|e| epoched.epoch(e))
                    .collect();
                (epochs.len() >= 3).then(|| novel_f3(&epochs).unwrap())
            };
            if let (Some(deep), Some(wake)) = (f3_of(Stage::Deep), f3_of(Stage::Wake)) {
                trials += 1;
                wins += usize::from(deep < wake);
            }
        }
        assert!(trials >= 90, "{trials} usable trials");
        assert!(wins as f64 >= 0.95 * trials as f64, "{wins}/{trials}");
    }

    #[test]
    fn profile_validation() {
        let mut p = SynthProfile::default();
        p.transition[1] = [0.5, 0.5, 0.5, 0.0];
        assert!(matches!(p.validate(), Err(SynthError::InvalidProfile(_))));
        let wide = SynthProfile {
            separability: 5.0,
            ..Default::default()
        };
        assert!(wide.validate().is_err());
        assert_eq!(
            generate_subject(0, &SynthProfile::default(), 19, "x").unwrap_err(),
            SynthError::TooFewEpochs(19)
        );
    }

    #[test]
    fn zero_separability_collapses_stages() {
        let p = SynthProfile {
            separability: 0.0,
            ..Default::default()
        };
        let s = p.effective_stages();
        assert!(s.iter().all(|x| x == &s[0]));
    }
}
