//! Baseband waveform generation, incident-signal synthesis and ambiguity
//! function evaluation with Monte-Carlo averaging over communication
//! symbols.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

use crate::array_model::{steering, ArrayGeometry, Precoder};
use crate::error::{DfrcError, Result};

/// Complex baseband sample sequence at a fixed sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledWaveform {
    pub samples: Vec<Complex64>,
    pub sample_rate: f64,
}

impl SampledWaveform {
    pub fn new(samples: Vec<Complex64>, sample_rate: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(DfrcError::domain("waveform must be nonempty"));
        }
        if !(sample_rate > 0.0) {
            return Err(DfrcError::domain("sample rate must be positive"));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum()
    }

    /// Unit-energy copy.
    pub fn normalized(&self) -> Result<Self> {
        let e = self.energy();
        if e <= 0.0 {
            return Err(DfrcError::domain("cannot normalize a zero waveform"));
        }
        let s = 1.0 / e.sqrt();
        Ok(Self {
            samples: self.samples.iter().map(|v| v * s).collect(),
            sample_rate: self.sample_rate,
        })
    }
}

/// Communication symbol stream settings. The pulse spans exactly one
/// symbol interval (no overlap between consecutive symbol pulses).
#[derive(Debug, Clone)]
pub struct CommSignalingSpec {
    pub pulse_len: usize,
    pub rolloff: f64,
    pub seed: u64,
}

impl CommSignalingSpec {
    pub fn new(pulse_len: usize, rolloff: f64, seed: u64) -> Result<Self> {
        if pulse_len == 0 {
            return Err(DfrcError::domain("pulse length must be >= 1"));
        }
        if !(rolloff > 0.0 && rolloff <= 1.0) {
            return Err(DfrcError::domain("rolloff must lie in (0, 1]"));
        }
        Ok(Self {
            pulse_len,
            rolloff,
            seed,
        })
    }
}

/// Unit-energy linear FM chirp with floor(duration * F_s) + 1 samples and
/// phase 2 pi (f_start t + (f_end - f_start) t^2 / (2 duration)).
pub fn lfm_chirp(
    duration_s: f64,
    f_start_hz: f64,
    f_end_hz: f64,
    sample_rate_hz: f64,
) -> Result<SampledWaveform> {
    if !(duration_s > 0.0) || !(sample_rate_hz > 0.0) {
        return Err(DfrcError::domain("duration and sample rate must be positive"));
    }
    let n = (duration_s * sample_rate_hz).floor() as usize + 1;
    let slope = (f_end_hz - f_start_hz) / (2.0 * duration_s);
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / sample_rate_hz;
            Complex64::from_polar(1.0, 2.0 * PI * (f_start_hz * t + slope * t * t))
        })
        .collect();
    SampledWaveform::new(samples, sample_rate_hz)?.normalized()
}

/// Root-raised-cosine tap at symbol-normalized time `t` (symbol period 1),
/// with the removable singularities evaluated by their limits.
fn rrc_tap(t: f64, beta: f64) -> f64 {
    let eps = 1e-9;
    if t.abs() < eps {
        return 1.0 + beta * (4.0 / PI - 1.0);
    }
    if (4.0 * beta * t.abs() - 1.0).abs() < eps {
        let x = PI / (4.0 * beta);
        return (beta / 2f64.sqrt())
            * ((1.0 + 2.0 / PI) * x.sin() + (1.0 - 2.0 / PI) * x.cos());
    }
    let num = (PI * t * (1.0 - beta)).sin() + 4.0 * beta * t * (PI * t * (1.0 + beta)).cos();
    let den = PI * t * (1.0 - (4.0 * beta * t).powi(2));
    num / den
}

/// Unit-energy root-raised-cosine pulse with one symbol interval of
/// support: `pulse_len` taps at t = (i - (L-1)/2) / L symbol periods.
pub fn rrc_pulse(pulse_len: usize, rolloff: f64) -> Result<SampledWaveform> {
    if pulse_len == 0 {
        return Err(DfrcError::domain("pulse length must be >= 1"));
    }
    if !(rolloff > 0.0 && rolloff <= 1.0) {
        return Err(DfrcError::domain("rolloff must lie in (0, 1]"));
    }
    let l = pulse_len as f64;
    let samples = (0..pulse_len)
        .map(|i| {
            let t = (i as f64 - (l - 1.0) / 2.0) / l;
            Complex64::new(rrc_tap(t, rolloff), 0.0)
        })
        .collect();
    // sample rate in symbol units: pulse_len samples per symbol
    SampledWaveform::new(samples, l)?.normalized()
}

/// QPSK stream: floor(num_samples / pulse_len) unit-modulus symbols, each
/// scaling one non-overlapping copy of the RRC pulse; trailing remainder
/// samples are zero. The pulse is scaled to energy pulse_len so the
/// occupied span has unit average power.
pub fn qpsk_stream(
    spec: &CommSignalingSpec,
    num_samples: usize,
    sample_rate: f64,
) -> Result<SampledWaveform> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    qpsk_stream_with_rng(spec, num_samples, sample_rate, &mut rng)
}

fn qpsk_stream_with_rng(
    spec: &CommSignalingSpec,
    num_samples: usize,
    sample_rate: f64,
    rng: &mut ChaCha8Rng,
) -> Result<SampledWaveform> {
    if num_samples == 0 {
        return Err(DfrcError::domain("stream needs at least one sample"));
    }
    let pulse = rrc_pulse(spec.pulse_len, spec.rolloff)?;
    let scale = (spec.pulse_len as f64).sqrt();
    let num_symbols = num_samples / spec.pulse_len;
    let mut samples = vec![Complex64::new(0.0, 0.0); num_samples];
    for s in 0..num_symbols {
        let sym = qpsk_symbol(rng);
        for (i, &p) in pulse.samples.iter().enumerate() {
            samples[s * spec.pulse_len + i] = sym * p * scale;
        }
    }
    SampledWaveform::new(samples, sample_rate)
}

fn qpsk_symbol(rng: &mut ChaCha8Rng) -> Complex64 {
    let q = 2f64.sqrt().recip();
    match rng.gen_range(0..4u8) {
        0 => Complex64::new(q, q),
        1 => Complex64::new(-q, q),
        2 => Complex64::new(-q, -q),
        _ => Complex64::new(q, -q),
    }
}

/// Complex baseband signal incident at `target_angle`:
/// x[n] = e^{j phase} a^H(theta) (W_c c[n] + W_r r[n]). The radar block
/// must have at most one column (reduce the waveform count first).
pub fn incident_waveform(
    geometry: &ArrayGeometry,
    precoder: &Precoder,
    target_angle: f64,
    radar: &SampledWaveform,
    comm_streams: &[SampledWaveform],
    phase: f64,
) -> Result<SampledWaveform> {
    if precoder.radar.ncols() > 1 {
        return Err(DfrcError::domain(
            "incident waveform needs at most one radar column; reduce waveforms first",
        ));
    }
    if comm_streams.len() != precoder.comm.ncols() {
        return Err(DfrcError::domain(format!(
            "{} comm streams for {} comm columns",
            comm_streams.len(),
            precoder.comm.ncols()
        )));
    }
    let n = radar.len();
    for s in comm_streams {
        if s.len() != n {
            return Err(DfrcError::domain("stream lengths must match radar length"));
        }
    }
    let a = steering(geometry, target_angle)?;
    // per-stream complex gains a^H w
    let radar_gain: Vec<Complex64> = precoder
        .radar
        .column_iter()
        .map(|c| a.dotc(&c.clone_owned()))
        .collect();
    let comm_gain: Vec<Complex64> = precoder
        .comm
        .column_iter()
        .map(|c| a.dotc(&c.clone_owned()))
        .collect();
    let rot = Complex64::from_polar(1.0, phase);
    let samples = (0..n)
        .map(|i| {
            let mut v = Complex64::new(0.0, 0.0);
            if let Some(&g) = radar_gain.first() {
                v += g * radar.samples[i];
            }
            for (g, s) in comm_gain.iter().zip(comm_streams) {
                v += g * s.samples[i];
            }
            rot * v
        })
        .collect();
    SampledWaveform::new(samples, radar.sample_rate)
}

/// Ambiguity surface X[d, f] = |sum_n xh[n] xh*[n+d] e^{j 2 pi n f / F_s}|
/// of the unit-norm scaling xh of `x`; rows follow `delays`, columns
/// `dopplers_hz`. Out-of-range shifted indices contribute zero.
pub fn ambiguity(
    x: &SampledWaveform,
    delays: &[i64],
    dopplers_hz: &[f64],
) -> Result<DMatrix<f64>> {
    let n = x.len() as i64;
    for &d in delays {
        if d.abs() >= n {
            return Err(DfrcError::domain(format!(
                "delay {d} outside (-{n}, {n})"
            )));
        }
    }
    let xh = x.normalized()?;
    let mut out = DMatrix::zeros(delays.len(), dopplers_hz.len());
    for (di, &d) in delays.iter().enumerate() {
        for (fi, &f) in dopplers_hz.iter().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for ni in 0..n {
                let shifted = ni + d;
                if shifted < 0 || shifted >= n {
                    continue;
                }
                let w = Complex64::from_polar(1.0, 2.0 * PI * ni as f64 * f / x.sample_rate);
                acc += xh.samples[ni as usize] * xh.samples[shifted as usize].conj() * w;
            }
            out[(di, fi)] = acc.norm();
        }
    }
    Ok(out)
}

/// Mean of squared ambiguity surfaces over `trials` incident waveforms,
/// each with fresh QPSK symbols per comm column and a fresh uniform random
/// phase. Deterministic in the spec seed.
#[allow(clippy::too_many_arguments)]
pub fn monte_carlo_ambiguity(
    geometry: &ArrayGeometry,
    precoder: &Precoder,
    target_angle: f64,
    radar: &SampledWaveform,
    spec: &CommSignalingSpec,
    trials: usize,
    delays: &[i64],
    dopplers_hz: &[f64],
) -> Result<DMatrix<f64>> {
    if trials == 0 {
        return Err(DfrcError::domain("need at least one trial"));
    }
    let mut master = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut mean = DMatrix::zeros(delays.len(), dopplers_hz.len());
    for _ in 0..trials {
        let mut trial_rng = ChaCha8Rng::seed_from_u64(master.gen());
        let phase = trial_rng.gen_range(0.0..2.0 * PI);
        let streams: Vec<SampledWaveform> = (0..precoder.comm.ncols())
            .map(|_| qpsk_stream_with_rng(spec, radar.len(), radar.sample_rate, &mut trial_rng))
            .collect::<Result<_>>()?;
        let x = incident_waveform(geometry, precoder, target_angle, radar, &streams, phase)?;
        let surf = ambiguity(&x, delays, dopplers_hz)?;
        mean += surf.map(|v| v * v);
    }
    Ok(mean / trials as f64)
}

/// Normalized Frobenius distance ||a - reference|| / ||reference|| between
/// two averaged squared-ambiguity surfaces.
pub fn chirp_similarity(a: &DMatrix<f64>, reference: &DMatrix<f64>) -> Result<f64> {
    if a.shape() != reference.shape() {
        return Err(DfrcError::domain("surfaces must share a delay/Doppler grid"));
    }
    let denom = reference.norm();
    if denom <= 0.0 {
        return Err(DfrcError::domain("reference surface is zero"));
    }
    Ok((a - reference).norm() / denom)
}
