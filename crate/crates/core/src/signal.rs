//! Tone-burst excitation, waveform records and arrival analysis.

use std::f64::consts::PI;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::pim::HarmonicSegment;
use crate::{Error, Result};

/// Hann-windowed sine burst `½(1 − cos ω_m t) sin ω_c t` on `[0, n/f_c]`,
/// with `ω_m = ω_c / n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToneBurst {
    pub center_frequency: f64,
    pub cycles: u32,
    pub amplitude: f64,
}

impl Default for ToneBurst {
    fn default() -> Self {
        Self {
            center_frequency: 100e3,
            cycles: 5,
            amplitude: 1.0,
        }
    }
}

/// One sinusoid of a decomposed burst: `amplitude · sin(omega t)` on `[0, T_b]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BurstComponent {
    pub amplitude: f64,
    pub omega: f64,
}

impl ToneBurst {
    pub fn duration(&self) -> f64 {
        self.cycles as f64 / self.center_frequency
    }

    pub fn carrier_omega(&self) -> f64 {
        2.0 * PI * self.center_frequency
    }

    pub fn modulation_omega(&self) -> f64 {
        self.carrier_omega() / self.cycles as f64
    }

    pub fn period(&self) -> f64 {
        1.0 / self.center_frequency
    }

    pub fn eval(&self, t: f64) -> f64 {
        if !(0.0..=self.duration()).contains(&t) {
            return 0.0;
        }
        self.amplitude
            * 0.5
            * (1.0 - (self.modulation_omega() * t).cos())
            * (self.carrier_omega() * t).sin()
    }

    /// Product-to-sum split into three pure sines:
    /// `½ sin ω_c t − ¼ sin (ω_c + ω_m) t − ¼ sin (ω_c − ω_m) t`.
    pub fn decompose(&self) -> [BurstComponent; 3] {
        let wc = self.carrier_omega();
        let wm = self.modulation_omega();
        let a = self.amplitude;
        [
            BurstComponent {
                amplitude: 0.5 * a,
                omega: wc,
            },
            BurstComponent {
                amplitude: -0.25 * a,
                omega: wc + wm,
            },
            BurstComponent {
                amplitude: -0.25 * a,
                omega: wc - wm,
            },
        ]
    }

    /// State-space segments for a burst acting along `unit_load`.
    pub fn segments(&self, unit_load: &DVector<f64>) -> Result<Vec<HarmonicSegment>> {
        let zero = DVector::zeros(unit_load.len());
        self.decompose()
            .iter()
            .map(|c| {
                HarmonicSegment::new(
                    unit_load * c.amplitude,
                    zero.clone(),
                    c.omega,
                    0.0,
                    self.duration(),
                )
            })
            .collect()
    }

    /// Samples `k · dt` for `k = 0..n`.
    pub fn sample(&self, dt: f64, n: usize) -> Vec<f64> {
        (0..n).map(|k| self.eval(k as f64 * dt)).collect()
    }
}

/// A captured nodal field.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub field: String,
    pub x: Vec<f64>,
    pub values: Vec<f64>,
}

/// Uniformly sampled sensor histories plus field snapshots.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveRecord {
    pub dt: f64,
    pub labels: Vec<String>,
    /// One series per label, sample `k` at `k · dt`.
    pub series: Vec<Vec<f64>>,
    /// Excitation force history on the same grid (may be empty).
    pub excitation: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
}

impl WaveRecord {
    pub fn len(&self) -> usize {
        self.series.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn channel(&self, label: &str) -> Option<&[f64]> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|i| self.series[i].as_slice())
    }
}

/// A contiguous run of the envelope above the detection threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Packet {
    /// First crossing of the detection threshold.
    pub arrival: f64,
    /// Crossing of `threshold_frac × peak` of this packet alone.
    pub onset: f64,
    pub peak: f64,
    pub peak_time: f64,
    /// Envelope-energy centroid.
    pub centroid: f64,
    pub end: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectOptions {
    /// Moving-RMS window length (s); one carrier period.
    pub window: f64,
    /// Threshold as a fraction of the global envelope maximum.
    pub threshold_frac: f64,
}

impl DetectOptions {
    pub fn for_burst(burst: &ToneBurst) -> Self {
        Self {
            window: burst.period(),
            threshold_frac: 0.1,
        }
    }

    pub fn with_threshold(mut self, threshold_frac: f64) -> Self {
        self.threshold_frac = threshold_frac;
        self
    }
}

/// Centered moving RMS with zero padding, `w` samples wide.
pub fn moving_rms(series: &[f64], w: usize) -> Vec<f64> {
    let w = w.max(1);
    let half = w / 2;
    let n = series.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + w - half).min(n);
            let sum: f64 = series[lo..hi].iter().map(|v| v * v).sum();
            (sum / w as f64).sqrt()
        })
        .collect()
}

fn crossing(env: &[f64], i: usize, thr: f64, dt: f64) -> f64 {
    if i == 0 {
        return 0.0;
    }
    let (a, b) = (env[i - 1], env[i]);
    let frac = if b > a { (thr - a) / (b - a) } else { 1.0 };
    (i as f64 - 1.0 + frac.clamp(0.0, 1.0)) * dt
}

/// Splits a series into envelope packets, ordered in time.
pub fn detect_arrivals(series: &[f64], dt: f64, opts: &DetectOptions) -> Vec<Packet> {
    let w = (opts.window / dt).round().max(1.0) as usize;
    let env = moving_rms(series, w);
    let max = env.iter().copied().fold(0.0, f64::max);
    if !(max > 0.0) {
        return Vec::new();
    }
    let thr = opts.threshold_frac * max;
    let mut packets: Vec<Packet> = Vec::new();
    let mut floor = 0;
    let mut i = 0;
    while i < env.len() {
        if env[i] < thr {
            i += 1;
            continue;
        }
        let start = i;
        while i < env.len() && env[i] >= thr {
            i += 1;
        }
        let run = start..i;
        let (peak_idx, peak) = run
            .clone()
            .map(|k| (k, env[k]))
            .fold((start, f64::MIN), |acc, x| if x.1 > acc.1 { x } else { acc });

        let own = opts.threshold_frac * peak;
        let mut j = peak_idx;
        while j > floor && env[j - 1] >= own {
            j -= 1;
        }
        let onset = crossing(&env, j, own, dt);
        floor = i;

        let (num, den) = run.clone().fold((0.0, 0.0), |(n, d), k| {
            let e2 = env[k] * env[k];
            (n + k as f64 * dt * e2, d + e2)
        });
        packets.push(Packet {
            arrival: crossing(&env, start, thr, dt),
            onset,
            peak,
            peak_time: peak_idx as f64 * dt,
            centroid: num / den,
            end: (i - 1) as f64 * dt,
        });
    }
    packets
}

/// How an arrival time is read off a packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Picker {
    #[default]
    Threshold,
    Centroid,
}

impl Picker {
    fn pick(self, p: &Packet) -> f64 {
        match self {
            Picker::Threshold => p.arrival,
            Picker::Centroid => p.centroid,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityEstimate {
    pub velocity: f64,
    /// Travel time: sensor pick minus excitation pick.
    pub travel_time: f64,
    pub sensor_arrival: f64,
}

/// Group velocity from the first packet of `channel`.
///
/// The sensor pick is referenced to the same pick applied to the
/// excitation history, so a pure delay is measured exactly. Without an
/// excitation history the reference is `t = 0`.
pub fn group_velocity(
    record: &WaveRecord,
    channel: usize,
    sensor_distance: f64,
    opts: &DetectOptions,
    picker: Picker,
) -> Result<VelocityEstimate> {
    let series = record
        .series
        .get(channel)
        .ok_or_else(|| Error::Parameter(format!("record has no channel {channel}")))?;
    let first = detect_arrivals(series, record.dt, opts)
        .into_iter()
        .next()
        .ok_or_else(|| Error::NoReflection("no packet detected at the sensor".into()))?;
    let reference = detect_arrivals(&record.excitation, record.dt, opts)
        .first()
        .map_or(0.0, |p| picker.pick(p));
    let travel_time = picker.pick(&first) - reference;
    if !(travel_time > 0.0) {
        return Err(Error::Numerical(format!(
            "non-positive travel time {travel_time} s"
        )));
    }
    Ok(VelocityEstimate {
        velocity: sensor_distance / travel_time,
        travel_time,
        sensor_arrival: picker.pick(&first),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrackEstimate {
    pub position: f64,
    pub t_direct: f64,
    pub t_crack: f64,
}

/// Crack position from direct and crack-reflection times with excitation
/// at `x = 0` and the sensor at `x = L`: the reflected path is `L + 2 x_c`.
pub fn crack_position_from_times(t_direct: f64, t_crack: f64, velocity: f64) -> Result<f64> {
    if !(t_crack > t_direct) {
        return Err(Error::NoReflection(format!(
            "reflection at {t_crack} s does not follow the direct wave at {t_direct} s"
        )));
    }
    Ok(velocity * (t_crack - t_direct) / 2.0)
}

/// Locates a crack from the first two packets of `channel`, using each
/// packet's own onset.
pub fn locate_crack(
    record: &WaveRecord,
    channel: usize,
    length: f64,
    velocity: f64,
    opts: &DetectOptions,
) -> Result<CrackEstimate> {
    let series = record
        .series
        .get(channel)
        .ok_or_else(|| Error::Parameter(format!("record has no channel {channel}")))?;
    let packets = detect_arrivals(series, record.dt, opts);
    if packets.len() < 2 {
        return Err(Error::NoReflection(format!(
            "{} packet(s) detected, need a direct wave and a reflection",
            packets.len()
        )));
    }
    let (t_direct, t_crack) = (packets[0].onset, packets[1].onset);
    let position = crack_position_from_times(t_direct, t_crack, velocity)?;
    if position >= length {
        log::warn!("crack estimate {position} m lies beyond the structure length {length} m");
    }
    Ok(CrackEstimate {
        position,
        t_direct,
        t_crack,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn burst() -> ToneBurst {
        ToneBurst::default()
    }

    #[test]
    fn burst_endpoints_and_sample_value() {
        let b = burst();
        assert!((b.duration() - 5e-5).abs() < 1e-18);
        assert_eq!(b.eval(0.0), 0.0);
        assert!(b.eval(b.duration()).abs() < 1e-12);
        assert_eq!(b.eval(-1e-6), 0.0);
        assert_eq!(b.eval(6e-5), 0.0);
        let expect = 0.5 * (1.0 - (0.1 * PI).cos()) * (0.5 * PI).sin();
        assert!((b.eval(2.5e-6) - expect).abs() < 1e-15);
        assert!((b.eval(2.5e-6) - 0.02447).abs() < 1e-5);
    }

    #[test]
    fn decomposition_frequencies_and_amplitudes() {
        let c = burst().decompose();
        let hz: Vec<f64> = c.iter().map(|x| x.omega / (2.0 * PI)).collect();
        assert!((hz[0] - 100e3).abs() < 1e-6);
        assert!((hz[1] - 120e3).abs() < 1e-6);
        assert!((hz[2] - 80e3).abs() < 1e-6);
        assert_eq!(
            c.iter().map(|x| x.amplitude).collect::<Vec<_>>(),
            vec![0.5, -0.25, -0.25]
        );
    }

    #[test]
    fn ten_cycle_burst() {
        let b = ToneBurst {
            cycles: 10,
            ..burst()
        };
        assert!((b.modulation_omega() / (2.0 * PI) - 10e3).abs() < 1e-9);
        assert!((b.duration() - 1e-4).abs() < 1e-18);
    }

    #[test]
    fn recombined_components_match_burst() {
        let b = burst();
        let comps = b.decompose();
        for k in 0..10_000 {
            let t = b.duration() * k as f64 / 9_999.0;
            let sum: f64 = comps.iter().map(|c| c.amplitude * (c.omega * t).sin()).sum();
            assert!((sum - b.eval(t)).abs() < 1e-14, "t = {t}");
        }
    }

    fn padded_burst(delay: f64, scale: f64, dt: f64, n: usize) -> Vec<f64> {
        let b = burst();
        (0..n).map(|k| scale * b.eval(k as f64 * dt - delay)).collect()
    }

    #[test]
    fn self_detection_of_burst() {
        let dt = 1e-7;
        let s = padded_burst(0.0, 1.0, dt, 2000);
        let p = detect_arrivals(&s, dt, &DetectOptions::for_burst(&burst()));
        assert_eq!(p.len(), 1);
        assert!(p[0].arrival < burst().period());
    }

    #[test]
    fn two_packets_detected_in_order() {
        let dt = 1e-7;
        let a = padded_burst(0.0, 1.0, dt, 6000);
        let b = padded_burst(4e-4, 0.3, dt, 6000);
        let s: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let p = detect_arrivals(&s, dt, &DetectOptions::for_burst(&burst()));
        assert_eq!(p.len(), 2);
        assert!(p[0].arrival < p[1].arrival);
        assert!((p[1].peak / p[0].peak - 0.3).abs() < 1e-3);
        assert!((p[1].onset - p[0].onset - 4e-4).abs() < 1e-6);
    }

    #[test]
    fn silence_has_no_packets() {
        assert!(detect_arrivals(&[0.0; 100], 1e-7, &DetectOptions::for_burst(&burst())).is_empty());
    }

    #[test]
    fn velocity_from_pure_delay_is_exact() {
        let dt = 1e-7;
        let n = 4000;
        let rec = WaveRecord {
            dt,
            labels: vec!["u".into()],
            series: vec![padded_burst(2e-4, 1.0, dt, n)],
            excitation: padded_burst(0.0, 1.0, dt, n),
            snapshots: vec![],
        };
        let opts = DetectOptions::for_burst(&burst());
        for picker in [Picker::Threshold, Picker::Centroid] {
            let v = group_velocity(&rec, 0, 1.0, &opts, picker).unwrap();
            assert!((v.velocity - 5000.0).abs() < 1e-6, "{picker:?}: {}", v.velocity);
        }
    }

    #[test]
    fn crack_position_from_geometry() {
        let (l, c) = (1.5, 5063.0);
        let x = crack_position_from_times(l / c, (l + 2.0 * 0.75) / c, c).unwrap();
        assert!((x - 0.75).abs() < 1e-12);
        assert!(crack_position_from_times((l + 1.5) / c, l / c, c).is_err());
    }

    #[test]
    fn locate_needs_two_packets() {
        let dt = 1e-7;
        let rec = WaveRecord {
            dt,
            labels: vec!["u".into()],
            series: vec![padded_burst(1e-4, 1.0, dt, 3000)],
            excitation: vec![],
            snapshots: vec![],
        };
        let opts = DetectOptions::for_burst(&burst());
        assert!(matches!(
            locate_crack(&rec, 0, 1.5, 5063.0, &opts),
            Err(Error::NoReflection(_))
        ));
    }

    proptest! {
        #[test]
        fn detection_is_shift_equivariant(shift in 0usize..400) {
            let dt = 1e-7;
            let base: Vec<f64> = {
                let a = padded_burst(1e-4, 1.0, dt, 5000);
                let b = padded_burst(3e-4, 0.4, dt, 5000);
                a.iter().zip(&b).map(|(x, y)| x + y).collect()
            };
            let mut shifted = vec![0.0; shift];
            shifted.extend_from_slice(&base);
            let opts = DetectOptions::for_burst(&burst());
            let p0 = detect_arrivals(&base, dt, &opts);
            let p1 = detect_arrivals(&shifted, dt, &opts);
            prop_assert_eq!(p0.len(), p1.len());
            let d = shift as f64 * dt;
            for (a, b) in p0.iter().zip(&p1) {
                prop_assert!((b.arrival - a.arrival - d).abs() < 1e-15);
                prop_assert!((b.onset - a.onset - d).abs() < 1e-15);
                prop_assert_eq!(a.peak, b.peak);
            }
        }

        #[test]
        fn decomposition_identity(t in 0.0f64..5e-5, amp in 0.1f64..100.0) {
            let b = ToneBurst { amplitude: amp, ..ToneBurst::default() };
            let sum: f64 = b.decompose().iter().map(|c| c.amplitude * (c.omega * t).sin()).sum();
            prop_assert!((sum - b.eval(t)).abs() < 1e-13 * amp);
        }
    }
}
