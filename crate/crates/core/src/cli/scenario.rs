//! End-to-end scenario runners.

use nalgebra::DVector;
use rayon::prelude::*;

use super::config::{CrackConfig, ScenarioConfig};
use super::output::Report;
use crate::basis::BasisTable;
use crate::crack::CrackSpec;
use crate::elements::{assemble, GlobalSystem, Material, Mesh1D, Section, SectionShape, Structure};
use crate::pim::{build_state, precise_expm, simulate, FieldProbe, Newmark, Probes, Sensor, StateSystem};
use crate::signal::{
    detect_arrivals, group_velocity, locate_crack, CrackEstimate, Picker, ToneBurst, WaveRecord,
};
use crate::{Error, Result};

/// A discretized structure ready to integrate.
pub struct Model {
    pub mesh: Mesh1D,
    pub material: Material,
    pub section: Section,
    pub system: GlobalSystem,
    pub state: StateSystem,
}

impl Model {
    pub fn build(cfg: &ScenarioConfig, section: Section, cracks: &[CrackConfig]) -> Result<Self> {
        let material = cfg.material()?;
        let positions: Vec<f64> = cracks.iter().map(|c| c.position).collect();
        let mesh = Mesh1D::new(cfg.geometry.length, cfg.n_el, cfg.structure, &positions)?;
        let specs = cracks
            .iter()
            .map(|c| CrackSpec::new(c.position, c.depth_ratio, &material, &section, &cfg.fii_variant))
            .collect::<Result<Vec<_>>>()?;
        let system = assemble(&mesh, &material, &section, &specs, cfg.bc, &BasisTable::bswi43())?;
        let force = system
            .force_dof
            .ok_or_else(|| Error::config("bc", "the excited left end must not be fixed"))?;
        let state = build_state(&system.mass, &system.stiffness, Some(force))?;
        Ok(Self {
            mesh,
            material,
            section,
            system,
            state,
        })
    }

    pub fn dofs(&self) -> usize {
        self.system.n_dofs()
    }

    /// Sensors at every field component of the nodes nearest `xs`, plus
    /// whole-field probes with crack-face duplicates removed.
    pub fn probes(&self, xs: &[f64]) -> Result<Probes> {
        let fields = self.mesh.kind.fields();
        let mut sensors = Vec::new();
        for (i, &x) in xs.iter().enumerate() {
            let node = self.mesh.nearest_node(x);
            for (c, name) in fields.iter().enumerate() {
                let dof = self
                    .system
                    .reduced(self.mesh.dof(node, c))
                    .ok_or_else(|| Error::config(format!("sensors[{i}]"), "sensor sits on a fixed DOF"))?;
                sensors.push(Sensor {
                    label: format!("{name}@{x}"),
                    dof,
                });
            }
        }
        let nodes: Vec<usize> = (0..self.mesh.n_nodes())
            .filter(|&i| i == 0 || self.mesh.node_x[i] != self.mesh.node_x[i - 1])
            .collect();
        let field_probes = fields
            .iter()
            .enumerate()
            .map(|(c, name)| FieldProbe {
                name: name.to_string(),
                x: nodes.iter().map(|&i| self.mesh.node_x[i]).collect(),
                dofs: nodes
                    .iter()
                    .map(|&i| self.system.reduced(self.mesh.dof(i, c)))
                    .collect(),
            })
            .collect();
        Ok(Probes {
            sensors,
            fields: field_probes,
        })
    }

    fn force_direction(&self) -> DVector<f64> {
        let mut e = DVector::zeros(self.dofs());
        if let Some(f) = self.system.force_dof {
            e[f] = 1.0;
        }
        e
    }
}

/// Snaps `tau` down to `T_b / n` so macro steps never straddle the burst end.
/// Returns the step and `n`.
pub fn aligned_step(tau: f64, burst: &ToneBurst) -> Result<(f64, usize)> {
    let tb = burst.duration();
    if tau > tb * (1.0 + 1e-9) {
        return Err(Error::config(
            "pim.tau",
            format!("{tau} s exceeds the burst duration {tb} s"),
        ));
    }
    let n = ((tb / tau) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let used = tb / n as f64;
    if (used - tau).abs() > 1e-9 * tau {
        log::warn!("time step {tau} s snapped to {used} s so it divides the burst duration");
    }
    Ok((used, n))
}

/// PIM run from rest under the configured burst.
pub fn run_pim(model: &Model, cfg: &ScenarioConfig, tau: f64, probes: &Probes, t_end: f64) -> Result<WaveRecord> {
    let prop = precise_expm(&model.state.h, tau, cfg.pim.squarings)?;
    let schedule = cfg.burst.segments(model.state.unit_load()?)?;
    let mut rec = simulate(&model.state, &prop, &schedule, t_end, probes, &cfg.snapshots)?;
    rec.excitation = cfg.burst.sample(tau, rec.len());
    Ok(rec)
}

/// Newmark average-acceleration run with the same load and probes.
pub fn run_newmark(model: &Model, cfg: &ScenarioConfig, dt: f64, probes: &Probes, t_end: f64) -> Result<WaveRecord> {
    let nm = Newmark::average_acceleration(&model.system.mass, &model.system.stiffness, dt)?;
    let burst = cfg.burst;
    let mut rec = nm.simulate(&model.force_direction(), |t| burst.eval(t), t_end, probes, &cfg.snapshots)?;
    rec.excitation = burst.sample(dt, rec.len());
    Ok(rec)
}

/// Result of one scenario: a primary record, its report and named
/// auxiliary records written to subdirectories.
pub struct ScenarioOutput {
    pub record: Option<WaveRecord>,
    pub report: Report,
    pub children: Vec<(String, WaveRecord)>,
}

fn peak_abs(s: &[f64]) -> f64 {
    s.iter().fold(0.0, |a, v| a.max(v.abs()))
}

fn header(report: &mut Report, scenario: &str, cfg: &ScenarioConfig, model: &Model, tau: f64, t_end: f64) {
    report.text("scenario", scenario);
    report.text(
        "structure",
        match cfg.structure {
            Structure::Rod => "rod",
            Structure::Beam => "beam",
        },
    );
    report.int("n_el", cfg.n_el);
    report.int("dofs", model.dofs());
    report.num("element_length_m", model.mesh.element_length);
    report.num("dt_s", tau);
    report.int("squarings", cfg.pim.squarings as usize);
    report.num("t_end_s", t_end);
    report.num("c0_mps", model.material.bar_velocity());
}

fn velocity_keys(
    report: &mut Report,
    prefix: &str,
    rec: &WaveRecord,
    channel: usize,
    distance: f64,
    cfg: &ScenarioConfig,
) -> Option<f64> {
    let opts = cfg.detect_options();
    match group_velocity(rec, channel, distance, &opts, cfg.detect.picker) {
        Ok(v) => {
            report.num(format!("{prefix}arrival_s"), v.sensor_arrival);
            report.num(format!("{prefix}travel_time_s"), v.travel_time);
            report.num(format!("{prefix}velocity_mps"), v.velocity);
            if let Ok(c) = group_velocity(rec, channel, distance, &opts, Picker::Centroid) {
                report.num(format!("{prefix}velocity_centroid_mps"), c.velocity);
            }
            Some(v.velocity)
        }
        Err(e) => {
            report.text(format!("{prefix}velocity_mps"), "none");
            report.text(format!("{prefix}velocity_note"), e.to_string());
            None
        }
    }
}

fn crack_keys(report: &mut Report, prefix: &str, est: &Result<CrackEstimate>, truth: Option<f64>) {
    match est {
        Ok(e) => {
            report.num(format!("{prefix}t_direct_s"), e.t_direct);
            report.num(format!("{prefix}t_crack_s"), e.t_crack);
            report.num(format!("{prefix}crack_estimate_m"), e.position);
            if let Some(x) = truth {
                report.num(format!("{prefix}crack_error_m"), (e.position - x).abs());
            }
        }
        Err(err) => {
            report.text(format!("{prefix}crack_estimate_m"), "none");
            report.text(format!("{prefix}crack_note"), err.to_string());
        }
    }
}

/// Direct-wave velocity for crack location: `c₀` for rods, the measured
/// group velocity of the first packet for beams.
fn locating_velocity(cfg: &ScenarioConfig, model: &Model, rec: &WaveRecord, distance: f64) -> Result<f64> {
    match cfg.structure {
        Structure::Rod => Ok(model.material.bar_velocity()),
        Structure::Beam => Ok(group_velocity(rec, 0, distance, &cfg.detect_options(), cfg.detect.picker)?.velocity),
    }
}

/// Single rod simulation, plus an optional diameter sweep.
pub fn run_rod_wave(cfg: &ScenarioConfig) -> Result<ScenarioOutput> {
    if cfg.structure != Structure::Rod {
        return Err(Error::config("structure", "rod-wave needs `rod`"));
    }
    run_wave(cfg, "rod-wave")
}

/// Single beam simulation recording deflection and rotation.
pub fn run_beam_wave(cfg: &ScenarioConfig) -> Result<ScenarioOutput> {
    if cfg.structure != Structure::Beam {
        return Err(Error::config("structure", "beam-wave needs `beam`"));
    }
    run_wave(cfg, "beam-wave")
}

fn run_wave(cfg: &ScenarioConfig, scenario: &str) -> Result<ScenarioOutput> {
    cfg.validate()?;
    let (tau, _) = aligned_step(cfg.pim.tau, &cfg.burst)?;
    let t_end = cfg.t_end()?;
    let sensors = cfg.sensor_positions();
    let model = Model::build(cfg, cfg.section()?, &cfg.cracks)?;
    let probes = model.probes(&sensors)?;
    let rec = run_pim(&model, cfg, tau, &probes, t_end)?;

    let mut report = Report::new();
    header(&mut report, scenario, cfg, &model, tau, t_end);
    report.int("steps", rec.len().saturating_sub(1));
    report.num("sensor_x_m", sensors[0]);
    let velocity = velocity_keys(&mut report, "", &rec, 0, sensors[0], cfg);
    if let Some(v) = velocity {
        report.num("velocity_rel_error", (v - model.material.bar_velocity()) / model.material.bar_velocity());
    }
    report.int("packets", detect_arrivals(&rec.series[0], tau, &cfg.detect_options()).len());

    if cfg.structure == Structure::Beam {
        beam_keys(&mut report, cfg, &rec, sensors[0]);
    } else {
        report.num("peak_displacement_m", peak_abs(&rec.series[0]));
    }

    if cfg.cracks.is_empty() {
        report.text("crack_estimate_m", "none");
    } else {
        let est = locating_velocity(cfg, &model, &rec, sensors[0])
            .and_then(|c| locate_crack(&rec, 0, cfg.geometry.length, c, &cfg.detect_options()));
        crack_keys(&mut report, "", &est, (cfg.cracks.len() == 1).then(|| cfg.cracks[0].position));
    }

    let mut children = Vec::new();
    if let Some(sweep) = cfg.sweep.as_ref().filter(|s| !s.diameters.is_empty()) {
        let runs = sweep
            .diameters
            .par_iter()
            .map(|&d| {
                let section = cfg.section_with(SectionShape::Circular { diameter: d })?;
                let m = Model::build(cfg, section, &cfg.cracks)?;
                run_pim(&m, cfg, tau, &m.probes(&sensors)?, t_end)
            })
            .collect::<Result<Vec<_>>>()?;
        for (i, (d, r)) in sweep.diameters.iter().zip(runs).enumerate() {
            let p = format!("diameter.{i}.");
            report.num(format!("{p}diameter_m"), *d);
            velocity_keys(&mut report, &p, &r, 0, sensors[0], cfg);
            report.num(format!("{p}peak_displacement_m"), peak_abs(&r.series[0]));
            children.push((format!("diameter_{i}"), r));
        }
    }

    Ok(ScenarioOutput {
        record: Some(rec),
        report,
        children,
    })
}

fn beam_keys(report: &mut Report, cfg: &ScenarioConfig, rec: &WaveRecord, distance: f64) {
    let (w, theta) = (&rec.series[0], &rec.series[1]);
    let (pw, pt) = (peak_abs(w), peak_abs(theta));
    report.num("peak_deflection_m", pw);
    report.num("peak_rotation_rad", pt);
    if pt > 0.0 {
        report.num("deflection_rotation_ratio", pw / pt);
    } else {
        report.text("deflection_rotation_ratio", "none");
    }
    let _ = velocity_keys(report, "rotation.", rec, 1, distance, cfg);
    let opts = cfg.detect_options();
    let aw = detect_arrivals(w, rec.dt, &opts).first().map(|p| p.arrival);
    let at = detect_arrivals(theta, rec.dt, &opts).first().map(|p| p.arrival);
    if let (Some(aw), Some(at)) = (aw, at) {
        report.num("arrival_deflection_s", aw);
        report.num("arrival_rotation_s", at);
        report.num("arrival_difference_s", (aw - at).abs());
        report.num("carrier_period_s", cfg.burst.period());
        report.flag("arrivals_coincide", (aw - at).abs() <= cfg.burst.period());
    }
}

/// One entry of a step-size study.
#[derive(Debug, Clone, PartialEq)]
pub struct DtEntry {
    pub requested: f64,
    pub used: Option<f64>,
    pub substeps: Option<usize>,
}

/// Resolves requested step sizes: each is snapped to `T_b / n`, and steps
/// longer than the burst are marked invalid (`used = None`).
pub fn plan_dt_study(dts: &[f64], burst: &ToneBurst) -> Vec<DtEntry> {
    dts.iter()
        .map(|&dt| match aligned_step(dt, burst) {
            Ok((used, n)) => DtEntry {
                requested: dt,
                used: Some(used),
                substeps: Some(n),
            },
            Err(_) => {
                log::warn!("time step {dt} s exceeds the burst duration and is skipped");
                DtEntry {
                    requested: dt,
                    used: None,
                    substeps: None,
                }
            }
        })
        .collect()
}

/// Max deviation of `coarse` (burst split into `n_c` steps) from `fine`
/// (split into `n_f`) over coincident samples, relative to the peak of
/// `fine`, across all channels. Returns the deviation and the number of
/// coincident samples.
pub fn coincident_deviation(fine: &WaveRecord, n_f: usize, coarse: &WaveRecord, n_c: usize) -> (f64, usize) {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for (f, c) in fine.series.iter().zip(&coarse.series) {
        let scale = peak_abs(f);
        count = 0;
        for (k, cv) in c.iter().enumerate() {
            if (k * n_f) % n_c != 0 {
                continue;
            }
            let j = k * n_f / n_c;
            if j >= f.len() {
                break;
            }
            count += 1;
            let d = (cv - f[j]).abs();
            worst = worst.max(if scale > 0.0 { d / scale } else { d });
        }
    }
    (worst, count)
}

/// PIM (and optionally Newmark) at each step size, compared with the
/// finest PIM run at coincident times.
pub fn run_dt_study(cfg: &ScenarioConfig) -> Result<ScenarioOutput> {
    cfg.validate()?;
    let study = cfg
        .dt_study
        .as_ref()
        .ok_or_else(|| Error::config("dt_study", "dt-study needs a `dt_study` section"))?;
    let plan = plan_dt_study(&study.dt_list, &cfg.burst);
    let valid: Vec<(usize, f64, usize)> = plan
        .iter()
        .enumerate()
        .filter_map(|(i, e)| Some((i, e.used?, e.substeps?)))
        .collect();
    let coarsest = valid
        .iter()
        .map(|v| v.1)
        .fold(None, |a: Option<f64>, t| Some(a.map_or(t, |a| a.max(t))))
        .ok_or_else(|| Error::config("dt_study.dt_list", "no step size fits within the burst duration"))?;
    let t_end = (cfg.t_end()? / coarsest - 1e-9).ceil() * coarsest;

    let model = Model::build(cfg, cfg.section()?, &cfg.cracks)?;
    let probes = model.probes(&cfg.sensor_positions())?;
    let jobs: Vec<(usize, bool)> = valid
        .iter()
        .flat_map(|&(i, _, _)| {
            let mut v = vec![(i, false)];
            if study.newmark {
                v.push((i, true));
            }
            v
        })
        .collect();
    let runs = jobs
        .par_iter()
        .map(|&(i, newmark)| {
            let dt = plan[i].used.expect("valid entry");
            if newmark {
                run_newmark(&model, cfg, dt, &probes, t_end)
            } else {
                run_pim(&model, cfg, dt, &probes, t_end)
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let &(ref_idx, ref_dt, ref_n) = valid
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("at least one valid step");
    let ref_job = jobs
        .iter()
        .position(|&j| j == (ref_idx, false))
        .expect("reference run present");
    let reference = &runs[ref_job];

    let mut report = Report::new();
    header(&mut report, "dt-study", cfg, &model, ref_dt, t_end);
    report.num("reference_dt_s", ref_dt);
    let mut max_pim: f64 = 0.0;
    let mut children = Vec::new();
    for (i, e) in plan.iter().enumerate() {
        let p = format!("dt.{i}.");
        report.num(format!("{p}requested_s"), e.requested);
        let Some(used) = e.used else {
            report.text(format!("{p}status"), "invalid");
            report.text(format!("{p}note"), "step exceeds the burst duration");
            continue;
        };
        let n = e.substeps.expect("valid entry");
        let snapped = (used - e.requested).abs() > 1e-9 * e.requested;
        report.text(format!("{p}status"), if snapped { "snapped" } else { "ok" });
        report.num(format!("{p}used_s"), used);
        for (j, &(ji, newmark)) in jobs.iter().enumerate() {
            if ji != i {
                continue;
            }
            let (dev, count) = coincident_deviation(reference, ref_n, &runs[j], n);
            let method = if newmark { "newmark" } else { "pim" };
            report.num(format!("{p}{method}_max_rel_dev"), dev);
            report.int(format!("{p}{method}_coincident_samples"), count);
            if !newmark {
                max_pim = max_pim.max(dev);
            }
            children.push((format!("dt_{i}_{method}"), runs[j].clone()));
        }
    }
    report.num("pim_max_rel_dev", max_pim);
    report.text("crack_estimate_m", "none");
    velocity_keys(&mut report, "", reference, 0, cfg.sensor_positions()[0], cfg);

    Ok(ScenarioOutput {
        record: Some(reference.clone()),
        report,
        children,
    })
}

/// Summary of one crack-sweep entry.
#[derive(Debug)]
pub struct SweepEntry {
    pub position: f64,
    pub record: WaveRecord,
    pub estimate: Result<CrackEstimate>,
    pub crack_peak: Option<f64>,
}

/// One simulation per crack position, each located from the sensor record.
pub fn run_crack_scenarios(cfg: &ScenarioConfig) -> Result<ScenarioOutput> {
    cfg.validate()?;
    let (tau, _) = aligned_step(cfg.pim.tau, &cfg.burst)?;
    let t_end = cfg.t_end()?;
    let sensors = cfg.sensor_positions();
    let cases: Vec<CrackConfig> = match cfg.sweep.as_ref().filter(|s| !s.crack_positions.is_empty()) {
        Some(s) => s
            .crack_positions
            .iter()
            .map(|&position| CrackConfig {
                position,
                depth_ratio: s.depth_ratio.unwrap_or(0.2),
            })
            .collect(),
        None => cfg.cracks.clone(),
    };
    if cases.is_empty() {
        return Err(Error::config("sweep.crack_positions", "no crack positions to sweep"));
    }
    let section = cfg.section()?;
    let opts = cfg.detect_options();

    let entries = cases
        .par_iter()
        .map(|c| {
            let model = Model::build(cfg, section, std::slice::from_ref(c))?;
            let rec = run_pim(&model, cfg, tau, &model.probes(&sensors)?, t_end)?;
            let estimate = locating_velocity(cfg, &model, &rec, sensors[0])
                .and_then(|v| locate_crack(&rec, 0, cfg.geometry.length, v, &opts));
            let packets = detect_arrivals(&rec.series[0], rec.dt, &opts);
            Ok((
                model.dofs(),
                model.mesh.element_length,
                SweepEntry {
                    position: c.position,
                    crack_peak: packets.get(1).map(|p| p.peak),
                    record: rec,
                    estimate,
                },
            ))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut report = Report::new();
    report.text("scenario", "crack-sweep");
    report.int("n_el", cfg.n_el);
    report.int("dofs", entries[0].0);
    report.num("element_length_m", entries[0].1);
    report.num("dt_s", tau);
    report.num("t_end_s", t_end);
    report.num("depth_ratio", cases[0].depth_ratio);
    for (i, (_, _, e)) in entries.iter().enumerate() {
        let p = format!("crack.{i}.");
        report.num(format!("{p}position_m"), e.position);
        crack_keys(&mut report, &p, &e.estimate, Some(e.position));
        match e.crack_peak {
            Some(a) => report.num(format!("{p}crack_peak"), a),
            None => report.text(format!("{p}crack_peak"), "none"),
        }
    }
    let times: Vec<Option<f64>> = entries
        .iter()
        .map(|(_, _, e)| e.estimate.as_ref().ok().map(|x| x.t_crack))
        .collect();
    let monotone = times.iter().all(Option::is_some)
        && times.windows(2).all(|w| w[1].unwrap() > w[0].unwrap());
    report.flag("crack_arrivals_increasing", monotone);
    let records: Vec<&WaveRecord> = entries.iter().map(|(_, _, e)| &e.record).collect();
    match direct_wave_spread(&records, &opts) {
        Some(d) => report.num("direct_max_rel_diff", d),
        None => report.text("direct_max_rel_diff", "none"),
    }
    if let Some(last) = entries.iter().rev().find_map(|(_, _, e)| e.estimate.as_ref().ok()) {
        report.num("crack_estimate_m", last.position);
    } else {
        report.text("crack_estimate_m", "none");
    }

    let children = entries
        .into_iter()
        .enumerate()
        .map(|(i, (_, _, e))| (format!("crack_{i}"), e.record))
        .collect();
    Ok(ScenarioOutput {
        record: None,
        report,
        children,
    })
}

/// Largest difference between the sensor histories of `records` up to the
/// end of the earliest-ending direct packet, relative to the first record's
/// peak in that window.
pub fn direct_wave_spread(records: &[&WaveRecord], opts: &crate::signal::DetectOptions) -> Option<f64> {
    let first = records.first()?;
    let end = records
        .iter()
        .map(|r| detect_arrivals(&r.series[0], r.dt, opts).first().map(|p| p.end))
        .collect::<Option<Vec<_>>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let k_end = ((end / first.dt).round() as usize + 1).min(first.len());
    let base = &first.series[0][..k_end];
    let scale = peak_abs(base);
    let diff = records[1..]
        .iter()
        .map(|r| {
            base.iter()
                .zip(&r.series[0])
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);
    Some(if scale > 0.0 { diff / scale } else { diff })
}
