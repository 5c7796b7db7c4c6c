//! The `esrsim` runner: resolves a configuration, runs one mode and writes
//! its outputs plus a metadata sidecar.
//!
//! | mode        | files                                                   |
//! |-------------|---------------------------------------------------------|
//! | `propagate` | `trajectory.tsv`, `summary.txt`, `rho.tsv` (if thinned ρ kept) |
//! | `sweep`     | `spectrum.tsv`                                          |
//! | `compile`   | `pulses.txt`, `compiled.tsv`                            |
//! | `calibrate` | `calibration.tsv`                                       |
//!
//! Every run also writes `metadata.json`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::calibrate::{calibrate_rabi, CalibrationOptions, RabiCalibration};
use crate::config::{parse_config, serialize_config, RunConfiguration, RunMode};
use crate::eigen::EigenBasis;
use crate::entangle::{BellLabel, EntanglementRecorder, EntanglementSummary};
use crate::error::{Error, Result};
use crate::gates::{Compiler, Gate, TransitionRate};
use crate::output::{content_hash, provenance, unit_declarations, Metadata, OutputSet, Table};
use crate::propagate::{initial_state, propagate_with, ConservationStats, PropagationSettings, QmeSystem, TrajectoryRecorder};
use crate::pulse::PulseProgram;
use crate::pulse_format::{parse_pulse_program, serialize_pulse_program};
use crate::reference::{APPENDIX_CONFIG, BELL_PULSES};
use crate::sweep::{cw_spectrum, frequency_grid, SweepOptions};

/// Command-line level inputs; `None` falls back to the configuration or the
/// bundled reference inputs.
#[derive(Debug, Clone, Default)]
pub struct RunRequest {
    pub mode: Option<RunMode>,
    pub config: Option<PathBuf>,
    pub pulses: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub dt: Option<f64>,
    /// Forces the principal-value terms on.
    pub principal_value: bool,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub mode: RunMode,
    pub files: Vec<PathBuf>,
    /// Short human-readable result.
    pub message: String,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Resolved inputs of a run: the configuration and the pulse file text.
#[derive(Debug, Clone)]
pub struct ResolvedInputs {
    pub config: RunConfiguration,
    pub config_text: String,
    pub pulses_text: Option<String>,
}

pub fn resolve(request: &RunRequest) -> Result<ResolvedInputs> {
    let text = match &request.config {
        Some(p) => read(p)?,
        None => APPENDIX_CONFIG.to_string(),
    };
    let mut config = parse_config(&text)?;
    if let Some(m) = request.mode {
        config.mode = m;
    }
    if let Some(dt) = request.dt {
        config.simulation.dt = Some(dt);
    }
    if request.principal_value {
        config.kernel.principal_value = true;
    }
    config.validate()?;
    let pulses_text = match (&request.pulses, config.mode) {
        (Some(p), _) => Some(read(p)?),
        (None, RunMode::Propagate) => Some(BELL_PULSES.to_string()),
        (None, _) => None,
    };
    Ok(ResolvedInputs {
        config_text: serialize_config(&config),
        config,
        pulses_text,
    })
}

/// Runs the request and commits its outputs to `request.out_dir`. Nothing is
/// written when any stage fails.
pub fn run(request: &RunRequest) -> Result<RunReport> {
    let inputs = resolve(request)?;
    let (outputs, message) = execute(&inputs)?;
    let files = outputs.commit(&request.out_dir)?;
    Ok(RunReport {
        mode: inputs.config.mode,
        files,
        message,
    })
}

/// Runs a resolved configuration and renders all output files in memory.
pub fn execute(inputs: &ResolvedInputs) -> Result<(OutputSet, String)> {
    let config = &inputs.config;
    let basis = EigenBasis::new(&config.model, config.simulation.label_axis)?;
    let mut out = OutputSet::new();
    let (summary, message) = match config.mode {
        RunMode::Propagate => {
            let text = inputs
                .pulses_text
                .as_deref()
                .ok_or_else(|| Error::InvalidArgument("propagate needs a pulse file".into()))?;
            let program = parse_pulse_program(text)?;
            let s = run_propagate(config, &basis, &program, &mut out)?;
            let msg = format!(
                "propagated to {} ns; peak F {:.4} ({}), peak C {:.4}",
                program.t_final, s.entanglement.peak_fidelity, s.entanglement.peak_fidelity_target.name(), s.entanglement.peak_concurrence
            );
            (serde_json::to_value(&s), msg)
        }
        RunMode::Sweep => {
            let s = run_sweep(config, &basis, &mut out)?;
            let msg = format!("{} frequency points, {} not converged", s.points, s.unconverged);
            (serde_json::to_value(&s), msg)
        }
        RunMode::Calibrate => {
            let cals = run_calibrate(config, &basis, &mut out)?;
            let msg = cals
                .iter()
                .map(|c| format!("{}-{}: pi-time {:.3} ns", c.lower + 1, c.upper + 1, c.pi_time))
                .collect::<Vec<_>>()
                .join(", ");
            (serde_json::to_value(&cals), msg)
        }
        RunMode::Compile => {
            let s = run_compile(config, &basis, &mut out)?;
            let msg = format!("compiled {} pulses ending at {:.3} ns", s.pulses, s.last_pulse_end);
            (serde_json::to_value(&s), msg)
        }
    };
    let summary = summary.map_err(|e| Error::Integrity(format!("summary serialization: {e}")))?;
    let hash = content_hash([inputs.config_text.as_str(), inputs.pulses_text.as_deref().unwrap_or("")]);
    let mut files = out.names();
    files.push("metadata.json".into());
    let meta = Metadata {
        tool: crate::output::TOOL_NAME,
        version: crate::output::TOOL_VERSION,
        mode: config.mode.name().into(),
        provenance: provenance(&hash),
        input_hash: hash,
        units: unit_declarations(),
        files,
        configuration: config,
        summary,
    };
    let json = serde_json::to_string_pretty(&meta).map_err(|e| Error::Integrity(format!("metadata serialization: {e}")))?;
    out.add("metadata.json", json + "\n");
    Ok((out, message))
}

fn settings(config: &RunConfiguration) -> PropagationSettings {
    PropagationSettings {
        dt: config.simulation.dt,
        ..Default::default()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PropagateSummary {
    pub steps: u64,
    pub dt: f64,
    pub samples: usize,
    pub conservation: ConservationStats,
    pub entanglement: EntanglementSummary,
    pub final_populations: Vec<f64>,
}

fn run_propagate(config: &RunConfiguration, basis: &EigenBasis, program: &PulseProgram, out: &mut OutputSet) -> Result<PropagateSummary> {
    let electrodes = config.electrodes();
    let system = QmeSystem::new(basis, &electrodes, &config.kernel, None)?;
    let rho0 = initial_state(basis, &config.simulation.initial_state)?;
    let interval = config.simulation.sample_interval;
    let mut rec = TrajectoryRecorder::new(interval, config.simulation.rho_stride);
    let mut ent = EntanglementRecorder::new(basis, interval)?;
    let summary = propagate_with(&system, program, &rho0, &settings(config), &mut (&mut rec, &mut ent))?;
    let tr = &rec.trajectory;
    let et = &ent.trace;
    if tr.times.len() != et.times.len() {
        return Err(Error::Integrity("trajectory and metric samples disagree".into()));
    }

    let n = basis.dim();
    let sites = tr.spin_expectations.first().map_or(0, Vec::len);
    let mut table = Table::new().column("time", "ns");
    for k in 0..n {
        table = table.column(format!("pop_{}", k + 1), "1");
    }
    for s in 0..sites {
        for axis in ["x", "y", "z"] {
            table = table.column(format!("S{}_{axis}", s + 1), "hbar");
        }
    }
    for l in &tr.electrode_labels {
        table = table.column(format!("I_{}", l.name()), "pA");
    }
    for b in BellLabel::ALL {
        table = table.column(format!("F_{}", b.name()), "1");
    }
    for b in BellLabel::ALL {
        table = table.column(format!("F_raw_{}", b.name()), "1");
    }
    table = table.column("C", "1").column("leakage", "1");
    for i in 0..tr.times.len() {
        let mut row = vec![tr.times[i]];
        row.extend(&tr.populations[i]);
        for s in &tr.spin_expectations[i] {
            row.extend(s);
        }
        row.extend(&tr.current[i]);
        row.extend(et.fidelity[i]);
        row.extend(et.fidelity_raw[i]);
        row.push(et.concurrence[i]);
        row.push(et.leakage[i]);
        table.push(row)?;
    }
    out.add("trajectory.tsv", table.render());

    if !tr.rho.is_empty() {
        let mut rho = Table::new()
            .column("time", "ns")
            .column("row", "1")
            .column("col", "1")
            .column("re", "1")
            .column("im", "1");
        for (t, m) in &tr.rho {
            for i in 0..n {
                for j in 0..n {
                    rho.push(vec![*t, (i + 1) as f64, (j + 1) as f64, m[(i, j)].re, m[(i, j)].im])?;
                }
            }
        }
        out.add("rho.tsv", rho.render());
    }

    let ent_summary = et.summary().ok_or_else(|| Error::Integrity("no samples recorded".into()))?;
    let s = PropagateSummary {
        steps: summary.steps,
        dt: summary.dt,
        samples: tr.times.len(),
        conservation: tr.conservation,
        entanglement: ent_summary,
        final_populations: (0..n).map(|k| summary.rho_final[(k, k)].re).collect(),
    };
    let mut text = String::new();
    let e = &s.entanglement;
    let c = &s.conservation;
    let _ = writeln!(text, "peak_fidelity           {}", crate::output::format_value(e.peak_fidelity));
    let _ = writeln!(text, "peak_fidelity_target    {}", e.peak_fidelity_target.name());
    let _ = writeln!(text, "peak_fidelity_time_ns   {}", crate::output::format_value(e.peak_fidelity_time));
    let _ = writeln!(text, "peak_concurrence        {}", crate::output::format_value(e.peak_concurrence));
    let _ = writeln!(text, "peak_concurrence_time_ns {}", crate::output::format_value(e.peak_concurrence_time));
    match e.concurrence_decay_time {
        Some(t) => {
            let _ = writeln!(text, "concurrence_decay_ns    {}", crate::output::format_value(t));
        }
        None => {
            let _ = writeln!(text, "concurrence_decay_ns    none");
        }
    }
    let _ = writeln!(text, "max_leakage             {}", crate::output::format_value(e.max_leakage));
    let _ = writeln!(text, "max_trace_error         {}", crate::output::format_value(c.max_trace_error));
    let _ = writeln!(text, "max_hermiticity_error   {}", crate::output::format_value(c.max_hermiticity_error));
    let _ = writeln!(text, "min_eigenvalue          {}", crate::output::format_value(c.min_eigenvalue));
    let _ = writeln!(text, "steps                   {}", s.steps);
    let _ = writeln!(text, "dt_ns                   {}", crate::output::format_value(s.dt));
    out.add("summary.txt", text);
    Ok(s)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepSummary {
    pub points: usize,
    pub unconverged: usize,
}

fn run_sweep(config: &RunConfiguration, basis: &EigenBasis, out: &mut OutputSet) -> Result<SweepSummary> {
    let electrodes = config.electrodes();
    let system = QmeSystem::new(basis, &electrodes, &config.kernel, None)?;
    let rho0 = initial_state(basis, &config.simulation.initial_state)?;
    let sw = &config.sweep;
    let options = SweepOptions {
        settle_time: sw.settle_time,
        window_periods: sw.window_periods,
        tolerance: sw.tolerance,
        propagation: settings(config),
        ..Default::default()
    };
    let freqs = frequency_grid(sw.start, sw.stop, sw.points);
    let (_, points) = cw_spectrum(&system, &rho0, &freqs, &options)?;
    let mut table = Table::new()
        .column("frequency", "GHz")
        .column("I_tip", "pA")
        .column("window_1", "pA")
        .column("window_2", "pA")
        .column("converged", "1");
    for p in &points {
        table.push(vec![
            p.frequency,
            p.dc_current,
            p.window_averages[0],
            p.window_averages[1],
            if p.converged { 1.0 } else { 0.0 },
        ])?;
    }
    out.add("spectrum.tsv", table.render());
    Ok(SweepSummary {
        points: points.len(),
        unconverged: points.iter().filter(|p| !p.converged).count(),
    })
}

fn calibrations(config: &RunConfiguration, basis: &EigenBasis) -> Result<Vec<RabiCalibration>> {
    let mut electrodes = config.electrodes();
    if let Some(a) = config.calibration.drive_amplitude {
        electrodes[0].drive_amplitude = a;
    }
    let system = QmeSystem::new(basis, &electrodes, &config.kernel, None)?;
    let options = CalibrationOptions {
        periods: config.calibration.periods,
        propagation: settings(config),
        ..Default::default()
    };
    let n = basis.dim();
    config
        .calibration
        .transitions
        .iter()
        .map(|&(a, b)| {
            if a == 0 || b == 0 || a > n || b > n || a == b {
                return Err(Error::validation(format!("calibration transition {a}-{b} is not a pair of eigenstates 1..{n}")));
            }
            calibrate_rabi(&system, a.min(b) - 1, a.max(b) - 1, &options)
        })
        .collect()
}

fn run_calibrate(config: &RunConfiguration, basis: &EigenBasis, out: &mut OutputSet) -> Result<Vec<RabiCalibration>> {
    let cals = calibrations(config, basis)?;
    out.add("calibration.tsv", calibration_table(&cals)?.render());
    Ok(cals)
}

pub fn calibration_table(cals: &[RabiCalibration]) -> Result<Table> {
    let mut table = Table::new()
        .column("lower", "1")
        .column("upper", "1")
        .column("drive_frequency", "GHz")
        .column("rabi_frequency", "GHz")
        .column("pi_time", "ns")
        .column("amplitude", "1")
        .column("offset", "1")
        .column("fit_residual", "1")
        .column("record", "ns");
    for c in cals {
        table.push(vec![
            (c.lower + 1) as f64,
            (c.upper + 1) as f64,
            c.drive_frequency,
            c.rabi_frequency,
            c.pi_time,
            c.amplitude,
            c.offset,
            c.fit_residual,
            c.duration,
        ])?;
    }
    Ok(table)
}

#[derive(Debug, Clone, Serialize)]
pub struct CompileSummary {
    pub pulses: usize,
    pub last_pulse_end: f64,
    pub rates: Vec<TransitionRate>,
    pub calibrated: bool,
}

fn run_compile(config: &RunConfiguration, basis: &EigenBasis, out: &mut OutputSet) -> Result<CompileSummary> {
    let c = &config.compile;
    if c.gates.is_empty() {
        return Err(Error::validation("compile.gates is empty"));
    }
    let gates = c.gates.iter().map(|g| Gate::parse(g)).collect::<Result<Vec<_>>>()?;
    let calibrated = c.rabi.is_empty();
    let rates: Vec<TransitionRate> = if calibrated {
        calibrations(config, basis)?
            .into_iter()
            .map(|k| TransitionRate {
                lower: k.lower,
                upper: k.upper,
                rabi_frequency: k.rabi_frequency,
            })
            .collect()
    } else {
        c.rabi
            .iter()
            .map(|&((a, b), f)| TransitionRate {
                lower: a.min(b).saturating_sub(1),
                upper: a.max(b).saturating_sub(1),
                rabi_frequency: f,
            })
            .collect()
    };
    let circuit = Compiler::new(basis, &rates)?.compile(&gates, c.start_time)?;
    let program = circuit.to_program(c.final_time)?;
    out.add("pulses.txt", serialize_pulse_program(&program)?);
    let mut table = Table::new()
        .column("lower", "1")
        .column("upper", "1")
        .column("t_start", "ns")
        .column("t_end", "ns")
        .column("frequency", "GHz")
        .column("angle", "rad")
        .column("phase", "rad");
    for p in &circuit.pulses {
        table.push(vec![(p.lower + 1) as f64, (p.upper + 1) as f64, p.t_start, p.t_end, p.frequency, p.angle, p.phase])?;
    }
    out.add("compiled.tsv", table.render());
    Ok(CompileSummary {
        pulses: circuit.pulses.len(),
        last_pulse_end: circuit.t_end,
        rates,
        calibrated,
    })
}
