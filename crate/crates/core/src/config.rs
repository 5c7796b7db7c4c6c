//! Run configuration in a flat `key values ! comment` text format.
//!
//! Every non-blank line holds one key followed by whitespace-separated
//! values; anything after `!` is a comment. Keys may appear at most once and
//! unknown keys are rejected. Spin sites and exchange pairs are numbered
//! `site1`, `site2`, ... and `exchange1`, `exchange2`, ...

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ExchangeCoupling, QuantumImpurityModel, SpinSiteSpec, StevensCoefficients, TransportOrbitalSpec};
use crate::propagate::InitialState;
use crate::rates::{ElectrodeLabel, ElectrodeSpec, KernelEnergy, KernelOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunMode {
    Propagate,
    Sweep,
    Compile,
    Calibrate,
}

impl RunMode {
    pub fn name(self) -> &'static str {
        match self {
            RunMode::Propagate => "propagate",
            RunMode::Sweep => "sweep",
            RunMode::Compile => "compile",
            RunMode::Calibrate => "calibrate",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "propagate" => Some(RunMode::Propagate),
            "sweep" => Some(RunMode::Sweep),
            "compile" => Some(RunMode::Compile),
            "calibrate" => Some(RunMode::Calibrate),
            _ => None,
        }
    }
}

/// Electrode parameters as configured; chemical potentials come from the
/// bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElectrodeSettings {
    /// K
    pub temperature: f64,
    /// µeV
    pub base_rate: f64,
    pub spin_polarization: [f64; 3],
    pub drive_amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSettings {
    /// Step in ns; `None` selects the default.
    pub dt: Option<f64>,
    /// ns between recorded samples.
    pub sample_interval: f64,
    /// Keep every n-th sampled density matrix (0 keeps none).
    pub rho_stride: usize,
    pub initial_state: InitialState,
    /// Quantization axis of the qubit labels.
    pub label_axis: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSettings {
    /// GHz
    pub start: f64,
    /// GHz
    pub stop: f64,
    pub points: usize,
    /// ns before averaging starts.
    pub settle_time: f64,
    /// Drive periods per averaging window.
    pub window_periods: usize,
    /// Relative tolerance between consecutive window averages.
    pub tolerance: f64,
}

impl Default for SweepSettings {
    fn default() -> Self {
        SweepSettings {
            start: 15.9,
            stop: 16.4,
            points: 26,
            settle_time: 2000.0,
            window_periods: 2000,
            tolerance: 1e-2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSettings {
    /// Transitions as 1-based pairs of eigenstate labels.
    pub transitions: Vec<(usize, usize)>,
    /// Number of Rabi periods to fit over.
    pub periods: f64,
    /// Optional override of the tip drive amplitude.
    pub drive_amplitude: Option<f64>,
}

impl Default for CalibrationSettings {
    fn default() -> Self {
        CalibrationSettings {
            transitions: vec![(1, 3), (3, 4)],
            periods: 3.0,
            drive_amplitude: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompileSettings {
    /// Gate names, e.g. `X:2 Y-1/2:2 CNOT`.
    pub gates: Vec<String>,
    /// ns
    pub start_time: f64,
    /// ns
    pub final_time: f64,
    /// Rabi frequencies (GHz) per 1-based transition, used instead of running
    /// a calibration.
    pub rabi: Vec<((usize, usize), f64)>,
}

impl Default for CompileSettings {
    fn default() -> Self {
        CompileSettings {
            gates: Vec::new(),
            start_time: 0.0,
            final_time: 750.0,
            rabi: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfiguration {
    pub mode: RunMode,
    pub model: QuantumImpurityModel,
    /// Symmetric bias, mV: `μ_tip = +V/2`, `μ_substrate = −V/2`.
    pub bias: f64,
    pub tip: ElectrodeSettings,
    pub substrate: ElectrodeSettings,
    pub kernel: KernelOptions,
    pub simulation: SimulationSettings,
    pub sweep: SweepSettings,
    pub calibration: CalibrationSettings,
    pub compile: CompileSettings,
}

impl RunConfiguration {
    pub fn electrodes(&self) -> Vec<ElectrodeSpec> {
        let make = |label, s: &ElectrodeSettings, mu| ElectrodeSpec {
            label,
            temperature: s.temperature,
            chemical_potential: mu,
            base_rate: s.base_rate,
            spin_polarization: s.spin_polarization,
            drive_amplitude: s.drive_amplitude,
        };
        vec![
            make(ElectrodeLabel::Tip, &self.tip, 0.5 * self.bias),
            make(ElectrodeLabel::Substrate, &self.substrate, -0.5 * self.bias),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        for e in self.electrodes() {
            e.validate()?;
        }
        self.kernel.validate()?;
        if !self.bias.is_finite() {
            return Err(Error::validation("bias must be finite"));
        }
        let sim = &self.simulation;
        if let Some(dt) = sim.dt {
            if !(dt > 0.0) || !dt.is_finite() {
                return Err(Error::validation("simulation.dt must be > 0"));
            }
        }
        if !(sim.sample_interval > 0.0) {
            return Err(Error::validation("simulation.sample_interval must be > 0"));
        }
        if sim.label_axis.iter().map(|x| x * x).sum::<f64>() <= 0.0 {
            return Err(Error::validation("simulation.label_axis must be nonzero"));
        }
        if let InitialState::Thermal(t) = sim.initial_state {
            if !(t > 0.0) {
                return Err(Error::validation("thermal initial state needs T > 0"));
            }
        }
        let sw = &self.sweep;
        if !(sw.stop >= sw.start) || sw.start <= 0.0 || sw.points == 0 {
            return Err(Error::validation("sweep range must satisfy 0 < start <= stop with points >= 1"));
        }
        if !(sw.settle_time >= 0.0) || sw.window_periods == 0 || !(sw.tolerance > 0.0) {
            return Err(Error::validation("sweep settle/window/tolerance out of range"));
        }
        if !(self.calibration.periods >= 3.0) {
            return Err(Error::validation("calibration must span at least 3 Rabi periods"));
        }
        if !(self.compile.final_time >= self.compile.start_time) {
            return Err(Error::validation("compile.final_time precedes compile.start_time"));
        }
        Ok(())
    }
}

struct Entry {
    line: usize,
    values: Vec<String>,
}

struct Entries {
    map: BTreeMap<String, Entry>,
}

impl Entries {
    fn take(&mut self, key: &str) -> Option<Entry> {
        self.map.remove(key)
    }

    fn numbers<const N: usize>(&mut self, key: &str) -> Result<Option<[f64; N]>> {
        let Some(e) = self.take(key) else { return Ok(None) };
        if e.values.len() != N {
            return Err(Error::parse(e.line, format!("{key}: expected {N} value(s), found {}", e.values.len())));
        }
        let mut out = [0.0; N];
        for (o, v) in out.iter_mut().zip(&e.values) {
            *o = parse_f64(v, e.line)?;
        }
        Ok(Some(out))
    }

    fn number(&mut self, key: &str) -> Result<Option<f64>> {
        Ok(self.numbers::<1>(key)?.map(|[x]| x))
    }

    fn required<const N: usize>(&mut self, key: &str) -> Result<[f64; N]> {
        self.numbers::<N>(key)?
            .ok_or_else(|| Error::validation(format!("missing required key `{key}`")))
    }

    fn count(&mut self, key: &str) -> Result<Option<usize>> {
        let Some(e) = self.take(key) else { return Ok(None) };
        if e.values.len() != 1 {
            return Err(Error::parse(e.line, format!("{key}: expected one integer")));
        }
        e.values[0]
            .parse()
            .map(Some)
            .map_err(|_| Error::parse(e.line, format!("{key}: `{}` is not a non-negative integer", e.values[0])))
    }

    fn word(&mut self, key: &str) -> Result<Option<(usize, String)>> {
        let Some(e) = self.take(key) else { return Ok(None) };
        if e.values.len() != 1 {
            return Err(Error::parse(e.line, format!("{key}: expected one word")));
        }
        Ok(Some((e.line, e.values[0].clone())))
    }
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    let t = s.replace(['d', 'D'], "e");
    match t.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::parse(line, format!("malformed number `{s}`"))),
    }
}

fn parse_pair(s: &str, line: usize) -> Result<(usize, usize)> {
    let bad = || Error::parse(line, format!("malformed transition `{s}`, expected e.g. 1-3"));
    let (a, b) = s.split_once('-').ok_or_else(bad)?;
    let a: usize = a.parse().map_err(|_| bad())?;
    let b: usize = b.parse().map_err(|_| bad())?;
    if a == 0 || b == 0 || a == b {
        return Err(bad());
    }
    Ok((a, b))
}

fn parse_bool(s: &str, line: usize) -> Result<bool> {
    match s {
        "1" | "true" | "on" => Ok(true),
        "0" | "false" | "off" => Ok(false),
        _ => Err(Error::parse(line, format!("expected a boolean, found `{s}`"))),
    }
}

fn electrode(entries: &mut Entries, name: &str) -> Result<ElectrodeSettings> {
    let [temperature] = entries.required(&format!("{name}.temperature"))?;
    let [base_rate] = entries.required(&format!("{name}.base_rate"))?;
    let spin_polarization = entries.numbers::<3>(&format!("{name}.polarization"))?.unwrap_or([0.0; 3]);
    let drive_amplitude = entries.number(&format!("{name}.drive_amplitude"))?.unwrap_or(0.0);
    Ok(ElectrodeSettings {
        temperature,
        base_rate,
        spin_polarization,
        drive_amplitude,
    })
}

pub fn parse_config(text: &str) -> Result<RunConfiguration> {
    let mut map = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('!').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut words = content.split_whitespace();
        let key = words.next().expect("non-empty line").to_string();
        let values: Vec<String> = words.map(str::to_string).collect();
        if values.is_empty() {
            return Err(Error::parse(line, format!("key `{key}` has no value")));
        }
        if let Some(prev) = map.insert(key.clone(), Entry { line, values }) {
            return Err(Error::parse(line, format!("key `{key}` repeats line {}", prev.line)));
        }
    }
    let mut e = Entries { map };

    let mode = match e.word("mode")? {
        None => RunMode::Propagate,
        Some((line, w)) => RunMode::from_name(&w).ok_or_else(|| Error::parse(line, format!("unknown mode `{w}`")))?,
    };

    let [eps_up, eps_down] = match e.numbers::<2>("transport.epsilon")? {
        Some(v) => v,
        None => {
            let [x] = e.required::<1>("transport.epsilon")?;
            [x, x]
        }
    };
    let transport = TransportOrbitalSpec {
        epsilon_up: eps_up,
        epsilon_down: eps_down,
        coulomb_u: e.required::<1>("transport.coulomb_u")?[0],
        g_factors: e.numbers::<3>("transport.g")?.unwrap_or([2.0; 3]),
        b_field: e.numbers::<3>("transport.b_field")?.unwrap_or([0.0; 3]),
    };
    let site_count = e.count("sites")?.unwrap_or(0);
    let mut sites = Vec::with_capacity(site_count);
    for k in 1..=site_count {
        let p = format!("site{k}");
        let [s] = e.required(&format!("{p}.spin"))?;
        let st = e.numbers::<4>(&format!("{p}.stevens"))?.unwrap_or([0.0; 4]);
        sites.push(SpinSiteSpec {
            spin_magnitude: s,
            g_factors: e.numbers::<3>(&format!("{p}.g"))?.unwrap_or([2.0; 3]),
            b_field: e.numbers::<3>(&format!("{p}.b_field"))?.unwrap_or([0.0; 3]),
            stevens: StevensCoefficients {
                b20: st[0],
                b22: st[1],
                b40: st[2],
                b44: st[3],
            },
        });
    }
    let exchange_count = e.count("exchanges")?.unwrap_or(0);
    let mut exchanges = Vec::with_capacity(exchange_count);
    for k in 1..=exchange_count {
        let p = format!("exchange{k}");
        let [a, b] = e.required::<2>(&format!("{p}.sites"))?;
        if a.fract() != 0.0 || b.fract() != 0.0 || a < 0.0 || b < 0.0 {
            return Err(Error::validation(format!("{p}.sites must be non-negative integers")));
        }
        let j = match e.numbers::<3>(&format!("{p}.j"))? {
            Some(v) => v,
            None => {
                let [x] = e.required::<1>(&format!("{p}.j"))?;
                [x; 3]
            }
        };
        exchanges.push(ExchangeCoupling {
            site_a: a as usize,
            site_b: b as usize,
            j_vector: j,
        });
    }
    let model = QuantumImpurityModel {
        transport,
        sites,
        exchanges,
    };

    let bias = e.number("bias")?.unwrap_or(0.0);
    let tip = electrode(&mut e, "tip")?;
    let substrate = electrode(&mut e, "substrate")?;

    let mut kernel = KernelOptions::default();
    if let Some(entry) = e.take("kernel.principal_value") {
        if entry.values.len() != 1 {
            return Err(Error::parse(entry.line, "kernel.principal_value takes one value"));
        }
        kernel.principal_value = parse_bool(&entry.values[0], entry.line)?;
    }
    if let Some(w) = e.number("kernel.bandwidth")? {
        kernel.bandwidth = w;
    }
    if let Some(eta) = e.number("kernel.broadening")? {
        kernel.broadening = eta;
    }
    if let Some((line, w)) = e.word("kernel.energy")? {
        kernel.kernel_energy = match w.as_str() {
            "transition" => KernelEnergy::Transition,
            "symmetrized" => KernelEnergy::Symmetrized,
            _ => return Err(Error::parse(line, format!("unknown kernel energy `{w}`"))),
        };
    }

    let dt = e.number("simulation.dt")?.filter(|&x| x != 0.0);
    let initial_state = match e.take("simulation.initial_state") {
        None => InitialState::Ground,
        Some(entry) => {
            let line = entry.line;
            let (head, rest) = entry.values.split_first().expect("non-empty values");
            let nums = rest.iter().map(|v| parse_f64(v, line)).collect::<Result<Vec<_>>>()?;
            match (head.as_str(), nums.as_slice()) {
                ("ground", []) => InitialState::Ground,
                ("thermal", [t]) => InitialState::Thermal(*t),
                ("custom", w) if !w.is_empty() => InitialState::Custom(w.to_vec()),
                _ => return Err(Error::parse(line, "initial_state: expected `ground`, `thermal T` or `custom w...`")),
            }
        }
    };
    let simulation = SimulationSettings {
        dt,
        sample_interval: e.number("simulation.sample_interval")?.unwrap_or(0.01),
        rho_stride: e.count("simulation.rho_stride")?.unwrap_or(0),
        initial_state,
        label_axis: e.numbers::<3>("simulation.label_axis")?.unwrap_or([1.0, 0.0, 0.0]),
    };

    let mut sweep = SweepSettings::default();
    if let Some([a, b]) = e.numbers::<2>("sweep.range")? {
        sweep.start = a;
        sweep.stop = b;
    }
    if let Some(n) = e.count("sweep.points")? {
        sweep.points = n;
    }
    if let Some(s) = e.number("sweep.settle_time")? {
        sweep.settle_time = s;
    }
    if let Some(n) = e.count("sweep.window_periods")? {
        sweep.window_periods = n;
    }
    if let Some(t) = e.number("sweep.tolerance")? {
        sweep.tolerance = t;
    }

    let mut calibration = CalibrationSettings::default();
    if let Some(entry) = e.take("calibration.transitions") {
        calibration.transitions = entry
            .values
            .iter()
            .map(|v| parse_pair(v, entry.line))
            .collect::<Result<_>>()?;
    }
    if let Some(p) = e.number("calibration.periods")? {
        calibration.periods = p;
    }
    calibration.drive_amplitude = e.number("calibration.drive_amplitude")?;

    let mut compile = CompileSettings::default();
    if let Some(entry) = e.take("compile.gates") {
        compile.gates = entry.values;
    }
    if let Some(t) = e.number("compile.start_time")? {
        compile.start_time = t;
    }
    if let Some(t) = e.number("compile.final_time")? {
        compile.final_time = t;
    }
    if let Some(entry) = e.take("compile.rabi") {
        if entry.values.len() % 2 != 0 {
            return Err(Error::parse(entry.line, "compile.rabi expects transition/frequency pairs"));
        }
        for pair in entry.values.chunks(2) {
            compile
                .rabi
                .push((parse_pair(&pair[0], entry.line)?, parse_f64(&pair[1], entry.line)?));
        }
    }

    if let Some((key, entry)) = e.map.iter().next() {
        return Err(Error::parse(entry.line, format!("unknown key `{key}`")));
    }

    let config = RunConfiguration {
        mode,
        model,
        bias,
        tip,
        substrate,
        kernel,
        simulation,
        sweep,
        calibration,
        compile,
    };
    config.validate()?;
    Ok(config)
}

fn num(v: f64) -> String {
    // shortest representation that parses back exactly
    format!("{v:?}")
}

fn nums(v: &[f64]) -> String {
    v.iter().map(|x| num(*x)).collect::<Vec<_>>().join(" ")
}

fn line(out: &mut String, key: &str, value: &str, comment: &str) {
    if comment.is_empty() {
        let _ = writeln!(out, "{key:<28}{value}");
    } else {
        let _ = writeln!(out, "{key:<28}{value:<36}! {comment}");
    }
}

pub fn serialize_config(c: &RunConfiguration) -> String {
    let mut o = String::new();
    line(&mut o, "mode", c.mode.name(), "");
    o.push('\n');
    let t = &c.model.transport;
    line(&mut o, "transport.epsilon", &nums(&[t.epsilon_up, t.epsilon_down]), "meV, spin up / down");
    line(&mut o, "transport.coulomb_u", &num(t.coulomb_u), "meV");
    line(&mut o, "transport.g", &nums(&t.g_factors), "");
    line(&mut o, "transport.b_field", &nums(&t.b_field), "T");
    line(&mut o, "sites", &c.model.sites.len().to_string(), "");
    for (k, s) in c.model.sites.iter().enumerate() {
        let p = format!("site{}", k + 1);
        line(&mut o, &format!("{p}.spin"), &num(s.spin_magnitude), "");
        line(&mut o, &format!("{p}.g"), &nums(&s.g_factors), "");
        line(&mut o, &format!("{p}.b_field"), &nums(&s.b_field), "T");
        let st = s.stevens;
        line(&mut o, &format!("{p}.stevens"), &nums(&[st.b20, st.b22, st.b40, st.b44]), "meV: B20 B22 B40 B44");
    }
    line(&mut o, "exchanges", &c.model.exchanges.len().to_string(), "");
    for (k, x) in c.model.exchanges.iter().enumerate() {
        let p = format!("exchange{}", k + 1);
        line(&mut o, &format!("{p}.sites"), &format!("{} {}", x.site_a, x.site_b), "0 is the transport orbital");
        line(&mut o, &format!("{p}.j"), &nums(&x.j_vector), "GHz, x y z");
    }
    o.push('\n');
    line(&mut o, "bias", &num(c.bias), "mV, split symmetrically");
    for (name, e) in [("tip", &c.tip), ("substrate", &c.substrate)] {
        line(&mut o, &format!("{name}.temperature"), &num(e.temperature), "K");
        line(&mut o, &format!("{name}.base_rate"), &num(e.base_rate), "ueV");
        line(&mut o, &format!("{name}.polarization"), &nums(&e.spin_polarization), "");
        line(&mut o, &format!("{name}.drive_amplitude"), &num(e.drive_amplitude), "");
    }
    o.push('\n');
    let k = &c.kernel;
    line(&mut o, "kernel.principal_value", if k.principal_value { "1" } else { "0" }, "");
    line(&mut o, "kernel.bandwidth", &num(k.bandwidth), "meV");
    line(&mut o, "kernel.broadening", &num(k.broadening), "ueV");
    let energy = match k.kernel_energy {
        KernelEnergy::Transition => "transition",
        KernelEnergy::Symmetrized => "symmetrized",
    };
    line(&mut o, "kernel.energy", energy, "");
    o.push('\n');
    let s = &c.simulation;
    line(&mut o, "simulation.dt", &num(s.dt.unwrap_or(0.0)), "ns, 0 selects the default");
    line(&mut o, "simulation.sample_interval", &num(s.sample_interval), "ns");
    line(&mut o, "simulation.rho_stride", &s.rho_stride.to_string(), "");
    let init = match &s.initial_state {
        InitialState::Ground => "ground".to_string(),
        InitialState::Thermal(t) => format!("thermal {}", num(*t)),
        InitialState::Custom(w) => format!("custom {}", nums(w)),
    };
    line(&mut o, "simulation.initial_state", &init, "");
    line(&mut o, "simulation.label_axis", &nums(&s.label_axis), "");
    o.push('\n');
    let w = &c.sweep;
    line(&mut o, "sweep.range", &nums(&[w.start, w.stop]), "GHz");
    line(&mut o, "sweep.points", &w.points.to_string(), "");
    line(&mut o, "sweep.settle_time", &num(w.settle_time), "ns");
    line(&mut o, "sweep.window_periods", &w.window_periods.to_string(), "");
    line(&mut o, "sweep.tolerance", &num(w.tolerance), "");
    o.push('\n');
    let cal = &c.calibration;
    let pairs: Vec<String> = cal.transitions.iter().map(|(a, b)| format!("{a}-{b}")).collect();
    if !pairs.is_empty() {
        line(&mut o, "calibration.transitions", &pairs.join(" "), "");
    }
    line(&mut o, "calibration.periods", &num(cal.periods), "");
    if let Some(a) = cal.drive_amplitude {
        line(&mut o, "calibration.drive_amplitude", &num(a), "");
    }
    let cp = &c.compile;
    if !cp.gates.is_empty() {
        line(&mut o, "compile.gates", &cp.gates.join(" "), "");
    }
    line(&mut o, "compile.start_time", &num(cp.start_time), "ns");
    line(&mut o, "compile.final_time", &num(cp.final_time), "ns");
    if !cp.rabi.is_empty() {
        let v: Vec<String> = cp.rabi.iter().map(|((a, b), f)| format!("{a}-{b} {}", num(*f))).collect();
        line(&mut o, "compile.rabi", &v.join(" "), "GHz");
    }
    o
}
