//! Bundled reference inputs: the two-spin model with its electrodes and the
//! four-pulse Bell-state program.

use crate::config::{parse_config, RunConfiguration};
use crate::model::QuantumImpurityModel;
use crate::pulse::PulseProgram;
use crate::pulse_format::parse_pulse_program;
use crate::rates::{ElectrodeSpec, KernelOptions};

/// Reference run configuration.
pub const APPENDIX_CONFIG: &str = include_str!("../reference/appendix.cfg");

/// Reference Bell-state pulse file.
pub const BELL_PULSES: &str = include_str!("../reference/bell_pulses.txt");

pub fn appendix_config() -> RunConfiguration {
    parse_config(APPENDIX_CONFIG).expect("bundled configuration is valid")
}

pub fn appendix_model() -> QuantumImpurityModel {
    appendix_config().model
}

pub fn appendix_electrodes() -> Vec<ElectrodeSpec> {
    appendix_config().electrodes()
}

pub fn reference_kernel() -> KernelOptions {
    appendix_config().kernel
}

pub fn bell_program() -> PulseProgram {
    parse_pulse_program(BELL_PULSES).expect("bundled pulse file is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_inputs_load() {
        let c = appendix_config();
        assert_eq!(c.model.sites.len(), 1);
        assert_eq!(c.tip.base_rate, 1.0);
        assert_eq!(c.substrate.base_rate, 5.0);
        assert_eq!(bell_program().segments.len(), 4);
    }
}
