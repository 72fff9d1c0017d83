//! Compare the AEC rate with the classical RMS and kurtosis indicators on
//! the same synthetic run-to-failure catalog.
//!
//! The baselines get the mirror-image treatment: min-max normalization, the
//! same moving-average filter, and the upward variant of the threshold-lag
//! detector (RMS and kurtosis rise on degradation while the AEC rate falls).
//!
//! ```bash
//! cargo run --release -p aec --example baseline_indicators
//! ```

use aec::detect::{detect_baseline, kurtosis_series, rms_series, DetectorConfig};
use aec::pipeline::{resolve_catalog, run_monitor, Framework, RunConfig};

fn main() -> Result<(), aec::Error> {
    let config = RunConfig::desk_synth(Framework::Monitor, 3);
    let catalog = resolve_catalog(&config)?;
    let injected = catalog.change_point.expect("faulty preset");
    let detector = DetectorConfig::default();

    println!("injected change point: {injected}\n");

    let result = run_monitor(&config)?;
    report_line("AEC rate", result.detection.degradation_start, injected);

    let rms = rms_series(&catalog);
    let (_, rms_report) = detect_baseline(&rms, config.w_size, &detector, "rms")?;
    report_line("RMS", rms_report.degradation_start, injected);

    let kurt = kurtosis_series(&catalog)?;
    let (_, kurt_report) = detect_baseline(&kurt, config.w_size, &detector, "kurtosis")?;
    report_line("kurtosis", kurt_report.degradation_start, injected);

    println!(
        "\nnote: the baselines use a documented stand-in procedure (min-max \
         normalize, filter, upward ratio rule) for qualitative comparison \
         only. A min-max-normalized rising indicator spends its healthy life \
         near zero, where ratio rules amplify noise — hence the early flags \
         above. The AEC rate sits near 1 while healthy, which is exactly why \
         the same rule is stable on it."
    );
    Ok(())
}

fn report_line(name: &str, start: Option<usize>, injected: usize) {
    match start {
        Some(t) => {
            let delay = t as i64 - injected as i64;
            println!("{name:>9}: detected at {t} (delay {delay:+})");
        }
        None => println!("{name:>9}: no detection"),
    }
}
