//! Small type-I-error and power experiment on the fixture panel.

use gsu::kernels::{KernelConfig, PhenotypeKernel};
use gsu::simgen::{run_experiment, ExperimentDesign, GenotypePanel, Scenario, TestConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let panel = GenotypePanel::fixture();
    let tests = [
        TestConfig::new("laplacian", KernelConfig::default()),
        TestConfig::new(
            "cross",
            KernelConfig {
                phenotype: PhenotypeKernel::CrossProduct { standardize: false },
                ..KernelConfig::default()
            },
        ),
    ];
    let scenarios = ["G", "C", "BCG"]
        .map(Scenario::parse)
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;

    let null = ExperimentDesign {
        replicates: 200,
        alpha_levels: vec![0.01, 0.05],
        ..ExperimentDesign::default()
    };
    let report = run_experiment(&panel, &null, &scenarios, &tests)?;
    println!("null");
    report.write_rates_tsv(std::io::stdout())?;

    let alt = ExperimentDesign {
        replicates: 200,
        causal_fraction: 0.3,
        effect_mean: 1.0,
        effect_sd: 0.2,
        seed: 2,
        ..ExperimentDesign::default()
    };
    let report = run_experiment(&panel, &alt, &scenarios, &tests)?;
    println!("\nalternative");
    report.write_rates_tsv(std::io::stdout())?;
    Ok(())
}
