//! Write a synthetic scan dataset with one associated gene, scan it, and
//! print the top of the ranked table.

use gsu::scan::fixture::write_scan_fixture;
use gsu::scan::{run_scan, PhenotypeSource, ScanConfig};
use gsu::simgen::GenotypePanel;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("gsu-genome-scan-example");
    std::fs::create_dir_all(&dir)?;
    let fixture = write_scan_fixture(&GenotypePanel::fixture(), &dir, 200, 1.5, 7)?;
    println!("inputs in {}; planted gene {:?}", dir.display(), fixture.planted);

    let mut config = ScanConfig::new(
        &fixture.genotype,
        PhenotypeSource::Matrix {
            path: fixture.phenotype.clone(),
            weights: None,
        },
    );
    config.generanges = Some(fixture.generanges.clone());
    config.maf_max = Some(0.05);
    config.output = Some(dir.join("scan.tsv"));
    let report = run_scan(&config)?;

    for line in report.to_tsv().lines().take(8) {
        println!("{line}");
    }
    println!("significant at Bonferroni {:.2e}:", report.bonferroni());
    for row in report.significant() {
        println!("  {} (p = {:.3e})", row.set, row.p_value().unwrap_or(f64::NAN));
    }
    Ok(())
}
