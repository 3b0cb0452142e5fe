use std::path::Path;
use std::process::{Command, Output};

use gsu::scan::fixture::write_scan_fixture;
use gsu::simgen::GenotypePanel;

fn gsu(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gsu"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn pvalue_of_chi2_one_quantile() {
    let o = gsu(&["pvalue", "--coeffs", "1", "--q", "3.841459"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "0.05");
}

#[test]
fn pvalue_methods_and_negative_coefficients() {
    for method in ["davies", "liu", "saddlepoint", "auto"] {
        // 0.5 chi2_2 is exponential with mean 1
        let o = gsu(&["pvalue", "--coeffs", "0.5,0.5", "--q", "2", "--method", method]);
        assert!(o.status.success(), "{method}");
        let v: f64 = stdout(&o).trim().parse().unwrap();
        assert!((v - (-2.0f64).exp()).abs() < 0.01, "{method}: {v}");
    }
    let o = gsu(&["pvalue", "--coeffs", "1,-1", "--q", "-2"]);
    assert!(o.status.success());
    let v: f64 = stdout(&o).trim().parse().unwrap();
    // chi2_1 - chi2_1 is symmetric
    let o = gsu(&["pvalue", "--coeffs", "1,-1", "--q", "2"]);
    let w: f64 = stdout(&o).trim().parse().unwrap();
    assert!((v + w - 1.0).abs() < 1e-5);
}

#[test]
fn power_example() {
    let o = gsu(&["power", "--mu-u", "0.05", "--zeta1", "0.01", "--q", "4", "--n", "100"]);
    assert!(o.status.success());
    let v: f64 = stdout(&o).trim().parse().unwrap();
    assert!((v - 0.6915).abs() < 5e-5, "{v}");
}

#[test]
fn power_sample_size_and_quantile_from_coefficients() {
    let o = gsu(&[
        "power",
        "--mu-u",
        "0.05",
        "--zeta1",
        "0.01",
        "--q",
        "4",
        "--target-power",
        "0.8",
    ]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "117");
    let o = gsu(&[
        "power", "--mu-u", "0.05", "--zeta1", "0.01", "--coeffs", "0.5,0.25", "--n", "100",
    ]);
    assert!(o.status.success());
    let v: f64 = stdout(&o).trim().parse().unwrap();
    assert!(v > 0.9 && v <= 1.0);
}

#[test]
fn usage_errors_exit_one() {
    let o = gsu(&["scan", "--phenotype", "y.txt"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert_eq!(
        gsu(&["power", "--mu-u", "0.1", "--zeta1", "0.01", "--q", "1"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(gsu(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(
        gsu(&[
            "scan",
            "--genotype",
            "g",
            "--phenotype",
            "y",
            "--method",
            "davies",
            "--permutations",
            "500"
        ])
        .status
        .code(),
        Some(1)
    );
}

#[test]
fn help_documents_flags() {
    let o = gsu(&["scan", "--help"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for flag in [
        "--genotype",
        "--variants",
        "--phenotype",
        "--pheno-weights",
        "--covariates",
        "--generanges",
        "--window-bp",
        "--maf-max",
        "--kernel-geno",
        "--kernel-pheno",
        "--rank-transform",
        "--method",
        "--permutations",
        "--alpha",
        "--threads",
        "--seed",
        "--out",
        "--max-missing",
    ] {
        assert!(text.contains(flag), "missing {flag}");
    }
}

#[test]
fn data_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("none.geno");
    let o = gsu(&["scan", "--genotype", p(&missing), "--phenotype", p(&missing)]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(gsu(&["pvalue", "--coeffs", "0,0", "--q", "1"]).status.code(), Some(2));
    assert_eq!(
        gsu(&["power", "--mu-u", "0.1", "--zeta1", "0.5", "--zeta0", "0.1", "--q", "1", "--n", "10"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn scan_table_layout() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_scan_fixture(&GenotypePanel::fixture(), dir.path(), 200, 1.5, 3).unwrap();
    let out = dir.path().join("scan.tsv");
    let o = gsu(&[
        "scan",
        "--genotype",
        p(&f.genotype),
        "--phenotype",
        p(&f.phenotype),
        "--generanges",
        p(&f.generanges),
        "--maf-max",
        "0.05",
        "--out",
        p(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("# sets="));
    let skipped: usize = header
        .split_whitespace()
        .find_map(|t| t.strip_prefix("skipped_variants="))
        .unwrap()
        .parse()
        .unwrap();
    let lines: Vec<&str> = lines.filter(|l| !l.starts_with('#')).collect();
    assert_eq!(lines[0], "set\tchr\tsize\tstatistic\tu_gamma\tp_value\tmethod\tnote");
    let rows: Vec<Vec<&str>> = lines[1..].iter().map(|l| l.split('\t').collect()).collect();
    assert!(rows.iter().all(|r| r.len() == 8));
    let sizes: usize = rows.iter().map(|r| r[2].parse::<usize>().unwrap()).sum();
    assert_eq!(sizes + skipped, 3000);
    let ps: Vec<f64> = rows.iter().map(|r| r[5].parse().unwrap()).collect();
    assert!(ps.windows(2).all(|w| w[0] <= w[1]));
    assert!(ps.iter().all(|v| (0.0..=1.0).contains(v)));
    assert_eq!(Some(rows[0][0].to_string()), f.planted);
}

#[test]
fn scan_windows_without_genes_and_precomputed_similarity() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_scan_fixture(&GenotypePanel::fixture(), dir.path(), 60, 0.0, 4).unwrap();
    let y = gsu::scan::io::load_phenotype_file(&f.phenotype).unwrap();
    let s = nalgebra::DMatrix::from_fn(60, 60, |i, j| (-(y[(i, 0)] - y[(j, 0)]).abs()).exp());
    let sim = dir.path().join("s.txt");
    gsu::scan::io::write_matrix(&sim, &s).unwrap();

    let a = dir.path().join("a.tsv");
    let b = dir.path().join("b.tsv");
    let common = [
        "--genotype",
        p(&f.genotype),
        "--window-bp",
        "100000",
        "--maf-max",
        "0.05",
    ];
    let o = gsu(&[
        &["scan", "--phenotype", p(&f.phenotype), "--out", p(&a)][..],
        &common[..],
    ]
    .concat());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = gsu(&[&["scan", "--similarity", p(&sim), "--out", p(&b)][..], &common[..]].concat());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let ta = std::fs::read_to_string(&a).unwrap();
    let tb = std::fs::read_to_string(&b).unwrap();
    assert!(ta.lines().any(|l| l.starts_with("Chr1-")));
    let names = |t: &str| {
        let mut v: Vec<String> = t
            .lines()
            .filter(|l| l.starts_with("Chr"))
            .map(|l| l.split('\t').next().unwrap().to_string())
            .collect();
        v.sort();
        v
    };
    assert_eq!(names(&ta), names(&tb));
    // The Laplacian similarity built by hand gives the same p-values.
    let pv = |t: &str| {
        let mut v: Vec<(String, f64)> = t
            .lines()
            .filter(|l| l.starts_with("Chr"))
            .map(|l| {
                let f: Vec<&str> = l.split('\t').collect();
                (f[0].to_string(), f[5].parse().unwrap())
            })
            .collect();
        v.sort_by(|x, y| x.0.cmp(&y.0));
        v
    };
    for ((na, pa), (nb, pb)) in pv(&ta).into_iter().zip(pv(&tb)) {
        assert_eq!(na, nb);
        assert!((pa - pb).abs() <= 1e-9 * pa.max(1e-300) + 1e-12, "{na}: {pa} vs {pb}");
    }
}

#[test]
fn simulate_writes_tables_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sim.toml");
    std::fs::write(
        &config,
        r#"
n = 40
replicates = 30
alpha = [0.05, 0.01]
seed = 5
scenarios = ["G", "BC"]

[[tests]]
name = "laplacian"

[[tests]]
name = "cross"
kernel_pheno = "cross"
kernel_geno = "ibs"

[panel]
n_individuals = 200
n_variants = 600
region_length = 200000
"#,
    )
    .unwrap();
    let run = |sub: &str| {
        let out = dir.path().join(sub);
        let o = gsu(&["simulate", "--config", p(&config), "--out-dir", p(&out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        (
            std::fs::read_to_string(out.join("rates.tsv")).unwrap(),
            std::fs::read_to_string(out.join("pvalues.tsv")).unwrap(),
        )
    };
    let (rates, pvalues) = run("one");
    assert_eq!(rates.lines().count(), 1 + 2 * 2 * 2);
    assert_eq!(pvalues.lines().count(), 1 + 2 * 2 * 30);
    assert_eq!(run("two"), (rates, pvalues));

    std::fs::write(&config, "scenarios = [\"G\"]\nbogus = 1\n").unwrap();
    let o = gsu(&[
        "simulate",
        "--config",
        p(&config),
        "--out-dir",
        p(&dir.path().join("x")),
    ]);
    assert_eq!(o.status.code(), Some(2));
}
