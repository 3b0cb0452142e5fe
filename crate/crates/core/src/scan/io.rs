//! Plain-text input and output.
//!
//! All files are UTF-8, whitespace-delimited, one record per line. Lines
//! starting with `#` and blank lines are ignored. Numbers are written with
//! Rust's shortest round-trip formatting, so write-then-read is exact.
//!
//! * genotype matrix: one row per subject, one column per variant, entries
//!   `0`, `1`, `2` (or a dosage in `[0, 2]`) and `.` for missing
//! * variant sidecar: `id chr pos` per variant, in column order
//! * phenotype / covariate / similarity matrices: numeric rows; `NA` or `.`
//!   marks a missing phenotype
//! * gene ranges: `gene chr start end` with inclusive coordinates

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use crate::error::{GsuError, Result};
use crate::model::VariantInfo;

/// Inclusive base-pair range of a named gene.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneRange {
    pub gene: String,
    pub chromosome: String,
    pub start: u64,
    pub end: u64,
}

/// Strip a leading `chr` (any case) from a chromosome label.
pub fn normalize_chromosome(label: &str) -> String {
    let lower = label.to_ascii_lowercase();
    if lower.starts_with("chr") && label.len() > 3 {
        label[3..].to_string()
    } else {
        label.to_string()
    }
}

/// Non-comment, non-blank lines with their 1-based line numbers.
fn records(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            None
        } else {
            Some((i + 1, t.split_whitespace().collect()))
        }
    })
}

fn read(path: &Path) -> Result<String> {
    Ok(fs::read_to_string(path)?)
}

fn parse_error(line: usize, msg: impl Into<String>) -> GsuError {
    GsuError::Parse { line, msg: msg.into() }
}

/// Numeric matrix; `missing` tokens become NaN.
fn parse_matrix(text: &str, missing: &[&str], expected_cols: Option<usize>) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = expected_cols;
    for (line, fields) in records(text) {
        let w = *width.get_or_insert(fields.len());
        if fields.len() != w {
            return Err(parse_error(
                line,
                format!("expected {w} fields, found {}", fields.len()),
            ));
        }
        let row = fields
            .iter()
            .map(|tok| {
                if missing.contains(tok) {
                    Ok(f64::NAN)
                } else {
                    tok.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| parse_error(line, format!("unrecognised token '{tok}'")))
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_error(0, "no data rows"));
    }
    let ncols = rows[0].len();
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

/// Variant sidecar: `id chr pos`.
pub fn load_variants(path: &Path) -> Result<Vec<VariantInfo>> {
    parse_variants(&read(path)?)
}

pub fn parse_variants(text: &str) -> Result<Vec<VariantInfo>> {
    let mut out = Vec::new();
    for (line, fields) in records(text) {
        if fields.len() != 3 {
            return Err(parse_error(
                line,
                format!("expected 'id chr pos', found {} fields", fields.len()),
            ));
        }
        let pos = fields[2]
            .parse::<u64>()
            .map_err(|_| parse_error(line, format!("invalid position '{}'", fields[2])))?;
        out.push(VariantInfo::new(fields[0], normalize_chromosome(fields[1]), pos));
    }
    if out.is_empty() {
        return Err(parse_error(0, "no variants"));
    }
    Ok(out)
}

/// Raw genotype matrix (NaN for `.`) with its variant annotations, before
/// validation.
#[derive(Debug, Clone)]
pub struct RawGenotypes {
    pub values: DMatrix<f64>,
    pub variants: Vec<VariantInfo>,
}

/// Default sidecar location: the genotype path with `.variants` appended.
pub fn default_variants_path(genotype: &Path) -> PathBuf {
    let mut s = genotype.as_os_str().to_owned();
    s.push(".variants");
    PathBuf::from(s)
}

/// Genotype matrix and sidecar; the sidecar fixes the expected row width.
pub fn load_raw_genotypes(genotype: &Path, variants: &Path) -> Result<RawGenotypes> {
    let variants = load_variants(variants)?;
    let values = parse_matrix(&read(genotype)?, &["."], Some(variants.len()))?;
    Ok(RawGenotypes { values, variants })
}

/// Load and validate a genotype file whose sidecar sits at
/// [`default_variants_path`].
pub fn load_genotype_file(path: &Path) -> Result<crate::model::GenotypeMatrix> {
    let raw = load_raw_genotypes(path, &default_variants_path(path))?;
    crate::model::validate_genotypes(raw.values, raw.variants)
}

pub fn parse_genotypes(text: &str, n_variants: usize) -> Result<DMatrix<f64>> {
    parse_matrix(text, &["."], Some(n_variants))
}

/// Phenotype matrix; `NA` and `.` load as NaN and are rejected at
/// validation.
pub fn load_phenotype_file(path: &Path) -> Result<DMatrix<f64>> {
    parse_matrix(&read(path)?, &["NA", "."], None)
}

pub fn load_covariate_file(path: &Path) -> Result<DMatrix<f64>> {
    parse_matrix(&read(path)?, &[], None)
}

pub fn load_similarity_file(path: &Path) -> Result<DMatrix<f64>> {
    let m = parse_matrix(&read(path)?, &[], None)?;
    if m.nrows() != m.ncols() {
        return Err(GsuError::DimensionMismatch {
            what: "similarity matrix columns",
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    Ok(m)
}

pub fn load_gene_ranges(path: &Path) -> Result<Vec<GeneRange>> {
    parse_gene_ranges(&read(path)?)
}

pub fn parse_gene_ranges(text: &str) -> Result<Vec<GeneRange>> {
    let mut out = Vec::new();
    for (line, fields) in records(text) {
        if fields.len() != 4 {
            return Err(parse_error(line, "expected 'gene chr start end'"));
        }
        let num = |s: &str| {
            s.parse::<u64>()
                .map_err(|_| parse_error(line, format!("invalid coordinate '{s}'")))
        };
        let (start, end) = (num(fields[2])?, num(fields[3])?);
        if start > end {
            return Err(parse_error(line, format!("start {start} exceeds end {end}")));
        }
        out.push(GeneRange {
            gene: fields[0].to_string(),
            chromosome: normalize_chromosome(fields[1]),
            start,
            end,
        });
    }
    Ok(out)
}

/// Comma- or whitespace-separated list of reals.
pub fn parse_real_list(s: &str) -> Result<Vec<f64>> {
    s.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_error(0, format!("invalid number '{t}'")))
        })
        .collect()
}

fn write_matrix_with<W: Write>(mut w: W, m: &DMatrix<f64>, nan: &str) -> Result<()> {
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols())
            .map(|j| {
                let v = m[(i, j)];
                if v.is_nan() {
                    nan.to_string()
                } else {
                    v.to_string()
                }
            })
            .collect();
        writeln!(w, "{}", row.join("\t"))?;
    }
    Ok(())
}

/// Numeric matrix, tab-separated; NaN is written as `NA`.
pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut buf = Vec::new();
    write_matrix_with(&mut buf, m, "NA")?;
    Ok(fs::write(path, buf)?)
}

/// Genotype matrix with `.` for NaN, plus its sidecar.
pub fn write_genotypes(path: &Path, values: &DMatrix<f64>, variants: &[VariantInfo]) -> Result<()> {
    if values.ncols() != variants.len() {
        return Err(GsuError::DimensionMismatch {
            what: "variant annotations",
            expected: values.ncols(),
            found: variants.len(),
        });
    }
    let mut buf = Vec::new();
    write_matrix_with(&mut buf, values, ".")?;
    fs::write(path, buf)?;
    write_variants(&default_variants_path(path), variants)
}

pub fn write_variants(path: &Path, variants: &[VariantInfo]) -> Result<()> {
    let mut buf = Vec::new();
    writeln!(buf, "#id\tchr\tpos")?;
    for v in variants {
        writeln!(buf, "{}\t{}\t{}", v.id, v.chromosome, v.position)?;
    }
    Ok(fs::write(path, buf)?)
}

pub fn write_gene_ranges(path: &Path, genes: &[GeneRange]) -> Result<()> {
    let mut buf = Vec::new();
    writeln!(buf, "#gene\tchr\tstart\tend")?;
    for g in genes {
        writeln!(buf, "{}\t{}\t{}\t{}", g.gene, g.chromosome, g.start, g.end)?;
    }
    Ok(fs::write(path, buf)?)
}
