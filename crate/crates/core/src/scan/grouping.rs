//! Partition variants into gene sets and fixed-width windows.

use std::collections::BTreeMap;

use crate::error::{GsuError, Result};
use crate::model::{VariantInfo, VariantSet};
use crate::scan::io::GeneRange;

/// Origin of the window grid on each chromosome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WindowAnchor {
    /// Smallest position among the chromosome's ungrouped variants.
    #[default]
    MinUngrouped,
    /// Fixed base-pair origin shared by all chromosomes.
    Fixed(u64),
}

/// Pairs of gene names whose ranges overlap on the same chromosome.
pub fn overlapping_genes(genes: &[GeneRange]) -> Vec<(String, String)> {
    let mut by_chr: BTreeMap<&str, Vec<&GeneRange>> = BTreeMap::new();
    for g in genes {
        by_chr.entry(g.chromosome.as_str()).or_default().push(g);
    }
    let mut out = Vec::new();
    for list in by_chr.values_mut() {
        list.sort_by(|a, b| (a.start, a.end, &a.gene).cmp(&(b.start, b.end, &b.gene)));
        for (i, a) in list.iter().enumerate() {
            for b in &list[i + 1..] {
                if b.start > a.end {
                    break;
                }
                out.push((a.gene.clone(), b.gene.clone()));
            }
        }
    }
    out
}

/// Window set name for a window starting at `start`.
pub fn window_name(chromosome: &str, start: u64, window_bp: u64) -> String {
    format!("Chr{}-{}-{}", chromosome, start, start + window_bp - 1)
}

/// Gene sets (in gene-list order) followed by window sets (by chromosome
/// of first appearance, then start). Every variant lands in exactly one
/// set; empty sets are dropped.
pub fn group_variants(
    variants: &[VariantInfo],
    genes: &[GeneRange],
    window_bp: u64,
    anchor: WindowAnchor,
) -> Result<Vec<VariantSet>> {
    if window_bp == 0 {
        return Err(GsuError::InvalidParameter("window size must be positive".into()));
    }
    let overlaps = overlapping_genes(genes);
    if !overlaps.is_empty() {
        return Err(GsuError::OverlappingGenes(overlaps));
    }
    let m = variants.len();
    let mut gene_members: Vec<Vec<usize>> = vec![Vec::new(); genes.len()];
    let mut ungrouped: Vec<usize> = Vec::new();
    for (j, v) in variants.iter().enumerate() {
        let hit = genes
            .iter()
            .position(|g| g.chromosome == v.chromosome && g.start <= v.position && v.position <= g.end);
        match hit {
            Some(gi) => gene_members[gi].push(j),
            None => ungrouped.push(j),
        }
    }

    let mut sets = Vec::new();
    for (g, members) in genes.iter().zip(gene_members) {
        if !members.is_empty() {
            sets.push(VariantSet::new(g.gene.clone(), g.chromosome.clone(), members, m)?);
        }
    }

    let mut chr_order: Vec<&str> = Vec::new();
    let mut by_chr: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for &j in &ungrouped {
        let c = variants[j].chromosome.as_str();
        if !by_chr.contains_key(c) {
            chr_order.push(c);
        }
        by_chr.entry(c).or_default().push(j);
    }
    for chr in chr_order {
        let members = &by_chr[chr];
        let origin = match anchor {
            WindowAnchor::MinUngrouped => members.iter().map(|&j| variants[j].position).min().unwrap_or(0),
            WindowAnchor::Fixed(a) => a,
        };
        let mut windows: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
        for &j in members {
            let pos = variants[j].position;
            if pos < origin {
                return Err(GsuError::InvalidParameter(format!(
                    "variant {} at {pos} lies before the window anchor {origin}",
                    variants[j].id
                )));
            }
            let start = origin + (pos - origin) / window_bp * window_bp;
            windows.entry(start).or_default().push(j);
        }
        for (start, members) in windows {
            sets.push(VariantSet::new(window_name(chr, start, window_bp), chr, members, m)?);
        }
    }
    Ok(sets)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gene(name: &str, chr: &str, start: u64, end: u64) -> GeneRange {
        GeneRange {
            gene: name.into(),
            chromosome: chr.into(),
            start,
            end,
        }
    }

    #[test]
    fn variant_inside_gene() {
        let v = vec![VariantInfo::new("a", "1", 150)];
        let sets = group_variants(&v, &[gene("G", "1", 100, 200)], 50_000, WindowAnchor::default()).unwrap();
        assert_eq!(sets.len(), 1);
        assert_eq!(sets[0].name, "G");
        assert_eq!(sets[0].members(), &[0]);
    }

    #[test]
    fn window_arithmetic() {
        let v = vec![VariantInfo::new("a", "1", 1), VariantInfo::new("b", "1", 60_001)];
        let sets = group_variants(&v, &[], 50_000, WindowAnchor::default()).unwrap();
        let names: Vec<&str> = sets.iter().map(|s| s.name.as_str()).collect();
        assert_eq!(names, vec!["Chr1-1-50000", "Chr1-50001-100000"]);
    }

    #[test]
    fn window_index_matches_floor_division() {
        let positions = [17u64, 18, 49_999, 50_016, 50_017, 123_456, 999_999];
        let v: Vec<VariantInfo> = positions
            .iter()
            .map(|&p| VariantInfo::new(format!("v{p}"), "3", p))
            .collect();
        let sets = group_variants(&v, &[], 50_000, WindowAnchor::default()).unwrap();
        for s in &sets {
            for &j in s.members() {
                let k = (positions[j] - 17) / 50_000;
                assert_eq!(s.name, window_name("3", 17 + k * 50_000, 50_000));
            }
        }
    }

    #[test]
    fn fixed_anchor() {
        let v = vec![VariantInfo::new("a", "2", 60_001)];
        let sets = group_variants(&v, &[], 50_000, WindowAnchor::Fixed(1)).unwrap();
        assert_eq!(sets[0].name, "Chr2-50001-100000");
    }

    #[test]
    fn overlaps_are_named() {
        let genes = [
            gene("A", "1", 100, 200),
            gene("B", "1", 150, 300),
            gene("C", "2", 150, 300),
        ];
        match group_variants(&[], &genes, 10, WindowAnchor::default()) {
            Err(GsuError::OverlappingGenes(pairs)) => assert_eq!(pairs, vec![("A".to_string(), "B".to_string())]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn partition_covers_every_variant_once() {
        let v: Vec<VariantInfo> = (0..200)
            .map(|i| VariantInfo::new(format!("v{i}"), if i % 3 == 0 { "1" } else { "2" }, 1 + 997 * i as u64))
            .collect();
        let genes = [gene("A", "1", 1000, 40_000), gene("B", "2", 90_000, 120_000)];
        let sets = group_variants(&v, &genes, 25_000, WindowAnchor::default()).unwrap();
        let mut seen = vec![0usize; v.len()];
        for s in &sets {
            for &j in s.members() {
                seen[j] += 1;
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
    }
}
