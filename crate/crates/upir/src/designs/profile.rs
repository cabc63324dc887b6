//! Classification of a set system into the standard design families.
//!
//! A profile is computed once, exactly, from the incidence structure:
//! degrees, ranks, the full pair-index table λ_ij, block-intersection sizes
//! μ, and the derived class flags (covering, PBD, 1-design, BIBD,
//! configuration, symmetric BIBD, projective plane, supersimple).

use serde::Serialize;

use super::{PointId, SetSystem};

/// Symmetric pair-index table: λ_ij = number of blocks containing both i, j.
#[derive(Debug, Clone)]
pub struct PairIndex {
    v: usize,
    /// Upper triangle, row-major: entry for (i, j) with i < j.
    counts: Vec<u32>,
}

impl PairIndex {
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j && j < self.v);
        i * (2 * self.v - i - 1) / 2 + (j - i - 1)
    }

    /// λ for an unordered pair of distinct points.
    pub fn get(&self, a: PointId, b: PointId) -> u32 {
        let (i, j) = if a < b {
            (a.index(), b.index())
        } else {
            (b.index(), a.index())
        };
        self.counts[self.idx(i, j)]
    }

    pub fn min(&self) -> u32 {
        self.counts.iter().copied().min().unwrap_or(0)
    }

    pub fn max(&self) -> u32 {
        self.counts.iter().copied().max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DesignFlags {
    /// Every point pair lies in at least one block.
    pub covering: bool,
    /// Every point pair lies in exactly λ ≥ 1 blocks.
    pub pbd: bool,
    /// Regular (common degree r) and uniform (common rank k).
    pub one_design: bool,
    /// 1-design and PBD.
    pub bibd: bool,
    /// 1-design with every pair in at most one block.
    pub configuration: bool,
    /// BIBD with b = v.
    pub symmetric_bibd: bool,
    /// Set when the parameters are (n²+n+1, n²+n+1, n+1, n+1, 1).
    pub projective_plane_order: Option<u32>,
    /// λ = 2 BIBD in which any two blocks meet in at most 2 points.
    pub supersimple: bool,
}

#[derive(Debug, Clone)]
pub struct DesignProfile {
    pub name: String,
    pub v: usize,
    pub b: usize,
    /// Per point: number of blocks containing it.
    pub degrees: Vec<u32>,
    /// Per block: its size.
    pub ranks: Vec<u32>,
    /// Common degree, when regular.
    pub r: Option<u32>,
    /// Common rank, when uniform.
    pub k: Option<u32>,
    /// Common pair index, when the system is a PBD.
    pub lambda: Option<u32>,
    pub lambda_min: u32,
    pub lambda_max: u32,
    pub pair_index: PairIndex,
    /// Minimum/maximum intersection size over distinct block pairs
    /// (index pairs, so duplicate blocks count); `None` when b < 2.
    pub mu_min: Option<u32>,
    pub mu_max: Option<u32>,
    pub flags: DesignFlags,
}

/// Flat, serializable summary of a profile (what `verify-design` prints).
#[derive(Debug, Clone, Serialize)]
pub struct ProfileSummary {
    pub name: String,
    pub v: usize,
    pub b: usize,
    pub r: Option<u32>,
    pub k: Option<u32>,
    pub lambda: Option<u32>,
    pub lambda_min: u32,
    pub lambda_max: u32,
    pub mu_min: Option<u32>,
    pub mu_max: Option<u32>,
    pub degree_min: u32,
    pub degree_max: u32,
    pub rank_min: u32,
    pub rank_max: u32,
    pub flags: DesignFlags,
}

impl DesignProfile {
    pub fn summary(&self) -> ProfileSummary {
        ProfileSummary {
            name: self.name.clone(),
            v: self.v,
            b: self.b,
            r: self.r,
            k: self.k,
            lambda: self.lambda,
            lambda_min: self.lambda_min,
            lambda_max: self.lambda_max,
            mu_min: self.mu_min,
            mu_max: self.mu_max,
            degree_min: self.degrees.iter().copied().min().unwrap_or(0),
            degree_max: self.degrees.iter().copied().max().unwrap_or(0),
            rank_min: self.ranks.iter().copied().min().unwrap_or(0),
            rank_max: self.ranks.iter().copied().max().unwrap_or(0),
            flags: self.flags,
        }
    }
}

/// Intersection size of two sorted id slices.
fn intersection_size(a: &[PointId], b: &[PointId]) -> u32 {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

impl SetSystem {
    /// Computes the full design profile. Always succeeds: `SetSystem`
    /// construction already guarantees the structural invariants.
    pub fn profile(&self) -> DesignProfile {
        let v = self.v();
        let b = self.b();
        let degrees: Vec<u32> = (0..v as u32).map(|p| self.degree(PointId(p))).collect();
        let ranks: Vec<u32> = self.blocks().iter().map(|blk| blk.len() as u32).collect();
        let r = common(&degrees);
        let k = common(&ranks);

        let mut pair_index = PairIndex {
            v,
            counts: vec![0; v * (v - 1) / 2],
        };
        for block in self.blocks() {
            for (x, a) in block.iter().enumerate() {
                for bpt in &block[x + 1..] {
                    let idx = pair_index.idx(a.index(), bpt.index());
                    pair_index.counts[idx] += 1;
                }
            }
        }
        let lambda_min = pair_index.min();
        let lambda_max = pair_index.max();

        let (mut mu_min, mut mu_max) = (None, None);
        for i in 0..b {
            for j in i + 1..b {
                let m = intersection_size(&self.blocks()[i], &self.blocks()[j]);
                mu_min = Some(mu_min.map_or(m, |x: u32| x.min(m)));
                mu_max = Some(mu_max.map_or(m, |x: u32| x.max(m)));
            }
        }

        let covering = lambda_min >= 1;
        let pbd = lambda_min == lambda_max && lambda_min >= 1;
        let one_design = r.is_some() && k.is_some();
        let bibd = one_design && pbd;
        let configuration = one_design && lambda_max <= 1;
        let symmetric_bibd = bibd && b == v;
        let lambda = if pbd { Some(lambda_min) } else { None };
        let supersimple = bibd && lambda == Some(2) && mu_max.is_some_and(|m| m <= 2);
        let projective_plane_order = if bibd && lambda == Some(1) && r == k {
            let n = k.unwrap() - 1;
            (n >= 1 && v as u64 == (n as u64) * (n as u64) + n as u64 + 1).then_some(n)
        } else {
            None
        };

        DesignProfile {
            name: self.name().to_string(),
            v,
            b,
            degrees,
            ranks,
            r,
            k,
            lambda,
            lambda_min,
            lambda_max,
            pair_index,
            mu_min,
            mu_max,
            flags: DesignFlags {
                covering,
                pbd,
                one_design,
                bibd,
                configuration,
                symmetric_bibd,
                projective_plane_order,
                supersimple,
            },
        }
    }
}

fn common(xs: &[u32]) -> Option<u32> {
    match xs.split_first() {
        Some((first, rest)) if rest.iter().all(|x| x == first) => Some(*first),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::designs::SetSystem;
    use crate::fixtures::fixture;

    #[test]
    fn fano_profiles_as_projective_plane_of_order_2() {
        let p = fixture("fano").unwrap().profile();
        assert_eq!((p.v, p.b, p.r, p.k, p.lambda), (7, 7, Some(3), Some(3), Some(1)));
        assert!(p.flags.covering && p.flags.pbd && p.flags.one_design && p.flags.bibd);
        assert!(p.flags.symmetric_bibd);
        assert_eq!(p.flags.projective_plane_order, Some(2));
        assert!(!p.flags.supersimple);
        // Symmetric with λ = 1: any two lines meet in exactly one point.
        assert_eq!((p.mu_min, p.mu_max), (Some(1), Some(1)));
    }

    #[test]
    fn config_12_8_2_3_profiles_as_configuration_not_pbd() {
        let p = fixture("config-12-8-2-3").unwrap().profile();
        assert_eq!((p.v, p.b, p.r, p.k), (12, 8, Some(2), Some(3)));
        assert!(p.flags.configuration && p.flags.one_design);
        assert!(!p.flags.pbd && !p.flags.bibd && !p.flags.covering);
        assert_eq!((p.lambda_min, p.lambda_max), (0, 1));
    }

    #[test]
    fn bibd_10_15_6_4_2_profiles_as_nonsymmetric_bibd() {
        let p = fixture("bibd-10-15-6-4-2").unwrap().profile();
        assert_eq!(
            (p.v, p.b, p.r, p.k, p.lambda),
            (10, 15, Some(6), Some(4), Some(2))
        );
        assert!(p.flags.bibd && !p.flags.symmetric_bibd);
        assert_eq!(p.flags.projective_plane_order, None);
    }

    #[test]
    fn config_9_9_3_3_profiles_as_configuration() {
        let p = fixture("config-9-9-3-3").unwrap().profile();
        assert_eq!((p.v, p.b, p.r, p.k), (9, 9, Some(3), Some(3)));
        assert!(p.flags.configuration);
        assert!(!p.flags.covering);
    }

    #[test]
    fn design_5_5_3_3_is_one_design_but_not_pbd() {
        let p = fixture("design-5-5-3-3").unwrap().profile();
        assert_eq!((p.v, p.b, p.r, p.k), (5, 5, Some(3), Some(3)));
        assert!(p.flags.one_design && p.flags.covering);
        assert!(!p.flags.pbd && !p.flags.bibd && !p.flags.configuration);
        assert_eq!((p.lambda_min, p.lambda_max), (1, 2));
    }

    #[test]
    fn pbd_lambda_2_is_pbd_but_not_uniform() {
        let p = fixture("pbd-lambda-2").unwrap().profile();
        assert_eq!((p.v, p.b), (5, 6));
        assert_eq!(p.lambda, Some(2));
        assert!(p.flags.pbd && p.flags.covering);
        assert!(!p.flags.one_design && !p.flags.bibd);
        assert_eq!(p.k, None);
        assert_eq!(p.r, None);
    }

    #[test]
    fn covering_7_8_is_covering_only() {
        let p = fixture("covering-7-8").unwrap().profile();
        assert_eq!((p.v, p.b), (7, 8));
        assert!(p.flags.covering);
        assert!(!p.flags.pbd && !p.flags.one_design);
        assert_eq!(p.r, None, "not regular");
        assert_eq!(p.k, None, "not uniform");
        // Mixed block sizes from 2 to 5.
        assert_eq!(p.ranks.iter().min(), Some(&2));
        assert_eq!(p.ranks.iter().max(), Some(&5));
    }

    #[test]
    fn sbibd_15_is_symmetric_lambda_3() {
        let p = fixture("sbibd-15-15-7-7-3").unwrap().profile();
        assert_eq!(
            (p.v, p.b, p.r, p.k, p.lambda),
            (15, 15, Some(7), Some(7), Some(3))
        );
        assert!(p.flags.symmetric_bibd);
        // Symmetric-intersection theorem: every block pair meets in λ points.
        assert_eq!((p.mu_min, p.mu_max), (Some(3), Some(3)));
    }

    #[test]
    fn supersimple_7_14_6_3_2_flags() {
        let p = fixture("supersimple-7-14-6-3-2").unwrap().profile();
        assert_eq!(
            (p.v, p.b, p.r, p.k, p.lambda),
            (7, 14, Some(6), Some(3), Some(2))
        );
        assert!(p.flags.bibd && p.flags.supersimple);
        assert!(!p.flags.symmetric_bibd);
        assert_eq!(p.mu_max, Some(2));
    }

    #[test]
    fn smallest_negative_covering_case() {
        // A single proper block on a 2-point set cannot exist (the other point
        // would be uncovered), so the smallest valid negative case has 3
        // points: the pair (a, c) lies in no block.
        let s = SetSystem::new(
            "tiny",
            vec!["a".into(), "b".into(), "c".into()],
            vec![vec!["a".into(), "b".into()], vec!["b".into(), "c".into()]],
        )
        .unwrap();
        let p = s.profile();
        assert!(!p.flags.covering);
        assert_eq!(p.lambda_min, 0);
    }

    #[test]
    fn bibd_identities_hold_on_all_bibd_fixtures() {
        // bk = vr, λ(v−1) = r(k−1), and Fisher's inequality b ≥ v.
        for name in crate::fixtures::FIXTURE_NAMES {
            let s = fixture(name).unwrap();
            let p = s.profile();
            if !p.flags.bibd {
                continue;
            }
            let (v, b) = (p.v as u64, p.b as u64);
            let (r, k) = (p.r.unwrap() as u64, p.k.unwrap() as u64);
            let lambda = p.lambda.unwrap() as u64;
            assert_eq!(b * k, v * r, "{name}: bk = vr");
            assert_eq!(lambda * (v - 1), r * (k - 1), "{name}: λ(v−1) = r(k−1)");
            assert!(b >= v, "{name}: Fisher");
        }
    }

    #[test]
    fn symmetric_intersection_theorem_on_all_symmetric_fixtures() {
        for name in crate::fixtures::FIXTURE_NAMES {
            let s = fixture(name).unwrap();
            let p = s.profile();
            if !p.flags.symmetric_bibd {
                continue;
            }
            let lambda = p.lambda.unwrap();
            assert_eq!(p.mu_min, Some(lambda), "{name}");
            assert_eq!(p.mu_max, Some(lambda), "{name}");
        }
    }

    #[test]
    fn duplicate_blocks_count_in_pair_index() {
        let s = SetSystem::new(
            "dup",
            vec!["a".into(), "b".into(), "c".into()],
            vec![
                vec!["a".into(), "b".into()],
                vec!["a".into(), "b".into()],
                vec!["b".into(), "c".into()],
                vec!["a".into(), "c".into()],
            ],
        )
        .unwrap();
        let p = s.profile();
        let (a, b) = (PointId(0), PointId(1));
        assert_eq!(p.pair_index.get(a, b), 2);
        assert_eq!(p.mu_max, Some(2), "duplicate blocks meet in 2 points");
        assert!(p.flags.covering && !p.flags.pbd);
    }

    #[test]
    fn triangle_is_projective_plane_of_order_1() {
        let s = crate::designs::develop_difference_set(&[0, 1], 3).unwrap();
        let p = s.profile();
        assert_eq!(
            (p.v, p.b, p.r, p.k, p.lambda),
            (3, 3, Some(2), Some(2), Some(1))
        );
        assert!(p.flags.symmetric_bibd);
        assert_eq!(p.flags.projective_plane_order, Some(1));
    }

    #[test]
    fn pair_index_matches_blocks_with_pair_on_fixtures() {
        for name in crate::fixtures::FIXTURE_NAMES {
            let s = fixture(name).unwrap();
            let p = s.profile();
            for i in 0..s.v() as u32 {
                for j in (i + 1)..s.v() as u32 {
                    let (a, b) = (PointId(i), PointId(j));
                    assert_eq!(
                        p.pair_index.get(a, b) as usize,
                        s.blocks_with_pair(a, b).len(),
                        "{name} pair ({i},{j})"
                    );
                }
            }
        }
    }
}
