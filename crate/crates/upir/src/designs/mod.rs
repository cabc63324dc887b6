//! Set systems: named points (users) and blocks (shared memory spaces).
//!
//! Points carry external string names but are handled internally as dense
//! integer ids so that the attack enumerations can use bitset algebra.
//! Blocks form a multiset: duplicates are permitted and count separately in
//! degrees and pair indices.

mod ops;
mod profile;

pub use ops::{build_t_anonymity, develop_difference_set, AnonymityPartition, RemovalOutcome};
pub use profile::{DesignFlags, DesignProfile, ProfileSummary};

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Dense index of a point (user) within one `SetSystem`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PointId(pub u32);

/// Index of a block (memory space) within one `SetSystem`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BlockId(pub u32);

impl PointId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl BlockId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for PointId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for BlockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Error)]
pub enum DesignError {
    #[error("design has no points")]
    NoPoints,
    #[error("design has no blocks")]
    NoBlocks,
    #[error("duplicate point name {name:?}")]
    DuplicatePoint { name: String },
    #[error("block {block}: unknown point {name:?}")]
    UnknownBlockPoint { block: usize, name: String },
    #[error("block {block}: duplicate point {name:?}")]
    DuplicateBlockPoint { block: usize, name: String },
    #[error("block {block} is empty")]
    EmptyBlock { block: usize },
    #[error("block {block} equals the whole point set; blocks must be proper subsets")]
    ImproperBlock { block: usize },
    #[error("point {name:?} occurs in no block")]
    UncoveredPoint { name: String },
    #[error("unknown point {name:?}")]
    UnknownPoint { name: String },
    #[error("point id {0} out of range")]
    BadPointId(u32),
    #[error("block index {0} out of range")]
    BadBlockId(u32),
    #[error("point {name:?} already exists")]
    PointExists { name: String },
    #[error("dual block for point {name:?} would be improper: the point lies in every block")]
    DualImproper { name: String },
    #[error("modulus must be at least 3, got {modulus}")]
    ModulusTooSmall { modulus: u32 },
    #[error("difference-set base invalid: {reason}")]
    BadDifferenceBase { reason: &'static str },
    #[error("design {name:?} is not a covering design")]
    NotCovering { name: String },
    #[error("partition has {classes} classes but the base design has {points} points")]
    ClassCountMismatch { classes: usize, points: usize },
    #[error("partition class {index} is empty")]
    EmptyClass { index: usize },
    #[error("partition member {name:?} appears in more than one class")]
    DuplicateClassMember { name: String },
    #[error("removing the user would empty block {block}; operation refused")]
    RemovalEmptiesBlock { block: usize },
    #[error("removing the user would leave block {block} equal to the whole point set; operation refused")]
    RemovalLeavesImproperBlock { block: usize },
    #[error("removing the user would break the covering property; operation refused")]
    RemovalBreaksCovering,
    #[error("no block subset covers all points")]
    NoCover,
    #[error("invalid design JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The on-disk design description: `{"name", "points", "blocks"}` with blocks
/// given as lists of point names.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DesignFile {
    pub name: String,
    pub points: Vec<String>,
    pub blocks: Vec<Vec<String>>,
}

/// An immutable set system: `v` named points and `b` blocks, each a nonempty
/// proper subset of the points, with every point in at least one block.
#[derive(Debug, Clone)]
pub struct SetSystem {
    name: String,
    points: Vec<String>,
    point_ids: HashMap<String, PointId>,
    /// Per block: member point ids, sorted ascending.
    blocks: Vec<Vec<PointId>>,
    /// Per point: ids of the blocks containing it, sorted ascending.
    incidence: Vec<Vec<BlockId>>,
}

impl SetSystem {
    /// Validates and builds a set system; reports the first violation found,
    /// naming the offending block index where applicable.
    pub fn new(
        name: impl Into<String>,
        points: Vec<String>,
        blocks: Vec<Vec<String>>,
    ) -> Result<Self, DesignError> {
        let name = name.into();
        if points.is_empty() {
            return Err(DesignError::NoPoints);
        }
        let mut point_ids = HashMap::with_capacity(points.len());
        for (i, p) in points.iter().enumerate() {
            if point_ids.insert(p.clone(), PointId(i as u32)).is_some() {
                return Err(DesignError::DuplicatePoint { name: p.clone() });
            }
        }
        if blocks.is_empty() {
            return Err(DesignError::NoBlocks);
        }
        let v = points.len();
        let mut id_blocks = Vec::with_capacity(blocks.len());
        for (bi, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(DesignError::EmptyBlock { block: bi });
            }
            let mut ids = Vec::with_capacity(block.len());
            for member in block {
                let id = *point_ids
                    .get(member)
                    .ok_or_else(|| DesignError::UnknownBlockPoint {
                        block: bi,
                        name: member.clone(),
                    })?;
                ids.push(id);
            }
            ids.sort_unstable();
            if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
                return Err(DesignError::DuplicateBlockPoint {
                    block: bi,
                    name: points[w[0].index()].clone(),
                });
            }
            if ids.len() == v {
                return Err(DesignError::ImproperBlock { block: bi });
            }
            id_blocks.push(ids);
        }
        let mut incidence = vec![Vec::new(); v];
        for (bi, block) in id_blocks.iter().enumerate() {
            for p in block {
                incidence[p.index()].push(BlockId(bi as u32));
            }
        }
        if let Some(i) = incidence.iter().position(|inc| inc.is_empty()) {
            return Err(DesignError::UncoveredPoint {
                name: points[i].clone(),
            });
        }
        Ok(SetSystem {
            name,
            points,
            point_ids,
            blocks: id_blocks,
            incidence,
        })
    }

    pub fn from_design_file(file: DesignFile) -> Result<Self, DesignError> {
        SetSystem::new(file.name, file.points, file.blocks)
    }

    pub fn from_json_str(json: &str) -> Result<Self, DesignError> {
        let file: DesignFile = serde_json::from_str(json)?;
        SetSystem::from_design_file(file)
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self, DesignError> {
        let text = std::fs::read_to_string(path)?;
        SetSystem::from_json_str(&text)
    }

    pub fn to_design_file(&self) -> DesignFile {
        DesignFile {
            name: self.name.clone(),
            points: self.points.clone(),
            blocks: self
                .blocks
                .iter()
                .map(|b| b.iter().map(|p| self.points[p.index()].clone()).collect())
                .collect(),
        }
    }

    pub fn to_json_string_pretty(&self) -> String {
        serde_json::to_string_pretty(&self.to_design_file()).expect("design serializes")
    }

    /// Returns a copy of this system under a different name.
    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Number of points (users), `v`.
    pub fn v(&self) -> usize {
        self.points.len()
    }

    /// Number of blocks (memory spaces), `b`.
    pub fn b(&self) -> usize {
        self.blocks.len()
    }

    pub fn points(&self) -> &[String] {
        &self.points
    }

    pub fn point_id(&self, name: &str) -> Result<PointId, DesignError> {
        self.point_ids
            .get(name)
            .copied()
            .ok_or_else(|| DesignError::UnknownPoint {
                name: name.to_string(),
            })
    }

    pub fn point_name(&self, p: PointId) -> &str {
        &self.points[p.index()]
    }

    pub fn point_names(&self, ids: &[PointId]) -> Vec<String> {
        ids.iter().map(|p| self.point_name(*p).to_string()).collect()
    }

    pub fn check_point(&self, p: PointId) -> Result<(), DesignError> {
        if p.index() < self.v() {
            Ok(())
        } else {
            Err(DesignError::BadPointId(p.0))
        }
    }

    pub fn check_block(&self, b: BlockId) -> Result<(), DesignError> {
        if b.index() < self.b() {
            Ok(())
        } else {
            Err(DesignError::BadBlockId(b.0))
        }
    }

    pub fn blocks(&self) -> &[Vec<PointId>] {
        &self.blocks
    }

    /// Members of one block, sorted ascending by point id.
    pub fn block(&self, b: BlockId) -> &[PointId] {
        &self.blocks[b.index()]
    }

    pub fn block_contains(&self, b: BlockId, p: PointId) -> bool {
        self.blocks[b.index()].binary_search(&p).is_ok()
    }

    /// Blocks containing point `p`, sorted ascending by block id.
    pub fn blocks_through(&self, p: PointId) -> &[BlockId] {
        &self.incidence[p.index()]
    }

    /// Degree of point `p`: number of blocks containing it.
    pub fn degree(&self, p: PointId) -> u32 {
        self.incidence[p.index()].len() as u32
    }

    /// Blocks containing both `a` and `b` (the pair index λ_ab lists), sorted.
    pub fn blocks_with_pair(&self, a: PointId, b: PointId) -> Vec<BlockId> {
        let (xs, ys) = (self.blocks_through(a), self.blocks_through(b));
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < xs.len() && j < ys.len() {
            match xs[i].cmp(&ys[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    out.push(xs[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        out
    }

    /// All users sharing at least one block with `u`, excluding `u` itself.
    pub fn neighborhood(&self, u: PointId) -> Result<Vec<PointId>, DesignError> {
        self.check_point(u)?;
        let mut seen = vec![false; self.v()];
        for b in self.blocks_through(u) {
            for p in self.block(*b) {
                seen[p.index()] = true;
            }
        }
        seen[u.index()] = false;
        Ok((0..self.v() as u32)
            .map(PointId)
            .filter(|p| seen[p.index()])
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::fixture;

    fn ids(s: &SetSystem, names: &[&str]) -> Vec<PointId> {
        names.iter().map(|n| s.point_id(n).unwrap()).collect()
    }

    #[test]
    fn rejects_empty_points() {
        let err = SetSystem::new("x", vec![], vec![]).unwrap_err();
        assert!(matches!(err, DesignError::NoPoints));
    }

    #[test]
    fn rejects_empty_block_list() {
        let err = SetSystem::new("x", vec!["a".into(), "b".into()], vec![]).unwrap_err();
        assert!(matches!(err, DesignError::NoBlocks));
    }

    #[test]
    fn rejects_duplicate_point_names() {
        let err = SetSystem::new(
            "x",
            vec!["a".into(), "a".into()],
            vec![vec!["a".into()]],
        )
        .unwrap_err();
        assert!(matches!(err, DesignError::DuplicatePoint { name } if name == "a"));
    }

    #[test]
    fn rejects_unknown_block_member_with_block_index() {
        let err = SetSystem::new(
            "x",
            vec!["a".into(), "b".into(), "c".into()],
            vec![vec!["a".into(), "b".into()], vec!["b".into(), "z".into()]],
        )
        .unwrap_err();
        assert!(
            matches!(err, DesignError::UnknownBlockPoint { block: 1, ref name } if name == "z"),
            "{err}"
        );
    }

    #[test]
    fn rejects_duplicate_point_inside_block_with_block_index() {
        let err = SetSystem::new(
            "x",
            vec!["a".into(), "b".into(), "c".into()],
            vec![vec!["a".into(), "b".into()], vec!["c".into(), "c".into()]],
        )
        .unwrap_err();
        assert!(
            matches!(err, DesignError::DuplicateBlockPoint { block: 1, ref name } if name == "c"),
            "{err}"
        );
    }

    #[test]
    fn rejects_empty_block() {
        let err = SetSystem::new(
            "x",
            vec!["a".into(), "b".into()],
            vec![vec!["a".into()], vec![]],
        )
        .unwrap_err();
        assert!(matches!(err, DesignError::EmptyBlock { block: 1 }));
    }

    #[test]
    fn rejects_improper_block() {
        let err = SetSystem::new(
            "x",
            vec!["a".into(), "b".into()],
            vec![vec!["a".into(), "b".into()]],
        )
        .unwrap_err();
        assert!(matches!(err, DesignError::ImproperBlock { block: 0 }));
    }

    #[test]
    fn rejects_point_in_no_block() {
        let err = SetSystem::new(
            "x",
            vec!["a".into(), "b".into(), "c".into()],
            vec![vec!["a".into(), "b".into()]],
        )
        .unwrap_err();
        assert!(matches!(err, DesignError::UncoveredPoint { name } if name == "c"));
    }

    #[test]
    fn duplicate_blocks_are_preserved() {
        let s = SetSystem::new(
            "x",
            vec!["a".into(), "b".into(), "c".into()],
            vec![
                vec!["a".into(), "b".into()],
                vec!["a".into(), "b".into()],
                vec!["b".into(), "c".into()],
            ],
        )
        .unwrap();
        assert_eq!(s.b(), 3);
        assert_eq!(s.block(BlockId(0)), s.block(BlockId(1)));
    }

    #[test]
    fn design_file_round_trip() {
        let s = fixture("fano").unwrap();
        let json = s.to_json_string_pretty();
        let back = SetSystem::from_json_str(&json).unwrap();
        assert_eq!(back.name(), s.name());
        assert_eq!(back.points(), s.points());
        assert_eq!(back.blocks(), s.blocks());
    }

    #[test]
    fn json_loader_reports_first_violation() {
        let json = r#"{"name":"bad","points":["a","b","c"],"blocks":[["a","b"],["a","a"],["q"]]}"#;
        let err = SetSystem::from_json_str(json).unwrap_err();
        assert!(matches!(err, DesignError::DuplicateBlockPoint { block: 1, .. }));
    }

    #[test]
    fn neighborhood_fano_is_everyone_else() {
        // Degree 3, rank 3: each user shares spaces with r(k-1) = 6 others.
        let s = fixture("fano").unwrap();
        let u1 = s.point_id("U1").unwrap();
        let n = s.neighborhood(u1).unwrap();
        assert_eq!(n, ids(&s, &["U2", "U3", "U4", "U5", "U6", "U7"]));
    }

    #[test]
    fn neighborhood_config_12_8() {
        let s = fixture("config-12-8-2-3").unwrap();
        let u2 = s.point_id("U2").unwrap();
        let n = s.neighborhood(u2).unwrap();
        assert_eq!(n, ids(&s, &["U1", "U3", "U5", "U10"]));
    }

    #[test]
    fn neighborhood_single_block_is_block_minus_user() {
        let s = SetSystem::new(
            "x",
            vec!["a".into(), "b".into(), "c".into()],
            vec![vec!["a".into(), "b".into()], vec!["c".into()]],
        )
        .unwrap();
        let a = s.point_id("a").unwrap();
        assert_eq!(s.neighborhood(a).unwrap(), ids(&s, &["b"]));
        let c = s.point_id("c").unwrap();
        assert!(s.neighborhood(c).unwrap().is_empty());
    }

    #[test]
    fn neighborhood_rejects_unknown_point() {
        let s = fixture("fano").unwrap();
        assert!(matches!(
            s.neighborhood(PointId(99)),
            Err(DesignError::BadPointId(99))
        ));
    }

    #[test]
    fn blocks_with_pair_matches_scan() {
        let s = fixture("bibd-10-15-6-4-2").unwrap();
        for a in 0..s.v() as u32 {
            for b in 0..s.v() as u32 {
                if a == b {
                    continue;
                }
                let (a, b) = (PointId(a), PointId(b));
                let got = s.blocks_with_pair(a, b);
                let want: Vec<BlockId> = (0..s.b() as u32)
                    .map(BlockId)
                    .filter(|blk| s.block_contains(*blk, a) && s.block_contains(*blk, b))
                    .collect();
                assert_eq!(got, want);
            }
        }
    }
}
