//! Constructions and mutations: dual designs, cyclic difference-set
//! development, anonymity-class blowups, and dynamic user membership.

use super::{BlockId, DesignError, PointId, SetSystem};

impl SetSystem {
    /// The dual design: one point per block of `self` (named `S1..Sb`), and
    /// one block per point of `self` holding the blocks through that point.
    ///
    /// For a (v,b,r,k)-1 design the dual profiles as a (b,v,k,r)-1 design.
    pub fn dual(&self) -> Result<SetSystem, DesignError> {
        // A point lying in every block would make its dual block improper.
        for p in 0..self.v() {
            if self.degree(PointId(p as u32)) as usize == self.b() {
                return Err(DesignError::DualImproper {
                    name: self.points()[p].clone(),
                });
            }
        }
        let dual_points: Vec<String> = (1..=self.b()).map(|i| format!("S{i}")).collect();
        let dual_blocks: Vec<Vec<String>> = (0..self.v())
            .map(|p| {
                self.blocks_through(PointId(p as u32))
                    .iter()
                    .map(|b| dual_points[b.index()].clone())
                    .collect()
            })
            .collect();
        SetSystem::new(format!("{}-dual", self.name()), dual_points, dual_blocks)
    }

    /// Removes a user from the point set and from every block.
    ///
    /// Returns the shrunken system plus the rekey list: every block the user
    /// belonged to (whose space key must rotate). The operation is refused,
    /// with nothing modified, when removal would empty a block, leave a block
    /// equal to the whole remaining point set, or break the covering
    /// property of a covering design.
    pub fn remove_user(&self, u: PointId) -> Result<(SetSystem, Vec<BlockId>), DesignError> {
        self.check_point(u)?;
        for (bi, block) in self.blocks().iter().enumerate() {
            if block.len() == 1 && block[0] == u {
                return Err(DesignError::RemovalEmptiesBlock { block: bi });
            }
            if block.len() == self.v() - 1 && !self.block_contains(BlockId(bi as u32), u) {
                return Err(DesignError::RemovalLeavesImproperBlock { block: bi });
            }
        }
        let shrunk = self.without_user(u, |_| true)?;
        // Survivor pair coverage cannot drop (any block witnessing a pair
        // still witnesses it after losing u), so this guard never fires; it
        // stays as defence against future edits breaking that argument.
        if self.profile().flags.covering && !shrunk.profile().flags.covering {
            return Err(DesignError::RemovalBreaksCovering);
        }
        Ok((shrunk, self.blocks_through(u).to_vec()))
    }

    /// Like `remove_user`, but instead of refusing, drops blocks that the
    /// removal would make empty or improper. The design class may downgrade.
    ///
    /// `rekey` lists surviving blocks that contained the user (old indices);
    /// `dropped` lists deleted blocks (old indices). Fails only when a
    /// surviving user would be left with no memory space at all.
    pub fn force_remove_user(&self, u: PointId) -> Result<RemovalOutcome, DesignError> {
        self.check_point(u)?;
        let keep = |block: &[PointId]| {
            let remnant = block.len() - usize::from(block.contains(&u));
            remnant >= 1 && remnant < self.v() - 1
        };
        let system = self.without_user(u, keep)?;
        let mut rekey = Vec::new();
        let mut dropped = Vec::new();
        for (bi, block) in self.blocks().iter().enumerate() {
            let id = BlockId(bi as u32);
            if !keep(block) {
                dropped.push(id);
            } else if self.block_contains(id, u) {
                rekey.push(id);
            }
        }
        Ok(RemovalOutcome {
            system,
            rekey,
            dropped,
        })
    }

    /// Rebuilds the system without point `u`, keeping only blocks for which
    /// `keep` returns true (judged on the original membership).
    fn without_user(
        &self,
        u: PointId,
        keep: impl Fn(&[PointId]) -> bool,
    ) -> Result<SetSystem, DesignError> {
        let points: Vec<String> = self
            .points()
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != u.index())
            .map(|(_, name)| name.clone())
            .collect();
        let blocks: Vec<Vec<String>> = self
            .blocks()
            .iter()
            .filter(|block| keep(block))
            .map(|block| {
                block
                    .iter()
                    .filter(|p| **p != u)
                    .map(|p| self.point_name(*p).to_string())
                    .collect()
            })
            .collect();
        SetSystem::new(self.name().to_string(), points, blocks)
    }

    /// Adds a user by joining a greedy set cover of the existing points:
    /// repeatedly pick the block covering the most still-uncovered points,
    /// breaking ties by lowest block index. The new user is appended to
    /// exactly those blocks, so every pair (new user, old user) is covered
    /// and existing pair coverage is untouched.
    pub fn add_user(&self, new_user: &str) -> Result<(SetSystem, Vec<BlockId>), DesignError> {
        if self.point_id(new_user).is_ok() {
            return Err(DesignError::PointExists {
                name: new_user.to_string(),
            });
        }
        let mut uncovered = vec![true; self.v()];
        let mut remaining = self.v();
        let mut joined: Vec<BlockId> = Vec::new();
        while remaining > 0 {
            let mut best: Option<(usize, usize)> = None; // (gain, block index)
            for (bi, block) in self.blocks().iter().enumerate() {
                let gain = block.iter().filter(|p| uncovered[p.index()]).count();
                if gain > best.map_or(0, |(g, _)| g) {
                    best = Some((gain, bi));
                }
            }
            let Some((_, bi)) = best else {
                return Err(DesignError::NoCover);
            };
            joined.push(BlockId(bi as u32));
            for p in &self.blocks()[bi] {
                if std::mem::replace(&mut uncovered[p.index()], false) {
                    remaining -= 1;
                }
            }
        }
        let mut points = self.points().to_vec();
        points.push(new_user.to_string());
        let blocks: Vec<Vec<String>> = self
            .blocks()
            .iter()
            .enumerate()
            .map(|(bi, block)| {
                let mut names: Vec<String> =
                    block.iter().map(|p| self.point_name(*p).to_string()).collect();
                if joined.contains(&BlockId(bi as u32)) {
                    names.push(new_user.to_string());
                }
                names
            })
            .collect();
        let system = SetSystem::new(self.name().to_string(), points, blocks)?;
        joined.sort_unstable();
        Ok((system, joined))
    }
}

/// Outcome of `force_remove_user`.
#[derive(Debug, Clone)]
pub struct RemovalOutcome {
    pub system: SetSystem,
    /// Old indices of surviving blocks that contained the removed user.
    pub rekey: Vec<BlockId>,
    /// Old indices of blocks dropped because they became empty or improper.
    pub dropped: Vec<BlockId>,
}

/// Develops a base block cyclically: blocks are `{base + i mod v}` for every
/// residue i, on points named "0".."v-1". The standard way to build the
/// difference-set fixtures.
pub fn develop_difference_set(base: &[u32], modulus: u32) -> Result<SetSystem, DesignError> {
    if modulus < 3 {
        return Err(DesignError::ModulusTooSmall { modulus });
    }
    if base.len() < 2 {
        return Err(DesignError::BadDifferenceBase {
            reason: "base needs at least 2 residues",
        });
    }
    if base.len() >= modulus as usize {
        return Err(DesignError::BadDifferenceBase {
            reason: "base must be a proper subset of the residues",
        });
    }
    if base.iter().any(|x| *x >= modulus) {
        return Err(DesignError::BadDifferenceBase {
            reason: "base residue out of range",
        });
    }
    let mut sorted = base.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(DesignError::BadDifferenceBase {
            reason: "base residues must be distinct",
        });
    }
    let points: Vec<String> = (0..modulus).map(|i| i.to_string()).collect();
    let blocks: Vec<Vec<String>> = (0..modulus)
        .map(|i| {
            let mut members: Vec<u32> = base.iter().map(|x| (x + i) % modulus).collect();
            members.sort_unstable();
            members.iter().map(|m| m.to_string()).collect()
        })
        .collect();
    let name = format!(
        "dev-{}-mod-{}",
        base.iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join("-"),
        modulus
    );
    SetSystem::new(name, points, blocks)
}

/// A partition of prospective users into anonymity classes; class ℓ is
/// paired with point ℓ of a base design by `build_t_anonymity`.
#[derive(Debug, Clone)]
pub struct AnonymityPartition {
    classes: Vec<Vec<String>>,
    t_min: usize,
}

impl AnonymityPartition {
    pub fn new(classes: Vec<Vec<String>>) -> Result<Self, DesignError> {
        let mut seen = std::collections::HashSet::new();
        for (index, class) in classes.iter().enumerate() {
            if class.is_empty() {
                return Err(DesignError::EmptyClass { index });
            }
            for member in class {
                if !seen.insert(member.clone()) {
                    return Err(DesignError::DuplicateClassMember {
                        name: member.clone(),
                    });
                }
            }
        }
        let t_min = classes.iter().map(Vec::len).min().unwrap_or(0);
        Ok(AnonymityPartition { classes, t_min })
    }

    pub fn classes(&self) -> &[Vec<String>] {
        &self.classes
    }

    /// Minimum class size: the `t` of the construction.
    pub fn t_min(&self) -> usize {
        self.t_min
    }
}

/// Blows a covering design up into one with t-anonymity classes: each output
/// block is the union of the classes of its base block's points, so every
/// class lies wholly inside or outside every memory space.
pub fn build_t_anonymity(
    base: &SetSystem,
    partition: &AnonymityPartition,
) -> Result<SetSystem, DesignError> {
    if !base.profile().flags.covering {
        return Err(DesignError::NotCovering {
            name: base.name().to_string(),
        });
    }
    if partition.classes().len() != base.v() {
        return Err(DesignError::ClassCountMismatch {
            classes: partition.classes().len(),
            points: base.v(),
        });
    }
    let points: Vec<String> = partition.classes().concat();
    let blocks: Vec<Vec<String>> = base
        .blocks()
        .iter()
        .map(|block| {
            block
                .iter()
                .flat_map(|p| partition.classes()[p.index()].iter().cloned())
                .collect()
        })
        .collect();
    SetSystem::new(
        format!("{}-t{}", base.name(), partition.t_min()),
        points,
        blocks,
    )
}
