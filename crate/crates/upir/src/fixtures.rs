//! Built-in designs, addressable by name: the standard worked examples plus
//! two difference-set constructions and one t-anonymity blowup.

use crate::designs::{
    build_t_anonymity, develop_difference_set, AnonymityPartition, SetSystem,
};

/// Names accepted by `fixture`.
pub const FIXTURE_NAMES: &[&str] = &[
    "fano",
    "fano-diffset",
    "config-12-8-2-3",
    "bibd-10-15-6-4-2",
    "config-9-9-3-3",
    "design-5-5-3-3",
    "pbd-lambda-2",
    "covering-7-8",
    "sbibd-15-15-7-7-3",
    "supersimple-7-14-6-3-2",
    "t3-fano",
];

fn of_str_blocks(name: &str, points: Vec<String>, blocks: &[&[&str]]) -> SetSystem {
    let blocks = blocks
        .iter()
        .map(|b| b.iter().map(|p| p.to_string()).collect())
        .collect();
    SetSystem::new(name, points, blocks).expect("fixture is valid")
}

fn u_points(v: usize) -> Vec<String> {
    (1..=v).map(|i| format!("U{i}")).collect()
}

fn digit_points(v: usize, from: usize) -> Vec<String> {
    (from..from + v).map(|i| i.to_string()).collect()
}

/// The projective plane of order 2 on U1..U7 (block list as usually printed).
fn fano() -> SetSystem {
    of_str_blocks(
        "fano",
        u_points(7),
        &[
            &["U1", "U2", "U3"],
            &["U1", "U4", "U5"],
            &["U1", "U6", "U7"],
            &["U2", "U4", "U6"],
            &["U2", "U5", "U7"],
            &["U3", "U4", "U7"],
            &["U3", "U5", "U6"],
        ],
    )
}

/// The (12,8,2,3)-configuration used in the intersection-attack example.
fn config_12_8_2_3() -> SetSystem {
    of_str_blocks(
        "config-12-8-2-3",
        u_points(12),
        &[
            &["U1", "U2", "U3"],
            &["U4", "U5", "U6"],
            &["U7", "U8", "U9"],
            &["U10", "U11", "U12"],
            &["U1", "U4", "U7"],
            &["U2", "U5", "U10"],
            &["U3", "U8", "U11"],
            &["U6", "U9", "U12"],
        ],
    )
}

/// A (10,15,6,4,2)-BIBD on points 0..9.
fn bibd_10_15_6_4_2() -> SetSystem {
    of_str_blocks(
        "bibd-10-15-6-4-2",
        digit_points(10, 0),
        &[
            &["0", "1", "2", "3"],
            &["0", "1", "4", "7"],
            &["0", "2", "4", "6"],
            &["0", "3", "5", "8"],
            &["0", "5", "7", "9"],
            &["0", "6", "8", "9"],
            &["1", "2", "5", "8"],
            &["1", "3", "6", "9"],
            &["1", "4", "5", "9"],
            &["1", "6", "7", "8"],
            &["2", "3", "7", "9"],
            &["2", "4", "8", "9"],
            &["2", "5", "6", "7"],
            &["3", "4", "7", "8"],
            &["3", "4", "5", "6"],
        ],
    )
}

/// A (9,9,3,3)-configuration on points 1..9.
fn config_9_9_3_3() -> SetSystem {
    of_str_blocks(
        "config-9-9-3-3",
        digit_points(9, 1),
        &[
            &["1", "4", "7"],
            &["2", "5", "8"],
            &["3", "6", "9"],
            &["1", "5", "9"],
            &["2", "6", "7"],
            &["3", "4", "8"],
            &["1", "6", "8"],
            &["2", "4", "9"],
            &["3", "5", "7"],
        ],
    )
}

/// A (5,5,3,3)-1 design (regular and uniform, pair counts 1 or 2).
fn design_5_5_3_3() -> SetSystem {
    of_str_blocks(
        "design-5-5-3-3",
        digit_points(5, 1),
        &[
            &["1", "2", "3"],
            &["4", "5", "1"],
            &["2", "3", "4"],
            &["5", "1", "2"],
            &["3", "4", "5"],
        ],
    )
}

/// A PBD with λ = 2 and mixed block sizes on points 1..5.
fn pbd_lambda_2() -> SetSystem {
    of_str_blocks(
        "pbd-lambda-2",
        digit_points(5, 1),
        &[
            &["1", "2"],
            &["2", "5"],
            &["1", "3", "5"],
            &["1", "4", "5"],
            &["1", "2", "3", "4"],
            &["2", "3", "4", "5"],
        ],
    )
}

/// A covering design on 7 points with block sizes 2..5: neither uniform nor
/// regular.
fn covering_7_8() -> SetSystem {
    of_str_blocks(
        "covering-7-8",
        digit_points(7, 1),
        &[
            &["1", "3"],
            &["2", "3"],
            &["1", "5", "7"],
            &["1", "2", "4"],
            &["3", "4", "7"],
            &["3", "5", "6"],
            &["2", "5", "6", "7"],
            &["1", "4", "5", "6", "7"],
        ],
    )
}

/// The λ = 2 supersimple BIBD on 7 points: two cyclic block families whose
/// blocks pairwise meet in at most two points.
fn supersimple_7_14_6_3_2() -> SetSystem {
    let points = digit_points(7, 0);
    let mut blocks: Vec<Vec<String>> = Vec::new();
    for base in [[1u32, 2, 4], [3, 5, 6]] {
        for i in 0..7u32 {
            let mut members: Vec<u32> = base.iter().map(|x| (x + i) % 7).collect();
            members.sort_unstable();
            blocks.push(members.iter().map(|m| m.to_string()).collect());
        }
    }
    SetSystem::new("supersimple-7-14-6-3-2", points, blocks).expect("fixture is valid")
}

/// The Fano base blown up with anonymity classes of size 3 (21 users).
fn t3_fano() -> SetSystem {
    let base = fano();
    let classes: Vec<Vec<String>> = (1..=7)
        .map(|i| vec![format!("U{i}a"), format!("U{i}b"), format!("U{i}c")])
        .collect();
    let partition = AnonymityPartition::new(classes).expect("classes are disjoint");
    build_t_anonymity(&base, &partition)
        .expect("fano is covering")
        .renamed("t3-fano")
}

/// Returns the named built-in design, or `None` for an unknown name.
pub fn fixture(name: &str) -> Option<SetSystem> {
    let s = match name {
        "fano" => fano(),
        "fano-diffset" => develop_difference_set(&[1, 2, 4], 7)
            .expect("valid base")
            .renamed("fano-diffset"),
        "config-12-8-2-3" => config_12_8_2_3(),
        "bibd-10-15-6-4-2" => bibd_10_15_6_4_2(),
        "config-9-9-3-3" => config_9_9_3_3(),
        "design-5-5-3-3" => design_5_5_3_3(),
        "pbd-lambda-2" => pbd_lambda_2(),
        "covering-7-8" => covering_7_8(),
        "sbibd-15-15-7-7-3" => develop_difference_set(&[0, 1, 2, 4, 5, 8, 10], 15)
            .expect("valid base")
            .renamed("sbibd-15-15-7-7-3"),
        "supersimple-7-14-6-3-2" => supersimple_7_14_6_3_2(),
        "t3-fano" => t3_fano(),
        _ => return None,
    };
    Some(s)
}
