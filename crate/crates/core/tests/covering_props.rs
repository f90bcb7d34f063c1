//! Property tests for the covering stack: greedy Vitali postconditions, the
//! 3-expansion cover, measured coverage fractions, fill monotonicity, and
//! the maximal-ball absorption property of expanding towers.

use std::sync::OnceLock;

use proptest::prelude::*;

use upcross_core::cayley::{Element, GroupModel, NormTable};
use upcross_core::covering::{
    check_delta_fill, finitary_vitali, maximal_balls, measured_vitali, Ball, BallCollection,
    BallSpace, Tower, WindowSpace,
};

fn z1_table() -> &'static NormTable {
    static TABLE: OnceLock<NormTable> = OnceLock::new();
    TABLE.get_or_init(|| NormTable::build(&GroupModel::zd_standard(1), 80).unwrap())
}

fn z2_table() -> &'static NormTable {
    static TABLE: OnceLock<NormTable> = OnceLock::new();
    TABLE.get_or_init(|| NormTable::build(&GroupModel::zd_box(2), 40).unwrap())
}

fn heis_table() -> &'static NormTable {
    static TABLE: OnceLock<NormTable> = OnceLock::new();
    TABLE.get_or_init(|| NormTable::build(&GroupModel::heisenberg(), 14).unwrap())
}

fn el(coords: &[i64]) -> Element {
    Element::new(coords.to_vec())
}

/// Balls with centers in a small box and radii in [0, r_max], some of them
/// fractional.
fn z1_balls(r_max: f64) -> impl Strategy<Value = Vec<Ball>> {
    prop::collection::vec((-20i64..=20, 0u32..=(r_max as u32), prop::bool::ANY), 1..10).prop_map(
        |items| {
            items
                .into_iter()
                .map(|(c, r, frac)| Ball::new(el(&[c]), r as f64 + if frac { 0.5 } else { 0.0 }))
                .collect()
        },
    )
}

fn z2_balls() -> impl Strategy<Value = Vec<Ball>> {
    prop::collection::vec((-8i64..=8, -8i64..=8, 0u32..=5), 1..8).prop_map(|items| {
        items
            .into_iter()
            .map(|(x, y, r)| Ball::new(el(&[x, y]), r as f64))
            .collect()
    })
}

fn heis_balls() -> impl Strategy<Value = Vec<Ball>> {
    prop::collection::vec((-2i64..=2, -2i64..=2, -2i64..=2, 0u32..=3), 1..6).prop_map(|items| {
        items
            .into_iter()
            .map(|(a, b, c, r)| Ball::new(el(&[a, b, c]), r as f64))
            .collect()
    })
}

/// The Vitali postconditions, checked exactly: disjoint output, every input
/// ball meets an accepted ball of at least its radius, and the 3-expansions
/// of the output cover the input union. No growth hypothesis is needed, so
/// the Heisenberg group is fair game.
fn assert_vitali_postconditions(balls: Vec<Ball>, table: &NormTable) {
    let space = WindowSpace::new(table);
    let input = BallCollection::new(balls);
    let out = finitary_vitali(&input, &space).unwrap();

    for (i, a) in out.balls().iter().enumerate() {
        for b in &out.balls()[i + 1..] {
            assert!(space.disjoint(a, b).unwrap(), "{a} and {b} overlap");
        }
    }
    for ball in input.iter() {
        let partner = out
            .iter()
            .find(|o| o.radius >= ball.radius && !space.disjoint(o, ball).unwrap());
        assert!(partner.is_some(), "{ball} meets no larger accepted ball");
    }
    for ball in input.iter() {
        for p in space.points(ball).unwrap() {
            let covered = out
                .iter()
                .any(|o| space.contains_point(&o.scaled(3.0).unwrap(), &p).unwrap());
            assert!(covered, "point {p} of {ball} escapes the 3-expansions");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn vitali_postconditions_z1(balls in z1_balls(8.0)) {
        assert_vitali_postconditions(balls, z1_table());
    }

    #[test]
    fn vitali_postconditions_z2_box(balls in z2_balls()) {
        assert_vitali_postconditions(balls, z2_table());
    }

    #[test]
    fn vitali_postconditions_heisenberg(balls in heis_balls()) {
        assert_vitali_postconditions(balls, heis_table());
    }

    /// Measured coverage: with every radius at or above the certified
    /// threshold (1 for Z^1), the selected disjoint union covers at least
    /// 3^{-(q+1)} = 1/9 of the input union, by exact counting.
    #[test]
    fn measured_vitali_fraction_z1(balls in prop::collection::vec((-20i64..=20, 1u32..=8), 1..12)) {
        let balls: Vec<Ball> = balls
            .into_iter()
            .map(|(c, r)| Ball::new(el(&[c]), r as f64))
            .collect();
        let space = WindowSpace::new(z1_table());
        let m = measured_vitali(&BallCollection::new(balls), 1, &space, Some(1.0)).unwrap();
        prop_assert!(m.certified);
        prop_assert!(&m.selected_measure * 9u32 >= m.input_union_measure);
    }

    /// check_delta_fill is monotone in delta.
    #[test]
    fn delta_fill_monotone(
        parts in prop::collection::vec((-6i64..=6, 0u32..=2), 1..5),
        d1 in 0.01f64..0.9,
        bump in 0.01f64..0.5,
    ) {
        let table = z1_table();
        let space = WindowSpace::new(table);
        let target = Ball::new(el(&[0]), 8.0);
        // Greedily keep a disjoint subset of the generated parts.
        let mut kept: Vec<Ball> = Vec::new();
        'outer: for (c, r) in parts {
            let b = Ball::new(el(&[c]), r as f64);
            if !space.contains(&target, &b).unwrap() {
                continue;
            }
            for k in &kept {
                if !space.disjoint(k, &b).unwrap() {
                    continue 'outer;
                }
            }
            kept.push(b);
        }
        let kept = BallCollection::new(kept);
        let at_d1 = check_delta_fill(&target, &kept, d1, &space).unwrap();
        let at_d2 = check_delta_fill(&target, &kept, d1 + bump, &space).unwrap();
        prop_assert!(!at_d1 || at_d2, "fill at {d1} but not at {}", d1 + bump);
    }
}

/// Expanding towers absorb lower-level neighbors: for a (1 + 4/eps)-expanding
/// tower, any lower-level ball that meets a maximal higher-level ball V lies
/// inside V^eps. Exact point-set check on sampled instances.
#[test]
fn expanding_tower_absorption() {
    let table = NormTable::build(&GroupModel::zd_standard(1), 220).unwrap();
    let space = WindowSpace::new(&table);
    let eps = 0.9f64;
    let factor = 2.0 + 4.0 / eps + 0.5; // one hair past the required expansion

    let bases: Vec<Vec<i64>> = vec![vec![-9, 0, 7], vec![-12, -2, 3, 11], vec![0, 1]];
    for base_coords in bases {
        let base: Vec<Element> = base_coords.iter().map(|&c| el(&[c])).collect();
        let radii: Vec<Vec<f64>> = base_coords
            .iter()
            .enumerate()
            .map(|(j, _)| {
                let r1 = 1.0 + j as f64 * 0.25;
                vec![r1, r1 * factor, r1 * factor * factor]
            })
            .collect();
        let tower = Tower::centered(base, radii).unwrap();
        assert!(tower.is_delta_expanding(1.0 + 4.0 / eps, &space).unwrap());

        for j in 2..=tower.height() {
            let maximal =
                maximal_balls(&BallCollection::new(tower.level(j).to_vec()), &space).unwrap();
            for i in 1..j {
                for u in tower.level(i) {
                    for v in maximal.iter() {
                        if space.disjoint(u, v).unwrap() {
                            continue;
                        }
                        let expanded = v.expanded(eps).unwrap();
                        assert!(
                            space.contains(&expanded, u).unwrap(),
                            "{u} meets maximal {v} but is not inside its eps-expansion"
                        );
                    }
                }
            }
        }
    }
}

/// Norm axioms on a handful of custom inverse-closed generating sets.
#[test]
fn norm_axioms_on_custom_generators() {
    let gen_sets: Vec<Vec<Vec<i64>>> = vec![
        vec![
            vec![1, 0],
            vec![-1, 0],
            vec![0, 1],
            vec![0, -1],
            vec![2, 1],
            vec![-2, -1],
        ],
        vec![vec![1, 1], vec![-1, -1], vec![1, -2], vec![-1, 2]],
    ];
    for gens in gen_sets {
        let model = GroupModel::zd_custom(2, gens.into_iter().map(Element::new).collect(), Some(2))
            .unwrap();
        let table = NormTable::build(&model, 8).unwrap();
        let ball = table.ball(&model.identity(), 4.0).unwrap();
        for g in &ball {
            let ng = table.word_norm(g).unwrap();
            assert_eq!(ng == 0, *g == model.identity());
            let inv = model.inverse(g).unwrap();
            assert_eq!(table.word_norm(&inv).unwrap(), ng);
            for h in ball.iter().take(20) {
                let gh = model.multiply(g, h).unwrap();
                if let Ok(ngh) = table.word_norm(&gh) {
                    assert!(ngh <= ng + table.word_norm(h).unwrap());
                }
            }
        }
    }
}
