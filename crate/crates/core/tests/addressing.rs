use std::collections::{BTreeMap, BTreeSet};

use dendrite::addressing::{apply_map, canonicalize, cell_intersection, Corner, IntersectionKind, VertexId, Word};

const CORNERS: [Corner; 3] = [Corner::Q1, Corner::Q2, Corner::Q3];

#[test]
fn canonicalize_is_idempotent_up_to_length_six() {
    for len in 0..=6 {
        for w in Word::all_of_length(len) {
            for c in CORNERS {
                let v = canonicalize(&w, c);
                assert_eq!(canonicalize(v.word(), v.corner()), v, "{w}:{c:?}");
            }
        }
    }
}

#[test]
fn normal_forms_match_coordinates_up_to_length_six() {
    let mut seen: BTreeMap<VertexId, (f64, f64)> = BTreeMap::new();
    for len in 0..=6 {
        for w in Word::all_of_length(len) {
            for c in CORNERS {
                let p = apply_map(&w, c.coords());
                let v = canonicalize(&w, c);
                let q = *seen.entry(v.clone()).or_insert(p);
                assert!((p.0 - q.0).hypot(p.1 - q.1) < 1e-9, "{w}:{c:?} vs {v}");
                let r = v.coords();
                assert!((p.0 - r.0).hypot(p.1 - r.1) < 1e-9);
            }
        }
    }
    let pts: Vec<(f64, f64)> = seen.values().cloned().collect();
    let mut sorted = pts.clone();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    for i in 0..sorted.len() {
        for j in i + 1..sorted.len() {
            if sorted[j].0 - sorted[i].0 > 1e-9 {
                break;
            }
            assert!((sorted[j].1 - sorted[i].1).abs() >= 1e-9, "two normal forms at {:?}", sorted[i]);
        }
    }
}

#[test]
fn intersection_is_symmetric_up_to_depth_four() {
    let words: Vec<Word> = (0..=4).flat_map(Word::all_of_length).collect();
    for a in &words {
        for b in &words {
            assert_eq!(cell_intersection(a, b), cell_intersection(b, a), "{a} {b}");
        }
    }
}

/// At equal depth a cell touches its neighbours only at its own corners,
/// and cells meeting at a point all meet each other there. `q1` is fixed by
/// both `F_0` and `F_1`, so every cell of `{0,1}^L` shares it.
#[test]
fn equal_depth_contacts_up_to_depth_five() {
    for depth in 1..=5 {
        let words: Vec<Word> = Word::all_of_length(depth).collect();
        let mut at_point: BTreeMap<VertexId, BTreeSet<&Word>> = BTreeMap::new();
        for (i, a) in words.iter().enumerate() {
            let corners: BTreeSet<VertexId> = CORNERS.iter().map(|&c| canonicalize(a, c)).collect();
            for b in &words[i + 1..] {
                match cell_intersection(a, b) {
                    IntersectionKind::Point(p) => {
                        assert!(corners.contains(&p), "{a} meets {b} at {p}, not a corner");
                        assert!(CORNERS.iter().any(|&c| canonicalize(b, c) == p));
                        at_point.entry(p).or_default().extend([a, b]);
                    }
                    IntersectionKind::Disjoint => {}
                    IntersectionKind::Nested { .. } => panic!("distinct words of equal length nest"),
                }
            }
        }
        for (p, cells) in &at_point {
            let cells: Vec<&&Word> = cells.iter().collect();
            for (i, a) in cells.iter().enumerate() {
                for b in &cells[i + 1..] {
                    assert_eq!(cell_intersection(a, b), IntersectionKind::Point(p.clone()));
                }
            }
        }
        let q1_cells = at_point.get(&VertexId::q1()).map_or(0, |c| c.len());
        assert_eq!(q1_cells, 1 << depth);
    }
}
