use std::path::Path;

use gridshare_core::feeder::{
    enumerate_partitions, load_switch_config, partition, read_house_map, FeederTopology, SwitchState, SwitchStates,
};
use proptest::prelude::*;

fn asset_dir() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../assets/ieee123"))
}

/// Random topology: a spanning path plus extra pairs; a random subset of
/// edges are switches.
fn topology() -> impl Strategy<Value = (FeederTopology, Vec<bool>)> {
    (2usize..12)
        .prop_flat_map(|n| {
            let extra = prop::collection::vec((0..n, 0..n), 0..10);
            let kinds = prop::collection::vec(any::<bool>(), n - 1 + 10);
            let states = prop::collection::vec(any::<bool>(), n - 1 + 10);
            (Just(n), extra, kinds, states)
        })
        .prop_map(|(n, extra, kinds, states)| {
            let mut pairs: Vec<(usize, usize)> = (1..n).map(|i| (i - 1, i)).collect();
            for (a, b) in extra {
                let p = (a.min(b), a.max(b));
                if a != b && !pairs.contains(&p) {
                    pairs.push(p);
                }
            }
            let mut lines = Vec::new();
            let mut switches = Vec::new();
            for (i, &(a, b)) in pairs.iter().enumerate() {
                if kinds[i] {
                    switches.push((format!("s{i}"), a.to_string(), b.to_string()));
                } else {
                    lines.push((a.to_string(), b.to_string()));
                }
            }
            let k = switches.len();
            let t = FeederTopology::new((0..n).map(|i| i.to_string()), lines, switches).unwrap();
            (t, states[..k].to_vec())
        })
}

fn states_of(t: &FeederTopology, closed: &[bool]) -> SwitchStates {
    t.switches()
        .iter()
        .zip(closed)
        .map(|(s, &c)| (s.label.clone(), if c { SwitchState::Closed } else { SwitchState::Open }))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn partition_properties((t, closed) in topology()) {
        let st = states_of(&t, &closed);
        let p = partition(&t, &st).unwrap();
        prop_assert_eq!(&p, &partition(&t, &st).unwrap());
        let mut all: Vec<&String> = p.blocks.iter().flatten().collect();
        all.sort();
        all.dedup();
        prop_assert_eq!(all.len(), t.nodes().len());
        prop_assert_eq!(p.blocks.iter().map(Vec::len).sum::<usize>(), t.nodes().len());
        for (i, s) in t.switches().iter().enumerate() {
            if closed[i] {
                let mut opened = st.clone();
                opened.insert(s.label.clone(), SwitchState::Open);
                prop_assert!(partition(&t, &opened).unwrap().len() >= p.len());
            }
        }
    }

    #[test]
    fn enumeration_is_distinct_and_stable((t, _) in topology()) {
        let all = enumerate_partitions(&t, usize::MAX).unwrap();
        prop_assert!(all.len() <= 1 << t.switches().len());
        let mut blocks: Vec<_> = all.iter().map(|p| p.blocks.clone()).collect();
        blocks.sort();
        blocks.dedup();
        prop_assert_eq!(blocks.len(), all.len());
        prop_assert_eq!(&all, &enumerate_partitions(&t, usize::MAX).unwrap());
    }
}

#[test]
fn bundled_feeder_default_configuration() {
    let t = FeederTopology::load_dir(asset_dir()).unwrap();
    assert_eq!(t.switches().len(), 11);
    let p = partition(&t, &load_switch_config(asset_dir(), "default").unwrap()).unwrap();
    assert_eq!(p.len(), 7);
    let normal = partition(&t, &load_switch_config(asset_dir(), "normal").unwrap()).unwrap();
    assert!(normal.len() < p.len());
    let houses = read_house_map(&asset_dir().join("houses.csv"), &t).unwrap();
    let in_block = |b: usize| houses.values().filter(|n| p.block_of(n) == Some(b)).count();
    assert_eq!(houses.len(), 340);
    assert_eq!(in_block(2), 48);
    assert_eq!(enumerate_partitions(&t, usize::MAX).unwrap().len() <= 2048, true);
}
