mod common;

use common::*;
use gvrn::codec::*;
use gvrn::snapshot_query::{top_k, Query};
use gvrn::Error;

#[test]
fn round_trip_preserves_answers_and_bytes() {
    let mut rng = rng(70);
    for _ in 0..3 {
        let inst = random_instance(&mut rng, InstanceSpec::default());
        let bytes = serialize(&inst.index);
        assert_eq!(&bytes[..4], MAGIC);
        let back = deserialize(&bytes).unwrap();
        assert_eq!(serialize(&back), bytes);
        assert_eq!(back.diameter(), inst.index.diameter());
        assert_eq!(back.gtree().config(), inst.tree().config());
        for _ in 0..100 {
            let k = *pick(&mut rng, &[1usize, 5, 10]);
            let mu = *pick(&mut rng, &[0.0, 0.5, 1.0]);
            let q = Query::new(
                dyadic_position(&mut rng, inst.net()),
                random_words(&mut rng, 60, 6),
                k,
                inst.index.params(mu).unwrap(),
            )
            .unwrap();
            assert_eq!(top_k(&back, &q).unwrap(), top_k(&inst.index, &q).unwrap());
        }
    }
}

#[test]
fn file_round_trip() {
    let mut rng = rng(71);
    let inst = random_instance(&mut rng, InstanceSpec::default());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("index.vigt");
    write_index(&inst.index, &path).unwrap();
    let back = read_index(&path).unwrap();
    assert_eq!(serialize(&back), serialize(&inst.index));
    assert!(matches!(read_index(&dir.path().join("missing")), Err(Error::Io(_))));
}

#[test]
fn damage_is_detected() {
    let mut rng = rng(72);
    let inst = random_instance(&mut rng, InstanceSpec::default());
    let bytes = serialize(&inst.index);
    for at in [12, bytes.len() / 2, bytes.len() - 1] {
        let mut bad = bytes.clone();
        bad[at] ^= 0x40;
        assert!(matches!(deserialize(&bad), Err(Error::Checksum)), "flip at {at}");
    }
    assert!(matches!(deserialize(&bytes[..bytes.len() - 10]), Err(Error::Checksum)));
    let mut newer = bytes.clone();
    newer[4] = 2;
    assert!(matches!(deserialize(&newer), Err(Error::Version(_))));
}

#[test]
fn network_hash_tracks_network_content() {
    let mut rng = rng(73);
    let a = random_network(&mut rng, 30, 5, 9);
    let b = random_network(&mut rng, 30, 5, 9);
    assert_eq!(network_hash(&a), network_hash(&a.clone()));
    assert_ne!(network_hash(&a), network_hash(&b));
    assert_eq!(network_hash(&a).len(), 64);
}
