use std::cell::Cell;
use std::fs;

use pbt_core::la::{CMat, C64};
use pbt_core::store::{
    decode_matrix, encode_matrix, read_matrix, sidecar_path, write_matrix, Cache, CacheKey, Header, Labels, Lookup,
};
use proptest::prelude::*;

fn bits(m: &CMat) -> Vec<(u64, u64)> {
    m.iter().map(|z| (z.re.to_bits(), z.im.to_bits())).collect()
}

fn awkward() -> CMat {
    let vals = [
        0.1,
        -0.0,
        f64::MIN_POSITIVE / 3.0,
        f64::MAX,
        -1.0 / 3.0,
        f64::INFINITY,
        f64::NAN,
        1e-300,
        std::f64::consts::PI,
        -7.25,
        2f64.sqrt(),
        0.0,
    ];
    CMat::from_fn(2, 3, |r, c| C64::new(vals[2 * (r * 3 + c)], vals[2 * (r * 3 + c) + 1]))
}

#[test]
fn byte_layout_is_row_major_interleaved_little_endian() {
    let m = awkward();
    let bytes = encode_matrix(&m);
    let nl = bytes.iter().position(|&b| b == b'\n').unwrap();
    let header: serde_json::Value = serde_json::from_slice(&bytes[..nl]).unwrap();
    assert_eq!(header["rows"], 2);
    assert_eq!(header["cols"], 3);
    assert_eq!(header["dtype"], "complex-f64");
    assert_eq!(header["layout"], "row-major");
    assert_eq!(header["endianness"], "little");
    let data = &bytes[nl + 1..];
    assert_eq!(data.len(), 2 * 3 * 16);
    let mut k = 0;
    for r in 0..2 {
        for c in 0..3 {
            let re = u64::from_le_bytes(data[k..k + 8].try_into().unwrap());
            let im = u64::from_le_bytes(data[k + 8..k + 16].try_into().unwrap());
            assert_eq!((re, im), (m[(r, c)].re.to_bits(), m[(r, c)].im.to_bits()));
            k += 16;
        }
    }
}

#[test]
fn files_round_trip_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.mat");
    let m = awkward();
    let labels = Labels {
        rows: vec!["a".into(), "b".into()],
        cols: vec!["x".into(), "y".into(), "z".into()],
    };
    write_matrix(&path, &m, &labels).unwrap();
    assert!(sidecar_path(&path).ends_with("m.mat.json"));
    let back = read_matrix(&path).unwrap();
    assert_eq!(bits(&back.matrix), bits(&m));
    assert_eq!(back.labels, labels);
    assert_eq!(back.header, Header::for_matrix(&m));

    fs::remove_file(sidecar_path(&path)).unwrap();
    assert_eq!(read_matrix(&path).unwrap().labels, Labels::default());
    fs::write(sidecar_path(&path), b"{").unwrap();
    assert!(read_matrix(&path).is_err());
    assert!(read_matrix(&dir.path().join("absent.mat")).is_err());
}

#[test]
fn malformed_files_are_rejected() {
    let m = awkward();
    let good = encode_matrix(&m);
    assert!(decode_matrix(&good[..good.len() - 1]).is_err());
    let mut long = good.clone();
    long.push(0);
    assert!(decode_matrix(&long).is_err());
    assert!(decode_matrix(b"no newline").is_err());
    assert!(decode_matrix(b"not json\n").is_err());
    let text = String::from_utf8_lossy(&good[..good.iter().position(|&b| b == b'\n').unwrap()]).into_owned();
    for (from, to) in [("little", "big"), ("row-major", "col-major"), ("complex-f64", "f32")] {
        let mut bytes = text.replace(from, to).into_bytes();
        bytes.extend_from_slice(&good[text.len()..]);
        assert!(decode_matrix(&bytes).is_err(), "{to}");
    }
    let empty = CMat::zeros(0, 4);
    let (h, back) = decode_matrix(&encode_matrix(&empty)).unwrap();
    assert_eq!((h.rows, h.cols, h.payload_len()), (0, 4, 0));
    assert_eq!(back.shape(), (0, 4));
}

#[test]
fn cache_hits_misses_and_invalidation() {
    let dir = tempfile::tempdir().unwrap();
    let cache = Cache::new(dir.path().join("nested"));
    let key = CacheKey::new("schur", 4, 2, "v1");
    assert_eq!(cache.load(&key).unwrap(), Lookup::Missing);
    let mats = vec![awkward().map(|z| if z.re.is_nan() { C64::new(1.0, z.im) } else { z }), CMat::identity(3, 3)];
    let path = cache.save(&key, &mats).unwrap();
    assert!(path.starts_with(dir.path()));
    match cache.load(&key).unwrap() {
        Lookup::Hit(back) => {
            assert_eq!(back.len(), 2);
            for (a, b) in back.iter().zip(&mats) {
                assert_eq!(bits(a), bits(b));
            }
        }
        other => panic!("expected a hit, got {other:?}"),
    }

    let newer = CacheKey::new("schur", 4, 2, "v2");
    assert_ne!(newer.version, key.version);
    assert_eq!(cache.path(&newer), path);
    assert_eq!(cache.load(&newer).unwrap(), Lookup::Stale);

    let built = Cell::new(0);
    let got = cache
        .get_or_build(&newer, || {
            built.set(built.get() + 1);
            Ok(vec![CMat::zeros(1, 1)])
        })
        .unwrap();
    assert_eq!(built.get(), 1);
    assert_eq!(got, vec![CMat::zeros(1, 1)]);
    cache.get_or_build(&newer, || panic!("should hit")).unwrap();
    assert_eq!(cache.load(&key).unwrap(), Lookup::Stale);

    let mut bytes = fs::read(&path).unwrap();
    let last = bytes.len() - 1;
    bytes[last] ^= 1;
    fs::write(&path, &bytes).unwrap();
    assert_eq!(cache.load(&newer).unwrap(), Lookup::Corrupt);
    bytes.pop();
    fs::write(&path, &bytes).unwrap();
    assert_eq!(cache.load(&newer).unwrap(), Lookup::Corrupt);
    fs::write(&path, b"garbage").unwrap();
    assert_eq!(cache.load(&newer).unwrap(), Lookup::Corrupt);
    let rebuilt = cache.get_or_build(&newer, || Ok(vec![CMat::identity(2, 2)])).unwrap();
    assert_eq!(rebuilt, vec![CMat::identity(2, 2)]);
    assert_eq!(cache.load(&newer).unwrap(), Lookup::Hit(rebuilt));
}

#[test]
fn cache_keys_separate_sizes_and_modules() {
    let a = CacheKey::new("schur", 3, 2, "v1");
    let b = CacheKey::new("schur", 3, 3, "v1");
    let c = CacheKey::new("twisted", 3, 2, "v1");
    let cache = Cache::new("/tmp/unused");
    assert_ne!(cache.path(&a), cache.path(&b));
    assert_ne!(cache.path(&a), cache.path(&c));
    assert_eq!(a.version.len(), 64);
}

proptest! {
    #[test]
    fn random_matrices_round_trip(rows in 0usize..6, cols in 0usize..6, raw in proptest::collection::vec(any::<u64>(), 72)) {
        let m = CMat::from_fn(rows, cols, |r, c| {
            let k = 2 * (r * cols + c);
            C64::new(f64::from_bits(raw[k]), f64::from_bits(raw[k + 1]))
        });
        let bytes = encode_matrix(&m);
        let (h, back) = decode_matrix(&bytes).unwrap();
        prop_assert_eq!(bytes.len() - bytes.iter().position(|&b| b == b'\n').unwrap() - 1, h.payload_len());
        prop_assert_eq!(bits(&back), bits(&m));
    }
}
