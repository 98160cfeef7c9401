use nirb_core::basis::{Provenance, ReducedBasis};
use nirb_core::io::artifacts::{artifacts_from_bytes, artifacts_to_bytes, encode_basis, snapshots_from_bytes, snapshots_to_bytes};
use nirb_core::io::container::{encode, BLOCK_OVERHEAD, HEADER_BYTES};
use nirb_core::io::{load_artifacts, save_artifacts, StudyConfig};
use nirb_core::pipeline::{offline, OfflineArtifacts, Snapshots};
use nirb_core::NirbError;

fn small() -> (OfflineArtifacts, Snapshots) {
    let mut cfg = StudyConfig::heat_default();
    cfg.fine_n = 6;
    cfg.coarse_n = 3;
    cfg.fine_steps = 6;
    cfg.coarse_steps = 3;
    cfg.training = vec![vec![0.5], vec![2.0], vec![6.0]];
    offline(&cfg).unwrap()
}

#[test]
fn save_load_save_is_byte_identical() {
    let (art, _) = small();
    let dir = tempfile::tempdir().unwrap();
    let path = save_artifacts(dir.path(), &art).unwrap();
    let first = std::fs::read(&path).unwrap();
    let loaded = load_artifacts(dir.path()).unwrap();
    assert_eq!(loaded, art);
    save_artifacts(dir.path(), &loaded).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), first);
}

#[test]
fn snapshots_roundtrip() {
    let (_, snaps) = small();
    let bytes = snapshots_to_bytes(&snaps);
    let back = snapshots_from_bytes(&bytes).unwrap();
    assert_eq!(back, snaps);
    assert_eq!(snapshots_to_bytes(&back), bytes);
}

#[test]
fn truncation_names_the_section() {
    let (art, _) = small();
    let bytes = artifacts_to_bytes(&art);
    for cut in [bytes.len() - 3, bytes.len() / 2, 40] {
        let e = artifacts_from_bytes(&bytes[..cut]).unwrap_err();
        let msg = e.to_string();
        assert!(matches!(e, NirbError::Corrupt(_)), "{msg}");
        assert!(msg.contains("section") || msg.contains("header"), "{msg}");
    }
    let e = artifacts_from_bytes(&bytes[..bytes.len() - 3]).unwrap_err().to_string();
    assert!(e.contains("rectification"), "{e}");
    let e = artifacts_from_bytes(&bytes[..5]).unwrap_err().to_string();
    assert!(e.contains("truncated header"), "{e}");
}

#[test]
fn flipped_payload_bit_fails_checksum() {
    let (art, _) = small();
    let mut bytes = artifacts_to_bytes(&art);
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x10;
    let e = artifacts_from_bytes(&bytes).unwrap_err().to_string();
    assert!(e.contains("checksum"), "{e}");
}

#[test]
fn version_mismatch_is_refused() {
    let (art, _) = small();
    let mut bytes = artifacts_to_bytes(&art);
    bytes[4..8].copy_from_slice(&7u32.to_le_bytes());
    let e = artifacts_from_bytes(&bytes).unwrap_err();
    assert!(matches!(e, NirbError::Version { found: 7, expected: 1 }));
    assert_eq!(e.kind(), "version_mismatch");
}

#[test]
fn missing_file_reports_missing_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let e = load_artifacts(&dir.path().join("nothing")).unwrap_err();
    assert_eq!(e.kind(), "missing_artifacts");
}

#[test]
fn basis_file_size_follows_the_layout() {
    // N = 3 modes on a 9-node mesh, no eigenvalues: N, node count, 27 values, eigenvalue count.
    let modes = (0..3).map(|i| (0..9).map(|j| (i * 9 + j) as f64).collect()).collect();
    let b = ReducedBasis::new(modes, None, Provenance::default()).unwrap();
    let payload = encode_basis(&b);
    assert_eq!(payload.len(), 8 + 8 + 3 * 9 * 8 + 8);
    let file = encode(&[(*b"BASI", payload)]);
    assert_eq!(file.len(), HEADER_BYTES + BLOCK_OVERHEAD + 240);
    assert_eq!(file.len(), 268);
}

#[test]
fn swapped_mesh_is_inconsistent() {
    let (mut art, _) = small();
    std::mem::swap(&mut art.fine_mesh, &mut art.coarse_mesh);
    let e = artifacts_from_bytes(&artifacts_to_bytes(&art)).unwrap_err();
    assert_eq!(e.kind(), "inconsistent_artifacts");
}
