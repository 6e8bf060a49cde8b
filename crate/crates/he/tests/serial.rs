use hedgerow_he::serial::{peek_type, ObjectType, MAGIC};
use hedgerow_he::{keygen, Ciphertext, EvalKeys, HeContext, HeError, HeParams, PackedPlaintext, PublicKey, SecretKey};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn setup() -> (HeContext, SecretKey, PublicKey, EvalKeys) {
    let params = HeParams::generate("serial", 64, &[50, 50], 20, 2, &[64]).unwrap();
    let ctx = HeContext::new(params).unwrap();
    let (sk, pk, ek) = keygen(&ctx, [1; 32]);
    (ctx, sk, pk, ek)
}

fn all_containers() -> (HeParams, Vec<Vec<u8>>) {
    let (ctx, sk, pk, ek) = setup();
    let pt = PackedPlaintext::encode(&[1, -2, 3], ctx.params()).unwrap();
    let ct = ctx.encrypt(&pk, &pt, &mut ChaCha20Rng::seed_from_u64(0)).unwrap();
    let bytes = vec![sk.to_bytes(), pk.to_bytes(), ek.to_bytes(), pt.to_bytes(), ct.to_bytes()];
    (ctx.params().clone(), bytes)
}

#[test]
fn every_type_roundtrips_byte_identically() {
    let (params, bytes) = all_containers();
    let re = [
        SecretKey::from_bytes(&bytes[0], &params).unwrap().to_bytes(),
        PublicKey::from_bytes(&bytes[1], &params).unwrap().to_bytes(),
        EvalKeys::from_bytes(&bytes[2], &params).unwrap().to_bytes(),
        PackedPlaintext::from_bytes(&bytes[3], &params).unwrap().to_bytes(),
        Ciphertext::from_bytes(&bytes[4], &params).unwrap().to_bytes(),
    ];
    for (a, b) in bytes.iter().zip(&re) {
        assert_eq!(a, b);
    }
    let tags: Vec<u8> = bytes.iter().map(|b| peek_type(b).unwrap()).collect();
    assert_eq!(tags, [1, 2, 3, 4, 5]);
    assert_eq!(HeParams::from_text(&params.to_text()).unwrap().to_text(), params.to_text());
}

#[test]
fn header_layout() {
    let (params, bytes) = all_containers();
    let ct = &bytes[4];
    assert_eq!(&ct[..4], MAGIC);
    assert_eq!(ct[4], 1);
    assert_eq!(ct[5], ObjectType::Ciphertext as u8);
    assert_eq!(&ct[6..38], &params.fingerprint().0);
    let words: Vec<u64> = ct[38..]
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    // aux count, level, part count, then 2 parts of L·N residues
    assert_eq!(&words[..3], &[1, 2, 2]);
    assert_eq!(words.len(), 3 + 2 * 2 * 64);
}

#[test]
fn reloaded_ciphertext_decrypts() {
    let (ctx, sk, pk, _) = setup();
    let pt = PackedPlaintext::encode(&[9, 8, -7], ctx.params()).unwrap();
    let ct = ctx.encrypt(&pk, &pt, &mut ChaCha20Rng::seed_from_u64(5)).unwrap();
    let sk2 = SecretKey::from_bytes(&sk.to_bytes(), ctx.params()).unwrap();
    let ct2 = Ciphertext::from_bytes(&ct.to_bytes(), ctx.params()).unwrap();
    assert_eq!(ctx.decrypt(&sk2, &ct2).unwrap(), pt);
}

#[test]
fn truncation_is_an_error_not_a_panic() {
    let (params, bytes) = all_containers();
    for b in &bytes {
        let cuts = (0..60).chain((60..b.len()).step_by(97)).chain([b.len() - 1]);
        for cut in cuts {
            let tag = b[5];
            let r = match tag {
                1 => SecretKey::from_bytes(&b[..cut], &params).map(|_| ()),
                2 => PublicKey::from_bytes(&b[..cut], &params).map(|_| ()),
                3 => EvalKeys::from_bytes(&b[..cut], &params).map(|_| ()),
                4 => PackedPlaintext::from_bytes(&b[..cut], &params).map(|_| ()),
                _ => Ciphertext::from_bytes(&b[..cut], &params).map(|_| ()),
            };
            assert!(r.is_err(), "tag {tag} cut {cut}");
        }
    }
}

#[test]
fn header_errors() {
    let (params, bytes) = all_containers();
    let ct = &bytes[4];

    let mut bad = ct.clone();
    bad[0] = b'X';
    assert!(matches!(Ciphertext::from_bytes(&bad, &params), Err(HeError::BadMagic)));

    let mut bad = ct.clone();
    bad[4] = 9;
    assert!(matches!(Ciphertext::from_bytes(&bad, &params), Err(HeError::UnsupportedVersion(9))));

    let mut bad = ct.clone();
    bad[10] ^= 1;
    assert!(matches!(Ciphertext::from_bytes(&bad, &params), Err(HeError::FingerprintMismatch)));

    assert!(matches!(
        PublicKey::from_bytes(ct, &params),
        Err(HeError::WrongObjectType { found: 5, .. })
    ));

    let mut bad = ct.clone();
    bad.push(0);
    assert!(matches!(Ciphertext::from_bytes(&bad, &params), Err(HeError::Format(_))));

    let other = HeParams::generate("other", 64, &[50, 50], 20, 1, &[64]).unwrap();
    assert!(matches!(Ciphertext::from_bytes(ct, &other), Err(HeError::FingerprintMismatch)));
}

#[test]
fn out_of_range_residue_is_rejected() {
    let (params, bytes) = all_containers();
    let mut bad = bytes[4].clone();
    let last = bad.len() - 8;
    bad[last..].copy_from_slice(&u64::MAX.to_le_bytes());
    assert!(Ciphertext::from_bytes(&bad, &params).is_err());
}
