use hecnn_he::{HeContext, HeError, HeParams};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn contexts() -> Vec<HeContext> {
    vec![
        HeContext::new(HeParams::simulator(97, 3, 8)).unwrap(),
        HeContext::new(HeParams::rlwe(97, 3, 16)).unwrap(),
    ]
}

#[test]
fn ciphertext_round_trip() {
    for ctx in contexts() {
        let k = ctx.keygen(b"ser");
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let ct = ctx.encrypt(&k.public, &[5, 6, 7], &mut rng).unwrap();
        let ct = ctx.mul(&ct, &ct, &k.eval).unwrap();
        let bytes = ctx.serialize_ct(&ct);
        assert_eq!(&bytes[..4], b"CDL1");
        assert_eq!(bytes[4], ctx.params().backend.id());
        assert_eq!(u32::from_le_bytes(bytes[7..11].try_into().unwrap()), ct.level());
        let back = ctx.deserialize_ct(&bytes).unwrap();
        assert_eq!(back, ct);
        assert_eq!(back.to_bytes(), bytes);
        assert_eq!(&ctx.decrypt(&k.secret, &back).unwrap()[..3], &[25, 36, 49]);
    }
}

#[test]
fn keys_round_trip() {
    for ctx in contexts() {
        let k = ctx.keygen(b"keys");
        let sk = ctx.secret_key_from_bytes(&k.secret.to_bytes()).unwrap();
        let pk = ctx.public_key_from_bytes(&k.public.to_bytes()).unwrap();
        let ek = ctx.eval_key_from_bytes(&k.eval.to_bytes()).unwrap();
        assert_eq!(sk, k.secret);
        assert_eq!(pk, k.public);
        assert_eq!(ek, k.eval);
        assert!(ctx.public_key_from_bytes(&k.secret.to_bytes()).is_err());
    }
}

#[test]
fn params_mismatch_is_rejected() {
    let [sim, rlwe]: [HeContext; 2] = contexts().try_into().unwrap();
    let k = sim.keygen(b"x");
    let ct = sim.encrypt(&k.public, &[1], &mut ChaCha20Rng::seed_from_u64(0)).unwrap();
    assert!(matches!(rlwe.deserialize_ct(&ct.to_bytes()), Err(HeError::ParamsMismatch(_))));
    let other = HeContext::new(HeParams::simulator(97, 3, 4)).unwrap();
    assert!(other.deserialize_ct(&ct.to_bytes()).is_err());
}

#[test]
fn every_truncation_is_an_error() {
    for ctx in contexts() {
        let k = ctx.keygen(b"trunc");
        let ct = ctx.encrypt(&k.public, &[1, 2], &mut ChaCha20Rng::seed_from_u64(0)).unwrap();
        let bytes = ct.to_bytes();
        for cut in 0..bytes.len() {
            assert!(ctx.deserialize_ct(&bytes[..cut]).is_err(), "prefix {cut}");
        }
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(ctx.deserialize_ct(&extra).is_err());
    }
}

proptest! {
    #[test]
    fn arbitrary_bytes_never_panic(bytes in proptest::collection::vec(any::<u8>(), 0..256), flip in any::<(usize, u8)>()) {
        for ctx in contexts() {
            let _ = ctx.deserialize_ct(&bytes);
            let _ = ctx.secret_key_from_bytes(&bytes);
            let _ = ctx.eval_key_from_bytes(&bytes);
            let k = ctx.keygen(b"fuzz");
            let mut good = k.public.to_bytes();
            let i = flip.0 % good.len();
            good[i] ^= flip.1.max(1);
            let _ = ctx.public_key_from_bytes(&good);
        }
    }
}
