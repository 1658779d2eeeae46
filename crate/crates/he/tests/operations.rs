use hecnn_he::{Backend, HeContext, HeError, HeParams};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn contexts(p: u64, levels: u32) -> Vec<HeContext> {
    vec![
        HeContext::new(HeParams::simulator(p, levels, 16)).unwrap(),
        HeContext::new(HeParams::rlwe(p, levels, 16)).unwrap(),
    ]
}

fn rng() -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(7)
}

#[test]
fn addition_examples() {
    for ctx in contexts(97, 2) {
        let k = ctx.keygen(b"add");
        let mut r = rng();
        let a = ctx.encrypt(&k.public, &[1, 2], &mut r).unwrap();
        let b = ctx.encrypt(&k.public, &[3, 4], &mut r).unwrap();
        let s = ctx.add(&a, &b).unwrap();
        assert_eq!(&ctx.decrypt(&k.secret, &s).unwrap()[..3], &[4, 6, 0]);

        let a = ctx.encrypt(&k.public, &[96, 0], &mut r).unwrap();
        let b = ctx.encrypt(&k.public, &[5, 0], &mut r).unwrap();
        assert_eq!(&ctx.decrypt(&k.secret, &ctx.add(&a, &b).unwrap()).unwrap()[..2], &[4, 0]);

        let a = ctx.encrypt(&k.public, &[7], &mut r).unwrap();
        assert_eq!(ctx.decrypt(&k.secret, &ctx.add_plain(&a, &[90]).unwrap()).unwrap()[0], 0);
        assert!(s.noise_budget() >= a.noise_budget() - 1.0 - 1e-9);
    }
}

#[test]
fn multiplication_examples() {
    for ctx in contexts(97, 2) {
        let k = ctx.keygen(b"mul");
        let mut r = rng();
        let a = ctx.encrypt(&k.public, &[2, 3], &mut r).unwrap();
        let b = ctx.encrypt(&k.public, &[5, 7], &mut r).unwrap();
        let m = ctx.mul(&a, &b, &k.eval).unwrap();
        assert_eq!(&ctx.decrypt(&k.secret, &m).unwrap()[..2], &[10, 21]);
        assert_eq!(m.level(), 1);

        let c = ctx.encrypt(&k.public, &[50], &mut r).unwrap();
        let d = ctx.mul_plain(&c, &[2]).unwrap();
        assert_eq!(ctx.decrypt(&k.secret, &d).unwrap()[0], 3);
        assert_eq!(d.level(), c.level());
    }
}

#[test]
fn level_chain_then_rejection() {
    let levels = 6;
    for ctx in [
        HeContext::new(HeParams::simulator(97, levels, 16)).unwrap(),
        HeContext::new(HeParams::rlwe(65537, levels, 1024)).unwrap(),
    ] {
        let k = ctx.keygen(b"chain");
        let mut r = rng();
        let x = ctx.encrypt(&k.public, &[3, 5], &mut r).unwrap();
        let mut acc = x.clone();
        let mut want = [3u64, 5];
        let p = ctx.plain_modulus();
        for step in 0..levels {
            let fresh = ctx.encrypt(&k.public, &[3, 5], &mut r).unwrap();
            let before = acc.level();
            acc = ctx.mul(&acc, &fresh, &k.eval).unwrap();
            assert_eq!(acc.level(), before - 1, "step {step}");
            want = [want[0] * 3 % p, want[1] * 5 % p];
        }
        assert_eq!(&ctx.decrypt(&k.secret, &acc).unwrap()[..2], &want);
        let err = ctx.mul(&acc, &x, &k.eval).unwrap_err();
        assert!(matches!(err, HeError::LevelExhausted { level: 0, .. }), "{err}");
    }
}

#[test]
fn polynomial_examples() {
    for ctx in contexts(97, 2) {
        let k = ctx.keygen(b"poly");
        let mut r = rng();
        let x = ctx.encrypt(&k.public, &[3], &mut r).unwrap();
        let sq = ctx.eval_poly(&x, &[0, 0, 1], &k.eval).unwrap();
        assert_eq!(ctx.decrypt(&k.secret, &sq).unwrap()[0], 9);
        assert_eq!(sq.level(), x.level() - 1);

        // Degree 3 needs ceil(log2 3) = 2 levels, exactly what L = 2 provides.
        let cube = ctx.eval_poly(&x, &[1, 2, 3, 4], &k.eval).unwrap();
        assert_eq!(ctx.decrypt(&k.secret, &cube).unwrap()[0], (1 + 6 + 27 + 108) % 97);
        assert_eq!(cube.level(), 0);

        let lowered = ctx.mul(&x, &x, &k.eval).unwrap();
        assert!(matches!(
            ctx.eval_poly(&lowered, &[0, 0, 0, 1], &k.eval),
            Err(HeError::LevelExhausted { level: 1, needed: 2 })
        ));
        // Constant-only polynomial.
        let c = ctx.eval_poly(&x, &[42], &k.eval).unwrap();
        assert_eq!(ctx.decrypt(&k.secret, &c).unwrap()[0], 42);
    }
}

#[test]
fn random_cubic_matches_plaintext() {
    use rand::Rng;
    for ctx in contexts(97, 2) {
        let k = ctx.keygen(b"cubic");
        let mut r = rng();
        for _ in 0..5 {
            let coeffs: Vec<u64> = (0..4).map(|_| r.random_range(0..97)).collect();
            let slots: Vec<u64> = (0..16).map(|_| r.random_range(0..97)).collect();
            let x = ctx.encrypt(&k.public, &slots, &mut r).unwrap();
            let y = ctx.eval_poly(&x, &coeffs, &k.eval).unwrap();
            let want: Vec<u64> = slots
                .iter()
                .map(|&s| coeffs.iter().rev().fold(0, |a, &c| (a * s + c) % 97))
                .collect();
            assert_eq!(ctx.decrypt(&k.secret, &y).unwrap(), want);
        }
    }
}

#[test]
fn encryption_contract() {
    for ctx in contexts(97, 2) {
        let k = ctx.keygen(b"enc");
        let mut r = rng();
        let slots: Vec<u64> = (1..=16).collect();
        let a = ctx.encrypt(&k.public, &slots, &mut r).unwrap();
        let b = ctx.encrypt(&k.public, &slots, &mut r).unwrap();
        assert_ne!(a.to_bytes(), b.to_bytes());
        assert_eq!(ctx.decrypt(&k.secret, &a).unwrap(), slots);
        assert_eq!(ctx.decrypt(&k.secret, &b).unwrap(), slots);
        assert_eq!(a.level(), 2);
        assert!(a.noise_budget() > 0.0);

        let z = ctx.encrypt(&k.public, &[], &mut r).unwrap();
        assert_eq!(ctx.decrypt(&k.secret, &z).unwrap(), vec![0; 16]);

        assert!(matches!(
            ctx.encrypt(&k.public, &[1, 97], &mut r),
            Err(HeError::ValueOutOfRange { index: 1, value: 97, p: 97 })
        ));
        assert!(matches!(ctx.encrypt(&k.public, &[0; 17], &mut r), Err(HeError::TooManySlots { .. })));
        assert!(ctx.mul_scalar(&a, 97).is_err());
    }
}

#[test]
fn wrong_key_is_flagged() {
    for ctx in [
        HeContext::new(HeParams::simulator(65537, 2, 64)).unwrap(),
        HeContext::new(HeParams::rlwe(65537, 2, 1024)).unwrap(),
    ] {
        let k1 = ctx.keygen(b"alice");
        let k2 = ctx.keygen(b"bob");
        let ct = ctx.encrypt(&k1.public, &[1, 2, 3], &mut rng()).unwrap();
        let err = ctx.decrypt(&k2.secret, &ct).unwrap_err();
        match ctx.params().backend {
            Backend::Simulator => assert!(matches!(err, HeError::KeyMismatch(_))),
            Backend::Rlwe => assert!(matches!(err, HeError::NoiseExhausted { .. }), "{err}"),
        }
        assert_ne!(k1.secret.public_fingerprint(), k2.public.fingerprint());
        assert_eq!(k1.secret.public_fingerprint(), k1.public.fingerprint());
    }
}

#[test]
fn keygen_is_deterministic() {
    for ctx in contexts(97, 2) {
        let a = ctx.keygen(b"same seed");
        let b = ctx.keygen(b"same seed");
        let c = ctx.keygen(b"other seed");
        assert_eq!(a.secret.to_bytes(), b.secret.to_bytes());
        assert_eq!(a.public.to_bytes(), b.public.to_bytes());
        assert_eq!(a.eval.to_bytes(), b.eval.to_bytes());
        assert_ne!(a.public.to_bytes(), c.public.to_bytes());
    }
}

#[test]
fn rejected_parameters() {
    assert!(matches!(HeContext::new(HeParams::rlwe(17, 2, 16)), Err(HeError::InvalidParams(_))));
    assert!(HeContext::new(HeParams::rlwe(97, 2, 16)).is_ok());
    let mut narrow = HeParams::rlwe(65537, 6, 1024);
    narrow.modulus_words = Some(2);
    assert!(matches!(HeContext::new(narrow), Err(HeError::Capacity(_))));
}

#[test]
fn default_ring_degree_round_trip() {
    let ctx = HeContext::new(HeParams::default_rlwe()).unwrap();
    assert_eq!(ctx.slot_count(), 4096);
    let k = ctx.keygen(b"desk");
    let slots: Vec<u64> = (0..4096).map(|i| (i * 31 + 5) % 65537).collect();
    let ct = ctx.encrypt(&k.public, &slots, &mut rng()).unwrap();
    let sq = ctx.mul(&ct, &ct, &k.eval).unwrap();
    let want: Vec<u64> = slots.iter().map(|&x| x * x % 65537).collect();
    assert_eq!(ctx.decrypt(&k.secret, &sq).unwrap(), want);
}

#[test]
fn rotation_is_simulator_only() {
    let sim = HeContext::new(HeParams::simulator(97, 2, 4)).unwrap();
    let k = sim.keygen(b"rot");
    let ct = sim.encrypt(&k.public, &[1, 2, 3, 4], &mut rng()).unwrap();
    let r = sim.rotate(&ct, 1).unwrap();
    assert_eq!(sim.decrypt(&k.secret, &r).unwrap(), vec![2, 3, 4, 1]);
    assert_eq!(r.noise_budget(), ct.noise_budget() - 2.0);

    let rl = HeContext::new(HeParams::rlwe(97, 2, 16)).unwrap();
    let k = rl.keygen(b"rot");
    let ct = rl.encrypt(&k.public, &[1], &mut rng()).unwrap();
    assert!(matches!(rl.rotate(&ct, 1), Err(HeError::Unsupported(_))));
}

#[test]
fn simulator_noise_model_charges() {
    let ctx = HeContext::new(HeParams::simulator(97, 6, 4)).unwrap();
    let k = ctx.keygen(b"noise");
    let mut r = rng();
    let a = ctx.encrypt(&k.public, &[1], &mut r).unwrap();
    assert_eq!(a.noise_budget(), 120.0);
    assert_eq!(ctx.add(&a, &a).unwrap().noise_budget(), 119.0);
    assert_eq!(ctx.mul_plain(&a, &[2]).unwrap().noise_budget(), 117.0);
    assert_eq!(ctx.mul(&a, &a, &k.eval).unwrap().noise_budget(), 114.0);
    // Fused dot of 25 terms: one plaintext product and ceil(log2 25) = 5 additions.
    let cts = vec![&a; 25];
    assert_eq!(ctx.dot(&cts, &[1; 25], None).unwrap().noise_budget(), 112.0);
}

#[test]
fn fused_dot_matches_unfused() {
    for ctx in contexts(97, 2) {
        let k = ctx.keygen(b"dot");
        let mut r = rng();
        let cts: Vec<_> = (0..5u64).map(|i| ctx.encrypt(&k.public, &[i, 2 * i, 96], &mut r).unwrap()).collect();
        let ws = [3u64, 96, 0, 50, 1];
        let refs: Vec<_> = cts.iter().collect();
        let fused = ctx.dot(&refs, &ws, Some(11)).unwrap();
        let mut acc = ctx.mul_scalar(&cts[0], ws[0]).unwrap();
        for (c, &w) in cts.iter().zip(&ws).skip(1) {
            acc = ctx.add(&acc, &ctx.mul_scalar(c, w).unwrap()).unwrap();
        }
        acc = ctx.add_scalar(&acc, 11).unwrap();
        assert_eq!(ctx.decrypt(&k.secret, &fused).unwrap(), ctx.decrypt(&k.secret, &acc).unwrap());
        assert!(fused.noise_budget() <= cts[0].noise_budget());
    }
}
