use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::vectors::SampleNetwork;
use super::*;
use crate::crypto::Group;

fn net(params: &FormatParams, seed: u64) -> (SampleNetwork, ChaCha20Rng) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (SampleNetwork::new(params, &mut rng, 10), rng)
}

fn expectation_view(mat: &OnionMaterial) -> BasicView {
    let mut v = BasicView::default();
    if let Some(e) = mat.reply_expectation() {
        v.expectations.insert(e.ident.clone(), e);
    }
    v
}

#[test]
fn three_hop_forward_then_exit() {
    let p = FormatParams::default();
    let (net, mut rng) = net(&p, 1);
    let spec = net.spec(&p, &mut rng, 3, 2);
    let mut o = form_onion(&p, 1, &spec).unwrap();
    for i in 0..3 {
        let hop = &spec.forward[i];
        let r = proc_onion(&p, net.sk_of(&hop.name).unwrap(), &o, &hop.name, &mut BasicView::default());
        match r {
            ProcResult::Forward { onion, next_hop } => {
                assert!(i < 2);
                assert_eq!(next_hop, spec.forward[i + 1].name);
                o = onion;
            }
            ProcResult::Exit { message, receiver, reply } => {
                assert_eq!(i, 2);
                assert_eq!(message, spec.message);
                assert_eq!(receiver, spec.receiver);
                assert!(reply.is_some());
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}

#[test]
fn full_round_trip_all_lengths_both_groups() {
    for group in [Group::Ristretto255, Group::Toy11] {
        let p = FormatParams { group, ..FormatParams::default() };
        let (net, mut rng) = net(&p, 2);
        for n in 1..=p.max_hops {
            for nr in 0..=p.max_hops {
                let spec = net.spec(&p, &mut rng, n, nr);
                let mat = OnionMaterial::expand(&p, &spec).unwrap();
                let mut o = mat.layer(1).unwrap().clone();
                let mut exit_layer = None;
                for (i, hop) in spec.forward.iter().enumerate() {
                    if i == n - 1 {
                        exit_layer = Some(o.clone());
                    }
                    match proc_onion(&p, net.sk_of(&hop.name).unwrap(), &o, &hop.name, &mut NoReplay) {
                        ProcResult::Forward { onion, .. } => o = onion,
                        ProcResult::Exit { message, reply, .. } => {
                            assert_eq!(message, spec.message);
                            assert_eq!(reply.is_some(), nr > 0);
                        }
                        other => panic!("{other:?}"),
                    }
                }
                let exit = &spec.forward[n - 1].name;
                let reply = form_reply(&p, b"pong", exit_layer.as_ref().unwrap(), exit, net.sk_of(exit).unwrap());
                if nr == 0 {
                    assert_eq!(reply, Err(FailCode::NotRepliable));
                    continue;
                }
                let (mut ro, mut next) = reply.unwrap();
                assert_eq!(next, spec.reply[0].name);
                let mut view = expectation_view(&mat);
                for (i, hop) in spec.reply.iter().enumerate() {
                    assert_eq!(next, hop.name);
                    match proc_onion(&p, net.sk_of(&hop.name).unwrap(), &ro, &hop.name, &mut view) {
                        ProcResult::Forward { onion, next_hop } => {
                            assert!(i + 1 < nr);
                            ro = onion;
                            next = next_hop;
                        }
                        ProcResult::ReplyReceived { message, ident } => {
                            assert_eq!(i + 1, nr);
                            assert_eq!(message, b"pong");
                            assert_eq!(ident, mat.ident);
                        }
                        other => panic!("{other:?}"),
                    }
                }
            }
        }
    }
}

#[test]
fn dual_construction_including_reply_layers() {
    let p = FormatParams::default();
    let (net, mut rng) = net(&p, 3);
    for _ in 0..20 {
        let n = rng.gen_range(1..=5);
        let nr = rng.gen_range(0..=5);
        let spec = net.spec(&p, &mut rng, n, nr);
        let mat = OnionMaterial::expand(&p, &spec).unwrap();
        let hops: Vec<_> = spec.forward.iter().chain(spec.reply.iter()).collect();
        for i in 1..mat.layer_count() {
            if i == n {
                continue;
            }
            let hop = hops[i - 1];
            let r = proc_onion(&p, net.sk_of(&hop.name).unwrap(), mat.layer(i).unwrap(), &hop.name, &mut NoReplay);
            match r {
                ProcResult::Forward { onion, next_hop } => {
                    assert_eq!(&onion, mat.layer(i + 1).unwrap());
                    assert_eq!(next_hop, hops[i].name);
                }
                other => panic!("layer {i}: {other:?}"),
            }
        }
        if nr > 0 {
            let exit = &spec.forward[n - 1].name;
            let (ro, _) = form_reply(&p, &spec.message, mat.layer(n).unwrap(), exit, net.sk_of(exit).unwrap()).unwrap();
            assert_eq!(&ro, mat.layer(n + 1).unwrap());
        }
    }
}

#[test]
fn determinism_and_recognition() {
    let p = FormatParams::default();
    let (net, mut rng) = net(&p, 4);
    let spec = net.spec(&p, &mut rng, 4, 3);
    let other = net.spec(&p, &mut rng, 4, 3);
    for i in 1..=7 {
        let a = form_onion(&p, i, &spec).unwrap();
        assert_eq!(a, form_onion(&p, i, &spec).unwrap());
        assert!(recognize_onion(&p, i, &a, &spec).unwrap());
        let mut mask = vec![0u8; p.payload_len];
        mask[rng.gen_range(0..p.payload_len)] = 1;
        assert!(recognize_onion(&p, i, &tag_payload(&a, &mask).unwrap(), &spec).unwrap());
        assert!(!recognize_onion(&p, i, &form_onion(&p, i, &other).unwrap(), &spec).unwrap());
    }
    assert!(form_onion(&p, 0, &spec).is_err());
    assert!(form_onion(&p, 8, &spec).is_err());
}

#[test]
fn spec_validation() {
    let p = FormatParams::default();
    let (net, mut rng) = net(&p, 5);
    let mut s = net.spec(&p, &mut rng, 3, 0);
    s.forward.clear();
    assert!(OnionMaterial::expand(&p, &s).is_err());
    let mut s = net.spec(&p, &mut rng, 3, 0);
    s.forward.push(s.forward[0].clone());
    assert!(OnionMaterial::expand(&p, &s).is_err());
    let mut s = net.spec(&p, &mut rng, 5, 0);
    s.forward.push(PathHop { name: Address::new(&p, "extra").unwrap(), pk: s.forward[0].pk.clone() });
    assert!(OnionMaterial::expand(&p, &s).is_err());
    let mut s = net.spec(&p, &mut rng, 2, 2);
    s.message = vec![1; p.max_message_len() + 1];
    assert!(OnionMaterial::expand(&p, &s).is_err());
}

#[test]
fn tagging_fails_at_exit_and_at_reply_receiver() {
    let p = FormatParams::default();
    let (net, mut rng) = net(&p, 6);
    for _ in 0..30 {
        let spec = net.spec(&p, &mut rng, 3, 3);
        let mat = OnionMaterial::expand(&p, &spec).unwrap();
        let mut mask = vec![0u8; p.payload_len];
        let bit = rng.gen_range(0..p.payload_len * 8);
        mask[bit / 8] = 1 << (bit % 8);
        let mut o = tag_payload(mat.layer(1).unwrap(), &mask).unwrap();
        for (i, hop) in spec.forward.iter().enumerate() {
            match proc_onion(&p, net.sk_of(&hop.name).unwrap(), &o, &hop.name, &mut NoReplay) {
                ProcResult::Forward { onion, .. } => o = onion,
                ProcResult::Fail(FailCode::IntegrityCheck) => assert_eq!(i, 2),
                other => panic!("{other:?}"),
            }
        }
        // tag the last reply layer, as a corrupted final reply relay would
        let last = mat.layer(6).unwrap();
        let tagged = tag_payload(last, &mask).unwrap();
        let sender = &spec.reply[2].name;
        let mut view = expectation_view(&mat);
        assert_eq!(
            proc_onion(&p, net.sk_of(sender).unwrap(), &tagged, sender, &mut view),
            ProcResult::Fail(FailCode::IntegrityCheck)
        );
        assert_eq!(proc_onion(&p, net.sk_of(sender).unwrap(), last, sender, &mut view), ProcResult::Fail(FailCode::Replay));
        let mut fresh = expectation_view(&mat);
        assert!(matches!(proc_onion(&p, net.sk_of(sender).unwrap(), last, sender, &mut fresh), ProcResult::ReplyReceived { .. }));
    }
    let o = form_onion(&p, 1, &net.spec(&p, &mut rng, 1, 0)).unwrap();
    assert!(tag_payload(&o, &vec![0u8; p.payload_len]).is_err());
    assert!(tag_payload(&o, &[1u8]).is_err());
}

#[test]
fn header_bit_flips_rejected() {
    let p = FormatParams::default();
    let (net, mut rng) = net(&p, 7);
    let mut rejected = 0;
    for _ in 0..1000 {
        let spec = net.spec(&p, &mut rng, 2, 0);
        let o = form_onion(&p, 1, &spec).unwrap();
        let mut bytes = o.to_bytes();
        let bit = rng.gen_range(0..p.header_len() * 8);
        bytes[bit / 8] ^= 1 << (bit % 8);
        let t = Onion::from_bytes(&p, &bytes).unwrap();
        let hop = &spec.forward[0];
        if let ProcResult::Fail(c) = proc_onion(&p, net.sk_of(&hop.name).unwrap(), &t, &hop.name, &mut NoReplay) {
            assert!(matches!(c, FailCode::MacMismatch | FailCode::Decode), "{c:?}");
            rejected += 1;
        }
    }
    assert_eq!(rejected, 1000);
}

#[test]
fn replay_and_unsolicited_reply() {
    let p = FormatParams::default();
    let (net, mut rng) = net(&p, 8);
    let spec = net.spec(&p, &mut rng, 2, 2);
    let mat = OnionMaterial::expand(&p, &spec).unwrap();
    let hop = &spec.forward[0];
    let mut view = BasicView::default();
    let sk = net.sk_of(&hop.name).unwrap();
    assert!(matches!(proc_onion(&p, sk, mat.layer(1).unwrap(), &hop.name, &mut view), ProcResult::Forward { .. }));
    assert_eq!(proc_onion(&p, sk, mat.layer(1).unwrap(), &hop.name, &mut view), ProcResult::Fail(FailCode::Replay));
    let sender = &spec.reply[1].name;
    assert_eq!(
        proc_onion(&p, net.sk_of(sender).unwrap(), mat.layer(4).unwrap(), sender, &mut BasicView::default()),
        ProcResult::Fail(FailCode::UnknownReply)
    );
}

#[test]
fn width_is_constant() {
    let p = FormatParams::default();
    let (net, mut rng) = net(&p, 9);
    for n in 1..=5 {
        for nr in 0..=5 {
            let mat = OnionMaterial::expand(&p, &net.spec(&p, &mut rng, n, nr)).unwrap();
            for i in 1..=mat.layer_count() {
                assert_eq!(mat.layer(i).unwrap().to_bytes().len(), p.onion_len());
            }
        }
    }
}

#[test]
fn wire_round_trip() {
    let p = FormatParams::default();
    let (net, mut rng) = net(&p, 10);
    let o = form_onion(&p, 1, &net.spec(&p, &mut rng, 3, 1)).unwrap();
    assert_eq!(Onion::from_bytes(&p, &o.to_bytes()).unwrap(), o);
    assert!(Onion::from_bytes(&p, &o.to_bytes()[1..]).is_err());
}

#[test]
fn legacy_zero_filler_reveals_path_length() {
    let p = FormatParams { filler: FillerMode::LegacyZero, ..FormatParams::default() };
    let (net, mut rng) = net(&p, 11);
    let mut runs = vec![];
    for n in [2usize, 5] {
        let spec = net.spec(&p, &mut rng, n, 0);
        let exit = &spec.forward[n - 1];
        let o = form_onion(&p, n, &spec).unwrap();
        let alpha = p.group.decode(&o.header.alpha).unwrap();
        let ls = crate::kem::kem_decap(&p.suite(), net.sk_of(&exit.name).unwrap(), &alpha).unwrap();
        let (_, _, b) = header::peel_beta(&p, &ls, &o.header.beta).unwrap();
        runs.push(b.iter().take_while(|&&x| x == 0).count() / p.kappa);
    }
    assert_eq!(runs, vec![7, 1]);
}

mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn forward_chain_delivers(seed in any::<u64>(), n in 1usize..=5, nr in 0usize..=5) {
            let p = FormatParams::default();
            let (net, mut rng) = net(&p, seed);
            let spec = net.spec(&p, &mut rng, n, nr);
            let mut o = form_onion(&p, 1, &spec).unwrap();
            for hop in &spec.forward {
                match proc_onion(&p, net.sk_of(&hop.name).unwrap(), &o, &hop.name, &mut NoReplay) {
                    ProcResult::Forward { onion, .. } => o = onion,
                    ProcResult::Exit { message, .. } => prop_assert_eq!(&message, &spec.message),
                    other => prop_assert!(false, "{:?}", other),
                }
            }
        }

        #[test]
        fn payload_mask_never_survives_exit(seed in any::<u64>(), idx in 0usize..1024, byte in 1u8..=255) {
            let p = FormatParams::default();
            let (net, mut rng) = net(&p, seed);
            let spec = net.spec(&p, &mut rng, 1, 0);
            let mut mask = vec![0u8; p.payload_len];
            mask[idx] = byte;
            let o = tag_payload(&form_onion(&p, 1, &spec).unwrap(), &mask).unwrap();
            let hop = &spec.forward[0];
            prop_assert_eq!(
                proc_onion(&p, net.sk_of(&hop.name).unwrap(), &o, &hop.name, &mut NoReplay),
                ProcResult::Fail(FailCode::IntegrityCheck)
            );
        }

        #[test]
        fn every_layer_has_the_same_width_and_matches_processing(
            seed in any::<u64>(), n in 1usize..=5, nr in 1usize..=5
        ) {
            let p = FormatParams::default();
            let (net, mut rng) = net(&p, seed);
            let spec = net.spec(&p, &mut rng, n, nr);
            let mat = OnionMaterial::expand(&p, &spec).unwrap();
            let hops: Vec<_> = spec.forward.iter().chain(&spec.reply).collect();
            for i in 1..=n + nr {
                let layer = mat.layer(i).unwrap();
                prop_assert_eq!(layer.to_bytes().len(), p.onion_len());
                if i == n + nr || i == n {
                    continue;
                }
                let hop = hops[i - 1];
                match proc_onion(&p, net.sk_of(&hop.name).unwrap(), layer, &hop.name, &mut NoReplay) {
                    ProcResult::Forward { onion, .. } => prop_assert_eq!(&onion, mat.layer(i + 1).unwrap()),
                    other => prop_assert!(false, "{:?}", other),
                }
            }
        }
    }
}
