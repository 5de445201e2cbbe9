use duetsep::metrics::{envelope_features, envelope_prototype, DB_CAP};
use duetsep::rng::seeded;
use duetsep::synth::{build_exemplar_bank, render_voice, Contour, SingerSpec};
use duetsep::{evaluate, identity_switch_rate, sdr, si_sdr, Waveform};
use proptest::prelude::*;
use rand::Rng;

fn voice(spec: &SingerSpec, f0: f64) -> Vec<f64> {
    render_voice::<f64>(spec, &Contour::constant(f0).unwrap(), 8000, 1.0, 1).unwrap().into_samples()
}

#[test]
fn alternating_singers_flip_every_frame() {
    let frame = 1024;
    let (a, b) = (voice(&SingerSpec::bright(), 220.0), voice(&SingerSpec::dark(), 220.0));
    let protos = vec![
        envelope_prototype(&[&a[..]], frame).unwrap(),
        envelope_prototype(&[&b[..]], frame).unwrap(),
    ];
    let alternating: Vec<f64> =
        (0..7).flat_map(|k| if k % 2 == 0 { a[k * frame..(k + 1) * frame].to_vec() } else { b[k * frame..(k + 1) * frame].to_vec() }).collect();
    assert_eq!(identity_switch_rate(&[&alternating[..]], &protos, frame).unwrap(), 1.0);
    assert_eq!(identity_switch_rate(&[&a[..]], &protos, frame).unwrap(), 0.0);
}

#[test]
fn bank_exemplars_are_identified_by_their_nearest_neighbour() {
    let bank = build_exemplar_bank::<f64>(&[SingerSpec::bright(), SingerSpec::dark()], 256, 50, 8000, 3).unwrap();
    let feats: Vec<Vec<f64>> =
        bank.exemplars().iter().map(|e| envelope_features(e, 256).unwrap().remove(0).0).collect();
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
    let agree = (0..feats.len())
        .filter(|&i| {
            let j = (0..feats.len())
                .filter(|&j| j != i)
                .min_by(|&j, &k| dist(&feats[i], &feats[j]).total_cmp(&dist(&feats[i], &feats[k])))
                .unwrap();
            bank.labels()[i] == bank.labels()[j]
        })
        .count();
    assert!(agree as f64 >= 0.95 * feats.len() as f64, "{agree}/{}", feats.len());
}

#[test]
fn three_source_permutation_is_exhaustive_optimum() {
    let mut r = seeded(8);
    let refs: Vec<Waveform<f64>> =
        (0..3).map(|_| Waveform::new((0..128).map(|_| r.gen_range(-1.0..1.0)).collect(), 8000).unwrap()).collect();
    let mix = Waveform::new((0..128).map(|t| refs.iter().map(|w| w.samples()[t]).sum()).collect(), 8000).unwrap();
    let order = [2usize, 0, 1];
    let est: Vec<Waveform<f64>> = order
        .iter()
        .map(|&i| Waveform::new(refs[i].samples().iter().map(|v| v + 0.1 * r.gen_range(-1.0..1.0)).collect(), 8000).unwrap())
        .collect();
    let report = evaluate(&est, &refs, &mix).unwrap();
    // estimate j holds reference order[j]
    assert_eq!(report.permutation, vec![1, 2, 0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sdr_never_exceeds_the_cap(seed in any::<u64>(), len in 2usize..64) {
        let mut r = seeded(seed);
        let s: Vec<f64> = (0..len).map(|_| r.gen_range(-1.0..1.0)).collect();
        let e: Vec<f64> = s.iter().map(|v| v + r.gen_range(-1e-9..1e-9)).collect();
        prop_assert!(sdr(&e, &s).unwrap() <= DB_CAP);
        prop_assert!(sdr(&s, &s).unwrap() <= DB_CAP);
    }

    #[test]
    fn projection_beats_plain_sdr_under_scale_error(seed in any::<u64>(), beta in 0.2f64..3.0) {
        prop_assume!((beta - 1.0).abs() > 1e-3);
        let mut r = seeded(seed);
        let s: Vec<f64> = (0..64).map(|_| r.gen_range(-1.0..1.0)).collect();
        let mut e: Vec<f64> = (0..64).map(|_| r.gen_range(-0.1..0.1)).collect();
        let proj = e.iter().zip(&s).map(|(a, b)| a * b).sum::<f64>() / s.iter().map(|b| b * b).sum::<f64>();
        e.iter_mut().zip(&s).for_each(|(a, b)| *a -= proj * b);
        let est: Vec<f64> = s.iter().zip(&e).map(|(a, b)| beta * a + b).collect();
        prop_assert!(si_sdr(&est, &s).unwrap() >= sdr(&est, &s).unwrap() - 1e-9);
    }

    #[test]
    fn evaluation_ignores_consistent_reordering(seed in any::<u64>()) {
        let mut r = seeded(seed);
        let refs: Vec<Waveform<f64>> =
            (0..3).map(|_| Waveform::new((0..48).map(|_| r.gen_range(-1.0..1.0)).collect(), 8000).unwrap()).collect();
        let est: Vec<Waveform<f64>> = refs
            .iter()
            .map(|w| Waveform::new(w.samples().iter().map(|v| v + 0.5 * r.gen_range(-1.0..1.0)).collect(), 8000).unwrap())
            .collect();
        let mix = Waveform::new((0..48).map(|t| refs.iter().map(|w| w.samples()[t]).sum()).collect(), 8000).unwrap();
        let a = evaluate(&est, &refs, &mix).unwrap();
        let order = [1usize, 2, 0];
        let refs2: Vec<_> = order.iter().map(|&i| refs[i].clone()).collect();
        let est2: Vec<_> = order.iter().map(|&i| est[i].clone()).collect();
        let b = evaluate(&est2, &refs2, &mix).unwrap();
        prop_assert!((a.mean_si_sdri() - b.mean_si_sdri()).abs() < 1e-12);
        prop_assert!((a.mean_sdri() - b.mean_sdri()).abs() < 1e-12);
    }
}
