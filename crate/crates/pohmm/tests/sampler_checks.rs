//! End-to-end checks of the chain against independent references: a second
//! seed, a prior-weighted direct estimate, and closed-form ESS targets.

use std::collections::BTreeMap;

use pohmm::latent::{order_from_status, status_from, var1_sample, Effects, HyperParams};
use pohmm::obsmodel::{loglik_list, NoiseMode, NoiseModel};
use pohmm::pipeline::{register, ActorRecord, Dataset, ListRecord};
use pohmm::poset::{CountCache, RankList};
use pohmm::sampler::{ess, run_chain, McmcConfig, Model, Sample};
use pohmm::{ActorId, Year};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn actor(id: ActorId, b: Year, e: Year) -> ActorRecord {
    ActorRecord {
        id,
        name: format!("a{id}"),
        group: String::new(),
        begin_year: b,
        end_year: e,
        focus: true,
    }
}

fn list(id: u32, lo: Year, hi: Year, entries: &[ActorId]) -> ListRecord {
    ListRecord {
        id,
        tau_minus: lo,
        tau_plus: hi,
        entries: RankList::new(entries.to_vec()).unwrap(),
    }
}

/// P(a above b in year t) and the effective sample size of its indicator.
fn edge_marginal(samples: &[Sample], t: Year, a: ActorId, b: ActorId) -> (f64, f64) {
    let flags: Vec<f64> = samples
        .iter()
        .map(|s| f64::from(s.orders[&t].has_edge(a, b)))
        .collect();
    let p = flags.iter().sum::<f64>() / flags.len() as f64;
    (p, ess(&flags).clamp(1.0, flags.len() as f64))
}

fn binom_se(p: f64, n_eff: f64) -> f64 {
    (p * (1.0 - p) / n_eff).sqrt()
}

/// Two independent seeds, the second three times longer, must agree on every
/// pairwise order marginal. Catches detailed-balance violations that leave
/// the chain ergodic but targeting the wrong distribution.
#[test]
fn two_seeds_agree_on_edge_marginals() {
    let actors = vec![actor(1, 1100, 1101), actor(2, 1100, 1101), actor(3, 1100, 1101)];
    let lists = vec![
        list(1, 1100, 1100, &[1, 2, 3]),
        list(2, 1100, 1101, &[2, 1]),
        list(3, 1101, 1101, &[1, 3]),
        list(4, 1100, 1101, &[3, 2]),
        list(5, 1101, 1101, &[1, 2, 3]),
    ];
    let data = register(&actors, &lists, (1100, 1101), None).unwrap();
    let hyper = HyperParams { k: 2, ..HyperParams::default() };
    let model = Model::new(data, hyper, false).unwrap();

    let cfg = McmcConfig {
        sweeps: 8000,
        burn_in: 2000,
        thin: 2,
        seed: 11,
        ..McmcConfig::default()
    };
    let run_a = run_chain(&model, &cfg).unwrap();
    let cfg_b = McmcConfig { sweeps: 24000, burn_in: 4000, seed: 4242, ..cfg };
    let run_b = run_chain(&model, &cfg_b).unwrap();

    for t in [1100, 1101] {
        for a in [1u32, 2, 3] {
            for b in [1u32, 2, 3] {
                if a == b {
                    continue;
                }
                let (pa, na) = edge_marginal(&run_a.samples, t, a, b);
                let (pb, nb) = edge_marginal(&run_b.samples, t, a, b);
                let se = (binom_se(pa, na).powi(2) + binom_se(pb, nb).powi(2)).sqrt();
                assert!(
                    (pa - pb).abs() <= 3.0 * se + 1e-9,
                    "edge {a}>{b} year {t}: {pa:.4} vs {pb:.4}, 3se = {:.4}",
                    3.0 * se
                );
            }
        }
    }
}

/// With theta pinned at 0 and a single year, rows of the latent matrix are
/// iid N(0, Sigma(rho)), so posterior edge marginals can be estimated
/// directly by prior sampling weighted with the list likelihood. The chain
/// must match that estimate.
#[test]
fn pinned_year_posterior_matches_prior_weighted_reference() {
    let t: Year = 1100;
    let actors = vec![actor(1, t, t), actor(2, t, t), actor(3, t, t)];
    let lists = vec![
        list(1, t, t, &[1, 2, 3]),
        list(2, t, t, &[1, 3]),
        list(3, t, t, &[2, 3, 1]),
        list(4, t, t, &[1, 2]),
        list(5, t, t, &[3, 2]),
        list(6, t, t, &[1, 2, 3]),
    ];
    let data = register(&actors, &lists, (t, t), None).unwrap();
    let (rho, p, k) = (0.7, 0.1, 2);

    // Direct reference: importance sampling with the exact prior as proposal.
    let noise = NoiseModel { mode: NoiseMode::Down, p };
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let mut cache = CountCache::default();
    let beta = Effects::zero(0);
    let levels = BTreeMap::new();
    let n_draws = 200_000;
    let mut weights = Vec::with_capacity(n_draws);
    let mut edges: BTreeMap<(ActorId, ActorId), Vec<f64>> = BTreeMap::new();
    for _ in 0..n_draws {
        let us: Vec<_> = actors
            .iter()
            .map(|a| var1_sample(a.id, t, t, rho, 0.0, k, &mut rng).unwrap())
            .collect();
        let z = status_from(&us, &beta, &levels, t).unwrap();
        let h = order_from_status(&z);
        let mut ll = 0.0;
        for l in &data.lists {
            ll += loglik_list(&h, &l.entries, &noise, &mut cache).unwrap();
        }
        let w = ll.exp();
        weights.push(w);
        for a in [1u32, 2, 3] {
            for b in [1u32, 2, 3] {
                if a == b {
                    continue;
                }
                edges.entry((a, b)).or_default().push(f64::from(h.has_edge(a, b)));
            }
        }
    }
    let w_sum: f64 = weights.iter().sum();

    // The chain, with every scalar pinned to the reference values.
    let model = Model::new(
        data,
        HyperParams { k, ..HyperParams::default() },
        false,
    )
    .unwrap();
    let cfg = McmcConfig {
        sweeps: 30000,
        burn_in: 5000,
        thin: 5,
        seed: 3,
        fix_rho: Some(rho),
        fix_theta: Some(0.0),
        fix_p: Some(p),
        ..McmcConfig::default()
    };
    let run = run_chain(&model, &cfg).unwrap();

    for ((a, b), flags) in &edges {
        let r = flags.iter().zip(&weights).map(|(x, w)| x * w).sum::<f64>() / w_sum;
        // Ratio-estimator standard error for the importance-sampled reference.
        let var_is = flags
            .iter()
            .zip(&weights)
            .map(|(x, w)| (w * (x - r)).powi(2))
            .sum::<f64>()
            / (w_sum * w_sum);
        let (pm, ne) = edge_marginal(&run.samples, t, *a, *b);
        let se = (var_is + binom_se(pm, ne).powi(2)).sqrt();
        assert!(
            (pm - r).abs() <= 3.0 * se + 1e-9,
            "edge {a}>{b}: chain {pm:.4} vs direct {r:.4}, 3se = {:.4}",
            3.0 * se
        );
    }
}

/// ESS against closed forms: iid within 20%, AR(1) within 25% of
/// L(1-phi)/(1+phi), constants exactly 0.
#[test]
fn ess_matches_closed_form_targets() {
    let l = 20_000usize;
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let iid: Vec<f64> = (0..l).map(|_| rng.gen::<f64>()).collect();
    let e = ess(&iid);
    assert!((e - l as f64).abs() < 0.2 * l as f64, "iid ESS {e} vs {l}");

    for phi in [0.6, 0.9] {
        let mut x = 0.0;
        let ar: Vec<f64> = (0..l)
            .map(|_| {
                let z: f64 = rng.gen::<f64>() - 0.5;
                x = phi * x + z;
                x
            })
            .collect();
        let want = l as f64 * (1.0 - phi) / (1.0 + phi);
        let got = ess(&ar);
        assert!(
            (got - want).abs() < 0.25 * want,
            "AR(1) phi={phi}: ESS {got:.0} vs {want:.0}"
        );
    }

    assert_eq!(ess(&vec![2.5; 100]), 0.0);
    assert_eq!(ess(&[]), 0.0);
}
