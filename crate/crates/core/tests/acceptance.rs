//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any hard criterion fails. Run with
//! `cargo test -p semspace --test acceptance`.

use std::collections::HashSet;
use std::time::Instant;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use semspace::noise::{compare, sample_seed_noise, theoretical_pmf};
use semspace::query::{neighbors, orthogonalize};
use semspace::seedgen::{n_seed, p_overlap, p_scalar, seed_dot, SeedVector};
use semspace::store::HEADER_LEN;
use semspace::synth::{ring_lexicon, two_sense_fixture};
use semspace::{Lexicon, OverlapLaw, SampleMode, SemanticSpace, SpaceConfig, TermId, Weighting};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn factorial(n: u64) -> BigUint {
    (1..=n).fold(BigUint::one(), |acc, i| acc * i)
}

/// Binomial coefficient through factorials, independent of the library.
fn choose(n: u64, k: u64) -> BigUint {
    factorial(n) / (factorial(k) * factorial(n - k))
}

fn eq5_exactness() -> Outcome {
    let t = Instant::now();
    let small = n_seed(250, 4).unwrap();
    let oracle = choose(250, 8) * choose(8, 4);
    let small_f = small.to_f64().unwrap();
    let rounded = (small_f / 1e15).round() / 10.0;

    let big = n_seed(2500, 50).unwrap();
    let digits = big.to_str_radix(10);
    let big_oracle = choose(2500, 100) * choose(100, 50);
    let leading: f64 = format!("{}.{}", &digits[..1], &digits[1..4]).parse().unwrap();
    let elapsed = t.elapsed().as_secs_f64();

    let pass = small == oracle
        && rounded == 2.4
        && big == big_oracle
        && digits.len() == 256
        && (leading * 10.0).round() / 10.0 == 2.0
        && elapsed < 1.0;
    outcome(
        pass,
        format!(
            "N(250,4) = {small} (~{rounded}e16), N(2500,50) ~ {leading:.3}e{}, {elapsed:.3}s",
            digits.len() - 1
        ),
    )
}

fn normalization() -> Outcome {
    let mut worst = 0.0f64;
    for (d, m) in [(250, 4), (250, 50), (2500, 50)] {
        let total: f64 = (0..=2 * m).map(|v| p_overlap(v, d, m).unwrap()).sum();
        worst = worst.max((total - 1.0).abs());
        for v in 0..=2 * m {
            let s_total: f64 = (-(v as i64)..=v as i64).map(|s| p_scalar(v, s).unwrap()).sum();
            worst = worst.max((s_total - 1.0).abs());
        }
    }
    outcome(worst < 1e-12, format!("max |sum - 1| = {worst:.2e}"))
}

fn monte_carlo_vs_theory() -> Outcome {
    let t = Instant::now();
    let sample = sample_seed_noise(250, 4, SampleMode::Seed, 1_000_000, 20_240_601).unwrap();
    let exact = theoretical_pmf(250, 4, OverlapLaw::Hypergeometric).unwrap();
    let cmp = compare(&exact, &sample.histogram).unwrap();
    let elapsed = t.elapsed().as_secs_f64();

    // Direct integrality check on independently drawn pairs.
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let integral = (0..100_000).all(|_| {
        let a = SeedVector::sample(&mut rng, 250, 4);
        let b = SeedVector::sample(&mut rng, 250, 4);
        let x = seed_dot(&a, &b).unwrap() * 8.0;
        (x - x.round()).abs() < 1e-9 && x.abs() <= 8.0
    });

    let printed = theoretical_pmf(250, 4, OverlapLaw::Binomial).unwrap();
    let cmp_printed = compare(&printed, &sample.histogram).unwrap();
    outcome(
        cmp.pass && integral && sample.sample_count == 1_000_000 && elapsed < 30.0,
        format!(
            "worst bin {:.2} of 4-SE band (exact overlap law), integral={integral}, {elapsed:.1}s; \
             binomial overlap law: worst {:.2} of band",
            cmp.worst_band_ratio, cmp_printed.worst_band_ratio
        ),
    )
}

fn noise_scaling() -> Outcome {
    let low = sample_seed_noise(250, 4, SampleMode::Seed, 400_000, 1).unwrap();
    let high = sample_seed_noise(2500, 50, SampleMode::Seed, 400_000, 2).unwrap();
    let ratio = low.std / high.std;
    let target = 10f64.sqrt();
    let rel = (ratio - target).abs() / target;
    outcome(
        rel < 0.10,
        format!(
            "std(250) = {:.4}, std(2500) = {:.5}, ratio {ratio:.3} vs {target:.3} ({:.1}%)",
            low.std,
            high.std,
            rel * 100.0
        ),
    )
}

fn widen(v: &[f32]) -> Vec<f64> {
    v.iter().map(|&x| f64::from(x)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn orthogonalization_contract() -> Outcome {
    let lexicon = ring_lexicon(200, 320, 5);
    let config = SpaceConfig::new(2500, 50, 99, Weighting::TfIdf).unwrap();
    let (space, _) = SemanticSpace::build(lexicon, config).unwrap();
    let terms: Vec<String> = space.lexicon().terms().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    let mut rank_failures = 0;
    let mut trials = 0;
    for size in 1..=10 {
        for _ in 0..5 {
            let picks: Vec<&String> = terms.choose_multiple(&mut rng, size + 1).collect();
            let base = picks[0].as_str();
            let mut minus: Vec<&str> = picks[1..].iter().map(|s| s.as_str()).collect();
            let r = orthogonalize(&space, base, &minus).unwrap();
            for m in &minus {
                let v = widen(space.vector(space.resolve(m).unwrap()).unwrap());
                worst = worst.max(dot(&r, &v).abs());
            }
            let top = |minus: &[&str]| -> Vec<String> {
                neighbors(&space, base, 10, minus, false)
                    .unwrap()
                    .entries
                    .into_iter()
                    .map(|n| n.term)
                    .collect()
            };
            let reference = top(&minus);
            for _ in 0..3 {
                minus.shuffle(&mut rng);
                trials += 1;
                if top(&minus) != reference {
                    rank_failures += 1;
                }
            }
        }
    }
    outcome(
        worst < 1e-5 && rank_failures == 0,
        format!("max |<r|minus>| = {worst:.2e}, permutation mismatches {rank_failures}/{trials}"),
    )
}

fn homonym_fixture() -> Outcome {
    let mut successes = 0;
    let mut failures = Vec::new();
    for seed in 0..100u64 {
        let fixture = two_sense_fixture(150, 1000 + seed);
        let config = SpaceConfig::new(2500, 50, seed, Weighting::TfIdf).unwrap();
        let (space, _) = SemanticSpace::build(fixture.lexicon.clone(), config).unwrap();
        let [money, river] = fixture.sense_terms;

        let top15: Vec<String> = neighbors(&space, fixture.query, 15, &[], false)
            .unwrap()
            .entries
            .into_iter()
            .map(|n| n.term)
            .collect();
        let both = top15.iter().any(|t| money.contains(&t.as_str()))
            && top15.iter().any(|t| river.contains(&t.as_str()));

        let top10 = neighbors(&space, fixture.query, 10, &[fixture.anchor], false).unwrap();
        let clean = !top10
            .entries
            .iter()
            .any(|n| n.term != fixture.query && fixture.anchor_clique.contains(&n.term.as_str()));
        if both && clean {
            successes += 1;
        } else {
            failures.push(seed);
        }
    }
    outcome(
        successes >= 95,
        format!("{successes}/100 seeds separate both senses (failing seeds: {failures:?})"),
    )
}

fn locality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let lexicon = ring_lexicon(120, 180, 8);
    let config = SpaceConfig::new(500, 8, 4, Weighting::TfIdf).unwrap();
    let (mut space, _) = SemanticSpace::build(lexicon, config).unwrap();
    let mut touched_ok = true;
    let mut untouched_ok = true;
    let mut worst = 0.0f64;
    for update in 0..50 {
        let n = space.n_terms();
        let size = rng.random_range(2..=4);
        let mut clique: Vec<String> = Vec::new();
        while clique.len() < size {
            let name = if rng.random_bool(0.3) {
                format!("new{update}_{}", clique.len())
            } else {
                space.lexicon().terms()[rng.random_range(0..n)].clone()
            };
            if !clique.contains(&name) {
                clique.push(name);
            }
        }
        let refs: Vec<&str> = clique.iter().map(String::as_str).collect();
        let before = space.vectors().to_vec();
        let report = space.add_clique(&refs).unwrap();

        // Predicted D-set, from the raw clique lists.
        let members: HashSet<TermId> = refs.iter().map(|t| space.lexicon().id(t).unwrap()).collect();
        let mut predicted: Vec<TermId> = space
            .lexicon()
            .cliques()
            .iter()
            .filter(|c| c.iter().any(|t| members.contains(t)))
            .flat_map(|c| c.iter().copied())
            .collect::<HashSet<_>>()
            .into_iter()
            .collect();
        predicted.sort_unstable();
        touched_ok &= report.touched == predicted;

        let dim = space.dim();
        for t in 0..n {
            if predicted.binary_search(&(t as TermId)).is_err() {
                let old = &before[t * dim..(t + 1) * dim];
                let new = &space.vectors()[t * dim..(t + 1) * dim];
                untouched_ok &= old.iter().zip(new).all(|(a, b)| a.to_bits() == b.to_bits());
            }
        }

        let mut rebuilt = space.clone();
        rebuilt.rebuild_frozen();
        for (a, b) in rebuilt.vectors().iter().zip(space.vectors()) {
            worst = worst.max((a - b).abs() as f64);
        }
    }
    outcome(
        touched_ok && untouched_ok && worst <= 1e-5,
        format!(
            "touched=predicted: {touched_ok}, untouched bit-identical: {untouched_ok}, \
             max |incremental - rebuild| = {worst:.1e}"
        ),
    )
}

fn persistence() -> Outcome {
    let lexicon = ring_lexicon(1000, 1500, 2);
    let config = SpaceConfig::new(2500, 50, 6, Weighting::TfIdf).unwrap();
    let (space, _) = SemanticSpace::build(lexicon, config).unwrap();
    let bytes = space.to_bytes();
    let again = SemanticSpace::load(&bytes[..]).unwrap().to_bytes();
    let identical = again == bytes;

    let mut bad = bytes.clone();
    bad[..4].copy_from_slice(b"XVSS");
    let magic_rejected = SemanticSpace::load(&bad[..]).is_err_and(|e| e.is_corruption());
    let truncated_rejected = [10, 1000, bytes.len() / 2, bytes.len() - 1]
        .iter()
        .all(|&cut| SemanticSpace::load(&bytes[..cut]).is_err_and(|e| e.is_corruption()));

    let lex = space.lexicon();
    let tables: usize = lex.terms().iter().map(|t| 4 + t.len() + 4 + 1).sum::<usize>()
        + lex.cliques().iter().map(|c| 4 + 4 * c.len()).sum::<usize>();
    let predicted = HEADER_LEN + tables + 1000 * 2500 * 4;
    outcome(
        identical && magic_rejected && truncated_rejected && bytes.len() == predicted,
        format!(
            "round trip identical: {identical}, bad magic rejected: {magic_rejected}, \
             truncation rejected: {truncated_rejected}, size {} vs predicted {predicted}",
            bytes.len()
        ),
    )
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

/// |D_i ∩ D_k| straight from the definition.
fn brute_force_overlaps(lexicon: &Lexicon) -> Vec<HashSet<TermId>> {
    let mut d: Vec<HashSet<TermId>> = vec![HashSet::new(); lexicon.n_terms()];
    for clique in lexicon.cliques() {
        for &t in clique {
            d[t as usize].extend(clique.iter().copied());
        }
    }
    d
}

fn oracle_correlation() -> Outcome {
    let mut worst = f64::INFINITY;
    let mut details = Vec::new();
    for (n, seed) in [(200, 1u64), (150, 2), (120, 3)] {
        let lexicon = ring_lexicon(n, n * 3 / 2, seed);
        let d = brute_force_overlaps(&lexicon);
        let config = SpaceConfig::new(2500, 50, seed, Weighting::TfIdf).unwrap();
        let (space, _) = SemanticSpace::build(lexicon, config).unwrap();
        let (mut cos, mut overlap) = (Vec::new(), Vec::new());
        for i in 0..n {
            for k in i + 1..n {
                let o = d[i].intersection(&d[k]).count();
                if o >= 1 {
                    let vi = space.vector(i as TermId).unwrap();
                    let vk = space.vector(k as TermId).unwrap();
                    cos.push(vi.iter().zip(vk).map(|(a, b)| f64::from(*a) * f64::from(*b)).sum());
                    overlap.push(o as f64);
                }
            }
        }
        let rho = pearson(&ranks(&cos), &ranks(&overlap));
        worst = worst.min(rho);
        details.push(format!("n={n}: {rho:.3} over {} pairs", cos.len()));
    }
    outcome(worst > 0.5, format!("Spearman {}", details.join(", ")))
}

fn throughput() -> Outcome {
    let lexicon = ring_lexicon(20_000, 40_000, 1);
    let config = SpaceConfig::new(250, 4, 1, Weighting::TfIdf).unwrap();
    let t = Instant::now();
    let (space, _) = SemanticSpace::build(lexicon, config).unwrap();
    let rate = space.n_terms() as f64 / t.elapsed().as_secs_f64();
    outcome(rate >= 10_000.0, format!("{rate:.0} term vectors/s at d = 250"))
}

type Check = fn() -> Outcome;

fn main() {
    let hard: [(&str, Check); 9] = [
        ("eq5-exactness", eq5_exactness),
        ("eq6-eq7-normalization", normalization),
        ("monte-carlo-vs-theory", monte_carlo_vs_theory),
        ("noise-scaling", noise_scaling),
        ("orthogonalization-contract", orthogonalization_contract),
        ("homonym-fixture", homonym_fixture),
        ("locality", locality),
        ("persistence", persistence),
        ("oracle-correlation", oracle_correlation),
    ];
    let mut failed = 0;
    for (name, check) in hard {
        let o = check();
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    let soft = throughput();
    println!(
        "{} throughput (soft): {}",
        if soft.pass { "PASS" } else { "WARN" },
        soft.detail
    );
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
