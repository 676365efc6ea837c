use detsft_core::subsample::*;
use detsft_core::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn dft_64_tuned_selection_is_certified() {
    let dft = DftMatrix::new(64);
    let c = minimal_oversampling(&dft, 2, DEFAULT_KAPPA, InitialRule::Split).unwrap();
    let params = SubsampleParams::new(64, 2, c, 1.0).unwrap();
    let out = subsample_derandomized(&dft, params.clone()).unwrap();
    let rows = out.selection.len() as f64;
    assert!(
        rows <= 2.0 * params.m && rows >= params.m / 2.0,
        "rows={rows} m={}",
        params.m
    );
    let rep = verify_incoherence(&out.selection, &dft);
    assert!(rep.max_inner <= out.certified_bound);
    assert!(rep.max_inner <= out.raw_bound);
    assert!(out.initial.passes(InitialRule::Split, 64));
}

#[test]
fn walk_total_never_increases_and_decomposes() {
    let dft = DftMatrix::new(64);
    let params = SubsampleParams::new(64, 2, 2.5, 1.0)
        .unwrap()
        .with_rule(InitialRule::Total);
    let p = params.p;
    let mut walk = SubsampleWalk::new(&dft, params).unwrap();
    let mut last = walk.total();
    assert!(last < 1.0);
    while let Some(rec) = walk.step() {
        assert!((rec.before - last).abs() <= 1e-9 * last);
        assert!(rec.decomposition_error(p) < 1e-9, "row {}", rec.row);
        let now = walk.total();
        assert!(now <= rec.before * (1.0 + 1e-12));
        assert!((now - rec.after[rec.delta as usize]).abs() <= 1e-12 * now);
        last = now;
    }
    assert!(last < 1.0);
}

#[test]
fn estimators_dominate_monte_carlo_probabilities() {
    let n = 32;
    let dft = DftMatrix::new(n);
    // Smallest C_m whose total start is below 1 at this size.
    let params = SubsampleParams::new(n, 1, 3.625, 1.0)
        .unwrap()
        .with_rule(InitialRule::Total);
    let (p, tau) = (params.p, params.component_threshold());
    let mut walk = SubsampleWalk::new(&dft, params).unwrap();
    for _ in 0..n / 2 {
        walk.step();
    }
    let (fixed, kept) = walk.fixed();
    let kept: Vec<usize> = kept.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let trials = 4000;
    let pairs = [(0usize, 1usize), (3, 17), (5, 6), (10, 30)];
    let mut hits = vec![[0usize; 2]; pairs.len()];
    let mut any = 0usize;
    for _ in 0..trials {
        let mut rows = kept.clone();
        for r in fixed..n {
            if rng.gen::<f64>() < p {
                rows.push(r);
            }
        }
        let mut bad = false;
        let count = rows.len() as f64;
        if count > 2.0 * walk.params().m || count < walk.params().m / 2.0 {
            bad = true;
        }
        for i in 0..n {
            for j in i + 1..n {
                let s: Complex64 = rows
                    .iter()
                    .map(|&r| dft.entry(r, i) * dft.entry(r, j).conj())
                    .sum();
                let hit = [s.re.abs() > tau, s.im.abs() > tau];
                if hit[0] || hit[1] {
                    bad = true;
                }
                if let Some(idx) = pairs.iter().position(|&q| q == (i, j)) {
                    for c in 0..2 {
                        hits[idx][c] += hit[c] as usize;
                    }
                }
            }
        }
        any += bad as usize;
    }
    // Three standard errors of slack on the empirical side.
    let slack = |freq: f64| 3.0 * (freq.max(1.0 / trials as f64) / trials as f64).sqrt();
    let freq = any as f64 / trials as f64;
    assert!(
        freq - slack(freq) <= walk.total(),
        "{freq} vs {}",
        walk.total()
    );
    for (idx, &(i, j)) in pairs.iter().enumerate() {
        let est = walk.pair_estimate(i, j);
        for c in 0..2 {
            let f = hits[idx][c] as f64 / trials as f64;
            assert!(
                f - slack(f) <= est[c],
                "pair ({i},{j}) part {c}: {f} vs {}",
                est[c]
            );
        }
    }
}

struct Walsh(usize);

impl EntryMatrix for Walsh {
    fn size(&self) -> usize {
        self.0
    }

    fn entry(&self, row: usize, col: usize) -> Complex64 {
        let sign = if (row & col).count_ones().is_multiple_of(2) {
            1.0
        } else {
            -1.0
        };
        Complex64::new(sign / (self.0 as f64).sqrt(), 0.0)
    }

    fn entry_bound(&self) -> f64 {
        1.0
    }
}

#[test]
fn works_on_any_bounded_orthonormal_matrix() {
    let h = Walsh(64);
    let full = RowSelection::new(&h, (0..64).collect()).unwrap();
    assert!(verify_incoherence(&full, &h).max_inner < 1e-12);
    let c = minimal_oversampling(&h, 2, DEFAULT_KAPPA, InitialRule::Split).unwrap();
    let out = subsample_derandomized(&h, SubsampleParams::new(64, 2, c, 1.0).unwrap()).unwrap();
    let rep = verify_incoherence(&out.selection, &h);
    assert!(rep.max_inner <= out.certified_bound);

    // Same matrix through a closure.
    let f = FnMatrix::new(64, 1.0, |r, c| h.entry(r, c));
    let again = subsample_derandomized(&f, SubsampleParams::new(64, 2, c, 1.0).unwrap()).unwrap();
    assert_eq!(again.selection, out.selection);
}

#[test]
fn deterministic_output() {
    let dft = DftMatrix::new(48);
    let params = SubsampleParams::new(48, 1, 4.5, 1.0)
        .unwrap()
        .with_rule(InitialRule::Total);
    let a = subsample_derandomized(&dft, params.clone()).unwrap();
    let b = subsample_derandomized(&dft, params).unwrap();
    assert_eq!(a, b);
}

#[test]
fn normalized_dft_columns_are_unit() {
    let dft = DftMatrix::new(40);
    let sel = RowSelection::new(&dft, vec![1, 4, 4, 9, 30]).unwrap();
    for s in &sel.normalization {
        assert!((s - (40.0f64 / 5.0).sqrt()).abs() < 1e-12);
    }
}

proptest! {
    #[test]
    fn mgf_at_least_one(a in -1.0f64..1.0, lambda in -50.0f64..50.0, p in 0.01f64..0.99) {
        prop_assert!(bernstein_mgf(a, lambda, p) >= 1.0 - 1e-12);
    }

    #[test]
    fn one_step_mixture_identity(a in -0.05f64..0.05, lambda in 0.0f64..100.0, p in 0.01f64..0.99, w in -0.2f64..0.2) {
        // e^{λw}·M = p·e^{λ(w+(1−p)a)} + (1−p)·e^{λ(w−pa)}
        let lhs = (lambda * w).exp() * bernstein_mgf(a, lambda, p);
        let rhs = p * (lambda * (w + (1.0 - p) * a)).exp() + (1.0 - p) * (lambda * (w - p * a)).exp();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs);
    }
}
