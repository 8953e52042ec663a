//! Fuzzed invariant checks, shared by the property tests and the acceptance
//! harness. Each check returns the shrunk counterexample on failure.

#![allow(dead_code)]

use ndarray::Array2;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

use strokelab::classifiers::mlp::{init_params, loss_and_grad};
use strokelab::classifiers::svm::{scaled_gamma, solve_binary, PolyKernel};
use strokelab::classifiers::tree::{MaxFeatures, RfModel, RfParams};
use strokelab::dataset::{make_folds, smote, split_dev_eval, FeatureMatrix};
use strokelab::features::{extract_features, ExtractConfig};
use strokelab::region::default_tree;
use strokelab::rng::{hash_indices, rng_from};
use strokelab::selection::{fdr_scores, ga_select, FnScorer, GaParams};
use strokelab::trace::{
    parse_canonical, pen_up_intervals, segment_strokes, serialize_canonical, validate_session,
    Action, AgeGroup, InteractionSession, StrokeSample, TestId, Tool,
};

pub type Check = Result<(), String>;

fn run<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Check {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    let rng = TestRng::deterministic_rng(RngAlgorithm::ChaCha);
    TestRunner::new_with_rng(config, rng)
        .run(&strategy, test)
        .map_err(|e| e.to_string())
}

/// A stroke: gap before it (ms), then `(dt, dx, dy)` steps after the down.
pub type StrokePlan = (u64, (f64, f64), Vec<(u64, f64, f64)>);

pub fn stroke_plans() -> impl Strategy<Value = Vec<StrokePlan>> {
    let step = (0u64..30, -25.0..25.0f64, -25.0..25.0f64);
    let stroke = (1u64..800, (600.0..1300.0f64, 100.0..1100.0f64), prop::collection::vec(step, 1..25));
    prop::collection::vec(stroke, 0..12)
}

pub fn build_session(plans: &[StrokePlan], pressure: bool) -> InteractionSession {
    let mut s = InteractionSession::new("P1", TestId::DRAWING);
    let mut t = 0u64;
    for (gap, (x0, y0), steps) in plans {
        t += gap;
        let (mut x, mut y) = (*x0, *y0);
        let n = steps.len();
        let push = |s: &mut InteractionSession, t, x: f64, y: f64, a| {
            let mut smp = StrokeSample::new(t, x.max(0.0), y.max(0.0), a, Tool::Stylus);
            if pressure {
                smp = smp.with_pressure(((x + y) / 3000.0).clamp(0.0, 1.0));
            }
            s.samples.push(smp);
        };
        push(&mut s, t, x, y, Action::Down);
        for (i, (dt, dx, dy)) in steps.iter().enumerate() {
            t += dt;
            x += dx;
            y += dy;
            let a = if i + 1 == n { Action::Up } else { Action::Move };
            push(&mut s, t, x, y, a);
        }
    }
    s
}

/// Strokes are conserved through serialization, parsing, validation and
/// segmentation, and every sample lands in exactly one stroke.
pub fn stroke_count_conservation(cases: u32) -> Check {
    run(cases, (stroke_plans(), any::<bool>()), |(plans, pressure)| {
        let s = build_session(&plans, pressure);
        let parsed = parse_canonical(serialize_canonical(&s).as_bytes())
            .map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(&parsed, &s);
        let report = validate_session(&parsed);
        prop_assert_eq!(report.repairs().count(), 0);
        let strokes = segment_strokes(&report.session);
        prop_assert_eq!(strokes.len(), plans.len());
        let downs = report.session.samples.iter().filter(|x| x.action == Action::Down).count();
        prop_assert_eq!(strokes.len(), downs);
        prop_assert_eq!(strokes.iter().map(|k| k.len()).sum::<usize>(), report.session.samples.len());
        prop_assert_eq!(pen_up_intervals(&strokes).len(), plans.len().saturating_sub(1));
        Ok(())
    })
}

/// Inside and outside drawing time add up to the drawing time, and their
/// ratios to it add up to one.
pub fn ratio_identities(cases: u32) -> Check {
    let mask = default_tree();
    run(cases, stroke_plans(), move |plans| {
        let s = build_session(&plans, false);
        let f = extract_features(&s, &mask, &ExtractConfig::default())
            .map_err(|e| TestCaseError::fail(e.to_string()))?;
        let d = |n: usize| f.get(114 + n);
        prop_assert!((d(25) + d(26) - d(27)).abs() <= 1e-9 * d(27).max(1.0));
        if d(27) > 0.0 {
            prop_assert!((d(29) + d(30) - 1.0).abs() <= 1e-9, "f29 {} f30 {}", d(29), d(30));
        }
        Ok(())
    })
}

fn labelled_rows(min_per_class: usize) -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<usize>)> {
    (1usize..5, min_per_class..12).prop_flat_map(|(d, per)| {
        let rows = prop::collection::vec(prop::collection::vec(-10.0..10.0f64, d), 3 * per);
        rows.prop_map(move |rows| {
            let labels = (0..rows.len()).map(|i| i % 3).collect();
            (rows, labels)
        })
    })
}

/// FDR scores are unchanged by a positive affine map of any feature.
pub fn fdr_scale_invariance(cases: u32) -> Check {
    let strat = labelled_rows(2).prop_flat_map(|(rows, labels)| {
        let d = rows[0].len();
        (
            Just(rows),
            Just(labels),
            prop::collection::vec(0.01..100.0f64, d),
            prop::collection::vec(-100.0..100.0f64, d),
        )
    });
    run(cases, strat, |(rows, labels, scale, shift)| {
        let mapped: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| r.iter().enumerate().map(|(j, v)| v * scale[j] + shift[j]).collect())
            .collect();
        let a = fdr_scores(&rows, &labels);
        let b = fdr_scores(&mapped, &labels);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-7 * x.abs().max(1.0), "{x} vs {y}");
        }
        Ok(())
    })
}

fn sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Every SMOTE row lies on a segment from some row to one of its k nearest
/// same-class neighbours.
pub fn smote_segment_property(cases: u32) -> Check {
    let strat = (
        1usize..4,
        2usize..12,
        1usize..7,
        1usize..20,
        any::<u64>(),
    )
        .prop_flat_map(|(d, m, k, n_new, seed)| {
            (
                prop::collection::vec(prop::collection::vec(-5.0..5.0f64, d), m),
                Just(k),
                Just(n_new),
                Just(seed),
            )
        });
    run(cases, strat, |(rows, k, n_new, seed)| {
        let mut rng = rng_from(seed, &[]);
        let new = smote(&rows, k, n_new, &mut rng).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(new.len(), n_new);
        let k = k.min(rows.len() - 1);
        // Oracle kNN by full sort; ties at the k-th distance are all admitted.
        let near: Vec<Vec<usize>> = (0..rows.len())
            .map(|i| {
                let mut d: Vec<f64> = (0..rows.len()).filter(|&j| j != i).map(|j| sq(&rows[i], &rows[j])).collect();
                d.sort_by(f64::total_cmp);
                let kth = d[k - 1];
                (0..rows.len()).filter(|&j| j != i && sq(&rows[i], &rows[j]) <= kth).collect()
            })
            .collect();
        for s in &new {
            let on_segment = (0..rows.len()).any(|i| {
                near[i].iter().any(|&j| {
                    let (a, b) = (&rows[i], &rows[j]);
                    let len2 = sq(a, b);
                    if len2 == 0.0 {
                        return sq(s, a) < 1e-20;
                    }
                    let lam: f64 = s.iter().zip(a).zip(b).map(|((s, a), b)| (s - a) * (b - a)).sum::<f64>() / len2;
                    let resid: f64 = s
                        .iter()
                        .zip(a)
                        .zip(b)
                        .map(|((s, a), b)| (s - (a + lam * (b - a))).powi(2))
                        .sum();
                    (-1e-12..=1.0 + 1e-12).contains(&lam) && resid <= 1e-18 * len2.max(1.0)
                })
            });
            prop_assert!(on_segment, "{s:?} is on no neighbour segment");
        }
        Ok(())
    })
}

/// Development and evaluation sets share no subject, and the folds
/// partition the development subjects.
pub fn split_fold_disjointness(cases: u32) -> Check {
    let strat = (
        prop::collection::vec(10usize..40, 3),
        0.6..0.9f64,
        2usize..6,
        any::<u64>(),
    );
    run(cases, strat, |(sizes, ratio, k, seed)| {
        let mut m = FeatureMatrix::default();
        let mut n = 0;
        for (g, size) in sizes.iter().enumerate() {
            for _ in 0..*size {
                n += 1;
                m.push(vec![n as f64], AgeGroup::from_index(g).unwrap(), format!("S{:04}", (n * 7919) % 10007));
            }
        }
        let (dev, eval) = split_dev_eval(&m, ratio, seed).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let dev_ids = dev.subjects();
        let eval_ids = eval.subjects();
        prop_assert!(dev_ids.is_disjoint(&eval_ids));
        prop_assert_eq!(dev_ids.len() + eval_ids.len(), m.len());
        for g in AgeGroup::ALL {
            prop_assert!(eval.labels.contains(&g) && dev.labels.contains(&g));
        }
        let plan = make_folds(&dev, k, seed).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let mut seen = std::collections::BTreeSet::new();
        for fold in 0..k {
            let (tr, va) = plan.fold_rows(&dev, fold).map_err(|e| TestCaseError::fail(e.to_string()))?;
            let tr_ids: std::collections::BTreeSet<&str> = tr.iter().map(|&i| dev.subject_ids[i].as_str()).collect();
            for &i in &va {
                let id = dev.subject_ids[i].as_str();
                prop_assert!(!tr_ids.contains(id));
                prop_assert!(!eval_ids.contains(id));
                prop_assert!(seen.insert(id.to_string()), "{id} validated twice");
            }
        }
        prop_assert_eq!(seen.len(), dev.len());
        Ok(())
    })
}

/// With one elite per generation the population's best fitness never drops.
pub fn ga_elitism_monotone(cases: u32) -> Check {
    let strat = (
        5usize..40,
        2usize..30,
        1usize..15,
        0.0..=1.0f64,
        0.0..0.3f64,
        any::<u64>(),
        any::<u64>(),
    );
    run(cases, strat, |(d, population, generations, crossover, mutation, seed, salt)| {
        let scorer = FnScorer::new(d, move |s: &[usize]| {
            (hash_indices(s) ^ salt).wrapping_mul(0x9E37_79B9_7F4A_7C15) as f64 / u64::MAX as f64
        });
        let p = GaParams {
            generations,
            population,
            crossover_rate: crossover,
            mutation_rate: mutation,
            init_density: 0.5,
            seed,
        };
        let r = ga_select(&scorer, &p).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(r.trace.len(), generations + 1);
        for w in r.trace.windows(2) {
            prop_assert!(w[1].1 >= w[0].1, "population best fell from {} to {}", w[0].1, w[1].1);
        }
        Ok(())
    })
}

/// Analytic MLP gradients agree with central differences.
pub fn mlp_gradient_check(cases: u32) -> Check {
    let strat = (
        1usize..4,
        prop::collection::vec(1usize..5, 1..3),
        2usize..4,
        1usize..6,
        0.0..0.1f64,
        any::<u64>(),
    )
        .prop_flat_map(|(d, hidden, k, n, alpha, seed)| {
            (
                Just((d, hidden, k, alpha, seed)),
                prop::collection::vec(-2.0..2.0f64, n * d),
                prop::collection::vec(0..k, n),
            )
        });
    run(cases, strat, |((d, hidden, k, alpha, seed), xs, y)| {
        let mut sizes = vec![d];
        sizes.extend(&hidden);
        sizes.push(k);
        let n = y.len();
        let x = Array2::from_shape_vec((n, d), xs).unwrap();
        let params = init_params(&sizes, seed);
        let (_, grad) = loss_and_grad(&sizes, &params, x.view(), &y, alpha);
        let h = 1e-6;
        let mut worst = 0.0f64;
        for i in 0..params.len() {
            let mut p = params.clone();
            p[i] += h;
            let (up, _) = loss_and_grad(&sizes, &p, x.view(), &y, alpha);
            p[i] -= 2.0 * h;
            let (down, _) = loss_and_grad(&sizes, &p, x.view(), &y, alpha);
            let fd = (up - down) / (2.0 * h);
            let err = (fd - grad[i]).abs() / fd.abs().max(grad[i].abs()).max(1e-3);
            worst = worst.max(err);
        }
        prop_assert!(worst <= 1e-4, "relative gradient error {worst}");
        Ok(())
    })
}

/// SMO exits with a feasible dual point whose KKT violation, recomputed
/// from scratch, is below 1e-3.
pub fn smo_kkt_residual(cases: u32) -> Check {
    let strat = (1usize..4, 3usize..15, 0.05..10.0f64, any::<u64>()).prop_flat_map(|(d, per, c, seed)| {
        (
            prop::collection::vec(prop::collection::vec(-1.0..1.0f64, d), 2 * per),
            Just(c),
            Just(seed),
        )
    });
    run(cases, strat, |(mut x, c, _seed)| {
        let n = x.len();
        let y: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        // Separable toy: shift the classes apart along every axis.
        for (row, yi) in x.iter_mut().zip(&y) {
            row.iter_mut().for_each(|v| *v += 3.0 * yi);
        }
        let kernel = PolyKernel {
            gamma: scaled_gamma(&x),
            coef0: 0.0,
            degree: 3,
        };
        let km: Vec<f64> = (0..n * n).map(|ij| kernel.eval(&x[ij / n], &x[ij % n])).collect();
        let sol = solve_binary(&km, &y, c, 1e-3, 10_000_000, false);
        prop_assert!(sol.converged);
        prop_assert!(sol.alpha.iter().all(|a| (0.0..=c).contains(a)));
        let balance: f64 = sol.alpha.iter().zip(&y).map(|(a, y)| a * y).sum();
        prop_assert!(balance.abs() <= 1e-9 * c.max(1.0) * n as f64);
        let grad: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| y[i] * y[j] * km[i * n + j] * sol.alpha[j]).sum::<f64>() - 1.0)
            .collect();
        let (mut up, mut low) = (f64::NEG_INFINITY, f64::INFINITY);
        for i in 0..n {
            let v = -y[i] * grad[i];
            let a = sol.alpha[i];
            if (y[i] > 0.0 && a < c) || (y[i] < 0.0 && a > 0.0) {
                up = up.max(v);
            }
            if (y[i] > 0.0 && a > 0.0) || (y[i] < 0.0 && a < c) {
                low = low.min(v);
            }
        }
        prop_assert!(up - low < 1e-3, "KKT residual {}", up - low);
        Ok(())
    })
}

fn gini(counts: &[f64]) -> f64 {
    let n: f64 = counts.iter().sum();
    if n == 0.0 {
        return 0.0;
    }
    1.0 - counts.iter().map(|c| (c / n).powi(2)).sum::<f64>()
}

/// A one-tree, depth-one forest over all features without bootstrap picks a
/// split as good as the exhaustive best stump, and its leaves hold the
/// class frequencies of each side.
pub fn stump_oracle(cases: u32) -> Check {
    let strat = (1usize..4, 4usize..30, 2usize..4).prop_flat_map(|(d, n, k)| {
        (
            prop::collection::vec(prop::collection::vec(0i32..12, d), n),
            prop::collection::vec(0..k, n),
            Just(k),
        )
    });
    run(cases, strat, |(xi, y, k)| {
        let x: Vec<Vec<f64>> = xi.iter().map(|r| r.iter().map(|&v| f64::from(v)).collect()).collect();
        let n = x.len() as f64;
        let d = x[0].len();
        let side_counts = |f: usize, t: f64| {
            let (mut l, mut r) = (vec![0.0; k], vec![0.0; k]);
            for (row, &c) in x.iter().zip(&y) {
                if row[f] <= t {
                    l[c] += 1.0;
                } else {
                    r[c] += 1.0;
                }
            }
            (l, r)
        };
        let impurity = |f: usize, t: f64| {
            let (l, r) = side_counts(f, t);
            (l.iter().sum::<f64>() * gini(&l) + r.iter().sum::<f64>() * gini(&r)) / n
        };
        let mut all = vec![0.0; k];
        y.iter().for_each(|&c| all[c] += 1.0);
        let mut best = gini(&all);
        for f in 0..d {
            let mut vals: Vec<f64> = x.iter().map(|r| r[f]).collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            for w in vals.windows(2) {
                best = best.min(impurity(f, (w[0] + w[1]) / 2.0));
            }
        }
        let p = RfParams {
            trees: 1,
            max_depth: 1,
            max_features: MaxFeatures::All,
            bootstrap: false,
            min_samples_split: 2,
        };
        let model = RfModel::fit(&p, &x, &y, k, 3);
        match &model.trees[0].nodes[0] {
            strokelab::classifiers::tree::Node::Split { feature, threshold, .. } => {
                let got = impurity(*feature, *threshold);
                prop_assert!((got - best).abs() < 1e-12, "split impurity {got}, oracle {best}");
                let (l, r) = side_counts(*feature, *threshold);
                for (row, _) in x.iter().zip(&y) {
                    let side = if row[*feature] <= *threshold { &l } else { &r };
                    let total: f64 = side.iter().sum();
                    let want: Vec<f64> = side.iter().map(|c| c / total).collect();
                    let have = model.predict_scores(row);
                    for (a, b) in want.iter().zip(&have) {
                        prop_assert!((a - b).abs() < 1e-12);
                    }
                }
            }
            strokelab::classifiers::tree::Node::Leaf(_) => {
                prop_assert!(best >= gini(&all) - 1e-12, "no split made but the oracle improves to {best}");
            }
        }
        Ok(())
    })
}

/// Every criterion-level property with its case count.
pub fn suite() -> Vec<(&'static str, fn(u32) -> Check, u32)> {
    vec![
        ("stroke-count conservation", stroke_count_conservation as fn(u32) -> Check, 256),
        ("drawing ratio identities", ratio_identities, 256),
        ("FDR scale invariance", fdr_scale_invariance, 256),
        ("SMOTE segment property", smote_segment_property, 256),
        ("split/fold subject disjointness", split_fold_disjointness, 128),
        ("GA elitism monotonicity", ga_elitism_monotone, 128),
        ("MLP gradient check", mlp_gradient_check, 128),
        ("SMO KKT residual", smo_kkt_residual, 128),
        ("decision-stump oracle", stump_oracle, 256),
    ]
}
