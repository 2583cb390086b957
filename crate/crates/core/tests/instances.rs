mod common;

use common::{random_stiefel, rng};
use stiefel_relax::instances::{
    gen_blockdiag, gen_penrose, gen_procrustes, gen_random, generate, load_instance,
    regression_data, save_instance, ProblemClass,
};
use stiefel_relax::linalg::{sym_eigvals, DenseMatrix};

#[test]
fn random_entries_are_centred() {
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut count = 0.0;
    for seed in 0..100 {
        let inst = gen_random(6, 2, seed).unwrap();
        assert_eq!(inst.h().order(), 12);
        assert_eq!(inst.g().len(), 12);
        for &v in inst.h().as_slice() {
            sum += v;
            sum_sq += v * v;
            count += 1.0;
        }
    }
    let mean = sum / count;
    let var = sum_sq / count - mean * mean;
    assert!(mean.abs() < 0.1, "mean {mean}");
    assert!((var - 1.0).abs() < 0.1, "variance {var}");
}

#[test]
fn blockdiag_objective_is_a_sum_over_columns() {
    let mut r = rng("inst-blockdiag", 1);
    for seed in 0..20 {
        let inst = gen_blockdiag(5, 3, seed).unwrap();
        assert!(inst.g().iter().all(|&v| v == 0.0));
        let h = inst.h();
        for a in 0..15 {
            for b in 0..15 {
                if a / 5 != b / 5 {
                    assert_eq!(h.get(a, b), 0.0);
                }
            }
        }
        let u = random_stiefel(&mut r, 5, 3);
        let mut direct = 0.0;
        for j in 0..3 {
            for i in 0..5 {
                for l in 0..5 {
                    direct += u[(i, j)] * h.get(5 * j + i, 5 * j + l) * u[(l, j)];
                }
            }
        }
        let f = inst.eval_objective(&u).unwrap();
        assert!((f - direct).abs() < 1e-10 * direct.abs().max(1.0));
    }
}

#[test]
fn regression_classes_have_psd_h_and_match_residuals() {
    let mut r = rng("inst-regression", 2);
    for seed in 0..20 {
        for inst in [
            gen_procrustes(6, 3, seed).unwrap(),
            gen_penrose(6, 3, seed).unwrap(),
        ] {
            let lmin = *sym_eigvals(inst.h()).unwrap().last().unwrap();
            assert!(lmin >= -1e-10 * inst.h().max_abs().max(1.0), "{lmin:e}");
            let w = inst.aux().unwrap();
            assert!((3..=12).contains(&w.m));
            for _ in 0..5 {
                let u = random_stiefel(&mut r, 6, 3);
                let f = inst.eval_objective(&u).unwrap();
                let direct = w.residual_sq(&u).unwrap() - w.offset();
                assert!((f - direct).abs() <= 1e-8 * direct.abs().max(1.0));
            }
        }
    }
}

#[test]
fn penrose_with_identity_c_is_procrustes() {
    let inst = gen_procrustes(5, 2, 3).unwrap();
    let w = inst.aux().unwrap();
    let (h, g) = regression_data(&w.a, &w.b, &DenseMatrix::identity(2)).unwrap();
    assert_eq!(&h, inst.h());
    assert_eq!(g.as_slice(), inst.g());
}

#[test]
fn regression_sizes_cover_the_range() {
    let mut seen = [false; 13];
    for seed in 0..400 {
        let w = gen_penrose(6, 2, seed).unwrap().aux().unwrap().clone();
        seen[w.m] = true;
        let q = w.q.unwrap();
        assert!((3..=12).contains(&q));
        assert_eq!(w.c.unwrap().shape(), (2, q));
    }
    assert!(seen[3..=12].iter().all(|&s| s));
    assert!(!seen[..3].iter().any(|&s| s));
}

#[test]
fn generation_is_reproducible_and_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for class in ProblemClass::ALL {
        let a = generate(class, 4, 2, 17).unwrap();
        let b = generate(class, 4, 2, 17).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, generate(class, 4, 2, 18).unwrap());
        let path = dir.path().join(format!("{class}.json"));
        save_instance(&a, &path).unwrap();
        assert_eq!(load_instance(&path).unwrap(), a);
    }
}

#[test]
fn p_larger_than_n_is_rejected() {
    for class in ProblemClass::ALL {
        assert!(generate(class, 3, 4, 0).is_err());
    }
}
