//! Fast paths against the brute-force references.

use qie_core::analysis::{self, c1_distance, estimate_m};
use qie_core::exprdsl::{parse, random_expr, Family, NonlinearitySpec};
use qie_core::model::{
    materialize_kernel, InitialData, KernelSpec, OperatorSpec, Problem, ProblemSpec,
};
use qie_core::oracle::{
    self, direct_convolution, direct_map_tg, finite_diff_gradient, OracleBudget,
};
use qie_core::solver::apply_map_tg;
use qie_core::spectral::{convolve, sup_norm, Grid, ScalarField};
use qie_core::VectorField;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rel_sup(a: &ScalarField, b: &ScalarField) -> f64 {
    sup_norm(&a.sub(b).unwrap()) / sup_norm(b)
}

fn gaussian(grid: Grid, alpha: f64) -> ScalarField {
    ScalarField::from_fn(grid, |x| {
        (-alpha * x.iter().map(|c| c * c).sum::<f64>()).exp()
    })
}

#[test]
fn spectral_convolution_matches_direct_sum_2d_and_3d() {
    for grid in [
        Grid::new(2, 16, 4.0).unwrap(),
        Grid::new(3, 8, 3.0).unwrap(),
    ] {
        let k = gaussian(grid, 1.0);
        let f = ScalarField::from_fn(grid, |x| {
            (-0.5 * x.iter().map(|c| c * c).sum::<f64>()).exp() * (1.0 + x[0])
        });
        let fast = convolve(&k, &f).unwrap();
        let slow = direct_convolution(&k, &f, &OracleBudget::default()).unwrap();
        let err = rel_sup(&fast, &slow);
        assert!(err <= 1e-10, "d = {}: {err:e}", grid.dim());
    }
}

#[test]
fn direct_convolution_is_linear_and_symmetric() {
    let grid = Grid::new(2, 8, 2.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut field = || ScalarField::from_fn(grid, |_| rng.gen_range(-1.0..1.0));
    let (k, f, g) = (field(), field(), field());
    let b = OracleBudget::default();
    let kf = direct_convolution(&k, &f, &b).unwrap();
    let fk = direct_convolution(&f, &k, &b).unwrap();
    assert!(sup_norm(&kf.sub(&fk).unwrap()) <= 1e-12);
    let lhs = direct_convolution(&k, &f.scaled(2.0).add(&g).unwrap(), &b).unwrap();
    let rhs = kf
        .scaled(2.0)
        .add(&direct_convolution(&k, &g, &b).unwrap())
        .unwrap();
    assert!(sup_norm(&lhs.sub(&rhs).unwrap()) <= 1e-12);
}

fn gaussian_problem(grid: Grid, g: &str, op: OperatorSpec) -> Problem {
    let spec = ProblemSpec::new(
        grid,
        vec![KernelSpec::Gaussian {
            alpha: 1.0,
            amplitude: 0.5,
        }],
        vec![op],
        NonlinearitySpec::parse(&[g]).unwrap(),
        vec![InitialData::Expression(
            parse("exp(-x1^2-x2^2)", 2, Family::X).unwrap(),
        )],
        None,
    )
    .unwrap();
    Problem::assemble(&spec).unwrap()
}

#[test]
fn map_matches_direct_evaluation() {
    let grid = Grid::new(2, 16, 4.0).unwrap();
    let ops = [
        OperatorSpec::InverseHelmholtz,
        OperatorSpec::ScaledIdentity { alpha: 0.5 },
        OperatorSpec::RationalMultiplier {
            p: vec![1.0, 0.5],
            q: vec![2.0, 1.0, 0.25],
        },
    ];
    for op in ops {
        let p = gaussian_problem(grid, "z1^2 + sin(z1)", op);
        for v in [
            VectorField::zeros(grid, 1),
            VectorField::new(vec![gaussian(grid, 2.0).scaled(0.3)]).unwrap(),
        ] {
            let fast = apply_map_tg(&p, &v).unwrap();
            let slow = direct_map_tg(&p, &v, &OracleBudget::default()).unwrap();
            let err = rel_sup(fast.component(0), &slow[0]);
            assert!(err <= 1e-9, "{err:e}");
        }
    }
}

#[test]
fn gaussian_kernel_norm_against_radial_quadrature() {
    // |ΔK| = |4r² - 4| e^{-r²}; integrate 2πr |ΔK| with a fine midpoint rule
    let steps = 400_000;
    let rmax = 12.0;
    let dr = rmax / steps as f64;
    let (mut k1, mut lap1) = (0.0, 0.0);
    for i in 0..steps {
        let r = (i as f64 + 0.5) * dr;
        let e = (-r * r).exp();
        k1 += 2.0 * std::f64::consts::PI * r * e * dr;
        lap1 += 2.0 * std::f64::consts::PI * r * (4.0 * r * r - 4.0).abs() * e * dr;
    }
    let quad = k1.hypot(lap1);
    // the kink of |ΔK| at r = 1 makes the grid sum converge at second order
    let err = |n: usize| {
        let grid = Grid::new(2, n, 8.0).unwrap();
        let k = materialize_kernel(&KernelSpec::gaussian(1.0), grid).unwrap();
        (k.w21_norm() - quad).abs() / quad
    };
    let (coarse, fine) = (err(128), err(256));
    assert!(coarse <= 1e-3, "{coarse:e}");
    assert!(fine <= coarse / 3.0, "{fine:e} vs {coarse:e}");
}

#[test]
fn symbolic_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let n = rng.gen_range(1..=3);
        let comps = (0..n)
            .map(|_| random_expr(&mut rng, n, Family::Z, 4))
            .collect();
        let g = NonlinearitySpec::new(comps).unwrap();
        let z: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let sym = g.eval_gradient(&z).unwrap();
        let fd = finite_diff_gradient(&g, &z).unwrap();
        for m in 0..n {
            for k in 0..n {
                let scale = sym[m][k].abs().max(1.0);
                assert!(
                    (sym[m][k] - fd[m][k]).abs() <= 1e-6 * scale,
                    "{:?} at {z:?}: {} vs {}",
                    g.display_components(),
                    sym[m][k],
                    fd[m][k]
                );
            }
        }
    }
}

#[test]
fn sampled_m_matches_dense_oracle() {
    let g = NonlinearitySpec::parse(&["sin(z1)"]).unwrap();
    let est = estimate_m(&g, 2.0, 0).unwrap();
    let dense = oracle::dense_c1_norm(&g, 2.0, 1_000_000).unwrap();
    assert!(
        (est.raw - dense).abs() <= 0.02 * dense,
        "{} vs {dense}",
        est.raw
    );
    assert!(est.value >= dense);
}

#[test]
fn sampled_distance_matches_dense_oracle() {
    let g1 = NonlinearitySpec::parse(&["sin(z1)"]).unwrap();
    let g2 = NonlinearitySpec::parse(&["z1"]).unwrap();
    let est = c1_distance(&g1, &g2, 0.5, 0).unwrap();
    let diff = g1.difference(&g2).unwrap();
    let dense = oracle::dense_c1_norm(&diff, 0.5, 1_000_000).unwrap();
    assert!(
        (est.raw - dense).abs() <= 0.02 * dense,
        "{} vs {dense}",
        est.raw
    );
}

#[test]
fn polynomial_m_dominates_dense_oracle() {
    let g = NonlinearitySpec::parse(&["z1*z2 - 0.5*z2^3", "z1^2"]).unwrap();
    let est = estimate_m(&g, 1.2, 0).unwrap();
    let dense = oracle::dense_c1_norm(&g, 1.2, 200_000).unwrap();
    assert!(est.value >= dense);
}

#[test]
fn embedding_constant_for_three_dimensions_from_direct_quadrature() {
    // ∫_0^R r²/(1+r⁴) dr by a fine midpoint rule plus the tail ~ 1/R
    let steps = 2_000_000;
    let rmax = 2000.0;
    let dr = rmax / steps as f64;
    let mut s = 0.0;
    for i in 0..steps {
        let r = (i as f64 + 0.5) * dr;
        s += r * r / (1.0 + r.powi(4)) * dr;
    }
    s += 1.0 / rmax;
    let pi = std::f64::consts::PI;
    let c3 = (4.0 * pi * s / (2.0 * pi).powi(3)).sqrt();
    assert!((analysis::embedding_constant(3).unwrap() - c3).abs() < 1e-7);
}
