use neuronlab_core::activations::make_relu;
use neuronlab_core::distributions::standard_gaussian;
use neuronlab_core::linalg::{basis_vector, scale};
use neuronlab_core::objective::Problem;
use neuronlab_core::optimize::{run_sgd, OptimizerConfig};
use neuronlab_core::rng::derive_seed;

// The certified SGD step is far too small to run; a practical step still
// reaches the target from a warm start.
#[test]
fn sgd_with_practical_step_reaches_target() {
    let d = 5;
    let v = basis_vector(d, 0);
    let p = Problem::new(standard_gaussian(d).unwrap(), make_relu(0.0).unwrap(), v.clone()).unwrap();
    let cfg = OptimizerConfig::sgd(0.01, 20_000).with_stride(1000);
    let mut hits = 0;
    for k in 0..50u64 {
        let u = scale(&basis_vector(d, 1 + (k as usize) % (d - 1)), if k % 2 == 0 { 0.4 } else { -0.4 });
        let w0: Vec<f64> = v.iter().zip(&u).map(|(a, b)| a + b).collect();
        let tr = run_sgd(&p, &w0, &cfg, derive_seed(11, k)).unwrap();
        hits += usize::from(tr.last().dist_sq <= 0.05);
    }
    assert!(hits >= 45, "{hits}/50 reached 0.05");
}
