use ndarray::{Array2, Array4};
use vantage::nn::Conv2d;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

#[test]
#[ignore]
fn primitive_timings() {
    // Raw GEMM throughput.
    for n in [128usize, 256, 512] {
        let a: Array2<f32> = Array2::from_elem((n, n), 1.1);
        let b: Array2<f32> = Array2::from_elem((n, n), 0.9);
        let t0 = Instant::now();
        let reps = 20;
        let mut acc = 0f32;
        for _ in 0..reps {
            let c = a.dot(&b);
            acc += c[[0, 0]];
        }
        let dt = t0.elapsed().as_secs_f64() / reps as f64;
        let gflops = 2.0 * (n as f64).powi(3) / dt / 1e9;
        println!("gemm {n}x{n}: {:.4}s  {gflops:.2} GFLOP/s (acc {acc})", dt);
    }
    // One conv layer forward+backward at generator scale.
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for (ci, co, hw, b) in [(16usize, 16usize, 32usize, 8usize), (32, 32, 16, 8), (64, 64, 8, 8)] {
        let mut conv = Conv2d::<f32>::new(ci, co, 3, 1, 1, &mut rng);
        let x = Array4::from_elem((b, ci, hw, hw), 0.5f32);
        let t0 = Instant::now();
        let reps = 10;
        for _ in 0..reps {
            let y = conv.forward(&x);
            let _dx = conv.backward(&x, &y);
        }
        let dt = t0.elapsed().as_secs_f64() / reps as f64;
        println!("conv {ci}->{co} @{hw} b{b}: fwd+bwd {:.4}s", dt);
    }
}
