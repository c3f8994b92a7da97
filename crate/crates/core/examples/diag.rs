// temporary calibration sweep over task geometry
use deltaz_core::harness::{run_experiment, ExperimentConfig};

fn main() {
    let mut results = Vec::new();
    for start in [30.0, 45.0, 60.0] {
        for target in [85.0, 95.0, 105.0, 120.0] {
            for eps in [0.7, 1.0] {
                let mut cfg = ExperimentConfig::default();
                cfg.env.start_angle = start;
                cfg.env.target_angle = target;
                cfg.reps.epsilon = eps;
                cfg.env.adc_noise_sd = 1.0;
                let mut conv = 0;
                let mut worst = 0;
                let mut sum_updates = 0;
                for robot in 0..3 {
                    for run in 0..14 {
                        let c = run_experiment(&cfg, robot, run).unwrap();
                        if c.status.converged() {
                            conv += 1;
                            let u = c.points.len() - 1;
                            sum_updates += u;
                            worst = worst.max(u);
                        }
                    }
                }
                println!(
                    "start={start:5.1} target={target:5.1} eps={eps}: {conv}/42 mean_u={:.1} worst={worst}",
                    sum_updates as f64 / conv.max(1) as f64
                );
                results.push((start, target, eps, conv));
            }
        }
    }
    results.sort_by_key(|r| std::cmp::Reverse(r.3));
    println!("best: {:?}", &results[..5.min(results.len())]);
}
