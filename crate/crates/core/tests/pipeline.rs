use pact_core::delay_line::standard_schedule;
use pact_core::geometry::build_ring_geometry;
use pact_core::nn::{Model, ModelConfig};
use pact_core::phantom::{sample_random_phantom, Phantom};
use pact_core::pipeline::{acquire_composites, composites_to_input, end_to_end, Reconstructor};
use pact_core::tensor::Tensor;
use pact_core::SimConfig;

#[test]
fn lossless_delay_line_is_transparent() {
    let cfg = SimConfig::desk();
    let geom = build_ring_geometry(cfg.n_sensors, cfg.ring_radius).unwrap();
    let model = Model::new(ModelConfig::desk(), 3).unwrap();
    let schedule = standard_schedule();
    assert_eq!(schedule.echo_coeff, 0.0);
    for seed in 0..5 {
        let phantom = sample_random_phantom(seed, &cfg);
        let direct = acquire_composites(&phantom, &geom, &cfg, None).unwrap();
        let through = acquire_composites(&phantom, &geom, &cfg, Some(&schedule)).unwrap();
        assert_eq!(direct.data, through.data);
        assert_eq!(
            composites_to_input(&direct, &model).unwrap(),
            composites_to_input(&through, &model).unwrap()
        );
        let a = end_to_end(&phantom, &cfg, None, Reconstructor::Network(&model)).unwrap();
        let b = end_to_end(
            &phantom,
            &cfg,
            Some(&schedule),
            Reconstructor::Network(&model),
        )
        .unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn empty_phantom_gives_bias_floor() {
    let cfg = SimConfig::desk();
    let model = Model::new(ModelConfig::desk(), 1).unwrap();
    let img = end_to_end(
        &Phantom::default(),
        &cfg,
        Some(&standard_schedule()),
        Reconstructor::Network(&model),
    )
    .unwrap();
    let floor = model.infer(&Tensor::zeros(&[1, 4, 512])).unwrap();
    assert_eq!(img.data, floor.data);

    let das = end_to_end(
        &Phantom::default(),
        &cfg,
        Some(&standard_schedule()),
        Reconstructor::DasComposite,
    )
    .unwrap();
    assert!(das.data.iter().all(|&v| v == 0.0));
}

#[test]
fn first_echo_of_input_1_lands_in_input_3() {
    let cfg = SimConfig::desk();
    let geom = build_ring_geometry(cfg.n_sensors, cfg.ring_radius).unwrap();
    let phantom = sample_random_phantom(2, &cfg);
    let direct = acquire_composites(&phantom, &geom, &cfg, None).unwrap();
    let echoing = standard_schedule().with_echoes(0.3, 1).unwrap();
    let through = acquire_composites(&phantom, &geom, &cfg, Some(&echoing)).unwrap();
    assert_eq!(direct.data.row(0), through.data.row(0));
    assert_eq!(direct.data.row(1), through.data.row(1));
    assert_eq!(direct.data.row(2), through.data.row(2));
    let diff: f64 = direct
        .data
        .row(3)
        .iter()
        .zip(through.data.row(3))
        .map(|(a, b)| (a - b).abs())
        .sum();
    let echo: f64 = direct.data.row(1).iter().map(|v| 0.3 * v.abs()).sum();
    assert!((diff - echo).abs() <= 1e-9 * echo, "{diff} vs {echo}");
}
