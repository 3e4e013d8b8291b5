use pact_core::forward::{simulate_channels, simulate_image};
use pact_core::geometry::build_ring_geometry;
use pact_core::phantom::{Disc, Image, Phantom};
use pact_core::SimConfig;
use proptest::prelude::*;

fn small() -> SimConfig {
    SimConfig {
        n_sensors: 16,
        group_size: 4,
        grid_size: 32,
        ..SimConfig::default()
    }
}

fn disc() -> impl Strategy<Value = Disc> {
    (
        -0.015..0.015f64,
        -0.015..0.015f64,
        0.0005..0.003f64,
        0.2..1.0f64,
    )
        .prop_map(|(x, y, r, a)| Disc {
            center_x: x,
            center_y: y,
            radius: r,
            amplitude: a,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn linear_in_the_image(a in -2.0..2.0f64, b in -2.0..2.0f64, seed in 0u64..1000) {
        let cfg = small();
        let geom = build_ring_geometry(cfg.n_sensors, cfg.ring_radius).unwrap();
        let n = cfg.grid_size * cfg.grid_size;
        let px = |k: u64| ((seed * 7919 + k * 104729) % n as u64) as usize;
        let mut x = Image::zeros(cfg.grid_size);
        let mut y = Image::zeros(cfg.grid_size);
        x.data[px(1)] = 1.0;
        x.data[px(2)] = 0.5;
        y.data[px(3)] = 0.7;
        let mut mix = Image::zeros(cfg.grid_size);
        for i in 0..n {
            mix.data[i] = a * x.data[i] + b * y.data[i];
        }
        let sx = simulate_image(&x, &geom, &cfg).unwrap();
        let sy = simulate_image(&y, &geom, &cfg).unwrap();
        let sm = simulate_image(&mix, &geom, &cfg).unwrap();
        let scale = sx.data.max_abs().max(sy.data.max_abs()).max(1.0);
        for i in 0..sm.data.data.len() {
            let want = a * sx.data.data[i] + b * sy.data.data[i];
            prop_assert!((sm.data.data[i] - want).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn quarter_turn_shifts_channels(d in disc()) {
        let cfg = small();
        let geom = build_ring_geometry(cfg.n_sensors, cfg.ring_radius).unwrap();
        let rotated = Disc { center_x: -d.center_y, center_y: d.center_x, ..d };
        let s = simulate_channels(&Phantom::new(vec![d]), &geom, &cfg).unwrap();
        let r = simulate_channels(&Phantom::new(vec![rotated]), &geom, &cfg).unwrap();
        let shift = cfg.n_sensors / 4;
        let scale = s.data.max_abs().max(1e-12);
        for ch in 0..cfg.n_sensors {
            let a = s.data.row(ch);
            let b = r.data.row((ch + shift) % cfg.n_sensors);
            for (u, v) in a.iter().zip(b) {
                prop_assert!((u - v).abs() <= 1e-9 * scale);
            }
        }
    }
}

#[test]
fn amplitude_scales_signal() {
    let cfg = small();
    let geom = build_ring_geometry(cfg.n_sensors, cfg.ring_radius).unwrap();
    let d = Disc {
        center_x: 0.004,
        center_y: -0.002,
        radius: 0.002,
        amplitude: 1.0,
    };
    let one = simulate_channels(&Phantom::new(vec![d]), &geom, &cfg).unwrap();
    let half = simulate_channels(
        &Phantom::new(vec![Disc {
            amplitude: 0.5,
            ..d
        }]),
        &geom,
        &cfg,
    )
    .unwrap();
    for (a, b) in one.data.data.iter().zip(&half.data.data) {
        assert!((0.5 * a - b).abs() <= 1e-12 * one.data.max_abs());
    }
}
