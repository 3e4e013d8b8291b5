#![allow(dead_code)]

use pact_core::nn::gradcheck::{check_gradients, GradCheck};
use pact_core::nn::model::{self, BnVars, ConvVars, ResBlockVars, UpBlockVars};
use pact_core::nn::{Graph, Reduction, Var};
use pact_core::tensor::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const STEP: f64 = 1e-5;
pub const REL_TOL: f64 = 1e-6;
/// Absolute error accepted for inputs whose exact gradient vanishes.
pub const ABS_TOL: f64 = 1e-8;
/// Draws with an activation input closer than this to a kink are redrawn.
pub const KINK_MARGIN: f64 = 1e-3;

pub fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n: usize = shape.iter().product();
    Tensor::new(
        shape.to_vec(),
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    )
    .unwrap()
}

type Op = Box<dyn Fn(&mut Graph, &[Var]) -> Var>;
type Kinks = Box<dyn Fn(&mut Graph, &[Var]) -> Vec<Var>>;

pub struct OpCase {
    pub name: &'static str,
    pub shapes: Vec<Vec<usize>>,
    pub op: Op,
    pub kinks: Option<Kinks>,
}

#[derive(Debug)]
pub struct CaseResult {
    pub name: &'static str,
    pub trials: usize,
    pub failures: usize,
    /// Largest relative error among inputs with a non-vanishing gradient.
    pub worst_rel: f64,
}

/// Runs `trials` accepted random draws of `case`, projecting the output to a scalar
/// with random weights.
pub fn run_case(case: &OpCase, trials: usize, seed: u64) -> CaseResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut accepted, mut failures, mut worst_rel, mut draws) = (0, 0, 0.0f64, 0);
    while accepted < trials {
        draws += 1;
        assert!(
            draws < 20 * trials,
            "{}: too many draws rejected",
            case.name
        );
        let inputs: Vec<Tensor> = case
            .shapes
            .iter()
            .map(|s| rand_tensor(&mut rng, s))
            .collect();
        let mut g = Graph::new();
        let vars: Vec<Var> = inputs.iter().map(|t| g.leaf(t.clone())).collect();
        let out = (case.op)(&mut g, &vars);
        let n_out = g.value(out).numel();
        if let Some(k) = &case.kinks {
            let near = k(&mut g, &vars)
                .into_iter()
                .any(|v| g.value(v).data.iter().any(|x| x.abs() < KINK_MARGIN));
            if near {
                continue;
            }
        }
        let w: Vec<f64> = (0..n_out).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let res: GradCheck = check_gradients(&inputs, STEP, |g, v| {
            let y = (case.op)(g, v);
            g.dot(y, &w)
        })
        .unwrap();
        if !res.passes(REL_TOL, ABS_TOL) {
            failures += 1;
        }
        for (r, scale) in res.rel_errors.iter().zip(&res.scales) {
            if *scale > 1e-6 {
                worst_rel = worst_rel.max(*r);
            }
        }
        accepted += 1;
    }
    CaseResult {
        name: case.name,
        trials,
        failures,
        worst_rel,
    }
}

fn s(v: &[usize]) -> Vec<usize> {
    v.to_vec()
}

fn conv(v: &[Var], i: usize) -> ConvVars {
    ConvVars {
        w: v[i],
        b: v[i + 1],
    }
}

fn mse_target() -> Tensor {
    rand_tensor(&mut ChaCha8Rng::seed_from_u64(77), &[2, 1, 3, 3])
}

/// Every differentiable operation of the network, on small shapes.
pub fn op_cases() -> Vec<OpCase> {
    vec![
        OpCase {
            name: "lstm",
            shapes: vec![s(&[2, 3, 4]), s(&[8, 3]), s(&[8, 2]), s(&[8])],
            op: Box::new(|g, v| g.lstm(v[0], v[1], v[2], v[3]).unwrap()),
            kinks: None,
        },
        OpCase {
            name: "fc",
            shapes: vec![s(&[3, 5]), s(&[4, 5]), s(&[4])],
            op: Box::new(|g, v| g.linear(v[0], v[1], v[2]).unwrap()),
            kinks: None,
        },
        OpCase {
            name: "encode",
            shapes: vec![s(&[2, 6]), s(&[8, 6]), s(&[8])],
            op: Box::new(|g, v| model::encode(g, v[0], v[1], v[2], 2).unwrap()),
            kinks: None,
        },
        OpCase {
            name: "conv",
            shapes: vec![s(&[2, 2, 4, 5]), s(&[3, 2, 3, 3]), s(&[3])],
            op: Box::new(|g, v| g.conv2d(v[0], v[1], Some(v[2])).unwrap()),
            kinks: None,
        },
        OpCase {
            name: "batch-norm (train)",
            shapes: vec![s(&[3, 2, 2, 3]), s(&[2]), s(&[2])],
            op: Box::new(|g, v| g.batch_norm_train(v[0], v[1], v[2]).unwrap().0),
            kinks: None,
        },
        OpCase {
            name: "batch-norm (eval)",
            shapes: vec![s(&[2, 3, 2, 2]), s(&[3]), s(&[3])],
            op: Box::new(|g, v| {
                g.batch_norm_eval(v[0], v[1], v[2], &[0.1, -0.2, 0.3], &[0.5, 1.5, 2.0])
                    .unwrap()
            }),
            kinks: None,
        },
        OpCase {
            name: "leaky relu 0.2",
            shapes: vec![s(&[2, 7])],
            op: Box::new(|g, v| g.leaky_relu(v[0], 0.2)),
            kinks: Some(Box::new(|_, v| vec![v[0]])),
        },
        OpCase {
            name: "upsample",
            shapes: vec![s(&[1, 2, 3, 2])],
            op: Box::new(|g, v| g.upsample2x(v[0]).unwrap()),
            kinks: None,
        },
        OpCase {
            name: "upsample block",
            shapes: vec![
                s(&[2, 2, 2, 2]),
                s(&[3, 2, 3, 3]),
                s(&[3]),
                s(&[3]),
                s(&[3]),
                s(&[3, 3, 3, 3]),
                s(&[3]),
                s(&[3]),
                s(&[3]),
            ],
            op: Box::new(|g, v| {
                let p = UpBlockVars {
                    conv1: conv(v, 1),
                    bn1: Some(BnVars {
                        gamma: v[3],
                        beta: v[4],
                        running: None,
                    }),
                    conv2: conv(v, 5),
                    bn2: Some(BnVars {
                        gamma: v[7],
                        beta: v[8],
                        running: None,
                    }),
                };
                model::upsample_block(g, v[0], &p, 0.2).unwrap().0
            }),
            kinks: Some(Box::new(|g, v| {
                let up = g.upsample2x(v[0]).unwrap();
                let c1 = g.conv2d(up, v[1], Some(v[2])).unwrap();
                let (b1, _) = g.batch_norm_train(c1, v[3], v[4]).unwrap();
                let a1 = g.leaky_relu(b1, 0.2);
                let c2 = g.conv2d(a1, v[5], Some(v[6])).unwrap();
                let (b2, _) = g.batch_norm_train(c2, v[7], v[8]).unwrap();
                vec![b1, b2]
            })),
        },
        OpCase {
            name: "res block",
            shapes: vec![
                s(&[1, 2, 3, 3]),
                s(&[2, 2, 3, 3]),
                s(&[2]),
                s(&[2, 2, 3, 3]),
                s(&[2]),
                s(&[1, 2, 3, 3]),
                s(&[1]),
            ],
            op: Box::new(|g, v| {
                let p = ResBlockVars {
                    conv1: conv(v, 1),
                    conv2: conv(v, 3),
                    conv3: conv(v, 5),
                };
                model::res_block(g, v[0], &p, 0.2).unwrap()
            }),
            kinks: Some(Box::new(|g, v| {
                let h = g.conv2d(v[0], v[1], Some(v[2])).unwrap();
                let a = g.leaky_relu(h, 0.2);
                let h2 = g.conv2d(a, v[3], Some(v[4])).unwrap();
                let sum = g.add(v[0], h2).unwrap();
                let y = g.conv2d(sum, v[5], Some(v[6])).unwrap();
                vec![h, y]
            })),
        },
        OpCase {
            name: "mse (sum)",
            shapes: vec![s(&[2, 1, 3, 3])],
            op: Box::new(|g, v| g.mse(v[0], &mse_target(), Reduction::Sum).unwrap()),
            kinks: None,
        },
        OpCase {
            name: "mse (mean)",
            shapes: vec![s(&[2, 1, 3, 3])],
            op: Box::new(|g, v| g.mse(v[0], &mse_target(), Reduction::Mean).unwrap()),
            kinks: None,
        },
    ]
}
