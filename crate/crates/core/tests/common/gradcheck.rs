//! Central finite-difference checks for every tape primitive.

use infogain_autodiff::{Padding, Tape, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-4;

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

fn weighted_loss(tape: &mut Tape, out: Var, weights: &[f64]) -> Var {
    let shape = tape.value(out).shape().to_vec();
    let w = tape.constant(Tensor::new(shape, weights.to_vec()));
    let prod = tape.mul(out, w);
    tape.reduce_sum(prod, None)
}

fn eval<F>(inputs: &[Tensor], weights: &[f64], f: &F) -> f64
where
    F: Fn(&mut Tape, &[Var]) -> Var,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.constant(t.clone())).collect();
    let out = f(&mut tape, &vars);
    let loss = weighted_loss(&mut tape, out, weights);
    tape.value(loss).item()
}

/// Worst relative error between the reverse sweep and central differences of
/// `sum(f(inputs) * w)` for random weights `w`.
pub fn gradcheck<F>(inputs: &[Tensor], rng: &mut ChaCha8Rng, f: F) -> f64
where
    F: Fn(&mut Tape, &[Var]) -> Var,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.param(t.clone())).collect();
    let out = f(&mut tape, &vars);
    let weights: Vec<f64> = (0..tape.value(out).numel())
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    let loss = weighted_loss(&mut tape, out, &weights);
    let grads = tape.backward(loss).unwrap();
    let mut worst: f64 = 0.0;
    for (k, input) in inputs.iter().enumerate() {
        let analytic = grads.get(vars[k]).unwrap().to_vec();
        for i in 0..input.numel() {
            let mut plus = inputs.to_vec();
            plus[k].data_mut()[i] += H;
            let mut minus = inputs.to_vec();
            minus[k].data_mut()[i] -= H;
            let numeric = (eval(&plus, &weights, &f) - eval(&minus, &weights, &f)) / (2.0 * H);
            worst = worst.max(rel_err(analytic[i], numeric));
        }
    }
    worst
}

fn t(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(lo..hi)).collect())
}

/// Uniform draws at least `gap` away from every kink in `avoid`.
fn away(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64, avoid: &[f64], gap: f64) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| loop {
            let v = rng.random_range(lo..hi);
            if avoid.iter().all(|a| (v - a).abs() > gap) {
                break v;
            }
        })
        .collect();
    Tensor::new(shape.to_vec(), data)
}

type Case = (&'static str, fn(&mut ChaCha8Rng) -> f64);

fn cases() -> Vec<Case> {
    vec![
        ("add", |r| {
            gradcheck(&[t(r, &[3, 4], -2.0, 2.0), t(r, &[3, 4], -2.0, 2.0)], r, |tp, v| {
                tp.add(v[0], v[1])
            })
        }),
        ("sub", |r| {
            gradcheck(&[t(r, &[5], -2.0, 2.0), t(r, &[5], -2.0, 2.0)], r, |tp, v| {
                tp.sub(v[0], v[1])
            })
        }),
        ("mul", |r| {
            gradcheck(&[t(r, &[2, 3], -2.0, 2.0), t(r, &[2, 3], -2.0, 2.0)], r, |tp, v| {
                tp.mul(v[0], v[1])
            })
        }),
        ("minimum", |r| {
            let a = t(r, &[6], -2.0, 2.0);
            let b = Tensor::new(
                vec![6],
                a.data()
                    .iter()
                    .map(|x| x + if r.random_bool(0.5) { 0.5 } else { -0.5 })
                    .collect(),
            );
            gradcheck(&[a, b], r, |tp, v| tp.minimum(v[0], v[1]))
        }),
        ("scale", |r| {
            gradcheck(&[t(r, &[4], -2.0, 2.0)], r, |tp, v| tp.scale(v[0], -1.7))
        }),
        ("add_scalar", |r| {
            gradcheck(&[t(r, &[4], -2.0, 2.0)], r, |tp, v| tp.add_scalar(v[0], 0.3))
        }),
        ("relu", |r| {
            gradcheck(&[away(r, &[8], -2.0, 2.0, &[0.0], 1e-2)], r, |tp, v| tp.relu(v[0]))
        }),
        ("tanh", |r| {
            gradcheck(&[t(r, &[8], -3.0, 3.0)], r, |tp, v| tp.tanh(v[0]))
        }),
        ("exp", |r| gradcheck(&[t(r, &[8], -3.0, 3.0)], r, |tp, v| tp.exp(v[0]))),
        ("log", |r| gradcheck(&[t(r, &[8], 0.1, 5.0)], r, |tp, v| tp.log(v[0]))),
        ("sqrt", |r| gradcheck(&[t(r, &[8], 0.1, 5.0)], r, |tp, v| tp.sqrt(v[0]))),
        ("erf", |r| gradcheck(&[t(r, &[8], -4.0, 4.0)], r, |tp, v| tp.erf(v[0]))),
        ("clamp", |r| {
            gradcheck(&[away(r, &[8], -2.0, 2.0, &[-0.8, 0.8], 1e-2)], r, |tp, v| {
                tp.clamp(v[0], -0.8, 0.8)
            })
        }),
        ("matmul", |r| {
            gradcheck(&[t(r, &[3, 4], -1.0, 1.0), t(r, &[4, 2], -1.0, 1.0)], r, |tp, v| {
                tp.matmul(v[0], v[1])
            })
        }),
        ("affine", |r| {
            let ins = [
                t(r, &[3, 4], -1.0, 1.0),
                t(r, &[4, 5], -1.0, 1.0),
                t(r, &[5], -1.0, 1.0),
            ];
            gradcheck(&ins, r, |tp, v| tp.affine(v[0], v[1], v[2]))
        }),
        ("softmax", |r| {
            gradcheck(&[t(r, &[3, 4], -3.0, 3.0)], r, |tp, v| tp.softmax(v[0]))
        }),
        ("conv2d_valid", |r| {
            let ins = [
                t(r, &[2, 2, 5, 4], -1.0, 1.0),
                t(r, &[3, 2, 3, 3], -1.0, 1.0),
                t(r, &[3], -1.0, 1.0),
            ];
            gradcheck(&ins, r, |tp, v| tp.conv2d(v[0], v[1], v[2], Padding::Valid))
        }),
        ("conv2d_same", |r| {
            let ins = [
                t(r, &[1, 2, 4, 4], -1.0, 1.0),
                t(r, &[2, 2, 3, 3], -1.0, 1.0),
                t(r, &[2], -1.0, 1.0),
            ];
            gradcheck(&ins, r, |tp, v| tp.conv2d(v[0], v[1], v[2], Padding::Same))
        }),
        ("reshape_flatten", |r| {
            gradcheck(&[t(r, &[2, 3, 2], -1.0, 1.0)], r, |tp, v| {
                let x = tp.reshape(v[0], vec![3, 4]);
                let x = tp.tanh(x);
                let x = tp.reshape(x, vec![2, 3, 2]);
                tp.flatten(x)
            })
        }),
        ("concat", |r| {
            let ins = [
                t(r, &[3, 2], -1.0, 1.0),
                t(r, &[3, 1], -1.0, 1.0),
                t(r, &[3, 4], -1.0, 1.0),
            ];
            gradcheck(&ins, r, |tp, v| tp.concat(&[v[0], v[1], v[2]]))
        }),
        ("gather_rows", |r| {
            let ins = [t(r, &[4, 3], -1.0, 1.0)];
            // repeated indices exercise gradient accumulation
            gradcheck(&ins, r, |tp, v| tp.gather_rows(v[0], &[3, 0, 0, 2, 1, 3]))
        }),
        ("reduce_sum", |r| {
            let axis = [None, Some(0), Some(1), Some(2)][r.random_range(0..4)];
            gradcheck(&[t(r, &[2, 3, 4], -1.0, 1.0)], r, move |tp, v| {
                tp.reduce_sum(v[0], axis)
            })
        }),
        ("reduce_mean", |r| {
            let axis = [None, Some(0), Some(1), Some(2)][r.random_range(0..4)];
            gradcheck(&[t(r, &[2, 3, 4], -1.0, 1.0)], r, move |tp, v| {
                tp.reduce_mean(v[0], axis)
            })
        }),
        ("gaussian_log_prob", |r| {
            let shared = r.random_bool(0.5);
            let ls = if shared {
                t(r, &[2], -1.0, 0.5)
            } else {
                t(r, &[4, 2], -1.0, 0.5)
            };
            let ins = [t(r, &[4, 2], -1.0, 1.0), ls, t(r, &[4, 2], -2.0, 2.0)];
            gradcheck(&ins, r, |tp, v| tp.gaussian_log_prob(v[0], v[1], v[2]))
        }),
    ]
}

/// `(primitive, worst relative error)` over `trials` random draws each.
pub fn primitive_gradchecks(trials: usize, seed: u64) -> Vec<(&'static str, f64)> {
    cases()
        .into_iter()
        .enumerate()
        .map(|(i, (name, case))| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed + i as u64);
            let worst = (0..trials).map(|_| case(&mut rng)).fold(0.0, f64::max);
            (name, worst)
        })
        .collect()
}
