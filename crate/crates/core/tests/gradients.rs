use idiomshot::nn::{
    finite_diff_grad, max_relative_error, Activation, LayerSpec, Loss, Mlp, Mode, Rng, PROB_EPS,
};
use proptest::prelude::*;

const H: f64 = 1e-6;
const TOLERANCE: f64 = 1e-4;

fn loss_at(mlp: &Mlp, x: &[f64], loss: Loss, target: bool, mode: Mode, seed: u64) -> f64 {
    let pass = mlp.forward(x, mode, &mut Rng::new(seed)).unwrap();
    loss.value(pass.output()[0], target)
}

/// Analytic parameter and input gradients against central differences.
/// Returns `None` when the instance sits near a ReLU kink or the BCE clamp.
fn check(mlp: &Mlp, x: &[f64], loss: Loss, target: bool, mode: Mode, seed: u64) -> Option<(f64, f64)> {
    let pass = mlp.forward(x, mode, &mut Rng::new(seed)).unwrap();
    if pass.pre_activations().iter().flatten().any(|z| z.abs() < 1e-3) {
        return None;
    }
    let s = pass.output()[0];
    if loss == Loss::Bce && !(10.0 * PROB_EPS..=1.0 - 10.0 * PROB_EPS).contains(&s) {
        return None;
    }
    let back = mlp.backward(&pass, &[loss.grad(s, target)]).unwrap();

    let params = mlp.flat_params();
    let numeric_params = finite_diff_grad(
        |p| {
            let mut probe = mlp.clone();
            probe.set_flat_params(p).unwrap();
            loss_at(&probe, x, loss, target, mode, seed)
        },
        &params,
        H,
    );
    let numeric_input = finite_diff_grad(|xi| loss_at(mlp, xi, loss, target, mode, seed), x, H);
    Some((
        max_relative_error(&back.grads.flatten(), &numeric_params),
        max_relative_error(&back.input, &numeric_input),
    ))
}

fn arb_activation() -> impl Strategy<Value = Activation> {
    prop::sample::select(vec![Activation::Sigmoid, Activation::Relu, Activation::Identity])
}

fn arb_case() -> impl Strategy<Value = (Vec<LayerSpec>, Loss)> {
    let hidden = prop::collection::vec((1usize..=8, arb_activation(), prop::sample::select(vec![0.0, 0.3])), 0..3);
    (1usize..=8, hidden, arb_activation(), prop::sample::select(vec![Loss::Bce, Loss::Mse])).prop_map(
        |(input, hidden, out_act, loss)| {
            // BCE needs a probability, so it always reads a sigmoid unit.
            let out_act = if loss == Loss::Bce { Activation::Sigmoid } else { out_act };
            let mut specs = Vec::new();
            let mut width = input;
            for (output, activation, dropout) in hidden {
                specs.push(LayerSpec { input: width, output, activation, dropout });
                width = output;
            }
            specs.push(LayerSpec { input: width, output: 1, activation: out_act, dropout: 0.0 });
            (specs, loss)
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn analytic_gradients_match_central_differences(
        (specs, loss) in arb_case(),
        seed: u64,
        target: bool,
        train in any::<bool>(),
    ) {
        let mut rng = Rng::new(seed);
        let mlp = Mlp::init(&specs, &mut rng).unwrap();
        let x: Vec<f64> = (0..specs[0].input).map(|_| rng.normal()).collect();
        let mode = if train { Mode::Train } else { Mode::Eval };
        if let Some((params, input)) = check(&mlp, &x, loss, target, mode, seed ^ 0x5eed) {
            prop_assert!(params < TOLERANCE, "parameter gradient error {params}");
            prop_assert!(input < TOLERANCE, "input gradient error {input}");
        }
    }
}

/// For y = w·x + b and L = (y − t)², dL/dw = 2(y − t)x and dL/db = 2(y − t).
#[test]
fn least_squares_closed_form() {
    let spec = LayerSpec { input: 3, output: 1, activation: Activation::Identity, dropout: 0.0 };
    let mut mlp = Mlp::zeros(&[spec]).unwrap();
    mlp.set_flat_params(&[0.5, -1.0, 2.0, 0.25]).unwrap();
    let x = [1.0, 2.0, -0.5];
    let y = 0.5 - 2.0 - 1.0 + 0.25;
    let pass = mlp.forward(&x, Mode::Eval, &mut Rng::new(0)).unwrap();
    assert_eq!(pass.output()[0], y);
    let r = 2.0 * (y - 1.0);
    let back = mlp.backward(&pass, &[Loss::Mse.grad(y, true)]).unwrap();
    assert_eq!(back.grads.flatten(), vec![r * x[0], r * x[1], r * x[2], r]);
    assert_eq!(back.input, vec![r * 0.5, r * -1.0, r * 2.0]);
}

/// A sigmoid unit under BCE has the classic dL/dz = s − t.
#[test]
fn logistic_regression_closed_form() {
    let spec = LayerSpec { input: 2, output: 1, activation: Activation::Sigmoid, dropout: 0.0 };
    let mut mlp = Mlp::zeros(&[spec]).unwrap();
    mlp.set_flat_params(&[0.3, -0.8, 0.1]).unwrap();
    let x = [2.0, 1.0];
    let pass = mlp.forward(&x, Mode::Eval, &mut Rng::new(0)).unwrap();
    let s = pass.output()[0];
    let back = mlp.backward(&pass, &[Loss::Bce.grad(s, false)]).unwrap();
    let expected = [s * x[0], s * x[1], s];
    for (a, b) in back.grads.flatten().iter().zip(expected) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
}
