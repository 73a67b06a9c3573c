use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rand::Rng;

use super::dense::{Activation, DenseLayer};
use super::lstm::LstmLayer;
use super::network::{Mode, Network};
use super::Tensor;
use crate::error::Result;
use crate::tensor::sparse_crossentropy;

/// Central-difference step.
pub const GRADCHECK_STEP: f64 = 1e-5;

/// Denominator floor of the relative error, so that entries whose true
/// gradient is ~0 are judged by absolute error instead.
const RELATIVE_FLOOR: f64 = 1e-6;

/// A scalar function of a set of parameter blocks with an analytic gradient.
pub trait Objective {
    fn block_names(&self) -> Vec<String>;
    fn blocks_mut(&mut self) -> Vec<&mut Tensor>;
    fn loss(&self) -> Result<f64>;
    fn gradients(&self) -> Result<Vec<Tensor>>;
}

#[derive(Debug, Clone)]
pub struct BlockReport {
    pub name: String,
    pub len: usize,
    pub max_relative_error: f64,
    pub max_absolute_error: f64,
    /// flat index of the worst entry
    pub worst_index: usize,
}

#[derive(Debug, Clone)]
pub struct GradcheckReport {
    pub tolerance: f64,
    pub blocks: Vec<BlockReport>,
}

impl GradcheckReport {
    pub fn max_relative_error(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| b.max_relative_error)
            .fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.blocks
            .iter()
            .all(|b| b.max_relative_error < self.tolerance)
    }
}

impl fmt::Display for GradcheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.blocks {
            writeln!(
                f,
                "{:<16} n={:<6} max_rel={:.3e} max_abs={:.3e} {}",
                b.name,
                b.len,
                b.max_relative_error,
                b.max_absolute_error,
                if b.max_relative_error < self.tolerance { "ok" } else { "FAIL" }
            )?;
        }
        Ok(())
    }
}

/// Compares analytic gradients against central finite differences,
/// perturbing every parameter once in each direction.
///
/// The relative error of an entry is `|a - n| / max(|a| + |n|, 1e-6)`.
pub fn gradcheck<O: Objective>(objective: &mut O, tolerance: f64) -> Result<GradcheckReport> {
    let analytic = objective.gradients()?;
    let names = objective.block_names();
    let mut blocks = Vec::with_capacity(names.len());
    for (b, name) in names.into_iter().enumerate() {
        let len = analytic[b].len();
        let mut report = BlockReport {
            name,
            len,
            max_relative_error: 0.0,
            max_absolute_error: 0.0,
            worst_index: 0,
        };
        for j in 0..len {
            let original = objective.blocks_mut()[b].data()[j];
            objective.blocks_mut()[b].data_mut()[j] = original + GRADCHECK_STEP;
            let plus = objective.loss()?;
            objective.blocks_mut()[b].data_mut()[j] = original - GRADCHECK_STEP;
            let minus = objective.loss()?;
            objective.blocks_mut()[b].data_mut()[j] = original;

            let numeric = (plus - minus) / (2.0 * GRADCHECK_STEP);
            let a = analytic[b].data()[j];
            let abs = (a - numeric).abs();
            let rel = abs / (a.abs() + numeric.abs()).max(RELATIVE_FLOOR);
            if rel > report.max_relative_error {
                report.max_relative_error = rel;
                report.worst_index = j;
            }
            report.max_absolute_error = report.max_absolute_error.max(abs);
        }
        blocks.push(report);
    }
    Ok(GradcheckReport { tolerance, blocks })
}

/// Mean cross-entropy of a softmax network on a fixed labeled batch,
/// evaluated with dropout off.
pub struct ClassifierObjective<'a> {
    pub network: &'a mut Network,
    pub input: &'a Tensor,
    pub labels: &'a [usize],
}

impl Objective for ClassifierObjective<'_> {
    fn block_names(&self) -> Vec<String> {
        self.network.param_names()
    }

    fn blocks_mut(&mut self) -> Vec<&mut Tensor> {
        self.network.params_mut()
    }

    fn loss(&self) -> Result<f64> {
        let probs = self.network.predict(self.input)?;
        sparse_crossentropy(&probs, self.labels)
    }

    fn gradients(&self) -> Result<Vec<Tensor>> {
        // Eval mode never draws from the generator
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (_, g) = self
            .network
            .loss_and_gradients(self.input, self.labels, Mode::Eval, &mut rng)?;
        Ok(g.blocks)
    }
}

/// The fixed set of small networks used to verify backpropagation:
/// dense softmax (10 inputs, 4 classes), one LSTM layer (4 inputs, 3 cells,
/// 5 steps) and two stacked LSTM layers (8 and 4 cells).
pub fn standard_suite(tolerance: f64, seed: u64) -> Result<Vec<(String, GradcheckReport)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let classes = 4;
    let batch = 3;
    let random = |shape: &[usize], rng: &mut ChaCha8Rng| {
        let n = shape.iter().product();
        Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
    };
    let labels: Vec<usize> = (0..batch).map(|b| b % classes).collect();
    let mut cases = Vec::new();

    let dense = Network {
        lstm: vec![],
        dense: vec![DenseLayer::new(10, classes, Activation::Softmax, &mut rng)],
        dropout: 0.0,
    };
    cases.push(("dense-softmax i=10 k=4", dense, random(&[batch, 10], &mut rng)?));

    let single = Network {
        lstm: vec![LstmLayer::new(4, 3, &mut rng)],
        dense: vec![DenseLayer::new(3, classes, Activation::Softmax, &mut rng)],
        dropout: 0.2,
    };
    cases.push(("lstm i=4 c=3 t=5", single, random(&[batch, 5, 4], &mut rng)?));

    let stacked = Network {
        lstm: vec![LstmLayer::new(4, 8, &mut rng), LstmLayer::new(8, 4, &mut rng)],
        dense: vec![DenseLayer::new(4, classes, Activation::Softmax, &mut rng)],
        dropout: 0.2,
    };
    cases.push(("lstm c=[8,4] t=5", stacked, random(&[batch, 5, 4], &mut rng)?));

    let mut out = Vec::new();
    for (name, mut network, input) in cases {
        let mut objective = ClassifierObjective {
            network: &mut network,
            input: &input,
            labels: &labels,
        };
        out.push((name.to_string(), gradcheck(&mut objective, tolerance)?));
    }
    Ok(out)
}
