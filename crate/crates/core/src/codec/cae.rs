//! Convolutional autoencoder over 13x17x2 velocity fields.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::layers::{Geometry, LayerCache, LayerSpec};
use crate::domain::{FieldTensor, LATENT_DIM};
use crate::error::{Error, Result};

pub const FIELD_ROWS: usize = 13;
pub const FIELD_COLS: usize = 17;
pub const FIELD_LEN: usize = FIELD_ROWS * FIELD_COLS * 2;

/// Index of the layer whose output is the latent code.
pub const LATENT_LAYER: usize = 3;

/// The encoder/decoder stack; every layer is followed by `tanh`.
pub const ARCHITECTURE: [LayerSpec; 9] = [
    LayerSpec::conv(2, 32, 5, 5),
    LayerSpec::conv(32, 32, 5, 5),
    LayerSpec::conv(32, 32, 5, 5),
    LayerSpec::conv(32, LATENT_DIM, 1, 5),
    LayerSpec::tconv(LATENT_DIM, 32, 1, 5, 0),
    LayerSpec::tconv(32, 32, 5, 5, 0),
    LayerSpec::tconv(32, 32, 5, 5, 0),
    LayerSpec::tconv(32, 32, 5, 5, 0),
    LayerSpec::tconv(32, 2, 3, 3, 1),
];

#[derive(Debug, Clone, PartialEq)]
pub struct CaeModel {
    layers: Vec<LayerSpec>,
    /// Flat parameters: per layer, weights then biases.
    params: Vec<f64>,
    offsets: Vec<usize>,
    pub seed: u64,
    pub iterations: u64,
    /// Fields are divided by this before entering the network.
    pub input_scale: f64,
}

/// Parameter gradients in the model's flat layout.
pub type Gradients = Vec<f64>;

fn offsets_of(layers: &[LayerSpec]) -> Vec<usize> {
    let mut offs = Vec::with_capacity(layers.len() + 1);
    let mut acc = 0;
    offs.push(0);
    for l in layers {
        acc += l.param_len();
        offs.push(acc);
    }
    offs
}

/// Per-layer `(channels, height, width)` outputs starting from the input.
pub fn shape_chain(layers: &[LayerSpec]) -> Result<Vec<(usize, usize, usize)>> {
    let mut shapes = vec![(2, FIELD_ROWS, FIELD_COLS)];
    for (i, l) in layers.iter().enumerate() {
        let (c, h, w) = *shapes.last().expect("nonempty");
        if c != l.in_channels {
            return Err(Error::ShapeError {
                expected: format!("layer {i} input channels {}", l.in_channels),
                got: c.to_string(),
            });
        }
        let (oh, ow) = l.out_hw(h, w).ok_or_else(|| Error::ShapeError {
            expected: format!("layer {i} to accept {h}x{w}"),
            got: format!("{:?}", l.kernel),
        })?;
        shapes.push((l.out_channels, oh, ow));
    }
    Ok(shapes)
}

/// Glorot-uniform weights, zero biases.
pub fn cae_init(seed: u64) -> CaeModel {
    let layers = ARCHITECTURE.to_vec();
    let offsets = offsets_of(&layers);
    let mut params = vec![0.0; *offsets.last().expect("nonempty")];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (l, &off) in layers.iter().zip(&offsets) {
        let limit = (6.0 / (l.fan_in() + l.fan_out()) as f64).sqrt();
        for w in &mut params[off..off + l.weight_len()] {
            *w = rng.random_range(-limit..limit);
        }
    }
    CaeModel {
        layers,
        params,
        offsets,
        seed,
        iterations: 0,
        input_scale: 1.0,
    }
}

struct Pass {
    input: Vec<f64>,
    caches: Vec<LayerCache>,
}

impl CaeModel {
    pub fn from_parts(
        layers: Vec<LayerSpec>,
        params: Vec<f64>,
        seed: u64,
        iterations: u64,
        input_scale: f64,
    ) -> Result<Self> {
        let chain = shape_chain(&layers)?;
        if chain.last() != Some(&(2, FIELD_ROWS, FIELD_COLS))
            || chain.get(LATENT_LAYER + 1) != Some(&(LATENT_DIM, 1, 1))
        {
            return Err(Error::ShapeError {
                expected: "13x17x2 autoencoder with an 8-d bottleneck".into(),
                got: format!("{chain:?}"),
            });
        }
        let offsets = offsets_of(&layers);
        if params.len() != *offsets.last().expect("nonempty") {
            return Err(Error::ShapeError {
                expected: format!("{} parameters", offsets.last().expect("nonempty")),
                got: params.len().to_string(),
            });
        }
        if params.iter().any(|p| !p.is_finite()) || !(input_scale > 0.0) {
            return Err(Error::InvalidConfig("non-finite parameters or scale".into()));
        }
        Ok(Self {
            layers,
            params,
            offsets,
            seed,
            iterations,
            input_scale,
        })
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// `(weights, biases)` of one layer.
    pub fn layer_params(&self, i: usize) -> (&[f64], &[f64]) {
        self.params[self.offsets[i]..self.offsets[i + 1]].split_at(self.layers[i].weight_len())
    }

    fn geometries(&self) -> Vec<Geometry> {
        let chain = shape_chain(&self.layers).expect("validated at construction");
        self.layers
            .iter()
            .enumerate()
            .map(|(i, spec)| Geometry {
                spec: *spec,
                in_hw: (chain[i].1, chain[i].2),
                out_hw: (chain[i + 1].1, chain[i + 1].2),
            })
            .collect()
    }

    fn layer_slice(&self, i: usize) -> &[f64] {
        &self.params[self.offsets[i]..self.offsets[i + 1]]
    }

    fn run(&self, geos: &[Geometry], input: Vec<f64>) -> Pass {
        let mut caches: Vec<LayerCache> = Vec::with_capacity(geos.len());
        for (i, g) in geos.iter().enumerate() {
            let x = caches.last().map_or(&input[..], |c| &c.out[..]);
            let cache = g.forward(self.layer_slice(i), x);
            debug_assert_eq!(cache.out.len(), g.spec.out_channels * g.out_hw.0 * g.out_hw.1);
            caches.push(cache);
        }
        Pass { input, caches }
    }

    /// Network-layout (`[channel][row][col]`, scaled) copy of a field.
    pub(crate) fn to_input(&self, field: &FieldTensor) -> Result<Vec<f64>> {
        let (r, c, _) = field.shape();
        if (r, c) != (FIELD_ROWS, FIELD_COLS) {
            return Err(Error::ShapeError {
                expected: format!("{FIELD_ROWS}x{FIELD_COLS}x2"),
                got: format!("{r}x{c}x2"),
            });
        }
        let mut x = vec![0.0; FIELD_LEN];
        let plane = FIELD_ROWS * FIELD_COLS;
        for (i, v) in field.values().iter().enumerate() {
            x[(i % 2) * plane + i / 2] = v / self.input_scale;
        }
        Ok(x)
    }

    fn to_field(&self, frame: i64, y: &[f64]) -> FieldTensor {
        let plane = FIELD_ROWS * FIELD_COLS;
        let values = (0..FIELD_LEN)
            .map(|i| y[(i % 2) * plane + i / 2] * self.input_scale)
            .collect();
        FieldTensor::from_values(frame, FIELD_ROWS, FIELD_COLS, values).expect("fixed shape")
    }

    /// 8-d code of one field.
    pub fn encode(&self, field: &FieldTensor) -> Result<[f64; LATENT_DIM]> {
        let geos = self.geometries();
        let mut x = self.to_input(field)?;
        for (i, g) in geos.iter().enumerate().take(LATENT_LAYER + 1) {
            x = g.forward(self.layer_slice(i), &x).out;
        }
        let mut code = [0.0; LATENT_DIM];
        code.copy_from_slice(&x);
        Ok(code)
    }

    /// Mean squared reconstruction error over a batch of network-layout inputs.
    pub(crate) fn loss_of_inputs(&self, inputs: &[Vec<f64>]) -> f64 {
        let geos = self.geometries();
        let mut total = 0.0;
        for x in inputs {
            let pass = self.run(&geos, x.clone());
            let y = &pass.caches.last().expect("layers").out;
            total += y.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        }
        total / (inputs.len() * FIELD_LEN) as f64
    }

    /// Loss and gradient of the batch-mean MSE for network-layout inputs.
    ///
    /// Samples are processed in fixed chunks, each reduced in order, so the
    /// result does not depend on the worker count.
    pub(crate) fn grad_of_inputs(&self, inputs: &[Vec<f64>]) -> (f64, Gradients) {
        use rayon::prelude::*;
        const CHUNK: usize = 8;
        let geos = self.geometries();
        let norm = 1.0 / (inputs.len() * FIELD_LEN) as f64;
        let partials: Vec<(f64, Vec<f64>)> = inputs
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut grad = vec![0.0; self.params.len()];
                let mut loss = 0.0;
                for x in chunk {
                    loss += self.accumulate(&geos, x, norm, &mut grad);
                }
                (loss, grad)
            })
            .collect();
        let mut grad = vec![0.0; self.params.len()];
        let mut loss = 0.0;
        for (l, g) in partials {
            loss += l;
            grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
        }
        (loss * norm, grad)
    }

    fn accumulate(&self, geos: &[Geometry], x: &[f64], norm: f64, grad: &mut [f64]) -> f64 {
        let pass = self.run(geos, x.to_vec());
        let y = &pass.caches.last().expect("layers").out;
        let loss = y.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        let mut d: Vec<f64> = y.iter().zip(x).map(|(a, b)| 2.0 * (a - b) * norm).collect();
        for i in (0..geos.len()).rev() {
            let input = if i == 0 {
                &pass.input[..]
            } else {
                &pass.caches[i - 1].out[..]
            };
            let (lo, hi) = (self.offsets[i], self.offsets[i + 1]);
            let dx = geos[i].backward(
                self.layer_slice(i),
                input,
                &pass.caches[i],
                &d,
                &mut grad[lo..hi],
                i > 0,
            );
            if let Some(dx) = dx {
                d = dx;
            }
        }
        loss
    }
}

fn inputs_of(model: &CaeModel, batch: &[FieldTensor]) -> Result<Vec<Vec<f64>>> {
    batch.iter().map(|f| model.to_input(f)).collect()
}

/// Latent codes and reconstructions (in field units) for a batch.
pub fn cae_forward(model: &CaeModel, batch: &[FieldTensor]) -> Result<(Vec<[f64; LATENT_DIM]>, Vec<FieldTensor>)> {
    let geos = model.geometries();
    let mut latents = Vec::with_capacity(batch.len());
    let mut recons = Vec::with_capacity(batch.len());
    for f in batch {
        let pass = model.run(&geos, model.to_input(f)?);
        let mut code = [0.0; LATENT_DIM];
        code.copy_from_slice(&pass.caches[LATENT_LAYER].out);
        latents.push(code);
        recons.push(model.to_field(f.frame, &pass.caches.last().expect("layers").out));
    }
    Ok((latents, recons))
}

/// Per-layer output shapes `(channels, rows, cols)` of one forward pass,
/// measured from the produced buffers.
pub fn cae_trace_shapes(model: &CaeModel, field: &FieldTensor) -> Result<Vec<(usize, usize, usize)>> {
    let geos = model.geometries();
    let pass = model.run(&geos, model.to_input(field)?);
    Ok(geos
        .iter()
        .zip(&pass.caches)
        .map(|(g, c)| {
            let plane = g.out_hw.0 * g.out_hw.1;
            (c.out.len() / plane, g.out_hw.0, g.out_hw.1)
        })
        .collect())
}

/// Batch-mean MSE in network (scaled) units.
pub fn cae_loss(model: &CaeModel, batch: &[FieldTensor]) -> Result<f64> {
    Ok(model.loss_of_inputs(&inputs_of(model, batch)?))
}

/// Gradient of the batch-mean MSE with respect to every parameter.
pub fn cae_gradients(model: &CaeModel, batch: &[FieldTensor]) -> Result<Gradients> {
    Ok(model.grad_of_inputs(&inputs_of(model, batch)?).1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(seed: u64) -> FieldTensor {
        let values = (0..FIELD_LEN)
            .map(|i| (((i as u64 * 7919 + seed * 31) % 200) as f64 / 100.0 - 1.0) * 0.8)
            .collect();
        FieldTensor::from_values(0, FIELD_ROWS, FIELD_COLS, values).unwrap()
    }

    #[test]
    fn init_is_deterministic() {
        assert_eq!(cae_init(3), cae_init(3));
        assert_ne!(cae_init(3).params(), cae_init(4).params());
    }

    #[test]
    fn parameter_count_matches_layer_table() {
        // (cin, cout, kh, kw) per layer; weights + one bias per output channel.
        let table = [
            (2, 32, 5, 5),
            (32, 32, 5, 5),
            (32, 32, 5, 5),
            (32, 8, 1, 5),
            (8, 32, 1, 5),
            (32, 32, 5, 5),
            (32, 32, 5, 5),
            (32, 32, 5, 5),
            (32, 2, 3, 3),
        ];
        let expected: usize = table.iter().map(|(i, o, h, w)| i * o * h * w + o).sum();
        assert_eq!(expected, 132_970);
        assert_eq!(cae_init(0).param_count(), expected);
    }

    #[test]
    fn shape_chain_matches_architecture() {
        let chain = shape_chain(&ARCHITECTURE).unwrap();
        assert_eq!(
            chain[1..],
            [
                (32, 9, 13),
                (32, 5, 9),
                (32, 1, 5),
                (8, 1, 1),
                (32, 1, 5),
                (32, 5, 9),
                (32, 9, 13),
                (32, 13, 17),
                (2, 13, 17),
            ]
        );
        let traced = cae_trace_shapes(&cae_init(1), &field(0)).unwrap();
        assert_eq!(traced, chain[1..].to_vec());
    }

    #[test]
    fn forward_shapes_and_ranges() {
        let model = cae_init(5);
        let (codes, recons) = cae_forward(&model, &[field(1), field(2)]).unwrap();
        assert_eq!(codes.len(), 2);
        assert!(codes.iter().flatten().all(|v| v.abs() < 1.0));
        assert_eq!(recons[0].shape(), (13, 17, 2));
        assert_eq!(model.encode(&field(1)).unwrap(), codes[0]);

        let bad = FieldTensor::zeros(0, 12, 17);
        assert!(matches!(cae_forward(&model, &[bad]), Err(Error::ShapeError { .. })));
    }

    #[test]
    fn zero_model_maps_to_zero() {
        let mut model = cae_init(0);
        model.params_mut().iter_mut().for_each(|p| *p = 0.0);
        let (codes, recons) = cae_forward(&model, &[field(3)]).unwrap();
        assert!(codes[0].iter().all(|v| *v == 0.0));
        assert!(recons[0].values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn zero_input_gives_zero_first_layer_weight_gradient() {
        let model = cae_init(2);
        let g = cae_gradients(&model, &[FieldTensor::zeros(0, 13, 17)]).unwrap();
        let n = ARCHITECTURE[0].weight_len();
        assert!(g[..n].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn duplicated_sample_gradient() {
        let model = cae_init(7);
        let one = cae_gradients(&model, &[field(4)]).unwrap();
        let two = cae_gradients(&model, &[field(4), field(4)]).unwrap();
        for (a, b) in one.iter().zip(&two) {
            assert!((a - b).abs() <= 1e-15 + 1e-12 * a.abs());
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let model = cae_init(11);
        let batch = [field(5), field(6)];
        let g = cae_gradients(&model, &batch).unwrap();
        let h = 1e-5;
        let mut probe = model.clone();
        for k in 0..40 {
            let i = (k * 3319 + 17) % model.param_count();
            let orig = probe.params()[i];
            probe.params_mut()[i] = orig + h;
            let up = cae_loss(&probe, &batch).unwrap();
            probe.params_mut()[i] = orig - h;
            let down = cae_loss(&probe, &batch).unwrap();
            probe.params_mut()[i] = orig;
            let fd = (up - down) / (2.0 * h);
            let rel = (fd - g[i]).abs() / fd.abs().max(g[i].abs()).max(1e-6);
            assert!(rel < 1e-4, "param {i}: analytic {} numeric {fd}", g[i]);
        }
    }
}
