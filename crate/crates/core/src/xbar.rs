//! Simulated semi-passive RRAM crossbar: 64 modular tiles of 8×8 devices.
//!
//! Signed matrix entries are stored differentially, w = s·(g⁺ − g⁻), with a
//! per-block scale s = max|w_block|/(g_max − g_min). Target conductances are
//! quantized to `n_levels` uniform levels, perturbed by seeded programming
//! noise and clipped. Reads apply an optional lumped line-resistance
//! attenuation per device plus seeded Gaussian read noise proportional to
//! each ideal current. All-zero 8×8 blocks are elided from the mapping;
//! levels are time-multiplexed over the mapped tiles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::rng::{rng_for, rng_for2, TAG_PROGRAM, TAG_VMM};
use rand_distr::{Distribution, Normal};

pub const TILE_DIM: usize = 8;
pub const MAX_TILES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceModel {
    pub g_min_s: f64,
    pub g_max_s: f64,
    pub n_levels: u64,
    /// Programming noise std as a fraction of (g_max - g_min).
    pub program_noise_sigma: f64,
    /// Read noise std as a fraction of each ideal device-current sum.
    pub read_noise_sigma: f64,
    pub line_resistance_ohm: f64,
}

impl Default for DeviceModel {
    fn default() -> Self {
        DeviceModel {
            g_min_s: 1e-6,
            g_max_s: 100e-6,
            n_levels: 256,
            program_noise_sigma: 0.01,
            read_noise_sigma: 0.005,
            line_resistance_ohm: 1.0,
        }
    }
}

impl DeviceModel {
    /// Nonidealities off: effectively continuous conductance levels, no
    /// noise, no line resistance.
    pub fn ideal() -> Self {
        DeviceModel {
            g_min_s: 1e-6,
            g_max_s: 100e-6,
            n_levels: 1 << 30,
            program_noise_sigma: 0.0,
            read_noise_sigma: 0.0,
            line_resistance_ohm: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.g_min_s > 0.0 && self.g_min_s < self.g_max_s) {
            return Err(Error::invalid("need 0 < g_min_s < g_max_s"));
        }
        if self.n_levels < 2 {
            return Err(Error::invalid("n_levels must be >= 2"));
        }
        if self.program_noise_sigma < 0.0
            || self.read_noise_sigma < 0.0
            || self.line_resistance_ohm < 0.0
        {
            return Err(Error::invalid("nonideality parameters must be >= 0"));
        }
        Ok(())
    }

    fn quantize(&self, g: f64) -> f64 {
        let span = self.g_max_s - self.g_min_s;
        let steps = (self.n_levels - 1) as f64;
        let code = ((g - self.g_min_s) / span * steps).round();
        self.g_min_s + code / steps * span
    }
}

/// A programmed differential tile pair (up to 8×8 used cells).
#[derive(Debug, Clone)]
pub struct TilePair {
    pub rows: usize,
    pub cols: usize,
    /// Row-major `rows × cols` conductances.
    pub g_plus: Vec<f64>,
    pub g_minus: Vec<f64>,
}

/// Where one nonzero 8×8 block of operator `op` lives.
#[derive(Debug, Clone)]
pub struct BlockMap {
    pub op: usize,
    pub row0: usize,
    pub col0: usize,
    pub tile: usize,
    pub scale: f64,
}

#[derive(Debug, Clone)]
pub struct CrossbarState {
    pub device: DeviceModel,
    pub seed: u64,
    tiles: Vec<TilePair>,
    blocks: Vec<BlockMap>,
    /// (rows, cols) per mapped operator.
    op_shapes: Vec<(usize, usize)>,
}

impl CrossbarState {
    pub fn mapped_tiles(&self) -> usize {
        self.tiles.len()
    }

    pub fn op_count(&self) -> usize {
        self.op_shapes.len()
    }

    pub fn op_shape(&self, op: usize) -> (usize, usize) {
        self.op_shapes[op]
    }

    /// Number of mapped (nonzero) blocks belonging to operator `op`.
    pub fn blocks_for(&self, op: usize) -> usize {
        self.blocks.iter().filter(|b| b.op == op).count()
    }

    /// Dequantized effective weight matrix of one operator, for tests and
    /// audits: w = s·(g⁺ − g⁻) with unmapped blocks contributing zero.
    pub fn effective_matrix(&self, op: usize) -> Mat {
        let (rows, cols) = self.op_shapes[op];
        let mut m = Mat::zeros(rows, cols);
        for b in self.blocks.iter().filter(|b| b.op == op) {
            let tile = &self.tiles[b.tile];
            for r in 0..tile.rows {
                for c in 0..tile.cols {
                    let w = b.scale * (tile.g_plus[r * tile.cols + c] - tile.g_minus[r * tile.cols + c]);
                    m.set(b.row0 + r, b.col0 + c, w);
                }
            }
        }
        m
    }
}

/// Usage counters accumulated over crossbar executions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct XbarTelemetry {
    pub mapped_tiles: usize,
    pub vmm_count: u64,
    pub tile_activations: u64,
}

impl XbarTelemetry {
    pub fn merge(&mut self, other: &XbarTelemetry) {
        self.mapped_tiles = self.mapped_tiles.max(other.mapped_tiles);
        self.vmm_count += other.vmm_count;
        self.tile_activations += other.tile_activations;
    }
}

/// Programs a list of operators onto the tile grid, eliding all-zero blocks.
pub fn program(operators: &[Mat], device: &DeviceModel, seed: u64) -> Result<CrossbarState> {
    device.validate()?;
    let span = device.g_max_s - device.g_min_s;
    let noise = if device.program_noise_sigma > 0.0 {
        Some(Normal::new(0.0, device.program_noise_sigma * span).unwrap())
    } else {
        None
    };
    let mut rng = rng_for(seed, TAG_PROGRAM);

    let mut tiles = Vec::new();
    let mut blocks = Vec::new();
    let mut op_shapes = Vec::new();
    for (op, mat) in operators.iter().enumerate() {
        op_shapes.push((mat.rows(), mat.cols()));
        for row0 in (0..mat.rows()).step_by(TILE_DIM) {
            for col0 in (0..mat.cols()).step_by(TILE_DIM) {
                let rows = TILE_DIM.min(mat.rows() - row0);
                let cols = TILE_DIM.min(mat.cols() - col0);
                let mut max_abs = 0.0f64;
                for r in 0..rows {
                    for c in 0..cols {
                        max_abs = max_abs.max(mat.get(row0 + r, col0 + c).abs());
                    }
                }
                if max_abs == 0.0 {
                    continue; // zero-block elision
                }
                let scale = max_abs / span;
                let mut g_plus = vec![0.0; rows * cols];
                let mut g_minus = vec![0.0; rows * cols];
                for r in 0..rows {
                    for c in 0..cols {
                        let w = mat.get(row0 + r, col0 + c);
                        let delta = w / scale;
                        let (tp, tm) = if delta >= 0.0 {
                            (device.g_min_s + delta, device.g_min_s)
                        } else {
                            (device.g_min_s, device.g_min_s - delta)
                        };
                        let mut gp = device.quantize(tp);
                        let mut gm = device.quantize(tm);
                        if let Some(n) = &noise {
                            gp += n.sample(&mut rng);
                            gm += n.sample(&mut rng);
                        }
                        g_plus[r * cols + c] = gp.clamp(device.g_min_s, device.g_max_s);
                        g_minus[r * cols + c] = gm.clamp(device.g_min_s, device.g_max_s);
                    }
                }
                blocks.push(BlockMap {
                    op,
                    row0,
                    col0,
                    tile: tiles.len(),
                    scale,
                });
                tiles.push(TilePair {
                    rows,
                    cols,
                    g_plus,
                    g_minus,
                });
            }
        }
    }
    if tiles.len() > MAX_TILES {
        return Err(Error::Capacity {
            required: tiles.len(),
            available: MAX_TILES,
        });
    }
    Ok(CrossbarState {
        device: *device,
        seed,
        tiles,
        blocks,
        op_shapes,
    })
}

/// Executes one mapped operator on the crossbar: per tile, differential
/// currents with optional line-resistance attenuation and read noise, scaled
/// and accumulated into the output vector.
pub fn vmm(state: &CrossbarState, op: usize, v: &[f64], seed: u64) -> Result<Vec<f64>> {
    if op >= state.op_shapes.len() {
        return Err(Error::invalid(format!("operator index {op} out of range")));
    }
    let (rows, cols) = state.op_shapes[op];
    if v.len() != cols {
        return Err(Error::invalid(format!(
            "input length {} does not match operator input dimension {cols}",
            v.len()
        )));
    }
    let dev = &state.device;
    let read_noise = if dev.read_noise_sigma > 0.0 {
        Some(Normal::new(0.0, 1.0).unwrap())
    } else {
        None
    };
    let mut rng = rng_for2(seed, TAG_VMM, op as u64);

    let mut out = vec![0.0; rows];
    for b in state.blocks.iter().filter(|b| b.op == op) {
        let tile = &state.tiles[b.tile];
        for r in 0..tile.rows {
            let mut i_plus = 0.0;
            let mut i_minus = 0.0;
            for c in 0..tile.cols {
                let x = v[b.col0 + c];
                if x == 0.0 {
                    continue;
                }
                let gp = tile.g_plus[r * tile.cols + c];
                let gm = tile.g_minus[r * tile.cols + c];
                let (ap, am) = if dev.line_resistance_ohm > 0.0 {
                    let pos = (r + c) as f64;
                    (
                        1.0 / (1.0 + dev.line_resistance_ohm * pos * gp),
                        1.0 / (1.0 + dev.line_resistance_ohm * pos * gm),
                    )
                } else {
                    (1.0, 1.0)
                };
                i_plus += gp * x * ap;
                i_minus += gm * x * am;
            }
            if let Some(n) = &read_noise {
                i_plus += n.sample(&mut rng) * dev.read_noise_sigma * i_plus.abs();
                i_minus += n.sample(&mut rng) * dev.read_noise_sigma * i_minus.abs();
            }
            out[b.row0 + r] += b.scale * (i_plus - i_minus);
        }
    }
    Ok(out)
}

/// Runs the full mapped DWT: applies each level operator in sequence, feeding
/// the approximation half forward. Returns coefficients in the same layout as
/// the reference transform (`[d1..dK, aK]`) plus usage telemetry.
pub fn dwt_on_crossbar(
    snippet: &[f64],
    state: &CrossbarState,
    seed: u64,
) -> Result<(Vec<f64>, XbarTelemetry)> {
    let n = state
        .op_shapes
        .first()
        .map(|&(_, cols)| cols)
        .ok_or_else(|| Error::invalid("crossbar state maps no operators"))?;
    if snippet.len() != n {
        return Err(Error::invalid(format!(
            "snippet length {} does not match crossbar input length {n}",
            snippet.len()
        )));
    }
    let mut telemetry = XbarTelemetry {
        mapped_tiles: state.mapped_tiles(),
        vmm_count: 0,
        tile_activations: 0,
    };
    let mut approx = snippet.to_vec();
    let mut details: Vec<Vec<f64>> = Vec::new();
    for op in 0..state.op_count() {
        let y = vmm(state, op, &approx, seed)?;
        telemetry.vmm_count += 1;
        telemetry.tile_activations += state.blocks_for(op) as u64;
        let half = y.len() / 2;
        details.push(y[half..].to_vec());
        approx = y[..half].to_vec();
    }
    let mut out = Vec::with_capacity(n);
    for d in &details {
        out.extend_from_slice(d);
    }
    out.extend_from_slice(&approx);
    Ok((out, telemetry))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{build_dwt_matrices, dwt, WaveletFamily, WaveletSpec};
    use crate::rng::rng_for;
    use rand::Rng;

    fn random_vec(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = rng_for(seed, 0xBA5);
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    fn single(mat: Mat, device: &DeviceModel, seed: u64) -> CrossbarState {
        program(&[mat], device, seed).unwrap()
    }

    #[test]
    fn fine_quantization_recovers_targets() {
        let mat = Mat::from_rows(
            (0..8)
                .map(|r| (0..8).map(|c| ((r * 8 + c) as f64).sin()).collect())
                .collect(),
        )
        .unwrap();
        let mut dev = DeviceModel::ideal();
        dev.n_levels = 1 << 30;
        let state = single(mat.clone(), &dev, 0);
        let eff = state.effective_matrix(0);
        let max_abs = (0..8)
            .flat_map(|r| (0..8).map(move |c| (r, c)))
            .map(|(r, c)| mat.get(r, c).abs())
            .fold(0.0f64, f64::max);
        for r in 0..8 {
            for c in 0..8 {
                let err = (eff.get(r, c) - mat.get(r, c)).abs();
                assert!(err <= 1e-6 * max_abs, "({r},{c}) err {err}");
            }
        }
    }

    #[test]
    fn two_level_code_is_ternary() {
        let mat = Mat::from_rows(vec![
            vec![0.9, -0.2, 0.0, 0.4],
            vec![-0.9, 0.6, 0.1, -0.5],
        ])
        .unwrap();
        let mut dev = DeviceModel::ideal();
        dev.n_levels = 2;
        let state = single(mat, &dev, 0);
        let eff = state.effective_matrix(0);
        let span = dev.g_max_s - dev.g_min_s;
        let s = state.blocks[0].scale;
        let step = s * span;
        for r in 0..eff.rows() {
            for c in 0..eff.cols() {
                let w = eff.get(r, c);
                let ok = [-step, 0.0, step]
                    .iter()
                    .any(|&t| (w - t).abs() < 1e-12 * step.max(1.0));
                assert!(ok, "({r},{c}) = {w} not in ternary code");
            }
        }
    }

    #[test]
    fn haar_five_level_mapping_fits_the_tile_budget() {
        let spec = WaveletSpec::default();
        let mats = build_dwt_matrices(&spec, 64).unwrap();
        let state = program(mats.levels(), &DeviceModel::ideal(), 0).unwrap();
        assert!(state.mapped_tiles() <= MAX_TILES);
        // Banded Haar level operators: 16 + 8 + 4 + 1 + 1 blocks.
        assert_eq!(state.mapped_tiles(), 30);
        let per_level: Vec<usize> = (0..5).map(|op| state.blocks_for(op)).collect();
        assert_eq!(per_level, vec![16, 8, 4, 1, 1]);
    }

    #[test]
    fn db4_mapping_also_fits() {
        let spec = WaveletSpec {
            family: WaveletFamily::Db4,
            levels: 5,
        };
        let mats = build_dwt_matrices(&spec, 64).unwrap();
        let state = program(mats.levels(), &DeviceModel::ideal(), 0).unwrap();
        assert!(state.mapped_tiles() <= MAX_TILES, "{}", state.mapped_tiles());
    }

    #[test]
    fn oversized_operator_reports_required_tiles() {
        let mat = Mat::from_rows(
            (0..96)
                .map(|r| (0..96).map(|c| 1.0 + ((r + c) as f64)).collect())
                .collect(),
        )
        .unwrap();
        let err = program(&[mat], &DeviceModel::ideal(), 0).unwrap_err();
        match err {
            Error::Capacity {
                required,
                available,
            } => {
                assert_eq!(required, 144);
                assert_eq!(available, 64);
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn identity_block_reproduces_the_input() {
        let mut mat = Mat::zeros(8, 8);
        for i in 0..8 {
            mat.set(i, i, 1.0);
        }
        let state = single(mat, &DeviceModel::ideal(), 0);
        let mut v = vec![0.0; 8];
        v[0] = 3.0;
        v[1] = 4.0;
        let out = vmm(&state, 0, &v, 0).unwrap();
        for (i, &o) in out.iter().enumerate() {
            assert!((o - v[i]).abs() < 1e-9, "row {i}: {o}");
        }
    }

    #[test]
    fn small_block_matches_direct_multiply() {
        let mat = Mat::from_rows(vec![vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let state = single(mat, &DeviceModel::ideal(), 0);
        let out = vmm(&state, 0, &[1.0, 1.0], 0).unwrap();
        assert!((out[0] - 3.0).abs() < 1e-9);
        assert!((out[1] - 7.0).abs() < 1e-9);
    }

    #[test]
    fn ideal_vmm_matches_dense_oracle() {
        let mat = Mat::from_rows(
            (0..24)
                .map(|r| (0..24).map(|c| ((r * 31 + c * 17) as f64 * 0.01).sin()).collect())
                .collect(),
        )
        .unwrap();
        let state = single(mat.clone(), &DeviceModel::ideal(), 1);
        for seed in 0..5 {
            let v = random_vec(24, seed);
            let want = mat.mul_vec(&v).unwrap();
            let got = vmm(&state, 0, &v, seed).unwrap();
            let scale = want.iter().fold(1.0f64, |m, &x| m.max(x.abs()));
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() < 1e-6 * scale, "{g} vs {w}");
            }
        }
    }

    #[test]
    fn ideal_crossbar_dwt_matches_reference() {
        let spec = WaveletSpec::default();
        let mats = build_dwt_matrices(&spec, 64).unwrap();
        let state = program(mats.levels(), &DeviceModel::ideal(), 3).unwrap();
        for seed in 0..10 {
            let x = random_vec(64, 900 + seed);
            let want = dwt(&x, &spec).unwrap();
            let (got, _) = dwt_on_crossbar(&x, &state, seed).unwrap();
            let scale = want.iter().fold(1.0f64, |m, &v| m.max(v.abs()));
            for (i, (g, w)) in got.iter().zip(&want).enumerate() {
                assert!((g - w).abs() <= 1e-6 * scale, "coeff {i}: {g} vs {w}");
            }
        }
    }

    #[test]
    fn zero_snippet_stays_zero_under_nonidealities() {
        let spec = WaveletSpec::default();
        let mats = build_dwt_matrices(&spec, 64).unwrap();
        let state = program(mats.levels(), &DeviceModel::default(), 5).unwrap();
        let (coeffs, _) = dwt_on_crossbar(&vec![0.0; 64], &state, 9).unwrap();
        assert!(coeffs.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn telemetry_counts_tile_activations_per_level() {
        let spec = WaveletSpec::default();
        let mats = build_dwt_matrices(&spec, 64).unwrap();
        let state = program(mats.levels(), &DeviceModel::ideal(), 0).unwrap();
        let (_, telemetry) = dwt_on_crossbar(&random_vec(64, 1), &state, 0).unwrap();
        assert_eq!(telemetry.vmm_count, 5);
        assert_eq!(telemetry.mapped_tiles, 30);
        assert_eq!(telemetry.tile_activations, 30); // 16+8+4+1+1
    }

    #[test]
    fn same_seed_same_output() {
        let spec = WaveletSpec::default();
        let mats = build_dwt_matrices(&spec, 64).unwrap();
        let state = program(mats.levels(), &DeviceModel::default(), 7).unwrap();
        let x = random_vec(64, 2);
        let a = dwt_on_crossbar(&x, &state, 11).unwrap().0;
        let b = dwt_on_crossbar(&x, &state, 11).unwrap().0;
        assert_eq!(a, b);
        let c = dwt_on_crossbar(&x, &state, 12).unwrap().0;
        assert_ne!(a, c);
    }

    #[test]
    fn output_error_grows_with_read_noise() {
        let mat = Mat::from_rows(
            (0..8)
                .map(|r| (0..8).map(|c| ((r + 2 * c) as f64 * 0.3).cos()).collect())
                .collect(),
        )
        .unwrap();
        let v = random_vec(8, 40);
        let mut stds = Vec::new();
        for &sigma in &[0.001, 0.01, 0.05] {
            let mut dev = DeviceModel::ideal();
            dev.read_noise_sigma = sigma;
            let state = single(mat.clone(), &dev, 0);
            let want = mat.mul_vec(&v).unwrap();
            let mut acc = 0.0;
            for trial in 0..1000u64 {
                let got = vmm(&state, 0, &v, trial).unwrap();
                acc += got
                    .iter()
                    .zip(&want)
                    .map(|(g, w)| (g - w) * (g - w))
                    .sum::<f64>();
            }
            stds.push((acc / 1000.0).sqrt());
        }
        assert!(stds[0] < stds[1] && stds[1] < stds[2], "{stds:?}");
    }

    #[test]
    fn weight_error_shrinks_as_levels_grow() {
        let mat = Mat::from_rows(
            (0..8)
                .map(|r| (0..8).map(|c| ((r * 8 + c) as f64 * 0.11).sin()).collect())
                .collect(),
        )
        .unwrap();
        let mut last = f64::INFINITY;
        for &levels in &[4u64, 16, 256, 65_536] {
            let mut dev = DeviceModel::ideal();
            dev.n_levels = levels;
            let state = single(mat.clone(), &dev, 0);
            let eff = state.effective_matrix(0);
            let mut err = 0.0;
            for r in 0..8 {
                for c in 0..8 {
                    let d = eff.get(r, c) - mat.get(r, c);
                    err += d * d;
                }
            }
            let rms = (err / 64.0).sqrt();
            assert!(rms <= last + 1e-15, "rms {rms} rose above {last}");
            last = rms;
        }
    }
}
