// SPDX-License-Identifier: Apache-2.0

//! Physical model: couplings, geometry, field waveforms and Hamiltonians.
//!
//! Dark-spin operators use the Pauli normalization `I = σ` (eigenvalues ±1),
//! the convention under which the closed-form phase and fidelity expressions
//! in [`crate::analysis`] hold without extra factors. The central spin is an
//! effective two-level system with `S_z = |1⟩⟨1| − 1/2`.

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::quantum::{OperatorMatrix, StateVector, C64};

/// Largest number of dark spins simulated exactly (central + 10 → dim 2048).
pub const MAX_EXACT_DARK: usize = 10;

/// Default exclusion radius as a fraction of the cube side.
pub const DEFAULT_EXCLUSION_FRACTION: f64 = 0.05;

const MAX_PLACEMENT_ATTEMPTS: usize = 100_000;

/// Central spin coupled to `n` dark spins.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinSystem {
    lambda: Vec<f64>,
    xi: f64,
    kappa_s: f64,
    kappa_bath: Vec<Vec<f64>>,
    polarization: f64,
    positions: Option<Vec<[f64; 3]>>,
}

impl SpinSystem {
    /// System without bath couplings.
    pub fn new(lambda: Vec<f64>, xi: f64, kappa_s: f64, polarization: f64) -> Result<Self> {
        let n = lambda.len();
        Self::with_bath(lambda, vec![vec![0.0; n]; n], xi, kappa_s, polarization)
    }

    pub fn with_bath(
        lambda: Vec<f64>,
        kappa_bath: Vec<Vec<f64>>,
        xi: f64,
        kappa_s: f64,
        polarization: f64,
    ) -> Result<Self> {
        let n = lambda.len();
        if kappa_bath.len() != n || kappa_bath.iter().any(|row| row.len() != n) {
            return Err(Error::Config(format!(
                "bath coupling matrix must be {n}×{n}"
            )));
        }
        for i in 0..n {
            if kappa_bath[i][i] != 0.0 {
                return Err(Error::Config(format!("bath coupling κ[{i}][{i}] must be zero")));
            }
            for j in 0..i {
                if kappa_bath[i][j] != kappa_bath[j][i] {
                    return Err(Error::Config(format!(
                        "bath coupling matrix not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        if !(-1.0..=1.0).contains(&polarization) {
            return Err(Error::Config(format!(
                "polarization {polarization} outside [-1, 1]"
            )));
        }
        let all_finite = lambda.iter().chain(kappa_bath.iter().flatten()).all(|v| v.is_finite())
            && xi.is_finite()
            && kappa_s.is_finite();
        if !all_finite {
            return Err(Error::Config("couplings must be finite".into()));
        }
        Ok(Self {
            lambda,
            xi,
            kappa_s,
            kappa_bath,
            polarization,
            positions: None,
        })
    }

    /// System whose couplings come from dipolar geometry.
    pub fn from_geometry(geometry: &Geometry, xi: f64, kappa_s: f64, polarization: f64) -> Result<Self> {
        let (lambda, kappa_bath) = dipolar_couplings(geometry)?;
        let mut system = Self::with_bath(lambda, kappa_bath, xi, kappa_s, polarization)?;
        system.positions = Some(geometry.positions.clone());
        Ok(system)
    }

    pub fn n_dark(&self) -> usize {
        self.lambda.len()
    }

    pub fn n_spins(&self) -> usize {
        self.lambda.len() + 1
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn kappa_s(&self) -> f64 {
        self.kappa_s
    }

    pub fn kappa_bath(&self) -> &[Vec<f64>] {
        &self.kappa_bath
    }

    pub fn polarization(&self) -> f64 {
        self.polarization
    }

    pub fn positions(&self) -> Option<&[[f64; 3]]> {
        self.positions.as_deref()
    }

    pub fn with_lambda(&self, lambda: Vec<f64>) -> Result<Self> {
        if lambda.len() != self.n_dark() {
            return Err(Error::DimensionMismatch {
                expected: self.n_dark(),
                found: lambda.len(),
            });
        }
        let mut out = self.clone();
        out.lambda = lambda;
        Ok(out)
    }

    pub fn with_polarization(&self, polarization: f64) -> Result<Self> {
        Self::with_bath(
            self.lambda.clone(),
            self.kappa_bath.clone(),
            self.xi,
            self.kappa_s,
            polarization,
        )
    }

    /// Same system with every `κᵢⱼ` set to zero.
    pub fn without_bath(&self) -> Self {
        let n = self.n_dark();
        let mut out = self.clone();
        out.kappa_bath = vec![vec![0.0; n]; n];
        out
    }

    pub fn has_bath(&self) -> bool {
        self.kappa_bath.iter().flatten().any(|&k| k != 0.0)
    }

    /// Restriction to the listed dark spins (in the given order).
    pub fn subsystem(&self, indices: &[usize]) -> Result<Self> {
        for &i in indices {
            if i >= self.n_dark() {
                return Err(Error::SiteOutOfRange {
                    index: i,
                    n_spins: self.n_dark(),
                });
            }
        }
        let lambda = indices.iter().map(|&i| self.lambda[i]).collect();
        let kappa_bath = indices
            .iter()
            .map(|&i| indices.iter().map(|&j| self.kappa_bath[i][j]).collect())
            .collect();
        let mut out = Self::with_bath(lambda, kappa_bath, self.xi, self.kappa_s, self.polarization)?;
        out.positions = self
            .positions
            .as_ref()
            .map(|p| indices.iter().map(|&i| p[i]).collect());
        Ok(out)
    }

    /// Serializes the system as `key = value` lines under a `[system]` header.
    pub fn to_text(&self) -> String {
        let mut out = String::from("[system]\n");
        out.push_str(&format!("xi = {}\n", self.xi));
        out.push_str(&format!("kappa_s = {}\n", self.kappa_s));
        out.push_str(&format!("polarization = {}\n", self.polarization));
        out.push_str(&format!("lambda = {}\n", join(&self.lambda)));
        for (i, row) in self.kappa_bath.iter().enumerate() {
            out.push_str(&format!("kappa_bath.{i} = {}\n", join(row)));
        }
        if let Some(positions) = &self.positions {
            for p in positions {
                out.push_str(&format!("position = {} {} {}\n", p[0], p[1], p[2]));
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut xi = None;
        let mut kappa_s = None;
        let mut polarization = None;
        let mut lambda = None;
        let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
        let mut positions = Vec::new();
        for (lineno, key, value) in key_values(text, "system")? {
            let floats = || parse_floats(value, lineno);
            match key {
                "xi" => xi = Some(parse_float(value, lineno)?),
                "kappa_s" => kappa_s = Some(parse_float(value, lineno)?),
                "polarization" => polarization = Some(parse_float(value, lineno)?),
                "lambda" => lambda = Some(floats()?),
                "position" => positions.push(parse_point(value, lineno)?),
                k if k.starts_with("kappa_bath.") => {
                    let idx = k["kappa_bath.".len()..].parse::<usize>().map_err(|_| {
                        Error::Config(format!("line {lineno}: bad row key `{k}`"))
                    })?;
                    rows.push((idx, floats()?));
                }
                other => {
                    return Err(Error::Config(format!("line {lineno}: unknown key `{other}`")))
                }
            }
        }
        let lambda = lambda.ok_or_else(|| Error::Config("missing `lambda`".into()))?;
        rows.sort_by_key(|(i, _)| *i);
        let kappa_bath = if rows.is_empty() {
            vec![vec![0.0; lambda.len()]; lambda.len()]
        } else {
            rows.into_iter().map(|(_, r)| r).collect()
        };
        let mut system = Self::with_bath(
            lambda,
            kappa_bath,
            xi.ok_or_else(|| Error::Config("missing `xi`".into()))?,
            kappa_s.ok_or_else(|| Error::Config("missing `kappa_s`".into()))?,
            polarization.ok_or_else(|| Error::Config("missing `polarization`".into()))?,
        )?;
        if !positions.is_empty() {
            if positions.len() != system.n_dark() {
                return Err(Error::Config("position count does not match lambda".into()));
            }
            system.positions = Some(positions);
        }
        Ok(system)
    }
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

fn key_values<'a>(text: &'a str, section: &str) -> Result<Vec<(usize, &'a str, &'a str)>> {
    let mut out = Vec::new();
    let mut in_section = false;
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') && line.ends_with(']') {
            in_section = &line[1..line.len() - 1] == section;
            continue;
        }
        if !in_section {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {lineno}: expected `key = value`")))?;
        out.push((lineno, k.trim(), v.trim()));
    }
    Ok(out)
}

fn parse_float(v: &str, lineno: usize) -> Result<f64> {
    v.parse::<f64>()
        .map_err(|_| Error::Config(format!("line {lineno}: `{v}` is not a number")))
}

fn parse_floats(v: &str, lineno: usize) -> Result<Vec<f64>> {
    v.split_whitespace().map(|t| parse_float(t, lineno)).collect()
}

fn parse_point(v: &str, lineno: usize) -> Result<[f64; 3]> {
    let f = parse_floats(v, lineno)?;
    if f.len() != 3 {
        return Err(Error::Config(format!("line {lineno}: a position needs 3 coordinates")));
    }
    Ok([f[0], f[1], f[2]])
}

/// Time profile of the external field over one sensing period.
#[derive(Clone, Debug, PartialEq)]
pub enum WaveformShape {
    /// Constant `b`.
    Dc,
    /// `+b` on `[0, τ/2)`, `−b` on `[τ/2, τ]`.
    EchoSquare,
    /// `(t_frac, value)` breakpoints; `value·b` holds until the next
    /// breakpoint, and the field is zero before the first one.
    Piecewise(Vec<(f64, f64)>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct FieldWaveform {
    shape: WaveformShape,
    amplitude: f64,
}

impl FieldWaveform {
    pub fn dc(amplitude: f64) -> Self {
        Self {
            shape: WaveformShape::Dc,
            amplitude,
        }
    }

    pub fn echo_square(amplitude: f64) -> Self {
        Self {
            shape: WaveformShape::EchoSquare,
            amplitude,
        }
    }

    pub fn piecewise(amplitude: f64, breakpoints: Vec<(f64, f64)>) -> Result<Self> {
        let increasing = breakpoints.windows(2).all(|w| w[0].0 < w[1].0);
        let in_range = breakpoints
            .iter()
            .all(|&(t, v)| (0.0..=1.0).contains(&t) && v.is_finite());
        if !increasing || !in_range {
            return Err(Error::Config(
                "piecewise breakpoints must be strictly increasing in [0, 1]".into(),
            ));
        }
        Ok(Self {
            shape: WaveformShape::Piecewise(breakpoints),
            amplitude,
        })
    }

    pub fn shape(&self) -> &WaveformShape {
        &self.shape
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn with_amplitude(&self, amplitude: f64) -> Self {
        Self {
            shape: self.shape.clone(),
            amplitude,
        }
    }

    fn unit_value(&self, t_frac: f64) -> f64 {
        match &self.shape {
            WaveformShape::Dc => 1.0,
            WaveformShape::EchoSquare => {
                if t_frac < 0.5 {
                    1.0
                } else {
                    -1.0
                }
            }
            WaveformShape::Piecewise(bp) => bp
                .iter()
                .rev()
                .find(|(t, _)| *t <= t_frac)
                .map_or(0.0, |(_, v)| *v),
        }
    }

    /// Field value at fractional time `t_frac`.
    pub fn value_at(&self, t_frac: f64) -> f64 {
        self.amplitude * self.unit_value(t_frac)
    }

    /// Interior fractions in `(0, 1)` where the field may change value.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.shape {
            WaveformShape::Dc => vec![],
            WaveformShape::EchoSquare => vec![0.5],
            WaveformShape::Piecewise(bp) => bp
                .iter()
                .map(|(t, _)| *t)
                .filter(|&t| t > 0.0 && t < 1.0)
                .collect(),
        }
    }

    /// `∫ b(t) dt` over `[from·τ, to·τ]`.
    pub fn integral(&self, from: f64, to: f64, tau: f64) -> f64 {
        let mut edges = vec![from];
        edges.extend(self.breakpoints().into_iter().filter(|&t| t > from && t < to));
        edges.push(to);
        edges
            .windows(2)
            .map(|w| self.value_at(w[0]) * (w[1] - w[0]) * tau)
            .sum()
    }
}

/// Dark-spin positions around a sensor at the origin.
#[derive(Clone, Debug, PartialEq)]
pub struct Geometry {
    pub side: f64,
    pub positions: Vec<[f64; 3]>,
}

impl Geometry {
    pub fn to_text(&self) -> String {
        let mut out = format!("[geometry]\nside = {}\n", self.side);
        for p in &self.positions {
            out.push_str(&format!("position = {} {} {}\n", p[0], p[1], p[2]));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut side = None;
        let mut positions = Vec::new();
        for (lineno, key, value) in key_values(text, "geometry")? {
            match key {
                "side" => side = Some(parse_float(value, lineno)?),
                "position" => positions.push(parse_point(value, lineno)?),
                other => {
                    return Err(Error::Config(format!("line {lineno}: unknown key `{other}`")))
                }
            }
        }
        Ok(Self {
            side: side.ok_or_else(|| Error::Config("missing `side`".into()))?,
            positions,
        })
    }
}

fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Places `n` spins uniformly in a cube of side `side` centred on the sensor,
/// redrawing any spin closer than `exclusion` to the sensor or an earlier spin.
pub fn sample_geometry<R: Rng + ?Sized>(
    n: usize,
    side: f64,
    exclusion: f64,
    rng: &mut R,
) -> Result<Geometry> {
    if !(side > 0.0) || !(exclusion >= 0.0) || exclusion >= side / 4.0 {
        return Err(Error::Config(format!(
            "need side > 0 and 0 <= exclusion < side/4 (side {side}, exclusion {exclusion})"
        )));
    }
    let origin = [0.0; 3];
    let half = side / 2.0;
    let mut positions: Vec<[f64; 3]> = Vec::with_capacity(n);
    for k in 0..n {
        let mut placed = false;
        for _ in 0..MAX_PLACEMENT_ATTEMPTS {
            let p = [
                rng.gen_range(-half..half),
                rng.gen_range(-half..half),
                rng.gen_range(-half..half),
            ];
            if distance(&p, &origin) >= exclusion
                && positions.iter().all(|q| distance(&p, q) >= exclusion)
            {
                positions.push(p);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::Config(format!(
                "could not place spin {k} of {n}: cube too crowded for exclusion {exclusion}"
            )));
        }
    }
    Ok(Geometry { side, positions })
}

/// Angular factor `(1 − 3cos²θ)/r³` for the vector `d`.
fn dipolar_factor(d: [f64; 3]) -> Result<f64> {
    let r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
    if r2 == 0.0 {
        return Err(Error::Config("coincident positions".into()));
    }
    let r = r2.sqrt();
    let cos2 = d[2] * d[2] / r2;
    Ok((1.0 - 3.0 * cos2) / (r2 * r))
}

/// Sensor–spin couplings `λᵢ = (1 − 3cos²θᵢ)/rᵢ³` and bath couplings
/// `κᵢⱼ = (1 − 3cos²θᵢⱼ)/(2rᵢⱼ³)`, with the field along z and unit prefactor.
pub fn dipolar_couplings(geometry: &Geometry) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let p = &geometry.positions;
    let n = p.len();
    let lambda = p.iter().map(|&x| dipolar_factor(x)).collect::<Result<Vec<_>>>()?;
    let mut kappa = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = [p[j][0] - p[i][0], p[j][1] - p[i][1], p[j][2] - p[i][2]];
            let k = 0.5 * dipolar_factor(d)?;
            kappa[i][j] = k;
            kappa[j][i] = k;
        }
    }
    Ok((lambda, kappa))
}

/// Axis of the dark-spin operator in the sensor–dark coupling term.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DarkFrame {
    Z,
    X,
}

/// `b(κ S_z + ξ Σ I_zⁱ) + |1⟩⟨1| Σ λᵢ I_{frame(i)}ⁱ [+ Σ_{i<j} κᵢⱼ(3I_zⁱI_zʲ − Iⁱ·Iʲ)]`.
///
/// Built entry by entry in the computational basis: every term is either
/// diagonal or flips one spin (x-frame coupling) or an antiparallel pair
/// (flip-flop part of the bath term).
pub fn build_hamiltonian(
    system: &SpinSystem,
    b: f64,
    dark_frame: &[DarkFrame],
    include_bath: bool,
) -> Result<OperatorMatrix> {
    let n = system.n_dark();
    if n > MAX_EXACT_DARK {
        return Err(Error::DimensionCap {
            n_dark: n,
            cap: MAX_EXACT_DARK,
        });
    }
    if dark_frame.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: dark_frame.len(),
        });
    }
    let dim = 1usize << (n + 1);
    let mut h = DMatrix::<C64>::zeros(dim, dim);
    let z = |k: usize, site: usize| if k >> site & 1 == 0 { 1.0 } else { -1.0 };
    for k in 0..dim {
        let central_one = k & 1 == 1;
        let mut diag = b * system.kappa_s * if central_one { 0.5 } else { -0.5 };
        for i in 0..n {
            let site = i + 1;
            diag += b * system.xi * z(k, site);
            if central_one {
                match dark_frame[i] {
                    DarkFrame::Z => diag += system.lambda[i] * z(k, site),
                    DarkFrame::X => h[(k ^ (1 << site), k)] += C64::new(system.lambda[i], 0.0),
                }
            }
        }
        if include_bath {
            for i in 0..n {
                for j in (i + 1)..n {
                    let kij = system.kappa_bath[i][j];
                    if kij == 0.0 {
                        continue;
                    }
                    let (si, sj) = (i + 1, j + 1);
                    // 3ZZ − (XX + YY + ZZ) = 2ZZ − (XX + YY)
                    diag += 2.0 * kij * z(k, si) * z(k, sj);
                    if z(k, si) != z(k, sj) {
                        // XX + YY = 2(σ⁺σ⁻ + σ⁻σ⁺)
                        h[(k ^ (1 << si) ^ (1 << sj), k)] += C64::new(-2.0 * kij, 0.0);
                    }
                }
            }
        }
        h[(k, k)] += C64::new(diag, 0.0);
    }
    OperatorMatrix::hermitian(h)
}

/// Samples a dark-spin configuration; bit `i` set means dark spin `i` is `|↓⟩`.
pub fn sample_configuration<R: Rng + ?Sized>(system: &SpinSystem, rng: &mut R) -> usize {
    let p_up = (1.0 + system.polarization) / 2.0;
    let mut bits = 0usize;
    for i in 0..system.n_dark() {
        if rng.gen::<f64>() >= p_up {
            bits |= 1 << i;
        }
    }
    bits
}

/// Product state with the sensor in `|0⟩` and the dark spins in `config`.
pub fn configuration_state(n_dark: usize, config: usize) -> Result<StateVector> {
    StateVector::basis(n_dark + 1, config << 1)
}

/// Central spin in `|0⟩`, each dark spin `|↑⟩` with probability `(1+P)/2`.
pub fn sample_initial_state<R: Rng + ?Sized>(system: &SpinSystem, rng: &mut R) -> Result<StateVector> {
    configuration_state(system.n_dark(), sample_configuration(system, rng))
}

/// Every dark configuration with its probability under polarization `P`;
/// zero-weight configurations are dropped.
pub fn configuration_weights(n_dark: usize, polarization: f64) -> Vec<(usize, f64)> {
    let up = (1.0 + polarization) / 2.0;
    let down = (1.0 - polarization) / 2.0;
    (0..1usize << n_dark)
        .map(|bits| {
            let n_down = bits.count_ones() as i32;
            (bits, up.powi(n_dark as i32 - n_down) * down.powi(n_down))
        })
        .filter(|&(_, w)| w > 0.0)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{embed_single_spin_op, pauli_x, pauli_y, pauli_z, projector_one};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    /// Independent construction from embedded operators and dense products.
    fn hamiltonian_by_embedding(system: &SpinSystem, b: f64, frames: &[DarkFrame], bath: bool) -> DMatrix<C64> {
        let n = system.n_spins();
        let dim = 1 << n;
        let e = |m: nalgebra::Matrix2<C64>, s| embed_single_spin_op(&m, s, n).unwrap().into_entries();
        let half = C64::new(0.5, 0.0);
        let sz = e(projector_one(), 0) - DMatrix::<C64>::identity(dim, dim) * half;
        let p1 = e(projector_one(), 0);
        let mut h = sz * C64::new(b * system.kappa_s(), 0.0);
        for i in 0..system.n_dark() {
            let s = i + 1;
            h += e(pauli_z(), s) * C64::new(b * system.xi(), 0.0);
            let coupling = match frames[i] {
                DarkFrame::Z => e(pauli_z(), s),
                DarkFrame::X => e(pauli_x(), s),
            };
            h += &p1 * coupling * C64::new(system.lambda()[i], 0.0);
        }
        if bath {
            for i in 0..system.n_dark() {
                for j in (i + 1)..system.n_dark() {
                    let (a, c) = (i + 1, j + 1);
                    let zz = e(pauli_z(), a) * e(pauli_z(), c);
                    let dot = e(pauli_x(), a) * e(pauli_x(), c)
                        + e(pauli_y(), a) * e(pauli_y(), c)
                        + &zz;
                    h += (zz * C64::new(3.0, 0.0) - dot) * C64::new(system.kappa_bath()[i][j], 0.0);
                }
            }
        }
        h
    }

    fn random_system(rng: &mut ChaCha8Rng, n: usize) -> SpinSystem {
        let lambda = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let mut k = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in (i + 1)..n {
                k[i][j] = rng.gen_range(-1.0..1.0);
                k[j][i] = k[i][j];
            }
        }
        SpinSystem::with_bath(lambda, k, 0.7, 1.3, 0.2).unwrap()
    }

    #[test]
    fn direct_build_matches_embedding() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 1..=4 {
            let system = random_system(&mut rng, n);
            let frames: Vec<_> = (0..n)
                .map(|i| if i % 2 == 0 { DarkFrame::Z } else { DarkFrame::X })
                .collect();
            for bath in [false, true] {
                let direct = build_hamiltonian(&system, 0.37, &frames, bath).unwrap();
                let oracle = hamiltonian_by_embedding(&system, 0.37, &frames, bath);
                assert!((direct.entries() - oracle).norm() < 1e-12, "n={n} bath={bath}");
                assert!(direct.is_hermitian());
            }
        }
    }

    #[test]
    fn zero_couplings_give_zero_matrix() {
        let system = SpinSystem::new(vec![0.0, 0.0], 1.0, 1.0, 0.0).unwrap();
        let h = build_hamiltonian(&system, 0.0, &[DarkFrame::Z; 2], false).unwrap();
        assert_eq!(h.entries().norm(), 0.0);
    }

    #[test]
    fn single_dark_coupling_block() {
        let system = SpinSystem::new(vec![2.0 * PI], 0.0, 0.0, 1.0).unwrap();
        let h = build_hamiltonian(&system, 0.0, &[DarkFrame::Z], false).unwrap();
        // |1⟩⟨1| ⊗ λσz: central-one block diag(+2π, −2π), central-zero block empty
        let d: Vec<f64> = (0..4).map(|k| h.entries()[(k, k)].re).collect();
        assert_eq!(d, vec![0.0, 2.0 * PI, 0.0, -2.0 * PI]);
    }

    #[test]
    fn bath_with_zero_couplings_matches_no_bath() {
        let system = SpinSystem::new(vec![0.3, -1.2, 0.8], 0.4, 0.9, 0.0).unwrap();
        let frames = [DarkFrame::Z, DarkFrame::X, DarkFrame::Z];
        let a = build_hamiltonian(&system, 0.2, &frames, true).unwrap();
        let b = build_hamiltonian(&system, 0.2, &frames, false).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn field_term_commutes_with_z_frame_coupling() {
        let system = SpinSystem::new(vec![0.3, -1.2, 0.8], 0.4, 0.9, 0.0).unwrap();
        let frames = [DarkFrame::Z; 3];
        let field = build_hamiltonian(&system.with_lambda(vec![0.0; 3]).unwrap(), 1.0, &frames, false).unwrap();
        let coupling = build_hamiltonian(&system, 0.0, &frames, false).unwrap();
        assert!(field.commutator_norm(&coupling).unwrap() < 1e-12);
    }

    #[test]
    fn dimension_cap() {
        let system = SpinSystem::new(vec![0.1; MAX_EXACT_DARK + 1], 0.0, 0.0, 0.0).unwrap();
        let frames = vec![DarkFrame::Z; MAX_EXACT_DARK + 1];
        assert!(matches!(
            build_hamiltonian(&system, 0.0, &frames, false),
            Err(Error::DimensionCap { .. })
        ));
    }

    #[test]
    fn system_validation() {
        assert!(SpinSystem::new(vec![1.0], 0.0, 0.0, 1.5).is_err());
        assert!(SpinSystem::with_bath(vec![1.0, 2.0], vec![vec![0.0, 1.0], vec![0.5, 0.0]], 0.0, 0.0, 0.0).is_err());
        assert!(SpinSystem::with_bath(vec![1.0], vec![vec![1.0]], 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn couplings_on_axis_and_magic_angle() {
        let g = Geometry {
            side: 4.0,
            positions: vec![[0.0, 0.0, 1.0], [1.0, 0.0, 2f64.sqrt()]],
        };
        let (lambda, _) = dipolar_couplings(&g).unwrap();
        assert!((lambda[0] + 2.0).abs() < 1e-15);
        // cos²θ = 2/3 for (1, 0, √2) is not magic; build the magic one explicitly
        let magic = Geometry {
            side: 4.0,
            positions: vec![[2f64.sqrt(), 0.0, 1.0]],
        };
        let (lm, _) = dipolar_couplings(&magic).unwrap();
        assert!(lm[0].abs() < 1e-15);
    }

    #[test]
    fn couplings_scale_as_inverse_cube() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = sample_geometry(6, 3.0, 0.1, &mut rng).unwrap();
        let doubled = Geometry {
            side: 6.0,
            positions: g.positions.iter().map(|p| [2.0 * p[0], 2.0 * p[1], 2.0 * p[2]]).collect(),
        };
        let (l1, k1) = dipolar_couplings(&g).unwrap();
        let (l2, k2) = dipolar_couplings(&doubled).unwrap();
        for (a, b) in l1.iter().zip(&l2) {
            assert!((a / 8.0 - b).abs() < 1e-12 * a.abs().max(1.0));
        }
        for (ra, rb) in k1.iter().zip(&k2) {
            for (a, b) in ra.iter().zip(rb) {
                assert!((a / 8.0 - b).abs() < 1e-12 * a.abs().max(1.0));
            }
        }
    }

    #[test]
    fn coincident_positions_rejected() {
        let g = Geometry {
            side: 1.0,
            positions: vec![[0.1, 0.1, 0.1], [0.1, 0.1, 0.1]],
        };
        assert!(dipolar_couplings(&g).is_err());
    }

    #[test]
    fn geometry_in_cube_and_deterministic() {
        let side = 20f64.cbrt();
        let mut a = ChaCha8Rng::seed_from_u64(11);
        let mut b = ChaCha8Rng::seed_from_u64(11);
        let g1 = sample_geometry(20, side, 0.05 * side, &mut a).unwrap();
        let g2 = sample_geometry(20, side, 0.05 * side, &mut b).unwrap();
        assert_eq!(g1, g2);
        assert_eq!(g1.positions.len(), 20);
        for (i, p) in g1.positions.iter().enumerate() {
            assert!(p.iter().all(|c| c.abs() <= side / 2.0));
            assert!(distance(p, &[0.0; 3]) >= 0.05 * side);
            for q in &g1.positions[..i] {
                assert!(distance(p, q) >= 0.05 * side);
            }
        }
        let empty = sample_geometry(0, side, 0.1, &mut a).unwrap();
        assert!(empty.positions.is_empty());
    }

    #[test]
    fn overcrowded_cube_is_a_config_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let err = sample_geometry(500, 1.0, 0.24, &mut rng).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(sample_geometry(1, 1.0, 0.3, &mut rng).is_err());
    }

    #[test]
    fn initial_state_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let up = SpinSystem::new(vec![0.1; 3], 0.0, 0.0, 1.0).unwrap();
        let down = up.with_polarization(-1.0).unwrap();
        for _ in 0..20 {
            assert_eq!(sample_initial_state(&up, &mut rng).unwrap(), StateVector::basis(4, 0).unwrap());
            assert_eq!(
                sample_initial_state(&down, &mut rng).unwrap(),
                StateVector::basis(4, 0b1110).unwrap()
            );
        }
    }

    #[test]
    fn unpolarized_up_fraction() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let system = SpinSystem::new(vec![0.1; 4], 0.0, 0.0, 0.0).unwrap();
        let draws = 10_000;
        let mut ups = [0usize; 4];
        for _ in 0..draws {
            let bits = sample_configuration(&system, &mut rng);
            for (i, u) in ups.iter_mut().enumerate() {
                *u += (bits >> i & 1 == 0) as usize;
            }
        }
        for u in ups {
            assert!((u as f64 / draws as f64 - 0.5).abs() < 0.02);
        }
    }

    #[test]
    fn ensemble_magnetization_tracks_polarization() {
        // ⟨Σ I_z⟩ with I = σ is n·P (n·P/2 in the σ/2 normalization)
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let system = SpinSystem::new(vec![0.1; 3], 0.0, 0.0, 0.4).unwrap();
        let draws = 20_000;
        let mut total = 0.0;
        for _ in 0..draws {
            let bits = sample_configuration(&system, &mut rng);
            total += (0..3).map(|i| if bits >> i & 1 == 0 { 1.0 } else { -1.0 }).sum::<f64>();
        }
        let mean = total / draws as f64;
        // binomial std of the mean ≈ √(3·(1−P²)/draws) ≈ 0.011
        assert!((mean - 3.0 * 0.4).abs() < 0.05, "{mean}");
    }

    #[test]
    fn configuration_weights_sum_to_one() {
        for p in [-1.0, -0.3, 0.0, 0.6, 1.0] {
            let w = configuration_weights(3, p);
            assert!((w.iter().map(|x| x.1).sum::<f64>() - 1.0).abs() < 1e-15);
        }
        assert_eq!(configuration_weights(3, 1.0), vec![(0, 1.0)]);
    }

    #[test]
    fn waveform_integrals() {
        let tau = 2.0;
        let dc = FieldWaveform::dc(0.3);
        assert!((dc.integral(0.5, 0.75, tau) - 0.3 * 0.5).abs() < 1e-15);
        let sq = FieldWaveform::echo_square(1.0);
        assert_eq!(sq.value_at(0.49), 1.0);
        assert_eq!(sq.value_at(0.5), -1.0);
        assert_eq!(sq.value_at(1.0), -1.0);
        assert!(sq.integral(0.0, 1.0, tau).abs() < 1e-15);
        let pw = FieldWaveform::piecewise(2.0, vec![(0.0, 1.0), (0.25, -1.0), (0.75, 0.5)]).unwrap();
        assert!((pw.integral(0.0, 1.0, 1.0) - 2.0 * (0.25 - 0.5 + 0.125)).abs() < 1e-15);
        assert!(FieldWaveform::piecewise(1.0, vec![(0.5, 1.0), (0.5, 2.0)]).is_err());
        assert!(FieldWaveform::piecewise(1.0, vec![(1.5, 1.0)]).is_err());
    }

    #[test]
    fn text_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let g = sample_geometry(4, 2.0, 0.1, &mut rng).unwrap();
        assert_eq!(Geometry::from_text(&g.to_text()).unwrap(), g);
        let system = SpinSystem::from_geometry(&g, 0.5, 1.0, 0.25).unwrap();
        assert_eq!(SpinSystem::from_text(&system.to_text()).unwrap(), system);
        assert!(SpinSystem::from_text("[system]\nlamda = 1\n").is_err());
    }

    #[test]
    fn subsystem_restricts_couplings() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let system = random_system(&mut rng, 4);
        let sub = system.subsystem(&[3, 1]).unwrap();
        assert_eq!(sub.lambda(), &[system.lambda()[3], system.lambda()[1]]);
        assert_eq!(sub.kappa_bath()[0][1], system.kappa_bath()[3][1]);
        assert!(system.subsystem(&[4]).is_err());
    }
}
