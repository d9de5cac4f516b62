//! Compressive-sensing parameters shared by the IMD and the programmer.

use std::sync::Arc;

use esafe_core::codec::{self, ShiftKey};
use esafe_core::recovery::{build_basis, gen_sensing_matrix, omp_solve, BasisKind};
use esafe_core::{BoundedSignal, CsCiphertext, Dictionary, RecoveryParams, SensingMatrix, SparsityBasis};

use crate::error::SetupError;

#[derive(Debug, Clone, PartialEq)]
pub struct CsProfile {
    pub n: usize,
    pub m: usize,
    pub lower: i64,
    pub upper: i64,
    pub quant_step: Option<u32>,
    pub phi_seed: Vec<u8>,
    pub basis: BasisKind,
}

impl CsProfile {
    /// 512 samples, CR 50, qs 20, bounds (590, 1487).
    pub fn standard() -> Self {
        Self {
            n: 512,
            m: 256,
            lower: 590,
            upper: 1487,
            quant_step: Some(20),
            phi_seed: b"esafe/default-phi".to_vec(),
            basis: BasisKind::Cosine,
        }
    }

    pub fn range(&self) -> i64 {
        self.upper - self.lower
    }
}

/// Profile plus the public matrices derived from it.
#[derive(Debug)]
pub struct CsContext {
    profile: CsProfile,
    phi: SensingMatrix,
    psi: SparsityBasis,
    dict: Dictionary,
}

impl CsContext {
    pub fn new(profile: CsProfile) -> Result<Arc<Self>, SetupError> {
        if profile.upper - profile.lower < 2 {
            return Err(SetupError::Config(format!(
                "bounds ({}, {}) leave no room for samples",
                profile.lower, profile.upper
            )));
        }
        let phi = gen_sensing_matrix(&profile.phi_seed, profile.m, profile.n)?;
        let psi = build_basis(profile.n, profile.basis)?;
        let dict = Dictionary::new(&phi, &psi)?;
        Ok(Arc::new(Self { profile, phi, psi, dict }))
    }

    /// Same matrices under other sample bounds and quantization step.
    pub fn rebound(&self, lower: i64, upper: i64, quant_step: Option<u32>) -> Result<Arc<Self>, SetupError> {
        if upper - lower < 2 {
            return Err(SetupError::Config(format!("bounds ({lower}, {upper}) leave no room for samples")));
        }
        Ok(Arc::new(Self {
            profile: CsProfile { lower, upper, quant_step, ..self.profile.clone() },
            phi: self.phi.clone(),
            psi: self.psi.clone(),
            dict: self.dict.clone(),
        }))
    }

    pub fn profile(&self) -> &CsProfile {
        &self.profile
    }

    pub fn phi(&self) -> &SensingMatrix {
        &self.phi
    }

    pub fn psi(&self) -> &SparsityBasis {
        &self.psi
    }

    pub fn dictionary(&self) -> &Dictionary {
        &self.dict
    }

    pub fn gen_key(&self, seed: &[u8]) -> esafe_core::Result<ShiftKey> {
        codec::cs_gen(seed, self.profile.n, self.profile.lower, self.profile.upper)
    }

    /// `cs_enc` followed by quantization when the profile asks for it.
    pub fn encrypt(&self, key: &ShiftKey, x: &BoundedSignal) -> esafe_core::Result<CsCiphertext> {
        let c = codec::cs_enc(key, x, &self.phi)?;
        match self.profile.quant_step {
            Some(qs) => codec::quantize(&c, qs),
            None => Ok(c),
        }
    }

    /// De-shift and reconstruct one ciphertext.
    pub fn decrypt(&self, key: &ShiftKey, c: &CsCiphertext) -> esafe_core::Result<Vec<f64>> {
        let y = codec::cs_deshift(key, c, &self.phi, self.profile.lower, self.profile.upper)?;
        let params = RecoveryParams::for_measurements(self.profile.m, &y, c.quant_step());
        let sol = omp_solve(&y, &self.dict, &params)?;
        self.psi.synthesize(&sol.coefficients)
    }

    /// Concatenated wire encodings of several ciphertexts.
    pub fn encode_batch(cs: &[CsCiphertext]) -> esafe_core::Result<Vec<u8>> {
        let mut out = Vec::new();
        for c in cs {
            out.extend(codec::encode_ciphertext(c)?);
        }
        Ok(out)
    }

    pub fn decode_batch(&self, mut bytes: &[u8]) -> esafe_core::Result<Vec<CsCiphertext>> {
        let mut out = Vec::new();
        while !bytes.is_empty() {
            let (c, used) = codec::decode_ciphertext::<f64>(bytes)?;
            if c.signal_len() != self.profile.n || c.measurement_count() != self.profile.m {
                return Err(esafe_core::Error::Dimension(format!(
                    "ciphertext is {}x{}, profile expects {}x{}",
                    c.measurement_count(),
                    c.signal_len(),
                    self.profile.m,
                    self.profile.n
                )));
            }
            out.push(c);
            bytes = &bytes[used..];
        }
        if out.is_empty() {
            return Err(esafe_core::Error::Decode("empty ciphertext batch".into()));
        }
        Ok(out)
    }
}
