//! Versioned binary parameter files.
//!
//! Layout, little-endian: magic `NIMUCKPT`, version `u16`, configuration
//! text (`u32` length + UTF-8), parameter count `u32`, then per parameter a
//! `u16`-length name, `u8` rank, `u32` dims and `f32` values. An optional
//! optimizer section follows (flag `u8`, Adam step `u64`, first and second
//! moments in parameter order, training-state text). The file ends with a
//! CRC-32 of everything before it.

use std::path::Path;

use super::adam::AdamState;
use super::params::ParamSet;
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::kv::KeyValues;
use crate::scalar::Scalar;

const MAGIC: &[u8; 8] = b"NIMUCKPT";
const VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerSection {
    pub step: u64,
    pub m: Vec<Vec<f32>>,
    pub v: Vec<Vec<f32>>,
    pub train_state: KeyValues,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: KeyValues,
    pub params: Vec<NamedTensor>,
    pub optimizer: Option<OptimizerSection>,
}

impl Checkpoint {
    pub fn from_params<T: Scalar>(config: KeyValues, params: &ParamSet<T>) -> Self {
        let params = params
            .iter()
            .map(|(n, t)| NamedTensor {
                name: n.to_string(),
                shape: t.shape().to_vec(),
                data: t.data().iter().map(|v| v.as_f64() as f32).collect(),
            })
            .collect();
        Self { config, params, optimizer: None }
    }

    pub fn with_optimizer<T: Scalar>(mut self, adam: &AdamState<T>, train_state: KeyValues) -> Self {
        let conv = |ts: &[Tensor<T>]| ts.iter().map(|t| t.data().iter().map(|v| v.as_f64() as f32).collect()).collect();
        self.optimizer = Some(OptimizerSection { step: adam.step, m: conv(&adam.m), v: conv(&adam.v), train_state });
        self
    }

    /// Copies stored values into `params`, which must have the same names and
    /// shapes in the same order.
    pub fn restore_into<T: Scalar>(&self, params: &mut ParamSet<T>) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::Shape(format!(
                "checkpoint has {} parameters, network has {}",
                self.params.len(),
                params.len()
            )));
        }
        for (id, nt) in params.ids().collect::<Vec<_>>().into_iter().zip(&self.params) {
            if params.name(id) != nt.name || params.get(id).shape() != nt.shape.as_slice() {
                return Err(Error::Shape(format!(
                    "checkpoint parameter {} {:?} does not match {} {:?}",
                    nt.name,
                    nt.shape,
                    params.name(id),
                    params.get(id).shape()
                )));
            }
            let dst = params.get_mut(id).data_mut();
            for (d, &s) in dst.iter_mut().zip(&nt.data) {
                *d = T::lit(s as f64);
            }
        }
        Ok(())
    }

    pub fn restore_optimizer<T: Scalar>(&self, params: &ParamSet<T>) -> Result<Option<(AdamState<T>, KeyValues)>> {
        let Some(o) = &self.optimizer else { return Ok(None) };
        let mut adam = AdamState::new(params);
        if o.m.len() != adam.m.len() {
            return Err(Error::Shape("optimizer moments do not match parameters".into()));
        }
        for (dst, src) in adam.m.iter_mut().chain(adam.v.iter_mut()).zip(o.m.iter().chain(&o.v)) {
            if dst.len() != src.len() {
                return Err(Error::Shape("optimizer moment length mismatch".into()));
            }
            dst.data_mut().iter_mut().zip(src).for_each(|(d, &s)| *d = T::lit(s as f64));
        }
        adam.step = o.step;
        Ok(Some((adam, o.train_state.clone())))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut b = Vec::new();
        b.extend_from_slice(MAGIC);
        b.extend_from_slice(&VERSION.to_le_bytes());
        put_text(&mut b, &self.config.to_string());
        b.extend_from_slice(&(self.params.len() as u32).to_le_bytes());
        for p in &self.params {
            b.extend_from_slice(&(p.name.len() as u16).to_le_bytes());
            b.extend_from_slice(p.name.as_bytes());
            b.push(p.shape.len() as u8);
            for &d in &p.shape {
                b.extend_from_slice(&(d as u32).to_le_bytes());
            }
            put_f32s(&mut b, &p.data);
        }
        match &self.optimizer {
            None => b.push(0),
            Some(o) => {
                b.push(1);
                b.extend_from_slice(&o.step.to_le_bytes());
                for t in o.m.iter().chain(&o.v) {
                    put_f32s(&mut b, t);
                }
                put_text(&mut b, &o.train_state.to_string());
            }
        }
        let crc = crc32fast::hash(&b);
        b.extend_from_slice(&crc.to_le_bytes());
        b
    }

    pub fn from_bytes(bytes: &[u8], origin: &Path) -> Result<Self> {
        if bytes.len() < MAGIC.len() + 6 || &bytes[..8] != MAGIC {
            return Err(Error::format("checkpoint", format!("{} is not a checkpoint", origin.display())));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        if crc32fast::hash(body) != u32::from_le_bytes(tail.try_into().expect("4 bytes")) {
            return Err(Error::Checksum(origin.to_path_buf()));
        }
        let mut r = Reader { b: body, at: 8 };
        let version = r.u16()?;
        if version != VERSION {
            return Err(Error::format("checkpoint", format!("unsupported version {version}")));
        }
        let config = KeyValues::parse(&r.text()?)?;
        let n = r.u32()? as usize;
        let mut params = Vec::with_capacity(n);
        for _ in 0..n {
            let len = r.u16()? as usize;
            let name = String::from_utf8(r.take(len)?.to_vec()).map_err(|_| Error::format("checkpoint", "bad name"))?;
            let rank = r.take(1)?[0] as usize;
            let shape = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let data = r.f32s(shape.iter().product())?;
            params.push(NamedTensor { name, shape, data });
        }
        let optimizer = match r.take(1)?[0] {
            0 => None,
            1 => {
                let step = r.u64()?;
                let lens: Vec<usize> = params.iter().map(|p| p.data.len()).collect();
                let m = lens.iter().map(|&l| r.f32s(l)).collect::<Result<Vec<_>>>()?;
                let v = lens.iter().map(|&l| r.f32s(l)).collect::<Result<Vec<_>>>()?;
                let train_state = KeyValues::parse(&r.text()?)?;
                Some(OptimizerSection { step, m, v, train_state })
            }
            f => return Err(Error::format("checkpoint", format!("bad optimizer flag {f}"))),
        };
        if r.at != body.len() {
            return Err(Error::format("checkpoint", "trailing bytes"));
        }
        Ok(Self { config, params, optimizer })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }
}

fn put_text(b: &mut Vec<u8>, s: &str) {
    b.extend_from_slice(&(s.len() as u32).to_le_bytes());
    b.extend_from_slice(s.as_bytes());
}

fn put_f32s(b: &mut Vec<u8>, v: &[f32]) {
    for x in v {
        b.extend_from_slice(&x.to_le_bytes());
    }
}

struct Reader<'a> {
    b: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.b.len());
        let end = end.ok_or_else(|| Error::format("checkpoint", "unexpected end of file"))?;
        let s = &self.b[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn text(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::format("checkpoint", "text is not UTF-8"))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let raw = self.take(n.checked_mul(4).ok_or_else(|| Error::format("checkpoint", "size overflow"))?)?;
        Ok(raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect())
    }
}
