//! Little-endian binary primitives shared by parameter files and checkpoints.

use crate::error::FormatError;
use crate::nn::{Adam, Params, Tensor};

type Res<T> = std::result::Result<T, FormatError>;

#[derive(Debug, Default)]
pub struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    pub fn new() -> Self {
        Encoder::default()
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }

    pub fn raw(&mut self, bytes: &[u8]) {
        self.buf.extend_from_slice(bytes);
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u128(&mut self, v: u128) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn len_prefixed(&mut self, bytes: &[u8]) {
        self.u64(bytes.len() as u64);
        self.raw(bytes);
    }

    pub fn str(&mut self, s: &str) {
        self.len_prefixed(s.as_bytes());
    }

    pub fn f64s(&mut self, values: &[f64]) {
        self.u64(values.len() as u64);
        for &v in values {
            self.f64(v);
        }
    }

    /// Shape table followed by the raw reals of every tensor:
    ///
    /// ```text
    /// u32 count
    /// count x { u8 rank, rank x u32 dim }
    /// sum(len) x f64
    /// ```
    pub fn tensors<'a>(&mut self, tensors: impl IntoIterator<Item = &'a Tensor>) {
        let tensors: Vec<&Tensor> = tensors.into_iter().collect();
        self.u32(tensors.len() as u32);
        for t in &tensors {
            self.u8(t.shape().len() as u8);
            for &d in t.shape() {
                self.u32(d as u32);
            }
        }
        for t in &tensors {
            for &v in t.data() {
                self.f64(v);
            }
        }
    }

    pub fn params<P: Params + ?Sized>(&mut self, p: &P) {
        self.tensors(p.tensors());
    }

    /// Step counter and moment estimates; hyperparameters are not stored.
    pub fn adam(&mut self, opt: &Adam) {
        self.u64(opt.step);
        self.tensors(&opt.first);
        self.tensors(&opt.second);
    }
}

#[derive(Debug)]
pub struct Decoder<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Decoder<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Decoder { buf, pos: 0 }
    }

    pub fn raw(&mut self, n: usize) -> Res<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(FormatError::Truncated);
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn array<const N: usize>(&mut self) -> Res<[u8; N]> {
        let mut out = [0u8; N];
        out.copy_from_slice(self.raw(N)?);
        Ok(out)
    }

    pub fn u8(&mut self) -> Res<u8> {
        Ok(self.raw(1)?[0])
    }

    pub fn u32(&mut self) -> Res<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    pub fn u64(&mut self) -> Res<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    pub fn u128(&mut self) -> Res<u128> {
        Ok(u128::from_le_bytes(self.array()?))
    }

    pub fn f64(&mut self) -> Res<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    pub fn usize(&mut self) -> Res<usize> {
        let v = self.u64()?;
        usize::try_from(v).map_err(|_| FormatError::Malformed(format!("length {v} too large")))
    }

    pub fn len_prefixed(&mut self) -> Res<&'a [u8]> {
        let n = self.usize()?;
        self.raw(n)
    }

    pub fn str(&mut self) -> Res<String> {
        let bytes = self.len_prefixed()?;
        String::from_utf8(bytes.to_vec()).map_err(|_| FormatError::Malformed("invalid UTF-8".into()))
    }

    pub fn f64s(&mut self) -> Res<Vec<f64>> {
        let n = self.usize()?;
        if n > (self.buf.len() - self.pos) / 8 {
            return Err(FormatError::Truncated);
        }
        (0..n).map(|_| self.f64()).collect()
    }

    pub fn tensors(&mut self) -> Res<Vec<Tensor>> {
        let count = self.u32()? as usize;
        let mut shapes = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            let rank = self.u8()? as usize;
            let dims = (0..rank).map(|_| self.u32().map(|d| d as usize)).collect::<Res<Vec<_>>>()?;
            shapes.push(dims);
        }
        let mut out = Vec::with_capacity(shapes.len());
        for shape in shapes {
            let n: usize = shape.iter().product();
            if n > (self.buf.len() - self.pos) / 8 {
                return Err(FormatError::Truncated);
            }
            let data = (0..n).map(|_| self.f64()).collect::<Res<Vec<_>>>()?;
            out.push(Tensor::new(shape, data).map_err(|e| FormatError::Malformed(e.to_string()))?);
        }
        Ok(out)
    }

    /// Reads a tensor block into an existing container, requiring identical
    /// shapes.
    pub fn params_into<P: Params + ?Sized>(&mut self, p: &mut P) -> Res<()> {
        let loaded = self.tensors()?;
        let mut dst = p.tensors_mut();
        if loaded.len() != dst.len() {
            return Err(FormatError::Malformed(format!(
                "expected {} tensors, found {}",
                dst.len(),
                loaded.len()
            )));
        }
        for (d, s) in dst.iter_mut().zip(loaded) {
            if d.shape() != s.shape() {
                return Err(FormatError::Malformed(format!(
                    "tensor shape {:?} where {:?} expected",
                    s.shape(),
                    d.shape()
                )));
            }
            **d = s;
        }
        Ok(())
    }

    /// Restores the state written by [`Encoder::adam`] into an optimizer
    /// built for the same parameters.
    pub fn adam_into(&mut self, opt: &mut Adam) -> Res<()> {
        let step = self.u64()?;
        let first = self.tensors()?;
        let second = self.tensors()?;
        let congruent = |a: &[Tensor], b: &[Tensor]| a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.shape() == y.shape());
        if !congruent(&first, &opt.first) || !congruent(&second, &opt.second) {
            return Err(FormatError::Malformed("optimizer moments do not match the parameters".into()));
        }
        opt.step = step;
        opt.first = first;
        opt.second = second;
        Ok(())
    }

    pub fn is_finished(&self) -> bool {
        self.pos == self.buf.len()
    }

    pub fn finish(&self) -> Res<()> {
        if self.is_finished() {
            Ok(())
        } else {
            Err(FormatError::Malformed(format!("{} trailing bytes", self.buf.len() - self.pos)))
        }
    }
}
