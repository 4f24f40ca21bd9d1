use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ParamBlock {
    pub name: String,
    pub shape: Vec<usize>,
}

impl ParamBlock {
    pub fn new(name: impl Into<String>, shape: Vec<usize>) -> Self {
        Self {
            name: name.into(),
            shape,
        }
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Flat parameter vector plus the per-layer shapes it flattens.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights {
    values: Vec<f64>,
    layout: Vec<ParamBlock>,
}

const MAGIC: &[u8; 4] = b"FSW1";

impl ModelWeights {
    pub fn new(values: Vec<f64>, layout: Vec<ParamBlock>) -> Result<Self> {
        let total: usize = layout.iter().map(ParamBlock::len).sum();
        if total != values.len() {
            return Err(Error::ShapeMismatch(format!(
                "layout describes {total} values, vector has {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("model weights".into()));
        }
        Ok(Self { values, layout })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn layout(&self) -> &[ParamBlock] {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Same layout, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(values, self.layout.clone())
    }

    /// Splits the flat vector back into per-block slices.
    pub fn blocks(&self) -> Vec<(&ParamBlock, &[f64])> {
        let mut rest = self.values.as_slice();
        self.layout
            .iter()
            .map(|b| {
                let (head, tail) = rest.split_at(b.len());
                rest = tail;
                (b, head)
            })
            .collect()
    }

    pub fn from_blocks(blocks: Vec<(ParamBlock, Vec<f64>)>) -> Result<Self> {
        let mut values = Vec::new();
        let mut layout = Vec::new();
        for (b, v) in blocks {
            if v.len() != b.len() {
                return Err(Error::ShapeMismatch(format!("block {} has wrong length", b.name)));
            }
            values.extend(v);
            layout.push(b);
        }
        Self::new(values, layout)
    }

    pub fn l2_distance(&self, other: &ModelWeights) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Wire format, little-endian:
    /// `"FSW1"`, u32 block count, per block (u32 name length, name bytes,
    /// u32 rank, u64 dims…), u64 value count, f64 values.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.serialized_len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.layout.len() as u32).to_le_bytes());
        for b in &self.layout {
            out.extend_from_slice(&(b.name.len() as u32).to_le_bytes());
            out.extend_from_slice(b.name.as_bytes());
            out.extend_from_slice(&(b.shape.len() as u32).to_le_bytes());
            for &d in &b.shape {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
        }
        out.extend_from_slice(&(self.values.len() as u64).to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Byte length of [`to_bytes`](Self::to_bytes), the unit of communication cost.
    pub fn serialized_len(&self) -> usize {
        let header: usize = self
            .layout
            .iter()
            .map(|b| 4 + b.name.len() + 4 + 8 * b.shape.len())
            .sum();
        4 + 4 + header + 8 + 8 * self.values.len()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::invalid("bad weight blob magic"));
        }
        let n_blocks = r.u32()? as usize;
        let mut layout = Vec::with_capacity(n_blocks.min(1024));
        for _ in 0..n_blocks {
            let len = r.u32()? as usize;
            let name = String::from_utf8(r.take(len)?.to_vec())
                .map_err(|_| Error::invalid("weight block name is not UTF-8"))?;
            let rank = r.u32()? as usize;
            let shape = (0..rank).map(|_| r.u64().map(|d| d as usize)).collect::<Result<_>>()?;
            layout.push(ParamBlock { name, shape });
        }
        let n = r.u64()? as usize;
        let values = (0..n)
            .map(|_| r.take(8).map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes"))))
            .collect::<Result<Vec<_>>>()?;
        if r.pos != bytes.len() {
            return Err(Error::invalid("trailing bytes after weight blob"));
        }
        Self::new(values, layout)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::invalid("truncated weight blob"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}
