use std::fmt;

use crate::error::{Error, Result};

/// Element kind carried by a [`Payload`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PayloadKind {
    F64,
    I64,
    Bytes,
}

impl PayloadKind {
    /// Size of one element in bytes.
    pub fn elem_size(self) -> usize {
        match self {
            PayloadKind::F64 | PayloadKind::I64 => 8,
            PayloadKind::Bytes => 1,
        }
    }
}

impl fmt::Display for PayloadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            PayloadKind::F64 => "f64",
            PayloadKind::I64 => "i64",
            PayloadKind::Bytes => "bytes",
        };
        f.write_str(name)
    }
}

/// A contiguous, typed message body. Payloads are moved into the runtime on
/// send and handed back whole on receive; the runtime never aliases them.
#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    F64(Vec<f64>),
    I64(Vec<i64>),
    Bytes(Vec<u8>),
}

impl Payload {
    pub fn kind(&self) -> PayloadKind {
        match self {
            Payload::F64(_) => PayloadKind::F64,
            Payload::I64(_) => PayloadKind::I64,
            Payload::Bytes(_) => PayloadKind::Bytes,
        }
    }

    /// Number of elements.
    pub fn len(&self) -> usize {
        match self {
            Payload::F64(v) => v.len(),
            Payload::I64(v) => v.len(),
            Payload::Bytes(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Message length in bytes: element count times element size.
    pub fn len_bytes(&self) -> u64 {
        (self.len() * self.kind().elem_size()) as u64
    }

    /// An empty payload of the same kind, used as an accumulator seed.
    pub fn empty_of(kind: PayloadKind) -> Payload {
        match kind {
            PayloadKind::F64 => Payload::F64(Vec::new()),
            PayloadKind::I64 => Payload::I64(Vec::new()),
            PayloadKind::Bytes => Payload::Bytes(Vec::new()),
        }
    }

    /// A zero-filled payload, used to reserve slots that no rank writes.
    pub fn zeros_of(kind: PayloadKind, len: usize) -> Payload {
        match kind {
            PayloadKind::F64 => Payload::F64(vec![0.0; len]),
            PayloadKind::I64 => Payload::I64(vec![0; len]),
            PayloadKind::Bytes => Payload::Bytes(vec![0; len]),
        }
    }

    /// Copies the element range `[start, start + len)` out as a new payload.
    /// Panics if the range is out of bounds; callers validate counts first.
    pub fn slice(&self, start: usize, len: usize) -> Payload {
        match self {
            Payload::F64(v) => Payload::F64(v[start..start + len].to_vec()),
            Payload::I64(v) => Payload::I64(v[start..start + len].to_vec()),
            Payload::Bytes(v) => Payload::Bytes(v[start..start + len].to_vec()),
        }
    }

    /// Writes `src` into `self` starting at element `offset`. Both payloads
    /// must have the same kind and the range must fit.
    pub(crate) fn write_at(&mut self, offset: usize, src: &Payload) {
        match (self, src) {
            (Payload::F64(dst), Payload::F64(s)) => dst[offset..offset + s.len()].copy_from_slice(s),
            (Payload::I64(dst), Payload::I64(s)) => dst[offset..offset + s.len()].copy_from_slice(s),
            (Payload::Bytes(dst), Payload::Bytes(s)) => {
                dst[offset..offset + s.len()].copy_from_slice(s)
            }
            _ => panic!("payload kind mismatch in write_at"),
        }
    }

    /// Unwraps an `F64` payload or reports which kind arrived instead.
    pub fn into_f64(self, op: &'static str) -> Result<Vec<f64>> {
        match self {
            Payload::F64(v) => Ok(v),
            other => Err(Error::KindMismatch {
                op,
                expected: PayloadKind::F64,
                actual: other.kind(),
            }),
        }
    }

    /// Unwraps an `I64` payload or reports which kind arrived instead.
    pub fn into_i64(self, op: &'static str) -> Result<Vec<i64>> {
        match self {
            Payload::I64(v) => Ok(v),
            other => Err(Error::KindMismatch {
                op,
                expected: PayloadKind::I64,
                actual: other.kind(),
            }),
        }
    }

    /// Unwraps a `Bytes` payload or reports which kind arrived instead.
    pub fn into_bytes(self, op: &'static str) -> Result<Vec<u8>> {
        match self {
            Payload::Bytes(v) => Ok(v),
            other => Err(Error::KindMismatch {
                op,
                expected: PayloadKind::Bytes,
                actual: other.kind(),
            }),
        }
    }
}

impl From<Vec<f64>> for Payload {
    fn from(v: Vec<f64>) -> Self {
        Payload::F64(v)
    }
}

impl From<Vec<i64>> for Payload {
    fn from(v: Vec<i64>) -> Self {
        Payload::I64(v)
    }
}

impl From<Vec<u8>> for Payload {
    fn from(v: Vec<u8>) -> Self {
        Payload::Bytes(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn byte_length_scales_with_element_size() {
        assert_eq!(Payload::F64(vec![1.0, 2.0]).len_bytes(), 16);
        assert_eq!(Payload::I64(vec![1, 2, 3]).len_bytes(), 24);
        assert_eq!(Payload::Bytes(vec![0; 5]).len_bytes(), 5);
        assert_eq!(Payload::F64(Vec::new()).len_bytes(), 0);
    }

    #[test]
    fn slice_copies_the_requested_range() {
        let p = Payload::I64(vec![10, 20, 30, 40]);
        assert_eq!(p.slice(2, 1), Payload::I64(vec![30]));
        assert_eq!(p.slice(0, 4), p);
    }

    #[test]
    fn into_kind_reports_mismatches() {
        let err = Payload::Bytes(vec![1]).into_f64("reduce").unwrap_err();
        assert!(matches!(
            err,
            Error::KindMismatch {
                op: "reduce",
                expected: PayloadKind::F64,
                actual: PayloadKind::Bytes,
            }
        ));
    }

    #[test]
    fn write_at_places_elements_without_disturbing_neighbors() {
        let mut buf = Payload::zeros_of(PayloadKind::I64, 4);
        buf.write_at(3, &Payload::I64(vec![9]));
        buf.write_at(0, &Payload::I64(vec![7, 8]));
        assert_eq!(buf, Payload::I64(vec![7, 8, 0, 9]));
    }
}
