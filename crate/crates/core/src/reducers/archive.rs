//! `RDX1` reducer archives.
//!
//! ```text
//! "RDX1" | version u8 | technique tag u8
//! u64 len | spec (JSON)
//! u64 len | scaler (binary)
//! u64 len | model payload (binary)
//! ```
//!
//! All integers and floats are little-endian; floats are stored bit-exact so
//! a reloaded reducer transforms identically.

use nalgebra::DMatrix;

use super::{
    FittedReducer, IcaModel, IpcaModel, Kernel, KpcaModel, Model, ReducerError, ReducerSpec,
    Technique, UmapModel, VarThreshModel,
};
use crate::preprocess::FittedScaler;
use crate::reducers::kpca::KernelParams;

pub const RDX1_MAGIC: &[u8; 4] = b"RDX1";
pub const RDX1_VERSION: u8 = 0x01;

#[derive(Default)]
struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u64(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u64).to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, v: &[f64]) {
        self.u64(v.len());
        v.iter().for_each(|x| self.f64(*x));
    }
    fn f32s(&mut self, v: &[f32]) {
        self.u64(v.len());
        v.iter()
            .for_each(|x| self.0.extend_from_slice(&x.to_le_bytes()));
    }
    fn usizes(&mut self, v: &[usize]) {
        self.u64(v.len());
        v.iter().for_each(|x| self.u64(*x));
    }
    fn matrix(&mut self, m: &DMatrix<f64>) {
        self.u64(m.nrows());
        self.u64(m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                self.f64(m[(i, j)]);
            }
        }
    }
    fn section(&mut self, bytes: &[u8]) {
        self.u64(bytes.len());
        self.0.extend_from_slice(bytes);
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    what: &'static str,
}

fn corrupt(msg: impl Into<String>) -> ReducerError {
    ReducerError::CorruptArchive(msg.into())
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8], what: &'static str) -> Self {
        Self { buf, what }
    }
    fn take(&mut self, n: usize) -> Result<&'a [u8], ReducerError> {
        if self.buf.len() < n {
            return Err(corrupt(format!("{} truncated", self.what)));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }
    fn u8(&mut self) -> Result<u8, ReducerError> {
        Ok(self.take(1)?[0])
    }
    fn u64(&mut self) -> Result<usize, ReducerError> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().unwrap());
        usize::try_from(v).map_err(|_| corrupt(format!("{}: length overflow", self.what)))
    }
    fn f64(&mut self) -> Result<f64, ReducerError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    /// Element count, checked against the bytes left so corrupt lengths
    /// cannot trigger huge allocations.
    fn len(&mut self, width: usize) -> Result<usize, ReducerError> {
        let n = self.u64()?;
        if n.checked_mul(width).is_none_or(|b| b > self.buf.len()) {
            return Err(corrupt(format!("{} truncated", self.what)));
        }
        Ok(n)
    }
    fn f64s(&mut self) -> Result<Vec<f64>, ReducerError> {
        let n = self.len(8)?;
        (0..n).map(|_| self.f64()).collect()
    }
    fn f32s(&mut self) -> Result<Vec<f32>, ReducerError> {
        let n = self.len(4)?;
        Ok(self
            .take(n * 4)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
    fn usizes(&mut self) -> Result<Vec<usize>, ReducerError> {
        let n = self.len(8)?;
        (0..n).map(|_| self.u64()).collect()
    }
    fn matrix(&mut self) -> Result<DMatrix<f64>, ReducerError> {
        let r = self.u64()?;
        let c = self.u64()?;
        if r.checked_mul(c)
            .and_then(|n| n.checked_mul(8))
            .is_none_or(|b| b > self.buf.len())
        {
            return Err(corrupt(format!("{} truncated", self.what)));
        }
        let mut m = DMatrix::zeros(r, c);
        for i in 0..r {
            for j in 0..c {
                m[(i, j)] = self.f64()?;
            }
        }
        Ok(m)
    }
    fn section(&mut self) -> Result<&'a [u8], ReducerError> {
        let n = self.u64()?;
        self.take(n)
    }
    fn finish(self) -> Result<(), ReducerError> {
        if self.buf.is_empty() {
            Ok(())
        } else {
            Err(corrupt(format!(
                "{}: {} trailing bytes",
                self.what,
                self.buf.len()
            )))
        }
    }
}

fn encode_scaler(s: &FittedScaler) -> Vec<u8> {
    let mut w = Writer::default();
    match s {
        FittedScaler::Standard { mean, std } => {
            w.u8(0);
            w.f64s(mean);
            w.f64s(std);
        }
        FittedScaler::MinMax { min, max } => {
            w.u8(1);
            w.f64s(min);
            w.f64s(max);
        }
        FittedScaler::Identity { dim } => {
            w.u8(2);
            w.u64(*dim);
        }
    }
    w.0
}

fn decode_scaler(bytes: &[u8]) -> Result<FittedScaler, ReducerError> {
    let mut r = Reader::new(bytes, "scaler");
    let s = match r.u8()? {
        0 => FittedScaler::Standard {
            mean: r.f64s()?,
            std: r.f64s()?,
        },
        1 => FittedScaler::MinMax {
            min: r.f64s()?,
            max: r.f64s()?,
        },
        2 => FittedScaler::Identity { dim: r.u64()? },
        t => return Err(corrupt(format!("unknown scaler kind {t}"))),
    };
    r.finish()?;
    Ok(s)
}

fn kernel_tag(k: Kernel) -> u8 {
    match k {
        Kernel::Poly => 0,
        Kernel::Rbf => 1,
        Kernel::Sigmoid => 2,
        Kernel::Cosine => 3,
    }
}

fn encode_model(model: &Model) -> Vec<u8> {
    let mut w = Writer::default();
    match model {
        Model::Ipca(m) => {
            w.u64(m.samples_seen);
            w.f64s(&m.mean);
            w.matrix(&m.components);
            w.f64s(&m.singular_values);
            w.f64s(&m.variance);
        }
        Model::Ica(m) => {
            w.u8(u8::from(m.converged));
            w.u64(m.n_iter);
            w.f64s(&m.mean);
            w.matrix(&m.whitening);
            w.matrix(&m.unmixing);
            w.matrix(&m.components);
        }
        Model::Kpca(m) => {
            w.u8(kernel_tag(m.params.kernel));
            w.f64(m.params.gamma);
            w.u64(m.dim);
            w.f32s(&m.train);
            w.f64s(&m.eigenvalues);
            w.u64(m.eigenvectors.len());
            m.eigenvectors.iter().for_each(|v| w.f64s(v));
            w.f64s(&m.gram_row_means);
            w.f64(m.gram_mean);
        }
        Model::VarThresh(m) => {
            w.f64s(&m.variances);
            w.f64(m.threshold);
            w.usizes(&m.selected);
        }
        Model::Umap(m) => {
            w.u64(m.k);
            w.u64(m.dim);
            w.u64(m.n_neighbors);
            w.f64(m.a);
            w.f64(m.b);
            w.f64(m.mean_knn_distance);
            w.u64(m.seed as usize);
            w.u8(u8::from(m.spectral_init));
            w.f32s(&m.train);
            w.f64s(&m.rhos);
            w.f64s(&m.sigmas);
            w.f64s(&m.embedding);
        }
    }
    w.0
}

fn check(cond: bool, msg: &str) -> Result<(), ReducerError> {
    if cond {
        Ok(())
    } else {
        Err(corrupt(msg))
    }
}

fn decode_model(t: Technique, bytes: &[u8]) -> Result<Model, ReducerError> {
    let mut r = Reader::new(bytes, "model payload");
    let model = match t {
        Technique::Ipca => {
            let m = IpcaModel {
                samples_seen: r.u64()?,
                mean: r.f64s()?,
                components: r.matrix()?,
                singular_values: r.f64s()?,
                variance: r.f64s()?,
            };
            check(
                m.components.ncols() == m.mean.len()
                    && m.singular_values.len() == m.components.nrows()
                    && m.variance.len() == m.mean.len(),
                "inconsistent ipca shapes",
            )?;
            Model::Ipca(m)
        }
        Technique::Ica => {
            let m = IcaModel {
                converged: r.u8()? != 0,
                n_iter: r.u64()?,
                mean: r.f64s()?,
                whitening: r.matrix()?,
                unmixing: r.matrix()?,
                components: r.matrix()?,
            };
            check(
                m.components.ncols() == m.mean.len() && m.components.nrows() == m.unmixing.nrows(),
                "inconsistent ica shapes",
            )?;
            Model::Ica(m)
        }
        Technique::Kpca => {
            let kernel = match r.u8()? {
                0 => Kernel::Poly,
                1 => Kernel::Rbf,
                2 => Kernel::Sigmoid,
                3 => Kernel::Cosine,
                k => return Err(corrupt(format!("unknown kernel tag {k}"))),
            };
            let gamma = r.f64()?;
            let dim = r.u64()?;
            let train = r.f32s()?;
            let eigenvalues = r.f64s()?;
            let nvec = r.len(8)?;
            let eigenvectors = (0..nvec).map(|_| r.f64s()).collect::<Result<Vec<_>, _>>()?;
            let gram_row_means = r.f64s()?;
            let gram_mean = r.f64()?;
            let n = gram_row_means.len();
            check(
                dim > 0
                    && train.len() == n * dim
                    && eigenvectors.len() == eigenvalues.len()
                    && eigenvectors.iter().all(|v| v.len() == n),
                "inconsistent kpca shapes",
            )?;
            Model::Kpca(KpcaModel {
                params: KernelParams { kernel, gamma },
                train,
                dim,
                eigenvalues,
                eigenvectors,
                gram_row_means,
                gram_mean,
            })
        }
        Technique::VarThresh => {
            let m = VarThreshModel {
                variances: r.f64s()?,
                threshold: r.f64()?,
                selected: r.usizes()?,
            };
            check(
                m.selected.iter().all(|&j| j < m.variances.len()),
                "variance selection out of range",
            )?;
            Model::VarThresh(m)
        }
        Technique::Umap => {
            let m = UmapModel {
                k: r.u64()?,
                dim: r.u64()?,
                n_neighbors: r.u64()?,
                a: r.f64()?,
                b: r.f64()?,
                mean_knn_distance: r.f64()?,
                seed: r.u64()? as u64,
                spectral_init: r.u8()? != 0,
                train: r.f32s()?,
                rhos: r.f64s()?,
                sigmas: r.f64s()?,
                embedding: r.f64s()?,
            };
            let n = m.rhos.len();
            check(
                m.dim > 0
                    && m.train.len() == n * m.dim
                    && m.sigmas.len() == n
                    && m.embedding.len() == n * m.k
                    && m.n_neighbors >= 1
                    && m.n_neighbors <= n,
                "inconsistent umap shapes",
            )?;
            Model::Umap(m)
        }
    };
    r.finish()?;
    Ok(model)
}

pub fn save_reducer(r: &FittedReducer) -> Vec<u8> {
    let mut w = Writer::default();
    w.0.extend_from_slice(RDX1_MAGIC);
    w.u8(RDX1_VERSION);
    w.u8(r.spec.technique.tag());
    w.section(&serde_json::to_vec(&r.spec).expect("spec serializes"));
    w.section(&encode_scaler(&r.scaler));
    w.section(&encode_model(&r.model));
    w.0
}

pub fn load_reducer(bytes: &[u8]) -> Result<FittedReducer, ReducerError> {
    let mut r = Reader::new(bytes, "archive");
    if r.take(4)
        .map_err(|_| corrupt("archive shorter than its header"))?
        != RDX1_MAGIC
    {
        return Err(corrupt("bad magic (expected RDX1)"));
    }
    let version = r.u8()?;
    if version != RDX1_VERSION {
        return Err(ReducerError::VersionMismatch {
            found: version,
            expected: RDX1_VERSION,
        });
    }
    let tag = r.u8()?;
    let spec: ReducerSpec =
        serde_json::from_slice(r.section()?).map_err(|e| corrupt(format!("spec: {e}")))?;
    if spec.technique.tag() != tag {
        return Err(corrupt(format!(
            "technique tag {tag} does not match spec ({})",
            spec.technique
        )));
    }
    let scaler = decode_scaler(r.section()?)?;
    let model = decode_model(spec.technique, r.section()?)?;
    r.finish()?;
    let out = FittedReducer {
        spec,
        scaler,
        model,
    };
    let input = match &out.model {
        Model::Ipca(m) => m.mean.len(),
        Model::Ica(m) => m.mean.len(),
        Model::Kpca(m) => m.dim,
        Model::VarThresh(m) => m.variances.len(),
        Model::Umap(m) => m.dim,
    };
    check(
        input == out.scaler.dim(),
        "scaler and model dimensions differ",
    )?;
    Ok(out)
}
