//! JSON record types for states, channels, filters, and experiment configs.
//!
//! Conventions: matrices are row-major; states carry subsystem dims
//! `[dA, dB]` (a single system is `[d, 1]`); every record rejects unknown
//! fields so malformed configs fail loudly before execution.

use crate::chain::{ChainConfig, FilterKind, FilterSchedule, FilterSpec};
use crate::channels::QuantumChannel;
use crate::qmath::{CMatrix, CVector, C64};
use crate::states::{DensityMatrix, PureState};
use crate::tol::Tolerances;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Row-major complex matrix: `dims = [rows, cols]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixRecord {
    pub dims: [usize; 2],
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl MatrixRecord {
    pub fn from_matrix(m: &CMatrix) -> Self {
        let (rows, cols) = (m.nrows(), m.ncols());
        let mut re = Vec::with_capacity(rows * cols);
        let mut im = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                re.push(m[(i, j)].re);
                im.push(m[(i, j)].im);
            }
        }
        MatrixRecord {
            dims: [rows, cols],
            re,
            im,
        }
    }

    pub fn to_matrix(&self) -> Result<CMatrix> {
        let [rows, cols] = self.dims;
        if self.re.len() != rows * cols || self.im.len() != rows * cols {
            return Err(Error::DimMismatch(format!(
                "matrix record dims {rows}x{cols} but {} re / {} im entries",
                self.re.len(),
                self.im.len()
            )));
        }
        Ok(CMatrix::from_fn(rows, cols, |i, j| {
            C64::new(self.re[i * cols + j], self.im[i * cols + j])
        }))
    }
}

/// A pure or mixed state. For `kind = "pure"` the entries are the dA·dB
/// amplitudes; for `kind = "density"` they are the (dA·dB)² matrix entries,
/// row-major.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum StateRecord {
    Pure {
        dims: [usize; 2],
        re: Vec<f64>,
        im: Vec<f64>,
    },
    Density {
        dims: [usize; 2],
        re: Vec<f64>,
        im: Vec<f64>,
    },
}

impl StateRecord {
    pub fn from_pure(psi: &PureState) -> Self {
        let (da, db) = psi.dims();
        StateRecord::Pure {
            dims: [da, db],
            re: psi.amplitudes().iter().map(|z| z.re).collect(),
            im: psi.amplitudes().iter().map(|z| z.im).collect(),
        }
    }

    pub fn from_density(rho: &DensityMatrix) -> Self {
        let (da, db) = rho.dims();
        let rec = MatrixRecord::from_matrix(rho.matrix());
        StateRecord::Density {
            dims: [da, db],
            re: rec.re,
            im: rec.im,
        }
    }

    pub fn to_density(&self) -> Result<DensityMatrix> {
        self.to_density_with(&Tolerances::default())
    }

    pub fn to_density_with(&self, tol: &Tolerances) -> Result<DensityMatrix> {
        match self {
            StateRecord::Pure { .. } => {
                let psi = self.to_pure_with(tol)?;
                Ok(psi.to_density())
            }
            StateRecord::Density { dims, re, im } => {
                let d = dims[0] * dims[1];
                if re.len() != d * d || im.len() != d * d {
                    return Err(Error::DimMismatch(format!(
                        "density record needs {d}x{d} entries"
                    )));
                }
                let m = CMatrix::from_fn(d, d, |i, j| C64::new(re[i * d + j], im[i * d + j]));
                DensityMatrix::new_with(m, (dims[0], dims[1]), tol)
            }
        }
    }

    pub fn to_pure(&self) -> Result<PureState> {
        self.to_pure_with(&Tolerances::default())
    }

    pub fn to_pure_with(&self, tol: &Tolerances) -> Result<PureState> {
        match self {
            StateRecord::Pure { dims, re, im } => {
                let d = dims[0] * dims[1];
                if re.len() != d || im.len() != d {
                    return Err(Error::DimMismatch(format!(
                        "pure record needs {d} amplitudes"
                    )));
                }
                let amps = CVector::from_fn(d, |i, _| C64::new(re[i], im[i]));
                PureState::new_with(amps, (dims[0], dims[1]), tol)
            }
            StateRecord::Density { .. } => {
                Err(Error::InvalidParam("expected a pure state record".into()))
            }
        }
    }
}

/// Explicit Kraus representation of a channel.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelRecord {
    pub d_in: usize,
    pub d_out: usize,
    pub kraus: Vec<MatrixRecord>,
    pub trace_preserving: bool,
}

impl ChannelRecord {
    pub fn from_channel(ch: &QuantumChannel) -> Self {
        ChannelRecord {
            d_in: ch.d_in(),
            d_out: ch.d_out(),
            kraus: ch.kraus().iter().map(MatrixRecord::from_matrix).collect(),
            trace_preserving: ch.is_trace_preserving(),
        }
    }

    pub fn to_channel(&self) -> Result<QuantumChannel> {
        let kraus = self
            .kraus
            .iter()
            .map(|r| r.to_matrix())
            .collect::<Result<Vec<_>>>()?;
        for k in &kraus {
            if k.nrows() != self.d_out || k.ncols() != self.d_in {
                return Err(Error::DimMismatch(
                    "Kraus record shape does not match d_out x d_in".into(),
                ));
            }
        }
        QuantumChannel::new(kraus, self.trace_preserving)
    }
}

/// Named channel constructors addressable from configs and the CLI, plus an
/// escape hatch for explicit Kraus sets (`channel = "custom"`).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    pub channel: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kraus: Option<ChannelRecord>,
}

impl ChannelSpec {
    pub fn named(name: &str, d: Option<usize>, p: Option<f64>, gamma: Option<f64>) -> Self {
        ChannelSpec {
            channel: name.to_string(),
            d,
            p,
            gamma,
            kraus: None,
        }
    }

    pub fn build(&self) -> Result<QuantumChannel> {
        let need = |v: Option<f64>, what: &str| {
            v.ok_or_else(|| {
                Error::InvalidParam(format!("channel '{}' needs {what}", self.channel))
            })
        };
        match self.channel.as_str() {
            "identity" => Ok(QuantumChannel::identity(self.d.unwrap_or(2))),
            "depolarizing" => {
                QuantumChannel::depolarizing(self.d.unwrap_or(2), need(self.p, "p")?)
            }
            "amplitude_damping" => QuantumChannel::amplitude_damping(need(self.gamma, "gamma")?),
            "dephasing" => QuantumChannel::dephasing(need(self.p, "p")?),
            "custom" => self
                .kraus
                .as_ref()
                .ok_or_else(|| Error::InvalidParam("custom channel needs a kraus record".into()))?
                .to_channel(),
            other => Err(Error::InvalidParam(format!("unknown channel '{other}'"))),
        }
    }
}

/// One filter: kind, product Kraus pairs, and the accept set for slocc.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterRecord {
    pub kind: FilterKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pairs: Vec<FilterPairRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub accept: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterPairRecord {
    pub m: MatrixRecord,
    pub n: MatrixRecord,
}

impl FilterRecord {
    pub fn none() -> Self {
        FilterRecord {
            kind: FilterKind::None,
            pairs: Vec::new(),
            accept: Vec::new(),
        }
    }

    pub fn from_filter(f: &FilterSpec) -> Self {
        FilterRecord {
            kind: f.kind(),
            pairs: f
                .pairs()
                .iter()
                .map(|(m, n)| FilterPairRecord {
                    m: MatrixRecord::from_matrix(m),
                    n: MatrixRecord::from_matrix(n),
                })
                .collect(),
            accept: f.accept().to_vec(),
        }
    }

    pub fn to_filter(&self) -> Result<FilterSpec> {
        match self.kind {
            FilterKind::None => Ok(FilterSpec::none()),
            FilterKind::Deterministic | FilterKind::Slocc => {
                let pairs = self
                    .pairs
                    .iter()
                    .map(|p| Ok((p.m.to_matrix()?, p.n.to_matrix()?)))
                    .collect::<Result<Vec<_>>>()?;
                if self.kind == FilterKind::Deterministic {
                    FilterSpec::deterministic(pairs)
                } else {
                    FilterSpec::slocc(pairs, self.accept.clone())
                }
            }
        }
    }
}

/// Filter schedule: either one filter repeated or an explicit per-step list.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum FilterScheduleRecord {
    Repeat(FilterRecord),
    PerStep(Vec<FilterRecord>),
}

impl FilterScheduleRecord {
    pub fn to_schedule(&self) -> Result<FilterSchedule> {
        match self {
            FilterScheduleRecord::Repeat(f) => Ok(FilterSchedule::Repeat(f.to_filter()?)),
            FilterScheduleRecord::PerStep(fs) => Ok(FilterSchedule::PerStep(
                fs.iter().map(|f| f.to_filter()).collect::<Result<Vec<_>>>()?,
            )),
        }
    }
}

fn default_trajectories() -> u64 {
    1
}

fn default_threshold() -> f64 {
    0.5
}

/// JSON shape of a chain experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfigRecord {
    pub channel: ChannelSpec,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filters: Option<FilterScheduleRecord>,
    pub initial: StateRecord,
    #[serde(default = "default_threshold")]
    pub threshold_c: f64,
    #[serde(default = "default_trajectories")]
    pub trajectories: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub record_states: bool,
}

impl ChainConfigRecord {
    pub fn to_config(&self) -> Result<ChainConfig> {
        self.to_config_with(&Tolerances::default())
    }

    pub fn to_config_with(&self, tol: &Tolerances) -> Result<ChainConfig> {
        let channel = self.channel.build()?;
        let initial = self.initial.to_density_with(tol)?;
        let mut config = ChainConfig::new(channel, self.n, initial);
        if let Some(f) = &self.filters {
            config.filters = f.to_schedule()?;
        }
        config.threshold_c = self.threshold_c;
        config.trajectories = self.trajectories;
        config.seed = self.seed;
        config.record_states = self.record_states;
        Ok(config)
    }
}
