//! Flat `key = value` training configuration.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::model::Decoding;
use crate::policy::Mode;
use crate::schedule::{Schedule, ScheduleKind};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub train: Option<PathBuf>,
    pub valid: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub min_count: u64,
    pub embed_dim: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub bptt: usize,
    pub hidden: usize,
    pub layers: usize,
    pub mode: Mode,
    pub ss_schedule: ScheduleKind,
    pub ss_start: f64,
    pub ss_end: f64,
    pub nnrs_schedule: ScheduleKind,
    pub nnrs_start: f64,
    pub nnrs_end: f64,
    pub base_lr: f64,
    pub clip: f64,
    pub momentum: f64,
    pub freeze_embeddings: bool,
    pub seed: u64,
    /// Neighbor count; `None` means `round(log2 |V|)`.
    pub k: Option<usize>,
    pub tau_init: f64,
    pub gumbel_beta: f64,
    pub decoding: Decoding,
    pub trace: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            train: None,
            valid: None,
            test: None,
            embeddings: None,
            output_dir: None,
            min_count: 1,
            embed_dim: 64,
            epochs: 20,
            batch_size: 20,
            bptt: 35,
            hidden: 128,
            layers: 2,
            mode: Mode::Mle,
            ss_schedule: ScheduleKind::Static,
            ss_start: 0.0,
            ss_end: 0.0,
            nnrs_schedule: ScheduleKind::Static,
            nnrs_start: 0.0,
            nnrs_end: 0.0,
            base_lr: 20.0,
            clip: 0.25,
            momentum: 0.0,
            freeze_embeddings: false,
            seed: 1,
            k: None,
            tau_init: 0.1,
            gumbel_beta: 0.9,
            decoding: Decoding::Greedy,
            trace: false,
        }
    }
}

pub const KEYS: &[&str] = &[
    "train",
    "valid",
    "test",
    "embeddings",
    "output_dir",
    "min_count",
    "embed_dim",
    "epochs",
    "batch_size",
    "bptt",
    "hidden",
    "layers",
    "mode",
    "ss_schedule",
    "ss_start",
    "ss_end",
    "nnrs_schedule",
    "nnrs_start",
    "nnrs_end",
    "base_lr",
    "clip",
    "momentum",
    "freeze_embeddings",
    "seed",
    "k",
    "tau_init",
    "gumbel_beta",
    "decoding",
    "trace",
];

fn num<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("{key}: cannot parse {v:?}"),
    })
}

fn boolean(line: usize, key: &str, v: &str) -> Result<bool> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::Parse {
            line,
            msg: format!("{key}: expected true or false, got {v:?}"),
        }),
    }
}

fn at_line(line: usize, e: Error) -> Error {
    Error::Parse {
        line,
        msg: e.to_string(),
    }
}

impl TrainConfig {
    /// Parses `key = value` lines; `#` starts a comment. Relative paths are
    /// kept as written.
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body.split_once('=').ok_or_else(|| Error::Parse {
                line,
                msg: format!("expected key = value, got {body:?}"),
            })?;
            let (key, v) = (key.trim(), value.trim());
            match key {
                "train" => c.train = Some(v.into()),
                "valid" => c.valid = Some(v.into()),
                "test" => c.test = Some(v.into()),
                "embeddings" => c.embeddings = Some(v.into()),
                "output_dir" => c.output_dir = Some(v.into()),
                "min_count" => c.min_count = num(line, key, v)?,
                "embed_dim" => c.embed_dim = num(line, key, v)?,
                "epochs" => c.epochs = num(line, key, v)?,
                "batch_size" => c.batch_size = num(line, key, v)?,
                "bptt" => c.bptt = num(line, key, v)?,
                "hidden" => c.hidden = num(line, key, v)?,
                "layers" => c.layers = num(line, key, v)?,
                "mode" => c.mode = v.parse().map_err(|e| at_line(line, e))?,
                "ss_schedule" => c.ss_schedule = v.parse().map_err(|e| at_line(line, e))?,
                "ss_start" => c.ss_start = num(line, key, v)?,
                "ss_end" => c.ss_end = num(line, key, v)?,
                "nnrs_schedule" => c.nnrs_schedule = v.parse().map_err(|e| at_line(line, e))?,
                "nnrs_start" => c.nnrs_start = num(line, key, v)?,
                "nnrs_end" => c.nnrs_end = num(line, key, v)?,
                "base_lr" => c.base_lr = num(line, key, v)?,
                "clip" => c.clip = num(line, key, v)?,
                "momentum" => c.momentum = num(line, key, v)?,
                "freeze_embeddings" => c.freeze_embeddings = boolean(line, key, v)?,
                "seed" => c.seed = num(line, key, v)?,
                "k" => {
                    c.k = if v == "auto" {
                        None
                    } else {
                        Some(num(line, key, v)?)
                    }
                }
                "tau_init" => c.tau_init = num(line, key, v)?,
                "gumbel_beta" => c.gumbel_beta = num(line, key, v)?,
                "decoding" => c.decoding = v.parse().map_err(|e| at_line(line, e))?,
                "trace" => c.trace = boolean(line, key, v)?,
                other => {
                    return Err(Error::Parse {
                        line,
                        msg: format!("unknown key {other:?}; valid keys: {}", KEYS.join(", ")),
                    })
                }
            }
        }
        c.validate()?;
        Ok(c)
    }

    /// Reads a config file and resolves relative paths against its directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        let mut c = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut c.train,
            &mut c.valid,
            &mut c.test,
            &mut c.embeddings,
            &mut c.output_dir,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("epochs", self.epochs),
            ("batch_size", self.batch_size),
            ("bptt", self.bptt),
            ("hidden", self.hidden),
            ("layers", self.layers),
            ("embed_dim", self.embed_dim),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::invalid(format!("{name} must be at least 1")));
            }
        }
        if self.k == Some(0) {
            return Err(Error::invalid("k must be at least 1"));
        }
        if !(self.base_lr > 0.0 && self.base_lr.is_finite()) {
            return Err(Error::invalid(format!("base_lr {} must be positive", self.base_lr)));
        }
        if self.clip.is_nan() || self.clip < 0.0 {
            return Err(Error::invalid(format!("clip {} must be non-negative", self.clip)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid(format!("momentum {} outside [0, 1)", self.momentum)));
        }
        if !(self.gumbel_beta > 0.0 && self.gumbel_beta <= 1.0) {
            return Err(Error::invalid(format!(
                "gumbel_beta {} outside (0, 1]",
                self.gumbel_beta
            )));
        }
        if !self.tau_init.is_finite() {
            return Err(Error::invalid("tau_init must be finite"));
        }
        self.schedules()?;
        Ok(())
    }

    /// `(scheduled sampling, neighbor replacement)` rate schedules.
    pub fn schedules(&self) -> Result<(Schedule, Schedule)> {
        Ok((
            Schedule::new(self.ss_schedule, self.ss_start, self.ss_end)?,
            Schedule::new(self.nnrs_schedule, self.nnrs_start, self.nnrs_end)?,
        ))
    }

    /// Canonical `key = value` text; parsing it yields the same config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        for (key, p) in [
            ("train", path(&self.train)),
            ("valid", path(&self.valid)),
            ("test", path(&self.test)),
            ("embeddings", path(&self.embeddings)),
            ("output_dir", path(&self.output_dir)),
        ] {
            if let Some(p) = p {
                let _ = writeln!(s, "{key} = {p}");
            }
        }
        let k = self.k.map_or("auto".to_string(), |k| k.to_string());
        let _ = write!(
            s,
            "min_count = {}\nembed_dim = {}\nepochs = {}\nbatch_size = {}\nbptt = {}\n\
             hidden = {}\nlayers = {}\nmode = {}\nss_schedule = {}\nss_start = {:?}\n\
             ss_end = {:?}\nnnrs_schedule = {}\nnnrs_start = {:?}\nnnrs_end = {:?}\n\
             base_lr = {:?}\nclip = {:?}\nmomentum = {:?}\nfreeze_embeddings = {}\nseed = {}\n\
             k = {k}\ntau_init = {:?}\ngumbel_beta = {:?}\ndecoding = {}\ntrace = {}\n",
            self.min_count,
            self.embed_dim,
            self.epochs,
            self.batch_size,
            self.bptt,
            self.hidden,
            self.layers,
            self.mode,
            self.ss_schedule,
            self.ss_start,
            self.ss_end,
            self.nnrs_schedule,
            self.nnrs_start,
            self.nnrs_end,
            self.base_lr,
            self.clip,
            self.momentum,
            self.freeze_embeddings,
            self.seed,
            self.tau_init,
            self.gumbel_beta,
            self.decoding,
            self.trace,
        );
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_round_trips() {
        let text = "# grid point\nmode = ss_nnrs\nss_schedule = linear\nss_end = 0.5\n\
                    nnrs_schedule = static\nnnrs_end = 0.2  # trailing comment\nepochs = 3\nk = 4\n\
                    train = data/train.txt\n";
        let c = TrainConfig::parse(text).unwrap();
        assert_eq!(c.mode, Mode::SsNnrs);
        assert_eq!(c.ss_end, 0.5);
        assert_eq!(c.nnrs_end, 0.2);
        assert_eq!(c.k, Some(4));
        assert_eq!(c.train.as_deref(), Some(Path::new("data/train.txt")));
        assert_eq!(TrainConfig::parse(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn unknown_key_lists_valid_keys() {
        let err = TrainConfig::parse("epochz = 3").unwrap_err().to_string();
        assert!(err.contains("epochz"), "{err}");
        assert!(err.contains("batch_size") && err.contains("gumbel_beta"), "{err}");
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(TrainConfig::parse("epochs = 0").is_err());
        assert!(TrainConfig::parse("ss_end = 1.5").is_err());
        assert!(TrainConfig::parse("k = 0").is_err());
        assert!(TrainConfig::parse("mode = beam").is_err());
        assert!(TrainConfig::parse("no equals sign").is_err());
    }
}
